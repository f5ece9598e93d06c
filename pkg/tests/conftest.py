import numpy as np
import pytest

from grls.behavior import Trajectory
from grls.control import NoiseModel, simulate
from grls.manifold import SubspaceBall, orthonormalize, random_stiefel
from grls.solver import RobustLsqProblem


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_problem(rng, n, k, rho=0.3, gamma=4.0, selector="partial", mu=0.0):
    """Random instance; selector is 'partial' (first n//3 rows), 'full', or
    an explicit index array."""
    Yh = random_stiefel(n, k, rng)
    b = rng.standard_normal(n)
    if selector == "partial":
        m_idx = np.arange(max(n // 3, 1))
    elif selector == "full":
        m_idx = np.arange(n)
    else:
        m_idx = np.asarray(selector)
    return RobustLsqProblem(ball=SubspaceBall(Yh, rho), b=b, M=m_idx, gamma=gamma, mu=mu)


def true_behavior_basis(system, L):
    """Model-based orthonormal basis of all length-L windows: unit initial
    states plus unit input pulses, simulated noiselessly."""
    n_x, m = system.n_x, system.m
    cols = []
    quiet = NoiseModel(sigma=0.0)
    for i in range(n_x):
        x0 = np.zeros(n_x)
        x0[i] = 1.0
        cols.append(simulate(system, x0, np.zeros((L, m)), quiet).samples.reshape(-1))
    for t in range(L):
        for j in range(m):
            u = np.zeros((L, m))
            u[t, j] = 1.0
            cols.append(simulate(system, np.zeros(n_x), u, quiet).samples.reshape(-1))
    return orthonormalize(np.column_stack(cols))


def gpe_trajectory(system, T, seed=0, sigma=0.0):
    """Differenced-white excitation trajectory, output-RMS normalized, with
    optional measurement noise at ratio sigma."""
    rng = np.random.default_rng(seed)
    u = np.diff(rng.standard_normal((T + 1, system.m)), axis=0)
    quiet = NoiseModel(sigma=0.0)
    w0 = simulate(system, np.zeros(system.n_x), u, quiet)
    rms = float(np.sqrt(np.mean(w0.samples[:, system.m :] ** 2)))
    u = u / rms
    w0 = simulate(system, np.zeros(system.n_x), u, quiet)
    if sigma > 0:
        samples = w0.samples.copy()
        samples[:, system.m :] += sigma * rng.standard_normal((T, system.p))
        return Trajectory(samples)
    return w0
