"""LTI simulation, offline identification, and receding-horizon tracking.

The loop solves one robust least-squares instance per time step: the stacked
vector b carries the trailing measured window plus the reference block, the
selector M pins the measured window, and the first input block of the
worst-case-consistent trajectory is applied to the plant.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .behavior import BehaviorEstimate, Trajectory, behavior_dimension, gpe_check, hankel, identify_subspace
from .errors import DimensionMismatch, GrlsError
from .manifold import SubspaceBall, orthonormalize
from .solver import RobustLsqProblem, SolverOptions, solve

__all__ = [
    "LtiSystem",
    "NoiseModel",
    "ControlConfig",
    "ClosedLoopLog",
    "simulate",
    "assemble_problem",
    "receding_horizon",
    "nominal_controller",
    "identify_offline",
    "double_integrator",
    "laplacian3",
    "SYSTEM_REGISTRY",
    "default_config",
]


@dataclass(frozen=True)
class LtiSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
            raise DimensionMismatch("inconsistent state-space dimensions")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch(
                f"D must be {C.shape[0]} x {B.shape[1]}, got {D.shape}"
            )
        for name, mat in (("A", A), ("B", B), ("C", C), ("D", D)):
            mat = np.ascontiguousarray(mat)
            mat.flags.writeable = False
            object.__setattr__(self, name, mat)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def q(self) -> int:
        return self.m + self.p


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian measurement noise sigma * normalizer * xi(t).

    normalizer is the RMS of the noiseless output over the identification
    run, so sigma acts as a noise-to-signal ratio.
    """

    sigma: float
    seed: int = 0
    normalizer: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


def double_integrator() -> LtiSystem:
    return LtiSystem(
        A=[[1.0, 0.5], [0.0, 1.0]],
        B=[[0.125], [0.5]],
        C=[[1.0, 0.0]],
        D=[[0.0]],
    )


def laplacian3() -> LtiSystem:
    # D is the 1 x 3 zero matrix (one output, three inputs).
    return LtiSystem(
        A=[[1.01, 0.01, 0.0], [0.01, 1.01, 0.01], [0.0, 0.01, 1.01]],
        B=np.eye(3),
        C=[[1.0, 0.0, 0.0]],
        D=np.zeros((1, 3)),
    )


SYSTEM_REGISTRY = {
    "double_integrator": double_integrator,
    "laplacian3": laplacian3,
}


@dataclass(frozen=True)
class ControlConfig:
    """Closed-loop experiment parameters; the window length is L = T_ini + T_f."""

    T_ini: int = 10
    T_f: int = 25
    T: int = 40
    T_data: int = 115
    gamma: float = 4.0
    rho_deg: float = 1.0
    sigma: float = 0.1
    alpha: float = 0.1
    tolx: float = 1e-6
    max_iter: int = 20000
    mu: float = 0.0
    seed: int = 0
    x0: tuple = (0.0, 0.0)
    w_ref_point: tuple = (0.0, 1.0)
    weight_diag: tuple | None = None

    def __post_init__(self):
        if self.T_ini < 0 or self.T_f < 1 or self.T < 1:
            raise ValueError("need T_ini >= 0, T_f >= 1, T >= 1")
        if self.weight_diag is not None and any(w <= 0 for w in self.weight_diag):
            raise ValueError("weight_diag entries must be positive")

    @property
    def L(self) -> int:
        return self.T_ini + self.T_f

    @property
    def rho(self) -> float:
        return float(np.sin(np.deg2rad(self.rho_deg)))

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["L"] = self.L
        d["rho"] = self.rho
        return d


def default_config(system_name: str) -> ControlConfig:
    """Table parameters for the built-in case studies."""
    if system_name == "double_integrator":
        return ControlConfig()
    if system_name == "laplacian3":
        return ControlConfig(
            T=150,
            T_data=150,
            rho_deg=2.0,
            x0=(-1.5, 0.0, 0.0),
            w_ref_point=(0.0, 0.0, 0.0, 0.0),
        )
    raise KeyError(f"unknown system {system_name!r}")


def simulate(
    system: LtiSystem,
    x0,
    inputs: np.ndarray,
    noise: NoiseModel,
    rng: np.random.Generator | None = None,
) -> Trajectory:
    """Exact state recursion with additive measurement noise; the returned
    trajectory stacks w(t) = col(u(t), y(t))."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[1] != system.m:
        raise DimensionMismatch(f"inputs must have {system.m} columns")
    T = inputs.shape[0]
    x = np.asarray(x0, dtype=float).reshape(system.n_x)
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    w = np.empty((T, system.q))
    scale = noise.sigma * noise.normalizer
    for t in range(T):
        u = inputs[t]
        y = system.C @ x + system.D @ u
        if scale > 0:
            y = y + scale * rng.standard_normal(system.p)
        w[t, : system.m] = u
        w[t, system.m :] = y
        x = system.A @ x + system.B @ u
    return Trajectory(w)


def identify_offline(
    system: LtiSystem,
    L: int,
    k: int | None = None,
    T_data: int = 115,
    sigma: float = 0.0,
    seed: int = 0,
    max_retries: int = 10,
):
    """Offline subspace identification from one excitation experiment.

    Inputs are i.i.d. normal, rescaled so the noiseless output has unit RMS
    (the noise normalizer then sits at the operating magnitude and sigma acts
    as a true noise-to-signal ratio). The excitation is redrawn with a fresh
    seed until the noiseless Hankel matrix passes the rank check.

    Returns (estimate, noise_model, data, gpe_rank, used_seed).
    """
    if k is None:
        k = behavior_dimension(system.m, system.n_x, L)
    x0 = np.zeros(system.n_x)
    quiet = NoiseModel(sigma=0.0, seed=0)
    for attempt in range(max_retries):
        used_seed = seed + attempt
        rng = np.random.default_rng(used_seed)
        # differenced white noise: balances input and output magnitudes for
        # marginally stable plants, where white input drowns the input rows
        # of the Hankel matrix after output normalization
        u = np.diff(rng.standard_normal((T_data + 1, system.m)), axis=0)
        w0 = simulate(system, x0, u, quiet)
        y0 = w0.samples[:, system.m :]
        rms = float(np.sqrt(np.mean(y0**2)))
        if rms > 0:
            u = u / rms
            w0 = simulate(system, x0, u, quiet)
        res = gpe_check(hankel(w0, L), expected_rank=k)
        if not res.passed:
            continue
        y0 = w0.samples[:, system.m :]
        normalizer = float(np.sqrt(np.mean(y0**2)))
        noise = NoiseModel(sigma=sigma, seed=used_seed, normalizer=normalizer)
        if sigma > 0:
            xi = np.random.default_rng(used_seed + 7_000_003).standard_normal(
                (T_data, system.p)
            )
            samples = w0.samples.copy()
            samples[:, system.m :] += sigma * normalizer * xi
            data = Trajectory(samples)
        else:
            data = w0
        est = identify_subspace(data, L, k)
        return est, noise, data, res.rank, used_seed
    raise GrlsError(
        f"excitation failed the rank check {max_retries} times (rank {res.rank}, wanted {k})"
    )


def assemble_problem(
    estimate: BehaviorEstimate,
    w_ini: np.ndarray,
    cfg: ControlConfig,
) -> RobustLsqProblem:
    """b = col(w_ini, reference block repeated T_f times); M selects the
    leading q T_ini coordinates."""
    if estimate.L != cfg.L:
        raise DimensionMismatch(
            f"estimate window {estimate.L} != config window {cfg.L}"
        )
    q = estimate.q
    w_ini = np.asarray(w_ini, dtype=float).reshape(-1)
    if w_ini.size != q * cfg.T_ini:
        raise DimensionMismatch(
            f"w_ini has size {w_ini.size}, expected {q * cfg.T_ini}"
        )
    ref = np.asarray(cfg.w_ref_point, dtype=float).reshape(-1)
    if ref.size != q:
        raise DimensionMismatch(f"w_ref_point has size {ref.size}, expected {q}")
    b = np.concatenate([w_ini, np.tile(ref, cfg.T_f)])
    ball = SubspaceBall(estimate.subspace, cfg.rho)
    return RobustLsqProblem(
        ball=ball,
        b=b,
        M=np.arange(q * cfg.T_ini),
        gamma=cfg.gamma,
        mu=cfg.mu,
    )


@dataclass
class ClosedLoopLog:
    """Per-step closed-loop records; y is the measured output the controller
    saw, y_true the noise-free plant output."""

    t: np.ndarray
    u: np.ndarray
    y: np.ndarray
    y_true: np.ndarray
    ref: np.ndarray
    lambda_star: np.ndarray
    iterations: np.ndarray
    gradnorm: np.ndarray
    consistency: np.ndarray
    converged: np.ndarray
    config: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        m = self.u.shape[1]
        p = self.y.shape[1]
        with open(path, "w", newline="") as fh:
            for key, val in self.config.items():
                fh.write(f"# {key} = {val}\n")
            writer = csv.writer(fh)
            writer.writerow(
                ["t"]
                + [f"u_{i + 1}" for i in range(m)]
                + [f"y_{i + 1}" for i in range(p)]
                + [f"r_{i + 1}" for i in range(p)]
                + ["lambda", "iters", "gradnorm"]
            )
            for i in range(self.t.size):
                writer.writerow(
                    [int(self.t[i])]
                    + [repr(float(v)) for v in self.u[i]]
                    + [repr(float(v)) for v in self.y[i]]
                    + [repr(float(v)) for v in self.ref[i]]
                    + [
                        repr(float(self.lambda_star[i])),
                        int(self.iterations[i]),
                        repr(float(self.gradnorm[i])),
                    ]
                )

    def lambda_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,lambda\n")
            for i in range(self.t.size):
                fh.write(f"{int(self.t[i])},{float(self.lambda_star[i])!r}\n")


class _Scaler:
    """Diagonal per-channel weighting applied by coordinate scaling.

    With D = diag(sqrt(weights)) tiled over the window, the weighted tracking
    norm becomes the plain norm of the scaled coordinates; the behavior
    subspace is scaled and re-orthonormalized once.
    """

    def __init__(self, weights, q: int, L: int):
        d = np.sqrt(np.asarray(weights, dtype=float).reshape(-1))
        if d.size != q:
            raise DimensionMismatch(f"weight_diag has size {d.size}, expected {q}")
        self.d = np.tile(d, L)

    def scale_estimate(self, est: BehaviorEstimate) -> BehaviorEstimate:
        basis = orthonormalize(self.d[:, None] * est.subspace.basis)
        return BehaviorEstimate(
            subspace=basis, L=est.L, k=est.k, singular_values=est.singular_values
        )

    def scale_vec(self, v: np.ndarray) -> np.ndarray:
        # d is channel-periodic, so prefixes scale window vectors of any depth
        return self.d[: v.size] * v

    def unscale_vec(self, v: np.ndarray) -> np.ndarray:
        return v / self.d[: v.size]


def receding_horizon(
    system: LtiSystem,
    estimate: BehaviorEstimate,
    cfg: ControlConfig,
    noise: NoiseModel,
) -> ClosedLoopLog:
    """Warm up the measured window with zero input, then at every step solve
    the robust problem, apply the first future input, measure, and shift."""
    q = system.q
    if estimate.q != q:
        raise DimensionMismatch("estimate channel count does not match the system")
    scaler = (
        _Scaler(cfg.weight_diag, q, cfg.L) if cfg.weight_diag is not None else None
    )
    est = scaler.scale_estimate(estimate) if scaler else estimate
    rng = np.random.default_rng(noise.seed)
    nscale = noise.sigma * noise.normalizer
    x = np.asarray(cfg.x0, dtype=float).reshape(system.n_x)
    ref = np.asarray(cfg.w_ref_point, dtype=float).reshape(-1)

    window = []
    for _ in range(cfg.T_ini):
        u = np.zeros(system.m)
        y_true = system.C @ x + system.D @ u
        e = nscale * rng.standard_normal(system.p) if nscale > 0 else 0.0
        window.append(np.concatenate([u, y_true + e]))
        x = system.A @ x + system.B @ u

    T = cfg.T
    log = ClosedLoopLog(
        t=np.arange(1, T + 1),
        u=np.empty((T, system.m)),
        y=np.empty((T, system.p)),
        y_true=np.empty((T, system.p)),
        ref=np.tile(ref[system.m :], (T, 1)),
        lambda_star=np.empty(T),
        iterations=np.empty(T, dtype=int),
        gradnorm=np.empty(T),
        consistency=np.empty(T),
        converged=np.empty(T, dtype=bool),
        config={**cfg.as_dict(), "sigma": noise.sigma, "normalizer": noise.normalizer,
                "noise_seed": noise.seed},
    )

    x_prev = None
    n_ini = q * cfg.T_ini
    for t in range(T):
        w_ini = np.concatenate(window) if window else np.zeros(0)
        prob = assemble_problem(est, scaler.scale_vec(w_ini) if scaler else w_ini, cfg)
        opts = SolverOptions(
            alpha=cfg.alpha,
            tolx=cfg.tolx,
            max_iter=cfg.max_iter,
            x0=x_prev,
        )
        res = solve(prob, opts)
        x_prev = res.x_star
        w_star = scaler.unscale_vec(res.w_star) if scaler else res.w_star
        u = w_star[n_ini : n_ini + system.m]
        y_true = system.C @ x + system.D @ u
        e = nscale * rng.standard_normal(system.p) if nscale > 0 else np.zeros(system.p)
        y_meas = y_true + e
        log.u[t] = u
        log.y[t] = y_meas
        log.y_true[t] = y_true
        log.lambda_star[t] = res.inner.lambda_star
        log.iterations[t] = res.iterations
        log.gradnorm[t] = res.gradnorm_trace[-1]
        log.consistency[t] = float(np.linalg.norm(w_star[:n_ini] - w_ini))
        log.converged[t] = res.converged
        x = system.A @ x + system.B @ u
        if cfg.T_ini > 0:
            window.pop(0)
            window.append(np.concatenate([u, y_meas]))
    return log


def nominal_controller(
    system: LtiSystem,
    estimate_noiseless: BehaviorEstimate,
    cfg: ControlConfig,
) -> ClosedLoopLog:
    """Non-robust noiseless baseline: minimize the tracking error over the
    estimated behavior with the measured window pinned exactly.

    Each step solves min_z ||Yh z - b||^2 subject to (M Yh) z = w_ini in
    closed form via the Schur complement of the KKT system. The soft-penalty
    route (zero ball radius inside the robust solver) trades consistency
    against tracking and settles visibly slower; the equality-constrained
    baseline is the reference behavior the robust runs are compared to.
    """
    q = system.q
    if estimate_noiseless.q != q:
        raise DimensionMismatch("estimate channel count does not match the system")
    Yb = estimate_noiseless.subspace.basis
    n_ini = q * cfg.T_ini
    ref = np.asarray(cfg.w_ref_point, dtype=float).reshape(-1)
    MY = Yb[:n_ini, :]
    S = MY @ MY.T  # l x l SPD for generic estimates
    x = np.asarray(cfg.x0, dtype=float).reshape(system.n_x)

    window = []
    for _ in range(cfg.T_ini):
        u = np.zeros(system.m)
        window.append(np.concatenate([u, system.C @ x + system.D @ u]))
        x = system.A @ x + system.B @ u

    T = cfg.T
    log = ClosedLoopLog(
        t=np.arange(1, T + 1),
        u=np.empty((T, system.m)),
        y=np.empty((T, system.p)),
        y_true=np.empty((T, system.p)),
        ref=np.tile(ref[system.m :], (T, 1)),
        lambda_star=np.zeros(T),
        iterations=np.ones(T, dtype=int),
        gradnorm=np.zeros(T),
        consistency=np.empty(T),
        converged=np.ones(T, dtype=bool),
        config={**cfg.as_dict(), "rho_deg": 0.0, "sigma": 0.0, "nominal": True},
    )
    for t in range(T):
        w_ini = np.concatenate(window) if window else np.zeros(0)
        b = np.concatenate([w_ini, np.tile(ref, cfg.T_f)])
        z = Yb.T @ b
        if n_ini:
            nu = np.linalg.solve(S, MY @ z - w_ini)
            z = z - MY.T @ nu
        w_star = Yb @ z
        u = w_star[n_ini : n_ini + system.m]
        y = system.C @ x + system.D @ u
        log.u[t] = u
        log.y[t] = y
        log.y_true[t] = y
        log.consistency[t] = float(np.linalg.norm(w_star[:n_ini] - w_ini))
        x = system.A @ x + system.B @ u
        if cfg.T_ini > 0:
            window.pop(0)
            window.append(np.concatenate([u, y]))
    return log
