import numpy as np
import pytest

from grls.errors import DimensionMismatch, RankDeficient
from grls.manifold import (
    Projector,
    StiefelPoint,
    SubspaceBall,
    chordal_distance,
    gap_distance,
    orthonormalize,
    projector,
    random_stiefel,
    tangent_project,
)


def dense_chordal(Y1, Y2):
    # distance straight from the projector trace identity
    P1 = Y1.basis @ Y1.basis.T
    P2 = Y2.basis @ Y2.basis.T
    n = P1.shape[0]
    return np.sqrt(max(0.0, np.trace((np.eye(n) - P1) @ P2)))


def test_orthonormalize_identity():
    pt = orthonormalize(np.eye(2))
    assert np.allclose(pt.basis, np.eye(2))


def test_orthonormalize_scaling():
    pt = orthonormalize(np.array([[2.0], [0.0]]))
    assert np.allclose(pt.basis, [[1.0], [0.0]])


def test_orthonormalize_span_and_signs():
    raw = np.array([[1.0, 1.0], [1.0, -1.0], [0.0, 0.0]])
    pt = orthonormalize(raw)
    # orthonormal columns spanning the same space
    assert np.allclose(pt.basis.T @ pt.basis, np.eye(2), atol=1e-12)
    proj = pt.basis @ pt.basis.T
    for col in raw.T:
        assert np.allclose(proj @ col, col, atol=1e-12)
    # sign convention: leading largest-magnitude entry positive
    for j in range(2):
        i = np.argmax(np.abs(pt.basis[:, j]))
        assert pt.basis[i, j] > 0


def test_orthonormalize_rank_deficient():
    with pytest.raises(RankDeficient):
        orthonormalize(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_stiefel_validation():
    with pytest.raises(ValueError):
        StiefelPoint(np.array([[1.0, 0.9], [0.0, 0.1]]))


def test_projector_cases():
    e1 = StiefelPoint(np.array([[1.0], [0.0]]))
    assert np.allclose(projector(e1).matrix, [[1.0, 0.0], [0.0, 0.0]])
    diag = StiefelPoint(np.array([[1.0], [1.0]]) / np.sqrt(2))
    assert np.allclose(projector(diag).matrix, [[0.5, 0.5], [0.5, 0.5]])
    stacked = StiefelPoint(np.vstack([np.eye(2), np.zeros((2, 2))]))
    P = projector(stacked)
    assert np.allclose(P.matrix, np.block([[np.eye(2), np.zeros((2, 2))],
                                           [np.zeros((2, 2)), np.zeros((2, 2))]]))
    assert P.rank == 2


def test_projector_invariants(rng):
    for _ in range(20):
        Y = random_stiefel(6, 3, rng)
        P = projector(Y).matrix
        assert np.max(np.abs(P - P.T)) == 0.0
        assert np.max(np.abs(P @ P - P)) < 1e-10
        assert abs(np.trace(P) - 3) < 1e-8


def test_projector_basis_invariance(rng):
    for _ in range(20):
        Y = random_stiefel(7, 3, rng)
        Q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
        Y2 = orthonormalize(Y.basis @ Q)
        assert np.max(np.abs(projector(Y).matrix - projector(Y2).matrix)) < 1e-9


def test_chordal_cases():
    e1 = StiefelPoint(np.array([[1.0], [0.0]]))
    e2 = StiefelPoint(np.array([[0.0], [1.0]]))
    diag = StiefelPoint(np.array([[1.0], [1.0]]) / np.sqrt(2))
    assert chordal_distance(e1, e1) == 0.0
    assert abs(chordal_distance(e1, e2) - 1.0) < 1e-12
    assert abs(chordal_distance(e1, diag) - dense_chordal(e1, diag)) < 1e-12
    assert abs(chordal_distance(e1, diag) - np.sqrt(0.5)) < 1e-9


def test_gap_cases():
    e1 = StiefelPoint(np.array([[1.0], [0.0]]))
    e2 = StiefelPoint(np.array([[0.0], [1.0]]))
    diag = StiefelPoint(np.array([[1.0], [1.0]]) / np.sqrt(2))
    assert gap_distance(e1, e1) == 0.0
    assert abs(gap_distance(e1, e2) - 1.0) < 1e-12
    # eigenvalues of the projector difference
    D = projector(e1).matrix - projector(diag).matrix
    expected = np.max(np.abs(np.linalg.eigvalsh(D)))
    assert abs(gap_distance(e1, diag) - expected) < 1e-12
    assert abs(gap_distance(e1, diag) - np.sin(np.pi / 4)) < 1e-9


def test_distance_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        chordal_distance(StiefelPoint(np.eye(2)), StiefelPoint(np.eye(3)))


@pytest.mark.parametrize("k,n", [(1, 3), (2, 5), (3, 8)])
def test_metric_equivalence(k, n):
    rng = np.random.default_rng(k * 100 + n)
    for _ in range(1000):
        Y1, Y2 = random_stiefel(n, k, rng), random_stiefel(n, k, rng)
        dc = chordal_distance(Y1, Y2)
        dg = gap_distance(Y1, Y2)
        assert dg <= dc + 1e-12
        assert dc <= np.sqrt(k) * dg + 1e-12
        assert 0.0 <= dc <= np.sqrt(k) + 1e-12
        assert 0.0 <= dg <= 1.0 + 1e-12


def test_chordal_trace_identity(rng):
    for _ in range(200):
        n, k = 7, 3
        Y1, Y2 = random_stiefel(n, k, rng), random_stiefel(n, k, rng)
        m = Y1.basis.T @ Y2.basis
        assert abs(chordal_distance(Y1, Y2) ** 2 + np.sum(m * m) - k) < 1e-9


def test_chordal_metric_axioms(rng):
    for _ in range(200):
        n, k = 6, 2
        A, B, C = (random_stiefel(n, k, rng) for _ in range(3))
        dab, dba = chordal_distance(A, B), chordal_distance(B, A)
        assert dab >= 0
        assert abs(dab - dba) < 1e-9
        assert dab <= chordal_distance(A, C) + chordal_distance(C, B) + 1e-9


def test_tangent_project(rng):
    Y = StiefelPoint(np.array([[1.0], [0.0]]))
    assert np.allclose(tangent_project(Y, np.array([[1.0], [1.0]])), [[0.0], [1.0]])
    # G = Y maps to zero
    assert np.allclose(tangent_project(Y, Y.basis), 0.0)
    for _ in range(20):
        n, k = 8, 3
        Yr = random_stiefel(n, k, rng)
        G = rng.standard_normal((n, k))
        T1 = tangent_project(Yr, G)
        assert np.max(np.abs(Yr.basis.T @ T1)) < 1e-10
        # idempotent
        assert np.max(np.abs(tangent_project(Yr, T1) - T1)) < 1e-12
        # already-horizontal matrices unchanged
        assert np.max(np.abs(tangent_project(Yr, T1) - T1)) < 1e-12
    with pytest.raises(DimensionMismatch):
        tangent_project(Y, np.zeros((3, 1)))


def test_subspace_ball_radius():
    Y = StiefelPoint(np.eye(3)[:, :2])
    SubspaceBall(Y, 0.0)
    SubspaceBall(Y, np.sqrt(2))
    with pytest.raises(ValueError):
        SubspaceBall(Y, 1.5)  # exceeds sqrt(k)
    with pytest.raises(ValueError):
        SubspaceBall(Y, -0.1)
