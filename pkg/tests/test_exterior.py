import itertools

import numpy as np
import pytest
import scipy.linalg

from absspec.exterior import (
    IndexBasis,
    OrderingError,
    PlueckerPoint,
    boundary_functional,
    chordal_distance,
    compound_matrix,
    pluecker,
    pluecker_relations,
    projection_frame,
)
from absspec.linalg import Subspace


def _tensor_compound(A, k):
    """Additive compound from its action on wedge products (tiny sizes only)."""
    n = A.shape[0]
    subsets = list(itertools.combinations(range(n), k))
    E = np.eye(n)
    C = np.zeros((len(subsets), len(subsets)), dtype=complex)
    for col, I in enumerate(subsets):
        # d/dt wedge(exp(tA) e_I) at t = 0, read off through k x k minors
        for r in range(k):
            F = E[:, list(I)].astype(complex)
            F[:, r] = A @ F[:, r]
            for row, J in enumerate(subsets):
                C[row, col] += np.linalg.det(F[list(J), :])
    return C


def test_index_basis():
    b = IndexBasis(4, 2)
    assert b.m == 6
    assert b.subsets[0] == (0, 1) and b.subsets[-1] == (2, 3)
    with pytest.raises(ValueError):
        IndexBasis(3, 0)


def test_top_compound_is_trace(rng):
    A = rng.standard_normal((2, 2))
    np.testing.assert_allclose(compound_matrix(A, 2), [[np.trace(A)]])


def test_diagonal_compound():
    np.testing.assert_allclose(compound_matrix(np.diag([1.0, 2.0, 3.0]), 2), np.diag([3, 4, 5]))


def test_compound_matches_tensor_definition(rng):
    for n, k in [(3, 1), (3, 2), (4, 2), (5, 2), (5, 3)]:
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        np.testing.assert_allclose(compound_matrix(A, k), _tensor_compound(A, k), atol=1e-12)


def test_compound_eigenvalues_pairwise_sums(rng):
    A = rng.standard_normal((4, 4))
    ev = np.linalg.eigvals(A)
    sums = np.array([a + b for a, b in itertools.combinations(ev, 2)])
    got = np.linalg.eigvals(compound_matrix(A, 2))
    for s in sums:
        assert np.min(np.abs(got - s)) < 1e-8


def test_pluecker_coordinate_plane():
    P = pluecker(Subspace(np.eye(4)[:, :2]))
    np.testing.assert_allclose(P.coords, [1, 0, 0, 0, 0, 0], atol=1e-15)


def test_pluecker_example_minors():
    U = Subspace.span(np.array([[1, 0], [0, 1], [1, 0], [0, 1]], dtype=float))
    P = pluecker(U)
    ref = np.array([1, 0, 1, -1, 0, 1], dtype=complex)
    assert chordal_distance(P.coords, ref) < 1e-14
    assert pluecker_relations(P.coords, 4, 2) < 1e-14


def test_pluecker_frame_invariance(rng):
    F = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
    U = Subspace.span(F)
    Q, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    P1, P2 = pluecker(U), pluecker(Subspace(U.frame @ Q))
    np.testing.assert_allclose(P1.coords, P2.coords, atol=1e-13)
    assert np.max(np.abs(P1.coords)) == pytest.approx(1.0)


def test_pluecker_relations_detect_indecomposable():
    # e1^e2 + e3^e4 is not decomposable
    p = np.array([1, 0, 0, 0, 0, 1], dtype=complex)
    assert pluecker_relations(p, 4, 2) > 0.1


def test_decomposability_of_random_points(rng):
    for _ in range(20):
        U = Subspace.span(rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2)))
        assert pluecker_relations(pluecker(U).coords, 4, 2) < 1e-8


def test_exponential_commuting_square(rng):
    for _ in range(20):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, n))
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        t = rng.uniform(0, 1)
        U = Subspace.span(rng.standard_normal((n, k)) + 0j)
        left = pluecker(scipy.linalg.expm(A * t) @ U.frame)
        right = scipy.linalg.expm(compound_matrix(A, k) * t) @ pluecker(U).coords
        assert chordal_distance(left.coords, right) <= 1e-6


def test_pluecker_point_rejects_zero():
    with pytest.raises(ValueError):
        PlueckerPoint(np.zeros(3))


def test_chordal_distance_small_angles():
    u = np.array([1.0, 0.0])
    v = np.array([1.0, 1e-12])
    assert chordal_distance(u, v) == pytest.approx(1e-12, rel=1e-6)
    assert chordal_distance(u, 3j * u) == 0.0


def test_boundary_functional_is_determinant(rng):
    for n, k in [(2, 1), (3, 1), (4, 2), (5, 2), (5, 3)]:
        F = Subspace.span(rng.standard_normal((n, k)) + 0j).frame
        G = Subspace.span(rng.standard_normal((n, n - k)) + 0j).frame
        minors = [np.linalg.det(F[list(I), :]) for I in itertools.combinations(range(n), k)]
        lhs = boundary_functional(Subspace(G), k) @ np.array(minors)
        assert lhs == pytest.approx(np.linalg.det(np.hstack([F, G])), abs=1e-13)


def test_projection_frame_adv_diff_lambda_one():
    fr = projection_frame(np.array([[0, 1], [1, 0]]), 1)
    assert fr.nu1 == pytest.approx(1) and fr.nu2 == pytest.approx(-1)
    assert chordal_distance(fr.w1, [1, 1]) < 1e-14
    assert chordal_distance(fr.w2, [1, -1]) < 1e-14


def test_projection_frame_on_locus():
    # lambda = -1: eigenvalues +-i share a real part but stay distinct
    fr = projection_frame(np.array([[0, 1], [-1, 0]]), 1)
    assert fr.nu1 == pytest.approx(1j) and fr.nu2 == pytest.approx(-1j)


def test_projection_frame_identity_on_invariant_sphere(rng):
    A = np.diag([2.0, 1.0, -1.0, -3.0]) + 0.1 * rng.standard_normal((4, 4))
    fr = projection_frame(A, 2)
    for _ in range(5):
        z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        v = z[0] * fr.w1 + z[1] * fr.w2
        np.testing.assert_allclose(fr.coordinates(v), z, atol=1e-12)


def test_projection_frame_triple_cluster_rejected():
    with pytest.raises(OrderingError):
        projection_frame(np.diag([1.0, 1.0, 1.0, -2.0]), 1)


def test_projection_frame_distances():
    fr = projection_frame(np.diag([1.0, -1.0]), 1)
    dn, ds = fr.distances(np.array([1.0, 0.0]))
    assert dn == pytest.approx(0) and ds == pytest.approx(1)
