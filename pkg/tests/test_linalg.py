import numpy as np
import pytest

from absspec.linalg import (
    ClusterSplitError,
    Subspace,
    det_logscaled,
    eig_sorted,
    intersection_dimension,
    invariant_subspace,
    ordered_invariant_subspace,
    orthonormal_frame,
    qr_positive,
)


def test_eig_sorted_symmetric():
    np.testing.assert_allclose(eig_sorted([[0, 1], [1, 0]]).values, [1, -1], atol=1e-14)


def test_eig_sorted_rotation_ties_by_imag():
    np.testing.assert_allclose(eig_sorted([[0, 1], [-1, 0]]).values, [1j, -1j], atol=1e-14)


def test_eig_sorted_quadratic_formula():
    lam, c = 0.0, 2.0
    np.testing.assert_allclose(eig_sorted([[0, 1], [lam, -c]]).values, [0, -2], atol=1e-14)


def test_eig_sorted_rejects_non_square():
    with pytest.raises(ValueError):
        eig_sorted(np.ones((2, 3)))


def test_eig_sorted_rejects_nonfinite():
    with pytest.raises(ValueError):
        eig_sorted([[np.nan, 0], [0, 1]])


def test_eig_sorted_matches_companion_roots(rng):
    for _ in range(20):
        n = int(rng.integers(2, 6))
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        roots = np.roots(np.poly(A))
        vals = eig_sorted(A).values
        assert np.all(np.diff(vals.real) <= 1e-12)
        for r in roots:
            assert np.min(np.abs(vals - r)) < 1e-7


def test_eig_sorted_residuals(rng):
    A = rng.standard_normal((5, 5))
    vals = eig_sorted(A).values
    w, V = np.linalg.eig(A)
    for mu in vals:
        j = np.argmin(np.abs(w - mu))
        assert np.linalg.norm(A @ V[:, j] - mu * V[:, j]) <= 1e-8 * np.linalg.norm(A)


def test_cluster_ids_for_repeated_eigenvalue():
    spec = eig_sorted(np.diag([1.0, 1.0, -2.0]))
    assert spec.cluster_ids[0] == spec.cluster_ids[1] != spec.cluster_ids[2]
    assert not spec.splits_at(1)
    assert spec.splits_at(2)


def test_ordered_invariant_subspace_diagonal():
    A = np.diag([3.0, 1.0, -1.0])
    U1 = ordered_invariant_subspace(A, 1)
    assert U1.distance(Subspace.span([1, 0, 0])) < 1e-12
    U2 = ordered_invariant_subspace(A, 2)
    assert U2.distance(Subspace.span(np.eye(3)[:, :2])) < 1e-12


def test_ordered_invariant_subspace_rejects_jordan_cluster():
    with pytest.raises(ClusterSplitError):
        ordered_invariant_subspace([[1, 1], [0, 1]], 1)


def test_invariant_subspace_residual_random(rng):
    for _ in range(10):
        # well-separated spectrum
        D = np.diag(np.arange(6) * 1.5 + 1j * rng.standard_normal(6))
        S = rng.standard_normal((6, 6)) + np.eye(6) * 3
        A = S @ D @ np.linalg.inv(S)
        for k in range(1, 6):
            P = ordered_invariant_subspace(A, k).frame
            res = np.linalg.norm((np.eye(6) - P @ P.conj().T) @ A @ P)
            assert res <= 1e-8 * np.linalg.norm(A)


def test_invariant_subspace_for_chosen_positions():
    A = np.diag([3.0, 1.0, -1.0])
    U = invariant_subspace(A, [0, 2])
    assert U.distance(Subspace.span(np.eye(3)[:, [0, 2]])) < 1e-12


def test_det_logscaled_examples():
    assert det_logscaled(np.eye(3)) == (0.0, 1.0)
    logm, ph = det_logscaled(np.diag([2.0, 0.5]))
    assert abs(logm) < 1e-15 and abs(ph - 1) < 1e-15
    logm, _ = det_logscaled([[1, 1], [1, 1]])
    assert logm == -np.inf


def test_det_logscaled_random(rng):
    done = 0
    while done < 30:
        M = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        ref = np.linalg.det(M)
        if not 1e-3 <= abs(ref) <= 1e3:
            continue
        logm, ph = det_logscaled(M)
        assert abs(np.exp(logm) * ph - ref) <= 1e-10 * abs(ref)
        done += 1


def test_intersection_dimension_examples():
    e1 = Subspace.span([1, 0])
    e2 = Subspace.span([0, 1])
    assert intersection_dimension(e1, e2) == 0
    assert intersection_dimension(e1, e1) == 1
    v = np.array([1, 0, 1]) / np.sqrt(2)
    U = Subspace.span(np.column_stack([v, [0, 1, 0]]))
    assert intersection_dimension(U, Subspace.span(v)) == 1


def test_intersection_dimension_symmetric_and_frame_invariant(rng):
    for _ in range(10):
        A = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
        B = np.column_stack([A[:, 0], rng.standard_normal(5)])
        U, V = Subspace.span(A), Subspace.span(B)
        assert intersection_dimension(U, V) == intersection_dimension(V, U) == 1
        Q, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        assert intersection_dimension(Subspace(U.frame @ Q), V) == 1


def test_intersection_dimension_mismatched_ambient():
    with pytest.raises(ValueError):
        intersection_dimension(Subspace.span([1, 0]), Subspace.span([1, 0, 0]))


def test_subspace_requires_orthonormal_frame():
    with pytest.raises(ValueError):
        Subspace(np.array([[1.0], [1.0]]))


def test_qr_positive_diagonal(rng):
    M = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    Q, R = qr_positive(M)
    np.testing.assert_allclose(Q @ R, M, atol=1e-13)
    d = np.diag(R)
    assert np.all(d.real > 0) and np.all(np.abs(d.imag) < 1e-14)


def test_orthonormal_frame_drops_rank():
    M = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])
    assert orthonormal_frame(M).shape == (3, 1)
