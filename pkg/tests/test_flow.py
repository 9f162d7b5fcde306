import numpy as np
import pytest
import scipy.linalg

from absspec.exterior import pluecker
from absspec.flow import (
    EvansValue,
    IntegrationError,
    Propagator,
    boundary_determinant,
    fundamental_matrix,
    propagate_frame,
    propagate_pluecker,
    propagate_subspace,
    trajectory,
    transfer_chunks,
)
from absspec.linalg import Subspace
from absspec.problem import BoundaryData
from absspec.problems import builtin
from absspec.selftest import constant_profile


def _diag_prop(values, ell0=1.0):
    return Propagator(constant_profile(np.diag(values), ell0), 0.0)


def test_invariant_axis_log_scale():
    U, ls = propagate_subspace(_diag_prop([1.0, -1.0]), 0.0, 1.0, Subspace.span([0, 1]))
    assert U.distance(Subspace.span([0, 1])) < 1e-14
    assert ls == pytest.approx(-1.0, abs=1e-12)


def test_line_follows_exponential():
    U, _ = propagate_subspace(_diag_prop([1.0, -1.0]), 0.0, 1.0, Subspace.span([1, 1]))
    assert U.distance(Subspace.span([1, np.exp(-2)])) < 1e-13


def test_backward_propagation_inverts():
    prof = builtin("adv-diff-front").profile
    prop = Propagator(prof, -0.7 + 0.3j)
    U = Subspace.span(np.array([1.0, 0.3]))
    # short interval: the backward flow amplifies rounding by the forward contraction
    V, ls = propagate_subspace(prop, -1.5, 1.5, U)
    W, ls2 = propagate_subspace(prop, 1.5, -1.5, V)
    assert W.distance(U) < 1e-8
    assert ls + ls2 == pytest.approx(0.0, abs=1e-7)


def test_log_scale_constant_diagonal():
    vals = [0.7, -0.2, -1.3]
    U = Subspace(np.eye(3)[:, :2])
    _, ls = propagate_subspace(_diag_prop(vals), -2.0, 3.0, U)
    assert ls == pytest.approx((0.7 - 0.2) * 5.0, abs=1e-10)


def test_tail_semigroup_exactness():
    p = builtin("two-component")
    prop = Propagator(p.profile, -1.2 + 0.9j)
    U = p.boundary.left
    whole, ls = propagate_subspace(prop, 1.0, 20.0, U)
    part, ls1 = propagate_subspace(prop, 1.0, 7.3, U)
    part, ls2 = propagate_subspace(prop, 7.3, 20.0, part)
    assert whole.distance(part) < 1e-12
    assert ls == pytest.approx(ls1 + ls2, abs=1e-10)


def test_front_self_convergence():
    prof = builtin("adv-diff-front").profile
    lam = -1.0 + 0.5j
    U = Subspace.span([0, 1])
    a, _ = propagate_subspace(Propagator(prof, lam), -2.0, 2.0, U)
    b, _ = propagate_subspace(Propagator(prof, lam, rtol=5e-11, atol=5e-13), -2.0, 2.0, U)
    assert a.distance(b) <= 1e-8


def test_pluecker_k1_matches_subspace():
    prop = _diag_prop([0.5, -1.5])
    U = Subspace.span([1, 2])
    V, _ = propagate_subspace(prop, 0.0, 1.0, U)
    P, _ = propagate_pluecker(prop, 0.0, 1.0, pluecker(U), 1)
    assert pluecker(V).distance(P) < 1e-14


def test_pluecker_invariant_axis_log_scale():
    a, b, c = 0.4, -0.3, -2.0
    prop = _diag_prop([a, b, c])
    P = pluecker(Subspace(np.eye(3)[:, :2]))
    t = 1.7
    Q, ls = propagate_pluecker(prop, 0.0, t, P, 2)
    np.testing.assert_allclose(Q.coords, [1, 0, 0], atol=1e-15)
    assert ls == pytest.approx(t * (a + b), abs=1e-12)


def test_commuting_square_random_constant(rng):
    for _ in range(10):
        A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        prop = Propagator(constant_profile(A), 0.0)
        U = Subspace.span(rng.standard_normal((4, 2)) + 0j)
        V, _ = propagate_subspace(prop, 0.0, 1.0, U)
        P, _ = propagate_pluecker(prop, 0.0, 1.0, pluecker(U), 2)
        assert pluecker(V).distance(P) <= 1e-6


@pytest.mark.parametrize("name,lam", [("adv-diff", -1 + 0.3j), ("adv-diff-front", -1 + 0.5j),
                                      ("two-component", -1.25 + 0.9j)])
def test_commuting_square_builtins(name, lam):
    p = builtin(name)
    prop = Propagator(p.profile, lam)
    ell = 50.0
    rec = trajectory(prop, -ell, ell, p.boundary.left, np.linspace(-ell, ell, 11)[1:])
    assert rec.consistency() <= 1e-6
    assert len(rec.to_rows()) == 10


def test_fundamental_matrix_constant():
    A = np.array([[0.1, 1.0], [-0.5, -0.2]])
    Phi = fundamental_matrix(constant_profile(A), 0.0, -1.0, 2.0)
    np.testing.assert_allclose(Phi, scipy.linalg.expm(3 * A), atol=1e-12)


def test_fundamental_matrix_x_dependent_matches_scipy():
    from scipy.integrate import solve_ivp

    prof = builtin("adv-diff-front").profile
    lam = -0.5 + 0.2j
    Phi = fundamental_matrix(prof, lam, -2.0, 2.0)

    def rhs(x, y):
        return (prof.evaluate(x, lam) @ y.reshape(2, 2)).ravel()

    sol = solve_ivp(rhs, (-2, 2), np.eye(2, dtype=complex).ravel(), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(Phi, sol.y[:, -1].reshape(2, 2), rtol=1e-8, atol=1e-9)


def test_transfer_chunks_product():
    prof = builtin("adv-diff-front").profile
    prop = Propagator(prof, -0.3 + 0.4j)
    chunks = transfer_chunks(prop, -4.0, 4.0)
    Phi = np.eye(2, dtype=complex)
    for C in chunks:
        Phi = C @ Phi
    np.testing.assert_allclose(Phi, fundamental_matrix(prof, -0.3 + 0.4j, -4.0, 4.0),
                               rtol=1e-8)


def test_boundary_determinant_first_dirichlet_eigenvalue(adv0):
    for ell in (3.0, 10.0, 25.0):
        lam = -(np.pi / (2 * ell)) ** 2
        ev = boundary_determinant(Propagator(adv0.profile, lam), ell, adv0.boundary)
        assert abs(ev.value) <= 1e-8


def test_boundary_determinant_off_spectrum(adv0):
    ev = boundary_determinant(Propagator(adv0.profile, 1.0), 10.0, adv0.boundary)
    assert abs(ev.value) > 0.1


def test_boundary_determinant_forced_intersection():
    prof = constant_profile(np.diag([1.0, -1.0]))
    line = Subspace.span([1, 0])
    bd = BoundaryData(line, line)
    ev = boundary_determinant(Propagator(prof, 0.0), 3.0, bd)
    assert abs(ev.value) < 1e-14


def test_boundary_determinant_requires_ell_beyond_ell0(adv0):
    with pytest.raises(ValueError):
        boundary_determinant(Propagator(adv0.profile, 1.0), 0.5, adv0.boundary)


def test_evans_value_zero():
    assert EvansValue(-np.inf, 1.0, 0.0).value == 0


def test_integration_error_reports_position():
    err = IntegrationError("step size underflow", 1.5)
    assert err.x == 1.5 and "1.5" in str(err)
