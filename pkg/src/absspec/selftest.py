"""Invariant suite run by ``absspec selftest``.

Each check returns a :class:`Check` with the observed error and the
tolerance it is held to; ``margin`` is ``tolerance / error`` (so a pass
has margin >= 1).  The quick suite covers the linear algebra kernel and
the exterior algebra only.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .config import DEFAULT, Tolerances
from .exterior import (
    boundary_functional,
    chordal_distance,
    compound_matrix,
    pluecker,
    pluecker_relations,
)
from .linalg import (
    Subspace,
    det_logscaled,
    eig_sorted,
    ordered_invariant_subspace,
    qr_positive,
)
from .problem import CoefficientProfile, MatrixFamily

__all__ = ["Check", "QUICK", "FULL", "constant_profile", "match_multisets", "run_selftest"]


@dataclass
class Check:
    name: str
    group: str
    error: float
    tolerance: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error)) and self.error <= self.tolerance

    @property
    def margin(self) -> float:
        if self.error == 0:
            return np.inf
        return self.tolerance / self.error if np.isfinite(self.error) else 0.0


def match_multisets(a, b) -> float:
    """Largest distance after optimally pairing two equal-size multisets."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size != b.size:
        return np.inf
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max()) if a.size else 0.0


def constant_profile(A, ell0: float = 1.0, name: str = "constant") -> CoefficientProfile:
    """x- and lam-independent profile with generator ``A``."""
    A = np.asarray(A, dtype=complex)
    fam = MatrixFamily([[repr(complex(v)) for v in row] for row in A])
    return CoefficientProfile(A.shape[0], ell0, fam, fam, fam, name=name)


def _random(rng, n, m=None):
    m = n if m is None else m
    return rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))


# -- linalg ----------------------------------------------------------------------

def _eig_order(rng, tol, inject):
    err = 0.0
    for _ in range(40):
        A = _random(rng, int(rng.integers(2, 7)))
        spec = eig_sorted(A, tol)
        re = spec.values.real
        err = max(err, float(np.max(np.diff(re), initial=0.0)) if re.size > 1 else 0.0)
        err = max(err, match_multisets(spec.values, np.linalg.eigvals(A)) / np.linalg.norm(A))
    return err, 1e-12


def _invariant_subspace(rng, tol, inject):
    err = 0.0
    for _ in range(40):
        n = int(rng.integers(2, 7))
        A = _random(rng, n)
        k = int(rng.integers(1, n))
        V = ordered_invariant_subspace(A, k, tol).frame
        M = V.conj().T @ A @ V
        err = max(err, np.linalg.norm(A @ V - V @ M) / np.linalg.norm(A))
    return err, 1e-10


def _qr_positive(rng, tol, inject):
    err = 0.0
    for _ in range(40):
        n = int(rng.integers(2, 9))
        M = _random(rng, n, int(rng.integers(1, n + 1)))
        Q, R = qr_positive(M)
        d = np.diag(R)
        bad = np.max(np.abs(d.imag)) + max(0.0, -float(d.real.min()))
        err = max(err, np.linalg.norm(Q @ R - M) / np.linalg.norm(M), bad,
                  np.linalg.norm(Q.conj().T @ Q - np.eye(Q.shape[1])))
    return err, 1e-12


def _det_logscaled(rng, tol, inject):
    err = 0.0
    for _ in range(40):
        M = _random(rng, int(rng.integers(1, 8)))
        logabs, phase = det_logscaled(M)
        ref = np.linalg.det(M)
        err = max(err, abs(np.exp(logabs) * phase - ref) / abs(ref))
    return err, 1e-10


# -- exterior --------------------------------------------------------------------

def _compound_eigenvalues(rng, tol, inject):
    err = 0.0
    for _ in range(40):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, min(3, n - 1) + 1))
        A = _random(rng, n)
        C = compound_matrix(A, k)
        if inject:
            C = C + 1e-3 * np.eye(C.shape[0])
        ev = np.linalg.eigvals(A)
        sums = [sum(c) for c in itertools.combinations(ev, k)]
        err = max(err, match_multisets(np.linalg.eigvals(C), sums) / (1 + np.abs(ev).max()))
    return err, 1e-8


def _compound_bracket(rng, tol, inject):
    # the additive compound is a Lie algebra homomorphism
    err = 0.0
    for _ in range(30):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n))
        A, B = _random(rng, n), _random(rng, n)
        lhs = compound_matrix(A @ B - B @ A, k)
        Ck, Dk = compound_matrix(A, k), compound_matrix(B, k)
        err = max(err, np.linalg.norm(lhs - (Ck @ Dk - Dk @ Ck)) / (1 + np.linalg.norm(lhs)))
    return err, 1e-12


def _pluecker_relations(rng, tol, inject):
    err = 0.0
    for _ in range(40):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n))
        P = pluecker(Subspace.span(_random(rng, n, k)))
        err = max(err, pluecker_relations(P.coords, n, k))
    return err, 1e-12


def _exponential_square(rng, tol, inject):
    # expm of the compound acts on Pluecker points like expm on subspaces
    err = 0.0
    for _ in range(30):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, n))
        A = 0.5 * _random(rng, n)
        U = Subspace.span(_random(rng, n, k))
        left = pluecker(scipy.linalg.expm(A) @ U.frame)
        right = scipy.linalg.expm(compound_matrix(A, k)) @ pluecker(U).coords
        err = max(err, chordal_distance(left.coords, right))
    return err, 1e-10


def _boundary_functional(rng, tol, inject):
    err = 0.0
    for _ in range(40):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n))
        F, G = _random(rng, n, k), _random(rng, n, n - k)
        Fq, Gq = Subspace.span(F).frame, Subspace.span(G).frame
        minors = [np.linalg.det(Fq[list(I), :]) for I in itertools.combinations(range(n), k)]
        lhs = boundary_functional(Subspace(Gq), k) @ np.array(minors)
        ref = np.linalg.det(np.hstack([Fq, Gq]))
        err = max(err, abs(lhs - ref))
    return err, 1e-12


# -- flow, counting, periodic, spectra ---------------------------------------------

def _commuting_square(rng, tol, inject):
    from .flow import Propagator, propagate_frame, propagate_pluecker

    err = 0.0
    for _ in range(10):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, n))
        prof = constant_profile(_random(rng, n))
        prop = Propagator(prof, 0.0, tol=tol)
        U = Subspace.span(_random(rng, n, k))
        Q, _ = propagate_frame(prop, 0.0, 1.0, U.frame)
        P, _ = propagate_pluecker(prop, 0.0, 1.0, pluecker(U), k)
        err = max(err, pluecker(Subspace(Q)).distance(P))
    return err, 1e-6


def _trajectory_consistency(rng, tol, inject):
    from .flow import Propagator, trajectory
    from .problems import builtin

    err = 0.0
    for name, lam in (("adv-diff-front", -1.0 + 0.5j), ("two-component", -1.2 + 0.9j)):
        p = builtin(name)
        prop = Propagator(p.profile, lam, tol=tol)
        ell = 3 * p.profile.ell0
        rec = trajectory(prop, -ell, ell, p.boundary.left, np.linspace(-ell, ell, 9)[1:])
        err = max(err, rec.consistency())
    return err, 1e-6


def _doubled_identity(rng, tol, inject):
    from .periodic import double_system, doubled_determinant

    err = 0.0
    for _ in range(10):
        n = int(rng.integers(1, 4))
        A = 0.3 * _random(rng, n)
        ell = 1.0
        gamma = np.exp(2j * np.pi * rng.random())
        d = double_system(constant_profile(A), gamma)
        ev = doubled_determinant(d, ell, 0.0, tol)
        ref = np.linalg.det(scipy.linalg.expm(2 * ell * A) - gamma * np.eye(n))
        val = 2.0**n * ev.phase * np.exp(ev.full_log_magnitude)
        err = max(err, min(abs(val - ref), abs(val + ref)) / abs(ref))
    return err, 1e-8


def _dirichlet_count(rng, tol, inject):
    from .counting import winding_count
    from .problems import builtin

    p = builtin("adv-diff", c=0)
    ell = 10 * np.pi
    lam = p.oracle["eigenvalues"](ell)
    expected = int(np.sum(np.abs(lam + 1) < 0.5))
    got = winding_count(p.profile, p.boundary, ell, -1.0, 0.5, tol).winding
    return float(abs(got - expected)), 0.0


def _accumulation(rng, tol, inject):
    from .counting import accumulation_experiment
    from .problems import builtin

    p = builtin("adv-diff", c=0)
    ells = [10 * np.pi, 20 * np.pi]
    table = accumulation_experiment(p.profile, p.boundary, -1.0, 0.5, ells, tol)
    expected = [int(np.sum(np.abs(p.oracle["eigenvalues"](e) + 1) < 0.5)) for e in ells]
    return float(max(abs(a - b) for a, b in zip(table.counts, expected))), 0.0


def _locus_oracle(rng, tol, inject):
    from .problem import ParameterDomain
    from .spectra import trace_locus

    c = 2.0
    from .problems import builtin

    p = builtin("adv-diff", c=c)
    loc = trace_locus(p.profile, "plus", ParameterDomain(-4, 1, -1, 1, res=64), p.boundary,
                      certify=False, tol=tol)
    pts = loc.points
    if pts.size == 0:
        return np.inf, 1e-6
    off = np.maximum(np.abs(pts.imag), np.maximum(pts.real - p.oracle["branch_point"], 0))
    return float(off.max()), 1e-6


def _derivative_oracle(rng, tol, inject):
    from .problems import builtin
    from .spectra import certify_nondegenerate

    p = builtin("adv-diff", c=2.0)
    err = 0.0
    for lam in (-1.5, -2.0, -3.0, -3.7):
        rep = certify_nondegenerate(p.profile, "plus", lam, p.boundary, tol=tol)
        ref = p.oracle["dgap"](lam)
        err = max(err, abs(rep.derivative - ref) / abs(ref))
    return err, 1e-6


def _periodic_count(rng, tol, inject):
    from .periodic import double_system, periodic_count
    from .problems import builtin

    p = builtin("periodic-adv-diff", c=1.0)
    ell = 20.0
    lam = p.oracle["eigenvalues"](ell)
    expected = int(np.sum(np.abs(lam - (-1 + 1j)) < 0.3))
    got = periodic_count(double_system(p.profile), ell, -1 + 1j, 0.3, tol=tol).winding
    return float(abs(got - expected)), 0.0


QUICK: list[tuple[str, str, Callable]] = [
    ("eigenvalue ordering", "linalg", _eig_order),
    ("invariant subspace residual", "linalg", _invariant_subspace),
    ("positive-diagonal QR", "linalg", _qr_positive),
    ("log-scaled determinant", "linalg", _det_logscaled),
    ("compound eigenvalue sums", "exterior", _compound_eigenvalues),
    ("compound bracket homomorphism", "exterior", _compound_bracket),
    ("Pluecker relations", "exterior", _pluecker_relations),
    ("compound exponential square", "exterior", _exponential_square),
    ("boundary functional determinant", "exterior", _boundary_functional),
]
FULL: list[tuple[str, str, Callable]] = QUICK + [
    ("commuting square", "flow", _commuting_square),
    ("trajectory consistency", "flow", _trajectory_consistency),
    ("doubled determinant identity", "periodic", _doubled_identity),
    ("Dirichlet winding count", "counting", _dirichlet_count),
    ("Dirichlet accumulation", "counting", _accumulation),
    ("locus discriminant oracle", "spectra", _locus_oracle),
    ("gap derivative oracle", "spectra", _derivative_oracle),
    ("periodic dispersion count", "periodic", _periodic_count),
]


def run_selftest(quick: bool = False, seed: int = 0, inject: str | None = None,
                 tol: Tolerances = DEFAULT) -> list[Check]:
    """Run the suite; ``inject`` names a check whose input is perturbed."""
    suite = QUICK if quick else FULL
    names = [s[0] for s in suite]
    if inject is not None and inject not in names:
        raise ValueError(f"unknown check {inject!r}")
    out = []
    for i, (name, group, fn) in enumerate(suite):
        rng = np.random.default_rng([seed, i])
        t0 = time.perf_counter()
        err, limit = fn(rng, tol, inject == name)
        out.append(Check(name, group, float(err), float(limit), time.perf_counter() - t0))
    return out
