"""Periodic and twisted boundary conditions via the doubled system.

Y(ell) = gamma Y(-ell) is rewritten as a separated problem for (Y, W) with
W' = 0: U_- = {(Y, Y)} at -ell and U_+ = {(gamma Y, Y)} at +ell.  The
doubled fundamental matrix is Phi + I, so only the top N rows of a 2N x N
frame are ever propagated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .counting import Circle, WindingReport, winding_number
from .expr import Expr
from .flow import EvansValue, Propagator, propagate_frame, transfer_chunks
from .linalg import Subspace, eig_sorted, invariant_subspace
from .problem import BoundaryData, CoefficientProfile, MatrixFamily, crossing_index
from .spectra import PreconditionError, certify_nondegenerate, gap

__all__ = [
    "DoubledProblem",
    "PeriodicCount",
    "ProbeResult",
    "center_space_ratio",
    "double_system",
    "doubled_determinant",
    "extrapolated_set_probe",
    "gamma_from_turns",
    "monodromy_determinant",
    "periodic_count",
    "write_probe_csv",
]


def gamma_from_turns(turns: float) -> complex:
    return complex(np.exp(2j * np.pi * turns))


def _doubled_family(fam: MatrixFamily) -> MatrixFamily:
    n = fam.n
    zero = Expr("0")
    rows = [list(r) + [zero] * n for r in fam.entries]
    rows += [[zero] * (2 * n) for _ in range(n)]
    return MatrixFamily(rows)


@dataclass(frozen=True, eq=False)
class DoubledProblem:
    """Block system A + 0 with boundary subspaces {(Y, Y)} and {(gamma Y, Y)}."""

    base: CoefficientProfile
    gamma: complex
    profile: CoefficientProfile
    boundary: BoundaryData

    @property
    def n(self) -> int:
        return self.base.n


def double_system(profile: CoefficientProfile, gamma: complex = 1.0) -> DoubledProblem:
    """Build the doubled problem for Y(ell) = gamma Y(-ell).

    Raises
    ------
    ValueError
        If |gamma| != 1.
    """
    gamma = complex(gamma)
    if abs(abs(gamma) - 1.0) > 1e-12:
        raise ValueError(f"|gamma| must be 1, got {abs(gamma)!r}")
    n = profile.n
    doubled = CoefficientProfile(
        2 * n, profile.ell0, _doubled_family(profile.left), _doubled_family(profile.right),
        _doubled_family(profile.middle), kind="separated-asymptotic",
        name=profile.name + "-doubled", constants=profile.constants,
    ) if profile.kind != "periodic-tail" else None
    eye = np.eye(n, dtype=complex)
    left = Subspace(np.vstack([eye, eye]) / np.sqrt(2))
    right = Subspace(np.vstack([gamma * eye, eye]) / np.sqrt(2))
    return DoubledProblem(profile, gamma, doubled, BoundaryData(left, right))


def doubled_determinant(doubled: DoubledProblem, ell: float, lam,
                        tol: Tolerances = DEFAULT) -> EvansValue:
    """det[Phi_hat U_- | U_+] with Phi_hat = Phi + I, propagating N rows only."""
    n = doubled.n
    prop = Propagator(doubled.base, lam, tol=tol)
    Q, ls = propagate_frame(prop, -ell, ell, doubled.boundary.left.frame, n_active=n)
    sign, logabs = np.linalg.slogdet(np.hstack([Q, doubled.boundary.right.frame]))
    if sign == 0:
        return EvansValue(-np.inf, complex(1.0), ls)
    return EvansValue(float(logabs), complex(sign), ls)


def monodromy_determinant(profile: CoefficientProfile, ell: float, lam, gamma: complex = 1.0,
                          tol: Tolerances = DEFAULT) -> EvansValue:
    """det(Phi(ell, -ell; lam) - gamma I): the direct gamma-eigenvalue criterion.

    Forming Phi explicitly loses the decaying directions to rounding once
    the interval is long.  Instead Phi is factored into chunk propagators
    Phi_m ... Phi_1 of bounded growth and the determinant is taken of the
    cyclic block matrix with diagonal blocks Phi_i and superdiagonal -I
    (-gamma I in the corner), which equals det(Phi - gamma I) exactly.
    """
    prop = Propagator(profile, lam, tol=tol)
    blocks = transfer_chunks(prop, -ell, ell)
    n, m = profile.n, len(blocks)
    C = np.zeros((m * n, m * n), dtype=complex)
    eye = np.eye(n)
    for i, P in enumerate(blocks):
        j = (i + 1) % m
        C[i * n:(i + 1) * n, i * n:(i + 1) * n] = P
        C[i * n:(i + 1) * n, j * n:(j + 1) * n] -= (gamma if i == m - 1 else 1.0) * eye
    sign, logabs = np.linalg.slogdet(C)
    if sign == 0:
        return EvansValue(-np.inf, complex(1.0), 0.0)
    return EvansValue(float(logabs), complex(sign), 0.0)


@dataclass
class PeriodicCount:
    report: WindingReport
    monodromy: WindingReport | None

    @property
    def winding(self) -> int:
        return self.report.winding

    @property
    def consistent(self) -> bool:
        return self.monodromy is None or self.monodromy.winding == self.report.winding


def periodic_count(doubled: DoubledProblem, ell: float, center, radius: float,
                   cross_check: bool = True, tol: Tolerances = DEFAULT,
                   jobs: int = 1) -> PeriodicCount:
    """Eigenvalue count of the twisted problem in B(center; radius).

    The doubled determinant and det(Phi - gamma I) differ by a nonvanishing
    factor, so with ``cross_check`` both windings are computed and compared.

    Raises
    ------
    ContourError
        Propagated from the winding computation.
    RuntimeError
        If the two windings disagree.
    """
    circle = Circle(complex(center), float(radius))
    rep = winding_number(lambda z: doubled_determinant(doubled, ell, z, tol), circle, tol, jobs)
    mono = None
    if cross_check:
        mono = winding_number(
            lambda z: monodromy_determinant(doubled.base, ell, z, doubled.gamma, tol),
            rep.contour, tol, jobs)
    out = PeriodicCount(rep, mono)
    if not out.consistent:
        raise RuntimeError(f"doubled winding {rep.winding} != monodromy winding "
                           f"{mono.winding} at ell={ell:g}")
    return out


# -- extrapolated set ---------------------------------------------------------------

@dataclass
class ProbeResult:
    lam: complex
    ells: list
    counts: list
    classification: str
    notes: list = field(default_factory=list)


def extrapolated_set_probe(profile: CoefficientProfile, candidates: Sequence[complex],
                           radius: float, ells: Sequence[float], n_cap: int,
                           gamma: complex = 1.0, tol: Tolerances = DEFAULT,
                           jobs: int = 1) -> list[ProbeResult]:
    """Classify candidates as IN/OUT of the extrapolated set, or UNDECIDED.

    IN: counts are nondecreasing, strictly grow overall and exceed
    ``n_cap``.  OUT: counts over the upper half of ``ells`` are constant
    and at most ``n_cap``.  Candidates on the locus that fail the
    non-degeneracy certificate are UNDECIDED and flagged.
    """
    ells = list(ells)
    if len(ells) < 4 or any(b <= a for a, b in zip(ells, ells[1:])):
        raise ValueError("need at least 4 increasing lengths")
    doubled = double_system(profile, gamma)
    out = []
    for lam in candidates:
        lam = complex(lam)
        notes = []
        degenerate = False
        g = gap(profile, "zero", lam, tol=tol)
        if not np.isfinite(g) or abs(g) <= 1e-6:
            try:
                rep = certify_nondegenerate(profile, "zero", lam, tol=tol)
                if not rep.nondegenerate:
                    degenerate = True
                    notes.append(f"degenerate: {rep.flags}")
            except PreconditionError as exc:
                degenerate = True
                notes.append(str(exc))
        counts = [periodic_count(doubled, ell, lam, radius, cross_check=False, tol=tol,
                                 jobs=jobs).winding for ell in ells]
        top = counts[len(counts) // 2:]
        if degenerate:
            klass = "UNDECIDED"
        elif (all(b >= a for a, b in zip(counts, counts[1:])) and counts[-1] > counts[0]
              and counts[-1] > n_cap):
            klass = "IN"
        elif len(set(top)) == 1 and top[0] <= n_cap:
            klass = "OUT"
        else:
            klass = "UNDECIDED"
        out.append(ProbeResult(lam, ells, counts, klass, notes))
    return out


def write_probe_csv(results: Sequence[ProbeResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# absspec-periodic v1\n")
        w = csv.writer(fh)
        w.writerow(["re_lambda", "im_lambda", "ell", "count", "class"])
        for r in results:
            for ell, n in zip(r.ells, r.counts):
                w.writerow([format(r.lam.real, ".17g"), format(r.lam.imag, ".17g"),
                            format(ell, ".17g"), n, r.classification])


# -- centre-space diagnostic ----------------------------------------------------------

def center_space_ratio(doubled: DoubledProblem, lam, ell: float,
                       tol: Tolerances = DEFAULT) -> tuple[float, float, float]:
    """Position of the tracked line V in P(Ebar_0) at x = ell.

    Ebar_0 = span{(v_c, 0)} + ({0} x C^N) with v_c the unit eigenvector of
    the crossing eigenvalue of A_0; it is invariant under the doubled flow
    where the coefficients are constant.  V starts as U_- meet Ebar_0 =
    span{(v_c, v_c)} at -ell and is carried forward by Phi + I, giving
    [z1 : z_rest] = [|Phi v_c| : v_c].  Returns the chordal distances of V
    to P_n = [1 : 0] and to P_s = [0 : *], and log(|z_rest| / |z1|), which
    equals -2 ell Re mu_c for constant coefficients.
    """
    A0 = doubled.base.tail_generator("zero", lam)
    spec = eig_sorted(A0, tol)
    kc = crossing_index(spec.values, spec.tie_tolerance)
    vc = invariant_subspace(A0, [kc], tol).frame
    prop = Propagator(doubled.base, lam, tol=tol)
    _, log_z1 = propagate_frame(prop, -ell, ell, vc)
    log_ratio = -log_z1
    # chordal distances of [1 : r], overflow-safe
    if log_ratio <= 0:
        r = np.exp(log_ratio)
        h = np.sqrt(1 + r * r)
        return float(r / h), float(1 / h), float(log_ratio)
    r = np.exp(-log_ratio)
    h = np.sqrt(1 + r * r)
    return float(1 / h), float(r / h), float(log_ratio)
