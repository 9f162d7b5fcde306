"""Zero counting for the truncated problems.

The eigenvalue count in a disk is the winding number of the Evans-type
boundary determinant along the circle.  Its phase is sampled adaptively
until consecutive samples differ by less than a quarter turn, both as
observed and as predicted from the local phase rate, then unwrapped.  The
same machinery drives the accumulation experiment, the projected covering
trace along a locus segment, eigenvalue refinement and recursive zero
location.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .exterior import boundary_functional, chordal_distance, pluecker, projection_frame
from .flow import EvansValue, Propagator, boundary_determinant, propagate_frame
from .linalg import Subspace, ordered_invariant_subspace
from .problem import BoundaryData, CoefficientProfile, containment_warning

__all__ = [
    "AccumulationTable",
    "Circle",
    "ConfigError",
    "ContourError",
    "CoveringTrace",
    "Rectangle",
    "WindingReport",
    "accumulation_experiment",
    "attractor_distances",
    "containment_margins",
    "covering_trace",
    "evans_function",
    "locate_zeros",
    "projected_endpoint",
    "refine_eigenvalue",
    "winding_count",
    "winding_number",
]


class ContourError(RuntimeError):
    """The determinant vanishes (numerically) on every perturbed contour."""

    def __init__(self, message: str, log: list):
        super().__init__(message + "; " + "; ".join(log))
        self.log = log


class ConfigError(RuntimeError):
    """Exclusion neighbourhoods of P_n and P_s are not disjoint from the data."""


# -- contours ------------------------------------------------------------------

@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float

    def point(self, t):
        return self.center + self.radius * np.exp(2j * np.pi * np.asarray(t))

    def scaled(self, factor: float) -> "Circle":
        return Circle(self.center, self.radius * factor)

    def contains(self, z) -> bool:
        return abs(z - self.center) < self.radius


@dataclass(frozen=True)
class Rectangle:
    """Counter-clockwise boundary of [re0, re1] x [im0, im1]."""

    re0: float
    re1: float
    im0: float
    im1: float

    def point(self, t):
        t = np.mod(np.asarray(t, dtype=float), 1.0) * 4
        w, h = self.re1 - self.re0, self.im1 - self.im0
        side = np.minimum(t.astype(int), 3)
        s = t - side
        corners = np.array([complex(self.re0, self.im0), complex(self.re1, self.im0),
                            complex(self.re1, self.im1), complex(self.re0, self.im1)])
        steps = np.array([w, 1j * h, -w, -1j * h])
        return corners[side] + s * steps[side]

    def scaled(self, factor: float) -> "Rectangle":
        c = complex(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))
        w, h = 0.5 * (self.re1 - self.re0) * factor, 0.5 * (self.im1 - self.im0) * factor
        return Rectangle(c.real - w, c.real + w, c.imag - h, c.imag + h)

    def contains(self, z) -> bool:
        return self.re0 < z.real < self.re1 and self.im0 < z.imag < self.im1

    def quarters(self, split: float = 0.5) -> list["Rectangle"]:
        xm = self.re0 + split * (self.re1 - self.re0)
        ym = self.im0 + split * (self.im1 - self.im0)
        return [Rectangle(self.re0, xm, self.im0, ym), Rectangle(xm, self.re1, self.im0, ym),
                Rectangle(self.re0, xm, ym, self.im1), Rectangle(xm, self.re1, ym, self.im1)]


# -- winding ----------------------------------------------------------------------

@dataclass
class WindingReport:
    """Adaptive phase sampling of a determinant on a closed contour."""

    contour: object
    t: np.ndarray
    lam: np.ndarray
    log_magnitude: np.ndarray
    phase: np.ndarray
    winding: int
    raw_winding: float
    refinement_depth: int
    perturbations: list = field(default_factory=list)

    @property
    def max_increment(self) -> float:
        return float(np.max(np.abs(_increments(self.phase))))


def _increments(phase: np.ndarray) -> np.ndarray:
    ang = np.angle(phase)
    d = np.diff(np.append(ang, ang[0]))
    return (d + np.pi) % (2 * np.pi) - np.pi


def _evaluate(func, lams, jobs: int):
    if jobs > 1 and len(lams) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(func, lams))
    return [func(z) for z in lams]


class _ZeroOnContour(Exception):
    pass


def _as_polar(v) -> tuple[float, float, complex]:
    """(normalized log magnitude, full log magnitude, phase)."""
    if isinstance(v, EvansValue):
        return v.log_magnitude, v.full_log_magnitude, v.phase
    v = complex(v)
    if v == 0:
        return -np.inf, -np.inf, complex(1.0)
    return float(np.log(abs(v))), float(np.log(abs(v))), v / abs(v)


def _normal_rates(func, contour, t, full, jobs):
    """|d arg E / ds| at each sample: by Cauchy-Riemann the tangential phase
    rate equals the normal derivative of log|E|."""
    eps = 1e-7
    tangent = contour.point(t + eps) - contour.point(t - eps)
    tangent = tangent / np.abs(tangent)
    lam = contour.point(t)
    h = 1e-6 * (1.0 + np.abs(lam))
    shifted = lam - 1j * tangent * h
    vals = [_as_polar(v) for v in _evaluate(func, shifted, jobs)]
    return np.abs(np.array([v[1] for v in vals]) - full) / h


def _sample_contour(func, contour, tol: Tolerances, jobs: int) -> WindingReport:
    # Phase increments alone alias when the argument turns by more than a
    # full turn between samples.  The predicted increment (phase rate times
    # arc length) from both ends of each interval must also stay small.
    n = tol.contour_start
    t = np.arange(n) / n

    def sample(tt):
        vals = [_as_polar(v) for v in _evaluate(func, contour.point(tt), jobs)]
        logm = np.array([v[0] for v in vals])
        full = np.array([v[1] for v in vals])
        ph = np.array([v[2] for v in vals])
        if np.any(logm <= tol.zero_logmag):
            raise _ZeroOnContour(f"|E| below exp({tol.zero_logmag:g}) on the contour")
        return logm, full, ph, _normal_rates(func, contour, tt, full, jobs)

    logm, full, ph, rate = sample(t)
    depth = 0
    while True:
        inc = _increments(ph)
        lam = contour.point(t)
        ds = np.abs(np.roll(lam, -1) - lam)
        predicted = np.maximum(rate, np.roll(rate, -1)) * ds
        bad = np.flatnonzero((np.abs(inc) >= tol.max_phase_step)
                             | (predicted >= tol.max_phase_step))
        if bad.size == 0:
            break
        if len(t) + bad.size > tol.contour_cap:
            raise _ZeroOnContour(f"phase not resolved with {tol.contour_cap} samples")
        t_next = np.append(t[1:], 1.0)
        new_t = 0.5 * (t[bad] + t_next[bad])
        parts = sample(new_t)
        t = np.concatenate([t, new_t])
        logm, full, ph, rate = (np.concatenate([a, b]) for a, b in
                                zip((logm, full, ph, rate), parts))
        order = np.argsort(t, kind="stable")
        t, logm, full, ph, rate = t[order], logm[order], full[order], ph[order], rate[order]
        depth += 1
    raw = float(np.sum(_increments(ph)) / (2 * np.pi))
    wind = int(round(raw))
    if abs(raw - wind) > 1e-6:
        raise _ZeroOnContour(f"non-integer winding {raw:.8f}")
    return WindingReport(contour, t, contour.point(t), logm, ph, wind, raw, depth)


def winding_number(func: Callable, contour, tol: Tolerances = DEFAULT, jobs: int = 1,
                   perturb: Sequence[float] = (1.01, 0.99, 1.02)) -> WindingReport:
    """Winding number of ``func`` (complex or :class:`EvansValue`) along a contour.

    If the function (numerically) vanishes on the contour, the contour is
    rescaled by the factors in ``perturb`` in turn.

    Raises
    ------
    ContourError
        If every perturbed contour also fails; carries the perturbation log.

    Examples
    --------
    >>> winding_number(lambda z: z * z, Circle(0, 1)).winding
    2
    """
    log = []
    for factor in (1.0, *perturb):
        c = contour if factor == 1.0 else contour.scaled(factor)
        try:
            rep = _sample_contour(func, c, tol, jobs)
            rep.perturbations = log
            return rep
        except _ZeroOnContour as exc:
            log.append(f"scale {factor:g}: {exc}")
    raise ContourError("zero on contour after radius perturbations", log)


def evans_function(profile: CoefficientProfile, boundary: BoundaryData, ell: float,
                   tol: Tolerances = DEFAULT) -> Callable[[complex], EvansValue]:
    return lambda lam: boundary_determinant(Propagator(profile, lam, tol=tol), ell, boundary)


def winding_count(profile: CoefficientProfile, boundary: BoundaryData, ell: float,
                  center, radius: float, tol: Tolerances = DEFAULT, jobs: int = 1,
                  func: Callable | None = None) -> WindingReport:
    """Number of eigenvalues (with multiplicity) of the problem on [-ell, ell]
    inside B(center; radius)."""
    f = func if func is not None else evans_function(profile, boundary, ell, tol)
    return winding_number(f, Circle(complex(center), float(radius)), tol, jobs)


# -- accumulation -----------------------------------------------------------------

@dataclass
class AccumulationTable:
    center: complex
    radius: float
    ell0: float
    rows: list  # (ell, ell_bar, count)
    reports: list

    @property
    def counts(self) -> list[int]:
        return [r[2] for r in self.rows]

    @property
    def slope(self) -> float:
        """Least-squares slope of count against ell."""
        ells = np.array([r[0] for r in self.rows], dtype=float)
        counts = np.array(self.counts, dtype=float)
        if len(ells) == 1:
            return float(counts[0] / ells[0])
        return float(np.polyfit(ells, counts, 1)[0])

    def nondecreasing(self, jitter: int = 1) -> bool:
        c = self.counts
        return all(b >= a - jitter for a, b in zip(c, c[1:]))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("# absspec-count v1\n")
            w = csv.writer(fh)
            w.writerow(["ell", "ell_bar", "count"])
            for ell, ellb, n in self.rows:
                w.writerow([format(ell, ".17g"), format(ellb, ".17g"), n])


def accumulation_experiment(profile: CoefficientProfile, boundary: BoundaryData, center,
                            radius: float, ells: Sequence[float], tol: Tolerances = DEFAULT,
                            jobs: int = 1, counter: Callable | None = None) -> AccumulationTable:
    """Winding counts in B(center; radius) for each ell.

    ``counter(ell)`` may replace the default separated-boundary count
    (the periodic module passes its doubled count).
    """
    rows, reports = [], []
    for ell in ells:
        if counter is None:
            rep = winding_count(profile, boundary, ell, center, radius, tol, jobs)
        else:
            rep = counter(ell)
        rows.append((float(ell), float(ell) - profile.ell0, rep.winding))
        reports.append(rep)
    return AccumulationTable(complex(center), float(radius), profile.ell0, rows, reports)


# -- projected covering map ---------------------------------------------------------

def projected_endpoint(profile, boundary, ell, lam, frame=None, tol=DEFAULT):
    """Plücker point of Phi(ell, -ell) U_- and the projection frame of A_+."""
    k = boundary.i_minus
    if frame is None:
        frame = projection_frame(profile.tail_generator("plus", lam), k, tol=tol)
    Q, _ = propagate_frame(Propagator(profile, lam, tol=tol), -ell, ell, boundary.left.frame)
    return pluecker(Subspace(Q)), frame


def attractor_distances(profile: CoefficientProfile, boundary: BoundaryData, lam,
                        ells: Sequence[float], tol: Tolerances = DEFAULT) -> np.ndarray:
    """Rows (dist to P_n, dist to P_s) of the projected endpoint for each ell."""
    frame = projection_frame(profile.tail_generator("plus", lam), boundary.i_minus, tol=tol)
    out = []
    for ell in ells:
        P, _ = projected_endpoint(profile, boundary, ell, lam, frame, tol)
        out.append(frame.distances(P))
    return np.array(out)


def containment_margins(profile: CoefficientProfile, boundary: BoundaryData, ell: float, lam,
                        points: int = 4, tol: Tolerances = DEFAULT) -> dict:
    """Distance of the propagated boundary subspaces from containment in Ebar.

    For ``points`` positions x in (ell0, ell] the margin on side ``plus`` is
    the sine of the largest principal angle between Phi(x, -ell) U_- and
    Ebar_+ (leading i_- + 1 generalized eigenvectors of A_+); side ``minus``
    mirrors it with Phi(-x, ell) U_+ and Ebar_-.  A side is ``None`` when
    Ebar is all of C^N, where containment always holds.  Margins below
    ``tol.containment_margin`` raise one RuntimeWarning per side.
    """
    lam = complex(lam)
    prop = Propagator(profile, lam, tol=tol)
    xs = np.linspace(profile.ell0, ell, points + 1)[1:]
    out = {}
    for side, U, k, sign in (("plus", boundary.left, boundary.i_minus, 1.0),
                             ("minus", boundary.right, boundary.i_plus, -1.0)):
        if k + 1 >= profile.n:
            out[side] = None
            continue
        P = ordered_invariant_subspace(profile.tail_generator(side, lam), k + 1, tol).frame
        Q, start, margins = U.frame, -sign * ell, []
        for x in xs:
            Q, _ = propagate_frame(prop, start, sign * x, Q)
            start = sign * x
            margins.append(float(np.linalg.norm(Q - P @ (P.conj().T @ Q), 2)))
        j = int(np.argmin(margins))
        containment_warning(margins[j], sign * xs[j], tol.containment_margin)
        out[side] = np.array(margins)
    return out


@dataclass
class CoveringTrace:
    """zeta = Z1/Z2 of the projected endpoint along a locus path."""

    ell: float
    ell_bar: float
    s: np.ndarray
    lam: np.ndarray
    zeta: np.ndarray
    cumulative_turns: np.ndarray
    excluded: np.ndarray
    boundary_points: np.ndarray

    @property
    def turns(self) -> float:
        return float(abs(self.cumulative_turns[-1]))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("# absspec-trace v1\n")
            w = csv.writer(fh)
            w.writerow(["s", "re_lambda", "im_lambda", "re_zeta", "im_zeta", "cumulative_turns"])
            for row in zip(self.s, self.lam, self.zeta, self.cumulative_turns):
                s, lam, z, c = row
                w.writerow([format(v, ".17g") for v in (s, lam.real, lam.imag, z.real,
                                                       z.imag, c)])


def covering_trace(profile: CoefficientProfile, boundary: BoundaryData, ell: float,
                   path: Callable[[np.ndarray], np.ndarray] | Sequence[complex],
                   samples: int = 64, exclusion: float | None = None,
                   tol: Tolerances = DEFAULT) -> CoveringTrace:
    """Follow zeta(lam) = Z1/Z2 along a path in the locus.

    ``path`` is either a callable s -> lam on [0, 1] or the two end points of
    a straight segment.  The eigenvector gauge of the projection frame is
    fixed at the first sample so zeta varies analytically along the path;
    the path is refined until consecutive arguments differ by less than a
    quarter turn.

    Raises
    ------
    ConfigError
        If the image of U_+ on the invariant sphere falls inside an
        exclusion neighbourhood of P_n or P_s, or a projected point lies in
        both.
    """
    eps = tol.exclusion_radius if exclusion is None else exclusion
    if not callable(path):
        a, b = (complex(z) for z in path)
        seg = lambda s: a + (b - a) * np.asarray(s)
    else:
        seg = path
    k = boundary.i_minus
    L = boundary_functional(boundary.right, k)
    f0 = projection_frame(profile.tail_generator("plus", complex(seg(0.0))), k, tol=tol)
    gauge = (int(np.argmax(np.abs(f0.w1))), int(np.argmax(np.abs(f0.w2))))

    def zeta_at(lam):
        frame = projection_frame(profile.tail_generator("plus", lam), k, gauge=gauge, tol=tol)
        P, _ = projected_endpoint(profile, boundary, ell, lam, frame, tol)
        z = frame.coordinates(P.coords)
        return complex(z[0] / z[1]), frame, P

    def sample(s):
        lam = complex(seg(s))
        zeta, frame, P = zeta_at(lam)
        # |d log zeta / d lam| from a short step along the path bounds the
        # phase rate, so a fast rotation cannot alias between samples
        ds = 1e-6
        tangent = complex(seg(min(s + ds, 1.0))) - complex(seg(max(s - ds, 0.0)))
        h = tol.fd_step_rel * (1 + abs(lam))
        step = h * tangent / abs(tangent) if tangent != 0 else h
        rate = abs(np.log(zeta_at(lam + step)[0] / zeta)) / h
        return lam, zeta, frame.distances(P), frame.boundary_point(L), rate

    s = np.linspace(0.0, 1.0, samples)
    data = [sample(v) for v in s]
    while True:
        zeta = np.array([d[1] for d in data])
        rate = np.array([d[4] for d in data])
        lam = np.array([d[0] for d in data])
        inc = np.angle(zeta[1:] / zeta[:-1])
        predicted = np.maximum(rate[1:], rate[:-1]) * np.abs(np.diff(lam))
        bad = np.flatnonzero((np.abs(inc) >= tol.max_phase_step)
                             | (predicted >= tol.max_phase_step))
        if bad.size == 0:
            break
        if len(s) + bad.size > tol.contour_cap:
            raise ConfigError("covering trace could not resolve the argument of zeta")
        mids = 0.5 * (s[bad] + s[bad + 1])
        new = [sample(v) for v in mids]
        s = np.concatenate([s, mids])
        data = data + new
        order = np.argsort(s, kind="stable")
        s = s[order]
        data = [data[j] for j in order]
    lam = np.array([d[0] for d in data])
    zeta = np.array([d[1] for d in data])
    dist = np.array([d[2] for d in data])
    bps = np.array([d[3] for d in data])
    for u, v in bps:
        dn = chordal_distance([u, v], [1, 0])
        ds = chordal_distance([u, v], [0, 1])
        if min(dn, ds) < eps:
            raise ConfigError(f"U_+ meets the invariant sphere within {eps:g} of P_n or P_s "
                              f"(distances {dn:.3g}, {ds:.3g})")
    excluded = (dist[:, 0] < eps) | (dist[:, 1] < eps)
    if np.any((dist[:, 0] < eps) & (dist[:, 1] < eps)):
        raise ConfigError("projected point inside both exclusion neighbourhoods")
    inc = np.angle(zeta[1:] / zeta[:-1])
    cum = np.concatenate([[0.0], np.cumsum(inc)]) / (2 * np.pi)
    return CoveringTrace(float(ell), float(ell) - profile.ell0, s, lam, zeta, cum, excluded,
                         bps[:, 0] / np.where(bps[:, 1] == 0, np.nan, bps[:, 1]))


# -- eigenvalue refinement ------------------------------------------------------------

@dataclass
class RefinedEigenvalue:
    lam: complex
    residual: float
    iterations: int
    multiplicity: int


def _normalized(func, lam, ref_scale):
    v = func(lam)
    if isinstance(v, EvansValue):
        if v.log_magnitude == -np.inf:
            return 0j, 0.0
        return v.phase * np.exp(v.log_magnitude + v.log_scale - ref_scale), abs(v.value)
    v = complex(v)
    return v, abs(v)


def refine_eigenvalue(func: Callable, lam0, radius: float | None = None,
                      tol: Tolerances = DEFAULT, check_winding: bool = True) -> RefinedEigenvalue:
    """Complex secant iteration for a simple zero near ``lam0``.

    ``func`` returns an :class:`EvansValue` (or a complex number).  The
    iteration uses phase * exp(log magnitude + log scale), shifted by the
    scale at ``lam0``; convergence requires the normalized determinant
    below 1e-10.

    Raises
    ------
    ValueError
        If the seed disk B(lam0; radius) does not have winding number 1.
    RuntimeError
        If the secant iteration does not converge.
    """
    lam0 = complex(lam0)
    radius = 0.1 * (1 + abs(lam0)) if radius is None else radius
    if check_winding:
        w = winding_number(func, Circle(lam0, radius), tol).winding
        if w != 1:
            raise ValueError(f"seed disk B({lam0:.4g}; {radius:g}) has winding {w}, expected 1")
    v0 = func(lam0)
    ref = v0.log_scale + v0.log_magnitude if isinstance(v0, EvansValue) and np.isfinite(
        v0.log_magnitude) else 0.0
    z0, z1 = lam0, lam0 + 1e-3 * radius
    f0, _ = _normalized(func, z0, ref)
    f1, r1 = _normalized(func, z1, ref)
    for it in range(1, tol.secant_maxiter + 1):
        if f1 == f0:
            break
        z2 = z1 - f1 * (z1 - z0) / (f1 - f0)
        if abs(z2 - lam0) > radius:
            z2 = lam0 + radius * (z2 - lam0) / abs(z2 - lam0) * 0.5
        z0, f0 = z1, f1
        z1 = z2
        f1, r1 = _normalized(func, z1, ref)
        if r1 <= 1e-13 or abs(z1 - z0) <= tol.secant_tol * 1e-4 * (1 + abs(z1)):
            break
    if r1 > 1e-10:
        raise RuntimeError(f"secant iteration did not converge (|E| = {r1:.3e})")
    try:
        mult = winding_number(func, Circle(z1, 1e-4), tol).winding
    except ContourError:
        mult = -1
    return RefinedEigenvalue(complex(z1), float(r1), it, mult)


def locate_zeros(func: Callable, contour, tol: Tolerances = DEFAULT, max_depth: int = 12,
                 target: Circle | None = None) -> list[RefinedEigenvalue]:
    """Zeros inside ``contour`` by recursive quadrisection and secant refinement.

    A rectangle with winding 1 is refined from its centre; rectangles with
    larger winding are split into four, or, below a size threshold, the
    cluster is reported with its winding as multiplicity.  With ``target``
    given, only zeros inside that circle are returned.
    """
    if isinstance(contour, Circle):
        c, r = contour.center, contour.radius
        rect = Rectangle(c.real - r, c.real + r, c.imag - r, c.imag + r)
        target = contour if target is None else target
    else:
        rect = contour
    found: list[RefinedEigenvalue] = []

    def recurse(R: Rectangle, depth: int):
        w = winding_number(func, R, tol, perturb=(1.003, 0.997, 1.006))
        R = w.contour
        if w.winding == 0:
            return
        size = max(R.re1 - R.re0, R.im1 - R.im0)
        centre = complex(0.5 * (R.re0 + R.re1), 0.5 * (R.im0 + R.im1))
        if w.winding == 1:
            z = refine_eigenvalue(func, centre, radius=size, tol=tol, check_winding=False)
            if R.contains(z.lam):
                found.append(z)
                return
            if depth >= max_depth:
                raise RuntimeError(f"secant left the box around {centre:.6g}")
            # the secant ran to a zero outside R; narrow the box instead
            for q in R.quarters(0.5 + 0.0123):
                recurse(q, depth + 1)
            return
        if depth >= max_depth or size < 1e-6:
            z = refine_eigenvalue(func, centre, radius=size, tol=tol, check_winding=False)
            found.append(RefinedEigenvalue(z.lam, z.residual, z.iterations, w.winding))
            return
        # off-centre split keeps grid lines away from symmetric zero sets
        for q in R.quarters(0.5 + 0.0123):
            recurse(q, depth + 1)

    recurse(rect, 0)
    # perturbed neighbouring boxes can both capture a zero near a shared edge
    merged: list[RefinedEigenvalue] = []
    for z in found:
        j = next((j for j, m in enumerate(merged)
                  if abs(z.lam - m.lam) <= 1e-6 * (1 + abs(z.lam))), None)
        if j is None:
            merged.append(z)
        elif z.multiplicity > merged[j].multiplicity:
            merged[j] = z
    found = merged
    if target is not None:
        found = [z for z in found if target.contains(z.lam)]
    return found
