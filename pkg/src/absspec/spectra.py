"""Gap functions, locus tracing and non-degeneracy certificates.

The absolute spectrum on side ``plus`` (``minus``) is the zero set of the
gap between the i-th and (i+1)-th eigenvalues of A_+ (A_-), ordered by
descending real part, with i = i_- (i = i_+).  The asymptotic essential
spectrum of a periodic-kind problem is the set where A_0 has an eigenvalue
on the imaginary axis.

Both are traced as zero sets of a *signed* gap, so that a sign change on a
grid edge brackets the locus:

* absolute: ``Re(mu_a - mu_b)`` where ``(mu_a, mu_b)`` are the eigenvalues
  at positions i, i+1 labelled so that ``mu_a`` has the larger imaginary
  part; its modulus is ``Re mu^i - Re mu^(i+1)``.
* essential: ``Re mu_c`` for the eigenvalue ``mu_c`` closest to the
  imaginary axis (ties towards larger imaginary part).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT, Tolerances
from .linalg import cluster_tolerance
from .problem import BoundaryData, CoefficientProfile, ParameterDomain

__all__ = [
    "CSV_HEADER",
    "DiskPartition",
    "DiskTooLarge",
    "LocusVertex",
    "NondegeneracyReport",
    "PreconditionError",
    "SpectrumLocus",
    "certify_nondegenerate",
    "gap",
    "gap_batch",
    "gap_index",
    "partition_disk",
    "tail_eigenvalues",
    "trace_locus",
    "write_locus_csv",
]

CSV_HEADER = ["re_lambda", "im_lambda", "gap", "mu_i_re", "mu_i_im", "mu_ip1_re",
              "mu_ip1_im", "dgap_dlambda_re", "dgap_dlambda_im", "nondegenerate"]
CSV_VERSION = "# absspec-locus v1"


class DiskTooLarge(ValueError):
    """The locus does not cross the disk in a single non-degenerate arc."""


class PreconditionError(ValueError):
    """An operation was called outside its stated precondition."""


def gap_index(side: str, boundary: BoundaryData | None = None, index: int | None = None) -> int:
    """Index i of the split: i_- on side plus, i_+ on side minus (1-based)."""
    if side == "zero":
        return 0
    if index is not None:
        return int(index)
    if boundary is None:
        raise ValueError("the absolute gap needs boundary data or an explicit index")
    if side == "plus":
        return boundary.i_minus
    if side == "minus":
        return boundary.i_plus
    raise ValueError(f"unknown side {side!r}")


def tail_eigenvalues(profile: CoefficientProfile, side: str, lam) -> np.ndarray:
    """Eigenvalues of the tail generator at each lam, sorted by descending real part.

    Returns an array of shape ``lam.shape + (N,)``.  Ties in the real part
    keep the order of ``numpy.linalg.eigvals``; callers relabel pairs.
    """
    lam = np.asarray(lam, dtype=complex)
    if profile.kind == "periodic-tail":
        flat = np.array([np.linalg.eigvals(profile.tail_generator(side, z))
                         for z in lam.ravel()])
        w = flat.reshape(lam.shape + (profile.n,))
    else:
        w = np.linalg.eigvals(profile.tail(side, lam))
    order = np.argsort(-w.real, axis=-1, kind="stable")
    return np.take_along_axis(w, order, axis=-1)


def _pair(w: np.ndarray, i: int):
    p, q = w[..., i - 1], w[..., i]
    swap = (q.imag > p.imag) | ((q.imag == p.imag) & (q.real > p.real))
    a = np.where(swap, q, p)
    b = np.where(swap, p, q)
    return a, b


def _crossing(w: np.ndarray, tie: float):
    r = np.abs(w.real)
    near = r <= r.min(axis=-1, keepdims=True) + tie
    score = np.where(near, w.imag, -np.inf)
    j = np.argmax(score, axis=-1)
    return np.take_along_axis(w, j[..., None], axis=-1)[..., 0], j


def _tie(profile, side, lam, tol) -> float:
    lam = np.asarray(lam, dtype=complex)
    z = lam.ravel()[0] if lam.size else 0j
    A = profile.tail_generator(side, z) if profile.kind == "periodic-tail" else \
        profile.tail(side, z)
    return cluster_tolerance(A, tol)


def gap_batch(profile: CoefficientProfile, side: str, lam, index: int = 0,
              tol: Tolerances = DEFAULT) -> np.ndarray:
    """Signed gap at every lam; NaN where the split runs through a cluster."""
    lam = np.asarray(lam, dtype=complex)
    w = tail_eigenvalues(profile, side, lam)
    tie = _tie(profile, side, lam, tol)
    if side == "zero":
        mu, _ = _crossing(w, tie)
        return mu.real
    a, b = _pair(w, index)
    g = (a - b).real
    return np.where(np.abs(a - b) <= tie, np.nan, g)


def gap(profile: CoefficientProfile, side: str, lam, boundary: BoundaryData | None = None,
        index: int | None = None, tol: Tolerances = DEFAULT) -> float:
    """Signed gap at one lam (see module docstring); NaN flags a cluster.

    Examples
    --------
    For u'' + 2u' = lam u the plus-side gap at lam = 0 is 2 and at lam = -2
    it is 0.
    """
    i = gap_index(side, boundary, index)
    return float(gap_batch(profile, side, np.array([lam]), i, tol)[0])


# -- non-degeneracy ------------------------------------------------------------

@dataclass
class NondegeneracyReport:
    """Certificate for a locus point.

    ``derivative`` is d(mu_a - mu_b)/dlam (absolute) or dmu_c/dlam
    (essential).  ``off_locus_margin`` is the smallest |Re derivative| at
    nearby off-locus samples; it is reported, not thresholded.
    """

    lam: complex
    side: str
    index: int
    gap: float
    mu: tuple
    ordering_margins: tuple
    distinctness: float
    derivative: complex
    off_locus_margin: float
    threshold: float
    flags: dict = field(default_factory=dict)

    @property
    def nondegenerate(self) -> bool:
        return all(self.flags.values())


def _branch_values(profile, side, i, lam, ref, tie):
    """Eigenvalues at lam matched to the reference pair (nearest neighbour)."""
    w = tail_eigenvalues(profile, side, np.array([lam]))[0]
    out = []
    for r in ref:
        out.append(w[int(np.argmin(np.abs(w - r)))])
    return out


def _derivative(profile, side, i, lam, tol):
    """Complex 4-point difference of the tracked branch quantity at lam."""
    lam = complex(lam)
    w0 = tail_eigenvalues(profile, side, np.array([lam]))[0]
    tie = _tie(profile, side, lam, tol)
    if side == "zero":
        mu, _ = _crossing(w0[None], tie)
        ref = (complex(mu[0]),)
        value = lambda vals: vals[0]
    else:
        a, b = _pair(w0[None], i)
        ref = (complex(a[0]), complex(b[0]))
        value = lambda vals: vals[0] - vals[1]
    h = tol.fd_step_rel * (1 + abs(lam))
    f = {s: value(_branch_values(profile, side, i, lam + s, ref, tie))
         for s in (h, -h, 1j * h, -1j * h)}
    d = (f[h] - f[-h] - 1j * f[1j * h] + 1j * f[-1j * h]) / (4 * h)
    return complex(d), ref, w0


def certify_nondegenerate(profile: CoefficientProfile, side: str, lam,
                          boundary: BoundaryData | None = None, index: int | None = None,
                          threshold: float = 1e-6, probe_radius: float = 1e-3,
                          tol: Tolerances = DEFAULT) -> NondegeneracyReport:
    """Check the non-degeneracy conditions at a locus point.

    Absolute case: strict ordering Re mu^(i-1) > Re mu^i = Re mu^(i+1) >
    Re mu^(i+2), distinct mu^i != mu^(i+1), and a nonzero derivative of
    mu^i - mu^(i+1).  Essential case: the crossing eigenvalue is simple and
    alone on the imaginary axis, and its derivative is nonzero.

    Raises
    ------
    PreconditionError
        If |gap(lam)| > 1e-6.
    """
    lam = complex(lam)
    i = gap_index(side, boundary, index)
    g = gap(profile, side, lam, index=i, tol=tol)
    if not np.isfinite(g) or abs(g) > 1e-6:
        raise PreconditionError(f"lambda = {lam} is not on the locus (gap {g:.3e})")
    d, ref, w = _derivative(profile, side, i, lam, tol)
    n = len(w)
    if side == "zero":
        others = np.delete(w, int(np.argmin(np.abs(w - ref[0]))))
        distinct = float(np.min(np.abs(others - ref[0]))) if others.size else np.inf
        margins = (float(np.min(np.abs(others.real))) if others.size else np.inf,)
    else:
        distinct = abs(ref[0] - ref[1])
        upper = w[i - 2].real - w[i - 1].real if i >= 2 else np.inf
        lower = w[i].real - w[i + 1].real if i + 1 < n else np.inf
        margins = (float(upper), float(lower))
    # derivative at nearby off-locus points: the "not purely imaginary" margin
    probes = lam + probe_radius * np.exp(2j * np.pi * np.arange(8) / 8)
    off = []
    for z in probes:
        gz = gap(profile, side, z, index=i, tol=tol)
        if np.isfinite(gz) and abs(gz) > 1e-6:
            off.append(abs(_derivative(profile, side, i, z, tol)[0].real))
    flags = {
        "ordered": bool(min(margins) > threshold),
        "distinct": bool(distinct > threshold),
        "derivative_nonzero": bool(abs(d) > threshold),
    }
    return NondegeneracyReport(lam, side, i, g, ref, margins, float(distinct), d,
                               float(min(off)) if off else float("nan"), threshold, flags)


# -- locus tracing ---------------------------------------------------------------

@dataclass
class LocusVertex:
    lam: complex
    gap: float
    mu_i: complex
    mu_ip1: complex
    dgap: complex
    nondegenerate: bool


@dataclass
class SpectrumLocus:
    """Zero set of the signed gap on a grid, as chained polylines."""

    side: str
    index: int
    domain: ParameterDomain
    polylines: list
    vertices: list
    rejected: list

    @property
    def points(self) -> np.ndarray:
        return np.array([v.lam for v in self.vertices], dtype=complex)

    @property
    def nondegenerate_points(self) -> np.ndarray:
        return np.array([v.lam for v in self.vertices if v.nondegenerate], dtype=complex)

    def __len__(self) -> int:
        return len(self.vertices)


def _refine(f, z0, z1, g0, g1, xtol):
    if g0 == 0:
        return z0
    if g1 == 0:
        return z1
    t = brentq(lambda t: f(z0 + t * (z1 - z0)), 0.0, 1.0, xtol=xtol, rtol=4 * np.finfo(float).eps,
               maxiter=200)
    return z0 + t * (z1 - z0)


def trace_locus(profile: CoefficientProfile, side: str, domain: ParameterDomain,
                boundary: BoundaryData | None = None, index: int | None = None,
                certify: bool = True, tol: Tolerances = DEFAULT) -> SpectrumLocus:
    """Trace {gap = 0} over the domain grid by marching squares.

    Every sign change on a grid edge is refined by bracketing root finding
    on that edge and kept only if the refined |gap| <= ``tol.locus_gap``;
    sign changes across jumps (eigenvalue relabelling, branch cuts) are
    listed in ``rejected``.  Vertices are chained into polylines through
    the cells they bound.
    """
    i = gap_index(side, boundary, index)
    xs, ys = domain.grid()
    X, Y = np.meshgrid(xs, ys)
    L = X + 1j * Y
    G = gap_batch(profile, side, L, i, tol)
    f = lambda z: float(gap_batch(profile, side, np.array([z]), i, tol)[0])
    ny, nx = G.shape
    scale = max(xs[-1] - xs[0], ys[-1] - ys[0])
    xtol = 1e-15 * max(1.0, 1.0 / scale)

    def sgn(v):
        return 1 if v >= 0 else -1

    edge_vertex: dict = {}
    rejected: list = []

    def vertex(e):
        # e = ("h", r, c): (r,c)-(r,c+1); ("v", r, c): (r,c)-(r+1,c)
        if e in edge_vertex:
            return edge_vertex[e]
        kind, r, c = e
        r1, c1 = (r, c + 1) if kind == "h" else (r + 1, c)
        g0, g1 = G[r, c], G[r1, c1]
        out = None
        if np.isfinite(g0) and np.isfinite(g1) and sgn(g0) != sgn(g1):
            z = _refine(f, L[r, c], L[r1, c1], g0, g1, xtol)
            gz = f(z)
            if np.isfinite(gz) and abs(gz) <= tol.locus_gap and domain.contains(z):
                out = complex(z)
            elif not domain.contains(z):
                out = None
            else:
                rejected.append(complex(z))
        edge_vertex[e] = out
        return out

    segments = []
    for r in range(ny - 1):
        for c in range(nx - 1):
            edges = [("h", r, c), ("v", r, c + 1), ("h", r + 1, c), ("v", r, c)]
            corners = [G[r, c], G[r, c + 1], G[r + 1, c + 1], G[r + 1, c]]
            if not all(np.isfinite(corners)):
                continue
            s = [sgn(v) for v in corners]
            crossing = [e for e, a, b in zip(edges, s, s[1:] + s[:1]) if a != b]
            if len(crossing) == 2:
                pairs = [tuple(crossing)]
            elif len(crossing) == 4:
                centre = f(L[r, c] + 0.5 * (L[r + 1, c + 1] - L[r, c]))
                # corner 0 connected to the centre when signs agree
                if sgn(centre) == s[0]:
                    pairs = [(edges[0], edges[1]), (edges[2], edges[3])]
                else:
                    pairs = [(edges[3], edges[0]), (edges[1], edges[2])]
            else:
                continue
            for e0, e1 in pairs:
                v0, v1 = vertex(e0), vertex(e1)
                if v0 is not None and v1 is not None:
                    segments.append((e0, e1))
                elif v0 is not None:
                    segments.append((e0, None))
                elif v1 is not None:
                    segments.append((e1, None))

    polylines = _chain(segments)
    keys = [k for line in polylines for k in line]
    seen = set()
    vertices = []
    lines = []
    for line in polylines:
        pts = []
        for k in line:
            z = edge_vertex[k]
            pts.append(z)
            if k in seen:
                continue
            seen.add(k)
            vertices.append(_vertex_data(profile, side, i, z, certify, tol))
        lines.append(np.array(pts, dtype=complex))
    del keys
    return SpectrumLocus(side, i, domain, lines, vertices, rejected)


def _chain(segments) -> list[list]:
    """Join edge-keyed segments into maximal paths (deterministic order)."""
    adj: dict = {}
    for a, b in segments:
        adj.setdefault(a, [])
        if b is not None:
            adj[a].append(b)
            adj.setdefault(b, []).append(a)
    used = set()
    lines = []

    def walk(start):
        line = [start]
        prev, cur = None, start
        while True:
            nxt = [v for v in adj[cur] if (min(cur, v), max(cur, v)) not in used]
            if not nxt:
                return line
            v = nxt[0]
            used.add((min(cur, v), max(cur, v)))
            line.append(v)
            prev, cur = cur, v
            if cur == start:
                return line

    order = sorted(adj)
    # open paths first: start from endpoints (degree != 2)
    for node in order:
        if len(adj[node]) != 2 and any((min(node, v), max(node, v)) not in used
                                       for v in adj[node]):
            lines.append(walk(node))
        elif not adj[node] and all(node not in l for l in lines):
            lines.append([node])
    for node in order:
        if any((min(node, v), max(node, v)) not in used for v in adj[node]):
            lines.append(walk(node))
    return lines


def _vertex_data(profile, side, i, z, certify, tol) -> LocusVertex:
    w = tail_eigenvalues(profile, side, np.array([z]))[0]
    g = float(gap_batch(profile, side, np.array([z]), i, tol)[0])
    if side == "zero":
        mu_i = mu_ip1 = complex(_crossing(w[None], _tie(profile, side, z, tol))[0][0])
    else:
        mu_i, mu_ip1 = complex(w[i - 1]), complex(w[i])
    d, nondeg = complex("nan"), False
    if certify:
        try:
            rep = certify_nondegenerate(profile, side, z, index=i, tol=tol)
            d, nondeg = rep.derivative, rep.nondegenerate
        except PreconditionError:
            pass
    return LocusVertex(complex(z), g, mu_i, mu_ip1, d, nondeg)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_locus_csv(locus: SpectrumLocus, path) -> None:
    """One row per vertex, polyline order; header preceded by a version line."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(CSV_VERSION + "\n")
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for v in locus.vertices:
            w.writerow([_fmt(v.lam.real), _fmt(v.lam.imag), _fmt(v.gap),
                        _fmt(v.mu_i.real), _fmt(v.mu_i.imag),
                        _fmt(v.mu_ip1.real), _fmt(v.mu_ip1.imag),
                        _fmt(v.dgap.real), _fmt(v.dgap.imag), int(v.nondegenerate)])


# -- half-disk partition ---------------------------------------------------------

@dataclass
class DiskPartition:
    """Half-disks B1 = {gap > 0} and B2 = {gap < 0} of B(center; radius)."""

    profile: CoefficientProfile
    side: str
    index: int
    center: complex
    radius: float
    arc: np.ndarray
    on_tolerance: float = 1e-6
    tol: Tolerances = field(default=DEFAULT, repr=False)

    def gap(self, lam) -> np.ndarray:
        return gap_batch(self.profile, self.side, np.asarray(lam, dtype=complex),
                         self.index, self.tol)

    def classify(self, lam) -> str:
        lam = complex(lam)
        if abs(lam - self.center) > self.radius:
            raise ValueError(f"{lam} lies outside the disk")
        g = float(self.gap(np.array([lam]))[0])
        if not np.isfinite(g) or abs(g) <= self.on_tolerance:
            return "onLocus"
        return "B1" if g > 0 else "B2"

    def samples(self, region: str, count: int, min_gap: float = 0.0,
                seed: int = 0) -> np.ndarray:
        """Quasi-random points of B1 or B2 with |gap| >= min_gap."""
        dom = ParameterDomain.disk(self.center, self.radius)
        pool = dom.samples(max(64, 16 * count), seed)
        g = self.gap(pool)
        want = g > 0 if region == "B1" else g < 0
        keep = pool[want & (np.abs(g) >= max(min_gap, self.on_tolerance))]
        if len(keep) < count:
            raise ValueError(f"only {len(keep)} samples of {region} with |gap| >= {min_gap}")
        return keep[:count]


def partition_disk(profile: CoefficientProfile, side: str, center, radius: float,
                   boundary: BoundaryData | None = None, index: int | None = None,
                   res: int = 48, tol: Tolerances = DEFAULT) -> DiskPartition:
    """Split B(center; radius) along the locus into B1 and B2.

    Raises
    ------
    PreconditionError
        ``center`` is not a non-degenerate locus point.
    DiskTooLarge
        The locus inside the disk is not one arc running boundary to
        boundary, or the gap jumps or degenerates inside the disk.
    """
    center = complex(center)
    i = gap_index(side, boundary, index)
    rep = certify_nondegenerate(profile, side, center, index=i, tol=tol)
    if not rep.nondegenerate:
        raise PreconditionError(f"{center} is a degenerate locus point: {rep.flags}")
    dom = ParameterDomain.disk(center, radius, res)
    locus = trace_locus(profile, side, dom, index=i, certify=True, tol=tol)
    if locus.rejected:
        raise DiskTooLarge(f"gap jumps inside the disk near {locus.rejected[0]:.4g}")
    if len(locus.polylines) != 1:
        raise DiskTooLarge(f"{len(locus.polylines)} locus arcs inside the disk")
    if not all(v.nondegenerate for v in locus.vertices):
        raise DiskTooLarge("degenerate locus points inside the disk")
    arc = locus.polylines[0]
    cell = 2 * 2 * radius / (res - 1)
    for end in (arc[0], arc[-1]):
        if radius - abs(end - center) > 2 * cell:
            raise DiskTooLarge(f"locus ends inside the disk at {end:.4g}")
    return DiskPartition(profile, side, i, center, float(radius), arc, tol=tol)
