"""Spectral problem data: coefficient family, boundary subspaces, parameter
domains, structural hypothesis checks and the JSON problem-file format."""

from __future__ import annotations

import hashlib
import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.stats import qmc

from .config import DEFAULT, Tolerances
from .expr import Expr, ExprError
from .linalg import (
    ClusterSplitError,
    Subspace,
    eig_sorted,
    intersection_dimension,
    invariant_subspace,
    ordered_invariant_subspace,
)

__all__ = [
    "KINDS",
    "BoundaryData",
    "CoefficientProfile",
    "ContinuityError",
    "DomainError",
    "HypothesisError",
    "HypothesisReport",
    "MatrixFamily",
    "ParameterDomain",
    "ProblemFileError",
    "SampleCheck",
    "crossing_index",
    "dump_problem",
    "evaluate",
    "load_problem",
    "parse_problem",
    "problem_to_dict",
    "validate_hypotheses",
]

KINDS = ("separated-asymptotic", "periodic-asymptotic", "periodic-tail")


class ContinuityError(ValueError):
    """Middle matrix does not match a tail matrix at the seam x = +-ell0."""


class HypothesisError(ValueError):
    """Boundary data violates the dimension hypothesis (i_- + i_+ = N, i_- <= i_+)."""


class DomainError(ValueError):
    """lambda lies outside the declared parameter domain."""


class ProblemFileError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.col = col


class MatrixFamily:
    """An N x N matrix of expressions in ``lam`` and ``x``."""

    def __init__(self, entries, constants: dict | None = None):
        rows = [list(r) for r in entries]
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("matrix family must be square and nonempty")
        self.n = n
        self.entries = [[e if isinstance(e, Expr) else Expr(e, constants) for e in r] for r in rows]

    @property
    def depends_on_x(self) -> bool:
        return any(e.depends_on_x for r in self.entries for e in r)

    def __call__(self, lam, x=0.0) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        x = np.asarray(x, dtype=float)
        shape = np.broadcast(lam, x).shape
        out = np.empty(shape + (self.n, self.n), dtype=complex)
        for i, row in enumerate(self.entries):
            for j, e in enumerate(row):
                out[..., i, j] = e(lam, x)
        return out

    def sources(self) -> list[list[str]]:
        return [[e.source for e in r] for r in self.entries]

    def digest(self) -> str:
        h = hashlib.sha256()
        for r in self.entries:
            for e in r:
                h.update(e.digest().encode())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class CoefficientProfile:
    """The family A(x; lam): tails outside [-ell0, ell0], a middle part inside.

    ``kind`` is one of ``separated-asymptotic``, ``periodic-asymptotic``
    (both tails equal A0) or ``periodic-tail`` (tails periodic in x with
    period ``period``; spectra then use the monodromy over one period).
    """

    n: int
    ell0: float
    left: MatrixFamily
    right: MatrixFamily
    middle: MatrixFamily
    kind: str = "separated-asymptotic"
    period: float | None = None
    name: str = "anonymous"
    constants: dict = field(default_factory=dict)
    lam_domain: "ParameterDomain | None" = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.ell0 <= 0:
            raise ValueError("ell0 must be positive")
        for fam in (self.left, self.right, self.middle):
            if fam.n != self.n:
                raise ValueError("matrix family dimension does not match N")
        if self.kind == "periodic-tail":
            if not self.period or self.period <= 0:
                raise ValueError("periodic-tail profiles need a positive period")
        elif self.left.depends_on_x or self.right.depends_on_x:
            raise ValueError(f"{self.kind} profiles need x-independent tails")

    # -- evaluation -------------------------------------------------------
    def _check_lam(self, lam):
        if self.lam_domain is not None and not np.all(self.lam_domain.contains(lam)):
            raise DomainError(f"lambda={lam} outside the declared domain")

    def evaluate(self, x: float, lam) -> np.ndarray:
        self._check_lam(lam)
        if x <= -self.ell0:
            return self.left(lam, x)
        if x >= self.ell0:
            return self.right(lam, x)
        return self.middle(lam, x)

    def tail(self, side: str, lam, x: float | None = None) -> np.ndarray:
        """Tail matrix (``plus``/``minus``/``zero``) at ``lam``; batched over lam."""
        self._check_lam(lam)
        fam = self.right if side == "plus" else self.left
        if side not in ("plus", "minus", "zero"):
            raise ValueError(f"unknown side {side!r}")
        if x is None:
            x = self.ell0 if side == "plus" else -self.ell0
        return fam(lam, x)

    def tail_generator(self, side: str, lam) -> np.ndarray:
        """Matrix whose eigenvalues define the asymptotic spectra on ``side``.

        For constant tails this is the tail matrix.  For periodic tails it is
        log(M)/T with M the monodromy over one period, so that real parts of
        its eigenvalues order the Floquet multipliers by modulus.
        """
        if self.kind != "periodic-tail":
            return self.tail(side, lam)
        from .flow import fundamental_matrix  # local import: flow depends on this module

        T = self.period
        lam = complex(lam)
        if side == "plus":
            M = fundamental_matrix(self, lam, self.ell0, self.ell0 + T)
        else:
            M = fundamental_matrix(self, lam, -self.ell0 - T, -self.ell0)
        return scipy.linalg.logm(M) / T

    def check_seams(self, lams: Sequence[complex] | None = None, tol: float | None = None):
        """Raise :class:`ContinuityError` if middle and tails disagree at +-ell0."""
        tol = DEFAULT.seam if tol is None else tol
        if lams is None:
            rng = np.random.default_rng(0)
            lams = rng.uniform(-2, 2, 8) + 1j * rng.uniform(-2, 2, 8)
        for lam in lams:
            for x, fam in ((-self.ell0, self.left), (self.ell0, self.right)):
                a = fam(lam, x)
                b = self.middle(lam, x)
                gap = np.max(np.abs(a - b)) / (1.0 + np.max(np.abs(a)))
                if gap > tol:
                    raise ContinuityError(
                        f"seam mismatch {gap:.3e} at x={x:+g}, lambda={complex(lam):.4g}"
                    )

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.kind}|{self.n}|{self.ell0!r}|{self.period!r}".encode())
        for fam in (self.left, self.right, self.middle):
            h.update(fam.digest().encode())
        return h.hexdigest()


def evaluate(profile: CoefficientProfile, x: float, lam) -> np.ndarray:
    """A(x; lam) for the given profile."""
    return profile.evaluate(x, lam)


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Boundary subspaces U_- (at -ell) and U_+ (at +ell)."""

    left: Subspace
    right: Subspace

    def __post_init__(self):
        if self.left.ambient_dim != self.right.ambient_dim:
            raise HypothesisError("boundary subspaces live in different dimensions")
        n = self.left.ambient_dim
        if self.left.dim + self.right.dim != n:
            raise HypothesisError(
                f"dim U_- + dim U_+ = {self.left.dim + self.right.dim}, expected N = {n}"
            )
        if self.left.dim > self.right.dim:
            raise HypothesisError(
                f"i_- = {self.left.dim} > i_+ = {self.right.dim} (need i_- <= i_+)"
            )

    @property
    def i_minus(self) -> int:
        return self.left.dim

    @property
    def i_plus(self) -> int:
        return self.right.dim


@dataclass(frozen=True)
class ParameterDomain:
    """Rectangle [re0, re1] x [im0, im1] or disk B(center; radius) in C."""

    re0: float = 0.0
    re1: float = 0.0
    im0: float = 0.0
    im1: float = 0.0
    res: int = 64
    center: complex | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.res < 8:
            raise ValueError("resolution must be at least 8 points per axis")
        if self.center is not None:
            if self.radius is None or self.radius <= 0:
                raise ValueError("disk domains need a positive radius")
        elif not (self.re1 > self.re0 and self.im1 > self.im0):
            raise ValueError("rectangle domain has empty interior")

    @classmethod
    def disk(cls, center, radius: float, res: int = 64) -> "ParameterDomain":
        return cls(center=complex(center), radius=float(radius), res=res)

    @property
    def is_disk(self) -> bool:
        return self.center is not None

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        if self.is_disk:
            c, r = self.center, self.radius
            return c.real - r, c.real + r, c.imag - r, c.imag + r
        return self.re0, self.re1, self.im0, self.im1

    def contains(self, lam):
        lam = np.asarray(lam, dtype=complex)
        if self.is_disk:
            return np.abs(lam - self.center) <= self.radius * (1 + 1e-12)
        eps = 1e-12 * (1 + max(abs(v) for v in self.bounds))
        return ((lam.real >= self.re0 - eps) & (lam.real <= self.re1 + eps)
                & (lam.imag >= self.im0 - eps) & (lam.imag <= self.im1 + eps))

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis coordinates (re, im) of the res x res sampling grid."""
        re0, re1, im0, im1 = self.bounds
        return np.linspace(re0, re1, self.res), np.linspace(im0, im1, self.res)

    def samples(self, count: int, seed: int = 0) -> np.ndarray:
        """``count`` quasi-random points inside the domain.

        The sequence is a scrambled Halton sequence, so the first ``n``
        samples are the same for every ``count >= n``.
        """
        re0, re1, im0, im1 = self.bounds
        engine = qmc.Halton(d=2, scramble=True, seed=seed)
        out: list[complex] = []
        while len(out) < count:
            u = engine.random(max(16, count))
            for a, b in u:
                lam = complex(re0 + a * (re1 - re0), im0 + b * (im1 - im0))
                if self.contains(lam):
                    out.append(lam)
                    if len(out) == count:
                        break
        return np.array(out)

    def to_dict(self) -> dict:
        if self.is_disk:
            return {"center": [self.center.real, self.center.imag],
                    "radius": self.radius, "res": self.res}
        return {"re": [self.re0, self.re1], "im": [self.im0, self.im1], "res": self.res}


# -- hypothesis checks ------------------------------------------------------

@dataclass
class SampleCheck:
    lam: complex
    sum_margin: dict = field(default_factory=dict)
    intersection_dim: dict = field(default_factory=dict)
    general_position: dict = field(default_factory=dict)
    cluster: bool = False
    notes: list = field(default_factory=list)
    passed: bool = True


@dataclass
class HypothesisReport:
    samples: list
    rank_tol: float

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.samples)

    def failures(self) -> list:
        return [s for s in self.samples if not s.passed]

    def summary(self) -> str:
        bad = len(self.failures())
        clusters = sum(s.cluster for s in self.samples)
        return (f"{len(self.samples)} samples, {bad} failing, "
                f"{clusters} flagged for eigenvalue clusters")


def _sum_margin(E: np.ndarray, U: np.ndarray) -> float:
    """N-th singular value of [E | U]; positive iff E + U = C^N."""
    M = np.hstack([E, U])
    n = M.shape[0]
    s = np.linalg.svd(M, compute_uv=False)
    return float(s[n - 1]) if len(s) >= n else 0.0


def crossing_index(values: np.ndarray, tie: float) -> int:
    """Index of the eigenvalue closest to the imaginary axis.

    Ties in |Re| are broken towards the larger imaginary part, which makes the
    choice (and the sign of its real part) continuous across the locus.
    """
    a = np.abs(values.real)
    near = np.flatnonzero(a <= a.min() + tie)
    return int(near[np.argmax(values[near].imag)])


def _check_separated(profile, boundary, lam, tol, margin) -> SampleCheck:
    chk = SampleCheck(complex(lam))
    sides = (("plus", boundary.i_minus, boundary.right),
             ("minus", boundary.i_plus, boundary.left))
    for side, i, U in sides:
        A = profile.tail_generator(side, lam)
        n = A.shape[0]
        try:
            Ebar = ordered_invariant_subspace(A, min(i + 1, n), tol)
        except ClusterSplitError as exc:
            chk.cluster = True
            chk.notes.append(f"{side}: {exc}")
            continue
        m = _sum_margin(Ebar.frame, U.frame)
        chk.sum_margin[side] = m
        chk.intersection_dim[side] = intersection_dimension(Ebar, U, tol=1e-8) if m > 0 else None
        if m <= tol.rank_rel:
            chk.passed = False
            chk.notes.append(f"{side}: Ebar + U does not span C^N")
        # dim(Ebar n U) from the dimension count; principal angles confirm it
        expect = Ebar.dim + U.dim - n
        if expect != 1:
            chk.notes.append(f"{side}: dim(Ebar n U) = {expect} by dimension count")
        # U must avoid the two eigenspaces E1 (leading i) and E2 (leading i-1 plus i+1)
        if i < n:
            try:
                E1 = invariant_subspace(A, range(i), tol)
                E2 = invariant_subspace(A, list(range(i - 1)) + [i], tol)
            except ClusterSplitError as exc:
                chk.cluster = True
                chk.notes.append(f"{side}: {exc}")
                continue
            gp = min(_sum_margin(E1.frame, U.frame), _sum_margin(E2.frame, U.frame))
            chk.general_position[side] = gp
            if gp < margin:
                chk.passed = False
                chk.notes.append(f"{side}: U meets an eigenspace of the split (margin {gp:.2e})")
    return chk


def _check_periodic(profile, lam, gamma, tol) -> SampleCheck:
    chk = SampleCheck(complex(lam))
    A0 = profile.tail_generator("zero", lam)
    n = A0.shape[0]
    spec = eig_sorted(A0, tol)
    k = crossing_index(spec.values, spec.tie_tolerance)
    try:
        Ek = invariant_subspace(A0, [k], tol).frame
    except ClusterSplitError as exc:
        chk.cluster = True
        chk.notes.append(str(exc))
        return chk
    Ebar = np.zeros((2 * n, n + 1), dtype=complex)
    Ebar[:n, 0] = Ek[:, 0]
    Ebar[n:, 1:] = np.eye(n)
    eye = np.eye(n)
    bounds = {"minus": np.vstack([eye, eye]) / np.sqrt(2),
              "plus": np.vstack([gamma * eye, eye]) / np.sqrt(2)}
    Esub = Subspace.span(Ebar)
    for side, U in bounds.items():
        m = _sum_margin(Ebar, U)
        chk.sum_margin[side] = m
        chk.intersection_dim[side] = intersection_dimension(Esub, Subspace(U), tol=1e-8)
        if m <= tol.rank_rel:
            chk.passed = False
            chk.notes.append(f"{side}: Ebar0 + U does not span C^2N")
    return chk


def validate_hypotheses(profile: CoefficientProfile, boundary: BoundaryData | None,
                        domain: ParameterDomain, sample_count: int = 64, seed: int = 0,
                        gamma: complex = 1.0, tol: Tolerances = DEFAULT) -> HypothesisReport:
    """Check the structural hypotheses at quasi-random samples of ``domain``.

    Separated kinds: for each side, the extended eigenspace (leading i+1
    generalized eigenvectors of the tail) must span C^N together with the
    boundary subspace, and the boundary subspace must avoid both eigenspaces
    between which the split exchanges.  Periodic kind: the doubled system's
    extended centre space must be transverse to the diagonal and twisted
    boundary subspaces.  Cluster collisions are flagged, not failed.
    """
    if profile.kind != "periodic-asymptotic" and boundary is None:
        raise ValueError("separated problems need boundary data")
    samples = []
    for lam in domain.samples(sample_count, seed):
        if profile.kind == "periodic-asymptotic":
            samples.append(_check_periodic(profile, lam, gamma, tol))
        else:
            samples.append(_check_separated(profile, boundary, lam, tol, tol.containment_margin))
    return HypothesisReport(samples, tol.rank_rel)


# -- problem files ----------------------------------------------------------

_REQUIRED = ("name", "N", "ell0", "kind", "A_minus", "A_plus", "middle")


def _locate(text: str, key: str) -> tuple[int | None, int | None]:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    if not m:
        return None, None
    line = text.count("\n", 0, m.start()) + 1
    col = m.start() - (text.rfind("\n", 0, m.start()) + 1) + 1
    return line, col


def _complex_entry(v) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    raise TypeError(f"expected number or [re, im], got {v!r}")


def parse_problem(data: dict, text: str = "", path: str = "<problem>"):
    """Build ``(profile, boundary, domain)`` from a decoded problem dictionary."""

    def fail(msg, key):
        line, col = _locate(text, key) if text else (None, None)
        raise ProblemFileError(f"{path}: {msg}", line, col)

    if not isinstance(data, dict):
        raise ProblemFileError(f"{path}: top level must be an object", 1, 1)
    for key in _REQUIRED:
        if key not in data:
            raise ProblemFileError(f"{path}: missing required field {key!r}", 1, 1)
    unknown = set(data) - set(_REQUIRED) - {"U_minus", "U_plus", "domain", "constants", "period"}
    if unknown:
        fail(f"unknown field {sorted(unknown)[0]!r}", sorted(unknown)[0])
    constants = data.get("constants", {}) or {}
    try:
        constants = {k: _complex_entry(v) for k, v in constants.items()}
    except (TypeError, AttributeError) as exc:
        fail(f"bad constants: {exc}", "constants")
    n = data["N"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        fail("N must be a positive integer", "N")
    fams = {}
    for key in ("A_minus", "A_plus", "middle"):
        m = data[key]
        if not isinstance(m, list) or len(m) != n or any(
                not isinstance(r, list) or len(r) != n for r in m):
            fail(f"{key} must be an {n}x{n} array of entries", key)
        try:
            fams[key] = MatrixFamily(m, constants)
        except ExprError as exc:
            fail(f"{key}: {exc}", key)
    kind = data["kind"]
    if kind not in KINDS:
        fail(f"kind must be one of {KINDS}", "kind")
    try:
        profile = CoefficientProfile(
            n=n, ell0=float(data["ell0"]), left=fams["A_minus"], right=fams["A_plus"],
            middle=fams["middle"], kind=kind, period=data.get("period"),
            name=str(data["name"]), constants=constants,
        )
    except ValueError as exc:
        fail(str(exc), "kind")
    profile.check_seams()

    boundary = None
    if "U_minus" in data or "U_plus" in data:
        frames = {}
        for key in ("U_minus", "U_plus"):
            if key not in data:
                fail(f"{key} is required when the other boundary is given", key)
            try:
                M = np.array([[_complex_entry(v) for v in row] for row in data[key]])
            except (TypeError, ValueError) as exc:
                fail(f"{key}: {exc}", key)
            if M.ndim != 2 or M.shape[0] != n:
                fail(f"{key} must have N={n} rows", key)
            frames[key] = Subspace.span(M)
        boundary = BoundaryData(frames["U_minus"], frames["U_plus"])
    elif kind != "periodic-asymptotic":
        fail("separated problems need U_minus and U_plus", "kind")

    domain = None
    if "domain" in data:
        d = data["domain"]
        try:
            if "center" in d:
                domain = ParameterDomain.disk(_complex_entry(d["center"]), float(d["radius"]),
                                              int(d.get("res", 64)))
            else:
                domain = ParameterDomain(float(d["re"][0]), float(d["re"][1]),
                                         float(d["im"][0]), float(d["im"][1]),
                                         res=int(d.get("res", 64)))
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            fail(f"bad domain: {exc}", "domain")
    return profile, boundary, domain


def load_problem(path):
    """Read a JSON problem file; returns ``(profile, boundary, domain)``.

    Raises
    ------
    ProblemFileError
        Syntax or schema violations, with line and column.
    ContinuityError
        Middle and tail matrices disagree at a seam.
    HypothesisError
        Boundary dimensions violate i_- + i_+ = N or i_- <= i_+.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: {exc.msg}", exc.lineno, exc.colno) from None
    return parse_problem(data, text, str(path))


def problem_to_dict(profile: CoefficientProfile, boundary: BoundaryData | None = None,
                    domain: ParameterDomain | None = None) -> dict:
    def cplx(z):
        z = complex(z)
        return [z.real, z.imag]

    out = {
        "name": profile.name,
        "N": profile.n,
        "ell0": profile.ell0,
        "kind": profile.kind,
        "constants": {k: cplx(v) for k, v in profile.constants.items()},
        "A_minus": profile.left.sources(),
        "A_plus": profile.right.sources(),
        "middle": profile.middle.sources(),
    }
    if profile.period is not None:
        out["period"] = profile.period
    if boundary is not None:
        out["U_minus"] = [[cplx(v) for v in row] for row in boundary.left.frame]
        out["U_plus"] = [[cplx(v) for v in row] for row in boundary.right.frame]
    if domain is not None:
        out["domain"] = domain.to_dict()
    return out


def dump_problem(path, profile, boundary=None, domain=None) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(profile, boundary, domain), indent=2),
                          encoding="utf-8")


def containment_warning(margin: float, x: float, threshold: float) -> None:
    if margin < threshold:
        warnings.warn(f"propagated U_- nearly contained in Ebar_+ at x={x:g} "
                      f"(margin {margin:.2e})", RuntimeWarning, stacklevel=3)
