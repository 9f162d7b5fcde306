"""Exterior powers: additive compound matrices, Plücker coordinates and the
eigen-coordinates of the two leading compound eigenvalues."""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Tolerances
from .linalg import (
    ClusterSplitError,
    Subspace,
    as_matrix,
    eig_sorted,
    ordered_invariant_subspace,
)

__all__ = [
    "IndexBasis",
    "OrderingError",
    "PlueckerPoint",
    "ProjectionFrame",
    "boundary_functional",
    "chordal_distance",
    "compound_matrix",
    "leading_pair",
    "pluecker",
    "pluecker_relations",
    "projection_frame",
]


class OrderingError(ValueError):
    """The two leading compound eigenvalues are not separated from the rest."""


@functools.lru_cache(maxsize=None)
def _subsets(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations(range(n), k))


@dataclass(frozen=True)
class IndexBasis:
    """Lexicographically ordered k-subsets of {0..N-1}: coordinates of the k-th exterior power."""

    n: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= N, got k={self.k}, N={self.n}")

    @property
    def subsets(self) -> tuple[tuple[int, ...], ...]:
        return _subsets(self.n, self.k)

    @property
    def m(self) -> int:
        return len(self.subsets)

    @functools.cached_property
    def position(self) -> dict:
        return {s: i for i, s in enumerate(self.subsets)}


def compound_matrix(A, k: int) -> np.ndarray:
    """Additive k-th compound of ``A``: the generator of the induced flow on
    k-vectors.

    Diagonal entries are sums of the diagonal of ``A`` over the index set;
    index sets differing in one element pick up a signed entry of ``A``.
    """
    A = as_matrix(A)
    n = A.shape[0]
    basis = IndexBasis(n, k)
    pos = basis.position
    C = np.zeros((basis.m, basis.m), dtype=complex)
    outside = [[j for j in range(n) if j not in I] for I in basis.subsets]
    for col, I in enumerate(basis.subsets):
        C[col, col] = sum(A[i, i] for i in I)
        for r, i in enumerate(I):
            rest = I[:r] + I[r + 1:]
            for j in outside[col]:
                a = A[j, i]
                if a == 0:
                    continue
                s = sum(1 for t in rest if t < j)
                J = rest[:s] + (j,) + rest[s:]
                C[pos[J], col] += (-1) ** (r - s) * a
    return C


def _normalize(v: np.ndarray) -> tuple[np.ndarray, float, complex]:
    j = int(np.argmax(np.abs(v)))
    a = v[j]
    if a == 0:
        raise ValueError("zero vector has no projective class")
    return v / a, float(np.log(abs(a))), complex(a / abs(a))


class PlueckerPoint:
    """Point of CP^(m-1): largest-modulus coordinate scaled to exactly 1."""

    __slots__ = ("coords", "n", "k")

    def __init__(self, coords, n: int | None = None, k: int | None = None):
        v = np.asarray(coords, dtype=complex).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite Plücker coordinates")
        v, _, _ = _normalize(v)
        v.setflags(write=False)
        self.coords = v
        self.n = n
        self.k = k

    @property
    def m(self) -> int:
        return len(self.coords)

    def distance(self, other: "PlueckerPoint") -> float:
        """Chordal (sine of angle) distance in projective space."""
        return chordal_distance(self.coords, other.coords)

    def __repr__(self):
        inner = ":".join(f"{z:.4g}" for z in self.coords)
        return f"PlueckerPoint([{inner}])"


def chordal_distance(u, v) -> float:
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    # sine of the angle as the residual of projecting u onto v: accurate near 0
    return float(min(1.0, np.linalg.norm(u - v * np.vdot(v, u))))


def _minors(F: np.ndarray, k: int) -> np.ndarray:
    n = F.shape[0]
    subs = _subsets(n, k)
    return np.array([np.linalg.det(F[list(I), :]) for I in subs])


def pluecker(U: Subspace | np.ndarray) -> PlueckerPoint:
    """Plücker point of a subspace: all k x k row minors of a frame, lexicographic."""
    F = U.frame if isinstance(U, Subspace) else np.asarray(U, dtype=complex)
    n, k = F.shape
    return PlueckerPoint(_minors(F, k), n, k)


def pluecker_relations(coords, n: int, k: int) -> float:
    """Largest residual of the quadratic Plücker relations, relative to |p|^2.

    Zero (to rounding) exactly for decomposable k-vectors.  For N=4, k=2 the
    single relation is p01 p23 - p02 p13 + p03 p12.
    """
    p = np.asarray(coords, dtype=complex)
    basis = IndexBasis(n, k)
    pos = basis.position

    def coord(idx):
        if len(set(idx)) < len(idx):
            return 0.0, 0
        order = sorted(range(len(idx)), key=lambda t: idx[t])
        # parity of the sorting permutation
        sign, seen = 1, [False] * len(idx)
        for start in range(len(idx)):
            if seen[start]:
                continue
            length, t = 0, start
            while not seen[t]:
                seen[t] = True
                t = order[t]
                length += 1
            if length % 2 == 0:
                sign = -sign
        return p[pos[tuple(sorted(idx))]], sign

    worst = 0.0
    scale = np.vdot(p, p).real
    if k in (1, n - 1, n):
        return 0.0
    for I in itertools.combinations(range(n), k - 1):
        for J in itertools.combinations(range(n), k + 1):
            total = 0.0
            for ell, j in enumerate(J):
                a, sa = coord(I + (j,))
                if sa == 0:
                    continue
                b, sb = coord(J[:ell] + J[ell + 1:])
                total += (-1) ** ell * sa * sb * a * b
            worst = max(worst, abs(total))
    return float(worst / scale)


def boundary_functional(U_plus: Subspace, k: int) -> np.ndarray:
    """Linear functional L on k-vectors with L(pluecker(F)) = det[F | U_plus].

    Laplace expansion of the determinant along the first k columns.
    """
    G = U_plus.frame
    n = G.shape[0]
    if G.shape[1] != n - k:
        raise ValueError("U_plus must have dimension N - k")
    out = []
    for I in _subsets(n, k):
        comp = [i for i in range(n) if i not in I]
        sign = (-1) ** (sum(i + 1 for i in I) + k * (k + 1) // 2)
        out.append(sign * (np.linalg.det(G[comp, :]) if comp else 1.0))
    return np.array(out, dtype=complex)


def leading_pair(values: np.ndarray, k: int, tie: float) -> tuple[complex, complex]:
    """The sorted eigenvalues at positions k and k+1 (1-based), labelled (a, b).

    ``a`` has the larger imaginary part (ties: larger real part).  With this
    labelling Re(a - b) changes sign across the locus Re mu^k = Re mu^(k+1)
    and is continuous near non-degenerate locus points.
    """
    p, q = values[k - 1], values[k]
    if abs(p.imag - q.imag) > tie:
        return (p, q) if p.imag > q.imag else (q, p)
    return (p, q) if p.real >= q.real else (q, p)


@dataclass(frozen=True, eq=False)
class ProjectionFrame:
    """Eigen-coordinates of the two leading eigenvalues nu1, nu2 of A^(k).

    ``w1``/``w2`` are eigenvectors of the compound for nu1 = S + mu_a and
    nu2 = S + mu_b (S the sum of the k-1 leading base eigenvalues), so that
    P_n = [w1] and P_s = [w2].  ``left`` spans the left invariant subspace
    of the pair; coordinates (Z1, Z2) of a k-vector v are the solution of
    (left^H W) Z = left^H v, i.e. the spectral projection along the
    remaining invariant subspace.
    """

    nu1: complex
    nu2: complex
    w1: np.ndarray
    w2: np.ndarray
    left: np.ndarray
    rest_margin: float
    compound: np.ndarray

    @property
    def W(self) -> np.ndarray:
        return np.column_stack([self.w1, self.w2])

    @property
    def P_n(self) -> PlueckerPoint:
        return PlueckerPoint(self.w1)

    @property
    def P_s(self) -> PlueckerPoint:
        return PlueckerPoint(self.w2)

    def coordinates(self, v) -> np.ndarray:
        v = v.coords if isinstance(v, PlueckerPoint) else np.asarray(v, dtype=complex)
        Y = self.left
        return np.linalg.solve(Y.conj().T @ self.W, Y.conj().T @ v)

    def project(self, v) -> tuple[complex, complex]:
        """Pr: the (Z1 : Z2) component, scaled so max(|Z1|, |Z2|) = 1."""
        z = self.coordinates(v)
        if np.max(np.abs(z)) == 0:
            raise ValueError("point lies in the excluded subspace [0:0:Z3:...]")
        z = z / z[np.argmax(np.abs(z))]
        return complex(z[0]), complex(z[1])

    def zeta(self, v) -> complex:
        z = self.coordinates(v)
        return complex(z[0] / z[1])

    def distances(self, v) -> tuple[float, float]:
        """Chordal distances of Pr(v) to P_n = [1:0] and P_s = [0:1] in CP^1."""
        z = self.coordinates(v)
        nz = np.linalg.norm(z)
        return float(abs(z[1]) / nz), float(abs(z[0]) / nz)

    def boundary_point(self, L: np.ndarray) -> tuple[complex, complex]:
        """Point of CP^1 whose k-plane meets U_+ (L from :func:`boundary_functional`)."""
        a, b = L @ self.w1, L @ self.w2
        z = np.array([b, -a])
        if np.max(np.abs(z)) == 0:
            raise ValueError("U_+ meets every point of the invariant sphere")
        z = z / z[np.argmax(np.abs(z))]
        return complex(z[0]), complex(z[1])

    def regauged(self, g1: int, g2: int) -> "ProjectionFrame":
        """Scale w1, w2 so that coordinate g1 of w1 and g2 of w2 equal 1."""
        return ProjectionFrame(self.nu1, self.nu2, self.w1 / self.w1[g1], self.w2 / self.w2[g2],
                               self.left, self.rest_margin, self.compound)


def projection_frame(A_tail, k: int, gauge: tuple[int, int] | None = None,
                     tol: Tolerances = DEFAULT) -> ProjectionFrame:
    """Eigen-coordinate data of the compound A^(k) of a tail matrix.

    Raises
    ------
    OrderingError
        If nu1, nu2 are not simple or do not strictly lead the rest in real part.
    """
    A = as_matrix(A_tail)
    n = A.shape[0]
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < N")
    base = eig_sorted(A, tol)
    mu_a, mu_b = leading_pair(base.values, k, base.tie_tolerance)
    S = complex(np.sum(base.values[: k - 1]))
    target1, target2 = S + mu_a, S + mu_b
    C = compound_matrix(A, k)
    cspec = eig_sorted(C, tol)
    tie = cspec.tie_tolerance
    if abs(target1 - target2) <= tie:
        raise OrderingError("nu1 and nu2 coincide; eigenvectors undefined")
    m = C.shape[0]
    top = cspec.values[:2]
    match = 1e-6 * (1.0 + np.linalg.norm(C, 2))
    if min(abs(top[0] - target1) + abs(top[1] - target2),
           abs(top[0] - target2) + abs(top[1] - target1)) > match:
        raise OrderingError("the leading compound eigenvalues are not S + mu^k, S + mu^(k+1)")
    rest_margin = np.inf
    if m > 2:
        rest_margin = min(target1.real, target2.real) - cspec.values[2].real
        if rest_margin <= tie:
            raise OrderingError(
                f"leading pair not separated: Re nu = {target1.real:.6g}, "
                f"{target2.real:.6g}, next {cspec.values[2].real:.6g}")
    try:
        Q = ordered_invariant_subspace(C, 2, tol).frame
        Yl = ordered_invariant_subspace(C.conj().T, 2, tol).frame
    except ClusterSplitError as exc:
        raise OrderingError(str(exc)) from exc
    T2 = Q.conj().T @ C @ Q
    vals, vecs = np.linalg.eig(T2)
    i1 = int(np.argmin(np.abs(vals - target1)))
    i2 = 1 - i1
    w1 = Q @ vecs[:, i1]
    w2 = Q @ vecs[:, i2]
    if gauge is None:
        gauge = (int(np.argmax(np.abs(w1))), int(np.argmax(np.abs(w2))))
    frame = ProjectionFrame(complex(vals[i1]), complex(vals[i2]), w1, w2, Yl,
                            float(rest_margin), C)
    return frame.regauged(*gauge)
