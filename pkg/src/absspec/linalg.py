"""Dense complex linear algebra kernel.

Eigenvalues ordered by real part, ordered invariant subspaces obtained by
reordering a complex Schur form, orthonormal frames and log-scaled
determinants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .config import DEFAULT, Tolerances

__all__ = [
    "ClusterSplitError",
    "SchurError",
    "SortedSpectrum",
    "Subspace",
    "as_matrix",
    "cluster_tolerance",
    "det_logscaled",
    "eig_sorted",
    "intersection_dimension",
    "orthonormal_frame",
    "invariant_subspace",
    "ordered_invariant_subspace",
    "qr_positive",
]


class ClusterSplitError(ValueError):
    """Requested split runs through a cluster of numerically equal eigenvalues."""


class SchurError(np.linalg.LinAlgError):
    """The Schur reduction or its reordering did not succeed."""


def as_matrix(A, square: bool = True) -> np.ndarray:
    """Return ``A`` as a finite complex 2-D array (read-only copy)."""
    M = np.array(A, dtype=complex, copy=True)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {M.shape}")
    if square and M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    M.setflags(write=False)
    return M


def cluster_tolerance(A: np.ndarray, tol: Tolerances = DEFAULT) -> float:
    return tol.cluster_rel * (1.0 + np.linalg.norm(A, 2))


def _sort_order(values: np.ndarray, tie: float) -> np.ndarray:
    # Descending real part; runs of (chained) equal real parts re-sorted by
    # descending imaginary part.  Python's sort is stable, which keeps the
    # Schur order for whatever is still tied.
    idx = sorted(range(len(values)), key=lambda j: -values[j].real)
    out: list[int] = []
    start = 0
    for stop in range(1, len(idx) + 1):
        if stop == len(idx) or values[idx[stop - 1]].real - values[idx[stop]].real > tie:
            run = idx[start:stop]
            out.extend(sorted(run, key=lambda j: -values[j].imag))
            start = stop
    return np.array(out, dtype=int)


def _cluster_ids(values: np.ndarray, tie: float) -> tuple[int, ...]:
    ids = [-1] * len(values)
    current = 0
    for i in range(len(values)):
        if ids[i] >= 0:
            continue
        stack = [i]
        ids[i] = current
        while stack:
            j = stack.pop()
            for m in range(len(values)):
                if ids[m] < 0 and abs(values[m] - values[j]) <= tie:
                    ids[m] = current
                    stack.append(m)
        current += 1
    return tuple(ids)


@dataclass(frozen=True)
class SortedSpectrum:
    """Eigenvalues ordered by descending real part, multiplicity repeated.

    ``cluster_ids[j]`` labels the group of numerically coincident eigenvalues
    that ``values[j]`` belongs to.
    """

    values: np.ndarray
    cluster_ids: tuple[int, ...]
    tie_tolerance: float

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, j):
        return self.values[j]

    def splits_at(self, count: int) -> bool:
        """True if the first ``count`` eigenvalues are separated from the rest."""
        if count <= 0 or count >= len(self.values):
            return True
        return self.cluster_ids[count - 1] != self.cluster_ids[count]


def _schur(A: np.ndarray):
    try:
        T, Z = scipy.linalg.schur(A, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SchurError(f"Schur reduction failed: {exc}") from exc
    return T, Z


def eig_sorted(A, tol: Tolerances = DEFAULT) -> SortedSpectrum:
    """Eigenvalues of ``A`` sorted by descending real part.

    Ties in the real part (within the cluster tolerance) are broken by
    descending imaginary part and then by Schur order.

    Raises
    ------
    ValueError
        If ``A`` is not square or has non-finite entries.
    SchurError
        If the underlying QR iteration fails.
    """
    A = as_matrix(A)
    T, _ = _schur(A)
    w = np.diag(T).copy()
    tie = cluster_tolerance(A, tol)
    order = _sort_order(w, tie)
    values = w[order]
    values.setflags(write=False)
    return SortedSpectrum(values, _cluster_ids(values, tie), tie)


def qr_positive(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization whose R has a real positive diagonal."""
    Q, R = np.linalg.qr(M)
    d = np.diag(R)
    ph = np.where(d == 0, 1.0, d / np.where(d == 0, 1.0, np.abs(d)))
    return Q * ph, R * np.conj(ph)[:, None]


def orthonormal_frame(M, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Orthonormal basis of the column span of ``M`` (pivoted Householder QR)."""
    M = np.asarray(M, dtype=complex)
    if M.ndim == 1:
        M = M[:, None]
    Q, R, _ = scipy.linalg.qr(M, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        raise ValueError("zero matrix has no column span")
    rank = int(np.sum(d > tol.rank_rel * d[0]))
    return Q[:, :rank]


@dataclass(frozen=True, eq=False)
class Subspace:
    """A k-dimensional subspace of C^N stored as an orthonormal N x k frame."""

    frame: np.ndarray
    tol: Tolerances = field(default=DEFAULT, repr=False)

    def __post_init__(self):
        F = np.array(self.frame, dtype=complex, copy=True)
        if F.ndim == 1:
            F = F[:, None]
        if F.ndim != 2 or not 1 <= F.shape[1] <= F.shape[0]:
            raise ValueError(f"bad frame shape {F.shape}")
        err = np.linalg.norm(F.conj().T @ F - np.eye(F.shape[1]))
        if err > self.tol.orthonormal:
            raise ValueError(f"frame is not orthonormal (defect {err:.2e})")
        F.setflags(write=False)
        object.__setattr__(self, "frame", F)

    @classmethod
    def span(cls, *vectors, tol: Tolerances = DEFAULT) -> "Subspace":
        """Subspace spanned by column vectors (or one matrix of columns)."""
        if len(vectors) == 1:
            M = np.asarray(vectors[0], dtype=complex)
        else:
            M = np.column_stack([np.asarray(v, dtype=complex) for v in vectors])
        return cls(orthonormal_frame(M, tol), tol)

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    def projector(self) -> np.ndarray:
        return self.frame @ self.frame.conj().T

    def distance(self, other: "Subspace") -> float:
        """Projector-difference norm; zero iff the subspaces coincide."""
        return float(np.linalg.norm(self.projector() - other.projector(), 2))


def ordered_invariant_subspace(A, count: int, tol: Tolerances = DEFAULT) -> Subspace:
    """Invariant subspace of the ``count`` leading eigenvalues of ``A``.

    The complex Schur form is reordered (LAPACK ``ztrsen``) so the selected
    eigenvalues come first; the leading Schur vectors span the subspace.

    Raises
    ------
    ClusterSplitError
        If the ``count``-th and ``count+1``-th sorted eigenvalues coincide.
    """
    n = np.shape(A)[0]
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")
    return invariant_subspace(A, range(count), tol)


def invariant_subspace(A, positions, tol: Tolerances = DEFAULT) -> Subspace:
    """Invariant subspace for the eigenvalues at ``positions`` in sorted order."""
    A = as_matrix(A)
    n = A.shape[0]
    positions = sorted(set(int(p) for p in positions))
    if not positions or positions[0] < 0 or positions[-1] >= n:
        raise ValueError(f"positions must be a nonempty subset of range({n})")
    T, Z = _schur(A)
    w = np.diag(T)
    tie = cluster_tolerance(A, tol)
    order = _sort_order(w, tie)
    chosen = order[positions]
    others = np.setdiff1d(order, chosen)
    for i in chosen:
        for j in others:
            if abs(w[i] - w[j]) <= tie:
                raise ClusterSplitError(
                    f"eigenvalues {w[i]:.6g} and {w[j]:.6g} coincide within "
                    f"{tie:.2e}; cannot separate them"
                )
    select = np.zeros(n, dtype=np.int32)
    select[chosen] = 1
    ts, qs, _, m, _, _, info = lapack.ztrsen(select, T, Z, job="N")
    if info != 0 or m != len(chosen):
        raise SchurError(f"ztrsen failed (info={info}, m={m})")
    return Subspace(orthonormal_frame(qs[:, : len(chosen)], tol), tol)


def det_logscaled(M) -> tuple[float, complex]:
    """``det M = exp(log_magnitude) * phase``; singular M gives ``-inf``."""
    M = as_matrix(M)
    sign, logabs = np.linalg.slogdet(M)
    if sign == 0:
        return -np.inf, complex(1.0)
    return float(logabs), complex(sign)


def intersection_dimension(U: Subspace, V: Subspace, tol: float = 1e-8) -> int:
    """Number of principal angles between ``U`` and ``V`` that vanish."""
    if U.ambient_dim != V.ambient_dim:
        raise ValueError("subspaces live in different ambient spaces")
    s = np.linalg.svd(U.frame.conj().T @ V.frame, compute_uv=False)
    return int(np.sum(s >= 1.0 - tol))
