"""Propagation of frames, subspaces and Plücker points along x.

Constant pieces of the coefficient profile are crossed with matrix
exponentials, x-dependent pieces with an embedded Dormand-Prince 5(4)
pair.  Frames are re-orthonormalized (QR with positive diagonal) after
every chunk or accepted step and the logarithms of the discarded scale
factors are accumulated, so that nothing overflows however long the
interval is.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .config import DEFAULT, Tolerances
from .exterior import PlueckerPoint, compound_matrix, pluecker
from .linalg import Subspace, qr_positive
from .problem import BoundaryData, CoefficientProfile

__all__ = [
    "EvansValue",
    "IntegrationError",
    "Propagator",
    "TrajectoryRecord",
    "boundary_determinant",
    "fundamental_matrix",
    "propagate_frame",
    "propagate_pluecker",
    "propagate_subspace",
    "trajectory",
    "transfer_chunks",
]


class IntegrationError(RuntimeError):
    """Step size underflow in the Runge-Kutta integrator."""

    def __init__(self, message: str, x: float):
        super().__init__(f"{message} at x = {x:.17g}")
        self.x = x


@dataclass(frozen=True, eq=False)
class Propagator:
    """Integration settings for Y' = A(x; lam) Y at a fixed ``lam``."""

    profile: CoefficientProfile
    lam: complex
    rtol: float = DEFAULT.rtol
    atol: float = DEFAULT.atol
    max_step: float | None = None
    tol: Tolerances = field(default=DEFAULT, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "lam", complex(self.lam))
        if self.max_step is None:
            object.__setattr__(self, "max_step", self.profile.ell0 / 16)

    @property
    def n(self) -> int:
        return self.profile.n

    def matrix(self, x: float) -> np.ndarray:
        return self.profile.evaluate(x, self.lam)

    def pieces(self, a: float, b: float):
        """Split [a, b] (either orientation) at +-ell0.

        Yields ``(x0, x1, constant)``; ``constant`` is the matrix when the
        piece has x-independent coefficients and ``None`` otherwise.
        """
        p = self.profile
        cuts = sorted({a, b} | {c for c in (-p.ell0, p.ell0) if min(a, b) < c < max(a, b)})
        if b < a:
            cuts = cuts[::-1]
        for x0, x1 in zip(cuts[:-1], cuts[1:]):
            mid = 0.5 * (x0 + x1)
            if mid <= -p.ell0:
                fam = p.left
            elif mid >= p.ell0:
                fam = p.right
            else:
                fam = p.middle
            const = None if fam.depends_on_x else fam(self.lam, mid)
            yield x0, x1, const


# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_E = _B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640,
                    -92097 / 339200, 187 / 2100, 1 / 40])


def _qr_renorm(Y: np.ndarray) -> tuple[np.ndarray, float]:
    Q, R = qr_positive(Y)
    return Q, float(np.sum(np.log(np.diag(R).real)))


def _max_renorm(p: np.ndarray) -> tuple[np.ndarray, float]:
    a = p.flat[int(np.argmax(np.abs(p)))]
    return p / a, float(np.log(abs(a)))


def _no_renorm(Y: np.ndarray) -> tuple[np.ndarray, float]:
    return Y, 0.0


def _evolve(prop: Propagator, a: float, b: float, Y: np.ndarray,
            generator: Callable[[np.ndarray], np.ndarray],
            renorm: Callable, n_active: int | None = None,
            on_step: Callable | None = None) -> tuple[np.ndarray, float]:
    """Advance Y from a to b; only the first ``n_active`` rows evolve."""
    Y = np.array(Y, dtype=complex)
    if Y.ndim == 1:
        Y = Y[:, None]
    na = Y.shape[0] if n_active is None else n_active
    log_scale = 0.0
    growth = prop.tol.max_growth_log
    for x0, x1, const in prop.pieces(a, b):
        length = x1 - x0
        if length == 0:
            continue
        if const is not None:
            G = generator(const)
            re = np.linalg.eigvals(G).real
            spread = max(re.max() - re.min(), np.max(np.abs(re)), 1e-300)
            nchunk = max(1, int(np.ceil(abs(length) * spread / growth)))
            h = length / nchunk
            E = scipy.linalg.expm(G * h)
            x = x0
            for _ in range(nchunk):
                Y[:na] = E @ Y[:na]
                Y, ls = renorm(Y)
                log_scale += ls
                x += h
                if on_step is not None:
                    on_step(x, Y, log_scale)
        else:
            Y, log_scale = _rk45(prop, x0, x1, Y, na, generator, renorm, log_scale, on_step)
    return Y, log_scale


def _rk45(prop, x0, x1, Y, na, generator, renorm, log_scale, on_step):
    direction = 1.0 if x1 > x0 else -1.0
    span = abs(x1 - x0)
    hmax = min(prop.max_step, span)
    h = min(hmax, 0.01 * max(span, 1e-3))
    x = x0
    f = lambda s, Z: generator(prop.matrix(s)) @ Z
    K = [None] * 7
    K[0] = f(x, Y[:na])
    while direction * (x1 - x) > 0:
        h = min(h, abs(x1 - x))
        if h < 1e-14 * max(1.0, abs(x)):
            raise IntegrationError("step size underflow", x)
        hs = direction * h
        Z = Y[:na]
        for s in range(1, 7):
            inc = sum(_A[s][j] * K[j] for j in range(s) if _A[s][j] != 0)
            K[s] = f(x + _C[s] * hs, Z + hs * inc)
        Znew = Z + hs * sum(_B[j] * K[j] for j in range(6) if _B[j] != 0)
        err = hs * sum(_E[j] * K[j] for j in range(7))
        scale = prop.atol + prop.rtol * np.maximum(np.abs(Z), np.abs(Znew))
        enorm = float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))
        if enorm <= 1.0:
            x = x + hs if abs(x1 - (x + hs)) > 1e-15 * max(1.0, abs(x1)) else x1
            Y[:na] = Znew
            Y, ls = renorm(Y)
            log_scale += ls
            if on_step is not None:
                on_step(x, Y, log_scale)
            K[0] = f(x, Y[:na])
            fac = 5.0 if enorm == 0 else min(5.0, 0.9 * enorm ** -0.2)
        else:
            fac = max(0.2, 0.9 * enorm ** -0.2)
        h = min(hmax, h * fac)
    return Y, log_scale


def propagate_frame(prop: Propagator, a: float, b: float, F: np.ndarray,
                    n_active: int | None = None) -> tuple[np.ndarray, float]:
    """Orthonormal frame of Phi(b, a) F and the log of the discarded scale.

    ``F`` is assumed orthonormal.  With ``n_active`` set, only the top rows
    are propagated and the rest are held fixed (block system A + 0).
    The frame equals Phi F R^-1 with R upper triangular with positive
    diagonal, ``log_scale = log det R``.
    """
    identity = lambda A: A
    return _evolve(prop, a, b, F, identity, _qr_renorm, n_active)


def propagate_subspace(prop: Propagator, a: float, b: float,
                       U: Subspace) -> tuple[Subspace, float]:
    """Image of ``U`` under the fundamental matrix Phi(b, a; lam).

    Examples
    --------
    For A = diag(1, -1), U = span{e2} and [0, 1] the image is span{e2} with
    log scale -1.
    """
    Q, ls = propagate_frame(prop, a, b, U.frame)
    return Subspace(Q, U.tol), ls


def propagate_pluecker(prop: Propagator, a: float, b: float,
                       P: PlueckerPoint, k: int | None = None) -> tuple[PlueckerPoint, float]:
    """Integrate the compound system p' = A^(k)(x; lam) p with max-modulus scaling."""
    k = P.k if k is None else k
    if k is None:
        raise ValueError("the Plücker point does not record k; pass it explicitly")
    comp = lambda A: compound_matrix(A, k)
    p, ls = _evolve(prop, a, b, P.coords.copy(), comp, _max_renorm)
    return PlueckerPoint(p[:, 0], prop.n, k), ls


def fundamental_matrix(profile: CoefficientProfile, lam, a: float, b: float,
                       tol: Tolerances = DEFAULT) -> np.ndarray:
    """Phi(b, a; lam) without renormalization (moderate intervals only)."""
    prop = Propagator(profile, lam, tol=tol)
    Y, _ = _evolve(prop, a, b, np.eye(profile.n, dtype=complex), lambda A: A, _no_renorm)
    return Y


def transfer_chunks(prop: Propagator, a: float, b: float) -> list[np.ndarray]:
    """Propagators of consecutive sub-intervals of [a, b], each of bounded growth.

    Their ordered product is Phi(b, a); no single factor amplifies by more
    than about exp(tol.max_growth_log).
    """
    out = []
    growth = prop.tol.max_growth_log
    n = prop.n
    for x0, x1, const in prop.pieces(a, b):
        length = x1 - x0
        if length == 0:
            continue
        if const is not None:
            re = np.linalg.eigvals(const).real
            spread = max(re.max() - re.min(), np.max(np.abs(re)), 1e-300)
            m = max(1, int(np.ceil(abs(length) * spread / growth)))
            E = scipy.linalg.expm(const * (length / m))
            out.extend([E] * m)
        else:
            scale = max(np.linalg.norm(prop.matrix(x), 2) for x in np.linspace(x0, x1, 9))
            m = max(1, int(np.ceil(abs(length) * scale / growth)))
            cuts = np.linspace(x0, x1, m + 1)
            for c0, c1 in zip(cuts[:-1], cuts[1:]):
                Y, _ = _evolve(prop, c0, c1, np.eye(n, dtype=complex), lambda A: A, _no_renorm)
                out.append(Y)
    return out


@dataclass(frozen=True)
class EvansValue:
    """det[Phi U_- | U_+] = phase * exp(log_magnitude + log_scale)."""

    log_magnitude: float
    phase: complex
    log_scale: float

    @property
    def value(self) -> complex:
        """Normalized determinant det[frame(Phi U_-) | frame(U_+)]."""
        if self.log_magnitude == -np.inf:
            return 0j
        return self.phase * np.exp(self.log_magnitude)

    @property
    def full_log_magnitude(self) -> float:
        return self.log_magnitude + self.log_scale


def boundary_determinant(prop: Propagator, ell: float, boundary: BoundaryData) -> EvansValue:
    """Evans-type determinant of the truncated problem on [-ell, ell].

    Zero exactly when Phi(ell, -ell) U_- meets U_+, i.e. when ``prop.lam``
    is an eigenvalue.  Because the propagated frame differs from Phi U_- by
    a triangular factor with positive diagonal, the reported phase is the
    phase of an analytic function of lam.
    """
    if ell <= prop.profile.ell0:
        raise ValueError("need ell > ell0")
    Q, ls = propagate_frame(prop, -ell, ell, boundary.left.frame)
    sign, logabs = np.linalg.slogdet(np.hstack([Q, boundary.right.frame]))
    if sign == 0:
        return EvansValue(-np.inf, complex(1.0), ls)
    return EvansValue(float(logabs), complex(sign), ls)


@dataclass
class TrajectoryRecord:
    x: np.ndarray
    subspaces: list
    points: list
    log_scale: np.ndarray
    pluecker_log_scale: np.ndarray

    def consistency(self) -> float:
        """Largest chordal distance between pluecker(G(x)) and P(x)."""
        return max(pluecker(G).distance(P) for G, P in zip(self.subspaces, self.points))

    def to_rows(self) -> list[list]:
        rows = []
        for x, G, P, ls in zip(self.x, self.subspaces, self.points, self.log_scale):
            rows.append([x, *G.frame.ravel(), *P.coords, ls])
        return rows


def trajectory(prop: Propagator, a: float, b: float, U: Subspace, samples) -> TrajectoryRecord:
    """Record G(x) and P(x) at the ``samples`` positions (ordered from a to b)."""
    xs = np.asarray(list(samples), dtype=float)
    k = U.dim
    subs, pts, ls, pls = [], [], [], []
    G, P = U, pluecker(U)
    x = a
    acc, pacc = 0.0, 0.0
    for xn in xs:
        G, d = propagate_subspace(prop, x, xn, G)
        P, pd = propagate_pluecker(prop, x, xn, P, k)
        acc += d
        pacc += pd
        x = xn
        subs.append(G)
        pts.append(P)
        ls.append(acc)
        pls.append(pacc)
    return TrajectoryRecord(xs, subs, pts, np.array(ls), np.array(pls))
