"""Built-in example problems with closed-form oracles.

All built-ins are reaction-diffusion type equations ``D u'' + c u' + J u =
lam u`` written as first-order systems in ``Y = (u, u')``.

========================  ==============================================
name                      parameters (defaults)
========================  ==============================================
``adv-diff``              ``c`` (0): constant, Dirichlet at both ends
``adv-diff-front``        ``c_minus`` (4), ``c_plus`` (0), ``width`` (0.5)
``two-component``         ``d2`` (0.5), ``a`` (0.5), ``b`` (1): N = 4
``periodic-adv-diff``     ``c`` (1): constant, periodic
========================  ==============================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import Subspace
from .problem import (
    BoundaryData,
    CoefficientProfile,
    MatrixFamily,
    ParameterDomain,
    load_problem,
)

__all__ = ["BuiltinProblem", "CATALOG", "builtin", "catalog", "parse_problem_spec"]


@dataclass(frozen=True, eq=False)
class BuiltinProblem:
    """A configured problem plus its closed-form oracles.

    ``oracle`` maps names to callables; which names exist depends on the
    problem (``gap``, ``locus``, ``eigenvalues``, ``dgap``...).
    """

    name: str
    params: dict
    profile: CoefficientProfile
    boundary: BoundaryData | None
    domain: ParameterDomain
    oracle: dict = field(default_factory=dict)
    doc: str = ""

    @property
    def spec(self) -> str:
        extra = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"builtin:{self.name}" + ("," + extra if extra else "")


def _dirichlet(n: int, k: int) -> Subspace:
    """span{e_{n-k}, ..., e_{n-1}}: the derivative components are free."""
    return Subspace(np.eye(n, dtype=complex)[:, n - k:])


def _sqrt_disc(c, lam):
    return np.sqrt(c * c + 4 * np.asarray(lam, dtype=complex))


def _adv_diff(c: float = 0.0) -> BuiltinProblem:
    c = float(c)
    consts = {"c": c}
    A = MatrixFamily([["0", "1"], ["lam", "-c"]], consts)
    profile = CoefficientProfile(2, 1.0, A, A, A, name="adv-diff", constants=consts)
    bd = BoundaryData(_dirichlet(2, 1), _dirichlet(2, 1))

    def eigenvalues(ell, lo=None, hi=None, nmax=100000):
        n = np.arange(1, nmax + 1)
        return -c * c / 4 - (n * np.pi / (2 * ell)) ** 2

    oracle = {
        # |Re(mu1 - mu2)| with mu = (-c +- sqrt(c^2 + 4 lam)) / 2
        "gap": lambda lam: np.abs(_sqrt_disc(c, lam).real),
        "dgap": lambda lam: 2 / _sqrt_disc(c, lam),
        "mu_difference": lambda lam: _sqrt_disc(c, lam),
        "locus": lambda lam: (np.abs(np.imag(lam)) == 0) & (np.real(lam) <= -c * c / 4),
        "branch_point": -c * c / 4,
        "eigenvalues": eigenvalues,
        "omega": lambda lam: np.abs(_sqrt_disc(c, lam).imag),
    }
    doc = "u'' + c u' = lam u, Dirichlet at +-ell; eigenvalues -c^2/4 - (n pi / 2 ell)^2"
    return BuiltinProblem("adv-diff", {"c": c}, profile, bd,
                          ParameterDomain(-4, 1, -1, 1), oracle, doc)


def _adv_diff_front(c_minus: float = 4.0, c_plus: float = 0.0,
                    width: float = 0.5) -> BuiltinProblem:
    ell0 = 2.0
    consts = {"cm": c_minus, "cp": c_plus, "w": width, "l0": ell0}
    left = MatrixFamily([["0", "1"], ["lam", "-cm"]], consts)
    right = MatrixFamily([["0", "1"], ["lam", "-cp"]], consts)
    # tanh interpolation rescaled so the seams match the tails exactly
    mid = MatrixFamily([["0", "1"],
                        ["lam", "-((cm + cp)/2 + (cp - cm)/2 * tanh(x/w) / tanh(l0/w))"]],
                       consts)
    profile = CoefficientProfile(2, ell0, left, right, mid, name="adv-diff-front",
                                 constants=consts)
    bd = BoundaryData(_dirichlet(2, 1), _dirichlet(2, 1))
    oracle = {
        "gap_plus": lambda lam: np.abs(_sqrt_disc(c_plus, lam).real),
        "gap_minus": lambda lam: np.abs(_sqrt_disc(c_minus, lam).real),
        "branch_plus": -c_plus**2 / 4,
        "branch_minus": -c_minus**2 / 4,
    }
    doc = "u'' + c(x) u' = lam u with a tanh front from c_minus to c_plus, Dirichlet"
    return BuiltinProblem("adv-diff-front",
                          {"c_minus": c_minus, "c_plus": c_plus, "width": width},
                          profile, bd, ParameterDomain(-5, 1, -2, 2), oracle, doc)


def _two_component(d2: float = 0.5, a: float = 0.5, b: float = 1.0) -> BuiltinProblem:
    """D u'' + J u = lam u with D = diag(1, d2), J = [[-a, b], [-b, -a]]."""
    D = np.diag([1.0, d2])
    J = np.array([[-a, b], [-b, -a]])
    consts = {"d2": d2, "a": a, "b": b}
    A = MatrixFamily([
        ["0", "0", "1", "0"],
        ["0", "0", "0", "1"],
        ["lam + a", "-b", "0", "0"],
        ["b/d2", "(lam + a)/d2", "0", "0"],
    ], consts)
    profile = CoefficientProfile(4, 1.0, A, A, A, name="two-component", constants=consts)
    bd = BoundaryData(_dirichlet(4, 2), _dirichlet(4, 2))

    def dispersion(k):
        """Both branches lam(k) = eig(J - k^2 D), upper branch first."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        out = np.array([np.linalg.eigvals(J - kk * kk * D) for kk in k])
        return np.sort_complex(out)[:, ::-1] if out.size else out.reshape(0, 2)

    def eigenvalues(ell, kmax=60.0):
        nmax = int(np.ceil(kmax * 2 * ell / np.pi))
        kn = np.arange(1, nmax + 1) * np.pi / (2 * ell)
        return dispersion(kn).ravel()

    oracle = {"dispersion": dispersion, "eigenvalues": eigenvalues, "D": D, "J": J}
    doc = "two diffusing species, diffusion diag(1, d2), rotating Jacobian; Dirichlet"
    return BuiltinProblem("two-component", {"d2": d2, "a": a, "b": b}, profile, bd,
                          ParameterDomain(-1.9, -0.8, 0.6, 1.2), oracle, doc)


def _periodic_adv_diff(c: float = 1.0) -> BuiltinProblem:
    c = float(c)
    consts = {"c": c}
    A = MatrixFamily([["0", "1"], ["lam", "-c"]], consts)
    profile = CoefficientProfile(2, 1.0, A, A, A, kind="periodic-asymptotic",
                                 name="periodic-adv-diff", constants=consts)

    def eigenvalues(ell, gamma_turns=0.0, nmax=2000):
        # Y(ell) = gamma Y(-ell) with u = exp(i k x): 2 k ell = 2 pi (n + turns)
        n = np.arange(-nmax, nmax + 1)
        k = (n + gamma_turns) * np.pi / ell
        return -k * k + 1j * c * k

    oracle = {
        "locus_param": lambda k: -np.asarray(k) ** 2 + 1j * c * np.asarray(k),
        "eigenvalues": eigenvalues,
        "dlam_dk": lambda k: -2 * np.asarray(k) + 1j * c,
    }
    doc = "u'' + c u' = lam u with periodic (or gamma-twisted) boundary conditions"
    return BuiltinProblem("periodic-adv-diff", {"c": c}, profile, None,
                          ParameterDomain(-4, 1, -2, 2), oracle, doc)


CATALOG: dict[str, Callable[..., BuiltinProblem]] = {
    "adv-diff": _adv_diff,
    "adv-diff-front": _adv_diff_front,
    "two-component": _two_component,
    "periodic-adv-diff": _periodic_adv_diff,
}


def builtin(name: str, **params) -> BuiltinProblem:
    """Configured built-in problem.

    Raises
    ------
    KeyError
        Unknown name.
    TypeError
        Unknown parameter for that problem.
    """
    if name not in CATALOG:
        raise KeyError(f"unknown built-in {name!r}; choose from {sorted(CATALOG)}")
    return CATALOG[name](**{k: float(v) for k, v in params.items()})


def catalog() -> list[tuple[str, str]]:
    return [(name, (factory.__doc__ or factory().doc).strip().splitlines()[0])
            for name, factory in CATALOG.items()]


def parse_problem_spec(text: str):
    """``builtin:name,key=value,...`` or a path to a JSON problem file.

    Returns ``(profile, boundary, domain, problem)``; ``problem`` is the
    :class:`BuiltinProblem` or ``None`` for files.
    """
    if text.startswith("builtin:"):
        name, *rest = text[len("builtin:"):].split(",")
        params = {}
        for item in rest:
            if "=" not in item:
                raise ValueError(f"expected key=value, got {item!r}")
            key, value = item.split("=", 1)
            params[key.strip()] = float(value)
        p = builtin(name.strip(), **params)
        return p.profile, p.boundary, p.domain, p
    profile, boundary, domain = load_problem(text)
    return profile, boundary, domain, None
