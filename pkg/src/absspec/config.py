"""Numerical tolerances shared by every module.

Defaults can be overridden from a JSON file named by the ``ABSSPEC_TOL_FILE``
environment variable, or by passing an explicit :class:`Tolerances` instance.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

TOL_ENV_VAR = "ABSSPEC_TOL_FILE"


@dataclass(frozen=True)
class Tolerances:
    # linalg
    cluster_rel: float = 1e-9
    rank_rel: float = 1e-10
    orthonormal: float = 1e-10
    # problem
    seam: float = 1e-8
    containment_margin: float = 1e-6
    # flow
    rtol: float = 1e-10
    atol: float = 1e-12
    max_growth_log: float = 8.0
    # spectra
    locus_gap: float = 1e-8
    fd_step_rel: float = 1e-6
    # counting
    contour_start: int = 64
    contour_cap: int = 2**16
    max_phase_step: float = 1.5707963267948966
    exclusion_radius: float = 0.05
    zero_logmag: float = -30.0
    secant_tol: float = 1e-10
    secant_maxiter: int = 100

    def replace(self, **changes) -> "Tolerances":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_tolerances(path: str | os.PathLike | None = None) -> Tolerances:
    """Read overrides from ``path`` (or ``$ABSSPEC_TOL_FILE``) on top of defaults."""
    if path is None:
        path = os.environ.get(TOL_ENV_VAR)
    if not path:
        return Tolerances()
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    known = {f.name for f in dataclasses.fields(Tolerances)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
    return Tolerances(**data)


DEFAULT = load_tolerances()
