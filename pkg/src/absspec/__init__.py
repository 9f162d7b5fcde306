"""Absolute and essential spectra of truncated linear boundary-value problems.

Eigenvalues of ``Y' = A(x; lam) Y`` on ``[-ell, ell]`` with separated or
periodic boundary conditions are counted by winding numbers of Evans-type
determinants; their accumulation sets as ``ell`` grows are traced from the
asymptotic matrices.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from . import (  # noqa: E402
    config,
    counting,
    exterior,
    flow,
    linalg,
    periodic,
    problem,
    problems,
    selftest,
    spectra,
)

__all__ = [
    "__version__",
    "config",
    "counting",
    "exterior",
    "flow",
    "linalg",
    "periodic",
    "problem",
    "problems",
    "selftest",
    "spectra",
]
