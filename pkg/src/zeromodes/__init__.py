"""Zero modes of Dirac operators with magnetic fields, counted from sphere spectra."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402
from .sphere import (  # noqa: E402
    FluxError,
    GaugePotential,
    QuadratureGrid,
    SphereScalar,
    abs_flux,
    flux,
    hodge_gauge,
)
from .dirac import build_family, converge  # noqa: E402
from .branches import TGrid, count_crossings, track_branches  # noqa: E402
from .pencil import build_pencil, pencil_count  # noqa: E402
from .hopf import assemble_s3_spectrum, kernel_dimension, zcount  # noqa: E402

__all__ = [
    "BACKEND",
    "FluxError",
    "GaugePotential",
    "QuadratureGrid",
    "SphereScalar",
    "TGrid",
    "abs_flux",
    "assemble_s3_spectrum",
    "build_family",
    "build_pencil",
    "converge",
    "count_crossings",
    "flux",
    "hodge_gauge",
    "kernel_dimension",
    "pencil_count",
    "track_branches",
    "zcount",
]
