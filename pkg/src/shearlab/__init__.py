"""Cell problems, Monte Carlo homogenization and enhanced-dissipation numerics
for weakly compressible shear flows on the torus."""

__version__ = "0.1.0"

try:
    from . import _em_core as _kernel

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on the build
    from . import _em_python as _kernel

    BACKEND = "python"

from .errors import (  # noqa: E402
    ArtifactIOError,
    ConfigError,
    RegimeError,
    ShearlabError,
)
from .flow import Profile1D, ShearModel, build_model, build_potential, weighted_inner  # noqa: E402

__all__ = [
    "__version__",
    "BACKEND",
    "Profile1D",
    "ShearModel",
    "build_model",
    "build_potential",
    "weighted_inner",
    "ShearlabError",
    "ConfigError",
    "RegimeError",
    "ArtifactIOError",
]
