"""Multiple-inlier-structure robust estimation.

Segments noisy 2D/3D datasets into geometric structures with per-structure
adaptive scale estimation; structures come back sorted by strength.
"""

from misre._core import (
    EstimationError,
    InvalidInputError,
    __version__,
    distances,
    fit,
    generate,
    models,
    presets,
)

__all__ = [
    "EstimationError",
    "InvalidInputError",
    "__version__",
    "distances",
    "fit",
    "generate",
    "models",
    "presets",
]
