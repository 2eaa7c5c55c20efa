"""stefancut: 2-D liquid-solid phase change on a level-set / cut-cell grid."""

__version__ = "0.1.0"

from .backend import active_backend  # noqa: F401
from .grid import Grid, ScalarField, apply_bc  # noqa: F401
