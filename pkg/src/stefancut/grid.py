"""Uniform Cartesian grid and cell-centred scalar storage.

Fields carry two ghost layers per side (the redistancing stencils reach
i +- 2). Arrays use axis 0 = x, axis 1 = y; cell (i, j) has its centre at
origin + ((i + 1/2) dx, (j + 1/2) dx). Boundary rules per side:

    ("neumann",)            zero-gradient mirror
    ("dirichlet", value)    face value held; value is a scalar, a padded
                            1-D array along the side, or a callable mapping
                            the padded tangential coordinates to values
    ("periodic",)           wrap-around (both sides of the axis must agree)
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import StencilInvalid

NG = kernels.NG

SIDES = ("xlo", "xhi", "ylo", "yhi")


@dataclass(frozen=True)
class Grid:
    """Square uniform grid: n cells per side over [origin, origin + side]^2."""

    n: int
    origin: tuple = (0.0, 0.0)
    side: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid needs at least 2 cells per side")
        if self.side <= 0:
            raise ValueError("domain side must be positive")

    @property
    def dx(self) -> float:
        return self.side / self.n

    @property
    def shape(self):
        return (self.n, self.n)

    def cell_centers_1d(self, axis):
        o = self.origin[axis]
        return o + (np.arange(self.n) + 0.5) * self.dx

    def cell_centers_1d_padded(self, axis):
        o = self.origin[axis]
        return o + (np.arange(-NG, self.n + NG) + 0.5) * self.dx

    def cell_centers(self):
        x = self.cell_centers_1d(0)
        y = self.cell_centers_1d(1)
        return np.meshgrid(x, y, indexing="ij")

    def vertex_coords_1d(self, axis):
        o = self.origin[axis]
        return o + np.arange(self.n + 1) * self.dx


def _default_bc():
    return {s: ("neumann",) for s in SIDES}


@dataclass
class ScalarField:
    """Cell-centred scalar with ghost layers and per-side boundary rules."""

    grid: Grid
    data: np.ndarray = None
    bc: dict = field(default_factory=_default_bc)

    def __post_init__(self):
        n = self.grid.n
        if self.data is None:
            self.data = np.zeros((n + 2 * NG, n + 2 * NG))
        if self.data.shape != (n + 2 * NG, n + 2 * NG):
            raise ValueError("field data shape does not match the grid")
        for ax, (lo, hi) in (("x", ("xlo", "xhi")), ("y", ("ylo", "yhi"))):
            if (self.bc[lo][0] == "periodic") != (self.bc[hi][0] == "periodic"):
                raise ValueError(f"periodic bc must pair up along {ax}")

    @property
    def interior(self):
        return self.data[NG:-NG, NG:-NG]

    @interior.setter
    def interior(self, values):
        self.data[NG:-NG, NG:-NG] = values

    def copy(self):
        return ScalarField(self.grid, self.data.copy(), dict(self.bc))

    def like(self, values=None):
        f = ScalarField(self.grid, None, dict(self.bc))
        if values is not None:
            f.interior = values
        return f

    def dirichlet_values(self, side):
        """Padded 1-D array of face values along a Dirichlet side."""
        rule = self.bc[side]
        if rule[0] != "dirichlet":
            raise ValueError(f"{side} is not a Dirichlet side")
        val = rule[1]
        axis = 0 if side in ("ylo", "yhi") else 1
        coords = self.grid.cell_centers_1d_padded(axis)
        out = np.asarray(val(coords) if callable(val) else val,
                         dtype=np.float64)
        if out.shape != coords.shape:
            try:
                out = np.broadcast_to(out, coords.shape).copy()
            except ValueError:
                raise ValueError(
                    f"dirichlet value array on {side} has wrong length")
        return out

    def apply_bc(self):
        """Fill both ghost layers on every side; idempotent. Returns self."""
        n = self.grid.n
        d = self.data
        for side in ("xlo", "xhi"):
            rule = self.bc[side]
            kind = rule[0]
            if kind == "periodic":
                if side == "xlo":
                    d[0:NG, :] = d[n:n + NG, :]
                else:
                    d[n + NG:, :] = d[NG:2 * NG, :]
            elif kind == "neumann":
                if side == "xlo":
                    d[1, :] = d[2, :]
                    d[0, :] = d[3, :]
                else:
                    d[-2, :] = d[-3, :]
                    d[-1, :] = d[-4, :]
            else:
                v = self.dirichlet_values(side)
                if side == "xlo":
                    d[1, :] = 2.0 * v - d[2, :]
                    d[0, :] = 2.0 * v - d[3, :]
                else:
                    d[-2, :] = 2.0 * v - d[-3, :]
                    d[-1, :] = 2.0 * v - d[-4, :]
        for side in ("ylo", "yhi"):
            rule = self.bc[side]
            kind = rule[0]
            if kind == "periodic":
                if side == "ylo":
                    d[:, 0:NG] = d[:, n:n + NG]
                else:
                    d[:, n + NG:] = d[:, NG:2 * NG]
            elif kind == "neumann":
                if side == "ylo":
                    d[:, 1] = d[:, 2]
                    d[:, 0] = d[:, 3]
                else:
                    d[:, -2] = d[:, -3]
                    d[:, -1] = d[:, -4]
            else:
                v = self.dirichlet_values(side)
                if side == "ylo":
                    d[:, 1] = 2.0 * v - d[:, 2]
                    d[:, 0] = 2.0 * v - d[:, 3]
                else:
                    d[:, -2] = 2.0 * v - d[:, -3]
                    d[:, -1] = 2.0 * v - d[:, -4]
        return self

    def sample_biquadratic(self, x, y, valid=None):
        """Interpolate at one point with the 3x3 Lagrange stencil.

        valid, when given, is an (n, n) bool mask of usable interior cells;
        ghost cells count as valid. Raises StencilInvalid if a needed cell
        is masked out.
        """
        g = self.grid
        xs = np.asarray([x], dtype=np.float64)
        ys = np.asarray([y], dtype=np.float64)
        if valid is None:
            vals, _ = kernels.biquad_batch(self.data, xs, ys,
                                           g.origin[0], g.origin[1], g.dx,
                                           g.n, g.n)
            return float(vals[0])
        vpad = np.ones_like(self.data, dtype=bool)
        vpad[NG:-NG, NG:-NG] = valid
        vals, ok = kernels.biquad_batch_masked(self.data, vpad, xs, ys,
                                               g.origin[0], g.origin[1],
                                               g.dx, g.n, g.n)
        if not ok[0]:
            raise StencilInvalid(f"masked cell in the 3x3 stencil at ({x}, {y})")
        return float(vals[0])


def pad_validity(valid, like: ScalarField):
    """Extend an interior validity mask into the ghost layers.

    A ghost value is a function of exactly one interior cell (mirror for
    Neumann/Dirichlet, wrap for periodic), so it is valid iff that source
    cell is valid.
    """
    bc = {side: ("periodic",) if rule[0] == "periodic" else ("neumann",)
          for side, rule in like.bc.items()}
    v = ScalarField(like.grid, bc=bc)
    v.interior = valid.astype(np.float64)
    v.apply_bc()
    return v.data > 0.5


def biquadratic_weights(xi, eta):
    """3x3 Lagrange weights for offsets (xi, eta) from the stencil centre,
    measured in cells. Rows index x, columns y."""
    wx = np.array([0.5 * xi * (xi - 1.0), 1.0 - xi * xi,
                   0.5 * xi * (xi + 1.0)])
    wy = np.array([0.5 * eta * (eta - 1.0), 1.0 - eta * eta,
                   0.5 * eta * (eta + 1.0)])
    return np.outer(wx, wy)


def apply_bc(f: ScalarField) -> ScalarField:
    return f.apply_bc()
