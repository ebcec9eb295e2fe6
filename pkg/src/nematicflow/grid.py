"""Node-centered rectangular grid, field containers, and difference operators.

The domain is a rectangle [0, lx] x [0, ly] sampled at nx x ny nodes
*including* the boundary ring, so the spacing is hx = lx/(nx-1).  All fields
are plain float64 arrays indexed [i, j] with x_i = i*hx, y_j = j*hy.

First derivatives use second-order central differences in the interior and
second-order one-sided stencils on the boundary ring; the Laplacian is the
standard 5-point stencil, defined on interior nodes only.

Besides the raw differences, this module provides the pointwise
Ginzburg-Landau penalization f(d) = (|d|^2 - 1) d / eps^2 and its potential
F(d) = (|d|^2 - 1)^2 / (4 eps^2), which relax the unit-length constraint on
the director field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform node-centered grid on [0, lx] x [0, ly], boundary included."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self) -> None:
        if self.nx < 8 or self.ny < 8:
            raise ValueError(f"grid must be at least 8x8, got {self.nx}x{self.ny}")
        if self.lx <= 0 or self.ly <= 0:
            raise ValueError("physical extents must be positive")

    @property
    def hx(self) -> float:
        return self.lx / (self.nx - 1)

    @property
    def hy(self) -> float:
        return self.ly / (self.ny - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def n_boundary(self) -> int:
        return 2 * (self.nx + self.ny) - 4

    @property
    def key(self) -> tuple:
        return (self.nx, self.ny, self.lx, self.ly)

    def xs(self) -> np.ndarray:
        return np.linspace(0.0, self.lx, self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(0.0, self.ly, self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs(), self.ys(), indexing="ij")


@lru_cache(maxsize=32)
def _boundary_index_arrays(nx: int, ny: int) -> tuple[np.ndarray, np.ndarray]:
    """(i, j) index arrays of the boundary ring, counterclockwise from (0,0).

    Order: bottom edge j=0 (i ascending), right edge i=nx-1 (j ascending),
    top edge j=ny-1 (i descending), left edge i=0 (j descending).
    """
    ii = np.concatenate([
        np.arange(nx),
        np.full(ny - 1, nx - 1),
        np.arange(nx - 2, -1, -1),
        np.zeros(ny - 2, dtype=int),
    ])
    jj = np.concatenate([
        np.zeros(nx, dtype=int),
        np.arange(1, ny),
        np.full(nx - 1, ny - 1),
        np.arange(ny - 2, 0, -1),
    ])
    return ii, jj


def boundary_indices(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    return _boundary_index_arrays(grid.nx, grid.ny)


def boundary_arclength(grid: Grid) -> np.ndarray:
    """Cumulative arclength of each boundary node, starting at node (0,0)."""
    ii, jj = boundary_indices(grid)
    x = ii * grid.hx
    y = jj * grid.hy
    dx = np.diff(x, append=x[0])
    dy = np.diff(y, append=y[0])
    seg = np.hypot(dx, dy)
    s = np.concatenate([[0.0], np.cumsum(seg[:-1])])
    return s


def boundary_segment_weights(grid: Grid) -> np.ndarray:
    """Trapezoidal quadrature weight of each boundary node on the closed ring."""
    ii, jj = boundary_indices(grid)
    x = ii * grid.hx
    y = jj * grid.hy
    nxt = np.hypot(np.diff(x, append=x[0]), np.diff(y, append=y[0]))
    prv = np.roll(nxt, 1)
    return 0.5 * (nxt + prv)


def extract_ring(data: np.ndarray) -> np.ndarray:
    """Values of a (nx, ny) array on the boundary ring, CCW from (0,0)."""
    nx, ny = data.shape
    ii, jj = _boundary_index_arrays(nx, ny)
    return data[ii, jj]


def set_ring(data: np.ndarray, values: np.ndarray) -> None:
    """Write CCW-ordered boundary values into a (nx, ny) array in place."""
    nx, ny = data.shape
    ii, jj = _boundary_index_arrays(nx, ny)
    data[ii, jj] = values


@dataclass
class ScalarField2D:
    """A scalar function sampled at every grid node."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != self.grid.shape:
            raise ValueError(f"data shape {self.data.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("field contains non-finite values")

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField2D":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField2D":
        X, Y = grid.mesh()
        return cls(grid, np.asarray(fn(X, Y), dtype=float))

    def copy(self) -> "ScalarField2D":
        return ScalarField2D(self.grid, self.data.copy())


@dataclass
class VectorField2D:
    """An R^2-valued function; data has shape (2, nx, ny)."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (2, *self.grid.shape):
            raise ValueError(f"data shape {self.data.shape} != (2, {self.grid.nx}, {self.grid.ny})")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("field contains non-finite values")

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField2D":
        return cls(grid, np.zeros((2, *grid.shape)))

    @classmethod
    def from_components(cls, c1: ScalarField2D, c2: ScalarField2D) -> "VectorField2D":
        if c1.grid != c2.grid:
            raise ValueError("components live on different grids")
        return cls(c1.grid, np.stack([c1.data, c2.data]))

    @classmethod
    def from_functions(cls, grid: Grid, f1, f2) -> "VectorField2D":
        X, Y = grid.mesh()
        return cls(grid, np.stack([np.asarray(f1(X, Y), float), np.asarray(f2(X, Y), float)]))

    def component(self, k: int) -> ScalarField2D:
        return ScalarField2D(self.grid, self.data[k].copy())

    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.data[0] ** 2 + self.data[1] ** 2)

    def copy(self) -> "VectorField2D":
        return VectorField2D(self.grid, self.data.copy())


@dataclass
class BoundaryTrace:
    """R^2 values on the boundary ring, ordered CCW from node (0,0)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_boundary, 2):
            raise ValueError(
                f"trace shape {self.values.shape} != ({self.grid.n_boundary}, 2)"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("trace contains non-finite values")

    @classmethod
    def constant(cls, grid: Grid, vec) -> "BoundaryTrace":
        v = np.broadcast_to(np.asarray(vec, float), (grid.n_boundary, 2)).copy()
        return cls(grid, v)

    @classmethod
    def from_field(cls, u: VectorField2D) -> "BoundaryTrace":
        return cls(u.grid, np.stack([extract_ring(u.data[0]), extract_ring(u.data[1])], axis=1))

    def component(self, k: int) -> np.ndarray:
        return self.values[:, k]


@dataclass(frozen=True)
class BoundaryMode:
    """Boundary handling for the Laplacian stencil.

    ``interior()`` evaluates the 5-point stencil against the field's own
    boundary values; ``dirichlet(values)`` substitutes the supplied
    CCW-ordered ring values instead.  Output boundary nodes are always 0.
    """

    kind: str
    values: np.ndarray | None = field(default=None, compare=False)

    @classmethod
    def interior(cls) -> "BoundaryMode":
        return cls("interior")

    @classmethod
    def dirichlet(cls, values: np.ndarray) -> "BoundaryMode":
        return cls("dirichlet", np.asarray(values, dtype=float))


# ---------------------------------------------------------------------------
# difference operators


def _ddx(data: np.ndarray, hx: float) -> np.ndarray:
    out = np.empty_like(data)
    out[1:-1, :] = (data[2:, :] - data[:-2, :]) / (2.0 * hx)
    out[0, :] = (-3.0 * data[0, :] + 4.0 * data[1, :] - data[2, :]) / (2.0 * hx)
    out[-1, :] = (3.0 * data[-1, :] - 4.0 * data[-2, :] + data[-3, :]) / (2.0 * hx)
    return out


def _ddy(data: np.ndarray, hy: float) -> np.ndarray:
    out = np.empty_like(data)
    out[:, 1:-1] = (data[:, 2:] - data[:, :-2]) / (2.0 * hy)
    out[:, 0] = (-3.0 * data[:, 0] + 4.0 * data[:, 1] - data[:, 2]) / (2.0 * hy)
    out[:, -1] = (3.0 * data[:, -1] - 4.0 * data[:, -2] + data[:, -3]) / (2.0 * hy)
    return out


def gradient(f: ScalarField2D) -> VectorField2D:
    """Discrete (df/dx, df/dy); central interior, one-sided second order on the ring."""
    g = f.grid
    return VectorField2D(g, np.stack([_ddx(f.data, g.hx), _ddy(f.data, g.hy)]))


def divergence(u: VectorField2D) -> ScalarField2D:
    """Discrete du1/dx + du2/dy with the same stencils as ``gradient``."""
    g = u.grid
    return ScalarField2D(g, _ddx(u.data[0], g.hx) + _ddy(u.data[1], g.hy))


def _lap_interior(data: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """5-point Laplacian on interior nodes; boundary rows of the output are 0."""
    out = np.zeros_like(data)
    out[1:-1, 1:-1] = (
        (data[2:, 1:-1] - 2.0 * data[1:-1, 1:-1] + data[:-2, 1:-1]) / hx**2
        + (data[1:-1, 2:] - 2.0 * data[1:-1, 1:-1] + data[1:-1, :-2]) / hy**2
    )
    return out


def laplacian(f: ScalarField2D, bc: BoundaryMode | None = None) -> ScalarField2D:
    """5-point Laplacian; Dirichlet mode evaluates against supplied ring values."""
    g = f.grid
    if bc is None or bc.kind == "interior":
        return ScalarField2D(g, _lap_interior(f.data, g.hx, g.hy))
    if bc.kind != "dirichlet":
        raise ValueError(f"unknown boundary mode {bc.kind!r}")
    if bc.values is None or bc.values.shape != (g.n_boundary,):
        got = None if bc.values is None else bc.values.shape
        raise ValueError(f"dirichlet trace must have shape ({g.n_boundary},), got {got}")
    work = f.data.copy()
    set_ring(work, bc.values)
    return ScalarField2D(g, _lap_interior(work, g.hx, g.hy))


def vector_laplacian(u: VectorField2D) -> VectorField2D:
    g = u.grid
    return VectorField2D(
        g, np.stack([_lap_interior(u.data[k], g.hx, g.hy) for k in range(2)])
    )


def elastic_stress_divergence(d: VectorField2D) -> VectorField2D:
    """Tensor form of the director stress divergence: component i = sum_k (lap d_k) d_i d_k.

    This is the non-gradient part of div(grad d (x) grad d); the gradient part
    is absorbed into the pressure.  The momentum equation subtracts
    lambda times this field.  Output is zero on the boundary ring.
    """
    g = d.grid
    lap1 = _lap_interior(d.data[0], g.hx, g.hy)
    lap2 = _lap_interior(d.data[1], g.hx, g.hy)
    out = np.zeros((2, *g.shape))
    out[0] = lap1 * _ddx(d.data[0], g.hx) + lap2 * _ddx(d.data[1], g.hx)
    out[1] = lap1 * _ddy(d.data[0], g.hy) + lap2 * _ddy(d.data[1], g.hy)
    return VectorField2D(g, out)


def ginzburg_landau_f(d: VectorField2D, eps: float) -> VectorField2D:
    """Pointwise penalization force (|d|^2 - 1) d / eps^2."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    fac = (d.data[0] ** 2 + d.data[1] ** 2 - 1.0) / eps**2
    return VectorField2D(d.grid, fac[None, :, :] * d.data)


def bulk_potential_F(d: VectorField2D, eps: float) -> ScalarField2D:
    """Pointwise potential (|d|^2 - 1)^2 / (4 eps^2); zero exactly on |d| = 1."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    sq = d.data[0] ** 2 + d.data[1] ** 2 - 1.0
    return ScalarField2D(d.grid, sq**2 / (4.0 * eps**2))


# ---------------------------------------------------------------------------
# quadrature


@lru_cache(maxsize=32)
def _quad_weights_cached(nx: int, ny: int, lx: float, ly: float) -> np.ndarray:
    hx = lx / (nx - 1)
    hy = ly / (ny - 1)
    wx = np.full(nx, hx)
    wx[0] = wx[-1] = 0.5 * hx
    wy = np.full(ny, hy)
    wy[0] = wy[-1] = 0.5 * hy
    w = np.outer(wx, wy)
    w.setflags(write=False)
    return w


def quad_weights(grid: Grid) -> np.ndarray:
    """Trapezoidal node weights on the full rectangle (cached, read-only)."""
    return _quad_weights_cached(*grid.key)


def integrate(f: ScalarField2D) -> float:
    return float(np.sum(quad_weights(f.grid) * f.data))
