"""Elliptic and parabolic solves on the node-centered grid.

Provides Dirichlet Poisson solves, backward-Euler heat steps, the velocity
projection enforcing the discrete incompressibility constraint, and a Stokes
residual diagnostic.

The constant-coefficient Dirichlet operators (5-point Laplacian, I - dt lap)
are solved directly by fast diagonalization in the discrete sine basis, which
is exact to machine precision and costs two small FFTs per right-hand side.
The projection operator and the pure-Neumann problem keep a cached sparse LU
factorization.

The projection is the exact discrete Leray projector for the central
difference divergence with the boundary values held fixed: it solves the
constrained least-squares problem

    min |v - u|^2   s.t.   div_h v = 0 at every interior node,  v = u on the ring,

whose normal equations read (D D^T) lam = D u with D the interior divergence
acting on interior velocity unknowns.  With u = 0 on the ring the right-hand
side is orthogonal to ker(D D^T), so a direct factorization drives the
divergence of the result to solver precision rather than truncation error.
``D D^T`` is singular only when nx and ny are both odd (a single
checkerboard mode supported on odd-odd nodes); that mode is pinned.

All matrices depend only on the grid (and a scalar coefficient), so their
factorizations are cached and each solve is a pair of triangular sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import (
    BoundaryTrace,
    Grid,
    ScalarField2D,
    VectorField2D,
    _ddx,
    _ddy,
    _lap_interior,
    quad_weights,
    set_ring,
)


class SolverError(RuntimeError):
    """Linear solve failed to reach its tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 10_000
    method: str = "direct"  # "direct" (banded sparse LU) or "cg"

    def __post_init__(self) -> None:
        if not (0.0 < self.tol <= 1e-4):
            raise ValueError(f"tol must lie in (0, 1e-4], got {self.tol}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.method not in ("direct", "cg"):
            raise ValueError(f"unknown method {self.method!r}")


DIRECT = SolverConfig()
ITERATIVE = SolverConfig(tol=1e-9, method="cg")


@dataclass
class PoissonProblem:
    """Poisson problem lap u = rhs with Dirichlet trace or pure Neumann data.

    ``dirichlet`` holds CCW-ordered scalar ring values; ``neumann=True``
    selects the zero-flux pressure-type problem, which requires the discrete
    mean of ``rhs`` to vanish (compatibility) and returns a zero-mean field.
    """

    grid: Grid
    rhs: ScalarField2D
    dirichlet: np.ndarray | None = None
    neumann: bool = False

    def __post_init__(self) -> None:
        if self.neumann == (self.dirichlet is not None):
            raise ValueError("exactly one of dirichlet trace or neumann flag required")
        if self.dirichlet is not None:
            self.dirichlet = np.asarray(self.dirichlet, dtype=float)
            if self.dirichlet.shape != (self.grid.n_boundary,):
                raise ValueError(
                    f"trace length {self.dirichlet.shape} != ({self.grid.n_boundary},)"
                )


# ---------------------------------------------------------------------------
# matrix assembly (interior unknowns, row-major i-major ordering)


def _lap_matrix(grid: Grid) -> sp.csr_matrix:
    """5-point Laplacian on interior nodes, Dirichlet boundary eliminated."""
    mx, my = grid.nx - 2, grid.ny - 2
    ex = np.ones(mx)
    ey = np.ones(my)
    dxx = sp.diags([ex[:-1], -2.0 * ex, ex[:-1]], [-1, 0, 1]) / grid.hx**2
    dyy = sp.diags([ey[:-1], -2.0 * ey, ey[:-1]], [-1, 0, 1]) / grid.hy**2
    return (sp.kron(dxx, sp.identity(my)) + sp.kron(sp.identity(mx), dyy)).tocsr()


def _bc_contribution(grid: Grid, ring_values: np.ndarray) -> np.ndarray:
    """Contribution of Dirichlet ring data to lap u at interior nodes, as (mx, my)."""
    full = np.zeros(grid.shape)
    set_ring(full, ring_values)
    out = np.zeros((grid.nx - 2, grid.ny - 2))
    out[0, :] += full[0, 1:-1] / grid.hx**2
    out[-1, :] += full[-1, 1:-1] / grid.hx**2
    out[:, 0] += full[1:-1, 0] / grid.hy**2
    out[:, -1] += full[1:-1, -1] / grid.hy**2
    return out


def _neumann_matrix(grid: Grid) -> sp.csr_matrix:
    """Graph Laplacian on all nodes (missing neighbors dropped): symmetric,
    kernel = constants."""
    nx, ny = grid.nx, grid.ny
    n = nx * ny
    idx = np.arange(n).reshape(nx, ny)
    rows, cols, vals = [], [], []

    def add_pairs(a, b, w):
        rows.extend(a.ravel())
        cols.extend(b.ravel())
        vals.extend(np.full(a.size, w))
        rows.extend(a.ravel())
        cols.extend(a.ravel())
        vals.extend(np.full(a.size, -w))
        rows.extend(b.ravel())
        cols.extend(a.ravel())
        vals.extend(np.full(b.size, w))
        rows.extend(b.ravel())
        cols.extend(b.ravel())
        vals.extend(np.full(b.size, -w))

    add_pairs(idx[:-1, :], idx[1:, :], 1.0 / grid.hx**2)
    add_pairs(idx[:, :-1], idx[:, 1:], 1.0 / grid.hy**2)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _div_matrix(grid: Grid) -> sp.csr_matrix:
    """Central-difference divergence at interior nodes acting on interior
    velocity unknowns (ring velocities are data, not unknowns)."""
    mx, my = grid.nx - 2, grid.ny - 2
    n_int = mx * my
    idx = np.arange(n_int).reshape(mx, my)
    rows, cols, vals = [], [], []

    def add(r, c, w, comp):
        rows.extend(r.ravel())
        cols.extend((c + comp * n_int).ravel())
        vals.extend(np.full(r.size, w))

    # d/dx of component 1: node (i, j) couples to (i+1, j) and (i-1, j)
    add(idx[:-1, :], idx[1:, :], 1.0 / (2 * grid.hx), 0)
    add(idx[1:, :], idx[:-1, :], -1.0 / (2 * grid.hx), 0)
    # d/dy of component 2
    add(idx[:, :-1], idx[:, 1:], 1.0 / (2 * grid.hy), 1)
    add(idx[:, 1:], idx[:, :-1], -1.0 / (2 * grid.hy), 1)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_int, 2 * n_int))


def projection_kernel(grid: Grid) -> np.ndarray | None:
    """Null vector of D D^T (unit-normalized), present iff nx and ny are odd."""
    if grid.nx % 2 == 0 or grid.ny % 2 == 0:
        return None
    mx, my = grid.nx - 2, grid.ny - 2
    k = np.zeros((mx, my))
    k[::2, ::2] = 1.0  # interior index 0 is grid index 1: odd-odd nodes
    k = k.ravel()
    return k / np.linalg.norm(k)


# ---------------------------------------------------------------------------
# factorization / eigenvalue caches

_cache: dict[tuple, object] = {}


def _factorized(key: tuple, build) -> spla.SuperLU:
    got = _cache.get(key)
    if got is None:
        got = spla.splu(build().tocsc())
        _cache[key] = got
    return got


def clear_cache() -> None:
    _cache.clear()
    _dirichlet_eigenvalues.cache_clear()


@lru_cache(maxsize=32)
def _dirichlet_eigenvalues(nx: int, ny: int, lx: float, ly: float):
    """Eigenvalues of -lap (interior, Dirichlet) in the discrete sine basis."""
    hx = lx / (nx - 1)
    hy = ly / (ny - 1)
    kx = np.arange(1, nx - 1)
    ky = np.arange(1, ny - 1)
    lamx = (2.0 - 2.0 * np.cos(kx * np.pi / (nx - 1))) / hx**2
    lamy = (2.0 - 2.0 * np.cos(ky * np.pi / (ny - 1))) / hy**2
    return lamx[:, None] + lamy[None, :]


def _dst_denominator(grid: Grid, kind: str, coef: float = 0.0) -> np.ndarray:
    key = (grid.key, "dstden", kind, coef)
    got = _cache.get(key)
    if got is None:
        lam = _dirichlet_eigenvalues(*grid.key)
        got = -lam if kind == "poisson" else 1.0 + coef * lam
        _cache[key] = got
    return got


@lru_cache(maxsize=32)
def _sine_basis(nx: int, ny: int):
    """Dense sine-transform matrices; at desk scales BLAS beats small FFTs."""
    mx, my = nx - 2, ny - 2
    jx = np.arange(1, mx + 1)
    jy = np.arange(1, my + 1)
    Sx = np.sin(np.outer(jx, jx) * np.pi / (mx + 1))
    Sy = np.sin(np.outer(jy, jy) * np.pi / (my + 1))
    scale = 4.0 / ((mx + 1) * (my + 1))
    return Sx, Sy, scale


def _dst_solve(grid: Grid, b_int: np.ndarray, denom: np.ndarray) -> np.ndarray:
    """Solve the diagonalized interior system; works on (..., mx, my) batches."""
    Sx, Sy, scale = _sine_basis(grid.nx, grid.ny)
    bh = Sx @ b_int @ Sy
    bh /= denom
    return scale * (Sx @ bh @ Sy)


def heat_solve_interior(grid: Grid, b_int: np.ndarray, coef: float) -> np.ndarray:
    """Interior solution of (I - coef*lap) u = b with zero Dirichlet trace."""
    return _dst_solve(grid, b_int, _dst_denominator(grid, "heat", coef))


def _cg_solve(A: sp.spmatrix, b: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    x, info = spla.cg(A, b, rtol=cfg.tol, atol=0.0, maxiter=cfg.max_iter)
    if info > 0:
        res = float(np.linalg.norm(A @ x - b) / max(1.0, np.linalg.norm(b)))
        raise SolverError(f"cg failed to converge in {cfg.max_iter} iterations", res)
    return x


# ---------------------------------------------------------------------------
# public solves


def solve_poisson_dirichlet(problem: PoissonProblem, cfg: SolverConfig = DIRECT) -> ScalarField2D:
    """Solve lap u = rhs; Dirichlet boundary nodes carry the trace exactly."""
    g = problem.grid
    if problem.neumann:
        return _solve_poisson_neumann(problem, cfg)
    rhs_int = problem.rhs.data[1:-1, 1:-1]
    b = rhs_int - _bc_contribution(g, problem.dirichlet)
    if cfg.method == "direct":
        u_int = _dst_solve(g, b, _dst_denominator(g, "poisson"))
    else:
        A = -_lap_matrix(g)  # SPD form for cg
        u_int = _cg_solve(A, -b.ravel(), cfg).reshape(b.shape)
    out = np.zeros(g.shape)
    out[1:-1, 1:-1] = u_int
    set_ring(out, problem.dirichlet)
    field = ScalarField2D(g, out)
    res = _lap_interior(out, g.hx, g.hy)[1:-1, 1:-1] - rhs_int
    rel = np.linalg.norm(res) / max(1.0, np.linalg.norm(rhs_int))
    if rel > max(cfg.tol, 1e-9):
        raise SolverError("poisson residual above tolerance", float(rel))
    return field


def _solve_poisson_neumann(problem: PoissonProblem, cfg: SolverConfig) -> ScalarField2D:
    g = problem.grid
    b = problem.rhs.data.ravel()
    nrm = np.linalg.norm(b)
    mean = abs(b.sum()) / b.size
    if nrm > 0 and mean > 1e-8 * nrm:
        raise SolverError("pure-Neumann rhs violates zero-mean compatibility", float(mean))
    n = b.size
    pin = sp.csr_matrix(([1.0], ([0], [0])), shape=(n, n))
    if cfg.method == "direct":
        lu = _factorized((g.key, "neumann"), lambda: (_neumann_matrix(g) + pin))
        u = lu.solve(b)
    else:
        A = -(_neumann_matrix(g) + pin)
        u = _cg_solve(A, -b, cfg)
    u -= u.mean()
    return ScalarField2D(g, u.reshape(g.shape))


def heat_step(
    u: VectorField2D,
    trace: BoundaryTrace,
    dt: float,
    cfg: SolverConfig = DIRECT,
) -> VectorField2D:
    """One backward-Euler heat step: (I - dt lap) u_new = u, u_new = trace on the ring."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    g = u.grid
    if trace.grid != g:
        raise ValueError("trace grid mismatch")
    mx, my = g.nx - 2, g.ny - 2
    b = u.data[:, 1:-1, 1:-1].copy()
    if np.any(trace.values):
        for k in range(2):
            b[k] += dt * _bc_contribution(g, trace.component(k))
    if cfg.method == "direct":
        sol = heat_solve_interior(g, b, dt)
    else:
        A = (sp.identity(mx * my) - dt * _lap_matrix(g)).tocsr()
        sol = np.stack(
            [_cg_solve(A, b[k].ravel(), cfg).reshape(mx, my) for k in range(2)]
        )
    out = np.zeros((2, *g.shape))
    out[:, 1:-1, 1:-1] = sol
    for k in range(2):
        set_ring(out[k], trace.component(k))
    return VectorField2D(g, out)


def project_divergence_free(
    u: VectorField2D, cfg: SolverConfig = DIRECT
) -> tuple[VectorField2D, ScalarField2D]:
    """Project onto discretely divergence-free fields, keeping ring values fixed.

    Returns (v, pi) with div_h v = 0 at interior nodes to solver precision and
    v = u - grad pi in the interior (pi extended by zero on the ring, then
    normalized to zero mean).
    """
    g = u.grid
    mx, my = g.nx - 2, g.ny - 2
    hx2, hy2 = 2.0 * g.hx, 2.0 * g.hy
    ud = u.data

    # central-difference divergence at interior nodes
    div = (ud[0, 2:, 1:-1] - ud[0, :-2, 1:-1]) / hx2 + (
        ud[1, 1:-1, 2:] - ud[1, 1:-1, :-2]
    ) / hy2
    b = div.ravel()

    kern = projection_kernel(g)

    def build():
        D = _div_matrix(g)
        A = (D @ D.T).tolil()
        if kern is not None:
            j = int(np.argmax(np.abs(kern)))
            A[j, j] += 1.0  # pin the checkerboard mode
        return A.tocsc()

    if cfg.method == "direct":
        lu = _factorized((g.key, "proj"), build)
        lam = lu.solve(b)
    else:
        A = build()
        lam = _cg_solve(A, b, cfg)

    if kern is not None:
        lam = lam - kern * (kern @ lam)

    lam_pad = np.zeros(g.shape)
    lam_pad[1:-1, 1:-1] = lam.reshape(mx, my)

    v = ud.copy()
    # v_int -= D^T lam  (D^T lam is minus the zero-extension central gradient)
    v[0, 1:-1, 1:-1] -= (lam_pad[:-2, 1:-1] - lam_pad[2:, 1:-1]) / hx2
    v[1, 1:-1, 1:-1] -= (lam_pad[1:-1, :-2] - lam_pad[1:-1, 2:]) / hy2

    pi = -lam_pad
    w = quad_weights(g)
    pi = pi - np.sum(w * pi) / np.sum(w)
    return VectorField2D(g, v), ScalarField2D(g, pi)


def stokes_residual(v: VectorField2D, pi: ScalarField2D, rhs: VectorField2D) -> float:
    """L2 norm of the discrete Stokes residual -lap v + grad pi - rhs (interior)."""
    g = v.grid
    gx = _ddx(pi.data, g.hx)
    gy = _ddy(pi.data, g.hy)
    r1 = -_lap_interior(v.data[0], g.hx, g.hy) + gx - rhs.data[0]
    r2 = -_lap_interior(v.data[1], g.hx, g.hy) + gy - rhs.data[1]
    cell = g.hx * g.hy
    inner = slice(1, -1)
    return float(
        np.sqrt(cell * np.sum(r1[inner, inner] ** 2 + r2[inner, inner] ** 2))
    )
