"""Scalar functionals and inequality checkers for simulation trajectories.

Conventions:

* L2 norms use trapezoidal node quadrature.
* Gradient seminorms use the edge-difference (Dirichlet) form, which is the
  exact summation-by-parts partner of the 5-point Laplacian for zero-trace
  fields.  This makes the discrete energy bookkeeping close to machine
  precision instead of truncation error.
* The dual-space budget norm for the body force is the Riesz surrogate
  |grad u_g| with -lap u_g = g and zero trace.

The per-sample ``EnergyRecord`` carries the lifted energy
E_hat = 1/2 |v|^2 + 1/2 |grad(d - d_E)|^2 + int F(d), the dissipation
D2 = nu |grad v|^2 + |lap(d - d_E) - f(d)|^2, the higher-order quantity
A_P = |grad v|^2 + |lap(d - d_P) - f(d)|^2, and the energy-inequality
budget r(t) = 1/2 |dt d_E|^2 + |dt d_E| + |g|_dual^2 (unit constants; the
non-constructive constants are absorbed into acceptance tolerances).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .grid import (
    Grid,
    ScalarField2D,
    VectorField2D,
    _lap_interior,
    quad_weights,
)
from .linsolve import DIRECT, PoissonProblem, SolverConfig, solve_poisson_dirichlet

if TYPE_CHECKING:
    from .dynamics import SimState
    from .steady import Equilibrium


# ---------------------------------------------------------------------------
# norms


def _l2_sq(grid: Grid, data: np.ndarray) -> float:
    w = quad_weights(grid)
    if data.ndim == 3:
        return float(sum(np.sum(w * data[k] ** 2) for k in range(data.shape[0])))
    return float(np.sum(w * data**2))


def edge_seminorm_sq(grid: Grid, data: np.ndarray) -> float:
    """Edge-difference Dirichlet form, exact SBP partner of the 5-point Laplacian."""
    comps = data if data.ndim == 3 else data[None]
    total = 0.0
    cx = grid.hy / grid.hx
    cy = grid.hx / grid.hy
    for c in comps:
        total += cx * np.sum((c[1:, :] - c[:-1, :]) ** 2)
        total += cy * np.sum((c[:, 1:] - c[:, :-1]) ** 2)
    return float(total)


def _lap_sq(grid: Grid, data: np.ndarray) -> float:
    comps = data if data.ndim == 3 else data[None]
    cell = grid.hx * grid.hy
    total = 0.0
    for c in comps:
        lap = _lap_interior(c, grid.hx, grid.hy)
        total += cell * np.sum(lap[1:-1, 1:-1] ** 2)
    return float(total)


def interior_l2(grid: Grid, data: np.ndarray) -> float:
    """Plain-sum L2 over interior nodes (used for residual-type quantities)."""
    comps = data if data.ndim == 3 else data[None]
    cell = grid.hx * grid.hy
    return float(np.sqrt(cell * sum(np.sum(c[1:-1, 1:-1] ** 2) for c in comps)))


def norms(field: ScalarField2D | VectorField2D, kind: str, cfg: SolverConfig = DIRECT) -> float:
    """Discrete L2 / H1 / H2 / Hminus1 norm of a field."""
    g = field.grid
    data = field.data
    if kind == "L2":
        return float(np.sqrt(_l2_sq(g, data)))
    if kind == "H1":
        return float(np.sqrt(_l2_sq(g, data) + edge_seminorm_sq(g, data)))
    if kind == "H2":
        return float(np.sqrt(_l2_sq(g, data) + edge_seminorm_sq(g, data) + _lap_sq(g, data)))
    if kind == "Hminus1":
        comps = data if data.ndim == 3 else data[None]
        zero = np.zeros(g.n_boundary)
        total = 0.0
        for c in comps:
            rep = solve_poisson_dirichlet(
                PoissonProblem(g, ScalarField2D(g, -c), dirichlet=zero), cfg
            )
            total += edge_seminorm_sq(g, rep.data)
        return float(np.sqrt(total))
    raise ValueError(f"unknown norm kind {kind!r}")


def grad_norm(field: ScalarField2D | VectorField2D) -> float:
    return float(np.sqrt(edge_seminorm_sq(field.grid, field.data)))


def dual_norm(field: VectorField2D | None, cfg: SolverConfig = DIRECT) -> float:
    """Budget surrogate for the dual (V*) norm of a body force."""
    if field is None:
        return 0.0
    return norms(field, "Hminus1", cfg)


# ---------------------------------------------------------------------------
# energy records


@dataclass
class EnergyRecord:
    t: float
    kinetic: float
    elastic_hat: float
    potential: float
    E_hat: float
    D2: float
    A_P: float
    r_t: float
    max_abs_d: float
    div_v_norm: float
    residual_stationary: float
    norm_v_L2: float
    norm_v_H1: float
    dist_d_L2: float
    dist_d_H1: float


CSV_COLUMNS = [f.name for f in fields(EnergyRecord)]


def _lap_int(w: np.ndarray, hx: float, hy: float) -> np.ndarray:
    return (w[2:, 1:-1] - 2.0 * w[1:-1, 1:-1] + w[:-2, 1:-1]) / hx**2 + (
        w[1:-1, 2:] - 2.0 * w[1:-1, 1:-1] + w[1:-1, :-2]
    ) / hy**2


def energy_record(state: "SimState", reference: VectorField2D | None = None) -> EnergyRecord:
    """Sample every scalar diagnostic from a simulation state (pure function)."""
    g = state.v.grid
    p = state.params
    d = state.d.data
    v = state.v.data
    hx, hy = g.hx, g.hy
    inner = (slice(1, -1), slice(1, -1))
    cell = hx * hy
    w = quad_weights(g)

    d_hat = d - state.lifting.dE.data
    kinetic = 0.5 * float(np.sum(w * (v[0] ** 2 + v[1] ** 2)))
    elastic_hat = 0.5 * edge_seminorm_sq(g, d_hat)
    mag_sq = d[0] ** 2 + d[1] ** 2
    potential = float(np.sum(w * (mag_sq - 1.0) ** 2)) / (4.0 * p.eps**2)
    e_hat = kinetic + elastic_hat + potential

    gl_fac = (mag_sq[inner] - 1.0) / p.eps**2
    f_int = gl_fac[None] * d[:, 1:-1, 1:-1]
    res_hat_sq = 0.0
    res_stat_sq = 0.0
    for k in range(2):
        rh = _lap_int(d_hat[k], hx, hy) - f_int[k]
        res_hat_sq += float(np.sum(rh**2))
        rs = _lap_int(d[k], hx, hy) - f_int[k]
        res_stat_sq += float(np.sum(rs**2))

    if state.lifting.dP is state.lifting.dE:
        res_tilde_sq = res_hat_sq
    else:
        d_tilde = d - state.lifting.dP.data
        res_tilde_sq = sum(
            float(np.sum((_lap_int(d_tilde[k], hx, hy) - f_int[k]) ** 2))
            for k in range(2)
        )

    grad_v_sq = edge_seminorm_sq(g, v)
    d2 = p.nu * grad_v_sq + cell * res_hat_sq
    a_p = grad_v_sq + cell * res_tilde_sq

    if state.forcing.is_autonomous:
        r_t = 0.0
    else:
        dt_de = state.lifting.dt_dE.data
        nd = float(np.sqrt(np.sum(w * (dt_de[0] ** 2 + dt_de[1] ** 2))))
        gfield = state.forcing.body_force(state.t)
        r_t = 0.5 * nd**2 + nd + dual_norm(gfield) ** 2

    div = (v[0, 2:, 1:-1] - v[0, :-2, 1:-1]) / (2 * hx) + (
        v[1, 1:-1, 2:] - v[1, 1:-1, :-2]
    ) / (2 * hy)
    div_norm = float(np.sqrt(cell * np.sum(div**2)))

    if reference is not None:
        diff = d - reference.data
        l2_sq = float(np.sum(w * (diff[0] ** 2 + diff[1] ** 2)))
        dist_l2 = float(np.sqrt(l2_sq))
        dist_h1 = float(np.sqrt(l2_sq + edge_seminorm_sq(g, diff)))
    else:
        dist_l2 = float("nan")
        dist_h1 = float("nan")

    return EnergyRecord(
        t=state.t,
        kinetic=kinetic,
        elastic_hat=elastic_hat,
        potential=potential,
        E_hat=e_hat,
        D2=d2,
        A_P=a_p,
        r_t=r_t,
        max_abs_d=float(np.sqrt(np.max(mag_sq))),
        div_v_norm=div_norm,
        residual_stationary=float(np.sqrt(cell * res_stat_sq)),
        norm_v_L2=float(np.sqrt(2.0 * kinetic)),
        norm_v_H1=float(np.sqrt(2.0 * kinetic + grad_v_sq)),
        dist_d_L2=dist_l2,
        dist_d_H1=dist_h1,
    )


def energy_inequality_residual(prev: EnergyRecord, next: EnergyRecord, dt: float) -> float:
    """Signed residual of the discrete energy inequality between two samples.

    Returns (E_hat_{k+1} - E_hat_k)/dt + D2_{k+1}/2 - r_{k+1}; values at or
    below the documented slack mean the inequality holds on this step.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return (next.E_hat - prev.E_hat) / dt + 0.5 * next.D2 - next.r_t


# ---------------------------------------------------------------------------
# trajectory checkers


@dataclass
class GronwallVerdict:
    passed: bool
    bound: float
    max_violation: float
    worst_t: float


def uniform_gronwall_check(
    t: np.ndarray,
    y: np.ndarray,
    h: np.ndarray,
    c1: float,
    c2: float,
    rho: float,
) -> GronwallVerdict:
    """Check y(t + rho) <= (c3/rho + c2 rho + c4) exp(c1 c3) on sampled data.

    c3 = int y and c4 = int h are computed internally by trapezoidal
    quadrature over the full sampled window, so they cannot be forged.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    h = np.asarray(h, float)
    if t.ndim != 1 or t.size < 2 or y.shape != t.shape or h.shape != t.shape:
        raise ValueError("t, y, h must be equal-length 1-D samples")
    if np.any(y < 0) or np.any(h < 0):
        raise ValueError("y and h must be nonnegative")
    T = t[-1] - t[0]
    if not (0.0 < rho < T):
        raise ValueError(f"rho must lie in (0, {T}), got {rho}")
    c3 = float(np.trapezoid(y, t))
    c4 = float(np.trapezoid(h, t))
    bound = (c3 / rho + c2 * rho + c4) * float(np.exp(c1 * c3))
    mask = t <= t[-1] - rho
    y_shift = np.interp(t[mask] + rho, t, y)
    violation = y_shift - bound
    worst = int(np.argmax(violation))
    return GronwallVerdict(
        passed=bool(np.all(violation <= 0.0)),
        bound=bound,
        max_violation=float(violation[worst]),
        worst_t=float(t[mask][worst]),
    )


class FitError(ValueError):
    """Decay-rate fit rejected (non-positive values in the fitted window)."""


def fit_decay_exponent(
    t: np.ndarray, values: np.ndarray, tail_fraction: float = 0.5
) -> tuple[float, float]:
    """Least-squares slope of log(value) against log(1+t) over the sample tail.

    Returns (exponent, r2) where value ~ C (1+t)^(-exponent) on the window.
    """
    t = np.asarray(t, float)
    values = np.asarray(values, float)
    if not (0.0 < tail_fraction <= 1.0):
        raise ValueError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    n = t.size
    if n < 4:
        raise FitError("need at least 4 samples to fit a decay exponent")
    start = n - max(4, int(np.ceil(tail_fraction * n)))
    tt = t[start:]
    vv = values[start:]
    if np.any(vv <= 0):
        raise FitError(
            "non-positive values in fit window; decay may be below the "
            "floating-point floor -- clip the window"
        )
    x = np.log1p(tt)
    ly = np.log(vv)
    slope, intercept = np.polyfit(x, ly, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), float(r2)


def looks_super_polynomial(t: np.ndarray, values: np.ndarray) -> bool:
    """Heuristic: the fitted exponent keeps growing with the window tail."""
    try:
        e_wide, _ = fit_decay_exponent(t, values, tail_fraction=0.8)
        e_tail, _ = fit_decay_exponent(t, values, tail_fraction=0.3)
    except FitError:
        return True
    return e_tail > 1.5 * e_wide + 0.5


# ---------------------------------------------------------------------------
# rate model / convergence report


def default_theta_prime(gamma: float) -> float:
    """Largest-practical admissible rate parameter for a given forcing decay."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    theta = 0.9 * gamma / (2.0 * (1.0 + gamma))
    if gamma > 1.0:
        theta = min(theta, (gamma - 1.0) / (2.0 * gamma))
    return theta


@dataclass
class RateModel:
    gamma: float
    theta_prime: float
    fitted_exponent: float = float("nan")
    fit_r2: float = float("nan")

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not (0.0 < self.theta_prime < self.gamma / (2.0 * (1.0 + self.gamma))):
            raise ValueError(
                f"theta_prime={self.theta_prime} outside (0, {self.gamma / (2 * (1 + self.gamma))})"
            )

    @property
    def predicted_exponent(self) -> float:
        return self.theta_prime / (1.0 - 2.0 * self.theta_prime)

    @classmethod
    def for_gamma(cls, gamma: float) -> "RateModel":
        return cls(gamma=gamma, theta_prime=default_theta_prime(gamma))


@dataclass
class ConvergenceReport:
    norm_v_final: float
    dist_L2_final: float
    dist_H1_final: float
    dist_H2_final: float
    fitted_exp_dist: float
    fitted_r2_dist: float
    fitted_exp_v: float
    fitted_exp_AP: float
    predicted_exponent: float
    rate_pass: bool
    super_polynomial: bool


def convergence_report(
    records: Sequence[EnergyRecord],
    d_final: VectorField2D,
    equilibrium: "Equilibrium",
    rate: RateModel,
    tolerance: float = 0.15,
    fit_window: tuple[float, float] | None = None,
    tail_fraction: float = 0.5,
) -> ConvergenceReport:
    """Compare a trajectory against its limit equilibrium and predicted rate.

    ``fit_window`` restricts the rate fits to samples with t in [lo, hi],
    which keeps the log-log regression clear of both the initial transient
    and any late-time floor where the signal sinks below discretization
    noise.
    """
    if not records:
        raise ValueError("records must be nonempty")
    g = d_final.grid
    psi = equilibrium.psi
    diff = VectorField2D(g, d_final.data - psi.data)
    dist_l2 = norms(diff, "L2")
    dist_h1 = norms(diff, "H1")
    dist_h2 = dist_l2 + float(np.sqrt(_lap_sq(g, diff.data)))

    t = np.array([r.t for r in records])
    dist = np.array([r.dist_d_L2 for r in records])
    vnorm = np.array([r.norm_v_L2 for r in records])
    ap = np.array([r.A_P for r in records])

    if fit_window is not None:
        lo, hi = fit_window
        mask = (t >= lo) & (t <= hi)
        if mask.sum() < 4:
            raise FitError("fit window contains fewer than 4 samples")
        t_fit, dist_fit, v_fit, ap_fit = t[mask], dist[mask], vnorm[mask], ap[mask]
        frac = 1.0
    else:
        t_fit, dist_fit, v_fit, ap_fit = t, dist, vnorm, ap
        frac = tail_fraction

    def safe_fit(vals):
        try:
            return fit_decay_exponent(t_fit, vals, frac)
        except FitError:
            return (float("inf"), float("nan"))

    exp_dist, r2_dist = safe_fit(dist_fit)
    exp_v, _ = safe_fit(v_fit)
    exp_ap, _ = safe_fit(ap_fit)

    superpoly = looks_super_polynomial(t_fit, dist_fit) if np.all(dist_fit > 0) else True
    vacuous = bool(np.all(dist <= 1e-12))
    rate_pass = vacuous or (exp_dist >= rate.predicted_exponent - tolerance)
    return ConvergenceReport(
        norm_v_final=float(vnorm[-1]),
        dist_L2_final=dist_l2,
        dist_H1_final=dist_h1,
        dist_H2_final=dist_h2,
        fitted_exp_dist=exp_dist,
        fitted_r2_dist=r2_dist,
        fitted_exp_v=exp_v,
        fitted_exp_AP=exp_ap,
        predicted_exponent=rate.predicted_exponent,
        rate_pass=rate_pass,
        super_polynomial=superpoly,
    )


# ---------------------------------------------------------------------------
# CSV persistence (17 significant digits, schema is the external contract)


def write_records_csv(path, records: Sequence[EnergyRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([f"{getattr(r, c):.17g}" for c in CSV_COLUMNS])


def read_records_csv(path) -> list[EnergyRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        for row in reader:
            out.append(EnergyRecord(*[float(x) for x in row]))
    return out
