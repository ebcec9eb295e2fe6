import numpy as np
import pytest

from nematicflow.dynamics import PhysParams
from nematicflow.grid import (
    BoundaryTrace,
    Grid,
    VectorField2D,
    boundary_arclength,
    set_ring,
)
from nematicflow.lifting import elliptic_lift
from nematicflow.steady import (
    energy_E,
    energy_script,
    local_minimizer_check,
    newton_refine,
    solve_gradient_flow,
    stationary_residual,
)


def angle_trace(grid, kappa=0.3):
    s = boundary_arclength(grid) / (2 * (grid.lx + grid.ly))
    phi = kappa * np.sin(2 * np.pi * s)
    return BoundaryTrace(grid, np.stack([np.cos(phi), np.sin(phi)], axis=1))


def unit_clipped_lift(trace):
    lift = elliptic_lift(trace)
    mag = lift.magnitude()
    d = lift.data * np.minimum(1.0, 1.0 / np.maximum(mag, 1e-300))
    for k in range(2):
        set_ring(d[k], trace.values[:, k])
    return VectorField2D(lift.grid, d)


class TestGradientFlow:
    def test_constant_unit_data_is_global_minimizer(self):
        g = Grid(16, 16)
        trace = BoundaryTrace.constant(g, (1.0, 0.0))
        d0 = unit_clipped_lift(trace)
        eq = solve_gradient_flow(trace, d0, PhysParams(), tol=1e-10)
        assert eq.converged
        assert eq.residual <= 1e-10
        assert abs(eq.energy_E) < 1e-12
        assert np.max(np.abs(eq.psi.data[0] - 1.0)) < 1e-10

    def test_energy_never_increases(self):
        g = Grid(16, 16)
        trace = angle_trace(g)
        d0 = unit_clipped_lift(trace)
        hist = []
        eq = solve_gradient_flow(trace, d0, PhysParams(), tol=1e-8, energy_history=hist)
        assert eq.converged
        e = np.array(hist)
        assert np.all(np.diff(e) <= 1e-10 * (1 + np.abs(e[:-1])))

    def test_trace_compatibility_required(self):
        g = Grid(16, 16)
        trace = angle_trace(g)
        d0 = unit_clipped_lift(BoundaryTrace.constant(g, (1.0, 0.0)))
        with pytest.raises(ValueError, match="trace"):
            solve_gradient_flow(trace, d0, PhysParams())

    def test_residual_monotone_to_convergence(self):
        # zero-winding boundary angle: the flow converges and the residual of
        # resumed solves keeps shrinking monotonically
        g = Grid(32, 32)
        trace = angle_trace(g, kappa=0.4)
        d0 = unit_clipped_lift(trace)
        params = PhysParams()
        residuals = []
        cur = d0
        for _ in range(6):
            eq = solve_gradient_flow(trace, cur, params, tol=1e-14, max_iter=2000)
            residuals.append(eq.residual)
            cur = eq.psi
        # monotone down to the roundoff floor of the residual evaluation
        assert all(b <= a + 1e-16 for a, b in zip(residuals[:-1], residuals[1:]))
        eq = solve_gradient_flow(trace, cur, params, tol=1e-10, max_iter=600_000)
        assert eq.converged
        assert eq.residual <= 1e-10


class TestNewton:
    def test_zero_step_at_exact_solution(self):
        g = Grid(16, 16)
        trace = BoundaryTrace.constant(g, (1.0, 0.0))
        d0 = unit_clipped_lift(trace)
        eq = solve_gradient_flow(trace, d0, PhysParams(), tol=1e-12)
        refined = newton_refine(eq, PhysParams(), tol=1e-12)
        assert np.max(np.abs(refined.psi.data - eq.psi.data)) < 1e-11

    def test_quadratic_residual_drop(self):
        g = Grid(24, 24)
        trace = angle_trace(g, kappa=0.5)
        d0 = unit_clipped_lift(trace)
        params = PhysParams()
        eq = solve_gradient_flow(trace, d0, params, tol=1e-4)
        res = [eq.residual]
        cur = eq
        for _ in range(3):
            cur = newton_refine(cur, params, tol=1e-15, max_iter=1)
            res.append(cur.residual)
            if res[-1] < 1e-13:
                break
        # near convergence each sweep must cut the residual by at least 10x
        for a, b in zip(res[:-1], res[1:]):
            assert b <= 0.1 * a or b < 1e-13

    def test_linear_limit_large_eps(self):
        # eps -> infinity kills the nonlinearity: Newton solves the harmonic
        # problem in one step from any starting point near the lift
        g = Grid(16, 16)
        trace = angle_trace(g)
        params = PhysParams(eps=1e6)
        d0 = unit_clipped_lift(trace)
        eq = solve_gradient_flow(trace, d0, params, tol=1e-2)
        refined = newton_refine(eq, params, tol=1e-11, max_iter=3)
        assert refined.converged
        lift = elliptic_lift(trace)
        assert np.max(np.abs(refined.psi.data - lift.data)) < 1e-7

    def test_basin_precondition(self):
        g = Grid(16, 16)
        trace = angle_trace(g)
        d0 = unit_clipped_lift(trace)
        eq = solve_gradient_flow(trace, d0, PhysParams(), tol=1e-8, max_iter=1)
        assert not eq.converged
        with pytest.raises(ValueError, match="Newton"):
            newton_refine(eq, PhysParams(), basin_radius=1e-9)


class TestEnergies:
    def test_E_minus_script_depends_only_on_trace(self):
        # mirrors the expansion of the lifted energy: the difference between
        # the two functionals is trace data only, so it is the same for any
        # field carrying that trace (up to the harmonic-solve tolerance)
        g = Grid(16, 16)
        trace = angle_trace(g)
        d_star = elliptic_lift(trace)
        rng = np.random.default_rng(0)
        params = PhysParams()

        def with_trace(seed):
            d = np.zeros((2, *g.shape))
            d[:, 1:-1, 1:-1] = rng.standard_normal((2, g.nx - 2, g.ny - 2)) * 0.3
            for k in range(2):
                set_ring(d[k], trace.values[:, k])
            d[:, 1:-1, 1:-1] += d_star.data[:, 1:-1, 1:-1]
            return VectorField2D(g, d)

        gaps = []
        for seed in range(3):
            psi = with_trace(seed)
            gaps.append(energy_E(psi, params.eps) - energy_script(psi, d_star, params.eps))
        assert max(gaps) - min(gaps) < 1e-10

    def test_critical_point_characterization(self):
        # <-lap psi + f(psi), z> below tolerance for random zero-trace z
        g = Grid(16, 16)
        trace = angle_trace(g)
        params = PhysParams()
        eq = solve_gradient_flow(trace, unit_clipped_lift(trace), params, tol=1e-4)
        eq = newton_refine(eq, params, tol=1e-12)
        from nematicflow.grid import _lap_interior, ginzburg_landau_f

        res = np.zeros((2, *g.shape))
        f = ginzburg_landau_f(eq.psi, params.eps).data
        for k in range(2):
            res[k, 1:-1, 1:-1] = (
                -_lap_interior(eq.psi.data[k], g.hx, g.hy)[1:-1, 1:-1]
                + f[k, 1:-1, 1:-1]
            )
        rng = np.random.default_rng(1)
        cell = g.hx * g.hy
        for _ in range(5):
            z = np.zeros((2, *g.shape))
            z[:, 1:-1, 1:-1] = rng.standard_normal((2, g.nx - 2, g.ny - 2))
            inner = cell * sum(np.sum(res[k] * z[k]) for k in range(2))
            z_h1 = np.sqrt(cell * np.sum(z**2))
            assert abs(inner) <= 1e-10 * z_h1


class TestMinimizerCheck:
    def test_constant_unit_is_minimizer(self):
        g = Grid(16, 16)
        trace = BoundaryTrace.constant(g, (1.0, 0.0))
        eq = solve_gradient_flow(trace, unit_clipped_lift(trace), PhysParams(), tol=1e-11)
        verdict = local_minimizer_check(eq, PhysParams(), n_probe=24, delta=0.05, seed=0)
        assert verdict.kind == "minimizer-consistent"
        assert verdict.min_rayleigh > 0

    def test_zero_state_is_saddle_for_small_eps(self):
        # psi = 0 solves the stationary problem with h_inf = 0; for eps small
        # enough the potential well at |d| = 1 dominates the gradient cost and
        # a descent direction exists
        g = Grid(24, 24)
        params = PhysParams(eps=0.1)
        trace = BoundaryTrace.constant(g, (0.0, 0.0))
        psi = VectorField2D.zeros(g)
        from nematicflow.steady import _make_equilibrium
        from nematicflow.linsolve import DIRECT

        eq = _make_equilibrium(psi, params, True, 0, DIRECT, trace)
        assert eq.residual < 1e-14
        verdict = local_minimizer_check(
            eq, params, n_probe=16, delta=0.05, seed=0, use_eigensolver=True
        )
        assert verdict.kind == "saddle-detected"
        assert verdict.min_rayleigh < 0
        assert verdict.witness is not None

    def test_zero_delta_trivially_consistent(self):
        g = Grid(16, 16)
        trace = BoundaryTrace.constant(g, (1.0, 0.0))
        eq = solve_gradient_flow(trace, unit_clipped_lift(trace), PhysParams(), tol=1e-11)
        verdict = local_minimizer_check(eq, PhysParams(), n_probe=8, delta=0.0)
        assert verdict.kind == "minimizer-consistent"

    def test_unconverged_rejected(self):
        g = Grid(16, 16)
        trace = angle_trace(g)
        eq = solve_gradient_flow(trace, unit_clipped_lift(trace), PhysParams(), max_iter=1)
        with pytest.raises(ValueError, match="converged"):
            local_minimizer_check(eq, PhysParams())


class TestResidual:
    def test_stationary_residual_zero_for_constant_unit(self):
        g = Grid(12, 12)
        d = VectorField2D(g, np.stack([np.ones(g.shape), np.zeros(g.shape)]))
        assert stationary_residual(d, 0.25) < 1e-14
