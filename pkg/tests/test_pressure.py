import numpy as np
import pytest

from lagmhd.errors import NotConvergedError, PressureDivergenceError
from lagmhd.fields import VectorField
from lagmhd.geometry import FlowState, cofactor_matrices
from lagmhd.grid import Grid
from lagmhd.initial_data import build_flow_state, default_spec, scaled_spec
from lagmhd.pressure import (
    _tensor_rhs_spec,
    pressure_rhs,
    solve_pressure_gradient,
    solve_pressure_spec,
)
from lagmhd.spectral import (
    dealias_spec,
    leray_project,
    riesz_apply_spec,
    weighted_norm_sq,
)

from conftest import mesh


def l2(spec, grid):
    return float(np.sqrt(weighted_norm_sq(spec, 1.0, grid)))


def small_state(grid, amp):
    return build_flow_state(grid, scaled_spec(default_spec(grid.dim, None), amp))


# -- right-hand side -----------------------------------------------------------


def test_rhs_zero_state(grid3):
    state = FlowState.zeros(grid3)
    cof = cofactor_matrices(state.Y)
    assert np.abs(pressure_rhs(state, cof).values).max() == 0.0


def test_rhs_single_mode_against_direct_convolution(grid3):
    # Y = 0, Yt = v cos(k.y + phi): rhs = inv_lap grad div div(-Yt x Yt),
    # assembled by hand from the two modes of cos^2
    k = np.array([1.0, 2.0, 0.0])
    v = np.array([2.0, -1.0, 0.5])
    v -= k * (k @ v) / (k @ k)  # divergence free
    phi = 0.37
    y1, y2, y3 = mesh(grid3)
    theta = k[0] * y1 + k[1] * y2 + k[2] * y3 + phi
    yt = v[:, None, None, None] * np.cos(theta)
    state = FlowState(
        VectorField.zeros(grid3), VectorField.from_values(grid3, yt), 0.0
    )
    cof = cofactor_matrices(state.Y)
    got = pressure_rhs(state, cof).values

    # Yt x Yt = vv^T (1 + cos(2 theta))/2; div div annihilates the constant
    vv = np.outer(v, v)
    k2v = 2.0 * k
    quad = (k2v @ vv @ k2v) / 2.0  # coefficient of cos(2 theta) after div div: -q...
    # div div (vv^T cos(2theta)/2) = -(2k)_i (2k)_j vv_ij cos(2theta)/2
    # rhs = inv_lap grad div div(-Yt x Yt) -> per-mode algebra:
    ddz = quad  # div div (Yt x Yt) carries -quad cos; minus sign flips it
    # inv_lap grad of c*cos(2theta): gradient -> -c*2k sin /|2k|^2 * (-1)
    k2sq = float(k2v @ k2v)
    expect = np.zeros_like(yt)
    for i in range(3):
        expect[i] = (ddz / k2sq) * k2v[i] * np.sin(2.0 * (theta - phi) + 2.0 * phi)
    assert np.abs(got - expect).max() < 1e-10 * max(np.abs(expect).max(), 1.0)


def test_rhs_swap_antisymmetry(grid3, rng):
    state = small_state(Grid((16, 16, 16), (2 * np.pi,) * 3), 0.05)
    grid = state.grid
    cof = cofactor_matrices(state.Y)
    from lagmhd.spectral import gradient_values

    d1y = gradient_values(state.Y.spec, grid)[:, 0]
    a = _tensor_rhs_spec(grid, cof.A.values, d1y, state.Yt.values)
    b = _tensor_rhs_spec(grid, cof.A.values, state.Yt.values, d1y)
    assert np.abs(a + b).max() == 0.0


# -- fixed point -----------------------------------------------------------------


def test_zero_state_converges_immediately(grid3):
    state = FlowState.zeros(grid3)
    sol = solve_pressure_gradient(state, cofactor_matrices(state.Y))
    assert sol.iterations == 1
    assert np.abs(sol.grad_p.values).max() == 0.0


def test_contraction_estimate_tracks_amplitude():
    grid = Grid((16, 16, 16), (2 * np.pi,) * 3)
    ratios = []
    for amp in (0.08, 0.04):
        state = small_state(grid, amp)
        sol = solve_pressure_gradient(state, cofactor_matrices(state.Y), tol=1e-13)
        ratios.append(sol.contraction_estimate)
    assert ratios[1] / ratios[0] == pytest.approx(0.5, rel=0.25)


def test_solution_is_gradient_and_solves_fixed_point():
    grid = Grid((16, 16, 16), (2 * np.pi,) * 3)
    state = small_state(grid, 0.05)
    cof = cofactor_matrices(state.Y)
    tol = 1e-11
    sol = solve_pressure_gradient(state, cof, tol=tol)
    lp = leray_project(sol.grad_p)
    assert l2(lp.spec, grid) < 1e-10
    rhs = pressure_rhs(state, cof).spec
    gp = sol.grad_p.spec
    mgp = np.einsum("jm...,m...->j...", cof.metric_defect, grid.ifft(gp))
    defect = gp + riesz_apply_spec(dealias_spec(grid.fft(mgp), grid), grid) - rhs
    assert l2(defect, grid) <= 2.0 * tol


def test_linearity_in_rhs():
    grid = Grid((16, 16, 16), (2 * np.pi,) * 3)
    state = small_state(grid, 0.05)
    cof = cofactor_matrices(state.Y)
    rhs = pressure_rhs(state, cof).spec
    gp1, _, _, _ = solve_pressure_spec(
        grid, cof.A.values, cof.metric_defect, rhs, 1e-13, 60
    )
    gp2, _, _, _ = solve_pressure_spec(
        grid, cof.A.values, cof.metric_defect, 2.0 * rhs, 1e-13, 60
    )
    assert np.abs(gp2 - 2.0 * gp1).max() < 1e-10 * max(np.abs(gp1).max(), 1e-300)


def test_quadratic_smallness_scaling():
    grid = Grid((16, 16, 16), (2 * np.pi,) * 3)
    norms = []
    for amp in (0.08, 0.04, 0.02):
        state = small_state(grid, amp)
        sol = solve_pressure_gradient(state, cofactor_matrices(state.Y), tol=1e-14)
        w = grid.hs_weight(2)
        norms.append(np.sqrt(weighted_norm_sq(sol.grad_p.spec, w, grid)))
    r1 = norms[0] / norms[1]
    r2 = norms[1] / norms[2]
    assert 3.0 < r1 < 5.2 and 3.2 < r2 < 4.8
    # Richardson: the ratio of ratios approaches the quadratic power 4
    assert r2 == pytest.approx(4.0, rel=0.15)


def test_divergence_detected_for_large_deformation():
    grid = Grid((16, 16, 16), (2 * np.pi,) * 3)
    state = small_state(grid, 3.0)
    with pytest.raises(PressureDivergenceError):
        solve_pressure_gradient(state, cofactor_matrices(state.Y), max_iter=30)


def test_iteration_cap_raises():
    grid = Grid((16, 16, 16), (2 * np.pi,) * 3)
    state = small_state(grid, 0.3)
    with pytest.raises(NotConvergedError):
        solve_pressure_gradient(
            state, cofactor_matrices(state.Y), tol=1e-14, max_iter=2
        )


def test_residuals_decrease_in_contraction_regime():
    grid = Grid((16, 16, 16), (2 * np.pi,) * 3)
    state = small_state(grid, 0.08)
    sol = solve_pressure_gradient(state, cofactor_matrices(state.Y), tol=1e-13)
    res = sol.residuals
    assert all(res[i + 1] < res[i] for i in range(len(res) - 2))
