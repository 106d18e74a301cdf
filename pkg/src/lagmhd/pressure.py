"""Implicit pressure-gradient solve by contraction fixed point.

The pressure gradient satisfies

    grad_p = -R[(A^T A - I) grad_p] + R[A^T div(A^T (d1Y x d1Y - Yt x Yt))]

with R the inverse-Laplacian grad-div operator. For small deformations the
bracketed metric defect makes the map a contraction, so Picard iteration from
the one-term truncation converges geometrically; the measured ratio is part of
the solution object because it doubles as a smallness monitor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotConvergedError, PressureDivergenceError
from .fields import VectorField
from .grid import Grid
from .spectral import dealias_spec, riesz_apply_spec, weighted_norm_sq


@dataclass
class PressureSolution:
    grad_p: VectorField
    iterations: int
    residuals: list
    contraction_estimate: float


def _tensor_rhs_spec(grid: Grid, a_vals, v_vals, w_vals):
    """R[A^T div2((v x v - w x w) A)] with div2 acting on the second index.

    The divergence-free rows of the cofactor matrix let the nested operator
    collapse to this conservative form.
    """
    z = np.einsum("i...,j...->ij...", v_vals, v_vals) - np.einsum(
        "i...,j...->ij...", w_vals, w_vals
    )
    za = np.einsum("im...,ml...->il...", z, a_vals)
    za_spec = dealias_spec(grid.fft(za), grid)
    w_spec = np.zeros((grid.dim,) + grid.shape, dtype=complex)
    for l in range(grid.dim):
        w_spec += 1j * grid.k_axes[l] * za_spec[:, l]
    w_real = grid.ifft(w_spec)
    atw = np.einsum("jm...,j...->m...", a_vals, w_real)
    atw_spec = dealias_spec(grid.fft(atw), grid)
    return riesz_apply_spec(atw_spec, grid)


def pressure_rhs(state, cof) -> VectorField:
    """Quadratic source term of the pressure equation, fully dealiased."""
    grid = state.grid
    d1y = grid.ifft(state.Y.spec * (1j * grid.k_axes[0]))
    return VectorField.from_spec(
        grid, _tensor_rhs_spec(grid, cof.A.values, d1y, state.Yt.values)
    )


def solve_pressure_spec(grid: Grid, a_vals, defect_vals, rhs_spec, tol, max_iter):
    """Picard iteration grad_p <- -R[defect . grad_p] + rhs from grad_p = rhs."""
    gp = rhs_spec.copy()
    residuals = []
    ratios = []
    bad_streak = 0
    for it in range(1, max_iter + 1):
        gp_real = grid.ifft(gp)
        mgp = np.einsum("jm...,m...->j...", defect_vals, gp_real)
        mgp_spec = dealias_spec(grid.fft(mgp), grid)
        gp_new = rhs_spec - riesz_apply_spec(mgp_spec, grid)
        res = float(np.sqrt(weighted_norm_sq(gp_new - gp, 1.0, grid)))
        residuals.append(res)
        if len(residuals) >= 2 and residuals[-2] > 0:
            ratio = res / residuals[-2]
            ratios.append(ratio)
            bad_streak = bad_streak + 1 if ratio >= 1.0 else 0
            if bad_streak >= 3:
                raise PressureDivergenceError(
                    f"pressure iteration expanding (ratio {ratio:.3f} for 3 "
                    "consecutive steps); deformation outside the smallness regime",
                    residuals=residuals,
                )
        gp = gp_new
        if res <= tol:
            contraction = float(np.exp(np.mean(np.log(ratios)))) if ratios else 0.0
            return gp, it, residuals, contraction
    raise NotConvergedError(
        f"pressure fixed point not converged after {max_iter} iterations "
        f"(last residual {residuals[-1]:.3e})",
        residual=residuals[-1],
    )


def solve_pressure_gradient(
    state, cof, tol: float = 1e-10, max_iter: int = 50
) -> PressureSolution:
    """Solve for grad_p; raises PressureDivergenceError outside the contraction regime."""
    grid = state.grid
    rhs = pressure_rhs(state, cof).spec
    defect = cof.metric_defect
    gp, iterations, residuals, contraction = solve_pressure_spec(
        grid, cof.A.values, defect, rhs, tol, max_iter
    )
    return PressureSolution(
        grad_p=VectorField.from_spec(grid, gp),
        iterations=iterations,
        residuals=residuals,
        contraction_estimate=contraction,
    )
