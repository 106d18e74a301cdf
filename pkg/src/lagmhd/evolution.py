"""Time integration: exact per-mode linear propagation plus nonlinear forcing.

Per Fourier mode the linear part of the displacement equation
Y_tt - lap(Y_t) - d1^2 Y = f reduces to y'' + a y' + b y = f_k with a = |k|^2
and b = k1^2, whose characteristic roots lambda^2 + a lambda + b = 0 always
have nonpositive real part. The stepper propagates that part exactly and
treats f with a two-stage exponential predictor-corrector, so stiffness never
restricts the step size, only accuracy does. A pseudo-spectral Eulerian
solver of the primitive velocity/magnetic system provides the reference for
cross-formulation checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fields import ScalarField, VectorField
from .geometry import (
    FlowState,
    cofactor_values,
    determinant_values,
    graded_metric_values,
)
from .grid import Grid
from .pressure import PressureSolution, _tensor_rhs_spec, solve_pressure_spec
from .spectral import (
    dealias_spec,
    gradient_values,
    riesz_apply_spec,
)

DEGENERATE_REL_TOL = 1e-12  # |disc| <= tol * |k|^4 switches to the double-root limit


# -- characteristic roots ----------------------------------------------------


def characteristic_roots(a, b):
    """Roots of lambda^2 + a*lambda + b = 0, cancellation-free for b << a^2.

    Returns (lam_plus, lam_minus) sorted by real part descending; complex pairs
    put the +imag root first.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    disc = a * a - 4.0 * b
    disc = np.where(np.abs(disc) <= DEGENERATE_REL_TOL * a * a, 0.0, disc)
    s = np.sqrt(disc.astype(complex))
    lam_minus = -0.5 * (a + s)
    denom = a + s
    safe = np.where(np.abs(denom) > 0, denom, 1.0)
    lam_plus = np.where(np.abs(denom) > 0, -2.0 * b / safe, 0.0)
    return lam_plus, lam_minus


def dispersion_eigenvalues(k):
    """Characteristic roots for one wavevector k (any dimension)."""
    k = np.asarray(k, dtype=float)
    a = float(np.sum(k * k))
    b = float(k[0] ** 2)
    lp, lm = characteristic_roots(a, b)
    return complex(lp), complex(lm)


def _phi_entries(a, b, t):
    """Fundamental-solution entries (phi0, phi1, dphi1) of y'' + a y' + b y = 0.

    y(t) = phi0*y0 + phi1*y1, y'(t) = -b*phi1*y0 + dphi1*y1. Written through
    cosh/sinch of s*t/2 so the degenerate double-root locus is crossed smoothly;
    the large branch uses the root exponentials directly (|e^{lam t}| <= 1).
    """
    lp, lm = characteristic_roots(a, b)
    mu = 0.5 * (lp + lm)  # real: -a/2
    sig = 0.5 * (lp - lm)
    z = sig * t
    small = np.abs(z) <= 1e-3

    z2 = np.where(small, z * z, 0.0)
    sinch = 1.0 + z2 / 6.0 + z2 * z2 / 120.0 + z2 * z2 * z2 / 5040.0
    cosh = 1.0 + z2 / 2.0 + z2 * z2 / 24.0 + z2 * z2 * z2 / 720.0
    e_mu = np.exp(mu * t)
    phi1_s = t * e_mu * sinch
    phi0_s = e_mu * (cosh - mu * t * sinch)
    dphi1_s = e_mu * (cosh + mu * t * sinch)

    s_full = lp - lm
    s_safe = np.where(small, 1.0, s_full)
    ep = np.exp(lp * t)
    em = np.exp(lm * t)
    phi1_l = (ep - em) / s_safe
    phi0_l = (lp * em - lm * ep) / s_safe
    dphi1_l = (lp * ep - lm * em) / s_safe

    phi0 = np.where(small, phi0_s, phi0_l)
    phi1 = np.where(small, phi1_s, phi1_l)
    dphi1 = np.where(small, dphi1_s, dphi1_l)
    return phi0.real, phi1.real, dphi1.real


def _exprel1(z):
    small = np.abs(z) <= 1e-4
    zs = np.where(small, z, 0.0)
    series = 1.0 + zs / 2.0 + zs * zs / 6.0 + zs**3 / 24.0
    z_safe = np.where(small, 1.0, z)
    return np.where(small, series, (np.exp(z) - 1.0) / z_safe)


def _exprel1_prime(z):
    small = np.abs(z) <= 1e-2
    zs = np.where(small, z, 0.0)
    series = 0.5 + zs / 3.0 + zs * zs / 8.0 + zs**3 / 30.0
    z_safe = np.where(small, 1.0, z)
    return np.where(small, series, (np.exp(z) * (z - 1.0) + 1.0) / z_safe**2)


def _exprel2(z):
    small = np.abs(z) <= 1e-4
    zs = np.where(small, z, 0.0)
    series = 0.5 + zs / 6.0 + zs * zs / 24.0 + zs**3 / 120.0
    z_safe = np.where(small, 1.0, z)
    return np.where(small, series, (np.exp(z) - 1.0 - z) / z_safe**2)


def _exprel2_prime(z):
    small = np.abs(z) <= 1e-2
    zs = np.where(small, z, 0.0)
    series = 1.0 / 6.0 + zs / 12.0 + zs * zs / 40.0 + zs**3 / 180.0
    z_safe = np.where(small, 1.0, z)
    return np.where(
        small, series, (np.exp(z) * (z - 2.0) + z + 2.0) / z_safe**3
    )


def _integral_entries(a, b, dt):
    """(I0, K1) = (int_0^dt phi1, int_0^dt (1 - tau/dt) phi1) for the Duhamel blocks."""
    lp, lm = characteristic_roots(a, b)
    s = lp - lm
    small = np.abs(s * dt) <= 1e-3
    s_safe = np.where(small, 1.0, s)
    f_p = dt * _exprel1(lp * dt)
    f_m = dt * _exprel1(lm * dt)
    g_p = dt * _exprel2(lp * dt)
    g_m = dt * _exprel2(lm * dt)
    zbar = 0.5 * (lp + lm) * dt
    i0 = np.where(small, dt * dt * _exprel1_prime(zbar), (f_p - f_m) / s_safe)
    k1 = np.where(small, dt * dt * _exprel2_prime(zbar), (g_p - g_m) / s_safe)
    return i0.real, k1.real


def propagator_matrix(k, dt: float):
    """Exact 2x2 block mapping (Y_k, Yt_k)(t) -> (t + dt) for one mode."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    k = np.asarray(k, dtype=float)
    a = float(np.sum(k * k))
    b = float(k[0] ** 2)
    phi0, phi1, dphi1 = _phi_entries(a, b, dt)
    return np.array([[phi0, phi1], [-b * phi1, dphi1]])


@dataclass
class LinearPropagator:
    """Per-mode exact propagation blocks for a fixed grid and time step."""

    grid: Grid
    dt: float

    def __post_init__(self):
        grid, dt = self.grid, self.dt
        if dt <= 0:
            raise ValueError("dt must be positive")
        a = grid.k2
        b = np.broadcast_to(grid.k1sq, grid.shape)
        lp, lm = characteristic_roots(a, b)
        if lp.real.max() > 1e-13 or lm.real.max() > 1e-13:
            raise AssertionError("unstable characteristic root on the lattice")
        self.lam_plus = lp
        self.lam_minus = lm
        disc = a * a - 4.0 * b
        self.degenerate = np.abs(disc) <= DEGENERATE_REL_TOL * a * a
        self.phi0, self.phi1, self.dphi1 = _phi_entries(a, b, dt)
        self.dphi0 = -b * self.phi1
        self.i0, self.k1 = _integral_entries(a, b, dt)

    def apply(self, y_spec, yt_spec):
        return (
            self.phi0 * y_spec + self.phi1 * yt_spec,
            self.dphi0 * y_spec + self.dphi1 * yt_spec,
        )


# -- nonlinear force ---------------------------------------------------------


@dataclass
class NonlinearForce:
    """Exact forcing of the displacement equation and its diagnostics split."""

    f: VectorField
    viscous_graded: tuple  # VectorField per homogeneity degree in grad Y
    pressure_force: VectorField  # -A grad_p
    f3: VectorField  # viscous terms of degree >= 2
    pressure: PressureSolution
    a_values: np.ndarray
    grad_y: np.ndarray
    grad_yt: np.ndarray
    f1: Optional[VectorField] = None  # (div G1) . grad Yt
    f2: Optional[VectorField] = None  # G1 : hess Yt

    @property
    def det_values(self):
        return determinant_values(self.grad_y)


def compute_force(
    state: FlowState,
    pressure_tol: float = 1e-10,
    pressure_max_iter: int = 50,
    split_quadratic: bool = False,
) -> NonlinearForce:
    """Assemble f = sum_d div(G_d grad Yt) - A grad_p with dealiased products."""
    grid = state.grid
    grad_y = gradient_values(state.Y.spec, grid)
    b1, b2, a_vals = cofactor_values(grad_y)
    graded = graded_metric_values(b1, b2)
    grad_yt = gradient_values(state.Yt.spec, grid)

    visc_specs = []
    for g in graded:
        flux = np.einsum("jm...,im...->ij...", g, grad_yt)
        flux_spec = dealias_spec(grid.fft(flux), grid)
        f_d = np.zeros((grid.dim,) + grid.shape, dtype=complex)
        for j in range(grid.dim):
            f_d += 1j * grid.k_axes[j] * flux_spec[:, j]
        visc_specs.append(f_d)

    d1y = grad_y[:, 0]
    rhs_spec = _tensor_rhs_spec(grid, a_vals, d1y, state.Yt.values)
    defect = graded[0].copy()
    for g in graded[1:]:
        defect += g
    gp_spec, iters, residuals, contraction = solve_pressure_spec(
        grid, a_vals, defect, rhs_spec, pressure_tol, pressure_max_iter
    )
    gp_real = grid.ifft(gp_spec)
    a_gp = np.einsum("im...,m...->i...", a_vals, gp_real)
    fp_spec = -dealias_spec(grid.fft(a_gp), grid)

    f_spec = fp_spec.copy()
    for v in visc_specs:
        f_spec += v
    f3_spec = np.zeros_like(fp_spec)
    for v in visc_specs[1:]:
        f3_spec += v

    f1 = f2 = None
    if split_quadratic:
        g1_spec = grid.fft(graded[0])
        div_g1 = np.zeros((grid.dim,) + grid.shape, dtype=complex)
        for j in range(grid.dim):
            div_g1 += 1j * grid.k_axes[j] * g1_spec[j]
        div_g1_real = grid.ifft(div_g1)
        f1_vals = np.einsum("m...,im...->i...", div_g1_real, grad_yt)
        f1 = VectorField.from_spec(grid, dealias_spec(grid.fft(f1_vals), grid))
        f2_vals = np.zeros((grid.dim,) + grid.shape)
        for j in range(grid.dim):
            for m in range(grid.dim):
                hess_jm = grid.ifft(
                    -grid.k_axes[j] * grid.k_axes[m] * state.Yt.spec
                )
                f2_vals += graded[0][j, m] * hess_jm
        f2 = VectorField.from_spec(grid, dealias_spec(grid.fft(f2_vals), grid))

    return NonlinearForce(
        f=VectorField.from_spec(grid, f_spec),
        viscous_graded=tuple(VectorField.from_spec(grid, v) for v in visc_specs),
        pressure_force=VectorField.from_spec(grid, fp_spec),
        f3=VectorField.from_spec(grid, f3_spec),
        pressure=PressureSolution(
            grad_p=VectorField.from_spec(grid, gp_spec),
            iterations=iters,
            residuals=residuals,
            contraction_estimate=contraction,
        ),
        a_values=a_vals,
        grad_y=grad_y,
        grad_yt=grad_yt,
        f1=f1,
        f2=f2,
    )


# -- Lagrangian stepper ------------------------------------------------------


@dataclass
class StepResult:
    state: FlowState
    force: NonlinearForce  # evaluated at the step start


class LagrangianStepper:
    """Exponential predictor-corrector for the displacement system.

    The linear part is advanced by the exact per-mode blocks; the forcing is
    interpolated linearly across the step (Duhamel weights I0, K1), which is
    second order in dt and preserves the equilibrium exactly.
    """

    def __init__(
        self,
        grid: Grid,
        dt: float,
        pressure_tol: float = 1e-10,
        pressure_max_iter: int = 50,
    ):
        self.grid = grid
        self.dt = dt
        self.pressure_tol = pressure_tol
        self.pressure_max_iter = pressure_max_iter
        self.propagator = LinearPropagator(grid, dt)

    def force(self, state: FlowState, split_quadratic: bool = False) -> NonlinearForce:
        return compute_force(
            state,
            pressure_tol=self.pressure_tol,
            pressure_max_iter=self.pressure_max_iter,
            split_quadratic=split_quadratic,
        )

    def step(self, state: FlowState, force: NonlinearForce = None) -> StepResult:
        grid, dt, prop = self.grid, self.dt, self.propagator
        y0, yt0 = state.Y.spec, state.Yt.spec
        py, pyt = prop.apply(y0, yt0)

        f0 = force if force is not None else self.force(state)
        f0h = f0.f.spec
        y_star = py + prop.i0 * f0h
        yt_star = pyt + prop.phi1 * f0h
        star = FlowState(
            VectorField.from_spec(grid, y_star),
            VectorField.from_spec(grid, yt_star),
            state.t + dt,
        )
        f1h = self.force(star).f.spec

        y_new = py + (prop.i0 - prop.k1) * f0h + prop.k1 * f1h
        yt_new = pyt + (prop.phi1 - prop.i0 / dt) * f0h + (prop.i0 / dt) * f1h
        if not (np.isfinite(np.abs(y_new).max()) and np.isfinite(np.abs(yt_new).max())):
            raise FloatingPointError("non-finite spectral coefficients after step")
        new_state = FlowState(
            VectorField.from_spec(grid, y_new),
            VectorField.from_spec(grid, yt_new),
            state.t + dt,
        )
        return StepResult(state=new_state, force=f0)

    def step_linear(self, state: FlowState) -> FlowState:
        """Propagate with the forcing forced to zero (linear system)."""
        y, yt = self.propagator.apply(state.Y.spec, state.Yt.spec)
        return FlowState(
            VectorField.from_spec(self.grid, y),
            VectorField.from_spec(self.grid, yt),
            state.t + self.dt,
        )


def step_lagrangian(
    state: FlowState, dt: float, pressure_tol: float = 1e-10, pressure_max_iter: int = 50
) -> FlowState:
    """One-shot stepping convenience; long runs should reuse a LagrangianStepper."""
    stepper = LagrangianStepper(state.grid, dt, pressure_tol, pressure_max_iter)
    return stepper.step(state).state


# -- Eulerian reference solver -------------------------------------------------


@dataclass
class EulerState:
    """Primitive variables on the grid; p is zero-mean and diagnostic."""

    u: VectorField
    b: VectorField
    t: float = 0.0
    p: Optional[ScalarField] = None

    def __post_init__(self):
        self.u.check_same_grid(self.b)

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def equilibrium(cls, grid: Grid, t: float = 0.0) -> "EulerState":
        b = np.zeros((grid.dim,) + grid.shape)
        b[0] = 1.0
        return cls(VectorField.zeros(grid), VectorField.from_values(grid, b), t)


def _magnetic_filter(grid: Grid, exponent: int = 36):
    """High-order exponential filter pinned to the dealias boundary.

    exp(-36 r^36) with r the per-axis-normalized mode fraction: ~1 up to
    two thirds of the retained band, machine-zero at the boundary. Stands in
    for the missing resistivity of the induction equation.
    """
    r = np.zeros(grid.shape)
    for i, n in enumerate(grid.sizes):
        ncut = int(np.ceil(n / 3.0)) - 1
        frac = np.abs(np.fft.fftfreq(n) * n) / max(ncut, 1)
        r = np.maximum(r, frac.reshape([-1 if j == i else 1 for j in range(grid.dim)]))
    return np.exp(-36.0 * np.minimum(r, 1.0) ** exponent)


class EulerianStepper:
    """Integrating-factor Heun scheme for the primitive system.

    Viscosity is treated exactly per mode; advection and the Lorentz force are
    dealiased pseudo-spectral products under Leray projection; the magnetic
    field advances in the conservative curl(u x b) form so its divergence stays
    zero to round-off, with a spectral filter replacing the absent diffusion.
    """

    def __init__(self, grid: Grid, dt: float, magnetic_filter: bool = True):
        self.grid = grid
        self.dt = dt
        self.heat = np.exp(-grid.k2 * dt)
        self.filter = _magnetic_filter(grid) if magnetic_filter else None

    def _rhs(self, u_spec, b_spec):
        grid = self.grid
        u = grid.ifft(u_spec)
        b = grid.ifft(b_spec)
        grad_u = gradient_values(u_spec, grid)
        grad_b = gradient_values(b_spec, grid)
        conv = np.einsum("j...,ij...->i...", u, grad_u) - np.einsum(
            "j...,ij...->i...", b, grad_b
        )
        n_spec = dealias_spec(grid.fft(conv), grid)
        rhs_u = -(n_spec - riesz_apply_spec(n_spec, grid))
        if grid.dim == 2:
            w = u[0] * b[1] - u[1] * b[0]
            w_spec = dealias_spec(grid.fft(w), grid)
            h_spec = np.stack(
                [1j * grid.k_axes[1] * w_spec, -1j * grid.k_axes[0] * w_spec]
            )
        else:
            w = np.cross(u, b, axis=0)
            w_spec = dealias_spec(grid.fft(w), grid)
            k = grid.k_axes
            h_spec = np.stack(
                [
                    1j * (k[1] * w_spec[2] - k[2] * w_spec[1]),
                    1j * (k[2] * w_spec[0] - k[0] * w_spec[2]),
                    1j * (k[0] * w_spec[1] - k[1] * w_spec[0]),
                ]
            )
        return rhs_u, h_spec, n_spec

    def pressure_of(self, state: EulerState) -> ScalarField:
        """Zero-mean pressure recovered from the instantaneous Leray constraint."""
        grid = self.grid
        _, _, n_spec = self._rhs(state.u.spec, state.b.spec)
        kn = np.zeros(grid.shape, dtype=complex)
        for j in range(grid.dim):
            kn += grid.k_axes[j] * n_spec[j]
        k2 = grid.k2.copy()
        k2[(0,) * grid.dim] = 1.0
        p_spec = 1j * kn / k2
        p_spec[(0,) * grid.dim] = 0.0
        return ScalarField.from_spec(grid, p_spec)

    def step(self, state: EulerState) -> EulerState:
        grid, dt = self.grid, self.dt
        u0, b0 = state.u.spec, state.b.spec
        ru0, h0, _ = self._rhs(u0, b0)
        u_star = self.heat * (u0 + dt * ru0)
        b_star = b0 + dt * h0
        ru1, h1, _ = self._rhs(u_star, b_star)
        u_new = self.heat * u0 + 0.5 * dt * (self.heat * ru0 + ru1)
        b_new = b0 + 0.5 * dt * (h0 + h1)
        if self.filter is not None:
            b_new = b_new * self.filter
        if not np.isfinite(np.abs(u_new).max()):
            raise FloatingPointError("non-finite Eulerian state after step")
        return EulerState(
            VectorField.from_spec(grid, u_new),
            VectorField.from_spec(grid, b_new),
            state.t + dt,
        )


def step_eulerian(state: EulerState, dt: float, magnetic_filter: bool = True) -> EulerState:
    return EulerianStepper(state.grid, dt, magnetic_filter).step(state)
