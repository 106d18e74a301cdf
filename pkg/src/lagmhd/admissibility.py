"""Trajectory integrals of a transversal magnetic field over the seed plane.

A field f is admissible for b0 on the plane {x1 = 0} when the integral of f
along every b0-trajectory seeded there vanishes. The integral over all of
time is truncated at slab exit: outside the support slab [-K, K] the
integrand is zero by hypothesis, and b0 = e1 carries trajectories straight
out, so both branches terminate in finite time whenever b0^1 >= 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from io import StringIO

import numpy as np
from scipy.integrate import simpson

from .errors import NonTransversalError
from .fields import VectorField
from .geometry import make_trig_evaluator


def as_field_function(b0):
    """Normalize a VectorField or callable to pts(M,d) -> values(M,d)."""
    if isinstance(b0, VectorField):
        ev = make_trig_evaluator(b0)

        def fn(pts):
            return ev(pts).T

        return fn, b0.grid.dim
    if callable(b0):
        return b0, None
    raise TypeError("expected a VectorField or a callable field")


@dataclass
class Trajectory:
    """One b0-trajectory through a seed on the plane, sampled uniformly in time."""

    seed: np.ndarray
    times: np.ndarray  # ascending, uniform, containing 0
    positions: np.ndarray  # (ntimes, d)
    slab_halfwidth: float
    margin: float
    exited_forward: bool
    exited_backward: bool


def _rk4_batch(fn, z, dt, nsteps, record):
    """Fixed-step RK4 on a batch of positions; records every state."""
    out = np.empty((nsteps + 1,) + z.shape) if record else None
    if record:
        out[0] = z
    for i in range(nsteps):
        k1 = fn(z)
        k2 = fn(z + 0.5 * dt * k1)
        k3 = fn(z + 0.5 * dt * k2)
        k4 = fn(z + dt * k3)
        z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if record:
            out[i + 1] = z
    return z, out


def _integrate_batch(fn, seeds, dt_ode, slab_halfwidth, margin):
    """Forward and backward branches for a batch of seeds, concatenated in time."""
    reach = slab_halfwidth + margin
    # speed along x1 is at least 1/2 inside the slab and 1 outside
    nsteps = int(np.ceil(2.0 * reach / dt_ode)) + 2
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    _, fwd = _rk4_batch(fn, seeds, dt_ode, nsteps, record=True)

    def back_fn(z):
        return -fn(z)

    _, bwd = _rk4_batch(back_fn, seeds, dt_ode, nsteps, record=True)
    exited_f = np.abs(fwd[-1, :, 0]) > reach - margin * 0.5
    exited_b = np.abs(bwd[-1, :, 0]) > reach - margin * 0.5
    if not (exited_f.all() and exited_b.all()):
        stuck = int(np.argmin(exited_f & exited_b))
        raise NonTransversalError(
            f"trajectory from seed {seeds[stuck]} trapped inside the slab after "
            f"{nsteps} steps; b0 is not transversal"
        )
    times = np.concatenate(
        [-dt_ode * np.arange(nsteps, 0, -1), dt_ode * np.arange(nsteps + 1)]
    )
    positions = np.concatenate([bwd[:0:-1], fwd], axis=0)  # (2*nsteps+1, M, d)
    return times, positions, exited_f, exited_b


def integrate_trajectory(
    b0,
    y,
    dt_ode: float,
    slab_halfwidth: float,
    margin: float = None,
) -> Trajectory:
    """Integrate dX/dt = b0(X) from X(0) = y until both branches leave the slab."""
    fn, _ = as_field_function(b0)
    y = np.asarray(y, dtype=float)
    if margin is None:
        margin = 4.0 * dt_ode
    times, positions, ef, eb = _integrate_batch(
        fn, y[None, :], dt_ode, slab_halfwidth, margin
    )
    return Trajectory(
        seed=y,
        times=times,
        positions=positions[:, 0, :],
        slab_halfwidth=slab_halfwidth,
        margin=margin,
        exited_forward=bool(ef[0]),
        exited_backward=bool(eb[0]),
    )


def admissibility_integral(f, traj: Trajectory) -> np.ndarray:
    """Componentwise integral of f along the trajectory, truncated at slab exit.

    Requires f compactly supported in x1 within the slab; the truncation is
    then exact rather than an approximation of the integral over all time.
    """
    fn, _ = as_field_function(f)
    vals = fn(traj.positions)  # (ntimes, d)
    outside = np.abs(traj.positions[:, 0]) > traj.slab_halfwidth
    fmax = float(np.abs(vals).max())
    if fmax > 0.0 and outside.any():
        fmax_out = float(np.abs(vals[outside]).max())
        if fmax_out > 1e-12 * fmax:
            x1 = traj.positions[outside, 0]
            raise ValueError(
                "integrand not supported in the slab: |f| reaches "
                f"{fmax_out:.3e} at x1 in [{x1.min():.3g}, {x1.max():.3g}]"
            )
    dt = traj.times[1] - traj.times[0]
    return np.asarray(simpson(vals, dx=dt, axis=0))


@dataclass
class AdmissibilityReport:
    seeds: np.ndarray  # (M, d-1) transverse coordinates
    integrals: np.ndarray  # (M, d)
    max_abs_integral: float
    support_halfwidth: float
    tolerance: float
    admissible: bool
    note: str = ""

    def to_csv(self) -> str:
        d = self.integrals.shape[1]
        buf = StringIO()
        seed_cols = ",".join(f"seed_y{i + 2}" for i in range(self.seeds.shape[1]))
        int_cols = ",".join(f"integral_{i + 1}" for i in range(d))
        buf.write(f"{seed_cols},{int_cols},admissible\n")
        for s, v in zip(self.seeds, self.integrals):
            row_ok = bool(np.abs(v).max() <= self.tolerance)
            buf.write(
                ",".join(f"{x:.17g}" for x in s)
                + ","
                + ",".join(f"{x:.17g}" for x in v)
                + f",{int(row_ok)}\n"
            )
        return buf.getvalue()


def check_admissible(
    b0,
    slab_halfwidth: float,
    tol: float,
    seed_grid,
    dt_ode: float = None,
    test_field=None,
) -> AdmissibilityReport:
    """Run the plane-seeded admissibility integrals for f = b0 - e1.

    The tolerance is dimensional: tol scaled by sup|f| * (slab width). Pass
    test_field to audit a different integrand along the same trajectories.
    The integrand for b0 itself is interpreted through the same slab
    truncation as b0 - e1 (the drift part integrates trivially), which the
    report records as a note.
    """
    fn, dim_hint = as_field_function(b0)
    seeds = np.atleast_2d(np.asarray(seed_grid, dtype=float))
    dim = seeds.shape[1] + 1
    if dim_hint is not None and dim_hint != dim:
        raise ValueError(f"seed grid dimension {dim} != field dimension {dim_hint}")
    if dt_ode is None:
        dt_ode = slab_halfwidth / 128.0
    margin = 4.0 * dt_ode

    if test_field is None:
        e1 = np.zeros(dim)
        e1[0] = 1.0

        def f_fn(pts):
            return fn(pts) - e1

    else:
        f_fn, _ = as_field_function(test_field)

    plane_seeds = np.zeros((seeds.shape[0], dim))
    plane_seeds[:, 1:] = seeds
    times, positions, _, _ = _integrate_batch(
        fn, plane_seeds, dt_ode, slab_halfwidth, margin
    )
    npts, m, _ = positions.shape
    vals = f_fn(positions.reshape(npts * m, dim)).reshape(npts, m, dim)
    outside = np.abs(positions[:, :, 0]) > slab_halfwidth
    fmax = float(np.abs(vals).max())
    if fmax > 0.0 and outside.any():
        fmax_out = float(np.abs(vals[outside]).max())
        if fmax_out > 1e-12 * fmax:
            raise ValueError(
                f"integrand not supported in the slab: |f| = {fmax_out:.3e} outside"
            )
    dt = times[1] - times[0]
    integrals = np.asarray(simpson(vals, dx=dt, axis=0))  # (M, d)
    max_abs = float(np.abs(integrals).max()) if integrals.size else 0.0
    tolerance = tol * fmax * 2.0 * slab_halfwidth
    return AdmissibilityReport(
        seeds=seeds,
        integrals=integrals,
        max_abs_integral=max_abs,
        support_halfwidth=slab_halfwidth,
        tolerance=tolerance,
        admissible=bool(max_abs <= tolerance),
        note="integral truncated at slab exit (compact-support hypothesis)",
    )
