"""Run orchestration: stepping loops, diagnostics CSV, reports, comparisons."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import read_checkpoint, write_checkpoint
from .config import RunConfig
from .energy import (
    EnergyEvaluator,
    LedgerSample,
    corrected_energy,
    dissipation_inequality_terms,
    dissipation_report,
    energy_report,
    fit_decay_rate,
    forcing_pairings,
    grad_u_linf_time_integral,
    integrated_rhs,
    ledger_check,
)
from .errors import ConfigError, InitialDataError
from .evolution import (
    EulerianStepper,
    EulerState,
    LagrangianStepper,
    NonlinearForce,
)
from .geometry import FlowState, determinant_values, make_trig_evaluator
from .grid import Grid
from .initial_data import build_flow_state, euler_from_flow
from .spectral import gradient_values

CSV_COLUMNS = (
    "t",
    "E_yt_h2",
    "E_d1y_h2",
    "E_lap_y_h2",
    "E_w_grad_yt_h2",
    "E_w_grad_d1y_h2",
    "E_w2_grad_d1yt_h1",
    "E_w2_grad_d11y_h1",
    "D_grad_yt_h2",
    "D_grad_d1y_h2",
    "D_w_grad_d11y_h1",
    "D_w_lap_yt_h2",
    "D_w2_lap_d1yt_h1",
    "E_total",
    "D_total",
    "script_E",
    "tilde_E",
    "ledger_lhs",
    "ledger_rhs",
    "ledger_pass",
    "det_drift_max",
    "pressure_iters",
    "contraction_est",
    "grad_u_linf",
    "grad_u_l1t",
)


@dataclass
class RunSample:
    t: float
    energy: tuple
    energy_total: float
    dissipation: tuple
    dissipation_total: float
    corrected: float
    diss_terms: tuple
    rhs1: float
    rhs2: float
    det_drift: float
    grad_u_sup: float
    pressure_iters: int
    contraction: float
    norm_grad_yt_h2: float
    norm_grad_d1yt_h1: float
    script_e: float = float("nan")
    grad_u_l1t: float = float("nan")
    ledger_lhs: float = float("nan")
    ledger_rhs: float = float("nan")
    ledger_pass: float = float("nan")


@dataclass
class RunReport:
    config: RunConfig
    aborted: bool
    abort_reason: str
    t_final: float
    script_e0: float
    script_e_final: float
    script_e_ratio: float
    det_drift_max: float
    ledger_pass_rate: float
    ledger_checked: int
    decay_fits: dict
    grad_u_l1t: float
    grad_u_tail_ratio: float
    pressure_iters_max: int
    rhs_integral: float = float("nan")
    samples: list = field(default_factory=list, repr=False)
    csv_path: str = ""
    checkpoint_path: str = ""
    final_state: object = None

    def summary(self) -> str:
        lines = [
            f"aborted          : {self.aborted}"
            + (f" ({self.abort_reason})" if self.aborted else ""),
            f"t_final          : {self.t_final:g}",
            f"script_E 0 -> end: {self.script_e0:.6e} -> {self.script_e_final:.6e}"
            f" (ratio {self.script_e_ratio:.3f})",
            f"det drift max    : {self.det_drift_max:.3e}",
            f"ledger pass rate : {self.ledger_pass_rate:.4f} over {self.ledger_checked}",
            f"grad_u L1(t)     : {self.grad_u_l1t:.6e} (tail ratio {self.grad_u_tail_ratio:.4f})",
            f"pressure iters   : <= {self.pressure_iters_max}",
        ]
        for name, fit in self.decay_fits.items():
            if fit is not None:
                lines.append(
                    f"decay fit {name}: slope {fit.slope:.4f} (r2 {fit.r_squared:.4f})"
                )
        return "\n".join(lines)


def _grad_u_sup(force: NonlinearForce) -> float:
    # (grad_x u) composed with the flow equals (grad_y Yt) A^T
    gu = np.einsum("im...,jm...->ij...", force.grad_yt, force.a_values)
    return float(np.sqrt(np.sum(gu**2, axis=(0, 1))).max())


def _record_sample(ev: EnergyEvaluator, state: FlowState, force: NonlinearForce):
    e = energy_report(ev, state)
    d = dissipation_report(ev, state)
    ce = corrected_energy(ev, state)
    diss_terms = dissipation_inequality_terms(ev, state)
    rhs1, rhs2 = forcing_pairings(ev, state, force.f.spec)
    det = determinant_values(force.grad_y)
    return RunSample(
        t=state.t,
        energy=e.astuple(),
        energy_total=e.total,
        dissipation=d.astuple(),
        dissipation_total=d.total,
        corrected=ce.total,
        diss_terms=diss_terms,
        rhs1=rhs1,
        rhs2=rhs2,
        det_drift=float(np.abs(det - 1.0).max()),
        grad_u_sup=_grad_u_sup(force),
        pressure_iters=force.pressure.iterations,
        contraction=force.pressure.contraction_estimate,
        norm_grad_yt_h2=float(np.sqrt(d.grad_yt_h2)),
        norm_grad_d1yt_h1=float(np.sqrt(e.w2_grad_d1yt_h1) / (state.t + 1.0)),
    )


def _postprocess(samples):
    """Fill running script-E, the grad-u integral, and the ledger columns."""
    e_tot = np.array([s.energy_total for s in samples])
    d_tot = np.array([s.dissipation_total for s in samples])
    times = np.array([s.t for s in samples])
    e_sup = np.maximum.accumulate(e_tot)
    d_int = np.zeros_like(d_tot)
    if len(samples) > 1:
        d_int[1:] = np.cumsum(0.5 * (d_tot[1:] + d_tot[:-1]) * np.diff(times))
    script_e = e_sup + d_int
    gul1 = grad_u_linf_time_integral(times, [s.grad_u_sup for s in samples])
    for s, se, g in zip(samples, script_e, gul1):
        s.script_e = float(se)
        s.grad_u_l1t = float(g)
    records = []
    if len(samples) >= 3:
        ledger_samples = [
            LedgerSample(
                t=s.t,
                corrected=s.corrected,
                dissipation_terms=s.diss_terms,
                rhs1=s.rhs1,
                rhs2=s.rhs2,
                energy_total=s.energy_total,
                dissipation_total=s.dissipation_total,
            )
            for s in samples
        ]
        records = ledger_check(ledger_samples)
        for s, r in zip(samples[1:-1], records):
            s.ledger_lhs = r.lhs
            s.ledger_rhs = r.rhs
            s.ledger_pass = float(r.passed)
        rhs_integral = integrated_rhs(ledger_samples)
    else:
        rhs_integral = 0.0
    return records, rhs_integral


def write_diagnostics(path, samples) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for s in samples:
            row = (
                (s.t,)
                + s.energy
                + s.dissipation
                + (
                    s.energy_total,
                    s.dissipation_total,
                    s.script_e,
                    s.corrected,
                    s.ledger_lhs,
                    s.ledger_rhs,
                    s.ledger_pass,
                    s.det_drift,
                    float(s.pressure_iters),
                    s.contraction,
                    s.grad_u_sup,
                    s.grad_u_l1t,
                )
            )
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def read_diagnostics(path):
    """Read a diagnostics CSV back as {column: array}."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.array(
            [[float(x) for x in line.strip().split(",")] for line in fh if line.strip()]
        )
    if data.size == 0:
        data = np.empty((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def _initial_state(config: RunConfig, grid: Grid):
    if config.checkpoint_in:
        state = read_checkpoint(config.checkpoint_in, dealias=config.dealias)
        if not state.grid.same_as(grid):
            raise ConfigError("checkpoint grid does not match the configured grid")
        return state
    return build_flow_state(grid, config.initial_data_spec())


def run_simulation(config: RunConfig, write_outputs: bool = True) -> RunReport:
    """Step the configured solver to t_end, emitting diagnostics per cadence."""
    if config.solver == "both":
        raise ConfigError("solver=both runs through compare_formulations")
    if config.solver == "eulerian":
        return _run_eulerian(config, write_outputs)
    grid = Grid(config.sizes, config.lengths, dealias=config.dealias)
    state = _initial_state(config, grid)
    if isinstance(state, EulerState):
        raise ConfigError("checkpoint stores primitive variables, not a flow map")
    det0 = determinant_values(gradient_values(state.Y.spec, grid))
    det0_err = float(np.abs(det0 - 1.0).max())
    if det0_err > 1e-8:
        raise InitialDataError(
            f"initial displacement violates det(I + grad Y0) = 1 by {det0_err:.3e}"
        )

    t0 = state.t
    span = config.t_end - t0
    n_steps = round(span / config.dt)
    if n_steps < 1 or abs(n_steps * config.dt - span) > 1e-9 * max(1.0, span):
        raise ConfigError("t_end - t0 must be a positive multiple of dt")
    sample_every = round(config.cadence / config.dt)
    if n_steps % sample_every != 0:
        raise ConfigError("t_end - t0 must be a multiple of the sample cadence")

    ev = EnergyEvaluator(grid)
    stepper = LagrangianStepper(
        grid, config.dt, config.pressure_tol, config.pressure_max_iter
    )
    samples = []
    aborted = False
    abort_reason = ""
    out_dir = config.output_dir or "."
    if write_outputs:
        os.makedirs(out_dir, exist_ok=True)
    ckpt_path = os.path.join(out_dir, "state_final.ckpt")

    try:
        for i in range(n_steps):
            force = stepper.force(state)
            if i % sample_every == 0:
                samples.append(_record_sample(ev, state, force))
            state = stepper.step(state, force=force).state
        force = stepper.force(state)
        samples.append(_record_sample(ev, state, force))
    except (RuntimeError, FloatingPointError) as exc:
        aborted = True
        abort_reason = f"{type(exc).__name__}: {exc}"
        ckpt_path = os.path.join(out_dir, "state_abort.ckpt")

    records, rhs_integral = _postprocess(samples)

    csv_path = ""
    if write_outputs:
        write_checkpoint(ckpt_path, state)
        csv_path = os.path.join(out_dir, "diagnostics.csv")
        write_diagnostics(csv_path, samples)
        if aborted:
            with open(os.path.join(out_dir, "abort_report.txt"), "w") as fh:
                fh.write(f"aborted at t = {state.t:.12g}\nreason: {abort_reason}\n")

    fits = {}
    times = np.array([s.t for s in samples])
    lo, hi = config.fit_window
    hi = min(hi, float(times[-1]) if len(times) else hi)
    for name, values in (
        ("grad_yt_h2", [s.norm_grad_yt_h2 for s in samples]),
        ("grad_d1yt_h1", [s.norm_grad_d1yt_h1 for s in samples]),
    ):
        try:
            fits[name] = fit_decay_rate(times, values, (lo, hi), quantity=name)
        except ValueError:
            fits[name] = None

    script_e0 = samples[0].script_e if samples else float("nan")
    script_e_final = samples[-1].script_e if samples else float("nan")
    gul1 = samples[-1].grad_u_l1t if samples else float("nan")
    tail_ratio = float("nan")
    if len(samples) >= 2 and gul1 > 0:
        t_tail = t0 + 0.8 * (times[-1] - t0)
        idx = int(np.searchsorted(times, t_tail))
        idx = min(max(idx, 0), len(samples) - 1)
        tail_ratio = (gul1 - samples[idx].grad_u_l1t) / gul1
    passed = sum(1 for r in records if r.passed)
    report = RunReport(
        config=config,
        aborted=aborted,
        abort_reason=abort_reason,
        t_final=state.t,
        script_e0=script_e0,
        script_e_final=script_e_final,
        script_e_ratio=script_e_final / script_e0 if script_e0 > 0 else float("nan"),
        det_drift_max=max((s.det_drift for s in samples), default=float("nan")),
        ledger_pass_rate=passed / len(records) if records else float("nan"),
        ledger_checked=len(records),
        decay_fits=fits,
        grad_u_l1t=gul1,
        grad_u_tail_ratio=tail_ratio,
        pressure_iters_max=max((s.pressure_iters for s in samples), default=0),
        rhs_integral=rhs_integral,
        samples=samples,
        csv_path=csv_path,
        checkpoint_path=ckpt_path if write_outputs else "",
        final_state=state,
    )
    return report


def _run_eulerian(config: RunConfig, write_outputs: bool) -> RunReport:
    """Primitive-variable run: only the velocity-gradient columns are live."""
    grid = Grid(config.sizes, config.lengths, dealias=config.dealias)
    if config.checkpoint_in:
        state = read_checkpoint(config.checkpoint_in, dealias=config.dealias)
        if not isinstance(state, EulerState):
            raise ConfigError("checkpoint stores a flow map, not primitive variables")
        if not state.grid.same_as(grid):
            raise ConfigError("checkpoint grid does not match the configured grid")
    else:
        state = euler_from_flow(build_flow_state(grid, config.initial_data_spec()))
    n_steps = round((config.t_end - state.t) / config.dt)
    if n_steps < 1:
        raise ConfigError("t_end must exceed the initial time by at least dt")
    sample_every = round(config.cadence / config.dt)
    stepper = EulerianStepper(grid, config.dt)
    nan = float("nan")
    samples = []
    aborted = False
    abort_reason = ""

    def record(st):
        gu = gradient_values(st.u.spec, grid)
        sup = float(np.sqrt(np.sum(gu**2, axis=(0, 1))).max())
        samples.append(
            RunSample(
                t=st.t,
                energy=(nan,) * 7,
                energy_total=nan,
                dissipation=(nan,) * 5,
                dissipation_total=nan,
                corrected=nan,
                diss_terms=(nan,) * 5,
                rhs1=nan,
                rhs2=nan,
                det_drift=nan,
                grad_u_sup=sup,
                pressure_iters=0,
                contraction=nan,
                norm_grad_yt_h2=nan,
                norm_grad_d1yt_h1=nan,
            )
        )

    out_dir = config.output_dir or "."
    if write_outputs:
        os.makedirs(out_dir, exist_ok=True)
    ckpt_path = os.path.join(out_dir, "state_final.ckpt")
    try:
        for i in range(n_steps):
            if i % sample_every == 0:
                record(state)
            state = stepper.step(state)
        record(state)
    except (RuntimeError, FloatingPointError) as exc:
        aborted = True
        abort_reason = f"{type(exc).__name__}: {exc}"
        ckpt_path = os.path.join(out_dir, "state_abort.ckpt")
    times = np.array([s.t for s in samples])
    gul1 = grad_u_linf_time_integral(times, [s.grad_u_sup for s in samples])
    for s, g in zip(samples, gul1):
        s.grad_u_l1t = float(g)
    csv_path = ""
    if write_outputs:
        state.p = stepper.pressure_of(state)
        write_checkpoint(ckpt_path, state)
        csv_path = os.path.join(out_dir, "diagnostics.csv")
        write_diagnostics(csv_path, samples)
    return RunReport(
        config=config,
        aborted=aborted,
        abort_reason=abort_reason,
        t_final=state.t,
        script_e0=nan,
        script_e_final=nan,
        script_e_ratio=nan,
        det_drift_max=nan,
        ledger_pass_rate=nan,
        ledger_checked=0,
        decay_fits={},
        grad_u_l1t=float(gul1[-1]) if len(gul1) else nan,
        grad_u_tail_ratio=nan,
        pressure_iters_max=0,
        samples=samples,
        csv_path=csv_path,
        checkpoint_path=ckpt_path if write_outputs else "",
        final_state=state,
    )


@dataclass
class CompareReport:
    t_compare: float
    dt: float
    max_u_discrepancy: float
    max_b_discrepancy: float
    det_drift: float

    def summary(self) -> str:
        return (
            f"T_c={self.t_compare:g} dt={self.dt:g}: "
            f"max|u(X) - Yt| = {self.max_u_discrepancy:.6e}, "
            f"max|b(X) - (e1 + d1Y)| = {self.max_b_discrepancy:.6e}, "
            f"det drift {self.det_drift:.3e}"
        )


def compare_formulations(config: RunConfig) -> CompareReport:
    """Advance the flow-map and primitive solvers from identical data and
    measure the pushforward discrepancy at t_compare."""
    if config.solver != "both":
        raise ConfigError("compare_formulations requires solver = both")
    grid = Grid(config.sizes, config.lengths, dealias=config.dealias)
    flow = build_flow_state(grid, config.initial_data_spec())
    euler = euler_from_flow(flow)
    n_steps = round(config.t_compare / config.dt)
    if abs(n_steps * config.dt - config.t_compare) > 1e-9:
        raise ConfigError("t_compare must be a multiple of dt")
    lstep = LagrangianStepper(
        grid, config.dt, config.pressure_tol, config.pressure_max_iter
    )
    estep = EulerianStepper(grid, config.dt)
    for _ in range(n_steps):
        flow = lstep.step(flow).state
        euler = estep.step(euler)

    stride = tuple(max(1, n // 8) for n in grid.sizes)
    sel = tuple(slice(None, None, st) for st in stride)
    coords = np.stack(np.broadcast_arrays(*grid.coords))
    x_pts = (coords + flow.Y.values)[(slice(None),) + sel].reshape(grid.dim, -1).T
    u_eval = make_trig_evaluator(euler.u)
    b_eval = make_trig_evaluator(euler.b)
    u_at_x = u_eval(x_pts)
    b_at_x = b_eval(x_pts)
    yt_samples = flow.Yt.values[(slice(None),) + sel].reshape(grid.dim, -1)
    d1y = gradient_values(flow.Y.spec, grid)[:, 0]
    b_lagr = d1y[(slice(None),) + sel].reshape(grid.dim, -1)
    b_lagr = b_lagr.copy()
    b_lagr[0] += 1.0
    det = determinant_values(gradient_values(flow.Y.spec, grid))
    return CompareReport(
        t_compare=config.t_compare,
        dt=config.dt,
        max_u_discrepancy=float(np.abs(u_at_x - yt_samples).max()),
        max_b_discrepancy=float(np.abs(b_at_x - b_lagr).max()),
        det_drift=float(np.abs(det - 1.0).max()),
    )


def scaling_run(config: RunConfig, amplitude: float):
    """One run of the nonlinear-bound scaling study at a raw data amplitude.

    Returns (script_e_final, integrated forcing pairings); used with
    energy.nonlinear_scaling_study.
    """
    from .initial_data import default_spec, scaled_spec

    base = default_spec(config.dimension, epsilon0=None)
    spec = scaled_spec(base, amplitude)
    grid = Grid(config.sizes, config.lengths, dealias=config.dealias)
    state = build_flow_state(grid, spec)
    cfg = config
    ev = EnergyEvaluator(grid)
    stepper = LagrangianStepper(grid, cfg.dt, cfg.pressure_tol, cfg.pressure_max_iter)
    n_steps = round(cfg.t_end / cfg.dt)
    sample_every = round(cfg.cadence / cfg.dt)
    samples = []
    for i in range(n_steps):
        force = stepper.force(state)
        if i % sample_every == 0:
            samples.append(_record_sample(ev, state, force))
        state = stepper.step(state, force=force).state
    samples.append(_record_sample(ev, state, stepper.force(state)))
    _, rhs_integral = _postprocess(samples)
    return samples[-1].script_e, rhs_integral
