"""Explicit time integration of ``df/dt = tension(f)`` with verdicts.

The integrator is explicit Euler (midpoint optionally) under the parabolic
stability bound; the velocity monitor identifies ``fdot`` with the tension
of the current state, so the sup-speed monotone is independent of the step
size.  Runs terminate as one of

    converged   sup |tau|_g below tolerance (a discrete harmonic map)
    circling    speed plateaus above tolerance while the measure-averaged
                lift advances linearly in time
    blowup      energy density explodes or the update produces non-finite
                values
    chart_exit  some node left the target chart
    budget      step budget exhausted first
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .diagnostics import (MonitorRecord, energy_density, gradient_growth,
                          homotopy_distance_field, parallel_section_residual,
                          speed_squared_field, total_energy)
from .fields import MapField
from .geometry import DomainStructure
from .operators import Workspace, invariant_measure, scalar_operator_matrix, tension

log = logging.getLogger(__name__)

VERDICT_KINDS = ("converged", "circling", "blowup", "chart_exit", "budget")


class FlowInvariantError(RuntimeError):
    """A run violated the sup-speed monotone beyond tolerance."""


@dataclass
class FlowConfig:
    tol_converged: float = 1e-6
    tol_plateau: float = 1e-3
    blowup_factor: float = 100.0
    max_steps: int = 200_000
    record_every: int = 20
    window: int = 200
    r2_threshold: float = 0.999
    scheme: str = "euler"          # euler | rk2
    dt_safety: float = 0.9
    dt_override: float | None = None
    settle_time: float = 0.0       # extra flow time after circling fires
    monotone_tol: float = 1e-8
    compute_measure: bool = True   # invariant measure for drift monitors
    enforce_monotone: bool | None = None  # None: auto (nonpositive curvature, stable dt)


@dataclass
class FlowState:
    field: MapField
    t: float = 0.0
    dt: float = 0.0
    step_count: int = 0
    sup_speed: float = np.inf      # g(fdot, fdot) at the current state
    history: list[MonitorRecord] = dc_field(default_factory=list)


@dataclass(frozen=True)
class RunVerdict:
    kind: str
    evidence: dict

    def __post_init__(self):
        if self.kind not in VERDICT_KINDS:
            raise ValueError(f"unknown verdict kind {self.kind!r}")


def stable_dt(domain: DomainStructure, field: MapField, safety: float = 0.9) -> float:
    """Parabolic stability bound

        dt = safety / max_x [ 2 sum_j A^jj/h_j^2 + sum_j |B^j|/h_j + margin ]

    where the nonlinear margin estimates the reaction rate of the quadratic
    Christoffel term from the current gradients and the target curvature
    bound (zero on flat targets).
    """
    rate = domain.stencil.explicit_rate
    margin = 0.0
    if not field.target.is_flat:
        eta = energy_density(domain, field)
        margin = field.target.curvature_bound * 2.0 * float(eta.max())
    return safety / (rate + margin)


def _finite(values: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(values)))


def step(domain: DomainStructure, state: FlowState, scheme: str = "euler",
         ws: Workspace | None = None, monotone_tol: float | None = 1e-8) -> FlowState:
    """Advance one explicit step; mutates and returns the state.

    Raises FlowInvariantError on a sup-speed monotone violation (only on
    targets of nonpositive curvature); non-finite updates and chart exits
    are left to the caller's verdict logic (the update is applied as-is).
    """
    f = state.field
    ws = ws or Workspace(domain, f.ncomp)
    tau = tension(domain, f, ws=ws, check_chart=False)
    s = float(speed_squared_field(domain, f, tau).max())
    enforce = monotone_tol is not None and f.target.curvature_sign in (
        "flat", "nonpositive", "negative")
    if enforce and np.isfinite(state.sup_speed):
        if s - state.sup_speed > monotone_tol * (1.0 + s):
            raise FlowInvariantError(
                f"sup-speed increased at step {state.step_count}: "
                f"{state.sup_speed!r} -> {s!r}")
    state.sup_speed = s

    if scheme == "euler":
        f.values += state.dt * tau
    elif scheme == "rk2":
        mid = MapField(f.grid, f.target, f.values + 0.5 * state.dt * tau, f.winding)
        tau_mid = tension(domain, mid, check_chart=False)
        f.values += state.dt * tau_mid
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    state.t += state.dt
    state.step_count += 1
    return state


def _linear_fit(ts: np.ndarray, ys: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and R^2 (R^2 = 0 for a degenerate spread)."""
    t0 = ts - ts.mean()
    denom = float(t0 @ t0)
    if denom == 0.0:
        return 0.0, 0.0
    slope = float(t0 @ (ys - ys.mean())) / denom
    resid = ys - ys.mean() - slope * t0
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    if ss_tot <= 0.0:
        return slope, 0.0
    return slope, 1.0 - float((resid ** 2).sum()) / ss_tot


def _drift_regression(history: list[MonitorRecord], window: int):
    """Per-component slope and R^2 of the measure-averaged lifts."""
    recs = history[-window:]
    ts = np.array([r.t for r in recs])
    ncomp = len(recs[0].mu_avg)
    out = []
    for c in range(ncomp):
        ys = np.array([r.mu_avg[c] for r in recs])
        out.append(_linear_fit(ts, ys))
    return out


def run(domain: DomainStructure, initial: MapField, config: FlowConfig | None = None
        ) -> tuple[FlowState, RunVerdict]:
    """Integrate the parabolic system from ``initial`` until a verdict.

    Monitors are sampled every ``record_every`` steps (and at step 0); the
    homotopy class (winding data) is checked on every record and the
    sup-speed monotone on every accepted step.
    """
    config = config or FlowConfig()
    target = initial.target
    f = initial.copy()
    f0 = initial.copy()
    if not f.in_chart():
        raise ValueError("initial map is outside the target chart")

    ws = Workspace(domain, f.ncomp)
    dt = config.dt_override if config.dt_override is not None else stable_dt(
        domain, f, safety=config.dt_safety)
    state = FlowState(field=f, dt=dt)
    winding0 = f.winding.copy()

    periodic = list(target.periodic_components)[:2]
    mu = None
    if config.compute_measure and periodic:
        mu = invariant_measure(scalar_operator_matrix(domain))

    t_start = time.perf_counter()
    initial_sup_eta = None
    circling_fired_at = None
    circling_evidence = None
    verdict = None

    def record(tau: np.ndarray, sup_speed: float) -> MonitorRecord:
        grads = None
        eta = energy_density(domain, state.field)
        hom = homotopy_distance_field(state.field, f0)
        drift = [0.0, 0.0]
        mu_avg = []
        if mu is not None:
            for slot, c in enumerate(periodic):
                drift[slot] = float((mu * tau[c]).sum())
                mu_avg.append(float((mu * state.field.values[c]).sum()))
        pres = 0.0
        if sup_speed > 1e-28:
            vhat = tau / np.sqrt(sup_speed)
            pres = parallel_section_residual(domain, state.field, vhat)
        rec = MonitorRecord(
            t=state.t, sup_speed=sup_speed,
            total_energy=total_energy(domain, eta), sup_eta=float(eta.max()),
            homotopy_sup=float(hom.max()), drift=(drift[0], drift[1]),
            parallel_residual=pres, mu_avg=tuple(mu_avg),
        )
        state.history.append(rec)
        return rec

    # the sup-speed monotone holds for the flow itself; enforcing it only
    # makes sense for nonpositive curvature and a step size within the
    # stability bound (deliberately unstable runs are detector demos)
    if config.enforce_monotone is not None:
        enforce_monotone = config.enforce_monotone
    else:
        enforce_monotone = (
            target.curvature_sign in ("flat", "nonpositive", "negative")
            and config.dt_safety <= 1.0 and config.dt_override is None)

    while True:
        tau = tension(domain, state.field, ws=ws, check_chart=False)
        speed_sq = speed_squared_field(domain, state.field, tau)
        s = float(speed_sq.max()) if _finite(speed_sq) else float("inf")

        if enforce_monotone and np.isfinite(state.sup_speed) and np.isfinite(s):
            if s - state.sup_speed > config.monotone_tol * (1.0 + s):
                raise FlowInvariantError(
                    f"sup-speed increased at step {state.step_count}: "
                    f"{state.sup_speed!r} -> {s!r}")
        state.sup_speed = s

        at_record = state.step_count % config.record_every == 0
        if at_record and np.isfinite(s):
            if not np.array_equal(state.field.winding, winding0):
                raise FlowInvariantError("winding data changed during the run")
            rec = record(tau, s)
            if initial_sup_eta is None:
                initial_sup_eta = max(rec.sup_eta, 1e-300)
            if rec.sup_eta > config.blowup_factor * initial_sup_eta:
                verdict = RunVerdict("blowup", {
                    "sup_eta": rec.sup_eta, "initial_sup_eta": initial_sup_eta})
                break

            if circling_fired_at is None and len(state.history) >= config.window and mu is not None:
                recs = state.history[-config.window:]
                speeds = np.array([r.sup_speed for r in recs])
                mean = speeds.mean()
                plateau = mean > 0 and (speeds.max() - speeds.min()) / mean < config.tol_plateau
                above = np.sqrt(mean) > 10.0 * config.tol_converged
                if plateau and above:
                    fits = _drift_regression(state.history, config.window)
                    best = max(range(len(fits)), key=lambda c: abs(fits[c][0]))
                    slope, r2 = fits[best]
                    if r2 > config.r2_threshold and abs(slope) > config.tol_converged:
                        circling_fired_at = state.t
                        circling_evidence = {
                            "detected_t": state.t, "component": periodic[best]}

        if not np.isfinite(s) or not _finite(state.field.values):
            verdict = RunVerdict("blowup", {"step": state.step_count, "non_finite": True})
            break
        if not state.field.in_chart():
            verdict = RunVerdict("chart_exit", {"step": state.step_count, "t": state.t})
            break
        if np.sqrt(s) < config.tol_converged:
            verdict = RunVerdict("converged", {})
            break
        if circling_fired_at is not None and state.t >= circling_fired_at + config.settle_time:
            verdict = RunVerdict("circling", dict(circling_evidence))
            break
        if state.step_count >= config.max_steps:
            verdict = RunVerdict("budget", {"max_steps": config.max_steps})
            break

        if config.scheme == "euler":
            state.field.values += state.dt * tau
        else:
            mid = MapField(state.field.grid, target,
                           state.field.values + 0.5 * state.dt * tau, state.field.winding)
            tau_mid = tension(domain, mid, check_chart=False)
            state.field.values += state.dt * tau_mid
        state.t += state.dt
        state.step_count += 1

    # final record and evidence
    tau = tension(domain, state.field, ws=ws, check_chart=False) \
        if _finite(state.field.values) else np.zeros_like(state.field.values)
    if _finite(tau) and state.field.in_chart():
        s = float(speed_squared_field(domain, state.field, tau).max())
        if not state.history or state.history[-1].t < state.t:
            record(tau, s)
    wall = time.perf_counter() - t_start

    evidence = dict(verdict.evidence)
    last = state.history[-1] if state.history else None
    evidence["final_sup_tension"] = float(np.sqrt(max(last.sup_speed, 0.0))) if last else float("nan")
    evidence["steps"] = state.step_count
    evidence["t_final"] = state.t
    evidence["dt"] = state.dt
    evidence["wall_time_s"] = wall
    if last is not None:
        evidence["homotopy_sup"] = last.homotopy_sup
        evidence["parallel_residual"] = last.parallel_residual
        evidence["total_energy"] = last.total_energy
    if mu is not None and len(state.history) >= 3:
        win = min(len(state.history), config.window)
        fits = _drift_regression(state.history, win)
        evidence["drift_empirical"] = [fit[0] for fit in fits]
        evidence["drift_r2"] = [fit[1] for fit in fits]
    alpha, beta = gradient_growth(state.history)
    evidence["df_alpha"] = alpha
    evidence["df_beta"] = beta
    return state, RunVerdict(verdict.kind, evidence)
