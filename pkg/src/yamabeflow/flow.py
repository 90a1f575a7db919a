"""Explicit time integration of the prescribed-curvature conformal flow.

The flow is integrated in the conformal factor ``u`` with classical RK4
under a CFL-style stability cap.  Positivity is enforced by step rejection
(halve dt and retry), never by clipping, so the comparison-principle
diagnostics see the genuine scheme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import DiagnosticsRecord
from .errors import PositivityCollapseError
from .grid import ScalarField, _fsum, require_same_grid
from .operators import (
    Background,
    _curvature_values,
    energy,
    gradient_squared,
    require_positive,
)

__all__ = [
    "FlowState",
    "FlowConfig",
    "RunCarry",
    "Trajectory",
    "velocity",
    "stable_dt",
    "step",
    "run",
]


@dataclass(frozen=True)
class FlowState:
    u: ScalarField
    t: float
    step: int
    dt_last: float


@dataclass(frozen=True)
class FlowConfig:
    cfl_fraction: float = 0.8
    t_max: float = 10.0
    residual_stop: float = 1e-6
    blowup_ceiling: float = 1e6
    record_every: int = 10
    lp_orders: tuple[float, ...] | None = None
    fixed_dt: float | None = None
    max_steps: int | None = None

    def __post_init__(self):
        if not 0.0 < self.cfl_fraction <= 1.0:
            raise ValueError(f"cfl_fraction must be in (0, 1], got {self.cfl_fraction}")
        for name in ("t_max", "residual_stop", "blowup_ceiling"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")
        if self.lp_orders is not None and any(p < 1.0 for p in self.lp_orders):
            raise ValueError(f"lp orders must all be >= 1, got {self.lp_orders}")
        if self.fixed_dt is not None and self.fixed_dt <= 0.0:
            raise ValueError(f"fixed_dt must be positive, got {self.fixed_dt}")

    def resolve_orders(self, n: int) -> tuple[float, ...]:
        if self.lp_orders is not None:
            return tuple(float(p) for p in self.lp_orders)
        return (2.0, n / 2.0, n * n / (2.0 * (n - 2.0)))


@dataclass
class RunCarry:
    """Scalar loop state that must survive a checkpoint/resume split."""

    dissipation_cum: float = 0.0
    records_written: int = 0
    last_record_step: int = -1


@dataclass
class Trajectory:
    n: int
    records: list[DiagnosticsRecord]
    step_t: list[float]
    step_dt: list[float]
    step_energy: list[float]
    step_min_u: list[float]
    step_max_u: list[float]
    final: FlowState
    outcome: str
    certificate: object | None = None


def default_lp_orders(n: int) -> tuple[float, ...]:
    return FlowConfig().resolve_orders(n)


def _velocity_values(bg: Background, uv: np.ndarray) -> np.ndarray:
    rg = _curvature_values(bg, uv)
    return -0.25 * (bg.n - 2) * (rg - bg.f.values) * uv


def velocity(bg: Background, u: ScalarField) -> ScalarField:
    """Pointwise flow velocity ``-((n-2)/4) (R_g - f) u``."""
    require_same_grid(bg, u)
    require_positive(u)
    return ScalarField(u.grid, _velocity_values(bg, u.values))


def stable_dt(bg: Background, u: ScalarField, cfl_fraction: float) -> float:
    """Explicit-scheme stability cap for the linearized diffusion and reaction.

    Diffusion coefficient ``D(u) = ((n-2)/4) c_n u^(1-N)`` caps the step at
    ``cfl * (sum_i 2/h_i^2)^-1 / max D``; the reaction rate
    ``((n-2)/4)|R_g - f|`` further caps it at half its inverse.
    """
    require_same_grid(bg, u)
    require_positive(u)
    kappa = 0.25 * (bg.n - 2)
    d_max = kappa * bg.c_n * u.min() ** (1.0 - bg.big_n)
    inv_h2 = sum(2.0 / (h * h) for h in bg.grid.spacings)
    dt = cfl_fraction / (inv_h2 * d_max)
    rate = kappa * float(np.abs(_curvature_values(bg, u.values) - bg.f.values).max())
    if rate > 0.0:
        dt = min(dt, 0.5 / rate)
    return dt


def _admissible(arr: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(arr))) and bool(np.all(arr > 0.0))


def _try_rk4(bg: Background, uv: np.ndarray, dt: float) -> np.ndarray | None:
    k1 = _velocity_values(bg, uv)
    s2 = uv + 0.5 * dt * k1
    if not _admissible(s2):
        return None
    k2 = _velocity_values(bg, s2)
    s3 = uv + 0.5 * dt * k2
    if not _admissible(s3):
        return None
    k3 = _velocity_values(bg, s3)
    s4 = uv + dt * k3
    if not _admissible(s4):
        return None
    k4 = _velocity_values(bg, s4)
    out = uv + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not _admissible(out):
        return None
    return out


def step(bg: Background, state: FlowState, dt: float) -> FlowState:
    """One RK4 step; rejects and halves dt (up to 40 times) on lost positivity."""
    require_same_grid(bg, state.u)
    require_positive(state.u)
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    uv = state.u.values
    for _ in range(41):
        out = _try_rk4(bg, uv, dt)
        if out is not None:
            return FlowState(ScalarField(bg.grid, out), state.t + dt, state.step + 1, dt)
        dt *= 0.5
    raise PositivityCollapseError(
        f"positivity collapse at t={state.t:g}, step {state.step}", state
    )


class _Stats:
    __slots__ = ("energy", "min_u", "max_u", "volume_g", "residual_sup", "residual_lp", "sq")

    def __init__(self, bg: Background, state: FlowState, orders):
        uv = state.u.values
        resid = _curvature_values(bg, uv) - bg.f.values
        weight = uv ** (bg.big_n + 1.0)
        vol = bg.grid.cell_volume
        self.energy = energy(bg, state.u)
        self.min_u = float(uv.min())
        self.max_u = float(uv.max())
        self.volume_g = _fsum(weight) * vol
        self.residual_sup = float(np.abs(resid).max())
        self.residual_lp = {
            p: _fsum(np.abs(resid) ** p * weight) * vol for p in orders
        }
        self.sq = _fsum(resid * resid * weight) * vol


def _make_record(state: FlowState, stats: _Stats, carry: RunCarry) -> DiagnosticsRecord:
    return DiagnosticsRecord(
        t=state.t,
        dt=state.dt_last,
        energy=stats.energy,
        min_u=stats.min_u,
        max_u=stats.max_u,
        volume_g=stats.volume_g,
        residual_sup=stats.residual_sup,
        residual_lp=dict(stats.residual_lp),
        dissipation_cum=carry.dissipation_cum,
    )


def run(
    bg: Background,
    u0: ScalarField,
    cfg: FlowConfig,
    certificate=None,
    start: FlowState | None = None,
    carry: RunCarry | None = None,
    on_record=None,
    checkpoint_every: int = 0,
    on_checkpoint=None,
) -> Trajectory:
    """Advance the flow to convergence, timeout, or blow-up, recording diagnostics.

    ``start``/``carry`` let a caller continue an interrupted run from a
    checkpoint; records, the trapezoid dissipation accumulator, and step
    sizes then continue bitwise as if the run had never stopped.
    """
    require_same_grid(bg, u0)
    require_positive(u0, "u0")
    orders = cfg.resolve_orders(bg.n)
    state = start if start is not None else FlowState(u0, 0.0, 0, 0.0)
    carry = carry if carry is not None else RunCarry()
    records: list[DiagnosticsRecord] = []
    step_t, step_dt, step_e, step_mn, step_mx = [], [], [], [], []

    stats = _Stats(bg, state, orders)
    outcome = None
    while True:
        step_t.append(state.t)
        step_dt.append(state.dt_last)
        step_e.append(stats.energy)
        step_mn.append(stats.min_u)
        step_mx.append(stats.max_u)

        due = state.step % cfg.record_every == 0 and state.step > carry.last_record_step
        if stats.residual_sup <= cfg.residual_stop:
            outcome = "converged"
        elif state.t >= cfg.t_max:
            outcome = "timeout"
        elif cfg.max_steps is not None and state.step >= cfg.max_steps:
            outcome = "timeout"
        elif stats.max_u >= cfg.blowup_ceiling:
            outcome = "blow-up"
        if due or (outcome is not None and state.step > carry.last_record_step):
            rec = _make_record(state, stats, carry)
            records.append(rec)
            carry.records_written += 1
            carry.last_record_step = state.step
            if on_record is not None:
                on_record(rec)
        if (
            checkpoint_every > 0
            and outcome is None
            and state.step > 0
            and state.step % checkpoint_every == 0
            and on_checkpoint is not None
        ):
            on_checkpoint(state, carry)
        if outcome is not None:
            break

        if cfg.fixed_dt is not None:
            dt = cfg.fixed_dt
        else:
            dt = stable_dt(bg, state.u, cfg.cfl_fraction)
            if state.t + dt > cfg.t_max:
                dt = cfg.t_max - state.t
        new_state = step(bg, state, dt)
        new_stats = _Stats(bg, new_state, orders)
        carry.dissipation_cum += 0.5 * (new_state.t - state.t) * (stats.sq + new_stats.sq)
        state, stats = new_state, new_stats

    return Trajectory(
        n=bg.n,
        records=records,
        step_t=step_t,
        step_dt=step_dt,
        step_energy=step_e,
        step_min_u=step_mn,
        step_max_u=step_mx,
        final=state,
        outcome=outcome,
        certificate=certificate,
    )
