"""Convergence diagnostics computed from the aggregate optimizer state.

Four scalar health measures plus the stationarity norm:

* global estimation error -- squared norm of the network-mean gap between
  the gradient estimators and the exact local gradients at each agent's own
  iterate;
* local estimation error -- mean squared per-agent gap (always at least the
  global one, by convexity of the squared norm);
* consensus error -- squared spread of the iterates plus eta^2 times the
  squared spread of the trackers around their network means;
* Lyapunov value -- f(mean iterate) + (eta/p) * (global + local errors)
  + consensus error / (m * eta), the potential whose expected decrease
  drives convergence.

All exact gradients used here are diagnostics and are never charged to the
run's oracle counters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .objectives import FiniteSumObjective

if TYPE_CHECKING:  # pragma: no cover - annotations only
    from .optimizer import AggregateState, RunConfig

__all__ = [
    "TelemetryRecord",
    "CSV_HEADER",
    "global_estimation_error",
    "local_estimation_error",
    "consensus_error",
    "lyapunov",
    "record",
    "format_csv_row",
]

CSV_HEADER = "t,y_t,k_t,f_bar,grad_norm,u_t,v_t,c_t,phi_t,ifo_cum,comm_cum"


@dataclass(frozen=True)
class TelemetryRecord:
    """Per-iteration diagnostics row.

    ``y_t``/``k_t`` are the refresh flag and round count of the step taken
    from iteration t; the counters are the cumulative cost of reaching it.
    """

    t: int
    y_t: int
    k_t: int
    f_bar: float
    grad_norm: float
    u_t: float
    v_t: float
    c_t: float
    phi_t: float
    ifo_cum: int
    comm_cum: int


def _estimator_gap(state: "AggregateState", obj: FiniteSumObjective) -> np.ndarray:
    return state.g - obj.grad_rows(state.x)


def global_estimation_error(state: "AggregateState", obj: FiniteSumObjective) -> float:
    """Squared norm of the mean estimator error across agents."""
    mean_gap = _estimator_gap(state, obj).mean(axis=0)
    return float(mean_gap @ mean_gap)


def local_estimation_error(state: "AggregateState", obj: FiniteSumObjective) -> float:
    """Mean squared per-agent estimator error (realized, not an expectation)."""
    gap = _estimator_gap(state, obj)
    return float(np.sum(gap * gap)) / state.g.shape[0]


def consensus_error(state: "AggregateState", cfg: "RunConfig") -> float:
    """Squared deviation of iterates and (eta-weighted) trackers from their means."""
    dev_x = state.x - state.x.mean(axis=0)
    dev_s = state.s - state.s.mean(axis=0)
    return float(np.sum(dev_x * dev_x) + cfg.eta**2 * np.sum(dev_s * dev_s))


def lyapunov(state: "AggregateState", obj: FiniteSumObjective, cfg: "RunConfig") -> float:
    """f at the mean iterate plus the weighted error and consensus penalties."""
    if cfg.eta <= 0.0:
        raise ValueError("the Lyapunov value is undefined for a zero stepsize")
    x_bar = state.x.mean(axis=0)
    u = global_estimation_error(state, obj)
    v = local_estimation_error(state, obj)
    c = consensus_error(state, cfg)
    return (
        obj.global_value(x_bar)
        + (cfg.eta / cfg.p) * (u + v)
        + c / (state.x.shape[0] * cfg.eta)
    )


def record(
    state: "AggregateState",
    obj: FiniteSumObjective,
    cfg: "RunConfig",
    y_t: int,
    k_t: int,
) -> TelemetryRecord:
    """Full telemetry row for the given state (shares the exact-gradient pass)."""
    m = state.x.shape[0]
    gap = _estimator_gap(state, obj)
    mean_gap = gap.mean(axis=0)
    u = float(mean_gap @ mean_gap)
    v = float(np.sum(gap * gap)) / m
    c = consensus_error(state, cfg)
    x_bar = state.x.mean(axis=0)
    f_bar = obj.global_value(x_bar)
    grad_norm = float(np.linalg.norm(obj.global_grad(x_bar)))
    phi = f_bar + (cfg.eta / cfg.p) * (u + v) + c / (m * cfg.eta) if cfg.eta > 0.0 else float("nan")
    return TelemetryRecord(
        t=state.t,
        y_t=int(y_t),
        k_t=int(k_t),
        f_bar=f_bar,
        grad_norm=grad_norm,
        u_t=u,
        v_t=v,
        c_t=c,
        phi_t=phi,
        ifo_cum=state.ifo_count,
        comm_cum=state.comm_rounds,
    )


def format_csv_row(rec: TelemetryRecord) -> str:
    """Stable text row matching CSV_HEADER; floats use shortest round-trip repr."""
    return (
        f"{rec.t},{rec.y_t},{rec.k_t},{rec.f_bar!r},{rec.grad_norm!r},"
        f"{rec.u_t!r},{rec.v_t!r},{rec.c_t!r},{rec.phi_t!r},{rec.ifo_cum},{rec.comm_cum}"
    )
