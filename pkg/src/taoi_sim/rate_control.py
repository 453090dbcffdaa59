"""Broadcast-interval controllers.

Each vehicle runs one controller that revisits its interval once per
measurement interval. Three policies:

* ``fixed_rate``: the 10 Hz reference, interval pinned to 100 ms.
* ``aoi_rate_update``: trend follower on the vehicle's average AoI. If the
  last action improved the metric, repeat it; if it degraded it, flip it;
  tie keeps the interval. A congestion override fires first, and after the
  action the interval is nudged a fraction toward the neighborhood mean so
  intervals do not drift apart without cause.
* ``taoi_rate_update``: same trend follower driven by the tracked-age
  metric, with structural short-cuts evaluated in order: congestion
  backs off, an unraised own flag freezes, an empty risky-neighbor set
  relaxes. Only when none of those apply does the metric comparison run.

All comparisons use a small epsilon so float noise does not masquerade as
a trend.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional


class Action(enum.Enum):
    INCR = "incr"
    DECR = "decr"
    SAME = "same"

    @property
    def complement(self) -> "Action":
        if self is Action.INCR:
            return Action.DECR
        if self is Action.DECR:
            return Action.INCR
        return Action.SAME


@dataclass
class ControllerState:
    """Per-vehicle controller memory.

    ``omega`` holds the last directional probe (INCR or DECR); the trend
    rule repeats or flips it, so it must always be one of the two values
    the complement is defined on. The fresh-memory conventions differ by
    metric. The age average always exists, and a node with no history
    treats its first measurement as a degradation (zero prior), which
    flips the opening INCR lean into a DECR probe: one definite opening
    move, honest comparisons from then on. The gated tracked-age value is
    episodic; there is no meaningful zero-age episode to compare the
    first one against, so its memory starts empty and the first
    comparison keeps the interval.
    """

    delta: float = 0.1            # s, current broadcast interval
    delta_min: float = 0.02       # s
    delta_max: float = 1.0        # s
    beta: float = 1.1             # multiplicative step, > 1
    t_mi: float = 1.0             # s, measurement interval
    te_threshold: float = 0.5     # m, self-TE riskiness threshold
    eps_cmp: float = 1e-9         # s, metric comparison tolerance
    spread_lambda: float = 0.25   # AoI-policy pull toward the neighborhood mean
    omega: Action = Action.INCR
    prev_delta: float = 0.1
    prev_taoi: Optional[float] = None
    prev_aoi: float = 0.0
    riskiness_flag: int = 1      # raised until the first self-assessment:
                                 # nobody can track a vehicle never heard from

    def __post_init__(self):
        if self.beta <= 1.0:
            raise ValueError(f"beta must exceed 1, got {self.beta}")
        if not (0 < self.delta_min <= self.delta <= self.delta_max):
            raise ValueError(
                f"interval {self.delta} outside [{self.delta_min}, {self.delta_max}]")


def clamp_interval(delta: float, state: ControllerState) -> float:
    return min(max(delta, state.delta_min), state.delta_max)


def assess_self_risk(self_te: float, state: ControllerState) -> int:
    """Raise the own riskiness flag when the vehicle's motion drifted at
    least the threshold from its constant-velocity prediction. The boundary
    counts as risky."""
    if self_te < 0:
        raise ValueError(f"negative self tracking error: {self_te}")
    state.riskiness_flag = 1 if self_te >= state.te_threshold else 0
    return state.riskiness_flag


def _apply(state: ControllerState, action: Action) -> float:
    prev = state.delta
    if action is Action.INCR:
        nd = prev * state.beta
    elif action is Action.DECR:
        nd = prev / state.beta
    else:
        nd = prev
    state.prev_delta = prev
    state.delta = clamp_interval(nd, state)
    if action is not Action.SAME:
        # omega carries the last directional probe only; SAME has no
        # complement, so recording it would dead-end the trend rule.
        state.omega = action
    return state.delta


def _trend(state: ControllerState, current: float, previous) -> Action:
    if previous is None:
        return Action.SAME               # first episode, nothing to compare
    if current < previous - state.eps_cmp:
        return state.omega               # improvement: repeat the last action
    if current > previous + state.eps_cmp:
        return state.omega.complement    # degradation: flip it
    return Action.SAME


def fixed_rate(state: ControllerState) -> tuple[float, Action]:
    """10 Hz reference: interval pinned to 100 ms regardless of metrics."""
    state.prev_delta = state.delta
    state.delta = 0.1
    return state.delta, Action.SAME


def taoi_rate_update(state: ControllerState, taoi_v, aoi_v, delta_avg,
                     risky_neighbor_count: int) -> tuple[float, Action]:
    """One tracked-age control step. Branches in precedence order:

    1. congestion (vehicle AoI above twice the neighborhood mean interval)
       backs the rate off, terminally;
    2. an unraised own flag keeps the interval (the vehicle is easy to
       track, its age does not bother anyone's risk picture);
    3. no risky neighbors: relax toward faster broadcasting;
    4. otherwise follow the TAoI trend against the previous value.

    ``taoi_v`` may be None when branch 2 or 3 decides first; it is never
    read in that case. The previous-metric memory updates whenever a
    value is supplied.
    """
    if aoi_v is not None and delta_avg is not None and aoi_v > 2.0 * delta_avg:
        action = Action.INCR
    elif state.riskiness_flag == 0:
        action = Action.SAME
    elif risky_neighbor_count == 0:
        action = Action.DECR
    else:
        action = _trend(state, taoi_v, state.prev_taoi)
    delta = _apply(state, action)
    if taoi_v is not None:
        state.prev_taoi = taoi_v
    return delta, action


def aoi_rate_update(state: ControllerState, aoi_v, prev_aoi, delta_avg
                    ) -> tuple[float, Action]:
    """One AoI-driven control step (the flag-blind baseline).

    With no neighbors there is nothing to measure: the interval and all
    memory stay untouched. Congestion backs off first; otherwise the AoI
    trend decides. After the action the interval is pulled spread_lambda
    of the way toward the neighborhood mean interval, then clamped.
    """
    if aoi_v is None:
        return state.delta, Action.SAME
    if delta_avg is not None and aoi_v > 2.0 * delta_avg:
        action = Action.INCR
    else:
        action = _trend(state, aoi_v, prev_aoi)
    delta = _apply(state, action)
    if delta_avg is not None:
        delta = clamp_interval(
            delta + state.spread_lambda * (delta_avg - delta), state)
        state.delta = delta
    state.prev_aoi = aoi_v
    return delta, action
