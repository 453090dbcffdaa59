"""Kinematic safety metrics.

Positions are meters, speeds m/s, headings radians (0 along +x, counter
clockwise). A receiver extrapolates each neighbor's last broadcast state
under a constant-velocity assumption; the tracking error is the Euclidean
gap between that dead-reckoned estimate and ground truth. Collision risk
is scored through a time-to-collision style margin built from tracking
error and relative speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import UndefinedValueError


@dataclass(frozen=True)
class Bsm:
    """One basic safety message: the sender's kinematic snapshot plus the
    piggybacked riskiness flag and the sender's current broadcast interval."""

    sender: int
    gen_time: float        # s
    x: float               # m
    y: float               # m
    speed: float           # m/s
    heading: float         # rad
    riskiness_flag: int = 0
    interval: float = 0.1  # s
    size: int = 1000       # bytes

    def velocity(self) -> tuple[float, float]:
        return (self.speed * math.cos(self.heading),
                self.speed * math.sin(self.heading))


@dataclass(frozen=True)
class SafetyParams:
    """Constants of the risk metric and the self-assessment threshold."""

    t_react: float = 1.0           # s, driver reaction time
    decel: float = 4.6             # m/s^2, comfortable braking deceleration
    rel_speed_floor: float = 0.1   # m/s, keeps the TTC margin finite
    te_threshold: float = 0.5      # m, self-TE level that flags a vehicle risky


def estimate_position(bsm: Bsm, t: float) -> tuple[float, float]:
    """Constant-velocity extrapolation of a received snapshot to time t.

    Raises ValueError for t earlier than the snapshot; estimates never
    run backwards in time.
    """
    if t < bsm.gen_time:
        raise ValueError(
            f"cannot extrapolate backwards: t={t} < gen_time={bsm.gen_time}")
    dt = t - bsm.gen_time
    return (bsm.x + bsm.speed * math.cos(bsm.heading) * dt,
            bsm.y + bsm.speed * math.sin(bsm.heading) * dt)


def tracking_error(truth, estimate) -> float:
    """Euclidean distance between ground truth and an extrapolated position.

    ``truth`` is anything with .x and .y attributes; ``estimate`` is an
    (x, y) pair as returned by estimate_position.
    """
    return math.hypot(truth.x - estimate[0], truth.y - estimate[1])


def average_tracking_error(samples) -> float:
    """Mean of uniformly ticked tracking-error samples.

    Accepts plain floats or (timestamp, value) pairs; timestamps are not
    weighted because the sampling cadence is uniform.
    """
    vals = [s[1] if isinstance(s, tuple) else s for s in samples]
    if not vals:
        raise UndefinedValueError("average tracking error over empty window")
    return sum(vals) / len(vals)


def self_tracking_error(own_now, own_prev, t_mi: float) -> float:
    """How far the vehicle's own motion drifted from the constant-velocity
    prediction neighbors would have made from its state one measurement
    interval ago. States must belong to the same vehicle."""
    if own_now.id != own_prev.id:
        raise ValueError(
            f"self-TE across different vehicles: {own_now.id} vs {own_prev.id}")
    ex = own_prev.x + own_prev.speed * math.cos(own_prev.heading) * t_mi
    ey = own_prev.y + own_prev.speed * math.sin(own_prev.heading) * t_mi
    return math.hypot(own_now.x - ex, own_now.y - ey)


def delta_ttc(te: float, rel_speed: float, params: SafetyParams) -> float:
    """Time-to-collision margin consumed by the tracking error.

    Relative speed is floored so that near-zero closing speeds do not
    blow the ratio up to infinity.
    """
    if te < 0:
        raise ValueError(f"negative tracking error: {te}")
    return te / max(abs(rel_speed), params.rel_speed_floor)


def ttc_threshold(receiver_speed: float, params: SafetyParams) -> float:
    """Tolerable TTC distortion: reaction time plus the time needed to brake
    from the receiver's current speed."""
    return params.t_react + receiver_speed / params.decel


def collision_risk_indicator(dttc: float, threshold: float) -> int:
    """1 when the TTC distortion strictly exceeds the tolerance, else 0."""
    return 1 if dttc > threshold else 0


@dataclass
class PdrCounters:
    """Packet-delivery bookkeeping, binned by transmitter-receiver distance.

    Opportunities count every in-range receiver of every transmission;
    successes count the subset that decoded the frame.
    """

    bin_width: float = 25.0
    transmissions: dict = field(default_factory=dict)  # sender id -> count
    successes: dict = field(default_factory=dict)      # bin index -> count
    opportunities: dict = field(default_factory=dict)  # bin index -> count

    def bin_index(self, distance: float) -> int:
        if distance < 0:
            raise ValueError(f"negative distance: {distance}")
        return int(distance // self.bin_width)

    def overall_pdr(self) -> float:
        opp = sum(self.opportunities.values())
        if opp == 0:
            raise UndefinedValueError("PDR with zero opportunities")
        return sum(self.successes.values()) / opp

    def bin_rows(self) -> list[tuple[float, float, int, int]]:
        """Sorted (bin_lo, bin_hi, successes, opportunities) rows."""
        rows = []
        for idx in sorted(self.opportunities):
            lo = idx * self.bin_width
            rows.append((lo, lo + self.bin_width,
                         self.successes.get(idx, 0), self.opportunities[idx]))
        return rows


def pdr_record(sender, in_range_receivers, successes, counters: PdrCounters,
               distances=None) -> PdrCounters:
    """Fold one transmission into the PDR counters.

    ``in_range_receivers`` are receiver states within application range;
    ``successes`` is the set of receiver ids that decoded the frame and must
    be a subset of the in-range ids. ``distances`` optionally maps receiver
    id to transmitter distance (meters); when absent distances are computed
    from the coordinates.
    """
    ids = {r.id for r in in_range_receivers}
    extra = set(successes) - ids
    if extra:
        raise ValueError(f"successes outside the in-range set: {sorted(extra)}")
    counters.transmissions[sender.id] = counters.transmissions.get(sender.id, 0) + 1
    for r in in_range_receivers:
        if distances is not None:
            d = distances[r.id]
        else:
            d = math.hypot(r.x - sender.x, r.y - sender.y)
        idx = counters.bin_index(d)
        counters.opportunities[idx] = counters.opportunities.get(idx, 0) + 1
        if r.id in successes:
            counters.successes[idx] = counters.successes.get(idx, 0) + 1
    return counters
