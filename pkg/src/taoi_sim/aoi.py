"""Age-of-information accounting per ordered sender-receiver pair.

A receiver keeps one NeighborRecord per sender it has heard from. The age
of that link is the time since the generation of the freshest received
snapshot; it grows with unit slope between receptions and drops to the
in-flight delay on each reception. The record holds exact sawtooth areas
(trapezoids between bookkeeping events) plus a gated variant that only
accumulates while the relevant riskiness flag is raised.

Two accumulation styles coexist and are validated by different oracles:

* ``advance`` integrates the continuous sawtooth and is what the realistic
  channel mode uses.
* ``slot_sample`` adds right-endpoint step areas (the age at a slot
  boundary times the slot length), which is the discrete arithmetic of the
  idealized slotted channel abstraction.

Callers must never mix the two on one record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import UndefinedValueError


class NeighborRecord:
    """Per-(receiver, sender) reception state and area accumulators.

    The last snapshot is cached as flat floats (position, velocity
    components, generation time) so hot loops avoid attribute chains.
    """

    __slots__ = (
        "sender", "gen_time", "bx", "by", "bvx", "bvy",
        "neighbor_risky", "neighbor_interval",
        "first_seen", "last_seen", "cursor",
        "aoi_area_mi", "taoi_area_mi", "aoi_area_run", "taoi_area_run",
        "te_sum", "te_count",
    )

    def __init__(self, sender: int, gen_time: float, x: float, y: float,
                 vx: float, vy: float, risky: int, interval: float, now: float):
        self.sender = sender
        self.gen_time = gen_time
        self.bx = x
        self.by = y
        self.bvx = vx
        self.bvy = vy
        self.neighbor_risky = risky
        self.neighbor_interval = interval
        self.first_seen = now
        self.last_seen = now
        self.cursor = now
        self.aoi_area_mi = 0.0
        self.taoi_area_mi = 0.0
        self.aoi_area_run = 0.0
        self.taoi_area_run = 0.0
        self.te_sum = 0.0
        self.te_count = 0

    @property
    def last_reception_time(self) -> float:
        return self.last_seen

    @property
    def last_bsm(self):
        """Reconstructed view of the cached snapshot."""
        from .metrics import Bsm
        return Bsm(self.sender, self.gen_time, self.bx, self.by,
                   math.hypot(self.bvx, self.bvy),
                   math.atan2(self.bvy, self.bvx),
                   self.neighbor_risky, self.neighbor_interval)


def record_from_bsm(bsm, now: float) -> NeighborRecord:
    if bsm.gen_time > now:
        raise ValueError(f"snapshot from the future: gen={bsm.gen_time} > now={now}")
    vx, vy = bsm.velocity()
    return NeighborRecord(bsm.sender, bsm.gen_time, bsm.x, bsm.y, vx, vy,
                          bsm.riskiness_flag, bsm.interval, now)


def virtual_record(sender: int, x: float, y: float, risky: int,
                   interval: float) -> NeighborRecord:
    """Time-zero bootstrap record used by the idealized slotted mode: every
    pair starts with a perfectly fresh position snapshot carrying zero
    velocity, so the age at the origin is zero for all pairs."""
    return NeighborRecord(sender, 0.0, x, y, 0.0, 0.0, risky, interval, 0.0)


def instantaneous_aoi(record: NeighborRecord, t: float) -> float:
    """Age of the freshest snapshot at time t (unit slope since generation)."""
    if record is None:
        raise UndefinedValueError("no reception history for this pair")
    if t < record.gen_time:
        raise ValueError(f"t={t} precedes snapshot generation {record.gen_time}")
    return t - record.gen_time


def instantaneous_taoi(record: NeighborRecord, t: float, gate=None) -> float:
    """Flag-gated age: equals the age while the gate is raised, else 0.
    The gate defaults to the sender's piggybacked riskiness flag; passing
    an explicit gate supports the receiver-side reading."""
    if gate is None:
        gate = record.neighbor_risky
    return instantaneous_aoi(record, t) if gate else 0.0


def advance(record: NeighborRecord, t: float, gate: int) -> None:
    """Extend the exact sawtooth areas from the record's cursor to t.

    Valid only when no reception occurred inside (cursor, t]; receptions
    go through apply_reception which advances first. ``gate`` is the
    riskiness flag in force over the whole stretch.
    """
    if t < record.cursor:
        raise ValueError(f"cursor moved backwards: {t} < {record.cursor}")
    if t == record.cursor:
        return
    a0 = record.cursor - record.gen_time
    a1 = t - record.gen_time
    area = 0.5 * (a0 + a1) * (t - record.cursor)
    record.aoi_area_mi += area
    record.aoi_area_run += area
    if gate:
        record.taoi_area_mi += area
        record.taoi_area_run += area
    record.cursor = t


def swap_snapshot(record: NeighborRecord, bsm, now: float) -> None:
    """Replace the cached snapshot without touching the areas (the slotted
    mode accounts areas separately at slot boundaries)."""
    if bsm.gen_time > now:
        raise ValueError(f"snapshot from the future: gen={bsm.gen_time} > now={now}")
    vx, vy = bsm.velocity()
    record.gen_time = bsm.gen_time
    record.bx = bsm.x
    record.by = bsm.y
    record.bvx = vx
    record.bvy = vy
    record.neighbor_risky = bsm.riskiness_flag
    record.neighbor_interval = bsm.interval
    record.last_seen = now


def apply_reception(record: NeighborRecord, bsm, now: float, gate: int) -> None:
    """Continuous-mode reception: close the sawtooth up to now under the
    outgoing snapshot's gate, then install the new snapshot. The age right
    after the call is the in-flight delay now - bsm.gen_time."""
    advance(record, now, gate)
    swap_snapshot(record, bsm, now)


def slot_sample(record: NeighborRecord, t: float, slot: float, gate: int) -> float:
    """Right-endpoint step accounting for the idealized slotted mode: add
    age(t) * slot to the accumulators and return the sampled age. Callers
    invoke this after the slot's deliveries have been applied."""
    a = instantaneous_aoi(record, t)
    record.aoi_area_mi += a * slot
    record.aoi_area_run += a * slot
    if gate:
        record.taoi_area_mi += a * slot
        record.taoi_area_run += a * slot
    record.cursor = t
    return a


def time_average(area: float, window: float) -> float:
    """Time-average age over a window given the accumulated sawtooth area."""
    if window <= 0:
        raise UndefinedValueError(f"average over non-positive window: {window}")
    return area / window


def average_pairwise_aoi(record: NeighborRecord, window: float,
                         run: bool = False) -> float:
    """Average age of one link over the current measurement window, or over
    the whole run when ``run`` is set."""
    return time_average(record.aoi_area_run if run else record.aoi_area_mi,
                        window)


def vehicle_aoi(records, window: float) -> float:
    """Mean over the receiver's neighbor set of the pairwise average ages.

    Raises UndefinedValueError when the receiver has no neighbors; the
    caller decides what "undefined" means for control.
    """
    recs = list(records)
    if not recs:
        raise UndefinedValueError("vehicle AoI with no neighbors")
    return sum(average_pairwise_aoi(r, window) for r in recs) / len(recs)


def vehicle_taoi(records, window: float) -> tuple[float, bool]:
    """Mean gated age over the risky subset of the neighbor set.

    Returns (value, has_risky). With no risky neighbors the value is 0.0
    and the marker is False; controllers treat that case structurally
    rather than as a measured zero.
    """
    risky = [r for r in records if r.neighbor_risky]
    if not risky:
        return 0.0, False
    val = sum(time_average(r.taoi_area_mi, window) for r in risky) / len(risky)
    return val, True


def system_aoi(pair_averages, n_vehicles: int) -> float:
    """Network-wide mean over all ordered pairs: the pairwise averages are
    summed and divided by n(n-1), so pairs without history weigh zero."""
    if n_vehicles < 2:
        raise ValueError(f"need at least 2 vehicles, got {n_vehicles}")
    return sum(pair_averages) / (n_vehicles * (n_vehicles - 1))


@dataclass(frozen=True)
class AoiSnapshot:
    """Windowed AoI/TAoI aggregate: per ordered pair, per vehicle, system."""

    pairwise_aoi: dict
    pairwise_taoi: dict
    vehicle_aoi: dict
    vehicle_taoi: dict
    system_aoi: float
    system_taoi: float
    window: tuple


def aggregate_taoi(records_by_receiver: dict, window_start: float,
                   window_end: float, n_vehicles: int) -> AoiSnapshot:
    """Assemble a snapshot from per-receiver record maps over one window.

    ``records_by_receiver`` maps receiver id to {sender id: NeighborRecord}.
    Window areas must already be advanced to window_end by the caller.
    Per-vehicle TAoI of a receiver with no risky neighbors is reported as
    0.0 (the controller handles that case structurally, not numerically).
    """
    window = window_end - window_start
    if window <= 0:
        raise UndefinedValueError("empty aggregation window")
    pair_aoi, pair_taoi = {}, {}
    veh_aoi, veh_taoi = {}, {}
    for rid, recs in records_by_receiver.items():
        for sid, rec in recs.items():
            pair_aoi[(sid, rid)] = time_average(rec.aoi_area_mi, window)
            pair_taoi[(sid, rid)] = time_average(rec.taoi_area_mi, window)
        if recs:
            veh_aoi[rid] = vehicle_aoi(recs.values(), window)
            val, has = vehicle_taoi(recs.values(), window)
            veh_taoi[rid] = val if has else 0.0
    sys_aoi = system_aoi(pair_aoi.values(), n_vehicles)
    sys_taoi = system_aoi(pair_taoi.values(), n_vehicles)
    return AoiSnapshot(pair_aoi, pair_taoi, veh_aoi, veh_taoi,
                       sys_aoi, sys_taoi, (window_start, window_end))


def reset_window(record: NeighborRecord) -> None:
    record.aoi_area_mi = 0.0
    record.taoi_area_mi = 0.0


def mean_tracking_error(record: NeighborRecord) -> float:
    if record.te_count == 0:
        raise UndefinedValueError("no tracking-error samples for this pair")
    return record.te_sum / record.te_count


def sawtooth_area(reception_times, gen_times, t_end: float) -> float:
    """Exact area under one link's age sawtooth over [0, t_end].

    ``reception_times``/``gen_times`` are parallel, increasing sequences
    (reception i delivers the snapshot generated at gen_times[i] <=
    reception_times[i]); the link starts with a fresh snapshot at time 0.
    Used by tests as an independent closed-form route.
    """
    if len(reception_times) != len(gen_times):
        raise ValueError("reception/generation sequences differ in length")
    area = 0.0
    cursor, gen = 0.0, 0.0
    events = [*zip(reception_times, gen_times), (t_end, None)]
    for rx, g in events:
        if rx < cursor:
            raise ValueError("reception times must be increasing")
        if rx > t_end:
            break
        a0, a1 = cursor - gen, rx - gen
        area += 0.5 * (a0 + a1) * (rx - cursor)
        cursor = rx
        if g is not None:
            if g > rx:
                raise ValueError("snapshot generated after its reception")
            gen = g
    if cursor < t_end:
        a0, a1 = cursor - gen, t_end - gen
        area += 0.5 * (a0 + a1) * (t_end - cursor)
    return area
