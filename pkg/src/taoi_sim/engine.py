"""Discrete-event simulation core.

Time on the event queue is integer nanoseconds so mobility ticks,
measurement intervals and slot boundaries stay exactly aligned; metric
math converts to float seconds once at the call boundary. Ties at one
timestamp are broken by event-kind priority, then vehicle id: ground
truth moves first, finishing frames deliver before new generations look
at the medium, and measurement logic runs after everything that changes
the picture it measures.

Two channel modes share the loop. The realistic mode runs CSMA access,
airtime and fading per frame; the idealized slotted mode replaces all of
that with fixed-capacity slots at zero delay (the abstraction behind the
analytical toy example), where each slot boundary samples tracking error
before delivery and age after delivery as right-endpoint steps.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import aoi
from .channel import (ChannelConfig, ChannelTimeline, TransmissionEvent,
                      csma_access, delivery_outcome, tx_duration)
from .errors import ConfigError, TraceError
from .metrics import (Bsm, PdrCounters, SafetyParams, pdr_record,
                      self_tracking_error)
from .mobility import (KraussParams, RoadConfig, TrajectoryTable,
                       VehicleState, initial_states, krauss_step, load_trace,
                       write_trace)
from .rate_control import (Action, ControllerState, aoi_rate_update,
                           assess_self_risk, fixed_rate, taoi_rate_update)

logger = logging.getLogger("taoi_sim.engine")

NS = 10 ** 9

# event kinds in tie-break priority order at equal timestamps
EV_MOBILITY = 0
EV_SLOT = 1
EV_TX_END = 2
EV_GEN = 3
EV_TX_START = 4
EV_MEASUREMENT = 5
EV_END = 6

PROTOCOLS = ("fixed10hz", "aoi", "taoi")
CHANNEL_MODES = ("realistic", "idealized_slotted")
QUEUE_MODES = ("replace", "fcfs")
GATE_MODES = ("sender", "receiver")

# named RNG streams off the master seed
STREAM_INIT = 0
STREAM_MOBILITY = 1
STREAM_FADING = 2
STREAM_BACKOFF = 3


@dataclass
class SimConfig:
    vehicle_count: int = 150
    duration_s: float = 100.0
    seed: int = 0
    protocol: str = "taoi"
    channel_mode: str = "realistic"
    queue: str = "replace"
    taoi_gate: str = "sender"
    mobility_tick_s: float = 0.1
    neighbor_timeout_s: float = 5.0
    bsm_size_bytes: int = 1000
    # controller constants
    t_mi_s: float = 1.0
    beta: float = 1.1
    delta_init_s: float = 0.1
    delta_min_s: float = 0.02
    delta_max_s: float = 1.0
    eps_cmp_s: float = 1e-9
    spread_lambda: float = 0.25
    # idealized slotted channel
    slot_s: float = 0.1
    slot_capacity: int = 1
    forced_schedule: tuple | None = None
    # mobility source: built-in Krauss unless a trace is given
    trace_path: str | None = None
    dump_trace_path: str | None = None
    # reporting
    interval_bin_ms: float = 10.0
    collect_pair_tables: bool = False
    road: RoadConfig = field(default_factory=RoadConfig)
    krauss: KraussParams = field(default_factory=KraussParams)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    safety: SafetyParams = field(default_factory=SafetyParams)

    def validate(self) -> None:
        if self.vehicle_count < 2:
            raise ConfigError(
                f"vehicle_count must be at least 2, got {self.vehicle_count}")
        if self.duration_s < 0:
            raise ConfigError(f"duration_s must be >= 0, got {self.duration_s}")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, "
                              f"got {self.protocol!r}")
        if self.channel_mode not in CHANNEL_MODES:
            raise ConfigError(f"channel_mode must be one of {CHANNEL_MODES}, "
                              f"got {self.channel_mode!r}")
        if self.queue not in QUEUE_MODES:
            raise ConfigError(f"queue must be one of {QUEUE_MODES}, "
                              f"got {self.queue!r}")
        if self.taoi_gate not in GATE_MODES:
            raise ConfigError(f"taoi_gate must be one of {GATE_MODES}, "
                              f"got {self.taoi_gate!r}")
        if self.mobility_tick_s <= 0:
            raise ConfigError("mobility_tick_s must be positive")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        for name in ("t_mi_s", "slot_s"):
            val = getattr(self, name)
            if val <= 0:
                raise ConfigError(f"{name} must be positive, got {val}")
            ratio = val / self.mobility_tick_s
            if abs(ratio - round(ratio)) > 1e-9:
                raise ConfigError(
                    f"{name}={val} must be an integer multiple of "
                    f"mobility_tick_s={self.mobility_tick_s}")
        if not 0 < self.delta_min_s <= self.delta_init_s <= self.delta_max_s:
            raise ConfigError(
                f"need 0 < delta_min <= delta_init <= delta_max, got "
                f"{self.delta_min_s}, {self.delta_init_s}, {self.delta_max_s}")
        if self.beta <= 1.0:
            raise ConfigError(f"beta must exceed 1, got {self.beta}")
        if self.neighbor_timeout_s <= 0:
            raise ConfigError("neighbor_timeout_s must be positive")
        if self.slot_capacity < 1:
            raise ConfigError("slot_capacity must be at least 1")
        if self.forced_schedule is not None:
            if self.channel_mode != "idealized_slotted":
                raise ConfigError("forced_schedule requires idealized_slotted mode")
            for k, entry in enumerate(self.forced_schedule):
                if len(entry) > self.slot_capacity:
                    raise ConfigError(f"forced_schedule slot {k + 1} exceeds capacity")
                for v in entry:
                    if not 0 <= v < self.vehicle_count:
                        raise ConfigError(
                            f"forced_schedule slot {k + 1}: unknown vehicle {v}")


@dataclass
class RunReport:
    protocol: str
    n_vehicles: int
    seed: int
    duration_s: float
    system_aoi_s: float
    system_taoi_s: float
    collision_risk_count: int
    overall_pdr: float | None
    pdr_bins: list            # (bin_lo_m, bin_hi_m, successes, opportunities)
    interval_histogram: list  # (bin_lo_ms, count) over newly chosen intervals
    mean_interval_ms: float
    per_vehicle: list         # dict per vehicle, sorted by id
    counts: dict              # frame conservation: generated/dropped/sent/in_flight
    negative_gap_events: int
    timeseries: list          # (t, vehicle_id, delta_ms, flag, aoi_v, taoi_v)
    te_pairs: list            # (receiver_id, sender_id, mean_te_m, samples)
    pair_tables: dict | None  # per-slot toy tables (idealized, small N only)
    config: dict

    def json_dict(self, timeseries_path: str = "timeseries.csv",
                  te_pairs_path: str = "te_pairs.csv") -> dict:
        """Deterministic JSON view; bulky row data is referenced by relative
        path instead of being inlined."""
        d = {
            "protocol": self.protocol,
            "n_vehicles": self.n_vehicles,
            "seed": self.seed,
            "duration_s": self.duration_s,
            "system_aoi_s": self.system_aoi_s,
            "system_taoi_s": self.system_taoi_s,
            "collision_risk_count": self.collision_risk_count,
            "overall_pdr": self.overall_pdr,
            "pdr_bins": [list(b) for b in self.pdr_bins],
            "interval_histogram": [list(b) for b in self.interval_histogram],
            "mean_interval_ms": self.mean_interval_ms,
            "per_vehicle": self.per_vehicle,
            "counts": self.counts,
            "negative_gap_events": self.negative_gap_events,
            "timeseries_path": timeseries_path,
            "te_pairs_path": te_pairs_path,
            "config": self.config,
        }
        return d


class _Vehicle:
    """Per-vehicle runtime state owned by the event loop."""

    __slots__ = ("idx", "ctrl", "records", "mac_phase", "pending", "waiting",
                 "airing", "mi_prev", "generated", "dropped", "sent",
                 "risky_mis", "congested_mis", "mi_count", "delta_sum",
                 "pending_slots")

    IDLE, ACCESS, AIRING = 0, 1, 2

    def __init__(self, idx: int, ctrl: ControllerState):
        self.idx = idx
        self.ctrl = ctrl
        self.records: dict[int, aoi.NeighborRecord] = {}
        self.mac_phase = _Vehicle.IDLE
        self.pending = None      # payload committed to the next TxStart
        self.waiting = []        # frames queued behind the airing one
        self.airing = None       # TransmissionEvent on the air
        self.mi_prev = None      # own state at the previous MI boundary
        self.generated = 0
        self.dropped = 0
        self.sent = 0
        self.risky_mis = 0
        self.congested_mis = 0
        self.mi_count = 0
        self.delta_sum = 0.0
        self.pending_slots = 0   # idealized mode: slot requests outstanding


def _stream(seed: int, stream_id: int):
    return np.random.default_rng(np.random.SeedSequence([seed, stream_id]))


class Simulation:
    """One configured run. Build, call run(), read the RunReport."""

    def __init__(self, cfg: SimConfig):
        cfg.validate()
        self.cfg = cfg
        self.n = cfg.vehicle_count
        self.T_ns = round(cfg.duration_s * NS)
        self.tick_ns = round(cfg.mobility_tick_s * NS)
        self.t_mi_ns = round(cfg.t_mi_s * NS)
        self.slot_ns = round(cfg.slot_s * NS)
        self.idealized = cfg.channel_mode == "idealized_slotted"
        self.sender_gate = cfg.taoi_gate == "sender"

        self.init_rng = _stream(cfg.seed, STREAM_INIT)
        self.mob_rng = _stream(cfg.seed, STREAM_MOBILITY)
        self.fading_rng = _stream(cfg.seed, STREAM_FADING)
        self.backoff_rng = _stream(cfg.seed, STREAM_BACKOFF)

        self.trace: TrajectoryTable | None = None
        if cfg.trace_path is not None:
            self.trace = load_trace(cfg.trace_path)
            self._check_trace_coverage()
            self.states = [self.trace.state_at(i, 0.0) for i in range(self.n)]
        else:
            self.states = initial_states(cfg.road, cfg.krauss, self.n,
                                         self.init_rng)
        # generation phase jitter, drawn in id order for every mode so the
        # init stream stays aligned across protocol comparisons
        self.gen_phase_ns = [
            round(float(self.init_rng.uniform(0.0, cfg.delta_init_s)) * NS)
            for _ in range(self.n)]

        self.vehicles = [
            _Vehicle(i, ControllerState(
                delta=cfg.delta_init_s, delta_min=cfg.delta_min_s,
                delta_max=cfg.delta_max_s, beta=cfg.beta, t_mi=cfg.t_mi_s,
                te_threshold=cfg.safety.te_threshold, eps_cmp=cfg.eps_cmp_s,
                spread_lambda=cfg.spread_lambda, prev_delta=cfg.delta_init_s))
            for i in range(self.n)]
        for i, v in enumerate(self.vehicles):
            v.mi_prev = self.states[i]

        self.timeline = ChannelTimeline()
        self.active_txs: list[TransmissionEvent] = []
        self.tx_dur_s = tx_duration(cfg.bsm_size_bytes,
                                    cfg.channel.data_rate_mbps, cfg.channel)
        self.pdr = PdrCounters()
        self.risk_count = 0
        self.negative_gap_events = 0
        self.timeseries: list = []
        self.interval_hist: dict[int, int] = {}
        self.pair_areas: dict = {}   # (sender, receiver) -> [aoi, taoi, te_sum, te_n]
        self.trace_rows: list = []
        self.pair_tables = None

        # idealized slotted bookkeeping
        self.slot_load: dict[int, int] = {}
        self.slot_queue: dict[int, list] = {}
        if self.idealized:
            self._init_virtual_records()
            if cfg.collect_pair_tables:
                self.pair_tables = {
                    (s, r): {"aoi": [], "taoi": [], "te": [], "truth": [],
                             "estimate": []}
                    for s in range(self.n) for r in range(self.n) if s != r}

        # cached per-tick ground-truth arrays (filled by _refresh_arrays)
        self._xs = self._ys = self._vxs = self._vys = self._speeds = None
        self._dist = None
        self._arcs = self._prev_arcs = None
        self._lanes = self._prev_lanes = None
        self._last_tick_ns = 0
        self._refresh_arrays()
        if self.trace is None:
            self._arcs = [self.cfg.road.project(s.x, s.y, s.lane)
                          for s in self.states]
            self._lanes = [s.lane for s in self.states]

        self._heap: list = []
        self._seq = 0

    # ------------------------------------------------------------- setup

    def _check_trace_coverage(self) -> None:
        have = set(self.trace.vehicles())
        want = set(range(self.n))
        if have != want:
            raise ConfigError(
                f"trace vehicles {sorted(have)} do not match vehicle_count "
                f"{self.n} (need ids 0..{self.n - 1})")
        T = self.cfg.duration_s
        for vid in range(self.n):
            lo, hi = self.trace.span(vid)
            if lo > 1e-9 or hi < T - 1e-9:
                raise TraceError(
                    f"vehicle {vid} trace span [{lo}, {hi}] does not cover "
                    f"[0, {T}]")

    def _init_virtual_records(self) -> None:
        """Idealized mode bootstrap: every ordered pair starts with a fresh
        zero-velocity snapshot at t0 (all ages start at 0). The bootstrap
        flag is raised, matching the fresh controller state: a sender with
        no history is unproven, so its age counts as tracked age."""
        flag0 = 1
        for v in self.vehicles:
            for u in range(self.n):
                if u == v.idx:
                    continue
                s = self.states[u]
                v.records[u] = aoi.virtual_record(
                    u, s.x, s.y, flag0, self.cfg.delta_init_s)

    def _push(self, t_ns: int, kind: int, vid: int = -1) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t_ns, kind, vid, self._seq))

    def _refresh_arrays(self) -> None:
        xs = np.array([s.x for s in self.states])
        ys = np.array([s.y for s in self.states])
        speeds = np.array([s.speed for s in self.states])
        headings = np.array([s.heading for s in self.states])
        self._dist = np.hypot(xs[:, None] - xs[None, :],
                              ys[:, None] - ys[None, :]).tolist()
        self._xs = xs.tolist()
        self._ys = ys.tolist()
        self._speeds = speeds.tolist()
        self._vxs = (speeds * np.cos(headings)).tolist()
        self._vys = (speeds * np.sin(headings)).tolist()

    # ------------------------------------------------------------ running

    def run(self) -> RunReport:
        cfg = self.cfg
        if self.T_ns == 0:
            return self._finalize()
        if cfg.dump_trace_path is not None:
            self._record_trace_rows(0.0)
        self._push(self.tick_ns, EV_MOBILITY)
        self._push(self.t_mi_ns, EV_MEASUREMENT)
        self._push(self.T_ns, EV_END)
        if self.idealized:
            self._push(self.slot_ns, EV_SLOT)
            if cfg.forced_schedule is None:
                for i in range(self.n):
                    self._push(min(self.gen_phase_ns[i], self.T_ns), EV_GEN, i)
        else:
            for i in range(self.n):
                self._push(min(self.gen_phase_ns[i], self.T_ns), EV_GEN, i)

        heap = self._heap
        while heap:
            t_ns, kind, vid, _ = heapq.heappop(heap)
            if kind == EV_MOBILITY:
                self._on_tick(t_ns)
            elif kind == EV_SLOT:
                self._on_slot(t_ns)
            elif kind == EV_TX_END:
                self._on_tx_end(t_ns, vid)
            elif kind == EV_GEN:
                self._on_generation(t_ns, vid)
            elif kind == EV_TX_START:
                self._on_tx_start(t_ns, vid)
            elif kind == EV_MEASUREMENT:
                self._on_measurement(t_ns)
            else:
                break
        return self._finalize()

    # ------------------------------------------------------- ground truth

    def _on_tick(self, t_ns: int) -> None:
        t_s = t_ns / NS
        self._prev_arcs, self._prev_lanes = self._arcs, self._lanes
        if self.trace is not None:
            self.states = [self.trace.state_at(i, t_s) for i in range(self.n)]
        else:
            self.states = krauss_step(self.states, self.cfg.krauss,
                                      self.cfg.road, self.cfg.mobility_tick_s,
                                      self.mob_rng)
            self._arcs = [self.cfg.road.project(s.x, s.y, s.lane)
                          for s in self.states]
            self._lanes = [s.lane for s in self.states]
            self._check_gaps()
        self._refresh_arrays()
        self._last_tick_ns = t_ns
        if self.cfg.dump_trace_path is not None:
            self._record_trace_rows(t_s)
        if not self.idealized:
            self._sample_te_and_risk(t_s)
            self.timeline.prune(t_s - 0.05)
        if t_ns + self.tick_ns <= self.T_ns:
            self._push(t_ns + self.tick_ns, EV_MOBILITY)

    def _check_gaps(self) -> None:
        """Krauss safety audit: no same-lane follower may have closed past
        its leader over the tick (unwrapped new gap stays non-negative)."""
        prev_arcs, prev_lanes = self._prev_arcs, self._prev_lanes
        by_lane: dict[int, list] = {}
        for i in range(self.n):
            if prev_lanes[i] == self._lanes[i]:
                by_lane.setdefault(self._lanes[i], []).append(i)
        for lane, members in by_lane.items():
            if len(members) < 2:
                continue
            P = self.cfg.road.perimeter(lane)
            members.sort(key=lambda i: prev_arcs[i])
            for a, b in zip(members, members[1:] + members[:1]):
                gap_old = (prev_arcs[b] - prev_arcs[a]) % P
                disp_a = (self._arcs[a] - prev_arcs[a]) % P
                disp_b = (self._arcs[b] - prev_arcs[b]) % P
                if gap_old + disp_b - disp_a < 0:
                    self.negative_gap_events += 1

    def _record_trace_rows(self, t_s: float) -> None:
        for s in self.states:
            self.trace_rows.append((t_s, s.id, s.x, s.y, s.speed, s.heading,
                                    s.lane))

    def _sample_te_and_risk(self, t_s: float) -> None:
        """Per-tick tracking error for every live record, collision risk
        for in-range pairs, and reception-timeout eviction."""
        cfg = self.cfg
        evict_before = t_s - cfg.neighbor_timeout_s
        range_m = cfg.channel.range_m
        floor = cfg.safety.rel_speed_floor
        t_react = cfg.safety.t_react
        decel = cfg.safety.decel
        xs, ys = self._xs, self._ys
        vxs, vys = self._vxs, self._vys
        dist = self._dist
        hypot = math.hypot
        risk = 0
        for v in self.vehicles:
            recs = v.records
            if not recs:
                continue
            i = v.idx
            drow = dist[i]
            vx_i, vy_i = vxs[i], vys[i]
            thr = t_react + self._speeds[i] / decel
            dead = None
            for u, rec in recs.items():
                if rec.last_seen < evict_before:
                    if dead is None:
                        dead = [u]
                    else:
                        dead.append(u)
                    continue
                dtg = t_s - rec.gen_time
                te = hypot(xs[u] - (rec.bx + rec.bvx * dtg),
                           ys[u] - (rec.by + rec.bvy * dtg))
                rec.te_sum += te
                rec.te_count += 1
                if drow[u] <= range_m:
                    rel = hypot(vxs[u] - vx_i, vys[u] - vy_i)
                    if te / (rel if rel > floor else floor) > thr:
                        risk += 1
            if dead:
                for u in dead:
                    self._evict(v, u)
        self.risk_count += risk

    def _gate(self, v: _Vehicle, rec: aoi.NeighborRecord) -> int:
        return rec.neighbor_risky if self.sender_gate else v.ctrl.riskiness_flag

    def _evict(self, v: _Vehicle, u: int) -> None:
        rec = v.records.pop(u)
        end = rec.last_seen + self.cfg.neighbor_timeout_s
        aoi.advance(rec, end, self._gate(v, rec))
        self._retire(u, v.idx, rec)

    def _retire(self, sender: int, receiver: int, rec) -> None:
        acc = self.pair_areas.setdefault((sender, receiver), [0.0, 0.0, 0.0, 0])
        acc[0] += rec.aoi_area_run
        acc[1] += rec.taoi_area_run
        acc[2] += rec.te_sum
        acc[3] += rec.te_count

    # ------------------------------------------------------ realistic MAC

    def _snapshot_bsm(self, idx: int, t_ns: int) -> Bsm:
        """Exact ground truth at the (sub-tick) generation instant."""
        t_s = t_ns / NS
        if self.trace is not None:
            s = self.trace.state_at(idx, t_s)
            x, y, speed, heading = s.x, s.y, s.speed, s.heading
        else:
            dt = (t_ns - self._last_tick_ns) / NS
            s = self.states[idx]
            speed, heading = s.speed, s.heading
            if dt == 0.0:
                x, y = s.x, s.y
            else:
                arc = (self._arcs[idx] + speed * dt) % self.cfg.road.perimeter(s.lane)
                x, y, heading = self.cfg.road.lane_pose(arc, s.lane)
        ctrl = self.vehicles[idx].ctrl
        return Bsm(idx, t_s, x, y, speed, heading, ctrl.riskiness_flag,
                   ctrl.delta, self.cfg.bsm_size_bytes)

    def _on_generation(self, t_ns: int, idx: int) -> None:
        v = self.vehicles[idx]
        v.generated += 1
        if self.idealized:
            # payload is snapshotted at slot time, so only the request boards
            self._enqueue_slot_request(v, t_ns)
            nxt = t_ns + round(v.ctrl.delta * NS)
            if nxt <= self.T_ns:
                self._push(nxt, EV_GEN, idx)
            return
        bsm = self._snapshot_bsm(idx, t_ns)
        if v.mac_phase == _Vehicle.IDLE:
            v.pending = bsm
            self._begin_access(v, t_ns)
        elif v.mac_phase == _Vehicle.ACCESS:
            if self.cfg.queue == "replace":
                # frame not on the air yet: swap in the fresher payload,
                # keep the already-won medium grant
                v.pending = bsm
                v.dropped += 1
            else:
                v.waiting.append(bsm)
        else:  # AIRING
            if self.cfg.queue == "replace":
                if v.waiting:
                    v.waiting[0] = bsm
                    v.dropped += 1
                else:
                    v.waiting.append(bsm)
            else:
                v.waiting.append(bsm)
        nxt = t_ns + round(v.ctrl.delta * NS)
        if nxt <= self.T_ns:
            self._push(nxt, EV_GEN, idx)

    def _begin_access(self, v: _Vehicle, t_ns: int) -> None:
        v.mac_phase = _Vehicle.ACCESS
        start_s = csma_access(v.idx, t_ns / NS, self.timeline,
                              self.backoff_rng, self.cfg.channel)
        self.timeline.commit(start_s, start_s + self.tx_dur_s)
        self._push(round(start_s * NS), EV_TX_START, v.idx)

    def _on_tx_start(self, t_ns: int, idx: int) -> None:
        v = self.vehicles[idx]
        tx = TransmissionEvent(idx, t_ns / NS, self.tx_dur_s, v.pending)
        v.pending = None
        v.airing = tx
        v.mac_phase = _Vehicle.AIRING
        self.active_txs.append(tx)
        self._push(t_ns + round(self.tx_dur_s * NS), EV_TX_END, idx)

    def _on_tx_end(self, t_ns: int, idx: int) -> None:
        t_s = t_ns / NS
        v = self.vehicles[idx]
        tx = v.airing
        v.airing = None
        v.sent += 1
        cfg = self.cfg
        drow = self._dist[idx]
        cutoff = cfg.channel.max_reception_range_m
        candidates = [self.states[j] for j in range(self.n)
                      if j != idx and drow[j] <= cutoff]
        concurrent = [c for c in self.active_txs
                      if c is not tx and c.start < tx.end and c.end > tx.start]
        got = delivery_outcome(tx, candidates, concurrent, self.fading_rng,
                               cfg.channel)
        for j in sorted(got):
            self.on_bsm_reception(self.vehicles[j], tx.bsm, t_s)
        in_range = [s for s in candidates if drow[s.id] <= cfg.channel.range_m]
        if in_range:
            pdr_record(self.states[idx], in_range,
                       got & {s.id for s in in_range}, self.pdr,
                       distances={s.id: drow[s.id] for s in in_range})
        else:
            self.pdr.transmissions[idx] = self.pdr.transmissions.get(idx, 0) + 1
        self.active_txs = [c for c in self.active_txs if c.end > t_s]
        if v.waiting:
            v.pending = v.waiting.pop(0)
            self._begin_access(v, t_ns)
        else:
            v.mac_phase = _Vehicle.IDLE

    def on_bsm_reception(self, v: _Vehicle, bsm: Bsm, t_s: float):
        """Fold one decoded BSM into the receiver's pair record: close the
        age sawtooth under the outgoing flag, reset it to the in-flight
        delay, refresh flag and interval."""
        rec = v.records.get(bsm.sender)
        if rec is None:
            rec = aoi.record_from_bsm(bsm, t_s)
            v.records[bsm.sender] = rec
        else:
            aoi.apply_reception(rec, bsm, t_s, self._gate(v, rec))
        return rec

    # -------------------------------------------------- idealized channel

    def _enqueue_slot_request(self, v: _Vehicle, t_ns: int) -> None:
        """Assign the generation to the first strictly later slot with
        spare capacity (first committed wins)."""
        if self.cfg.queue == "replace" and v.pending_slots > 0:
            # an un-aired request is already boarded; the fresher payload
            # would be identical at slot time, so the duplicate is dropped
            v.dropped += 1
            return
        k = t_ns // self.slot_ns + 1
        while self.slot_load.get(k, 0) >= self.cfg.slot_capacity:
            k += 1
        if k * self.slot_ns > self.T_ns:
            v.dropped += 1  # no slot left inside the horizon
            return
        self.slot_load[k] = self.slot_load.get(k, 0) + 1
        self.slot_queue.setdefault(k, []).append(v.idx)
        v.pending_slots += 1

    def _on_slot(self, t_ns: int) -> None:
        t_s = t_ns / NS
        k = t_ns // self.slot_ns
        slot_s = self.cfg.slot_s
        tables = self.pair_tables
        # phase 1: tracking error against pre-delivery snapshots
        xs, ys = self._xs, self._ys
        hypot = math.hypot
        for v in self.vehicles:
            for u, rec in v.records.items():
                dtg = t_s - rec.gen_time
                ex = rec.bx + rec.bvx * dtg
                ey = rec.by + rec.bvy * dtg
                te = hypot(xs[u] - ex, ys[u] - ey)
                rec.te_sum += te
                rec.te_count += 1
                if tables is not None:
                    row = tables[(u, v.idx)]
                    row["te"].append(te)
                    row["truth"].append((xs[u], ys[u]))
                    row["estimate"].append((ex, ey))
        # phase 2: zero-delay delivery
        if self.cfg.forced_schedule is not None:
            sched = self.cfg.forced_schedule
            txs = tuple(sched[k - 1]) if k - 1 < len(sched) else ()
            for idx in txs:
                self.vehicles[idx].generated += 1
        else:
            txs = tuple(sorted(self.slot_queue.pop(k, ())))
        for idx in txs:
            v = self.vehicles[idx]
            bsm = self._snapshot_bsm(idx, t_ns)
            v.sent += 1
            if self.cfg.forced_schedule is None:
                v.pending_slots -= 1
            for r in self.vehicles:
                if r.idx == idx:
                    continue
                # snapshot swap only: the step accounting in phase 3 owns
                # every slot's area contribution
                aoi.swap_snapshot(r.records[idx], bsm, t_s)
        # phase 3: post-delivery right-endpoint age samples
        for v in self.vehicles:
            for u, rec in v.records.items():
                gate = self._gate(v, rec)
                a = aoi.slot_sample(rec, t_s, slot_s, gate)
                if tables is not None:
                    row = tables[(u, v.idx)]
                    row["aoi"].append(a)
                    row["taoi"].append(a if gate else 0.0)
        if t_ns + self.slot_ns <= self.T_ns:
            self._push(t_ns + self.slot_ns, EV_SLOT)

    # --------------------------------------------------- measurement loop

    def _on_measurement(self, t_ns: int) -> None:
        t_s = t_ns / NS
        for v in self.vehicles:
            self.measurement_tick(v, t_s)
        if t_ns + self.t_mi_ns <= self.T_ns:
            self._push(t_ns + self.t_mi_ns, EV_MEASUREMENT)

    def measurement_tick(self, v: _Vehicle, t_s: float) -> tuple[int, float]:
        """One vehicle's MI boundary: self-risk assessment, windowed AoI and
        TAoI, the protocol's rate update, accumulator reset."""
        cfg = self.cfg
        t_mi = cfg.t_mi_s
        # close the elapsed window under the flags that were in force
        if not self.idealized:
            for rec in v.records.values():
                aoi.advance(rec, t_s, self._gate(v, rec))
        own_now = self.states[v.idx]
        self_te = self_tracking_error(own_now, v.mi_prev, t_mi)
        flag = assess_self_risk(self_te, v.ctrl)
        v.risky_mis += flag
        v.mi_prev = own_now

        # the measurement population is every neighbor actually heard this
        # window; records gone silent stay around for tracking-error
        # bookkeeping but say nothing about the current local picture
        recs = v.records
        w_start = t_s - t_mi
        # cold start: the first boundary closes a window nobody broadcast
        # into from its start, so every windowed metric is structurally
        # partial; flags are still assessed, windows still reset, but the
        # controllers hold and metric memories stay unprimed
        first_boundary = t_s <= t_mi + 1e-9
        active = [] if first_boundary else [
            (u, r) for u, r in recs.items() if r.last_seen >= w_start]
        if active:
            inv = 1.0 / t_mi
            aoi_v = sum(r.aoi_area_mi for _, r in active) * inv / len(active)
            delta_avg = sum(r.neighbor_interval
                            for _, r in active) / len(active)
            # a neighbor counts as risky for this window if its gate was
            # open at any point in it, which is exactly when it contributed
            # tracked-age area; the latest flag alone would drop area from
            # senders whose flag fell mid-window and dilute with senders
            # flagged only at the very end. The census is clipped to the
            # risk-assessment range: radio reach decides who is heard, but
            # a hazard two hundred meters beyond it has no claim on this
            # vehicle's rate decision, and the tracked-age average keeps
            # the same basis so both speak about the same vehicles.
            drow = self._dist[v.idx]
            scope = cfg.channel.range_m
            risky = [r for u, r in active
                     if r.taoi_area_mi > 0.0 and drow[u] <= scope]
            if risky:
                taoi_v = sum(r.taoi_area_mi for r in risky) * inv / len(risky)
            else:
                taoi_v = None
            if aoi_v > 2.0 * delta_avg:
                v.congested_mis += 1
        else:
            aoi_v = delta_avg = taoi_v = None
            risky = []

        if first_boundary:
            delta = v.ctrl.delta
        elif cfg.protocol == "fixed10hz":
            delta, _ = fixed_rate(v.ctrl)
        elif cfg.protocol == "aoi":
            delta, _ = aoi_rate_update(v.ctrl, aoi_v, v.ctrl.prev_aoi,
                                       delta_avg)
        else:
            delta, _ = taoi_rate_update(v.ctrl, taoi_v, aoi_v, delta_avg,
                                        len(risky))
        for rec in recs.values():
            aoi.reset_window(rec)

        v.mi_count += 1
        v.delta_sum += delta
        bin_lo = int(delta * 1000.0 // cfg.interval_bin_ms)
        self.interval_hist[bin_lo] = self.interval_hist.get(bin_lo, 0) + 1
        self.timeseries.append((t_s, v.idx, delta * 1000.0, flag, aoi_v,
                                taoi_v))
        return flag, delta

    # ----------------------------------------------------------- wrap-up

    def _finalize(self) -> RunReport:
        cfg = self.cfg
        T = cfg.duration_s
        if T > 0:
            t_end = self.T_ns / NS
            for v in self.vehicles:
                for u, rec in v.records.items():
                    if not self.idealized:
                        aoi.advance(rec, t_end, self._gate(v, rec))
                    self._retire(u, v.idx, rec)
        denom = self.n * (self.n - 1)
        if T > 0 and self.pair_areas:
            sys_aoi = sum(a[0] for a in self.pair_areas.values()) / T / denom
            sys_taoi = sum(a[1] for a in self.pair_areas.values()) / T / denom
        else:
            sys_aoi = 0.0
            sys_taoi = 0.0
        te_pairs = [
            (rcv, snd, acc[2] / acc[3], acc[3])
            for (snd, rcv), acc in sorted(
                self.pair_areas.items(), key=lambda kv: (kv[0][1], kv[0][0]))
            if acc[3] > 0]
        try:
            overall_pdr = self.pdr.overall_pdr()
        except Exception:
            overall_pdr = None
        generated = sum(v.generated for v in self.vehicles)
        dropped = sum(v.dropped for v in self.vehicles)
        sent = sum(v.sent for v in self.vehicles)
        in_flight = sum(
            (1 if v.pending is not None else 0) + (1 if v.airing else 0)
            + len(v.waiting) + v.pending_slots
            for v in self.vehicles)
        if generated != dropped + sent + in_flight:
            raise AssertionError(
                f"frame conservation violated: {generated} generated vs "
                f"{dropped} dropped + {sent} sent + {in_flight} in flight")
        mi_total = sum(v.mi_count for v in self.vehicles)
        mean_interval_ms = (
            sum(v.delta_sum for v in self.vehicles) / mi_total * 1000.0
            if mi_total else cfg.delta_init_s * 1000.0)
        per_vehicle = [
            {"vehicle_id": v.idx,
             "mean_interval_ms": (v.delta_sum / v.mi_count * 1000.0
                                  if v.mi_count else cfg.delta_init_s * 1000.0),
             "risky_mis": v.risky_mis,
             "congested_mis": v.congested_mis,
             "mi_count": v.mi_count,
             "generated": v.generated}
            for v in self.vehicles]
        if cfg.dump_trace_path is not None and self.trace_rows:
            write_trace(cfg.dump_trace_path, self.trace_rows)
        report = RunReport(
            protocol=cfg.protocol,
            n_vehicles=self.n,
            seed=cfg.seed,
            duration_s=T,
            system_aoi_s=sys_aoi,
            system_taoi_s=sys_taoi,
            collision_risk_count=self.risk_count,
            overall_pdr=overall_pdr,
            pdr_bins=[(lo, hi, s, o) for lo, hi, s, o in self.pdr.bin_rows()],
            interval_histogram=sorted(
                (b * cfg.interval_bin_ms, c)
                for b, c in self.interval_hist.items()),
            mean_interval_ms=mean_interval_ms,
            per_vehicle=per_vehicle,
            counts={"generated": generated, "dropped": dropped, "sent": sent,
                    "in_flight": in_flight},
            negative_gap_events=self.negative_gap_events,
            timeseries=self.timeseries,
            te_pairs=te_pairs,
            pair_tables=self.pair_tables,
            config=_config_echo(cfg),
        )
        logger.info(
            "run done: protocol=%s n=%d seed=%d aoi=%.4f taoi=%.4f risk=%d",
            cfg.protocol, self.n, cfg.seed, sys_aoi, sys_taoi, self.risk_count)
        return report


def _config_echo(cfg: SimConfig) -> dict:
    d = asdict(cfg)
    if d.get("forced_schedule") is not None:
        d["forced_schedule"] = [list(e) for e in d["forced_schedule"]]
    ch = d.get("channel", {})
    if "nakagami_bins" in ch:
        ch["nakagami_bins"] = [list(b) for b in ch["nakagami_bins"]]
    return d


def run_simulation(config: SimConfig) -> RunReport:
    """Execute one configured run and return its aggregated report."""
    return Simulation(config).run()
