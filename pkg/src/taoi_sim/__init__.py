"""Discrete-event V2V broadcast simulator with age-aware rate control.

Vehicles on a closed multi-lane loop broadcast basic safety messages over
a shared 802.11p-style channel. Three interval policies are provided: a
fixed 10 Hz reference, an Age-of-Information feedback controller, and a
tracked-age (TAoI) controller that spends channel time only on vehicles
whose motion is actually hard to extrapolate. An exact-arithmetic oracle
replays tiny slotted scenarios and brute-forces optimal schedules for
cross-checking the event loop.
"""

from .aoi import (NeighborRecord, aggregate_taoi, average_pairwise_aoi,
                  instantaneous_aoi, instantaneous_taoi, system_aoi,
                  vehicle_aoi, vehicle_taoi)
from .channel import (ChannelConfig, TransmissionEvent, csma_access,
                      delivery_outcome, nakagami_fading_draw, path_loss_db,
                      rx_power_dbm, tx_duration)
from .engine import RunReport, SimConfig, Simulation, run_simulation
from .errors import ConfigError, SimError, TraceError, UndefinedValueError
from .metrics import (Bsm, PdrCounters, SafetyParams, average_tracking_error,
                      collision_risk_indicator, delta_ttc, estimate_position,
                      pdr_record, self_tracking_error, tracking_error,
                      ttc_threshold)
from .mobility import (KraussParams, RoadConfig, TrajectoryTable,
                       VehicleState, krauss_step, lane_change, load_trace,
                       position_at)
from .oracle import (Motion, ScheduleProblem, ScheduleSolution,
                     enumerate_optimal, replay_schedule, toy_problem)
from .rate_control import (Action, ControllerState, aoi_rate_update,
                           assess_self_risk, fixed_rate, taoi_rate_update)

__version__ = "0.1.0"

__all__ = [
    "Action", "Bsm", "ChannelConfig", "ConfigError", "ControllerState",
    "KraussParams", "Motion", "NeighborRecord", "PdrCounters", "RoadConfig",
    "RunReport", "SafetyParams", "ScheduleProblem", "ScheduleSolution",
    "SimConfig", "SimError", "Simulation", "TraceError", "TrajectoryTable",
    "TransmissionEvent", "UndefinedValueError", "VehicleState",
    "aggregate_taoi", "aoi_rate_update", "assess_self_risk",
    "average_pairwise_aoi", "average_tracking_error",
    "collision_risk_indicator", "csma_access", "delivery_outcome",
    "delta_ttc", "enumerate_optimal", "estimate_position", "fixed_rate",
    "instantaneous_aoi", "instantaneous_taoi", "krauss_step", "lane_change",
    "load_trace", "nakagami_fading_draw", "path_loss_db", "pdr_record",
    "position_at", "replay_schedule", "run_simulation", "rx_power_dbm",
    "self_tracking_error", "system_aoi", "taoi_rate_update", "toy_problem",
    "tracking_error", "ttc_threshold", "tx_duration", "vehicle_aoi",
    "vehicle_taoi",
]
