"""Asynchronous federated learning over LEO constellations, simulated
deterministically with high-altitude-platform parameter servers."""

from .aggregation import (GroupingScheme, LocalUpdate, SatMetadata, UpdateSet,
                          aggregate, assign_orbit, dedupe, initial_grouping,
                          orbit_data_size, orbit_distance, partial_global_model,
                          select_models, staleness_discount)
from .fl_core import (LabeledDataset, LearnerSpec, ModelParams, TrainConfig,
                      accuracy, fedavg, global_objective, init_model,
                      load_idx_dataset, local_loss, local_train,
                      make_synthetic_dataset, partition_dataset)
from .link import (LinkParams, free_space_path_loss, line_of_sight,
                   shannon_rate, snr, transfer_delay)
from .orbital import (EARTH, BodyConstants, ConstellationSpec, EciPosition,
                      NodeSpec, OrbitSpec, SatelliteId, intra_orbit_neighbors,
                      is_visible, next_visit_time, node_position,
                      orbital_period, orbital_velocity, satellite_position,
                      visibility_windows, walker_delta)
from .propagation import (HapRing, RelayState, TimedMessage, forward_buffers_to_sink,
                          intra_orbit_relay, plan_ring, relay_global_hap,
                          route_local_update, swap_roles)
from .sim_engine import (ConfigError, DataConfig, MetricsRecord, RunConfig,
                         RunResult, Simulation, TerminationSpec, derive_seed,
                         evaluate_global, run_async, run_simulation, run_sync)

__version__ = "0.1.0"
