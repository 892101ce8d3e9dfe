"""Deterministic discrete-event engine binding orbits, links, propagation,
training, and aggregation into full asynchronous runs, plus a synchronous
data-size-weighted-averaging baseline.

Every run is a pure function of its configuration: the event queue orders by
(time, creation sequence), all randomness flows from the master seed through
named substreams, and visibility is precomputed per (satellite, node) pair.
"""
from __future__ import annotations

import bisect
import heapq
import math
from dataclasses import dataclass, replace

import numpy as np

from . import aggregation as agg
from . import fl_core, link, orbital, propagation
from .aggregation import GroupingScheme, LocalUpdate, SatMetadata, UpdateSet
from .fl_core import LabeledDataset, LearnerSpec, ModelParams, TrainConfig
from .link import LinkParams
from .orbital import (EARTH, BodyConstants, ConstellationSpec, NodeSpec,
                      SatelliteId)
from .propagation import RelayState, TimedMessage

ASYNC = "async"
SYNC = "sync"

CONTACT_CHANGE = "ContactChange"
MESSAGE_ARRIVAL = "MessageArrival"
TRAINING_DONE = "TrainingDone"
COLLECTION_TIMEOUT = "CollectionTimeout"
AGGREGATION_DONE = "AggregationDone"

BITS_PER_WEIGHT = 64
METADATA_BITS = 512.0
EMPTY_BUNDLE_BITS = 64.0

# named substreams hanging off the master seed (see README)
STREAM_DATA = 1
STREAM_PARTITION = 2
STREAM_TRAINING = 3
STREAM_HAP_CHOICE = 4
STREAM_TEST_SPLIT = 5


class ConfigError(ValueError):
    """Configuration rejected; the message lists every violated constraint."""


def derive_seed(*parts: int) -> int:
    """Deterministic substream seed from the master seed and stream ids."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class DataConfig:
    """Where satellite training data comes from and how it is partitioned."""

    source: str = "synthetic"            # "synthetic" or "idx"
    partition: str = "noniid"            # "iid" or "noniid"
    test_fraction: float = 0.2
    samples: int = 5000                  # synthetic source
    class_sep: float = 3.0
    noise: float = 1.0
    images_path: str | None = None       # idx source
    labels_path: str | None = None
    limit: int | None = None


@dataclass(frozen=True)
class TerminationSpec:
    target_accuracy: float | None = None
    max_epochs: int | None = 20
    max_sim_time: float | None = 259200.0   # 3 simulated days


@dataclass(frozen=True)
class RunConfig:
    constellation: ConstellationSpec
    nodes: tuple[NodeSpec, ...]
    link: LinkParams = LinkParams()
    learner: LearnerSpec = LearnerSpec()
    train: TrainConfig = TrainConfig()
    data: DataConfig = DataConfig()
    mode: str = ASYNC
    termination: TerminationSpec = TerminationSpec()
    gap_fraction: float = 0.25
    collection_window: float = 1800.0    # s
    compute_delay: float = 60.0          # s per local training
    master_seed: int = 0
    sync_no_relay: bool = False          # strict star-topology sync baseline
    constants: BodyConstants = EARTH

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        problems = self.validation_errors()
        if problems:
            raise ConfigError("; ".join(problems))

    def validation_errors(self) -> list[str]:
        out = []
        if self.mode not in (ASYNC, SYNC):
            out.append(f"mode must be async or sync, got {self.mode!r}")
        if not self.nodes:
            out.append("at least one parameter-server node is required")
        if len({n.id for n in self.nodes}) != len(self.nodes):
            out.append("node ids must be unique")
        term = self.termination
        if term.target_accuracy is None and term.max_epochs is None \
                and term.max_sim_time is None:
            out.append("at least one termination criterion must be set")
        if term.target_accuracy is not None and not 0 < term.target_accuracy <= 1:
            out.append("target_accuracy must lie in (0, 1]")
        if term.max_epochs is not None and term.max_epochs < 0:
            out.append("max_epochs must be non-negative")
        if term.max_sim_time is not None and term.max_sim_time <= 0:
            out.append("max_sim_time must be positive")
        if not 0 < self.gap_fraction < 1:
            out.append("gap_fraction must lie in (0, 1)")
        if self.collection_window <= 0:
            out.append("collection_window must be positive")
        if self.compute_delay < 0:
            out.append("compute_delay must be non-negative")
        if self.data.partition not in ("iid", "noniid"):
            out.append(f"data.partition must be iid or noniid, got {self.data.partition!r}")
        if self.data.source not in ("synthetic", "idx"):
            out.append(f"data.source must be synthetic or idx, got {self.data.source!r}")
        if self.data.source == "idx" and not (self.data.images_path and self.data.labels_path):
            out.append("idx data source needs images_path and labels_path")
        if not 0 < self.data.test_fraction < 1:
            out.append("data.test_fraction must lie in (0, 1)")
        re = self.constants.earth_radius
        for i, orb in enumerate(self.constellation.orbits):
            if orb.num_sats >= 2:
                clear = (re + orb.altitude) * math.cos(math.pi / orb.num_sats)
                if clear < re + self.link.earth_clearance:
                    out.append(f"orbit {i}: adjacent-satellite links graze the Earth "
                               f"({orb.num_sats} satellites at {orb.altitude} m)")
        return out

    @property
    def horizon(self) -> float:
        return self.termination.max_sim_time if self.termination.max_sim_time \
            is not None else 259200.0


@dataclass(frozen=True)
class MetricsRecord:
    sim_time: float
    epoch: int
    test_accuracy: float
    global_loss: float
    models_aggregated: int
    stale_selected: int
    groups: int
    bytes_transferred: float             # cumulative payload bits


@dataclass
class RunResult:
    records: list[MetricsRecord]
    events: list[dict]
    stalled: bool = False
    final_model: ModelParams | None = None
    grouping: GroupingScheme | None = None


def evaluate_global(spec: LearnerSpec, model: ModelParams,
                    test_data: LabeledDataset) -> tuple[float, float]:
    """(accuracy, loss) of the current global model on the held-out set."""
    if test_data.size == 0:
        raise ValueError("test set is empty")
    return (fl_core.accuracy(spec, model, test_data),
            fl_core.local_loss(spec, model, test_data))


def build_datasets(cfg: RunConfig) -> tuple[list[LabeledDataset], LabeledDataset]:
    """(per-satellite training sets in (orbit, slot) order, held-out test set)."""
    d = cfg.data
    if d.source == "synthetic":
        full = fl_core.make_synthetic_dataset(
            d.samples, cfg.learner.input_dim, cfg.learner.num_classes,
            seed=derive_seed(cfg.master_seed, STREAM_DATA),
            class_sep=d.class_sep, noise=d.noise)
    else:
        full = fl_core.load_idx_dataset(d.images_path, d.labels_path, d.limit)
        if full.features.shape[1] != cfg.learner.input_dim:
            raise ConfigError(f"IDX features have {full.features.shape[1]} dims, "
                              f"learner expects {cfg.learner.input_dim}")
    train, test = fl_core.train_test_split(
        full, d.test_fraction, seed=derive_seed(cfg.master_seed, STREAM_TEST_SPLIT))
    parts = fl_core.partition_dataset(
        train, cfg.constellation, d.partition,
        seed=derive_seed(cfg.master_seed, STREAM_PARTITION))
    return parts, test


class Simulation:
    """One deterministic simulation run. Build, then call :meth:`run` once."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.constants = cfg.constants
        self.spec = cfg.constellation
        self.sats = self.spec.satellites()
        self.datasets, self.test_set = build_datasets(cfg)
        self.total_data = sum(d.size for d in self.datasets)
        self.model_bits = float(cfg.learner.param_dim * BITS_PER_WEIGHT)
        self.update_bits = self.model_bits + METADATA_BITS
        self.ring = propagation.plan_ring(list(cfg.nodes))
        self.node_by_id = {n.id: n for n in cfg.nodes}
        self.hap_pick_rng = np.random.default_rng(
            derive_seed(cfg.master_seed, STREAM_HAP_CHOICE))

        # event machinery
        self._queue: list[tuple[float, int, str, object]] = []
        self._seq = 0
        self.events: list[dict] = []
        self.bits_transferred = 0.0
        self.records: list[MetricsRecord] = []
        self.stalled = False

        # protocol state
        self.relay = RelayState()
        self.global_models: dict[int, ModelParams] = {}
        self.hap_version: dict[str, int] = {n.id: -1 for n in cfg.nodes}
        self.hap_epoch_fired: dict[str, bool] = {n.id: False for n in cfg.nodes}
        self.sink_bundles_seen: set[str] = set()
        self.sink_trigger_fired = False
        self.sink_extended = False
        self.last_included: dict[SatelliteId, int] = {s: 0 for s in self.sats}
        self.trained: dict[tuple[SatelliteId, int], ModelParams] = {}
        self.pending: dict[tuple[SatelliteId, int], LocalUpdate] = {}
        # the aggregator's persistent archive: latest known update per satellite,
        # carried across epochs so stale-only groups stay represented
        self.sat_store: dict[SatelliteId, LocalUpdate] = {}
        self.scheme: GroupingScheme | None = None
        self.epoch = 0
        self.epochs_done = 0
        self.done = False

        self._isl_delay = {
            i: self._isl_hop_delay(i) for i in range(self.spec.num_orbits)
            if self.spec.orbits[i].num_sats >= 2
        }
        self._windows = self._precompute_windows()

    # ---------------------------------------------------------------- setup

    def _isl_hop_delay(self, orbit_index: int) -> float:
        orb = self.spec.orbits[orbit_index]
        r = self.constants.earth_radius + orb.altitude
        chord = 2.0 * r * math.sin(math.pi / orb.num_sats)
        a = orbital.EciPosition(r, 0.0, 0.0)
        b = orbital.EciPosition(r * math.cos(2 * math.pi / orb.num_sats),
                                r * math.sin(2 * math.pi / orb.num_sats), 0.0)
        delay = link.transfer_delay(self.cfg.link, a, b, self.model_bits,
                                    self.constants)
        if delay is None:
            raise ConfigError(f"orbit {orbit_index}: neighbor link blocked")
        assert abs(a.distance_to(b) - chord) < 1e-6 * chord
        return delay

    def _precompute_windows(self) -> dict[tuple[SatelliteId, str], list[tuple[float, float]]]:
        table: dict[tuple[SatelliteId, str], list[tuple[float, float]]] = {
            (s, n.id): [] for s in self.sats for n in self.cfg.nodes}
        for node in self.cfg.nodes:
            for w in orbital.visibility_windows(self.spec, node, 0.0,
                                                self.cfg.horizon,
                                                constants=self.constants):
                table[(w.sat, node.id)].append((w.enter, w.exit))
        return table

    def _visible(self, sat: SatelliteId, node_id: str, t: float) -> bool:
        wins = self._windows[(sat, node_id)]
        i = bisect.bisect_right(wins, (t, math.inf)) - 1
        return i >= 0 and wins[i][0] <= t <= wins[i][1]

    def _visible_haps(self, sat: SatelliteId, t: float) -> list[str]:
        return [n.id for n in self.cfg.nodes if self._visible(sat, n.id, t)]

    def _visible_sats(self, node_id: str, t: float) -> list[SatelliteId]:
        return [s for s in self.sats if self._visible(s, node_id, t)]

    # ------------------------------------------------------------- plumbing

    def _schedule(self, time: float, kind: str, data: object) -> None:
        heapq.heappush(self._queue, (time, self._seq, kind, data))
        self._seq += 1

    def _log(self, time: float, kind: str, src: str | None, dst: str | None,
             payload_bits: float | None, detail: dict) -> None:
        self.events.append({
            "time": time, "seq": self._seq, "kind": kind, "src": src,
            "dst": dst, "payload_bits": payload_bits, "detail": detail,
        })
        self._seq += 1

    def _sat_pos(self, sat: SatelliteId, t: float) -> orbital.EciPosition:
        return orbital.satellite_position(self.spec, sat, t, self.constants)

    def _node_pos(self, node_id: str, t: float) -> orbital.EciPosition:
        return orbital.node_position(self.constants, self.node_by_id[node_id], t)

    def _hap_ring_delay(self, src: str, dst: str, bits: float, t: float) -> float:
        return link.ring_transfer_delay(self.cfg.link, self._node_pos(src, t),
                                        self._node_pos(dst, t), bits,
                                        self.constants)

    def _link_delay(self, src: str, dst: str, bits: float, t: float) -> float:
        """Delay between any two endpoints: ring backbone for platform pairs,
        the regular space link otherwise."""
        if src in self.node_by_id and dst in self.node_by_id:
            return self._hap_ring_delay(src, dst, bits, t)
        sat_label, node_id = (src, dst) if dst in self.node_by_id else (dst, src)
        return self._space_delay(self._sat_from_label(sat_label), node_id, bits, t)

    def _space_delay(self, sat: SatelliteId, node_id: str, bits: float,
                     t: float) -> float:
        delay = link.transfer_delay(self.cfg.link, self._sat_pos(sat, t),
                                    self._node_pos(node_id, t), bits,
                                    self.constants)
        if delay is None:
            raise RuntimeError(f"blocked link {sat.label}<->{node_id} at t={t}")
        return delay

    def _send(self, msg: TimedMessage, payload: object = None) -> None:
        self._schedule(msg.arrive_time, MESSAGE_ARRIVAL, (msg, payload))

    # ------------------------------------------------------------- main run

    def run(self) -> RunResult:
        init = fl_core.init_model(self.cfg.learner)
        self.global_models[0] = init
        self._record(0.0, init, models=0, stale=0)
        term = self.cfg.termination
        if term.max_epochs is not None and term.max_epochs == 0:
            return self._result()
        if term.target_accuracy is not None \
                and self.records[-1].test_accuracy >= term.target_accuracy:
            return self._result()

        for node in self.cfg.nodes:          # contact timeline over the horizon
            for sat in self.sats:
                for enter, exit_ in self._windows[(sat, node.id)]:
                    self._schedule(enter, CONTACT_CHANGE, (sat, node.id, True))
                    self._schedule(exit_, CONTACT_CHANGE, (sat, node.id, False))

        self._begin_epoch(0.0)
        horizon = self.cfg.horizon
        while self._queue and not self.done:
            time, _seq, kind, data = heapq.heappop(self._queue)
            if time > horizon:
                self.stalled = True
                self._log(horizon, COLLECTION_TIMEOUT, None, None, None,
                          {"stalled_round": self.epoch, "reason": "max_sim_time"})
                break
            self._dispatch(time, kind, data)
        if not self.done and not self.stalled and self._queue == []:
            self.stalled = True
            self._log(self.records[-1].sim_time if self.records else 0.0,
                      COLLECTION_TIMEOUT, None, None, None,
                      {"stalled_round": self.epoch, "reason": "no_events"})
        return self._result()

    def _result(self) -> RunResult:
        return RunResult(records=self.records, events=self.events,
                         stalled=self.stalled,
                         final_model=self.global_models[max(self.global_models)],
                         grouping=self.scheme)

    def _dispatch(self, time: float, kind: str, data: object) -> None:
        if kind == CONTACT_CHANGE:
            self._on_contact(time, *data)
        elif kind == MESSAGE_ARRIVAL:
            self._on_arrival(time, *data)
        elif kind == TRAINING_DONE:
            self._on_training_done(time, *data)
        elif kind == COLLECTION_TIMEOUT:
            self._on_collection_timeout(time, *data)

    # -------------------------------------------------------- dissemination

    def _begin_epoch(self, t: float) -> None:
        version = self.epoch
        for hap in self.ring.order:
            self.hap_epoch_fired[hap] = False
        self.sink_bundles_seen = set()
        self.sink_trigger_fired = False
        self.sink_extended = False
        messages = propagation.relay_global_hap(
            self.ring, version, t, payload_bits=self.model_bits,
            delay_fn=self._link_delay,
            visible_fn=None if self._strict_sync() else self._visible_sats)
        for msg in messages:
            self._send(msg)
        if self._strict_sync():
            for sat in self._visible_sats(self.ring.source, t):
                self._transmit_global(self.ring.source, sat, t, version)
        self._hap_handles_model(self.ring.source, version, t)

    def _strict_sync(self) -> bool:
        return self.cfg.mode == SYNC and self.cfg.sync_no_relay

    def _hap_handles_model(self, hap: str, version: int, t: float) -> None:
        if version <= self.hap_version[hap]:
            return
        self.hap_version[hap] = version
        if self.cfg.mode == ASYNC:
            self._schedule(t + self.cfg.collection_window, COLLECTION_TIMEOUT,
                           (hap, version))
        if self._strict_sync() and hap != self.ring.source:
            for sat in self._visible_sats(hap, t):
                self._transmit_global(hap, sat, t, version)

    def _transmit_global(self, hap: str, sat: SatelliteId, t: float,
                         version: int) -> None:
        delay = self._space_delay(sat, hap, self.model_bits, t)
        self._send(TimedMessage(propagation.GLOBAL_MODEL, self.model_bits,
                                hap, sat.label, t, t + delay,
                                {"version": version}))

    # --------------------------------------------------------- event handlers

    def _on_contact(self, t: float, sat: SatelliteId, node_id: str,
                    entering: bool) -> None:
        self._log(t, CONTACT_CHANGE, sat.label, node_id, None,
                  {"entering": entering})
        if not entering:
            return
        if self.hap_version[node_id] > self.relay.latest_version.get(sat, -1):
            self._transmit_global(node_id, sat, t, self.hap_version[node_id])
        for key in sorted(self.pending, key=lambda k: (k[0], k[1])):
            if key[0].orbit_index == sat.orbit_index:
                update = self.pending[key]
                if self._route_update(key[0], update, t):
                    del self.pending[key]

    def _on_arrival(self, t: float, msg: TimedMessage, payload: object) -> None:
        self.bits_transferred += msg.payload_bits
        self._log(t, MESSAGE_ARRIVAL, msg.src, msg.dst, msg.payload_bits,
                  {"msg": msg.kind, "sent": msg.send_time,
                   **{k: v for k, v in msg.detail.items()
                      if isinstance(v, (int, float, str, bool))}})
        if msg.kind == propagation.GLOBAL_MODEL:
            if msg.dst in self.node_by_id:
                self._hap_handles_model(msg.dst, int(msg.detail["version"]), t)
            else:
                self._sat_receives_global(t, msg)
        elif msg.kind == propagation.LOCAL_UPDATE:
            if msg.dst in self.node_by_id:
                self._hap_receives_update(t, msg.dst, payload)
            # satellite-to-satellite relay hops carry the update passively
        elif msg.kind == propagation.BUNDLE:
            if msg.detail.get("final"):
                self._bundle_final_arrival(t, msg, payload)
            # mid-chain ring hops were pre-planned and need no decision

    def _sat_receives_global(self, t: float, msg: TimedMessage) -> None:
        sat = self._sat_from_label(msg.dst)
        version = int(msg.detail["version"])
        if not self.relay.note_receipt(sat, version, msg.src):
            return                        # duplicate: relay ceases here
        if not self._strict_sync():
            orb = self.spec.orbits[sat.orbit_index]
            if orb.num_sats >= 2:
                delay = self._isl_delay[sat.orbit_index]
                for nb in ((sat.slot_index - 1) % orb.num_sats,
                           (sat.slot_index + 1) % orb.num_sats):
                    dst = SatelliteId(sat.orbit_index, nb)
                    self._send(TimedMessage(propagation.GLOBAL_MODEL,
                                            self.model_bits, sat.label,
                                            dst.label, t, t + delay,
                                            {"version": version}))
        self._schedule(t + self.cfg.compute_delay, TRAINING_DONE, (sat, version))

    def _on_training_done(self, t: float, sat: SatelliteId, version: int) -> None:
        loc = orbital.true_anomaly(self.spec, sat, t, self.constants)
        self._log(t, TRAINING_DONE, sat.label, None, None,
                  {"version": version, "loc": loc})
        model = self._train(sat, version)
        meta = SatMetadata(
            id=sat, size=self.datasets[self.spec.satellite_index(sat)].size,
            loc=loc, ts=t, epoch=self.last_included[sat])
        update = LocalUpdate(model=model, meta=meta)
        if not self._route_update(sat, update, t):
            self.pending[(sat, version)] = update

    def _train(self, sat: SatelliteId, version: int) -> ModelParams:
        key = (sat, version)
        if key not in self.trained:
            idx = self.spec.satellite_index(sat)
            cfg = replace(self.cfg.train, rng_seed=derive_seed(
                self.cfg.master_seed, STREAM_TRAINING, idx, version))
            self.trained[key] = fl_core.local_train(
                self.cfg.learner, self.global_models[version],
                self.datasets[idx], cfg)
        return self.trained[key]

    def _route_update(self, sat: SatelliteId, update: LocalUpdate,
                      t: float) -> bool:
        orb = self.spec.orbits[sat.orbit_index]
        if self._strict_sync():
            haps = self._visible_haps(sat, t)
            if not haps:
                return False
            hap = self._pick_hap(haps)
            delay = self._space_delay(sat, hap, self.update_bits, t)
            self._send(TimedMessage(propagation.LOCAL_UPDATE, self.update_bits,
                                    sat.label, hap, t, t + delay,
                                    {"origin": sat.label}), update)
            return True
        plan = propagation.route_local_update(
            sat, t, num_sats=orb.num_sats, payload_bits=self.update_bits,
            visible_haps=self._visible_haps,
            uplink_delay=lambda s, h, when: self._space_delay(
                s, h, self.update_bits, when),
            hop_delay=self._isl_delay.get(sat.orbit_index, 1.0),
            pick=self._pick_hap)
        if not plan.delivered:
            return False
        for msg in plan.messages:
            self._send(msg, update if msg.dst in self.node_by_id else None)
        return True

    def _pick_hap(self, haps: list[str]) -> str:
        if len(haps) == 1:
            return haps[0]
        return haps[int(self.hap_pick_rng.integers(len(haps)))]

    # ----------------------------------------------------------- collection

    def _hap_receives_update(self, t: float, hap: str, update: LocalUpdate) -> None:
        if hap == self.ring.sink:
            self._sink_collects(t, [update])
            return
        if self.cfg.mode == SYNC or self.hap_epoch_fired[hap]:
            self._forward_single(t, hap, update)
            return
        self.relay.hap_buffers.setdefault(hap, []).append(update)
        orbits = {u.meta.id.orbit_index for u in self.relay.hap_buffers[hap]}
        if len(orbits) == self.spec.num_orbits:
            self._fire_collection(t, hap)

    def _bundle_bits(self, updates: list[LocalUpdate]) -> float:
        if not updates:
            return EMPTY_BUNDLE_BITS
        return self.update_bits * len(updates)

    def _forward_single(self, t: float, hap: str, update: LocalUpdate) -> None:
        msgs = propagation.forward_buffers_to_sink(
            self.ring, {hap: 1}, t,
            bundle_bits=lambda _h: self.update_bits,
            delay_fn=self._hap_ring_delay)
        self._schedule_bundle(msgs, [update], trigger=False)

    def _schedule_bundle(self, msgs: list[TimedMessage],
                         updates: list[LocalUpdate], trigger: bool) -> None:
        for i, m in enumerate(msgs):
            detail = dict(m.detail)
            detail["epoch"] = self.epoch
            detail["trigger"] = trigger
            detail["final"] = i == len(msgs) - 1
            self._send(replace(m, detail=detail),
                       updates if detail["final"] else None)

    def _on_collection_timeout(self, t: float, hap: str, version: int) -> None:
        if version != self.epoch or self.done:
            return
        self._log(t, COLLECTION_TIMEOUT, hap, None, None, {"epoch": version})
        if not self.hap_epoch_fired[hap]:
            self._fire_collection(t, hap)

    def _fire_collection(self, t: float, hap: str) -> None:
        self.hap_epoch_fired[hap] = True
        if hap == self.ring.sink:
            self.sink_trigger_fired = True
            self._maybe_aggregate(t)
            return
        updates = self.relay.hap_buffers.pop(hap, [])
        msgs = propagation.forward_buffers_to_sink(
            self.ring, {hap: len(updates)}, t,
            bundle_bits=lambda _h: self._bundle_bits(updates),
            delay_fn=self._hap_ring_delay)
        self._schedule_bundle(msgs, updates, trigger=True)

    def _bundle_final_arrival(self, t: float, msg: TimedMessage,
                              updates: list[LocalUpdate]) -> None:
        hap = msg.dst
        if hap == self.ring.sink:
            if msg.detail.get("trigger") and msg.detail.get("epoch") == self.epoch:
                self.sink_bundles_seen.add(msg.detail["origin"])
            self._sink_collects(t, updates)
        else:
            # roles swapped while the bundle was in flight: hand the updates
            # to this platform as regular buffer content
            for u in updates:
                self._hap_receives_update(t, hap, u)

    def _sink_collects(self, t: float, updates: list[LocalUpdate]) -> None:
        sink = self.ring.sink
        if self.cfg.mode == SYNC:
            self.relay.hap_buffers.setdefault(sink, []).extend(updates)
        else:
            for u in updates:
                held = self.sat_store.get(u.meta.id)
                if held is None or (u.meta.ts, u.meta.epoch) \
                        > (held.meta.ts, held.meta.epoch):
                    self.sat_store[u.meta.id] = u
        self._maybe_aggregate(t)

    # ----------------------------------------------------------- aggregation

    def _maybe_aggregate(self, t: float) -> None:
        if self.done:
            return
        sink = self.ring.sink
        if self.cfg.mode == SYNC:
            buffer = self.relay.hap_buffers.get(sink, [])
            fresh_sats = {u.meta.id for u in buffer
                          if u.model.derived_from_epoch == self.epoch}
            if len(fresh_sats) == len(self.sats):
                self._aggregate_sync(t)
            return
        others = {h for h in self.ring.order if h != sink}
        if not (self.sink_trigger_fired and others <= self.sink_bundles_seen):
            return
        if not self.sat_store:
            if not self.sink_extended:
                self.sink_extended = True
                self._log(t, COLLECTION_TIMEOUT, sink, None, None,
                          {"epoch": self.epoch, "extended": True})
            return
        self._aggregate_async(t)

    def _aggregate_async(self, t: float) -> None:
        sink = self.ring.sink
        beta = self.epoch
        updates = UpdateSet(current_epoch=beta)
        for sat in sorted(self.sat_store):
            updates.add(self.sat_store[sat])
        deduped = agg.dedupe(updates)
        self._update_grouping(deduped)
        selected, stale_groups = agg.select_models(deduped, self.scheme, beta)
        if beta == 0:
            # every update necessarily derives from the initial model: all fresh
            coeffs = [u.meta.size / self.total_data for u in selected]
            gamma = math.fsum(coeffs)
            if gamma > 1.0:
                coeffs = [c / gamma for c in coeffs]
                gamma = 1.0
        else:
            coeffs, gamma = agg.staleness_discount(selected, beta, self.total_data)
        new_model = agg.aggregate(self.global_models[beta], selected, coeffs, gamma)
        stale_count = sum(1 for u in selected if not agg.is_fresh(u, beta))
        for u in selected:
            # inclusion at this epoch: advance the satellite's metadata epoch
            self.last_included[u.meta.id] = beta
            held = self.sat_store[u.meta.id]
            self.sat_store[u.meta.id] = LocalUpdate(
                held.model, replace(held.meta, epoch=beta))
        self._log(t, AGGREGATION_DONE, sink, None, None, {
            "epoch": beta + 1, "selected": [u.meta.id.label for u in selected],
            "stale_selected": stale_count, "gamma": gamma,
            "stale_only_groups": sorted(stale_groups),
            "groups": {str(o): g for o, g in sorted(self.scheme.orbit_to_group.items())},
            "extended": self.sink_extended,
        })
        self._finish_epoch(t, new_model, len(selected), stale_count)

    def _aggregate_sync(self, t: float) -> None:
        sink = self.ring.sink
        beta = self.epoch
        updates = UpdateSet(current_epoch=beta)
        for u in self.relay.hap_buffers.pop(sink, []):
            updates.add(u)
        deduped = agg.dedupe(updates)
        fresh = [u for u in deduped.all_updates()
                 if u.model.derived_from_epoch == beta]
        fresh.sort(key=lambda u: u.meta.id)
        new_model = fl_core.fedavg([(u.model, u.meta.size) for u in fresh])
        self._log(t, AGGREGATION_DONE, sink, None, None, {
            "epoch": beta + 1, "selected": [u.meta.id.label for u in fresh],
            "stale_selected": 0, "gamma": 1.0, "mode": SYNC,
        })
        self._finish_epoch(t, new_model, len(fresh), 0)

    def _update_grouping(self, deduped: UpdateSet) -> None:
        reference = self.global_models[0]
        present = {o: lst for o, lst in deduped.per_orbit.items() if lst}
        if self.scheme is None:
            distances = {o: agg.orbit_distance(agg.partial_global_model(lst), reference)
                         for o, lst in present.items()}
            self.scheme = agg.initial_grouping(distances, self.cfg.gap_fraction,
                                               reference)
            return
        for o in sorted(present):
            if o not in self.scheme.orbit_to_group:
                dist = agg.orbit_distance(agg.partial_global_model(present[o]),
                                          reference)
                self.scheme = agg.assign_orbit(self.scheme, o, dist)

    def _finish_epoch(self, t: float, new_model: ModelParams,
                      n_models: int, n_stale: int) -> None:
        self.epoch += 1
        self.epochs_done += 1
        self.global_models[self.epoch] = new_model
        self._record(t, new_model, models=n_models, stale=n_stale)
        term = self.cfg.termination
        rec = self.records[-1]
        if term.target_accuracy is not None \
                and rec.test_accuracy >= term.target_accuracy:
            self.done = True
        if term.max_epochs is not None and self.epochs_done >= term.max_epochs:
            self.done = True
        if self.done:
            return
        self.ring = propagation.swap_roles(self.ring)
        self._begin_epoch(t)

    def _record(self, t: float, model: ModelParams, models: int, stale: int) -> None:
        acc, loss = evaluate_global(self.cfg.learner, model, self.test_set)
        self.records.append(MetricsRecord(
            sim_time=t, epoch=model.derived_from_epoch, test_accuracy=acc,
            global_loss=loss, models_aggregated=models, stale_selected=stale,
            groups=self.scheme.num_groups if self.scheme else 0,
            bytes_transferred=self.bits_transferred))

    def _sat_from_label(self, label: str) -> SatelliteId:
        _, o, s = label.split("-")
        return SatelliteId(int(o), int(s))


def run_simulation(cfg: RunConfig) -> RunResult:
    return Simulation(cfg).run()


def run_async(cfg: RunConfig) -> list[MetricsRecord]:
    """Asynchronous grouped/staleness-discounted run; one record per epoch."""
    if cfg.mode != ASYNC:
        cfg = replace(cfg, mode=ASYNC)
    return run_simulation(cfg).records


def run_sync(cfg: RunConfig) -> list[MetricsRecord]:
    """Synchronous baseline: every round waits for all satellites' models."""
    if cfg.mode != SYNC:
        cfg = replace(cfg, mode=SYNC)
    return run_simulation(cfg).records
