"""Asynchronous model aggregation: dedup, orbit grouping, freshness selection,
staleness discounting, and the discounted global-model update.

The aggregator organizes received local models per orbit, clusters orbits by
the distance of their size-weighted partial models to the initial global
model, keeps fresh models wherever a group has any, and folds stale-only
groups in with a data-size x epoch-ratio discount.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fl_core import ModelParams, weighted_mean_weights
from .orbital import SatelliteId


@dataclass(frozen=True)
class SatMetadata:
    """Metadata tuple shipped with every local model: <ID, size, loc, ts, epoch>."""

    id: SatelliteId
    size: int                       # training data size
    loc: float                      # orbit phase angle (rad) at ts
    ts: float                       # s, first transmit time toward a PS
    epoch: int                      # last global epoch this satellite was included in

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError("metadata size must be >= 1")
        if self.ts < 0 or self.epoch < 0:
            raise ValueError("metadata ts and epoch must be non-negative")


@dataclass(frozen=True)
class LocalUpdate:
    model: ModelParams
    meta: SatMetadata


@dataclass
class UpdateSet:
    """Local updates collected at the sink, organized per orbit."""

    current_epoch: int
    per_orbit: dict[int, list[LocalUpdate]] = field(default_factory=dict)

    def add(self, update: LocalUpdate) -> None:
        if update.model.derived_from_epoch > self.current_epoch:
            raise ValueError("update derives from a future global epoch")
        self.per_orbit.setdefault(update.meta.id.orbit_index, []).append(update)

    def all_updates(self) -> list[LocalUpdate]:
        return [u for orbit in sorted(self.per_orbit) for u in self.per_orbit[orbit]]

    @property
    def num_updates(self) -> int:
        return sum(len(v) for v in self.per_orbit.values())


@dataclass(frozen=True)
class GroupingScheme:
    """Persistent orbit -> group assignment with per-group mean distances."""

    orbit_to_group: dict[int, int]
    group_mean_distance: dict[int, float]
    reference_model: ModelParams | None = None

    def __post_init__(self) -> None:
        for g in self.orbit_to_group.values():
            if g not in self.group_mean_distance:
                raise ValueError(f"group {g} has members but no mean distance")
        for d in self.group_mean_distance.values():
            if not math.isfinite(d):
                raise ValueError("group mean distances must be finite")

    @property
    def num_groups(self) -> int:
        return len(self.group_mean_distance)

    def group_of(self, orbit: int) -> int:
        return self.orbit_to_group[orbit]

    def members(self, group: int) -> list[int]:
        return sorted(o for o, g in self.orbit_to_group.items() if g == group)


def dedupe(updates: UpdateSet) -> UpdateSet:
    """Keep one update per satellite: latest ts, then latest epoch, then first seen."""
    out: dict[int, list[LocalUpdate]] = {}
    for orbit in sorted(updates.per_orbit):
        best: dict[SatelliteId, LocalUpdate] = {}
        for u in updates.per_orbit[orbit]:
            held = best.get(u.meta.id)
            if held is None or (u.meta.ts, u.meta.epoch) > (held.meta.ts, held.meta.epoch):
                best[u.meta.id] = u
        out[orbit] = [best[k] for k in sorted(best)]
    return UpdateSet(current_epoch=updates.current_epoch, per_orbit=out)


def orbit_data_size(updates: list[LocalUpdate]) -> int:
    """Total training-data size over one orbit's (deduped) updates."""
    return sum(u.meta.size for u in updates)


def partial_global_model(updates: list[LocalUpdate]) -> ModelParams:
    """Size-weighted average of one orbit's local models."""
    if not updates:
        raise ValueError("cannot average an empty orbit")
    mean = weighted_mean_weights([(u.model.weights, u.meta.size) for u in updates])
    return ModelParams(mean, max(u.model.derived_from_epoch for u in updates))


def orbit_distance(partial: ModelParams, reference: ModelParams) -> float:
    """Euclidean distance between a partial global model and the reference."""
    if partial.dim != reference.dim:
        raise ValueError("model dimensions differ")
    return float(np.linalg.norm(partial.weights - reference.weights))


def initial_grouping(distances: dict[int, float], gap_fraction: float,
                     reference_model: ModelParams | None = None) -> GroupingScheme:
    """Cluster orbits by 1-D gaps in their distances to the reference model.

    Orbits are sorted by distance; a new group starts wherever the gap to the
    previous orbit exceeds gap_fraction * (max - min). Equal distances fall
    into a single group.
    """
    if not distances:
        raise ValueError("initial grouping needs at least one orbit distance")
    if not 0.0 < gap_fraction < 1.0:
        raise ValueError("gap_fraction must lie in (0, 1)")
    ordered = sorted(distances.items(), key=lambda kv: (kv[1], kv[0]))
    values = [d for _, d in ordered]
    threshold = gap_fraction * (values[-1] - values[0])
    orbit_to_group: dict[int, int] = {ordered[0][0]: 0}
    group = 0
    for (prev_orbit, prev_d), (orbit, d) in zip(ordered, ordered[1:]):
        if d - prev_d > threshold:
            group += 1
        orbit_to_group[orbit] = group
    means = {
        g: float(np.mean([distances[o] for o, gg in orbit_to_group.items() if gg == g]))
        for g in range(group + 1)
    }
    return GroupingScheme(orbit_to_group, means, reference_model)


def assign_orbit(scheme: GroupingScheme, orbit: int, distance: float) -> GroupingScheme:
    """Add a late-arriving orbit to the group with the nearest mean distance.

    Ties resolve to the lower group id; the chosen group's mean is updated as
    a running mean over its member count.
    """
    if orbit in scheme.orbit_to_group:
        raise ValueError(f"orbit {orbit} is already grouped")
    if not scheme.group_mean_distance:
        raise ValueError("cannot assign into an empty grouping scheme")
    best = min(sorted(scheme.group_mean_distance),
               key=lambda g: (abs(distance - scheme.group_mean_distance[g]), g))
    count = len(scheme.members(best))
    new_mean = (scheme.group_mean_distance[best] * count + distance) / (count + 1)
    mapping = dict(scheme.orbit_to_group)
    mapping[orbit] = best
    means = dict(scheme.group_mean_distance)
    means[best] = new_mean
    return GroupingScheme(mapping, means, scheme.reference_model)


def is_fresh(update: LocalUpdate, current_epoch: int) -> bool:
    """Fresh means trained from the current global model."""
    return update.model.derived_from_epoch == current_epoch


def select_models(updates: UpdateSet, scheme: GroupingScheme,
                  current_epoch: int) -> tuple[list[LocalUpdate], set[int]]:
    """Per group, keep the fresh updates; fall back to all updates when the
    whole group is stale (those groups are reported in the second element).

    The selection is returned in ascending (orbit, slot) order.
    """
    deduped = dedupe(updates)
    for orbit in deduped.per_orbit:
        if deduped.per_orbit[orbit] and orbit not in scheme.orbit_to_group:
            raise ValueError(f"orbit {orbit} has updates but is not grouped yet")
    by_group: dict[int, list[LocalUpdate]] = {}
    for u in deduped.all_updates():
        by_group.setdefault(scheme.group_of(u.meta.id.orbit_index), []).append(u)
    selected: list[LocalUpdate] = []
    stale_only: set[int] = set()
    for g in sorted(by_group):
        members = by_group[g]
        fresh = [u for u in members if is_fresh(u, current_epoch)]
        if fresh:
            selected.extend(fresh)
        else:
            selected.extend(members)
            stale_only.add(g)
    selected.sort(key=lambda u: u.meta.id)
    return selected, stale_only


def staleness_discount(selected: list[LocalUpdate], current_epoch: int,
                       total_data: int) -> tuple[list[float], float]:
    """Per-update discount coefficients and their clamped sum.

    Each update contributes (size_n / total) * (k_n / beta), where k_n is the
    current epoch for fresh updates and the satellite's last-inclusion epoch
    for stale ones. When the coefficients sum above 1 they are rescaled so the
    total is exactly 1.
    """
    if current_epoch < 1:
        raise ValueError("staleness discounting is undefined before epoch 1")
    sizes = sum(u.meta.size for u in selected)
    if total_data < sizes:
        raise ValueError(f"total_data {total_data} is smaller than the selected "
                         f"updates' combined size {sizes}")
    coeffs = []
    for u in selected:
        ratio = 1.0 if is_fresh(u, current_epoch) else u.meta.epoch / current_epoch
        coeffs.append((u.meta.size / total_data) * ratio)
    gamma = math.fsum(coeffs)
    if gamma > 1.0:
        coeffs = [c / gamma for c in coeffs]
        gamma = 1.0
    return coeffs, gamma


def aggregate(w_prev: ModelParams, selected: list[LocalUpdate],
              coefficients: list[float], gamma: float) -> ModelParams:
    """Discounted global update: (1 - gamma) * w_prev + sum_n gamma_n * w_n.

    Coefficients must be non-negative and sum to gamma <= 1, so every output
    coordinate stays inside the hull spanned by w_prev and the selected models.
    """
    if len(selected) != len(coefficients):
        raise ValueError(f"{len(selected)} models but {len(coefficients)} coefficients")
    if gamma > 1.0 + 1e-12:
        raise ValueError(f"gamma {gamma} exceeds 1")
    if any(c < 0 for c in coefficients):
        raise ValueError("coefficients must be non-negative")
    if abs(math.fsum(coefficients) - gamma) > 1e-9:
        raise ValueError("coefficients do not sum to gamma")
    out = (1.0 - gamma) * w_prev.weights
    for coeff, u in zip(coefficients, selected):
        if u.model.dim != w_prev.dim:
            raise ValueError("model dimensions differ")
        out = out + coeff * u.model.weights
    return ModelParams(out, derived_from_epoch=w_prev.derived_from_epoch + 1)
