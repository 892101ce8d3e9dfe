import math

import pytest

from leofl.orbital import NodeSpec, walker_delta
from leofl.sim_engine import DataConfig, RunConfig, TerminationSpec


def rolla_node() -> NodeSpec:
    return NodeSpec(id="rolla", role="HAP", latitude=math.radians(37.9514),
                    longitude=math.radians(-91.7713), altitude=2.0e4,
                    min_elevation=math.radians(10.0))


def portland_node() -> NodeSpec:
    return NodeSpec(id="portland", role="HAP", latitude=math.radians(45.5152),
                    longitude=math.radians(-122.6784), altitude=2.0e4,
                    min_elevation=math.radians(10.0))


def reference_constellation():
    """5 orbits x 8 satellites at 2000 km, 80 deg inclination."""
    return walker_delta(5, 8, 2.0e6, math.radians(80.0))


def reference_config(**overrides) -> RunConfig:
    """Desk-scale reference scenario: one HAP above Rolla, non-IID synthetic data."""
    kw = dict(
        constellation=reference_constellation(),
        nodes=(rolla_node(),),
        data=DataConfig(),
        termination=TerminationSpec(target_accuracy=None, max_epochs=15,
                                    max_sim_time=259200.0),
        collection_window=1800.0,
        master_seed=0,
    )
    kw.update(overrides)
    return RunConfig(**kw)


def sparse_coverage_config(**overrides) -> RunConfig:
    """Companion scenario at 800 km where parameter-server coverage binds."""
    kw = dict(
        constellation=walker_delta(5, 8, 8.0e5, math.radians(80.0)),
        nodes=(rolla_node(),),
        data=DataConfig(),
        termination=TerminationSpec(target_accuracy=0.75, max_epochs=60,
                                    max_sim_time=259200.0),
        collection_window=600.0,
        master_seed=0,
    )
    kw.update(overrides)
    return RunConfig(**kw)
