"""Command-line entry point: config loading, run orchestration, result emission.

Configuration is a single JSON file; every key has a documented default, and
unknown keys are rejected. `run` writes a metrics CSV, an event-log JSONL, and
a resolved-config echo that reproduces the run byte-for-byte when fed back.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from .link import LinkParams
from .orbital import ConstellationSpec, NodeSpec, OrbitSpec, visibility_windows
from .sim_engine import (ConfigError, DataConfig, RunConfig,
                         TerminationSpec, run_simulation)
from .fl_core import LearnerSpec, TrainConfig

METRICS_COLUMNS = ["sim_time_s", "epoch", "test_accuracy", "global_loss",
                   "models_aggregated", "stale_selected", "groups",
                   "bytes_transferred"]

DEFAULT_CONFIG: dict = {
    "constellation": {
        "num_orbits": 5,
        "sats_per_orbit": 8,
        "altitude_m": 2.0e6,
        "inclination_deg": 80.0,
        "phase_offset_step_deg": 0.0,
    },
    "nodes": [
        {"id": "rolla", "role": "HAP", "latitude_deg": 37.9514,
         "longitude_deg": -91.7713, "altitude_m": 2.0e4,
         "min_elevation_deg": 10.0},
    ],
    "link": {
        "tx_power_dbm": 40.0,
        "tx_gain_dbi": 6.98,
        "rx_gain_dbi": 6.98,
        "carrier_freq_hz": 2.4e9,
        "noise_temp_k": 354.81,
        "bandwidth_hz": 1.0e6,
        "fixed_rate_bps": 16.0e6,
        "proc_delay_tx_s": 0.010,
        "proc_delay_rx_s": 0.010,
        "earth_clearance_m": 0.0,
    },
    "learner": {
        "kind": "softmax_regression",
        "input_dim": 16,
        "num_classes": 10,
        "hidden_dim": 16,
        "init_seed": 0,
        "init_scale": 0.05,
    },
    "train": {
        "local_iters": 100,
        "batch_size": 32,
        "learning_rate": 0.01,
    },
    "data": {
        "source": "synthetic",
        "partition": "noniid",
        "test_fraction": 0.2,
        "samples": 5000,
        "class_sep": 3.0,
        "noise": 1.0,
        "images_path": None,
        "labels_path": None,
        "limit": None,
    },
    "mode": "async",
    "termination": {
        "target_accuracy": None,
        "max_epochs": 20,
        "max_sim_time_s": 259200.0,
    },
    "gap_fraction": 0.25,
    "collection_window_s": 1800.0,
    "compute_delay_s": 60.0,
    "master_seed": 0,
    "sync_no_relay": False,
}


def _merge(defaults, overrides, path=""):
    """Deep-merge `overrides` into `defaults`, rejecting unknown keys."""
    if not isinstance(overrides, dict):
        raise ConfigError(f"expected an object at {path or 'top level'}")
    merged = {}
    for key, default in defaults.items():
        if key in overrides and isinstance(default, dict) \
                and overrides[key] is not None:
            merged[key] = _merge(default, overrides[key], f"{path}{key}.")
        elif key in overrides:
            merged[key] = overrides[key]
        else:
            merged[key] = default
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise ConfigError("unknown configuration key(s): "
                          + ", ".join(sorted(f"{path}{k}" for k in unknown)))
    return merged


def _node_from_dict(d: dict) -> NodeSpec:
    return NodeSpec(id=str(d["id"]), role=d.get("role", "HAP"),
                    latitude=math.radians(d["latitude_deg"]),
                    longitude=math.radians(d["longitude_deg"]),
                    altitude=d.get("altitude_m", 2.0e4),
                    min_elevation=math.radians(d.get("min_elevation_deg", 10.0)))


def resolve_config_dict(raw: dict) -> dict:
    """Deep-merge `raw` over the documented defaults (unknown keys rejected)."""
    return _merge(DEFAULT_CONFIG, raw)


def config_from_dict(raw: dict) -> tuple[RunConfig, dict]:
    """Apply defaults to `raw`; returns the RunConfig and the resolved dict."""
    merged = resolve_config_dict(raw)
    c = merged["constellation"]
    li = merged["link"]
    term = merged["termination"]
    try:
        orbits = tuple(
            OrbitSpec(altitude=c["altitude_m"],
                      inclination=math.radians(c["inclination_deg"]),
                      raan=o * 2.0 * math.pi / c["num_orbits"],
                      num_sats=c["sats_per_orbit"],
                      phase_offset=o * math.radians(c["phase_offset_step_deg"]))
            for o in range(c["num_orbits"]))
        nodes = tuple(_node_from_dict(n) for n in merged["nodes"])
        return RunConfig(
            constellation=ConstellationSpec(orbits=orbits),
            nodes=nodes,
            link=LinkParams(
                tx_power_dbm=li["tx_power_dbm"], tx_gain_dbi=li["tx_gain_dbi"],
                rx_gain_dbi=li["rx_gain_dbi"], carrier_freq=li["carrier_freq_hz"],
                noise_temp=li["noise_temp_k"], bandwidth=li["bandwidth_hz"],
                fixed_rate=li["fixed_rate_bps"],
                proc_delay_tx=li["proc_delay_tx_s"],
                proc_delay_rx=li["proc_delay_rx_s"],
                earth_clearance=li["earth_clearance_m"]),
            learner=LearnerSpec(**merged["learner"]),
            train=TrainConfig(**merged["train"], rng_seed=0),
            data=DataConfig(**merged["data"]),
            mode=merged["mode"],
            termination=TerminationSpec(
                target_accuracy=term["target_accuracy"],
                max_epochs=term["max_epochs"],
                max_sim_time=term["max_sim_time_s"]),
            gap_fraction=merged["gap_fraction"],
            collection_window=merged["collection_window_s"],
            compute_delay=merged["compute_delay_s"],
            master_seed=merged["master_seed"],
            sync_no_relay=merged["sync_no_relay"],
        ), merged
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _read_raw(path: str | Path) -> dict:
    text = Path(path).read_text()
    if not text.strip():
        return {}
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc


def load_config(path: str | Path) -> RunConfig:
    """Parse, default, and validate a JSON run configuration file.

    An empty file means "all defaults".
    """
    cfg, _resolved = config_from_dict(_read_raw(path))
    return cfg


def _apply_overrides(raw: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = parsed
    return raw


def write_outputs(out_dir: Path, resolved: dict, result) -> tuple[Path, Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.csv"
    events_path = out_dir / "events.jsonl"
    config_path = out_dir / "config.json"
    with metrics_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for r in result.records:
            writer.writerow([repr(r.sim_time), r.epoch, repr(r.test_accuracy),
                             repr(r.global_loss), r.models_aggregated,
                             r.stale_selected, r.groups,
                             repr(r.bytes_transferred)])
    with events_path.open("w") as fh:
        for ev in result.events:
            fh.write(json.dumps(ev, sort_keys=True) + "\n")
    config_path.write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    return metrics_path, events_path, config_path


def _cmd_run(args) -> int:
    raw = _read_raw(args.config) if args.config else {}
    if args.mode:
        raw["mode"] = args.mode
    if args.seed is not None:
        raw["master_seed"] = args.seed
    raw = _apply_overrides(raw, args.override or [])
    cfg, resolved = config_from_dict(raw)
    result = run_simulation(cfg)
    metrics_path, events_path, config_path = write_outputs(
        Path(args.out), resolved, result)
    last = result.records[-1]
    print(f"{cfg.mode} run finished: {len(result.records)} records, "
          f"epoch {last.epoch}, accuracy {last.test_accuracy:.4f}, "
          f"sim time {last.sim_time:.1f} s"
          + (" [stalled]" if result.stalled else ""))
    print(f"metrics: {metrics_path}")
    print(f"events:  {events_path}")
    print(f"config:  {config_path}")
    return 0


def _cmd_windows(args) -> int:
    cfg = load_config(args.config)
    horizon = args.hours * 3600.0
    total = 0
    for node in cfg.nodes:
        wins = visibility_windows(cfg.constellation, node, 0.0, horizon,
                                  constants=cfg.constants)
        print(f"# node {node.id}: {len(wins)} windows over {args.hours} h")
        for w in wins:
            print(f"{node.id:>10s} {w.sat.label:>10s} "
                  f"enter={w.enter:12.3f} exit={w.exit:12.3f} "
                  f"dur={w.exit - w.enter:9.3f}")
        total += len(wins)
    print(f"# total {total} windows")
    return 0


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"config OK: {cfg.constellation.num_orbits} orbits, "
          f"{cfg.constellation.num_sats} satellites, {len(cfg.nodes)} node(s), "
          f"mode {cfg.mode}, seed {cfg.master_seed}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leofl",
        description="Simulate federated learning over a LEO constellation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a simulation run")
    p_run.add_argument("--config", help="JSON config path (defaults apply)")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--mode", choices=["async", "sync"])
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--override", nargs="*", metavar="KEY=VALUE",
                       help="dotted-path config overrides")
    p_run.set_defaults(func=_cmd_run)

    p_win = sub.add_parser("windows", help="print visibility windows")
    p_win.add_argument("--config", required=True)
    p_win.add_argument("--hours", type=float, default=24.0)
    p_win.set_defaults(func=_cmd_windows)

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, LookupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())
