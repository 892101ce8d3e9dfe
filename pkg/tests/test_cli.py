import json
import math
from pathlib import Path

import pytest

from leofl.cli import (DEFAULT_CONFIG, METRICS_COLUMNS, config_from_dict,
                       load_config, main, resolve_config_dict)
from leofl.sim_engine import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small_run_config(tmp_path, **extra):
    raw = {
        "constellation": {"num_orbits": 2, "sats_per_orbit": 8,
                          "altitude_m": 2.0e6, "inclination_deg": 80.0},
        "data": {"partition": "iid", "samples": 600},
        "termination": {"target_accuracy": None, "max_epochs": 2,
                        "max_sim_time_s": 40000.0},
        "collection_window_s": 600.0,
    }
    raw.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    return path


class TestLoadConfig:
    def test_empty_file_gives_table_defaults(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        cfg = load_config(path)
        assert cfg.link.tx_power_dbm == 40.0
        assert cfg.link.tx_gain_dbi == 6.98
        assert cfg.link.rx_gain_dbi == 6.98
        assert cfg.link.carrier_freq == 2.4e9
        assert cfg.link.noise_temp == 354.81
        assert cfg.link.fixed_rate == 16.0e6
        assert cfg.train.local_iters == 100
        assert cfg.train.learning_rate == 0.01
        assert cfg.train.batch_size == 32
        assert cfg.constellation.num_orbits == 5
        assert cfg.nodes[0].min_elevation == pytest.approx(math.radians(10.0))
        assert cfg.nodes[0].altitude == 2.0e4

    def test_negative_altitude_names_field(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"constellation": {"altitude_m": -1.0}}))
        with pytest.raises(ConfigError, match="altitude"):
            load_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"foo": 1}))
        with pytest.raises(ConfigError, match="foo"):
            load_config(path)

    def test_nested_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"link": {"warp_drive": True}}))
        with pytest.raises(ConfigError, match="link.warp_drive"):
            load_config(path)

    def test_parse_error_reports_position(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\n  broken\n}")
        with pytest.raises(ConfigError, match="line 2"):
            load_config(path)

    def test_shipped_configs_valid(self):
        for name in ("reference.json", "sparse_one_hap.json",
                     "sparse_two_hap.json"):
            cfg = load_config(CONFIGS / name)
            assert cfg.constellation.num_sats == 40


class TestMain:
    def test_validate_ok(self, tmp_path, capsys):
        path = small_run_config(tmp_path)
        assert main(["validate", "--config", str(path)]) == 0
        assert "config OK" in capsys.readouterr().out

    def test_unknown_flag_exits_2(self, capsys):
        assert main(["run", "--nonsense"]) == 2

    def test_unknown_command_exits_2(self, capsys):
        assert main(["frobnicate"]) == 2

    def test_missing_config_file_fails(self, tmp_path, capsys):
        rc = main(["validate", "--config", str(tmp_path / "absent.json")])
        assert rc == 1

    def test_windows_prints_table(self, tmp_path, capsys):
        path = tmp_path / "defaults.json"
        path.write_text("{}")
        assert main(["windows", "--config", str(path), "--hours", "4"]) == 0
        out = capsys.readouterr().out
        assert "windows" in out
        assert "sat-" in out

    def test_run_writes_outputs(self, tmp_path, capsys):
        path = small_run_config(tmp_path)
        out_dir = tmp_path / "out"
        assert main(["run", "--config", str(path), "--out", str(out_dir)]) == 0
        metrics = (out_dir / "metrics.csv").read_text().splitlines()
        assert metrics[0] == ",".join(METRICS_COLUMNS)
        assert len(metrics) == 1 + 3            # header + initial + 2 epochs
        events = (out_dir / "events.jsonl").read_text().splitlines()
        assert all(json.loads(line) for line in events)
        agg_count = sum(1 for line in events
                        if json.loads(line)["kind"] == "AggregationDone")
        assert len(metrics) - 2 == agg_count

    def test_run_determinism_byte_identical(self, tmp_path):
        path = small_run_config(tmp_path)
        rc1 = main(["run", "--config", str(path), "--out", str(tmp_path / "a")])
        rc2 = main(["run", "--config", str(path), "--out", str(tmp_path / "b")])
        assert rc1 == rc2 == 0
        assert (tmp_path / "a/metrics.csv").read_bytes() \
            == (tmp_path / "b/metrics.csv").read_bytes()
        assert (tmp_path / "a/events.jsonl").read_bytes() \
            == (tmp_path / "b/events.jsonl").read_bytes()

    def test_config_echo_reproduces_run(self, tmp_path):
        path = small_run_config(tmp_path)
        main(["run", "--config", str(path), "--out", str(tmp_path / "a")])
        main(["run", "--config", str(tmp_path / "a/config.json"),
              "--out", str(tmp_path / "b")])
        assert (tmp_path / "a/metrics.csv").read_bytes() \
            == (tmp_path / "b/metrics.csv").read_bytes()

    def test_seed_flag_changes_outputs(self, tmp_path):
        path = small_run_config(tmp_path)
        main(["run", "--config", str(path), "--out", str(tmp_path / "a"),
              "--seed", "1"])
        main(["run", "--config", str(path), "--out", str(tmp_path / "b"),
              "--seed", "2"])
        assert (tmp_path / "a/metrics.csv").read_bytes() \
            != (tmp_path / "b/metrics.csv").read_bytes()

    def test_override_flag(self, tmp_path):
        path = small_run_config(tmp_path)
        out = tmp_path / "out"
        assert main(["run", "--config", str(path), "--out", str(out),
                     "--override", "termination.max_epochs=1",
                     "collection_window_s=900"]) == 0
        resolved = json.loads((out / "config.json").read_text())
        assert resolved["termination"]["max_epochs"] == 1
        assert resolved["collection_window_s"] == 900

    def test_mode_flag_switches_mode(self, tmp_path):
        path = small_run_config(tmp_path)
        out = tmp_path / "out"
        assert main(["run", "--config", str(path), "--out", str(out),
                     "--mode", "sync"]) == 0
        resolved = json.loads((out / "config.json").read_text())
        assert resolved["mode"] == "sync"


def test_resolved_dict_covers_defaults():
    resolved = resolve_config_dict({})
    assert resolved == DEFAULT_CONFIG
    cfg, echo = config_from_dict({"master_seed": 7})
    assert cfg.master_seed == 7
    assert echo["master_seed"] == 7
