from dataclasses import replace

import pytest

from client import StopRule
from config import (
    PRESET_DIR,
    ExperimentConfig,
    available_presets,
    format_value,
    parse_config,
    render_config,
    write_config,
)
from errors import ConfigError
from network import GammaScope, OutcomeKind
from routing_table import BucketFill
from workload import OriginPolicy

PRESETS = [
    "fig2_sampling80", "fig4_africa", "fig4_south_america", "fig4_us_eu", "fig5_hops", "fig6_overhead",
    "fig7_seed10k", "fig7_seed1k", "fig8_seed262k", "fig8_seed65k_scaled", "multi_seeder", "provide_hops",
]


def _write(tmp_path, text: str):
    path = tmp_path / "run.ini"
    path.write_text(text, encoding="utf-8")
    return path


def test_empty_config_requires_experiment(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        parse_config(_write(tmp_path, ""))
    assert excinfo.value.key == "experiment"


def test_defaults():
    config = parse_config(overrides={"experiment": "hops"})
    assert (config.k, config.alpha, config.beta) == (20, 3, 20)
    assert config.node_count == 12000
    assert config.fast_error_rate == 0.10
    assert config.delay_ms == (90.0, 420.0)
    assert config.gamma_scope is GammaScope.CALLEE
    assert config.stop_rule is StopRule.CLOSEST_QUERIED
    assert config.stall_limit == 4
    assert config.bucket_fill is BucketFill.RANDOM
    assert config.network_params().bucket_fill is BucketFill.RANDOM
    assert config.dht_params().stall_limit == 4
    assert config.origin_policy is OriginPolicy.FIXED
    assert config.experiment_id == "hops-s1"


def test_flags_override_file(tmp_path):
    path = _write(tmp_path, "[run]\nexperiment = sampling\n\n[netsim]\ngamma_ms = 0.1\nnode_count = 500\n")
    config = parse_config(path, {"gamma_ms": "0.015", "k": None})
    assert config.gamma_ms == 0.015
    assert config.node_count == 500
    assert config.k == 20


def test_value_parsing(tmp_path):
    path = _write(tmp_path, (
        "[run]\nexperiment = seeding\n\n"
        "[netsim]\ndelay_ms = 10:20.5\npersist_load = yes\ngamma_scope = Both\n\n"
        "[dht]\nstop_rule = stalled\n\n"
        "[workload]\norigin_policy = per-lookup\n"
    ))
    config = parse_config(path)
    assert config.delay_ms == (10.0, 20.5)
    assert config.persist_load is True
    assert config.gamma_scope is GammaScope.BOTH
    assert config.stop_rule is StopRule.STALLED
    assert config.origin_policy is OriginPolicy.PER_LOOKUP
    params = config.network_params()
    assert params.conn_delay_range == (10.0, 20.5)
    assert params.range_us(OutcomeKind.SUCCESS) == (10000, 20500)


@pytest.mark.parametrize("overrides, key", [
    ({"fast_error_rate": "1.5"}, "fast_error_rate"),
    ({"delay_ms": "300:50"}, "delay_ms"),
    ({"delay_ms": "300"}, "delay_ms"),
    ({"k": "twenty"}, "k"),
    ({"gamma_scope": "everyone"}, "gamma_scope"),
    ({"stall_limit": "0"}, "stall_limit"),
    ({"bucket_fill": "sorted"}, "bucket_fill"),
    ({"persist_load": "maybe"}, "persist_load"),
    ({"experiment": "gossip"}, "experiment"),
    ({"sample_count": "300000"}, "sample_count"),
    ({"seeders": "20", "node_count": "10"}, "seeders"),
    ({"repeat": "0"}, "repeat"),
    ({"colour": "blue"}, "colour"),
])
def test_invalid_values_name_the_key(overrides, key):
    with pytest.raises(ConfigError) as excinfo:
        parse_config(overrides={"experiment": "seeding", **overrides})
    assert excinfo.value.key == key
    assert str(excinfo.value).startswith(f"{key}: ")


def test_unknown_keys_and_sections_are_rejected(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        parse_config(_write(tmp_path, "[run]\nexperiment = hops\nspeed = 3\n"))
    assert excinfo.value.key == "speed"
    with pytest.raises(ConfigError) as excinfo:
        parse_config(_write(tmp_path, "[gossip]\nfanout = 8\n"))
    assert excinfo.value.key == "gossip"
    with pytest.raises(ConfigError) as excinfo:
        parse_config(_write(tmp_path, "[dht]\nexperiment = hops\n"))
    assert excinfo.value.key == "experiment"


def test_missing_file_or_preset():
    with pytest.raises(ConfigError) as excinfo:
        parse_config("no_such_preset")
    assert excinfo.value.key == "config"


def test_presets_are_listed():
    assert available_presets() == PRESETS


@pytest.mark.parametrize("name", PRESETS)
def test_preset_echo_is_byte_identical(name):
    config = parse_config(name)
    assert render_config(config) == (PRESET_DIR / f"{name}.ini").read_text(encoding="utf-8")


def test_fig8_preset_values():
    config = parse_config("fig8_seed262k")
    assert config.experiment == "seeding"
    assert config.sample_count == 262_144
    assert config.gamma_ms == 0.015
    assert config.gamma_scope is GammaScope.BOTH


def test_echo_reproduces_config(tmp_path):
    config = parse_config(overrides={
        "experiment": "sampling", "gamma_ms": "0.0125", "slow_delay_ms": "1500.5:2500", "seed": "9",
    })
    path = write_config(config, tmp_path / "nested" / "config.ini")
    assert parse_config(path) == config


def test_format_value():
    assert format_value((50.0, 300.0)) == "50:300"
    assert format_value(0.015) == "0.015"
    assert format_value(True) == "true"
    assert format_value(StopRule.STALLED) == "stalled"
    assert format_value(12000) == "12000"


def test_snapshot_is_json_friendly():
    config = replace(ExperimentConfig(), experiment="hops")
    snapshot = config.snapshot()
    assert snapshot["netsim"]["delay_ms"] == [90.0, 420.0]
    assert snapshot["dht"]["stop_rule"] == "closest-queried"
    assert snapshot["dht"]["bucket_fill"] == "random"
    assert list(snapshot) == ["run", "netsim", "dht", "workload"]


def test_comments_are_ignored(tmp_path):
    path = _write(tmp_path, "; sweep base\n[run]\nexperiment = seeding   ; provides\n\n[netsim]\ndelay_ms = 20:40 ; fitted\n")
    config = parse_config(path)
    assert config.experiment == "seeding"
    assert config.delay_ms == (20.0, 40.0)
