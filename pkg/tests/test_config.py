"""Tests for YAML run-configuration validation and the provenance echo."""

import textwrap
from datetime import datetime, timedelta

import numpy as np
import pytest
import yaml

from stockpile import config
from stockpile.errors import ConfigError, DataError

MINIMAL = """\
schema_version: 1
scenario: no_imports
catalog:
  generators:
    - name: wind
      capital_cost: 2.0
      max_capacity: 18.0
  storages:
    - name: cavern
      capital_cost_out: 1.5
      capital_cost_in: 1.0
      capital_cost_energy: 0.02
      efficiency_out: 0.4
      efficiency_in: 0.7
      max_power_out: 12.0
      max_power_in: 12.0
      max_energy: 80.0
      long_duration: true
lattice:
  period_hours: 1.0
  stages:
    - realizations:
        - demand: [5.0, 5.0]
          capacity_factors: {wind: [0.9, 0.8]}
    - realizations:
        - demand: [5.0, 5.0]
          capacity_factors: {wind: [0.2, 0.1]}
        - demand: [4.0, 4.0]
          capacity_factors: {wind: [0.7, 0.9]}
training:
  seed: 7
  max_iterations: 20
simulation:
  seed: 11
  n_paths: 50
"""


def write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_minimal_config_round_trip(tmp_path):
    """A minimal valid config resolves the preset scenario, builds the
    catalog and lattice, and carries training and simulation options."""
    cfg = config.validate_config(write(tmp_path, MINIMAL))
    assert cfg.scenario.name == "no_imports"
    assert cfg.scenario.voll == 100_000.0
    assert cfg.scenario.spot_price is None
    assert [g.name for g in cfg.catalog.generators] == ["wind"]
    assert cfg.catalog.storage("cavern").long_duration
    assert cfg.lattice.n_stages == 2
    assert cfg.lattice.branch_count(2) == 2
    assert cfg.training.seed == 7
    assert cfg.training.max_iterations == 20
    assert cfg.simulation_seed == 11
    assert cfg.simulation_paths == 50
    assert len(cfg.source_hash) == 64


def test_constrained_imports_preset_resolves(tmp_path):
    """Naming the capped import preset fills the 250 EUR/MWh price and
    the 5.5 GWh/h cap."""
    text = MINIMAL.replace("scenario: no_imports",
                           "scenario: constrained_imports")
    cfg = config.validate_config(write(tmp_path, text))
    assert cfg.scenario.spot_price == 250.0
    assert cfg.scenario.spot_cap == 5.5


def test_negative_efficiency_names_the_field(tmp_path):
    """A storage efficiency outside (0, 1] is reported with the path of
    the offending entry."""
    text = MINIMAL.replace("efficiency_out: 0.4", "efficiency_out: -0.4")
    with pytest.raises(ConfigError, match=r"catalog\.storages\[0\]"):
        config.validate_config(write(tmp_path, text))


def test_all_violations_reported_not_just_first(tmp_path):
    """Several independent problems are all listed in one error."""
    text = MINIMAL.replace("schema_version: 1", "schema_version: 99")
    text = text.replace("capital_cost: 2.0", "capital_cost: -2.0")
    text = text.replace("seed: 7\n", "")
    with pytest.raises(ConfigError) as err:
        config.validate_config(write(tmp_path, text))
    joined = "\n".join(err.value.violations)
    assert len(err.value.violations) >= 3
    assert "schema_version" in joined
    assert "catalog.generators[0]" in joined
    assert "training.seed" in joined


def test_unknown_field_rejected(tmp_path):
    text = MINIMAL.replace("capital_cost: 2.0",
                           "capital_cost: 2.0\n      capitol: 1.0")
    with pytest.raises(ConfigError, match="unknown field"):
        config.validate_config(write(tmp_path, text))


def test_missing_capacity_factors_for_weather_generator(tmp_path):
    text = MINIMAL.replace("capacity_factors: {wind: [0.2, 0.1]}",
                           "capacity_factors: {}")
    with pytest.raises(ConfigError, match="wind"):
        config.validate_config(write(tmp_path, text))


def test_missing_file_and_bad_yaml_are_data_errors(tmp_path):
    with pytest.raises(DataError):
        config.validate_config(str(tmp_path / "absent.yaml"))
    with pytest.raises(DataError):
        config.validate_config(write(tmp_path, "a: [unclosed"))


def test_preset_fields_merge_with_overrides(tmp_path):
    """A technology preset fills cost fields; explicit values win."""
    text = textwrap.dedent("""\
    schema_version: 1
    scenario: no_imports
    catalog:
      generators:
        - name: wind
          preset: onshore_wind
          capital_cost: 3.5
          max_capacity: 10.0
      storages:
        - name: store
          preset: hydrogen_cavern
          max_power_out: 2.0
          max_power_in: 2.0
          max_energy: 100.0
    lattice:
      period_hours: 2.0
      stages:
        - realizations:
            - demand: [1.0]
              capacity_factors: {wind: [0.5]}
    """)
    cfg = config.validate_config(write(tmp_path, text))
    wind = cfg.catalog.generators[0]
    assert wind.capital_cost == 3.5
    assert wind.marginal_cost == pytest.approx(2.1)
    store = cfg.catalog.storage("store")
    assert store.efficiency_out == pytest.approx(0.43)
    assert store.long_duration
    assert store.max_energy == 100.0


def test_echo_is_deterministic_and_carries_hashes(tmp_path):
    """Two validations of the same file give byte-identical echoes; the
    echo parses as YAML and records the source hash."""
    path = write(tmp_path, MINIMAL)
    cfg1 = config.validate_config(path)
    cfg2 = config.validate_config(path)
    assert config.echo_text(cfg1) == config.echo_text(cfg2)
    doc = yaml.safe_load(config.echo_text(cfg1))
    assert doc["source"]["config_sha256"] == cfg1.source_hash
    assert doc["scenario"]["voll"] == 100_000.0
    assert doc["lattice"]["stages"][1]["realizations"][0]["demand"] == [5.0, 5.0]
    merged = config.echo_text(cfg1, extra_hashes={"policy_sha256": "abc"})
    assert yaml.safe_load(merged)["source"]["policy_sha256"] == "abc"


def test_series_lattice_from_file(tmp_path):
    """A one-year hourly series with a block size builds a 12-stage
    monthly lattice and records the series content hash."""
    start = datetime(1990, 7, 1)
    rows = ["timestamp,demand,cf_wind"]
    rng = np.random.default_rng(0)
    for h in range(8760):
        ts = start + timedelta(hours=h)
        rows.append(f"{ts.isoformat()},{5 + (h % 24) / 24:.3f},"
                    f"{rng.uniform(0, 1):.4f}")
    series = tmp_path / "series.csv"
    series.write_text("\n".join(rows) + "\n")
    text = textwrap.dedent(f"""\
    schema_version: 1
    scenario: no_imports
    catalog:
      generators:
        - name: wind
          capital_cost: 2.0
          max_capacity: 18.0
    lattice:
      series: {series}
      block: 24
    """)
    cfg = config.validate_config(write(tmp_path, text))
    assert cfg.lattice.n_stages == 12
    assert cfg.lattice.branch_count(1) == 1
    assert cfg.lattice.periods(1) == 31
    assert "series_sha256" in cfg.resolved["source"]


def test_lattice_requires_exactly_one_source(tmp_path):
    text = MINIMAL.replace("lattice:\n  period_hours: 1.0",
                           "lattice:\n  series: x.csv\n  period_hours: 1.0")
    with pytest.raises(ConfigError, match="exactly one"):
        config.validate_config(write(tmp_path, text))
