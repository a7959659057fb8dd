import json
import math
from pathlib import Path

import numpy as np
import pytest

from molcom.channel import sir
from molcom.experiments import ConfigError, ResultTable, batch_stderr, config_hash, load_config, parse_config, run_experiment
from molcom.experiments.runners import half_life_label, loglog_slope

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SPHERE = {"distance_um": 4.0, "diffusivity_um2_per_s": 79.4, "receiver_radius_um": 10.0, "dimension": 3}
ONE_D = {"distance_um": 1.0, "diffusivity_um2_per_s": 1.0, "dimension": 1}

SMALL = {
    "sir_sweep": {"experiment": "sir_sweep", "channel": SPHERE, "symbol_periods_s": [0.1, 1.0, 10.0]},
    "fec_vs_drift": {
        "experiment": "fec_vs_drift",
        "channel": ONE_D,
        "drifts_um_per_s": [1.0, 8.0],
        "codewords_per_point": 2000,
        "moco_trials": 500,
    },
    "detector_comparison": {
        "experiment": "detector_comparison",
        "channel": {"distance_um": 2e4, "diffusivity_um2_per_s": 1e7, "receiver_radius_um": 2e4, "dimension": 3},
        "snr_db": [0.0, 10.0],
        "symbol_period_s": 4.0,
        "tap_count": 10,
        "memory_lengths": [1, 2],
        "bits_per_point": 2000,
        "frame_length": 200,
    },
    "passband_spectrum": {
        "experiment": "passband_spectrum",
        "channel": {"distance_um": 5.0, "diffusivity_um2_per_s": 100.0, "receiver_radius_um": 5.0, "dimension": 3},
        "amplitude_um": 2.0,
        "carrier_frequencies_hz": [0.5],
        "emission_rate_per_s": 100.0,
        "sample_rate_hz": 5.0,
        "duration_s": 20.0,
        "warmup_s": 5.0,
    },
    "pathloss_table": {"experiment": "pathloss_table", "channel": ONE_D, "distances_um": [1.0, 2.0, 4.0]},
    "pulse_shaping": {
        "experiment": "pulse_shaping",
        "channel": {"distance_um": 0.05, "diffusivity_um2_per_s": 1.0},
        "symbol_periods_s": [0.1],
        "horizon_s": 0.2,
    },
}


# -- configuration --------------------------------------------------------------------------


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    cfg = load_config(path)
    assert len(config_hash(cfg)) == 64


@pytest.mark.parametrize(
    "mutate,field",
    [
        (lambda d: d.update(bogus=1), "bogus"),
        (lambda d: d["channel"].update(distance_um=-1.0), "channel.distance_um"),
        (lambda d: d.update(symbol_periods_s=[1.0, 0.5, 2.0]), "symbol_periods_s"),
        (lambda d: d.update(batches=5), "batches"),
        (lambda d: d["channel"].pop("receiver_radius_um"), "channel"),
    ],
)
def test_invalid_config_names_field(mutate, field):
    data = json.loads(json.dumps(SMALL["sir_sweep"]))
    mutate(data)
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        parse_config(data)


def test_unknown_or_missing_experiment():
    with pytest.raises(ConfigError, match="experiment"):
        parse_config({"experiment": "nope"})
    with pytest.raises(ConfigError, match="experiment"):
        parse_config({})


def test_fec_requires_1d_channel():
    data = dict(SMALL["fec_vs_drift"], channel=SPHERE)
    with pytest.raises(ConfigError, match="dimension"):
        parse_config(data)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("experiment = \n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_config_hash_tracks_content():
    a = parse_config(SMALL["sir_sweep"])
    b = parse_config(dict(SMALL["sir_sweep"], seed=1))
    assert config_hash(a) == config_hash(parse_config(SMALL["sir_sweep"]))
    assert config_hash(a) != config_hash(b)


# -- result tables ----------------------------------------------------------------------------


def test_result_table_csv_layout(tmp_path):
    t = ResultTable("x", [1.0, 2.0])
    t.add("a", "ber", [0.5, 0.25], [0.1, 0.05])
    t.add("b", "ber", [0.1, 0.0])
    assert t.header == ["x", "ber_a", "stderr_a", "ber_b", "stderr_b"]
    csv_path, meta_path = t.write(tmp_path, "demo")
    assert csv_path.read_text() == t.to_csv_text()
    assert csv_path.read_text().splitlines()[1] == "1.0,0.5,0.1,0.1,0.0"
    assert json.loads(meta_path.read_text()) == {}
    with pytest.raises(ValueError):
        t.add("a", "ber", [0.0, 0.0])
    with pytest.raises(ValueError):
        t.add("c", "ber", [0.0])
    with pytest.raises(KeyError):
        t["zzz"]


def test_batch_stderr_matches_iid_formula():
    # one 20-batch estimate scatters by ~16%, so average the ratio over seeds
    ratios = [batch_stderr(np.random.default_rng(s).standard_normal(20_000), 20) * math.sqrt(20_000) for s in range(40)]
    assert np.mean(ratios) == pytest.approx(1.0, abs=0.06)
    with pytest.raises(ValueError):
        batch_stderr([1.0, 2.0], 20)


def test_loglog_slope():
    d = np.array([1.0, 2.0, 4.0, 8.0])
    assert loglog_slope(d, 3 * d**-2.5) == pytest.approx(-2.5)


# -- runners ------------------------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(SMALL))
def test_runner_deterministic(name):
    cfg = parse_config(SMALL[name])
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert a.to_csv_text() == b.to_csv_text()
    meta = a.metadata
    assert meta["experiment"] == name
    assert meta["config_hash"] == config_hash(cfg)
    assert {"seed", "git_describe", "runtime_s"} <= set(meta)


def test_seed_changes_stochastic_output():
    a = run_experiment(parse_config(SMALL["fec_vs_drift"]))
    b = run_experiment(parse_config(dict(SMALL["fec_vs_drift"], seed=1)))
    assert a.to_csv_text() != b.to_csv_text()


def test_sir_curve_matches_channel_function():
    cfg = parse_config(SMALL["sir_sweep"])
    t = run_experiment(cfg)
    params = cfg.channel.params()
    np.testing.assert_allclose(t["lambda0"].values, [sir(params, x) for x in cfg.symbol_periods_s])
    assert t.labels == [half_life_label(h) for h in cfg.half_lives_s]
    assert half_life_label(8.0) == "halflife8s"


def test_sir_monte_carlo_overlay():
    cfg = parse_config(dict(SMALL["sir_sweep"], half_lives_s=[math.inf], symbol_periods_s=[0.1, 0.5],
                            monte_carlo_particles=20_000))
    t = run_experiment(cfg)
    assert t["mc_lambda0"].metric == "signal"
    assert np.all(t["mc_lambda0"].stderr > 0)


def test_fec_table_shape_and_trend():
    t = run_experiment(parse_config(SMALL["fec_vs_drift"]))
    assert t.axis_name == "v_um_per_s"
    assert t.labels == ["rm84", "dhw", "moco", "moco_search", "moco_noguard", "isifree"]
    for s in t.series:
        assert s.values[1] <= s.values[0]
    assert set(t.metadata["moco_search"]) == {"1.0", "8.0"}


def test_detector_table_labels():
    t = run_experiment(parse_config(SMALL["detector_comparison"]))
    assert t.labels == ["map_I1", "map_I2", "mmse_I1", "mmse_I2", "dff_I1", "dff_I2", "diff"]
    assert t.header[1] == "ber_map_I1"


def test_pathloss_slopes_small():
    t = run_experiment(parse_config(dict(SMALL["pathloss_table"], distances_um=[1.0, 2.0, 4.0, 8.0])))
    slopes = t.metadata["loglog_slopes"]
    assert slopes["total_hitting_response"] == pytest.approx(-1.0, abs=0.05)
    assert slopes["em_pathloss"] == pytest.approx(-2.0, abs=0.05)
    assert slopes["peak_hitting_amplitude"] == pytest.approx(-3.0, abs=0.05)


def test_literal_units_detector_config_is_rejected_as_dead_channel():
    cfg = load_config(CONFIGS / "detector_comparison_literal_units.toml")
    with pytest.raises(ValueError, match="peak tap .* too small"):
        run_experiment(cfg)
