"""Experiment driver: sweeps, pairing, SER, benchmarks, serialization."""

import numpy as np
import pytest

from slprecode import sim
from tests.conftest import H_REF


SNR_3 = 10.0 * np.log10(3.0)


def _cfg(**kw):
    base = dict(methods=("OB", "SLP-symmetry"), K=2, M=2,
                constellations=("qpsk",), snr_db=(SNR_3,), trials=3, seed=5)
    base.update(kw)
    return sim.ExperimentConfig(**base)


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------
def test_config_broadcasts_constellations():
    cfg = _cfg(K=3, M=3)
    assert cfg.constellations == ("qpsk", "qpsk", "qpsk")


def test_config_validation():
    with pytest.raises(ValueError):
        _cfg(trials=0)
    with pytest.raises(ValueError):
        _cfg(methods=("OB", "nope"))
    with pytest.raises(ValueError):
        _cfg(channel_model="rayleigh-ish")
    with pytest.raises(ValueError):
        _cfg(K=3, constellations=("qpsk", "8qam"))
    with pytest.raises(ValueError):
        _cfg(snr_db=())


def test_config_json_round_trip():
    cfg = _cfg(channel_model="correlated", correlation=0.6 + 0.2j,
               snr_db=(0.0, 3.0, 6.0))
    back = sim.ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg


def test_manifest_contains_config_and_version():
    m = sim.manifest(_cfg(), note="x")
    assert m["note"] == "x"
    assert "package_version" in m
    assert m["config"]["K"] == 2


# ----------------------------------------------------------------------
# power sweeps
# ----------------------------------------------------------------------
def test_sweep_is_deterministic():
    cfg = _cfg()
    a = sim.run_power_sweep(cfg)
    b = sim.run_power_sweep(cfg)
    for m in cfg.methods:
        np.testing.assert_array_equal(a.trial_powers[m], b.trial_powers[m])


def test_seed_changes_draws():
    a = sim.run_power_sweep(_cfg(seed=1))
    b = sim.run_power_sweep(_cfg(seed=2))
    assert not np.allclose(a.trial_powers["OB"], b.trial_powers["OB"])


def test_fixed_channel_sweep_matches_reference():
    cfg = _cfg(trials=1, methods=("OB", "SLP", "SLP-symmetry"))
    res = sim.run_power_sweep(cfg, fixed_channel=H_REF)
    assert res.mean_power_db("OB", 0) == pytest.approx(33.5573, abs=1e-3)
    assert res.mean_power_db("SLP", 0) == pytest.approx(35.2649, abs=1e-3)
    assert res.mean_power_db("SLP-symmetry", 0) == pytest.approx(
        res.mean_power_db("SLP", 0), abs=1e-6)


def test_paired_dominance_rotation_never_hurts():
    """Per draw and SNR, the rotation search only lowers average power."""
    cfg = _cfg(methods=("SLP-symmetry", "SLPRo-symmetry"), trials=4,
               eps=1e-2, node_cap=40, snr_db=(SNR_3, SNR_3 + 3.0))
    res = sim.run_power_sweep(cfg)
    slp_p = res.trial_powers["SLP-symmetry"]
    rot_p = res.trial_powers["SLPRo-symmetry"]
    assert slp_p.shape == rot_p.shape == (2, 4)
    assert np.all(rot_p <= slp_p * (1 + 1e-7))


def test_scaling_shortcut_matches_explicit_solves():
    cfg_fast = _cfg(methods=("SLP-symmetry",), trials=2,
                    snr_db=(SNR_3, SNR_3 + 5.0), scaling_shortcut=True)
    cfg_slow = _cfg(methods=("SLP-symmetry",), trials=2,
                    snr_db=(SNR_3, SNR_3 + 5.0), scaling_shortcut=False)
    a = sim.run_power_sweep(cfg_fast)
    b = sim.run_power_sweep(cfg_slow)
    np.testing.assert_allclose(a.trial_powers["SLP-symmetry"],
                               b.trial_powers["SLP-symmetry"], rtol=1e-6)


def test_correlated_model_runs():
    cfg = _cfg(channel_model="correlated", correlation=0.9, trials=2)
    res = sim.run_power_sweep(cfg)
    assert res.trial_count == 2


def test_power_csv_format():
    res = sim.run_power_sweep(_cfg(trials=2))
    text = sim.power_csv(res)
    lines = text.strip().split("\n")
    assert lines[0] == "method,snr_db,mean_power_db,std_db,trials"
    assert len(lines) == 1 + 2 * 1     # 2 methods x 1 snr


# ----------------------------------------------------------------------
# symbol error rate
# ----------------------------------------------------------------------
def test_ser_noiseless_is_zero():
    cfg = _cfg(methods=("SLP-symmetry",), trials=1, snr_db=(SNR_3,))
    res = sim.run_ser(cfg, noise_trials=8, fixed_channel=H_REF,
                      noise_scale=0.0)
    np.testing.assert_array_equal(res.ser, 0.0)


def test_ser_decreases_with_snr():
    cfg = _cfg(methods=("SLP-symmetry",), trials=1,
               snr_db=(0.0, 6.0, 12.0))
    res = sim.run_ser(cfg, noise_trials=400, fixed_channel=H_REF)
    assert res.ser[0] > res.ser[-1]
    assert res.ser[-1] < 0.05


def test_ser_requires_table_method():
    cfg = _cfg(methods=("OB",), trials=1)
    with pytest.raises(ValueError):
        sim.run_ser(cfg, method="OB")


def test_ser_csv_format():
    cfg = _cfg(methods=("SLP-symmetry",), trials=1)
    res = sim.run_ser(cfg, noise_trials=4, fixed_channel=H_REF)
    text = sim.ser_csv(res, "SLP-symmetry")
    assert text.startswith("method,snr_db,ser,sends\n")


# ----------------------------------------------------------------------
# benchmarks
# ----------------------------------------------------------------------
def test_bench_rows_and_lookup():
    cfg = _cfg(methods=("SLP", "SLP-symmetry"), trials=1)
    res = sim.run_bench(cfg, modulations=("qpsk",), repeats=1)
    assert len(res.rows) == 2
    assert res.median("SLP", "qpsk") > 0.0
    with pytest.raises(KeyError):
        res.median("SLP", "16qam")
    text = sim.bench_csv(res)
    assert text.startswith("method,modulation,median_sec\n")
