import warnings

import numpy as np
import pytest

from rcdetect import detector as D
from rcdetect import models, signals
from rcdetect.models import LotkaVolterra, WilsonCowan


@pytest.fixture(scope="module")
def lv():
    return LotkaVolterra(models.lv_fig2_like())


@pytest.fixture(scope="module")
def forcing():
    return signals.sinusoid_bank(8, 0.8, 1, 9, seed=3)


def small_train(lv, forcing, **kw):
    cfg = D.DetectorConfig(M=kw.pop("M", 25), **kw)
    return D.train(lv, forcing, cfg, T_hat=20.0, dt=0.01, seed=5, x0=models.lv_fig2_equilibrium())


@pytest.fixture(scope="module")
def standard(lv, forcing):
    return small_train(lv, forcing)


@pytest.fixture(scope="module")
def parallel(lv, forcing):
    return small_train(lv, forcing, architecture="pseudo-parallel", M=40)


def test_derive_seed_is_stable_and_distinct():
    assert D.derive_seed(1, 2) == D.derive_seed(1, 2)
    assert len({D.derive_seed(1, k) for k in range(50)}) == 50
    assert D.derive_seed(1, 2) != D.derive_seed(2, 1)


def test_standard_layout(standard, lv):
    (unit,) = standard.units
    assert unit.reservoir.M == 8 * 25
    assert list(unit.channels) == list(range(8))
    assert list(unit.inputs) == list(range(8))
    assert standard.n_channels == 8


def test_pseudo_parallel_layout(parallel, lv):
    assert len(parallel.units) == 8
    chans = np.concatenate([u.channels for u in parallel.units])
    assert sorted(chans.tolist()) == list(range(8))
    for i, u in enumerate(parallel.units):
        assert u.reservoir.M == 40
        assert list(u.inputs) == list(lv.neighborhood(i))


def test_wc_pseudo_parallel_feeds_both_populations():
    wc = WilsonCowan(models.wc_preset())
    cfg = D.DetectorConfig(architecture="pseudo_parallel", M=10)
    layout = D._unit_layout(wc, cfg)
    node, inputs, chans = layout[0]
    assert list(inputs) == [0, 1, 2, 3, 6, 7]
    assert list(chans) == [0]


def test_training_fits_the_forcing(standard):
    assert max(standard.manifest["training_rmse"]) < 0.1


def test_training_is_deterministic(lv, forcing, standard):
    again = small_train(lv, forcing)
    assert np.array_equal(again.units[0].readout.W_out, standard.units[0].readout.W_out)


def test_threads_do_not_change_results(lv, forcing, parallel):
    cfg = D.DetectorConfig(architecture="pseudo_parallel", M=40)
    threaded = D.train(lv, forcing, cfg, 20.0, 0.01, seed=5, x0=models.lv_fig2_equilibrium(), threads=3)
    for a, b in zip(threaded.units, parallel.units):
        assert np.array_equal(a.readout.W_out, b.readout.W_out)


def test_retraining_one_unit_leaves_others_untouched(lv, forcing):
    det = small_train(lv, forcing, architecture="pseudo_parallel", M=30)
    before = [u.readout.W_out.copy() for u in det.units]
    D.retrain_unit(det, lv, 3, seed=999)
    for k, u in enumerate(det.units):
        if k == 3:
            assert not np.array_equal(u.readout.W_out, before[k])
        else:
            assert np.array_equal(u.readout.W_out, before[k])


def in_family_disturbance():
    # sinusoids inside the training band on channels 1 and 6
    return signals.SinusoidBank(0.5, (0.0, 3.0, 0.0, 0.0, 0.0, 0.0, 5.0, 0.0))


def test_detect_recovers_a_disturbance(standard, lv):
    res = D.detect(standard, lv, in_family_disturbance(), T=10.0)
    g = res.truth[res.washout:]
    nrmse = np.sqrt(res.per_channel_mse()[[1, 6]] / np.mean(g[:, [1, 6]] ** 2, axis=0))
    assert np.all(nrmse < 0.1)
    assert res.disturbed == frozenset({1, 6})
    md, mu = D.mse_report(res)
    assert md > 0 and mu >= 0


def test_calibration_and_localization(standard, lv):
    D.calibrate_noise_floor(standard, lv, T_cal=10.0)
    assert standard.noise_floor.shape == (8,)
    assert np.all(standard.noise_floor >= 0)
    assert set(standard.floor_parts) == {"baseline", "zero_disturbance", "cross_talk"}
    res = D.detect(standard, lv, in_family_disturbance(), T=10.0)
    assert D.localize(res) == frozenset({1, 6})
    assert D.localize(res, D.ThresholdPolicy(absolute=1e6)) == frozenset()
    assert D.localize(res, D.ThresholdPolicy(kappa=0.0)) <= frozenset(range(8))


def test_localize_requires_a_floor(lv, forcing):
    det = small_train(lv, forcing)
    res = D.detect(det, lv, None, T=5.0)
    with pytest.raises(ValueError, match="calibrate"):
        D.localize(res)
    assert D.localize(res, D.ThresholdPolicy(absolute=0.5)) == frozenset()


def test_zero_readout_gives_zero_floor(lv, forcing):
    det = small_train(lv, forcing)
    det.units[0].readout.W_out[:] = 0.0
    floor = D.calibrate_noise_floor(det, lv, T_cal=5.0)
    assert np.all(floor == 0.0)
    assert np.all(det.baseline == 0.0)


def test_undisturbed_output_is_small(standard, lv):
    res = D.detect(standard, lv, None, T=10.0)
    assert res.rms().max() < 0.1
    assert D.mse_report(res) == (None, pytest.approx(float(np.mean(res.retained ** 2))))


def test_mse_report_by_hand():
    times = np.arange(4.0)
    rec = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    truth = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
    res = D.DetectionResult(times, rec, truth, washout=0, disturbed=frozenset({0}))
    assert res.per_channel_mse() == pytest.approx([0.5, 0.5])
    assert D.mse_report(res) == (pytest.approx(0.5), pytest.approx(0.5))
    res.washout = 2
    assert res.per_channel_mse() == pytest.approx([0.0, 1.0])


def test_baseline_is_removed_before_thresholding():
    times = np.arange(10.0)
    rec = np.full((10, 2), 0.2)
    rec[5:, 1] += 0.1
    res = D.DetectionResult(times, rec, None, 0, noise_floor=np.array([0.01, 0.01]),
                            baseline=np.array([0.2, 0.2]))
    assert res.deviation_rms() == pytest.approx([0.0, np.sqrt(0.5) * 0.1])
    assert D.localize(res) == frozenset({1})


def test_save_load_round_trip(tmp_path, standard, lv):
    D.calibrate_noise_floor(standard, lv, T_cal=5.0)
    standard.save(tmp_path / "det")
    back = D.TrainedDetector.load(tmp_path / "det")
    X = standard.training.values[:500]
    assert np.array_equal(back.recover(X), standard.recover(X))
    assert np.array_equal(back.noise_floor, standard.noise_floor)
    assert np.array_equal(back.baseline, standard.baseline)
    assert back.config == standard.config


def test_detection_checks_compatibility(standard, lv):
    with pytest.raises(ValueError, match="dt"):
        D.detect(standard, lv, None, T=1.0, dt=0.02)
    with pytest.raises(ValueError, match="model"):
        D.detect(standard, WilsonCowan(models.wc_preset()), None, T=1.0)


def test_warns_on_idle_training_channel(lv):
    H = signals.heaviside(8, {k: (-100.0, 0.1) for k in range(7)})
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        D.train(lv, H, D.DetectorConfig(M=5), 2.0, 0.01, seed=0, x0=models.lv_fig2_equilibrium())
    assert any("channels [7]" in str(w.message) for w in caught)


def test_holdout_forcing_is_a_fresh_draw_from_the_same_family():
    H = signals.sinusoid_bank(6, 0.8, 1, 9, seed=1)
    h = D.holdout_forcing(H, 2)
    assert h.amplitude == H.amplitude and h.omegas != H.omegas
    assert all(1 <= w <= 9 for w in h.omegas)
    S = signals.random_steps(3, 4, 5.0, -0.1, 0.2, seed=0, t_start=-20)
    s = D.holdout_forcing(S, 2)
    assert s.t_start == 0 and s.interval_length == 5.0 and s.levels != S.levels
    assert D.holdout_forcing(signals.lv_pseudo_sinusoids(), 0) is None


def test_config_validation():
    with pytest.raises(ValueError):
        D.DetectorConfig(architecture="parallel")
    with pytest.raises(ValueError):
        D.DetectorConfig(leak=-0.1)
    assert D.DetectorConfig(architecture="pseudo-parallel").architecture == "pseudo_parallel"
