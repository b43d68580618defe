import numpy as np
import pytest

from rcdetect import signals
from rcdetect.signals import signal_from_dict

T = np.linspace(-3, 40, 777)


def all_signals():
    return [
        signals.ZeroSignal(3),
        signals.sinusoid_bank(4, 0.8, 1, 9, seed=5),
        signals.random_steps(3, 5, 2.0, -0.1, 0.2, seed=1, t_start=-2),
        signals.heaviside(8, {2: (6.667, -0.1), 4: (1.0, 5.0, 0.15)}),
        signals.lv_pseudo_sinusoids(),
        signals.composed_sigmoid_disturbance(4, 1),
        signals.random_disturbance_ensemble(20, 0.2, seed=3),
        signals.MaskedSignal(signals.sinusoid_bank(4, 1.0, seed=2), frozenset({1, 3})),
    ]


@pytest.mark.parametrize("sig", all_signals(), ids=lambda s: s.kind)
def test_dict_round_trip_is_exact(sig):
    back = signal_from_dict(sig.to_dict())
    assert np.array_equal(back.sample(T), sig.sample(T))
    assert back.support == sig.support


@pytest.mark.parametrize("sig", all_signals(), ids=lambda s: s.kind)
def test_support_matches_nonzero_channels(sig):
    nz = frozenset(np.flatnonzero(np.any(sig.sample(T) != 0, axis=0)).tolist())
    assert nz == sig.support


def test_sinusoid_bank_formula():
    s = signals.sinusoid_bank(3, 0.8, 1, 9, seed=0)
    assert all(1 <= w <= 9 for w in s.omegas)
    t = 1.7
    assert s(t) == pytest.approx(0.8 * np.sin(np.array(s.omegas) * t))


def test_steps_hold_levels_on_intervals():
    s = signals.random_steps(2, 4, 10.0, -0.01, 0.19, seed=0, t_start=-40)
    lv = np.asarray(s.levels)
    assert lv.min() >= -0.01 and lv.max() <= 0.19
    assert s(-40.0) == pytest.approx(lv[0])
    assert s(-30.0) == pytest.approx(lv[1])
    assert s(-0.001) == pytest.approx(lv[3])
    assert s(-100.0) == pytest.approx(lv[0])
    assert s(100.0) == pytest.approx(lv[3])


def test_heaviside_edges():
    s = signals.heaviside(4, {0: (150, 400, 0.4), 2: (150, -0.3)})
    assert s(149.999)[0] == 0
    assert s(150)[0] == 0.4
    assert s(399.99)[0] == 0.4
    assert s(400)[0] == 0
    assert s(1e6)[2] == -0.3
    with pytest.raises(ValueError):
        signals.heaviside(4, {5: (1, 1.0)})


def test_pseudo_sinusoid_formulas():
    s = signals.lv_pseudo_sinusoids()
    t = 2.3
    v = s(t)
    assert v[2] == pytest.approx(0.3 * np.sin(2 * t) + 0.3 * np.sin(np.pi * t))
    assert v[4] == pytest.approx(np.sin(2 * np.pi * np.sin(t / 2)))


def test_composed_sigmoid_matches_logistic_form():
    s = signals.composed_sigmoid_disturbance(4, 0)
    t = np.array([0.0, 150.0, 225.0, 300.0, 600.0])
    logistic = lambda z: 1 / (1 + np.exp(-z))
    want = -0.5 * logistic((t - 150) / 30) + logistic((t - 300) / 30)
    assert s.sample(t)[:, 0] == pytest.approx(want, abs=1e-14)


def test_random_ensemble_fraction_and_ranges():
    s = signals.random_disturbance_ensemble(40, 0.2, seed=9)
    assert len(s.support) == 8
    for ch, form, u1, u2, u3, u4 in s.entries:
        assert form in (1, 2)
        assert 0.2 <= u1 <= 0.4 and 1 <= u2 <= 2
        assert np.pi / 2 <= u3 <= np.pi and np.pi <= u4 <= 2 * np.pi
    assert len(signals.random_disturbance_ensemble(5, 0.2, seed=0).support) == 1


def test_seeded_draws_are_reproducible():
    a = signals.sinusoid_bank(5, seed=11)
    b = signals.sinusoid_bank(5, seed=11)
    assert a.omegas == b.omegas
    assert signals.sinusoid_bank(5, seed=12).omegas != a.omegas
