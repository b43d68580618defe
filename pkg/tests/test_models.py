import numpy as np
import pytest

from rcdetect import kernels, models
from rcdetect.models import (IntegrationDivergence, LotkaVolterra, LotkaVolterraParams, Trajectory,
                             WilsonCowan, WilsonCowanParams, simulate)
from rcdetect.signals import heaviside, sinusoid_bank


class Decay(models.NetworkModel):
    """dx/dt = -x + g, integrated by the generic Python Heun loop."""

    kind = "decay"
    D = 1

    def __init__(self, n=1):
        self.N = n

    def vector_field(self, t, X, G):
        return -np.asarray(X) + G


def heun_error(dt):
    traj = simulate(Decay(), None, [1.0], 0.0, 1.0, dt)
    return abs(traj.values[-1, 0] - np.exp(-1.0))


def test_heun_is_second_order():
    errs = [heun_error(0.1 / 2 ** k) for k in range(4)]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    for r in ratios:
        assert 3.5 <= r <= 4.5


def test_heun_single_step_matches_hand_value():
    # x1 = x0 + dt/2 (f(x0) + f(x0 + dt f(x0))) with f = -x
    dt = 0.1
    x1 = models.heun_step(Decay(), 0.0, np.array([1.0]), np.zeros(1), np.zeros(1), dt)
    assert x1[0] == pytest.approx(1 - dt + dt * dt / 2, abs=1e-15)


def test_heun_uses_forcing_at_both_ends():
    dt = 0.5
    x1 = models.heun_step(Decay(), 0.0, np.zeros(1), np.zeros(1), np.ones(1), dt)
    # f0 = 0, xp = 0, f1 = 1
    assert x1[0] == pytest.approx(0.25)


def test_lv_field_by_hand():
    p = LotkaVolterraParams(e=[1.0, 2.0], K=[2.0, 4.0], P=[[0.0, 0.5], [-0.25, 0.0]])
    m = LotkaVolterra(p)
    x = np.array([1.0, 2.0])
    g = np.array([0.1, -0.2])
    want = [1 * (1 - 0.5 + 1.0) + 0.1, 2 * (2 - 0.5 - 0.25) - 0.2]
    assert m.vector_field(0, x, g) == pytest.approx(want)


def test_lv_jacobian_matches_finite_differences():
    m = LotkaVolterra(models.lv_fig2_like())
    x = models.lv_fig2_equilibrium() * np.random.default_rng(0).uniform(0.8, 1.2, 8)
    J = m.jacobian(x)
    h = 1e-6
    fd = np.empty_like(J)
    for j in range(8):
        e = np.zeros(8)
        e[j] = h
        fd[:, j] = (m.vector_field(0, x + e, np.zeros(8)) - m.vector_field(0, x - e, np.zeros(8))) / (2 * h)
    assert np.max(np.abs(J - fd)) <= 1e-6 * np.max(np.abs(J))


def test_lv_preset_equilibrium_is_a_fixed_point():
    m = LotkaVolterra(models.lv_fig2_like())
    f = m.vector_field(0, models.lv_fig2_equilibrium(), np.zeros(8))
    assert np.max(np.abs(f)) < 1e-12


def test_lv_preset_converges_from_random_start():
    m = LotkaVolterra(models.lv_fig2_like())
    x0 = np.random.default_rng(4).uniform(0.5, 1.5, 8)
    traj = simulate(m, None, x0, 0.0, 150.0, 0.005)
    end = traj.values[-1]
    assert np.max(np.abs(m.vector_field(0, end, np.zeros(8)))) < 1e-6
    assert end == pytest.approx(models.lv_fig2_equilibrium(), abs=1e-5)


def test_lv_preset_is_predator_prey():
    P = models.lv_fig2_like().P
    nz = np.argwhere(P != 0)
    for i, j in nz:
        assert P[i, j] * P[j, i] < 0


def test_compiled_and_numpy_integrators_agree():
    m = LotkaVolterra(models.lv_fig2_like())
    p = m.params
    F = np.random.default_rng(1).uniform(-0.5, 0.5, (2001, 8))
    x0 = models.lv_fig2_equilibrium()
    a, _ = kernels.heun_lv_numba(x0, F, 0.005, p.e, 1 / p.K, p.P)
    b, _ = kernels.heun_lv_numpy(x0, F, 0.005, p.e, 1 / p.K, p.P)
    assert np.max(np.abs(a - b)) < 1e-12

    w = WilsonCowan(models.wc_preset("oscillatory"))
    Fw = np.random.default_rng(2).uniform(-0.4, 0.6, (2001, 4))
    a, _ = kernels.heun_wc_numba(np.full(8, 0.2), Fw, 0.2, *w.params.kernel_args())
    b, _ = kernels.heun_wc_numpy(np.full(8, 0.2), Fw, 0.2, *w.params.kernel_args())
    assert np.max(np.abs(a - b)) < 1e-12


def test_compiled_lv_matches_generic_heun():
    m = LotkaVolterra(models.lv_fig2_like())
    H = sinusoid_bank(8, 0.8, seed=0)
    fast = simulate(m, H, models.lv_fig2_equilibrium(), 0.0, 2.0, 0.01)
    slow = models.NetworkModel.integrate(m, fast.values[0], models.forcing_grid(m, H, fast.times), 0.01)
    assert np.max(np.abs(fast.values - slow)) < 1e-12


def test_divergence_is_reported_with_time():
    p = LotkaVolterraParams(e=[1.0], K=[-1.0], P=[[0.0]])  # logistic growth without a ceiling
    with pytest.raises(IntegrationDivergence) as exc:
        simulate(LotkaVolterra(p), None, [10.0], 0.0, 50.0, 0.1)
    assert exc.value.t is not None and exc.value.t > 0


def test_sigmoid_values():
    assert models.sigmoid(0.0) == 0.0
    assert models.sigmoid(1.0) == pytest.approx(0.5)
    assert models.sigmoid(3.0, K_sig=2.0, sigma=3.0) == pytest.approx(1.0)


def test_wc_field_by_hand():
    params = WilsonCowanParams(p_stim=[1.0, 2.0], B=[[0, 1], [0, 0]])
    m = WilsonCowan(params)
    X = np.array([0.1, 0.2, 0.3, 0.4])
    G = np.array([0.05, 0.0, 0.0, 0.0])
    S = lambda x: x * x / (1 + x * x)
    a0 = 6.4 * 0.1 - 6.0 * 0.2 + 1.0 - 0.5 * 0.4 + 0.05
    a1 = 6.4 * 0.3 - 6.0 * 0.4 + 2.0
    want = np.array([-0.1 + S(a0), -0.2 + S(4.8 * 0.1 - 1.2 * 0.2),
                     -0.3 + S(a1), -0.4 + S(4.8 * 0.3 - 1.2 * 0.4)]) / 10
    assert m.vector_field(0, X, G) == pytest.approx(want, abs=1e-15)


def test_wc_rejects_inhibitory_forcing():
    m = WilsonCowan(models.wc_preset())
    G = np.zeros(8)
    G[1] = 0.1
    with pytest.raises(ValueError):
        m.vector_field(0, np.zeros(8), G)
    with pytest.raises(ValueError):
        simulate(m, heaviside(4, {1: (0.0, 0.1)}), np.zeros(8), 0, 1, 0.2, channel_map=[0, 3, 4, 6])


def test_wc_params_validation():
    with pytest.raises(ValueError):
        WilsonCowanParams(p_stim=[1, 1], B=[[1, 0], [0, 0]])
    with pytest.raises(ValueError):
        WilsonCowanParams(p_stim=[1, 1], B=[[0, 1], [1, 0]], w_ee=0.0)


@pytest.mark.parametrize("regime, oscillates", [("stationary", False), ("oscillatory", True)])
def test_wc_regimes(regime, oscillates):
    m = WilsonCowan(models.wc_preset(regime))
    traj = simulate(m, None, np.full(8, 0.2), 0.0, 3000.0, 0.2)
    tail = traj.values[-2500:]
    swing = np.ptp(tail[:, 0::2], axis=0).max()
    if oscillates:
        assert swing > 0.05
    else:
        assert swing < 1e-6


def test_channel_map_and_neighborhoods():
    w = WilsonCowan(models.wc_preset())
    assert list(w.channel_map) == [0, 2, 4, 6]
    assert list(w.node_slots(2)) == [4, 5]
    assert list(w.neighborhood(0)) == [0, 1, 3]
    lv = LotkaVolterra(models.lv_fig2_like())
    assert list(lv.neighborhood(6)) == [2, 3, 4, 6]


def test_model_dict_round_trip():
    for m in (LotkaVolterra(models.lv_fig2_like()), WilsonCowan(models.wc_preset("oscillatory"))):
        m2 = models.model_from_dict(m.to_dict())
        X = np.random.default_rng(0).uniform(0.1, 1, m.size)
        assert np.array_equal(m.vector_field(0, X, np.zeros(m.size)), m2.vector_field(0, X, np.zeros(m.size)))


def test_trajectory_csv_round_trip(tmp_path):
    traj = Trajectory(-1.0, 0.125, np.random.default_rng(0).standard_normal((5, 3)))
    traj.to_csv(tmp_path / "t.csv")
    back = Trajectory.from_csv(tmp_path / "t.csv")
    assert np.array_equal(back.values, traj.values)
    assert np.array_equal(back.times, traj.times)


def test_time_grid_must_divide_interval():
    assert len(models.time_grid(0, 1, 0.25)) == 5
    with pytest.raises(ValueError):
        models.time_grid(0, 1, 0.3)
    with pytest.raises(ValueError):
        models.time_grid(0, 1, 0.0)
