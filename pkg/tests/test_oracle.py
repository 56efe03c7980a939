import itertools

import numpy as np
import pytest

import risoam.oracle as oracle
from risoam.config import ScenarioConfig
from risoam.channel import coupling_scalars
from risoam.optimizer import ThetaQP
from risoam.oracle import (GridSpec, GridTooLarge, MonteCarloSpec, effective_channels,
                           finite_diff_gradient, grid_search, monte_carlo_sinr,
                           projected_gradient_theta)
from risoam.rate import rate_report
from risoam.scenario import build_scenario


def single_mode_scenario(my=1, mz=1, noise=1e-12):
    return build_scenario(ScenarioConfig(n_users=1, n_tx=1, n_rx=1, ris_my=my, ris_mz=mz,
                                         noise_power=noise))


def test_oracle_has_no_rate_dependency():
    assert not hasattr(oracle, "rate_report") and not hasattr(oracle, "sinr")
    assert not hasattr(oracle, "coupling_scalars")


def test_effective_channels_match_couplings(scenario_10db, rng):
    thetas = np.exp(2j * np.pi * rng.random((3, scenario_10db.n_ris)))
    eff = effective_channels(scenario_10db, thetas)
    for b in range(3):
        u = coupling_scalars(scenario_10db.coupling, thetas[b])
        assert np.abs(eff[b] - u).max() <= 1e-12 * np.abs(u).max()


def test_grid_picks_full_power_without_interference():
    s = single_mode_scenario()
    res = grid_search(s, GridSpec([0.0, s.pt / 2, s.pt], 4))
    assert res.p == pytest.approx([s.pt])
    assert res.sum_rate == pytest.approx(rate_report(res.p, res.theta, s).sum_rate, rel=1e-12)


def test_grid_phase_argmax_rank_one():
    s = single_mode_scenario(my=2)
    res = grid_search(s, GridSpec([s.pt], 4))
    a = s.coupling.a[0, 0]
    phases = np.exp(2j * np.pi * np.arange(4) / 4)
    best = max(abs(np.vdot(np.array(c), a)) for c in itertools.product(phases, repeat=2))
    assert abs(np.vdot(res.theta, a)) == pytest.approx(best, rel=1e-12)
    assert res.n_points == 16


def test_grid_cap_and_level_validation(default_scenario):
    with pytest.raises(GridTooLarge):
        grid_search(default_scenario, GridSpec([0.0, 1.0], 2))
    with pytest.raises(ValueError):
        GridSpec([], 4)
    with pytest.raises(ValueError):
        GridSpec([-1.0], 4)
    with pytest.raises(ValueError):
        GridSpec([1.0], 0)


def test_grid_respects_budget():
    s = build_scenario(ScenarioConfig(n_users=1, n_tx=2, n_rx=2, ris_my=2, ris_mz=1))
    levels = np.linspace(0, s.pt, 5)
    res = grid_search(s, GridSpec(levels, 4))
    assert res.p.sum() <= s.pt * (1 + 1e-12)
    res = grid_search(s, GridSpec(levels, 4), budget="per_mode_clip")
    assert res.p.max() <= s.pt


def test_monte_carlo_zero_noise_single_mode():
    s = single_mode_scenario(my=2, mz=2)
    theta = np.exp(2j * np.pi * np.random.default_rng(0).random(4))
    p = np.array([3.0])
    mc = monte_carlo_sinr(s, p, theta, MonteCarloSpec(20_000, seed=1), noise=[0.0])
    assert mc.infinite.all() and np.isinf(mc.sinr).all()
    expected = p[0] * abs(coupling_scalars(s.coupling, theta)[0, 0]) ** 2
    assert mc.signal_power[0] == pytest.approx(expected, rel=1e-2)


def test_monte_carlo_doubling_power(scenario_10db, rng):
    p = np.full(15, scenario_10db.pt / 15)
    theta = np.ones(scenario_10db.n_ris)
    spec = MonteCarloSpec(20_000, seed=3)
    one = monte_carlo_sinr(scenario_10db, p, theta, spec)
    two = monte_carlo_sinr(scenario_10db, 2 * p, theta, spec)
    strong = one.sinr > 1.0
    assert strong.any()
    np.testing.assert_allclose(two.signal_power[strong], 2 * one.signal_power[strong], rtol=0.05)


def test_monte_carlo_rejects_tiny_batches(scenario_10db):
    with pytest.raises(ValueError):
        monte_carlo_sinr(scenario_10db, np.ones(15), np.ones(40), MonteCarloSpec(10, n_batches=10))


def test_finite_diff_examples():
    g = finite_diff_gradient(lambda x: float(np.sum(x ** 2)), np.array([1.0, 2.0]))
    np.testing.assert_allclose(g, [2.0, 4.0], atol=1e-8)
    g = finite_diff_gradient(lambda x: 3.0, np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(g, 0.0)


def test_finite_diff_quadratic(rng):
    B = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    qp = ThetaQP(B @ B.conj().T, rng.standard_normal(4) + 1j * rng.standard_normal(4))
    theta = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    g = finite_diff_gradient(qp.objective, theta, step=1e-5)
    np.testing.assert_allclose(g, 2 * qp.gradient(theta), atol=1e-5)


def test_finite_diff_rejects_nonfinite():
    with np.errstate(divide="ignore", invalid="ignore"), pytest.raises(ValueError):
        finite_diff_gradient(lambda x: float(np.log(x[0])), np.array([0.0]))
    with np.errstate(divide="ignore", invalid="ignore"), pytest.raises(ValueError):
        finite_diff_gradient(lambda x: float(np.log(x[0])), np.array([1e-9]), step=1e-6)


def test_projected_gradient_identity():
    v = np.array([0.3 + 0.2j, -0.5j, 0.1])
    res = projected_gradient_theta(ThetaQP(np.eye(3, dtype=complex), v), np.zeros(3))
    assert res.converged
    np.testing.assert_allclose(res.theta, v, atol=1e-7)


def test_projected_gradient_descends(rng):
    B = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
    qp = ThetaQP(B @ B.conj().T, 4 * (rng.standard_normal(8) + 1j * rng.standard_normal(8)))
    res = projected_gradient_theta(qp, np.zeros(8))
    assert np.all(np.diff(res.history) <= 1e-12 * np.abs(res.history[1:]))
    assert np.all(np.abs(res.theta) <= 1 + 1e-12)


def test_projected_gradient_iteration_cap(rng):
    B = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    qp = ThetaQP(B @ B.conj().T, rng.standard_normal(8) + 0j)
    res = projected_gradient_theta(qp, np.zeros(8), max_iters=2)
    assert not res.converged and res.iterations == 2
