import dataclasses

import numpy as np
import pytest

from risoam.channel import CouplingTensor, coupling_scalars
from risoam.config import SolverOptions
from risoam.optimizer import (SolverError, ThetaQP, alternating_optimize, build_theta_qp,
                              dual_multipliers, kkt_residual, lagrangian_terms,
                              power_feasible, quadratic_objective, solve_theta_qp,
                              theta_auxiliaries, theta_surrogate, update_eta, update_nu,
                              update_power)
from risoam.oracle import finite_diff_gradient, projected_gradient_theta
from risoam.rate import rate_report

ONE = np.array([0])


def random_state(scenario, rng):
    p = rng.dirichlet(np.ones(scenario.n_tx)) * scenario.pt
    theta = np.exp(2j * np.pi * rng.random(scenario.n_ris))
    return p, theta, coupling_scalars(scenario.coupling, theta)


def random_psd(rng, m):
    B = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    B[:, m // 2:] = 0  # singular on purpose
    v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return ThetaQP(B @ B.conj().T, 3 * v)


# ---- power step -------------------------------------------------------------

def test_nu_examples():
    u = np.array([[2.0]])
    assert update_nu([1.0], u, np.array([2.0]), ONE) == pytest.approx([2.0])
    assert update_nu([0.0], u, np.array([2.0]), ONE) == pytest.approx([0.0])


def test_eta_examples():
    u = np.array([[1.0]])
    w, sigma = np.array([1.0]), np.array([1.0])
    assert update_eta([1.0], np.array([3.0]), u, sigma, w, ONE) == pytest.approx([1.0])
    assert update_eta([0.0], np.array([3.0]), u, sigma, w, ONE) == pytest.approx([0.0])


def test_power_examples():
    u, w, nu, eta = np.array([[1.0]]), np.array([1.0]), np.array([3.0]), np.array([1.0])
    for budget in ("total_projection", "per_mode_clip"):
        p, stalled = update_power([1.0], nu, eta, u, w, ONE, 100.0, budget)
        assert p == pytest.approx([4.0]) and not stalled
    # unclipped value 200: b = sqrt(200) with eta = 1, |u| = 1, D = 1
    nu = np.array([199.0])
    for budget in ("total_projection", "per_mode_clip"):
        p, _ = update_power([1.0], nu, eta, u, w, ONE, 100.0, budget)
        assert p == pytest.approx([100.0])


def test_power_unknown_budget():
    with pytest.raises(ValueError):
        update_power([1.0], np.ones(1), np.ones(1), np.ones((1, 1)), np.ones(1), ONE, 1.0, "bogus")


def test_power_stalls_when_eta_vanishes():
    p, stalled = update_power([0.7], np.zeros(1), np.zeros(1), np.ones((1, 1)), np.ones(1), ONE, 1.0)
    assert stalled and p == pytest.approx([0.7])


@pytest.mark.parametrize("budget", ["total_projection", "per_mode_clip"])
def test_power_update_ascends_surrogate(scenario_10db, budget):
    rng = np.random.default_rng(3)
    s = scenario_10db
    for _ in range(20):
        p, _, u = random_state(s, rng)
        nu = update_nu(p, u, s.noise, s.coupling.modes)
        eta = update_eta(p, nu, u, s.noise, s.weights, s.coupling.modes)
        args = (u, s.noise, s.weights, s.coupling.modes)
        before = quadratic_objective(p, nu, eta, *args)
        p_new, _ = update_power(p, nu, eta, u, s.weights, s.coupling.modes, s.pt, budget)
        assert quadratic_objective(p_new, nu, eta, *args) >= before - 1e-12 * abs(before)
        assert power_feasible(p_new, s.pt, budget)
        assert np.all(p_new >= 0)


def test_power_update_two_modes(rng):
    u = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    modes, w, noise = np.arange(2), np.ones(2), np.full(2, 0.1)
    p = np.array([0.3, 0.7])
    nu = update_nu(p, u, noise, modes)
    eta = update_eta(p, nu, u, noise, w, modes)
    before = quadratic_objective(p, nu, eta, u, noise, w, modes)
    p_new, _ = update_power(p, nu, eta, u, w, modes, 1.0)
    assert quadratic_objective(p_new, nu, eta, u, noise, w, modes) >= before


def test_total_projection_is_kkt_optimal(scenario_10db):
    # with the budget binding, no feasible perturbation along the simplex helps
    rng = np.random.default_rng(11)
    s = scenario_10db
    p, _, u = random_state(s, rng)
    modes = s.coupling.modes
    nu = update_nu(p, u, s.noise, modes)
    eta = update_eta(p, nu, u, s.noise, s.weights, modes)
    tight = s.pt * 1e-3
    p_new, _ = update_power(p, nu, eta, u, s.weights, modes, tight)
    assert p_new.sum() == pytest.approx(tight, rel=1e-10)
    f = quadratic_objective(p_new, nu, eta, u, s.noise, s.weights, modes)
    for _ in range(50):
        q = rng.dirichlet(np.ones(s.n_tx)) * tight
        assert quadratic_objective(q, nu, eta, u, s.noise, s.weights, modes) <= f + 1e-12 * abs(f)


def test_total_projection_with_badly_scaled_modes():
    # a weak mode whose curvature is 40 decades below the strong one puts the
    # budget multiplier far below the bracket width
    u = np.diag([1.0, 1e-20]).astype(complex)
    modes, w = np.arange(2), np.ones(2)
    nu, eta = np.array([0.0, 3.0]), np.ones(2)
    p, _ = update_power(np.ones(2), nu, eta, u, w, modes, 2.0)
    # the multiplier is ~2e-20, so the strong mode keeps its unconstrained
    # value 1 and the weak mode takes the remaining budget
    np.testing.assert_allclose(p, [1.0, 1.0], rtol=1e-9)


def test_closed_form_stationarity(scenario_10db):
    rng = np.random.default_rng(5)
    s = scenario_10db
    modes, w, noise = s.coupling.modes, s.weights, s.noise
    for _ in range(3):
        p, _, u = random_state(s, rng)
        nu = update_nu(p, u, noise, modes)
        g = finite_diff_gradient(lambda x: lagrangian_terms(p, x, u, noise, w, modes).sum(), nu)
        assert np.abs(g).max() <= 1e-4
        eta = update_eta(p, nu, u, noise, w, modes)
        g = finite_diff_gradient(lambda x: quadratic_objective(p, nu, x, u, noise, w, modes), eta)
        assert np.abs(g).max() <= 1e-4
        p_star, _ = update_power(p, nu, eta, u, w, modes, np.inf, "per_mode_clip")
        served = p_star > 1e-4

        def f(x):
            full = p_star.copy()
            full[served] = x
            return quadratic_objective(full, nu, eta, u, noise, w, modes)

        g = finite_diff_gradient(f, p_star[served])
        assert np.abs(g).max() <= 1e-4


def test_transform_consistency(scenario_10db, rng):
    s = scenario_10db
    p, theta, u = random_state(s, rng)
    nu = update_nu(p, u, s.noise, s.coupling.modes)
    terms = lagrangian_terms(p, nu, u, s.noise, s.weights, s.coupling.modes)
    per_user = np.bincount(s.coupling.users, weights=terms)
    np.testing.assert_allclose(per_user, rate_report(p, theta, s).user_rates, rtol=1e-10)


def test_nu_fixed_point_matches_rate_module(scenario_10db, rng):
    s = scenario_10db
    p, theta, u = random_state(s, rng)
    nu = update_nu(p, u, s.noise, s.coupling.modes)
    np.testing.assert_allclose(nu, rate_report(p, theta, s).sinr, rtol=1e-12)


def test_dual_identity(scenario_10db, rng):
    s = scenario_10db
    p, _, u = random_state(s, rng)
    nu = update_nu(p, u, s.noise, s.coupling.modes)
    a, b = dual_multipliers(p, nu, u, s.noise, s.weights, s.coupling.modes)
    np.testing.assert_allclose(a, b, rtol=1e-10)


# ---- theta step -------------------------------------------------------------

def test_single_term_U_is_rank_one(rng):
    a = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    coupling = CouplingTensor(a[None, None, :], np.array([0]), ONE)
    qp = build_theta_qp(np.ones(1), np.zeros(1), np.ones(1, dtype=complex), coupling, np.ones(1))
    np.testing.assert_allclose(qp.U, np.outer(a, a.conj()), rtol=1e-14)
    assert np.linalg.matrix_rank(qp.U, tol=1e-10 * np.abs(qp.U).max()) == 1


def test_U_hermitian_psd(scenario_10db):
    rng = np.random.default_rng(8)
    s = scenario_10db
    for _ in range(5):
        p, theta, _ = random_state(s, rng)
        nu_t, eta_t = theta_auxiliaries(p, theta, s.coupling, s.noise, s.weights)
        qp = build_theta_qp(p, nu_t, eta_t, s.coupling, s.weights)
        scale = np.abs(qp.U).max()
        assert np.abs(qp.U - qp.U.conj().T).max() <= 1e-12 * scale
        assert np.linalg.eigvalsh(qp.U).min() >= -1e-10 * scale


def test_qp_and_surrogate_differ_by_constant(scenario_10db):
    rng = np.random.default_rng(9)
    s = scenario_10db
    p, theta, _ = random_state(s, rng)
    nu_t, eta_t = theta_auxiliaries(p, theta, s.coupling, s.noise, s.weights)
    qp = build_theta_qp(p, nu_t, eta_t, s.coupling, s.weights)
    const = np.sum(np.abs(eta_t) ** 2 * s.noise)
    for _ in range(10):
        t1 = rng.uniform(0, 1, s.n_ris) * np.exp(2j * np.pi * rng.random(s.n_ris))
        t2 = rng.uniform(0, 1, s.n_ris) * np.exp(2j * np.pi * rng.random(s.n_ris))
        g1 = theta_surrogate(t1, p, nu_t, eta_t, s.coupling, s.noise, s.weights)
        g2 = theta_surrogate(t2, p, nu_t, eta_t, s.coupling, s.noise, s.weights)
        assert g1 == pytest.approx(-qp.objective(t1) - const, rel=1e-9)
        assert (g1 > g2) == (qp.objective(t1) < qp.objective(t2))


def test_surrogate_is_tight_minorizer(scenario_10db):
    rng = np.random.default_rng(10)
    s = scenario_10db
    p, theta, u = random_state(s, rng)
    nu_t, eta_t = theta_auxiliaries(p, theta, s.coupling, s.noise, s.weights)
    modes = s.coupling.modes

    def surrogate_rate(t):
        u_t = coupling_scalars(s.coupling, t)
        g = theta_surrogate(t, p, nu_t, eta_t, s.coupling, s.noise, s.weights)
        return (np.sum(s.weights * (np.log1p(nu_t) - nu_t)) + g) / np.log(2)

    assert surrogate_rate(theta) == pytest.approx(rate_report(p, theta, s).sum_rate, rel=1e-10)
    for _ in range(10):
        t = np.exp(2j * np.pi * rng.random(s.n_ris))
        assert surrogate_rate(t) <= rate_report(p, t, s).sum_rate * (1 + 1e-12)


def test_bcd_scalar_examples():
    sol = solve_theta_qp(ThetaQP(np.array([[2.0 + 0j]]), np.array([4.0 + 0j])), np.zeros(1))
    assert sol.theta == pytest.approx([1.0])
    sol = solve_theta_qp(ThetaQP(np.array([[4.0 + 0j]]), np.array([2.0 + 0j])), np.zeros(1))
    assert sol.theta == pytest.approx([0.5])
    sol = solve_theta_qp(ThetaQP(np.array([[2.0 + 0j]]), np.array([4.0j])), np.zeros(1))
    assert sol.theta == pytest.approx([1.0j])


def test_bcd_zero_diagonal():
    qp = ThetaQP(np.zeros((2, 2), dtype=complex), np.array([0.0, 3 - 4j]))
    sol = solve_theta_qp(qp, np.array([0.2, 0.0]))
    np.testing.assert_allclose(sol.theta, [0.2, (3 - 4j) / 5])


def test_bcd_matches_projected_gradient_from_random_starts():
    rng = np.random.default_rng(21)
    qp = random_psd(rng, 6)
    objectives = []
    for _ in range(10):
        start = rng.uniform(0, 1, 6) * np.exp(2j * np.pi * rng.random(6))
        bcd = solve_theta_qp(qp, start, tol=1e-15, max_sweeps=100_000)
        pg = projected_gradient_theta(qp, start)
        assert abs(bcd.objective - pg.objective) <= 1e-6
        assert np.all(np.abs(bcd.theta) <= 1 + 1e-12)
        assert kkt_residual(qp, bcd.theta) <= 1e-6
        objectives.append(bcd.objective)
    assert np.ptp(objectives) <= 1e-6


def test_bcd_reports_nonconvergence():
    rng = np.random.default_rng(4)
    qp = random_psd(rng, 8)
    sol = solve_theta_qp(qp, np.zeros(8), tol=1e-300, max_sweeps=1)
    assert not sol.converged and sol.sweeps == 1
    assert np.all(np.abs(sol.theta) <= 1 + 1e-12)


def test_kkt_residual_detects_bad_point():
    qp = ThetaQP(np.eye(2, dtype=complex), np.array([0.5, 2.0 + 0j]))
    assert kkt_residual(qp, np.array([0.5, 1.0])) <= 1e-15
    assert kkt_residual(qp, np.array([0.0, 1.0])) == pytest.approx(0.5)
    assert kkt_residual(qp, np.array([0.5, 1.0j])) > 0.1


# ---- alternating loop -------------------------------------------------------

@pytest.mark.parametrize("budget", ["total_projection", "per_mode_clip"])
def test_iterates_feasible_and_ascending(scenario_10db, budget):
    opts = SolverOptions(max_iters=30, budget=budget, theta_init="random", seed=2)
    state, trace = alternating_optimize(scenario_10db, opts)
    assert np.all(np.diff(trace.sum_rate) >= -1e-9)
    assert max(trace.max_abs_theta) <= 1 + 1e-12
    if budget == "total_projection":
        assert max(trace.total_power) <= scenario_10db.pt * (1 + 1e-12)
    else:
        assert max(trace.max_power) <= scenario_10db.pt
    assert np.all(np.isfinite(state.nu)) and np.all(state.nu >= 0)
    assert len(trace) == state.iteration + 1 <= 31


def test_fixed_point(default_scenario):
    opts = SolverOptions()
    state, _ = alternating_optimize(default_scenario, opts)
    assert state.converged
    again, trace = alternating_optimize(default_scenario, dataclasses.replace(opts, max_iters=1),
                                        p0=state.p, theta0=state.theta)
    change = abs(trace.sum_rate[1] - trace.sum_rate[0])
    assert change <= opts.tol * trace.sum_rate[0]


@pytest.mark.parametrize("scheme", ["power_only", "phase_only"])
def test_baseline_schemes_freeze_one_block(scenario_10db, scheme):
    opts = SolverOptions(max_iters=5)
    state, _ = alternating_optimize(scenario_10db, opts, scheme=scheme)
    if scheme == "power_only":
        np.testing.assert_array_equal(state.theta, np.ones(scenario_10db.n_ris))
    else:
        np.testing.assert_array_equal(state.p, np.full(15, scenario_10db.pt / 15))


def test_unknown_scheme(default_scenario):
    with pytest.raises(ValueError):
        alternating_optimize(default_scenario, scheme="bogus")


def test_stalled_when_power_is_zero(default_scenario):
    state, _ = alternating_optimize(default_scenario, SolverOptions(max_iters=3), p0=np.zeros(15))
    assert state.stalled
    np.testing.assert_array_equal(state.p, 0.0)


def test_nonfinite_objective_aborts(default_scenario):
    # zero power and zero noise make every SINR 0/0
    cfg = dataclasses.replace(default_scenario.cfg, noise_power=[0.0] * 3)
    broken = dataclasses.replace(default_scenario, cfg=cfg)
    with np.errstate(invalid="ignore"), pytest.raises(SolverError):
        alternating_optimize(broken, SolverOptions(max_iters=3), p0=np.zeros(15))
