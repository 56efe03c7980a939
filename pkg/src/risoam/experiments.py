"""Single runs, parameter sweeps and the validation suite.

Outputs are CSV and JSON files; plotting is left to the consumer.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import CouplingTensor, coupling_scalars
from .config import ScenarioConfig, save_config
from .optimizer import (SCHEMES, ThetaQP, alternating_optimize, build_theta_qp,
                        dual_multipliers, kkt_residual, lagrangian_objective,
                        quadratic_objective, solve_theta_qp, theta_auxiliaries,
                        update_eta, update_nu, update_power)
from .oracle import (GridSpec, MonteCarloSpec, finite_diff_gradient, grid_search,
                     monte_carlo_sinr, projected_gradient_theta)
from .rate import rate_report, sinr
from .scenario import build_scenario, noise_for_snr

log = logging.getLogger(__name__)

AXES = ("M", "Pt", "baseline")


@dataclass
class RunResult:
    state: object
    trace: object
    summary: dict


def _summary(cfg, state, trace, scheme, wall):
    return {
        "scheme": scheme,
        "final_sum_rate_bps_hz": trace.sum_rate[-1],
        "initial_sum_rate_bps_hz": trace.sum_rate[0],
        "iterations": state.iteration,
        "converged": state.converged,
        "stalled": state.stalled,
        "wall_time_s": wall,
        "n_ris": cfg.n_ris,
        "pt_db": cfg.pt_db,
        "power": state.p.tolist(),
        "theta_phase_rad": np.angle(state.theta).tolist(),
        "theta_abs": np.abs(state.theta).tolist(),
    }


def run_single(cfg: ScenarioConfig, out_dir=None, scheme="joint") -> RunResult:
    """Solve one scenario; optionally write ``trace.csv``, ``summary.json``
    and ``resolved_config.json`` into ``out_dir``."""
    cfg = cfg.resolved()
    scenario = build_scenario(cfg)
    start = time.perf_counter()
    state, trace = alternating_optimize(scenario, cfg.solver, scheme=scheme)
    wall = time.perf_counter() - start
    summary = _summary(cfg, state, trace, scheme, wall)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        trace.write_csv(out / "trace.csv")
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        save_config(cfg, out / "resolved_config.json")
    return RunResult(state, trace, summary)


def _row_seed(master: int, value) -> int:
    key = int(round(float(value) * 1000)) if not isinstance(value, str) else SCHEMES.index(value)
    return int(np.random.SeedSequence([master, abs(key), int(key < 0)]).generate_state(1)[0])


def _sweep_point(args):
    cfg, axis, value = args
    scheme = "joint" if axis != "baseline" else value
    row = {"axis": axis, "value": value, "scheme": scheme}
    try:
        if axis == "M":
            cfg = cfg.with_ris_size(int(value))
        elif axis == "Pt":
            cfg = dataclasses.replace(cfg, pt_db=float(value))
        seed = _row_seed(cfg.seed, value)
        cfg = dataclasses.replace(cfg, solver=dataclasses.replace(cfg.solver, seed=seed)).resolved()
        state, trace = alternating_optimize(build_scenario(cfg), cfg.solver, scheme=scheme)
        row.update(sum_rate_bps_hz=trace.sum_rate[-1], iterations=state.iteration,
                   converged=state.converged, status="ok")
    except Exception as exc:  # one bad point must not sink the sweep
        log.error("sweep point %s=%s failed: %s", axis, value, exc)
        row.update(sum_rate_bps_hz=float("nan"), iterations=0, converged=False,
                   status=f"error: {exc}")
    return row


def run_sweep(cfg: ScenarioConfig, axis: str, values=None, out_dir=None, jobs=1) -> list[dict]:
    """Sweep the RIS size (``M``), the power budget in dB (``Pt``) or the
    optimization scheme (``baseline``).

    Rows come back in the order of ``values`` whatever ``jobs`` is.
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    cfg = cfg.resolved()
    if axis == "baseline":
        values = list(SCHEMES) if not values else [str(v) for v in values]
        bad = [v for v in values if v not in SCHEMES]
        if bad:
            raise ValueError(f"unknown scheme(s) {bad}; choose from {SCHEMES}")
    elif not values:
        raise ValueError(f"axis {axis} needs a list of values")
    elif axis == "M":
        values = [int(v) for v in values]
        if any(v < 1 for v in values):
            raise ValueError("RIS sizes must be positive")
    else:
        values = [float(v) for v in values]

    tasks = [(cfg, axis, v) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(rows, out / "sweep.csv")
        save_config(cfg, out / "resolved_config.json")
    return rows


SWEEP_COLUMNS = ["axis", "value", "scheme", "sum_rate_bps_hz", "iterations", "converged", "status"]


def write_sweep_csv(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                             for c in SWEEP_COLUMNS])


# ----------------------------------------------------------------------------
# validation suite
# ----------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, value, threshold, ok, detail=""):
        self.checks.append(Check(name, bool(ok), float(value), float(threshold), detail))

    def format(self) -> str:
        width = max(len(c.name) for c in self.checks)
        lines = [f"{'check':<{width}}  {'result':<6}  {'measured':>12}  {'threshold':>12}  detail"]
        for c in self.checks:
            lines.append(f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL':<6}  "
                         f"{c.value:>12.4e}  {c.threshold:>12.4e}  {c.detail}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def tiny_config(rng) -> ScenarioConfig:
    """Random one-user, two-mode, two-element instance small enough for grid search."""
    return ScenarioConfig(
        n_users=1, n_tx=2, n_rx=2, ris_my=2, ris_mz=1,
        ris_x=float(rng.uniform(1, 5)), ris_y=float(rng.uniform(10, 40)),
        user_centers=[[float(rng.uniform(-5, 5)), float(rng.uniform(0, 8)), 0.0]],
        pt_db=float(rng.uniform(0, 20)),
    ).resolved()


def tiny_instance(rng):
    scenario = build_scenario(tiny_config(rng))
    return scenario.with_config(noise_power=noise_for_snr(scenario, float(rng.uniform(-5, 25))))


def random_psd_qp(rng, max_size=16) -> ThetaQP:
    m = int(rng.integers(1, max_size + 1))
    r = int(rng.integers(1, 2 * m + 1))
    B = rng.standard_normal((m, r)) + 1j * rng.standard_normal((m, r))
    v = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) * rng.uniform(0.1, 5)
    return ThetaQP(B @ B.conj().T, v)


def _corrupt(coupling: CouplingTensor) -> CouplingTensor:
    # flip the sign of half of the RIS entries
    a = coupling.a.copy()
    a[..., : a.shape[-1] // 2] *= -1
    return CouplingTensor(a, coupling.users, coupling.modes)


def run_validate(cfg: ScenarioConfig, inject_fault=False, n_tiny=3, n_qp=20,
                 mc_draws=100_000) -> ValidationReport:
    """Run the oracle checks on ``cfg`` and on small random instances.

    The scenario's noise is rescaled to a 10 dB reference SNR so that the
    statistical checks see signal levels well above the sampling floor.
    ``inject_fault`` corrupts the analytic couplings to prove the
    Monte-Carlo check can fail.
    """
    cfg = cfg.resolved()
    rng = np.random.default_rng(cfg.seed)
    report = ValidationReport()
    base = build_scenario(cfg)
    scenario = base.with_config(noise_power=noise_for_snr(base, 10.0))
    coupling = scenario.coupling
    noise, weights, modes = scenario.noise, scenario.weights, coupling.modes

    # structural
    W = scenario.basis.tx
    resid = np.abs(W.conj().T @ W / scenario.n_tx - np.eye(scenario.n_tx)).max()
    report.add("dft_unitarity", resid, 1e-12, resid <= 1e-12)

    theta = np.exp(2j * np.pi * rng.random(scenario.n_ris))
    p = rng.dirichlet(np.ones(scenario.n_tx)) * scenario.pt
    u = coupling_scalars(coupling, theta)
    nu = update_nu(p, u, noise, modes)
    gamma = rate_report(p, theta, scenario).sinr
    rel = np.max(np.abs(nu - gamma) / np.maximum(np.abs(gamma), np.finfo(float).tiny))
    report.add("nu_fixed_point", rel, 1e-12, rel <= 1e-12, "update_nu vs rate module")
    direct = _direct_couplings(scenario, theta)
    rel = np.abs(u - direct).max() / np.abs(direct).max()
    report.add("coupling_direct_chain", rel, 1e-10, rel <= 1e-10,
               "steering vectors vs full matrix chain, normwise")

    nu_t, eta_t = theta_auxiliaries(p, theta, coupling, noise, weights)
    qp = build_theta_qp(p, nu_t, eta_t, coupling, weights)
    herm = np.abs(qp.U - qp.U.conj().T).max()
    min_eig = np.linalg.eigvalsh(qp.U).min() / max(np.abs(qp.U).max(), np.finfo(float).tiny)
    report.add("U_hermitian", herm, 1e-12 * np.abs(qp.U).max(), herm <= 1e-12 * np.abs(qp.U).max())
    report.add("U_psd", min_eig, -1e-10, min_eig >= -1e-10, "min eigenvalue / max |U|")

    # Monte-Carlo SINR consistency
    analytic_coupling = _corrupt(coupling) if inject_fault else coupling
    gamma = sinr(p, coupling_scalars(analytic_coupling, theta), noise, modes)
    mc = monte_carlo_sinr(scenario, p, theta, MonteCarloSpec(mc_draws, seed=cfg.seed, n_batches=200))
    z = np.abs(mc.sinr - gamma) / mc.stderr
    report.add("monte_carlo_sinr", z.max(), 3.0, z.max() <= 3.0, "max |z| over detected modes")

    # stationarity of the closed-form updates
    report.checks.extend(stationarity_checks(scenario, rng))

    # cross-solver agreement
    gap = kkt = 0.0
    for _ in range(n_qp):
        q = random_psd_qp(rng)
        start = np.zeros(q.size, dtype=complex)
        bcd = solve_theta_qp(q, start, tol=1e-15, max_sweeps=100_000)
        pg = projected_gradient_theta(q, start)
        gap = max(gap, abs(bcd.objective - pg.objective))
        kkt = max(kkt, kkt_residual(q, bcd.theta))
    report.add("bcd_vs_projected_gradient", gap, 1e-6, gap <= 1e-6, f"{n_qp} random PSD instances")
    report.add("bcd_kkt_residual", kkt, 1e-6, kkt <= 1e-6)

    # grid-search equivalence on tiny instances
    worst = np.inf
    for _ in range(n_tiny):
        tiny = tiny_instance(rng)
        _, trace = alternating_optimize(tiny, cfg.solver)
        grid = grid_search(tiny, GridSpec(np.linspace(0, tiny.pt, 32), 64))
        worst = min(worst, trace.sum_rate[-1] / grid.sum_rate - 1)
    report.add("grid_equivalence", worst, -0.02, worst >= -0.02, "min relative gap FP vs grid")

    # monotone ascent on the configured scenario
    _, trace = alternating_optimize(scenario, dataclasses.replace(cfg.solver, max_iters=100))
    drop = -np.min(np.diff(trace.sum_rate), initial=0.0)
    report.add("monotone_ascent", drop, 1e-9, drop <= 1e-9, "largest per-iteration decrease")
    return report


def _direct_couplings(scenario, theta):
    """``W_k^H H_k Theta G W_t / sqrt(Nr Nt)`` rows, without the steering vectors."""
    ch, basis = scenario.channels, scenario.basis
    n_rx, n_tx = ch.H.shape[1], ch.G.shape[1]
    rows = [rx.conj().T @ ch.H[k] @ np.diag(np.conj(theta)) @ ch.G @ basis.tx
            for k, rx in enumerate(basis.rx)]
    return np.concatenate(rows) / np.sqrt(n_rx * n_tx)


def stationarity_checks(scenario, rng, step=1e-6, threshold=1e-4) -> list[Check]:
    """Finite-difference derivatives of the transformed objectives at the
    closed-form updates (random ``p``, ``theta``)."""
    coupling = scenario.coupling
    noise, weights, modes = scenario.noise, scenario.weights, coupling.modes
    theta = np.exp(2j * np.pi * rng.random(scenario.n_ris))
    p = rng.dirichlet(np.ones(scenario.n_tx)) * scenario.pt
    u = coupling_scalars(coupling, theta)
    checks = []

    nu = update_nu(p, u, noise, modes)
    g = finite_diff_gradient(lambda x: lagrangian_objective(p, x, u, noise, weights, modes), nu, step)
    checks.append(Check("stationarity_nu", np.abs(g).max() <= threshold, np.abs(g).max(), threshold))

    eta = update_eta(p, nu, u, noise, weights, modes)
    g = finite_diff_gradient(lambda x: quadratic_objective(p, nu, x, u, noise, weights, modes), eta, step)
    checks.append(Check("stationarity_eta", np.abs(g).max() <= threshold, np.abs(g).max(), threshold))

    p_star, _ = update_power(p, nu, eta, u, weights, modes, np.inf, "per_mode_clip")
    # modes whose optimum sits within a few steps of zero cannot be differenced
    served = np.flatnonzero(p_star > 100 * step)

    def along_served(x):
        full = p_star.copy()
        full[served] = x
        return quadratic_objective(full, nu, eta, u, noise, weights, modes)

    g = finite_diff_gradient(along_served, p_star[served], step)
    res = np.abs(g).max(initial=0.0)
    checks.append(Check("stationarity_power", res <= threshold, res, threshold,
                        f"unclipped closed form, {served.size} modes"))

    lam_a, lam_b = dual_multipliers(p, nu, u, noise, weights, modes)
    rel = np.max(np.abs(lam_a - lam_b) / np.abs(lam_b))
    checks.append(Check("dual_identity", rel <= 1e-10, rel, 1e-10))
    return checks
