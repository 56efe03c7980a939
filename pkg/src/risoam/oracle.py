"""Independent reference computations used to check the optimizer.

Nothing here calls :mod:`risoam.rate` or the steering-vector path of
:mod:`risoam.channel`; effective channels are rebuilt from the raw ``G``,
``H`` matrices and mode vectors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .optimizer import ThetaQP, project_unit_disk


class GridTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    power_levels: np.ndarray
    phase_levels: int
    cap: int = 10 ** 7

    def __post_init__(self):
        levels = np.asarray(self.power_levels, dtype=float)
        if levels.size < 1 or np.any(levels < 0):
            raise ValueError("need at least one nonnegative power level")
        if self.phase_levels < 1:
            raise ValueError("need at least one phase level")
        object.__setattr__(self, "power_levels", levels)


@dataclass(frozen=True)
class GridResult:
    p: np.ndarray
    theta: np.ndarray
    sum_rate: float
    n_points: int


def effective_channels(scenario, theta_batch) -> np.ndarray:
    """``W_k^H H_k diag(conj(theta)) G W_t / sqrt(Nr Nt)`` stacked over detected modes.

    ``theta_batch`` is ``(B, M)``; the result is ``(B, n_detected, Nt)``.
    """
    ch, basis = scenario.channels, scenario.basis
    n_rx = ch.H.shape[1]
    n_tx = ch.G.shape[1]
    left = np.concatenate([rx.conj().T @ ch.H[k] for k, rx in enumerate(basis.rx)])
    right = ch.G @ basis.tx
    return np.einsum("im,bm,mj->bij", left, np.conj(theta_batch), right) / np.sqrt(n_rx * n_tx)


def _grid_rates(gains, powers, modes, noise, weights):
    # gains (B, I, J), powers (Q, J) -> rates (B, Q)
    rows = np.arange(len(modes))
    own_gain = gains[:, rows, modes]                              # (B, I)
    signal = own_gain[:, :, None] * powers[:, modes].T[None]      # (B, I, Q)
    cross = gains.copy()
    cross[:, rows, modes] = 0.0
    gamma = signal / (cross @ powers.T + noise[None, :, None])
    return np.einsum("i,biq->bq", weights, np.log2(1 + gamma))


def grid_search(scenario, grid: GridSpec, budget="total_projection", chunk=512) -> GridResult:
    """Exhaustive search over unit-modulus phase levels and a power lattice.

    Every RIS element takes one of ``grid.phase_levels`` equally spaced
    phases; every mode takes one of ``grid.power_levels``.  Power points
    violating the budget are discarded before evaluation.
    """
    n_ris, n_tx = scenario.n_ris, scenario.n_tx
    n_phase = grid.phase_levels ** n_ris
    n_power = grid.power_levels.size ** n_tx
    if n_phase * n_power > grid.cap:
        raise GridTooLarge(f"grid has {n_phase * n_power} points, cap is {grid.cap}")

    powers = np.array(list(itertools.product(grid.power_levels, repeat=n_tx)))
    pt = scenario.pt
    if budget == "per_mode_clip":
        keep = powers.max(axis=1) <= pt * (1 + 1e-12)
    else:
        keep = powers.sum(axis=1) <= pt * (1 + 1e-12)
    powers = powers[keep]

    phases = np.exp(2j * np.pi * np.arange(grid.phase_levels) / grid.phase_levels)
    modes = scenario.basis.modes
    noise = np.asarray(scenario.cfg.noise_power, dtype=float)[scenario.basis.users]
    weights = np.asarray(scenario.cfg.weights, dtype=float)[scenario.basis.users]

    best = (-np.inf, None, None)
    combos = itertools.product(range(grid.phase_levels), repeat=n_ris)
    while True:
        idx = np.array(list(itertools.islice(combos, chunk)))
        if idx.size == 0:
            break
        thetas = phases[idx]
        gains = np.abs(effective_channels(scenario, thetas)) ** 2
        rates = _grid_rates(gains, powers, modes, noise, weights)
        b, q = np.unravel_index(np.argmax(rates), rates.shape)
        if rates[b, q] > best[0]:
            best = (float(rates[b, q]), powers[q].copy(), thetas[b].copy())
    return GridResult(p=best[1], theta=best[2], sum_rate=best[0], n_points=n_phase * n_power)


@dataclass(frozen=True)
class MonteCarloSpec:
    n_draws: int = 100_000
    seed: int = 0
    n_batches: int = 50


@dataclass(frozen=True)
class MonteCarloResult:
    sinr: np.ndarray
    stderr: np.ndarray
    signal_power: np.ndarray
    ipn_power: np.ndarray
    infinite: np.ndarray


def monte_carlo_sinr(scenario, p, theta, spec: MonteCarloSpec = MonteCarloSpec(),
                     noise=None) -> MonteCarloResult:
    """Symbol-level estimate of the per-mode SINR.

    Draws unit-variance circular Gaussian symbols, transmits them through
    the IDFT, the RIS-cascaded channel and AWGN, decomposes each user's
    receive vector with its DFT vectors (scaled by ``1/sqrt(Nr)`` so the
    per-mode noise variance is ``sigma_k^2``), and regresses each detected
    output on its own symbol stream.  Signal power is the squared fitted
    gain (bias-corrected), interference-plus-noise power the residual
    variance; both are averaged over ``spec.n_batches`` batches and the SINR
    is their ratio, with a delta-method standard error.  A vanishing
    residual is reported as infinite SINR and flagged in ``infinite``.

    ``noise`` overrides the per-user noise variances (length K).
    """
    rng = np.random.default_rng(spec.seed)
    ch, basis = scenario.channels, scenario.basis
    n_tx = ch.G.shape[1]
    n_rx = ch.H.shape[1]
    p = np.asarray(p, dtype=float)
    sigma2 = np.asarray(scenario.cfg.noise_power if noise is None else noise, dtype=float)
    n_batch = spec.n_draws // spec.n_batches
    if n_batch < 2:
        raise ValueError("need at least two draws per batch")

    precoder = basis.tx * np.sqrt(p)[None, :] / np.sqrt(n_tx)
    cascade = [ch.H[k] @ (np.conj(theta)[:, None] * ch.G) for k in range(len(basis.rx))]

    signals, ipns = [], []
    for _ in range(spec.n_batches):
        s = (rng.standard_normal((n_tx, n_batch)) + 1j * rng.standard_normal((n_tx, n_batch))) / np.sqrt(2)
        x = precoder @ s
        s_b, i_b = [], []
        for k, rx in enumerate(basis.rx):
            n = (rng.standard_normal((n_rx, n_batch)) + 1j * rng.standard_normal((n_rx, n_batch)))
            y = cascade[k] @ x + np.sqrt(sigma2[k] / 2) * n
            y_hat = rx.conj().T @ y / np.sqrt(n_rx)
            for row, mode in enumerate(basis.assignment[k]):
                ref = s[mode]
                energy = np.vdot(ref, ref).real
                coef = np.vdot(ref, y_hat[row]) / energy
                resid = y_hat[row] - coef * ref
                ipn = np.vdot(resid, resid).real / (n_batch - 1)
                # |coef|^2 overshoots |u|^2 p by the estimator variance ipn / energy
                s_b.append(abs(coef) ** 2 - ipn / energy)
                i_b.append(ipn)
        signals.append(s_b)
        ipns.append(i_b)
    signals, ipns = np.array(signals), np.array(ipns)
    sig, ipn = signals.mean(axis=0), ipns.mean(axis=0)
    infinite = ipn <= 1e-24 * np.abs(sig)
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(infinite, np.inf, sig / ipn)
        # delta-method standard error of the ratio of batch means
        spread = (signals - np.where(infinite, 0.0, gamma) * ipns).std(axis=0, ddof=1)
        stderr = np.where(infinite, np.nan, spread / ipn / np.sqrt(spec.n_batches))
    return MonteCarloResult(gamma, stderr, sig, ipn, infinite)


def finite_diff_gradient(f, x, step=1e-6) -> np.ndarray:
    """Central-difference gradient of a real scalar function.

    For complex ``x`` the real and imaginary parts are perturbed separately
    and the result is packed as ``d/dRe + 1j * d/dIm``.
    """
    x = np.asarray(x)
    is_complex = np.iscomplexobj(x)
    base = np.array(x, dtype=complex if is_complex else float)
    f0 = f(base)
    if not np.isfinite(f0):
        raise ValueError("function is not finite at x")
    directions = [1.0, 1j] if is_complex else [1.0]
    grad = np.zeros(base.shape, dtype=complex if is_complex else float)
    for idx in np.ndindex(base.shape):
        for d in directions:
            xp, xm = base.copy(), base.copy()
            xp[idx] += step * d
            xm[idx] -= step * d
            fp, fm = f(xp), f(xm)
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise ValueError(f"non-finite evaluation near coordinate {idx}")
            grad[idx] += d * (fp - fm) / (2 * step)
    return grad


@dataclass(frozen=True)
class PGResult:
    theta: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: np.ndarray


def largest_eigenvalue(U, iters=500, seed=0) -> float:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(U.shape[0]) + 1j * rng.standard_normal(U.shape[0])
    lam = 0.0
    for _ in range(iters):
        y = U @ x
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0
        lam_new = float(np.real(np.vdot(x, y)) / np.real(np.vdot(x, x)))
        x = y / norm
        if abs(lam_new - lam) <= 1e-14 * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return lam


def projected_gradient_theta(qp: ThetaQP, theta0, step=None, tol=1e-15, max_iters=500_000) -> PGResult:
    """Projected gradient descent on the disk-constrained theta QP.

    The real-pair gradient of ``theta^H U theta - 2 Re(theta^H v)`` is
    ``2 (U theta - v)`` with Lipschitz constant ``2 lambda_max(U)``; the
    default step is the inverse of that constant (estimated by power
    iteration, inflated by 5%).
    """
    if step is None:
        lip = 2 * largest_eigenvalue(qp.U) * 1.05
        step = 1.0 / lip if lip > 0 else 1.0
    theta = project_unit_disk(theta0)
    obj = qp.objective(theta)
    history = [obj]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        theta = project_unit_disk(theta - step * 2 * qp.gradient(theta))
        new = qp.objective(theta)
        history.append(new)
        if abs(obj - new) <= tol * max(1.0, abs(new)):
            obj = new
            converged = True
            break
        obj = new
    return PGResult(theta, obj, it, converged, np.array(history))
