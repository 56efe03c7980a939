"""Alternating fractional-programming optimizer for power and RIS phases.

One outer iteration performs

1. ``nu <- SINR(p, theta)`` and ``eta`` by the quadratic transform,
2. a closed-form power update that maximizes the transformed objective,
3. ``nu~, eta~`` at the new power, then a modulus-constrained quadratic
   program in ``theta`` solved by cyclic block-coordinate descent.

Each step maximizes a minorizer of the weighted sum rate that is tight at
the current point, so the sum rate never decreases.

Array conventions follow :mod:`risoam.channel`: ``u`` is
``(n_detected, Nt)``, ``modes[i]`` is the transmit mode carried by detected
mode ``i``, and ``noise``/``weights`` are per detected mode.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .channel import CouplingTensor, coupling_scalars
from .config import BUDGET_MODES, SolverOptions
from .rate import LN2, rate_report, signal_and_interference, sinr

log = logging.getLogger(__name__)

SCHEMES = ("joint", "power_only", "phase_only")


class SolverError(RuntimeError):
    """The alternating optimizer produced a non-finite objective."""


# ----------------------------------------------------------------------------
# transformed objectives
# ----------------------------------------------------------------------------

def _received(p, u, noise, modes):
    signal, interference = signal_and_interference(np.asarray(p, dtype=float), u, modes)
    return signal, signal + interference + noise


def lagrangian_terms(p, nu, u, noise, weights, modes) -> np.ndarray:
    """Per-detected-mode terms of the Lagrangian dual transform, in bits.

    ``[w ln(1+nu) - w nu + w (1+nu) S / (S + I + sigma^2)] / ln 2``.  For
    fixed ``p`` the maximum over ``nu`` is attained at ``nu = SINR`` and
    equals ``w log2(1 + SINR)``.
    """
    signal, total = _received(p, u, noise, modes)
    return weights * (np.log1p(nu) - nu + (1 + nu) * signal / total) / LN2


def lagrangian_objective(p, nu, u, noise, weights, modes) -> float:
    return float(lagrangian_terms(p, nu, u, noise, weights, modes).sum())


def quadratic_objective(p, nu, eta, u, noise, weights, modes) -> float:
    """Quadratic-transform surrogate of the sum-of-ratios part (power step)."""
    p = np.asarray(p, dtype=float)
    gain = np.abs(u) ** 2
    rows = np.arange(gain.shape[0])
    own = weights * (1 + nu) * p[modes] * gain[rows, modes]
    total = gain @ p + noise
    return float(np.sum(2 * eta * np.sqrt(own) - eta ** 2 * total))


def dual_multipliers(p, nu, u, noise, weights, modes):
    """Optimal dual variables in two forms: ``w / (1 + nu)`` and the ratio form.

    The ratio form is ``w (I + sigma^2) / (S + I + sigma^2)``; the two agree
    when ``nu`` is the SINR.
    """
    signal, total = _received(p, u, noise, modes)
    return weights / (1 + nu), weights * (total - signal) / total


# ----------------------------------------------------------------------------
# power step
# ----------------------------------------------------------------------------

def update_nu(p, u, noise, modes) -> np.ndarray:
    """Stationary point of the dual transform in ``nu``: the current SINR."""
    return sinr(p, u, noise, modes)


def update_eta(p, nu, u, noise, weights, modes) -> np.ndarray:
    """``eta = sqrt(w (1+nu) S) / (S + I + sigma^2)``."""
    signal, total = _received(p, u, noise, modes)
    return np.sqrt(weights * (1 + nu) * signal) / total


def update_power(p, nu, eta, u, weights, modes, pt, budget="total_projection"):
    """Closed-form power update with ``nu`` and ``eta`` held fixed.

    The surrogate is separable and concave in ``p``:
    ``sum_l 2 b_l sqrt(p_l) - D_l p_l`` with ``b_l = eta_l sqrt(w (1+nu) |u_ll|^2)``
    and ``D_l = sum_i eta_i^2 |u_il|^2``.  Its unconstrained maximizer is
    ``(b_l / D_l)^2``.

    ``per_mode_clip`` caps each mode at ``pt``.  ``total_projection``
    enforces ``sum(p) <= pt`` exactly through the KKT multiplier ``mu``:
    ``p_l = (b_l / (D_l + mu))^2`` with ``mu`` found by root bracketing.

    Returns
    -------
    p_new : ndarray
    stalled : bool
        True if every ``eta`` vanished; ``p`` is then returned unchanged.
    """
    if budget not in BUDGET_MODES:
        raise ValueError(f"unknown budget mode {budget!r}")
    p = np.asarray(p, dtype=float)
    n_tx = p.shape[0]
    gain = np.abs(u) ** 2
    rows = np.arange(gain.shape[0])
    b = np.zeros(n_tx)
    b[modes] = eta * np.sqrt(weights * (1 + nu) * gain[rows, modes])
    D = (eta ** 2) @ gain
    if not np.any(D > 0):
        return p.copy(), True

    active = b > 0
    p_new = np.zeros(n_tx)
    if budget == "per_mode_clip":
        p_new[active] = np.minimum(pt, (b[active] / D[active]) ** 2)
        return p_new, False

    b, D = b[active], D[active]

    def excess(mu):
        return np.sum((b / (D + mu)) ** 2) - pt

    if excess(0.0) <= 0:
        p_new[active] = (b / D) ** 2
        return p_new, False
    hi = b.max() * math.sqrt(b.size / pt)
    # mu lives on the scale of D, which can sit many decades below hi, so
    # only a relative tolerance locates it reliably
    mu = brentq(excess, 0.0, hi, xtol=np.finfo(float).tiny, rtol=4 * np.finfo(float).eps,
                maxiter=2000)
    vals = (b / (D + mu)) ** 2
    total = vals.sum()
    if total > pt:
        vals *= pt / total
    p_new[active] = vals
    return p_new, False


def power_feasible(p, pt, budget="total_projection", rtol=1e-12) -> bool:
    p = np.asarray(p)
    if np.any(p < 0):
        return False
    if budget == "per_mode_clip":
        return bool(p.max(initial=0.0) <= pt * (1 + rtol))
    return bool(p.sum() <= pt * (1 + rtol))


# ----------------------------------------------------------------------------
# theta step
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaQP:
    """``minimize theta^H U theta - 2 Re(theta^H v)`` subject to ``|theta_m| <= 1``."""

    U: np.ndarray
    v: np.ndarray

    @property
    def size(self) -> int:
        return self.v.shape[0]

    def objective(self, theta) -> float:
        theta = np.asarray(theta)
        return float(np.real(np.vdot(theta, self.U @ theta)) - 2 * np.real(np.vdot(theta, self.v)))

    def gradient(self, theta) -> np.ndarray:
        """``U theta - v``; the real-pair gradient is twice this."""
        return self.U @ theta - self.v


def theta_auxiliaries(p, theta, coupling: CouplingTensor, noise, weights):
    """``nu~`` and complex ``eta~`` at ``(p, theta)``.

    ``eta~ = sqrt(w (1+nu~) p_own) u_own / (S + I + sigma^2)``; its modulus is
    the real quadratic-transform variable and its phase follows the own
    coupling, which keeps the surrogate tight and concave in ``theta``.
    """
    u = coupling_scalars(coupling, theta)
    modes = coupling.modes
    nu_t = sinr(p, u, noise, modes)
    _, total = _received(p, u, noise, modes)
    scale = np.sqrt(weights * (1 + nu_t) * np.asarray(p)[modes])
    eta_t = scale * u[np.arange(len(modes)), modes] / total
    return nu_t, eta_t


def build_theta_qp(p, nu_t, eta_t, coupling: CouplingTensor, weights) -> ThetaQP:
    """Assemble ``U = sum_i |eta~_i|^2 sum_j p_j a_ij a_ij^H`` and
    ``v = sum_i sqrt(w (1+nu~) p_own) conj(eta~_i) a_ii``."""
    p = np.asarray(p, dtype=float)
    a = coupling.a
    n_ris = a.shape[2]
    coef = np.abs(eta_t)[:, None] ** 2 * p[None, :]
    A = (a * np.sqrt(coef)[:, :, None]).reshape(-1, n_ris)
    U = A.T @ A.conj()
    U = 0.5 * (U + U.conj().T)
    scale = np.sqrt(weights * (1 + nu_t) * p[coupling.modes])
    v = (scale * np.conj(eta_t)) @ coupling.own
    return ThetaQP(U=U, v=v)


def theta_surrogate(theta, p, nu_t, eta_t, coupling: CouplingTensor, noise, weights) -> float:
    """Quadratic-transform surrogate in ``theta`` (the maximized form)."""
    p = np.asarray(p, dtype=float)
    u = coupling_scalars(coupling, theta)
    modes = coupling.modes
    scale = np.sqrt(weights * (1 + nu_t) * p[modes])
    own = u[np.arange(len(modes)), modes]
    total = (np.abs(u) ** 2) @ p + noise
    return float(np.sum(2 * np.real(np.conj(eta_t) * scale * own) - np.abs(eta_t) ** 2 * total))


@dataclass(frozen=True)
class ThetaSolution:
    theta: np.ndarray
    objective: float
    sweeps: int
    converged: bool


def project_unit_disk(theta) -> np.ndarray:
    theta = np.array(theta, dtype=complex)
    mag = np.abs(theta)
    out = mag > 1
    theta[out] /= mag[out]
    return theta


def solve_theta_qp(qp: ThetaQP, theta0, tol=1e-9, max_sweeps=2000) -> ThetaSolution:
    """Cyclic block-coordinate descent over the RIS elements.

    Coordinate ``m`` minimizes ``U_mm |t|^2 - 2 Re(conj(t) c_m)`` over the
    unit disk with ``c_m = v_m - sum_{j != m} U_mj theta_j``; the minimizer is
    ``c_m / U_mm`` clipped to the disk (the phase of ``c_m`` when ``U_mm``
    vanishes).  Sweeps stop once no coordinate moves by more than ``tol`` or
    a sweep lowers the objective by at most ``tol`` relative to its magnitude.
    """
    U, v = qp.U, qp.v
    theta = project_unit_disk(theta0)
    diag = np.real(np.diag(U)).copy()
    r = U @ theta
    objective = qp.objective(theta)
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        biggest = 0.0
        decrease = 0.0
        for m in range(theta.shape[0]):
            old = theta[m]
            c = v[m] - (r[m] - diag[m] * old)
            mag = abs(c)
            if mag >= diag[m]:
                new = c / mag if mag > 0 else old
            else:
                new = c / diag[m]
            delta = new - old
            if delta != 0:
                # exact drop of the one-dimensional objective
                decrease += (diag[m] * (abs(old) ** 2 - abs(new) ** 2)
                             - 2 * (np.conj(old) * c).real + 2 * (np.conj(new) * c).real)
                r += U[:, m] * delta
                theta[m] = new
                biggest = max(biggest, abs(delta))
        objective -= decrease
        if biggest <= tol or decrease <= tol * abs(objective):
            converged = True
            break
    if not converged:
        log.debug("theta BCD stopped after %d sweeps without converging", sweeps)
    return ThetaSolution(theta, qp.objective(theta), sweeps, converged)


def kkt_residual(qp: ThetaQP, theta, boundary_tol=1e-9) -> float:
    """Largest KKT violation of ``theta`` for the disk-constrained QP.

    Interior coordinates need ``(U theta - v)_m = 0``; boundary coordinates
    need ``(U theta - v)_m = -mu theta_m`` with ``mu >= 0``.
    """
    theta = np.asarray(theta)
    g = qp.gradient(theta)
    mag = np.abs(theta)
    interior = mag < 1 - boundary_tol
    res = np.abs(g[interior])
    on = ~interior
    radial = np.real(g[on] * np.conj(theta[on]))
    tangential = np.abs(np.imag(g[on] * np.conj(theta[on])))
    res_b = np.maximum(tangential, np.maximum(radial, 0.0))
    return float(np.concatenate([res, res_b]).max(initial=0.0))


# ----------------------------------------------------------------------------
# alternating loop
# ----------------------------------------------------------------------------

@dataclass
class SolverState:
    p: np.ndarray
    theta: np.ndarray
    nu: np.ndarray
    eta: np.ndarray
    nu_theta: np.ndarray
    eta_theta: np.ndarray
    iteration: int = 0
    history: list[float] = field(default_factory=list)
    converged: bool = False
    stalled: bool = False
    inner_unconverged: int = 0


@dataclass
class IterationTrace:
    n_users: int
    iteration: list[int] = field(default_factory=list)
    sum_rate: list[float] = field(default_factory=list)
    user_rates: list[np.ndarray] = field(default_factory=list)
    total_power: list[float] = field(default_factory=list)
    max_power: list[float] = field(default_factory=list)
    max_abs_theta: list[float] = field(default_factory=list)

    def record(self, t, report, p, theta):
        self.iteration.append(t)
        self.sum_rate.append(report.sum_rate)
        self.user_rates.append(report.user_rates.copy())
        self.total_power.append(float(np.sum(p)))
        self.max_power.append(float(np.max(p)))
        self.max_abs_theta.append(float(np.max(np.abs(theta))))

    def __len__(self):
        return len(self.iteration)

    @property
    def columns(self) -> list[str]:
        users = [f"rate_user_{k + 1}" for k in range(self.n_users)]
        return ["iter", "sum_rate_bps_hz", *users, "total_power", "max_abs_theta", "max_power"]

    def rows(self):
        for i in range(len(self)):
            yield [
                self.iteration[i],
                self.sum_rate[i],
                *self.user_rates[i].tolist(),
                self.total_power[i],
                self.max_abs_theta[i],
                self.max_power[i],
            ]

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.rows():
                writer.writerow([v if isinstance(v, int) else repr(float(v)) for v in row])


def initial_point(scenario, opts: SolverOptions):
    p = np.full(scenario.n_tx, scenario.pt / scenario.n_tx)
    if opts.theta_init == "random":
        rng = np.random.default_rng(opts.seed)
        theta = np.exp(2j * np.pi * rng.random(scenario.n_ris))
    else:
        theta = np.ones(scenario.n_ris, dtype=complex)
    return p, theta


def alternating_optimize(scenario, opts: SolverOptions | None = None, scheme="joint",
                         p0=None, theta0=None):
    """Maximize the weighted sum rate over power and RIS phases.

    Parameters
    ----------
    scenario : Scenario
    opts : SolverOptions, optional
    scheme : {"joint", "power_only", "phase_only"}
        ``power_only`` keeps ``theta`` at its initial value, ``phase_only``
        keeps the uniform power allocation.
    p0, theta0 : array, optional
        Starting point; defaults to uniform power and ``opts.theta_init``.

    Returns
    -------
    state : SolverState
    trace : IterationTrace
        Row 0 is the starting point.
    """
    opts = opts or SolverOptions()
    opts.validate()
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    coupling = scenario.coupling
    noise, weights, modes = scenario.noise, scenario.weights, coupling.modes
    pt = scenario.pt

    p_init, theta_init = initial_point(scenario, opts)
    p = p_init if p0 is None else np.array(p0, dtype=float)
    theta = theta_init if theta0 is None else project_unit_disk(theta0)

    trace = IterationTrace(scenario.n_users)
    report = rate_report(p, theta, scenario)
    trace.record(0, report, p, theta)
    state = SolverState(p, theta, *(np.zeros(len(modes)) for _ in range(4)),
                        history=[report.sum_rate])
    previous = report.sum_rate

    for t in range(1, opts.max_iters + 1):
        u = coupling_scalars(coupling, theta)
        nu = update_nu(p, u, noise, modes)
        eta = update_eta(p, nu, u, noise, weights, modes)
        state.nu, state.eta = nu, eta
        if scheme != "phase_only":
            p, stalled = update_power(p, nu, eta, u, weights, modes, pt, opts.budget)
            state.stalled = state.stalled or stalled
        if scheme != "power_only":
            nu_t, eta_t = theta_auxiliaries(p, theta, coupling, noise, weights)
            qp = build_theta_qp(p, nu_t, eta_t, coupling, weights)
            solution = solve_theta_qp(qp, theta, opts.inner_tol, opts.inner_max_sweeps)
            theta = solution.theta
            state.inner_unconverged += not solution.converged
            state.nu_theta, state.eta_theta = nu_t, eta_t

        report = rate_report(p, theta, scenario)
        current = report.sum_rate
        if not np.isfinite(current):
            raise SolverError(f"non-finite sum rate at iteration {t}: {current}")
        trace.record(t, report, p, theta)
        state.p, state.theta, state.iteration = p, theta, t
        state.history.append(current)
        if abs(current - previous) <= opts.tol * max(abs(previous), np.finfo(float).tiny):
            state.converged = True
            break
        previous = current

    return state, trace
