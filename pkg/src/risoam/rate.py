"""Per-mode SINR and weighted achievable sum rate.

Interference at a detected mode is summed over every other transmit mode,
including the modes assigned to other users.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import coupling_scalars

LN2 = np.log(2.0)


@dataclass(frozen=True)
class RateReport:
    sinr: np.ndarray
    mode_rates: np.ndarray
    user_rates: np.ndarray
    sum_rate: float
    weights: np.ndarray


def signal_and_interference(p, u, modes):
    """Return ``(signal, interference)`` powers per detected mode.

    ``signal[i] = p[modes[i]] |u[i, modes[i]]|^2``; ``interference[i]`` sums
    ``p[j] |u[i, j]|^2`` over ``j != modes[i]``.
    """
    gain = np.abs(u) ** 2
    rows = np.arange(gain.shape[0])
    signal = p[modes] * gain[rows, modes]
    masked = gain.copy()
    masked[rows, modes] = 0.0
    return signal, masked @ p


def sinr(p, u, noise, modes) -> np.ndarray:
    """SINR of every detected mode.

    Parameters
    ----------
    p : (Nt,) array
        Transmit power per global OAM mode, nonnegative.
    u : (n_detected, Nt) complex array
        Scalar couplings ``u[i, j]`` from transmit mode ``j`` to detected mode ``i``.
    noise : (n_detected,) array
        Noise variance seen by each detected mode (its user's sigma^2).
    modes : (n_detected,) int array
        Global mode index carried by each detected mode.
    """
    p = np.asarray(p, dtype=float)
    signal, interference = signal_and_interference(p, u, np.asarray(modes))
    return signal / (interference + noise)


def rate_report(p, theta, scenario) -> RateReport:
    coupling = scenario.coupling
    gamma = sinr(p, coupling_scalars(coupling, theta), scenario.noise, coupling.modes)
    w = scenario.weights
    mode_rates = w * np.log1p(gamma) / LN2
    user_rates = np.bincount(coupling.users, weights=mode_rates, minlength=scenario.n_users)
    return RateReport(gamma, mode_rates, user_rates, float(mode_rates.sum()), w)


def weighted_sum_rate(p, theta, scenario) -> float:
    """Weighted sum of ``log2(1 + SINR)`` over all users and their modes, bits/s/Hz."""
    return rate_report(p, theta, scenario).sum_rate
