"""Free-space cascaded channel, OAM mode vectors and RIS steering vectors.

Detected modes of all users are stacked along one axis ("detected index"):
row ``i`` of a :class:`CouplingTensor` belongs to user ``users[i]`` and
global OAM mode ``modes[i]``.  The direct transmitter-user link is assumed
blocked, so every path goes through the RIS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ScenarioConfig
from .geometry import RisGeometry, TransmitterGeometry, UserGeometry


@dataclass(frozen=True)
class ChannelSet:
    """``G`` is ``(M, Nt)``; ``H`` is ``(K, Nr, M)``."""

    G: np.ndarray
    H: np.ndarray
    wavelength: float
    beta: float


@dataclass(frozen=True)
class ModeBasis:
    """OAM mode vectors.

    ``tx`` holds ``w_t,l`` as column ``l`` (shape ``(Nt, Nt)``); ``rx[k]``
    holds the receive vectors of user ``k``'s assigned modes as columns
    (shape ``(Nr, |L_k|)``), in the order of ``assignment[k]``.
    """

    tx: np.ndarray
    rx: tuple[np.ndarray, ...]
    assignment: tuple[tuple[int, ...], ...]

    @property
    def users(self) -> np.ndarray:
        return np.concatenate([np.full(len(s), k) for k, s in enumerate(self.assignment)])

    @property
    def modes(self) -> np.ndarray:
        return np.concatenate([np.asarray(s, dtype=int) for s in self.assignment])


@dataclass(frozen=True)
class CouplingTensor:
    """Steering vectors ``a[i, j, :]`` from transmit mode ``j`` to detected mode ``i``.

    For any phase vector ``theta`` the scalar coupling is ``theta^H a[i, j]``.
    """

    a: np.ndarray
    users: np.ndarray
    modes: np.ndarray

    @property
    def n_detected(self) -> int:
        return self.a.shape[0]

    @property
    def n_tx(self) -> int:
        return self.a.shape[1]

    @property
    def n_ris(self) -> int:
        return self.a.shape[2]

    @property
    def own(self) -> np.ndarray:
        """Own-signal steering vectors ``a[i, modes[i]]``, shape ``(n_detected, M)``."""
        return self.a[np.arange(self.n_detected), self.modes]

    def scaled(self, factor: float) -> "CouplingTensor":
        return CouplingTensor(self.a * factor, self.users, self.modes)


def _link(dist: np.ndarray, wavelength: float, beta: float) -> np.ndarray:
    return beta * wavelength / (4 * np.pi * dist) * np.exp(-2j * np.pi * dist / wavelength)


def _distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    if np.any(d <= 0):
        raise ConfigError("degenerate scenario: coincident element positions")
    return d


def build_channels(
    tx: TransmitterGeometry,
    users: list[UserGeometry],
    ris: RisGeometry,
    cfg: ScenarioConfig,
) -> ChannelSet:
    """Line-of-sight links ``(beta lambda / 4 pi d) exp(-j 2 pi d / lambda)``."""
    lam, beta = cfg.wavelength, cfg.beta
    G = _link(_distances(ris.coords, tx.coords), lam, beta)
    H = np.stack([_link(_distances(u.coords, ris.coords), lam, beta) for u in users])
    return ChannelSet(G=G, H=H, wavelength=lam, beta=beta)


def build_mode_basis(cfg: ScenarioConfig) -> ModeBasis:
    """Transmit IDFT columns ``exp(j l alpha_n)`` and per-user receive DFT columns."""
    cfg = cfg if cfg.mode_sets is not None else cfg.resolved()
    flat = [l for s in cfg.mode_sets for l in s]
    if len(set(flat)) != len(flat):
        raise ConfigError("mode_sets overlap between users")
    alpha_t = 2 * np.pi * np.arange(cfg.n_tx) / cfg.n_tx
    tx = np.exp(1j * np.outer(alpha_t, np.arange(cfg.n_tx)))
    alpha_r = 2 * np.pi * np.arange(cfg.n_rx) / cfg.n_rx
    rx = tuple(np.exp(1j * np.outer(alpha_r, np.asarray(s))) for s in cfg.mode_sets)
    return ModeBasis(tx=tx, rx=rx, assignment=tuple(tuple(s) for s in cfg.mode_sets))


def build_coupling(ch: ChannelSet, basis: ModeBasis) -> CouplingTensor:
    """Steering vectors ``diag(w_k,l^H H_k) G w_t,j / sqrt(Nr Nt)``."""
    n_rx, n_ris = ch.H.shape[1:]
    n_tx = ch.G.shape[1]
    if ch.G.shape[0] != n_ris or basis.tx.shape[0] != n_tx:
        raise ValueError("channel and mode basis dimensions disagree")
    gw = ch.G @ basis.tx  # (M, Nt): column j is G w_t,j
    rows = []
    for k, rx in enumerate(basis.rx):
        if rx.shape[0] != n_rx:
            raise ValueError(f"user {k}: receive basis has {rx.shape[0]} rows, expected {n_rx}")
        wh = rx.conj().T @ ch.H[k]  # (|L_k|, M)
        rows.append(wh[:, None, :] * gw.T[None, :, :])
    a = np.concatenate(rows, axis=0) / np.sqrt(n_rx * n_tx)
    return CouplingTensor(a=a, users=basis.users, modes=basis.modes)


def coupling_scalars(coupling: CouplingTensor, theta: np.ndarray) -> np.ndarray:
    """``u[i, j] = theta^H a[i, j]`` for every detected/transmit mode pair."""
    return coupling.a @ np.conj(theta)
