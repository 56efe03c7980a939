"""A fully built scenario: geometry, channels, mode basis and couplings."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .channel import (ChannelSet, CouplingTensor, ModeBasis, build_channels,
                      build_coupling, build_mode_basis)
from .config import ScenarioConfig
from .geometry import (RisGeometry, TransmitterGeometry, UserGeometry, build_ris,
                       build_transmitter, build_user)


@dataclass(frozen=True)
class Scenario:
    cfg: ScenarioConfig
    tx: TransmitterGeometry
    users: tuple[UserGeometry, ...]
    ris: RisGeometry
    channels: ChannelSet
    basis: ModeBasis
    coupling: CouplingTensor

    @property
    def n_tx(self) -> int:
        return self.cfg.n_tx

    @property
    def n_ris(self) -> int:
        return self.ris.n_elements

    @property
    def n_users(self) -> int:
        return self.cfg.n_users

    @property
    def pt(self) -> float:
        """Linear power budget."""
        return self.cfg.pt_linear

    @property
    def noise(self) -> np.ndarray:
        """Noise variance per detected mode."""
        return np.asarray(self.cfg.noise_power, dtype=float)[self.coupling.users]

    @property
    def weights(self) -> np.ndarray:
        """Rate weight per detected mode."""
        return np.asarray(self.cfg.weights, dtype=float)[self.coupling.users]

    def with_config(self, **changes) -> "Scenario":
        """Rebuild with some config fields replaced (e.g. ``noise_power``)."""
        return build_scenario(dataclasses.replace(self.cfg, **changes))


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    cfg = cfg.resolved()
    tx = build_transmitter(cfg)
    users = tuple(build_user(cfg, k) for k in range(cfg.n_users))
    ris = build_ris(cfg)
    channels = build_channels(tx, list(users), ris, cfg)
    basis = build_mode_basis(cfg)
    return Scenario(cfg, tx, users, ris, channels, basis, build_coupling(channels, basis))


def noise_for_snr(scenario: Scenario, snr_db: float) -> float:
    """Noise power giving a target mean per-mode SNR under uniform power.

    The reference signal power of a detected mode is ``(pt / Nt) * ||a_own||_1^2``,
    the coherent-combining bound on ``p |u|^2``.
    """
    bound = np.abs(scenario.coupling.own).sum(axis=1) ** 2
    return float(scenario.pt / scenario.n_tx * bound.mean() / 10 ** (snr_db / 10))
