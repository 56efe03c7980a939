"""Element coordinates of the transmit UCA, the receive UCAs and the RIS.

All coordinates are in meters, stored as ``(n, 3)`` arrays with one
``(x, y, z)`` row per element.  The transmit UCA is centred at the origin,
the RIS lies in the plane ``x = ris_x`` parallel to yoz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ScenarioConfig


def rotation_z(angle: float) -> np.ndarray:
    """Rotation about the z axis, ``[[c, s, 0], [-s, c, 0], [0, 0, 1]]``.

    Note the sign convention: a positive angle turns the x axis towards -y.
    """
    if not np.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle}")
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def _circle(n: int, radius: float) -> tuple[np.ndarray, np.ndarray]:
    # UCA in the local xz plane, element 0 on the +x axis.
    angles = 2.0 * np.pi * np.arange(n) / n
    local = radius * np.stack([np.cos(angles), np.zeros(n), np.sin(angles)], axis=1)
    return angles, local


@dataclass(frozen=True)
class TransmitterGeometry:
    n_elements: int
    radius: float
    rotation: float
    angles: np.ndarray
    coords: np.ndarray


@dataclass(frozen=True)
class UserGeometry:
    index: int
    n_elements: int
    radius: float
    center: np.ndarray
    rotation: float
    angles: np.ndarray
    coords: np.ndarray


@dataclass(frozen=True)
class RisGeometry:
    my: int
    mz: int
    dy: float
    dz: float
    center: np.ndarray
    coords: np.ndarray

    @property
    def n_elements(self) -> int:
        return self.my * self.mz


def build_transmitter(cfg: ScenarioConfig) -> TransmitterGeometry:
    """Transmit UCA of radius ``tx_radius`` at the origin, turned to face the RIS."""
    n = cfg.n_tx
    if n < 1:
        raise ConfigError("transmitter needs at least one element")
    if not cfg.tx_radius > 0:
        raise ConfigError(f"tx_radius must be positive, got {cfg.tx_radius}")
    rotation = float(np.arctan2(cfg.ris_x, cfg.ris_y))
    angles, local = _circle(n, cfg.tx_radius)
    coords = local @ rotation_z(rotation).T
    return TransmitterGeometry(n, float(cfg.tx_radius), rotation, angles, coords)


def build_user(cfg: ScenarioConfig, k: int) -> UserGeometry:
    """Receive UCA of user ``k`` (zero-based), rotated by ``-rotation`` about z."""
    if not 0 <= k < cfg.n_users:
        raise ConfigError(f"user index {k} out of range [0, {cfg.n_users})")
    cfg = cfg if cfg.user_centers is not None else cfg.resolved()
    n = cfg.n_rx
    radius = cfg.rx_radius[k] if isinstance(cfg.rx_radius, list) else cfg.rx_radius
    if n < 1 or not radius > 0:
        raise ConfigError(f"user {k}: need n_rx >= 1 and positive radius")
    center = np.asarray(cfg.user_centers[k], dtype=float)
    rotation = float(np.arctan2(cfg.ris_x - center[0], center[1] - cfg.ris_y))
    angles, local = _circle(n, radius)
    coords = local @ rotation_z(-rotation).T + center
    return UserGeometry(k, n, float(radius), center, rotation, angles, coords)


def build_ris(cfg: ScenarioConfig) -> RisGeometry:
    """Centred ``M_y x M_z`` grid; element ``(iy, iz)`` sits at flat index ``iy * M_z + iz``."""
    my, mz = cfg.ris_my, cfg.ris_mz
    if my < 1 or mz < 1:
        raise ConfigError(f"RIS grid must be at least 1x1, got {my}x{mz}")
    lam = cfg.wavelength
    dy = lam / 2 if cfg.ris_dy is None else cfg.ris_dy
    dz = lam / 2 if cfg.ris_dz is None else cfg.ris_dz
    if not (dy > 0 and dz > 0):
        raise ConfigError("RIS spacings must be positive")
    center = np.array([cfg.ris_x, cfg.ris_y, 0.0])
    iy, iz = np.meshgrid(np.arange(my), np.arange(mz), indexing="ij")
    offsets = np.stack(
        [
            np.zeros(my * mz),
            dy * (iy.ravel() + (1 - my) / 2),
            dz * (iz.ravel() + (1 - mz) / 2),
        ],
        axis=1,
    )
    return RisGeometry(my, mz, float(dy), float(dz), center, center + offsets)


def build_geometry(cfg: ScenarioConfig):
    """Convenience wrapper returning ``(transmitter, users, ris)``."""
    cfg = cfg.resolved()
    return (
        build_transmitter(cfg),
        [build_user(cfg, k) for k in range(cfg.n_users)],
        build_ris(cfg),
    )
