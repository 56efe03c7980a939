"""Scenario and solver configuration.

Configurations are plain dataclasses that round-trip through JSON.  Power
budgets are given in dB relative to unit noise power and converted to linear
units on access (``ScenarioConfig.pt_linear``).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

SPEED_OF_LIGHT = 299_792_458.0

# Preferred (M_y, M_z) factorizations for the RIS sizes used in the experiments.
DEFAULT_RIS_GRIDS = {20: (5, 4), 40: (8, 5), 60: (10, 6), 80: (10, 8), 120: (12, 10)}

BUDGET_MODES = ("total_projection", "per_mode_clip")
THETA_INITS = ("ones", "random")


class ConfigError(ValueError):
    """Raised when a configuration violates the schema or its invariants."""


def ris_grid_shape(n_elements: int) -> tuple[int, int]:
    """Return ``(M_y, M_z)`` with ``M_y * M_z == n_elements``.

    Known sizes use the fixed table; anything else gets the most nearly
    square factorization with ``M_y >= M_z``.
    """
    if n_elements < 1:
        raise ConfigError(f"RIS size must be positive, got {n_elements}")
    if n_elements in DEFAULT_RIS_GRIDS:
        return DEFAULT_RIS_GRIDS[n_elements]
    mz = int(math.isqrt(n_elements))
    while n_elements % mz:
        mz -= 1
    return n_elements // mz, mz


@dataclass
class SolverOptions:
    """Options for the alternating optimizer."""

    max_iters: int = 500
    tol: float = 1e-6
    inner_tol: float = 1e-9
    inner_max_sweeps: int = 2000
    budget: str = "total_projection"
    theta_init: str = "ones"
    seed: int = 0

    def validate(self) -> None:
        if self.max_iters < 1:
            raise ConfigError("solver.max_iters must be >= 1")
        if not self.tol > 0:
            raise ConfigError("solver.tol must be > 0")
        if not self.inner_tol > 0:
            raise ConfigError("solver.inner_tol must be > 0")
        if self.inner_max_sweeps < 1:
            raise ConfigError("solver.inner_max_sweeps must be >= 1")
        if self.budget not in BUDGET_MODES:
            raise ConfigError(f"solver.budget must be one of {BUDGET_MODES}, got {self.budget!r}")
        if self.theta_init not in THETA_INITS:
            raise ConfigError(f"solver.theta_init must be one of {THETA_INITS}, got {self.theta_init!r}")


@dataclass
class ScenarioConfig:
    """Physical scenario plus solver options.

    Defaults reproduce the reference setup: three users with five-element
    receive UCAs, a fifteen-element transmit UCA, a 40-element RIS at
    (2, 30, 0) m, 10 GHz carrier and a 20 dB power budget.

    Optional fields left as ``None`` are resolved by :meth:`resolved`:
    ``modes_per_user`` splits the ``n_tx`` modes evenly, ``mode_sets``
    assigns contiguous blocks, ``ris_dy``/``ris_dz`` default to half a
    wavelength, ``user_centers`` place user k at ``(10 k, 20, 0)`` m.
    """

    n_users: int = 3
    n_tx: int = 15
    n_rx: int = 5
    modes_per_user: list[int] | None = None
    mode_sets: list[list[int]] | None = None
    tx_radius: float = 0.6
    rx_radius: float | list[float] = 0.6
    carrier_hz: float = 10e9
    beta: float = 1.0
    noise_power: float | list[float] = 1.0
    pt_db: float = 20.0
    weights: list[float] | None = None
    ris_my: int = 8
    ris_mz: int = 5
    ris_dy: float | None = None
    ris_dz: float | None = None
    ris_x: float = 2.0
    ris_y: float = 30.0
    user_centers: list[list[float]] | None = None
    user_spacing: float = 10.0
    user_x: float = 0.0
    user_y: float = 20.0
    solver: SolverOptions = field(default_factory=SolverOptions)
    seed: int = 0

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def pt_linear(self) -> float:
        return 10.0 ** (self.pt_db / 10.0)

    @property
    def n_ris(self) -> int:
        return self.ris_my * self.ris_mz

    def with_ris_size(self, n_elements: int) -> "ScenarioConfig":
        my, mz = ris_grid_shape(n_elements)
        return dataclasses.replace(self, ris_my=my, ris_mz=mz)

    def resolved(self) -> "ScenarioConfig":
        """Return a copy with every optional field filled in and validated."""
        self.validate_shape()
        K = self.n_users
        counts = self.modes_per_user
        if self.mode_sets is not None:
            sets = [sorted(int(l) for l in s) for s in self.mode_sets]
            counts = [len(s) for s in sets]
        else:
            if counts is None:
                base, extra = divmod(self.n_tx, K)
                counts = [base + (1 if k < extra else 0) for k in range(K)]
            counts = [int(c) for c in counts]
            if len(counts) != K:
                raise ConfigError(f"modes_per_user has {len(counts)} entries, expected n_users={K}")
            if sum(counts) > self.n_tx:
                raise ConfigError(
                    f"modes_per_user sums to {sum(counts)}, exceeding n_tx={self.n_tx}")
            starts = [sum(counts[:k]) for k in range(K)]
            sets = [list(range(s, s + c)) for s, c in zip(starts, counts)]

        lam = self.wavelength
        centers = self.user_centers
        if centers is None:
            centers = [[self.user_x + k * self.user_spacing, self.user_y, 0.0] for k in range(K)]
        out = dataclasses.replace(
            self,
            modes_per_user=counts,
            mode_sets=sets,
            rx_radius=_per_user(self.rx_radius, K, "rx_radius"),
            noise_power=_per_user(self.noise_power, K, "noise_power"),
            weights=[1.0] * K if self.weights is None else [float(w) for w in self.weights],
            ris_dy=lam / 2 if self.ris_dy is None else float(self.ris_dy),
            ris_dz=lam / 2 if self.ris_dz is None else float(self.ris_dz),
            user_centers=[[float(c) for c in row] for row in centers],
            solver=dataclasses.replace(self.solver),
        )
        out.validate()
        return out

    def validate_shape(self) -> None:
        for name in ("n_users", "n_tx", "n_rx", "ris_my", "ris_mz"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        for name in ("tx_radius", "carrier_hz", "beta"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {value!r}")
        if not math.isfinite(self.pt_db):
            raise ConfigError("pt_db must be finite")

    def validate(self) -> None:
        """Check the invariants of a resolved configuration."""
        self.validate_shape()
        K = self.n_users
        sets = self.mode_sets
        if sets is None or len(sets) != K:
            raise ConfigError(f"mode_sets must list one mode set per user ({K})")
        flat = [l for s in sets for l in s]
        if len(set(flat)) != len(flat):
            raise ConfigError("mode_sets overlap between users")
        if any(l < 0 or l >= self.n_tx for l in flat):
            raise ConfigError(f"mode indices must lie in [0, {self.n_tx - 1}]")
        for k, s in enumerate(sets):
            if len(s) == 0:
                raise ConfigError(f"user {k} has no assigned modes")
            if len(s) > self.n_rx:
                raise ConfigError(
                    f"modes_per_user[{k}] = {len(s)} exceeds n_rx = {self.n_rx}")
            if len({l % self.n_rx for l in s}) != len(s):
                raise ConfigError(f"modes of user {k} alias onto the same receive DFT bin")
        for name in ("rx_radius", "noise_power", "weights"):
            values = getattr(self, name)
            if len(values) != K:
                raise ConfigError(f"{name} needs {K} entries, got {len(values)}")
        if any(not (r > 0) for r in self.rx_radius):
            raise ConfigError("rx_radius must be positive")
        if any(not (s > 0) for s in self.noise_power):
            raise ConfigError("noise_power must be positive")
        if any(not (w >= 0) for w in self.weights):
            raise ConfigError("weights must be nonnegative")
        if not (self.ris_dy > 0 and self.ris_dz > 0):
            raise ConfigError("RIS spacings must be positive")
        if len(self.user_centers) != K or any(len(c) != 3 for c in self.user_centers):
            raise ConfigError("user_centers must hold one (x, y, z) triple per user")
        self.solver.validate()

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def _per_user(value, n_users: int, name: str) -> list[float]:
    if isinstance(value, (int, float)):
        return [float(value)] * n_users
    values = [float(v) for v in value]
    if len(values) != n_users:
        raise ConfigError(f"{name} needs {n_users} entries, got {len(values)}")
    return values


_FIELDS = {f.name for f in dataclasses.fields(ScenarioConfig)}
_SOLVER_FIELDS = {f.name for f in dataclasses.fields(SolverOptions)}


def config_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    """Build and resolve a config from a JSON-style mapping.

    A top-level ``n_ris`` key may replace ``ris_my``/``ris_mz``.
    """
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    data = dict(data)
    solver = data.pop("solver", {}) or {}
    n_ris = data.pop("n_ris", None)
    unknown = set(data) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    if not isinstance(solver, dict):
        raise ConfigError("solver must be a JSON object")
    unknown = set(solver) - _SOLVER_FIELDS
    if unknown:
        raise ConfigError(f"unknown solver field(s): {', '.join(sorted(unknown))}")
    try:
        cfg = ScenarioConfig(**data, solver=SolverOptions(**solver))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if n_ris is not None:
        cfg = cfg.with_ris_size(int(n_ris))
    return cfg.resolved()


def load_config(path: str | Path) -> ScenarioConfig:
    """Load a JSON config file, apply defaults and validate it."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def default_config() -> ScenarioConfig:
    """The bundled reference configuration."""
    text = resources.files("risoam").joinpath("data/default.json").read_text()
    return config_from_dict(json.loads(text))


def save_config(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
