"""
Scenario configuration, 3-D geometry, STAR-RIS rotation and UD mobility.

Angles follow one convention throughout: the azimuth of a node relative to the
STAR-RIS is measured from the surface half-plane chosen as the 0-rad reference,
so that at rotation delta = 0 the reflection-side normal (theta = pi/2) points at
the BS. UDs with theta in [0, pi] sit in the reflection area (RA), the rest in
the transmission area (TA).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields, replace, asdict
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.errors import ConfigurationError, GeometryError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ScenarioConfig:
    """Simulation parameters plus the geometry constants the model needs."""

    K: int = 6                                # UDs
    N: int = 64                               # STAR-RIS elements
    N_bar: int = 8                            # sub-surfaces
    Q: int = 5                                # slots per cycle
    T: float = 10.0                           # cycle duration (s)
    b: int = 2                                # phase quantization bits
    z: float = 2.0                            # radiation-pattern exponent
    bs_pos: Tuple[float, float, float] = (0.0, 0.0, 10.0)
    ris_pos: Tuple[float, float, float] = (50.0, 0.0, 1.0)
    ud_height: float = 0.0
    ud_center: Tuple[float, float, float] = (50.0, 0.0, 0.0)
    annulus: Tuple[float, float] = (2.0, 7.0)
    speed_range: Tuple[float, float] = (1.1, 1.5)
    heading_sigma: float = 0.3
    task_size: float = 1e7                    # D_k (bits)
    cycles_per_bit: float = 600.0             # C_k
    bandwidth: float = 5e6                    # B (Hz)
    sigma2: float = 1e-14                     # -110 dBm in W
    p_max: float = 0.2
    f_total_edge: float = 1e10
    f_max_loc: float = 6e8
    c_loc: float = 1e-27
    rho0: float = 1e-3
    alpha1: float = 2.0
    alpha2: float = 2.0
    K1: float = 10.0
    K2: float = 10.0
    W: float = 10.0
    D_m: Optional[float] = None               # defaults to 2(z + 1)
    carrier_freq: float = 2.4e9
    direct_pathloss_exp: float = 3.5
    blockage_db: float = 20.0
    edge_penalty_unit: float = 1.0            # P1 excess unit (Hz); 1e9 measures it in GHz
    seed: int = 2024

    @property
    def tau(self) -> float:
        return self.T / self.Q

    @property
    def bandwidth_per_ud(self) -> float:
        return self.bandwidth / self.K

    @property
    def directivity(self) -> float:
        return self.D_m if self.D_m is not None else 2.0 * (self.z + 1.0)

    @property
    def wavelength(self) -> float:
        return 299_792_458.0 / self.carrier_freq

    @property
    def group_size(self) -> int:
        return self.N // self.N_bar

    def validate(self) -> "ScenarioConfig":
        """
        Check every invariant of the configuration.

        Returns:
            self, so calls can be chained

        Raises:
            ConfigurationError: naming the first violated field
        """
        for name in ("K", "N", "N_bar", "Q", "b"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ConfigurationError(name, f"must be an integer, got {value!r}")
        if self.K < 1:
            raise ConfigurationError("K", "need at least one UD")
        if self.N < 1 or self.N_bar < 1:
            raise ConfigurationError("N_bar", "element and sub-surface counts must be positive")
        if self.N % self.N_bar != 0:
            raise ConfigurationError("N_bar", f"N={self.N} is not divisible by N_bar={self.N_bar}")
        if self.Q < 2:
            raise ConfigurationError("Q", "need at least two slots per cycle")
        if self.b < 1:
            raise ConfigurationError("b", "phase quantization needs at least one bit")
        positive = ("T", "task_size", "cycles_per_bit", "bandwidth", "sigma2", "p_max",
                    "f_total_edge", "f_max_loc", "c_loc", "rho0", "carrier_freq",
                    "W", "edge_penalty_unit", "z")
        for name in positive:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigurationError(name, f"must be a positive finite number, got {value!r}")
        for name in ("alpha1", "alpha2", "direct_pathloss_exp", "heading_sigma", "blockage_db"):
            if getattr(self, name) < 0:
                raise ConfigurationError(name, "must be non-negative")
        for name in ("K1", "K2"):
            if getattr(self, name) < 0:
                raise ConfigurationError(name, "Rician factor must be non-negative")
        if self.D_m is not None and self.D_m <= 0:
            raise ConfigurationError("D_m", "directivity must be positive")
        lo, hi = self.speed_range
        if lo < 0 or hi < lo:
            raise ConfigurationError("speed_range", f"invalid range {self.speed_range}")
        r_in, r_out = self.annulus
        if r_in < 0 or r_out < r_in:
            raise ConfigurationError("annulus", f"invalid radii {self.annulus}")
        for name in ("bs_pos", "ris_pos", "ud_center"):
            if len(getattr(self, name)) != 3:
                raise ConfigurationError(name, "must be a 3-D position")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        """
        Build a validated config from flat JSON keys.

        Args:
            data: Mapping of field name to value; lists become tuples

        Raises:
            ConfigurationError: on unknown keys or invalid values
        """
        known = set(cls.field_names())
        kwargs: Dict[str, Any] = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigurationError(key, "unknown scenario key")
            kwargs[key] = tuple(value) if isinstance(value, list) else value
        return cls(**kwargs).validate()

    def with_overrides(self, **overrides: Any) -> "ScenarioConfig":
        return replace(self, **overrides).validate()


@dataclass
class UdState:
    """Snapshot of one UD: position, mobility heading/speed and offload budget used."""

    position: np.ndarray
    heading: float
    speed: float
    alpha_cu: float


@dataclass
class Orientation:
    """Current STAR-RIS rotation plus the angles seen at the initial orientation."""

    delta: float
    theta0_bs: float
    theta0_ud: np.ndarray

    @property
    def bounds(self) -> Tuple[float, float]:
        return self.theta0_bs - math.pi, self.theta0_bs


@dataclass
class AngleSet:
    """Azimuths theta and elevations phi for all UDs and the BS."""

    theta: np.ndarray
    phi: np.ndarray
    theta_bs: float
    phi_bs: float


@dataclass
class World:
    """
    Full scenario state for one cycle.

    UD kinematics are stored column-wise (one row per UD); `uds` gives the
    per-UD view. `q` is the 1-based slot index.
    """

    config: ScenarioConfig
    positions: np.ndarray
    headings: np.ndarray
    speeds: np.ndarray
    alpha_cu: np.ndarray
    orientation: Orientation
    rng: np.random.Generator
    q: int = 1
    reference_azimuth: float = 0.0

    @property
    def uds(self) -> List[UdState]:
        return [
            UdState(self.positions[k].copy(), float(self.headings[k]),
                    float(self.speeds[k]), float(self.alpha_cu[k]))
            for k in range(self.config.K)
        ]

    @property
    def bs_pos(self) -> np.ndarray:
        return np.asarray(self.config.bs_pos, dtype=float)

    @property
    def ris_pos(self) -> np.ndarray:
        return np.asarray(self.config.ris_pos, dtype=float)

    def copy(self) -> "World":
        return replace(
            self,
            positions=self.positions.copy(),
            headings=self.headings.copy(),
            speeds=self.speeds.copy(),
            alpha_cu=self.alpha_cu.copy(),
            orientation=replace(self.orientation, theta0_ud=self.orientation.theta0_ud.copy()),
            rng=copy.deepcopy(self.rng),
        )


def wrap_angle(angle):
    """Canonicalize to [0, 2pi)."""
    wrapped = np.mod(angle, TWO_PI)
    # np.mod can return exactly 2pi for tiny negative inputs
    wrapped = np.where(wrapped >= TWO_PI, 0.0, wrapped)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


def _azimuths(positions: np.ndarray, ris_pos: np.ndarray) -> np.ndarray:
    delta = positions[..., :2] - ris_pos[:2]
    return np.arctan2(delta[..., 1], delta[..., 0])


def init_world(config: ScenarioConfig, seed: Optional[int] = None) -> World:
    """
    Place K UDs uniformly (by area) in the annulus around the UD center.

    Args:
        config: Scenario parameters, validated here
        seed: Seed for placement and mobility; defaults to config.seed

    Returns:
        World at slot q = 1 with delta = 0 and no offloaded work
    """
    config.validate()
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[0])

    r_in, r_out = config.annulus
    radii = np.sqrt(rng.uniform(r_in ** 2, r_out ** 2, size=config.K))
    bearings = rng.uniform(0.0, TWO_PI, size=config.K)
    center = np.asarray(config.ud_center, dtype=float)
    positions = np.column_stack([
        center[0] + radii * np.cos(bearings),
        center[1] + radii * np.sin(bearings),
        np.full(config.K, config.ud_height),
    ])
    headings = rng.uniform(0.0, TWO_PI, size=config.K)
    speeds = rng.uniform(*config.speed_range, size=config.K)

    ris = np.asarray(config.ris_pos, dtype=float)
    bs = np.asarray(config.bs_pos, dtype=float)
    bs_azimuth = float(_azimuths(bs, ris))
    # reference half-plane sits a quarter turn before the BS direction
    reference = bs_azimuth - math.pi / 2.0
    orientation = Orientation(
        delta=0.0,
        theta0_bs=wrap_angle(bs_azimuth - reference),
        theta0_ud=wrap_angle(_azimuths(positions, ris) - reference),
    )
    return World(
        config=config,
        positions=positions,
        headings=headings,
        speeds=speeds,
        alpha_cu=np.zeros(config.K),
        orientation=orientation,
        rng=rng,
        q=1,
        reference_azimuth=reference,
    )


def step_mobility(world: World) -> World:
    """
    Advance every UD one slot along its heading, then resample.

    Heading takes a Gaussian(0, heading_sigma) increment and speed is redrawn
    uniformly from speed_range. Height never changes. The initial-orientation
    angles are refreshed for the new positions.
    """
    cfg = world.config
    nxt = world.copy()
    tau = cfg.tau
    nxt.positions[:, 0] += nxt.speeds * np.cos(nxt.headings) * tau
    nxt.positions[:, 1] += nxt.speeds * np.sin(nxt.headings) * tau
    nxt.headings = wrap_angle(nxt.headings + nxt.rng.normal(0.0, cfg.heading_sigma, size=cfg.K))
    nxt.speeds = nxt.rng.uniform(*cfg.speed_range, size=cfg.K)
    nxt.orientation.theta0_ud = wrap_angle(
        _azimuths(nxt.positions, nxt.ris_pos) - nxt.reference_azimuth
    )
    nxt.q = world.q + 1
    return nxt


def angles(world: World) -> AngleSet:
    """
    Azimuths under the current rotation and elevations towards the STAR-RIS.

    Raises:
        GeometryError: when a UD or the BS coincides with the STAR-RIS
    """
    ris = world.ris_pos
    ud_dist = np.linalg.norm(world.positions - ris, axis=1)
    bs_dist = float(np.linalg.norm(world.bs_pos - ris))
    if np.any(ud_dist == 0.0):
        bad = int(np.flatnonzero(ud_dist == 0.0)[0])
        raise GeometryError(f"UD {bad} is co-located with the STAR-RIS")
    if bs_dist == 0.0:
        raise GeometryError("BS is co-located with the STAR-RIS")

    orient = world.orientation
    theta = wrap_angle(orient.theta0_ud - orient.delta + TWO_PI)
    theta_bs = wrap_angle(orient.theta0_bs - orient.delta + TWO_PI)
    phi = np.arcsin(np.clip(np.abs(ris[2] - world.positions[:, 2]) / ud_dist, 0.0, 1.0))
    phi_bs = math.asin(min(abs(world.bs_pos[2] - ris[2]) / bs_dist, 1.0))
    return AngleSet(theta=np.atleast_1d(theta), phi=phi, theta_bs=theta_bs, phi_bs=phi_bs)


def zone_indicator(theta_k):
    """1 if the azimuth lies in the closed RA interval [0, pi], else 0 (TA)."""
    theta_k = np.asarray(theta_k, dtype=float)
    zone = ((theta_k >= 0.0) & (theta_k <= math.pi)).astype(int)
    return int(zone) if zone.ndim == 0 else zone


def clamp_rotation(delta_raw: float, orientation: Orientation) -> float:
    """Clamp a requested rotation so the BS stays in the RA."""
    lo, hi = orientation.bounds
    return float(min(max(delta_raw, lo), hi))


def fixed_orientation_delta(orientation: Orientation) -> float:
    """Rotation that points the reflection-side normal straight at the BS."""
    return clamp_rotation(orientation.theta0_bs - math.pi / 2.0, orientation)


def rotate(world: World, delta_raw: float) -> World:
    """Return a copy of the world rotated to the clamped angle."""
    nxt = world.copy()
    nxt.orientation.delta = clamp_rotation(delta_raw, world.orientation)
    return nxt
