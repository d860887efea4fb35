"""
Fading realizations, rotation-dependent STAR-RIS gain, effective channels and rates.

The UD->RIS and RIS->BS links are Rician with per-element LoS phases along a
half-wavelength uniform linear layout; the blocked UD->BS link is Rayleigh with
an extra blockage loss. Magnitudes use the surface-center distance (far field).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from core.errors import ChannelDimensionError, ConfigurationError
from core.scenario import AngleSet, World


@dataclass
class ChannelRealization:
    """One slot of fading draws for every UD."""

    h_ud_ris: np.ndarray      # (K, N) complex
    v_ris_bs: np.ndarray      # (N,) complex
    h_ud_bs: np.ndarray       # (K,) complex
    q: int


@dataclass(frozen=True)
class PhaseSet:
    """The 2^b uniformly spaced discrete phases of a b-bit phase shifter."""

    b: int
    values: np.ndarray

    @property
    def spacing(self) -> float:
        return math.pi / 2 ** (self.b - 1)

    def __len__(self) -> int:
        return len(self.values)


def phase_set(b: int) -> PhaseSet:
    """
    Build {0, 2^(1-b) pi, ..., (2 - 2^(1-b)) pi}.

    Raises:
        ConfigurationError: if b < 1
    """
    if b < 1:
        raise ConfigurationError("b", "phase quantization needs at least one bit")
    values = np.arange(2 ** b, dtype=float) * (math.pi / 2 ** (b - 1))
    values.setflags(write=False)
    return PhaseSet(b=b, values=values)


def expand_groups(sub_values: Sequence, N: int) -> np.ndarray:
    """
    Repeat each sub-surface value over its N / N_bar contiguous elements.

    Raises:
        ConfigurationError: if N is not a multiple of the number of sub-surfaces
    """
    sub = np.asarray(sub_values)
    if sub.ndim != 1 or len(sub) == 0 or N % len(sub) != 0:
        raise ConfigurationError("N_bar", f"N={N} is not divisible by {len(sub)} sub-surfaces")
    return np.repeat(sub, N // len(sub))


def _rician_weights(k_factor: float):
    if math.isinf(k_factor):
        return 1.0, 0.0
    return math.sqrt(k_factor / (1.0 + k_factor)), math.sqrt(1.0 / (1.0 + k_factor))


def _complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)


def rician_link(distance: float, element_distances: np.ndarray, rho0: float, exponent: float,
                k_factor: float, wavelength: float, rng: np.random.Generator) -> np.ndarray:
    """
    Rician coefficients for one node towards every element.

    Args:
        distance: Surface-center distance used for path loss (m)
        element_distances: Per-element distances used for LoS phases (m)
        rho0: Path gain at 1 m (linear)
        exponent: Path-loss exponent
        k_factor: Rician factor (linear); math.inf gives pure LoS
        wavelength: Carrier wavelength (m)
        rng: Random stream for the NLoS part

    Returns:
        Complex vector with one entry per element
    """
    los_w, nlos_w = _rician_weights(k_factor)
    los = np.exp(-1j * 2.0 * math.pi * element_distances / wavelength)
    nlos = _complex_normal(rng, element_distances.shape)
    return math.sqrt(rho0 / distance ** exponent) * (los_w * los + nlos_w * nlos)


def element_positions(world: World) -> np.ndarray:
    """Element centers on a lambda/2 line along the rotated surface half-plane."""
    cfg = world.config
    axis = world.reference_azimuth + world.orientation.delta
    direction = np.array([math.cos(axis), math.sin(axis), 0.0])
    offsets = (np.arange(cfg.N) - (cfg.N - 1) / 2.0) * cfg.wavelength / 2.0
    return world.ris_pos + offsets[:, None] * direction


def draw_channels(world: World, rng: np.random.Generator) -> ChannelRealization:
    """
    Draw UD->RIS, RIS->BS and blocked UD->BS coefficients for the current slot.

    Args:
        world: Current positions and rotation
        rng: Fading stream; the only source of randomness here
    """
    cfg = world.config
    elements = element_positions(world)
    ris = world.ris_pos
    bs = world.bs_pos

    h_ud_ris = np.empty((cfg.K, cfg.N), dtype=complex)
    for k in range(cfg.K):
        d_center = float(np.linalg.norm(world.positions[k] - ris))
        d_elem = np.linalg.norm(elements - world.positions[k], axis=1)
        h_ud_ris[k] = rician_link(d_center, d_elem, cfg.rho0, cfg.alpha1, cfg.K1,
                                  cfg.wavelength, rng)

    d_bs = float(np.linalg.norm(bs - ris))
    d_bs_elem = np.linalg.norm(elements - bs, axis=1)
    v_ris_bs = rician_link(d_bs, d_bs_elem, cfg.rho0, cfg.alpha2, cfg.K2, cfg.wavelength, rng)

    d_direct = np.linalg.norm(world.positions - bs, axis=1)
    direct_gain = cfg.rho0 * 10.0 ** (-cfg.blockage_db / 10.0) / d_direct ** cfg.direct_pathloss_exp
    h_ud_bs = np.sqrt(direct_gain) * _complex_normal(rng, cfg.K)

    return ChannelRealization(h_ud_ris=h_ud_ris, v_ris_bs=v_ris_bs, h_ud_bs=h_ud_bs, q=world.q)


def star_gain_scalar(angles: AngleSet, k: int, z: float, D_m: float) -> float:
    """g_k = D_m^2 |sin(theta_k) cos(phi_k) sin(theta_B) cos(phi_B)|^z."""
    base = (math.sin(angles.theta[k]) * math.cos(angles.phi[k])
            * math.sin(angles.theta_bs) * math.cos(angles.phi_bs))
    return D_m ** 2 * abs(base) ** z


def star_gains(angles: AngleSet, z: float, D_m: float) -> np.ndarray:
    """Vectorized star_gain_scalar over all UDs."""
    base = (np.sin(angles.theta) * np.cos(angles.phi)
            * math.sin(angles.theta_bs) * math.cos(angles.phi_bs))
    return D_m ** 2 * np.abs(base) ** z


def effective_channel(real: ChannelRealization, coeffs, gain: float, k: int, zone: int) -> complex:
    """
    h_k = v^H (g_k Phi_m) h_{k,R} + h_{k,B}, Phi_m = Phi_r in the RA else Phi_t.

    Args:
        real: Fading draws for the slot
        coeffs: CoefficientMatrices of the active protocol
        gain: STAR-RIS gain g_k (already multiplied by i_k under TS)
        k: UD index
        zone: zone_indicator of UD k

    Raises:
        ChannelDimensionError: if the diagonals and channels differ in length
    """
    phi = coeffs.phi_r if zone else coeffs.phi_t
    h = real.h_ud_ris[k]
    if not (len(phi) == len(h) == len(real.v_ris_bs)):
        raise ChannelDimensionError(
            f"diagonal has {len(phi)} entries, channels have {len(h)} and {len(real.v_ris_bs)}"
        )
    cascade = np.sum(np.conj(real.v_ris_bs) * phi * h)
    return complex(gain * cascade + real.h_ud_bs[k])


def effective_channels(real: ChannelRealization, coeffs, gains: np.ndarray,
                       zones: np.ndarray) -> np.ndarray:
    return np.array([
        effective_channel(real, coeffs, float(gains[k]), k, int(zones[k]))
        for k in range(len(gains))
    ])


def achievable_rate(h_k: complex, p_k: float, B_k: float, sigma2: float) -> float:
    """Shannon rate B_k log2(1 + p |h|^2 / sigma^2) in bits/s."""
    return B_k * math.log2(1.0 + p_k * abs(h_k) ** 2 / sigma2)


def write_channel_trace(path: Path, rows: Iterable[Sequence]) -> None:
    """Dump (q, k, re_h, im_h, g_k) rows for debugging."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["q", "k", "re_h", "im_h", "g_k"])
        for q, k, h, g in rows:
            writer.writerow([q, k, repr(float(np.real(h))), repr(float(np.imag(h))), repr(float(g))])
