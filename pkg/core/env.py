"""
MDP wrapper around the rotatable STAR-RIS MEC system.

One episode is one task cycle: the agent decides in slots 1..Q-1 (no offloading
happens in slot Q). Each action carries the rotation, the STAR-RIS
configuration and the offload fractions; transmit power and CPU frequencies are
completed in closed form by core.compute.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from core import channel as ch
from core import compute
from core.errors import UsageError
from core.protocol import Protocol, StarConfig, build_matrices, ts_serving_indicator
from core.scenario import (
    Orientation,
    ScenarioConfig,
    UdState,
    World,
    angles,
    fixed_orientation_delta,
    init_world,
    rotate,
    step_mobility,
    zone_indicator,
)
from utils.console import get_logger

logger = get_logger(__name__)

SURFACES = ("star", "reflect", "transmit")


@dataclass
class Observation:
    """s_q = {theta[q], phi[q], alpha_cu[q]} in radians and fractions."""

    theta: np.ndarray
    phi: np.ndarray
    alpha_cu: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.theta, self.phi, self.alpha_cu])

    def features(self) -> np.ndarray:
        """Agent input: (sin, cos) of theta, phi scaled to [0, 1], alpha_cu."""
        return np.concatenate([
            np.sin(self.theta), np.cos(self.theta), self.phi / (math.pi / 2.0), self.alpha_cu,
        ])


@dataclass
class ActionVector:
    raw: np.ndarray

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=float)


@dataclass
class RewardBreakdown:
    offload_energy: float
    local_energy: float = 0.0
    P1: float = 0.0
    P2: float = 0.0
    reward: float = 0.0
    terminal: bool = False


@dataclass
class DecodedAction:
    delta: float
    star: StarConfig
    alphas: np.ndarray


@dataclass
class StepRecord:
    """One row of the episode trace."""

    q: int
    delta: float
    alphas: np.ndarray
    powers: np.ndarray
    e_off: np.ndarray
    reward: float
    uds: List[UdState] = field(default_factory=list)


def action_dim(protocol: Protocol, N_bar: int, K: int) -> int:
    """3 N_bar + K + 1 for ES/MS, N_bar + K + 2 for TS."""
    protocol = Protocol(protocol)
    if protocol is Protocol.TS:
        return N_bar + K + 2
    return 3 * N_bar + K + 1


def obs_dim(K: int) -> int:
    """Width of Observation.features()."""
    return 4 * K


def _unit(a):
    return (np.clip(a, -1.0, 1.0) + 1.0) / 2.0


def _phase_bins(a: np.ndarray, levels: int) -> np.ndarray:
    return np.minimum(np.floor(_unit(a) * levels).astype(int), levels - 1)


def decode_action(a: ActionVector, protocol: Protocol, phase_set: ch.PhaseSet,
                  orientation: Orientation, alpha_cu: np.ndarray) -> DecodedAction:
    """
    Map a raw action in [-1, 1]^A onto rotation, STAR-RIS config and fractions.

    Layout is [delta, phi_r, phi_t, beta_r, alpha] for ES/MS and
    [delta, phi, lambda_r, alpha] for TS. Phases are binned into 2^b equal
    segments; MS amplitudes and the TS mode are thresholded at 0; fractions
    are clipped to the remaining budget 1 - alpha_cu.

    Raises:
        UsageError: if the vector length does not match the protocol
    """
    protocol = Protocol(protocol)
    raw = np.clip(np.asarray(a.raw if isinstance(a, ActionVector) else a, dtype=float), -1.0, 1.0)
    K = len(alpha_cu)
    levels = len(phase_set)
    if protocol is Protocol.TS:
        n_sub = len(raw) - K - 2
    else:
        n_sub = (len(raw) - K - 1) // 3
    if n_sub < 1 or len(raw) != action_dim(protocol, n_sub, K):
        raise UsageError(f"action of length {len(raw)} does not fit {protocol.value} with K={K}")

    lo, hi = orientation.bounds
    delta = lo + float(_unit(raw[0])) * (hi - lo)

    if protocol is Protocol.TS:
        phase_idx = _phase_bins(raw[1:1 + n_sub], levels)
        lambda_r = int(raw[1 + n_sub] > 0.0)
        star = StarConfig(kind=protocol, phase_idx_r=phase_idx, lambda_r=lambda_r)
        alpha_raw = raw[2 + n_sub:]
    else:
        phase_r = _phase_bins(raw[1:1 + n_sub], levels)
        phase_t = _phase_bins(raw[1 + n_sub:1 + 2 * n_sub], levels)
        amp = raw[1 + 2 * n_sub:1 + 3 * n_sub]
        beta_r = (amp > 0.0).astype(float) if protocol is Protocol.MS else _unit(amp)
        star = StarConfig(kind=protocol, phase_idx_r=phase_r, phase_idx_t=phase_t, amplitudes_r=beta_r)
        alpha_raw = raw[1 + 3 * n_sub:]

    budget = np.maximum(1.0 - np.asarray(alpha_cu, dtype=float), 0.0)
    alphas = np.minimum(_unit(alpha_raw), budget)
    return DecodedAction(delta=delta, star=star, alphas=alphas)


class StarMecEnv:
    """
    Rotatable STAR-RIS MEC environment with a reset/step interface.

    Args:
        config: Scenario parameters
        protocol: ES, MS or TS
        seed: Seed of the episode-seed stream used when reset() gets no seed
        fixed_orientation: Freeze delta at the BS-facing rotation
        surface: "star", or "reflect"/"transmit" for a one-sided surface
            (ES machinery with the other side's amplitude forced to 0)
        force_local: Force every offload fraction to 0
    """

    def __init__(self, config: ScenarioConfig, protocol: Protocol = Protocol.ES,
                 seed: Optional[int] = None, fixed_orientation: bool = False,
                 surface: str = "star", force_local: bool = False):
        self.config = config.validate()
        self.protocol = Protocol(protocol)
        if surface not in SURFACES:
            raise UsageError(f"unknown surface '{surface}', expected one of {SURFACES}")
        if surface != "star" and self.protocol is not Protocol.ES:
            raise UsageError("one-sided surfaces reuse the ES protocol")
        self.fixed_orientation = fixed_orientation
        self.surface = surface
        self.force_local = force_local
        self.phase_set = ch.phase_set(config.b)
        self.action_dim = action_dim(self.protocol, config.N_bar, config.K)
        self.obs_dim = obs_dim(config.K)
        self._seed_rng = np.random.default_rng(config.seed if seed is None else seed)

        self.world: Optional[World] = None
        self.done = True
        self.episode_seed: Optional[int] = None
        self.slot_results: List[List[compute.AllocationResult]] = []
        self.cycle_results: List[compute.CycleAllocation] = []
        self.trace: List[StepRecord] = []
        self.channel_rows: List[Tuple[int, int, complex, float]] = []
        self.breakdowns: List[RewardBreakdown] = []

    @property
    def decision_steps(self) -> int:
        return self.config.Q - 1

    def spawn(self, seed: int) -> "StarMecEnv":
        """Fresh environment with the same scenario and options but its own seed stream."""
        return StarMecEnv(self.config, self.protocol, seed=seed, fixed_orientation=self.fixed_orientation,
                          surface=self.surface, force_local=self.force_local)

    def reset(self, seed: Optional[int] = None) -> Observation:
        """Start a fresh cycle at q = 1 with no offloaded work."""
        if seed is None:
            seed = int(self._seed_rng.integers(0, 2 ** 31 - 1))
        self.episode_seed = seed
        self.world = init_world(self.config, seed)
        self._channel_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[1])
        self.done = False
        self.slot_results = []
        self.cycle_results = []
        self.trace = []
        self.channel_rows = []
        self.breakdowns = []
        self._any_clipped = False
        return self.observe()

    def observe(self) -> Observation:
        if self.world is None:
            raise UsageError("reset() must be called first")
        ang = angles(self.world)
        return Observation(theta=ang.theta.copy(), phi=ang.phi.copy(), alpha_cu=self.world.alpha_cu.copy())

    def decode(self, a) -> DecodedAction:
        decoded = decode_action(a if isinstance(a, ActionVector) else ActionVector(a), self.protocol,
                                self.phase_set, self.world.orientation, self.world.alpha_cu)
        if self.fixed_orientation:
            decoded.delta = fixed_orientation_delta(self.world.orientation)
        if self.surface == "reflect":
            decoded.star.amplitudes_r = np.ones(self.config.N_bar)
            decoded.star.amplitudes_t = np.zeros(self.config.N_bar)
        elif self.surface == "transmit":
            decoded.star.amplitudes_r = np.zeros(self.config.N_bar)
            decoded.star.amplitudes_t = np.ones(self.config.N_bar)
        if self.force_local:
            decoded.alphas = np.zeros(self.config.K)
        return decoded

    def step(self, a) -> Tuple[Observation, float, bool, RewardBreakdown]:
        """
        Apply one slot's decision and advance the world.

        Returns:
            (next observation, reward, done, reward breakdown)

        Raises:
            UsageError: if the episode is finished or was never reset
        """
        if self.world is None or self.done:
            raise UsageError("step() on a finished episode; call reset() first")
        cfg = self.config
        decoded = self.decode(a)

        self.world = rotate(self.world, decoded.delta)
        ang = angles(self.world)
        zones = zone_indicator(ang.theta)
        real = ch.draw_channels(self.world, self._channel_rng)
        coeffs = build_matrices(decoded.star, self.phase_set, cfg.N)
        gains = ch.star_gains(ang, cfg.z, cfg.directivity)
        if self.protocol is Protocol.TS:
            gains = gains * ts_serving_indicator(decoded.star.lambda_r, zones)
        h = ch.effective_channels(real, coeffs, gains, zones)

        results = [compute.allocate_slot(float(decoded.alphas[k]), h[k], cfg) for k in range(cfg.K)]
        self.slot_results.append(results)
        self.channel_rows.extend((self.world.q, k, h[k], float(gains[k])) for k in range(cfg.K))
        self._any_clipped = self._any_clipped or not all(r.offload_feasible for r in results)

        offloaded = np.array([r.alpha for r in results])
        e_off = np.array([r.e_off for r in results])
        breakdown = RewardBreakdown(offload_energy=float(e_off.sum()))
        self.world.alpha_cu = np.minimum(self.world.alpha_cu + offloaded, 1.0)

        if self.world.q == self.decision_steps:
            self._finish_cycle(breakdown)
        breakdown.reward = -(breakdown.offload_energy + breakdown.local_energy + breakdown.P1 + breakdown.P2)
        self.breakdowns.append(breakdown)
        self.trace.append(StepRecord(
            q=self.world.q, delta=self.world.orientation.delta, alphas=offloaded,
            powers=np.array([r.p for r in results]), e_off=e_off, reward=breakdown.reward,
            uds=self.world.uds,
        ))

        self.world = step_mobility(self.world)
        return self.observe(), breakdown.reward, self.done, breakdown

    def _finish_cycle(self, breakdown: RewardBreakdown) -> None:
        cfg = self.config
        self.cycle_results = [compute.allocate_cycle(float(eta), cfg) for eta in self.world.alpha_cu]
        breakdown.terminal = True
        breakdown.local_energy = float(sum(c.e_loc for c in self.cycle_results))
        excess = sum(c.f_edge for c in self.cycle_results) - cfg.f_total_edge
        breakdown.P1 = max(0.0, excess / cfg.edge_penalty_unit) * cfg.W
        unfinished = self._any_clipped or not all(c.local_feasible for c in self.cycle_results)
        breakdown.P2 = cfg.W if unfinished else 0.0
        if breakdown.P1 or breakdown.P2:
            logger.debug("cycle penalties P1=%.4g P2=%.4g", breakdown.P1, breakdown.P2)
        self.done = True

    def episode_energy(self) -> np.ndarray:
        """Per-UD energy of the finished episode."""
        if not self.done or not self.cycle_results:
            raise UsageError("episode_energy() needs a finished episode")
        return compute.per_ud_energy(self.slot_results, self.cycle_results)

    def write_trace(self, path: Path) -> None:
        """Export (q, delta, per-UD alpha, p, E_off, reward, per-UD x, y, heading) rows as CSV."""
        K = self.config.K
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = (["q", "delta"] + [f"alpha_{k}" for k in range(K)] + [f"p_{k}" for k in range(K)]
                  + [f"e_off_{k}" for k in range(K)] + ["reward"]
                  + [f"{name}_{k}" for k in range(K) for name in ("x", "y", "heading")])
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for rec in self.trace:
                writer.writerow(
                    [rec.q, repr(float(rec.delta))]
                    + [repr(float(x)) for x in rec.alphas]
                    + [repr(float(x)) for x in rec.powers]
                    + [repr(float(x)) for x in rec.e_off]
                    + [repr(float(rec.reward))]
                    + [repr(float(v)) for ud in rec.uds for v in (ud.position[0], ud.position[1], ud.heading)]
                )
