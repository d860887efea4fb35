"""
Episode rollouts and the simple reference policies.

A policy is any callable mapping an Observation to a raw action vector in
[-1, 1]^A.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from core.channel import write_channel_trace
from core.env import Observation, RewardBreakdown, StarMecEnv, StepRecord

Policy = Callable[[Observation], np.ndarray]


@dataclass
class EpisodeResult:
    seed: int
    per_ud_energy: np.ndarray
    P1: float
    P2: float
    rewards: List[float] = field(default_factory=list)
    breakdowns: List[RewardBreakdown] = field(default_factory=list)
    trace: List[StepRecord] = field(default_factory=list)

    @property
    def total_energy(self) -> float:
        return float(self.per_ud_energy.sum())

    @property
    def episode_return(self) -> float:
        return float(sum(self.rewards))


def random_policy(rng: np.random.Generator, action_dim: int) -> Policy:
    """Uniform actions over [-1, 1]^A."""
    def act(obs: Observation) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=action_dim)
    return act


def zero_policy(action_dim: int) -> Policy:
    """Always the centre of the action box."""
    def act(obs: Observation) -> np.ndarray:
        return np.zeros(action_dim)
    return act


def run_episode(env: StarMecEnv, policy: Policy, seed: Optional[int] = None,
                trace_path=None, channel_trace_path=None) -> EpisodeResult:
    """
    Roll one full cycle with the given policy.

    Args:
        env: Environment; reset here
        policy: Observation -> raw action
        seed: Episode seed; None draws from the env's own seed stream
        trace_path: Optional CSV path for the per-step trace
        channel_trace_path: Optional CSV path for the effective channel trace

    Returns:
        EpisodeResult with energies, penalties, rewards and the trace
    """
    obs = env.reset(seed)
    rewards = []
    done = False
    while not done:
        obs, reward, done, _ = env.step(policy(obs))
        rewards.append(reward)

    terminal = env.breakdowns[-1]
    if trace_path is not None:
        env.write_trace(trace_path)
    if channel_trace_path is not None:
        write_channel_trace(channel_trace_path, env.channel_rows)
    return EpisodeResult(
        seed=env.episode_seed,
        per_ud_energy=env.episode_energy(),
        P1=terminal.P1,
        P2=terminal.P2,
        rewards=rewards,
        breakdowns=list(env.breakdowns),
        trace=list(env.trace),
    )


def evaluate(env: StarMecEnv, policy: Policy, seeds: Sequence[int],
             trace_path=None, channel_trace_path=None) -> List[EpisodeResult]:
    """Run one episode per seed; trace files, when requested, come from the first episode."""
    results = []
    for i, seed in enumerate(seeds):
        first = i == 0
        results.append(run_episode(env, policy, seed,
                                   trace_path=trace_path if first else None,
                                   channel_trace_path=channel_trace_path if first else None))
    return results
