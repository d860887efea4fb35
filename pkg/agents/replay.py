"""
Proportional prioritized experience replay on a flat-array sum tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.errors import UsageError

PRIORITY_FLOOR = 1e-6


class SumTree:
    """
    Binary sum tree stored in one array of 2 * capacity - 1 nodes.

    Leaves occupy indices capacity - 1 .. 2 * capacity - 2 and hold the
    (already exponentiated) priorities; every internal node holds the sum of
    its two children.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise UsageError("sum tree capacity must be positive")
        self.capacity = int(capacity)
        self.tree = np.zeros(2 * self.capacity - 1)

    @property
    def total(self) -> float:
        return float(self.tree[0])

    def leaves(self) -> np.ndarray:
        return self.tree[self.capacity - 1:]

    def update(self, data_idx, values) -> None:
        """Set leaf priorities and refresh every ancestor."""
        data_idx = np.atleast_1d(np.asarray(data_idx, dtype=np.int64))
        values = np.broadcast_to(np.asarray(values, dtype=np.float64), data_idx.shape)
        nodes = data_idx + self.capacity - 1
        # duplicates resolve to the last value, like sequential assignment
        self.tree[nodes] = values
        nodes = np.unique(nodes)
        while nodes.size:
            nodes = nodes[nodes > 0]
            if not nodes.size:
                break
            nodes = np.unique((nodes - 1) // 2)
            self.tree[nodes] = self.tree[2 * nodes + 1] + self.tree[2 * nodes + 2]

    def find(self, values) -> np.ndarray:
        """Data indices whose cumulative-priority interval contains each value."""
        values = np.array(values, dtype=np.float64, ndmin=1)
        idx = np.zeros(values.shape, dtype=np.int64)
        size = len(self.tree)
        active = 2 * idx + 1 < size
        while active.any():
            left = 2 * idx[active] + 1
            v = values[active]
            left_sum = self.tree[left]
            go_left = (v <= left_sum) | (self.tree[left + 1] <= 0.0)
            values[active] = np.where(go_left, v, v - left_sum)
            idx[active] = np.where(go_left, left, left + 1)
            active = 2 * idx + 1 < size
        return idx - (self.capacity - 1)


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool
    priority: float = 1.0


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray
    weights: np.ndarray
    indices: np.ndarray


class PrioritizedReplayBuffer:
    """
    Ring buffer of transitions sampled proportionally to priority^alpha.

    Storage grows geometrically up to capacity so that a 1e6-entry buffer does
    not allocate everything up front.

    Args:
        capacity: Maximum number of stored transitions
        obs_dim: Observation feature width
        act_dim: Action width
        alpha: Priority exponent
        rng: Generator for stratified sampling
    """

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, alpha: float = 0.6,
                 rng: Optional[np.random.Generator] = None):
        self.capacity = int(capacity)
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.alpha = alpha
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.tree = SumTree(self.capacity)
        self.max_priority = 1.0
        self.size = 0
        self.pointer = 0
        self._allocated = 0
        self._obs = np.empty((0, obs_dim))
        self._actions = np.empty((0, act_dim))
        self._rewards = np.empty(0)
        self._next_obs = np.empty((0, obs_dim))
        self._dones = np.empty(0)

    def __len__(self) -> int:
        return self.size

    def _grow(self) -> None:
        new = min(self.capacity, max(1024, 2 * self._allocated))
        extra = new - self._allocated

        def pad(arr):
            return np.concatenate([arr, np.zeros((extra,) + arr.shape[1:])])

        self._obs, self._actions = pad(self._obs), pad(self._actions)
        self._rewards, self._next_obs, self._dones = pad(self._rewards), pad(self._next_obs), pad(self._dones)
        self._allocated = new

    def add(self, obs, action, reward: float, next_obs, done: bool) -> int:
        """Store a transition at the current maximum priority; returns its slot."""
        if self.pointer >= self._allocated:
            self._grow()
        i = self.pointer
        self._obs[i] = obs
        self._actions[i] = action
        self._rewards[i] = reward
        self._next_obs[i] = next_obs
        self._dones[i] = float(done)
        self.tree.update(i, self.max_priority ** self.alpha)
        self.pointer = (self.pointer + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return i

    def add_transition(self, t: Transition) -> int:
        return self.add(t.obs, t.action, t.reward, t.next_obs, t.done)

    def get(self, i: int) -> Transition:
        return Transition(self._obs[i].copy(), self._actions[i].copy(), float(self._rewards[i]),
                          self._next_obs[i].copy(), bool(self._dones[i]),
                          float(self.tree.leaves()[i]))

    def probabilities(self) -> np.ndarray:
        leaves = self.tree.leaves()[:self.size]
        return leaves / self.tree.total

    def sample(self, batch_size: int, beta: float = 0.4) -> Batch:
        """
        Stratified proportional sample with max-normalized importance weights.

        Raises:
            UsageError: if the buffer is empty
        """
        if self.size == 0:
            raise UsageError("cannot sample from an empty replay buffer")
        total = self.tree.total
        segment = total / batch_size
        targets = (np.arange(batch_size) + self.rng.uniform(size=batch_size)) * segment
        targets = np.minimum(targets, total * (1.0 - 1e-12))
        idx = np.minimum(self.tree.find(targets), self.size - 1)

        probs = self.tree.leaves()[idx] / total
        weights = (self.size * probs) ** (-beta)
        weights /= weights.max()
        return Batch(
            obs=self._obs[idx], actions=self._actions[idx], rewards=self._rewards[idx],
            next_obs=self._next_obs[idx], dones=self._dones[idx], weights=weights, indices=idx,
        )

    def update_priorities(self, indices, td_errors) -> None:
        """priority = |td| + floor, stored as priority^alpha."""
        priorities = np.abs(np.asarray(td_errors, dtype=np.float64)) + PRIORITY_FLOOR
        self.max_priority = max(self.max_priority, float(priorities.max()))
        self.tree.update(indices, priorities ** self.alpha)
