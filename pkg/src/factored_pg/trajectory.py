"""Trajectory and batch containers shared by environments, estimator, and training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def returns_to_go(rewards: np.ndarray, gamma: float) -> np.ndarray:
    """Discounted suffix sums q_t = r_t + gamma * q_{t+1}, q_T = 0.

    The backward recursion is the reference operation order; the GAE path with
    lambda = 1 and a zero baseline reduces to the identical sequence of float
    operations, which a test asserts bit-for-bit.
    """
    rewards = np.asarray(rewards, dtype=float)
    out = np.empty_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


@dataclass
class Trajectory:
    """One rollout: states visited, factored actions taken, rewards received.

    ``states[t]`` is the state at which ``actions[t]`` was taken. Discounted
    returns-to-go are cached per discount value; the cache is an optimization
    only and always reproduces ``returns_to_go`` exactly.
    """

    states: np.ndarray   # (T, state_dim)
    actions: np.ndarray  # (T, action_dim), factor values concatenated
    rewards: np.ndarray  # (T,)
    _returns: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.actions = np.atleast_2d(np.asarray(self.actions, dtype=float))
        self.rewards = np.asarray(self.rewards, dtype=float).ravel()
        if not (len(self.states) == len(self.actions) == len(self.rewards)):
            raise ValueError(
                f"inconsistent trajectory lengths: {len(self.states)} states, "
                f"{len(self.actions)} actions, {len(self.rewards)} rewards"
            )

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def total_reward(self) -> float:
        return float(np.sum(self.rewards))

    def returns(self, gamma: float) -> np.ndarray:
        key = float(gamma)
        if key not in self._returns:
            self._returns[key] = returns_to_go(self.rewards, key)
        return self._returns[key]


@dataclass
class Batch:
    """A set of trajectories flattened into step-level arrays for vector math.

    ``weights`` are per-trajectory probabilities summing to one; rollout batches
    use uniform 1/N, while exact-enumeration batches carry occurrence
    probabilities so the same estimator code computes exact expectations.
    """

    trajectories: list
    gamma: float
    weights: np.ndarray = None  # (n_traj,), defaults to uniform

    def __post_init__(self) -> None:
        if not self.trajectories:
            raise ValueError("empty batch")
        n_traj = len(self.trajectories)
        if self.weights is None:
            self.weights = np.full(n_traj, 1.0 / n_traj)
        else:
            self.weights = np.asarray(self.weights, dtype=float).ravel()
            if len(self.weights) != n_traj:
                raise ValueError("one weight per trajectory required")
        lengths = np.array([len(t) for t in self.trajectories])
        self.offsets = np.concatenate([[0], np.cumsum(lengths)])[:-1]
        self.states = np.concatenate([t.states for t in self.trajectories], axis=0)
        self.actions = np.concatenate([t.actions for t in self.trajectories], axis=0)
        self.rewards = np.concatenate([t.rewards for t in self.trajectories])
        self.qhat = np.concatenate([t.returns(self.gamma) for t in self.trajectories])
        self.t_index = np.concatenate([np.arange(n) for n in lengths])
        self.traj_index = np.repeat(np.arange(n_traj), lengths)
        self.gamma_pow = self.gamma ** self.t_index

    @property
    def n_trajectories(self) -> int:
        return len(self.trajectories)

    @property
    def n_steps(self) -> int:
        return len(self.rewards)

    def traj_slice(self, k: int) -> slice:
        start = self.offsets[k]
        stop = start + len(self.trajectories[k])
        return slice(int(start), int(stop))

    def mean_return(self) -> float:
        return float(np.mean([t.total_reward for t in self.trajectories]))

    def sd_return(self) -> float:
        totals = [t.total_reward for t in self.trajectories]
        if len(totals) < 2:
            return 0.0
        return float(np.std(totals, ddof=1))
