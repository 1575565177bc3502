"""Policy-gradient estimation for factorized policies with per-factor baselines.

The estimator averages, over trajectories, the discounted sum of per-factor
score blocks weighted by per-factor advantages:

    g = mean_k sum_t gamma^t sum_i z_i(s_t, a_t) (qhat_t - b_i(s_t, a_t^{-i}))

where z_i is factor i's score restricted to its own parameter block and
qhat_t is the observed return-to-go. Because each b_i never reads a^i, the
correction term has zero mean and the estimate stays unbiased for any choice
of the baselines; with exact-enumeration trajectory weights the weighted sum
reproduces the true gradient to rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trajectory import Batch


@dataclass
class GradientReport:
    """Gradient estimate plus the pieces the diagnostics need.

    ``per_trajectory`` holds the raw (un-normalized) per-trajectory
    contribution vectors; ``gradient`` is their weighted mean, computed from
    normalized advantages when ``normalize`` was requested.
    """

    gradient: np.ndarray  # (n_params,)
    per_trajectory: np.ndarray  # (n_traj, n_params), raw advantages
    advantages: np.ndarray  # (n_steps, m), the advantages used for ``gradient``


def whiten(values: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Shift/scale to zero mean, unit sd over all entries jointly."""
    values = np.asarray(values, dtype=float)
    return (values - values.mean()) / (values.std() + eps)


def pg_estimate(
    batch: Batch,
    policy,
    baseline_values: np.ndarray | None = None,
    advantages: np.ndarray | None = None,
    normalize: bool = False,
) -> GradientReport:
    """Estimate the policy gradient from a batch.

    Pass either ``baseline_values`` (n_steps, m) to form advantages
    qhat - b_i, or precomputed ``advantages`` directly (takes precedence).
    ``normalize`` whitens the advantages used for the returned gradient; the
    per-trajectory diagnostic contributions always use the raw advantages so
    variance comparisons are not distorted by the rescaling.
    """
    m = policy.m
    if advantages is None:
        if baseline_values is None:
            baseline_values = np.zeros((batch.n_steps, m))
        advantages = batch.qhat[:, None] - np.asarray(baseline_values, dtype=float)
    advantages = np.asarray(advantages, dtype=float)
    if advantages.shape != (batch.n_steps, m):
        raise ValueError(f"advantages must have shape {(batch.n_steps, m)}")

    per_traj = _per_trajectory_sums(batch, policy, advantages)
    if normalize:
        used = whiten(advantages)
        gradient = batch.weights @ _per_trajectory_sums(batch, policy, used)
    else:
        used = advantages
        gradient = batch.weights @ per_traj
    return GradientReport(gradient=gradient, per_trajectory=per_traj, advantages=used)


def _per_trajectory_sums(batch: Batch, policy, advantages: np.ndarray) -> np.ndarray:
    blocks = policy.score_blocks_batch(batch.states, batch.actions)
    if blocks is not None:
        # uniform block layout: factor i owns the contiguous slice i*b:(i+1)*b
        n = batch.n_steps
        weighted = blocks * (advantages * batch.gamma_pow[:, None])[:, :, None]
        flat = weighted.reshape(n, -1)
        return np.add.reduceat(flat, batch.offsets, axis=0)

    out = np.zeros((batch.n_trajectories, policy.n_params))
    for n in range(batch.n_steps):
        k = batch.traj_index[n]
        scale = batch.gamma_pow[n]
        for i in range(policy.m):
            if advantages[n, i] == 0.0:
                continue
            out[k] += scale * advantages[n, i] * policy.score_factor(
                batch.states[n], batch.actions[n], i
            )
    return out


def score_matrix(batch: Batch, policy) -> np.ndarray:
    """Joint score vectors for every visited step, one row per step."""
    blocks = policy.score_blocks_batch(batch.states, batch.actions)
    if blocks is not None:
        return blocks.reshape(batch.n_steps, -1)
    rows = np.zeros((batch.n_steps, policy.n_params))
    for n in range(batch.n_steps):
        rows[n] = policy.joint_score(batch.states[n], batch.actions[n])
    return rows


def gae_advantages(batch: Batch, baseline_values: np.ndarray, lam: float) -> np.ndarray:
    """Per-factor generalized advantages from one-step baseline residuals.

    delta_t^i = r_t + gamma * b_i(t+1) - b_i(t), accumulated backward with
    factor gamma*lam; episode ends bootstrap with zero. At lam = 1 the sum
    telescopes to qhat_t - b_i(t) for every factor, so the lam knob
    interpolates between the one-step residual and the full-return advantage.
    """
    baseline_values = np.asarray(baseline_values, dtype=float)
    n, m = baseline_values.shape
    if n != batch.n_steps:
        raise ValueError("baseline rows must match batch steps")
    out = np.empty((n, m))
    glam = batch.gamma * lam
    zero = np.zeros(m)
    for k in range(batch.n_trajectories):
        sl = batch.traj_slice(k)
        r = batch.rewards[sl]
        b = baseline_values[sl]
        acc = zero
        for t in range(len(r) - 1, -1, -1):
            b_next = b[t + 1] if t + 1 < len(r) else zero
            delta = r[t] + batch.gamma * b_next - b[t]
            acc = delta + glam * acc
            out[sl][t] = acc
    return out


def gradient_variance(per_trajectory: np.ndarray, weights: np.ndarray | None = None) -> float:
    """Total variance (trace of covariance) of per-trajectory contributions.

    This is the single-trajectory estimator variance; divide by the batch size
    for the variance of the batch mean. Weighted form uses the probability
    weights directly (population covariance under that measure).
    """
    per_trajectory = np.asarray(per_trajectory, dtype=float)
    if weights is None:
        if len(per_trajectory) < 2:
            return 0.0
        centered = per_trajectory - per_trajectory.mean(axis=0)
        return float(np.sum(centered**2) / (len(per_trajectory) - 1))
    weights = np.asarray(weights, dtype=float)
    mean = weights @ per_trajectory
    centered = per_trajectory - mean
    return float(weights @ np.sum(centered**2, axis=1))
