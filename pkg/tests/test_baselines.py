"""Baseline functions: hand-checked optima, marginalization, batch-vs-reference."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from factored_pg.baselines import (
    BaselineSpec,
    BaselineState,
    fit_q,
    mc_marginalized_baseline,
    mean_marginalized_baseline,
    optimal_action_baseline,
    spec_with,
)
from factored_pg.policies import (
    CategoricalHead,
    CategoricalPolicy,
    DagPolicy,
    IndependentGaussianPolicy,
    IndicatorFeatures,
)
from factored_pg.trajectory import Batch, Trajectory

S0 = np.array([0.0])


def _binary_policy(p0: float) -> CategoricalPolicy:
    """Single binary factor with exact marginal (p0, 1 - p0)."""
    return CategoricalPolicy(
        [np.log(np.array([[p0], [1.0 - p0]]))], IndicatorFeatures(1)
    )


def _lookup_q(table):
    return lambda state, action: table[int(round(float(action[0])))]


def test_optimal_action_baseline_hand_value_a():
    # pi = (0.3, 0.7), Q = (2, -1); ||z(v)||^2 = (1 - 2 p_v + sum p^2) with
    # one-hot state features, so weights are (0.98, 0.18):
    # b* = (0.3*0.98*2 + 0.7*0.18*(-1)) / (0.3*0.98 + 0.7*0.18) = 0.462/0.42 = 1.1
    policy = _binary_policy(0.3)
    q = _lookup_q({0: 2.0, 1: -1.0})
    got = optimal_action_baseline(q, policy, S0, np.array([1.0]), 0)
    assert_allclose(got, 1.1, atol=1e-12)


def test_optimal_action_baseline_hand_value_b():
    # pi = (0.8, 0.2), Q = (1, 3); weights (0.08, 1.28):
    # b* = (0.8*0.08*1 + 0.2*1.28*3) / (0.8*0.08 + 0.2*1.28) = 0.832/0.32 = 2.6
    policy = _binary_policy(0.8)
    q = _lookup_q({0: 1.0, 1: 3.0})
    got = optimal_action_baseline(q, policy, S0, np.array([0.0]), 0)
    assert_allclose(got, 2.6, atol=1e-12)


def test_optimal_action_baseline_uniform_reduces_to_mean():
    # uniform probs give equal score norms, so the ratio collapses to the mean
    policy = CategoricalPolicy.zeros([3], IndicatorFeatures(1))
    q = _lookup_q({0: 1.0, 1: 2.0, 2: 6.0})
    got = optimal_action_baseline(q, policy, S0, np.array([2.0]), 0)
    assert_allclose(got, 3.0, atol=1e-12)


def test_exact_marginalization_hand_values():
    policy = _binary_policy(0.3)
    q = _lookup_q({0: 2.0, 1: -1.0})
    got = mc_marginalized_baseline(q, policy, S0, np.array([0.0]), 0, exact=True)
    assert_allclose(got, 0.3 * 2.0 + 0.7 * (-1.0), atol=1e-14)
    top = mc_marginalized_baseline(
        q, policy, S0, np.array([0.0]), 0, exact=True, max_aggregation=True
    )
    assert_allclose(top, 2.0, atol=1e-14)


def test_sampled_marginalization_requires_rng_and_converges():
    policy = _binary_policy(0.3)
    q = _lookup_q({0: 2.0, 1: -1.0})
    with pytest.raises(ValueError):
        mc_marginalized_baseline(q, policy, S0, np.array([0.0]), 0)
    got = mc_marginalized_baseline(
        q, policy, S0, np.array([0.0]), 0, n_samples=60000, rng=np.random.default_rng(0)
    )
    # E = -0.1, SE = 3 sqrt(p(1-p)) / sqrt(n) * |q0 - q1|
    assert abs(got - (-0.1)) < 3 * 3.0 * np.sqrt(0.21 / 60000)


def test_mean_substitution_exact_for_linear_q():
    rng = np.random.default_rng(3)
    policy = IndependentGaussianPolicy.zeros(2, 1).with_theta(
        0.4 * rng.standard_normal(6)
    )

    def q(state, action):
        return 3.0 * action[0] + 2.0 * action[1] + 1.0

    s = np.array([0.7])
    a = np.array([0.5, -0.2])
    mu = policy.mean_action(s)
    # linear Q: plugging in the mean equals the full marginal expectation
    assert_allclose(
        mean_marginalized_baseline(q, policy, s, a, 1),
        3.0 * a[0] + 2.0 * mu[1] + 1.0,
        atol=1e-12,
    )
    draws = mc_marginalized_baseline(
        q, policy, s, a, 1, n_samples=40000, rng=np.random.default_rng(1)
    )
    sd = 2.0 * np.exp(policy.log_std[1])
    assert abs(draws - (3.0 * a[0] + 2.0 * mu[1] + 1.0)) < 3 * sd / np.sqrt(40000)


def test_mean_substitution_rejects_categorical_factor():
    policy = _binary_policy(0.5)
    with pytest.raises(ValueError):
        mean_marginalized_baseline(lambda s, a: 0.0, policy, S0, np.array([0.0]), 0)


def test_marginalized_baselines_reject_dag_policies():
    heads = [CategoricalHead(np.zeros((2, 1))), CategoricalHead(np.zeros((2, 3)))]
    dag = DagPolicy(heads, parents=((), (0,)), features=IndicatorFeatures(1))
    q = lambda s, a: 0.0
    with pytest.raises(ValueError):
        mc_marginalized_baseline(q, dag, S0, np.array([0.0, 0.0]), 0, exact=True)
    with pytest.raises(ValueError):
        optimal_action_baseline(q, dag, S0, np.array([0.0, 0.0]), 0)


def test_fit_q_quadratic_features_recover_quadratic_return():
    rng = np.random.default_rng(5)
    states = rng.standard_normal((160, 1))
    actions = rng.standard_normal((160, 3))
    c = np.array([1.0, -2.0, 0.5])
    targets = -np.sum((actions - c) ** 2, axis=1)
    spec = BaselineSpec(kind="mean_q", features="quadratic", ridge=1e-10)
    qmodel = fit_q(states, actions, targets, spec)
    test_a = rng.standard_normal((20, 3))
    pred = qmodel.predict(np.zeros((20, 1)), test_a)
    assert_allclose(pred, -np.sum((test_a - c) ** 2, axis=1), atol=1e-6)


def _categorical_batch(policy, n_traj=40, horizon=2, seed=7):
    """Synthetic batch with integer states, policy-sampled actions."""
    rng = np.random.default_rng(seed)
    trajs = []
    for _ in range(n_traj):
        states = rng.integers(2, size=(horizon, 1)).astype(float)
        actions = policy.sample_batch(states, rng)
        rewards = np.array(
            [float(a[0]) - 0.5 * float(a[1]) + 0.2 * float(s[0]) for s, a in zip(states, actions)]
        )
        trajs.append(Trajectory(states, actions, rewards))
    return Batch(trajs, gamma=1.0)


def _two_factor_policy(seed=11):
    rng = np.random.default_rng(seed)
    pol = CategoricalPolicy.zeros([2, 3], IndicatorFeatures(2))
    return pol.with_theta(0.6 * rng.standard_normal(pol.n_params))


def test_exact_mc_q_batch_matches_reference():
    policy = _two_factor_policy()
    batch = _categorical_batch(policy)
    spec = BaselineSpec(kind="mc_q", exact=True, tabular=True)
    state = BaselineState.initial(spec).refit(batch, policy)
    out = state.evaluate(batch, policy)
    table = state.fitted["table"]

    def q(s, a):
        return table[(int(round(float(s[0]))), tuple(int(round(v)) for v in a))]

    for k in range(0, batch.n_steps, 7):
        for i in range(policy.m):
            ref = mc_marginalized_baseline(
                q, policy, batch.states[k], batch.actions[k], i, exact=True
            )
            assert_allclose(out[k, i], ref, atol=1e-12)


def test_optimal_action_batch_matches_reference():
    policy = _two_factor_policy(seed=12)
    batch = _categorical_batch(policy, seed=8)
    spec = BaselineSpec(kind="optimal_action", tabular=True)
    state = BaselineState.initial(spec).refit(batch, policy)
    out = state.evaluate(batch, policy)
    table = state.fitted["table"]

    def q(s, a):
        return table[(int(round(float(s[0]))), tuple(int(round(v)) for v in a))]

    for k in range(0, batch.n_steps, 7):
        for i in range(policy.m):
            ref = optimal_action_baseline(q, policy, batch.states[k], batch.actions[k], i)
            assert_allclose(out[k, i], ref, atol=1e-12)


def test_mean_q_batch_matches_reference():
    rng = np.random.default_rng(13)
    policy = IndependentGaussianPolicy.zeros(2, 1).with_theta(0.3 * rng.standard_normal(6))
    trajs = []
    for _ in range(30):
        states = rng.standard_normal((2, 1))
        actions = policy.sample_batch(states, rng)
        rewards = actions.sum(axis=1)
        trajs.append(Trajectory(states, actions, rewards))
    batch = Batch(trajs, gamma=1.0)
    spec = BaselineSpec(kind="mean_q", features="linear")
    state = BaselineState.initial(spec).refit(batch, policy)
    out = state.evaluate(batch, policy)
    qmodel = state.fitted["q"]
    for k in range(0, batch.n_steps, 5):
        for i in range(policy.m):
            ref = mean_marginalized_baseline(
                lambda s, a: qmodel(s, a), policy, batch.states[k], batch.actions[k], i
            )
            assert_allclose(out[k, i], ref, atol=1e-12)


def test_exact_mc_q_rejects_continuous_factors():
    rng = np.random.default_rng(14)
    policy = IndependentGaussianPolicy.zeros(1, 1)
    states = rng.standard_normal((3, 1))
    actions = policy.sample_batch(states, rng)
    batch = Batch([Trajectory(states, actions, np.zeros(3))], gamma=1.0)
    spec = BaselineSpec(kind="mc_q", exact=True, features="linear")
    state = BaselineState.initial(spec).refit(batch, policy)
    with pytest.raises(ValueError):
        state.evaluate(batch, policy)


def test_enumerated_score_baseline_orthogonality():
    """E_{a^i}[z_i b_i] = 0 for every baseline kind: b_i never reads a^i."""
    policy = _two_factor_policy(seed=15)
    batch = _categorical_batch(policy, seed=16)
    kinds = [
        BaselineSpec(kind="none"),
        BaselineSpec(kind="state_value", tabular=True),
        BaselineSpec(kind="optimal_state", tabular=True),
        BaselineSpec(kind="mc_q", exact=True, tabular=True),
        BaselineSpec(kind="optimal_action", tabular=True),
        BaselineSpec(kind="dag", tabular=True),
    ]
    for spec in kinds:
        state = BaselineState.initial(spec).refit(batch, policy)
        for k in range(0, batch.n_steps, 11):
            s = batch.states[k]
            for i in range(policy.m):
                probs = policy.factor_probs(s, i)
                moment = np.zeros(policy.n_params)
                for v, pv in enumerate(probs):
                    a = batch.actions[k].copy()
                    a[i] = v
                    sub = Batch(
                        [Trajectory(s[None, :], a[None, :], np.zeros(1))], gamma=1.0
                    )
                    b = state.evaluate(sub, policy)[0, i]
                    moment += pv * b * policy.score_factor(s, a, i)
                assert_allclose(moment, 0.0, atol=1e-12, err_msg=f"{spec.kind} factor {i}")


def test_initial_state_is_zero_and_none_stays_zero():
    policy = _two_factor_policy(seed=17)
    batch = _categorical_batch(policy, seed=18)
    spec = BaselineSpec(kind="optimal_action", tabular=True)
    assert_allclose(BaselineState.initial(spec).evaluate(batch, policy), 0.0)
    none_state = BaselineState.initial(BaselineSpec(kind="none")).refit(batch, policy)
    assert_allclose(none_state.evaluate(batch, policy), 0.0)


def test_state_value_constant_across_factors():
    policy = _two_factor_policy(seed=19)
    batch = _categorical_batch(policy, seed=20)
    state = BaselineState.initial(BaselineSpec(kind="state_value", tabular=True)).refit(
        batch, policy
    )
    out = state.evaluate(batch, policy)
    assert out.shape == (batch.n_steps, policy.m)
    assert_allclose(out[:, 0], out[:, 1], atol=1e-14)
    # tabular state values are per-state batch means of the return-to-go
    for s_key in (0, 1):
        mask = np.rint(batch.states[:, 0]).astype(int) == s_key
        if mask.any():
            assert_allclose(out[mask, 0], batch.qhat[mask].mean(), atol=1e-12)


def test_optimal_state_uses_score_norm_weights():
    policy = _two_factor_policy(seed=21)
    batch = _categorical_batch(policy, seed=22)
    state = BaselineState.initial(
        BaselineSpec(kind="optimal_state", tabular=True)
    ).refit(batch, policy)
    out = state.evaluate(batch, policy)
    w = policy.joint_score_sq_norms(batch.states, batch.actions)
    keys = np.rint(batch.states[:, 0]).astype(int)
    for s_key in (0, 1):
        mask = keys == s_key
        if mask.any():
            expect = np.sum(w[mask] * batch.qhat[mask]) / np.sum(w[mask])
            assert_allclose(out[mask, 0], expect, atol=1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        BaselineSpec(kind="fancy")
    with pytest.raises(ValueError):
        BaselineSpec(kind="none", features="cubic")
    with pytest.raises(ValueError):
        BaselineSpec(kind="mc_q", mc_samples=0)
    assert BaselineSpec(kind="mean_q", features="quadratic").features == "quadratic"
    assert spec_with(BaselineSpec(kind="mc_q"), mc_samples=4).mc_samples == 4


def test_descriptor_is_json_serializable():
    policy = _two_factor_policy(seed=23)
    batch = _categorical_batch(policy, seed=24)
    for spec in (
        BaselineSpec(kind="state_value"),
        BaselineSpec(kind="optimal_action", tabular=True),
        BaselineSpec(kind="dag", tabular=True),
    ):
        state = BaselineState.initial(spec).refit(batch, policy)
        json.dumps(state.descriptor())
