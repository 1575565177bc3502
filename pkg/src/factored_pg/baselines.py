"""Per-factor baselines: fitted, marginalized, and variance-optimal estimators.

A baseline for factor i may depend on the state and every *other* factor's
value but never on a^i itself; that restriction alone makes the score-weighted
correction exactly mean-zero, so all variants below leave the gradient
estimator unbiased and differ only in variance.

Fitting follows the training-loop convention: baselines are evaluated with
models fitted on the previous iteration's batch; the first iteration uses an
all-zero model, so early advantages are raw returns-to-go.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .features import (
    FeatureMap,
    LinearModel,
    QuadraticMap,
    RffMap,
    default_ridge,
    fit_linear,
    median_bandwidth,
)

BASELINE_KINDS = (
    "none",
    "state_value",
    "optimal_state",
    "mc_q",
    "mean_q",
    "optimal_action",
    "dag",
)


@dataclass(frozen=True)
class BaselineSpec:
    """Which baseline to run and how to approximate the functions it needs.

    ``exact`` switches Monte-Carlo marginalization to an exact sum over a
    categorical factor's support. ``max_aggregation`` replaces the mean over
    marginalization candidates with a max (an experimental aggregator; still
    ignores the factor's own sampled value, hence still bias-free).
    ``tabular`` replaces regressions with exact group-mean tables for
    discrete problems.
    """

    kind: str
    mc_samples: int = 10
    exact: bool = False
    max_aggregation: bool = False
    features: str = "linear"  # linear | quadratic | rff
    n_features: int = 100
    ridge: float | None = None
    tabular: bool = False

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}; choose from {BASELINE_KINDS}")
        if self.features not in ("linear", "quadratic", "rff"):
            raise ValueError(f"features must be 'linear', 'quadratic', or 'rff', got {self.features!r}")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")


# ---------------------------------------------------------------------------
# fitted Q on (state, action)


@dataclass
class QModel:
    """Return-to-go regression on concatenated (state, action) inputs."""

    model: LinearModel
    feature_map: FeatureMap | None = None

    def predict(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        x = np.hstack([np.atleast_2d(states), np.atleast_2d(actions)])
        phi = self.feature_map(x) if self.feature_map is not None else x
        return np.asarray(self.model.predict(phi), dtype=float).ravel()

    def __call__(self, state: np.ndarray, action: np.ndarray) -> float:
        return float(self.predict(np.atleast_2d(state), np.atleast_2d(action))[0])


def _make_map(inputs: np.ndarray, spec: BaselineSpec, rng: np.random.Generator) -> FeatureMap | None:
    if spec.features == "quadratic":
        return QuadraticMap(inputs.shape[1])
    if spec.features != "rff":
        return None
    bw = median_bandwidth(inputs)
    return RffMap(inputs.shape[1], spec.n_features, bw, rng)


def _fit(
    features: np.ndarray,
    targets: np.ndarray,
    spec: BaselineSpec,
    sample_weights: np.ndarray | None = None,
) -> LinearModel:
    design = np.hstack([features, np.ones((len(features), 1))])
    ridge = spec.ridge if spec.ridge is not None else default_ridge(design)
    return fit_linear(features, targets, ridge=ridge, sample_weights=sample_weights)


def fit_q(
    states: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    spec: BaselineSpec,
    rng: np.random.Generator | None = None,
    frozen_map: RffMap | None = None,
) -> QModel:
    """One closed-form refit of the Q regression (an exact Newton step)."""
    x = np.hstack([np.atleast_2d(states), np.atleast_2d(actions)])
    rmap = frozen_map
    if rmap is None and spec.features != "linear":
        if rng is None and spec.features == "rff":
            raise ValueError("rng required to construct a fresh feature map")
        rmap = _make_map(x, spec, rng)
    phi = rmap(x) if rmap is not None else x
    return QModel(model=_fit(phi, targets, spec), feature_map=rmap)


# ---------------------------------------------------------------------------
# reference single-sample marginalizations (vectorized paths must match these)


def mc_marginalized_baseline(
    q,
    policy,
    state,
    action,
    i: int,
    n_samples: int = 10,
    rng: np.random.Generator | None = None,
    exact: bool = False,
    max_aggregation: bool = False,
) -> float:
    """Marginalize factor i out of Q by resampling it from the policy.

    ``q`` is any callable (state, action) -> real. The candidates never depend
    on the sampled a^i, so the result is a valid baseline. With ``exact`` the
    average runs over a categorical factor's full support with its exact
    probabilities.
    """
    _require_independent(policy, "marginalized baselines")
    action = np.asarray(action, dtype=float)
    if exact:
        support = policy.factor_support(i)
        if support is None:
            raise ValueError("exact marginalization requires a categorical factor")
        probs = policy.factor_probs(state, i)
        values = []
        for v in support:
            swapped = action.copy()
            swapped[i] = v
            values.append(q(state, swapped))
        if max_aggregation:
            return float(np.max(values))
        return float(np.dot(probs, values))
    if rng is None:
        raise ValueError("rng required for sampled marginalization")
    draws = policy.sample_factor(state, i, n_samples, rng)
    values = []
    for v in draws:
        swapped = action.copy()
        swapped[i] = v
        values.append(q(state, swapped))
    return float(np.max(values)) if max_aggregation else float(np.mean(values))


def mean_marginalized_baseline(q, policy, state, action, i: int) -> float:
    """Evaluate Q with factor i replaced by its policy mean.

    Defined for continuous factors only: the expected value of a categorical
    factor is a probability vector, not an action; use exact marginalization
    there instead. For Q linear in the action this equals full marginalization.
    """
    _require_independent(policy, "marginalized baselines")
    if policy.factor_kinds[i] != "gaussian":
        raise ValueError(
            "mean substitution requires a continuous factor; "
            "use exact marginalization for categorical factors"
        )
    swapped = np.asarray(action, dtype=float).copy()
    swapped[i] = policy.mean_action(state)[i]
    return float(q(state, swapped))


def optimal_action_baseline(
    q,
    policy,
    state,
    action,
    i: int,
    n_samples: int = 10,
    rng: np.random.Generator | None = None,
) -> float:
    """Score-norm-weighted marginalization E[z_i'z_i Q] / E[z_i'z_i] over a^i.

    Uses the exact support sum for categorical factors and a shared-draw Monte
    Carlo ratio (same draws in numerator and denominator) for continuous ones.
    """
    _require_independent(policy, "the optimal action baseline")
    action = np.asarray(action, dtype=float)
    support = policy.factor_support(i)
    if support is not None:
        probs = policy.factor_probs(state, i)
        num = den = 0.0
        for v, pv in zip(support, probs):
            swapped = action.copy()
            swapped[i] = v
            zsq = float(np.sum(policy.score_block(state, swapped, i) ** 2))
            num += float(pv) * zsq * q(state, swapped)
            den += float(pv) * zsq
    else:
        if rng is None:
            raise ValueError("rng required for the continuous-factor ratio estimator")
        draws = policy.sample_factor(state, i, n_samples, rng)
        num = den = 0.0
        for v in draws:
            swapped = action.copy()
            swapped[i] = v
            zsq = float(np.sum(policy.score_block(state, swapped, i) ** 2))
            num += zsq * q(state, swapped)
            den += zsq
    if den <= 0.0:
        from .errors import ZeroScoreNormError

        raise ZeroScoreNormError(f"factor {i} has vanishing score norm; ratio undefined")
    return num / den


def _require_independent(policy, what: str) -> None:
    if any(policy.parents(i) for i in range(policy.m)):
        raise ValueError(f"{what} assume independent factors; fit per-factor regressions instead")


# ---------------------------------------------------------------------------
# iteration-level baseline state


class BaselineState:
    """Fitted models for one baseline arm, refit once per training iteration.

    ``evaluate`` produces the (n_steps, n_factors) matrix b_i(s_t, a_t^{-i})
    for a batch using the models from the previous refit; a fresh state
    evaluates to zero everywhere.
    """

    def __init__(self, spec: BaselineSpec, fitted: dict | None = None):
        self.spec = spec
        self.fitted = fitted

    @classmethod
    def initial(cls, spec: BaselineSpec) -> "BaselineState":
        return cls(spec, fitted=None)

    # -- evaluation

    def evaluate(self, batch, policy, rng: np.random.Generator | None = None) -> np.ndarray:
        n, m = batch.n_steps, policy.m
        if self.spec.kind == "none" or self.fitted is None:
            return np.zeros((n, m))
        kind = self.spec.kind
        if kind in ("state_value", "optimal_state"):
            values = self._predict_state(batch.states)
            return np.repeat(values[:, None], m, axis=1)
        if kind == "mc_q":
            return self._eval_mc_q(batch, policy, rng)
        if kind == "mean_q":
            return self._eval_mean_q(batch, policy)
        if kind == "optimal_action":
            return self._eval_optimal_action(batch, policy, rng)
        if kind == "dag":
            return self._eval_dag(batch, policy)
        raise AssertionError(f"unhandled kind {kind}")

    def _predict_state(self, states: np.ndarray) -> np.ndarray:
        if self.spec.tabular:
            table = self.fitted["table"]
            keys = np.rint(states[:, 0]).astype(int)
            return np.array([table.get(k, 0.0) for k in keys])
        phi = self.fitted["map"](states) if self.fitted["map"] is not None else states
        return np.asarray(self.fitted["model"].predict(phi), dtype=float).ravel()

    def _q_predict(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        if self.spec.tabular:
            table = self.fitted["table"]
            out = np.empty(len(states))
            for k, (s, a) in enumerate(zip(states, actions)):
                key = (int(round(s[0])), tuple(int(round(v)) for v in a))
                out[k] = table.get(key, 0.0)
            return out
        return self.fitted["q"].predict(states, actions)

    def _eval_mc_q(self, batch, policy, rng) -> np.ndarray:
        n, m = batch.n_steps, policy.m
        out = np.empty((n, m))
        for i in range(m):
            support = policy.factor_support(i)
            if self.spec.exact:
                if support is None:
                    raise ValueError("exact marginalization requires categorical factors")
                probs = policy.factor_probs_batch(batch.states, i)
                vals = np.empty((n, len(support)))
                for c, v in enumerate(support):
                    swapped = batch.actions.copy()
                    swapped[:, i] = v
                    vals[:, c] = self._q_predict(batch.states, swapped)
                out[:, i] = (
                    np.max(vals, axis=1)
                    if self.spec.max_aggregation
                    else np.sum(probs * vals, axis=1)
                )
            else:
                if rng is None:
                    raise ValueError("rng required for sampled marginalization")
                draws = policy.sample_factor_batch(batch.states, i, self.spec.mc_samples, rng)
                vals = np.empty((n, self.spec.mc_samples))
                for c in range(self.spec.mc_samples):
                    swapped = batch.actions.copy()
                    swapped[:, i] = draws[:, c]
                    vals[:, c] = self._q_predict(batch.states, swapped)
                out[:, i] = (
                    np.max(vals, axis=1) if self.spec.max_aggregation else np.mean(vals, axis=1)
                )
        return out

    def _eval_mean_q(self, batch, policy) -> np.ndarray:
        n, m = batch.n_steps, policy.m
        if any(kind != "gaussian" for kind in policy.factor_kinds):
            raise ValueError("mean substitution requires continuous factors")
        means = policy.mean_actions_batch(batch.states)
        out = np.empty((n, m))
        for i in range(m):
            swapped = batch.actions.copy()
            swapped[:, i] = means[:, i]
            out[:, i] = self._q_predict(batch.states, swapped)
        return out

    def _eval_optimal_action(self, batch, policy, rng) -> np.ndarray:
        n, m = batch.n_steps, policy.m
        out = np.empty((n, m))
        for i in range(m):
            support = policy.factor_support(i)
            if support is not None:
                probs = policy.factor_probs_batch(batch.states, i)  # (n, k)
                phi_sq = np.sum(policy.features.batch(batch.states) ** 2, axis=1)
                # ||z_i(v)||^2 = (1 - 2 p_v + sum_u p_u^2) ||phi||^2 for softmax heads
                psum = np.sum(probs**2, axis=1)
                num = np.zeros(n)
                den = np.zeros(n)
                for c, v in enumerate(support):
                    swapped = batch.actions.copy()
                    swapped[:, i] = v
                    zsq = (1.0 - 2.0 * probs[:, c] + psum) * phi_sq
                    qv = self._q_predict(batch.states, swapped)
                    num += probs[:, c] * zsq * qv
                    den += probs[:, c] * zsq
            else:
                if rng is None:
                    raise ValueError("rng required for the continuous-factor ratio estimator")
                draws = policy.sample_factor_batch(batch.states, i, self.spec.mc_samples, rng)
                phis, mus = policy._mu_batch(batch.states)
                phi_sq = np.sum(phis**2, axis=1)
                var_i = float(np.exp(2.0 * policy.log_std[i]))
                num = np.zeros(n)
                den = np.zeros(n)
                for c in range(self.spec.mc_samples):
                    swapped = batch.actions.copy()
                    swapped[:, i] = draws[:, c]
                    resid = draws[:, c] - mus[:, i]
                    d = resid / var_i
                    zsq = d * d * (phi_sq + 1.0) + (d * resid - 1.0) ** 2
                    qv = self._q_predict(batch.states, swapped)
                    num += zsq * qv
                    den += zsq
            if np.any(den <= 0.0):
                from .errors import ZeroScoreNormError

                raise ZeroScoreNormError(f"factor {i} has vanishing score norm in batch")
            out[:, i] = num / den
        return out

    def _eval_dag(self, batch, policy) -> np.ndarray:
        n, m = batch.n_steps, policy.m
        out = np.empty((n, m))
        for i in range(m):
            keep = [j for j in range(m) if j not in set(policy.descendants(i))]
            inputs = np.hstack([batch.states, batch.actions[:, keep]])
            if self.spec.tabular:
                table = self.fitted["tables"][i]
                for k in range(n):
                    key = tuple(int(round(v)) for v in inputs[k])
                    out[k, i] = table.get(key, 0.0)
            else:
                rmap = self.fitted["maps"][i]
                phi = rmap(inputs) if rmap is not None else inputs
                out[:, i] = np.asarray(self.fitted["models"][i].predict(phi)).ravel()
        return out

    # -- refitting

    def refit(self, batch, policy, rng: np.random.Generator | None = None) -> "BaselineState":
        kind = self.spec.kind
        if kind == "none":
            return self
        if kind in ("state_value", "optimal_state"):
            return self._refit_state(batch, policy, rng)
        if kind in ("mc_q", "mean_q", "optimal_action"):
            return self._refit_q(batch, rng)
        if kind == "dag":
            return self._refit_dag(batch, policy, rng)
        raise AssertionError(f"unhandled kind {kind}")

    def _refit_state(self, batch, policy, rng) -> "BaselineState":
        weights = None
        if self.spec.kind == "optimal_state":
            weights = policy.joint_score_sq_norms(batch.states, batch.actions)
        if self.spec.tabular:
            keys = np.rint(batch.states[:, 0]).astype(int)
            w = np.ones(len(keys)) if weights is None else weights
            num: dict = {}
            den: dict = {}
            for k, wk, q in zip(keys, w, batch.qhat):
                num[k] = num.get(k, 0.0) + wk * q
                den[k] = den.get(k, 0.0) + wk
            table = {k: num[k] / den[k] for k in num if den[k] > 0}
            return BaselineState(self.spec, {"table": table})
        rmap = self.fitted["map"] if self.fitted else _make_map(batch.states, self.spec, rng)
        phi = rmap(batch.states) if rmap is not None else batch.states
        model = _fit(phi, batch.qhat, self.spec, sample_weights=weights)
        return BaselineState(self.spec, {"model": model, "map": rmap})

    def _refit_q(self, batch, rng) -> "BaselineState":
        if self.spec.tabular:
            num: dict = {}
            den: dict = {}
            for s, a, q in zip(batch.states, batch.actions, batch.qhat):
                key = (int(round(s[0])), tuple(int(round(v)) for v in a))
                num[key] = num.get(key, 0.0) + q
                den[key] = den.get(key, 0.0) + 1.0
            table = {k: num[k] / den[k] for k in num}
            return BaselineState(self.spec, {"table": table})
        frozen = self.fitted["q"].feature_map if self.fitted else None
        qmodel = fit_q(batch.states, batch.actions, batch.qhat, self.spec, rng, frozen_map=frozen)
        return BaselineState(self.spec, {"q": qmodel})

    def _refit_dag(self, batch, policy, rng) -> "BaselineState":
        m = policy.m
        if self.spec.tabular:
            tables = []
            for i in range(m):
                keep = [j for j in range(m) if j not in set(policy.descendants(i))]
                inputs = np.hstack([batch.states, batch.actions[:, keep]])
                num: dict = {}
                den: dict = {}
                for row, q in zip(inputs, batch.qhat):
                    key = tuple(int(round(v)) for v in row)
                    num[key] = num.get(key, 0.0) + q
                    den[key] = den.get(key, 0.0) + 1.0
                tables.append({k: num[k] / den[k] for k in num})
            return BaselineState(self.spec, {"tables": tables})
        maps, models = [], []
        for i in range(m):
            keep = [j for j in range(m) if j not in set(policy.descendants(i))]
            inputs = np.hstack([batch.states, batch.actions[:, keep]])
            rmap = self.fitted["maps"][i] if self.fitted else _make_map(inputs, self.spec, rng)
            phi = rmap(inputs) if rmap is not None else inputs
            models.append(_fit(phi, batch.qhat, self.spec))
            maps.append(rmap)
        return BaselineState(self.spec, {"models": models, "maps": maps})

    def descriptor(self) -> dict:
        """JSON-serializable snapshot of the fitted weights (checkpointing)."""
        out: dict = {"spec": self.spec.__dict__.copy(), "fitted": None}
        if self.fitted is None:
            return out
        f: dict = {}
        if "model" in self.fitted:
            f["model"] = self.fitted["model"].descriptor()
            f["map"] = self.fitted["map"].descriptor() if self.fitted["map"] is not None else None
        if "q" in self.fitted:
            q = self.fitted["q"]
            f["q"] = {
                "model": q.model.descriptor(),
                "map": q.feature_map.descriptor() if q.feature_map is not None else None,
            }
        if "models" in self.fitted:
            f["models"] = [mdl.descriptor() for mdl in self.fitted["models"]]
            f["maps"] = [
                rmap.descriptor() if rmap is not None else None for rmap in self.fitted["maps"]
            ]
        if "table" in self.fitted:
            f["table"] = [[list(k) if isinstance(k, tuple) else k, v]
                          for k, v in self.fitted["table"].items()]
        if "tables" in self.fitted:
            f["tables"] = [[[list(k), v] for k, v in table.items()]
                           for table in self.fitted["tables"]]
        out["fitted"] = f
        return out


def spec_with(spec: BaselineSpec, **kw) -> BaselineSpec:
    return replace(spec, **kw)
