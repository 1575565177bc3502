"""Random Fourier features and ridge-regularized least squares.

The function-approximation stack for baselines is deliberately small: a frozen
sinusoidal random feature map and a closed-form linear fit. Refitting a linear
model from scratch each iteration is equivalent to one exact Newton step on the
squared loss, which is all the training loop needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularSystemError


class RffMap:
    """Feature map y(x) = sin(P x / bandwidth + phase).

    P has i.i.d. standard normal entries and phase is uniform on [-pi, pi);
    both are drawn once at construction and never change, so two maps built
    from identically seeded generators are element-wise identical.
    """

    def __init__(self, input_dim: int, n_features: int, bandwidth: float, rng: np.random.Generator):
        if input_dim < 1 or n_features < 1:
            raise ValueError("input_dim and n_features must be positive")
        if not (bandwidth > 0 and np.isfinite(bandwidth)):
            raise ValueError(f"bandwidth must be positive and finite, got {bandwidth}")
        self.input_dim = int(input_dim)
        self.n_features = int(n_features)
        self.bandwidth = float(bandwidth)
        self.projection = rng.standard_normal((self.n_features, self.input_dim))
        self.phase = rng.uniform(-np.pi, np.pi, size=self.n_features)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.input_dim:
            raise ValueError(f"expected inputs of dim {self.input_dim}, got {x.shape[1]}")
        out = np.sin(x @ self.projection.T / self.bandwidth + self.phase)
        return out[0] if squeeze else out

    def descriptor(self) -> dict:
        return {
            "kind": "rff",
            "input_dim": self.input_dim,
            "n_features": self.n_features,
            "bandwidth": self.bandwidth,
            "projection": self.projection.tolist(),
            "phase": self.phase.tolist(),
        }

    @classmethod
    def from_descriptor(cls, desc: dict) -> "RffMap":
        obj = cls.__new__(cls)
        obj.input_dim = int(desc["input_dim"])
        obj.n_features = int(desc["n_features"])
        obj.bandwidth = float(desc["bandwidth"])
        obj.projection = np.asarray(desc["projection"], dtype=float)
        obj.phase = np.asarray(desc["phase"], dtype=float)
        return obj


class QuadraticMap:
    """Feature map y(x) = [x, x * x] (elementwise squares appended).

    The classic hand-crafted feature set for linear return baselines: any
    additively separable quadratic of the inputs is exactly linear in these
    features, so a ridge fit recovers it from a modest noiseless batch.
    """

    def __init__(self, input_dim: int):
        if input_dim < 1:
            raise ValueError("input_dim must be positive")
        self.input_dim = int(input_dim)
        self.n_features = 2 * self.input_dim

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.input_dim:
            raise ValueError(f"expected inputs of dim {self.input_dim}, got {x.shape[1]}")
        out = np.hstack([x, x * x])
        return out[0] if squeeze else out

    def descriptor(self) -> dict:
        return {"kind": "quadratic", "input_dim": self.input_dim}

    @classmethod
    def from_descriptor(cls, desc: dict) -> "QuadraticMap":
        return cls(int(desc["input_dim"]))


FeatureMap = RffMap | QuadraticMap


def median_bandwidth(inputs: np.ndarray, max_probe: int = 256) -> float:
    """Median pairwise distance over a leading probe of the inputs.

    Falls back to 1.0 when the probe is degenerate (fewer than two points or
    all points coincident), so downstream maps stay well defined.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    probe = inputs[: int(max_probe)]
    if len(probe) < 2:
        return 1.0
    diffs = probe[:, None, :] - probe[None, :, :]
    dists = np.sqrt(np.sum(diffs**2, axis=-1))
    upper = dists[np.triu_indices(len(probe), k=1)]
    med = float(np.median(upper))
    return med if med > 0 else 1.0


@dataclass
class LinearModel:
    """Linear predictor on explicit features; bias weight stored last when present."""

    weights: np.ndarray
    bias: bool = True

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float).ravel()

    @property
    def n_features(self) -> int:
        return len(self.weights) - (1 if self.bias else 0)

    def predict(self, features: np.ndarray) -> np.ndarray | float:
        features = np.asarray(features, dtype=float)
        squeeze = features.ndim == 1
        features = np.atleast_2d(features)
        if features.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {features.shape[1]}")
        out = features @ self.weights[: self.n_features]
        if self.bias:
            out = out + self.weights[-1]
        return float(out[0]) if squeeze else out

    @classmethod
    def zeros(cls, n_features: int, bias: bool = True) -> "LinearModel":
        return cls(np.zeros(n_features + (1 if bias else 0)), bias=bias)

    def descriptor(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias}

    @classmethod
    def from_descriptor(cls, desc: dict) -> "LinearModel":
        return cls(np.asarray(desc["weights"], dtype=float), bias=bool(desc["bias"]))


def default_ridge(design: np.ndarray) -> float:
    """Relative regularizer 1e-5 * trace(F'F) / rows for design matrix F."""
    design = np.atleast_2d(np.asarray(design, dtype=float))
    return 1e-5 * float(np.sum(design**2)) / max(len(design), 1)


def fit_linear(
    features: np.ndarray,
    targets: np.ndarray,
    ridge: float = 0.0,
    bias: bool = True,
    sample_weights: np.ndarray | None = None,
) -> LinearModel:
    """Solve argmin_w ||F w - t||^2 + ridge * ||w||^2 in closed form.

    With ridge = 0 a rank-deficient system raises SingularSystemError; with
    ridge > 0 the solve always returns finite weights (a least-squares fallback
    covers pathological conditioning). ``sample_weights`` turns the objective
    into weighted least squares, used by the variance-optimal state baseline.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    if len(features) != len(targets):
        raise ValueError("features and targets disagree on sample count")
    if ridge < 0 or not np.isfinite(ridge):
        raise ValueError(f"ridge must be finite and >= 0, got {ridge}")
    design = np.hstack([features, np.ones((len(features), 1))]) if bias else features
    t = targets
    if sample_weights is not None:
        sw = np.asarray(sample_weights, dtype=float).ravel()
        if len(sw) != len(design):
            raise ValueError("one sample weight per row required")
        if np.any(sw < 0):
            raise ValueError("sample weights must be nonnegative")
        root = np.sqrt(sw)
        design = design * root[:, None]
        t = t * root

    n, p = design.shape
    if ridge == 0.0:
        if np.linalg.matrix_rank(design) < p:
            raise SingularSystemError(
                f"rank-deficient design ({n} rows, {p} columns) with ridge=0; "
                "regularize or drop degenerate features"
            )
        w, *_ = np.linalg.lstsq(design, t, rcond=None)
    elif p <= n:
        a = design.T @ design + ridge * np.eye(p)
        b = design.T @ t
        w = _solve_spd(a, b)
    else:
        # Dual form for wide designs: w = F'(FF' + ridge I)^{-1} t, identical
        # to the primal ridge solution but an n x n solve instead of p x p.
        a = design @ design.T + ridge * np.eye(n)
        w = design.T @ _solve_spd(a, t)
    if not np.all(np.isfinite(w)):
        raise SingularSystemError("non-finite solution; inputs may contain NaN/Inf")
    return LinearModel(w, bias=bias)


def _solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        w = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        w = None
    if w is None or not np.all(np.isfinite(w)):
        w, *_ = np.linalg.lstsq(a, b, rcond=None)
    return w
