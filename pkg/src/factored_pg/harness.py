"""Experiment runner: training runs to CSV/JSON, solve-time tables, λ sweeps.

Run directory layout:

    out_dir/
      config.json                  fully-resolved config (provenance)
      curves/<arm>_seed<k>.csv     iteration,seed,arm,mean_return,sd_return,
                                   grad_variance,realized_kl
      checkpoints/<arm>_seed<k>.json
      summary.json                 recomputed from the CSVs, never from memory

Floats are written with repr-exact precision so reruns of the same config are
byte-identical and summaries round-trip through the CSVs.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig, config_to_dict
from .envs import CategoricalFactor, ContinuousFactor, make_env
from .errors import ConfigError
from .optim import NpgConfig, VanillaConfig, train
from .policies import (
    CategoricalPolicy,
    IndependentGaussianPolicy,
    IndicatorFeatures,
    RawFeatures,
    policy_to_checkpoint,
)

CSV_COLUMNS = ("iteration", "seed", "arm", "mean_return", "sd_return",
               "grad_variance", "realized_kl")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def build_env(cfg: ExperimentConfig):
    params = dict(cfg.env.params)
    task_rng = np.random.default_rng([int(params.get("target_seed", 0))])
    return make_env(cfg.env.name, params, task_rng)


def build_policy(env, policy_cfg):
    factors = env.spec.factors
    if all(isinstance(f, ContinuousFactor) for f in factors):
        m = len(factors)
        feats = RawFeatures(env.spec.state_dim)
        return IndependentGaussianPolicy(
            weights=np.zeros((m, feats.dim)),
            biases=np.zeros(m),
            log_std=np.full(m, policy_cfg.log_std_init),
            features=feats,
        )
    if all(isinstance(f, CategoricalFactor) for f in factors):
        cards = tuple(f.cardinality for f in factors)
        if policy_cfg.features == "indicator":
            feats = IndicatorFeatures(env.n_states)
        else:
            feats = RawFeatures(env.spec.state_dim)
        return CategoricalPolicy.zeros(cards, feats)
    raise ConfigError("mixed continuous/categorical factor policies are not supported")


def _optimizer(cfg: ExperimentConfig):
    o = cfg.optimizer
    if o.kind == "vanilla":
        return VanillaConfig(lr=o.lr)
    return NpgConfig(kl=o.kl, cg_iters=o.cg_iters, damping=o.damping)


# ---------------------------------------------------------------------------
# running


def run_experiment(cfg: ExperimentConfig, echo=None) -> str:
    """Train every (arm, seed) pair and write the run directory; returns its path."""
    out = cfg.out_dir
    os.makedirs(os.path.join(out, "curves"), exist_ok=True)
    os.makedirs(os.path.join(out, "checkpoints"), exist_ok=True)
    with open(os.path.join(out, "config.json"), "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")

    env = build_env(cfg)
    optimizer = _optimizer(cfg)
    for arm in cfg.arms:
        for seed in cfg.seeds:
            policy = build_policy(env, cfg.policy)
            result = train(
                env,
                policy,
                arm.spec,
                n_iterations=cfg.n_iterations,
                n_trajectories=cfg.n_trajectories,
                seed=seed,
                optimizer=optimizer,
                lam=cfg.lam,
                normalize=cfg.normalize,
            )
            _write_curve(out, arm.name, seed, result.logs)
            _write_checkpoint(out, cfg, arm, seed, result)
            if echo is not None:
                echo(
                    f"{arm.name} seed {seed}: "
                    f"final mean return {result.logs[-1].mean_return:.4f}"
                )
    summary = summarize_run(out)
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def _curve_path(out: str, arm: str, seed: int) -> str:
    return os.path.join(out, "curves", f"{arm}_seed{seed}.csv")


def _write_curve(out: str, arm: str, seed: int, logs) -> None:
    with open(_curve_path(out, arm, seed), "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for log in logs:
            fh.write(
                f"{log.iteration},{seed},{arm},{_fmt(log.mean_return)},"
                f"{_fmt(log.sd_return)},{_fmt(log.grad_variance)},"
                f"{_fmt(log.realized_kl)}\n"
            )


def _write_checkpoint(out: str, cfg: ExperimentConfig, arm, seed: int, result) -> None:
    payload = {
        "arm": arm.name,
        "seed": seed,
        "iterations": cfg.n_iterations,
        "policy": policy_to_checkpoint(result.policy),
        "baseline": result.baseline_state.descriptor(),
        "rng_scheme": "default_rng([seed, stream, iteration, trajectory])",
    }
    path = os.path.join(out, "checkpoints", f"{arm.name}_seed{seed}.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_curve(path: str) -> dict:
    """One CSV back as {column: array}; numeric columns become float arrays."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV columns in {path}: {reader.fieldnames}")
        rows = list(reader)
    out: dict = {"arm": rows[0]["arm"] if rows else ""}
    out["iteration"] = np.array([int(r["iteration"]) for r in rows])
    out["seed"] = np.array([int(r["seed"]) for r in rows])
    for col in ("mean_return", "sd_return", "grad_variance", "realized_kl"):
        out[col] = np.array([float(r[col]) for r in rows])
    return out


# ---------------------------------------------------------------------------
# summaries and the solve-time table


def first_crossing(returns: np.ndarray, threshold: float):
    """1-based count of iterations until mean return first reaches threshold."""
    hits = np.nonzero(np.asarray(returns, dtype=float) >= threshold)[0]
    return int(hits[0]) + 1 if len(hits) else None


def summarize_run(out_dir: str) -> dict:
    """Recompute all summary statistics from the stored CSVs and config."""
    with open(os.path.join(out_dir, "config.json")) as fh:
        cfg_raw = json.load(fh)
    env_name = cfg_raw["env"]["name"]
    threshold = _run_threshold(cfg_raw)

    arms_summary: dict = {}
    for arm in cfg_raw["arms"]:
        name = arm["name"]
        curves = []
        for seed in cfg_raw["seeds"]:
            curves.append(load_curve(_curve_path(out_dir, name, seed)))
        returns = np.stack([c["mean_return"] for c in curves])  # (seeds, iters)
        entry = {
            "final_mean_return": float(np.mean(returns[:, -1])),
            "mean_grad_variance": float(
                np.mean([np.mean(c["grad_variance"]) for c in curves])
            ),
        }
        if threshold is not None:
            per_seed = [first_crossing(r, threshold) for r in returns]
            entry["per_seed_solve_iterations"] = per_seed
            solved = [s for s in per_seed if s is not None]
            entry["mean_solve_iterations"] = (
                float(np.mean(solved)) if len(solved) == len(per_seed) else None
            )
            entry["mean_curve_solve_iterations"] = first_crossing(
                np.mean(returns, axis=0), threshold
            )
        arms_summary[name] = entry
    return {
        "env": env_name,
        "solve_threshold": threshold,
        "n_iterations": cfg_raw["n_iterations"],
        "seeds": cfg_raw["seeds"],
        "arms": arms_summary,
    }


def _run_threshold(cfg_raw: dict):
    if cfg_raw["env"]["name"] != "target_matching":
        return None
    params = cfg_raw["env"]["params"]
    if params.get("solve_threshold") is not None:
        return float(params["solve_threshold"])
    from .envs import solve_threshold_default

    m = int(params.get("m", len(params.get("target", [])) or 12))
    return solve_threshold_default(m)


@dataclass
class SolveTimeRow:
    """Per-dimension solve-time comparison between the two baseline arms."""

    m: int
    arm_iterations: dict  # arm name -> mean per-seed solve iterations
    delta: float | None
    improvement_pct: float | None
    mean_curve_iterations: dict  # secondary protocol, same shape
    reference_arm: str
    comparison_arm: str

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "arm_iterations": self.arm_iterations,
            "delta": self.delta,
            "improvement_pct": self.improvement_pct,
            "mean_curve_iterations": self.mean_curve_iterations,
            "reference_arm": self.reference_arm,
            "comparison_arm": self.comparison_arm,
        }


def table1_report(run_dirs) -> list:
    """Solve-time rows, one per run directory (each holding both arms).

    The reference arm is the one named "state" when present, otherwise the
    first configured arm; improvement is (reference - comparison) / reference
    in percent, positive when the comparison arm solves faster.
    """
    rows = []
    for run_dir in run_dirs:
        summary = summarize_run(run_dir)
        with open(os.path.join(run_dir, "config.json")) as fh:
            cfg_raw = json.load(fh)
        arm_names = [a["name"] for a in cfg_raw["arms"]]
        if len(arm_names) < 2:
            raise ValueError(f"{run_dir}: solve-time table needs two arms, got {arm_names}")
        reference = "state" if "state" in arm_names else arm_names[0]
        comparison = next(n for n in arm_names if n != reference)
        if summary["solve_threshold"] is None:
            raise ValueError(f"{run_dir}: environment has no solve threshold")

        per_arm = {
            name: summary["arms"][name]["mean_solve_iterations"] for name in arm_names
        }
        curve_arm = {
            name: summary["arms"][name]["mean_curve_solve_iterations"] for name in arm_names
        }
        ref, cmp_ = per_arm[reference], per_arm[comparison]
        if ref is None or cmp_ is None:
            delta = improvement = None
        else:
            delta = ref - cmp_
            improvement = 100.0 * delta / ref
        m = int(cfg_raw["env"]["params"].get("m", 0))
        rows.append(
            SolveTimeRow(
                m=m,
                arm_iterations=per_arm,
                delta=delta,
                improvement_pct=improvement,
                mean_curve_iterations=curve_arm,
                reference_arm=reference,
                comparison_arm=comparison,
            )
        )
    rows.sort(key=lambda r: r.m)
    return rows


def format_solve_table(rows) -> str:
    lines = ["m | reference | comparison | delta | improvement"]
    for r in rows:
        ref = r.arm_iterations[r.reference_arm]
        cmp_ = r.arm_iterations[r.comparison_arm]
        def show(v):
            return "unsolved" if v is None else f"{v:.1f}"
        imp = "n/a" if r.improvement_pct is None else f"{r.improvement_pct:.1f}%"
        delta = "n/a" if r.delta is None else f"{r.delta:.1f}"
        lines.append(
            f"{r.m} | {show(ref)} ({r.reference_arm}) | {show(cmp_)} ({r.comparison_arm})"
            f" | {delta} | {imp}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# lambda sweep


def lambda_sweep(cfg: ExperimentConfig, lam_values, echo=None) -> dict:
    """One run per λ under out_dir/lam_<value>, shared seeds; returns
    {lam: run_dir}."""
    from dataclasses import replace

    for lam in lam_values:
        if not (0.0 <= float(lam) <= 1.0):
            raise ConfigError(f"lambda values must lie in [0, 1], got {lam}")
    out: dict = {}
    for lam in lam_values:
        sub = replace(
            cfg,
            lam=float(lam),
            out_dir=os.path.join(cfg.out_dir, f"lam_{lam}"),
        )
        out[float(lam)] = run_experiment(sub, echo=echo)
    return out
