"""Experiment protocols on synthetic data: fraction grids, paired alpha runs,
the g ablation and the beta sparsity sweep. Shared by ``scripts/`` and the
acceptance tests."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dataset import Dataset, SyntheticSpec, synthetic_standardized
from .evaluation import EvalReport, evaluate_selection
from .fufs import FufsConfig, SelectionResult, optimize, rank_features

FRACTIONS = (0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40)
ALPHA_GRID = (0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)
BETA_GRID = (0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)


def standard_spec(seed: int = 0) -> SyntheticSpec:
    return SyntheticSpec(n=200, n_utility=10, n_sensitive=10, n_noise=10,
                         cluster_separation=3.0, sensitive_correlation=0.9, seed=seed)


def feature_count(fraction: float, d: int) -> int:
    # round first so 0.1 * 30 does not become 4
    return min(d, max(1, math.ceil(round(fraction * d, 9))))


def top_ranked(result: SelectionResult, count: int) -> list[int]:
    return [i for i, _ in rank_features(result)[:count]]


def evaluate_fractions(dataset: Dataset, result: SelectionResult, fractions: Sequence[float] = FRACTIONS,
                       restarts: int = 50, seed: int = 0, **kw) -> dict[float, EvalReport]:
    return {
        f: evaluate_selection(dataset, top_ranked(result, feature_count(f, dataset.d)),
                              restarts=restarts, seed=seed, **kw)
        for f in fractions
    }


def role_count(dataset: Dataset, indices, role: str) -> int:
    return sum(1 for i in indices if dataset.roles[i] == role)


@dataclass
class PairedRun:
    seed: int
    baseline: SelectionResult
    treated: SelectionResult
    baseline_eval: EvalReport
    treated_eval: EvalReport
    baseline_sensitive: int
    treated_sensitive: int


def fairness_effect(seeds: Sequence[int] = range(5), fraction: float = 0.33, k: int = 10,
                    restarts: int = 50, cfg: FufsConfig = FufsConfig()) -> list[PairedRun]:
    """alpha=0 versus alpha=cfg.alpha (default 1) on the standard synthetic data."""
    out = []
    for seed in seeds:
        ds = synthetic_standardized(standard_spec(seed))
        base = optimize(ds, replace(cfg, alpha=0.0, k=k))
        fair = optimize(ds, replace(cfg, k=k))
        count = feature_count(fraction, ds.d)
        out.append(PairedRun(
            seed, base, fair,
            evaluate_selection(ds, top_ranked(base, count), restarts=restarts, seed=seed),
            evaluate_selection(ds, top_ranked(fair, count), restarts=restarts, seed=seed),
            role_count(ds, base.selected, "sensitive"),
            role_count(ds, fair.selected, "sensitive"),
        ))
    return out


def ablation_study(seeds: Sequence[int] = range(5), fraction: float = 0.10, k: int = 10,
                   restarts: int = 50, cfg: FufsConfig = FufsConfig()) -> list[dict]:
    """Full method versus the variant without the decomposition indicator."""
    rows = []
    for seed in seeds:
        ds = synthetic_standardized(standard_spec(seed))
        full = optimize(ds, replace(cfg, k=k))
        abl = optimize(ds, replace(cfg, k=k, ablate_g=True))
        count = feature_count(fraction, ds.d)
        rep_full = evaluate_selection(ds, top_ranked(full, count), restarts=restarts, seed=seed)
        rep_abl = evaluate_selection(ds, top_ranked(abl, count), restarts=restarts, seed=seed)
        flagged = full.flagged_sensitive
        rows.append({
            "seed": seed,
            "balance_full": rep_full.balance,
            "balance_ablated": rep_abl.balance,
            "acc_full": rep_full.acc,
            "acc_ablated": rep_abl.acc,
            "flagged_sensitive_share": role_count(ds, flagged, "sensitive") / max(len(flagged), 1),
            "flagged": len(flagged),
        })
    return rows


def beta_sweep(betas: Sequence[float] = (0.001, 0.01, 0.1, 1.0, 10.0), alpha: float = 1.0,
               seed: int = 0, k: int = 10, cfg: FufsConfig = FufsConfig()) -> list[dict]:
    ds = synthetic_standardized(standard_spec(seed))
    rows = []
    for b in betas:
        res = optimize(ds, replace(cfg, alpha=alpha, beta=b, k=k))
        rows.append({"beta": b, "m_l1": float(np.sum(res.indicators.m)),
                     "g_l1": float(np.sum(res.indicators.g)), "iterations": res.iterations})
    return rows
