"""Finite-difference verification of the analytic gradients."""
from __future__ import annotations

import numpy as np

from .dataset import Dataset
from .fufs import FufsConfig, IndicatorPair, gradient, objective

GRADCHECK_TOL = 1e-4


def random_instance(d: int, n: int, p: int, seed: int):
    """Gaussian data with indicators drawn from the interior [0.1, 0.9]."""
    rng = np.random.default_rng(seed)
    ds = Dataset(rng.standard_normal((d, n)), rng.standard_normal((p, n)))
    pair = IndicatorPair(rng.uniform(0.1, 0.9, d), rng.uniform(0.1, 0.9, d))
    return ds, pair


def numeric_gradient(ds: Dataset, pair: IndicatorPair, cfg: FufsConfig, eps: float):
    d = ds.d
    out = {"m": np.zeros(d), "g": np.zeros(d)}
    for block in ("m", "g"):
        for k in range(d):
            e = np.zeros(d)
            e[k] = eps
            if block == "m":
                hi, lo = IndicatorPair(pair.m + e, pair.g), IndicatorPair(pair.m - e, pair.g)
            else:
                hi, lo = IndicatorPair(pair.m, pair.g + e), IndicatorPair(pair.m, pair.g - e)
            out[block][k] = (objective(ds, hi, cfg).total - objective(ds, lo, cfg).total) / (2 * eps)
    return out["m"], out["g"]


def finite_difference_check(ds: Dataset, pair: IndicatorPair, cfg: FufsConfig, eps: float = 1e-5):
    """Return (max relative error, (block, index)) of analytic vs central differences.

    Each coordinate's error is relative to max(|analytic|, |numeric|),
    floored at 1e-8 of the largest numeric component so components that
    are exactly zero do not divide by zero.
    """
    analytic = np.concatenate(gradient(ds, pair, cfg))
    numeric = np.concatenate(numeric_gradient(ds, pair, cfg, eps))
    floor = 1e-8 * max(float(np.max(np.abs(numeric))), 1.0)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    rel = np.abs(analytic - numeric) / denom
    worst = int(np.argmax(rel))
    d = ds.d
    return float(rel[worst]), ("m" if worst < d else "g", worst % d)
