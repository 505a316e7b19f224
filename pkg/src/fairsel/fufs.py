"""Fairness-aware unsupervised feature selection by kernel alignment.

The loss over relaxed indicators ``m, g in [0, 1]^d`` is::

    L = -<HKH, K_M> + alpha <HK_PH, K_M> - alpha <HK_PH, K_G> + beta (|m|_1 + |g|_1)

where ``K_M`` is the kernel on ``diag(m) X`` and ``K_G`` the kernel on
``diag(g)(I - diag(m)) X``. It is minimized by alternating projected
gradient steps on ``g`` and then ``m``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DataError, NumericError
from .kernel import (
    MEDIAN_HEURISTIC,
    KernelSpec,
    center_array,
    rbf_from_sq,
    resolve_bandwidth,
    sq_distances,
)

INITS = ("uniform_half", "seeded_random")


@dataclass(frozen=True)
class StepPolicy:
    name: str = "backtracking"  # or "fixed"
    shrink: float = 0.5
    max_backtracks: int = 20
    armijo_c: float = 1e-4

    def __post_init__(self):
        if self.name not in ("backtracking", "fixed"):
            raise ConfigError(f"step_policy must be 'backtracking' or 'fixed', got {self.name!r}")
        if not 0 < self.shrink < 1:
            raise ConfigError("step_policy.shrink must lie in (0, 1)")
        if self.max_backtracks < 0:
            raise ConfigError("step_policy.max_backtracks must be >= 0")
        if not 0 < self.armijo_c < 1:
            raise ConfigError("step_policy.armijo_c must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d) -> "StepPolicy":
        if isinstance(d, str):
            return cls(name=d)
        return cls(**d)


@dataclass(frozen=True)
class FufsConfig:
    alpha: float = 1.0
    beta: float = 0.1
    k: int = 10
    l: Optional[int] = None  # None means l = k
    eta: float = 0.1
    step_policy: StepPolicy = field(default_factory=StepPolicy)
    max_iter: int = 500
    tol: float = 1e-6
    seed: int = 0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    init: str = "uniform_half"
    # drop the decomposition indicator: g stays 0 and is never updated
    ablate_g: bool = False

    def __post_init__(self):
        checks = [
            ("alpha", self.alpha >= 0 and math.isfinite(self.alpha)),
            ("beta", self.beta >= 0 and math.isfinite(self.beta)),
            ("k", isinstance(self.k, int) and self.k >= 1),
            ("l", self.l is None or (isinstance(self.l, int) and self.l >= 0)),
            ("eta", self.eta > 0 and math.isfinite(self.eta)),
            ("max_iter", isinstance(self.max_iter, int) and self.max_iter >= 1),
            ("tol", self.tol > 0),
            ("seed", isinstance(self.seed, int) and self.seed >= 0),
            ("init", self.init in INITS),
        ]
        for name, ok in checks:
            if not ok:
                raise ConfigError(f"invalid value for {name}: {getattr(self, name)!r}")

    @property
    def n_flag(self) -> int:
        return self.k if self.l is None else self.l

    def check_dims(self, d: int) -> None:
        if self.k > d:
            raise ConfigError(f"k={self.k} exceeds the number of features d={d}")
        if self.n_flag > d:
            raise ConfigError(f"l={self.n_flag} exceeds the number of features d={d}")
        if self.k + self.n_flag > d:
            warnings.warn(f"k + l = {self.k + self.n_flag} exceeds d = {d}", stacklevel=3)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kernel"] = self.kernel.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FufsConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        if "step_policy" in kw:
            kw["step_policy"] = StepPolicy.from_dict(kw["step_policy"])
        if "kernel" in kw:
            kw["kernel"] = KernelSpec.from_dict(kw["kernel"])
        for key in ("k", "max_iter", "seed"):
            if isinstance(kw.get(key), float) and kw[key].is_integer():
                kw[key] = int(kw[key])
        try:
            return cls(**kw)
        except TypeError as e:
            raise ConfigError(str(e)) from None


@dataclass(frozen=True)
class IndicatorPair:
    m: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if m.ndim != 1 or m.shape != g.shape:
            raise DataError("m and g must be 1-D vectors of equal length")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "g", g)


@dataclass(frozen=True)
class ObjectiveBreakdown:
    utility_term: float
    fairness_m_term: float
    fairness_g_term: float
    sparsity_term: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SelectionResult:
    indicators: IndicatorPair
    selected: list[int]
    flagged_sensitive: list[int]
    trajectory: list[ObjectiveBreakdown]
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "m": [float(v) for v in self.indicators.m],
            "g": [float(v) for v in self.indicators.g],
            "selected": list(self.selected),
            "flagged_sensitive": list(self.flagged_sensitive),
            "trajectory": [t.to_dict() for t in self.trajectory],
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionResult":
        return cls(
            IndicatorPair(np.array(d["m"], dtype=float), np.array(d["g"], dtype=float)),
            [int(i) for i in d["selected"]],
            [int(i) for i in d["flagged_sensitive"]],
            [ObjectiveBreakdown(**t) for t in d.get("trajectory", [])],
            int(d.get("iterations", 0)),
            bool(d.get("converged", False)),
        )


@dataclass(frozen=True)
class KernelCache:
    """Per-dataset pieces that stay fixed while m and g move."""

    x: np.ndarray
    family: str
    sigma: Optional[float]
    k_centered: np.ndarray
    kp_centered: np.ndarray

    @classmethod
    def build(cls, dataset: Dataset, kernel: KernelSpec) -> "KernelCache":
        x = dataset.x
        if kernel.family == "linear":
            k = x.T @ x
            kp = dataset.p_mat.T @ dataset.p_mat
            sigma = None
        else:
            if kernel.bandwidth == MEDIAN_HEURISTIC:
                sigma = resolve_bandwidth(x)
                sigma_p = resolve_bandwidth(dataset.p_mat)
            else:
                sigma = sigma_p = float(kernel.bandwidth)
            k = rbf_from_sq(sq_distances(x), sigma)
            kp = rbf_from_sq(sq_distances(dataset.p_mat), sigma_p)
        return cls(x, kernel.family, sigma, center_array(k), center_array(kp))

    def scaled_kernel(self, w: np.ndarray) -> np.ndarray:
        """Kernel on diag(w) X, sharing the bandwidth resolved on X."""
        xs = w[:, None] * self.x
        if self.family == "linear":
            return xs.T @ xs
        return rbf_from_sq(sq_distances(xs), self.sigma)


def _check_length(dataset: Dataset, v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (dataset.d,):
        raise DataError(f"{name} has length {v.shape}, expected ({dataset.d},)")
    return v


def build_m_matrix(dataset: Dataset, m) -> np.ndarray:
    m = _check_length(dataset, m, "m")
    return m[:, None] * dataset.x


def build_g_matrix(dataset: Dataset, pair: IndicatorPair) -> np.ndarray:
    m = _check_length(dataset, pair.m, "m")
    g = _check_length(dataset, pair.g, "g")
    return (g * (1.0 - m))[:, None] * dataset.x


def project_box(v) -> np.ndarray:
    return np.clip(np.asarray(v, dtype=float), 0.0, 1.0)


def _cache_for(dataset, cfg, cache):
    return cache if cache is not None else KernelCache.build(dataset, cfg.kernel)


def _breakdown(cache: KernelCache, pair: IndicatorPair, cfg: FufsConfig, km, kg) -> ObjectiveBreakdown:
    utility = -float(np.sum(cache.k_centered * km))
    fair_m = cfg.alpha * float(np.sum(cache.kp_centered * km))
    fair_g = -cfg.alpha * float(np.sum(cache.kp_centered * kg))
    # m, g live in [0, 1] so the l1 norms are plain sums
    sparsity = cfg.beta * (float(np.sum(pair.m)) + float(np.sum(pair.g)))
    parts = (utility, fair_m, fair_g, sparsity)
    if not all(math.isfinite(t) for t in parts):
        raise NumericError("non-finite objective term")
    return ObjectiveBreakdown(utility, fair_m, fair_g, sparsity, utility + fair_m + fair_g + sparsity)


def objective(dataset: Dataset, pair: IndicatorPair, cfg: FufsConfig, cache: Optional[KernelCache] = None) -> ObjectiveBreakdown:
    cache = _cache_for(dataset, cfg, cache)
    m = _check_length(dataset, pair.m, "m")
    g = _check_length(dataset, pair.g, "g")
    km = cache.scaled_kernel(m)
    kg = cache.scaled_kernel(g * (1.0 - m))
    return _breakdown(cache, pair, cfg, km, kg)


def _weighted_sqdist_sums(x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """sum_ij a_ij (x_ki - x_kj)^2 for every row k, assuming a symmetric."""
    return 2.0 * (x * x) @ a.sum(axis=1) - 2.0 * np.sum((x @ a) * x, axis=1)


def _quad_forms(x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """x_k^T a x_k for every row k."""
    return np.sum((x @ a) * x, axis=1)


def gradient(dataset: Dataset, pair: IndicatorPair, cfg: FufsConfig, cache: Optional[KernelCache] = None):
    """Analytic (dL/dm, dL/dg) at ``pair``.

    For the RBF kernel, with D_k(i, j) = (x_ki - x_kj)^2, s = g(1 - m),
    C_M = -HKH + alpha HK_PH and C_G = -alpha HK_PH::

        dL/dm_k = -(m_k / s2) S_M[k] + (g_k^2 (1 - m_k) / s2) S_G[k] + beta
        dL/dg_k = -(g_k (1 - m_k)^2 / s2) S_G[k] + beta

    where S_M[k] = sum_ij C_M K_M D_k and S_G[k] = sum_ij C_G K_G D_k.
    The first m term is the K_M path; the second comes through K_G since
    G depends on m.
    """
    cache = _cache_for(dataset, cfg, cache)
    m = _check_length(dataset, pair.m, "m")
    g = _check_length(dataset, pair.g, "g")
    s = g * (1.0 - m)
    c_m = -cache.k_centered + cfg.alpha * cache.kp_centered
    c_g = -cfg.alpha * cache.kp_centered
    x = cache.x

    if cache.family == "rbf":
        s2 = cache.sigma ** 2
        sum_m = _weighted_sqdist_sums(x, c_m * cache.scaled_kernel(m))
        sum_g = _weighted_sqdist_sums(x, c_g * cache.scaled_kernel(s))
        grad_m = -(m / s2) * sum_m + (g * g * (1.0 - m) / s2) * sum_g + cfg.beta
        grad_g = -(g * (1.0 - m) ** 2 / s2) * sum_g + cfg.beta
    elif cache.family == "linear":
        q_m = _quad_forms(x, c_m)
        q_g = _quad_forms(x, c_g)
        grad_m = 2.0 * m * q_m - 2.0 * g * g * (1.0 - m) * q_g + cfg.beta
        grad_g = 2.0 * g * (1.0 - m) ** 2 * q_g + cfg.beta
    else:
        raise ConfigError(f"unsupported kernel family {cache.family!r}")

    if not (np.all(np.isfinite(grad_m)) and np.all(np.isfinite(grad_g))):
        raise NumericError("non-finite gradient")
    return grad_m, grad_g


def initial_pair(d: int, cfg: FufsConfig) -> IndicatorPair:
    if cfg.init == "uniform_half":
        m = np.full(d, 0.5)
        g = np.full(d, 0.5)
    else:
        rng = np.random.default_rng(cfg.seed)
        m = rng.uniform(0.0, 1.0, d)
        g = rng.uniform(0.0, 1.0, d)
    if cfg.ablate_g:
        g = np.zeros(d)
    return IndicatorPair(m, g)


def _block_step(dataset, cfg, cache, pair, current, which):
    """One projected gradient step on m or g; returns (pair, breakdown or None)."""
    grad_m, grad_g = gradient(dataset, pair, cfg, cache)
    v, grad = (pair.g, grad_g) if which == "g" else (pair.m, grad_m)

    def with_block(new):
        return IndicatorPair(pair.m, new) if which == "g" else IndicatorPair(new, pair.g)

    policy = cfg.step_policy
    eta = cfg.eta
    if policy.name == "fixed":
        return with_block(project_box(v - eta * grad)), None

    for _ in range(policy.max_backtracks + 1):
        cand = project_box(v - eta * grad)
        step = cand - v
        if not np.any(step):
            return pair, current
        trial = with_block(cand)
        obj = objective(dataset, trial, cfg, cache)
        if obj.total <= current.total + policy.armijo_c * float(grad @ step):
            return trial, obj
        eta *= policy.shrink
    return pair, current


def optimize(dataset: Dataset, cfg: FufsConfig, callback=None) -> SelectionResult:
    """Alternating projected gradient descent from ``cfg.init``.

    ``callback(iteration, pair, breakdown)`` runs after every iteration.
    """
    cfg.check_dims(dataset.d)
    cache = KernelCache.build(dataset, cfg.kernel)
    pair = initial_pair(dataset.d, cfg)
    current = objective(dataset, pair, cfg, cache)
    prev_total = current.total

    trajectory: list[ObjectiveBreakdown] = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        if not cfg.ablate_g:
            pair, obj = _block_step(dataset, cfg, cache, pair, current, "g")
            current = obj if obj is not None else current
        pair, obj = _block_step(dataset, cfg, cache, pair, current, "m")
        current = obj if obj is not None else objective(dataset, pair, cfg, cache)
        trajectory.append(current)
        if callback is not None:
            callback(it, pair, current)
        if abs(current.total - prev_total) / (abs(prev_total) + 1e-12) < cfg.tol:
            converged = True
            break
        prev_total = current.total

    if not (np.all(np.isfinite(pair.m)) and np.all(np.isfinite(pair.g))):
        raise NumericError("optimizer produced non-finite indicators")

    selected = top_indices(pair.m, cfg.k)
    flagged = [i for i in top_indices(pair.g, dataset.d) if i not in set(selected)][: cfg.n_flag]
    return SelectionResult(pair, selected, flagged, trajectory, it, converged)


def top_indices(v, count: int) -> list[int]:
    """Indices of the ``count`` largest entries; ties go to the lower index."""
    order = np.argsort(-np.asarray(v, dtype=float), kind="stable")
    return [int(i) for i in order[:count]]


def rank_features(result) -> list[tuple[int, float]]:
    """All features by descending m (ties by ascending index) with their scores."""
    m = result.indicators.m if isinstance(result, SelectionResult) else np.asarray(result, dtype=float)
    return [(i, float(m[i])) for i in top_indices(m, len(m))]


def ablated(cfg: FufsConfig) -> FufsConfig:
    return replace(cfg, ablate_g=True)
