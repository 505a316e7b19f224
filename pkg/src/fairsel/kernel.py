"""Gram matrices, double centering and centered kernel alignment."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import ConfigError, DataError

MEDIAN_HEURISTIC = "median_heuristic"


@dataclass(frozen=True)
class KernelSpec:
    family: str = "rbf"
    # "median_heuristic" or a fixed positive sigma; ignored for linear
    bandwidth: Union[str, float] = MEDIAN_HEURISTIC

    def __post_init__(self):
        if self.family not in ("rbf", "linear"):
            raise ConfigError(f"kernel.family must be 'rbf' or 'linear', got {self.family!r}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != MEDIAN_HEURISTIC:
                raise ConfigError(f"kernel.bandwidth must be {MEDIAN_HEURISTIC!r} or a positive number")
        elif not (float(self.bandwidth) > 0 and np.isfinite(float(self.bandwidth))):
            raise ConfigError("kernel.bandwidth must be strictly positive")

    def to_dict(self) -> dict:
        return {"family": self.family, "bandwidth": self.bandwidth}

    @classmethod
    def from_dict(cls, d) -> "KernelSpec":
        if isinstance(d, str):
            return cls(family=d)
        return cls(**d)


@dataclass(frozen=True)
class GramMatrix:
    values: np.ndarray
    bandwidth_used: Optional[float] = None

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _as_gram(k) -> np.ndarray:
    return k.values if isinstance(k, GramMatrix) else np.asarray(k, dtype=float)


def resolve_bandwidth(data: np.ndarray) -> float:
    """Median pairwise Euclidean distance between instance columns.

    Falls back to 1.0 when the median is zero (coincident points).
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise DataError("bandwidth needs at least 2 instances")
    med = float(np.median(pdist(data.T)))
    return med if med >= 1e-12 else 1.0


def sq_distances(data: np.ndarray) -> np.ndarray:
    """Pairwise squared distances between columns, exact zeros on the diagonal."""
    t = np.ascontiguousarray(np.asarray(data, dtype=float).T)
    return cdist(t, t, "sqeuclidean")


def rbf_from_sq(sq: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-sq / (2.0 * sigma * sigma))


def gram(data: np.ndarray, spec: KernelSpec = KernelSpec(), sigma: Optional[float] = None) -> GramMatrix:
    """Gram matrix over the columns of ``data``.

    ``sigma`` overrides the bandwidth policy in ``spec``; the optimizer
    uses it to keep one bandwidth for every kernel built from X.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise DataError("gram needs a 2-D matrix with at least 2 columns")
    if not np.all(np.isfinite(data)):
        raise DataError("non-finite entries passed to gram")
    if spec.family == "linear":
        k = data.T @ data
        return GramMatrix(0.5 * (k + k.T), None)
    if sigma is None:
        sigma = resolve_bandwidth(data) if spec.bandwidth == MEDIAN_HEURISTIC else float(spec.bandwidth)
    return GramMatrix(rbf_from_sq(sq_distances(data), sigma), float(sigma))


def center_array(k: np.ndarray) -> np.ndarray:
    """H k H via row/column mean subtraction."""
    k = np.asarray(k, dtype=float)
    row = k.mean(axis=1, keepdims=True)
    col = k.mean(axis=0, keepdims=True)
    return k - row - col + k.mean()


def center(k) -> GramMatrix:
    bw = k.bandwidth_used if isinstance(k, GramMatrix) else None
    return GramMatrix(center_array(_as_gram(k)), bw)


def centered_alignment(k1, k2) -> float:
    """Tr(H k1 H k2), i.e. the Frobenius product of centered k1 with k2."""
    a, b = _as_gram(k1), _as_gram(k2)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"kernel shapes differ or are not square: {a.shape} vs {b.shape}")
    return float(np.sum(center_array(a) * b))
