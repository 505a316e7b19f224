"""Clustering-based evaluation: k-means restarts, ACC, NMI, Balance, Proportion."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dataset import Dataset
from .errors import DataError

MAX_LLOYD_ITER = 300
METRICS = ("acc", "nmi", "balance", "proportion")


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    inertia: float


@dataclass
class EvalReport:
    acc: Optional[float]
    nmi: Optional[float]
    balance: Optional[float]
    proportion: Optional[float]
    restarts: int
    per_restart: Optional[list[dict]] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _labels(a) -> np.ndarray:
    return np.asarray(a.labels if isinstance(a, ClusterAssignment) else a)


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # points (n, f), centers (c, f)
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ncf,ncf->nc", diff, diff)


def _kmeans_pp(points: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, c):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a center already; pick an unused index
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(free))
        chosen.append(idx)
        closest = np.minimum(closest, np.sum((points - points[idx]) ** 2, axis=1))
    return points[chosen].copy()


def _repair_empty(points, assign, centers, dist):
    c = centers.shape[0]
    for _ in range(c):
        counts = np.bincount(assign, minlength=c)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            break
        own = dist[np.arange(len(assign)), assign]
        # only donors from clusters that keep at least one point
        own = np.where(counts[assign] > 1, own, -np.inf)
        far = int(np.argmax(own))
        assign[far] = empty[0]
        centers[empty[0]] = points[far]
    return assign


def _lloyd(points: np.ndarray, c: int, rng: np.random.Generator) -> ClusterAssignment:
    centers = _kmeans_pp(points, c, rng)
    assign = None
    for _ in range(MAX_LLOYD_ITER):
        dist = _sq_dists(points, centers)
        new = np.argmin(dist, axis=1)
        new = _repair_empty(points, new, centers, dist)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for j in range(c):
            centers[j] = points[assign == j].mean(axis=0)
    inertia = float(np.sum((points - centers[assign]) ** 2))
    return ClusterAssignment(assign.astype(np.int64), inertia)


def kmeans(points: np.ndarray, c: int, restarts: int = 50, seed: int = 0) -> list[ClusterAssignment]:
    """Lloyd's algorithm with k-means++ seeding, one RNG substream per restart.

    ``points`` is features x instances.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[None, :]
    data = np.ascontiguousarray(points.T)
    n = data.shape[0]
    if c < 1 or n < c:
        raise DataError(f"k-means needs 1 <= c <= n, got c={c}, n={n}")
    if restarts < 1:
        raise DataError("restarts must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(restarts)
    return [_lloyd(data, c, np.random.default_rng(s)) for s in streams]


def _check_pair(a, b):
    a, b = _labels(a), _labels(b)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"label vectors differ in length: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise DataError("empty label vectors")
    return a, b


def contingency(a, b) -> np.ndarray:
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def acc(pred, truth) -> float:
    """Clustering accuracy under the best one-to-one cluster-to-class map."""
    p, t = _check_pair(pred, truth)
    table = contingency(p, t)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum()) / p.size


def _entropy(counts: np.ndarray) -> float:
    pr = counts[counts > 0] / counts.sum()
    return float(-np.sum(pr * np.log(pr)))


def nmi(pred, truth) -> float:
    """Mutual information over the arithmetic mean of the two entropies."""
    p, t = _check_pair(pred, truth)
    table = contingency(p, t).astype(float)
    n = table.sum()
    h_p = _entropy(table.sum(axis=1))
    h_t = _entropy(table.sum(axis=0))
    if h_p == 0.0 and h_t == 0.0:
        return 1.0
    if h_p == 0.0 or h_t == 0.0:
        return 0.0
    joint = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / (n * n)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
    return min(max(mi / ((h_p + h_t) / 2.0), 0.0), 1.0)


def _group_fractions(pred, groups, n_clusters):
    p, gr = _check_pair(pred, groups)
    clusters = np.unique(p) if n_clusters is None else np.arange(n_clusters)
    group_ids = np.unique(gr)
    fractions = []
    for ci in clusters:
        members = gr[p == ci]
        if members.size == 0:
            raise DataError(f"cluster {ci} is empty")
        fractions.append([np.count_nonzero(members == g) / members.size for g in group_ids])
    return np.array(fractions)


def balance(pred, groups, n_clusters: Optional[int] = None) -> float:
    """Smallest share any protected group has inside any cluster."""
    return float(_group_fractions(pred, groups, n_clusters).min())


def proportion(pred, groups, n_clusters: Optional[int] = None) -> float:
    """Sum over clusters of the dominant group's share (lower is fairer)."""
    return float(_group_fractions(pred, groups, n_clusters).max(axis=1).sum())


def protected_groups(row, threshold: Optional[float] = None, max_categories: int = 10) -> np.ndarray:
    """Discretize a protected attribute row into integer group ids.

    Rows with at most ``max_categories`` distinct values are treated as
    categorical. Otherwise values ``<= threshold`` (default: the median)
    form group 0 and the rest group 1.
    """
    row = np.asarray(row, dtype=float)
    values = np.unique(row)
    if threshold is None and values.size <= max_categories:
        return np.searchsorted(values, row).astype(np.int64)
    cut = float(np.median(row)) if threshold is None else float(threshold)
    return (row > cut).astype(np.int64)


def evaluate_selection(
    dataset: Dataset,
    selected: Sequence[int],
    c: Optional[int] = None,
    restarts: int = 50,
    seed: int = 0,
    metrics: Sequence[str] = METRICS,
    threshold: Optional[float] = None,
) -> EvalReport:
    """Cluster on the selected rows of x and average the metrics over restarts."""
    selected = [int(i) for i in selected]
    if not selected:
        raise DataError("no features selected")
    if min(selected) < 0 or max(selected) >= dataset.d:
        raise DataError(f"selected indices out of range for d={dataset.d}")
    unknown = set(metrics) - set(METRICS)
    if unknown:
        raise DataError(f"unknown metrics {sorted(unknown)}")
    need_labels = any(m in ("acc", "nmi") for m in metrics)
    if need_labels and dataset.labels is None:
        raise DataError("acc/nmi requested but the dataset has no labels")
    if c is None:
        c = dataset.n_clusters
    if c is None:
        raise DataError("number of clusters unknown: pass c or provide labels")

    groups = protected_groups(dataset.p_mat[0], threshold)
    runs = kmeans(dataset.x[selected], c, restarts, seed)
    per_restart = []
    for run in runs:
        row = {}
        if "acc" in metrics:
            row["acc"] = acc(run, dataset.labels)
        if "nmi" in metrics:
            row["nmi"] = nmi(run, dataset.labels)
        if "balance" in metrics:
            row["balance"] = balance(run, groups)
        if "proportion" in metrics:
            row["proportion"] = proportion(run, groups)
        per_restart.append(row)

    def mean(key):
        if key not in metrics:
            return None
        return math.fsum(r[key] for r in per_restart) / len(per_restart)

    return EvalReport(mean("acc"), mean("nmi"), mean("balance"), mean("proportion"), restarts, per_restart)
