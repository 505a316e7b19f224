"""Data model, CSV ingestion and the synthetic generator.

Matrices follow a column-per-instance layout: ``x`` is ``(d, n)`` and
``p_mat`` is ``(p, n)``. CSV files are the usual row-per-instance layout
and get transposed on the way in and out.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError

ROLES = ("utility", "sensitive", "noise")


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    p_mat: np.ndarray
    labels: Optional[np.ndarray] = None
    feature_names: Optional[list[str]] = None
    protected_names: Optional[list[str]] = None
    roles: Optional[list[str]] = None  # only set by the synthetic generator

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        p_mat = np.asarray(self.p_mat, dtype=float)
        if x.ndim != 2 or p_mat.ndim != 2:
            raise DataError("x and p_mat must be 2-D (features x instances)")
        if x.shape[0] < 1 or p_mat.shape[0] < 1:
            raise DataError("need at least one non-protected and one protected feature")
        if x.shape[1] != p_mat.shape[1]:
            raise DataError(
                f"x has {x.shape[1]} instances but p_mat has {p_mat.shape[1]}"
            )
        if x.shape[1] < 2:
            raise DataError("need at least 2 instances")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p_mat))):
            raise DataError("non-finite entries in data")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p_mat", p_mat)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (x.shape[1],):
                raise DataError("labels must have one entry per instance")
            if not np.issubdtype(labels.dtype, np.integer):
                if not np.all(labels == np.round(labels)):
                    raise DataError("labels must be integers")
            labels = labels.astype(np.int64)
            c = int(labels.max()) + 1
            if labels.min() < 0 or np.any(np.bincount(labels, minlength=c) == 0):
                raise DataError("labels must cover 0..c-1 with every id present")
            object.__setattr__(self, "labels", labels)
        if self.feature_names is not None and len(self.feature_names) != x.shape[0]:
            raise DataError("feature_names length must equal d")
        if self.protected_names is not None and len(self.protected_names) != p_mat.shape[0]:
            raise DataError("protected_names length must equal p")

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def d(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.p_mat.shape[0]

    @property
    def n_clusters(self) -> Optional[int]:
        if self.labels is None:
            return None
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 200
    n_utility: int = 10
    n_sensitive: int = 10
    n_noise: int = 10
    cluster_separation: float = 3.0
    sensitive_correlation: float = 0.9
    seed: int = 0
    # roles are laid out at randomly permuted indices unless this is False
    shuffle_features: bool = True

    def validate(self):
        d = self.n_utility + self.n_sensitive + self.n_noise
        if min(self.n_utility, self.n_sensitive, self.n_noise) < 0:
            raise DataError("feature counts must be non-negative")
        if d < 2:
            raise DataError(f"need d >= 2 features, got {d}")
        if self.n < 4:
            raise DataError(f"need n >= 4 instances, got {self.n}")
        if not self.cluster_separation > 0:
            raise DataError("cluster_separation must be > 0")
        if not 0.0 <= self.sensitive_correlation <= 1.0:
            raise DataError("sensitive_correlation must lie in [0, 1]")
        if self.seed < 0:
            raise DataError("seed must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def standardize_rows(a: np.ndarray) -> np.ndarray:
    """Z-score each row; constant rows become all zeros."""
    a = np.asarray(a, dtype=float)
    centered = a - a.mean(axis=1, keepdims=True)
    std = a.std(axis=1, keepdims=True)
    safe = np.where(std > 0, std, 1.0)
    out = centered / safe
    out[(std <= 0)[:, 0]] = 0.0
    return out


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {column!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}, column {column!r}: non-finite value {text!r}")
    return value


def load_csv(
    path,
    protected_columns: Sequence[str],
    label_column: Optional[str] = None,
    standardize: bool = True,
) -> Dataset:
    """Read a row-per-instance CSV into a :class:`Dataset`.

    Protected columns that do not parse as numbers are one-hot encoded
    (one row of ``p_mat`` per category, categories in sorted order). The
    label column may hold arbitrary tokens; they are mapped to 0..c-1 in
    sorted order.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(cell.strip() for cell in r)]

    protected_columns = list(protected_columns)
    if not protected_columns:
        raise DataError("at least one protected column is required")
    for name in protected_columns + ([label_column] if label_column else []):
        if name not in header:
            raise DataError(f"unknown column {name!r}; header has {header}")
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header")
    if len(rows) < 2:
        raise DataError(f"need at least 2 instances, got {len(rows)}")

    # row numbers in messages are 1-based file lines (header is line 1)
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise DataError(f"row {i + 2}: expected {len(header)} cells, got {len(r)}")

    col = {name: j for j, name in enumerate(header)}
    feature_cols = [h for h in header if h not in protected_columns and h != label_column]
    if not feature_cols:
        raise DataError("no non-protected feature columns left")

    x = np.array(
        [[_parse_float(r[col[name]].strip(), i + 2, name) for i, r in enumerate(rows)]
         for name in feature_cols]
    )

    p_rows, p_names = [], []
    for name in protected_columns:
        cells = [r[col[name]].strip() for r in rows]
        try:
            values = [float(c) for c in cells]
            numeric = all(math.isfinite(v) for v in values)
        except ValueError:
            numeric = False
        if numeric:
            p_rows.append(values)
            p_names.append(name)
        else:
            for cat in sorted(set(cells)):
                p_rows.append([1.0 if c == cat else 0.0 for c in cells])
                p_names.append(f"{name}={cat}")
    p_mat = np.array(p_rows)

    labels = None
    if label_column:
        tokens = [r[col[label_column]].strip() for r in rows]
        try:
            keys = [float(t) for t in tokens]
        except ValueError:
            keys = tokens
        uniq = sorted(set(keys))
        index = {u: i for i, u in enumerate(uniq)}
        labels = np.array([index[k] for k in keys], dtype=np.int64)

    if standardize:
        x = standardize_rows(x)
        p_mat = standardize_rows(p_mat)
    return Dataset(x, p_mat, labels, feature_cols, p_names)


def write_csv(dataset: Dataset, path, label_column: str = "label") -> None:
    """Write ``dataset`` as a row-per-instance CSV (inverse of :func:`load_csv`)."""
    feature_names = dataset.feature_names or [f"f{i}" for i in range(dataset.d)]
    protected_names = dataset.protected_names or [f"protected{i}" for i in range(dataset.p)]
    header = list(feature_names) + list(protected_names)
    if dataset.labels is not None:
        header.append(label_column)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for j in range(dataset.n):
            row = [repr(float(v)) for v in dataset.x[:, j]]
            row += [repr(float(v)) for v in dataset.p_mat[:, j]]
            if dataset.labels is not None:
                row.append(str(int(dataset.labels[j])))
            w.writerow(row)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Two balanced clusters plus a binary protected attribute drawn independently.

    Features come in three roles: utility (cluster mean at
    ``+-separation/2`` plus unit noise), sensitive (mixture of the +-1
    coded protected value and unit noise) and pure noise. The returned
    dataset is not standardized.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    d = spec.n_utility + spec.n_sensitive + spec.n_noise

    labels = rng.permutation(np.arange(n) % 2)
    protected = rng.permutation(np.arange(n) % 2)
    signs = 2.0 * labels - 1.0
    coded = 2.0 * protected - 1.0

    utility = signs * (spec.cluster_separation / 2) + rng.standard_normal((spec.n_utility, n))
    rho = spec.sensitive_correlation
    sensitive = rho * coded + (1.0 - rho) * rng.standard_normal((spec.n_sensitive, n))
    noise = rng.standard_normal((spec.n_noise, n))

    roles = ["utility"] * spec.n_utility + ["sensitive"] * spec.n_sensitive + ["noise"] * spec.n_noise
    x = np.vstack([utility, sensitive, noise])
    if spec.shuffle_features:
        order = rng.permutation(d)
        x = x[order]
        roles = [roles[i] for i in order]

    return Dataset(
        x=x,
        p_mat=protected[None, :].astype(float),
        labels=labels.astype(np.int64),
        feature_names=[f"f{i}" for i in range(d)],
        protected_names=["protected"],
        roles=roles,
    )


def synthetic_standardized(spec: SyntheticSpec) -> Dataset:
    """Generated data with the same z-scoring ``load_csv`` applies by default."""
    ds = generate_synthetic(spec)
    return Dataset(
        standardize_rows(ds.x), standardize_rows(ds.p_mat), ds.labels,
        ds.feature_names, ds.protected_names, ds.roles,
    )


def roles_json(dataset: Dataset) -> str:
    if dataset.roles is None:
        raise DataError("dataset carries no role metadata")
    return json.dumps({"roles": list(dataset.roles)})


def indices_with_role(dataset: Dataset, role: str) -> list[int]:
    return [i for i, r in enumerate(dataset.roles or []) if r == role]
