"""Sparse classification data: svmlight-style text files and logistic losses."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.special import expit
from sklearn.datasets import dump_svmlight_file, make_classification

from lcpg.errors import DatasetParseError
from lcpg.problem import SmoothOracle

logger = logging.getLogger(__name__)

# covtype is turned into "class 3 versus the rest"
DEFAULT_POSITIVE_CLASS = "3"


@dataclass(frozen=True, eq=False)
class SparseDataset:
    X: sp.csr_matrix
    y: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _map_labels(raw, positive_class: Optional[str]) -> np.ndarray:
    values = np.array([float(v) for v in raw])
    distinct = set(values.tolist())
    if positive_class is None and distinct <= {-1.0, 1.0}:
        return values
    if positive_class is None and distinct <= {0.0, 1.0}:
        return np.where(values > 0, 1.0, -1.0)
    target = float(positive_class if positive_class is not None else DEFAULT_POSITIVE_CLASS)
    return np.where(values == target, 1.0, -1.0)


def load_sparse_dataset(path: Union[str, Path], positive_class: Optional[str] = None,
                        n_features: Optional[int] = None) -> SparseDataset:
    """Parse ``<label> <idx>:<value> ...`` lines with 1-based increasing indices.

    Labels in {-1, +1} are kept, {0, 1} maps 0 to -1, and anything else is
    one-versus-rest on ``positive_class``.
    """
    labels, data, indices, indptr = [], [], [], [0]
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            tokens = body.split()
            try:
                float(tokens[0])
            except ValueError:
                raise DatasetParseError(f"bad label {tokens[0]!r}", line_number) from None
            labels.append(tokens[0])
            last = 0
            for token in tokens[1:]:
                idx_text, sep, value_text = token.partition(":")
                try:
                    idx, value = int(idx_text), float(value_text)
                except ValueError:
                    raise DatasetParseError(f"bad feature {token!r}", line_number) from None
                if not sep or idx < 1:
                    raise DatasetParseError(f"bad feature {token!r}", line_number)
                if idx <= last:
                    raise DatasetParseError("feature indices must be strictly increasing", line_number)
                last = idx
                indices.append(idx - 1)
                data.append(value)
            indptr.append(len(indices))
    if not labels:
        raise DatasetParseError(f"{path} holds no instances")

    d = max(indices, default=-1) + 1
    if n_features is not None:
        if n_features < d:
            raise DatasetParseError(f"found feature {d} but n_features={n_features}")
        d = n_features
    X = sp.csr_matrix((np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64),
                       np.asarray(indptr, dtype=np.int64)), shape=(len(labels), d))
    y = _map_labels(labels, positive_class)
    logger.info("loaded %s: n=%d d=%d nnz=%d positives=%d", path, X.shape[0], d, X.nnz,
                int(np.sum(y > 0)))
    return SparseDataset(X, y)


def write_sparse_dataset(dataset: SparseDataset, path: Union[str, Path]) -> None:
    dump_svmlight_file(dataset.X, dataset.y, str(path), zero_based=False)


def synthetic_classification(n_samples: int, n_features: int, seed: int = 0,
                             n_informative: Optional[int] = None) -> SparseDataset:
    informative = n_informative or max(1, min(10, n_features // 2))
    X, y = make_classification(n_samples=n_samples, n_features=n_features,
                               n_informative=informative,
                               n_redundant=min(2, n_features - informative),
                               random_state=seed)
    return SparseDataset(sp.csr_matrix(X), np.where(y > 0, 1.0, -1.0))


def logistic_oracle(dataset: SparseDataset) -> SmoothOracle:
    """Finite sum of f_i(x) = log(1 + exp(-b_i a_i'x)), with L0 = max_i ||a_i||^2 / 4."""
    X, y = dataset.X, dataset.y
    n = dataset.n
    row_sq = np.asarray(X.multiply(X).sum(axis=1)).reshape(-1)

    def component_fn(i, x):
        row = X.getrow(i)
        z = y[i] * float(row @ x)
        grad = np.asarray(row.T.toarray()).reshape(-1) * (-y[i] * expit(-z))
        return float(np.logaddexp(0.0, -z)), grad

    def batch_fn(idx, x):
        rows = X[idx]
        z = y[idx] * (rows @ x)
        return np.asarray(rows.T @ (-y[idx] * expit(-z))).reshape(-1) / len(idx)

    def full_fn(x):
        z = y * (X @ x)
        grad = np.asarray(X.T @ (-y * expit(-z))).reshape(-1) / n
        return float(np.mean(np.logaddexp(0.0, -z))), grad

    return SmoothOracle(full_fn, dataset.d, component_fn=component_fn, n_components=n,
                        batch_fn=batch_fn, smoothness=float(np.max(row_sq, initial=0.0)) / 4.0)
