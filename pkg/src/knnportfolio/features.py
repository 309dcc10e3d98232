"""The 29 syntactic SATzilla-style instance features.

All features come from a handful of ``np.bincount`` passes over the flat
literal array, so extraction is linear in the number of literal
occurrences.

Index layout (0-based here, the usual 1-based numbering in the names):

====== =========================================================
0-2    clause count, variable count, variables / clauses
3-7    variable-node degree: mean, vc, min, max, entropy
8-12   clause-node degree (clause length): mean, vc, min, max, entropy
13-15  per-clause positive literal fraction: mean, vc, entropy
16-20  per-variable positive occurrence fraction: mean, vc, min, max, entropy
21-22  fraction of binary and of ternary clauses
23     fraction of Horn clauses
24-28  per-variable occurrences inside Horn clauses: mean, vc, min, max, entropy
====== =========================================================
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .dimacs import CnfInstance, parse_file
from .exceptions import EmptySampleSet

N_FEATURES = 29
ENTROPY_BINS = 100

FEATURE_NAMES = (
    "f01_num_clauses",
    "f02_num_vars",
    "f03_vars_clauses_ratio",
    "f04_var_degree_mean",
    "f05_var_degree_vc",
    "f06_var_degree_min",
    "f07_var_degree_max",
    "f08_var_degree_entropy",
    "f09_clause_degree_mean",
    "f10_clause_degree_vc",
    "f11_clause_degree_min",
    "f12_clause_degree_max",
    "f13_clause_degree_entropy",
    "f14_clause_pos_ratio_mean",
    "f15_clause_pos_ratio_vc",
    "f16_clause_pos_ratio_entropy",
    "f17_var_pos_ratio_mean",
    "f18_var_pos_ratio_vc",
    "f19_var_pos_ratio_min",
    "f20_var_pos_ratio_max",
    "f21_var_pos_ratio_entropy",
    "f22_binary_fraction",
    "f23_ternary_fraction",
    "f24_horn_fraction",
    "f25_horn_occ_mean",
    "f26_horn_occ_vc",
    "f27_horn_occ_min",
    "f28_horn_occ_max",
    "f29_horn_occ_entropy",
)

# KB / CSV column names
FEATURE_COLUMNS = tuple(f"f{i:02d}" for i in range(1, N_FEATURES + 1))


@dataclass(frozen=True)
class StatSummary:
    mean: float
    variation_coefficient: float
    min: float
    max: float
    entropy: float


def _entropy_from_counts(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum()) + 0.0


def entropy(samples, binned: bool = False) -> float:
    """Shannon entropy (nats) of the empirical value distribution.

    With ``binned`` the samples are taken to lie in [0, 1] and are grouped
    into 100 equal-width bins, ``floor(100 * x)`` with 1.0 in the last bin.
    Otherwise every distinct value is its own outcome.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise EmptySampleSet("entropy of an empty sample set")
    if binned:
        idx = np.clip(np.floor(x * ENTROPY_BINS).astype(np.int64), 0, ENTROPY_BINS - 1)
        counts = np.bincount(idx, minlength=ENTROPY_BINS)
    else:
        _, counts = np.unique(x, return_counts=True)
    return _entropy_from_counts(counts)


def summarize(samples, binned: bool = False) -> StatSummary:
    """Mean, population variation coefficient, min, max and entropy.

    The variation coefficient of an all-zero sample is 0 by convention.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise EmptySampleSet("cannot summarize an empty sample set")
    if not np.isfinite(x).all():
        raise ValueError("samples must be finite")
    lo, hi = float(x.min()), float(x.max())
    # rounding can push the mean of a near-constant sample past its bounds
    mean = min(max(float(x.mean()), lo), hi)
    std = float(x.std())
    vc = std / mean if mean != 0.0 else 0.0
    return StatSummary(
        mean=mean,
        variation_coefficient=abs(vc),
        min=lo,
        max=hi,
        entropy=entropy(x, binned=binned),
    )


def _full(s: StatSummary):
    return [s.mean, s.variation_coefficient, s.min, s.max, s.entropy]


def extract_features(instance: CnfInstance) -> np.ndarray:
    """Return the 29-entry float64 feature vector of ``instance``."""
    lits = instance.literals
    lengths = instance.clause_lengths
    n_vars = instance.num_vars
    n_clauses = lengths.size

    var = np.abs(lits) - 1
    positive = lits > 0
    clause_of = np.repeat(np.arange(n_clauses), lengths)

    var_degree = np.bincount(var, minlength=n_vars)
    var_pos = np.bincount(var[positive], minlength=n_vars)
    clause_pos = np.bincount(clause_of[positive], minlength=n_clauses)

    clause_ratio = clause_pos / lengths
    var_ratio = np.zeros(n_vars)
    np.divide(var_pos, var_degree, out=var_ratio, where=var_degree > 0)

    horn = clause_pos <= 1
    horn_occ = np.bincount(var[horn[clause_of]], minlength=n_vars)

    ratio = summarize(clause_ratio, binned=True)
    out = [float(n_clauses), float(n_vars), n_vars / n_clauses]
    out += _full(summarize(var_degree))
    out += _full(summarize(lengths))
    out += [ratio.mean, ratio.variation_coefficient, ratio.entropy]
    out += _full(summarize(var_ratio, binned=True))
    out += [
        float(np.count_nonzero(lengths == 2)) / n_clauses,
        float(np.count_nonzero(lengths == 3)) / n_clauses,
        float(np.count_nonzero(horn)) / n_clauses,
    ]
    out += _full(summarize(horn_occ))
    return np.array(out, dtype=np.float64)


def check_feature_vector(f) -> np.ndarray:
    """Validate shape, finiteness and non-negativity; return a float64 copy."""
    arr = np.array(f, dtype=np.float64)
    if arr.shape != (N_FEATURES,):
        raise ValueError(f"feature vector must have {N_FEATURES} entries, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("feature vector has non-finite entries")
    if (arr < 0).any():
        raise ValueError("feature vector has negative entries")
    return arr


class FeatureExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer from CNF instances (or file paths) to features.

    >>> from knnportfolio.dimacs import CnfInstance
    >>> FeatureExtractor().transform([CnfInstance(3, [[1, -2], [2, 3, -1]])])[0, :3]
    array([2. , 3. , 1.5])
    """

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        rows = []
        for item in X:
            if not isinstance(item, CnfInstance):
                item = parse_file(os.fspath(item))
            rows.append(extract_features(item))
        return np.vstack(rows) if rows else np.empty((0, N_FEATURES))

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURE_NAMES, dtype=object)

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = False
        return tags
