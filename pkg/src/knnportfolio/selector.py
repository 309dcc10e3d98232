"""k-nearest-neighbour solver selection.

For a query feature vector the ``k`` closest training instances are found
and the solver whose summed PAR10 penalty over them is smallest wins.
Solvers tied on that neighbourhood are separated by their penalty on the
whole training set; any remaining tie goes to the smallest solver id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import EmptyKnowledgeBase, KTooLarge
from .knowledge_base import KnowledgeBase, neighbor_order
from .metrics import PAR_FACTOR, DistanceKind, DistanceVariant

DEFAULT_K = 9
DEFAULT_DISTANCE = "argosmart"


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one selection, with the full decision trace.

    ``tie_set`` holds every solver attaining the minimal neighbourhood
    penalty; ``final_tie_set`` the subset that is also best on the whole
    training set (equal to ``tie_set`` when no global tie-break ran).
    """

    chosen_solver: str
    neighborhood: Tuple[Tuple[str, float], ...]
    neighborhood_penalty: Dict[str, float]
    tie_set: Tuple[str, ...]
    global_tiebreak_used: bool
    final_tie_set: Tuple[str, ...]
    global_penalty: Optional[Dict[str, float]] = None

    def trace_lines(self) -> List[str]:
        lines = [f"chosen\t{self.chosen_solver}"]
        for iid, d in self.neighborhood:
            lines.append(f"neighbor\t{iid}\t{d!r}")
        for s, p in self.neighborhood_penalty.items():
            lines.append(f"penalty\t{s}\t{p!r}")
        lines.append("tie_set\t" + ",".join(self.tie_set))
        lines.append(f"global_tiebreak_used\t{str(self.global_tiebreak_used).lower()}")
        if self.global_penalty:
            for s, p in self.global_penalty.items():
                lines.append(f"global_penalty\t{s}\t{p!r}")
        lines.append("final_tie_set\t" + ",".join(self.final_tie_set))
        return lines


def column_fsum(P: np.ndarray, rows) -> List[float]:
    """Exactly rounded column sums of ``P`` over ``rows`` (order independent)."""
    sub = P[rows]
    return [math.fsum(sub[:, j]) for j in range(P.shape[1])]


def choose(solvers: Sequence[str], neighborhood_penalty: Sequence[float],
           global_penalty: Callable[[], Sequence[float]]):
    """Apply the argmin and tie rules; returns (chosen, ties, used, final, global)."""
    best = min(neighborhood_penalty)
    ties = [j for j, p in enumerate(neighborhood_penalty) if p == best]
    if len(ties) == 1:
        return ties[0], ties, False, ties, None
    g = global_penalty()
    gbest = min(g[j] for j in ties)
    final = [j for j in ties if g[j] == gbest]
    chosen = min(final, key=lambda j: solvers[j])
    return chosen, ties, True, final, g


class KNNPortfolio(BaseEstimator):
    """k-NN algorithm selector with a scikit-learn style interface.

    Parameters
    ----------
    k : int, default=9
        Number of neighbours whose penalties are summed.
    distance : {'argosmart', 'euclidean'}, default='argosmart'
        ``'euclidean'`` scales every feature to [0, 1] with the training
        minima and maxima before taking the Euclidean norm.
    cutoff : float, default=1500.0
        Time limit used to turn runtimes into PAR10 penalties.

    Attributes
    ----------
    solvers_ : ndarray of str
    features_ : ndarray of shape (n_instances, n_features)
    penalties_ : ndarray of shape (n_instances, n_solvers)
    instance_ids_ : ndarray of str
    distance_ : DistanceKind

    Examples
    --------
    >>> import numpy as np
    >>> X = np.array([[0.0, 0.0], [0.1, 0.0], [10.0, 10.0]])
    >>> runtimes = np.array([[10.0, np.inf], [20.0, np.inf], [np.inf, 5.0]])
    >>> sel = KNNPortfolio(k=2).fit(X, runtimes, solvers=["A", "B"])
    >>> sel.predict([[0.05, 0.0], [10.0, 10.0]]).tolist()
    ['A', 'B']
    """

    def __init__(self, k=DEFAULT_K, distance=DEFAULT_DISTANCE, cutoff=1500.0):
        self.k = k
        self.distance = distance
        self.cutoff = cutoff

    def fit(self, X, y, solvers=None, instance_ids=None):
        """Fit from a feature matrix and a runtime matrix.

        ``y[i, j]`` is the runtime of solver ``j`` on instance ``i``; NaN,
        infinite or above-cutoff entries count as unsolved. Ties between
        equidistant neighbours follow row order.
        """
        columns = getattr(y, "columns", None)
        X = check_array(X, dtype=np.float64)
        y = check_array(y, dtype=np.float64, ensure_all_finite=False)
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if (X < 0).any():
            raise ValueError("features must be non-negative")
        if (y < 0).any():
            raise ValueError("runtimes must be non-negative")
        cutoff = self._checked_cutoff()
        unsolved = ~np.isfinite(y) | (y > cutoff)
        penalties = np.where(unsolved, PAR_FACTOR * cutoff, y)
        if solvers is None:
            solvers = list(columns) if columns is not None else [str(j) for j in range(y.shape[1])]
        self.cutoff_ = cutoff
        return self._set_state(
            X, penalties, list(map(str, solvers)),
            instance_ids if instance_ids is not None else [str(i) for i in range(X.shape[0])],
            None,
        )

    def fit_kb(self, kb: KnowledgeBase, dist: Optional[DistanceKind] = None):
        """Fit directly from a KnowledgeBase, using its cutoff and penalties.

        ``dist`` overrides the ``distance`` parameter (and its scaling bounds).
        The ``cutoff`` parameter is ignored in favour of the KB's own.
        """
        if not kb.records:
            raise EmptyKnowledgeBase("knowledge base has no records")
        self.cutoff_ = kb.cutoff_seconds
        X = kb.feature_matrix
        return self._set_state(X, kb.penalty_matrix, list(kb.solvers), list(kb.instance_ids),
                               dist, kb.global_penalties)

    def _checked_cutoff(self) -> float:
        cutoff = float(self.cutoff)
        if not cutoff > 0:
            raise ValueError(f"cutoff must be positive, got {self.cutoff!r}")
        return cutoff

    def _set_state(self, X, penalties, solvers, instance_ids, dist, global_penalties=None):
        if len(solvers) != penalties.shape[1]:
            raise ValueError("one solver name per runtime column required")
        if len(instance_ids) != X.shape[0]:
            raise ValueError("one instance id per row required")
        if X.shape[0] == 0:
            raise EmptyKnowledgeBase("no training instances")
        self.features_ = X
        self.penalties_ = penalties
        self.solvers_ = np.asarray(solvers, dtype=object)
        self.instance_ids_ = np.asarray(instance_ids, dtype=object)
        self.distance_ = dist if dist is not None else DistanceKind.for_features(self.distance, X)
        if global_penalties is None:
            global_penalties = column_fsum(penalties, slice(None))
        self.global_penalties_ = np.array(global_penalties)
        self.n_features_in_ = X.shape[1]
        return self

    def _checked_k(self, k=None) -> int:
        k = int(self.k if k is None else k)
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if k > self.features_.shape[0]:
            raise KTooLarge(f"k={k} exceeds the {self.features_.shape[0]} training instances")
        return k

    def _query(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64)
        if f.shape != (self.n_features_in_,):
            raise ValueError(f"query needs {self.n_features_in_} features, got shape {f.shape}")
        if not np.isfinite(f).all() or (f < 0).any():
            raise ValueError("query features must be finite and non-negative")
        return f

    def kneighbors(self, X, n_neighbors=None, return_distance=True):
        check_is_fitted(self, "features_")
        k = self._checked_k(n_neighbors)
        X = check_array(X, dtype=np.float64)
        dists, idx = [], []
        for f in X:
            order, d = neighbor_order(self.features_, self._query(f), self.distance_)
            idx.append(order[:k])
            dists.append(d[:k])
        idx = np.array(idx)
        return (np.array(dists), idx) if return_distance else idx

    def select(self, f) -> SelectionResult:
        """Choose a solver for one feature vector, keeping the decision trace."""
        check_is_fitted(self, "features_")
        k = self._checked_k()
        order, d = neighbor_order(self.features_, self._query(f), self.distance_)
        nbrs = order[:k]
        neigh = column_fsum(self.penalties_, nbrs)
        solvers = list(self.solvers_)
        chosen, ties, used, final, g = choose(solvers, neigh, lambda: self.global_penalties_)
        return SelectionResult(
            chosen_solver=solvers[chosen],
            neighborhood=tuple((self.instance_ids_[i], float(di)) for i, di in zip(nbrs, d[:k])),
            neighborhood_penalty=dict(zip(solvers, neigh)),
            tie_set=tuple(solvers[j] for j in ties),
            global_tiebreak_used=used,
            final_tie_set=tuple(solvers[j] for j in final),
            global_penalty=None if g is None else {solvers[j]: float(g[j]) for j in ties},
        )

    def rank(self, f) -> List[Tuple[str, float]]:
        """All solvers by neighbourhood penalty, then global penalty, then id."""
        check_is_fitted(self, "features_")
        k = self._checked_k()
        order, _ = neighbor_order(self.features_, self._query(f), self.distance_)
        neigh = column_fsum(self.penalties_, order[:k])
        solvers = list(self.solvers_)
        keys = sorted(range(len(solvers)),
                      key=lambda j: (neigh[j], self.global_penalties_[j], solvers[j]))
        return [(solvers[j], neigh[j]) for j in keys]

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "features_")
        X = check_array(X, dtype=np.float64)
        return np.array([self.select(f).chosen_solver for f in X], dtype=object)


def _fitted(kb: KnowledgeBase, k: int, dist) -> KNNPortfolio:
    if not kb.records:
        raise EmptyKnowledgeBase("knowledge base has no records")
    est = KNNPortfolio(k=k)
    return est.fit_kb(kb, kb.distance(dist))


def select_solver(kb: KnowledgeBase, f, k: int = DEFAULT_K,
                  dist=DistanceVariant.ARGOSMART) -> SelectionResult:
    """Select a solver for feature vector ``f`` against the knowledge base."""
    return _fitted(kb, k, dist).select(f)


def rank_solvers(kb: KnowledgeBase, f, k: int = DEFAULT_K,
                 dist=DistanceVariant.ARGOSMART) -> List[Tuple[str, float]]:
    return _fitted(kb, k, dist).rank(f)
