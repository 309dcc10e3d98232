"""Synthetic knowledge bases for experiments and tests."""

from __future__ import annotations

import numpy as np

from .features import N_FEATURES
from .knowledge_base import Category, InstanceRecord, KnowledgeBase
from .metrics import RuntimeOutcome


def make_cluster_kb(n_records: int = 300, n_clusters: int = 3, cutoff: float = 1500.0,
                    spread: float = 0.05, seed: int = 0) -> KnowledgeBase:
    """Well-separated feature clusters, each owned by one specialist solver.

    Solver ``S<j>`` solves the instances of cluster ``j`` in U[1, 100]
    seconds and times out on every other cluster. Cluster centres sit on
    distinct orders of magnitude so both distances separate them.
    """
    rng = np.random.default_rng(seed)
    solvers = tuple(f"S{j}" for j in range(n_clusters))
    categories = list(Category)[:3]
    centres = [
        rng.uniform(0.5, 1.5, size=N_FEATURES) * 10.0 ** (2 * j) for j in range(n_clusters)
    ]
    records = []
    for i in range(n_records):
        j = i % n_clusters
        feats = np.clip(centres[j] * (1.0 + spread * rng.standard_normal(N_FEATURES)), 0.0, None)
        outcomes = {
            s: RuntimeOutcome.solved(float(rng.uniform(1.0, 100.0))) if js == j
            else RuntimeOutcome.timeout()
            for js, s in enumerate(solvers)
        }
        records.append(InstanceRecord(f"c{j}-{i:05d}", categories[j % 3], tuple(feats), outcomes))
    return KnowledgeBase(cutoff, solvers, tuple(records))


def make_random_kb(rng: np.random.Generator, max_records: int = 100, max_solvers: int = 6,
                   cutoff: float = 1500.0, integer_times: bool = True) -> KnowledgeBase:
    """A random KB with plenty of penalty ties.

    Integer solving times keep every penalty sum exact, and duplicated
    solver columns force global tie-breaks.
    """
    n = int(rng.integers(2, max_records + 1))
    s = int(rng.integers(1, max_solvers + 1))
    solvers = tuple(f"s{j}" for j in rng.permutation(s))
    X = rng.exponential(1.0, size=(n, N_FEATURES)) * 10.0 ** rng.uniform(-2, 3, size=N_FEATURES)
    if n > 3 and rng.random() < 0.3:
        X[1] = X[0]
    choices = np.array([t for t in (5.0, 10.0, 50.0, 100.0) if t < cutoff] + [cutoff])

    def draw():
        u = rng.random()
        if u < 0.3:
            return RuntimeOutcome.timeout()
        if u < 0.4:
            return RuntimeOutcome.failed()
        t = float(rng.choice(choices)) if integer_times else float(rng.uniform(0, cutoff))
        return RuntimeOutcome.solved(t)

    clone = s > 1 and rng.random() < 0.3
    records = []
    for i in range(n):
        outcomes = {sid: draw() for sid in solvers}
        if s > 1 and (clone or rng.random() < 0.3):
            outcomes[solvers[-1]] = outcomes[solvers[0]]
        if not any(o.is_solved for o in outcomes.values()):
            outcomes[solvers[int(rng.integers(s))]] = RuntimeOutcome.solved(float(rng.choice(choices)))
        cat = list(Category)[int(rng.integers(4))]
        records.append(InstanceRecord(f"i{i:04d}", cat, tuple(X[i]), outcomes))
    return KnowledgeBase(cutoff, solvers, tuple(records))
