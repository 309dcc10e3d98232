"""Leave-one-out evaluation, k / distance sweeps and summary reports.

Selections are simulated: the held-out instance's recorded outcome for the
chosen solver is what the portfolio "achieves", and no solver is started.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exceptions import KTooLarge
from .knowledge_base import Category, KnowledgeBase, neighbor_order
from .metrics import DistanceKind, DistanceVariant, RuntimeOutcome, par10
from .selector import choose

CATEGORY_ORDER = (Category.RANDOM, Category.CRAFTED, Category.INDUSTRIAL, Category.UNKNOWN)


@dataclass(frozen=True)
class LooResult:
    instance_id: str
    category: Category
    chosen_solver: str
    outcome: RuntimeOutcome


def _variant(dist) -> DistanceVariant:
    return DistanceVariant.parse(dist)


def _loo_chunk(kb: KnowledgeBase, variant: DistanceVariant, ks: Sequence[int],
               indices: Sequence[int]) -> Dict[int, List[int]]:
    """Chosen solver index per k for each held-out record in ``indices``."""
    X = kb.feature_matrix
    P = kb.penalty_matrix
    n = len(kb)
    solvers = kb.solvers
    kmax = max(ks)
    out: Dict[int, List[int]] = {k: [] for k in ks}
    for r in indices:
        rest = np.delete(np.arange(n), r)
        X_rest = X[rest]
        dist = DistanceKind.for_features(variant, X_rest)
        order, _ = neighbor_order(X_rest, X[r], dist)
        top = rest[order[:kmax]]
        cache = []

        def global_pen():
            if not cache:
                cache.append([math.fsum(P[rest, j]) for j in range(P.shape[1])])
            return cache[0]

        for k in ks:
            sub = P[top[:k]]
            neigh = [math.fsum(sub[:, j]) for j in range(sub.shape[1])]
            out[k].append(choose(solvers, neigh, global_pen)[0])
    return out


def _loo_choices(kb: KnowledgeBase, variant: DistanceVariant, ks: Sequence[int],
                 jobs: int = 1) -> Dict[int, List[int]]:
    n = len(kb)
    for k in ks:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if n < k + 1:
            raise KTooLarge(f"leave-one-out with k={k} needs at least {k + 1} records, have {n}")
    if jobs <= 1 or n < 2 * jobs:
        return _loo_chunk(kb, variant, ks, range(n))
    bounds = np.linspace(0, n, jobs + 1).astype(int)
    chunks = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    merged: Dict[int, List[int]] = {k: [] for k in ks}
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for part in pool.map(_loo_chunk, [kb] * len(chunks), [variant] * len(chunks),
                             [list(ks)] * len(chunks), chunks):
            for k in ks:
                merged[k].extend(part[k])
    return merged


def leave_one_out(kb: KnowledgeBase, k: int = 9, dist=DistanceVariant.ARGOSMART,
                  jobs: int = 1) -> List[LooResult]:
    """Select for every record using the KB without that record.

    For the scaled Euclidean distance the scaling bounds are recomputed on
    the reduced KB as well, so the held-out record never influences its own
    selection.
    """
    choices = _loo_choices(kb, _variant(dist), [int(k)], jobs)[int(k)]
    return [
        LooResult(rec.instance_id, rec.category, kb.solvers[j], rec.outcomes[kb.solvers[j]])
        for rec, j in zip(kb.records, choices)
    ]


def sweep(kb: KnowledgeBase, k_range: Iterable[int] = range(1, 31),
          distances: Iterable = (DistanceVariant.ARGOSMART, DistanceVariant.SCALED_EUCLIDEAN),
          jobs: int = 1) -> Dict[Tuple[str, int], int]:
    """Leave-one-out solved counts keyed by (distance name, k)."""
    ks = sorted(set(int(k) for k in k_range))
    table: Dict[Tuple[str, int], int] = {}
    for dist in distances:
        variant = _variant(dist)
        choices = _loo_choices(kb, variant, ks, jobs)
        for k in ks:
            table[(variant.value, k)] = sum(
                rec.outcomes[kb.solvers[j]].is_solved for rec, j in zip(kb.records, choices[k])
            )
    return table


def sweep_csv(table: Mapping[Tuple[str, int], int]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["distance", "k", "solved"])
    for (name, k), solved in sorted(table.items()):
        w.writerow([name, k, solved])
    return out.getvalue()


def sweep_matrix(table: Mapping[Tuple[str, int], int]) -> str:
    """Plot-ready layout: one row per k, one column per distance."""
    names = sorted({name for name, _ in table})
    ks = sorted({k for _, k in table})
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["k"] + names)
    for k in ks:
        w.writerow([k] + [table.get((name, k), "") for name in names])
    return out.getvalue()


# -- aggregate rows ---------------------------------------------------------

def median_time(times: Sequence[float]) -> float:
    """Median over all instances with unsolved ones as +inf."""
    if not times:
        return math.nan
    s = sorted(times)
    n = len(s)
    mid = n // 2
    if n % 2:
        return s[mid]
    a, b = s[mid - 1], s[mid]
    if math.isinf(a) or math.isinf(b):
        return math.inf
    return (a + b) / 2.0


def format_median(value: float, cutoff: float) -> str:
    if math.isinf(value):
        return f">{cutoff:g}s"
    if math.isnan(value):
        return "-"
    return f"{value:.2f}s"


@dataclass(frozen=True)
class PolicyRow:
    name: str
    solved: int
    solved_by_category: Dict[Category, int]
    median_seconds: float
    par10_total: float
    n_instances: int
    median_with_features: Optional[float] = None


def policy_row(name: str, kb: KnowledgeBase, outcomes: Sequence[RuntimeOutcome],
               feature_times: Optional[Mapping[str, float]] = None) -> PolicyRow:
    """Aggregate per-instance outcomes, aligned with ``kb.records``."""
    by_cat = {c: 0 for c in CATEGORY_ORDER}
    times = []
    for rec, o in zip(kb.records, outcomes):
        if o.is_solved:
            by_cat[rec.category] += 1
            times.append(o.time_seconds)
        else:
            times.append(math.inf)
    with_features = None
    if feature_times is not None:
        with_features = median_time([
            t + feature_times.get(rec.instance_id, 0.0) for rec, t in zip(kb.records, times)
        ])
    return PolicyRow(
        name=name,
        solved=sum(by_cat.values()),
        solved_by_category=by_cat,
        median_seconds=median_time(times),
        par10_total=math.fsum(par10(o, kb.cutoff_seconds) for o in outcomes),
        n_instances=len(outcomes),
        median_with_features=with_features,
    )


def vbs(kb: KnowledgeBase) -> Tuple[List[RuntimeOutcome], PolicyRow]:
    """Virtual best solver: the fastest solved outcome on each instance."""
    best = []
    for rec in kb.records:
        solved = [o for o in rec.outcomes.values() if o.is_solved]
        best.append(min(solved, key=lambda o: o.time_seconds))
    return best, policy_row("VBS", kb, best)


def solver_row(kb: KnowledgeBase, solver: str) -> PolicyRow:
    return policy_row(solver, kb, [rec.outcomes[solver] for rec in kb.records])


def policy_name(dist, k: int) -> str:
    return f"{_variant(dist).value} k={k}"


@dataclass
class EvalReport:
    rows: List[PolicyRow]
    vbs_row: PolicyRow
    cutoff: float
    sweep: Dict[Tuple[str, int], int] = field(default_factory=dict)
    per_instance: Dict[str, List[LooResult]] = field(default_factory=dict)

    def text(self) -> str:
        header = ["policy", "solved", "RND", "CRF", "IND", "UNK", "median", "PAR10"]
        body = []
        for row in self.rows + [self.vbs_row]:
            c = row.solved_by_category
            body.append([
                row.name, str(row.solved),
                str(c[Category.RANDOM]), str(c[Category.CRAFTED]),
                str(c[Category.INDUSTRIAL]), str(c[Category.UNKNOWN]),
                format_median(row.median_seconds, self.cutoff),
                f"{row.par10_total:.1f}",
            ])
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        fmt = lambda r: "  ".join(  # noqa: E731
            cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths))
        )
        return "\n".join([fmt(header)] + [fmt(r) for r in body]) + "\n"

    def csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["policy", "solved", "random", "crafted", "industrial", "unknown",
                    "median_seconds", "median_seconds_with_features", "par10_total", "instances"])
        for row in self.rows + [self.vbs_row]:
            c = row.solved_by_category
            w.writerow([
                row.name, row.solved, c[Category.RANDOM], c[Category.CRAFTED],
                c[Category.INDUSTRIAL], c[Category.UNKNOWN],
                repr(row.median_seconds),
                "" if row.median_with_features is None else repr(row.median_with_features),
                repr(row.par10_total), row.n_instances,
            ])
        return out.getvalue()


def report(kb: KnowledgeBase, policies: Iterable[Tuple[object, int]] = ((DistanceVariant.ARGOSMART, 9),),
           include_solvers: bool = True,
           feature_times: Optional[Mapping[str, float]] = None,
           jobs: int = 1) -> EvalReport:
    """One row per (distance, k) portfolio policy, per single solver, and VBS.

    ``feature_times`` (instance id to seconds) fills the with-features median
    column of portfolio rows; the KB itself carries no feature timings.
    """
    rows = []
    per_instance = {}
    for dist, k in policies:
        name = policy_name(dist, k)
        loo = leave_one_out(kb, k, dist, jobs=jobs)
        per_instance[name] = loo
        rows.append(policy_row(name, kb, [r.outcome for r in loo], feature_times))
    if include_solvers:
        rows.extend(solver_row(kb, s) for s in kb.solvers)
    _, vrow = vbs(kb)
    return EvalReport(rows=rows, vbs_row=vrow, cutoff=kb.cutoff_seconds, per_instance=per_instance)
