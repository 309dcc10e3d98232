import csv
import io
import math

import numpy as np
import pytest

import oracles
from helpers import S, T, record, vec
from knnportfolio.evaluator import (
    format_median,
    leave_one_out,
    median_time,
    report,
    sweep,
    sweep_csv,
    sweep_matrix,
    vbs,
)
from knnportfolio.exceptions import KTooLarge
from knnportfolio.knowledge_base import Category, InstanceRecord, KnowledgeBase
from knnportfolio.metrics import DistanceVariant
from knnportfolio.selector import select_solver
from knnportfolio.synthetic import make_cluster_kb, make_random_kb


@pytest.fixture(scope="module")
def cluster_kb():
    return make_cluster_kb(n_records=90, seed=3)


def dominant_kb(n=12):
    return KnowledgeBase(1500, ("fast", "slow"), tuple(
        record(f"r{i:02d}", vec(float(i), float(i % 3)), fast=S(1.0 + i), slow=S(100.0 + i))
        for i in range(n)))


def test_dominant_solver_everywhere():
    kb = dominant_kb()
    results = leave_one_out(kb, 3)
    assert {r.chosen_solver for r in results} == {"fast"}
    assert sum(r.outcome.is_solved for r in results) == len(kb)


def test_loo_matches_selection_on_reduced_kb():
    rng = np.random.default_rng(17)
    for _ in range(15):
        kb = make_random_kb(rng, max_records=40)
        if len(kb) < 3:
            continue
        k = int(rng.integers(1, len(kb)))
        for variant in DistanceVariant:
            got = [r.chosen_solver for r in leave_one_out(kb, k, variant)]
            want = []
            for i, rec in enumerate(kb.records):
                rest = kb.without(i)
                want.append(oracles.select(rest.records, kb.solvers, kb.cutoff_seconds,
                                           rec.features, k, variant.value)[0])
                assert select_solver(rest, rec.features, k, variant).chosen_solver == want[-1]
            assert got == want


def test_k_is_all_but_one():
    rng = np.random.default_rng(23)
    kb = make_random_kb(rng, max_records=30)
    n = len(kb)
    got = [r.chosen_solver for r in leave_one_out(kb, n - 1)]
    for i, rec in enumerate(kb.records):
        rest = kb.without(i)
        assert got[i] == oracles.select(rest.records, kb.solvers, kb.cutoff_seconds,
                                        rec.features, n - 1, "argosmart")[0]


def test_held_out_outcomes_are_not_consulted():
    rng = np.random.default_rng(31)
    kb = make_random_kb(rng, max_records=40)
    base = leave_one_out(kb, 3)
    for i, rec in enumerate(kb.records):
        flipped = {s: (T if o.is_solved else S(1.0)) for s, o in rec.outcomes.items()}
        if not any(o.is_solved for o in flipped.values()):
            flipped[kb.solvers[0]] = S(2.0)
        records = list(kb.records)
        records[i] = InstanceRecord(rec.instance_id, rec.category, rec.features, flipped)
        mutated = KnowledgeBase(kb.cutoff_seconds, kb.solvers, tuple(records))
        assert leave_one_out(mutated, 3)[i].chosen_solver == base[i].chosen_solver


def test_loo_k_too_large(three_kb):
    with pytest.raises(KTooLarge):
        leave_one_out(three_kb, 3)


def test_cluster_kb_loo(cluster_kb):
    solved = sum(r.outcome.is_solved for r in leave_one_out(cluster_kb, 3))
    assert solved == len(cluster_kb)
    best_single = max(sum(r.outcomes[s].is_solved for r in cluster_kb.records)
                      for s in cluster_kb.solvers)
    assert best_single == len(cluster_kb) // 3


def test_sweep_flat_for_dominant_solver():
    table = sweep(dominant_kb(), range(1, 8), [DistanceVariant.ARGOSMART])
    assert set(table.values()) == {12}
    assert sorted(table) == [("argosmart", k) for k in range(1, 8)]


def test_sweep_cluster_small_k_beats_huge_k(cluster_kb):
    n = len(cluster_kb)
    table = sweep(cluster_kb, [3, n - 1])
    for name in ("argosmart", "euclidean"):
        assert table[(name, 3)] > table[(name, n - 1)]


def test_sweep_reproducible_and_parallel(cluster_kb):
    a = sweep(cluster_kb, range(1, 6))
    assert a == sweep(cluster_kb, range(1, 6))
    assert a == sweep(cluster_kb, range(1, 6), jobs=2)


def test_sweep_outputs():
    table = {("argosmart", 1): 5, ("argosmart", 2): 6, ("euclidean", 1): 4, ("euclidean", 2): 3}
    assert sweep_csv(table).splitlines() == [
        "distance,k,solved", "argosmart,1,5", "argosmart,2,6", "euclidean,1,4", "euclidean,2,3"]
    assert sweep_matrix(table).splitlines() == ["k,argosmart,euclidean", "1,5,4", "2,6,3"]


def test_vbs_example():
    kb = KnowledgeBase(1500, ("A", "B"), (
        record("a", vec(0.0), A=S(10), B=T),
        record("b", vec(1.0), A=T, B=S(5)),
    ))
    best, row = vbs(kb)
    assert [o.time_seconds for o in best] == [10.0, 5.0]
    assert row.solved == 2
    assert row.median_seconds == 7.5


def test_vbs_single_solver(cluster_kb):
    kb = KnowledgeBase(100, ("only",), tuple(
        record(f"x{i}", vec(float(i)), only=S(float(i))) for i in range(5)))
    _, row = vbs(kb)
    assert row.solved == 5 and row.median_seconds == 2.0
    assert row.par10_total == 10.0


def test_median_rules():
    assert median_time([3.0]) == 3.0
    assert median_time([1.0, math.inf, math.inf]) == math.inf
    assert median_time([1.0, 2.0, math.inf, math.inf]) == math.inf
    assert median_time([1.0, 2.0, 3.0, math.inf]) == 2.5
    assert format_median(math.inf, 1500.0) == ">1500s"
    assert format_median(12.345, 1500.0) == "12.35s"


def test_report_renders_over_cutoff_median():
    kb = KnowledgeBase(1500, ("A", "B"), tuple(
        record(f"x{i}", vec(float(i)), A=(S(1.0) if i == 0 else T), B=S(2.0)) for i in range(3)))
    rep = report(kb, [(DistanceVariant.ARGOSMART, 1)])
    row_a = next(r for r in rep.rows if r.name == "A")
    assert row_a.median_seconds == math.inf
    line = next(line for line in rep.text().splitlines() if line.startswith("A "))
    assert ">1500s" in line


def test_single_instance_median():
    kb = KnowledgeBase(100, ("A",), (record("x", vec(), A=S(4.0)),))
    rep = report(kb, [])
    assert rep.rows[0].median_seconds == 4.0 and rep.vbs_row.median_seconds == 4.0


def test_report_aggregates_match_recount(cluster_kb):
    rep = report(cluster_kb, [(DistanceVariant.ARGOSMART, 3), (DistanceVariant.SCALED_EUCLIDEAN, 3)],
                 feature_times={r.instance_id: 0.5 for r in cluster_kb.records})
    assert rep.rows[0].name == "argosmart k=3"
    for row in rep.rows[:2]:
        loo = rep.per_instance[row.name]
        assert row.solved == sum(r.outcome.is_solved for r in loo)
        for cat in Category:
            assert row.solved_by_category[cat] == sum(
                r.outcome.is_solved and r.category is cat for r in loo)
        assert sum(row.solved_by_category.values()) == row.solved
        assert row.solved <= rep.vbs_row.solved
        assert row.median_with_features == pytest.approx(row.median_seconds + 0.5)
    portfolio = rep.rows[0]
    for single in rep.rows[2:]:
        assert portfolio.solved > single.solved
        assert portfolio.par10_total < single.par10_total
    rows = list(csv.DictReader(io.StringIO(rep.csv())))
    assert [r["policy"] for r in rows] == [r.name for r in rep.rows] + ["VBS"]
    assert rows[0]["solved"] == str(portfolio.solved)


def test_loo_never_beats_vbs():
    rng = np.random.default_rng(41)
    for _ in range(10):
        kb = make_random_kb(rng, max_records=50)
        if len(kb) < 4:
            continue
        _, vrow = vbs(kb)
        for k in (1, 2, 3):
            for variant in DistanceVariant:
                solved = sum(r.outcome.is_solved for r in leave_one_out(kb, k, variant))
                assert solved <= vrow.solved
