import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import oracles
from helpers import S, T, record, vec
from knnportfolio.exceptions import EmptyKnowledgeBase, KTooLarge
from knnportfolio.features import N_FEATURES
from knnportfolio.knowledge_base import InstanceRecord, KnowledgeBase, nearest_indices
from knnportfolio.metrics import DistanceVariant, RuntimeOutcome
from knnportfolio.selector import KNNPortfolio, rank_solvers, select_solver
from knnportfolio.synthetic import make_random_kb


def random_query(rng):
    return rng.exponential(1.0, size=N_FEATURES) * 10.0 ** rng.uniform(-2, 3, size=N_FEATURES)


def test_two_neighbour_example(three_kb):
    res = select_solver(three_kb, vec(0.05), k=2)
    assert {iid for iid, _ in res.neighborhood} == {"i1", "i2"}
    assert res.neighborhood_penalty == {"A": 30.0, "B": 30000.0}
    assert res.chosen_solver == "A"
    assert not res.global_tiebreak_used
    assert res.tie_set == res.final_tie_set == ("A",)


def test_single_neighbour_example(three_kb):
    res = select_solver(three_kb, three_kb.records[2].features, k=1)
    assert res.neighborhood == (("i3", 0.0),)
    assert res.neighborhood_penalty == {"A": 15000.0, "B": 5.0}
    assert res.chosen_solver == "B"


@pytest.mark.parametrize("far_a, far_b, winner", [(S(5), T, "A"), (T, S(5), "B")])
def test_global_tiebreak(far_a, far_b, winner):
    kb = KnowledgeBase(1500, ("A", "B"), (
        record("near", vec(0.0), A=S(10), B=S(10)),
        record("far", vec(100.0), A=far_a, B=far_b),
    ))
    res = select_solver(kb, vec(0.0), k=1)
    assert res.tie_set == ("A", "B")
    assert res.global_tiebreak_used
    assert res.final_tie_set == (winner,)
    assert res.chosen_solver == winner
    assert any("global_tiebreak_used\ttrue" == line for line in res.trace_lines())


def test_full_tie_picks_smallest_id():
    kb = KnowledgeBase(1500, ("zeta", "alpha"), (record("a", vec(1.0), zeta=S(1), alpha=S(1)),))
    res = select_solver(kb, vec(1.0), k=1)
    assert res.final_tie_set == ("zeta", "alpha")
    assert res.chosen_solver == "alpha"
    assert rank_solvers(kb, vec(1.0), k=1) == [("alpha", 1.0), ("zeta", 1.0)]


def test_rank_examples(three_kb):
    assert rank_solvers(three_kb, vec(0.05), k=2) == [("A", 30.0), ("B", 30000.0)]
    dominant = KnowledgeBase(100, ("X", "Y"), tuple(
        record(f"r{i}", vec(float(i)), X=S(1), Y=S(2)) for i in range(4)))
    assert rank_solvers(dominant, vec(), k=4)[0][0] == "X"


def test_errors(three_kb):
    with pytest.raises(KTooLarge):
        select_solver(three_kb, vec(), k=4)
    with pytest.raises(EmptyKnowledgeBase):
        select_solver(KnowledgeBase(10, ("A",), ()), vec(), k=1)


def test_oracle_equivalence_sample():
    rng = np.random.default_rng(21)
    for _ in range(150):
        kb = make_random_kb(rng)
        f = kb.records[0].features if rng.random() < 0.2 else random_query(rng)
        k = int(rng.integers(1, len(kb) + 1))
        for variant in DistanceVariant:
            res = select_solver(kb, f, k, variant)
            chosen, ties, used, final, near = oracles.select(
                kb.records, kb.solvers, kb.cutoff_seconds, f, k, variant.value)
            assert res.chosen_solver == chosen
            assert sorted(res.tie_set) == sorted(ties)
            assert res.global_tiebreak_used == used
            assert sorted(res.final_tie_set) == sorted(final)
            assert [iid for iid, _ in res.neighborhood] == near


def test_rank_head_is_selection():
    rng = np.random.default_rng(4)
    for _ in range(100):
        kb = make_random_kb(rng)
        f = random_query(rng)
        k = int(rng.integers(1, len(kb) + 1))
        assert rank_solvers(kb, f, k)[0][0] == select_solver(kb, f, k).chosen_solver


def test_one_nn_specialisation():
    rng = np.random.default_rng(8)
    for _ in range(100):
        kb = make_random_kb(rng)
        f = random_query(rng)
        res = select_solver(kb, f, 1)
        (nearest,) = [kb.records[i] for i in nearest_indices(kb, f, 1)[0]]
        best = min(res.neighborhood_penalty.values())
        assert res.neighborhood_penalty[res.chosen_solver] == best
        assert res.neighborhood[0][0] == nearest.instance_id


def test_neighbourhood_locality():
    rng = np.random.default_rng(9)
    checked = 0
    for _ in range(100):
        kb = make_random_kb(rng)
        f = random_query(rng)
        k = int(rng.integers(1, len(kb) + 1))
        res = select_solver(kb, f, k)
        inside = {iid for iid, _ in res.neighborhood}
        records = []
        for rec in kb.records:
            outcomes = dict(rec.outcomes)
            if rec.instance_id not in inside:
                for s in kb.solvers:
                    if s not in res.tie_set:
                        outcomes[s] = RuntimeOutcome.timeout() if rng.random() < 0.5 else S(1.0)
                if not any(o.is_solved for o in outcomes.values()):
                    outcomes = dict(rec.outcomes)
            records.append(InstanceRecord(rec.instance_id, rec.category, rec.features, outcomes))
        mutated = KnowledgeBase(kb.cutoff_seconds, kb.solvers, tuple(records))
        assert select_solver(mutated, f, k).chosen_solver == res.chosen_solver
        checked += 1
    assert checked == 100


@pytest.mark.parametrize("factor", [0.5, 2.0, 3.0, 10.0])
def test_time_scale_invariance(factor):
    rng = np.random.default_rng(int(factor * 10))
    for _ in range(50):
        kb = make_random_kb(rng)
        records = tuple(
            InstanceRecord(r.instance_id, r.category, r.features, {
                s: S(o.time_seconds * factor) if o.is_solved else o for s, o in r.outcomes.items()
            }) for r in kb.records)
        scaled = KnowledgeBase(kb.cutoff_seconds * factor, kb.solvers, records)
        f = random_query(rng)
        k = int(rng.integers(1, len(kb) + 1))
        assert select_solver(scaled, f, k).chosen_solver == select_solver(kb, f, k).chosen_solver


def test_determinism():
    kb = make_random_kb(np.random.default_rng(2))
    f = random_query(np.random.default_rng(3))
    assert select_solver(kb, f, 3) == select_solver(kb, f, 3)


# -- estimator interface ----------------------------------------------------

def test_estimator_params_and_clone():
    est = KNNPortfolio(k=3, distance="euclidean", cutoff=60.0)
    assert est.get_params() == {"k": 3, "distance": "euclidean", "cutoff": 60.0}
    twin = clone(est).set_params(k=5)
    assert twin.k == 5 and est.k == 3
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((1, 2)))


def test_estimator_fit_predict_matches_kb_path(three_kb):
    X = three_kb.feature_matrix
    y = np.array([[10.0, np.nan], [20.0, np.inf], [2000.0, 5.0]])
    est = KNNPortfolio(k=2).fit(X, y, solvers=["A", "B"], instance_ids=list(three_kb.instance_ids))
    np.testing.assert_array_equal(est.penalties_, three_kb.penalty_matrix)
    queries = np.vstack([np.array(vec(0.05)), X[2]])
    # at i3 with k=2: A = 15000 + 20, B = 5 + 15000
    assert est.predict(queries).tolist() == ["A", "B"]
    assert KNNPortfolio(k=1).fit(X, y).predict(queries).tolist() == ["0", "1"]
    assert est.select(queries[0]) == select_solver(three_kb, queries[0], 2)


def test_estimator_kneighbors(three_kb):
    est = KNNPortfolio(k=2).fit_kb(three_kb)
    dist, idx = est.kneighbors([vec(0.05)])
    want_idx, want_d = nearest_indices(three_kb, vec(0.05), 2)
    np.testing.assert_array_equal(idx[0], want_idx)
    np.testing.assert_array_equal(dist[0], want_d)
    assert est.kneighbors([vec(0.05)], n_neighbors=3, return_distance=False).shape == (1, 3)


def test_estimator_validation():
    with pytest.raises(ValueError):
        KNNPortfolio().fit([[-1.0]], [[1.0]])
    with pytest.raises(ValueError):
        KNNPortfolio().fit([[1.0], [2.0]], [[1.0]])
    with pytest.raises(ValueError):
        KNNPortfolio(cutoff=0).fit([[1.0]], [[1.0]])
    est = KNNPortfolio(k=2).fit([[1.0]], [[1.0]])
    with pytest.raises(KTooLarge):
        est.predict([[1.0]])
    with pytest.raises(ValueError):
        KNNPortfolio(k=1).fit([[1.0]], [[1.0]]).predict([[1.0, 2.0]])
