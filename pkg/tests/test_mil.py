import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from autocc_mil.errors import DimensionMismatch, ModelTooSmall
from autocc_mil.features import Bag
from autocc_mil.mil import (DistanceConfig, TrainedModel, bag_distance, bag_distance_matrix,
                            classify_citation_knn, instance_distance, rank_neighbors)

from oracles import brute_bag_distance, brute_citation_knn, pearson_distance

MIN_MIN = DistanceConfig("correlation", "min_hausdorff")
EUCLID_MIN = DistanceConfig("euclidean", "min_hausdorff")
vectors = arrays(np.float64, 6, elements=st.floats(-50, 50, allow_nan=False))


def euclid(a, b):
    return float(np.sqrt(((np.asarray(a) - np.asarray(b)) ** 2).sum()))


def test_correlation_examples():
    x = np.array([1.0, 3.0, 2.0, 7.0])
    assert abs(instance_distance(x, x)) < 1e-12
    assert abs(instance_distance(x, 10 - x) - 2) < 1e-12
    assert instance_distance(np.full(4, 3.0), x) == 2.0
    assert instance_distance(np.full(4, 3.0), np.full(4, 3.0)) == 0.0
    assert instance_distance(np.full(4, 3.0), np.full(4, 1.0)) == 2.0


@given(vectors, vectors)
def test_correlation_matches_pearson_oracle(x, y):
    d = instance_distance(x, y)
    assert 0.0 <= d <= 2.0
    # near-constant vectors are numerically ill-conditioned; compare where well-posed
    if np.ptp(x) > 1e-3 and np.ptp(y) > 1e-3:
        assert abs(d - pearson_distance(x, y)) < 1e-9
    elif np.ptp(x) == 0 or np.ptp(y) == 0:
        assert d == pearson_distance(x, y)


@given(vectors, vectors, st.floats(0.01, 100), st.floats(-100, 100))
def test_correlation_affine_invariance(x, y, alpha, beta):
    assume(np.ptp(x) > 1e-2 and np.ptp(y) > 1e-2)
    assert abs(instance_distance(alpha * x + beta, y) - instance_distance(x, y)) < 1e-9


def test_euclidean_metric():
    assert instance_distance([0, 0], [3, 4], "euclidean") == 5.0


def _bag(rng, n, d=4, bid="b", label=None):
    return Bag(bid, rng.normal(size=(n, d)), label)


@pytest.mark.parametrize("mode,rank", [("min_hausdorff", 1), ("kth_ranked", 1),
                                       ("kth_ranked", 2), ("kth_ranked", 64)])
def test_bag_distance_against_exhaustive_table(mode, rank):
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = _bag(rng, 3), _bag(rng, int(rng.integers(1, 5)))
        for metric, inst in (("correlation", pearson_distance), ("euclidean", euclid)):
            cfg = DistanceConfig(metric, mode, rank)
            expected = brute_bag_distance(a.instances, b.instances, mode, rank, inst)
            assert abs(bag_distance(a, b, cfg) - expected) < 1e-9


@settings(max_examples=40)
@given(st.integers(0, 10 ** 6), st.sampled_from([MIN_MIN, DistanceConfig(), EUCLID_MIN,
                                                 DistanceConfig("correlation", "kth_ranked", 2)]))
def test_bag_distance_symmetry_and_self(seed, cfg):
    rng = np.random.default_rng(seed)
    a, b = _bag(rng, int(rng.integers(1, 6))), _bag(rng, int(rng.integers(1, 6)))
    assert bag_distance(a, b, cfg) == bag_distance(b, a, cfg)
    assert abs(bag_distance(a, a, cfg)) < 1e-12


def test_shared_instance_min_min_is_zero():
    rng = np.random.default_rng(1)
    a, b = _bag(rng, 4), _bag(rng, 3)
    b.instances[1] = a.instances[2]
    assert abs(bag_distance(a, b, MIN_MIN)) < 1e-12
    assert bag_distance(a, b, EUCLID_MIN) == 0.0


def test_distance_matrix_matches_pairwise():
    rng = np.random.default_rng(2)
    bags = [_bag(rng, int(rng.integers(1, 5)), bid=str(i)) for i in range(6)]
    for cfg in (MIN_MIN, DistanceConfig()):
        m = bag_distance_matrix(bags, cfg)
        for i in range(6):
            for j in range(6):
                expected = 0.0 if i == j else bag_distance(bags[i], bags[j], cfg)
                assert abs(m[i, j] - expected) < 1e-12


def _model(rng, n, labels="AB", R=2, C=4, cfg=EUCLID_MIN):
    bags = [Bag(f"t{i}", rng.normal(size=(int(rng.integers(1, 4)), 3)), labels[i % len(labels)])
            for i in range(n)]
    return TrainedModel(bags, R, C, cfg)


def test_rank_neighbors_full_sort_oracle():
    rng = np.random.default_rng(3)
    m = _model(rng, 5)
    q = _bag(rng, 2, d=3)
    d = [bag_distance(q, b, EUCLID_MIN) for b in m.bags]
    expected = [m.bags[i].id for i in sorted(range(5), key=lambda i: (d[i], i))]
    assert [bid for bid, _ in rank_neighbors(q, m)] == expected
    own = rank_neighbors(m.bags[3], m)[0]
    assert own == ("t3", 0.0)
    assert len(rank_neighbors(q, TrainedModel(m.bags[:1]))) == 1


def hand_fixture():
    """Five one-instance bags on a line; every distance is |v_i - v_j|."""
    vals = {"t1": 0.0, "t2": 1.0, "t3": 3.0, "t4": 7.0, "t5": 8.0}
    labels = {"t1": "A", "t2": "A", "t3": "B", "t4": "B", "t5": "B"}
    bags = [Bag(k, [[v, 0.0]], labels[k]) for k, v in vals.items()]
    query = Bag("q", [[2.5, 0.0]])
    return bags, query


def test_hand_enumerated_fixture():
    bags, query = hand_fixture()
    model = TrainedModel(bags, references=2, citers=2,
                         config=DistanceConfig("euclidean", "min_hausdorff"))
    # query distances: t1 2.5, t2 1.5, t3 0.5, t4 4.5, t5 5.5
    # second-nearest other bag: t1 3 (t3), t2 2 (t3), t3 3 (t1), t4 4 (t3), t5 5 (t3)
    # citers (query strictly inside): t1, t2, t3; references: t3, t2
    p = classify_citation_knn(query, model)
    assert p.references == ["t3", "t2"]
    assert p.citers == ["t1", "t2", "t3"]
    assert p.votes == {"A": 3, "B": 2}
    assert p.label == "A"
    assert p.nearest_reference == "t3" and p.distance == 0.5


def test_tie_goes_to_nearest_reference():
    bags = [Bag("a", [[0.0, 0.0]], "A"), Bag("b", [[2.0, 0.0]], "B"),
            Bag("c", [[10.0, 0.0]], "A"), Bag("d", [[11.0, 0.0]], "B")]
    model = TrainedModel(bags, references=2, citers=0,
                         config=DistanceConfig("euclidean", "min_hausdorff"))
    p = classify_citation_knn(Bag("q", [[1.2, 0.0]]), model)
    assert p.votes == {"A": 1, "B": 1}
    assert p.label == "B"


def test_model_errors():
    rng = np.random.default_rng(4)
    with pytest.raises(ModelTooSmall):
        TrainedModel([])
    m = _model(rng, 1, R=2)
    with pytest.raises(ModelTooSmall):
        classify_citation_knn(_bag(rng, 1, d=3), m)
    with pytest.raises(DimensionMismatch):
        _model(rng, 3).query_distances(_bag(rng, 1, d=5))
    with pytest.raises(ValueError):
        DistanceConfig(rank=0)


@pytest.mark.parametrize("seed", range(50))
def test_r1_c0_is_one_nn(seed):
    rng = np.random.default_rng(seed)
    m = _model(rng, int(rng.integers(2, 9)), labels="ABC", R=1, C=0, cfg=MIN_MIN)
    q = _bag(rng, 2, d=3)
    d = [bag_distance(q, b, MIN_MIN) for b in m.bags]
    nearest = min(range(len(d)), key=lambda i: (d[i], i))
    assert classify_citation_knn(q, m).label == m.bags[nearest].label


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 3), st.integers(0, 5))
def test_against_brute_force_citation_knn(seed, R, C):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(R, 9))
    m = _model(rng, n, labels="ABC", R=R, C=C)
    q = _bag(rng, 2, d=3)
    dq = [bag_distance(q, b, EUCLID_MIN) for b in m.bags]
    dt = [[bag_distance(a, b, EUCLID_MIN) for b in m.bags] for a in m.bags]
    label, refs, citers, votes = brute_citation_knn(dq, dt, [b.label for b in m.bags], R, C)
    p = classify_citation_knn(q, m)
    assert p.label == label
    assert p.references == [m.bags[i].id for i in refs]
    assert p.citers == [m.bags[i].id for i in citers]
    assert {k: v for k, v in p.votes.items() if v} == votes
    assert sum(p.votes.values()) == len(refs) + len(citers)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_order_invariances(seed):
    rng = np.random.default_rng(seed)
    m = _model(rng, 7, labels="ABC", cfg=DistanceConfig("correlation", "kth_ranked", 2))
    q = _bag(rng, 3, d=3)
    base = classify_citation_knn(q, m)
    shuffled_q = Bag("q", q.instances[rng.permutation(3)])
    assert classify_citation_knn(shuffled_q, m).label == base.label
    perm = rng.permutation(7)
    m2 = TrainedModel([m.bags[i] for i in perm], m.references, m.citers, m.config, m.classes)
    p2 = classify_citation_knn(q, m2)
    assert p2.label == base.label
    assert p2.votes == base.votes
    assert p2.nearest_reference == base.nearest_reference
    assert sorted(p2.citers) == sorted(base.citers)
