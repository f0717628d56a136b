import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from oracles import argmin, knn_scores
from zerofolio.errors import DimensionMismatch, EmptyTrainingSet, InvalidAlpha, LengthMismatch
from zerofolio.selector import (
    SelectorConfig,
    TrainedSelector,
    concatenate_features,
    cosine_distance,
    hybrid_soft_vote,
    manhattan_distance,
    minmax_normalize,
    nearest_neighbors,
    score_algorithms,
    select,
    vote_scores,
)


def test_manhattan_examples():
    assert manhattan_distance([1, 2], [1, 2]) == 0
    assert manhattan_distance([0, 0], [3, -4]) == 7
    with pytest.raises(DimensionMismatch):
        manhattan_distance([1], [1, 2])


def test_cosine_examples():
    assert cosine_distance([1, 0], [2, 0]) == pytest.approx(0, abs=1e-15)
    assert cosine_distance([1, 0], [0, 1]) == 1
    assert cosine_distance([1, 1], [-1, -1]) == pytest.approx(2)
    assert cosine_distance([0, 0], [1, 1]) == 1
    with pytest.raises(DimensionMismatch):
        cosine_distance([1], [1, 2])


def test_exact_match_neighbor():
    emb = np.arange(12.0).reshape(6, 2)
    sel = TrainedSelector(emb, np.ones((6, 2)), SelectorConfig(k=1))
    assert nearest_neighbors(emb[3], sel) == [(3, 0.0)]


def test_equidistant_tie_break_by_index():
    emb = np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1], [1, 0]])
    sel = TrainedSelector(emb, np.ones((5, 1)), SelectorConfig(k=2))
    assert [i for i, _ in nearest_neighbors([0.0, 0.0], sel)] == [0, 1]


def test_neighbors_match_full_sort():
    rng = np.random.default_rng(3)
    emb = rng.normal(size=(50, 6))
    q = rng.normal(size=6)
    sel = TrainedSelector(emb, np.ones((50, 2)), SelectorConfig(k=10))
    full = sorted((float(np.abs(e - q).sum()), i) for i, e in enumerate(emb))[:10]
    got = nearest_neighbors(q, sel)
    assert [i for i, _ in got] == [i for _, i in full]
    assert np.allclose([d for _, d in got], [d for d, _ in full], rtol=1e-12)


def test_k_is_clamped():
    sel = TrainedSelector(np.eye(3), np.ones((3, 2)), SelectorConfig(k=10))
    assert len(nearest_neighbors([0, 0, 0], sel)) == 3


def test_empty_training_set():
    sel = TrainedSelector(np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(EmptyTrainingSet):
        nearest_neighbors([0, 0], sel)


def test_query_dimension_checked():
    sel = TrainedSelector(np.eye(3), np.ones((3, 2)))
    with pytest.raises(DimensionMismatch):
        score_algorithms([0, 0], sel)


def test_inverse_distance_single_neighbor():
    sel = TrainedSelector([[2.0, 0.0]], [[100.0, 50.0]], SelectorConfig(k=1))
    scores = score_algorithms([0.0, 0.0], sel)
    assert scores.tolist() == [50.0, 25.0]
    assert select(scores) == 1


def test_uniform_plain_sum():
    sel = TrainedSelector([[1.0], [2.0]], [[10, 20], [30, 0]], SelectorConfig(k=2, weighting="uniform"))
    assert score_algorithms([0.0], sel).tolist() == [40.0, 20.0]


def test_zero_distance_rule():
    sel = TrainedSelector([[0.0], [0.1], [5.0]], [[7, 9], [0, 1000], [0, 0]], SelectorConfig(k=3))
    assert score_algorithms([0.0], sel).tolist() == [7.0, 9.0]


def test_select_ties():
    assert select([3.0, 1.0, 2.0]) == 1
    assert select([1.0, 1.0]) == 0


def test_vote_examples():
    assert vote_scores([np.array([1.0, 2.0])]).tolist() == [1.0, 2.0]
    assert vote_scores([[2, 4], [4, 8]]).tolist() == [3.0, 6.0]
    with pytest.raises(LengthMismatch):
        vote_scores([[1, 2], [1, 2, 3]])


def test_hybrid_examples():
    assert hybrid_soft_vote([0, 10], [10, 0], 0.5).tolist() == [0.5, 0.5]
    a = [3.0, 9.0, 5.0]
    assert hybrid_soft_vote(a, [1, 2, 3], 1.0).tolist() == minmax_normalize(a).tolist()
    assert minmax_normalize([4, 4]).tolist() == [0.0, 0.0]
    with pytest.raises(InvalidAlpha):
        hybrid_soft_vote(a, a, 1.5)
    with pytest.raises(LengthMismatch):
        hybrid_soft_vote([1, 2], [1, 2, 3])


def test_concatenate_features():
    out = concatenate_features(np.ones((2, 3)), np.zeros((2, 1)))
    assert out.shape == (2, 4)
    with pytest.raises(LengthMismatch):
        concatenate_features(np.ones((2, 3)), np.zeros((3, 1)))


def test_negative_par10_rejected():
    with pytest.raises(ValueError):
        TrainedSelector([[0.0]], [[-1.0]])


# --- properties ---------------------------------------------------------------


@st.composite
def problems(draw):
    n = draw(st.integers(1, 30))
    dim = draw(st.integers(1, 6))
    n_alg = draw(st.integers(2, 5))
    emb = draw(hnp.arrays(float, (n, dim), elements=st.integers(-5, 5).map(float)))
    par = draw(hnp.arrays(float, (n, n_alg), elements=st.floats(0, 1000)))
    query = draw(hnp.arrays(float, dim, elements=st.integers(-5, 5).map(float)))
    cfg = SelectorConfig(
        k=draw(st.integers(1, 12)),
        metric=draw(st.sampled_from(["manhattan", "cosine"])),
        weighting=draw(st.sampled_from(["inverse", "uniform"])),
    )
    return emb, par, query, cfg


@settings(max_examples=150, deadline=None)
@given(problems())
def test_matches_brute_force_oracle(problem):
    emb, par, query, cfg = problem
    got = score_algorithms(query, TrainedSelector(emb, par, cfg))
    want = knn_scores(query.tolist(), emb.tolist(), par.tolist(), cfg.k, cfg.metric.value, cfg.weighting.value)
    assert np.allclose(got, want, rtol=1e-12, atol=0)


@given(problems(), st.floats(0.01, 100))
def test_scale_invariance_of_selection(problem, c):
    emb, par, query, cfg = problem
    base = score_algorithms(query, TrainedSelector(emb, par, cfg))
    scaled = score_algorithms(query, TrainedSelector(emb, par * c, cfg))
    assert np.allclose(scaled, base * c, rtol=1e-9, atol=1e-9)
    if np.unique(base).size == base.size and np.min(np.diff(np.sort(base))) > 1e-6 * max(1, base.max()):
        assert select(scaled) == select(base)


@given(problems(), hnp.arrays(float, 6, elements=st.integers(-10, 10).map(float)))
def test_manhattan_translation_invariance(problem, shift):
    emb, par, query, cfg = problem
    cfg = SelectorConfig(cfg.k, "manhattan", cfg.weighting)
    shift = shift[: emb.shape[1]]
    a = score_algorithms(query, TrainedSelector(emb, par, cfg))
    b = score_algorithms(query + shift, TrainedSelector(emb + shift, par, cfg))
    assert np.array_equal(a, b)


@given(hnp.arrays(float, st.integers(1, 8), elements=st.floats(0, 1e6)), st.integers(1, 5))
def test_voting_copies_is_identity(scores, copies):
    assert np.array_equal(vote_scores([scores] * copies), scores)


@given(
    hnp.arrays(float, 5, elements=st.floats(-1e6, 1e6)),
    hnp.arrays(float, 5, elements=st.floats(-1e6, 1e6)),
    st.floats(0, 1),
)
def test_hybrid_range(a, b, alpha):
    out = hybrid_soft_vote(a, b, alpha)
    assert np.all((out >= 0) & (out <= 1 + 1e-15))


@given(hnp.arrays(float, st.integers(1, 8), elements=st.floats(0, 1e6)))
def test_hybrid_of_self_keeps_argmin(a):
    assert select(hybrid_soft_vote(a, a, 0.5)) == select(a)


@given(problems())
def test_uniform_all_neighbors_is_training_sbs(problem):
    emb, par, query, _ = problem
    # distinct query so the zero-distance rule does not apply
    query = np.full(emb.shape[1], 100.0)
    cfg = SelectorConfig(k=len(emb), metric="manhattan", weighting="uniform")
    assert select(score_algorithms(query, TrainedSelector(emb, par, cfg))) == argmin(
        [float(np.sum(par[:, a])) for a in range(par.shape[1])]
    )


def test_cosine_duplicate_triggers_zero_distance_rule():
    rng = np.random.default_rng(12)
    emb = rng.normal(size=(20, 7))
    par = rng.uniform(0, 100, (20, 3))
    sel = TrainedSelector(emb, par, SelectorConfig(k=10, metric="cosine"))
    for i in range(20):
        assert np.array_equal(score_algorithms(emb[i], sel), par[i])


@given(hnp.arrays(float, 4, elements=st.floats(-1e3, 1e3)), hnp.arrays(float, 4, elements=st.floats(-1e3, 1e3)))
def test_cosine_range(a, b):
    assert 0.0 <= cosine_distance(a, b) <= 2.0
