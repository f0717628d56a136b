import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import small_scenario
from oracles import wilcoxon_exact_by_enumeration
from zerofolio.embed import PrecomputedEmbeddings
from zerofolio.errors import DegenerateGap, LengthMismatch, NoEmbeddableInstances
from zerofolio.evaluation import (
    EvaluationReport,
    FoldResult,
    HybridSpec,
    OracleSpec,
    RFSpec,
    SBSSpec,
    ZeroFolioSpec,
    ablation_variants,
    cross_validate,
    emit_report,
    evaluate_scenario,
    gap_closed,
    overall_par10,
    report_from_json,
    round_half_away,
    wilcoxon_signed_rank,
)
from zerofolio.baseline import RandomForestConfig, single_best
from zerofolio.selector import SelectorConfig
from zerofolio.synthetic import ClusterScenarioConfig, clustered_scenario


def test_pooled_mean_example():
    folds = [FoldResult(1, {"a": (0, 10.0)}), FoldResult(2, {k: (0, 20.0) for k in "bcd"})]
    assert overall_par10(folds) == 17.5


def test_pooled_mean_trivial():
    assert overall_par10([FoldResult(1, {"a": (0, 3.25)})]) == 3.25
    assert overall_par10([FoldResult(f, {str(f): (0, 9.0)}) for f in range(5)]) == 9.0


def test_gap_examples():
    assert round_half_away(gap_closed(3066, 1010, 271)) == 74
    assert round_half_away(gap_closed(2965, 3186, 1833)) == -20
    assert gap_closed(500, 20, 20) == 100
    with pytest.raises(DegenerateGap):
        gap_closed(10, 5, 10)


def test_round_half_away():
    assert round_half_away(2.5) == 3
    assert round_half_away(-2.5) == -3
    assert round_half_away(62.49999999999994) == 63
    assert round_half_away(0.44) == 0
    assert round_half_away(1.25, 1) == 1.3


@given(
    st.floats(1, 1e4), st.floats(0, 1), st.floats(0, 2), st.floats(0.01, 100)
)
def test_gap_is_scale_invariant(vbs, frac_gap, frac_alg, c):
    sbs = vbs * (1 + frac_gap) + 1
    alg = vbs + frac_alg * (sbs - vbs)
    assert gap_closed(sbs * c, alg * c, vbs * c) == pytest.approx(gap_closed(sbs, alg, vbs), rel=1e-9, abs=1e-9)


# --- Wilcoxon -------------------------------------------------------------------------


def test_wilcoxon_identical_samples():
    assert wilcoxon_signed_rank([1, 2, 3], [1, 2, 3]) == 1.0


def test_wilcoxon_extreme_exact():
    x = np.arange(1, 11) + 0.5
    y = np.zeros(10)
    assert wilcoxon_signed_rank(x, y) == pytest.approx(2 / 1024, abs=1e-12)


def test_wilcoxon_textbook_pairs_match_reference():
    # n = 8 paired sample, no ties, no zero differences
    x = [125, 115, 130, 140, 140.5, 115.5, 140.25, 125.75]
    y = [110, 122, 125, 120, 140, 124, 123, 137]
    ref = stats.wilcoxon(x, y, method="exact").pvalue
    assert wilcoxon_signed_rank(x, y) == pytest.approx(ref, abs=1e-6)
    assert wilcoxon_signed_rank(x, y) == pytest.approx(wilcoxon_exact_by_enumeration(x, y), abs=1e-12)


def test_wilcoxon_length_mismatch():
    with pytest.raises(LengthMismatch):
        wilcoxon_signed_rank([1, 2], [1])


def test_wilcoxon_normal_approximation_matches_reference():
    rng = np.random.default_rng(8)
    x = rng.normal(0.3, 1, size=40)
    y = rng.normal(0, 1, size=40)
    ref = stats.wilcoxon(x, y, method="approx", correction=True).pvalue
    assert wilcoxon_signed_rank(x, y) == pytest.approx(ref, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=10)
)
def test_wilcoxon_exact_matches_sign_enumeration(pairs):
    x = [float(a) for a, _ in pairs]
    y = [float(b) for _, b in pairs]
    assert wilcoxon_signed_rank(x, y) == pytest.approx(wilcoxon_exact_by_enumeration(x, y), abs=1e-12)


@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)), min_size=1, max_size=30))
def test_wilcoxon_symmetry(pairs):
    x = [a for a, _ in pairs]
    y = [b for _, b in pairs]
    p = wilcoxon_signed_rank(x, y)
    assert p == wilcoxon_signed_rank(y, x)
    assert 0 <= p <= 1


# --- cross-validation -----------------------------------------------------------------


@pytest.fixture(scope="module")
def clusters():
    return clustered_scenario(ClusterScenarioConfig())


def test_sbs_picks_training_fold_sbs():
    rng = np.random.default_rng(1)
    sc = small_scenario(rng.uniform(1, 90, (10, 3)), rng.random((10, 3)) > 0.3, [1, 2] * 5)
    for r in cross_validate(sc, SBSSpec()):
        train = [i for i in sc.instances if sc.folds[i] != r.fold]
        assert {a for a, _ in r.per_instance.values()} == {single_best(sc, train)}


def test_oracle_equals_vbs(clusters):
    sc, _, _ = clusters
    assert overall_par10(cross_validate(sc, OracleSpec())) == pytest.approx(sc.par10_matrix.min(axis=1).mean())


def test_zerofolio_recovers_vbs_on_clusters(clusters):
    sc, emb, _ = clusters
    results = cross_validate(sc, ZeroFolioSpec(seeds=(0,)), emb)
    vbs = float(np.mean(sc.par10_matrix.min(axis=1)))
    assert overall_par10(results) == pytest.approx(vbs, rel=1e-12)


def test_no_training_instance_in_test_fold(clusters):
    sc, emb, _ = clusters
    seen = []

    def hook(fold, train, test):
        assert not set(train) & set(test)
        assert all(sc.folds[i] != fold for i in train)
        assert all(sc.folds[i] == fold for i in test)
        seen.append(fold)

    cross_validate(sc, ZeroFolioSpec(), emb, train_hook=hook)
    assert sorted(seen) == sc.fold_ids


def test_missing_embeddings_restrict_evaluation(clusters):
    sc, emb, _ = clusters
    keep = set(sc.instances[::2])
    partial = PrecomputedEmbeddings({0: {i: v for i, v in emb._vectors[0].items() if i in keep}})
    results = cross_validate(sc, ZeroFolioSpec(), partial)
    assert {i for r in results for i in r.per_instance} == keep


def test_no_embeddable_instances(clusters):
    sc, _, _ = clusters
    empty = PrecomputedEmbeddings({0: {"other": np.ones(2)}})
    with pytest.raises(NoEmbeddableInstances):
        cross_validate(sc, ZeroFolioSpec(), empty)


def test_parallel_folds_match_serial(clusters):
    sc, emb, _ = clusters
    spec = HybridSpec(ZeroFolioSpec(), RFSpec(RandomForestConfig(n_trees=5)))
    a = cross_validate(sc, spec, emb, jobs=1)
    b = cross_validate(sc, spec, emb, jobs=4)
    assert [r.per_instance for r in a] == [r.per_instance for r in b]


def test_rf_without_features_falls_back_to_sbs():
    rng = np.random.default_rng(2)
    sc = small_scenario(rng.uniform(1, 90, (8, 2)), np.ones((8, 2)), [1, 2] * 4)
    rf = cross_validate(sc, RFSpec(RandomForestConfig(n_trees=3)))
    sbs = cross_validate(sc, SBSSpec())
    assert [r.per_instance for r in rf] == [r.per_instance for r in sbs]


# --- reports ------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def report(clusters):
    sc, emb, _ = clusters
    specs = [
        SBSSpec(),
        ZeroFolioSpec(seeds=(0,), name="ZF"),
        ZeroFolioSpec(seeds=(0, 1), name="ZF-v2"),
        RFSpec(RandomForestConfig(n_trees=10)),
        HybridSpec(ZeroFolioSpec(), RFSpec(RandomForestConfig(n_trees=10)), alpha=0.5, name="Hybrid"),
    ]
    return evaluate_scenario(sc, specs, emb)


def test_report_bounds(report, clusters):
    sc, _, _ = clusters
    for s in report.selectors.values():
        assert report.vbs_par10 <= s.overall_par10 <= 10 * sc.cutoff_seconds
    assert report.selectors["ZF"].gap_closed == pytest.approx(100)
    assert set(report.significance) >= {"ZF vs ZF-v2", "SBS-CV vs ZF"}


def test_csv_report(report):
    text = emit_report(report, "csv")
    lines = text.splitlines()
    assert lines[0] == "scenario,selector,fold,instances,par10_mean"
    aggregate = [ln for ln in lines if ln.split(",")[2] == "all"]
    assert len(aggregate) == len(report.selectors)
    assert text == emit_report(report, "csv")


def test_single_selector_csv_has_one_aggregate_row(clusters):
    sc, _, _ = clusters
    rep = evaluate_scenario(sc, [SBSSpec()])
    rows = emit_report(rep, "csv").splitlines()[1:]
    assert [r for r in rows if ",all," in r] == [rows[-1]]


def test_markdown_report_shape(report):
    lines = emit_report(report, "markdown").splitlines()
    header = [c.strip() for c in lines[0].strip("|").split("|")]
    assert header[:2] == ["Scenario", "SBS"]
    assert header.index("VBS") > header.index("ZF-v2")
    assert "Gap% ZF" in header
    assert len(lines) == 3


def test_json_round_trip(report):
    text = emit_report(report, "json")
    [back] = report_from_json(text)
    assert back == report
    assert emit_report(back, "json") == text
    assert json.loads(text)["schema_version"] == 1


def test_report_json_rejects_unknown_schema(report):
    d = report.to_dict()
    d["schema_version"] = 99
    with pytest.raises(ValueError):
        EvaluationReport.from_dict(d)


# --- ablation grid ---------------------------------------------------------------------------


def test_default_ablation_grid():
    variants = ablation_variants()
    assert len(variants) == 8
    names = [v.variant for v in variants]
    assert names[0] == "standard"
    naive = variants[-1]
    assert (naive.shuffle, naive.config.metric.value, naive.config.weighting.value) == (False, "cosine", "uniform")
    assert {v.n_seeds for v in variants} == {1, 2}


def test_restricted_ablation_grid():
    variants = ablation_variants(["metric"])
    assert [v.variant for v in variants] == ["standard", "cosine"]


def test_ablation_holds_other_dimensions_at_standard():
    std = SelectorConfig()
    for v in ablation_variants()[1:-1]:
        changed = sum(
            [v.shuffle is False, v.config.metric != std.metric, v.config.weighting != std.weighting,
             v.config.k != std.k, v.n_seeds != 1]
        )
        assert changed == 1, v
