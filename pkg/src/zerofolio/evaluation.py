"""Cross-validated evaluation of selectors on ASlib scenarios.

Selectors are described by small spec objects (``SBSSpec``, ``ZeroFolioSpec``,
``RFSpec``, ``HybridSpec``, ``OracleSpec``). :func:`cross_validate` trains each
on the ASlib training folds and records the PAR10 of its pick on every test
instance; :func:`evaluate_scenario` turns that into an
:class:`EvaluationReport` with SBS/VBS references, gap closed and fold-paired
Wilcoxon p-values.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .aslib import Scenario
from .baseline import (
    RandomForestConfig,
    apply_preprocessor,
    best_algorithm_labels,
    fit_preprocessor,
    rf_train,
    single_best_from_matrix,
)
from .embed import EmbeddingSource
from .errors import DegenerateGap, LengthMismatch, NoEmbeddableInstances
from .selector import (
    SelectorConfig,
    TrainedSelector,
    concatenate_features,
    hybrid_soft_vote,
    score_algorithms,
    select,
    vote_scores,
)

SCHEMA_VERSION = 1


# --- selector specs -----------------------------------------------------------


@dataclass(frozen=True)
class SBSSpec:
    name: str = "SBS-CV"


@dataclass(frozen=True)
class OracleSpec:
    name: str = "Oracle"


@dataclass(frozen=True)
class ZeroFolioSpec:
    config: SelectorConfig = SelectorConfig()
    seeds: tuple[int, ...] = (0,)
    name: str = "ZF"
    with_features: bool = False  # concatenate standardized hand-crafted features

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("ZeroFolio needs at least one seed")
        object.__setattr__(self, "seeds", tuple(self.seeds))


@dataclass(frozen=True)
class RFSpec:
    config: RandomForestConfig = RandomForestConfig()
    name: str = "RF"


@dataclass(frozen=True)
class HybridSpec:
    zerofolio: ZeroFolioSpec = ZeroFolioSpec()
    rf: RFSpec = RFSpec()
    alpha: float = 0.5
    name: str = "Hybrid"


SelectorSpec = Union[SBSSpec, OracleSpec, ZeroFolioSpec, RFSpec, HybridSpec]


def _needs_embeddings(spec: SelectorSpec) -> bool:
    return isinstance(spec, (ZeroFolioSpec, HybridSpec))


# --- per-fold selection -------------------------------------------------------


def _mean(values) -> float:
    # fsum is correctly rounded, so pooled means do not depend on instance order
    values = list(values)
    return math.fsum(values) / len(values)


@dataclass
class FoldResult:
    fold: int
    per_instance: dict[str, tuple[int, float]] = field(default_factory=dict)

    @property
    def n_instances(self) -> int:
        return len(self.per_instance)

    @property
    def mean_par10(self) -> float:
        return _mean([p for _, p in self.per_instance.values()])


def _zerofolio_scores(
    spec: ZeroFolioSpec,
    scenario: Scenario,
    source: EmbeddingSource,
    train: list[str],
    test: list[str],
) -> np.ndarray:
    """Voted k-NN score matrix of shape ``(len(test), n_algorithms)``."""
    par = scenario.par10_matrix[scenario.indices(train)]
    if spec.with_features:
        pre = fit_preprocessor(scenario.features[scenario.indices(train)])
        f_train = apply_preprocessor(pre, scenario.features[scenario.indices(train)])
        f_test = apply_preprocessor(pre, scenario.features[scenario.indices(test)])
    per_seed = []
    for seed in spec.seeds:
        e_train, e_test = source.fold_vectors(seed, train, test)
        if spec.with_features:
            e_train = concatenate_features(e_train, f_train)
            e_test = concatenate_features(e_test, f_test)
        sel = TrainedSelector(e_train, par, spec.config)
        per_seed.append(np.array([score_algorithms(q, sel) for q in e_test]))
    return np.array([vote_scores([s[r] for s in per_seed]) for r in range(len(test))])


def _rf_scores(
    spec: RFSpec, scenario: Scenario, train: list[str], test: list[str], jobs: int
) -> np.ndarray:
    """RF score matrix (lower is better): 1 - vote share, SBS means for featureless rows."""
    train_idx, test_idx = scenario.indices(train), scenario.indices(test)
    par = scenario.par10_matrix[train_idx]
    raw_train = scenario.features[train_idx]
    raw_test = scenario.features[test_idx]
    pre = fit_preprocessor(raw_train) if raw_train.shape[1] else None
    n_alg = len(scenario.algorithms)
    sbs_scores = par.mean(axis=0)
    out = np.tile(sbs_scores, (len(test), 1))
    if pre is None:
        return out
    model = rf_train(
        apply_preprocessor(pre, raw_train),
        best_algorithm_labels(par),
        spec.config,
        n_classes=n_alg,
        jobs=jobs,
    )
    has_features = ~np.all(np.isnan(raw_test), axis=1)
    if has_features.any():
        votes = model.votes(apply_preprocessor(pre, raw_test[has_features]))
        out[has_features] = 1.0 - votes / len(model.trees)
    return out


def _fold_selections(
    spec: SelectorSpec,
    scenario: Scenario,
    source: Optional[EmbeddingSource],
    train: list[str],
    test: list[str],
    jobs: int,
) -> list[int]:
    if isinstance(spec, OracleSpec):
        return [int(np.argmin(scenario.par10_matrix[scenario.index_of(i)])) for i in test]
    if isinstance(spec, SBSSpec):
        sbs = single_best_from_matrix(scenario.par10_matrix[scenario.indices(train)])
        return [sbs] * len(test)
    if isinstance(spec, RFSpec):
        return [select(row) for row in _rf_scores(spec, scenario, train, test, jobs)]
    if source is None:
        raise NoEmbeddableInstances(f"{spec.name} needs embeddings")
    if isinstance(spec, ZeroFolioSpec):
        return [select(row) for row in _zerofolio_scores(spec, scenario, source, train, test)]
    if isinstance(spec, HybridSpec):
        zf = _zerofolio_scores(spec.zerofolio, scenario, source, train, test)
        rf = _rf_scores(spec.rf, scenario, train, test, jobs)
        return [select(hybrid_soft_vote(a, b, spec.alpha)) for a, b in zip(zf, rf)]
    raise TypeError(f"unknown selector spec {spec!r}")


TrainHook = Callable[[int, Sequence[str], Sequence[str]], None]


def evaluation_instances(scenario: Scenario, source: Optional[EmbeddingSource]) -> list[str]:
    """Instances usable by every selector: those with embeddings if a source is given."""
    if source is None:
        return list(scenario.instances)
    available = source.available()
    universe = [i for i in scenario.instances if i in available]
    if not universe:
        raise NoEmbeddableInstances(f"no instance of {scenario.name} has an embedding")
    return universe


def cross_validate(
    scenario: Scenario,
    spec: SelectorSpec,
    source: Optional[EmbeddingSource] = None,
    instances: Optional[Sequence[str]] = None,
    jobs: int = 1,
    train_hook: Optional[TrainHook] = None,
) -> list[FoldResult]:
    """Train on folds != f and select on fold f, for every ASlib fold.

    ``instances`` restricts the evaluation universe (both training and test);
    by default it is every instance with an embedding when ``spec`` needs
    embeddings, and all scenario instances otherwise. Folds left without test
    instances are skipped.
    """
    if instances is None:
        instances = evaluation_instances(scenario, source if _needs_embeddings(spec) else None)
    universe = list(instances)
    if not universe:
        raise NoEmbeddableInstances("empty evaluation set")

    def run_fold(fold: int) -> Optional[FoldResult]:
        test = [i for i in universe if scenario.folds[i] == fold]
        train = [i for i in universe if scenario.folds[i] != fold]
        if not test:
            return None
        assert not set(train) & set(test), "test instance leaked into training"
        if not train:
            raise NoEmbeddableInstances(f"fold {fold} has no training instances")
        if train_hook is not None:
            train_hook(fold, train, test)
        picks = _fold_selections(spec, scenario, source, train, test, jobs=1)
        par = scenario.par10_matrix
        return FoldResult(
            fold, {inst: (a, float(par[scenario.index_of(inst), a])) for inst, a in zip(test, picks)}
        )

    folds = scenario.fold_ids
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_fold, folds))
    else:
        results = [run_fold(f) for f in folds]
    return [r for r in results if r is not None]


def overall_par10(results: Sequence[FoldResult]) -> float:
    values = [p for r in results for _, p in r.per_instance.values()]
    if not values:
        raise ValueError("no test instances")
    return _mean(values)


def gap_closed(sbs: float, alg: float, vbs: float) -> float:
    """Percentage of the SBS-VBS gap closed by a selector scoring ``alg``."""
    if not sbs > vbs:
        raise DegenerateGap(f"SBS ({sbs}) must exceed VBS ({vbs})")
    return 100.0 * (sbs - alg) / (sbs - vbs)


def round_half_away(x: float, ndigits: int = 0) -> float:
    """Round half away from zero, ignoring binary noise below 1e-9.

    ``100 * 0.5 / 0.8`` evaluates to 62.49999999999994 in floating point; it
    should still print as 63.
    """
    d = Decimal(x).quantize(Decimal("1e-9"))
    return float(d.quantize(Decimal(1).scaleb(-ndigits), rounding=ROUND_HALF_UP))


# --- Wilcoxon signed-rank ------------------------------------------------------


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_lower_tail(doubled_ranks: Sequence[int], w2: int) -> float:
    """P(W <= w) under random signs, with ranks and statistic doubled to integers."""
    total = sum(doubled_ranks)
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return float(counts[: w2 + 1].sum() / 2.0 ** len(doubled_ranks))


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float], exact_max_n: int = 25) -> float:
    """Two-sided p-value of the paired Wilcoxon signed-rank test.

    Zero differences are dropped. Up to ``exact_max_n`` remaining pairs the
    exact sign-flip distribution of the (average-tie) ranks is used; beyond
    that, the normal approximation with tie and continuity correction.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"paired samples of lengths {len(x)} and {len(y)}")
    d = x - y
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 1.0
    ranks = _average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= exact_max_n:
        doubled = [int(round(2 * r)) for r in ranks]
        p = 2.0 * _exact_lower_tail(doubled, int(round(2 * w)))
        return min(1.0, p)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    if var <= 0:
        return 1.0
    z = (w - mean + 0.5) / math.sqrt(var)
    z = min(z, 0.0)
    return min(1.0, math.erfc(-z / math.sqrt(2.0)))


# --- reports ---------------------------------------------------------------------


@dataclass
class SelectorSummary:
    fold_par10: dict[int, float]
    fold_instances: dict[int, int]
    overall_par10: float
    gap_closed: Optional[float]

    def to_dict(self) -> dict:
        return {
            "fold_par10": {str(k): v for k, v in sorted(self.fold_par10.items())},
            "fold_instances": {str(k): v for k, v in sorted(self.fold_instances.items())},
            "overall_par10": self.overall_par10,
            "gap_closed": self.gap_closed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SelectorSummary":
        return cls(
            {int(k): float(v) for k, v in d["fold_par10"].items()},
            {int(k): int(v) for k, v in d["fold_instances"].items()},
            float(d["overall_par10"]),
            None if d["gap_closed"] is None else float(d["gap_closed"]),
        )


@dataclass
class EvaluationReport:
    scenario_name: str
    selectors: dict[str, SelectorSummary]
    sbs_par10: float
    vbs_par10: float
    sbs_par10_full: float
    vbs_par10_full: float
    significance: dict[str, float]
    instance_counts: dict[str, int]
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "scenario": self.scenario_name,
            "selectors": {name: s.to_dict() for name, s in self.selectors.items()},
            "selector_order": list(self.selectors),
            "sbs_par10": self.sbs_par10,
            "vbs_par10": self.vbs_par10,
            "sbs_par10_full": self.sbs_par10_full,
            "vbs_par10_full": self.vbs_par10_full,
            "significance": dict(self.significance),
            "instance_counts": dict(self.instance_counts),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvaluationReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {d.get('schema_version')}")
        order = d.get("selector_order") or list(d["selectors"])
        return cls(
            scenario_name=d["scenario"],
            selectors={name: SelectorSummary.from_dict(d["selectors"][name]) for name in order},
            sbs_par10=float(d["sbs_par10"]),
            vbs_par10=float(d["vbs_par10"]),
            sbs_par10_full=float(d["sbs_par10_full"]),
            vbs_par10_full=float(d["vbs_par10_full"]),
            significance={k: float(v) for k, v in d["significance"].items()},
            instance_counts={k: int(v) for k, v in d["instance_counts"].items()},
        )

    def __eq__(self, other):
        if not isinstance(other, EvaluationReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _mean_sbs_vbs(scenario: Scenario, instances: Sequence[str]) -> tuple[float, float]:
    par = scenario.par10_matrix[scenario.indices(instances)]
    sbs = single_best_from_matrix(par)
    return _mean(par[:, sbs]), _mean(par.min(axis=1))


def summarize(
    scenario: Scenario,
    results: Mapping[str, Sequence[FoldResult]],
    universe: Sequence[str],
) -> EvaluationReport:
    sbs, vbs = _mean_sbs_vbs(scenario, universe)
    sbs_full, vbs_full = _mean_sbs_vbs(scenario, scenario.instances)
    cutoff10 = 10 * scenario.cutoff_seconds
    summaries = {}
    for name, folds in results.items():
        for r in folds:
            for inst, (_, p) in r.per_instance.items():
                best = float(scenario.par10_matrix[scenario.index_of(inst)].min())
                assert best <= p <= cutoff10, f"{name}: PAR10 {p} of {inst} outside [VBS, 10*cutoff]"
        overall = overall_par10(folds)
        try:
            gap = gap_closed(sbs, overall, vbs)
        except DegenerateGap:
            gap = None
        summaries[name] = SelectorSummary(
            {r.fold: r.mean_par10 for r in folds},
            {r.fold: r.n_instances for r in folds},
            overall,
            gap,
        )
    significance = {}
    for a, b in itertools.combinations(summaries, 2):
        folds = sorted(set(summaries[a].fold_par10) & set(summaries[b].fold_par10))
        significance[f"{a} vs {b}"] = wilcoxon_signed_rank(
            [summaries[a].fold_par10[f] for f in folds],
            [summaries[b].fold_par10[f] for f in folds],
        )
    return EvaluationReport(
        scenario_name=scenario.name,
        selectors=summaries,
        sbs_par10=sbs,
        vbs_par10=vbs,
        sbs_par10_full=sbs_full,
        vbs_par10_full=vbs_full,
        significance=significance,
        instance_counts={"total": len(scenario.instances), "embedded": len(universe)},
    )


def evaluate_scenario(
    scenario: Scenario,
    specs: Sequence[SelectorSpec],
    source: Optional[EmbeddingSource] = None,
    jobs: int = 1,
) -> EvaluationReport:
    """Cross-validate every spec on a shared instance set and summarize.

    All selectors use the embedded (manifest-available) instances so they
    share one SBS-VBS denominator; SBS/VBS over the full scenario are
    reported alongside.
    """
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError(f"selector names must be unique: {names}")
    universe = evaluation_instances(scenario, source)
    results = {s.name: cross_validate(scenario, s, source, universe, jobs=jobs) for s in specs}
    return summarize(scenario, results, universe)


# --- output formats ------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_par10(x: float) -> str:
    if abs(x) < 100:
        return f"{round_half_away(x, 1):.1f}"
    return f"{round_half_away(x):.0f}"


def _fmt_gap(g: Optional[float]) -> str:
    if g is None:
        return "n/a"
    return str(int(round_half_away(g)))


def report_csv(reports: Sequence[EvaluationReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "selector", "fold", "instances", "par10_mean"])
    for rep in reports:
        for name, s in rep.selectors.items():
            for fold in sorted(s.fold_par10):
                w.writerow([rep.scenario_name, name, fold, s.fold_instances[fold], _fmt(s.fold_par10[fold])])
            w.writerow([rep.scenario_name, name, "all", sum(s.fold_instances.values()), _fmt(s.overall_par10)])
    return buf.getvalue()


def report_markdown(reports: Sequence[EvaluationReport]) -> str:
    """One row per scenario: SBS, each selector, VBS, then gap closed per selector."""
    names: list[str] = []
    for rep in reports:
        names += [n for n in rep.selectors if n not in names]
    header = ["Scenario", "SBS", *names, "VBS", *(f"Gap% {n}" for n in names)]
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] + ["---:"] * (len(header) - 1)) + "|"]
    for rep in reports:
        cells = [rep.scenario_name, _fmt_par10(rep.sbs_par10)]
        cells += [_fmt_par10(rep.selectors[n].overall_par10) if n in rep.selectors else "" for n in names]
        cells.append(_fmt_par10(rep.vbs_par10))
        cells += [_fmt_gap(rep.selectors[n].gap_closed) if n in rep.selectors else "" for n in names]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def report_json(reports: Sequence[EvaluationReport]) -> str:
    payload = reports[0].to_dict() if len(reports) == 1 else [r.to_dict() for r in reports]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> list[EvaluationReport]:
    payload = json.loads(text)
    if isinstance(payload, dict):
        payload = [payload]
    return [EvaluationReport.from_dict(d) for d in payload]


def emit_report(report: Union[EvaluationReport, Sequence[EvaluationReport]], fmt: str) -> str:
    reports = [report] if isinstance(report, EvaluationReport) else list(report)
    fmt = fmt.lower()
    if fmt == "csv":
        return report_csv(reports)
    if fmt == "markdown":
        return report_markdown(reports)
    if fmt == "json":
        return report_json(reports)
    raise ValueError(f"unknown report format {fmt!r}")


# --- ablation grid -----------------------------------------------------------------

ABLATION_DIMENSIONS = ("shuffle", "metric", "weighting", "k", "seeds")


@dataclass(frozen=True)
class AblationVariant:
    dimension: str
    variant: str
    shuffle: bool
    config: SelectorConfig
    n_seeds: int


def ablation_variants(
    dimensions: Sequence[str] = ABLATION_DIMENSIONS,
    standard: SelectorConfig = SelectorConfig(),
    include_naive: Optional[bool] = None,
) -> list[AblationVariant]:
    """Standard configuration plus one-dimension-at-a-time departures from it.

    The naive baseline (no shuffle, cosine, uniform) is added when the full
    grid is requested, or when ``include_naive`` says so.
    """
    unknown = set(dimensions) - set(ABLATION_DIMENSIONS)
    if unknown:
        raise ValueError(f"unknown ablation dimensions: {sorted(unknown)}")
    out = [AblationVariant("standard", "standard", True, standard, 1)]
    if "shuffle" in dimensions:
        out.append(AblationVariant("serialization", "raw (no shuffle)", False, standard, 1))
    if "metric" in dimensions:
        out.append(AblationVariant("distance", "cosine", True, replace(standard, metric="cosine"), 1))
    if "weighting" in dimensions:
        out.append(AblationVariant("weighting", "uniform", True, replace(standard, weighting="uniform"), 1))
    if "k" in dimensions:
        for k in (5, 10, 20):
            if k != standard.k:
                out.append(AblationVariant("k", f"k={k}", True, replace(standard, k=k), 1))
    if "seeds" in dimensions:
        out.append(AblationVariant("voting", "2 seeds", True, standard, 2))
    if include_naive is None:
        include_naive = set(dimensions) == set(ABLATION_DIMENSIONS)
    if include_naive:
        naive = replace(standard, metric="cosine", weighting="uniform")
        out.append(AblationVariant("naive", "raw + cosine + uniform", False, naive, 1))
    return out
