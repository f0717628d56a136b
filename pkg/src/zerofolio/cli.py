"""Command-line entry point: ``zerofolio {embed,evaluate,ablate,select,report}``.

Settings resolve as command-line flags, then a TOML config file
(``--config``), then the built-in standard configuration (k=10, Manhattan,
inverse-distance weighting, shuffled 10,000-character serialization).

Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 backend error,
4 partial failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import httpx
import numpy as np

from . import __version__
from .aslib import InstanceManifest, Scenario, load_manifest, load_scenario
from .baseline import RandomForestConfig
from .cache import CacheKey, cache_get, cache_put
from .embed import (
    DEFAULT_API_KEY_ENV,
    BackendConfig,
    BackendKind,
    PrecomputedEmbeddings,
    TfIdfEmbeddings,
    embed_remote,
)
from .errors import BackendError, DataError, ZeroFolioError
from .evaluation import (
    ABLATION_DIMENSIONS,
    EvaluationReport,
    HybridSpec,
    OracleSpec,
    RFSpec,
    SBSSpec,
    SelectorSpec,
    ZeroFolioSpec,
    ablation_variants,
    emit_report,
    evaluate_scenario,
    evaluation_instances,
    report_from_json,
)
from .pipeline import (
    EmbedSummary,
    embed_texts,
    fit_tfidf_corpus,
    load_state,
    save_state,
    serialize_manifest,
    state_training_vectors,
)
from .selector import SelectorConfig, TrainedSelector, score_algorithms, select, vote_scores
from .serialize import SerializationConfig, read_instance_files, serialize_instance
from .tfidf import TfIdfModel

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("zerofolio")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND, EXIT_PARTIAL = 0, 1, 2, 3, 4

DEFAULTS: dict[str, Any] = {
    "scenario_dir": None,
    "manifest": None,
    "cache_dir": ".zerofolio-cache",
    "backend": "tfidf",
    "model": "",
    "endpoint": "",
    "api_key_env": DEFAULT_API_KEY_ENV,
    "dimensions": 3072,
    "budget": 10_000,
    "seeds": "0",
    "no_shuffle": False,
    "k": 10,
    "metric": "manhattan",
    "weighting": "inverse",
    "alpha": 0.5,
    "selectors": "sbs,rf,zf,zf-v2",
    "rf_trees": 100,
    "rf_seed": 0,
    "output": None,
    "format": "json",
    "jobs": os.cpu_count() or 1,
    "state": None,
    "grid": ",".join(ABLATION_DIMENSIONS),
}


class UsageError(ZeroFolioError):
    pass


@dataclass
class RunConfig:
    scenario_dir: Optional[Path]
    manifest: Optional[Path]
    cache_dir: Path
    backend: BackendConfig
    serialization: SerializationConfig
    selector: SelectorConfig
    seeds: tuple[int, ...]
    alpha: float
    output: Optional[Path]
    format: str
    selectors: tuple[str, ...] = ("sbs", "rf", "zf", "zf-v2")
    jobs: int = 1
    api_key_env: str = DEFAULT_API_KEY_ENV
    rf: RandomForestConfig = field(default_factory=RandomForestConfig)
    state: Optional[Path] = None
    grid: tuple[str, ...] = ABLATION_DIMENSIONS

    @property
    def api_key(self) -> Optional[str]:
        return os.environ.get(self.api_key_env)


def _parse_seeds(value) -> tuple[int, ...]:
    if isinstance(value, int):
        return (value,)
    if isinstance(value, str):
        parts = [p for p in value.replace(" ", "").split(",") if p]
    else:
        parts = list(value)
    try:
        seeds = tuple(int(p) for p in parts)
    except ValueError:
        raise UsageError(f"seeds must be integers, got {value!r}") from None
    if not seeds:
        raise UsageError("at least one seed is required")
    return seeds


def _parse_list(value) -> tuple[str, ...]:
    if isinstance(value, str):
        return tuple(p.strip() for p in value.split(",") if p.strip())
    return tuple(value)


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    out = {}
    for key, value in raw.items():
        key = key.replace("-", "_")
        if key == "shuffle":
            key, value = "no_shuffle", not value
        if key not in DEFAULTS:
            raise UsageError(f"unknown config key {key!r} in {path}")
        out[key] = value
    return out


def build_run_config(args: argparse.Namespace) -> RunConfig:
    given = {k: v for k, v in vars(args).items() if k in DEFAULTS}
    merged = {**DEFAULTS, **_load_config_file(getattr(args, "config", None)), **given}
    try:
        backend = BackendConfig(
            kind=merged["backend"],
            model_id=merged["model"],
            endpoint_url=merged["endpoint"],
            dimensions=int(merged["dimensions"]),
        )
        seeds = _parse_seeds(merged["seeds"])
        serialization = SerializationConfig(
            budget_chars=int(merged["budget"]), seed=seeds[0], shuffle=not merged["no_shuffle"]
        )
        selector = SelectorConfig(k=int(merged["k"]), metric=merged["metric"], weighting=merged["weighting"])
        rf = RandomForestConfig(n_trees=int(merged["rf_trees"]), seed=int(merged["rf_seed"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    alpha = float(merged["alpha"])
    if not 0 <= alpha <= 1:
        raise UsageError("alpha must lie in [0, 1]")
    fmt = str(merged["format"]).lower()
    if fmt not in ("csv", "markdown", "json"):
        raise UsageError(f"unknown format {fmt!r}")
    path = lambda v: Path(v) if v else None  # noqa: E731
    return RunConfig(
        scenario_dir=path(merged["scenario_dir"]),
        manifest=path(merged["manifest"]),
        cache_dir=Path(merged["cache_dir"]),
        backend=backend,
        serialization=serialization,
        selector=selector,
        seeds=seeds,
        alpha=alpha,
        output=path(merged["output"]),
        format=fmt,
        selectors=_parse_list(merged["selectors"]),
        jobs=max(1, int(merged["jobs"])),
        api_key_env=merged["api_key_env"],
        rf=rf,
        state=path(merged["state"]),
        grid=_parse_list(merged["grid"]),
    )


# --- selectors --------------------------------------------------------------------


def two_seeds(seeds: Sequence[int]) -> tuple[int, ...]:
    return tuple(seeds[:2]) if len(seeds) >= 2 else (seeds[0], seeds[0] + 1)


def selector_specs(cfg: RunConfig, names: Optional[Sequence[str]] = None) -> list[SelectorSpec]:
    rf = RFSpec(cfg.rf)
    zf = ZeroFolioSpec(cfg.selector, (cfg.seeds[0],), "ZF")
    table = {
        "sbs": lambda: SBSSpec(),
        "oracle": lambda: OracleSpec(),
        "rf": lambda: rf,
        "zf": lambda: zf,
        "zf-v2": lambda: ZeroFolioSpec(cfg.selector, two_seeds(cfg.seeds), "ZF-v2"),
        "zf-vote": lambda: ZeroFolioSpec(cfg.selector, cfg.seeds, f"ZF-vote{len(cfg.seeds)}"),
        "hybrid": lambda: HybridSpec(zf, rf, cfg.alpha, f"Hybrid(a={cfg.alpha:g})"),
        "concat": lambda: ZeroFolioSpec(cfg.selector, (cfg.seeds[0],), "ZF+features", with_features=True),
    }
    specs = []
    for name in names or cfg.selectors:
        if name.lower() not in table:
            raise UsageError(f"unknown selector {name!r}; choose from {', '.join(table)}")
        specs.append(table[name.lower()]())
    return specs


def _spec_seeds(specs: Sequence[SelectorSpec]) -> tuple[int, ...]:
    seeds: list[int] = []
    for spec in specs:
        zf = spec.zerofolio if isinstance(spec, HybridSpec) else spec
        if isinstance(zf, ZeroFolioSpec):
            seeds += [s for s in zf.seeds if s not in seeds]
    return tuple(seeds)


# --- shared loading ---------------------------------------------------------------


def _require(value, flag: str):
    if value is None:
        raise UsageError(f"{flag} is required")
    return value


def _load_inputs(cfg: RunConfig) -> tuple[Scenario, InstanceManifest]:
    scenario = load_scenario(_require(cfg.scenario_dir, "--scenario-dir"))
    manifest = load_manifest(_require(cfg.manifest, "--manifest"))
    return scenario, manifest


def build_source(
    cfg: RunConfig,
    scenario: Scenario,
    manifest: InstanceManifest,
    seeds: Sequence[int],
    shuffle: bool,
    transport: Optional[httpx.BaseTransport] = None,
):
    texts = serialize_manifest(manifest, scenario.instances, seeds, cfg.serialization.budget_chars, shuffle)
    if cfg.backend.kind is BackendKind.TFIDF:
        return TfIdfEmbeddings(texts, cfg.backend)
    summary = EmbedSummary()
    vectors, _ = embed_texts(texts, cfg.backend, cfg.cache_dir, cfg.api_key, transport, summary)
    if summary.failed:
        log.warning("%d embeddings failed; those instances are excluded", summary.failed)
    return PrecomputedEmbeddings(vectors)


def _write_output(text: str, output: Optional[Path]) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text, encoding="utf-8")


# --- commands -------------------------------------------------------------------------


def cmd_embed(cfg: RunConfig, transport: Optional[httpx.BaseTransport] = None) -> EmbedSummary:
    manifest = load_manifest(_require(cfg.manifest, "--manifest"))
    if cfg.scenario_dir is not None:
        instances = list(load_scenario(cfg.scenario_dir).instances)
    else:
        instances = list(manifest.entries)
    summary = EmbedSummary()
    texts = serialize_manifest(
        manifest, instances, cfg.seeds, cfg.serialization.budget_chars, cfg.serialization.shuffle, summary
    )
    embed_texts(texts, cfg.backend, cfg.cache_dir, cfg.api_key, transport, summary)
    return summary


def cmd_evaluate(cfg: RunConfig, transport: Optional[httpx.BaseTransport] = None) -> EvaluationReport:
    specs = selector_specs(cfg)
    scenario = load_scenario(_require(cfg.scenario_dir, "--scenario-dir"))
    seeds = _spec_seeds(specs)
    source = None
    if seeds or cfg.manifest is not None:
        manifest = load_manifest(_require(cfg.manifest, "--manifest"))
        source = build_source(cfg, scenario, manifest, seeds or cfg.seeds[:1], cfg.serialization.shuffle, transport)
    report = evaluate_scenario(scenario, specs, source, jobs=cfg.jobs)
    _write_output(emit_report(report, cfg.format), cfg.output)
    if cfg.state is not None:
        if source is None:
            raise UsageError("--state needs --manifest")
        _save_selector_state(cfg, scenario, manifest, evaluation_instances(scenario, source), transport)
    return report


def _save_selector_state(cfg, scenario, manifest, instances, transport) -> None:
    """Train on every embedded instance and persist cache references for ``select``."""
    texts = serialize_manifest(
        manifest, instances, cfg.seeds, cfg.serialization.budget_chars, cfg.serialization.shuffle
    )
    _, model_ids = embed_texts(texts, cfg.backend, cfg.cache_dir, cfg.api_key, transport)
    refs = {s: {i: CacheKey.for_text(t, model_ids[s]).hex for i, t in m.items()} for s, m in texts.items()}
    idf = None
    if cfg.backend.kind is BackendKind.TFIDF:
        idf = {s: fit_tfidf_corpus(m, cfg.backend).idf for s, m in texts.items()}
    save_state(
        cfg.state,
        scenario_name=scenario.name,
        algorithms=scenario.algorithms,
        instances=instances,
        par10=scenario.par10_matrix[scenario.indices(instances)],
        selector={"k": cfg.selector.k, "metric": cfg.selector.metric.value, "weighting": cfg.selector.weighting.value},
        seeds=cfg.seeds,
        serialization={"budget_chars": cfg.serialization.budget_chars, "shuffle": cfg.serialization.shuffle},
        backend=cfg.backend,
        cache_refs=refs,
        model_ids=model_ids,
        idf=idf,
    )


def cmd_ablate(cfg: RunConfig, transport: Optional[httpx.BaseTransport] = None) -> str:
    scenario, manifest = _load_inputs(cfg)
    variants = ablation_variants(cfg.grid, cfg.selector)
    seeds = two_seeds(cfg.seeds)
    sources = {}
    rows = []
    standard = None
    for v in variants:
        if v.shuffle not in sources:
            sources[v.shuffle] = build_source(cfg, scenario, manifest, seeds, v.shuffle, transport)
        spec = ZeroFolioSpec(v.config, seeds[: v.n_seeds], v.variant)
        report = evaluate_scenario(scenario, [spec], sources[v.shuffle], jobs=cfg.jobs)
        par = report.selectors[v.variant].overall_par10
        standard = par if standard is None else standard
        rows.append([scenario.name, v.dimension, v.variant, repr(par), f"{100 * (par - standard) / standard:+.1f}"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "dimension", "variant", "par10", "delta_percent"])
    w.writerows(rows)
    text = buf.getvalue()
    _write_output(text, cfg.output)
    return text


def cmd_select(
    cfg: RunConfig, instance_files: Sequence[str], transport: Optional[httpx.BaseTransport] = None
) -> tuple[str, np.ndarray]:
    state = load_state(_require(cfg.state, "--state"))
    b = state["backend"]
    backend = BackendConfig(
        kind=b["kind"], model_id=b["model_id"], endpoint_url=b["endpoint_url"],
        dimensions=b["dimensions"], ngram_range=tuple(b["ngram_range"]),
    )
    selector = SelectorConfig(**state["selector"])
    par10 = np.asarray(state["par10"], dtype=float)
    blobs = read_instance_files(instance_files)
    per_seed = []
    for seed in state["seeds"]:
        ser = SerializationConfig(state["serialization"]["budget_chars"], seed, state["serialization"]["shuffle"])
        text = serialize_instance(blobs, ser)
        if backend.kind is BackendKind.TFIDF:
            model = TfIdfModel(state["tfidf_idf"][seed], backend.ngram_range, len(state["instances"]))
            query = model.transform_counts(model.counts(text))
        else:
            key = CacheKey.for_text(text, backend.model_id)
            query = cache_get(key, cfg.cache_dir)
            if query is None:
                query = embed_remote([text], backend, cfg.api_key, transport)[0]
                cache_put(key, query, cfg.cache_dir)
        train = state_training_vectors(state, seed, cfg.cache_dir)
        per_seed.append(score_algorithms(query, TrainedSelector(train, par10, selector)))
    scores = vote_scores(per_seed)
    choice = state["algorithms"][select(scores)]
    lines = [choice] + [f"{a}\t{float(s)!r}" for a, s in zip(state["algorithms"], scores)]
    sys.stdout.write("\n".join(lines) + "\n")
    return choice, scores


def cmd_report(paths: Sequence[str], fmt: str, output: Optional[Path]) -> str:
    reports = []
    for p in paths:
        try:
            reports += report_from_json(Path(p).read_text(encoding="utf-8"))
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"cannot read report {p}: {exc}") from None
    if not reports:
        raise UsageError("no reports given")
    text = emit_report(reports, fmt)
    _write_output(text, output)
    return text


# --- argument parsing --------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file with default settings (flags override it)")
    p.add_argument("--scenario-dir", help="ASlib scenario directory")
    p.add_argument("--manifest", help="instance manifest: <id>\\t<path>[\\t<path>...] per line")
    p.add_argument("--cache-dir", help="embedding cache directory")
    p.add_argument("--backend", choices=["remote", "tfidf"])
    p.add_argument("--model", help="remote embedding model id")
    p.add_argument("--endpoint", help="OpenAI-compatible base URL, e.g. https://api.openai.com/v1")
    p.add_argument("--api-key-env", help=f"environment variable holding the API key (default {DEFAULT_API_KEY_ENV})")
    p.add_argument("--dimensions", type=int, help="TF-IDF dimensionality (default 3072)")
    p.add_argument("--budget", type=int, help="character budget (default 10000)")
    p.add_argument("--seeds", help="comma-separated shuffle seeds (default 0)")
    p.add_argument("--no-shuffle", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("--k", type=int)
    p.add_argument("--metric", choices=["manhattan", "cosine"])
    p.add_argument("--weighting", choices=["inverse", "uniform"])
    p.add_argument("--alpha", type=float, help="hybrid soft-voting weight on ZeroFolio scores")
    p.add_argument("--selectors", help="comma list of sbs,rf,zf,zf-v2,zf-vote,hybrid,concat,oracle")
    p.add_argument("--rf-trees", type=int)
    p.add_argument("--rf-seed", type=int)
    p.add_argument("--output", help="output file (default: stdout)")
    p.add_argument("--format", choices=["csv", "markdown", "json"])
    p.add_argument("--jobs", type=int, help="parallel folds (default: logical CPUs)")
    p.add_argument("--state", help="trained selector state file (written by evaluate, read by select)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zerofolio", description="Feature-free algorithm selection with text embeddings.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in [
        ("embed", "serialize and embed manifest instances into the cache"),
        ("evaluate", "cross-validate selectors on an ASlib scenario"),
        ("ablate", "one-dimension-at-a-time ablation of the k-NN selector"),
        ("select", "pick an algorithm for new instance files"),
    ]:
        p = sub.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)
        _add_common(p)
        if name == "ablate":
            p.add_argument("--grid", help=f"dimensions to vary (default {','.join(ABLATION_DIMENSIONS)})")
        if name == "select":
            p.add_argument("instance_files", nargs="+", help="instance file(s), in concatenation order")
    p = sub.add_parser("report", help="combine JSON reports into one table")
    p.add_argument("reports", nargs="+")
    p.add_argument("--format", choices=["csv", "markdown", "json"], default="markdown")
    p.add_argument("--output")
    return parser


def main(argv: Optional[Sequence[str]] = None, transport: Optional[httpx.BaseTransport] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "report":
            cmd_report(args.reports, args.format, Path(args.output) if args.output else None)
            return EXIT_OK
        cfg = build_run_config(args)
        if args.command == "embed":
            summary = cmd_embed(cfg, transport)
            print(f"embedded={summary.embedded} cached={summary.cached} failed={summary.failed}")
            for inst, seed, reason in summary.failures:
                print(f"failed: {inst} seed={seed}: {reason}", file=sys.stderr)
            return EXIT_PARTIAL if summary.failed else EXIT_OK
        if args.command == "evaluate":
            cmd_evaluate(cfg, transport)
        elif args.command == "ablate":
            cmd_ablate(cfg, transport)
        elif args.command == "select":
            cmd_select(cfg, args.instance_files, transport)
        return EXIT_OK
    except UsageError as exc:
        print(f"zerofolio: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"zerofolio: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (DataError, ZeroFolioError, OSError) as exc:
        print(f"zerofolio: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
