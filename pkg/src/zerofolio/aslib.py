"""ASlib scenario ingestion, instance manifests and PAR10 scoring."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import yaml

from .arff import NOMINAL, NUMERIC, STRING, Attribute, Relation, dump_arff, parse_arff
from .errors import (
    InconsistentScenario,
    ManifestError,
    MissingFile,
    UnknownInstance,
)

log = logging.getLogger(__name__)

PAR_FACTOR = 10


@dataclass(frozen=True)
class RunRecord:
    runtime_seconds: float
    solved: bool


def par10(run: RunRecord, cutoff_seconds: float) -> float:
    if run.solved:
        return run.runtime_seconds
    return PAR_FACTOR * cutoff_seconds


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Scenario:
    """An in-memory ASlib scenario.

    ``runtimes`` and ``solved`` are dense ``(n_instances, n_algorithms)``
    arrays; ``features`` uses NaN for missing values. All arrays are read-only.
    """

    name: str
    algorithms: tuple[str, ...]
    cutoff_seconds: float
    instances: tuple[str, ...]
    runtimes: np.ndarray
    solved: np.ndarray
    folds: Mapping[str, int]
    features: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    feature_names: tuple[str, ...] = ()
    dropped_instances: int = 0

    def __post_init__(self):
        n, a = len(self.instances), len(self.algorithms)
        if a < 2:
            raise InconsistentScenario("a scenario needs at least two algorithms")
        if len(set(self.algorithms)) != a:
            raise InconsistentScenario("duplicate algorithm names")
        if not self.cutoff_seconds > 0:
            raise InconsistentScenario("cutoff must be positive")
        if len(set(self.instances)) != n:
            raise InconsistentScenario("duplicate instance ids")
        runtimes = np.asarray(self.runtimes, dtype=float)
        solved = np.asarray(self.solved, dtype=bool)
        if runtimes.shape != (n, a) or solved.shape != (n, a):
            raise InconsistentScenario("run matrix shape does not match instances x algorithms")
        if np.any(runtimes < 0) or not np.all(np.isfinite(runtimes)):
            raise InconsistentScenario("runtimes must be finite and non-negative")
        if np.any(runtimes[solved] > self.cutoff_seconds):
            raise InconsistentScenario("solved run exceeds cutoff")
        missing = [i for i in self.instances if i not in self.folds]
        if missing:
            raise InconsistentScenario(f"{len(missing)} instances without a fold, e.g. {missing[0]}")
        features = np.asarray(self.features, dtype=float)
        if features.size == 0:
            features = np.full((n, 0), np.nan)
        if features.shape[0] != n:
            raise InconsistentScenario("feature matrix row count does not match instances")
        object.__setattr__(self, "runtimes", _frozen(runtimes))
        object.__setattr__(self, "solved", _frozen(solved))
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "folds", {i: int(self.folds[i]) for i in self.instances})
        object.__setattr__(self, "_index", {inst: k for k, inst in enumerate(self.instances)})
        par = np.where(solved, runtimes, PAR_FACTOR * self.cutoff_seconds)
        object.__setattr__(self, "_par10", _frozen(par))

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.name == other.name
            and self.algorithms == other.algorithms
            and self.cutoff_seconds == other.cutoff_seconds
            and self.instances == other.instances
            and dict(self.folds) == dict(other.folds)
            and self.feature_names == other.feature_names
            and self.dropped_instances == other.dropped_instances
            and np.array_equal(self.runtimes, other.runtimes)
            and np.array_equal(self.solved, other.solved)
            and np.array_equal(self.features, other.features, equal_nan=True)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def par10_matrix(self) -> np.ndarray:
        return self._par10

    @property
    def fold_ids(self) -> list[int]:
        return sorted(set(self.folds.values()))

    def index_of(self, instance: str) -> int:
        try:
            return self._index[instance]
        except KeyError:
            raise UnknownInstance(instance) from None

    def indices(self, instances: Iterable[str]) -> np.ndarray:
        return np.array([self.index_of(i) for i in instances], dtype=int)

    def run(self, instance: str, algorithm: int) -> RunRecord:
        i = self.index_of(instance)
        return RunRecord(float(self.runtimes[i, algorithm]), bool(self.solved[i, algorithm]))

    def fold_instances(self, fold: int) -> list[str]:
        return [i for i in self.instances if self.folds[i] == fold]


# --- description.txt -------------------------------------------------------


def _as_list(value) -> list[str]:
    if value is None or value == "?":
        return []
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    if isinstance(value, dict):
        return [str(k) for k in value]
    return [str(v) for v in value]


def _plain_key_values(text: str) -> dict:
    out: dict = {}
    for line in text.splitlines():
        if ":" not in line or line.startswith((" ", "\t", "-")):
            continue
        key, _, value = line.partition(":")
        out[key.strip()] = value.strip()
    return out


def parse_description(text: str) -> dict:
    """Parse ``description.txt`` (YAML in current ASlib, ``key: a,b,c`` in old releases)."""
    try:
        meta = yaml.safe_load(text)
    except yaml.YAMLError:
        meta = None
    if not isinstance(meta, dict):
        meta = _plain_key_values(text)
    for key in ("scenario_id", "algorithm_cutoff_time"):
        if key not in meta:
            raise InconsistentScenario(f"description.txt lacks required key {key!r}")
    algorithms: list[str] = []
    if meta.get("metainfo_algorithms"):
        algorithms = _as_list(meta["metainfo_algorithms"])
    else:
        algorithms = _as_list(meta.get("algorithms_deterministic")) + _as_list(
            meta.get("algorithms_stochastic")
        )
    if not algorithms:
        raise InconsistentScenario("description.txt lists no algorithms")
    try:
        cutoff = float(meta["algorithm_cutoff_time"])
    except (TypeError, ValueError):
        raise InconsistentScenario("algorithm_cutoff_time is not a number") from None
    measures = _as_list(meta.get("performance_measures"))
    return {
        "scenario_id": str(meta["scenario_id"]),
        "cutoff": cutoff,
        "algorithms": algorithms,
        "performance_measure": measures[0] if measures else None,
    }


# --- scenario loading ------------------------------------------------------


def _read_relation(directory: Path, name: str) -> Relation:
    path = directory / name
    if not path.is_file():
        raise MissingFile(name)
    return parse_arff(path.read_text(encoding="utf-8", errors="replace"))


def _first_repetition(rel: Relation, key_cols: list[int]) -> list[list]:
    """Rows of repetition 1 (if a repetition column exists), first occurrence per key."""
    try:
        rep_col = rel.column_index("repetition")
    except KeyError:
        rep_col = None
    seen = set()
    rows = []
    for row in rel.rows:
        if rep_col is not None and row[rep_col] is not None and row[rep_col] != 1.0:
            continue
        key = tuple(row[c] for c in key_cols)
        if key in seen:
            continue
        seen.add(key)
        rows.append(row)
    return rows


def _performance_column(rel: Relation, measure: str | None) -> int:
    for name in filter(None, (measure, "runtime")):
        try:
            return rel.column_index(name)
        except KeyError:
            pass
    if len(rel.attributes) < 5:
        raise InconsistentScenario("algorithm_runs.arff has no performance column")
    return 3


def load_scenario(directory: str | Path) -> Scenario:
    directory = Path(directory)
    desc_path = directory / "description.txt"
    if not desc_path.is_file():
        raise MissingFile("description.txt")
    meta = parse_description(desc_path.read_text(encoding="utf-8", errors="replace"))
    runs_rel = _read_relation(directory, "algorithm_runs.arff")
    cv_rel = _read_relation(directory, "cv.arff")

    algorithms = meta["algorithms"]
    alg_index = {a: k for k, a in enumerate(algorithms)}
    cutoff = meta["cutoff"]

    try:
        inst_col = runs_rel.column_index("instance_id")
        alg_col = runs_rel.column_index("algorithm")
        status_col = runs_rel.column_index("runstatus")
    except KeyError as exc:
        raise InconsistentScenario(f"algorithm_runs.arff lacks column {exc}") from None
    perf_col = _performance_column(runs_rel, meta["performance_measure"])

    cv_inst = cv_rel.column_index("instance_id")
    cv_fold = cv_rel.column_index("fold")
    folds: dict[str, int] = {}
    for row in _first_repetition(cv_rel, [cv_inst]):
        if row[cv_fold] is None:
            raise InconsistentScenario(f"instance {row[cv_inst]} has no fold")
        folds[str(row[cv_inst])] = int(row[cv_fold])

    order: list[str] = []
    seen: set[str] = set()
    records: dict[tuple[str, int], tuple[float, bool]] = {}
    dropped: set[str] = set()
    for row in _first_repetition(runs_rel, [inst_col, alg_col]):
        inst, alg = str(row[inst_col]), str(row[alg_col])
        if alg not in alg_index:
            raise InconsistentScenario(f"algorithm {alg!r} in runs is absent from description")
        if inst not in folds:
            dropped.add(inst)
            continue
        status = str(row[status_col]).lower() if row[status_col] is not None else ""
        runtime = row[perf_col]
        solved = status == "ok"
        if runtime is None:
            if solved:
                raise InconsistentScenario(f"solved run of {inst}/{alg} has no runtime")
            runtime = cutoff
        runtime = max(float(runtime), 0.0)
        if solved and runtime > cutoff:
            runtime = cutoff
        if inst not in seen:
            seen.add(inst)
            order.append(inst)
        records[(inst, alg_index[alg])] = (runtime, solved)

    if dropped:
        log.warning("%d instances in algorithm_runs.arff are absent from cv.arff; dropped", len(dropped))

    missing_runs = [i for i in folds if i not in seen]
    if missing_runs:
        raise InconsistentScenario(f"{len(missing_runs)} cv instances have no runs, e.g. {missing_runs[0]}")

    n, a = len(order), len(algorithms)
    runtimes = np.zeros((n, a))
    solved = np.zeros((n, a), dtype=bool)
    for i, inst in enumerate(order):
        for j in range(a):
            try:
                runtimes[i, j], solved[i, j] = records[(inst, j)]
            except KeyError:
                raise InconsistentScenario(
                    f"no run for instance {inst!r} and algorithm {algorithms[j]!r}"
                ) from None

    features, feature_names = _load_features(directory, order)
    return Scenario(
        name=meta["scenario_id"],
        algorithms=tuple(algorithms),
        cutoff_seconds=cutoff,
        instances=tuple(order),
        runtimes=runtimes,
        solved=solved,
        folds=folds,
        features=features,
        feature_names=feature_names,
        dropped_instances=len(dropped),
    )


def _load_features(directory: Path, instances: list[str]) -> tuple[np.ndarray, tuple[str, ...]]:
    path = directory / "feature_values.arff"
    if not path.is_file():
        return np.full((len(instances), 0), np.nan), ()
    rel = parse_arff(path.read_text(encoding="utf-8", errors="replace"))
    inst_col = rel.column_index("instance_id")
    skip = {inst_col}
    try:
        skip.add(rel.column_index("repetition"))
    except KeyError:
        pass
    cols = [k for k in range(len(rel.attributes)) if k not in skip]
    names = tuple(rel.attributes[k].name for k in cols)
    by_instance = {str(row[inst_col]): row for row in _first_repetition(rel, [inst_col])}
    out = np.full((len(instances), len(cols)), np.nan)
    for i, inst in enumerate(instances):
        row = by_instance.get(inst)
        if row is None:
            continue
        for j, c in enumerate(cols):
            v = row[c]
            if isinstance(v, float):
                out[i, j] = v
    return out, names


def write_scenario(scenario: Scenario, directory: str | Path) -> Path:
    """Write ``scenario`` as an ASlib directory that :func:`load_scenario` reads back."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    desc = {
        "scenario_id": scenario.name,
        "performance_measures": ["runtime"],
        "performance_type": ["runtime"],
        "algorithm_cutoff_time": scenario.cutoff_seconds,
        "algorithms_deterministic": list(scenario.algorithms),
        "algorithms_stochastic": [],
    }
    (directory / "description.txt").write_text(yaml.safe_dump(desc, sort_keys=False), encoding="utf-8")

    status = Attribute("runstatus", NOMINAL, ("ok", "timeout"))
    runs = Relation(
        "ALGORITHM_RUNS",
        [
            Attribute("instance_id", STRING),
            Attribute("repetition", NUMERIC),
            Attribute("algorithm", STRING),
            Attribute("runtime", NUMERIC),
            status,
        ],
    )
    for i, inst in enumerate(scenario.instances):
        for j, alg in enumerate(scenario.algorithms):
            ok = bool(scenario.solved[i, j])
            runs.rows.append([inst, 1.0, alg, float(scenario.runtimes[i, j]), "ok" if ok else "timeout"])
    (directory / "algorithm_runs.arff").write_text(dump_arff(runs), encoding="utf-8")

    cv = Relation(
        "CV", [Attribute("instance_id", STRING), Attribute("repetition", NUMERIC), Attribute("fold", NUMERIC)]
    )
    cv.rows = [[inst, 1.0, float(scenario.folds[inst])] for inst in scenario.instances]
    (directory / "cv.arff").write_text(dump_arff(cv), encoding="utf-8")

    if scenario.feature_names:
        attrs = [Attribute("instance_id", STRING), Attribute("repetition", NUMERIC)]
        attrs += [Attribute(n, NUMERIC) for n in scenario.feature_names]
        feats = Relation("FEATURES", attrs)
        for i, inst in enumerate(scenario.instances):
            vals = [None if np.isnan(v) else float(v) for v in scenario.features[i]]
            feats.rows.append([inst, 1.0, *vals])
        (directory / "feature_values.arff").write_text(dump_arff(feats), encoding="utf-8")
    return directory


# --- instance manifest -----------------------------------------------------


@dataclass(frozen=True)
class InstanceManifest:
    """Maps instance IDs to one or more raw instance files, in concatenation order."""

    entries: Mapping[str, tuple[Path, ...]]

    def __post_init__(self):
        for inst, paths in self.entries.items():
            if not paths:
                raise ManifestError(f"instance {inst!r} has no files")

    def __contains__(self, instance: str) -> bool:
        return instance in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, instance: str) -> tuple[Path, ...]:
        return self.entries[instance]

    def restrict(self, instances: Iterable[str]) -> list[str]:
        """Instances (in the given order) that have files in this manifest."""
        return [i for i in instances if i in self.entries]


def parse_manifest(text: str, base_dir: str | Path = ".") -> InstanceManifest:
    base = Path(base_dir)
    entries: dict[str, tuple[Path, ...]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\r").split("\t")
        inst, paths = parts[0], [p for p in parts[1:] if p]
        if not paths:
            raise ManifestError(f"line {lineno}: instance {inst!r} has no files")
        if inst in entries:
            raise ManifestError(f"line {lineno}: duplicate instance {inst!r}")
        entries[inst] = tuple(p if p.is_absolute() else base / p for p in map(Path, paths))
    return InstanceManifest(entries)


def load_manifest(path: str | Path) -> InstanceManifest:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    return parse_manifest(path.read_text(encoding="utf-8"), path.parent)


def write_manifest(manifest: InstanceManifest) -> str:
    lines = ["\t".join([inst, *map(str, paths)]) for inst, paths in manifest.entries.items()]
    return "\n".join(lines) + ("\n" if lines else "")
