from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from zerofolio.aslib import Scenario, write_scenario
from zerofolio.synthetic import ClusterScenarioConfig, clustered_scenario

_criteria: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    info = dict(report.user_properties).get("criterion")
    if info is None:
        return
    number, title = info
    prev = _criteria.get(number)
    _criteria[number] = (title, report.passed if prev is None else prev[1] and report.passed)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", m.args))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}")


def small_scenario(
    runtimes, solved, folds, cutoff=100.0, name="TINY", features=None, algorithms=None
) -> Scenario:
    runtimes = np.asarray(runtimes, dtype=float)
    n, a = runtimes.shape
    ids = tuple(f"i{k}" for k in range(n))
    feats = np.zeros((n, 0)) if features is None else np.asarray(features, dtype=float)
    return Scenario(
        name=name,
        algorithms=tuple(algorithms or (f"a{j}" for j in range(a))),
        cutoff_seconds=cutoff,
        instances=ids,
        runtimes=runtimes,
        solved=np.asarray(solved, dtype=bool),
        folds=dict(zip(ids, folds)),
        features=feats,
        feature_names=tuple(f"f{j}" for j in range(feats.shape[1])),
    )


def write_instance_corpus(root: Path, scenario: Scenario, cluster) -> Path:
    """Instance files whose text reflects the cluster; returns the manifest path."""
    files = root / "files"
    files.mkdir(parents=True, exist_ok=True)
    lines = []
    for k, inst in enumerate(scenario.instances):
        c = int(cluster[k])
        body = "\n".join(f"c{c} v{c * 7 + j} {j % 3} x{c}" for j in range(25 + k % 7))
        (files / f"{inst}.txt").write_text(body + "\n", encoding="utf-8")
        lines.append(f"{inst}\tfiles/{inst}.txt")
    manifest = root / "manifest.tsv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


@pytest.fixture
def cluster_workspace(tmp_path):
    """A small clustered scenario on disk with text instance files and a manifest."""
    scenario, embeddings, cluster = clustered_scenario(ClusterScenarioConfig(n_per_cluster=6, n_folds=3))
    scen_dir = write_scenario(scenario, tmp_path / "scenario")
    manifest = write_instance_corpus(tmp_path, scenario, cluster)
    return {
        "root": tmp_path,
        "scenario": scenario,
        "scenario_dir": scen_dir,
        "manifest": manifest,
        "cluster": cluster,
        "embeddings": embeddings,
    }
