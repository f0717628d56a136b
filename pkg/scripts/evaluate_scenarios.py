"""Run ``zerofolio evaluate`` over several ASlib scenarios and merge the reports.

Expects one sub-directory per scenario under ``--aslib-root`` and a manifest
named ``<scenario>.tsv`` under ``--manifests``. Scenarios without a manifest
are skipped. Extra arguments after ``--`` go to every evaluate call, e.g.
``-- --backend remote --model text-embedding-3-large --endpoint https://api.openai.com/v1``.

    python3 scripts/evaluate_scenarios.py --aslib-root aslib --manifests manifests --out results
"""

import argparse
import sys
from pathlib import Path

from zerofolio.cli import main as zerofolio


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--aslib-root", type=Path, required=True)
    ap.add_argument("--manifests", type=Path, required=True)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--selectors", default="sbs,rf,zf,zf-v2")
    ap.add_argument("extra", nargs=argparse.REMAINDER)
    args = ap.parse_args()
    extra = args.extra[1:] if args.extra[:1] == ["--"] else args.extra
    args.out.mkdir(parents=True, exist_ok=True)
    reports = []
    for scen in sorted(p for p in args.aslib_root.iterdir() if p.is_dir()):
        manifest = args.manifests / f"{scen.name}.tsv"
        if not manifest.is_file():
            print(f"skip {scen.name}: no manifest", file=sys.stderr)
            continue
        out = args.out / f"{scen.name}.json"
        code = zerofolio([
            "evaluate", "--scenario-dir", str(scen), "--manifest", str(manifest),
            "--selectors", args.selectors, "--seeds", "0,1", "--output", str(out), "--format", "json", *extra,
        ])
        if code != 0:
            print(f"{scen.name}: evaluate exited with {code}", file=sys.stderr)
            continue
        reports.append(str(out))
    if not reports:
        return 1
    return zerofolio(["report", *reports, "--format", "markdown", "--output", str(args.out / "summary.md")])


if __name__ == "__main__":
    raise SystemExit(main())
