"""Run every scenario file and print a one-line summary each.

Metrics files land in --out-dir (default: runs/).
"""

import argparse
import json
from pathlib import Path

from horuslink.sim_harness import run_scenario

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description="run all scenarios")
    ap.add_argument("--scenarios", type=Path, default=ROOT / "scenarios")
    ap.add_argument("--out-dir", type=Path, default=Path("runs"))
    ap.add_argument("--seed", type=int)
    ap.add_argument("--cycles", type=int)
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    failed = 0
    for path in sorted(args.scenarios.glob("*.json")):
        out = args.out_dir / f"{path.stem}.jsonl"
        code = run_scenario(path, args.seed, args.cycles, out)
        if code:
            print(f"{path.stem:28s} exit {code}")
            failed += 1
            continue
        summary = json.loads(out.read_text().splitlines()[-1])
        events = " ".join(f"{k}={v}" for k, v in summary["events"].items())
        print(f"{path.stem:28s} {summary['final_mode']:18s} {events}")
    raise SystemExit(1 if failed else 0)


if __name__ == "__main__":
    main()
