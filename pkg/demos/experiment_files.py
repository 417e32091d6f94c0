"""Write a small experiment to disk and read back the plot-ready files."""
import csv
import json
import sys
import tempfile
from pathlib import Path

from rapr.harness import AlgoSpec, EnvSpec, ExperimentConfig, run_experiment

if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp())
    cfg = ExperimentConfig(
        env=EnvSpec("gap", {"K": 4, "d": 3, "A": 1, "lam": 0.0, "Delta": 0.3}),
        algos=[AlgoSpec("rapr", omega=4.0), AlgoSpec("uniform")],
        T=1000,
        runs=3,
        out=str(out),
    )
    run_experiment(cfg)
    for p in sorted(out.rglob("*")):
        if p.is_file():
            print(p.relative_to(out))
    doc = json.loads((out / "summary.json").read_text())
    for tag, s in doc["algorithms"].items():
        print(tag, "learned value", round(s["learned_policy_value"]["mean"], 4))
    rows = list(csv.DictReader(open(out / "4-rapr" / "epochs_0.csv")))
    print("epochs of seed 0:", [(r["m"], r["eta"], r["safe"]) for r in rows])
