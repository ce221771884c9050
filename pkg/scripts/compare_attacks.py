"""Evolutionary attack vs random perturbation on MLP, KNN-1 and random-forest detectors.

Writes <out>/<kind>/{ga,random}/metrics.json plus a summary table, e.g.

    python3 scripts/compare_attacks.py --out runs/compare
    fcgprobe report runs/compare/*/*
"""
import argparse
import json
import time
from pathlib import Path

from fcgprobe.embed import Embedder
from fcgprobe.experiments import comparison_study
from fcgprobe.graph import SensitiveApiIndex
from fcgprobe.search import AttackConfig
from fcgprobe.synth import SENSITIVE_APIS, SynthConfig, synth_corpus


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/compare")
    p.add_argument("--n-seeds", type=int, default=20)
    p.add_argument("--population", type=int, default=100)
    p.add_argument("--generations", type=int, default=40)
    p.add_argument("--initial-ops", type=int, default=300)
    p.add_argument("--kinds", default="mlp,knn,rf")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    samples = synth_corpus(SynthConfig(seed=args.seed))
    emb = Embedder("degree", SensitiveApiIndex(SENSITIVE_APIS))
    cfg = AttackConfig(population_size=args.population, generations=args.generations,
                       initial_ops=args.initial_ops, elitism=min(10, args.population - 1), seed=args.seed)
    t0 = time.perf_counter()
    runs = comparison_study(samples, emb, args.kinds.split(","), cfg, args.n_seeds, log_fn=print)
    out = Path(args.out)
    summary = {}
    for kind, run in runs.items():
        for method, batch in (("ga", run.ga), ("random", run.random)):
            d = out / kind / method
            d.mkdir(parents=True, exist_ok=True)
            (d / "metrics.json").write_text(batch.report.dumps())
        summary[kind] = {"train_accuracy": run.train_accuracy, "ga_asr": run.ga.report.asr,
                         "random_asr": run.random.report.asr, "gap": run.gap}
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(f"{'target':<6} {'acc':>6} {'GA':>6} {'random':>7} {'gap':>6}")
    for kind, s in summary.items():
        print(f"{kind:<6} {s['train_accuracy']:>6.2f} {s['ga_asr']:>6.2f} {s['random_asr']:>7.2f} {s['gap']:>6.2f}")
    print(f"{(time.perf_counter() - t0) / 60:.1f} min")


if __name__ == "__main__":
    main()
