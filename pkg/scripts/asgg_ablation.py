"""Surviving genes per generation with and without dependency-aware grouping.

    python3 scripts/asgg_ablation.py --out runs/asgg
"""
import argparse
import json
import time
from pathlib import Path

from fcgprobe.embed import Embedder
from fcgprobe.experiments import asgg_study
from fcgprobe.graph import SensitiveApiIndex
from fcgprobe.search import AttackConfig
from fcgprobe.synth import SENSITIVE_APIS, SynthConfig, synth_corpus


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/asgg")
    p.add_argument("--n-seeds", type=int, default=20)
    p.add_argument("--population", type=int, default=10)
    p.add_argument("--elitism", type=int, default=2)
    p.add_argument("--generations", type=int, default=40)
    p.add_argument("--initial-ops", type=int, default=100)
    p.add_argument("--seed", type=int, default=7)
    args = p.parse_args()

    samples = synth_corpus(SynthConfig(n_graphs=200, size_range=(150, 300), seed=args.seed))
    emb = Embedder("degree", SensitiveApiIndex(SENSITIVE_APIS))
    cfg = AttackConfig(population_size=args.population, elitism=args.elitism, generations=args.generations,
                       initial_ops=args.initial_ops, seed=0)
    t0 = time.perf_counter()
    runs = asgg_study(samples, emb, cfg, args.n_seeds)
    out = Path(args.out)
    curves = {}
    for name, batch in runs.items():
        d = out / name
        d.mkdir(parents=True, exist_ok=True)
        (d / "metrics.json").write_text(batch.report.dumps())
        rows = batch.report.rows
        # mean genes per generation across seeds
        curves[name] = [sum(r.genes[g] for r in rows) / len(rows) for g in range(args.generations)]
    (out / "curves.json").write_text(json.dumps(curves, indent=1) + "\n")
    aware, plain = runs["aware"].report.asgg, runs["plain"].report.asgg
    print(f"ASGG aware {aware:.1f}  plain {plain:.1f}  ratio {aware / plain:.2f}")
    for g in sorted({g for g in (0, 4, 9, 19) if g < args.generations} | {args.generations - 1}):
        print(f"gen {g + 1:>2}: aware {curves['aware'][g]:>8.1f}  plain {curves['plain'][g]:>8.1f}")
    print(f"{(time.perf_counter() - t0) / 60:.1f} min")


if __name__ == "__main__":
    main()
