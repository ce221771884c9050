"""Command line: ``synth``, ``train``, ``attack``, ``baseline`` and ``report``.

Every command takes ``--config FILE`` (a JSON object whose keys mirror the
flags; flags given explicitly win) and writes under ``--out DIR``.
Exit codes: 0 success, 1 configuration error, 2 data error, 3 some seeds
failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .embed import AbstractionMap, Embedder, Scheme
from .errors import ConfigError, FcgError
from .experiments import (
    MODEL_KINDS,
    attack_batch,
    benign_reference,
    detection_scores,
    embed_samples,
    embedder_from_meta,
    embedder_meta,
    load_corpus,
    pick_seeds,
    predict,
    train_model,
)
from .graph import SensitiveApiIndex
from .metrics import MetricsReport, check_report
from .models import model_load_with_meta, model_save
from .search import AttackConfig, Target
from .synth import SynthConfig, synth_corpus, write_corpus

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3

log = logging.getLogger("fcgprobe")


class DataError(Exception):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc


def _merge(args, keys) -> dict:
    """Config-file values overridden by flags that were given explicitly."""
    cfg = _load_config(args.config)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _existing(path, what) -> Path:
    if path is None:
        raise ConfigError(f"{what} is required")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} {p} does not exist")
    return p


# -- commands ---------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _merge(args, ["n_graphs", "seed", "benign_motifs", "malware_motifs"])
    if args.size_min is not None or args.size_max is not None:
        lo, hi = cfg.get("size_range", SynthConfig.size_range)
        cfg["size_range"] = [args.size_min if args.size_min is not None else lo,
                             args.size_max if args.size_max is not None else hi]
    out = cfg.pop("out", None) or args.out
    if out is None:
        raise ConfigError("--out is required")
    try:
        scfg = SynthConfig(**cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad synth config: {exc}") from None
    samples = synth_corpus(scfg)
    write_corpus(samples, out, scfg)
    n_mal = sum(s.label for s in samples)
    print(f"wrote {len(samples)} graphs ({n_mal} malware) to {out}")
    return EXIT_OK


def _embedder(corpus: Path, scheme: str, alpha: float, abstraction) -> Embedder:
    sch = Scheme(scheme)
    apis = SensitiveApiIndex.read(_existing(corpus / "sensitive_apis.txt", "sensitive API list"))
    amap = None
    if sch.is_markov:
        default = "family_map.tsv" if sch is Scheme.MAMA_FAMILY else "cluster_map.tsv"
        amap = AbstractionMap.read(_existing(abstraction or corpus / default, "abstraction map"))
    return Embedder(sch, apis, amap, alpha)


def cmd_train(args) -> int:
    cfg = _merge(args, ["corpus", "kind", "scheme", "alpha", "abstraction", "seed", "out"])
    corpus = _existing(cfg.get("corpus"), "--corpus")
    kind = cfg.get("kind", "mlp")
    if kind not in MODEL_KINDS:
        raise ConfigError(f"--kind must be one of {MODEL_KINDS}")
    try:
        embedder = _embedder(corpus, cfg.get("scheme", "degree"), float(cfg.get("alpha", 0.005)),
                             cfg.get("abstraction"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(cfg.get("out") or ".")
    seed = int(cfg.get("seed", 0))

    samples = load_corpus(corpus)
    train = [s for s in samples if s.split == "train"]
    test = [s for s in samples if s.split == "test"]
    x, y = embed_samples(train, embedder)
    model = train_model(kind, x, y, seed)
    scores = {"train": detection_scores(predict(model, x), y)}
    if test:
        xt, yt = embed_samples(test, embedder)
        scores["test"] = detection_scores(predict(model, xt), yt)
    meta = {
        "model_kind": kind,
        "seed": seed,
        "embedder": embedder_meta(embedder),
        "reference": benign_reference(x, y).tolist(),
        "scores": scores,
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.json").write_bytes(model_save(model, meta))
    print(f"{'split':<6} {'accuracy':>9} {'precision':>9} {'recall':>9} {'f1':>9}")
    for split, sc in scores.items():
        print(f"{split:<6} {sc['accuracy']:>9.4f} {sc['precision']:>9.4f} {sc['recall']:>9.4f} {sc['f1']:>9.4f}")
    return EXIT_OK


_ATTACK_KEYS = {
    "population": "population_size",
    "generations": "generations",
    "initial_ops": "initial_ops",
    "iterations": "baseline_iterations",
    "seed": "seed",
}


def _run_batch(args, method: str) -> int:
    cfg = _merge(args, ["corpus", "model", "out", "n_seeds"])
    corpus = _existing(cfg.pop("corpus", None), "--corpus")
    model_path = _existing(cfg.pop("model", None), "--model")
    out = Path(cfg.pop("out", None) or ".")
    n_seeds = cfg.pop("n_seeds", None)
    for flag, key in _ATTACK_KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            cfg[key] = v
    try:
        acfg = AttackConfig(**cfg)
    except TypeError as exc:
        raise ConfigError(f"bad attack config: {exc}") from None

    model, meta = model_load_with_meta(model_path.read_bytes())
    embedder = embedder_from_meta(meta.get("embedder", {}))
    if embedder.apis is None:
        raise ConfigError("attacks need a sensitive-API embedder")
    target = Target(model, embedder, meta.get("reference"))
    samples = load_corpus(corpus)
    seeds = pick_seeds(samples, model, embedder, n_seeds)
    if not seeds:
        raise DataError("no detected held-out malware to attack")

    out.mkdir(parents=True, exist_ok=True)

    def save(name, res):
        (out / f"result_{name}.json").write_text(json.dumps(res.to_json(), sort_keys=True) + "\n")
        (out / f"script_{name}.txt").write_text(res.script())
        log.info("%s %s after %d generations", name, res.outcome, res.generations)

    batch = attack_batch(seeds, target, embedder.apis, acfg, method, on_result=save)
    rep = batch.report
    check_report(rep)
    (out / "metrics.json").write_text(rep.dumps())
    (out / "timing.json").write_text(json.dumps(
        {r.seed: r.wall_time for r in rep.rows}, sort_keys=True, indent=1) + "\n")
    pr = "n/a" if rep.pr is None else f"{rep.pr:.4f}"
    print(f"{method}: ASR {rep.asr:.4f} ({rep.n_success}/{len(rep.rows)})  PR {pr}  ASGG {rep.asgg:.2f}")
    for name, err in batch.errors.items():
        print(f"seed {name} failed: {err}", file=sys.stderr)
    return EXIT_PARTIAL if batch.errors else EXIT_OK


def cmd_attack(args) -> int:
    return _run_batch(args, "ga")


def cmd_baseline(args) -> int:
    return _run_batch(args, "random")


def cmd_report(args) -> int:
    status = EXIT_OK
    print(f"{'run':<30} {'method':<7} {'ASR':>7} {'PR':>8} {'ASGG':>9} {'n':>4}")
    for d in args.runs:
        path = Path(d) / "metrics.json"
        if not path.exists():
            raise DataError(f"{path} does not exist")
        rep = MetricsReport.loads(path.read_text(encoding="utf-8"))
        try:
            check_report(rep)
        except FcgError as exc:
            print(f"{d}: {exc}", file=sys.stderr)
            status = EXIT_DATA
        pr = "n/a" if rep.pr is None else f"{rep.pr:.4f}"
        print(f"{str(d):<30} {rep.method:<7} {rep.asr:>7.4f} {pr:>8} {rep.asgg:>9.2f} {len(rep.rows):>4}")
    return status


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fcgprobe", description="Call-graph malware detector probing.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a labelled synthetic corpus")
    s.add_argument("--n-graphs", dest="n_graphs", type=int)
    s.add_argument("--size-min", dest="size_min", type=int)
    s.add_argument("--size-max", dest="size_max", type=int)
    s.add_argument("--benign-motifs", dest="benign_motifs", type=int)
    s.add_argument("--malware-motifs", dest="malware_motifs", type=int)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="embed a corpus and train a detector")
    t.add_argument("--corpus")
    t.add_argument("--kind", choices=MODEL_KINDS)
    t.add_argument("--scheme", choices=[x.value for x in Scheme])
    t.add_argument("--alpha", type=float)
    t.add_argument("--abstraction")
    t.set_defaults(func=cmd_train)

    for name, func, text in (("attack", cmd_attack, "run the evolutionary attack"),
                             ("baseline", cmd_baseline, "run the random-sequence baseline")):
        a = sub.add_parser(name, help=text)
        a.add_argument("--corpus")
        a.add_argument("--model")
        a.add_argument("--n-seeds", dest="n_seeds", type=int)
        a.add_argument("--population", type=int)
        a.add_argument("--generations", type=int)
        a.add_argument("--initial-ops", dest="initial_ops", type=int)
        a.add_argument("--iterations", type=int)
        a.set_defaults(func=func)

    r = sub.add_parser("report", help="verify and tabulate metrics.json files")
    r.add_argument("runs", nargs="+", help="output directories of attack/baseline runs")
    r.set_defaults(func=cmd_report, config=None, out=None, seed=None)

    for sp in (s, t, *[sub.choices[n] for n in ("attack", "baseline")]):
        sp.add_argument("--config")
        sp.add_argument("--out")
        sp.add_argument("--seed", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FcgError, DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
