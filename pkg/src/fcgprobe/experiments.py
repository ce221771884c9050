"""Corpus loading, detector training and batch attack runs.

Shared by the command line, the experiment scripts and the acceptance
tests so that all three exercise the same code path.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embed import AbstractionMap, Embedder
from .errors import ConfigError, DegenerateData, FcgError, ParseError
from .graph import SensitiveApiIndex, identify_critical_area, read_fcg
from .metrics import MetricsReport, row_from_result
from .models import (
    BENIGN,
    MALWARE,
    BoostConfig,
    ForestConfig,
    KnnModel,
    MlpConfig,
    MlpModel,
    TreeEnsemble,
    adaboost_train,
    forest_train,
    knn_predict,
    mlp_train,
)
from .search import AttackConfig, AttackResult, Target, run_attack, run_random_baseline
from .synth import Sample

log = logging.getLogger(__name__)

MODEL_KINDS = ("mlp", "knn", "rf", "adaboost")


def load_corpus(root) -> list[Sample]:
    """Read ``labels.csv`` plus ``graphs/<name>.json`` from a corpus directory."""
    root = Path(root)
    path = root / "labels.csv"
    if not path.exists():
        raise ParseError(f"{path} not found")
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            try:
                name, label, split = rec["name"], int(rec["label"]), rec.get("split") or "train"
            except (KeyError, ValueError, TypeError):
                raise ParseError(f"bad row in {path}: {rec}") from None
            if label not in (BENIGN, MALWARE):
                raise ParseError(f"label must be 0 or 1, got {label}")
            out.append(Sample(name, label, split, read_fcg(root / "graphs" / f"{name}.json")))
    return out


def embed_samples(samples, embedder: Embedder) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([embedder(s.graph) for s in samples], dtype=float).reshape(len(samples), embedder.dim)
    y = np.array([s.label for s in samples], dtype=int)
    return x, y


def train_model(kind: str, x, y, seed: int = 0):
    if len(np.unique(y)) < 2:
        raise DegenerateData("training data must contain both classes")
    if kind == "mlp":
        return mlp_train(x, y, MlpConfig(seed=seed))
    if kind == "knn":
        return KnnModel(np.asarray(x, dtype=float), np.asarray(y, dtype=int), 1)
    if kind == "rf":
        return forest_train(x, y, ForestConfig(seed=seed))
    if kind == "adaboost":
        return adaboost_train(x, y, BoostConfig(seed=seed))
    raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def predict(model, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if isinstance(model, MlpModel):
        return np.where(model.predict_proba(x) >= 0.5, BENIGN, MALWARE)
    if isinstance(model, KnnModel):
        return np.array([knn_predict(model, row) for row in x], dtype=int)
    if isinstance(model, TreeEnsemble):
        return model.predict(x)
    raise TypeError(f"unsupported model {type(model).__name__}")


def detection_scores(pred, truth) -> dict:
    """Accuracy plus precision/recall/F1 with malware as the positive class."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    tp = int(np.sum((pred == MALWARE) & (truth == MALWARE)))
    fp = int(np.sum((pred == MALWARE) & (truth == BENIGN)))
    fn = int(np.sum((pred == BENIGN) & (truth == MALWARE)))
    acc = float(np.mean(pred == truth)) if len(truth) else 0.0
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return {"accuracy": acc, "precision": prec, "recall": rec, "f1": f1}


def embedder_meta(embedder: Embedder) -> dict:
    return {
        "scheme": embedder.scheme.value,
        "alpha": embedder.alpha,
        "apis": None if embedder.apis is None else list(embedder.apis.signatures),
        "abstraction": None if embedder.abstraction is None else dict(embedder.abstraction.prefixes),
    }


def embedder_from_meta(meta: dict) -> Embedder:
    try:
        apis = meta.get("apis")
        abstraction = meta.get("abstraction")
        return Embedder(
            meta["scheme"],
            None if apis is None else SensitiveApiIndex(tuple(apis)),
            None if abstraction is None else AbstractionMap(dict(abstraction)),
            float(meta.get("alpha", 0.005)),
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"model file lacks a usable embedder description: {exc}") from None


def pick_seeds(samples, model, embedder: Embedder, limit: int | None = None) -> list[Sample]:
    """Held-out malware the model currently detects, in corpus order."""
    out = []
    for s in samples:
        if s.split != "test" or s.label != MALWARE:
            continue
        if predict(model, embedder(s.graph))[0] != MALWARE:
            continue
        out.append(s)
        if limit is not None and len(out) >= limit:
            break
    return out


@dataclass
class BatchOutcome:
    report: MetricsReport
    results: dict[str, AttackResult]
    errors: dict[str, str]


def attack_batch(seeds, target: Target, apis: SensitiveApiIndex, cfg: AttackConfig,
                 method: str = "ga", on_result=None) -> BatchOutcome:
    """Attack every seed graph in turn; per-seed failures are logged and skipped.

    Seed ``i`` runs with rng seed ``cfg.seed + i`` so batches are reproducible.
    """
    run = run_attack if method == "ga" else run_random_baseline
    rows, results, errors = [], {}, {}
    for i, s in enumerate(seeds):
        scfg = AttackConfig(**{**_shallow(cfg), "seed": cfg.seed + i})
        try:
            area = identify_critical_area(s.graph, apis)
            res = run(scfg, s.graph, area, target)
        except (FcgError, ValueError) as exc:
            log.warning("seed %s failed: %s", s.name, exc)
            errors[s.name] = str(exc)
            continue
        results[s.name] = res
        rows.append(row_from_result(s.name, res))
        if on_result is not None:
            on_result(s.name, res)
    return BatchOutcome(MetricsReport.from_rows(method, rows, len(errors)), results, errors)


def _shallow(cfg: AttackConfig) -> dict:
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}


def benign_reference(x, y) -> np.ndarray:
    ben = np.asarray(x)[np.asarray(y) == BENIGN]
    if len(ben) == 0:
        raise DegenerateData("no benign rows for the attribution reference")
    return ben.mean(axis=0)


# -- studies ------------------------------------------------------------------

@dataclass
class TargetRun:
    kind: str
    train_accuracy: float
    ga: BatchOutcome
    random: BatchOutcome

    @property
    def gap(self) -> float:
        return self.ga.report.asr - self.random.report.asr


def comparison_study(samples, embedder: Embedder, kinds, cfg: AttackConfig, n_seeds: int,
                     model_seed: int = 0, log_fn=None) -> dict[str, TargetRun]:
    """Train each detector kind, then attack its detected held-out malware with both methods.

    Both methods get the same seeds and the same per-seed operator budget.
    """
    train = [s for s in samples if s.split == "train"]
    x, y = embed_samples(train, embedder)
    ref = benign_reference(x, y)
    out = {}
    for kind in kinds:
        model = train_model(kind, x, y, model_seed)
        acc = float(np.mean(predict(model, x) == y))
        target = Target(model, embedder, ref)
        seeds = pick_seeds(samples, model, embedder, n_seeds)
        ga = attack_batch(seeds, target, embedder.apis, cfg, "ga")
        rnd = attack_batch(seeds, target, embedder.apis, cfg, "random")
        out[kind] = TargetRun(kind, acc, ga, rnd)
        if log_fn is not None:
            log_fn(f"{kind}: train acc {acc:.3f}, seeds {len(seeds)}, "
                   f"GA ASR {ga.report.asr:.2f}, random ASR {rnd.report.asr:.2f}")
    return out


def asgg_study(samples, embedder: Embedder, cfg: AttackConfig, n_seeds: int, kind: str = "mlp",
               model_seed: int = 0) -> dict[str, BatchOutcome]:
    """Surviving genes with and without dependency-aware grouping, over every generation.

    Early stopping is switched off so each seed contributes all generations.
    """
    train = [s for s in samples if s.split == "train"]
    x, y = embed_samples(train, embedder)
    model = train_model(kind, x, y, model_seed)
    target = Target(model, embedder, benign_reference(x, y))
    seeds = [s for s in samples if s.split == "test" and s.label == MALWARE][:n_seeds]
    out = {}
    for name, aware in (("aware", True), ("plain", False)):
        genome = {**_shallow_genome(cfg), "dependency_aware": aware}
        run_cfg = AttackConfig(**{**_shallow(cfg), "stop_on_success": False,
                                  "genome": type(cfg.genome)(**genome)})
        out[name] = attack_batch(seeds, target, embedder.apis, run_cfg, "ga")
    return out


def _shallow_genome(cfg: AttackConfig) -> dict:
    return {k: getattr(cfg.genome, k) for k in cfg.genome.__dataclass_fields__}
