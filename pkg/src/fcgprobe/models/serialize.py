"""JSON model files: ``{"kind", "version", "payload", "meta"}``.

Floats are written with ``repr`` precision, which round-trips bit-exactly.
"""
from __future__ import annotations

import json

import numpy as np

from ..errors import ParseError, VersionMismatch
from .knn import KnnModel
from .mlp import MlpModel
from .trees import DecisionTree, TreeEnsemble

VERSION = 1


def _arr(a) -> list:
    return np.asarray(a).tolist()


def _payload(model) -> tuple[str, dict]:
    if isinstance(model, MlpModel):
        return "mlp", {
            "layers": [
                {"weight": _arr(w), "bias": _arr(b), "activation": a}
                for w, b, a in zip(model.weights, model.biases, model.activations)
            ]
        }
    if isinstance(model, KnnModel):
        return "knn", {"k": model.k, "data": _arr(model.data), "labels": _arr(model.labels)}
    if isinstance(model, TreeEnsemble):
        return model.mode, {
            "input_dim": model.input_dim,
            "tree_weights": _arr(model.tree_weights),
            "trees": [
                {
                    "feature": _arr(t.feature),
                    "threshold": _arr(t.threshold),
                    "left": _arr(t.left),
                    "right": _arr(t.right),
                    "value": _arr(t.value),
                }
                for t in model.trees
            ],
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_save(model, meta: dict | None = None) -> bytes:
    kind, payload = _payload(model)
    doc = {"kind": kind, "version": VERSION, "payload": payload, "meta": meta or {}}
    return json.dumps(doc, separators=(",", ":"), sort_keys=True).encode("utf-8")


def _build(kind: str, p: dict):
    if kind == "mlp":
        layers = p["layers"]
        return MlpModel(
            [np.array(l["weight"], dtype=float).reshape(len(l["weight"]), -1) for l in layers],
            [np.array(l["bias"], dtype=float) for l in layers],
            [l["activation"] for l in layers],
        )
    if kind == "knn":
        return KnnModel(np.array(p["data"], dtype=float), np.array(p["labels"], dtype=int), int(p["k"]))
    if kind in ("random_forest", "adaboost"):
        trees = [DecisionTree(**t) for t in p["trees"]]
        return TreeEnsemble(trees, kind, np.array(p["tree_weights"], dtype=float), int(p["input_dim"]))
    raise ParseError(f"unknown model kind {kind!r}")


def model_load_with_meta(data: bytes | str):
    if not data:
        raise ParseError("empty model stream")
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(str(exc)) from exc
    if not isinstance(doc, dict) or "kind" not in doc or "payload" not in doc:
        raise ParseError("model document lacks 'kind' or 'payload'")
    if doc.get("version") != VERSION:
        raise VersionMismatch(f"model version {doc.get('version')!r}, expected {VERSION}")
    try:
        model = _build(doc["kind"], doc["payload"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed payload: {exc}") from exc
    return model, doc.get("meta", {})


def model_load(data: bytes | str):
    return model_load_with_meta(data)[0]
