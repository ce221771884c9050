"""Genetic search for evasive perturbations and the random-perturbation baseline.

Fitness is a pair compared lexicographically: ``f1`` is what the target
model reports (benign probability, nearest-neighbour margin, or satisfied
benign-path constraints) and ``f2`` is the attribution-weighted movement of
the embedding, which separates candidates the model itself scores equally.
"""
from __future__ import annotations

import functools
import logging
import math
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .attrib import shapley_estimate
from .embed import Embedder
from .errors import ConfigError, FcgError
from .genome import Breeder, GenomeConfig, Individual
from .graph import CriticalArea, FunctionCallGraph
from .models import (
    BENIGN,
    ConstraintSet,
    KnnModel,
    MlpConfig,
    MlpModel,
    TreeEnsemble,
    extract_benign_constraints,
    knn_distances,
    knn_predict,
    mlp_train,
)
from .perturb import OpWeights, apply_sequence, translate_to_script

log = logging.getLogger(__name__)

TIE_TOL = 1e-12
WORST = -1e300


@dataclass
class AttackConfig:
    population_size: int = 100
    generations: int = 40
    initial_ops: int = 300
    elitism: int = 10
    tournament_size: int = 2
    # fraction of the ranked population eligible as parents
    truncation: float = 0.5
    mutation_prob: float = 0.8
    shapley_samples: int = 200
    stop_on_success: bool = True
    baseline_iterations: int = 100
    seed: int = 0
    weights: OpWeights = field(default_factory=OpWeights)
    genome: GenomeConfig = field(default_factory=GenomeConfig)

    def __post_init__(self):
        if isinstance(self.weights, dict):
            self.weights = OpWeights.from_dict(self.weights)
        if isinstance(self.genome, dict):
            try:
                self.genome = GenomeConfig(**self.genome)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad genome config: {exc}") from None
        if self.population_size < 2:
            raise ConfigError("population_size must be >= 2")
        if not 0 <= self.elitism < self.population_size:
            raise ConfigError("elitism must be in [0, population_size)")
        if self.generations < 1 or self.initial_ops < 0 or self.tournament_size < 1:
            raise ConfigError("generations >= 1, initial_ops >= 0 and tournament_size >= 1 required")
        if self.initial_ops > self.genome.max_ops:
            raise ConfigError("initial_ops exceeds genome.max_ops")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = self.weights.to_dict()
        d["genome"]["mutation_weights"] = list(self.genome.mutation_weights)
        return d


@dataclass(frozen=True)
class FitnessScore:
    f1: float
    f2: float | None = None  # None for tree ensembles
    n_ops: int = 0
    failed: bool = False

    def as_tuple(self):
        return (self.f1, self.f2)


def dominates(a: FitnessScore, b: FitnessScore) -> bool:
    """Lexicographic order: higher f1 wins; near-equal f1 falls back to f2.

    Without f2 (ensemble targets) the tie goes to the shorter individual.
    """
    if abs(a.f1 - b.f1) > TIE_TOL:
        return a.f1 > b.f1
    if a.f2 is None or b.f2 is None:
        return a.n_ops < b.n_ops
    return a.f2 > b.f2


def _cmp(a: FitnessScore, b: FitnessScore) -> int:
    if dominates(a, b):
        return -1
    if dominates(b, a):
        return 1
    return 0


def rank(scores: list[FitnessScore]) -> list[int]:
    """Indices best-first under :func:`dominates`; equal scores keep their order."""
    keyed = functools.cmp_to_key(lambda i, j: _cmp(scores[i], scores[j]))
    return sorted(range(len(scores)), key=keyed)


# -- targets ------------------------------------------------------------------

class Target:
    """A detector plus everything needed to score perturbed graphs against it.

    ``reference`` is the attribution baseline (typically the benign
    centroid of the training embeddings).
    """

    def __init__(self, model, embedder: Embedder, reference=None, surrogate: MlpModel | None = None,
                 constraints: ConstraintSet | None = None):
        self.model = model
        self.embedder = embedder
        if isinstance(model, MlpModel):
            self.mode = "mlp"
            self.explained = model
        elif isinstance(model, KnnModel):
            self.mode = "knn"
            if surrogate is None:
                surrogate = train_surrogate(model)
            self.explained = surrogate
        elif isinstance(model, TreeEnsemble):
            self.mode = "ensemble"
            self.explained = None
            if constraints is None:
                constraints = ConstraintSet(extract_benign_constraints(model))
        else:
            raise ConfigError(f"unsupported target model {type(model).__name__}")
        self.constraints = constraints
        dim = embedder.dim
        self.reference = np.zeros(dim) if reference is None else np.asarray(reference, dtype=float)
        if self.reference.shape != (dim,):
            raise ConfigError("attribution reference has the wrong dimension")

    def f1(self, emb: np.ndarray) -> float:
        if self.mode == "mlp":
            return float(self.model.predict_proba(emb))
        if self.mode == "knn":
            mal, ben = knn_distances(self.model, emb)
            return float(np.mean(mal - ben))
        return float(self.constraints.count(emb)) if len(self.constraints) else 0.0

    def is_benign(self, emb: np.ndarray) -> bool:
        if self.mode == "mlp":
            return float(self.model.predict_proba(emb)) >= 0.5
        if self.mode == "knn":
            return knn_predict(self.model, emb) == BENIGN
        return self.model.predict_one(emb) == BENIGN

    def attribution(self, x: np.ndarray, n_samples: int, seed: int) -> np.ndarray | None:
        if self.explained is None:
            return None
        return shapley_estimate(self.explained.predict_proba, self.reference, x, n_samples, seed).values


def train_surrogate(model: KnnModel, config: MlpConfig | None = None) -> MlpModel:
    """MLP fitted to the neighbour model's training rows, used only for attributions."""
    return mlp_train(model.data, model.labels, config or MlpConfig(hidden=(32,), epochs=300))


def fitness_mlp(emb, base_emb, model: MlpModel, phi) -> FitnessScore:
    f2 = float(np.dot(phi, np.asarray(emb) - base_emb))
    return FitnessScore(float(model.predict_proba(emb)), f2)


def fitness_knn(emb, base_emb, model: KnnModel, phi) -> FitnessScore:
    mal, ben = knn_distances(model, emb)
    f2 = float(np.dot(phi, np.asarray(emb) - base_emb))
    return FitnessScore(float(np.mean(mal - ben)), f2)


def fitness_ensemble(emb, constraints: ConstraintSet, n_ops: int = 0) -> FitnessScore:
    f1 = float(constraints.count(emb)) if len(constraints) else 0.0
    return FitnessScore(f1, None, n_ops)


# -- results ------------------------------------------------------------------

@dataclass
class AttackResult:
    outcome: str  # "Success" or "Exhausted"
    method: str  # "ga" or "random"
    seed: int
    generations: int
    best: Individual | None
    best_score: FitnessScore | None
    rows: list[dict]
    verified: bool = False
    reason: str = ""
    nodes_added: int = 0
    edges_added: int = 0
    original_size: int = 0
    apply_count: int = 0
    wall_time: float = 0.0
    labels: dict = field(default_factory=dict, repr=False)

    @property
    def success(self) -> bool:
        return self.outcome == "Success"

    @property
    def delta(self) -> float:
        """Added nodes and edges relative to the original graph's size."""
        return (self.nodes_added + self.edges_added) / self.original_size if self.original_size else 0.0

    @property
    def gene_counts(self) -> list[int]:
        return [r["genes"] for r in self.rows]

    def script(self) -> str:
        return translate_to_script(self.best.ops if self.best else [], self.labels)

    def to_json(self, include_time: bool = False) -> dict:
        doc = {
            "outcome": self.outcome,
            "method": self.method,
            "seed": self.seed,
            "generations": self.generations,
            "reason": self.reason,
            "verified": self.verified,
            "best_fitness": None if self.best_score is None else list(self.best_score.as_tuple()),
            "n_ops": 0 if self.best is None else self.best.n_ops,
            "nodes_added": self.nodes_added,
            "edges_added": self.edges_added,
            "original_size": self.original_size,
            "delta": self.delta,
            "apply_count": self.apply_count,
            "log": [{k: v for k, v in r.items() if include_time or k != "wall_time"} for r in self.rows],
            "individual": [] if self.best is None else self.best.to_json(),
        }
        if include_time:
            doc["wall_time"] = self.wall_time
        return doc


def _added(base: FunctionCallGraph, g: FunctionCallGraph) -> tuple[int, int]:
    nodes = sum(1 for n in g.kinds if n not in base.kinds)
    edges = len(g.edge_set() - base.edge_set())
    return nodes, edges


class _Evaluator:
    def __init__(self, target: Target, base: FunctionCallGraph):
        self.target = target
        self.nodes = target.embedder.locate(base)
        self.base_emb = target.embedder(base, self.nodes)

    def embed(self, ind: Individual):
        if ind.embedding is None:
            try:
                emb = self.target.embedder(ind.graph, self.nodes)
                if not np.all(np.isfinite(emb)):
                    raise FloatingPointError("non-finite embedding")
                ind.embedding = emb
                ind.score = (self.target.f1(emb), self.target.is_benign(emb))
            except (FcgError, FloatingPointError, ValueError) as exc:
                log.debug("evaluation failed: %s", exc)
                ind.embedding = False
                ind.score = (WORST, False)
        return ind.embedding

    def score(self, ind: Individual, phi) -> FitnessScore:
        emb = self.embed(ind)
        if emb is False:
            return FitnessScore(WORST, None if phi is None else WORST, ind.n_ops, failed=True)
        f1 = ind.score[0]
        f2 = None if phi is None else float(np.dot(phi, emb - self.base_emb))
        return FitnessScore(f1, f2, ind.n_ops)

    def benign(self, ind: Individual) -> bool:
        self.embed(ind)
        return bool(ind.score[1])


def _finish(result: AttackResult, target: Target, base: FunctionCallGraph, ev: _Evaluator) -> AttackResult:
    best = result.best
    if best is not None and best.graph is not None:
        result.nodes_added, result.edges_added = _added(base, best.graph)
    result.original_size = base.n_nodes + base.n_edges
    result.labels = {n: base.label(n) for n in base.kinds}
    if result.success:
        # independent replay from the base graph, fresh embedding and verdict
        replay = apply_sequence(base, best.ops)
        emb = target.embedder(replay, target.embedder.locate(replay))
        result.verified = target.is_benign(emb)
        if not result.verified:
            raise AssertionError("success did not survive an independent replay")
    return result


def run_attack(cfg: AttackConfig, base: FunctionCallGraph, area: CriticalArea, target: Target,
               on_generation: Callable[[dict], None] | None = None) -> AttackResult:
    """Evolve perturbation sequences until the target calls the graph benign."""
    t0 = time.perf_counter()
    ev = _Evaluator(target, base)
    result = AttackResult("Exhausted", "ga", cfg.seed, 0, None, None, [])
    if not area:
        result.reason = "empty critical area"
        return _finish(result, target, base, ev)
    if target.mode == "ensemble" and len(target.constraints) == 0:
        result.reason = "no benign-path constraints"
        return _finish(result, target, base, ev)

    rng = random.Random(cfg.seed)
    breeder = Breeder(base, area, cfg.weights, cfg.genome)
    pop = [breeder.init_individual(cfg.initial_ops, rng) for _ in range(cfg.population_size)]
    phi_at = ev.base_emb
    phi = target.attribution(phi_at, cfg.shapley_samples, cfg.seed)
    segment = 0
    max_len = max([cfg.initial_ops, 1])
    best = best_score = None

    for gen in range(cfg.generations):
        scores = [ev.score(ind, phi) for ind in pop]
        order = rank(scores)
        best, best_score = pop[order[0]], scores[order[0]]
        max_len = max(max_len, max(ind.n_ops for ind in pop))
        row = {
            "generation": gen,
            "best_f1": best_score.f1,
            "best_f2": best_score.f2,
            "genes": sum(ind.n_ops for ind in pop),
            "segment": segment,
            "abandoned": sum(1 for ind in pop if ind.abandoned),
            "wall_time": time.perf_counter() - t0,
        }
        result.rows.append(row)
        if on_generation:
            on_generation(row)
        result.generations = gen + 1
        if cfg.stop_on_success:
            hit = next((i for i in order if ev.benign(pop[i])), None)
            if hit is not None:
                result.outcome = "Success"
                best, best_score = pop[hit], scores[hit]
                break
        if gen == cfg.generations - 1:
            break

        # attribution follows the current best embedding
        emb = ev.embed(best)
        if phi is not None and emb is not False and not np.array_equal(emb, phi_at):
            phi_at = emb
            phi = target.attribution(emb, cfg.shapley_samples, cfg.seed)
            segment += 1

        ranked = [pop[i] for i in order]
        elites = ranked[: cfg.elitism]
        pool = ranked[: max(2, int(math.ceil(cfg.truncation * len(ranked))))]
        pool_scores = [scores[i] for i in order[: len(pool)]]

        def pick():
            cands = [rng.randrange(len(pool)) for _ in range(cfg.tournament_size)]
            win = cands[0]
            for c in cands[1:]:
                if dominates(pool_scores[c], pool_scores[win]):
                    win = c
            return pool[win]

        children: list[Individual] = []
        need = cfg.population_size - len(elites)
        while len(children) < need:
            a, b = pick(), pick()
            for child in breeder.crossover(a, b, rng):
                if rng.random() < cfg.mutation_prob:
                    child = breeder.mutate(child, rng)
                child.generation = gen + 1
                children.append(child)
        pop = elites + children[:need]

    result.best, result.best_score = best, best_score
    result.apply_count = breeder.apply_count
    budget = 2 * cfg.population_size * (cfg.generations + 1) * max_len * (cfg.genome.retarget_tries + 2)
    assert breeder.apply_count <= budget, "operator budget exceeded"
    result.wall_time = time.perf_counter() - t0
    return _finish(result, target, base, ev)


def run_random_baseline(cfg: AttackConfig, base: FunctionCallGraph, area: CriticalArea, target: Target,
                        on_generation: Callable[[dict], None] | None = None) -> AttackResult:
    """Draw a fresh random sequence each iteration and keep the best seen."""
    t0 = time.perf_counter()
    ev = _Evaluator(target, base)
    result = AttackResult("Exhausted", "random", cfg.seed, 0, None, None, [])
    if not area:
        result.reason = "empty critical area"
        return _finish(result, target, base, ev)
    rng = random.Random(cfg.seed)
    breeder = Breeder(base, area, cfg.weights, cfg.genome)
    best = best_score = None
    for it in range(cfg.baseline_iterations):
        ind = breeder.init_individual(cfg.initial_ops, rng)
        score = ev.score(ind, None)
        if best_score is None or score.f1 > best_score.f1:
            best, best_score = ind, score
        row = {
            "generation": it,
            "best_f1": best_score.f1,
            "best_f2": None,
            "genes": ind.n_ops,
            "segment": 0,
            "abandoned": 0,
            "wall_time": time.perf_counter() - t0,
        }
        result.rows.append(row)
        if on_generation:
            on_generation(row)
        result.generations = it + 1
        if ev.benign(ind):
            result.outcome = "Success"
            best, best_score = ind, score
            break
    result.best, result.best_score = best, best_score
    result.apply_count = breeder.apply_count
    assert breeder.apply_count <= cfg.baseline_iterations * max(cfg.initial_ops, 1), "operator budget exceeded"
    result.wall_time = time.perf_counter() - t0
    return _finish(result, target, base, ev)
