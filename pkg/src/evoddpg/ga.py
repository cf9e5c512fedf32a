"""Real-coded genetic algorithm over the six learning hyperparameters.

Genes are stored in search coordinates (``log10`` for log-scale genes).
Fitness is lexicographic: fewer epochs to goal first, then higher final
success rate, then higher final median reward. Every fitness evaluation is
memoized on the exact gene vector, so re-visiting a chromosome (elites in
particular) costs nothing and does not advance the evaluation counter.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .agent import HYPERPARAM_BOUNDS, AgentConfig, Hyperparams
from .envs import make_env
from .trainer import TrainConfig, train_run

log = logging.getLogger(__name__)

THREADS_ENV = "EVODDPG_THREADS"


@dataclass(frozen=True)
class GeneSpec:
    name: str
    low: float
    high: float
    scale: str = "linear"

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"{self.name}: low must be < high")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"{self.name}: unknown scale {self.scale!r}")
        if self.scale == "log" and self.low <= 0:
            raise ValueError(f"{self.name}: log scale needs low > 0")

    @property
    def search_low(self) -> float:
        return float(np.log10(self.low)) if self.scale == "log" else self.low

    @property
    def search_high(self) -> float:
        return float(np.log10(self.high)) if self.scale == "log" else self.high

    def decode(self, x: float) -> float:
        value = 10.0 ** x if self.scale == "log" else x
        return float(min(max(value, self.low), self.high))

    def encode(self, value: float) -> float:
        return float(np.log10(value)) if self.scale == "log" else float(value)


GENE_SPECS: Tuple[GeneSpec, ...] = tuple(
    GeneSpec(name, lo, hi, "log" if name.endswith("_lr") else "linear")
    for name, (lo, hi) in HYPERPARAM_BOUNDS.items()
)


def _bounds(specs):
    return (np.array([s.search_low for s in specs]), np.array([s.search_high for s in specs]))


@dataclass(frozen=True)
class Chromosome:
    genes: Tuple[float, ...]

    @classmethod
    def from_array(cls, values, specs=GENE_SPECS) -> "Chromosome":
        lo, hi = _bounds(specs)
        return cls(tuple(float(v) for v in np.clip(np.asarray(values, dtype=np.float64), lo, hi)))

    @classmethod
    def from_hyperparams(cls, hp: Hyperparams, specs=GENE_SPECS) -> "Chromosome":
        d = hp.as_dict()
        return cls.from_array([s.encode(d[s.name]) for s in specs], specs)

    def array(self) -> np.ndarray:
        return np.array(self.genes, dtype=np.float64)

    def decode(self, specs=GENE_SPECS) -> Dict[str, float]:
        return {s.name: s.decode(g) for s, g in zip(specs, self.genes)}

    def to_hyperparams(self, specs=GENE_SPECS) -> Hyperparams:
        return Hyperparams(**{**Hyperparams().as_dict(), **self.decode(specs)})

    def in_bounds(self, specs=GENE_SPECS) -> bool:
        lo, hi = _bounds(specs)
        a = self.array()
        return bool(np.all(a >= lo) and np.all(a <= hi))


@dataclass
class Fitness:
    """What one fitness evaluation reports back to the GA."""

    epochs_to_goal: float
    final_success_rate: float
    final_median_reward: float
    reached: bool = True
    wall_time_s: float = 0.0


@dataclass
class FitnessRecord:
    chromosome: Chromosome
    epochs_to_goal: float
    final_success_rate: float
    final_median_reward: float
    eval_index: int
    run_seed: int
    reached: bool = True
    wall_time_s: float = 0.0
    generation: int = 0

    def key(self):
        return fitness_key(self)

    def to_json(self, specs=GENE_SPECS) -> dict:
        d = asdict(self)
        d["genes"] = list(self.chromosome.genes)
        d["hyperparams"] = self.chromosome.decode(specs)
        del d["chromosome"]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "FitnessRecord":
        d = dict(d)
        d.pop("hyperparams", None)
        genes = d.pop("genes")
        return cls(Chromosome(tuple(genes)), **d)


def fitness_key(rec) -> tuple:
    return (rec.epochs_to_goal, -rec.final_success_rate, -rec.final_median_reward)


@dataclass
class GaConfig:
    population_size: int = 8
    generations: int = 10
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = 0.2
    mutation_sigma: float = 0.1
    elitism_count: int = 1
    seed: int = 0

    def validate(self) -> "GaConfig":
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be a positive even integer")
        if self.generations < 1:
            raise ValueError("generations must be positive")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be >= 2")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.mutation_sigma <= 0:
            raise ValueError("mutation_sigma must be positive")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError("elitism_count must be in [0, population_size)")
        return self


class FitnessCache:
    """Exact-match memo of evaluated gene vectors."""

    def __init__(self):
        self._records: Dict[Tuple[float, ...], FitnessRecord] = {}

    def __len__(self):
        return len(self._records)

    def __contains__(self, c: Chromosome):
        return c.genes in self._records

    def lookup(self, c: Chromosome) -> Optional[FitnessRecord]:
        return self._records.get(c.genes)

    def add(self, rec: FitnessRecord) -> None:
        self._records[rec.chromosome.genes] = rec


def fitness_cache_lookup(cache: FitnessCache, chromosome: Chromosome) -> Optional[FitnessRecord]:
    return cache.lookup(chromosome)


def tournament_select(population: Sequence[Chromosome], records: Sequence, k: int, rng) -> Chromosome:
    """Best of ``k`` members drawn without replacement."""
    n = len(population)
    if n == 0:
        raise ValueError("empty population")
    if not 1 <= k <= n:
        raise ValueError("tournament size must be in [1, len(population)]")
    picks = rng.choice(n, size=k, replace=False)
    best = min(picks, key=lambda i: fitness_key(records[i]))
    return population[best]


def crossover(a: Chromosome, b: Chromosome, rate: float, rng,
              specs=GENE_SPECS) -> Tuple[Chromosome, Chromosome]:
    """Per-gene blend ``alpha*a + (1-alpha)*b`` and its mirror, with probability ``rate``."""
    if rng.random() >= rate:
        return a, b
    x, y = a.array(), b.array()
    alpha = rng.random(len(x))
    c1 = alpha * x + (1.0 - alpha) * y
    c2 = (1.0 - alpha) * x + alpha * y
    return Chromosome.from_array(c1, specs), Chromosome.from_array(c2, specs)


def mutate(c: Chromosome, rate: float, sigma: float, rng, specs=GENE_SPECS) -> Chromosome:
    """Gaussian perturbation of each gene with probability ``rate``, std ``sigma * range``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    lo, hi = _bounds(specs)
    x = c.array()
    mask = rng.random(len(x)) < rate
    noise = rng.standard_normal(len(x)) * sigma * (hi - lo)
    return Chromosome.from_array(np.where(mask, x + noise, x), specs)


def worker_count(requested: Optional[int] = None) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def _evaluate_batch(fitness_fn, chromosomes, workers):
    if workers <= 1 or len(chromosomes) <= 1:
        return [fitness_fn(c) for c in chromosomes]
    with ProcessPoolExecutor(max_workers=min(workers, len(chromosomes))) as pool:
        # map() yields in submission order, which fixes eval_index assignment
        return list(pool.map(fitness_fn, chromosomes))


@dataclass
class GaResult:
    best: FitnessRecord
    history: List[FitnessRecord]
    best_per_generation: List[FitnessRecord] = field(default_factory=list)


def ga_run(fitness_fn: Callable[[Chromosome], Fitness], cfg: GaConfig, specs=GENE_SPECS,
           run_seed: int = 0, workers: Optional[int] = None,
           on_record: Optional[Callable[[FitnessRecord], None]] = None,
           on_generation: Optional[Callable[[int, List[Chromosome]], None]] = None) -> GaResult:
    """Evolve a population and return the best-ever record and the full history.

    ``fitness_fn`` maps a :class:`Chromosome` to a :class:`Fitness`. It must
    be picklable when more than one worker is used. ``on_record`` sees each
    new history record as soon as its index is assigned.
    """
    cfg.validate()
    specs = tuple(specs)
    rng = np.random.default_rng(cfg.seed)
    lo, hi = _bounds(specs)
    population = [Chromosome.from_array(rng.uniform(lo, hi), specs)
                  for _ in range(cfg.population_size)]
    cache = FitnessCache()
    history: List[FitnessRecord] = []
    best: Optional[FitnessRecord] = None
    per_gen: List[FitnessRecord] = []
    n_workers = worker_count(workers)

    for gen in range(1, cfg.generations + 1):
        if on_generation is not None:
            on_generation(gen, population)
        pending, seen = [], set()
        for c in population:
            if c not in cache and c.genes not in seen:
                seen.add(c.genes)
                pending.append(c)
        for c, fit in zip(pending, _evaluate_batch(fitness_fn, pending, n_workers)):
            rec = FitnessRecord(c, fit.epochs_to_goal, fit.final_success_rate,
                                fit.final_median_reward, len(history) + 1, run_seed,
                                fit.reached, fit.wall_time_s, gen)
            history.append(rec)
            cache.add(rec)
            if on_record is not None:
                on_record(rec)
        records = [cache.lookup(c) for c in population]
        gen_best = min(records, key=fitness_key)
        if best is None or fitness_key(gen_best) < fitness_key(best):
            best = gen_best
        per_gen.append(best)
        log.info("generation %d: best epochs=%s success=%.2f (evaluations so far: %d)",
                 gen, best.epochs_to_goal, best.final_success_rate, len(history))
        if gen == cfg.generations:
            break

        order = sorted(range(len(population)), key=lambda i: fitness_key(records[i]))
        nxt = [population[i] for i in order[:cfg.elitism_count]]
        # tournaments larger than the population degrade to "pick the best"
        k = min(cfg.tournament_size, len(population))
        while len(nxt) < cfg.population_size:
            p1 = tournament_select(population, records, k, rng)
            p2 = tournament_select(population, records, k, rng)
            c1, c2 = crossover(p1, p2, cfg.crossover_rate, rng, specs)
            nxt.append(mutate(c1, cfg.mutation_rate, cfg.mutation_sigma, rng, specs))
            if len(nxt) < cfg.population_size:
                nxt.append(mutate(c2, cfg.mutation_rate, cfg.mutation_sigma, rng, specs))
        population = nxt

    return GaResult(best, history, per_gen)


@dataclass
class TrainFitness:
    """Fitness function that trains one DDPG+HER agent per chromosome.

    Every chromosome is trained with the same seed (``train_cfg.seed``).
    """

    env_name: str
    train_cfg: TrainConfig
    agent_cfg: AgentConfig = field(default_factory=AgentConfig)
    specs: Tuple[GeneSpec, ...] = GENE_SPECS

    def __call__(self, c: Chromosome) -> Fitness:
        metrics = train_run(make_env(self.env_name), c.to_hyperparams(self.specs),
                            self.train_cfg, self.agent_cfg)
        return Fitness(metrics.fitness_epochs, metrics.final_success_rate,
                       metrics.final_median_reward, metrics.reached, metrics.wall_time_s)
