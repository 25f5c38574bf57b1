"""Optimization drivers: a plain elitist nondominated-sorting GA baseline and
the subspace-learning variant that routes part of the variation through the
RBM/DAE code space.

Both drivers share one generational engine so that, with the model route
disabled (rho forced to 0), they consume identical RNG draws and produce
bit-identical runs — the baseline is the ablation control, not a separate
code path that could drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Individual, RngStreams, SparseSolution
from .operators import bitflip, poly_mutation, sbx, uniform_crossover_bits
from .oracle import OracleError
from .pareto import environmental_selection, nondominated_sort, binary_tournament, rank_and_crowd
from .problem import AttackInstance, compute_metrics, evaluate, repair, select_final_ae
from .subspace import (
    K_MAX,
    BinarySubspaceModel,
    PslHyper,
    PslParams,
    RealSubspaceModel,
    SurvivalStats,
    adapt_params,
    reduce_solution,
    recover_solution,
    train_models,
)

OPTIMIZERS = ("psl", "nsga2")


@dataclass
class RunConfig:
    population_size: int = 50
    generations: int = 200
    alpha: float = 0.2
    eta_crossover: float = 20.0
    eta_mutation: float = 20.0
    crossover_prob: float = 1.0
    mutation_prob: Optional[float] = None  # None -> 1/d
    optimizer: str = "psl"
    seed: int = 0
    init_bit_density: float = 0.5
    rho_init: float = 0.5
    rho_fixed: Optional[float] = None  # pin rho (0 disables the model route entirely)
    k_init: int = 5
    k_max: int = K_MAX
    psl_epochs: int = 10
    rbm_lr: float = 0.1
    dae_lr: float = 0.05
    dae_noise: float = 0.1
    select_norm: str = "l1"
    validate: bool = True

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2 != 0:
            raise ValueError("population size must be even and at least 4")
        if self.generations < 1:
            raise ValueError("need at least one generation")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.select_norm not in ("l1", "l2"):
            raise ValueError(f"unknown selection norm {self.select_norm!r}")

    def hyper(self) -> PslHyper:
        return PslHyper(
            epochs=self.psl_epochs,
            rbm_lr=self.rbm_lr,
            dae_lr=self.dae_lr,
            noise_rate=self.dae_noise,
        )


@dataclass
class GenerationRecord:
    generation: int
    best_confidence: float                 # min f1 over the population
    best_distortion_miss: Optional[float]  # min f2 among misclassifying, if any
    queries_total: int


@dataclass
class RunResult:
    population: list[Individual]
    front_indices: list[int]
    final_ae_index: Optional[int]
    queries_offspring: int
    queries_total: int
    history: list[GenerationRecord]
    first_success_query: Optional[int]
    generations_completed: int
    psl_trace: list[PslParams] = field(default_factory=list)

    @property
    def final_ae(self) -> Optional[Individual]:
        return None if self.final_ae_index is None else self.population[self.final_ae_index]

    @property
    def front(self) -> list[Individual]:
        return [self.population[i] for i in self.front_indices]

    @property
    def success(self) -> bool:
        return self.final_ae_index is not None


class OracleRunFailure(OracleError):
    """Oracle failed mid-run; carries whatever the run produced so far."""

    def __init__(self, cause: OracleError, partial: RunResult):
        super().__init__(str(cause))
        self.cause = cause
        self.partial = partial


def initialize_population(
    n: int,
    instance: AttackInstance,
    alpha: float,
    bit_density: float,
    rng: np.random.Generator,
) -> list[SparseSolution]:
    """Uniform magnitudes scaled toward zero by alpha, Bernoulli bit gates.

    Scaling happens after the draw, so runs with the same seed and different
    alpha see proportionally scaled (not re-drawn) populations.
    """
    d = instance.d
    values = rng.uniform(instance.lower, instance.upper, size=(n, d)) * alpha
    bits = (rng.random((n, d)) < bit_density).astype(np.uint8)
    return [
        repair(SparseSolution(bits[i], values[i]), instance) for i in range(n)
    ]


def run_nsga2(instance: AttackInstance, config: RunConfig) -> RunResult:
    """Baseline: genetic variation only."""
    return _run(instance, config, use_subspace=False)


def run_moea_psl(instance: AttackInstance, config: RunConfig) -> RunResult:
    """Subspace-learning optimizer: per parent pair, variation happens in the
    original space when rho is smaller than a fresh uniform draw, otherwise in
    the learned code space."""
    return _run(instance, config, use_subspace=True)


def run_attack(instance: AttackInstance, config: RunConfig) -> RunResult:
    if config.optimizer == "nsga2":
        return run_nsga2(instance, config)
    return run_moea_psl(instance, config)


def _variation(
    parents: list[SparseSolution],
    rho: float,
    models: Optional[tuple[BinarySubspaceModel, RealSubspaceModel]],
    instance: AttackInstance,
    config: RunConfig,
    pm_rate: float,
    rngs: RngStreams,
    use_subspace: bool,
) -> list[tuple[SparseSolution, str]]:
    """Vary consecutive parent pairs; offspring come out repaired and tagged
    with their provenance."""
    offspring: list[tuple[SparseSolution, str]] = []
    eta_c, eta_m, pc = config.eta_crossover, config.eta_mutation, config.crossover_prob
    for a in range(0, len(parents), 2):
        p1, p2 = parents[a], parents[a + 1]
        model_route = False
        if use_subspace:
            # Genetic when rho < r, model-based otherwise.
            r = rngs.route.random()
            model_route = not (rho < r)
        if model_route:
            assert models is not None
            rbm, dae = models
            hb1, hr1 = reduce_solution(p1, rbm, dae)
            hb2, hr2 = reduce_solution(p2, rbm, dae)
            lo = np.minimum(hr1, hr2)
            hi = np.maximum(hr1, hr2)
            margin = 0.05 * (hi - lo)  # interval widened by 10% overall
            lo, hi = lo - margin, hi + margin
            k = hr1.shape[0]
            pm_k = 1.0 / k
            c1, c2 = sbx(hr1, hr2, lo, hi, eta_c, pc, rngs.reduced)
            c1 = poly_mutation(c1, lo, hi, eta_m, pm_k, rngs.reduced)
            c2 = poly_mutation(c2, lo, hi, eta_m, pm_k, rngs.reduced)
            b1, b2 = uniform_crossover_bits(hb1, hb2, rngs.reduced)
            b1 = bitflip(b1, pm_k, rngs.reduced)
            b2 = bitflip(b2, pm_k, rngs.reduced)
            o1 = recover_solution(b1, c1, rbm, dae)
            o2 = recover_solution(b2, c2, rbm, dae)
            provenance = "model-based"
        else:
            c1, c2 = sbx(
                p1.values, p2.values, instance.lower, instance.upper, eta_c, pc, rngs.genetic
            )
            c1 = poly_mutation(c1, instance.lower, instance.upper, eta_m, pm_rate, rngs.genetic)
            c2 = poly_mutation(c2, instance.lower, instance.upper, eta_m, pm_rate, rngs.genetic)
            b1, b2 = uniform_crossover_bits(p1.bits, p2.bits, rngs.genetic)
            b1 = bitflip(b1, pm_rate, rngs.genetic)
            b2 = bitflip(b2, pm_rate, rngs.genetic)
            o1 = SparseSolution(b1, c1)
            o2 = SparseSolution(b2, c2)
            provenance = "genetic"
        offspring.append((repair(o1, instance), provenance))
        offspring.append((repair(o2, instance), provenance))
    return offspring


def _run(instance: AttackInstance, config: RunConfig, use_subspace: bool) -> RunResult:
    rngs = RngStreams.from_seed(config.seed)
    n = config.population_size
    d = instance.d
    pm_rate = config.mutation_prob if config.mutation_prob is not None else 1.0 / d
    hyper = config.hyper()

    base_total, _ = instance.oracle.query_stats()
    state = _RunState(instance, base_total, config.validate)

    history: list[GenerationRecord] = []
    psl_trace: list[PslParams] = []
    population: list[Individual] = []
    generations_done = 0

    rho0 = config.rho_fixed if config.rho_fixed is not None else config.rho_init
    params = PslParams(rho=rho0, k=min(config.k_init, config.k_max, d))

    try:
        solutions = initialize_population(
            n, instance, config.alpha, config.init_bit_density, rngs.init
        )
        population = [state.evaluate(s, "initial") for s in solutions]
        history.append(_record(0, population, state))

        for gen in range(1, config.generations + 1):
            objectives = _objective_matrix(population)
            partition, crowding = rank_and_crowd(objectives)

            models = None
            if use_subspace:
                front0 = [population[i].solution for i in partition.fronts[0]]
                k = min(params.k, d)
                models = train_models(
                    front0, k, instance.lower, instance.upper, hyper, rngs.model
                )

            winners = binary_tournament(partition.rank, crowding, rngs.mating, n)
            parents = [population[int(i)].solution for i in winners]
            varied = _variation(
                parents, params.rho, models, instance, config, pm_rate, rngs, use_subspace
            )
            offspring = [state.evaluate(s, prov) for s, prov in varied]

            union = population + offspring
            union_objectives = _objective_matrix(union)
            survivors = environmental_selection(union_objectives, n)
            population = [union[i] for i in survivors]
            generations_done = gen

            if use_subspace:
                stats = _survival_stats(offspring, survivors, n)
                front_bits = _front_bits(population)
                adapted = adapt_params(stats, front_bits, params, config.k_max)
                if config.rho_fixed is not None:
                    adapted = PslParams(rho=config.rho_fixed, k=adapted.k)
                params = adapted
                psl_trace.append(params)

            history.append(_record(gen, population, state))
    except OracleError as exc:
        partial = _finish(population, config, state, history, generations_done, psl_trace)
        raise OracleRunFailure(exc, partial) from exc

    return _finish(population, config, state, history, generations_done, psl_trace)


class _RunState:
    """Per-run evaluation bookkeeping: query deltas and first-success query."""

    def __init__(self, instance: AttackInstance, base_total: int, validate: bool):
        self.instance = instance
        self.base_total = base_total
        self.validate = validate
        self.first_success_query: Optional[int] = None

    def queries(self) -> int:
        total, _ = self.instance.oracle.query_stats()
        return total - self.base_total

    def evaluate(self, solution: SparseSolution, provenance: str) -> Individual:
        objectives, probs = evaluate(self.instance, solution, validate=self.validate)
        metrics = compute_metrics(solution, probs, self.instance.true_label)
        if metrics.misclassified and self.first_success_query is None:
            self.first_success_query = self.queries()
        return Individual(
            solution=solution,
            provenance=provenance,  # type: ignore[arg-type]
            objectives=objectives,
            probs=probs,
            metrics=metrics,
        )


def _objective_matrix(population: list[Individual]) -> np.ndarray:
    return np.array(
        [[ind.objectives.confidence, ind.objectives.distortion] for ind in population]
    )


def _record(generation: int, population: list[Individual], state: _RunState) -> GenerationRecord:
    best_conf = min(ind.objectives.confidence for ind in population)
    miss = [ind.objectives.distortion for ind in population if ind.metrics.misclassified]
    return GenerationRecord(
        generation=generation,
        best_confidence=best_conf,
        best_distortion_miss=min(miss) if miss else None,
        queries_total=state.queries(),
    )


def _survival_stats(
    offspring: list[Individual], survivors: list[int], population_size: int
) -> SurvivalStats:
    stats = SurvivalStats()
    for ind in offspring:
        if ind.provenance == "model-based":
            stats.model_made += 1
        else:
            stats.genetic_made += 1
    surviving_offspring = [i - population_size for i in survivors if i >= population_size]
    for k in surviving_offspring:
        if offspring[k].provenance == "model-based":
            stats.model_survived += 1
        else:
            stats.genetic_survived += 1
    return stats


def _front_bits(population: list[Individual]) -> np.ndarray:
    objectives = _objective_matrix(population)
    partition = nondominated_sort(objectives)
    return np.vstack([population[i].solution.bits for i in partition.fronts[0]])


def _finish(
    population: list[Individual],
    config: RunConfig,
    state: _RunState,
    history: list[GenerationRecord],
    generations_done: int,
    psl_trace: list[PslParams],
) -> RunResult:
    total = state.queries()
    if population:
        objectives = _objective_matrix(population)
        front = nondominated_sort(objectives).fronts[0]
        final_idx = select_final_ae([population[i] for i in front], config.select_norm)
        final_ae_index = front[final_idx] if final_idx is not None else None
    else:
        front = []
        final_ae_index = None
    return RunResult(
        population=population,
        front_indices=front,
        final_ae_index=final_ae_index,
        queries_offspring=max(total - config.population_size, 0),
        queries_total=total,
        history=history,
        first_success_query=state.first_success_query,
        generations_completed=generations_done,
        psl_trace=psl_trace,
    )
