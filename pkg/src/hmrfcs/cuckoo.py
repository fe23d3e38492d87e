"""Cuckoo-search minimization in three flavors.

Each host nest carries one candidate solution (a K-vector of class
means). Per generation: every nest proposes a cuckoo by a Levy-flight
step toward/away from the current best, proposals replace their nest
when not worse, then a fraction p_a of nests take a biased random walk
built from the difference of two randomly paired nests. Variants differ
only in how p_a and the step scale alpha evolve:

* standard       - constants.
* improved       - p_a decays linearly from p_a_max to p_a_min and alpha
                   exponentially from alpha_max to alpha_min over the run.
* auto-adaptive  - the improved schedule, with alpha additionally scaled
                   by the population's normalized dispersion around the
                   best nest, so steps shrink as the swarm converges.

The best solution ever seen is shielded from the abandonment walk, which
makes the per-generation best-energy trace non-increasing. All randomness
derives from per-nest substreams of the config seed, so results are
reproducible regardless of how many worker threads evaluate the
objective.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "VARIANTS",
    "Nest",
    "CsConfig",
    "Trace",
    "mantegna_sigma",
    "levy_steps",
    "init_population",
    "best_index",
    "best_nest",
    "generate_cuckoo",
    "greedy_replace",
    "abandon_and_rebuild",
    "population_dispersion",
    "schedule_params",
    "optimize",
]

VARIANTS = ("standard", "improved", "auto-adaptive")

Objective = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class Nest:
    """A host nest: one candidate position with its cached energy."""

    position: np.ndarray
    energy: float


@dataclass
class CsConfig:
    """Cuckoo-search settings.

    dim is the search-space dimension (number of class means). The
    scalar p_a/alpha drive the standard variant; the min/max pairs drive
    the improved and auto-adaptive schedules. use_levy=False replaces
    Mantegna Levy steps with a constant step of 1 (plain random walks).
    """

    dim: int
    variant: str = "improved"
    n: int = 30
    max_generations: int = 100
    p_a: float = 0.25
    p_a_min: float = 0.05
    p_a_max: float = 0.5
    alpha: float = 1.0
    alpha_min: float = 0.01
    alpha_max: float = 0.5
    levy_beta: float = 1.5
    use_levy: bool = True
    bounds: tuple[float, float] = (0.0, 255.0)
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.max_generations < 1:
            raise ValueError("max_generations must be a positive integer")
        if not 0.0 <= self.p_a <= 1.0:
            raise ValueError("p_a must lie in [0, 1]")
        if not 0.0 <= self.p_a_min <= self.p_a_max <= 1.0:
            raise ValueError("need 0 <= p_a_min <= p_a_max <= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0.0 < self.alpha_min <= self.alpha_max:
            raise ValueError("need 0 < alpha_min <= alpha_max")
        if not 1.0 < self.levy_beta <= 2.0:
            raise ValueError("levy_beta must lie in (1, 2]")
        if self.bounds[0] > self.bounds[1]:
            raise ValueError("bounds must satisfy low <= high")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class Trace:
    """Per-run record: best energy after each generation, final best
    position, objective evaluation count, and wall time in seconds."""

    best_energy_per_generation: list[float] = field(default_factory=list)
    best_position_final: np.ndarray | None = None
    evaluations: int = 0
    wall_time: float = 0.0


def mantegna_sigma(beta: float) -> float:
    """Scale of the numerator normal in Mantegna's Levy-step sampler."""
    num = math.gamma(1.0 + beta) * math.sin(math.pi * beta / 2.0)
    den = math.gamma((1.0 + beta) / 2.0) * beta * 2.0 ** ((beta - 1.0) / 2.0)
    return (num / den) ** (1.0 / beta)


def levy_steps(k: int, beta: float, rng: np.random.Generator) -> np.ndarray:
    """K independent heavy-tailed steps u/|v|^(1/beta) (Mantegna method).

    u ~ Normal(0, mantegna_sigma(beta)^2), v ~ Normal(0, 1), drawn
    component-wise.
    """
    if not 1.0 < beta <= 2.0:
        raise ValueError("beta must lie in (1, 2]")
    u = rng.normal(0.0, mantegna_sigma(beta), size=k)
    v = rng.standard_normal(k)
    return u / np.abs(v) ** (1.0 / beta)


def init_population(
    config: CsConfig, objective: Objective, rng: np.random.Generator
) -> list[Nest]:
    """n nests drawn component-wise uniformly from the bounds, evaluated."""
    low, high = config.bounds
    positions = rng.uniform(low, high, size=(config.n, config.dim))
    return [Nest(p, objective(p)) for p in positions]


def best_index(population: Sequence[Nest]) -> int:
    """Index of the minimal-energy nest; ties go to the lowest index."""
    if not population:
        raise ValueError("population is empty")
    best = 0
    for i in range(1, len(population)):
        if population[i].energy < population[best].energy:
            best = i
    return best


def best_nest(population: Sequence[Nest]) -> Nest:
    return population[best_index(population)]


def generate_cuckoo(
    nest: Nest,
    best: Nest,
    alpha: float,
    step: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Propose c = mu + alpha * step x (mu - best) x randn(K).

    All products are entry-wise. Positions are never clamped to the
    bounds; the objective's out-of-range penalty handles excursions.
    """
    z = rng.standard_normal(nest.position.size)
    return nest.position + alpha * step * (nest.position - best.position) * z


def _greedy_select(nest: Nest, candidate: np.ndarray, cand_energy: float) -> Nest:
    # <=, not <: an equal-energy candidate replaces the incumbent
    if cand_energy <= nest.energy:
        return Nest(candidate, cand_energy)
    return nest


def greedy_replace(nest: Nest, candidate: np.ndarray, objective: Objective) -> Nest:
    """Keep the candidate when its energy is not worse than the nest's."""
    candidate = np.asarray(candidate, dtype=np.float64)
    return _greedy_select(nest, candidate, objective(candidate))


def _evaluate_all(
    objective: Objective,
    positions: Sequence[np.ndarray],
    pool: ThreadPoolExecutor | None,
) -> list[float]:
    if pool is None:
        return [objective(p) for p in positions]
    return list(pool.map(objective, positions))


def abandon_and_rebuild(
    population: Sequence[Nest],
    p_a: float,
    objective: Objective,
    rng: np.random.Generator,
    keep: int | None = None,
    pool: ThreadPoolExecutor | None = None,
) -> list[Nest]:
    """Biased random walks replacing a fraction p_a of nest components.

    Two random permutations pair every nest i with nests (a, b); the walk
    adds r x H(p_a - u) x (pos_a - pos_b) with r, u uniform per component
    and H the Heaviside step (H(0) = 0, so p_a = 0 changes nothing).
    Nests whose walk is identically zero keep their cached energy; the
    ``keep`` index, if given, is exempt from the walk entirely.
    """
    n = len(population)
    if n < 2:
        raise ValueError("abandonment needs a population of at least 2")
    if not 0.0 <= p_a <= 1.0:
        raise ValueError("p_a must lie in [0, 1]")
    k = population[0].position.size
    perm_a = rng.permutation(n)
    perm_b = rng.permutation(n)
    r = rng.random((n, k))
    u = rng.random((n, k))

    positions = [nest.position for nest in population]  # time-t snapshot
    moved: dict[int, np.ndarray] = {}
    for i in range(n):
        if i == keep:
            continue
        heaviside = (p_a - u[i]) > 0.0
        delta = r[i] * heaviside * (positions[perm_a[i]] - positions[perm_b[i]])
        if delta.any():
            moved[i] = positions[i] + delta

    result = list(population)
    indices = sorted(moved)
    energies = _evaluate_all(objective, [moved[i] for i in indices], pool)
    for i, energy in zip(indices, energies):
        result[i] = Nest(moved[i], energy)
    return result


def population_dispersion(population: Sequence[Nest], best: Nest) -> float:
    """Mean distance to the best nest, normalized by the box diagonal
    sqrt(K) * 255. Near 1 for a spread-out swarm, near 0 when collapsed."""
    k = best.position.size
    dists = [
        float(np.linalg.norm(nest.position - best.position)) for nest in population
    ]
    return float(np.mean(dists)) / (math.sqrt(k) * 255.0)


def schedule_params(
    config: CsConfig, t: int, dispersion: float = 1.0
) -> tuple[float, float]:
    """(p_a, alpha) in effect at generation t.

    standard: the configured constants. improved: p_a linear from
    p_a_max down to p_a_min, alpha exponential from alpha_max down to
    alpha_min across max_generations. auto-adaptive: like improved, with
    alpha further multiplied by the dispersion factor clamped to
    [1e-3, 1].
    """
    if not 0 <= t < config.max_generations:
        raise ValueError(f"generation index {t} outside [0, {config.max_generations})")
    if config.variant == "standard":
        return config.p_a, config.alpha
    frac = t / config.max_generations
    p_a_t = config.p_a_max - frac * (config.p_a_max - config.p_a_min)
    decay = math.log(config.alpha_min / config.alpha_max) / config.max_generations
    alpha_t = config.alpha_max * math.exp(decay * t)
    if config.variant == "auto-adaptive":
        alpha_t *= min(max(dispersion, 1e-3), 1.0)
    return p_a_t, alpha_t


def optimize(
    objective: Objective, config: CsConfig, workers: int | None = None
) -> tuple[np.ndarray, Trace]:
    """Minimize the objective with the configured cuckoo-search variant.

    Returns the best position ever seen and the run trace. Deterministic
    for a fixed (objective, config): randomness comes from per-nest
    substreams of config.seed drawn before any parallel section, so the
    result does not depend on ``workers``. The objective must be pure
    (and thread-safe when workers > 1).
    """
    children = np.random.SeedSequence(config.seed).spawn(config.n + 2)
    init_rng = np.random.default_rng(children[0])
    abandon_rng = np.random.default_rng(children[1])
    nest_rngs = [np.random.default_rng(c) for c in children[2:]]

    pool = ThreadPoolExecutor(workers) if workers is not None and workers > 1 else None
    start = time.perf_counter()
    trace = Trace()
    try:
        population = init_population(config, objective, init_rng)
        trace.evaluations = config.n
        ones = np.ones(config.dim)

        for t in range(config.max_generations):
            best = population[best_index(population)]
            dispersion = (
                population_dispersion(population, best)
                if config.variant == "auto-adaptive"
                else 1.0
            )
            p_a_t, alpha_t = schedule_params(config, t, dispersion)

            # draw all randomness up front, then evaluate (possibly in parallel)
            candidates = []
            for i, nest in enumerate(population):
                step = (
                    levy_steps(config.dim, config.levy_beta, nest_rngs[i])
                    if config.use_levy
                    else ones
                )
                candidates.append(
                    generate_cuckoo(nest, best, alpha_t, step, nest_rngs[i])
                )
            energies = _evaluate_all(objective, candidates, pool)
            trace.evaluations += config.n
            population = [
                _greedy_select(nest, cand, e)
                for nest, cand, e in zip(population, candidates, energies)
            ]

            if config.n >= 2:
                elite = best_index(population)
                rebuilt = abandon_and_rebuild(
                    population, p_a_t, objective, abandon_rng, keep=elite, pool=pool
                )
                trace.evaluations += sum(
                    1 for old, new in zip(population, rebuilt) if old is not new
                )
                population = rebuilt

            trace.best_energy_per_generation.append(
                population[best_index(population)].energy
            )
    finally:
        if pool is not None:
            pool.shutdown()

    final = population[best_index(population)]
    trace.best_position_final = final.position.copy()
    trace.wall_time = time.perf_counter() - start
    return final.position.copy(), trace
