"""Evolutionary engine: quantized genes, rank-elite selection with random
injection, three crossover operators, three mutation operators, Rechenberg
1/5 mutation-rate adaptation, and the main fitting loop.

Fitness is minimized (chi^2); every "better" comparison is strict less-than.
The whole run is a deterministic function of (data, paths, configs, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fitness import FitnessConfig, FitnessError, SpectrumObjective, metrics
from .model import PathParams
from .paths import PathSet
from .spectra import KSpectrum, transform_k_to_r


class GAError(ValueError):
    """Invalid engine configuration or state."""


CROSSOVER_METHODS = ("uniform", "and", "or")
MUTATION_METHODS = ("maximum", "nested", "metropolis")


@dataclass(frozen=True)
class GeneSpec:
    """Bounded, quantized gene: values are lower + i*step, i in [0, n_levels)."""

    name: str
    lower: float
    upper: float
    step: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise GAError(f"{self.name}: lower must be < upper")
        if self.step <= 0:
            raise GAError(f"{self.name}: step must be positive")
        if (self.upper - self.lower) / self.step < 1:
            raise GAError(f"{self.name}: fewer than two quantization levels")
        if self.n_levels > 2**32:
            raise GAError(f"{self.name}: more than 2^32 quantization levels")

    @property
    def n_levels(self) -> int:
        return int(math.floor((self.upper - self.lower) / self.step + 1e-9)) + 1


class GeneCodec:
    """Vectorized encode/decode between gene values and quantized indices."""

    def __init__(self, specs):
        self.specs = tuple(specs)
        self.n_genes = len(self.specs)
        self.lower = np.array([s.lower for s in self.specs])
        self.upper = np.array([s.upper for s in self.specs])
        self.step = np.array([s.step for s in self.specs])
        self.n_levels = np.array([s.n_levels for s in self.specs], dtype=np.int64)

    def random(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Uniform draw from the quantized grid; shape (n_genes,) or (size, n_genes)."""
        shape = (self.n_genes,) if size is None else (size, self.n_genes)
        idx = rng.integers(0, self.n_levels, size=shape)
        return self.lower + idx * self.step

    def encode(self, genes: np.ndarray) -> np.ndarray:
        idx = np.rint((np.asarray(genes) - self.lower) / self.step).astype(np.int64)
        return np.clip(idx, 0, self.n_levels - 1)

    def decode(self, idx: np.ndarray) -> np.ndarray:
        idx = np.clip(np.asarray(idx, dtype=np.int64), 0, self.n_levels - 1)
        return self.lower + idx * self.step

    def contains(self, genes: np.ndarray) -> bool:
        g = np.atleast_2d(genes)
        return bool(
            np.all(g >= self.lower - 1e-12) and np.all(g <= self.upper + 1e-12)
        )


@dataclass(frozen=True)
class Chromosome:
    """One global delta_e0 gene plus (s02, sigma2, delta_r) per path."""

    delta_e0: float
    per_path: tuple[PathParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "per_path", tuple(self.per_path))

    @property
    def n_genes(self) -> int:
        return 1 + 3 * len(self.per_path)

    def to_genes(self) -> np.ndarray:
        out = np.empty(self.n_genes)
        out[0] = self.delta_e0
        for i, p in enumerate(self.per_path):
            out[1 + 3 * i : 4 + 3 * i] = (p.s02, p.sigma2, p.delta_r)
        return out

    @classmethod
    def from_genes(cls, genes: np.ndarray) -> "Chromosome":
        genes = np.asarray(genes, dtype=float)
        if genes.size % 3 != 1:
            raise GAError(f"gene vector length {genes.size} is not 3*n_paths + 1")
        per_path = tuple(
            PathParams(
                s02=float(genes[1 + 3 * i]),
                sigma2=float(genes[2 + 3 * i]),
                delta_r=float(genes[3 + 3 * i]),
            )
            for i in range((genes.size - 1) // 3)
        )
        return cls(delta_e0=float(genes[0]), per_path=per_path)


def default_gene_specs(
    n_paths: int,
    e0_bounds: tuple[float, float, float] = (-10.0, 10.0, 0.01),
    s02_bounds: tuple[float, float, float] = (0.0, 1.2, 0.005),
    sigma2_bounds: tuple[float, float, float] = (0.0, 0.02, 1e-4),
    delta_r_bounds: tuple[float, float, float] = (-0.2, 0.2, 1e-3),
) -> list[GeneSpec]:
    """Gene layout [delta_e0, (s02, sigma2, delta_r) per path] with
    (lower, upper, step) triples per parameter kind."""
    specs = [GeneSpec("delta_e0", *e0_bounds)]
    for i in range(n_paths):
        specs.append(GeneSpec(f"s02_{i}", *s02_bounds))
        specs.append(GeneSpec(f"sigma2_{i}", *sigma2_bounds))
        specs.append(GeneSpec(f"delta_r_{i}", *delta_r_bounds))
    return specs


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 200
    max_generations: int = 100
    elite_fraction: float = 0.2
    random_fraction: float = 0.2
    crossover_method: str = "uniform"
    mutation_method: str = "maximum"
    initial_mutation_rate: float = 20.0
    mutation_rate_bounds: tuple[float, float] = (1.0, 90.0)
    rechenberg_factor: float = 0.9
    patience: int = 20
    rng_seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise GAError("population_size must be at least 2")
        if not (0 < self.elite_fraction < 1 and 0 <= self.random_fraction < 1):
            raise GAError("elite_fraction and random_fraction must lie in (0,1)")
        if self.elite_fraction + self.random_fraction >= 1:
            raise GAError("elite_fraction + random_fraction must be < 1")
        if self.crossover_method not in CROSSOVER_METHODS:
            raise GAError(f"unknown crossover_method {self.crossover_method!r}")
        if self.mutation_method not in MUTATION_METHODS:
            raise GAError(f"unknown mutation_method {self.mutation_method!r}")
        lo, hi = self.mutation_rate_bounds
        if not (0 <= lo <= self.initial_mutation_rate <= hi <= 100):
            raise GAError("mutation rate bounds must satisfy 0 <= lo <= init <= hi <= 100")
        if not 0 < self.rechenberg_factor < 1:
            raise GAError("rechenberg_factor must lie in (0,1)")
        if self.patience < 1 or self.max_generations < 1:
            raise GAError("patience and max_generations must be >= 1")


@dataclass
class GAState:
    """Per-run mutable bookkeeping for the metropolis cooling schedule."""

    generation: int
    max_generation: int
    mutation_rate: float
    delta_f: float = 0.0
    success_ratio: float = 0.0


@dataclass(frozen=True)
class FitResult:
    best: Chromosome
    best_fitness: float
    fitness_trace: np.ndarray
    sigma_trace: np.ndarray
    success_trace: np.ndarray
    d_crossover: np.ndarray
    d_mutation: np.ndarray
    d_crossover_mean: np.ndarray
    d_mutation_mean: np.ndarray
    n_generations: int
    exit_reason: str
    metrics_k: dict
    metrics_r: dict


def init_population(specs, n_paths: int, config: GAConfig, rng=None) -> np.ndarray:
    """population_size gene vectors drawn uniformly from the quantized grids."""
    specs = list(specs)
    if len(specs) != 3 * n_paths + 1:
        raise GAError(f"expected {3 * n_paths + 1} gene specs, got {len(specs)}")
    codec = GeneCodec(specs)
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    return codec.random(rng, config.population_size)


def select(population: np.ndarray, fitnesses: np.ndarray, config: GAConfig):
    """Stable rank sort (ascending fitness); best elite_fraction retained.

    Returns (elites, parent_pool); the parent pool is the elite set.
    """
    population = np.asarray(population)
    if population.shape[0] < 2:
        raise GAError("population must contain at least 2 individuals")
    order = np.argsort(np.asarray(fitnesses), kind="stable")
    n_elite = max(1, int(population.shape[0] * config.elite_fraction))
    elites = population[order[:n_elite]].copy()
    return elites, elites


def crossover_uniform(parent_a, parent_b, rng: np.random.Generator) -> np.ndarray:
    """Each gene copied from either parent with probability 1/2."""
    mask = rng.random(len(parent_a)) < 0.5
    return np.where(mask, parent_a, parent_b)


def crossover_and(parent_a, parent_b, specs) -> np.ndarray:
    """Bitwise AND of the parents' quantized grid indices, per gene."""
    codec = specs if isinstance(specs, GeneCodec) else GeneCodec(specs)
    return codec.decode(codec.encode(parent_a) & codec.encode(parent_b))


def crossover_or(parent_a, parent_b, specs) -> np.ndarray:
    """Bitwise OR of the parents' quantized grid indices, clamped to bounds."""
    codec = specs if isinstance(specs, GeneCodec) else GeneCodec(specs)
    return codec.decode(codec.encode(parent_a) | codec.encode(parent_b))


def mutate_maximum(individual, sigma: float, specs, rng: np.random.Generator) -> np.ndarray:
    """Replace the whole chromosome with a fresh random one with probability sigma%."""
    codec = specs if isinstance(specs, GeneCodec) else GeneCodec(specs)
    if rng.uniform(0.0, 100.0) < sigma:
        return codec.random(rng)
    return np.asarray(individual).copy()


def mutate_nested(
    individual,
    sigma: float,
    specs,
    rng: np.random.Generator,
    force_inner: bool = False,
) -> np.ndarray:
    """Two-level mutation: an outer draw gates per-gene regeneration draws.

    With force_inner=True the per-gene draws are skipped and every gene is
    regenerated, which reduces this operator to mutate_maximum.
    """
    codec = specs if isinstance(specs, GeneCodec) else GeneCodec(specs)
    individual = np.asarray(individual).copy()
    if rng.uniform(0.0, 100.0) >= sigma:
        return individual
    if force_inner:
        mask = np.ones(codec.n_genes, dtype=bool)
    else:
        mask = rng.uniform(0.0, 100.0, codec.n_genes) < sigma
    fresh = codec.random(rng)
    return np.where(mask, fresh, individual)


def cooling_rate(delta_f: float, i: int, i_max: int) -> float:
    """K(i) = -delta_f / ln(1 - i/i_max); NaN at i = 0 (no thermal acceptance)."""
    if i <= 0 or i >= i_max:
        return float("nan")
    return -delta_f / math.log(1.0 - i / i_max)


def _mutate_path_genes(
    individual: np.ndarray, sigma: float, codec: GeneCodec, rng: np.random.Generator
) -> np.ndarray:
    """Per-gene regeneration of the scattering-path genes (index >= 1)."""
    mask = np.zeros(codec.n_genes, dtype=bool)
    mask[1:] = rng.uniform(0.0, 100.0, codec.n_genes - 1) < sigma
    fresh = codec.random(rng)
    return np.where(mask, fresh, individual)


def mutate_metropolis(
    individual,
    sigma: float,
    f_orig: float,
    state: GAState,
    rng: np.random.Generator,
    fitness_fn,
    specs,
) -> tuple[np.ndarray, float]:
    """Annealing-gated mutation of the path genes.

    Improving mutants are always kept; worse mutants are kept only when
    exp(-(f_mut - f_orig)/K) < t with t uniform in [0,1) and K the cooling
    rate.  K <= 0 or non-finite disables thermal acceptance.
    """
    codec = specs if isinstance(specs, GeneCodec) else GeneCodec(specs)
    individual = np.asarray(individual).copy()
    if rng.uniform(0.0, 100.0) >= sigma:
        return individual, f_orig
    mutant = _mutate_path_genes(individual, sigma, codec, rng)
    if np.array_equal(mutant, individual):
        return individual, f_orig
    f_mut = fitness_fn(mutant)
    if f_mut < f_orig:
        return mutant, f_mut
    k_cool = cooling_rate(state.delta_f, state.generation, state.max_generation)
    t = rng.random()
    if math.isfinite(k_cool) and k_cool > 0 and math.exp(-(f_mut - f_orig) / k_cool) < t:
        return mutant, f_mut
    return individual, f_orig


def rechenberg_update(sigma: float, success_ratio: float, config: GAConfig) -> float:
    """1/5 success rule: grow sigma when S > 1/5, shrink when S < 1/5."""
    c = config.rechenberg_factor
    if success_ratio > 0.2:
        sigma = sigma / c
    elif success_ratio < 0.2:
        sigma = sigma * c
    lo, hi = config.mutation_rate_bounds
    return float(min(max(sigma, lo), hi))


def _pick_two_parents(pool_size: int, rng: np.random.Generator) -> tuple[int, int]:
    if pool_size < 2:
        return 0, 0
    i = int(rng.integers(pool_size))
    j = int(rng.integers(pool_size - 1))
    if j >= i:
        j += 1
    return i, j


def run_ga(
    data: KSpectrum,
    paths: PathSet,
    ga_config: GAConfig,
    fitness_config: FitnessConfig,
    gene_specs=None,
    objective_fn=None,
) -> FitResult:
    """Evolve chromosomes against the data until max_generations or stagnation.

    objective_fn (gene vector -> fitness) overrides the spectrum objective;
    used for diagnostics and benchmarks.
    """
    n_paths = len(paths)
    if gene_specs is None:
        gene_specs = default_gene_specs(n_paths)
    gene_specs = list(gene_specs)
    if len(gene_specs) != 3 * n_paths + 1:
        raise GAError(
            f"gene specs ({len(gene_specs)}) do not match 3*{n_paths} + 1 genes"
        )
    codec = GeneCodec(gene_specs)
    objective = SpectrumObjective(data, paths, fitness_config)
    fitness_fn = objective.evaluate_genes if objective_fn is None else objective_fn

    rng = np.random.default_rng(ga_config.rng_seed)
    pop_size = ga_config.population_size
    n_elite = max(1, int(pop_size * ga_config.elite_fraction))
    n_random = int(pop_size * ga_config.random_fraction)
    n_child = pop_size - n_elite - n_random

    def evaluate(rows: np.ndarray, generation: int) -> np.ndarray:
        fits = np.empty(rows.shape[0])
        for i in range(rows.shape[0]):
            try:
                fits[i] = fitness_fn(rows[i])
            except Exception as exc:
                raise GAError(
                    f"fitness evaluation failed at generation {generation}, "
                    f"individual {i}: {exc}"
                ) from exc
        return fits

    pop = codec.random(rng, pop_size)
    fits = evaluate(pop, 1)

    sigma = float(ga_config.initial_mutation_rate)
    trace = [float(fits.min())]
    sigma_trace = [sigma]
    success_trace = [0.0]
    d_cross, d_mut = [0.0], [0.0]
    d_cross_mean, d_mut_mean = [0.0], [0.0]
    stall = 0
    exit_reason = "max_generations"
    prev_median = float(np.median(fits))
    prev_mean = float(fits.mean())

    gen = 1
    while gen < ga_config.max_generations:
        order = np.argsort(fits, kind="stable")
        elites = pop[order[:n_elite]].copy()
        elite_fits = fits[order[:n_elite]].copy()

        children = np.empty((n_child, codec.n_genes))
        for c in range(n_child):
            i, j = _pick_two_parents(n_elite, rng)
            pa, pb = elites[i], elites[j]
            if ga_config.crossover_method == "uniform":
                children[c] = crossover_uniform(pa, pb, rng)
            elif ga_config.crossover_method == "and":
                children[c] = crossover_and(pa, pb, codec)
            else:
                children[c] = crossover_or(pa, pb, codec)
        randoms = codec.random(rng, n_random)

        gen += 1
        new_pop = np.vstack([elites, children, randoms])
        new_fits = np.concatenate(
            [elite_fits, evaluate(children, gen), evaluate(randoms, gen)]
        )
        best_after_cross = float(new_fits.min())
        mean_after_cross = float(new_fits.mean())

        delta_f = abs(trace[-1] - trace[-2]) if len(trace) >= 2 else 0.0
        state = GAState(
            generation=gen - 1,
            max_generation=ga_config.max_generations,
            mutation_rate=sigma,
            delta_f=delta_f,
        )
        for idx in range(n_elite, pop_size):
            if ga_config.mutation_method == "maximum":
                mutant = mutate_maximum(new_pop[idx], sigma, codec, rng)
                if not np.array_equal(mutant, new_pop[idx]):
                    new_pop[idx] = mutant
                    new_fits[idx] = fitness_fn(mutant)
            elif ga_config.mutation_method == "nested":
                mutant = mutate_nested(new_pop[idx], sigma, codec, rng)
                if not np.array_equal(mutant, new_pop[idx]):
                    new_pop[idx] = mutant
                    new_fits[idx] = fitness_fn(mutant)
            else:
                new_pop[idx], new_fits[idx] = mutate_metropolis(
                    new_pop[idx], sigma, new_fits[idx], state, rng, fitness_fn, codec
                )

        pop, fits = new_pop, new_fits
        best = float(fits.min())
        mean_after_mut = float(fits.mean())

        success = float(np.mean(fits[n_elite:] < prev_median)) if pop_size > n_elite else 0.0
        prev_median = float(np.median(fits))

        d_cross.append(best_after_cross - trace[-1])
        d_mut.append(best - best_after_cross)
        d_cross_mean.append(mean_after_cross - prev_mean)
        d_mut_mean.append(mean_after_mut - mean_after_cross)
        prev_mean = mean_after_mut
        stall = 0 if best < trace[-1] else stall + 1
        trace.append(best)
        success_trace.append(success)
        sigma = rechenberg_update(sigma, success, ga_config)
        sigma_trace.append(sigma)

        if stall >= ga_config.patience:
            exit_reason = "stagnation"
            break

    best_idx = int(np.argmin(fits))
    best_genes = pop[best_idx]
    best_chrom = Chromosome.from_genes(best_genes)

    metrics_k: dict = {}
    metrics_r: dict = {}
    if objective_fn is None:
        from .model import evaluate_model_masked

        chi, valid = evaluate_model_masked(paths, best_chrom, data.grid)
        k = data.grid.ks
        lo, hi = fitness_config.ft.k_range
        m = (k >= lo) & (k <= hi) & valid
        kw = k**fitness_config.k_weight
        try:
            metrics_k = metrics(kw[m] * chi[m], kw[m] * data.chi[m])
            metrics_k["unweighted"] = metrics(chi[m], data.chi[m])
        except FitnessError:
            pass
        try:
            model_spec = KSpectrum(grid=data.grid, chi=np.where(valid, chi, 0.0))
            mag_m = transform_k_to_r(model_spec, fitness_config.ft).magnitude
            mag_d = transform_k_to_r(data, fitness_config.ft).magnitude
            metrics_r = metrics(mag_m, mag_d)
        except FitnessError:
            pass

    return FitResult(
        best=best_chrom,
        best_fitness=float(fits[best_idx]),
        fitness_trace=np.array(trace),
        sigma_trace=np.array(sigma_trace),
        success_trace=np.array(success_trace),
        d_crossover=np.array(d_cross),
        d_mutation=np.array(d_mut),
        d_crossover_mean=np.array(d_cross_mean),
        d_mutation_mean=np.array(d_mut_mean),
        n_generations=len(trace),
        exit_reason=exit_reason,
        metrics_k=metrics_k,
        metrics_r=metrics_r,
    )
