"""Evolution loop: chromosomes are kernel expressions, fitness is SVM accuracy.

The population is evolved by tournament selection, subtree crossover and
mutation under a depth cap, with elitism and generational replacement.
Fitness of a chromosome is the validation accuracy of a 1-vs-1 SVM trained on
the kernel the chromosome evaluates to (cross-validation modes optional).
Per-chromosome RNG streams are derived from (seed, generation, slot), so a
parallel fitness pass returns exactly what a sequential one does.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericalError, ParameterError
from .expr import (
    Add,
    KernelExpr,
    Leaf,
    Mul,
    canonical_string,
    depth,
    evaluate,
    iter_nodes,
    node_count,
    parse_expr,
    replace_at,
    subtree_at,
)
from .gram import KernelBank
from .rng import derive_seed, derived_rng
from .svm import SvmParams, accuracy, predict, train_multiclass

FITNESS_MODES = ("validation", "k_fold", "leave_one_out")
IMPROVEMENT_TOL = 1e-6


@dataclass(frozen=True)
class GpParams:
    population_size: int = 50
    max_generations: int = 30
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    tournament_size: int = 3
    max_depth: int = 6
    init_depth_range: tuple[int, int] = (2, 4)
    stagnation_limit: int = 5
    elitism: int = 1
    rng_seed: int = 0
    fitness_mode: str = "validation"
    n_folds: int = 5
    seed_leaves: bool = True
    initial_exprs: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "init_depth_range", tuple(self.init_depth_range))
        object.__setattr__(self, "initial_exprs", tuple(self.initial_exprs))
        if self.population_size < 1:
            raise ParameterError("population_size must be >= 1")
        if self.max_generations < 0:
            raise ParameterError("max_generations must be >= 0")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {rate}")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ParameterError("tournament_size must lie in [1, population_size]")
        if not 0 <= self.elitism < self.population_size:
            raise ParameterError("elitism must lie in [0, population_size)")
        lo, hi = self.init_depth_range
        if not (1 <= lo <= hi):
            raise ParameterError(f"invalid init_depth_range {self.init_depth_range}")
        if hi > self.max_depth:
            raise ParameterError("init_depth_range may not exceed max_depth")
        if self.stagnation_limit < 1:
            raise ParameterError("stagnation_limit must be >= 1")
        if self.fitness_mode not in FITNESS_MODES:
            raise ParameterError(f"fitness_mode must be one of {FITNESS_MODES}")
        if self.fitness_mode == "k_fold" and self.n_folds < 2:
            raise ParameterError("k_fold mode needs n_folds >= 2")


@dataclass
class EvolutionResult:
    best_expr: KernelExpr
    best_fitness: float
    per_generation: list[tuple[int, float, float]]  # (generation, best, mean)
    final_test_accuracy: float | None
    generation_best_exprs: list[str] = field(default_factory=list)


def _grow(n: int, target: int, full: bool, rng: np.random.Generator, d: int) -> KernelExpr:
    if d == target:
        return Leaf(int(rng.integers(0, n)))
    if not full and rng.random() < 0.5:
        return Leaf(int(rng.integers(0, n)))
    op = Add if rng.integers(0, 2) == 0 else Mul
    return op(_grow(n, target, full, rng, d + 1), _grow(n, target, full, rng, d + 1))


def _random_tree(n: int, lo: int, hi: int, rng: np.random.Generator) -> KernelExpr:
    target = int(rng.integers(lo, hi + 1))
    full = bool(rng.integers(0, 2))
    # the grow method can undershoot the minimum depth; resample, then force full
    for _ in range(64):
        tree = _grow(n, target, full, rng, 1)
        if depth(tree) >= lo:
            return tree
        full = False
    return _grow(n, target, True, rng, 1)


def random_tree(params: GpParams, n: int, rng: np.random.Generator) -> KernelExpr:
    """Ramped half-and-half tree with depth inside params.init_depth_range."""
    if n < 1:
        raise ParameterError("kernel bank must hold at least one kernel")
    lo, hi = params.init_depth_range
    return _random_tree(n, lo, hi, rng)


def crossover(
    a: KernelExpr, b: KernelExpr, rng: np.random.Generator, max_depth: int
) -> tuple[KernelExpr, KernelExpr]:
    """Swap one uniformly chosen subtree of each parent.

    A child that would exceed max_depth is replaced by its own unmodified
    parent, so the output is always depth-legal.
    """
    pos_a = int(rng.integers(0, node_count(a)))
    pos_b = int(rng.integers(0, node_count(b)))
    sub_a = subtree_at(a, pos_a)
    sub_b = subtree_at(b, pos_b)
    child_a = replace_at(a, pos_a, sub_b)
    child_b = replace_at(b, pos_b, sub_a)
    if depth(child_a) > max_depth:
        child_a = a
    if depth(child_b) > max_depth:
        child_b = b
    return child_a, child_b


def mutate(expr: KernelExpr, rng: np.random.Generator, params: GpParams, n: int) -> KernelExpr:
    """One of three equally likely edits: re-point a leaf, swap an operator,
    or replace a subtree with a fresh random tree inside the depth budget."""
    branch = int(rng.integers(0, 3))
    nodes = iter_nodes(expr)
    if branch == 0:
        leaf_pos = [i for i, (node, _) in enumerate(nodes) if isinstance(node, Leaf)]
        pos = leaf_pos[int(rng.integers(0, len(leaf_pos)))]
        current = subtree_at(expr, pos)
        if n == 1:
            return expr
        others = [i for i in range(n) if i != current.index]
        return replace_at(expr, pos, Leaf(others[int(rng.integers(0, len(others)))]))
    if branch == 1:
        op_pos = [i for i, (node, _) in enumerate(nodes) if not isinstance(node, Leaf)]
        if not op_pos:
            return expr
        pos = op_pos[int(rng.integers(0, len(op_pos)))]
        node = subtree_at(expr, pos)
        swapped = Mul(node.left, node.right) if isinstance(node, Add) else Add(node.left, node.right)
        return replace_at(expr, pos, swapped)
    pos = int(rng.integers(0, len(nodes)))
    budget = params.max_depth - nodes[pos][1] + 1
    return replace_at(expr, pos, _random_tree(n, 1, max(1, budget), rng))


def tournament_select(fitnesses, k: int, rng: np.random.Generator, node_counts=None) -> int:
    """Index of the fittest of k sampled candidates.

    Candidates are drawn with replacement, except that k equal to the
    population size inspects every individual once.  Fitness ties go to the
    smaller tree, then the lower index.
    """
    n = len(fitnesses)
    if n == 0:
        raise ParameterError("cannot select from an empty population")
    if not 1 <= k <= n:
        raise ParameterError(f"tournament size {k} must lie in [1, {n}]")
    sizes = node_counts if node_counts is not None else [1] * n
    pool = range(n) if k == n else rng.integers(0, n, size=k)
    return int(min(pool, key=lambda i: (-fitnesses[i], sizes[i], i)))


def _split_indices(split) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (
        np.asarray(split.train_idx, dtype=int),
        np.asarray(split.val_idx, dtype=int),
        np.asarray(split.test_idx, dtype=int),
    )


def _require_converged(model) -> None:
    if not model.converged:
        raise NumericalError("SMO did not converge within max_passes")


def fitness(
    expr: KernelExpr,
    bank: KernelBank,
    labels,
    split,
    svm_params: SvmParams,
    mode: str = "validation",
    n_folds: int = 5,
) -> float:
    """Accuracy of an SVM using the chromosome's kernel (higher is better).

    validation: train on split.train_idx, score on split.val_idx.
    leave_one_out / k_fold: cross-validated accuracy over split.train_idx.
    SVM failures (non-convergence, degenerate folds) score 0 with a warning
    instead of raising, so evolution keeps moving.
    """
    labels = np.asarray(labels)
    kernel = evaluate(expr, bank)
    train_idx, val_idx, _ = _split_indices(split)
    seed = derive_seed(split.seed, canonical_string(expr))
    try:
        if mode == "validation":
            model = train_multiclass(kernel, labels, train_idx, svm_params, seed=seed)
            _require_converged(model)
            pred = predict(model, kernel.values[val_idx], train_idx)
            return accuracy(pred, labels[val_idx])
        if mode == "leave_one_out":
            folds = [np.array([pos]) for pos in range(train_idx.size)]
        elif mode == "k_fold":
            if n_folds > train_idx.size:
                raise ParameterError(f"{n_folds} folds for {train_idx.size} training points")
            order = derived_rng(split.seed, "folds").permutation(train_idx.size)
            folds = np.array_split(order, n_folds)
        else:
            raise ParameterError(f"unknown fitness mode {mode!r}")
        correct = 0
        for fold in folds:
            held = train_idx[fold]
            rest = np.delete(train_idx, fold)
            model = train_multiclass(kernel, labels, rest, svm_params, seed=seed)
            _require_converged(model)
            pred = predict(model, kernel.values[held], rest)
            correct += int(np.sum(pred == labels[held]))
        return correct / train_idx.size
    except (DataError, NumericalError) as exc:
        warnings.warn(f"fitness of {canonical_string(expr)} set to 0: {exc}", stacklevel=2)
        return 0.0


def train_final_model(bank: KernelBank, labels, split, expr: KernelExpr, svm_params: SvmParams):
    """Retrain on train+validation for the one test-set evaluation.

    Returns (model, evaluated kernel, fit indices).
    """
    labels = np.asarray(labels)
    kernel = evaluate(expr, bank)
    train_idx, val_idx, _ = _split_indices(split)
    fit_idx = np.concatenate([train_idx, val_idx])
    seed = derive_seed(split.seed, "final", kernel.source_tag)
    model = train_multiclass(kernel, labels, fit_idx, svm_params, seed=seed)
    return model, kernel, fit_idx


def _initial_population(params: GpParams, n: int) -> list[KernelExpr]:
    population: list[KernelExpr] = []
    if params.seed_leaves:
        population.extend(Leaf(i) for i in range(n))
    for text in params.initial_exprs:
        tree = parse_expr(text)
        bad = [node.index for node, _ in iter_nodes(tree) if isinstance(node, Leaf) and node.index >= n]
        if bad:
            raise ParameterError(f"seed expression {text!r} references kernel K{bad[0] + 1}; bank has {n}")
        if depth(tree) > params.max_depth:
            raise ParameterError(f"seed expression {text!r} deeper than max_depth")
        population.append(tree)
    while len(population) < params.population_size:
        rng = derived_rng(params.rng_seed, "init", len(population))
        population.append(random_tree(params, n, rng))
    return population[: params.population_size]


def evolve(
    bank: KernelBank,
    labels,
    split,
    params: GpParams,
    svm_params: SvmParams,
    threads: int = 1,
) -> EvolutionResult:
    """Run the generational loop and score the winner once on the test set.

    Elites pass through unchanged, so the best fitness never decreases.  The
    loop stops at max_generations, or earlier once the best fitness has not
    improved by more than 1e-6 for stagnation_limit generations.  The final
    model is retrained on train+validation before the single test evaluation,
    so test points never influence the search.
    """
    labels = np.asarray(labels)
    n = len(bank)
    train_idx, val_idx, test_idx = _split_indices(split)
    if len(set(labels[train_idx].tolist())) < 2:
        raise DataError("split.train_idx must cover at least 2 classes")
    if params.fitness_mode == "validation" and len(set(labels[val_idx].tolist())) < 2:
        raise DataError("split.val_idx must cover at least 2 classes")

    cache: dict[str, float] = {}
    mode, folds = params.fitness_mode, params.n_folds

    def eval_population(pop: list[KernelExpr]) -> tuple[list[float], list[str]]:
        canons = [canonical_string(e) for e in pop]
        fresh: dict[str, KernelExpr] = {}
        for expr_, canon in zip(pop, canons):
            if canon not in cache and canon not in fresh:
                fresh[canon] = expr_
        keys = list(fresh)
        if threads > 1 and len(keys) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                values = list(
                    pool.map(
                        lambda e: fitness(e, bank, labels, split, svm_params, mode, folds),
                        fresh.values(),
                    )
                )
        else:
            values = [fitness(e, bank, labels, split, svm_params, mode, folds) for e in fresh.values()]
        cache.update(zip(keys, values))
        return [cache[c] for c in canons], canons

    population = _initial_population(params, n)
    fits, _ = eval_population(population)
    sizes = [node_count(e) for e in population]

    def gen_best(fit_list, size_list) -> int:
        return int(min(range(len(fit_list)), key=lambda i: (-fit_list[i], size_list[i], i)))

    best_i = gen_best(fits, sizes)
    best_expr, best_fit = population[best_i], fits[best_i]
    history = [(0, fits[best_i], float(np.mean(fits)))]
    best_strings = [canonical_string(population[best_i])]

    stagnant = 0
    for gen in range(1, params.max_generations + 1):
        if stagnant >= params.stagnation_limit:
            break
        order = sorted(range(len(population)), key=lambda i: (-fits[i], sizes[i], i))
        next_pop = [population[i] for i in order[: params.elitism]]
        for slot in range(params.population_size - params.elitism):
            rng = derived_rng(params.rng_seed, "gen", gen, slot)
            p1 = population[tournament_select(fits, params.tournament_size, rng, sizes)]
            p2 = population[tournament_select(fits, params.tournament_size, rng, sizes)]
            child = p1
            if rng.random() < params.crossover_rate:
                child = crossover(p1, p2, rng, params.max_depth)[0]
            if rng.random() < params.mutation_rate:
                child = mutate(child, rng, params, n)
            next_pop.append(child)
        population = next_pop
        fits, _ = eval_population(population)
        sizes = [node_count(e) for e in population]
        best_i = gen_best(fits, sizes)
        history.append((gen, fits[best_i], float(np.mean(fits))))
        best_strings.append(canonical_string(population[best_i]))
        if fits[best_i] > best_fit + IMPROVEMENT_TOL:
            stagnant = 0
        else:
            stagnant += 1
        if fits[best_i] > best_fit or (
            fits[best_i] == best_fit and sizes[best_i] < node_count(best_expr)
        ):
            best_expr, best_fit = population[best_i], fits[best_i]

    final_acc: float | None = None
    if test_idx.size:
        model, kernel, fit_idx = train_final_model(bank, labels, split, best_expr, svm_params)
        pred = predict(model, kernel.values[test_idx], fit_idx)
        final_acc = accuracy(pred, labels[test_idx])

    return EvolutionResult(
        best_expr=best_expr,
        best_fitness=best_fit,
        per_generation=history,
        final_test_accuracy=final_acc,
        generation_best_exprs=best_strings,
    )


def write_evolution_log(path, result: EvolutionResult) -> None:
    """One CSV row per generation: generation, best, mean, best expression."""
    lines = ["generation,best_fitness,mean_fitness,best_expr"]
    for (gen, best, mean), text in zip(result.per_generation, result.generation_best_exprs):
        lines.append(f"{gen},{best!r},{mean!r},{text}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
