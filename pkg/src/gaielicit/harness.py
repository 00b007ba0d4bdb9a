"""Simulation harness: synthetic model generation, simulated users, query
strategies, and the elicitation experiment loop with error traces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    AttributeSpec,
    Constraint,
    FactorScope,
    GaiModel,
    ModelError,
)


@dataclass(frozen=True)
class SyntheticModelParams:
    """Knobs for the chain-structured synthetic generator.

    Factors are overlapping windows over sequentially numbered attributes;
    consecutive factors share enough attributes to cover everything within
    ``max_scope``.  ``constraint_density`` scales the number of forbidden
    pairs (count = round(density * n_factors)); forbidden tuples never match
    the default outcome, so the default stays feasible.  Factor ids in
    ``default_bottom_factors`` get their bottom anchor at the default
    pattern (two pinned configurations instead of three).
    """

    n_attributes: int
    n_factors: int
    max_scope: int
    domain_size: int | tuple[int, ...] = 2
    constraint_density: float = 0.0
    default_bottom_factors: tuple[int, ...] = ()


# 26 variables, 13 factors of at most 5 attributes, 378 free parameters
CAR_RENTAL_SCALE = SyntheticModelParams(
    n_attributes=26,
    n_factors=13,
    max_scope=5,
    domain_size=2,
    constraint_density=1.0,
    default_bottom_factors=(13,),
)


def _chain_scopes(n_attrs: int, n_factors: int, size: int) -> list[tuple[int, ...]]:
    if size > n_attrs:
        size = n_attrs
    if n_attrs - size > (n_factors - 1) * size:
        raise ModelError("factors cannot cover the attributes within max_scope")
    scopes = [tuple(range(size))]
    remaining_new = n_attrs - size
    slots = n_factors - 1
    seen = {scopes[0]}
    next_attr = size
    shift = 1
    for k in range(slots):
        base = remaining_new // slots
        extra = 1 if k < remaining_new % slots else 0
        new = base + extra
        if new > 0:
            shared = scopes[-1][-(size - new):] if size - new > 0 else ()
            scope = tuple(sorted(shared + tuple(range(next_attr, next_attr + new))))
            next_attr += new
        else:
            # nothing new to add: slide a fresh window over existing attributes
            scope = None
            for offset in range(1, n_attrs):
                cand = tuple(sorted((a + shift * offset) % next_attr for a in range(size)))
                if cand not in seen and len(set(cand)) == size:
                    scope = cand
                    break
            if scope is None:
                raise ModelError("could not build distinct factor scopes")
        seen.add(scope)
        scopes.append(scope)
    return scopes


def generate_synthetic_model(params: SyntheticModelParams, seed: int) -> GaiModel:
    """Deterministic under (params, seed); validates before returning."""
    rng = np.random.default_rng([seed, 20_624])
    n = params.n_attributes
    if isinstance(params.domain_size, int):
        sizes = [params.domain_size] * n
    else:
        sizes = list(params.domain_size)
        if len(sizes) != n:
            raise ModelError("domain_size tuple must have one entry per attribute")
    attributes = [
        AttributeSpec(i, f"x{i:02d}", tuple(f"level{v}" for v in range(sizes[i])))
        for i in range(n)
    ]
    scopes = _chain_scopes(n, params.n_factors, params.max_scope)
    factors = [FactorScope(i + 1, s) for i, s in enumerate(scopes)]
    default = tuple(0 for _ in range(n))

    anchors = {}
    for f in factors:
        default_cfg = tuple(default[a] for a in f.attrs)
        if f.id in params.default_bottom_factors:
            bottom = default_cfg
            while True:
                top = tuple(int(rng.integers(0, sizes[a])) for a in f.attrs)
                if top != bottom:
                    break
        else:
            while True:
                top = tuple(int(rng.integers(0, sizes[a])) for a in f.attrs)
                bottom = tuple(int(rng.integers(0, sizes[a])) for a in f.attrs)
                if top != bottom and top != default_cfg and bottom != default_cfg:
                    break
        anchors[f.id] = (top, bottom)

    n_constraints = int(round(params.constraint_density * params.n_factors))
    constraints = []
    seen_cons = set()
    attempts = 0
    while len(constraints) < n_constraints and attempts < 50 * (n_constraints + 1):
        attempts += 1
        f = factors[int(rng.integers(0, len(factors)))]
        k = 2 if len(f.attrs) >= 2 else 1
        scope = tuple(sorted(int(a) for a in rng.choice(f.attrs, size=k, replace=False)))
        forbidden = tuple(int(rng.integers(0, sizes[a])) for a in scope)
        if forbidden == tuple(default[a] for a in scope):
            continue
        if (scope, forbidden) in seen_cons:
            continue
        seen_cons.add((scope, forbidden))
        constraints.append(Constraint(scope=scope, forbidden=frozenset({forbidden})))

    model = GaiModel(
        attributes=attributes,
        factors=factors,
        default_outcome=default,
        anchors=anchors,
        constraints=constraints,
        name=f"synthetic-{params.n_attributes}x{params.n_factors}",
    )
    from .model import validate_model

    problems = validate_model(model)
    if problems:
        raise ModelError("; ".join(problems))
    return model


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulation run: a model source, a prior family, per-strategy trial
    counts, a query budget, and a seed that fixes everything."""

    synthetic: SyntheticModelParams | None = None
    model_file: str | None = None
    prior: str = "uniform"  # uniform | random5 | gaussian10
    gaussian_variance: float = 0.3
    trials_evoi: int = 30
    trials_random: int = 100
    budget: int = 100
    seed: int = 0
    strategies: tuple[str, ...] = ("evoi", "random")
    evoi_workers: int = 0


@dataclass
class ErrorTrace:
    """Per-trial recommendation quality after 0..budget queries."""

    strategy: str
    trial: int
    optimum: float
    true_values: list[float]
    errors: list[float]
    frac_of_optimal: list[float]
    frac_of_initial: list[float]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    traces: list[ErrorTrace]
    mean_curves: dict[str, dict[str, list[float]]]
    evoi_selection_seconds: list[float]


def build_priors(model: GaiModel, kind: str, rng: np.random.Generator, variance: float = 0.3):
    """Prior mixtures for every free parameter.  ``random5`` uses random
    breakpoints with symmetric Dirichlet weights; ``gaussian10`` fits ten
    uniform components to a truncated Gaussian whose mean is drawn uniformly
    per parameter."""
    from .belief import UniformMixture
    from .elicitation import free_configs

    out = {}
    for f in model.factors:
        for idx in free_configs(model, f.id):
            if kind == "uniform":
                mix = UniformMixture.uniform()
            elif kind == "random5":
                mix = UniformMixture.random_mixture(rng, 5)
            elif kind == "gaussian10":
                mix = UniformMixture.fit_truncated_gaussian(
                    float(rng.uniform(0.0, 1.0)), variance, 10
                )
            else:
                raise ValueError(f"unknown prior kind {kind!r}")
            out[(f.id, idx)] = mix
    return out


def sample_true_utility(model: GaiModel, priors, rng: np.random.Generator):
    """Ground truth for one trial: free local values drawn from their priors,
    anchor utilities drawn uniformly around a default-outcome utility so that
    every pinned default value stays inside [0, 1].  Anchors that coincide
    with the default pattern inherit the default utility exactly."""
    from .elicitation import pin_value, pinned_configs
    from .model import AnchorUtilities

    u0 = float(rng.uniform(0.2, 0.8))
    top: dict[int, float] = {}
    bottom: dict[int, float] = {}
    for f in model.factors:
        pins = pinned_configs(model, f.id)
        default_idx = model.encode_config(f.id, model.default_config(f.id))
        top[f.id] = u0 if pins.get(default_idx) == "top" else float(rng.uniform(u0, 1.0))
        bottom[f.id] = u0 if pins.get(default_idx) == "bottom" else float(rng.uniform(0.0, u0))
    anchors = AnchorUtilities(top=top, bottom=bottom, default_utility=u0)

    tables: dict[int, np.ndarray] = {}
    for f in model.factors:
        vec = np.empty(model.config_count(f.id))
        for idx, kind in pinned_configs(model, f.id).items():
            vec[idx] = pin_value(kind, anchors, f.id)
        for (fid, idx), mix in priors.items():
            if fid == f.id:
                vec[idx] = mix.sample(rng)
        tables[f.id] = vec
    return tables, anchors


def simulate_response(truth_tables, query) -> str:
    """Noise-free simulated user: yes iff the true value reaches the
    threshold (weak inequality)."""
    v = float(truth_tables[query.factor][query.config_index])
    return "yes" if v >= query.threshold else "no"


def random_strategy(model: GaiModel, beliefs, rng: np.random.Generator):
    """Uniformly random free parameter; the threshold is its current belief
    mean, so either answer is roughly equally likely."""
    from .evoi import ComparisonQuery

    keys = sorted(beliefs.mixtures.keys())
    fid, idx = keys[int(rng.integers(0, len(keys)))]
    return ComparisonQuery(
        factor=fid,
        config_index=idx,
        config=model.decode_config(fid, idx),
        threshold=beliefs.get(fid, idx).mean,
    )


def evoi_strategy(model: GaiModel, beliefs, context, rng: np.random.Generator, n_workers: int = 0):
    """Best myopic query; falls back to the random strategy once nothing is
    informative."""
    from .evoi import best_local_query

    best = best_local_query(context, n_workers=n_workers)
    if best is None:
        return random_strategy(model, beliefs, rng)
    return best.query


def _deterministic_utility_tables(model, compiled, truth_tables, anchors):
    return {
        f.id: anchors.span(f.id) * (compiled.matrices[f.id] @ truth_tables[f.id])
        for f in model.factors
    }


def run_trial(
    model: GaiModel,
    compiled,
    config: ExperimentConfig,
    strategy: str,
    trial: int,
    selection_seconds: list[float] | None = None,
) -> ErrorTrace:
    import time

    from .belief import ParameterBelief, UniformMixture
    from .evoi import EvoiContext
    from .inference import expected_tables, max_expected_outcome

    strategy_code = {"evoi": 1, "random": 2, "direct": 3}[strategy]
    rng = np.random.default_rng([config.seed, strategy_code, trial])
    priors = build_priors(model, config.prior, rng, config.gaussian_variance)
    truth_tables, anchors = sample_true_utility(model, priors, rng)
    true_factor_utils = _deterministic_utility_tables(model, compiled, truth_tables, anchors)
    x_opt, u_opt = max_expected_outcome(model, true_factor_utils)

    def true_value(outcome):
        return sum(
            float(true_factor_utils[f.id][model.encode_config(f.id, model.restrict(outcome, f.id))])
            for f in model.factors
        )

    beliefs = ParameterBelief(mixtures=dict(priors))
    direct_queue = sorted(priors.keys())
    values: list[float] = []

    for step in range(config.budget + 1):
        if step > 0:
            if strategy == "evoi":
                t0 = time.perf_counter()
                ctx = EvoiContext(model, compiled, beliefs, anchors)
                query = evoi_strategy(model, beliefs, ctx, rng, config.evoi_workers)
                if selection_seconds is not None:
                    selection_seconds.append(time.perf_counter() - t0)
                beliefs = beliefs.updated(
                    query.factor,
                    query.config_index,
                    query.threshold,
                    simulate_response(truth_tables, query),
                )
            elif strategy == "random":
                query = random_strategy(model, beliefs, rng)
                beliefs = beliefs.updated(
                    query.factor,
                    query.config_index,
                    query.threshold,
                    simulate_response(truth_tables, query),
                )
            elif strategy == "direct":
                # test stub: reveal one true parameter per query
                if direct_queue:
                    fid, idx = direct_queue.pop(0)
                    v = float(truth_tables[fid][idx])
                    lo = min(max(v - 5e-13, 0.0), 1.0 - 1e-12)
                    mixtures = dict(beliefs.mixtures)
                    mixtures[(fid, idx)] = UniformMixture.from_components(
                        [(lo, min(v + 5e-13, 1.0), 1.0)]
                    )
                    beliefs = ParameterBelief(mixtures=mixtures)
            else:
                raise ValueError(f"unknown strategy {strategy!r}")
        exp = expected_tables(model, compiled, beliefs, anchors)
        recommendation, _ = max_expected_outcome(model, exp)
        values.append(true_value(recommendation))

    errors = [max(0.0, u_opt - v) for v in values]
    initial = errors[0]
    frac_opt = [e / max(abs(u_opt), 1e-12) for e in errors]
    frac_init = [e / initial if initial > 0 else 0.0 for e in errors]
    return ErrorTrace(
        strategy=strategy,
        trial=trial,
        optimum=u_opt,
        true_values=values,
        errors=errors,
        frac_of_optimal=frac_opt,
        frac_of_initial=frac_init,
    )


def load_experiment_model(config: ExperimentConfig) -> GaiModel:
    if (config.synthetic is None) == (config.model_file is None):
        raise ValueError("configure exactly one of synthetic params or a model file")
    if config.synthetic is not None:
        return generate_synthetic_model(config.synthetic, config.seed)
    from .problemfile import load_problem

    return load_problem(config.model_file).model


def run_experiment(config: ExperimentConfig, model: GaiModel | None = None) -> ExperimentResult:
    """Full protocol: per strategy, sample a fresh truth per trial, run the
    query loop for the budget, and record both error metrics after every
    query.  Deterministic under (config, seed)."""
    from .model import CompiledPlan

    if model is None:
        model = load_experiment_model(config)
    compiled = CompiledPlan(model)
    traces: list[ErrorTrace] = []
    selection_seconds: list[float] = []
    for strategy in config.strategies:
        trials = config.trials_evoi if strategy == "evoi" else config.trials_random
        for trial in range(trials):
            traces.append(
                run_trial(
                    model,
                    compiled,
                    config,
                    strategy,
                    trial,
                    selection_seconds if strategy == "evoi" else None,
                )
            )
    mean_curves: dict[str, dict[str, list[float]]] = {}
    for strategy in config.strategies:
        group = [t for t in traces if t.strategy == strategy]
        if not group:
            continue
        mean_error = [
            float(np.mean([t.errors[i] for t in group])) for i in range(config.budget + 1)
        ]
        # trials that start with zero error carry no error-reduction signal;
        # they are excluded from the per-trial ratio curve
        positive = [t for t in group if t.errors[0] > 0] or group
        mean_curves[strategy] = {
            "mean_error": mean_error,
            "mean_frac_of_optimal": [
                float(np.mean([t.frac_of_optimal[i] for t in group]))
                for i in range(config.budget + 1)
            ],
            "mean_frac_of_initial": [
                float(np.mean([t.frac_of_initial[i] for t in positive]))
                for i in range(config.budget + 1)
            ],
            # mean error normalized by mean initial error: the robust form of
            # "error as a fraction of the initial error" for aggregate curves
            "normalized_mean_error": [
                e / mean_error[0] if mean_error[0] > 0 else 0.0 for e in mean_error
            ],
        }
    return ExperimentResult(
        config=config,
        traces=traces,
        mean_curves=mean_curves,
        evoi_selection_seconds=selection_seconds,
    )


def write_results(result: ExperimentResult, out_dir) -> list[str]:
    """results.csv has one row per (strategy, trial, query index); summary.csv
    carries the per-strategy mean curves.  Output is byte-stable for a fixed
    config and seed (no timestamps, shortest-repr floats)."""
    import csv
    import os

    os.makedirs(out_dir, exist_ok=True)
    results_path = os.path.join(out_dir, "results.csv")
    with open(results_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "strategy",
                "trial",
                "query_index",
                "true_value",
                "optimum",
                "error",
                "frac_of_optimal",
                "frac_of_initial",
            ]
        )
        for t in sorted(result.traces, key=lambda t: (t.strategy, t.trial)):
            for i, v in enumerate(t.true_values):
                w.writerow(
                    [
                        t.strategy,
                        t.trial,
                        i,
                        repr(v),
                        repr(t.optimum),
                        repr(t.errors[i]),
                        repr(t.frac_of_optimal[i]),
                        repr(t.frac_of_initial[i]),
                    ]
                )
    summary_path = os.path.join(out_dir, "summary.csv")
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "strategy",
                "query_index",
                "mean_error",
                "mean_frac_of_optimal",
                "mean_frac_of_initial",
                "normalized_mean_error",
            ]
        )
        for strategy in sorted(result.mean_curves):
            curves = result.mean_curves[strategy]
            for i in range(len(curves["mean_error"])):
                w.writerow(
                    [
                        strategy,
                        i,
                        repr(curves["mean_error"][i]),
                        repr(curves["mean_frac_of_optimal"][i]),
                        repr(curves["mean_frac_of_initial"][i]),
                        repr(curves["normalized_mean_error"][i]),
                    ]
                )
    return [results_path, summary_path]
