"""Shared fixtures and independent oracles used across the test suite.

The oracles here deliberately avoid the library's own code paths: plans are
checked against direct inclusion-exclusion enumeration, maximization against
exhaustive search, and belief moments against per-interval quadrature.
"""

from __future__ import annotations

import itertools

import numpy as np

from gaielicit.model import (
    AnchorUtilities,
    AttributeSpec,
    Constraint,
    FactorScope,
    GaiModel,
)


def fig1_model() -> GaiModel:
    """Seven binary attributes, five factors, no constraints.

    Scopes (0-based): {0,1,2,5}, {0,1,6}, {1,3}, {3,4}, {4,5}.
    """
    attrs = [AttributeSpec(i, f"x{i + 1}", ("lo", "hi")) for i in range(7)]
    factors = [
        FactorScope(1, (0, 1, 2, 5)),
        FactorScope(2, (0, 1, 6)),
        FactorScope(3, (1, 3)),
        FactorScope(4, (3, 4)),
        FactorScope(5, (4, 5)),
    ]
    anchors = {f.id: (tuple(1 for _ in f.attrs), tuple(0 for _ in f.attrs)) for f in factors}
    return GaiModel(
        attributes=attrs,
        factors=factors,
        default_outcome=(0,) * 7,
        anchors=anchors,
        name="fig1",
    )


def brute_force_plan(factors) -> dict[int, dict[frozenset[int], int]]:
    """Direct enumeration oracle: for factor j, every combination of factors
    with smaller ids contributes (-1)^k to the coefficient of the combined
    scope intersection; empty intersections and zero sums are dropped."""
    scopes = {f.id: frozenset(f.attrs) for f in factors}
    out: dict[int, dict[frozenset[int], int]] = {}
    for f in factors:
        terms: dict[frozenset[int], int] = {scopes[f.id]: 1}
        smaller = sorted(i for i in scopes if i < f.id)
        for k in range(1, len(smaller) + 1):
            for combo in itertools.combinations(smaller, k):
                inter = scopes[f.id]
                for i in combo:
                    inter = inter & scopes[i]
                if inter:
                    sign = -1 if k % 2 == 1 else 1
                    terms[inter] = terms.get(inter, 0) + sign
        out[f.id] = {s: c for s, c in terms.items() if c != 0}
    return out


def random_factors(rng: np.random.Generator, n_attrs: int, n_factors: int, max_scope: int):
    """Random overlapping scopes covering all attributes, distinct scopes."""
    while True:
        attrs = list(rng.permutation(n_attrs))
        buckets = [[] for _ in range(n_factors)]
        for i, a in enumerate(attrs):
            buckets[i % n_factors].append(int(a))
        factors = []
        seen = set()
        ok = True
        for i, base in enumerate(buckets):
            lo = max(1, len(base))
            if lo > max_scope:
                raise ValueError("n_factors * max_scope too small to cover the attributes")
            want = int(rng.integers(lo, max_scope + 1))
            extra = [int(a) for a in rng.permutation(n_attrs) if a not in base][: max(0, want - len(base))]
            scope = tuple(sorted(base + extra))
            if not scope or frozenset(scope) in seen:
                ok = False
                break
            seen.add(frozenset(scope))
            factors.append(FactorScope(i + 1, scope))
        if ok:
            return factors


def random_model(
    rng: np.random.Generator,
    n_attrs: int = 5,
    n_factors: int = 3,
    max_scope: int = 3,
    max_domain: int = 3,
    n_constraints: int = 0,
) -> GaiModel:
    sizes = [int(rng.integers(2, max_domain + 1)) for _ in range(n_attrs)]
    attrs = [
        AttributeSpec(i, f"a{i}", tuple(f"v{k}" for k in range(sizes[i]))) for i in range(n_attrs)
    ]
    factors = random_factors(rng, n_attrs, n_factors, max_scope)
    default = tuple(int(rng.integers(0, s)) for s in sizes)
    anchors = {}
    for f in factors:
        while True:
            top = tuple(int(rng.integers(0, sizes[a])) for a in f.attrs)
            bottom = tuple(int(rng.integers(0, sizes[a])) for a in f.attrs)
            if top != bottom:
                break
        anchors[f.id] = (top, bottom)
    constraints = []
    for _ in range(n_constraints):
        scope_size = int(rng.integers(1, min(3, n_attrs) + 1))
        scope = tuple(sorted(int(a) for a in rng.choice(n_attrs, size=scope_size, replace=False)))
        while True:
            forbidden = tuple(int(rng.integers(0, sizes[a])) for a in scope)
            # never cut off the default outcome
            if forbidden != tuple(default[a] for a in scope):
                break
        constraints.append(Constraint(scope=scope, forbidden=frozenset({forbidden})))
    return GaiModel(
        attributes=attrs,
        factors=factors,
        default_outcome=default,
        anchors=anchors,
        constraints=constraints,
        name="random",
    )


def random_true_utility(rng: np.random.Generator, model: GaiModel) -> dict[int, np.ndarray]:
    """A ground-truth factored utility: one random table per factor scope.
    The total utility of an outcome is the sum of table lookups."""
    return {
        f.id: rng.uniform(0.0, 1.0, size=model.config_count(f.id)) for f in model.factors
    }


def true_utility_fn(model: GaiModel, tables: dict[int, np.ndarray]):
    def u(outcome):
        return float(
            sum(
                tables[f.id][model.encode_config(f.id, model.restrict(outcome, f.id))]
                for f in model.factors
            )
        )

    return u


def conditional_anchor_configs(model: GaiModel, utility) -> dict[int, tuple[tuple, tuple]]:
    """Best/worst local configuration per factor, judged by the utility of
    the configuration's key outcome (everything else at defaults)."""
    out = {}
    for f in model.factors:
        configs = list(model.local_configs(f.id))
        vals = [utility(model.key_outcome(f.id, c)) for c in configs]
        top = configs[int(np.argmax(vals))]
        bottom = configs[int(np.argmin(vals))]
        out[f.id] = (top, bottom)
    return out


def derived_local_values(model: GaiModel, utility) -> tuple[dict[int, np.ndarray], AnchorUtilities]:
    """Local value tables and anchor utilities implied by a utility function:
    v_j(c) is the utility of c's key outcome rescaled so the factor's top
    anchor maps to 1 and bottom to 0."""
    tops, bottoms = {}, {}
    tables = {}
    for f in model.factors:
        top_cfg, bottom_cfg = model.anchors[f.id]
        u_top = utility(model.key_outcome(f.id, top_cfg))
        u_bottom = utility(model.key_outcome(f.id, bottom_cfg))
        tops[f.id] = u_top
        bottoms[f.id] = u_bottom
        span = u_top - u_bottom
        vals = np.empty(model.config_count(f.id))
        for c in model.local_configs(f.id):
            key = utility(model.key_outcome(f.id, c))
            vals[model.encode_config(f.id, c)] = 0.0 if span == 0 else (key - u_bottom) / span
        tables[f.id] = vals
    anchors = AnchorUtilities(
        top=tops, bottom=bottoms, default_utility=utility(model.default_outcome)
    )
    return tables, anchors


def exhaustive_argmax(model: GaiModel, utility, feasible_only: bool = True):
    """Lexicographically smallest maximizer and its value, by enumeration."""
    best = None
    best_val = -np.inf
    for x in model.all_outcomes():
        if feasible_only and not model.outcome_is_feasible(x):
            continue
        v = utility(x)
        if v > best_val:
            best, best_val = x, v
    if best is None:
        raise ValueError("no feasible outcome")
    return best, best_val


def with_conditional_anchors(model: GaiModel, utility) -> GaiModel:
    """Copy of the model whose anchors are the conditional best/worst local
    configurations under the given utility."""
    return GaiModel(
        attributes=model.attributes,
        factors=model.factors,
        default_outcome=model.default_outcome,
        anchors=conditional_anchor_configs(model, utility),
        constraints=model.constraints,
        name=model.name,
    )


def exact_oracle(model: GaiModel, utility):
    """Simulated answer source: local answers are the true indifference
    probabilities, global answers the true utilities on the scale anchored
    at the default outcome."""
    u0 = utility(model.default_outcome)

    def answer(query):
        if query.factor is None:
            return utility(tuple(query.target)) - u0
        fid = query.factor
        top_cfg, bottom_cfg = model.anchors[fid]
        u_top = utility(model.key_outcome(fid, top_cfg))
        u_bottom = utility(model.key_outcome(fid, bottom_cfg))
        key = utility(model.key_outcome(fid, query.target))
        return (key - u_bottom) / (u_top - u_bottom)

    return answer


def full_value_array(model: GaiModel, factor_values, exclude_factor: int | None = None):
    """Dense array of total values over every outcome (axes = attributes),
    with -inf at infeasible cells.  Independent maximization oracle: no
    elimination, just materialized broadcasting in factor order."""
    shape = tuple(model.domain_sizes)
    n = model.n_attributes
    total = np.zeros(shape)

    def expand(values, scope):
        arranged = np.asarray(values).reshape([model.domain_sizes[a] for a in scope])
        perm = sorted(range(len(scope)), key=lambda i: scope[i])
        arranged = arranged.transpose(perm)
        idx = [None] * n
        for a in sorted(scope):
            idx[a] = slice(None)
        return arranged[tuple(idx[a] if idx[a] is not None else np.newaxis for a in range(n))]

    for f in model.factors:
        if exclude_factor is not None and f.id == exclude_factor:
            continue
        total = total + expand(factor_values[f.id], f.attrs)
    for c in model.constraints:
        mask = np.zeros([model.domain_sizes[a] for a in c.scope])
        for t in c.forbidden:
            mask[t] = -np.inf
        total = total + expand(mask.reshape(-1), c.scope)
    return total


def exhaustive_max_outcome(model: GaiModel, factor_values):
    """Lexicographically smallest maximizer over the dense value array."""
    total = full_value_array(model, factor_values)
    flat = int(np.argmax(total))
    best = np.unravel_index(flat, total.shape)
    value = float(total[best])
    if value == -np.inf:
        raise ValueError("no feasible outcome")
    return tuple(int(v) for v in best), value


def exhaustive_restricted_table(model: GaiModel, factor_values, factor_id: int):
    """Per-configuration restricted maxima by dense enumeration."""
    total = full_value_array(model, factor_values, exclude_factor=factor_id)
    scope = model.scope(factor_id)
    other_axes = tuple(a for a in range(model.n_attributes) if a not in scope)
    if other_axes:
        reduced = total.max(axis=other_axes)
    else:
        reduced = total
    # reduced axes follow ascending attribute order; rearrange to scope order
    ascending = tuple(sorted(scope))
    perm = [ascending.index(a) for a in scope]
    return reduced.transpose(perm).reshape(-1)
