"""Factored (GAI) utility models.

A model is a set of attributes with finite domains, a collection of possibly
overlapping factor scopes, a default outcome, per-factor top/bottom anchor
configurations, and hard feasibility constraints.  Utility decomposes as a sum
of local contributions over the factor scopes; the canonical plan computed
here rewrites each factor's contribution as a signed combination of local
values at projected configurations, so a full utility function can be
assembled from locally elicited values plus anchor utilities.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Sequence

import numpy as np

Outcome = tuple[int, ...]       # one value index per attribute
ConfigValues = tuple[int, ...]  # one value index per attribute of a factor scope


class ModelError(ValueError):
    """Raised for structurally invalid models or out-of-contract arguments."""


@dataclass(frozen=True)
class AttributeSpec:
    """A named attribute with an ordered finite domain of value labels."""

    id: int
    name: str
    domain: tuple[str, ...]

    def __post_init__(self):
        if len(self.domain) < 2:
            raise ModelError(f"attribute {self.name!r}: domain must have at least 2 values")
        if len(set(self.domain)) != len(self.domain):
            raise ModelError(f"attribute {self.name!r}: duplicate value labels")


@dataclass(frozen=True)
class FactorScope:
    """An index set of attributes forming one subutility factor.

    Factor ids are 1-based; attribute ids are 0-based.  The attribute order
    inside ``attrs`` fixes the mixed-radix encoding of local configurations.
    """

    id: int
    attrs: tuple[int, ...]

    def __post_init__(self):
        if not self.attrs:
            raise ModelError(f"factor {self.id}: empty scope")
        if len(set(self.attrs)) != len(self.attrs):
            raise ModelError(f"factor {self.id}: repeated attribute in scope")


@dataclass(frozen=True)
class Constraint:
    """Forbidden partial assignments: any outcome matching a forbidden tuple
    on ``scope`` is infeasible."""

    scope: tuple[int, ...]
    forbidden: frozenset[ConfigValues]


@dataclass(eq=False)
class GaiModel:
    """Immutable-after-construction model; safe for shared read access."""

    attributes: list[AttributeSpec]
    factors: list[FactorScope]
    default_outcome: Outcome
    anchors: dict[int, tuple[ConfigValues, ConfigValues]]  # factor id -> (top, bottom)
    constraints: list[Constraint] = field(default_factory=list)
    name: str = "model"

    @cached_property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @cached_property
    def domain_sizes(self) -> tuple[int, ...]:
        return tuple(len(a.domain) for a in self.attributes)

    @cached_property
    def factor_ids(self) -> tuple[int, ...]:
        return tuple(f.id for f in self.factors)

    @cached_property
    def _factor_map(self) -> dict[int, FactorScope]:
        return {f.id: f for f in self.factors}

    def factor(self, factor_id: int) -> FactorScope:
        return self._factor_map[factor_id]

    def scope(self, factor_id: int) -> tuple[int, ...]:
        return self._factor_map[factor_id].attrs

    @cached_property
    def _strides(self) -> dict[int, tuple[int, ...]]:
        out = {}
        for f in self.factors:
            sizes = [self.domain_sizes[a] for a in f.attrs]
            strides = []
            acc = 1
            for s in reversed(sizes):
                strides.append(acc)
                acc *= s
            out[f.id] = tuple(reversed(strides))
        return out

    def config_count(self, factor_id: int) -> int:
        return int(np.prod([self.domain_sizes[a] for a in self.scope(factor_id)]))

    def encode_config(self, factor_id: int, values: ConfigValues) -> int:
        strides = self._strides[factor_id]
        return sum(v * s for v, s in zip(values, strides))

    def decode_config(self, factor_id: int, index: int) -> ConfigValues:
        out = []
        for a, s in zip(self.scope(factor_id), self._strides[factor_id]):
            out.append((index // s) % self.domain_sizes[a])
        return tuple(out)

    def local_configs(self, factor_id: int) -> Iterator[ConfigValues]:
        ranges = [range(self.domain_sizes[a]) for a in self.scope(factor_id)]
        return itertools.product(*ranges)

    def restrict(self, outcome: Outcome, factor_id: int) -> ConfigValues:
        """Values of ``outcome`` on the factor's scope, in scope order."""
        return tuple(outcome[a] for a in self.scope(factor_id))

    def default_config(self, factor_id: int) -> ConfigValues:
        return self.restrict(self.default_outcome, factor_id)

    def key_outcome(self, factor_id: int, values: ConfigValues) -> Outcome:
        """Full outcome with the factor set to ``values`` and everything else
        at the default level."""
        out = list(self.default_outcome)
        for a, v in zip(self.scope(factor_id), values):
            out[a] = v
        return tuple(out)

    def outcome_is_feasible(self, outcome: Outcome) -> bool:
        for c in self.constraints:
            if tuple(outcome[a] for a in c.scope) in c.forbidden:
                return False
        return True

    def all_outcomes(self) -> Iterator[Outcome]:
        return itertools.product(*(range(s) for s in self.domain_sizes))

    # label <-> index helpers for the IO boundary
    @cached_property
    def attribute_index(self) -> dict[str, int]:
        return {a.name: a.id for a in self.attributes}

    def value_index(self, attr: int, label: str) -> int:
        try:
            return self.attributes[attr].domain.index(label)
        except ValueError:
            raise ModelError(
                f"value {label!r} not in domain of attribute {self.attributes[attr].name!r}"
            ) from None

    def outcome_labels(self, outcome: Outcome) -> dict[str, str]:
        return {a.name: a.domain[v] for a, v in zip(self.attributes, outcome)}

    def config_labels(self, factor_id: int, values: ConfigValues) -> dict[str, str]:
        return {
            self.attributes[a].name: self.attributes[a].domain[v]
            for a, v in zip(self.scope(factor_id), values)
        }


@dataclass(frozen=True)
class AnchorUtilities:
    """Global-scale utilities of the per-factor anchor key outcomes plus the
    default outcome.  ``top``/``bottom`` map factor id to utility."""

    top: Mapping[int, float]
    bottom: Mapping[int, float]
    default_utility: float

    def span(self, factor_id: int) -> float:
        return self.top[factor_id] - self.bottom[factor_id]

    def pinned_default_value(self, factor_id: int) -> float:
        """Local value of the factor's all-default configuration.

        Defined as (u(default outcome) - u_bottom) / (u_top - u_bottom);
        0.0 when the factor span is zero (the factor then contributes
        nothing, so the value never matters).
        """
        s = self.span(factor_id)
        if s == 0.0:
            return 0.0
        return (self.default_utility - self.bottom[factor_id]) / s


@dataclass(frozen=True)
class GaiGraph:
    """Directed graph over factors: edge i -> j whenever i > j and the scopes
    intersect, labeled by the intersection."""

    nodes: tuple[int, ...]
    scopes: dict[int, frozenset[int]]
    edges: dict[tuple[int, int], frozenset[int]]

    def successors(self, node: int) -> list[int]:
        return sorted(j for (i, j) in self.edges if i == node)


@dataclass(frozen=True)
class CanonicalPlan:
    """Per factor, the projection sets with aggregated integer coefficients.

    ``terms[j]`` maps each projection set J (a subset of factor j's scope) to
    the sum of per-path signs that produced it; zero-sum sets are dropped.
    """

    terms: dict[int, dict[frozenset[int], int]]

    def factor_terms(self, factor_id: int) -> dict[frozenset[int], int]:
        return self.terms[factor_id]


def validate_model(model: GaiModel) -> list[str]:
    """Structural validation; returns a list of violation messages (empty
    means valid)."""
    problems: list[str] = []
    n = model.n_attributes
    for pos, a in enumerate(model.attributes):
        if a.id != pos:
            problems.append(f"attribute at position {pos} has id {a.id}; ids must be 0..n-1 in order")
    if len(model.default_outcome) != n:
        problems.append("default outcome length does not match attribute count")
    else:
        for a, v in enumerate(model.default_outcome):
            if not 0 <= v < model.domain_sizes[a]:
                problems.append(f"default outcome value out of range for attribute {a}")
    covered = set()
    seen_scopes = set()
    for f in model.factors:
        for a in f.attrs:
            if not 0 <= a < n:
                problems.append(f"factor {f.id}: attribute index {a} out of range")
        covered.update(f.attrs)
        key = frozenset(f.attrs)
        if key in seen_scopes:
            problems.append(f"factor {f.id}: duplicate factor scope")
        seen_scopes.add(key)
    missing = set(range(n)) - covered
    for a in sorted(missing):
        problems.append(f"attribute {a} ({model.attributes[a].name}) uncovered by any factor")
    if sorted(f.id for f in model.factors) != list(range(1, len(model.factors) + 1)):
        problems.append("factor ids must be 1..m in order")
    for f in model.factors:
        anc = model.anchors.get(f.id)
        if anc is None:
            problems.append(f"factor {f.id}: missing anchors")
            continue
        top, bottom = anc
        if len(top) != len(f.attrs) or len(bottom) != len(f.attrs):
            problems.append(f"factor {f.id}: anchor length does not match scope")
            continue
        for a, v in zip(f.attrs, top + bottom):
            if not 0 <= v < model.domain_sizes[a]:
                problems.append(f"factor {f.id}: anchor value out of range for attribute {a}")
        if top == bottom:
            problems.append(f"factor {f.id}: top and bottom anchors are identical")
    for i, c in enumerate(model.constraints):
        for a in c.scope:
            if not 0 <= a < n:
                problems.append(f"constraint {i}: attribute index {a} out of range")
        for t in c.forbidden:
            if len(t) != len(c.scope):
                problems.append(f"constraint {i}: forbidden tuple arity mismatch")
    if not problems and not model.outcome_is_feasible(model.default_outcome):
        problems.append("default outcome is infeasible under the constraints")
    return problems


def build_gai_graph(factors: Sequence[FactorScope]) -> GaiGraph:
    """Edges (i -> j) for i > j with intersecting scopes, labeled by the
    intersection."""
    edges: dict[tuple[int, int], frozenset[int]] = {}
    for fi in factors:
        for fj in factors:
            if fi.id > fj.id:
                inter = frozenset(fi.attrs) & frozenset(fj.attrs)
                if inter:
                    edges[(fi.id, fj.id)] = inter
    return GaiGraph(
        nodes=tuple(f.id for f in factors),
        scopes={f.id: frozenset(f.attrs) for f in factors},
        edges=edges,
    )


def compute_canonical_plan(graph: GaiGraph) -> CanonicalPlan:
    """Enumerate, per factor j, every directed path out of node j whose
    running scope intersection stays nonempty; a path at depth d contributes
    (-1)^d to the coefficient of its running intersection.  Coefficients of
    identical sets are summed and zero sums dropped.

    Pruning on the running intersection (not the pairwise one) is what makes
    the enumeration equal the direct inclusion-exclusion expansion: once a
    prefix intersection is empty, every extension of it is empty too.
    """
    out: dict[int, dict[frozenset[int], int]] = {}
    for j in graph.nodes:
        terms: dict[frozenset[int], int] = {}
        # depth-first over descending factor ids; paths never revisit a node
        # because edges only point to strictly smaller ids
        stack = [(j, graph.scopes[j], 0)]
        while stack:
            node, running, depth = stack.pop()
            sign = 1 if depth % 2 == 0 else -1
            terms[running] = terms.get(running, 0) + sign
            for nxt in graph.successors(node):
                extended = running & graph.scopes[nxt]
                if extended:
                    stack.append((nxt, extended, depth + 1))
        out[j] = {s: c for s, c in terms.items() if c != 0}
    return CanonicalPlan(terms=out)


def project_outcome(model: GaiModel, outcome: Outcome, keep: frozenset[int] | set[int]) -> Outcome:
    """Outcome with attributes in ``keep`` unchanged and the rest defaulted."""
    extra = set(keep) - set(range(model.n_attributes))
    if extra:
        raise ModelError(f"projection set {sorted(extra)} outside outcome scope")
    return tuple(
        v if a in keep else model.default_outcome[a] for a, v in enumerate(outcome)
    )


def project_config(
    model: GaiModel, factor_id: int, values: ConfigValues, keep: frozenset[int] | set[int]
) -> ConfigValues:
    """Local configuration with attributes in ``keep`` unchanged and the
    remaining scope attributes defaulted."""
    scope = model.scope(factor_id)
    extra = set(keep) - set(scope)
    if extra:
        raise ModelError(f"projection set {sorted(extra)} outside factor {factor_id} scope")
    return tuple(
        v if a in keep else model.default_outcome[a] for a, v in zip(scope, values)
    )


def signed_projection_matrix(model: GaiModel, plan: CanonicalPlan, factor_id: int) -> np.ndarray:
    """Integer matrix S with S[x, y] = summed sign of every plan term that
    projects configuration x onto configuration y.

    Applying S to a vector of local values (indexed by configuration) yields
    the plan-combined value of every configuration in one product; columns
    give, for each queried configuration, the affected configurations and
    their signed multiplicities.
    """
    n = model.config_count(factor_id)
    s = np.zeros((n, n), dtype=np.int64)
    rows = np.arange(n)
    for keep, coeff in plan.factor_terms(factor_id).items():
        proj = np.fromiter(
            (
                model.encode_config(
                    factor_id, project_config(model, factor_id, model.decode_config(factor_id, x), keep)
                )
                for x in range(n)
            ),
            dtype=np.int64,
            count=n,
        )
        np.add.at(s, (rows, proj), coeff)
    return s


class CompiledPlan:
    """A canonical plan with the per-factor signed projection matrices
    precomputed for one model; build once per model and share."""

    def __init__(self, model: GaiModel, plan: CanonicalPlan | None = None):
        self.model = model
        self.plan = plan if plan is not None else compute_canonical_plan(
            build_gai_graph(model.factors)
        )
        self.matrices = {
            f.id: signed_projection_matrix(model, self.plan, f.id) for f in model.factors
        }

    def factor_terms(self, factor_id: int):
        return self.plan.factor_terms(factor_id)


def vbar(
    model: GaiModel,
    plan: CanonicalPlan,
    factor_id: int,
    values: ConfigValues,
    table: np.ndarray,
) -> float:
    """Plan-combined local value of one configuration: the signed sum of the
    factor's local values at the plan's projections of ``values``."""
    total = 0.0
    for keep, coeff in plan.factor_terms(factor_id).items():
        idx = model.encode_config(factor_id, project_config(model, factor_id, values, keep))
        total += coeff * float(table[idx])
    return total


def evaluate_utility(
    model: GaiModel,
    plan: CanonicalPlan,
    tables: Mapping[int, np.ndarray],
    anchors: AnchorUtilities,
    outcome: Outcome,
) -> float:
    """Assembled utility: sum over factors of span * plan-combined local
    value of the outcome's restriction.  Strategically equivalent to the
    underlying utility (equal up to one additive constant)."""
    total = 0.0
    for f in model.factors:
        span = anchors.span(f.id)
        if span == 0.0:
            continue
        total += span * vbar(model, plan, f.id, model.restrict(outcome, f.id), tables[f.id])
    return total


def key_outcome_expansion(model: GaiModel, outcome: Outcome) -> list[tuple[int, Outcome]]:
    """Signed multiset of key outcomes whose utilities sum to the utility of
    ``outcome`` whenever the factored decomposition holds.

    Every nonempty combination of factors contributes the outcome projected
    onto the combination's scope intersection, with sign +1 for odd-sized and
    -1 for even-sized combinations.  Reference oracle for tests; exponential
    in the factor count."""
    m = len(model.factors)
    scopes = [frozenset(f.attrs) for f in model.factors]
    terms: list[tuple[int, Outcome]] = []
    for k in range(1, m + 1):
        sign = 1 if k % 2 == 1 else -1
        for combo in itertools.combinations(range(m), k):
            inter = scopes[combo[0]]
            for i in combo[1:]:
                inter = inter & scopes[i]
            terms.append((sign, project_outcome(model, outcome, inter)))
    return terms

