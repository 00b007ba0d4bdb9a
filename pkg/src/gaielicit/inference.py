"""Max-sum variable elimination over factor tables with hard constraints.

Expected utilities live in per-factor tables (a vector over the factor's
configurations); constraints are 0/-inf tables over their scopes, so
infeasibility is the absorbing bottom element of the max-sum semiring and
both kinds of table flow through one elimination engine.

Tie-breaking contract: maximizers are reported as the lexicographically
smallest outcome in attribute-index order.  The fast path detects whether
any argmax step was ambiguous and only then pays for the exact
lexicographic sweep, so generic instances never take the slow path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import GaiModel, Outcome

TIE_RTOL = 1e-12


class InfeasibleError(ValueError):
    """No outcome satisfies the constraints (possibly after conditioning)."""


@dataclass
class Table:
    scope: tuple[int, ...]
    values: np.ndarray


def factor_table(model: GaiModel, factor_id: int, config_values: np.ndarray) -> Table:
    scope = model.scope(factor_id)
    shape = tuple(model.domain_sizes[a] for a in scope)
    return Table(scope=scope, values=np.asarray(config_values, dtype=float).reshape(shape))


def constraint_tables(model: GaiModel) -> list[Table]:
    out = []
    for c in model.constraints:
        shape = tuple(model.domain_sizes[a] for a in c.scope)
        vals = np.zeros(shape)
        for t in c.forbidden:
            vals[t] = -np.inf
        out.append(Table(scope=c.scope, values=vals))
    return out


def elimination_order(
    scopes: Sequence[Sequence[int]], n_attrs: int, keep: frozenset[int] | set[int] = frozenset()
) -> list[int]:
    """Greedy min-degree ordering on the union graph of the scopes, with
    fill-in; ties go to the lowest attribute index.  ``keep`` attributes are
    never eliminated but still count toward degrees."""
    adj: dict[int, set[int]] = {a: set() for a in range(n_attrs)}
    for scope in scopes:
        for a in scope:
            adj[a].update(b for b in scope if b != a)
    remaining = set(range(n_attrs)) - set(keep)
    order = []
    while remaining:
        a = min(remaining, key=lambda v: (len(adj[v] & (remaining | set(keep))), v))
        order.append(a)
        neighbors = adj[a] & (remaining | set(keep))
        for u in neighbors:
            adj[u].discard(a)
            adj[u].update(v for v in neighbors if v != u)
        remaining.discard(a)
    return order


def _align(values: np.ndarray, scope: tuple[int, ...], target: tuple[int, ...]) -> np.ndarray:
    """View of ``values`` (axes in ``scope`` order) broadcastable against an
    array whose axes follow ``target`` (ascending superset of scope)."""
    perm = sorted(range(len(scope)), key=lambda i: scope[i])
    arranged = values.transpose(perm)
    in_scope = set(scope)
    shape = []
    k = 0
    for a in target:
        if a in in_scope:
            shape.append(arranged.shape[k])
            k += 1
        else:
            shape.append(1)
    return arranged.reshape(shape)


def _combine(tables: list[Table]) -> Table:
    target = tuple(sorted({a for t in tables for a in t.scope}))
    total = _align(tables[0].values, tables[0].scope, target).copy()
    for t in tables[1:]:
        total = total + _align(t.values, t.scope, target)
    return Table(scope=target, values=total)


def eliminate(
    tables: list[Table],
    domain_sizes: Sequence[int],
    order: Sequence[int],
    keep: Sequence[int] = (),
) -> tuple[Table, list[tuple[int, tuple[int, ...], np.ndarray]]]:
    """Eliminate ``order`` attributes by max; returns the combined table over
    ``keep`` (ascending scope, fully broadcast) plus the per-step trace
    needed for argmax backtracking."""
    live = list(tables)
    trace: list[tuple[int, tuple[int, ...], np.ndarray]] = []
    for a in order:
        group = [t for t in live if a in t.scope]
        if not group:
            # unconstrained attribute: contributes nothing, any value works
            trace.append((a, (a,), np.zeros(domain_sizes[a])))
            continue
        live = [t for t in live if a not in t.scope]
        joint = _combine(group)
        axis = joint.scope.index(a)
        trace.append((a, joint.scope, joint.values))
        reduced = joint.values.max(axis=axis)
        new_scope = tuple(s for s in joint.scope if s != a)
        live.append(Table(scope=new_scope, values=reduced))
    keep_scope = tuple(sorted(keep))
    if live:
        final = _combine(live)
    else:
        final = Table(scope=(), values=np.zeros(()))
    # broadcast up to the full keep shape so callers can index every config
    target_shape = tuple(domain_sizes[a] for a in keep_scope)
    values = np.broadcast_to(
        _align(final.values, final.scope, keep_scope), target_shape
    ).copy() if keep_scope else final.values
    return Table(scope=keep_scope, values=values), trace


def _backtrack(
    trace: list[tuple[int, tuple[int, ...], np.ndarray]],
    assignment: dict[int, int],
) -> tuple[dict[int, int], bool]:
    """Assign eliminated attributes in reverse order, taking the first
    maximum at each step; reports whether any step had a tie."""
    tied = False
    for a, scope, joint in reversed(trace):
        idx = tuple(slice(None) if s == a else assignment[s] for s in scope)
        vec = np.asarray(joint[idx], dtype=float)
        m = vec.max()
        if m == -np.inf:
            raise InfeasibleError("conditioned table has no feasible completion")
        if np.count_nonzero(vec == m) > 1:
            tied = True
        assignment[a] = int(np.argmax(vec))
    return assignment, tied


def _condition(tables: list[Table], assignment: dict[int, int]) -> list[Table]:
    out = []
    for t in tables:
        if not any(a in assignment for a in t.scope):
            out.append(t)
            continue
        idx = tuple(assignment[a] if a in assignment else slice(None) for a in t.scope)
        scope = tuple(a for a in t.scope if a not in assignment)
        out.append(Table(scope=scope, values=np.asarray(t.values[idx])))
    return out


def _lex_argmax(tables: list[Table], domain_sizes: Sequence[int]) -> dict[int, int]:
    """Exact lexicographic maximizer: fix attributes in index order to the
    smallest value whose conditional maximum attains the running optimum."""
    assignment: dict[int, int] = {}
    for a in range(len(domain_sizes)):
        cond = _condition(tables, assignment)
        scopes = [t.scope for t in cond]
        order = elimination_order(scopes, len(domain_sizes), keep={a})
        order = [v for v in order if v not in assignment and v != a]
        marg, _ = eliminate(cond, domain_sizes, order, keep=(a,))
        vec = marg.values
        m = vec.max()
        if m == -np.inf:
            raise InfeasibleError("no feasible outcome")
        tol = TIE_RTOL * max(1.0, abs(m))
        assignment[a] = int(np.nonzero(vec >= m - tol)[0][0])
    return assignment


def _direct_value(model: GaiModel, factor_values: Mapping[int, np.ndarray], outcome: Outcome) -> float:
    return float(
        sum(
            np.asarray(factor_values[f.id])[model.encode_config(f.id, model.restrict(outcome, f.id))]
            for f in model.factors
        )
    )


def max_expected_outcome(
    model: GaiModel,
    factor_values: Mapping[int, np.ndarray],
    order_hint: Sequence[int] | None = None,
) -> tuple[Outcome, float]:
    """Feasible outcome maximizing the sum of per-factor values, and that
    sum recomputed directly at the returned outcome.  Ties resolve to the
    lexicographically smallest outcome."""
    tables = [factor_table(model, f.id, factor_values[f.id]) for f in model.factors]
    tables += constraint_tables(model)
    n = model.n_attributes
    if order_hint is not None:
        order = list(order_hint) + [a for a in range(n) if a not in set(order_hint)]
    else:
        order = elimination_order([t.scope for t in tables], n)
    final, trace = eliminate(tables, model.domain_sizes, order)
    if float(final.values) == -np.inf:
        raise InfeasibleError("no feasible outcome under the constraints")
    assignment, tied = _backtrack(trace, {})
    if tied:
        assignment = _lex_argmax(tables, model.domain_sizes)
    outcome = tuple(assignment[a] for a in range(n))
    if not model.outcome_is_feasible(outcome):
        raise InfeasibleError("maximizer violates a constraint")  # defensive; -inf should prevent
    return outcome, _direct_value(model, factor_values, outcome)


def restricted_max_table(
    model: GaiModel,
    factor_values: Mapping[int, np.ndarray],
    factor_id: int,
    order_hint: Sequence[int] | None = None,
) -> np.ndarray:
    """For every configuration of ``factor_id``: the best total value of the
    other factors over feasible outcomes consistent with that configuration
    (-inf when none exists).  One elimination run answers all configurations
    of the factor; per-configuration values are recomputed from a witness
    outcome so they match direct enumeration exactly."""
    scope = model.scope(factor_id)
    others = [factor_table(model, f.id, factor_values[f.id]) for f in model.factors if f.id != factor_id]
    tables = others + constraint_tables(model)
    keep = set(scope)
    order = list(order_hint) if order_hint is not None else elimination_order(
        [t.scope for t in tables] + [scope], model.n_attributes, keep=keep
    )
    order = [a for a in order if a not in keep]
    marg, trace = eliminate(tables, model.domain_sizes, order, keep=tuple(sorted(scope)))
    n_cfg = model.config_count(factor_id)
    out = np.empty(n_cfg)
    ascending = tuple(sorted(scope))
    for idx in range(n_cfg):
        values = model.decode_config(factor_id, idx)
        by_attr = dict(zip(scope, values))
        pos = tuple(by_attr[a] for a in ascending)
        if marg.values[pos] == -np.inf:
            out[idx] = -np.inf
            continue
        assignment = dict(by_attr)
        assignment, _ = _backtrack(trace, assignment)
        witness = tuple(assignment[a] for a in range(model.n_attributes))
        out[idx] = sum(
            np.asarray(factor_values[f.id])[model.encode_config(f.id, model.restrict(witness, f.id))]
            for f in model.factors
            if f.id != factor_id
        )
    return out


def restricted_max(
    model: GaiModel,
    factor_values: Mapping[int, np.ndarray],
    factor_id: int,
    config_values,
) -> float:
    """Scalar form of :func:`restricted_max_table`; -inf signals that the
    configuration is infeasible."""
    table = restricted_max_table(model, factor_values, factor_id)
    return float(table[model.encode_config(factor_id, tuple(config_values))])


def expected_tables(model: GaiModel, plan, beliefs, anchors) -> dict[int, np.ndarray]:
    """Per-factor expected utility of every configuration: span times the
    plan-combined expected local values, pinned configurations contributing
    their fixed constants.  ``plan`` may be a CanonicalPlan or a CompiledPlan
    (which avoids rebuilding the projection matrices)."""
    from .model import CompiledPlan, signed_projection_matrix

    compiled = plan if isinstance(plan, CompiledPlan) else None
    out = {}
    for f in model.factors:
        ev = beliefs.expected_values_with_pins(model, anchors, f.id)
        s = (
            compiled.matrices[f.id]
            if compiled is not None
            else signed_projection_matrix(model, plan, f.id)
        )
        out[f.id] = anchors.span(f.id) * (s @ ev)
    return out
