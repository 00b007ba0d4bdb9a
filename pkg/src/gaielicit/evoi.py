"""Myopic query selection by expected value of information.

A comparison query asks whether one free local value parameter is at least a
threshold l.  Because expected utility is linear in the parameter's mean,
answering only shifts the expected utility of the configurations whose
plan-combined value references the queried parameter (its dependent set);
everything else is captured by a per-configuration restricted maximum that a
single elimination run provides.  Expected posterior utility is therefore a
function of the parameter's belief alone: piecewise quadratic in l between
the belief's breakpoints.  The optimizer evaluates an exact candidate set
(breakpoints, pairwise stationary points, and within-branch crossing roots)
instead of grid search.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .belief import ParameterBelief, UniformMixture
from .elicitation import free_configs
from .inference import InfeasibleError, expected_tables, restricted_max_table
from .model import AnchorUtilities, CompiledPlan, ConfigValues, GaiModel

log = logging.getLogger(__name__)

EVOI_EPSILON = 1e-12


@dataclass(frozen=True)
class ComparisonQuery:
    """Is the local value of ``config`` (factor ``factor``) at least
    ``threshold``?  Equivalent to preferring the configuration over the
    factor's anchor gamble at probability ``threshold``."""

    factor: int
    config_index: int
    config: ConfigValues
    threshold: float


@dataclass(frozen=True)
class DepEntry:
    config_index: int
    config: ConfigValues
    coefficient: int


@dataclass(frozen=True)
class QueryEvaluation:
    query: ComparisonQuery
    epu: float
    evoi: float
    prob_yes: float


def dep_set(context_or_compiled, factor_id: int, config_index: int) -> list[DepEntry]:
    """Configurations of the factor whose plan-combined value references the
    given parameter, with their aggregated signed coefficients."""
    compiled = getattr(context_or_compiled, "compiled", context_or_compiled)
    model = compiled.model
    col = compiled.matrices[factor_id][:, config_index]
    return [
        DepEntry(
            config_index=int(i),
            config=model.decode_config(factor_id, int(i)),
            coefficient=int(col[i]),
        )
        for i in np.nonzero(col)[0]
    ]


class EvoiContext:
    """Immutable scoring snapshot: expected tables, restricted-max marginals
    per factor, and the current best expected utility.  Build one per belief
    state; scoring individual queries then never re-solves the model."""

    def __init__(
        self,
        model: GaiModel,
        compiled: CompiledPlan,
        beliefs: ParameterBelief,
        anchors: AnchorUtilities,
    ):
        self.model = model
        self.compiled = compiled
        self.beliefs = beliefs
        self.anchors = anchors
        self.exp_tables = expected_tables(model, compiled, beliefs, anchors)
        self.evbar = {}
        self.r_tables = {}
        self.best_by_config = {}
        for f in model.factors:
            ev = beliefs.expected_values_with_pins(model, anchors, f.id)
            self.evbar[f.id] = compiled.matrices[f.id] @ ev
            self.r_tables[f.id] = restricted_max_table(model, self.exp_tables, f.id)
            self.best_by_config[f.id] = self.exp_tables[f.id] + self.r_tables[f.id]
            if np.all(np.isinf(self.best_by_config[f.id])):
                raise InfeasibleError("no feasible outcome under the constraints")
        self.current_max = max(float(np.max(self.best_by_config[f.id])) for f in model.factors)
        if any(np.any(np.abs(mat) > 1) for mat in compiled.matrices.values()):
            log.debug(
                "model has plan terms with aggregated coefficient magnitude > 1; "
                "query scoring uses the generalized linear form"
            )

    def _entries(self, factor_id: int, config_index: int):
        """(d1, d2) coefficient arrays for the query's branch maxima: one row
        per feasible affected configuration plus one constant row for the
        best unaffected configuration."""
        span = self.anchors.span(factor_id)
        col = self.compiled.matrices[factor_id][:, config_index]
        feasible = ~np.isinf(self.r_tables[factor_id])
        affected = (col != 0) & feasible
        unaffected = (col == 0) & feasible
        ev_q = self.beliefs.get(factor_id, config_index).mean
        d1 = span * col[affected].astype(float)
        d2 = (
            span * (self.evbar[factor_id][affected] - col[affected] * ev_q)
            + self.r_tables[factor_id][affected]
        )
        if np.any(unaffected):
            u_fixed = float(np.max(self.best_by_config[factor_id][unaffected]))
            d1 = np.append(d1, 0.0)
            d2 = np.append(d2, u_fixed)
        return d1, d2


def _epu_at(belief: UniformMixture, d1: np.ndarray, d2: np.ndarray, ls: np.ndarray) -> np.ndarray:
    """EPU at each threshold: the yes and no branch maxima expressed through
    the belief's partial mass G and partial moment T, which keeps the
    zero-probability branches well-defined (their term is exactly 0)."""
    mass, moment = belief.mass_and_moment_above(ls)
    mean = belief.mean
    yes = np.max(d1[:, None] * moment[None, :] + d2[:, None] * mass[None, :], axis=0)
    no = np.max(
        d1[:, None] * (mean - moment)[None, :] + d2[:, None] * (1.0 - mass)[None, :], axis=0
    )
    return yes + no


def epu(context: EvoiContext, query: ComparisonQuery) -> float:
    """Expected posterior utility of asking the query and acting optimally
    after either answer."""
    belief = context.beliefs.get(query.factor, query.config_index)
    d1, d2 = context._entries(query.factor, query.config_index)
    if d1.size == 0:
        return context.current_max
    return float(_epu_at(belief, d1, d2, np.array([query.threshold]))[0])


def _crossing_roots(belief: UniformMixture, d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """Thresholds where the argmax inside a branch can switch between two
    entries: roots of D1*T(l) + D2*G(l) = c per breakpoint interval, for
    every entry pair (yes branch c = 0, no branch c = D1*E + D2)."""
    k = d1.size
    if k < 2:
        return np.empty(0)
    iu = np.triu_indices(k, 1)
    dd1 = d1[iu[0]] - d1[iu[1]]
    dd2 = d2[iu[0]] - d2[iu[1]]
    consts = np.concatenate([np.zeros(dd1.size), dd1 * belief.mean + dd2])
    dd1 = np.concatenate([dd1, dd1])
    dd2 = np.concatenate([dd2, dd2])

    edges = np.array(belief.breakpoints)
    mass_e, moment_e = belief.mass_and_moment_above(edges)
    lo, hi = edges[:-1], edges[1:]
    width = hi - lo
    dens = (mass_e[:-1] - mass_e[1:]) / width

    # on [lo, hi): G(l) = G(lo) - f*(l - lo), T(l) = T(lo) - f*(l^2 - lo^2)/2
    # => D1*T + D2*G - c = a*l^2 + b*l + const
    a = -0.5 * dd1[:, None] * dens[None, :]
    b = -dd2[:, None] * dens[None, :]
    c0 = (
        dd1[:, None] * (moment_e[:-1] + 0.5 * dens * lo**2)[None, :]
        + dd2[:, None] * (mass_e[:-1] + dens * lo)[None, :]
        - consts[:, None]
    )
    roots = []
    quad = np.abs(a) > 1e-300
    disc = b * b - 4 * a * c0
    ok = quad & (disc >= 0)
    if np.any(ok):
        sq = np.sqrt(disc[ok])
        for r in ((-b[ok] + sq) / (2 * a[ok]), (-b[ok] - sq) / (2 * a[ok])):
            lo_ok = np.broadcast_to(lo, a.shape)[ok]
            hi_ok = np.broadcast_to(hi, a.shape)[ok]
            inside = (r >= lo_ok) & (r <= hi_ok)
            roots.append(r[inside])
    lin = (~quad) & (np.abs(b) > 1e-300)
    if np.any(lin):
        r = -c0[lin] / b[lin]
        lo_ok = np.broadcast_to(lo, a.shape)[lin]
        hi_ok = np.broadcast_to(hi, a.shape)[lin]
        inside = (r >= lo_ok) & (r <= hi_ok)
        roots.append(r[inside])
    if not roots:
        return np.empty(0)
    return np.concatenate(roots)


def optimal_threshold(
    context: EvoiContext, factor_id: int, config_index: int
) -> tuple[float, float]:
    """Best threshold for the parameter and its EPU, via exact candidate
    evaluation; ties go to the lowest threshold."""
    belief = context.beliefs.get(factor_id, config_index)
    d1, d2 = context._entries(factor_id, config_index)
    if d1.size == 0 or np.all(d1 == 0.0):
        return 0.0, context.current_max
    candidates = [np.array([0.0, 1.0]), np.array(belief.breakpoints)]
    # stationary points of every yes-entry/no-entry combination
    dd1 = d1[:, None] - d1[None, :]
    dd2 = d2[:, None] - d2[None, :]
    nz = dd1 != 0
    if np.any(nz):
        candidates.append(-dd2[nz] / dd1[nz])
    candidates.append(_crossing_roots(belief, d1, d2))
    pool = np.concatenate(candidates)
    ls = np.unique(np.clip(pool[np.isfinite(pool)], 0.0, 1.0))
    values = _epu_at(belief, d1, d2, ls)
    best = int(np.argmax(values))
    return float(ls[best]), float(values[best])


def best_local_query(
    context: EvoiContext, n_workers: int = 0
) -> QueryEvaluation | None:
    """Highest-EPU comparison query over every factor and free parameter, or
    None when no query is informative.  Ties break toward the lower factor
    id, then configuration index, then threshold."""

    def evaluate_factor(factor_id: int):
        best = None
        for idx in free_configs(context.model, factor_id):
            col = context.compiled.matrices[factor_id][:, idx]
            if not np.any(col):
                continue  # empty dependent set: the parameter never matters
            l, value = optimal_threshold(context, factor_id, idx)
            if best is None or value > best[0]:
                best = (value, idx, l)
        return best

    factor_ids = [f.id for f in context.model.factors]
    if n_workers and n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(evaluate_factor, factor_ids))
    else:
        results = [evaluate_factor(fid) for fid in factor_ids]

    best = None
    for fid, res in zip(factor_ids, results):
        if res is None:
            continue
        value, idx, l = res
        if best is None or value > best.epu:
            query = ComparisonQuery(
                factor=fid,
                config_index=idx,
                config=context.model.decode_config(fid, idx),
                threshold=l,
            )
            belief = context.beliefs.get(fid, idx)
            best = QueryEvaluation(
                query=query,
                epu=value,
                evoi=value - context.current_max,
                prob_yes=belief.prob_yes(l),
            )
    if best is None or best.evoi <= EVOI_EPSILON:
        return None
    return best
