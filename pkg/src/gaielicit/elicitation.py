"""Exact elicitation: local standard gambles per factor plus global scaling.

Local queries calibrate each factor's value scale with the factor's
conditioning set held at default levels; global queries place the per-factor
anchor outcomes on a common utility scale whose zero is the default outcome.
Together they determine a utility function up to one additive constant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .model import (
    AnchorUtilities,
    CanonicalPlan,
    ConfigValues,
    GaiModel,
    ModelError,
    Outcome,
    build_gai_graph,
    compute_canonical_plan,
    signed_projection_matrix,
)

PIN_TOLERANCE = 1e-9

LOCAL_GAMBLE = "local-standard-gamble"
GLOBAL_GAMBLE = "global-standard-gamble"


class ElicitationError(ValueError):
    pass


def neighbor_set(model: GaiModel, attr: int) -> frozenset[int]:
    """Union of every factor scope containing the attribute (includes the
    attribute itself)."""
    out: set[int] = set()
    for f in model.factors:
        if attr in f.attrs:
            out.update(f.attrs)
    return frozenset(out)


def conditioning_set(model: GaiModel, factor_id: int) -> frozenset[int]:
    """Attributes outside the factor that share some factor with one of its
    attributes; fixing them at defaults makes local queries well-defined."""
    scope = model.scope(factor_id)
    union: set[int] = set()
    for a in scope:
        union.update(neighbor_set(model, a))
    return frozenset(union - set(scope))


def pinned_configs(model: GaiModel, factor_id: int) -> dict[int, str]:
    """Configuration indices whose local value is fixed without local
    queries: the top anchor (1), bottom anchor (0), and the all-default
    configuration (set by global scaling).  Coinciding configurations keep
    the first label in top/bottom/default order."""
    top, bottom = model.anchors[factor_id]
    out: dict[int, str] = {}
    out[model.encode_config(factor_id, top)] = "top"
    out.setdefault(model.encode_config(factor_id, bottom), "bottom")
    out.setdefault(model.encode_config(factor_id, model.default_config(factor_id)), "default")
    return out


def pin_value(kind: str, anchors: AnchorUtilities, factor_id: int) -> float:
    if kind == "top":
        return 1.0
    if kind == "bottom":
        return 0.0
    return anchors.pinned_default_value(factor_id)


def free_configs(model: GaiModel, factor_id: int) -> list[int]:
    pinned = pinned_configs(model, factor_id)
    return [i for i in range(model.config_count(factor_id)) if i not in pinned]


@dataclass(frozen=True)
class GambleQuery:
    """One standard-gamble question.

    Local queries target a configuration of one factor and ask for the
    indifference probability against the factor's anchor gamble, with the
    conditioning set at default levels.  Global queries target a full
    outcome and ask for its utility on the scale where the default outcome
    is 0; ``covers`` lists the (factor, side) anchor slots the answer fills.
    """

    kind: str
    factor: int | None
    target: tuple[int, ...]
    covers: tuple[tuple[int, str], ...] = ()

    @property
    def key(self) -> tuple:
        if self.kind == LOCAL_GAMBLE:
            return (self.kind, self.factor, self.target)
        return (self.kind, self.target)

    def prompt(self, model: GaiModel) -> str:
        if self.kind == LOCAL_GAMBLE:
            top, bottom = model.anchors[self.factor]
            cset = conditioning_set(model, self.factor)
            parts = [
                f"For what probability p are you indifferent between "
                f"{model.config_labels(self.factor, self.target)} and the gamble "
                f"<p: {model.config_labels(self.factor, top)}; "
                f"1-p: {model.config_labels(self.factor, bottom)}>?"
            ]
            if cset:
                names = ", ".join(model.attributes[a].name for a in sorted(cset))
                parts.append(f"Assume {names} stay at their default levels.")
            return " ".join(parts)
        return (
            f"On a scale where the default outcome has utility 0, "
            f"what is the utility of {model.outcome_labels(self.target)}?"
        )


def local_query_plan(model: GaiModel) -> list[GambleQuery]:
    """One local gamble per free configuration of every factor; anchors are
    pinned and the default configuration is set by global scaling."""
    out = []
    for f in model.factors:
        for idx in free_configs(model, f.id):
            out.append(
                GambleQuery(
                    kind=LOCAL_GAMBLE, factor=f.id, target=model.decode_config(f.id, idx)
                )
            )
    return out


def global_scaling_plan(model: GaiModel) -> list[GambleQuery]:
    """Global gambles for the per-factor anchor outcomes, deduplicated by
    target outcome.  When every bottom anchor equals the default pattern the
    bottom queries collapse into the default outcome itself, whose utility is
    0 by the scale convention, so only the top queries remain."""
    queries: dict[Outcome, list[tuple[int, str]]] = {}
    order: list[Outcome] = []
    for side in ("top", "bottom"):
        for f in model.factors:
            cfg = model.anchors[f.id][0 if side == "top" else 1]
            outcome = model.key_outcome(f.id, cfg)
            if outcome == model.default_outcome:
                continue  # utility 0 by convention, nothing to ask
            if outcome not in queries:
                queries[outcome] = []
                order.append(outcome)
            queries[outcome].append((f.id, side))
    return [
        GambleQuery(kind=GLOBAL_GAMBLE, factor=None, target=o, covers=tuple(queries[o]))
        for o in order
    ]


@dataclass(frozen=True)
class LocalValueTable:
    """Dense local values for one factor, indexed by configuration."""

    factor: int
    values: np.ndarray

    def value(self, model: GaiModel, config: ConfigValues) -> float:
        return float(self.values[model.encode_config(self.factor, config)])


AnswerSource = Callable[[GambleQuery], float]


def _as_answer_fn(source) -> tuple[AnswerSource, Mapping | None]:
    if callable(source):
        return source, None
    mapping = dict(source)
    return (lambda q: mapping[q.key]), mapping


def run_exact_elicitation(
    model: GaiModel, answer_source
) -> tuple[dict[int, LocalValueTable], AnchorUtilities]:
    """Run global scaling then local elicitation against an answer source.

    ``answer_source`` is either a callable mapping a query to its numeric
    answer, or a mapping keyed by ``GambleQuery.key``.  Mapping sources may
    carry answers for pinned configurations; those are checked against the
    pinned values and rejected on mismatch.
    """
    ask, mapping = _as_answer_fn(answer_source)

    top: dict[int, float] = {}
    bottom: dict[int, float] = {}
    for q in global_scaling_plan(model):
        ans = float(ask(q))
        if not np.isfinite(ans):
            raise ElicitationError(f"non-finite answer for global query {q.target}")
        for fid, side in q.covers:
            (top if side == "top" else bottom)[fid] = ans
    for f in model.factors:
        top.setdefault(f.id, 0.0)      # anchor outcome coincides with the default
        bottom.setdefault(f.id, 0.0)
        if top[f.id] < bottom[f.id]:
            warnings.warn(
                f"factor {f.id}: top anchor utility below bottom anchor utility; "
                "anchors do not look like conditional best/worst",
                stacklevel=2,
            )
    anchors = AnchorUtilities(top=top, bottom=bottom, default_utility=0.0)

    tables: dict[int, LocalValueTable] = {}
    for f in model.factors:
        values = np.empty(model.config_count(f.id))
        pins = pinned_configs(model, f.id)
        for idx, kind in pins.items():
            values[idx] = pin_value(kind, anchors, f.id)
        for idx in free_configs(model, f.id):
            q = GambleQuery(kind=LOCAL_GAMBLE, factor=f.id, target=model.decode_config(f.id, idx))
            p = float(ask(q))
            if not 0.0 <= p <= 1.0:
                raise ElicitationError(
                    f"local answer {p} outside [0, 1] for factor {f.id} config {q.target}"
                )
            values[idx] = p
        if mapping is not None:
            # a scripted source may volunteer answers for pinned configs;
            # they must agree with the pins
            for idx, kind in pins.items():
                key = (LOCAL_GAMBLE, f.id, model.decode_config(f.id, idx))
                if key in mapping and abs(float(mapping[key]) - values[idx]) > PIN_TOLERANCE:
                    raise ElicitationError(
                        f"answer {mapping[key]} for pinned {kind} configuration of factor "
                        f"{f.id} contradicts pinned value {values[idx]}"
                    )
        tables[f.id] = LocalValueTable(factor=f.id, values=values)
    return tables, anchors


def assemble_utility(
    model: GaiModel,
    tables: Mapping[int, LocalValueTable] | Mapping[int, np.ndarray],
    anchors: AnchorUtilities,
    plan: CanonicalPlan | None = None,
):
    """Build the assembled evaluator u(x) = sum_j span_j * combined value of
    x's restriction to factor j.  Returns a callable on outcomes."""
    if plan is None:
        plan = compute_canonical_plan(build_gai_graph(model.factors))
    contribs: dict[int, np.ndarray] = {}
    for f in model.factors:
        raw = tables[f.id]
        vec = raw.values if isinstance(raw, LocalValueTable) else np.asarray(raw, dtype=float)
        if vec.shape != (model.config_count(f.id),):
            raise ModelError(f"factor {f.id}: value table has wrong size")
        s = signed_projection_matrix(model, plan, f.id)
        contribs[f.id] = anchors.span(f.id) * (s @ vec)

    def utility(outcome: Outcome) -> float:
        total = 0.0
        for f in model.factors:
            total += contribs[f.id][model.encode_config(f.id, model.restrict(outcome, f.id))]
        return float(total)

    utility.factor_tables = contribs  # reused by inference over deterministic tables
    return utility
