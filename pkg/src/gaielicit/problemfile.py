"""Problem-definition documents, schema tag "gai-model/1".

JSON documents name attributes and domain values by label; indices are an
internal representation.  A document carries the model structure, optionally
the known anchor utilities (required for belief-based elicitation), and an
optional prior block (a default spec plus per-parameter overrides).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .belief import UniformMixture
from .elicitation import free_configs
from .model import (
    AnchorUtilities,
    AttributeSpec,
    Constraint,
    FactorScope,
    GaiModel,
    ModelError,
    validate_model,
)

SCHEMA = "gai-model/1"
PIN_RANGE_TOLERANCE = 1e-9


class ProblemFormatError(ValueError):
    pass


@dataclass
class ProblemDocument:
    model: GaiModel
    anchor_utilities: AnchorUtilities | None
    prior_block: dict | None
    raw: dict = field(repr=False, default_factory=dict)

    def prior_mixtures(self) -> dict[tuple[int, int], UniformMixture]:
        """One mixture per free parameter, from the prior block (uniform by
        default)."""
        block = self.prior_block or {}
        default_spec = block.get("default", {"kind": "uniform"})
        overrides = {}
        for item in block.get("overrides", []):
            fid = item["factor"]
            cfg = _config_from_labels(self.model, fid, item["config"])
            overrides[(fid, self.model.encode_config(fid, cfg))] = item
        out = {}
        for f in self.model.factors:
            for idx in free_configs(self.model, f.id):
                spec = overrides.get((f.id, idx), default_spec)
                out[(f.id, idx)] = _mixture_from_spec(spec)
        return out


def _mixture_from_spec(spec: dict) -> UniformMixture:
    kind = spec.get("kind")
    if kind == "uniform":
        return UniformMixture.uniform()
    if kind == "mixture":
        return UniformMixture.from_components(
            [(float(lo), float(up), float(w)) for lo, up, w in spec["components"]]
        )
    if kind == "gaussian":
        return UniformMixture.fit_truncated_gaussian(
            float(spec["mean"]), float(spec["variance"]), int(spec.get("components", 10))
        )
    raise ProblemFormatError(f"unknown prior kind {kind!r}")


def _config_from_labels(model: GaiModel, factor_id: int, labels: dict[str, str]):
    scope = model.scope(factor_id)
    missing = [model.attributes[a].name for a in scope if model.attributes[a].name not in labels]
    if missing:
        raise ProblemFormatError(f"factor {factor_id}: missing values for {missing}")
    return tuple(model.value_index(a, labels[model.attributes[a].name]) for a in scope)


def parse_problem(doc: dict) -> ProblemDocument:
    if not isinstance(doc, dict):
        raise ProblemFormatError("problem document must be an object")
    if doc.get("schema") != SCHEMA:
        raise ProblemFormatError(f"schema must be {SCHEMA!r}, got {doc.get('schema')!r}")
    try:
        attributes = [
            AttributeSpec(i, a["name"], tuple(a["domain"]))
            for i, a in enumerate(doc["attributes"])
        ]
    except (KeyError, TypeError) as exc:
        raise ProblemFormatError(f"bad attributes block: {exc}") from exc
    names = {a.name: a.id for a in attributes}
    if len(names) != len(attributes):
        raise ProblemFormatError("attribute names must be unique")

    def attr_id(name: str) -> int:
        if name not in names:
            raise ProblemFormatError(f"unknown attribute {name!r}")
        return names[name]

    factors = []
    for i, f in enumerate(doc.get("factors", [])):
        factors.append(FactorScope(i + 1, tuple(attr_id(n) for n in f["attributes"])))

    model_stub = GaiModel(
        attributes=attributes,
        factors=factors,
        default_outcome=(0,) * len(attributes),
        anchors={f.id: ((0,) * len(f.attrs), (0,) * len(f.attrs)) for f in factors},
    )

    try:
        default_block = doc.get("default_outcome", {})
        default = tuple(
            model_stub.value_index(a.id, default_block[a.name])
            if a.name in default_block
            else _missing(a.name, "default_outcome")
            for a in attributes
        )

        anchors = {}
        for item in doc.get("anchors", []):
            fid = item["factor"]
            if fid not in {f.id for f in factors}:
                raise ProblemFormatError(f"anchors reference unknown factor {fid}")
            anchors[fid] = (
                _config_from_labels(model_stub, fid, item["top"]),
                _config_from_labels(model_stub, fid, item["bottom"]),
            )
        missing_anchors = [f.id for f in factors if f.id not in anchors]
        if missing_anchors:
            raise ProblemFormatError(f"missing anchors for factors {missing_anchors}")

        constraints = []
        for c in doc.get("constraints", []):
            scope = tuple(attr_id(n) for n in c["attributes"])
            forbidden = set()
            for t in c["forbidden"]:
                if len(t) != len(scope):
                    raise ProblemFormatError("forbidden tuple arity mismatch")
                for a, v in zip(scope, t):
                    if v not in attributes[a].domain:
                        raise ProblemFormatError(
                            f"value {v!r} not in domain of attribute {attributes[a].name!r}"
                        )
                forbidden.add(tuple(attributes[a].domain.index(v) for a, v in zip(scope, t)))
            constraints.append(Constraint(scope=scope, forbidden=frozenset(forbidden)))
    except ProblemFormatError:
        raise
    except (ModelError, KeyError, TypeError) as exc:
        raise ProblemFormatError(str(exc)) from exc

    model = GaiModel(
        attributes=attributes,
        factors=factors,
        default_outcome=default,
        anchors=anchors,
        constraints=constraints,
        name=doc.get("name", "problem"),
    )
    problems = validate_model(model)
    if problems:
        raise ProblemFormatError("invalid model: " + "; ".join(problems))

    anchor_utilities = None
    block = doc.get("anchor_utilities")
    if block is not None:
        try:
            top = {item["factor"]: float(item["top"]) for item in block["factors"]}
            bottom = {item["factor"]: float(item["bottom"]) for item in block["factors"]}
            anchor_utilities = AnchorUtilities(
                top=top, bottom=bottom, default_utility=float(block["default_utility"])
            )
        except (KeyError, TypeError) as exc:
            raise ProblemFormatError(f"bad anchor_utilities block: {exc}") from exc
        for f in model.factors:
            if f.id not in top or f.id not in bottom:
                raise ProblemFormatError(f"anchor_utilities missing factor {f.id}")
            pin = anchor_utilities.pinned_default_value(f.id)
            if not -PIN_RANGE_TOLERANCE <= pin <= 1.0 + PIN_RANGE_TOLERANCE:
                raise ProblemFormatError(
                    f"factor {f.id}: default utility {anchor_utilities.default_utility} "
                    f"lies outside the anchor utility range [{bottom[f.id]}, {top[f.id]}]"
                )
        for f in model.factors:
            top_cfg, bottom_cfg = model.anchors[f.id]
            dflt = model.default_config(f.id)
            if bottom_cfg == dflt and abs(bottom[f.id] - anchor_utilities.default_utility) > 1e-9:
                raise ProblemFormatError(
                    f"factor {f.id}: bottom anchor equals the default pattern but its "
                    "utility differs from default_utility"
                )
            if top_cfg == dflt and abs(top[f.id] - anchor_utilities.default_utility) > 1e-9:
                raise ProblemFormatError(
                    f"factor {f.id}: top anchor equals the default pattern but its "
                    "utility differs from default_utility"
                )

    prior_block = doc.get("priors")
    parsed = ProblemDocument(
        model=model, anchor_utilities=anchor_utilities, prior_block=prior_block, raw=doc
    )
    if prior_block is not None:
        parsed.prior_mixtures()  # fail on malformed prior blocks at load time
    return parsed


def _missing(name: str, where: str):
    raise ProblemFormatError(f"{where} is missing attribute {name!r}")


def load_problem(path) -> ProblemDocument:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"not valid JSON: {exc}") from exc
    return parse_problem(doc)


def dump_model(model: GaiModel, anchor_utilities: AnchorUtilities | None = None,
               prior_block: dict | None = None) -> dict:
    """Document form of a model (inverse of parse_problem)."""
    doc: dict[str, Any] = {
        "schema": SCHEMA,
        "name": model.name,
        "attributes": [{"name": a.name, "domain": list(a.domain)} for a in model.attributes],
        "factors": [
            {"attributes": [model.attributes[a].name for a in f.attrs]} for f in model.factors
        ],
        "default_outcome": model.outcome_labels(model.default_outcome),
        "anchors": [
            {
                "factor": f.id,
                "top": model.config_labels(f.id, model.anchors[f.id][0]),
                "bottom": model.config_labels(f.id, model.anchors[f.id][1]),
            }
            for f in model.factors
        ],
        "constraints": [
            {
                "attributes": [model.attributes[a].name for a in c.scope],
                "forbidden": [
                    [model.attributes[a].domain[v] for a, v in zip(c.scope, t)]
                    for t in sorted(c.forbidden)
                ],
            }
            for c in model.constraints
        ],
    }
    if anchor_utilities is not None:
        doc["anchor_utilities"] = {
            "default_utility": anchor_utilities.default_utility,
            "factors": [
                {
                    "factor": f.id,
                    "top": anchor_utilities.top[f.id],
                    "bottom": anchor_utilities.bottom[f.id],
                }
                for f in model.factors
            ],
        }
    if prior_block is not None:
        doc["priors"] = prior_block
    return doc


def demo_problem() -> dict:
    """Built-in event-planning configurator used by the CLI, service demos,
    and the web client."""
    return {
        "schema": SCHEMA,
        "name": "team-dinner",
        "attributes": [
            {"name": "cuisine", "domain": ["italian", "japanese", "bbq"]},
            {"name": "venue", "domain": ["hall", "rooftop", "garden"]},
            {"name": "music", "domain": ["none", "dj", "live"]},
            {"name": "drinks", "domain": ["standard", "premium"]},
            {"name": "timing", "domain": ["early", "late"]},
        ],
        "factors": [
            {"attributes": ["cuisine", "venue"]},
            {"attributes": ["venue", "music", "timing"]},
            {"attributes": ["drinks", "timing"]},
        ],
        "default_outcome": {
            "cuisine": "italian",
            "venue": "hall",
            "music": "none",
            "drinks": "standard",
            "timing": "early",
        },
        "anchors": [
            {
                "factor": 1,
                "top": {"cuisine": "japanese", "venue": "rooftop"},
                "bottom": {"cuisine": "bbq", "venue": "hall"},
            },
            {
                "factor": 2,
                "top": {"venue": "rooftop", "music": "live", "timing": "late"},
                "bottom": {"venue": "garden", "music": "none", "timing": "early"},
            },
            {
                "factor": 3,
                "top": {"drinks": "premium", "timing": "late"},
                "bottom": {"drinks": "standard", "timing": "late"},
            },
        ],
        "constraints": [
            {"attributes": ["venue", "music"], "forbidden": [["garden", "dj"], ["rooftop", "live"]]},
            {"attributes": ["cuisine", "venue"], "forbidden": [["bbq", "rooftop"]]},
            {"attributes": ["drinks", "timing"], "forbidden": [["premium", "early"]]},
        ],
        "anchor_utilities": {
            "default_utility": 0.45,
            "factors": [
                {"factor": 1, "top": 0.9, "bottom": 0.1},
                {"factor": 2, "top": 0.8, "bottom": 0.2},
                {"factor": 3, "top": 0.6, "bottom": 0.3},
            ],
        },
        "priors": {"default": {"kind": "uniform"}},
    }
