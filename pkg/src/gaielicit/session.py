"""Stateful elicitation sessions: query serving, response handling,
recommendation, transcript export and deterministic replay.

A session is fully determined by (problem document, mode, transcript); replay
from the priors reproduces beliefs exactly, which makes the append-only
transcript the source of truth and undo a truncate-and-replay.
"""

from __future__ import annotations

import hashlib
import json
import time
import uuid
from dataclasses import dataclass, field

import numpy as np

from .belief import BeliefError, ParameterBelief
from .elicitation import (
    GLOBAL_GAMBLE,
    LOCAL_GAMBLE,
    GambleQuery,
    conditioning_set,
    global_scaling_plan,
    local_query_plan,
    run_exact_elicitation,
)
from .evoi import EvoiContext, best_local_query
from .harness import random_strategy
from .inference import expected_tables, max_expected_outcome
from .model import CompiledPlan
from .problemfile import ProblemDocument

TRANSCRIPT_SCHEMA = "gai-session/1"


class SessionError(ValueError):
    pass


class StaleQueryError(SessionError):
    pass


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()) + "Z"


@dataclass
class PendingQuery:
    query_id: str
    payload: dict
    # resolution data not shown to the client
    meta: dict = field(default_factory=dict)


class ElicitationSession:
    """Single-session state machine; callers serialize mutations."""

    def __init__(self, doc: ProblemDocument, mode: str, session_id: str | None = None,
                 random_fallback: bool = False, evoi_workers: int = 0):
        if mode not in ("exact", "evoi"):
            raise SessionError(f"mode must be 'exact' or 'evoi', got {mode!r}")
        if mode == "evoi" and doc.anchor_utilities is None:
            raise SessionError(
                "belief-based elicitation requires known anchor utilities in the problem"
            )
        self.id = session_id or uuid.uuid4().hex
        self.doc = doc
        self.mode = mode
        self.random_fallback = random_fallback
        self.evoi_workers = evoi_workers
        self.model = doc.model
        self.compiled = CompiledPlan(self.model)
        self.created = _now()
        self.updated = self.created
        self.transcript: list[dict] = []
        self.pending: PendingQuery | None = None
        if mode == "evoi":
            self.anchors = doc.anchor_utilities
            self.priors = doc.prior_mixtures()
            self.beliefs = ParameterBelief(mixtures=dict(self.priors))
            self._context: EvoiContext | None = None
            self._best_cached = False
            self._best_eval = None
        else:
            self.anchors = None
            self._plan_queries = global_scaling_plan(self.model) + local_query_plan(self.model)
            self._answers: dict = {}
            self._tables = None

    # --- shared ---------------------------------------------------------

    def _next_query_id(self) -> str:
        return f"q{len(self.transcript) + 1}"

    def state_fingerprint(self) -> str:
        """Deterministic digest of the information state; equal fingerprints
        mean equal beliefs/answers and transcript length."""
        if self.mode == "evoi":
            payload = sorted(
                (fid, idx, mix.lowers, mix.uppers, mix.weights)
                for (fid, idx), mix in self.beliefs.mixtures.items()
            )
        else:
            payload = sorted((repr(k), v) for k, v in self._answers.items())
        blob = json.dumps([len(self.transcript), payload], default=list).encode()
        return hashlib.sha256(blob).hexdigest()

    def summary(self) -> dict:
        out = {
            "session_id": self.id,
            "mode": self.mode,
            "problem": self.model.name,
            "queries_answered": len(self.transcript),
            "created": self.created,
            "updated": self.updated,
            "state_fingerprint": self.state_fingerprint(),
            "complete": self.is_complete(),
        }
        rec = self.recommendation()
        out["recommendation"] = rec
        return out

    def is_complete(self) -> bool:
        if self.mode == "exact":
            return all(q.key in self._answers for q in self._plan_queries)
        return self._best_query() is None and not self.random_fallback

    # --- evoi mode ------------------------------------------------------

    def _ensure_context(self) -> EvoiContext:
        if self._context is None:
            self._context = EvoiContext(self.model, self.compiled, self.beliefs, self.anchors)
        return self._context

    def _invalidate(self) -> None:
        self._context = None
        self._best_cached = False
        self._best_eval = None

    def _best_query(self):
        if not self._best_cached:
            self._best_eval = best_local_query(self._ensure_context(), n_workers=self.evoi_workers)
            self._best_cached = True
        return self._best_eval

    def _comparison_card(self, query, evaluation) -> dict:
        m = self.model
        fid = query.factor
        top, bottom = m.anchors[fid]
        cset = sorted(conditioning_set(m, fid))
        return {
            "query_id": self._next_query_id(),
            "kind": "comparison",
            "response_type": "yes_no",
            "factor": fid,
            "config": m.config_labels(fid, query.config),
            "threshold": query.threshold,
            "gamble": {
                "probability": query.threshold,
                "top": m.config_labels(fid, top),
                "bottom": m.config_labels(fid, bottom),
            },
            "conditioning": {
                m.attributes[a].name: m.attributes[a].domain[m.default_outcome[a]] for a in cset
            },
            "prompt": (
                f"Do you prefer {m.config_labels(fid, query.config)} over the gamble "
                f"<{query.threshold:.4f}: {m.config_labels(fid, top)}; "
                f"{1 - query.threshold:.4f}: {m.config_labels(fid, bottom)}>?"
                + (
                    " Assume "
                    + ", ".join(m.attributes[a].name for a in cset)
                    + " stay at their default levels."
                    if cset
                    else ""
                )
            ),
            "evoi": None if evaluation is None else evaluation.evoi,
        }

    # --- exact mode -----------------------------------------------------

    def _gamble_card(self, query: GambleQuery) -> dict:
        m = self.model
        card = {
            "query_id": self._next_query_id(),
            "kind": query.kind,
            "prompt": query.prompt(m),
        }
        if query.kind == LOCAL_GAMBLE:
            card.update(
                {
                    "response_type": "probability",
                    "factor": query.factor,
                    "config": m.config_labels(query.factor, query.target),
                }
            )
        else:
            card.update({"response_type": "utility", "outcome": m.outcome_labels(query.target)})
        return card

    def _next_exact_query(self) -> GambleQuery | None:
        for q in self._plan_queries:
            if q.key not in self._answers:
                return q
        return None

    # --- the public protocol --------------------------------------------

    def next_query(self) -> dict | None:
        """The pending query card, generating one if needed; None when the
        elicitation is complete."""
        if self.pending is not None:
            return self.pending.payload
        if self.mode == "exact":
            q = self._next_exact_query()
            if q is None:
                return None
            card = self._gamble_card(q)
            self.pending = PendingQuery(card["query_id"], card, {"query": q})
            return card
        evaluation = self._best_query()
        if evaluation is None:
            if not self.random_fallback:
                return None
            rng = np.random.default_rng(
                [int(hashlib.sha256(self.id.encode()).hexdigest()[:8], 16), len(self.transcript)]
            )
            query = random_strategy(self.model, self.beliefs, rng)
            card = self._comparison_card(query, None)
            self.pending = PendingQuery(card["query_id"], card, {"query": query, "evoi": 0.0})
            return card
        card = self._comparison_card(evaluation.query, evaluation)
        self.pending = PendingQuery(
            card["query_id"], card, {"query": evaluation.query, "evoi": evaluation.evoi}
        )
        return card

    def submit(self, query_id: str, response) -> dict:
        """Validate and apply one response; returns the updated summary with
        the answered query's value of information."""
        if self.pending is None:
            self.next_query()
        if self.pending is None:
            raise SessionError("elicitation is complete; no pending query")
        if query_id != self.pending.query_id:
            raise StaleQueryError(
                f"response targets {query_id!r} but the pending query is "
                f"{self.pending.query_id!r}"
            )
        if self.mode == "evoi":
            if response not in ("yes", "no"):
                raise SessionError("response must be 'yes' or 'no'")
            query = self.pending.meta["query"]
            belief = self.beliefs.get(query.factor, query.config_index)
            p = belief.prob_yes(query.threshold)
            if (response == "yes" and p <= 0.0) or (response == "no" and p >= 1.0):
                raise SessionError(
                    f"response {response!r} has zero probability under the current belief"
                )
            try:
                self.beliefs = self.beliefs.updated(
                    query.factor, query.config_index, query.threshold, response
                )
            except BeliefError as exc:
                raise SessionError(str(exc)) from exc
            self._invalidate()
            record = {
                "query_id": self.pending.query_id,
                "kind": "comparison",
                "factor": query.factor,
                "config": list(query.config),
                "threshold": query.threshold,
                "response": response,
                "timestamp": _now(),
            }
            answered_evoi = self.pending.meta.get("evoi")
        else:
            value = float(response)
            if not np.isfinite(value):
                raise SessionError("answers must be finite numbers")
            query = self.pending.meta["query"]
            if query.kind == LOCAL_GAMBLE and not 0.0 <= value <= 1.0:
                raise SessionError("local gamble answers are probabilities in [0, 1]")
            self._answers[query.key] = value
            self._tables = None
            record = {
                "query_id": self.pending.query_id,
                "kind": query.kind,
                "factor": query.factor,
                "config": list(query.target) if query.factor is not None else None,
                "target": list(query.target) if query.factor is None else None,
                "response": value,
                "timestamp": _now(),
            }
            answered_evoi = None
        self.transcript.append(record)
        self.pending = None
        self.updated = record["timestamp"]
        out = self.summary()
        out["answered_query_evoi"] = answered_evoi
        if self.mode == "evoi":
            out["posterior"] = self.parameter_summary(query.factor, query.config_index)
        return out

    def recommendation(self) -> dict | None:
        """Current best feasible outcome and its expected utility, with
        per-factor contributions; None for an incomplete exact session."""
        if self.mode == "evoi":
            tables = expected_tables(self.model, self.compiled, self.beliefs, self.anchors)
        else:
            tables = self._exact_tables()
            if tables is None:
                return None
        outcome, value = max_expected_outcome(self.model, tables)
        per_factor = {
            str(f.id): float(
                tables[f.id][self.model.encode_config(f.id, self.model.restrict(outcome, f.id))]
            )
            for f in self.model.factors
        }
        return {
            "outcome": self.model.outcome_labels(outcome),
            "expected_utility": value,
            "per_factor": per_factor,
        }

    def _exact_tables(self):
        if not self.is_complete():
            return None
        if self._tables is None:
            tables, anchors = run_exact_elicitation(self.model, self._answers)
            spans = {f.id: anchors.span(f.id) for f in self.model.factors}
            self._tables = {
                f.id: spans[f.id] * (self.compiled.matrices[f.id] @ tables[f.id].values)
                for f in self.model.factors
            }
        return self._tables

    def parameter_summary(self, factor_id: int, config_index: int) -> dict:
        mix = self.beliefs.get(factor_id, config_index)
        return {
            "factor": factor_id,
            "config": self.model.config_labels(
                factor_id, self.model.decode_config(factor_id, config_index)
            ),
            "mean": mix.mean,
            "components": [
                [lo, up, w] for lo, up, w in zip(mix.lowers, mix.uppers, mix.weights)
            ],
        }

    def beliefs_summary(self) -> list[dict]:
        return [
            self.parameter_summary(fid, idx)
            for (fid, idx) in sorted(self.beliefs.mixtures.keys())
        ]

    # --- persistence ------------------------------------------------------

    def export(self) -> dict:
        from .problemfile import dump_model

        raw = self.doc.raw or dump_model(
            self.model, self.doc.anchor_utilities, self.doc.prior_block
        )
        return {
            "schema": TRANSCRIPT_SCHEMA,
            "session_id": self.id,
            "mode": self.mode,
            "random_fallback": self.random_fallback,
            "created": self.created,
            "problem": raw,
            "records": list(self.transcript),
        }

    def snapshot(self) -> dict:
        """Export plus the materialized state: serialized beliefs and the
        fingerprint, so a snapshot can be checked against a replay."""
        doc = self.export()
        doc["state_fingerprint"] = self.state_fingerprint()
        if self.mode == "evoi":
            doc["beliefs"] = [
                {
                    "factor": fid,
                    "config_index": idx,
                    "components": [
                        [lo, up, w] for lo, up, w in zip(mix.lowers, mix.uppers, mix.weights)
                    ],
                }
                for (fid, idx), mix in sorted(self.beliefs.mixtures.items())
            ]
        return doc

    @classmethod
    def restore(
        cls, document: dict, session_id: str | None = None, evoi_workers: int = 0
    ) -> "ElicitationSession":
        """Rebuild a session by replaying its transcript against the stored
        problem; raises on schema mismatch or inconsistent records."""
        from .problemfile import parse_problem

        if document.get("schema") != TRANSCRIPT_SCHEMA:
            raise SessionError(
                f"transcript schema must be {TRANSCRIPT_SCHEMA!r}, got {document.get('schema')!r}"
            )
        doc = parse_problem(document["problem"])
        session = cls(
            doc,
            document.get("mode", "evoi"),
            session_id=session_id or document.get("session_id"),
            random_fallback=bool(document.get("random_fallback", False)),
            evoi_workers=evoi_workers,
        )
        if document.get("created"):
            session.created = document["created"]
        for record in document.get("records", []):
            session._apply_record(record)
        return session

    def _apply_record(self, record: dict) -> None:
        """Replay one transcript record without going through query
        generation; used by restore and undo."""
        if self.mode == "evoi":
            if record.get("kind") != "comparison":
                raise SessionError(f"unexpected record kind {record.get('kind')!r}")
            fid = record["factor"]
            cfg = tuple(record["config"])
            idx = self.model.encode_config(fid, cfg)
            try:
                self.beliefs = self.beliefs.updated(
                    fid, idx, float(record["threshold"]), record["response"]
                )
            except (KeyError, BeliefError) as exc:
                raise SessionError(f"transcript replay failed: {exc}") from exc
            self._invalidate()
        else:
            kind = record.get("kind")
            if kind == LOCAL_GAMBLE:
                key = (kind, record["factor"], tuple(record["config"]))
            elif kind == GLOBAL_GAMBLE:
                key = (kind, tuple(record["target"]))
            else:
                raise SessionError(f"unexpected record kind {kind!r}")
            self._answers[key] = float(record["response"])
            self._tables = None
        self.transcript.append(dict(record))
        self.updated = record.get("timestamp", self.updated)
        self.pending = None

    def undo(self) -> dict:
        """Drop the most recent response and replay; error when empty."""
        if not self.transcript:
            raise SessionError("nothing to undo")
        records = self.transcript[:-1]
        fresh = ElicitationSession(
            self.doc,
            self.mode,
            session_id=self.id,
            random_fallback=self.random_fallback,
            evoi_workers=self.evoi_workers,
        )
        fresh.created = self.created
        for record in records:
            fresh._apply_record(record)
        self.__dict__.update(fresh.__dict__)
        return self.summary()
