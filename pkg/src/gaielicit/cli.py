"""Operator command line: validate, plan, simulate, serve, elicit.

Machine-readable output goes to stdout, diagnostics to stderr.  Exit codes:
0 success, 1 validation failure, 2 runtime error.  `elicit` runs against an
in-process engine by default or acts as a thin client of a running service
via --server.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .elicitation import conditioning_set, global_scaling_plan, local_query_plan
from .harness import (
    CAR_RENTAL_SCALE,
    ExperimentConfig,
    SyntheticModelParams,
    run_experiment,
    write_results,
)
from .model import build_gai_graph, compute_canonical_plan, validate_model
from .problemfile import ProblemFormatError, demo_problem, load_problem, parse_problem

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_problem_arg(path: str):
    if path == "demo":
        return parse_problem(demo_problem())
    return load_problem(path)


def cmd_validate(args) -> int:
    try:
        doc = _load_problem_arg(args.problem)
    except FileNotFoundError as exc:
        _err(f"cannot read problem file: {exc}")
        return EXIT_RUNTIME
    except ProblemFormatError as exc:
        print(json.dumps({"valid": False, "problems": [str(exc)]}, indent=1))
        return EXIT_INVALID
    problems = validate_model(doc.model)
    print(json.dumps({"valid": not problems, "problems": problems}, indent=1))
    return EXIT_OK if not problems else EXIT_INVALID


def cmd_plan(args) -> int:
    try:
        doc = _load_problem_arg(args.problem)
    except FileNotFoundError as exc:
        _err(f"cannot read problem file: {exc}")
        return EXIT_RUNTIME
    except ProblemFormatError as exc:
        _err(str(exc))
        return EXIT_INVALID
    m = doc.model
    graph = build_gai_graph(m.factors)
    plan = compute_canonical_plan(graph)
    names = [a.name for a in m.attributes]
    out = {
        "model": m.name,
        "graph_edges": [
            {"from": i, "to": j, "label": sorted(names[a] for a in lab)}
            for (i, j), lab in sorted(graph.edges.items())
        ],
        "factors": [],
        "query_counts": {},
    }
    local = local_query_plan(m)
    global_ = global_scaling_plan(m)
    for f in m.factors:
        terms = [
            {"projection": sorted(names[a] for a in keep), "coefficient": coeff}
            for keep, coeff in sorted(
                plan.factor_terms(f.id).items(), key=lambda kv: (-len(kv[0]), sorted(kv[0]))
            )
        ]
        out["factors"].append(
            {
                "factor": f.id,
                "scope": [names[a] for a in f.attrs],
                "conditioning_set": sorted(names[a] for a in conditioning_set(m, f.id)),
                "plan_terms": terms,
                "local_queries": sum(1 for q in local if q.factor == f.id),
            }
        )
    out["query_counts"] = {
        "local": len(local),
        "global": len(global_),
        "total": len(local) + len(global_),
    }
    print(json.dumps(out, indent=1))
    return EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    raw = {}
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
    model_block = raw.get("model", {"synthetic": "car-rental-scale"})
    synthetic = None
    model_file = None
    if "file" in model_block:
        model_file = model_block["file"]
    else:
        spec = model_block.get("synthetic", "car-rental-scale")
        if spec == "car-rental-scale":
            synthetic = CAR_RENTAL_SCALE
        else:
            synthetic = SyntheticModelParams(
                n_attributes=spec["n_attributes"],
                n_factors=spec["n_factors"],
                max_scope=spec["max_scope"],
                domain_size=spec.get("domain_size", 2),
                constraint_density=spec.get("constraint_density", 0.0),
                default_bottom_factors=tuple(spec.get("default_bottom_factors", ())),
            )
    config = ExperimentConfig(
        synthetic=synthetic,
        model_file=model_file,
        prior=raw.get("prior", "uniform"),
        gaussian_variance=raw.get("gaussian_variance", 0.3),
        trials_evoi=raw.get("trials_evoi", 30),
        trials_random=raw.get("trials_random", 100),
        budget=raw.get("budget", 100),
        seed=raw.get("seed", 0),
        strategies=tuple(raw.get("strategies", ("evoi", "random"))),
        evoi_workers=raw.get("evoi_workers", 0),
    )
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.budget is not None:
        config = replace(config, budget=args.budget)
    if args.trials is not None:
        config = replace(config, trials_evoi=args.trials, trials_random=args.trials)
    if args.strategy:
        config = replace(config, strategies=(args.strategy,))
    return config


def cmd_simulate(args) -> int:
    try:
        config = _experiment_config(args)
    except (FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        _err(f"bad experiment config: {exc!r}")
        return EXIT_RUNTIME
    try:
        result = run_experiment(config)
    except Exception as exc:  # infeasible models, bad params
        _err(f"experiment failed: {exc}")
        return EXIT_RUNTIME
    out_dir = args.out or "results"
    paths = write_results(result, out_dir)
    summary = {
        "strategies": {
            s: {
                "initial_mean_error": curves["mean_error"][0],
                "final_mean_error": curves["mean_error"][-1],
                "final_normalized_mean_error": curves["normalized_mean_error"][-1],
            }
            for s, curves in result.mean_curves.items()
        },
        "files": paths,
    }
    if result.evoi_selection_seconds:
        import numpy as np

        _err(
            f"evoi selection time: mean {np.mean(result.evoi_selection_seconds):.3f}s "
            f"max {np.max(result.evoi_selection_seconds):.3f}s"
        )
    print(json.dumps(summary, indent=1))
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        from .service import SessionStore, create_app, load_service_config

        config = load_service_config(args.config)
        if args.listen:
            config["listen"] = args.listen
        if args.data_dir:
            config["data_dir"] = args.data_dir
        host, _, port = config["listen"].rpartition(":")
        store = SessionStore(config["data_dir"], evoi_workers=config.get("evoi_workers", 0))
        app = create_app(store, ui_dir=config.get("ui_dir"))
    except (FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        _err(f"bad service config: {exc}")
        return EXIT_RUNTIME
    import uvicorn

    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return EXIT_OK


class _HttpSession:
    """Thin client over the service endpoints for `elicit --server`."""

    def __init__(self, base_url: str, problem: dict, mode: str):
        import httpx

        self._client = httpx.Client(base_url=base_url, timeout=60.0)
        r = self._client.post("/sessions", json={"problem": problem, "mode": mode})
        r.raise_for_status()
        self.id = r.json()["session_id"]

    def next_query(self):
        r = self._client.get(f"/sessions/{self.id}/next-query")
        r.raise_for_status()
        body = r.json()
        return None if body["complete"] else body["query"]

    def submit(self, query_id, response):
        r = self._client.post(
            f"/sessions/{self.id}/responses", json={"query_id": query_id, "response": response}
        )
        r.raise_for_status()
        return r.json()

    def summary(self):
        r = self._client.get(f"/sessions/{self.id}")
        r.raise_for_status()
        return r.json()

    def export(self):
        r = self._client.get(f"/sessions/{self.id}/export")
        r.raise_for_status()
        return r.json()


def _scripted_answer(oracle: dict, card: dict):
    """Answer a query card from a scripted oracle document, or None."""
    if card["kind"] == "comparison":
        truth = oracle.get("truth_local_values", [])
        for item in truth:
            if item["factor"] == card["factor"] and item["config"] == card["config"]:
                return "yes" if float(item["value"]) >= card["threshold"] else "no"
        return None
    if card["kind"] == "local-standard-gamble":
        for item in oracle.get("local", []):
            if item["factor"] == card["factor"] and item["config"] == card["config"]:
                return float(item["p"])
        return None
    for item in oracle.get("global", []):
        if item["outcome"] == card["outcome"]:
            return float(item["utility"])
    return None


def cmd_elicit(args) -> int:
    try:
        doc = _load_problem_arg(args.problem)
    except FileNotFoundError as exc:
        _err(f"cannot read problem file: {exc}")
        return EXIT_RUNTIME
    except ProblemFormatError as exc:
        _err(str(exc))
        return EXIT_INVALID
    oracle = None
    if args.oracle:
        with open(args.oracle) as fh:
            oracle = json.load(fh)
    try:
        if args.server:
            session = _HttpSession(args.server, doc.raw, args.mode)
        else:
            from .session import ElicitationSession

            session = ElicitationSession(doc, args.mode)
    except Exception as exc:
        _err(f"cannot start session: {exc}")
        return EXIT_RUNTIME

    answered = 0
    budget = args.budget if args.budget is not None else (100 if args.mode == "evoi" else None)
    try:
        while budget is None or answered < budget:
            card = session.next_query()
            if card is None:
                _err("elicitation complete")
                break
            answer = None
            if oracle is not None:
                answer = _scripted_answer(oracle, card)
                if answer is None:
                    _err(f"oracle has no answer for query {card['query_id']}; stopping")
                    break
            else:
                _err(card["prompt"])
                while True:
                    try:
                        sys.stderr.write(f"[{card['query_id']}] answer> ")
                        sys.stderr.flush()
                        raw = input().strip()
                    except EOFError:
                        raw = None
                    if raw is None:
                        break
                    if card["response_type"] == "yes_no":
                        if raw in ("yes", "no", "y", "n"):
                            answer = "yes" if raw.startswith("y") else "no"
                            break
                    else:
                        try:
                            answer = float(raw)
                            break
                        except ValueError:
                            pass
                    _err("invalid answer, try again")
                if answer is None:
                    _err("input closed; saving transcript")
                    break
            session.submit(card["query_id"], answer)
            answered += 1
    except KeyboardInterrupt:
        _err("interrupted; saving transcript")

    export = session.export()
    out_path = args.out or f"session-{export['session_id']}.json"
    with open(out_path, "w") as fh:
        json.dump(export, fh, indent=1)
    summary = session.summary()
    print(json.dumps({"summary": summary, "transcript": out_path}, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaielicit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a problem file")
    p.add_argument("--problem", required=True, help="problem file path, or 'demo'")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("plan", help="print graph, plan terms, and query counts")
    p.add_argument("--problem", required=True)
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("simulate", help="run the simulation experiment")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, help="override both per-strategy trial counts")
    p.add_argument("--budget", type=int)
    p.add_argument("--strategy", choices=["evoi", "random"])
    p.add_argument("--out", help="output directory (default ./results)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("serve", help="run the session service")
    p.add_argument("--config", help="service config JSON")
    p.add_argument("--listen", help="host:port")
    p.add_argument("--data-dir")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("elicit", help="terminal elicitation session")
    p.add_argument("--problem", required=True)
    p.add_argument("--mode", choices=["exact", "evoi"], default="exact")
    p.add_argument("--server", help="base URL of a running service (thin-client mode)")
    p.add_argument("--oracle", help="scripted oracle JSON file")
    p.add_argument("--budget", type=int)
    p.add_argument("--out", help="transcript output path")
    p.set_defaults(fn=cmd_elicit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except BrokenPipeError:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
