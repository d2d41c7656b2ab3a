"""Command-line front end.

Subcommands: ``validate``, ``synth``, ``optimize``, ``baseline``,
``simulate`` and ``export-lp``.  Experiment settings come from an optional
JSON config file (``--config``) with flags overriding individual keys.  The
default output directory is ``$FOLLOWBACK_OUTPUT_DIR`` or ``followback-out``.

Exit codes: 0 success, 2 parse error, 3 validation error, 4 guard or solver
limit exceeded, 5 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

from .graph import (
    SYNTH_KINDS,
    CyclicGraphError,
    GraphParseError,
    GraphValidationError,
    SocialGraph,
    load_graph,
    synth_graph,
)
from .ip import SolverLimitError, build_formulation, export_lp, optimize_policy
from .model import DEFAULT_COEFFICIENTS, LogisticCoefficients, ProductModel
from .policies import ConvergenceError, centrality_policy, eigenvector_centrality, load_policy, random_append
from .reference import targets_table_path
from .simulate import GuardError, compare_policies, write_reports_csv

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_GUARD, EXIT_IO = 0, 2, 3, 4, 5
OUTPUT_ENV = "FOLLOWBACK_OUTPUT_DIR"
BUILTIN_TARGETS = "builtin:targets-table"
SUMMARY_COLUMNS = (
    "budget",
    "order",
    "predicted_objective",
    "linear_value",
    "status",
    "nodes",
    "lazy_constraints",
    "n_selected",
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    graph: str | None = None
    metadata: str | None = None
    model: str | None = None
    targets: list | None = None
    order: int = 1
    budgets: list[int] = field(default_factory=list)
    replications: int = 10_000
    seed: int = 0
    output_dir: str | None = None
    node_limit: int = 5_000_000

    @classmethod
    def from_sources(cls, path: str | None, overrides: dict) -> ExperimentConfig:
        doc: dict = {}
        if path:
            try:
                doc = json.loads(Path(path).read_text())
            except json.JSONDecodeError as exc:
                raise GraphParseError(f"config: {exc.msg}", exc.lineno, path) from None
            if not isinstance(doc, dict):
                raise GraphParseError("config must be a JSON object", None, path)
            if "budget" in doc:
                doc["budgets"] = [doc.pop("budget")]
            known = {f.name for f in fields(cls)}
            unknown = set(doc) - known
            if unknown:
                raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        doc.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(**doc)
        cfg.check()
        return cfg

    def check(self) -> None:
        if self.order not in (0, 1, 2):
            raise ConfigError("order must be 0, 1 or 2")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        b = list(self.budgets)
        if len(b) == 1 and b[0] < 0:
            raise ConfigError("budget must be non-negative")
        if len(b) > 1 and (any(m < 1 for m in b) or any(x >= y for x, y in zip(b, b[1:]))):
            raise ConfigError("budget sweep must be strictly increasing positive integers")
        for name in ("graph", "metadata", "model"):
            p = getattr(self, name)
            if p and p != BUILTIN_TARGETS and not Path(p).exists():
                raise FileNotFoundError(f"{name} file not found: {p}")

    @property
    def out(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_ENV) or "followback-out")

    def coefficients(self) -> LogisticCoefficients:
        return LogisticCoefficients.load(self.model) if self.model else DEFAULT_COEFFICIENTS

    def load(self) -> SocialGraph:
        if not self.graph:
            raise ConfigError("no graph given (use --graph or the config key 'graph')")
        path = targets_table_path() if self.graph == BUILTIN_TARGETS else self.graph
        graph, _ = load_graph(path, metadata=self.metadata)
        if self.targets is not None:
            graph = graph.with_targets(self.targets)
        return graph


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _write_json(path: Path, doc) -> None:
    _atomic_write(path, json.dumps(doc, indent=1) + "\n")


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- subcommands ---------------------------------------------------------------


def cmd_validate(args) -> int:
    _, report = load_graph(args.graph, metadata=args.metadata)
    print(report.summary())
    return EXIT_OK


def cmd_synth(args) -> int:
    graph = synth_graph(
        args.kind,
        args.n,
        edge_prob=args.p,
        target_count=args.targets,
        seed=args.seed,
        edge_count=args.edges,
    )
    out = Path(args.out)
    _atomic_write(out, json.dumps(graph.to_json(), indent=1) + "\n")
    print(f"wrote {out}: {len(graph)} vertices, {len(graph.edges)} edges, {len(graph.targets)} targets, seed {args.seed}")
    return EXIT_OK


def _config(args) -> ExperimentConfig:
    overrides = {
        "graph": getattr(args, "graph", None),
        "metadata": getattr(args, "metadata", None),
        "model": getattr(args, "model", None),
        "targets": args.targets.split(",") if getattr(args, "targets", None) else None,
        "order": getattr(args, "order", None),
        "replications": getattr(args, "replications", None),
        "seed": getattr(args, "seed", None),
        "output_dir": getattr(args, "out_dir", None),
        "node_limit": getattr(args, "node_limit", None),
    }
    if getattr(args, "budget", None) is not None:
        overrides["budgets"] = [args.budget]
    if getattr(args, "sweep", None):
        overrides["budgets"] = [int(s) for s in args.sweep.split(",")]
    return ExperimentConfig.from_sources(args.config, overrides)


def cmd_optimize(args) -> int:
    cfg = _config(args)
    if not cfg.budgets:
        raise ConfigError("no budget given (use --budget, --sweep or the config key 'budgets')")
    graph = cfg.load()
    pm = ProductModel.from_graph(graph, cfg.coefficients())
    out = cfg.out
    rows = []
    status = EXIT_OK
    try:
        for m in cfg.budgets:
            res = optimize_policy(graph, None, m, cfg.order, pm, cfg.node_limit)
            sol = res.solution
            doc = sol.to_json()
            doc.update({"budget": m, "order": cfg.order, "linear_value": res.linear_value, "seed": cfg.seed})
            _write_json(out / f"solution_m{m}.json", doc)
            pdoc = res.policy.to_json()
            pdoc["predicted_value"] = res.predicted_value
            _write_json(out / f"policy_m{m}.json", pdoc)
            if args.export_lp:
                export_lp(res.model, out / f"model_m{m}.lp")
            rows.append(
                [
                    m,
                    cfg.order,
                    repr(res.predicted_value),
                    repr(res.linear_value),
                    sol.status,
                    sol.stats["nodes"],
                    sol.stats["lazy_constraints"],
                    len(sol.selected_vertices),
                ]
            )
            chosen = ", ".join(str(v) for v in res.policy.sequence[:12])
            more = " ..." if len(res.policy) > 12 else ""
            print(f"m={m}: objective {res.predicted_value:.6g}, linear {res.linear_value:.6g}, policy [{chosen}{more}]")
    except SolverLimitError as exc:
        print(f"error: {exc}; results for earlier budgets kept", file=sys.stderr)
        status = EXIT_GUARD
    _atomic_write(out / "summary.csv", _csv_text(SUMMARY_COLUMNS, rows))
    print(f"wrote {out / 'summary.csv'}")
    return status


def cmd_baseline(args) -> int:
    cfg = _config(args)
    graph = cfg.load()
    budget = cfg.budgets[0] if cfg.budgets else None
    coeffs = cfg.coefficients()
    out = Path(args.out) if args.out else cfg.out / f"baseline_{args.kind}.json"
    if args.kind == "random-append":
        policy = random_append(graph, seed=cfg.seed, budget=budget)
        doc = policy.to_json()
    else:
        pm = ProductModel.from_graph(graph, coeffs)
        scores = eigenvector_centrality(graph, pm.susceptibility)
        directions = {"centrality-desc": ["descending"], "centrality-asc": ["ascending"]}.get(
            args.kind, ["descending", "ascending"]
        )
        candidates = [centrality_policy(scores, graph.targets, d, budget) for d in directions]
        if len(candidates) == 1:
            policy = candidates[0]
            doc = policy.to_json()
        else:
            reports = compare_policies(graph, candidates, coeffs, cfg.replications, cfg.seed)
            best = max(range(2), key=lambda i: (reports[i].expected_target_follows, -i))
            policy = candidates[best]
            doc = policy.to_json()
            doc["compared"] = {r.policy_id: r.expected_target_follows for r in reports}
            for r in reports:
                print(f"{r.policy_id}: mean {r.expected_target_follows:.6g} (SE {r.standard_error:.3g})")
        doc["iterations"] = scores.iterations
    doc["seed"] = cfg.seed
    _write_json(out, doc)
    print(f"wrote {out}: {policy.provenance}, {len(policy)} vertices")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    graph = cfg.load()
    policies = {}
    for p in args.policies:
        name = Path(p).stem
        while name in policies:
            name += "_"
        policies[name] = load_policy(p)
    reports = compare_policies(
        graph, policies, cfg.coefficients(), cfg.replications, cfg.seed, common_random_numbers=not args.independent
    )
    out = Path(args.out) if args.out else cfg.out / "simulation.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out.parent, suffix=".tmp")
    os.close(fd)
    ptmp = None
    try:
        if args.per_target:
            fd, ptmp = tempfile.mkstemp(dir=out.parent, suffix=".tmp")
            os.close(fd)
        write_reports_csv(reports, tmp, ptmp)
        os.replace(tmp, out)
        if ptmp:
            os.replace(ptmp, out.with_name(out.stem + "_per_target.csv"))
    finally:
        for t in (tmp, ptmp):
            if t:
                Path(t).unlink(missing_ok=True)
    for r in reports:
        print(f"{r.policy_id}: mean {r.expected_target_follows:.6g} (SE {r.standard_error:.3g}), {r.replications} replications, seed {r.seed}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_export_lp(args) -> int:
    cfg = _config(args)
    if len(cfg.budgets) != 1:
        raise ConfigError("export-lp needs exactly one budget")
    graph = cfg.load()
    pm = ProductModel.from_graph(graph, cfg.coefficients())
    model = build_formulation(graph, None, cfg.budgets[0], cfg.order, pm)
    out = Path(args.out) if args.out else cfg.out / f"model_m{cfg.budgets[0]}.lp"
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out.parent, suffix=".tmp")
    os.close(fd)
    try:
        export_lp(model, tmp)
        os.replace(tmp, out)
    finally:
        Path(tmp).unlink(missing_ok=True)
    print(f"wrote {out}: {model.n_vars} binaries, {len(model.constraints)} constraints")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _experiment_flags(p: argparse.ArgumentParser, budget: bool = True) -> None:
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--graph", help=f"graph file (JSON or CSV), or {BUILTIN_TARGETS}")
    p.add_argument("--metadata", help="CSV metadata sidecar for CSV edge lists")
    p.add_argument("--model", help="JSON logistic coefficients")
    p.add_argument("--targets", help="comma-separated target ids overriding the graph's flags")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_ENV} or followback-out)")
    if budget:
        p.add_argument("--budget", "-m", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="followback", description="Interaction policies for the follow-back problem.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load a graph and print counts")
    p.add_argument("graph")
    p.add_argument("--metadata")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="generate a synthetic graph")
    p.add_argument("--kind", choices=SYNTH_KINDS, default="erdos-renyi-directed")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, default=0.0, help="edge probability")
    p.add_argument("--edges", type=int, help="exact edge count instead of --p")
    p.add_argument("--targets", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("optimize", help="solve the integer program for one or more budgets")
    _experiment_flags(p)
    p.add_argument("--sweep", help="comma-separated increasing budgets")
    p.add_argument("--order", type=int, choices=(0, 1, 2))
    p.add_argument("--node-limit", type=int)
    p.add_argument("--export-lp", action="store_true", help="also write each model as an LP file")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("baseline", help="write a baseline policy")
    _experiment_flags(p)
    p.add_argument(
        "--kind",
        choices=("random-append", "centrality-asc", "centrality-desc", "centrality"),
        default="random-append",
        help="'centrality' simulates both directions and keeps the better",
    )
    p.add_argument("--replications", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("simulate", help="simulate policies and write a comparison CSV")
    _experiment_flags(p, budget=False)
    p.add_argument("policies", nargs="+", help="policy JSON files")
    p.add_argument("--replications", type=int)
    p.add_argument("--independent", action="store_true", help="separate random streams per policy")
    p.add_argument("--per-target", action="store_true", help="also write per-target frequencies")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export-lp", help="write the integer program in LP format")
    _experiment_flags(p)
    p.add_argument("--order", type=int, choices=(0, 1, 2))
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_lp)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GraphParseError, json.JSONDecodeError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (GuardError, SolverLimitError) as exc:
        print(f"limit exceeded: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (GraphValidationError, CyclicGraphError, ConvergenceError, ValueError, KeyError, TypeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
