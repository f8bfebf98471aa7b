"""Command-line front end.

Exit codes: 0 success, 1 validation error, 2 placement or component
failure, 3 non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

from . import aeroelastic as ae
from .errors import GridVpeError, SimulationError, ValidationError
from .infrastructure import load_catalog, load_testbed
from .runtime import fmt_number, parse_failure, simulate, write_trace
from .vpe import VpeRegistry, create_vpe, load_demo_vpe_spec, load_vpe_spec
from .workflow import bind, load_demo_workflow, load_workflow, validate_dataflow

EXIT_OK, EXIT_INVALID, EXIT_FAILED, EXIT_DIVERGED = 0, 1, 2, 3


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None


def cmd_validate(args) -> int:
    text = _read(args.file)
    if args.kind == "catalog":
        load_catalog(text)
    elif args.kind == "workflow":
        validate_dataflow(load_workflow(text))
    elif args.kind == "vpe":
        spec = load_vpe_spec(text)
        if args.catalog:
            create_vpe(load_catalog(_read(args.catalog)), spec)
    else:
        ae.load_config(text)
    print("OK")
    return EXIT_OK


def _trace_paths(base: Path, names) -> list:
    if len(names) == 1:
        return [base]
    return [base.with_name(f"{base.stem}.{n}{base.suffix}") for n in names]


def cmd_run(args) -> int:
    if len(args.vpe) != len(args.workflow):
        raise ValidationError("--vpe and --workflow must be given the same number of times")
    catalog = load_catalog(_read(args.catalog))
    registry = VpeRegistry()
    runs = []
    for vpe_path, wf_path in zip(args.vpe, args.workflow):
        vpe = create_vpe(catalog, load_vpe_spec(_read(vpe_path)))
        registry = registry.add(vpe)
        graph = load_workflow(_read(wf_path))
        validate_dataflow(graph)
        runs.append((bind(graph, vpe, catalog), vpe))
    failures = [parse_failure(f, runs[0][1].name) for f in args.fail or []]
    for _, vpe in runs:
        registry = registry.mark_busy(vpe.name)
    traces = simulate(runs, catalog, failures)
    paths = _trace_paths(Path(args.trace), [vpe.name for _, vpe in runs])
    code = EXIT_OK
    for trace, path in zip(traces, paths):
        write_trace(trace, path)
        m = trace.metrics()
        print(
            f"{trace.vpe}: {trace.status} makespan_s={fmt_number(m['makespan_s'])} "
            f"total_transfer_s={fmt_number(m['total_transfer_s'])} tasks={m['task_count']} "
            f"iterations={m['iterations']} trace={path}"
        )
        if trace.error:
            print(f"{trace.vpe}: {trace.error}", file=sys.stderr)
        if trace.status == "failed":
            code = EXIT_FAILED
        elif trace.status == "diverged" and code == EXIT_OK:
            code = EXIT_DIVERGED
    return code


def _round9(x: float) -> float:
    return float(fmt_number(x))


@dataclasses.dataclass
class DemoResult:
    status: str
    rows: tuple  # (iter, residual, tip twist rad, tip deflection m)
    twist: object
    deflection: object
    alpha_root: float
    q: float
    trace: object = None


def run_demo(case_label: str, mode: str, config: str | None = None) -> DemoResult:
    """Run one static case either through solve_static or as the bound demo workflow."""
    if config:
        wing, cases = ae.load_config(_read(config))
    else:
        wing, cases = ae.load_demo_config()
    if case_label not in cases:
        raise ValidationError(f"unknown case {case_label!r}; known: {', '.join(sorted(cases))}")
    case = cases[case_label]
    opts = ae.CouplingOptions()
    if mode == "in-process":
        sol = ae.solve_static(case, wing, opts)
        s = sol.state
        return DemoResult(sol.status, sol.history, s.twist, s.deflection, s.alpha_root, sol.q)
    catalog = load_testbed()
    vpe = create_vpe(catalog, load_demo_vpe_spec())
    graph = load_demo_workflow()
    wing_params = wing.to_dict()
    comps = []
    for c in graph.components:
        params = dict(c.params, wing=wing_params)
        if c.kind == "aero-strip":
            params["case"] = case.to_dict()
        if c.kind == "field-map":
            params["omega"] = opts.omega
        comps.append(dataclasses.replace(c, params=params))
    graph = dataclasses.replace(graph, components=tuple(comps))
    trace, = simulate([(bind(graph, vpe, catalog), vpe)], catalog)
    if trace.status == "failed":
        raise SimulationError(trace.error or "on-grid run failed")
    h = trace.history
    rows = tuple(
        (i + 1, r, float(tw[-1]), float(d[-1]))
        for i, (r, tw, d) in enumerate(zip(h["residual"], h["twist"], h["deflection"]))
    )
    status = "converged" if trace.status == "completed" else "diverged"
    q = ae.flight_condition(case, wing).q
    p = trace.payloads
    return DemoResult(status, rows, p["twist"], p["deflection"], p["alpha"], q, trace)


def cmd_demo(args) -> int:
    res = run_demo(args.case, args.mode, args.config)
    status, rows, twist, deflection = res.status, res.rows, res.twist, res.deflection
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if res.trace is not None:
        write_trace(res.trace, out / "trace.jsonl")
    (out / "convergence.csv").write_text(ae.convergence_csv(rows), encoding="utf-8")
    summary = {
        "case": args.case,
        "mode": args.mode,
        "status": status,
        "iterations": len(rows),
        "final_residual_rad": _round9(rows[-1][1]) if rows else None,
        "tip_twist_deg": _round9(math.degrees(twist[-1])),
        "tip_deflection_m": _round9(deflection[-1]),
        "alpha_root_deg": _round9(math.degrees(res.alpha_root)),
        "q_pa": _round9(res.q),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(
        f"{args.case} ({args.mode}): {status} after {len(rows)} iterations, "
        f"tip twist {fmt_number(math.degrees(twist[-1]))} deg, "
        f"tip deflection {fmt_number(deflection[-1])} m"
    )
    return EXIT_OK if status == "converged" else EXIT_DIVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridvpe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a catalog, workflow, VPE or wing config document")
    p.add_argument("kind", choices=["catalog", "workflow", "vpe", "config"])
    p.add_argument("file")
    p.add_argument("--catalog", help="resolve a VPE spec against this catalog")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="simulate workflows in VPEs and write JSON-Lines traces")
    p.add_argument("--catalog", required=True)
    p.add_argument("--vpe", action="append", required=True)
    p.add_argument("--workflow", action="append", required=True)
    p.add_argument("--fail", action="append", metavar="[VPE:]COMP@ITER")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("demo", help="run the bundled static aeroelastic demo")
    p.add_argument("application", choices=["aeroelastic"])
    p.add_argument("--case", default="cruise")
    p.add_argument("--mode", choices=["in-process", "on-grid"], default="in-process")
    p.add_argument("--out", default=".")
    p.add_argument("--config", help="wing/case configuration document")
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except (ValidationError, ae.AeroelasticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SimulationError, GridVpeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
