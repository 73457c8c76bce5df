"""Command-line entry point.

    e2etrust check    --metric wtm --requirement r2 --mode grid --step 0.1 --k 2
    e2etrust simulate --topology line.json --rounds 10 --out-dir runs/line
    e2etrust report
    e2etrust rerun    runs/line/manifest.json --out-dir runs/line-again

Exit codes: 0 the result matches the expected requirement table, 1 usage or
I/O error, 2 the result diverges from the expected table.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from e2etrust import __version__, checker, metrics
from e2etrust.checker import MetricUnderTest, Requirement, SearchConfig
from e2etrust.metrics import SIMPLE, WSES, WTM, MetricParams
from e2etrust.sim import SimConfig, Topology, TopologyError, run_simulation
from e2etrust.sim.network import Failure
from e2etrust.sim.trace import TRACE_FORMATS, render

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGENT = 2

# True = the requirement is fulfilled (no counterexample exists).
EXPECTED = {
    SIMPLE: {Requirement.R1: True, Requirement.R2: True},
    WTM: {Requirement.R1: True, Requirement.R2: False},
    WSES: {Requirement.R1: True, Requirement.R2: True},
}

TABLE_ROWS = {
    SIMPLE: {
        "rating_range": str(metrics.SIMPLE_RATINGS),
        "state": "single float (previous trust)",
        "threshold": "previous trust",
        "reputation": "stored trust value",
        "weighting": "weighted with 0 < alpha < 1",
    },
    WTM: {
        "rating_range": str(metrics.SIGNED_RATINGS),
        "state": "FIFO queue of length k",
        "threshold": "0",
        "reputation": "sum r / sum |r|",
        "weighting": "normalised by sum |r|",
    },
    WSES: {
        "rating_range": str(metrics.SIGNED_RATINGS),
        "state": "tuple of floats (p1, p2)",
        "threshold": "0",
        "reputation": "(p1 - p2) / (p1 + p2)",
        "weighting": "weighted with 0 < alpha < 1",
    },
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return value


def _alpha(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {text}")
    return value


def _dump(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def make_manifest(command: str, config: dict[str, Any]) -> dict[str, Any]:
    return {"command": command, "config": config, "seed": config.get("seed", 0), "tool_version": __version__}


def _write_manifest(manifest: dict[str, Any], path: Optional[Path]) -> None:
    if path is None:
        sys.stderr.write(json.dumps(manifest, sort_keys=True) + "\n")
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(_dump(manifest))


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


# --- check ------------------------------------------------------------------


def run_check(config: dict[str, Any]) -> tuple[dict[str, Any], int]:
    metric = MetricUnderTest(config["metric"], MetricParams(alpha=config["alpha"], capacity=config["k"]))
    requirement = Requirement.parse(config["requirement"])
    search = SearchConfig(mode=config["mode"], trials=config["trials"], seed=config["seed"],
                          step=config["step"], depth=config["depth"])
    report = checker.search_counterexamples(metric, requirement, search)
    for violation in report.violations:
        if checker.replay(violation, metric) is not checker.Verdict.VIOLATED:
            raise checker.CorruptCounterexampleError("reported counterexample does not replay")
    matches = report.fulfilled == EXPECTED[metric.kind][requirement]
    return report.to_dict(), EXIT_OK if matches else EXIT_DIVERGENT


def _check_config(args) -> dict[str, Any]:
    return {
        "metric": args.metric,
        "requirement": args.requirement.upper(),
        "mode": args.mode,
        "trials": args.trials,
        "seed": args.seed,
        "step": args.step,
        "depth": args.depth,
        "alpha": args.alpha,
        "k": args.k,
    }


def _manifest_path_for(out: Optional[Path]) -> Optional[Path]:
    return None if out is None else out.with_name(out.stem + ".manifest.json")


def _finish_check(config, out: Optional[Path]) -> int:
    _write_manifest(make_manifest("check", config), _manifest_path_for(out))
    report, code = run_check(config)
    _emit(_dump(report), out)
    if code == EXIT_DIVERGENT:
        sys.stderr.write(
            f"finding: {config['metric']} {config['requirement']} gave {len(report['violations'])} "
            f"violation(s), which differs from the expected table\n"
        )
    return code


def cmd_check(args) -> int:
    return _finish_check(_check_config(args), args.out)


# --- simulate ---------------------------------------------------------------


def run_simulate(config: dict[str, Any], out_dir: Path) -> dict[str, Any]:
    topology = Topology.from_dict(config["topology"])
    sim_config = SimConfig.from_dict(config["sim"])
    result = run_simulation(topology, sim_config)
    fmt = config["trace_format"]
    (out_dir / f"trace.{fmt}").write_text(render(result.trace, fmt))
    (out_dir / "summary.json").write_text(_dump(result.summary))
    return result.summary


def _finish_simulate(config, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(make_manifest("simulate", config), out_dir / "manifest.json")
    run_simulate(config, out_dir)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        topology = Topology.load(args.topology)
    except OSError as exc:
        raise UsageError(f"cannot read topology: {exc}") from exc
    sim = SimConfig(
        alpha=args.alpha,
        rounds=args.rounds,
        packets_per_round=args.packets,
        dio_period=args.dio_period,
        loss_trigger_fraction=args.loss_trigger,
        seed=args.seed,
        late_delivery_fraction=args.late_fraction,
        failures=tuple(args.failure),
    )
    config = {
        "topology_path": str(args.topology),
        "topology": topology.to_dict(),
        "sim": sim.to_dict(),
        "trace_format": args.trace_format,
        "seed": args.seed,
    }
    return _finish_simulate(config, args.out_dir)


# --- report -----------------------------------------------------------------


def run_report(config: dict[str, Any]) -> tuple[dict[str, Any], int]:
    """Fill the comparison table with live checker results."""
    rows = []
    for kind in metrics.METRIC_KINDS:
        metric = MetricUnderTest(kind, MetricParams(alpha=config["alpha"], capacity=config["k"]))
        row: dict[str, Any] = {"metric": kind, **TABLE_ROWS[kind]}
        for requirement in Requirement:
            runs = [
                SearchConfig(mode=checker.GRID, step=config["step"], depth=config["depth"]),
                SearchConfig(mode=checker.RANDOMIZED, trials=config["trials"], seed=config["seed"]),
            ]
            reports = [checker.search_counterexamples(metric, requirement, run) for run in runs]
            violations = sum(len(r.violations) for r in reports)
            row[requirement.value] = {
                "fulfilled": violations == 0,
                "expected": EXPECTED[kind][requirement],
                "violations": violations,
                "trials": sum(r.trials_run for r in reports),
            }
        rows.append(row)
    matches = all(row[r.value]["fulfilled"] == row[r.value]["expected"] for row in rows for r in Requirement)
    return {"rows": rows, "matches_expected": matches}, EXIT_OK if matches else EXIT_DIVERGENT


def format_report(report: dict[str, Any]) -> str:
    columns = ["metric", "rating_range", "state", "threshold", "reputation", "weighting", "R1", "R2"]
    table = [columns]
    for row in report["rows"]:
        cells = [str(row[c]) for c in columns[:-2]]
        for req in ("R1", "R2"):
            cell = row[req]
            mark = "fulfils" if cell["fulfilled"] else f"violated ({cell['violations']})"
            cells.append(mark if cell["fulfilled"] == cell["expected"] else mark + " !")
        table.append(cells)
    widths = [max(len(r[i]) for r in table) for i in range(len(columns))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _finish_report(config, out: Optional[Path], fmt: str) -> int:
    _write_manifest(make_manifest("report", config), _manifest_path_for(out))
    report, code = run_report(config)
    if out is not None:
        _emit(_dump(report), out)
    sys.stdout.write(_dump(report) if fmt == "json" else format_report(report))
    return code


def cmd_report(args) -> int:
    config = {"alpha": args.alpha, "k": args.k, "step": args.step, "depth": args.depth,
              "trials": args.trials, "seed": args.seed}
    return _finish_report(config, args.out, args.format)


# --- rerun ------------------------------------------------------------------


def cmd_rerun(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        command, config = manifest["command"], manifest["config"]
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest: {exc}") from exc
    if command == "check":
        return _finish_check(config, args.out)
    if command == "simulate":
        if args.out_dir is None:
            raise UsageError("rerunning a simulation needs --out-dir")
        return _finish_simulate(config, args.out_dir)
    if command == "report":
        return _finish_report(config, args.out, "text")
    raise UsageError(f"unknown command in manifest: {command!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="e2etrust", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    check = sub.add_parser("check", help="search counterexamples to R1/R2 for one metric")
    check.add_argument("--metric", required=True, choices=metrics.METRIC_KINDS)
    check.add_argument("--requirement", required=True, type=str.lower, choices=["r1", "r2"])
    check.add_argument("--mode", default=checker.RANDOMIZED, choices=checker.SEARCH_MODES)
    check.add_argument("--trials", type=_positive_int, default=100_000)
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--step", type=float, default=checker.DEFAULT_STEP)
    check.add_argument("--depth", type=int, default=checker.DEFAULT_DEPTH)
    check.add_argument("--alpha", type=_alpha, default=metrics.DEFAULT_ALPHA)
    check.add_argument("--k", type=_positive_int, default=metrics.DEFAULT_CAPACITY)
    check.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
    check.set_defaults(func=cmd_check)

    defaults = SimConfig()
    simulate = sub.add_parser("simulate", help="run trust rounds over a topology")
    simulate.add_argument("--topology", required=True, type=Path)
    simulate.add_argument("--alpha", type=_alpha, default=defaults.alpha)
    simulate.add_argument("--rounds", type=_positive_int, default=defaults.rounds)
    simulate.add_argument("--packets", type=_positive_int, default=defaults.packets_per_round)
    simulate.add_argument("--dio-period", type=_positive_int, default=defaults.dio_period)
    simulate.add_argument("--loss-trigger", type=_fraction, default=defaults.loss_trigger_fraction)
    simulate.add_argument("--late-fraction", type=_fraction, default=defaults.late_delivery_fraction)
    simulate.add_argument("--seed", type=int, default=defaults.seed)
    simulate.add_argument("--failure", type=Failure.parse, action="append", default=[],
                          metavar="TICK:NODE[:fail|recover]")
    simulate.add_argument("--trace-format", choices=TRACE_FORMATS, default="jsonl")
    simulate.add_argument("--out-dir", type=Path, required=True)
    simulate.set_defaults(func=cmd_simulate)

    report = sub.add_parser("report", help="comparison table with live R1/R2 results")
    report.add_argument("--alpha", type=_alpha, default=metrics.DEFAULT_ALPHA)
    report.add_argument("--k", type=_positive_int, default=2)
    report.add_argument("--step", type=float, default=checker.DEFAULT_STEP)
    report.add_argument("--depth", type=int, default=2)
    report.add_argument("--trials", type=_positive_int, default=20_000)
    report.add_argument("--seed", type=int, default=0)
    report.add_argument("--format", choices=["text", "json"], default="text")
    report.add_argument("--out", type=Path, help="also write the JSON report here")
    report.set_defaults(func=cmd_report)

    rerun = sub.add_parser("rerun", help="repeat a run from its manifest")
    rerun.add_argument("manifest", type=Path)
    rerun.add_argument("--out", type=Path)
    rerun.add_argument("--out-dir", type=Path)
    rerun.set_defaults(func=cmd_rerun)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, TopologyError, ValueError, OSError) as exc:
        sys.stderr.write(f"e2etrust: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
