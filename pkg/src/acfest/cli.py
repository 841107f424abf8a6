"""Command-line interface: list scenarios, run them, emit reports.

Scenario config files use INI syntax with one ``[scenario.NAME]`` section
per scenario; see the README for the field reference.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

from .experiments import Scenario, ScenarioError, builtin_scenarios, run_scenario
from .models import GaussianACF, ModelParams, RationalSpectrum, kind_label
from .report import emit_report

__all__ = ["main", "parse_config"]

DEFAULT_FORMATS = ("csv", "json", "svg")


def parse_config(path) -> list:
    """Scenarios from an INI file with ``[scenario.NAME]`` sections."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"cannot read config file {path}")
    scenarios = []
    for section in parser.sections():
        if not section.startswith("scenario."):
            raise ValueError(f"unexpected section [{section}]; use [scenario.NAME]")
        name = section[len("scenario.") :]
        if not name:
            raise ValueError("scenario section needs a name: [scenario.NAME]")
        options = parser[section]
        family = options.get("kind", "gaussian").strip().lower()
        if family == "gaussian":
            kind = GaussianACF()
        elif family == "rational":
            kind = RationalSpectrum(options.getint("d", 0))
        else:
            raise ValueError(f"[{section}]: unknown kind {family!r}")
        params = ModelParams(
            options.getfloat("mu", 0.0),
            options.getfloat("sigma2", 1.0),
            options.getfloat("tau", 1.0),
        )
        estimators = tuple(
            token.strip()
            for token in options.get("estimators", "wls, mle").split(",")
            if token.strip()
        )
        scenarios.append(
            Scenario(
                name=name,
                kind=kind,
                params=params,
                dt=options.getfloat("dt", 1.0),
                n=options.getint("n", 64),
                transform=options.get("transform", "none").strip(),
                replicates=options.getint("replicates", 200),
                seed=options.getint("seed", 0),
                estimators=estimators,
                oversample=options.getint("oversample", 4),
                pad_factor=options.getint("pad_factor", 4),
            )
        )
    if not scenarios:
        raise ValueError(f"{path} defines no [scenario.NAME] sections")
    return scenarios


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acfest",
        description="Monte Carlo comparison of autocorrelation parameter estimators",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list built-in scenarios")

    run = sub.add_parser("run", help="run a built-in scenario or a config file")
    run.add_argument("target", help="scenario name or path to an INI config file")
    run.add_argument("--seed", type=int, default=None, help="override the master seed")
    run.add_argument(
        "--replicates", type=int, default=None, help="override the replicate count"
    )
    run.add_argument("--workers", type=int, default=1, help="process pool size")
    run.add_argument("--out", default="reports", help="output directory")
    run.add_argument(
        "--formats",
        default=",".join(DEFAULT_FORMATS),
        help="comma-separated subset of csv,json,svg (empty writes nothing)",
    )
    return parser


def _resolve_scenarios(target: str) -> list:
    builtins = builtin_scenarios()
    if target in builtins:
        return [builtins[target]]
    path = Path(target)
    if path.exists():
        return parse_config(path)
    raise ValueError(
        f"{target!r} is neither a built-in scenario ({', '.join(sorted(builtins))}) "
        "nor a config file"
    )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "list":
        for name, scenario in builtin_scenarios().items():
            print(
                f"{name:12s} kind={kind_label(scenario.kind):15s} "
                f"n={scenario.n:4d} dt={scenario.dt:<5g} "
                f"transform={scenario.transform:6s} replicates={scenario.replicates}"
            )
        return 0

    try:
        scenarios = _resolve_scenarios(args.target)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    formats = tuple(token.strip() for token in args.formats.split(",") if token.strip())
    from dataclasses import replace

    exit_code = 0
    for scenario in scenarios:
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.replicates is not None:
            overrides["replicates"] = args.replicates
        if overrides:
            scenario = replace(scenario, **overrides)
        try:
            report = run_scenario(scenario, workers=args.workers)
        except ScenarioError as exc:
            print(f"error: {exc}", file=sys.stderr)
            exit_code = 3
            continue
        paths = emit_report(report, formats, args.out)
        summary = report.summaries
        for method in sorted(summary):
            tau_stats = summary[method]["params"]["tau"]
            rmse = tau_stats.get("rmse")
            rmse_text = f"{rmse:.4g}" if rmse is not None else "n/a"
            print(
                f"{scenario.name} {method}: converged "
                f"{summary[method]['n_converged']}/{summary[method]['n_replicates']}, "
                f"timescale RMSE {rmse_text}"
            )
        for path in paths:
            print(f"wrote {path}")
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
