"""Report emission: replicate CSV, summary JSON, density SVG.

The CSV is the ground truth: one row per replicate, method and parameter,
formatted so floats round-trip exactly.  The JSON holds the summaries plus
provenance, and :func:`verify_report` recomputes the summaries from the CSV
to confirm the two agree.  Output bytes depend only on the scenario and
seed, not on the worker count that produced the rows.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .experiments import (
    PARAM_NAMES,
    ReplicateResult,
    ScenarioReport,
    smoothed_histogram,
    summarize,
)
from .models import ModelParams, kind_to_dict

__all__ = [
    "emit_report",
    "load_rows_csv",
    "load_report_json",
    "verify_report",
]

CSV_HEADER = ("scenario", "replicate", "method", "param", "estimate", "std_err", "converged")


def _fmt(value: float) -> str:
    """Round-trip float formatting; NaN is written literally."""
    return f"{value:.17g}"


def emit_report(report: ScenarioReport, formats, out_dir) -> list:
    """Write the requested formats and return the created paths.

    ``formats`` is an iterable drawn from ``{"csv", "json", "svg"}``; an
    empty set writes nothing and succeeds.  Files are named after the
    scenario.
    """
    formats = set(formats)
    unknown = formats - {"csv", "json", "svg"}
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}")
    out_dir = Path(out_dir)
    if formats:
        out_dir.mkdir(parents=True, exist_ok=True)
    name = report.scenario.name
    paths = []
    if "csv" in formats:
        path = out_dir / f"{name}.csv"
        _write_rows_csv(report, path)
        paths.append(path)
    if "json" in formats:
        path = out_dir / f"{name}.json"
        _write_summary_json(report, path)
        paths.append(path)
    if "svg" in formats:
        paths.extend(_write_svg(report, out_dir))
    return paths


def _write_rows_csv(report: ScenarioReport, path: Path) -> None:
    ordered = sorted(report.rows, key=lambda row: (row.replicate, row.method))
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for row in ordered:
            for param in PARAM_NAMES:
                writer.writerow(
                    [
                        report.scenario.name,
                        row.replicate,
                        row.method,
                        param,
                        _fmt(row.estimates[param]),
                        _fmt(row.std_errs[param]),
                        int(row.converged),
                    ]
                )


def _write_summary_json(report: ScenarioReport, path: Path) -> None:
    payload = {
        "scenario": report.scenario.to_dict(),
        "effective_truth": {
            "kind": kind_to_dict(report.truth_kind),
            "mu": report.truth.mu,
            "sigma2": report.truth.sigma2,
            "tau": report.truth.tau,
        },
        "provenance": report.provenance,
        "summaries": report.summaries,
    }
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, allow_nan=True)
        handle.write("\n")


def _write_svg(report: ScenarioReport, out_dir: Path) -> list:
    """Density overlays: timescale estimates, and squared error over SE.

    Methods with fewer than ten usable replicates are left off a panel; a
    panel with no methods at all is not written.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    truth_tau = report.truth.tau

    tau_curves = {}
    ratio_curves = {}
    for method in sorted({row.method for row in report.rows}):
        rows = [
            row
            for row in report.rows
            if row.method == method and not row.failed() and row.converged
        ]
        taus = np.array([row.estimates["tau"] for row in rows])
        taus = taus[np.isfinite(taus) & (taus > 0)]
        if taus.size >= 10:
            tau_curves[method] = smoothed_histogram(np.log10(taus))
        ratios = np.array(
            [
                (row.estimates["tau"] - truth_tau) / row.std_errs["tau"]
                for row in rows
                if math.isfinite(row.std_errs.get("tau", math.nan))
                and row.std_errs["tau"] > 0
            ]
        )
        ratios = ratios[np.isfinite(ratios)]
        if ratios.size >= 10:
            ratio_curves[method] = smoothed_histogram(np.log10(ratios**2 + 1e-300))

    styles = {
        "mle": {"color": "black", "linestyle": "-"},
        "wls": {"color": "tab:red", "linestyle": ":"},
        "whittle": {"color": "tab:blue", "linestyle": "--"},
    }

    if tau_curves:
        fig, ax = plt.subplots(figsize=(6, 4))
        for method, (grid, density) in tau_curves.items():
            ax.plot(grid, density, label=method, **styles.get(method, {}))
        ax.axvline(math.log10(truth_tau), color="gray", linewidth=0.8)
        ax.set_xlabel("log10 estimated timescale")
        ax.set_ylabel("density")
        ax.set_title(f"{report.scenario.name}: timescale estimates")
        ax.legend()
        path = out_dir / f"{report.scenario.name}_tau_density.svg"
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
        paths.append(path)

    if ratio_curves:
        fig, ax = plt.subplots(figsize=(6, 4))
        for method, (grid, density) in ratio_curves.items():
            ax.plot(grid, density, label=method, **styles.get(method, {}))
        ax.set_xlabel("log10 (error / standard error)^2")
        ax.set_ylabel("density")
        ax.set_title(f"{report.scenario.name}: error calibration")
        ax.legend()
        path = out_dir / f"{report.scenario.name}_err_over_se.svg"
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths


def load_rows_csv(path) -> list:
    """Rebuild replicate rows from an emitted CSV.

    The failure reason strings are not part of the CSV schema; failed rows
    are recognized by their all-NaN estimates and come back with the
    placeholder reason ``"unavailable"``.
    """
    grouped: dict = {}
    order = []
    with open(path, newline="") as handle:
        for record in csv.DictReader(handle):
            key = (int(record["replicate"]), record["method"])
            if key not in grouped:
                grouped[key] = ReplicateResult(
                    replicate=key[0],
                    method=key[1],
                    estimates={},
                    std_errs={},
                    converged=bool(int(record["converged"])),
                )
                order.append(key)
            grouped[key].estimates[record["param"]] = float(record["estimate"])
            grouped[key].std_errs[record["param"]] = float(record["std_err"])
    rows = [grouped[key] for key in order]
    for row in rows:
        missing = set(PARAM_NAMES) - set(row.estimates)
        if missing:
            raise ValueError(f"CSV row group {row.replicate}/{row.method} lacks {missing}")
        # Completed fits always carry finite estimates, so an all-NaN row can
        # only be a recorded failure; restore the flag under a generic reason.
        if all(math.isnan(value) for value in row.estimates.values()):
            row.reason = "unavailable"
    return rows


def load_report_json(path) -> dict:
    with open(path) as handle:
        return json.load(handle)


def verify_report(json_path, csv_path, atol: float = 1e-12) -> None:
    """Check that the JSON summaries match a recomputation from the CSV.

    Failure-reason breakdowns live only in the JSON (the CSV schema has no
    reason column) and are excluded from the comparison.  Raises
    ``AssertionError`` on any numeric mismatch beyond ``atol``.
    """
    payload = load_report_json(json_path)
    rows = load_rows_csv(csv_path)
    truth = ModelParams(
        payload["effective_truth"]["mu"],
        payload["effective_truth"]["sigma2"],
        payload["effective_truth"]["tau"],
    )
    expected_rows = payload["scenario"]["replicates"] * len(
        payload["scenario"]["estimators"]
    )
    if len(rows) != expected_rows:
        raise AssertionError(
            f"CSV holds {len(rows)} rows, scenario promises {expected_rows}"
        )
    recomputed = summarize(rows, truth, payload["scenario"]["level"])
    stored = payload["summaries"]
    _compare(_strip_reasons(stored), _strip_reasons(recomputed), atol, path="summaries")


def _strip_reasons(summaries: dict) -> dict:
    out = {}
    for method, entry in summaries.items():
        out[method] = {k: v for k, v in entry.items() if k != "failure_reasons"}
    return out


def _compare(a, b, atol: float, path: str) -> None:
    if isinstance(a, dict) and isinstance(b, dict):
        if set(a) != set(b):
            raise AssertionError(f"{path}: keys differ: {set(a) ^ set(b)}")
        for key in a:
            _compare(a[key], b[key], atol, f"{path}.{key}")
        return
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        both_nan = isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b)
        if not both_nan and abs(float(a) - float(b)) > atol:
            raise AssertionError(f"{path}: {a} != {b}")
        return
    if a != b:
        raise AssertionError(f"{path}: {a!r} != {b!r}")
