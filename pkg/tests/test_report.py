"""Tests for report emission, round-tripping and verification."""

import json
import math

import numpy as np
import pytest

import acfest.experiments as exps
from acfest.experiments import Scenario, run_scenario
from acfest.models import ModelParams, RationalSpectrum
from acfest.report import (
    CSV_HEADER,
    emit_report,
    load_report_json,
    load_rows_csv,
    verify_report,
)

OU = RationalSpectrum(0)


def small_scenario(**overrides):
    defaults = dict(
        name="report-check",
        kind=OU,
        params=ModelParams(0.0, 1.0, 1.0),
        dt=1.0,
        n=24,
        replicates=12,
        seed=17,
        estimators=("wls", "mle"),
        oversample=1,
        pad_factor=2,
    )
    defaults.update(overrides)
    return Scenario(**defaults)


@pytest.fixture(scope="module")
def report():
    return run_scenario(small_scenario())


class TestEmit:
    def test_empty_formats_write_nothing(self, report, tmp_path):
        paths = emit_report(report, formats=(), out_dir=tmp_path / "empty")
        assert paths == []
        assert not (tmp_path / "empty").exists()

    def test_unknown_format(self, report, tmp_path):
        with pytest.raises(ValueError):
            emit_report(report, formats={"csv", "pdf"}, out_dir=tmp_path)

    def test_csv_layout(self, report, tmp_path):
        (path,) = emit_report(report, formats={"csv"}, out_dir=tmp_path)
        assert path.name == "report-check.csv"
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        # One line per replicate, method and parameter.
        assert len(lines) == 1 + 12 * 2 * 3

    def test_csv_bytes_are_stable(self, report, tmp_path):
        (a,) = emit_report(report, formats={"csv"}, out_dir=tmp_path / "a")
        (b,) = emit_report(report, formats={"csv"}, out_dir=tmp_path / "b")
        assert a.read_bytes() == b.read_bytes()

    def test_rows_round_trip(self, report, tmp_path):
        (path,) = emit_report(report, formats={"csv"}, out_dir=tmp_path)
        loaded = load_rows_csv(path)
        originals = {(row.replicate, row.method): row for row in report.rows}
        assert len(loaded) == len(report.rows)
        for row in loaded:
            original = originals[(row.replicate, row.method)]
            assert row.converged == original.converged
            for name in ("mu", "sigma2", "tau"):
                for mine, theirs in (
                    (row.estimates[name], original.estimates[name]),
                    (row.std_errs[name], original.std_errs[name]),
                ):
                    assert mine == theirs or (math.isnan(mine) and math.isnan(theirs))

    def test_json_contents(self, report, tmp_path):
        (path,) = emit_report(report, formats={"json"}, out_dir=tmp_path)
        payload = load_report_json(path)
        assert set(payload) == {"scenario", "effective_truth", "provenance", "summaries"}
        assert payload["scenario"]["name"] == "report-check"
        assert payload["effective_truth"]["tau"] == 1.0
        assert payload["provenance"]["config_hash"] == report.scenario.config_hash()
        assert set(payload["summaries"]) == {"mle", "wls"}

    def test_svg_written_with_enough_replicates(self, report, tmp_path):
        paths = emit_report(report, formats={"svg"}, out_dir=tmp_path)
        names = sorted(p.name for p in paths)
        assert names == [
            "report-check_err_over_se.svg",
            "report-check_tau_density.svg",
        ]
        for p in paths:
            head = p.read_text()[:200]
            assert "<?xml" in head or "<svg" in head

    def test_svg_skipped_when_sparse(self, tmp_path):
        sparse = run_scenario(small_scenario(name="sparse", replicates=6))
        paths = emit_report(sparse, formats={"svg"}, out_dir=tmp_path)
        assert paths == []
        assert list(tmp_path.iterdir()) == []


class TestVerify:
    def emit_pair(self, rpt, out_dir):
        paths = emit_report(rpt, formats={"csv", "json"}, out_dir=out_dir)
        by_suffix = {p.suffix: p for p in paths}
        return by_suffix[".json"], by_suffix[".csv"]

    def test_verify_accepts_own_output(self, report, tmp_path):
        json_path, csv_path = self.emit_pair(report, tmp_path)
        verify_report(json_path, csv_path)

    def test_verify_catches_tampered_estimate(self, report, tmp_path):
        json_path, csv_path = self.emit_pair(report, tmp_path)
        lines = csv_path.read_text().splitlines()
        target = lines[5].split(",")
        target[4] = "99.5"
        lines[5] = ",".join(target)
        csv_path.write_text("\n".join(lines) + "\n")
        with pytest.raises(AssertionError):
            verify_report(json_path, csv_path)

    def test_verify_catches_missing_rows(self, report, tmp_path):
        json_path, csv_path = self.emit_pair(report, tmp_path)
        lines = csv_path.read_text().splitlines()
        csv_path.write_text("\n".join(lines[:-6]) + "\n")
        with pytest.raises(AssertionError):
            verify_report(json_path, csv_path)

    def test_loader_rejects_partial_row_group(self, report, tmp_path):
        json_path, csv_path = self.emit_pair(report, tmp_path)
        lines = csv_path.read_text().splitlines()
        # Drop a single parameter line, leaving its replicate incomplete.
        del lines[3]
        csv_path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError):
            load_rows_csv(csv_path)

    def test_verify_with_recorded_failures(self, tmp_path, monkeypatch):
        real = exps.fit_mle
        calls = {"n": 0}

        def flaky(series, kind, init):
            calls["n"] += 1
            if calls["n"] == 1:
                raise RuntimeError("transient")
            return real(series, kind, init)

        monkeypatch.setattr(exps, "fit_mle", flaky)
        rpt = run_scenario(small_scenario(name="flaky-run"))
        assert rpt.summaries["mle"]["n_failed"] == 1
        json_path, csv_path = self.emit_pair(rpt, tmp_path)
        # Reasons live only in the JSON; verification must still pass.
        verify_report(json_path, csv_path)
        payload = load_report_json(json_path)
        assert payload["summaries"]["mle"]["failure_reasons"] == {"RuntimeError": 1}
        # The failed replicate survives the CSV round trip as NaN estimates.
        failed = [
            r
            for r in load_rows_csv(csv_path)
            if r.method == "mle" and math.isnan(r.estimates["tau"])
        ]
        assert len(failed) == 1
