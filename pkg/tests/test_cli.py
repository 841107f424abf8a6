"""Tests for the command-line interface."""

import warnings

import pytest

import acfest.cli as cli
from acfest.cli import main, parse_config
from acfest.experiments import ScenarioError
from acfest.models import GaussianACF, RationalSpectrum
from acfest.report import verify_report

CONFIG = """
[scenario.quick-ou]
kind = rational
d = 0
sigma2 = 2.0
tau = 1.5
dt = 1.0
n = 20
replicates = 6
seed = 11
estimators = wls, whittle
oversample = 1
pad_factor = 2

[scenario.quick-smooth]
kind = gaussian
tau = 1.0
dt = 1.0
n = 16
replicates = 5
seed = 12
estimators = mle
oversample = 1
pad_factor = 2
"""


class TestParseConfig:
    def test_fields_land_in_scenarios(self, tmp_path):
        path = tmp_path / "bench.ini"
        path.write_text(CONFIG)
        scenarios = {s.name: s for s in parse_config(path)}
        assert set(scenarios) == {"quick-ou", "quick-smooth"}

        ou = scenarios["quick-ou"]
        assert isinstance(ou.kind, RationalSpectrum) and ou.kind.d == 0
        assert ou.params.sigma2 == 2.0 and ou.params.tau == 1.5
        assert ou.estimators == ("wls", "whittle")
        assert ou.replicates == 6 and ou.seed == 11

        smooth = scenarios["quick-smooth"]
        assert isinstance(smooth.kind, GaussianACF)
        assert smooth.estimators == ("mle",)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValueError, match="cannot read"):
            parse_config(tmp_path / "absent.ini")

    def test_foreign_section(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[general]\nx = 1\n")
        with pytest.raises(ValueError, match="scenario.NAME"):
            parse_config(path)

    def test_unknown_kind(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[scenario.x]\nkind = fractal\n")
        with pytest.raises(ValueError, match="unknown kind"):
            parse_config(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.ini"
        path.write_text("\n")
        with pytest.raises(ValueError, match="no .scenario"):
            parse_config(path)


class TestMain:
    def test_list(self, capsys):
        assert main(["list"]) == 0
        out = capsys.readouterr().out
        for name in ("fig1-normal", "fig2-S", "fig2-M", "fig3-d0", "fig5-L"):
            assert name in out

    def test_run_builtin_with_overrides(self, tmp_path, capsys):
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="clipping negative")
            code = main(
                [
                    "run",
                    "fig2-S",
                    "--replicates",
                    "8",
                    "--seed",
                    "3",
                    "--out",
                    str(tmp_path),
                    "--formats",
                    "csv,json",
                ]
            )
        assert code == 0
        out = capsys.readouterr().out
        assert "fig2-S wls: converged" in out
        assert "fig2-S mle: converged" in out
        assert "wrote" in out
        json_path = tmp_path / "fig2-S.json"
        csv_path = tmp_path / "fig2-S.csv"
        assert json_path.exists() and csv_path.exists()
        verify_report(json_path, csv_path)
        # Overrides must reach the emitted provenance.
        import json

        payload = json.loads(json_path.read_text())
        assert payload["scenario"]["seed"] == 3
        assert payload["scenario"]["replicates"] == 8

    def test_run_config_file(self, tmp_path, capsys):
        config_path = tmp_path / "bench.ini"
        config_path.write_text(CONFIG)
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="clipping negative")
            code = main(
                ["run", str(config_path), "--out", str(tmp_path / "out"), "--formats", "csv"]
            )
        assert code == 0
        assert (tmp_path / "out" / "quick-ou.csv").exists()
        assert (tmp_path / "out" / "quick-smooth.csv").exists()

    def test_empty_formats_write_nothing(self, tmp_path, capsys):
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="clipping negative")
            code = main(
                [
                    "run",
                    "fig2-S",
                    "--replicates",
                    "4",
                    "--out",
                    str(tmp_path / "nothing"),
                    "--formats",
                    "",
                ]
            )
        assert code == 0
        assert not (tmp_path / "nothing").exists()

    def test_unknown_target(self, capsys):
        assert main(["run", "not-a-scenario"]) == 2
        err = capsys.readouterr().err
        assert "neither a built-in scenario" in err

    def test_scenario_error_exit_code(self, monkeypatch, capsys, tmp_path):
        def explode(scenario, workers=1):
            raise ScenarioError("too many failures")

        monkeypatch.setattr(cli, "run_scenario", explode)
        code = main(["run", "fig2-S", "--out", str(tmp_path)])
        assert code == 3
        assert "too many failures" in capsys.readouterr().err

    def test_no_arguments_is_usage_error(self):
        with pytest.raises(SystemExit):
            main([])
