"""Config round-trip, experiment runners, artifacts, exit codes."""

import json
import math

import numpy as np
import pytest

from threshres import cli
from threshres.errors import MissingArtifact

TOML_GAUSSIAN = """
[model]
b0 = 1.0

[potential]
n = 2
transverse = "gaussian"
axial = "exponential"
matrix = [[1.0, 0.0], [0.0, 0.0]]
delta = 1.0
m12 = 2.0
couplings = [0.05]

[potential.transverse_params]
mu = 0.5
beta = 1.0

[potential.axial_params]
gamma = 1.0

[toeplitz]
L_max = 64
s_min = 1e-8
s_max = 1e-3
samples = 24
law = "quasi_exp"

[toeplitz.law_params]
beta = 1.0
mu = 0.5

[resonances]
flavor = "pauli"
L_max = 6
Q_bs = 2
grid_size = 96
r_in = 4e-4
r_out = 1.7e-2
theta = 0.1

[output]
seed = 0
tag = "unit"
"""


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(TOML_GAUSSIAN)
    return path


def test_config_round_trip(config_path):
    config = cli.ExperimentConfig.load(config_path)
    clone = cli.ExperimentConfig.from_dict(config.to_dict())
    assert clone.to_dict() == config.to_dict()


def test_config_rejects_unknown_sections():
    with pytest.raises(ValueError):
        cli.ExperimentConfig.from_dict({"nonsense": {}})


def test_validate_accept_and_reject(config_path, tmp_path):
    out = tmp_path / "run"
    assert cli.main(["validate", "--config", str(config_path),
                     "--out", str(out)]) == cli.EXIT_OK
    report = json.loads((out / "validation.json").read_text())
    assert report["accepted"]

    code = cli.main(["validate", "--config", str(config_path),
                     "--out", str(out),
                     "--set", 'potential.axial="power"'])
    assert code == cli.EXIT_VALIDATION


def test_toeplitz_experiment_artifacts(config_path, tmp_path):
    out = tmp_path / "toep"
    assert cli.main(["toeplitz", "--config", str(config_path),
                     "--out", str(out)]) == cli.EXIT_OK
    csv_text = (out / "counting.csv").read_text()
    header, *rows = csv_text.strip().splitlines()
    assert header == "s,n_plus,comparator,ratio"
    assert len(rows) == 24
    # rows run from the largest s down, so the counts are nondecreasing
    n_vals = [int(r.split(",")[1]) for r in rows]
    assert all(a <= b for a, b in zip(n_vals, n_vals[1:]))

    fit = json.loads((out / "fit_report.json").read_text())
    assert fit["schatten"]["holds"]
    slope = fit["fit"]["slope"]
    assert abs(slope * math.log(2.0) - 1.0) < 0.05

    script = (out / "plot_counting.py").read_text()
    compile(script, "plot_counting.py", "exec")  # syntactically valid
    for row in rows:
        for field in row.split(","):
            if len(field) > 6:  # computed floats never appear in the script
                assert field not in script


def test_toeplitz_outputs_deterministic(config_path, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cli.main(["toeplitz", "--config", str(config_path), "--out", str(out1)])
    cli.main(["toeplitz", "--config", str(config_path), "--out", str(out2)])
    assert (out1 / "counting.csv").read_bytes() == (out2 / "counting.csv").read_bytes()


@pytest.mark.slow
def test_resonance_experiment_end_to_end(config_path, tmp_path):
    out = tmp_path / "res"
    code = cli.main(["resonances", "--config", str(config_path),
                     "--out", str(out)])
    assert code == cli.EXIT_OK
    csvs = sorted(out.glob("resonances_*.csv"))
    assert len(csvs) == 1
    rows = csvs[0].read_text().strip().splitlines()[1:]
    # window r_in=4e-4 .. r_out=1.7e-2 holds the zeros of sectors 0..4
    assert len(rows) == 5
    report = json.loads(sorted(out.glob("report_*.json"))[0].read_text())
    assert report["sector"]["holds"]
    assert all(a["holds"] for a in report["annuli"])
    assert report["accumulation"]["observed"] == 5
    script = (out / "plot_resonances.py").read_text()
    compile(script, "plot_resonances.py", "exec")
    summary = json.loads((out / "summary.json").read_text())
    assert summary["runs"][0]["count"] == 5


def test_emit_plots_requires_artifacts(tmp_path):
    with pytest.raises(MissingArtifact):
        cli.emit_plots(tmp_path)


def test_emit_plots_from_existing(config_path, tmp_path):
    out = tmp_path / "toep"
    cli.main(["toeplitz", "--config", str(config_path), "--out", str(out)])
    wrote = cli.emit_plots(out)
    assert "plot_counting.py" in wrote


def test_report_collates(config_path, tmp_path):
    out = tmp_path / "toep"
    cli.main(["toeplitz", "--config", str(config_path), "--out", str(out)])
    assert cli.main(["report", "--run-dir", str(out)]) == cli.EXIT_OK
    combined = json.loads((out / "collated.json").read_text())
    assert "fit_report.json" in combined


def test_exit_code_on_failed_mathematical_check(config_path, tmp_path, monkeypatch):
    # force the sector check to report a violation: exit code 4 plumbing
    from threshres import charval

    real = charval.sector_check

    def fake(*args, **kwargs):
        rep = real(*args, **kwargs)
        rep["holds"] = False
        return rep

    monkeypatch.setattr(cli.charval, "sector_check", fake)
    out = tmp_path / "res4"
    code = cli.main(["resonances", "--config", str(config_path),
                     "--out", str(out)])
    assert code == cli.EXIT_CHECK_FAILED


def test_exit_code_on_budget_failure(config_path, tmp_path, monkeypatch):
    from threshres.errors import SubdivisionBudget

    def boom(*args, **kwargs):
        raise SubdivisionBudget("forced")

    monkeypatch.setattr(cli.charval, "find_resonances", boom)
    out = tmp_path / "res3"
    code = cli.main(["resonances", "--config", str(config_path),
                     "--out", str(out)])
    assert code == cli.EXIT_BUDGET
