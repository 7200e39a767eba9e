import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from cblab.cli import main
from cblab.convergence import (
    ConfigError,
    ConvergenceReport,
    ExperimentConfig,
    InsufficientPointsError,
    Row,
    emit,
    fit_slope,
    parse_config,
    run_experiment,
    run_suite,
)
from cblab.potentials import DomainError

Ns = [4, 8, 16, 32, 64, 128]


def test_fit_exact_power_laws():
    s, res, n = fit_slope([(N, N**-2.0) for N in Ns])
    assert abs(s - 2) <= 1e-10 and res <= 1e-12 and n == 4
    s, _, _ = fit_slope([(N, 3.0 / N) for N in Ns], points=None)
    assert s == pytest.approx(1.0, abs=1e-12)


def test_fit_uses_largest_points():
    # a pre-asymptotic kink at small N does not reach the fit
    rows = [(4, 1.0), (8, 0.9)] + [(N, 5.0 * N**-2.0) for N in Ns[2:]]
    assert fit_slope(rows).slope == pytest.approx(2.0, abs=1e-10)


def test_fit_floor():
    rows = [(N, N**-2.0 + 1e-13) for N in [2**k for k in range(2, 21)]]
    s, _, n = fit_slope(rows, floor=1e-12, points=None)
    assert n == 19 and s == pytest.approx(2.0, abs=0.01)
    rows = [(N, N**-12.0) for N in Ns]
    with pytest.raises(InsufficientPointsError):
        fit_slope(rows, floor=1e-12)


def test_fit_accepts_rows():
    rows = [Row(N, 0.0, 0.0, N**-1.5, True) for N in Ns]
    assert fit_slope(rows).slope == pytest.approx(1.5)


def test_residual_is_rms():
    rows = [(4, 1.0), (8, 0.5 * np.e**0.1), (16, 0.25)]
    s, res, _ = fit_slope(rows)
    y = np.log([1.0, 0.5 * np.e**0.1, 0.25])
    x = -np.log([4.0, 8.0, 16.0])
    coef = np.polyfit(x, y, 1)
    assert res == pytest.approx(np.sqrt(np.mean((np.polyval(coef, x) - y) ** 2)))
    assert res > 0


def small_report():
    cfg = ExperimentConfig(dim=1, model="CB_centroid", symmetrize="neg", N_list=(4, 8, 16))
    return run_experiment(cfg)


def test_csv_shape_and_err_column(tmp_path):
    report = small_report()
    path = tmp_path / "r.csv"
    text = emit(report, "csv", path)
    assert path.read_text() == text and text.endswith("\n")
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["N", "e_atomistic_per_site", "e_continuum", "err", "retained"]
    assert len(rows) == 4
    for r in rows[1:]:
        a, c, e = (float(v) for v in r[1:4])
        assert abs(e - abs(a - c)) <= 1e-15
        assert r[4] in ("0", "1")
    assert float(rows[1][1]) == report.rows[0].e_atomistic_per_site


def test_json_round_trip(tmp_path):
    report = small_report()
    path = tmp_path / "r.json"
    emit(report, "json", path)
    text = path.read_text()
    assert text.endswith("\n")
    back = ConvergenceReport.from_dict(json.loads(text))
    assert back == report
    assert back.config["rule"] == "centroid"


def test_emit_rejects_unknown_format():
    with pytest.raises(ValueError):
        emit(small_report(), "xml")


def test_affine_is_exact_for_every_model():
    for model, sym, pot in [
        ("CB_classical", "none", "morse_two_species"),
        ("CB_centroid", "neg", "morse_single"),
        ("W_eps", "none", "morse_two_species"),
        ("CB_bravais", "point", "morse_single"),
    ]:
        r = run_experiment(ExperimentConfig(field="affine", dim=2, model=model, symmetrize=sym, potential=pot, N_list=(4, 8)))
        assert r.status == "exact" and r.slope is None
        assert all(row.err <= 1e-11 and not row.retained for row in r.rows)


def test_w_eps_recomputes_continuum_per_n():
    r = run_experiment(ExperimentConfig(dim=1, model="W_eps", potential="morse_two_species", N_list=(4, 8, 16)))
    assert len({row.e_continuum for row in r.rows}) == 3
    assert len(r.diagnostics["quadrature"]) == 3
    r = run_experiment(ExperimentConfig(dim=1, model="CB_classical", potential="morse_two_species", N_list=(4, 8, 16)))
    assert len({row.e_continuum for row in r.rows}) == 1


def test_sampled_bonds_avoid_taper():
    r = run_experiment(ExperimentConfig(dim=2, model="CB_classical", potential="morse_two_species", N_list=(4, 8, 16)))
    assert not r.diagnostics["bonds_in_taper"]
    assert r.diagnostics["max_bond"] < r.diagnostics["taper_start"]


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(model="CB_centroid", potential="morse_two_species"),
        dict(model="W_eps", potential="morse_single", symmetrize="neg"),
        dict(model="CB_classical", symmetrize="point"),
        dict(model="CB_bravais", symmetrize="neg"),
        dict(model="CB_classical", potential="morse_two_species", symmetrize="neg"),
    ],
)
def test_incompatible_configs(kwargs):
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig(dim=1, N_list=(4, 8, 16), **kwargs))


def test_config_validation():
    for bad in [dict(model="CB_magic"), dict(field="nope"), dict(potential="nope"), dict(dim=4),
                dict(N_list=(8, 4)), dict(N_list=(1, 2, 4)), dict(quad_q=12), dict(floor=0.0)]:
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad)
    assert ExperimentConfig(dim=2).Ns == (4, 8, 16, 32, 64)
    assert ExperimentConfig(dim=1).Ns == (4, 8, 16, 32, 64, 128)


def test_parse_config():
    cfg = parse_config(
        """
        # two-species W_eps sweep
        field = trig_aligned
        amplitude = 0.04
        potential = morse_two_species
        potential.r0_01 = 0.97
        dim = 2
        model = W_eps
        symmetrize = none
        N_list = 4, 8, 16
        quad_q = 6
        quad_tol = 1e-11
        floor = 1e-12
        """
    )
    assert cfg.field == "trig_aligned" and cfg.N_list == (4, 8, 16) and cfg.quad_q == 6
    assert cfg.potential_params == {"r0_01": 0.97} and cfg.quadrature.tol == 1e-11
    with pytest.raises(ConfigError):
        parse_config("colour = blue")
    with pytest.raises(ConfigError):
        parse_config("dim two")
    with pytest.raises(ConfigError):
        parse_config("dim = two")


def test_domain_violation_reports_n():
    cfg = ExperimentConfig(dim=1, amplitude=0.6, model="CB_classical", N_list=(4, 8, 16))
    with pytest.raises(DomainError) as exc:
        run_experiment(cfg)
    assert "N=4" in str(exc.value) and "site" in str(exc.value)


def test_too_few_retained_points():
    cfg = ExperimentConfig(dim=1, model="CB_centroid", symmetrize="neg", N_list=(4, 8), floor=1e-12)
    with pytest.raises(InsufficientPointsError):
        run_experiment(cfg)


def test_cli_run(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("dim = 1\nmodel = CB_classical\npotential = morse_two_species\nN_list = 4 8 16 32\n")
    out = tmp_path / "out.csv"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert out.read_text().count("\n") == 5
    assert main(["run", "--config", str(cfg), "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert 0.8 <= data["slope"] <= 1.3
    bad = tmp_path / "bad.cfg"
    bad.write_text("model = CB_centroid\npotential = morse_two_species\n")
    assert main(["run", "--config", str(bad)]) == 1


def test_cli_usage_errors():
    for argv in (["suite", "everything"], ["run"], ["suite", "rates", "--threads", "0"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
    proc = subprocess.run([sys.executable, "-m", "cblab", "suite", "nope"], capture_output=True, text=True)
    assert proc.returncode == 2 and "invalid choice" in proc.stderr


def test_symmetry_suite_exit_code():
    buf = io.StringIO()
    assert run_suite("symmetry", stream=buf) == 0
    assert "all" in buf.getvalue().splitlines()[-1]
    with pytest.raises(ValueError):
        run_suite("bogus")
