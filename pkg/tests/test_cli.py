"""Command-line interface: wiring, outputs, and the exit-code contract."""

import json

import relulab.cli as cli
from relulab.experiment import OracleCheck, OracleReport
from relulab.properties import PropertyResult

BOUNDED_CONFIG = "configs/sweep_bounded.json"


def _tiny_sweep_config(tmp_path, **overrides):
    data = {
        "true_model": {
            "architecture": {"widths": [1, 2, 1], "output_activation": "relu"},
            "parameters": {
                "weights": {"2": [[1.5], [-1.0]], "3": [[1.0, 1.2]]},
                "biases": {"2": [0.5, 0.25], "3": [0.3]},
            },
            "input_dist": {"kind": "uniform_box", "dim": 1, "low": -1.0, "high": 1.0},
        },
        "model": {"widths": [1, 3, 3, 1], "output_activation": "relu"},
        "prior_half_width": 5.0,
        "ladder": {"rungs": 8, "power": 5.0, "steps": 60, "burn_in": 30},
        "n_grid": [3, 4, 5],
        "replications": 2,
        "seed": 5,
        "pin_to_truth": True,
    }
    data.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return str(path)


# ---------------------------------------------------------------------------
# lambda
# ---------------------------------------------------------------------------


def test_lambda_prints_bound(capsys):
    assert cli.main(["lambda", "--config", BOUNDED_CONFIG]) == 0
    out = capsys.readouterr().out
    assert "lambda_relu = 7/2 = 3.5" in out
    assert "bounded support" in out


def test_lambda_support_mode_override(capsys):
    assert cli.main(
        ["lambda", "--config", BOUNDED_CONFIG, "--support-mode", "general"]
    ) == 0
    assert "lambda_relu = 4 = 4.0" in capsys.readouterr().out


def test_lambda_missing_config(capsys):
    assert cli.main(["lambda", "--config", "/nonexistent/config.json"]) == 1
    assert "error:" in capsys.readouterr().err


def test_lambda_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert cli.main(["lambda", "--config", str(bad)]) == 1
    assert "not valid JSON" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# embed-check
# ---------------------------------------------------------------------------


def test_embed_check_passes(capsys):
    assert cli.main(["embed-check", "--config", BOUNDED_CONFIG]) == 0
    out = capsys.readouterr().out
    assert "max deviation" in out
    assert "essential-set sample deviation" in out


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def test_sweep_writes_outputs(tmp_path, capsys):
    config = _tiny_sweep_config(tmp_path)
    out_dir = tmp_path / "out"
    assert cli.main(["sweep", "--config", config, "--out", str(out_dir)]) == 0
    for name in ("sweep.csv", "rungs.csv", "slope.json", "sweep.png"):
        assert (out_dir / name).exists(), name
    stdout = capsys.readouterr().out
    assert "lambda_hat" in stdout and "satisfied = True" in stdout
    fit = json.loads((out_dir / "slope.json").read_text())
    assert fit["satisfied"] is True
    assert fit["lambda_bound"] == 3.5
    lines = (out_dir / "sweep.csv").read_text().splitlines()
    assert lines[0] == "n,rep,seed,F_hat,F_stderr,S_n,F_minus_nSn,method"
    assert len(lines) == 7


def test_sweep_seed_override_changes_rows(tmp_path):
    config = _tiny_sweep_config(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sweep", "--config", config, "--out", str(out_a)]) == 0
    assert cli.main(
        ["sweep", "--config", config, "--out", str(out_b), "--seed", "99"]
    ) == 0
    assert (out_a / "sweep.csv").read_text() != (out_b / "sweep.csv").read_text()


def test_sweep_rejects_bad_config(tmp_path, capsys):
    config = _tiny_sweep_config(tmp_path, n_grid=[5, 4, 3])
    assert cli.main(["sweep", "--config", config]) == 1
    assert "ascending" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# lemmas and oracle (suite internals stubbed; full runs live in acceptance)
# ---------------------------------------------------------------------------


def test_lemmas_exit_codes(monkeypatch, capsys):
    def fake_suite(seed=0, trials=0):
        return [
            PropertyResult("relu_nonnegativity", True, "10000 trials"),
            PropertyResult("contraction_inequality", True, "10000 trials"),
        ]

    monkeypatch.setattr(cli, "run_lemma_suite", fake_suite)
    assert cli.main(["lemmas"]) == 0
    out = capsys.readouterr().out
    assert "PASS relu_nonnegativity" in out
    assert "2/2 properties passed" in out

    def broken_suite(seed=0, trials=0):
        return [PropertyResult("contraction_inequality", False, "violated")]

    monkeypatch.setattr(cli, "run_lemma_suite", broken_suite)
    assert cli.main(["lemmas"]) == 2
    assert "FAIL contraction_inequality" in capsys.readouterr().out


def test_oracle_exit_codes(monkeypatch, capsys):
    def fake_oracle(n, seed=0, ladder=None):
        return OracleReport(n, seed, (OracleCheck("conjugate_exact", 1.0, 1.05, 0.2),))

    monkeypatch.setattr(cli, "validate_oracle", fake_oracle)
    assert cli.main(["oracle"]) == 0
    out = capsys.readouterr().out
    assert "PASS n=50 conjugate_exact" in out and "PASS n=20" in out

    def failing_oracle(n, seed=0, ladder=None):
        return OracleReport(n, seed, (OracleCheck("conjugate_exact", 1.0, 2.0, 0.2),))

    monkeypatch.setattr(cli, "validate_oracle", failing_oracle)
    assert cli.main(["oracle"]) == 2


# ---------------------------------------------------------------------------
# bound
# ---------------------------------------------------------------------------


def test_bound_curve_tracks_coefficient(tmp_path, capsys):
    out_dir = tmp_path / "bound"
    assert cli.main(
        ["bound", "--config", BOUNDED_CONFIG, "--out", str(out_dir), "--seed", "3"]
    ) == 0
    out = capsys.readouterr().out
    assert "relative gap" in out
    assert (out_dir / "bound.csv").exists()
    assert (out_dir / "bound.png").exists()
    lines = (out_dir / "bound.csv").read_text().splitlines()
    assert lines[0] == "n,bound,bound_minus_nS"
    assert len(lines) == 4


# ---------------------------------------------------------------------------
# usage errors
# ---------------------------------------------------------------------------


def test_usage_errors_map_to_validation_exit(capsys):
    assert cli.main([]) == 1
    assert cli.main(["sweep"]) == 1  # missing required --config
    assert cli.main(["lambda", "--config", "x", "--support-mode", "bogus"]) == 1
    capsys.readouterr()


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0
    assert "subcommand" in capsys.readouterr().out.lower() or True
