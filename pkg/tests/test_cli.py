import csv
import io
import json

import pytest

from clockgame import __version__
from clockgame.cli import main


def run(tmp_path, command, config, *flags):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config))
    out = tmp_path / "out.csv"
    code = main([command, "--config", str(cfg), "--out", str(out), "--reproducible", *flags])
    return code, out


def read_rows(path):
    lines = path.read_text().splitlines()
    return lines[0], list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_clock_game_maximal_row(tmp_path):
    code, out = run(tmp_path, "clock-game", {"N": 3, "D": 4, "ancillas": ["maximal"]})
    assert code == 0
    meta, rows = read_rows(out)
    assert meta == f"#seed=0,#version={__version__},#generator=numpy.PCG64/SeedSequence"
    assert float(rows[0]["p_win"]) == pytest.approx(1.0, abs=1e-12)


def test_clock_game_schmidt_dimension_mismatch(tmp_path, capsys):
    config = {"N": 3, "D": "auto", "ancillas": [{"kind": "schmidt", "coeffs": [0.9**0.5, 0.1**0.5]}]}
    assert run(tmp_path, "clock-game", config)[0] == 2
    assert "ancillas[0].coeffs" in capsys.readouterr().err


def test_clock_game_header_and_schmidt(tmp_path):
    config = {"N": 1, "D": 2, "ancillas": [{"kind": "schmidt", "coeffs": [0.9**0.5, 0.1**0.5]}]}
    code, out = run(tmp_path, "clock-game", config)
    assert code == 0
    assert out.read_text().splitlines()[1] == "N,D,K,ancilla,mode,p_win,stderr"
    _, rows = read_rows(out)
    assert float(rows[0]["p_win"]) == pytest.approx(0.8, abs=1e-12)


def test_clock_game_row_count_is_grid_product(tmp_path):
    config = {"N": [1, 2], "K": [2, 3], "ancillas": ["maximal", "product"], "modes": ["exact", "monte_carlo"], "grid": 4}
    code, out = run(tmp_path, "clock-game", config, "--trials", "50")
    assert code == 0
    assert len(read_rows(out)[1]) == 2 * 2 * 2 * 2


def test_monte_carlo_needs_trials(tmp_path):
    code, _ = run(tmp_path, "clock-game", {"modes": ["monte_carlo"], "trials": 0})
    assert code == 2


def test_unknown_field(tmp_path, capsys):
    code, _ = run(tmp_path, "audit", {"Nmax": 3})
    assert code == 2
    assert "Nmax" in capsys.readouterr().err


def test_bad_values_name_the_field(tmp_path, capsys):
    code, _ = run(tmp_path, "noise-sweep", {"dtGamma1": [-0.1]})
    assert code == 2
    assert "dtGamma1" in capsys.readouterr().err
    code, _ = run(tmp_path, "fisher-curve", {"n_max": 20, "simulate": True})
    assert code == 2
    assert "n_max" in capsys.readouterr().err


def test_bad_json(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    assert main(["audit", "--config", str(cfg)]) == 2


def test_seed_flag_range():
    with pytest.raises(SystemExit):
        main(["audit", "--seed", str(2**64)])


def test_noise_sweep(tmp_path):
    code, out = run(tmp_path, "noise-sweep", {"D": 2, "dtGamma1": [0.0, 0.04], "dtGamma2": 0.0, "oracle": True})
    assert code == 0
    header = out.read_text().splitlines()[1]
    assert header.startswith("D,dtGamma1,dtGamma2,p_win_sim,p_win_closed,abs_diff")
    _, rows = read_rows(out)
    assert float(rows[0]["p_win_sim"]) == pytest.approx(1.0, abs=1e-12)
    assert float(rows[0]["p_win_closed"]) == 1.0
    assert float(rows[1]["p_win_closed"]) == pytest.approx(0.99, abs=1e-15)
    assert float(rows[1]["abs_diff"]) < 1e-12


def test_noise_sweep_oracle_small_rate(tmp_path):
    code, out = run(tmp_path, "noise-sweep", {"D": 3, "dtGamma1": 0.001, "dtGamma2": 0.0, "oracle": True})
    assert code == 0
    _, rows = read_rows(out)
    assert float(rows[0]["oracle_diff"]) < 1e-5


def test_fisher_curve(tmp_path):
    code, out = run(tmp_path, "fisher-curve", {"n_min": 1, "n_max": 30})
    assert code == 0
    assert out.read_text().splitlines()[1] == "n,avg_fisher,fisher_at_pi_2"
    _, rows = read_rows(out)
    assert float(rows[0]["avg_fisher"]) == pytest.approx(0.5, abs=1e-12)
    assert float(rows[-1]["avg_fisher"]) == pytest.approx(0.85, abs=0.02)
    svg = out.with_suffix(".svg").read_text()
    assert svg.startswith("<?xml") and "<polyline" in svg and svg.rstrip().endswith("</svg>")


def test_fisher_curve_with_simulation(tmp_path):
    code, _ = run(tmp_path, "fisher-curve", {"n_max": 6, "simulate": True})
    assert code == 0


def test_audit(tmp_path):
    config = {"N": [1, 3], "ancillas": ["maximal", "product"], "costs": [[5, 1023], [2, 1]]}
    code, out = run(tmp_path, "audit", config)
    assert code == 0
    assert out.read_text().splitlines()[1] == "N,D,entropy_ebits,bound_ebits,satisfied,decode_prob"
    _, rows = read_rows(out)
    assert [r["satisfied"] for r in rows] == ["true", "false", "true", "false"]
    assert float(rows[3]["decode_prob"]) == pytest.approx(0.25)
    costs = out.with_name("out_costs.csv")
    assert costs.read_text().splitlines()[1] == "M,N,gottesman,clockgame"
    _, crow = read_rows(costs)
    assert (crow[0]["gottesman"], crow[0]["clockgame"]) == ("5115", "55")


def test_stdout_output(capsys):
    assert main(["audit", "--reproducible"]) == 0
    text = capsys.readouterr().out
    assert "N,D,entropy_ebits" in text and "M,N,gottesman,clockgame" in text


def test_timestamp_only_without_reproducible(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{}")
    out = tmp_path / "o.csv"
    assert main(["audit", "--config", str(cfg), "--out", str(out)]) == 0
    assert "#timestamp=" in out.read_text().splitlines()[0]


def test_seed_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 5}))
    out = tmp_path / "o.csv"
    assert main(["audit", "--config", str(cfg), "--out", str(out), "--seed", "9", "--reproducible"]) == 0
    assert out.read_text().startswith("#seed=9,")


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    import clockgame.cli as cli

    monkeypatch.setattr(cli, "closed_form_pwin", lambda D, params: 0.0)
    code, _ = run(tmp_path, "noise-sweep", {"D": 2, "dtGamma1": 0.01})
    assert code == 3
