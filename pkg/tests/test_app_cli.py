import math
from pathlib import Path

import pandas as pd
import pytest

from backend.app import BOB_COLUMNS, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, SIMULATE_COLUMNS, WILLIE_COLUMNS, main


DATA_DIR = Path(__file__).parent / "data"


def _config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _bound_values(output):
    values = {}
    for line in output.strip().splitlines():
        key, raw = line.split("=", 1)
        values[key] = raw
    return values


SMALL_CAREFUL = """
# small careful sweep
regime = careful
n = 3200, 6400
trials = 40
seed = 1
"""


def test_simulate_writes_csv(tmp_path):
    cfg = _config(tmp_path, SMALL_CAREFUL)
    out = tmp_path / "sim.csv"
    assert main(["-q", "simulate", "--config", cfg, "--out", str(out), "--workers", "1"]) == EXIT_OK
    frame = pd.read_csv(out)
    assert list(frame.columns) == SIMULATE_COLUMNS
    assert list(frame["n"]) == [3200, 6400]
    assert frame["pe_hat"].between(0.0, 0.5).all()
    assert (frame["m"] == 40).all()
    assert frame["zeta"].iloc[0] == pytest.approx(0.25 * math.sqrt(32 / 3200))


def test_simulate_is_reproducible(tmp_path):
    cfg = _config(tmp_path, SMALL_CAREFUL)
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (first, second):
        assert main(["-q", "simulate", "--config", cfg, "--seed", "7", "--out", str(out), "--workers", "1"]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert first.read_text().splitlines()[0] == ",".join(SIMULATE_COLUMNS)


def test_simulate_matches_golden_csv(tmp_path):
    out = tmp_path / "golden.csv"
    cfg = str(DATA_DIR / "golden_simulate.cfg")
    assert main(["-q", "simulate", "--config", cfg, "--out", str(out), "--workers", "1"]) == EXIT_OK
    assert out.read_bytes() == (DATA_DIR / "golden_simulate.csv").read_bytes()


def test_simulate_to_stdout(tmp_path, capsys):
    cfg = _config(tmp_path, SMALL_CAREFUL)
    assert main(["-q", "simulate", "--config", cfg, "--trials", "10", "--workers", "1"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == ",".join(SIMULATE_COLUMNS)
    assert len(lines) == 3


def test_frame_size_must_divide_block_length(tmp_path, capsys):
    cfg = _config(tmp_path, "regime = careful\nn = 1000\ntrials = 10\n")
    assert main(["simulate", "--config", cfg, "--workers", "1"]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "n=1000" in err and "Q=32" in err


def test_empty_sweep_is_a_config_error(tmp_path, capsys):
    cfg = _config(tmp_path, "regime = careful\ntrials = 10\n")
    assert main(["simulate", "--config", cfg, "--workers", "1"]) == EXIT_CONFIG
    assert "EMPTY_SWEEP" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    cfg = _config(tmp_path, "regime = careful\nn = 3200\nbandwidth = 3\n")
    assert main(["simulate", "--config", cfg]) == EXIT_CONFIG
    assert "bandwidth" in capsys.readouterr().err


def test_unknown_regime(tmp_path):
    cfg = _config(tmp_path, SMALL_CAREFUL)
    assert main(["simulate", "--config", cfg, "--regimes", "reckless", "--workers", "1"]) == EXIT_CONFIG


def test_zero_dark_clicks_with_llr_is_a_config_error(tmp_path, capsys):
    cfg = _config(tmp_path, "regime = explicit\nzeta = 0.1\nn = 3200\ntrials = 10\np_D_w = 0\n")
    assert main(["simulate", "--config", cfg, "--workers", "1"]) == EXIT_CONFIG
    assert "ZERO_DARK_CLICKS" in capsys.readouterr().err


def test_degenerate_bound_is_a_runtime_error(capsys):
    assert main(["bounds", "ook_kl", "q=0.1", "s_w=0.1", "p_D_w=0", "lambda_w=0"]) == EXIT_RUNTIME
    assert "ZERO_DARK_COUNT_RATE" in capsys.readouterr().err


def test_bitfile_and_trial_records(tmp_path):
    cfg = _config(tmp_path, SMALL_CAREFUL)
    bitfile, trials = tmp_path / "tx.bin", tmp_path / "trials.csv"
    code = main([
        "-q", "simulate", "--config", cfg, "--trials", "5", "--workers", "1",
        "--out", str(tmp_path / "sim.csv"), "--bitfile", str(bitfile), "--trials-csv", str(trials),
    ])
    assert code == EXIT_OK
    # first sweep point, n = 3200, followed by an equal stretch of silence
    assert len(bitfile.read_bytes()) == 2 * 3200 // 8
    records = pd.read_csv(trials)
    assert len(records) == 10
    assert {"n", "regime", "trial", "llr_h0", "llr_h1"} <= set(records.columns)


def test_figure_data_willie(tmp_path):
    cfg = _config(tmp_path, "n = 3200\ntrials = 50\nseed = 3\n")
    out, script = tmp_path / "willie.csv", tmp_path / "willie.gp"
    code = main([
        "-q", "figure-data", "willie", "--config", cfg, "--out", str(out),
        "--plot-script", str(script), "--workers", "1",
    ])
    assert code == EXIT_OK
    frame = pd.read_csv(out)
    assert list(frame.columns) == WILLIE_COLUMNS
    assert set(frame["regime"]) == {"careful", "careless", "fixed-0.003", "fixed-0.008"}
    assert frame["pe_hat"].between(0.0, 0.5).all() and frame["pe_mc"].between(0.0, 0.5).all()
    assert frame["xi_exp"].iloc[0] == pytest.approx(0.1358, abs=5e-4)
    text = script.read_text()
    assert "plot" in text and str(out) in text and "yerrorlines" in text


def test_figure_data_bob(tmp_path):
    cfg = _config(tmp_path, "regime = explicit\nzeta = 0.3\nn = 9920, 19840\ntrials = 20\n")
    out = tmp_path / "bob.csv"
    assert main(["-q", "figure-data", "bob", "--config", cfg, "--out", str(out), "--workers", "1"]) == EXIT_OK
    frame = pd.read_csv(out)
    assert list(frame.columns) == BOB_COLUMNS
    assert (frame["bits_mean"] <= frame["max_throughput"]).all()
    assert (frame["bits_mean"] > 0).all()


def test_capacity_report(tmp_path):
    cfg = _config(tmp_path, "regime = careful\nn = 32000, 128000\n")
    out = tmp_path / "capacity.csv"
    assert main(["-q", "capacity", "--config", cfg, "--out", str(out)]) == EXIT_OK
    frame = pd.read_csv(out)
    assert list(frame["n"]) == [32000, 128000]
    expected = frame["capacity_bits"] * frame["zeta"] * frame["n"] / frame["Q"]
    assert frame["max_throughput"].to_numpy() == pytest.approx(expected.to_numpy())
    assert (frame["capacity_bits"] <= 5.0).all()


def test_unknown_bound_lists_names(capsys):
    assert main(["bounds", "wishful_thinking"]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "UNKNOWN_BOUND" in err and "qre_thermal" in err and "ppm_kl" in err


def test_bound_missing_input(capsys):
    assert main(["bounds", "ook_kl"]) == EXIT_CONFIG
    assert "MISSING_KEY" in capsys.readouterr().err


def test_bound_qre_thermal(capsys):
    assert main(["-q", "bounds", "qre_thermal", "nbar0=0", "nbar1=1.71828"]) == EXIT_OK
    values = _bound_values(capsys.readouterr().out)
    assert float(values["qre_thermal"]) == pytest.approx(1.0, abs=1e-5)


def test_bound_covert_nbar_hits_target(capsys):
    assert main(["-q", "bounds", "covert_nbar", "nbar_T=0.1", "n=1000000"]) == EXIT_OK
    values = _bound_values(capsys.readouterr().out)
    assert float(values["thermal_willie_bound"]) == pytest.approx(0.45, abs=1e-9)
    assert float(values["covert_nbar"]) > 0


def test_bound_ppm_kl_exact_and_sampled(capsys):
    code = main([
        "-q", "bounds", "ppm_kl", "Q=2", "K=30", "zeta=0.05", "s_w=0.2", "lambda_w=0.1", "samples=200000",
    ])
    assert code == EXIT_OK
    values = _bound_values(capsys.readouterr().out)
    exact, mc, stderr = (float(values[k]) for k in ("ppm_kl.exact", "ppm_kl.mc", "ppm_kl.mc_stderr"))
    assert int(values["ppm_kl.cutoff_K"]) == 30
    assert exact > 0 and stderr > 0
    assert abs(exact - mc) <= 5 * stderr + 1e-9


def test_bound_dkw(capsys):
    assert main(["-q", "bounds", "dkw_halfwidth", "m=100"]) == EXIT_OK
    assert float(_bound_values(capsys.readouterr().out)["dkw_halfwidth"]) == pytest.approx(0.1358, abs=5e-4)


def test_bound_rejects_non_numeric(capsys):
    assert main(["bounds", "qre_thermal", "nbar0=lots", "nbar1=1"]) == EXIT_CONFIG
    assert "BAD_VALUE" in capsys.readouterr().err
