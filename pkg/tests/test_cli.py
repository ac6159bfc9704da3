import re

import numpy as np
import pytest

from geonoise.cli import EXIT_CONVERGENCE, EXIT_INPUT, EXIT_IO, EXIT_OK, load_config, main, parse_trajectory
from geonoise.exceptions import GeonoiseError
from geonoise.spectral import read_periodogram
from geonoise.timeseries import TimeSeries, read_timeseries, write_timeseries


def report(path):
    fields = {}
    for line in path.read_text().splitlines():
        if line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    return fields


def data_lines(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


def simulate(path, *extra):
    args = ["simulate", "--output", str(path), "--n", "300", "--noise", "fn", "--sigma", "0.5",
            "--trajectory", "poly:1", "--coefficients", "6,3", "--seed", "11", *extra]
    return main(args)


@pytest.fixture
def series(tmp_path):
    p = tmp_path / "sim.txt"
    assert simulate(p) == EXIT_OK
    return p


def test_simulate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert simulate(a) == EXIT_OK and simulate(b) == EXIT_OK
    assert data_lines(a) == data_lines(b)
    assert simulate(b, "--seed", "12") == EXIT_OK
    assert data_lines(a) != data_lines(b)


def test_simulate_round_trip(series):
    ts = read_timeseries(series)
    assert len(ts) == 300
    for line, v in zip(data_lines(series), ts.values):
        assert float(line.split()[1]) == v
        assert line.split()[1] == f"{v:.17g}"


def test_header_carries_resolved_config(series):
    header = series.read_text().split("\n")[:40]
    assert "# command: simulate" in header
    assert "# config.seed: 11" in header
    assert "# config.noise: fn" in header
    assert "# config.xatol: 0.01" in header


def test_output_regenerates_from_its_header(series, tmp_path):
    again = tmp_path / "again.txt"
    assert main(["simulate", "--config", str(series), "--output", str(again)]) == EXIT_OK
    assert data_lines(again) == data_lines(series)


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nnoise = wn\nsigma = 2.0\nn = 50\nseed = 3\ntrajectory = poly:0\n")
    out = tmp_path / "a.txt"
    assert main(["simulate", "--config", str(cfg), "--output", str(out), "--seed", "4"]) == EXIT_OK
    values = load_config(out)
    assert values["seed"] == 4 and values["sigma"] == 2.0 and values["noise"] == "wn"
    assert len(read_timeseries(out)) == 50


def test_bad_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = red\n")
    assert main(["simulate", "--config", str(cfg), "--output", str(tmp_path / "x")]) == EXIT_INPUT


def test_white_fit_report(series, tmp_path):
    out = tmp_path / "fit.txt"
    assert main(["fit", "--input", str(series), "--output", str(out), "--noise", "wn",
                 "--trajectory", "poly:1"]) == EXIT_OK
    text = out.read_text()
    assert re.search(r"^intercept = -?\d+\.\d+ \+/- \d+\.\d+ mm$", text, re.M)
    assert re.search(r"^trend = -?\d+\.\d+ \+/- \d+\.\d+ mm/yr$", text, re.M)
    fields = report(out)
    assert fields["noise_model"] == "wn" and fields["converged"] == "true"
    assert float(fields["ln_L"]) < 0
    assert "runtime_s" in fields and "sigma" in fields
    assert "# config.command" not in text and "# command: fit" in text


def test_fixed_noise_fit_makes_no_evaluations(series, tmp_path):
    out = tmp_path / "fit.txt"
    assert main(["fit", "--input", str(series), "--output", str(out), "--noise", "fn",
                 "--sigma", "0.5", "--fix", "sigma", "--trajectory", "poly:1"]) == EXIT_OK
    fields = report(out)
    assert fields["n_evaluations"] == "0"
    assert fields["sigma"] == "0.5 mm"


def test_periodic_report_fields(tmp_path):
    p = tmp_path / "s.txt"
    assert main(["simulate", "--output", str(p), "--n", "800", "--noise", "wn", "--sigma", "0.1",
                 "--coefficients", "1,0,0,2,0,0", "--seed", "1"]) == EXIT_OK
    out = tmp_path / "fit.txt"
    assert main(["fit", "--input", str(p), "--output", str(out), "--noise", "wn"]) == EXIT_OK
    fields = report(out)
    amp = float(fields["amplitude[1]"].split()[0])
    phase = float(fields["phase[1]"].split()[0])
    assert amp == pytest.approx(2.0, abs=0.02)
    assert phase == pytest.approx(np.pi / 2, abs=0.02)


def test_plwn_report_has_scaled_amplitudes(series, tmp_path):
    out = tmp_path / "fit.txt"
    assert main(["fit", "--input", str(series), "--output", str(out), "--noise", "plwn",
                 "--trajectory", "poly:1"]) == EXIT_OK
    fields = report(out)
    for key in ("kappa", "phi_mix", "sigma_pl", "sigma_w"):
        assert key in fields


def test_rank_deficient_trajectory_exit_code(series, tmp_path, capsys):
    code = main(["fit", "--input", str(series), "--output", str(tmp_path / "f.txt"), "--noise", "wn",
                 "--trajectory", "poly:1,offset:50000"])
    assert code == EXIT_INPUT
    assert "rank deficient" in capsys.readouterr().err


def test_convergence_warning_exit_code(series, tmp_path):
    out = tmp_path / "f.txt"
    code = main(["fit", "--input", str(series), "--output", str(out), "--noise", "plwn",
                 "--trajectory", "poly:1", "--max-iter", "2"])
    assert code == EXIT_CONVERGENCE
    assert report(out)["converged"] == "false"


def test_io_error_exit_code(tmp_path):
    assert main(["fit", "--input", str(tmp_path / "missing.txt"), "--output", str(tmp_path / "f")]) == EXIT_IO
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg"), "--output", "x"]) == EXIT_IO


def test_malformed_input_exit_code(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("55000 1\n54999 2\n")
    assert main(["fit", "--input", str(p), "--output", str(tmp_path / "f")]) == EXIT_INPUT


def test_fit_directory_with_worker_pool(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    for seed in range(3):
        assert simulate(src / f"s{seed}.txt", "--seed", str(seed), "--noise", "wn") == EXIT_OK
    out = tmp_path / "out"
    assert main(["fit", "--input", str(src), "--output", str(out), "--noise", "wn",
                 "--trajectory", "poly:1", "--jobs", "2"]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["s0.fit", "s1.fit", "s2.fit"]
    serial = tmp_path / "serial"
    assert main(["fit", "--input", str(src), "--output", str(serial), "--noise", "wn",
                 "--trajectory", "poly:1", "--jobs", "1"]) == EXIT_OK
    for name in ("s0.fit", "s1.fit", "s2.fit"):
        strip = [k for k in report(out / name) if k != "runtime_s"]
        assert {k: report(out / name)[k] for k in strip} == {k: report(serial / name)[k] for k in strip}


def test_spectrum_of_constant_is_dc_only(tmp_path):
    p = tmp_path / "c.txt"
    write_timeseries(TimeSeries.daily(np.full(128, 2.5)), p)
    out = tmp_path / "c.psd"
    assert main(["spectrum", "--input", str(p), "--output", str(out), "--no-detrend",
                 "--method", "raw"]) == EXIT_OK
    pg = read_periodogram(out)
    assert pg.power[0] > 0
    assert np.all(np.abs(pg.power[1:]) <= 1e-12)
    assert "# config.detrend: false" in out.read_text()


def test_spectrum_welch_of_flicker(tmp_path):
    p = tmp_path / "f.txt"
    assert main(["simulate", "--output", str(p), "--n", "4096", "--noise", "fn", "--trajectory", "poly:1",
                 "--coefficients", "5,2"]) == EXIT_OK
    out = tmp_path / "f.psd"
    assert main(["spectrum", "--input", str(p), "--output", str(out), "--segments", "4",
                 "--window", "hann", "--overlap", "0.5"]) == EXIT_OK
    text = out.read_text()
    kappa = float(re.search(r"^# fit.kappa: (\S+)$", text, re.M).group(1))
    assert -1.4 < kappa < -0.6
    pg = read_periodogram(out)
    assert pg.fs == pytest.approx(365.25) and pg.window == "hann"


def test_benchmark_writes_dataset(tmp_path):
    out = tmp_path / "bsg"
    assert main(["benchmark", "--output", str(out), "--seed", "2"]) == EXIT_OK
    files = list(out.iterdir())
    assert len(files) == 61
    assert (out / "truth.txt").exists()


def test_fixed_true_parameters_give_consistent_residual_sigma(tmp_path):
    ratios = []
    for seed in range(10):
        p = tmp_path / f"s{seed}.txt"
        assert main(["simulate", "--output", str(p), "--n", "400", "--noise", "plwn", "--sigma", "1.4",
                     "--phi-mix", "0.6", "--coefficients", "1,2,0.5,0.5,0.1,0.1", "--seed", str(seed)]) == EXIT_OK
        out = tmp_path / f"s{seed}.fit"
        assert main(["fit", "--input", str(p), "--output", str(out), "--noise", "plwn", "--sigma", "1.4",
                     "--phi-mix", "0.6", "--kappa", "-1", "--fix", "sigma,kappa,phi_mix"]) == EXIT_OK
        ratios.append(float(report(out)["residual_sigma"].split()[0]) / 1.4)
    assert abs(np.mean(ratios) - 1) <= 0.10


def test_parse_trajectory():
    spec = parse_trajectory("poly:2,periodic:1,offset:51910.25", 2000.0)
    assert spec.labels == ["intercept", "trend", "poly2", "cos[1]", "sin[1]", "offset[2001.001369]"]
    with pytest.raises(GeonoiseError):
        parse_trajectory("spline:3", 0.0)
    with pytest.raises(GeonoiseError):
        parse_trajectory("periodic:x", 0.0)
