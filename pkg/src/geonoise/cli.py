"""Command-line interface: ``geonoise {simulate,fit,spectrum,benchmark}``.

Options come from built-in defaults, then an optional ``key = value`` config
file (``--config``), then command-line flags; later sources win. Every
output file starts with ``# config.<key>: <value>`` lines holding the fully
resolved configuration, and such a file is itself accepted by ``--config``.

Exit codes: 0 success, 2 convergence warning, 3 input or specification
error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .covariance import ToeplitzFactor, build_covariance, cholesky, toeplitz_covariance
from .estimator import MinimizerOptions, fit_arrays, sigma_from_residuals
from .exceptions import ConvergenceWarning, GeonoiseError
from .noise_kernel import FREE_PARAMETERS, NoiseKind, NoiseModelSpec
from .spectral import fit_power_law_psd, periodogram, welch
from .synthesis import SynthesisRecipe, generate_bsg, scale_amplitude, synthesize
from .timeseries import atomic_write, format_timeseries, mjd_to_year, read_timeseries
from .trajectory import (
    Offset,
    Periodic,
    Polynomial,
    TrajectoryModelSpec,
    amp_phase,
    build_design_matrix,
)

logger = logging.getLogger("geonoise")

EXIT_OK = 0
EXIT_CONVERGENCE = 2
EXIT_INPUT = 3
EXIT_IO = 4


@dataclass
class RunConfig:
    """Fully resolved options of one run."""

    command: str = ""
    input: str = ""
    output: str = ""
    seed: int = 0
    n: int = 500
    noise: str = "plwn"
    sigma: float = 1.0
    kappa: float = -1.0
    kappa2: float = -1.0
    phi: float = 0.9
    phi_mix: float = 0.5
    fix: str = ""
    xatol: float = 0.01
    max_iter: int = 1000
    toeplitz: bool = False
    trajectory: str = "poly:1,periodic:1,periodic:0.5"
    coefficients: str = ""
    start_mjd: float = 51544.0
    sampling_period: float = 1.0
    method: str = "welch"
    segments: int = 4
    window: str = "hann"
    overlap: float = 0.5
    detrend: bool = True
    jobs: int = 0

    def header(self):
        items = [("command", self.command)]
        for f in fields(self):
            if f.name == "command":
                continue
            value = getattr(self, f.name)
            if isinstance(value, float):
                value = f"{value:.17g}"
            elif isinstance(value, bool):
                value = "true" if value else "false"
            items.append((f"config.{f.name}", value))
        return items


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, value):
    kind = _TYPES[key]
    if kind == "bool":
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise GeonoiseError(f"{key}: expected a boolean, got {value!r}")
    try:
        return {"int": int, "float": float}.get(kind, str)(value)
    except ValueError:
        raise GeonoiseError(f"{key}: cannot interpret {value!r}") from None


def load_config(path):
    """Read ``key = value`` lines, or the ``# config.key: value`` header of an output file."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line.startswith("# config."):
                key, _, value = line[len("# config.") :].partition(":")
            elif not line or line.startswith("#"):
                continue
            elif "=" in line:
                key, _, value = line.partition("=")
            else:
                if values:
                    break  # data section of an output file
                raise GeonoiseError(f"{path}:{lineno}: expected 'key = value'")
            key = key.strip().replace("-", "_")
            if key not in _TYPES:
                raise GeonoiseError(f"{path}:{lineno}: unknown option {key!r}")
            values[key] = _coerce(key, value.strip())
    return values


def resolve_config(command, args):
    values = {}
    if getattr(args, "config", None):
        values.update(load_config(args.config))
    for key in _TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _coerce(key, flag)
    values["command"] = command
    return RunConfig(**values)


# --- model construction -----------------------------------------------------


def parse_trajectory(text, reference_epoch):
    """Parse ``poly:1,periodic:1,periodic:0.5,offset:55500`` into a model.

    Periods are in years, offset epochs in MJD.
    """
    terms = []
    for token in filter(None, (t.strip() for t in text.split(","))):
        name, _, arg = token.partition(":")
        try:
            if name == "poly":
                terms.append(Polynomial(int(arg or 1)))
            elif name == "periodic":
                terms.append(Periodic(2.0 * math.pi / float(arg)))
            elif name == "offset":
                terms.append(Offset(float(mjd_to_year(float(arg)))))
            else:
                raise GeonoiseError(f"unknown trajectory term {token!r}")
        except ValueError as exc:
            raise GeonoiseError(f"bad trajectory term {token!r}: {exc}") from None
    return TrajectoryModelSpec(tuple(terms), reference_epoch)


def noise_spec(cfg: RunConfig, estimate: bool):
    """Noise model from the config; with ``estimate`` all unfixed parameters are free."""
    try:
        kind = NoiseKind(cfg.noise)
    except ValueError:
        raise GeonoiseError(f"unknown noise model {cfg.noise!r}") from None
    if kind == NoiseKind.SUM:
        raise GeonoiseError("sum models cannot be selected from the command line")
    kwargs = {"sigma": cfg.sigma}
    if kind in (NoiseKind.POWERLAW, NoiseKind.GGM, NoiseKind.FIGGM, NoiseKind.PLWN):
        kwargs["kappa"] = cfg.kappa
    if kind in (NoiseKind.GGM, NoiseKind.FIGGM):
        kwargs["phi"] = cfg.phi
    if kind == NoiseKind.FIGGM:
        kwargs["kappa2"] = cfg.kappa2
    if kind == NoiseKind.PLWN:
        kwargs["phi_mix"] = cfg.phi_mix
    spec = NoiseModelSpec(kind, **kwargs)
    if estimate:
        fixed = {f.strip() for f in cfg.fix.split(",") if f.strip()}
        unknown = fixed - set(FREE_PARAMETERS[kind])
        if unknown:
            raise GeonoiseError(f"{kind.value} model has no parameter(s) {sorted(unknown)}")
        free = [p for p in FREE_PARAMETERS[kind] if p not in fixed]
        if free:
            spec = spec.with_free(*free)
    return spec


# --- commands ---------------------------------------------------------------


def cmd_simulate(cfg: RunConfig):
    """Write one synthetic series described entirely by ``cfg``."""
    if not cfg.output:
        raise GeonoiseError("simulate needs --output")
    t0 = float(mjd_to_year(cfg.start_mjd))
    traj = parse_trajectory(cfg.trajectory, t0)
    coeffs = [float(c) for c in cfg.coefficients.split(",") if c.strip()]
    if not coeffs:
        coeffs = [0.0] * traj.n_columns
    if len(coeffs) != traj.n_columns:
        raise GeonoiseError(f"trajectory has {traj.n_columns} columns but {len(coeffs)} coefficients were given")
    recipe = SynthesisRecipe(traj, tuple(coeffs), noise_spec(cfg, False), cfg.n, cfg.seed,
                             cfg.sampling_period, cfg.start_mjd)
    ts = synthesize(recipe)
    header = cfg.header() + [("sampling_period", f"{cfg.sampling_period:.17g}")]
    atomic_write(cfg.output, format_timeseries(ts, header))
    return EXIT_OK


def _units(power, base="mm"):
    if power == 0:
        return base
    return f"{base}/yr" if power == 1 else f"{base}/yr^{power}"


def _residual_sigma(noise, residuals, toeplitz):
    """Amplitude implied by the residuals under the unit-amplitude noise model."""
    n = residuals.size
    if noise.kind != NoiseKind.SUM:
        noise = noise.replace(sigma=1.0)
    if toeplitz:
        factor = ToeplitzFactor(toeplitz_covariance(noise, n).first_row)
    else:
        factor = cholesky(build_covariance(noise, n))
    return sigma_from_residuals(factor, residuals)


def fit_report(cfg: RunConfig, path):
    """Fit one series and return ``(report text, exit code)``."""
    ts = read_timeseries(path)
    unit = ts.metadata.get("units", "mm")
    traj = parse_trajectory(cfg.trajectory, float(ts.years[0]))
    family = noise_spec(cfg, True)
    opts = MinimizerOptions(xatol=cfg.xatol, max_iter=cfg.max_iter)
    started = time.perf_counter()
    A = build_design_matrix(traj, ts.years)
    with warnings.catch_warnings():
        # surfaced through the report and the exit code instead
        warnings.simplefilter("ignore", ConvergenceWarning)
        result = fit_arrays(A, ts.values, family, opts, toeplitz=cfg.toeplitz)
    runtime = time.perf_counter() - started

    noise = result.noise
    lines = [
        f"series = {Path(path).stem}",
        f"noise_model = {noise.kind.value}",
        f"converged = {'true' if result.converged else 'false'}",
        f"at_boundary = {'true' if result.at_boundary else 'false'}",
        f"n_obs = {len(ts)}",
        f"ln_L = {result.ln_L:.10g}",
        f"sigma = {noise.sigma:.6g} {unit}",
    ]
    if "sigma" not in family.free:
        lines.append(f"residual_sigma = {_residual_sigma(noise, result.residuals, cfg.toeplitz):.6g} {unit}")
    if noise.kind != NoiseKind.WHITE:
        lines.append(f"kappa = {noise.kappa:.6g}")
    if noise.kind == NoiseKind.FIGGM:
        lines.append(f"kappa2 = {noise.kappa2:.6g}")
    if noise.kind in (NoiseKind.GGM, NoiseKind.FIGGM):
        lines.append(f"phi = {noise.phi:.6g}")
    if noise.kind == NoiseKind.PLWN:
        sigma_pl, sigma_w = scale_amplitude(noise.sigma, noise.phi_mix, noise.kappa, ts.dt_years)
        lines += [
            f"phi_mix = {noise.phi_mix:.6g}",
            f"sigma_pl = {sigma_pl:.6g} {unit}/yr^{-noise.kappa / 4:.4g}",
            f"sigma_w = {sigma_w:.6g} {unit}",
        ]
    for term in traj.terms:
        labels = term.labels()
        est = [result.parameter(label) for label in labels]
        if isinstance(term, Polynomial):
            for p, (label, (x, s)) in enumerate(zip(labels, est)):
                lines.append(f"{label} = {x:.6f} +/- {s:.6f} {_units(p, unit)}")
        elif isinstance(term, Periodic):
            (c, sc), (s, ss) = est
            amp, phase = amp_phase(c, s)
            tag = f"{term.period:.6g}"
            lines += [
                f"{labels[0]} = {c:.6f} +/- {sc:.6f} {unit}",
                f"{labels[1]} = {s:.6f} +/- {ss:.6f} {unit}",
                f"amplitude[{tag}] = {amp:.6f} {unit}",
                f"phase[{tag}] = {phase:.6f} rad",
            ]
        else:
            x, s = est[0]
            lines.append(f"{labels[0]} = {x:.6f} +/- {s:.6f} {unit}")
    lines += [
        f"n_evaluations = {result.n_evaluations}",
        f"runtime_s = {runtime:.3f}",
    ]
    header = cfg.header() + [("source", str(path))]
    text = "".join(f"# {k}: {v}\n" for k, v in header) + "\n".join(lines) + "\n"
    return text, (EXIT_OK if result.converged else EXIT_CONVERGENCE)


def _fit_one(cfg, src, dst):
    try:
        text, code = fit_report(cfg, src)
    except GeonoiseError as exc:
        return f"{src}: {exc}", EXIT_INPUT
    except OSError as exc:
        return f"{src}: {exc}", EXIT_IO
    try:
        atomic_write(dst, text)
    except OSError as exc:
        return f"{dst}: {exc}", EXIT_IO
    return None, code


def _series_files(directory):
    return sorted(p for p in Path(directory).glob("*.txt") if p.name != "truth.txt")


def cmd_fit(cfg: RunConfig):
    """Fit a file, or every ``*.txt`` series in a directory in parallel."""
    if not cfg.input or not cfg.output:
        raise GeonoiseError("fit needs --input and --output")
    src = Path(cfg.input)
    if src.is_dir():
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        jobs = [(cfg, p, out / f"{p.stem}.fit") for p in _series_files(src)]
    else:
        if not src.exists():
            raise FileNotFoundError(f"{src}: no such file")
        jobs = [(cfg, src, Path(cfg.output))]
    workers = cfg.jobs or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            outcomes = list(pool.map(_fit_one, *zip(*jobs)))
    else:
        outcomes = [_fit_one(*job) for job in jobs]
    code = EXIT_OK
    for message, status in outcomes:
        if message:
            print(f"error: {message}", file=sys.stderr)
        code = max(code, status)
    return code


def cmd_spectrum(cfg: RunConfig):
    """Periodogram (raw or Welch) of a series in cycles per year."""
    if not cfg.input or not cfg.output:
        raise GeonoiseError("spectrum needs --input and --output")
    ts = read_timeseries(cfg.input)
    values = ts.values
    if cfg.detrend:
        traj = parse_trajectory(cfg.trajectory, float(ts.years[0]))
        A = build_design_matrix(traj, ts.years).A
        x, *_ = np.linalg.lstsq(A, values, rcond=None)
        values = values - A @ x
    fs = ts.fs_per_year
    if cfg.method == "raw":
        pg = periodogram(values, fs)
    elif cfg.method == "welch":
        pg = welch(values, fs, overlap_fraction=cfg.overlap, window=cfg.window, segments=cfg.segments)
    else:
        raise GeonoiseError(f"unknown spectrum method {cfg.method!r}")
    extra = cfg.header() + [("frequency_unit", "cycles/yr")]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        try:
            p0, kappa = fit_power_law_psd(pg)
            extra += [("fit.P0", f"{p0:.17g}"), ("fit.kappa", f"{kappa:.17g}")]
        except GeonoiseError as exc:
            extra.append(("fit.skipped", str(exc)))
    for w in caught:
        logger.info("power-law fit: %s", w.message)
    pg.write(cfg.output, extra)
    return EXIT_OK


def cmd_benchmark(cfg: RunConfig):
    """Write the 60-series BSG dataset and its truth manifest."""
    if not cfg.output:
        raise GeonoiseError("benchmark needs --output")
    generate_bsg(cfg.output, cfg.seed)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "spectrum": cmd_spectrum,
    "benchmark": cmd_benchmark,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="geonoise", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value file or a previous output file")
        p.add_argument("--input")
        p.add_argument("--output")
        p.add_argument("--seed", type=int)
        p.add_argument("--trajectory", help="e.g. poly:1,periodic:1,periodic:0.5,offset:55500")

    def noise(p):
        p.add_argument("--noise", choices=[k.value for k in NoiseKind if k != NoiseKind.SUM])
        p.add_argument("--sigma", type=float)
        p.add_argument("--kappa", type=float)
        p.add_argument("--kappa2", type=float)
        p.add_argument("--phi", type=float)
        p.add_argument("--phi-mix", dest="phi_mix", type=float)

    p = sub.add_parser("simulate", help="generate a synthetic series")
    common(p)
    noise(p)
    p.add_argument("--n", type=int)
    p.add_argument("--coefficients", help="comma-separated trajectory coefficients")
    p.add_argument("--start-mjd", dest="start_mjd", type=float)
    p.add_argument("--sampling-period", dest="sampling_period", type=float, help="days")

    p = sub.add_parser("fit", help="maximum likelihood fit of trajectory and noise")
    common(p)
    noise(p)
    p.add_argument("--fix", help="comma-separated noise parameters held at their given values")
    p.add_argument("--xatol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--toeplitz", action="store_const", const=True, default=None)
    p.add_argument("--jobs", type=int)

    p = sub.add_parser("spectrum", help="periodogram of a series")
    common(p)
    p.add_argument("--method", choices=["raw", "welch"])
    p.add_argument("--segments", type=int)
    p.add_argument("--window", choices=["hann", "rectangular", "hamming", "blackman"])
    p.add_argument("--overlap", type=float)
    p.add_argument("--detrend", dest="detrend", action="store_const", const=True, default=None)
    p.add_argument("--no-detrend", dest="detrend", action="store_const", const=False)

    p = sub.add_parser("benchmark", help="write the BSG dataset")
    common(p)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except GeonoiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
