"""Synthetic coloured noise, synthetic trajectories and the BSG benchmark set.

Random numbers come from numpy's PCG64 bit generator; Gaussian deviates use
its ziggurat ``standard_normal``. Seeds may be integers, ``SeedSequence``
objects or ready ``Generator`` instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .exceptions import DomainError, EmptyRequestError
from .noise_kernel import FilterCoefficients, NoiseKind, NoiseModelSpec, filter_coefficients, pl_filter_coeffs
from .timeseries import TimeSeries, atomic_write, format_timeseries
from .trajectory import TrajectoryModelSpec, build_design_matrix, standard_model

__all__ = [
    "make_rng",
    "generate_colored_noise",
    "mix_flicker_white",
    "synthesize_noise",
    "scale_amplitude",
    "SynthesisRecipe",
    "synthesize",
    "generate_bsg",
    "BSG_STATIONS",
    "BSG_COMPONENTS",
    "BSG_LENGTH",
    "BSG_NOISE",
]


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator from an int, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def _filter(h, v):
    """Causal convolution of ``v`` with ``h`` via FFTs zero-padded to ``2n``."""
    n = v.size
    nfft = 2 * n
    w = np.fft.irfft(np.fft.rfft(h[:n], nfft) * np.fft.rfft(v, nfft), nfft)
    return w[:n]


def generate_colored_noise(coeffs, sigma: float, n: int, seed) -> NDArray[np.float64]:
    """Filter ``n`` Gaussian deviates of standard deviation ``sigma`` with ``coeffs``.

    Both the deviates and the taps are zero-padded to length ``2n`` so that
    the circular FFT product equals the causal convolution
    ``w_i = sum_{j<=i} h_{i-j} v_j``.

    Parameters
    ----------
    coeffs : FilterCoefficients or array_like
        At least ``n`` filter taps.
    sigma : float
        Standard deviation of the driving white noise.
    n : int
        Length of the output.
    seed : int, SeedSequence or Generator

    Returns
    -------
    ndarray, shape (n,)
    """
    if n < 1:
        raise EmptyRequestError(f"cannot generate {n} samples")
    h = np.asarray(coeffs.h if isinstance(coeffs, FilterCoefficients) else coeffs, dtype=float)
    if h.size < n:
        raise DomainError(f"need at least {n} filter taps, got {h.size}")
    v = sigma * make_rng(seed).standard_normal(n)
    return _filter(h, v)


def mix_flicker_white(sigma, phi_mix, n, seed, kappa=-1.0) -> NDArray[np.float64]:
    """Sum of power-law and white noise, ``sigma (sqrt(phi) F v + sqrt(1-phi) u)``.

    ``F`` is the power-law filter (flicker by default); ``v`` and ``u`` are
    independent unit Gaussian streams drawn in that order from one
    generator.
    """
    if not 0.0 <= phi_mix <= 1.0:
        raise DomainError(f"phi_mix={phi_mix} outside [0, 1]")
    if n < 1:
        raise EmptyRequestError(f"cannot generate {n} samples")
    rng = make_rng(seed)
    coloured = generate_colored_noise(pl_filter_coeffs(kappa, n), 1.0, n, rng)
    white = rng.standard_normal(n)
    return sigma * (math.sqrt(phi_mix) * coloured + math.sqrt(1.0 - phi_mix) * white)


def synthesize_noise(spec: NoiseModelSpec, n: int, seed) -> NDArray[np.float64]:
    """Draw one realisation of any noise model."""
    rng = make_rng(seed)
    if spec.kind == NoiseKind.PLWN:
        return mix_flicker_white(spec.sigma, spec.phi_mix, n, rng, kappa=spec.kappa)
    if spec.kind == NoiseKind.SUM:
        return sum(synthesize_noise(c, n, rng) for c in spec.components)
    return generate_colored_noise(filter_coefficients(spec, n), spec.sigma, n, rng)


def scale_amplitude(sigma, phi_mix, kappa, dt):
    """Convert a PLWN amplitude to conventional power-law and white amplitudes.

    The power-law amplitude is expressed per ``yr**(-kappa/4)``:
    ``sigma_pl = sigma sqrt(phi) / dt**(-kappa/4)`` with ``dt`` the sampling
    period in years, and ``sigma_w = sigma sqrt(1 - phi)``.

    Examples
    --------
    >>> sp, sw = scale_amplitude(4.8, 0.7, -1.0, 1 / 365.25)
    >>> round(sp, 1), round(sw, 1)
    (17.6, 2.6)
    """
    if not dt > 0:
        raise DomainError(f"sampling period must be positive, got {dt}")
    sigma_pl = sigma * math.sqrt(phi_mix) / dt ** (-kappa / 4.0)
    sigma_w = sigma * math.sqrt(1.0 - phi_mix)
    return sigma_pl, sigma_w


@dataclass(frozen=True)
class SynthesisRecipe:
    """Everything needed to regenerate a synthetic series.

    ``coefficients`` are the trajectory parameters in design-matrix column
    order; epochs are ``start_mjd + k * sampling_period``.
    """

    trajectory: TrajectoryModelSpec
    coefficients: tuple[float, ...]
    noise: NoiseModelSpec
    n: int
    seed: int
    sampling_period: float = 1.0
    start_mjd: float = 51544.0


def synthesize(recipe: SynthesisRecipe, metadata=None) -> TimeSeries:
    """Trajectory plus noise for ``recipe``; identical recipes give identical series."""
    mjd = recipe.start_mjd + recipe.sampling_period * np.arange(recipe.n, dtype=float)
    ts = TimeSeries(mjd, np.zeros(recipe.n), recipe.sampling_period, dict(metadata or {}))
    A = build_design_matrix(recipe.trajectory, ts.years).A
    signal = A @ np.asarray(recipe.coefficients, dtype=float)
    noise = synthesize_noise(recipe.noise, recipe.n, recipe.seed)
    return ts.with_values(signal + noise)


# --- Benchmark Synthetic GNSS dataset -------------------------------------

BSG_STATIONS = tuple(f"BSG{i:02d}" for i in range(1, 21))
BSG_COMPONENTS = ("east", "north", "up")
BSG_LENGTH = 5000
BSG_START_MJD = 51544.0
BSG_NOISE = {
    "east": (1.4, 0.6),
    "north": (1.4, 0.6),
    "up": (4.8, 0.7),
}
# Draw ranges for the trajectory truth (mm, mm/yr).
BSG_RANGES = {
    "intercept": (-10.0, 10.0),
    "trend": (-5.0, 5.0),
    "annual": (0.5, 3.0),
    "semiannual": (0.2, 1.0),
}


def _bsg_seeds(master_seed, station, component):
    root = np.random.SeedSequence(master_seed, spawn_key=(station, component))
    return root.spawn(2)


def bsg_recipe(master_seed: int, station: int, component: int):
    """Truth values and noise stream for one BSG series.

    Seeds derive from ``(master_seed, station, component)`` alone, so any
    subset can be regenerated in any order.
    """
    truth_seed, noise_seed = _bsg_seeds(master_seed, station, component)
    rng = make_rng(truth_seed)
    lo, hi = zip(*BSG_RANGES.values())
    intercept, trend, annual, semiannual = rng.uniform(lo, hi)
    ph_annual, ph_semi = rng.uniform(-math.pi, math.pi, 2)
    comp = BSG_COMPONENTS[component]
    sigma, phi = BSG_NOISE[comp]
    truth = {
        "intercept": intercept,
        "trend": trend,
        "annual_amplitude": annual,
        "annual_phase": ph_annual,
        "semiannual_amplitude": semiannual,
        "semiannual_phase": ph_semi,
        "sigma": sigma,
        "phi_mix": phi,
        "kappa": -1.0,
    }
    return truth, noise_seed


def bsg_series(master_seed: int, station: int, component: int):
    """Generate one BSG series; returns ``(TimeSeries, truth)``."""
    truth, noise_seed = bsg_recipe(master_seed, station, component)
    n = BSG_LENGTH
    mjd = BSG_START_MJD + np.arange(n, dtype=float)
    ts = TimeSeries(mjd, np.zeros(n), 1.0)
    t = ts.years
    t_ref = float(t[0])
    traj = standard_model(reference_epoch=t_ref)
    A = build_design_matrix(traj, t).A
    coeffs = [
        truth["intercept"],
        truth["trend"],
        truth["annual_amplitude"] * math.cos(truth["annual_phase"]),
        truth["annual_amplitude"] * math.sin(truth["annual_phase"]),
        truth["semiannual_amplitude"] * math.cos(truth["semiannual_phase"]),
        truth["semiannual_amplitude"] * math.sin(truth["semiannual_phase"]),
    ]
    noise = mix_flicker_white(truth["sigma"], truth["phi_mix"], n, noise_seed)
    truth = {**truth, "reference_epoch": t_ref}
    name = BSG_STATIONS[station]
    comp = BSG_COMPONENTS[component]
    metadata = {
        "station": name,
        "component": comp,
        "sampling_period": "1",
        "generator": "bsg",
        "master_seed": str(master_seed),
        "units": "mm",
    }
    return TimeSeries(mjd, A @ np.asarray(coeffs) + noise, 1.0, metadata), truth


def bsg_filename(station: int, component: int):
    return f"{BSG_STATIONS[station]}_{BSG_COMPONENTS[component]}.txt"


def format_truth(records):
    """Truth manifest: ``key = value`` blocks separated by blank lines."""
    blocks = []
    for name, truth in records:
        lines = [f"series = {name}"]
        lines += [f"{k} = {v:.17g}" if isinstance(v, float) else f"{k} = {v}" for k, v in truth.items()]
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def parse_truth(text):
    """Parse a truth manifest into ``{series: {key: float or str}}``."""
    records = {}
    current = None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "series":
            current = records.setdefault(value, {})
            continue
        try:
            current[key] = float(value)
        except ValueError:
            current[key] = value
    return records


def generate_bsg(output_dir, master_seed: int = 0, stations=None):
    """Write the Benchmark Synthetic GNSS dataset.

    Creates one file per station and component (20 x 3 = 60 series of 5000
    daily values) plus ``truth.txt``. Horizontal components carry
    flicker + white noise with ``sigma = 1.4 mm, phi = 0.6``, the vertical
    ``sigma = 4.8 mm, phi = 0.7``. Trajectory truth is drawn per series from
    ``BSG_RANGES``.

    Returns
    -------
    list of Path
        Paths of the written series files.
    """
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc}") from exc
    stations = range(len(BSG_STATIONS)) if stations is None else stations
    paths, records = [], []
    for s in stations:
        for c in range(len(BSG_COMPONENTS)):
            ts, truth = bsg_series(master_seed, s, c)
            path = out / bsg_filename(s, c)
            header = list(ts.metadata.items())
            try:
                atomic_write(path, format_timeseries(ts, header))
            except OSError as exc:
                raise OSError(f"cannot write {path}: {exc}") from exc
            paths.append(path)
            records.append((path.stem, truth))
    manifest = f"# generator: bsg\n# master_seed: {master_seed}\n" + format_truth(records)
    try:
        atomic_write(out / "truth.txt", manifest)
    except OSError as exc:
        raise OSError(f"cannot write {out / 'truth.txt'}: {exc}") from exc
    return paths
