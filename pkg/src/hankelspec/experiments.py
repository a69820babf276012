"""Reproducible experiment harnesses built on the recovery solver.

Three protocols: a Monte Carlo phase-transition sweep over sparsity and
sample count, a noisy-recovery demonstration with its stability bound,
and a super-resolution demo that extrapolates the high-frequency part of
a point-source spectrum from its low-frequency block.

Every trial derives its own generator from the master seed and the trial
coordinates, so results are identical no matter how work is split across
processes; aggregation uses integer success counts only.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .model import (
    SpectralSignal,
    derive_rng,
    make_observations,
    sample_uniform,
    synthesize,
)
from .solver import SolverConfig, noisy_stability_bound, svt_recover

__all__ = [
    "SUCCESS_NMSE",
    "draw_trial_signal",
    "run_recovery_trial",
    "PhaseCell",
    "phase_transition",
    "PHASE_HEADER",
    "phase_table_rows",
    "phase_threshold_profile",
    "fit_threshold_line",
    "NoisyDemoReport",
    "RECONSTRUCTION_HEADER",
    "reconstruction_table",
    "noisy_demo",
    "SuperresSpec",
    "make_random_sources",
    "superres_signal",
    "superres_observation_indices",
    "render_image",
    "detect_peaks",
    "SuperresResult",
    "superres_demo",
]

SUCCESS_NMSE = 1e-4


def _draw_separated(rng: np.random.Generator, count: int, floors: Sequence[float]) -> np.ndarray:
    """Uniform points in [0,1)^K, rejecting pairs too close on any axis."""
    order = len(floors)
    floors = np.asarray(floors, dtype=float)
    while True:
        pts = rng.random((count, order))
        gaps = np.abs(pts[:, None, :] - pts[None, :, :])
        gaps = np.minimum(gaps, 1.0 - gaps)
        gaps[np.arange(count), np.arange(count), :] = 1.0
        if np.all(gaps >= floors):
            return pts


def draw_trial_signal(
    rng: np.random.Generator,
    dims: Tuple[int, ...],
    r: int,
    min_sep: Optional[float] = None,
) -> SpectralSignal:
    """Draw a random sparse signal for one Monte Carlo trial.

    Frequencies are uniform in ``[0,1)^K`` with rejection whenever any
    pair comes closer than the floor on any axis (wraparound distance);
    the default floor is ``1/(4 n)`` per axis.  Amplitudes have unit
    modulus and uniform random phase.

    Parameters
    ----------
    rng : numpy.random.Generator
        Trial generator (use :func:`hankelspec.model.derive_rng`).
    dims : tuple of int
        Grid extent per axis.
    r : int
        Number of sinusoids.
    min_sep : float, optional
        Per-axis separation floor overriding the default.

    Returns
    -------
    SpectralSignal
    """
    if min_sep is None:
        floors = [1.0 / (4.0 * n) for n in dims]
    else:
        floors = [float(min_sep)] * len(dims)
    pts = _draw_separated(rng, int(r), floors)
    amps = np.exp(2j * np.pi * rng.random(int(r)))
    return SpectralSignal(tuple(dims), [tuple(p) for p in pts], amps)


def run_recovery_trial(
    dims: Tuple[int, ...],
    r: int,
    m: int,
    rng: np.random.Generator,
    config: Optional[SolverConfig] = None,
    threshold: float = SUCCESS_NMSE,
) -> bool:
    """Run one noiseless recovery trial and report success.

    Draws a signal and a uniform mask from ``rng``, recovers, and
    compares the normalized error against ``threshold``.  ``m == 0`` is
    an immediate failure; the solver is not invoked.
    """
    if m == 0:
        return False
    sig = draw_trial_signal(rng, dims, r)
    data = synthesize(sig)
    indices = sample_uniform(dims, m, rng)
    obs = make_observations(data, indices)
    result = svt_recover(obs, config=config, truth=data)
    return result.nmse is not None and result.nmse <= threshold


@dataclass(frozen=True)
class PhaseCell:
    """Aggregated outcome of one (sparsity, sample-count) grid cell."""

    r: int
    m: int
    trials: int
    successes: int

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials


def _trial_block(args) -> Tuple[int, int, int]:
    dims, r, m, start, stop, seed, config, threshold = args
    successes = 0
    for trial in range(start, stop):
        rng = derive_rng(seed, r, m, trial)
        successes += run_recovery_trial(dims, r, m, rng, config, threshold)
    return r, m, successes


def phase_transition(
    dims: Tuple[int, ...],
    r_values: Sequence[int],
    m_values: Sequence[int],
    trials: int,
    seed: int = 0,
    config: Optional[SolverConfig] = None,
    threads: int = 1,
    threshold: float = SUCCESS_NMSE,
    chunk: int = 10,
) -> List[PhaseCell]:
    """Monte Carlo success-rate sweep over a (r, m) grid.

    Each trial uses the generator derived from ``(seed, r, m, trial)``,
    so the outcome is independent of scheduling; with ``threads > 1``
    trial blocks run in a process pool.

    Parameters
    ----------
    dims : tuple of int
        Signal grid.
    r_values, m_values : sequence of int
        Sparsity and sample-count grids.
    trials : int
        Trials per cell, at least 1.
    seed : int
        Master seed.
    config : SolverConfig, optional
        Solver controls for every trial.
    threads : int
        Worker processes; 1 runs inline.
    threshold : float
        Success NMSE level.
    chunk : int
        Trials per scheduled block.

    Returns
    -------
    list of PhaseCell
        One cell per (r, m) pair, ordered by the input grids.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not r_values or not m_values:
        raise ValueError("grid must be non-empty")
    tasks = []
    for r in r_values:
        for m in m_values:
            for start in range(0, trials, chunk):
                stop = min(start + chunk, trials)
                tasks.append(
                    (tuple(dims), int(r), int(m), start, stop, seed, config, threshold)
                )
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_trial_block, tasks))
    else:
        outcomes = [_trial_block(task) for task in tasks]
    counts = {}
    for r, m, successes in outcomes:
        counts[(r, m)] = counts.get((r, m), 0) + successes
    return [
        PhaseCell(r=int(r), m=int(m), trials=trials, successes=counts[(int(r), int(m))])
        for r in r_values
        for m in m_values
    ]


PHASE_HEADER = ("r", "m", "trials", "successes", "success_rate")


def phase_table_rows(cells: Sequence[PhaseCell]) -> List[tuple]:
    """CSV rows matching PHASE_HEADER."""
    return [(c.r, c.m, c.trials, c.successes, c.success_rate) for c in cells]


def phase_threshold_profile(
    cells: Sequence[PhaseCell], level: float = 0.95
) -> List[Tuple[int, Optional[int]]]:
    """Minimal sample count reaching a success level, per sparsity.

    Returns ``(r, m_min)`` pairs sorted by ``r``; ``m_min`` is None when
    no cell of that sparsity reaches the level.
    """
    by_r = {}
    for cell in cells:
        by_r.setdefault(cell.r, []).append(cell)
    profile = []
    for r in sorted(by_r):
        hits = [c.m for c in by_r[r] if c.success_rate >= level]
        profile.append((r, min(hits) if hits else None))
    return profile


def fit_threshold_line(points: Sequence[Tuple[int, int]]) -> Tuple[float, float, float]:
    """Least-squares line through (r, m_min) points.

    Returns ``(slope, intercept, max_abs_residual)``; needs two points.
    """
    pts = [(r, m) for r, m in points if m is not None]
    if len(pts) < 2:
        raise ValueError("need at least two finite points to fit a line")
    xs = np.array([p[0] for p in pts], dtype=float)
    ys = np.array([p[1] for p in pts], dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    residual = float(np.max(np.abs(slope * xs + intercept - ys)))
    return float(slope), float(intercept), residual


@dataclass(frozen=True)
class NoisyDemoReport:
    """Metrics of one noisy-recovery run.

    ``delta`` is the realized Frobenius norm of the injected noise (the
    radius handed to the solver), ``error_fro`` the data-domain error of
    the estimate, and ``stability_bound`` the theoretical ceiling on that
    error at this noise level.
    """

    dims: Tuple[int, ...]
    r: int
    m: int
    snr: float
    seed: int
    delta: float
    nmse: float
    error_fro: float
    stability_bound: float
    bound_holds: bool
    iters: int
    converged: bool
    noiseless_nmse: Optional[float]

    def to_json_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "r": self.r,
            "m": self.m,
            "snr": self.snr,
            "seed": self.seed,
            "delta": self.delta,
            "nmse": self.nmse,
            "error_fro": self.error_fro,
            "stability_bound": self.stability_bound,
            "bound_holds": self.bound_holds,
            "iters": self.iters,
            "converged": self.converged,
            "noiseless_nmse": self.noiseless_nmse,
        }


RECONSTRUCTION_HEADER = ("index", "truth_re", "truth_im", "recovered_re", "recovered_im")


def reconstruction_table(truth: np.ndarray, estimate: np.ndarray, count: int = 100) -> List[tuple]:
    """First ``count`` entries of truth and estimate in row-major order."""
    t = np.asarray(truth).reshape(-1)
    e = np.asarray(estimate).reshape(-1)
    count = min(count, t.size)
    return [
        (i, float(t[i].real), float(t[i].imag), float(e[i].real), float(e[i].imag))
        for i in range(count)
    ]


def noisy_demo(
    dims: Tuple[int, ...] = (101, 101),
    r: int = 30,
    m: int = 600,
    snr: float = 10.0,
    seed: int = 0,
    config: Optional[SolverConfig] = None,
    pencils: Optional[Tuple[int, ...]] = None,
    include_noiseless: bool = False,
) -> Tuple[NoisyDemoReport, List[tuple]]:
    """Noisy recovery demonstration with the stability bound.

    Draws one random signal and mask, injects complex Gaussian noise at
    the given amplitude SNR, recovers inside the realized noise ball,
    and optionally repeats without noise on the same instance for a
    paired comparison.

    Parameters
    ----------
    dims, r, m, snr : experiment geometry and noise level.
    seed : int
        Master seed; signal, mask and noise use derived streams.
    config : SolverConfig, optional
        Solver controls; the noise mode and radius are always overridden
        to the realized noise ball.
    pencils : tuple of int, optional
        Pencil split for the solver.
    include_noiseless : bool
        Also run the paired noiseless instance.

    Returns
    -------
    (NoisyDemoReport, list of tuple)
        Metrics plus the first-100-entries reconstruction table
        (RECONSTRUCTION_HEADER columns).
    """
    sig = draw_trial_signal(derive_rng(seed, 0), dims, r)
    data = synthesize(sig)
    indices = sample_uniform(dims, m, derive_rng(seed, 1))
    obs = make_observations(data, indices, snr_amplitude=snr, seed=derive_rng(seed, 2))
    base = config if config is not None else SolverConfig()
    noisy_cfg = replace(base, noise_mode="delta_ball", delta=obs.noise_level)
    result = svt_recover(obs, pencil=pencils, config=noisy_cfg, truth=data)
    error = float(np.linalg.norm(result.data_hat - data))
    bound = noisy_stability_bound(dims, m, obs.noise_level)
    noiseless_nmse = None
    if include_noiseless:
        clean_obs = make_observations(data, indices)
        clean_cfg = replace(base, noise_mode="equality", delta=0.0)
        noiseless_nmse = svt_recover(
            clean_obs, pencil=pencils, config=clean_cfg, truth=data
        ).nmse
    report = NoisyDemoReport(
        dims=tuple(dims),
        r=int(r),
        m=int(m),
        snr=float(snr),
        seed=int(seed),
        delta=obs.noise_level,
        nmse=result.nmse,
        error_fro=error,
        stability_bound=bound,
        bound_holds=error <= bound,
        iters=result.iters,
        converged=result.converged,
        noiseless_nmse=noiseless_nmse,
    )
    return report, reconstruction_table(data, result.data_hat)


@dataclass(frozen=True)
class SuperresSpec:
    """Point-source super-resolution setup.

    Attributes
    ----------
    sources : tuple
        ``((x, y), amplitude)`` pairs with positions in ``[0,1)^2`` and
        nonzero complex amplitudes.
    f_lo : int
        Observed low-frequency cutoff; the spectrum is known on the
        block ``[-f_lo, f_lo]^2``.
    f_hi : int
        Extrapolation cutoff; the recovered spectrum covers
        ``[-f_hi, f_hi]^2``.
    render_grid : int
        Side of the square image grid used by the inverse transform; at
        least ``2 f_hi + 1`` so every integer frequency has its own bin.
    """

    sources: tuple
    f_lo: int
    f_hi: int
    render_grid: int = 256

    def __post_init__(self):
        sources = tuple(
            ((float(p[0]), float(p[1])), complex(a)) for p, a in self.sources
        )
        if not sources:
            raise ValueError("need at least one source")
        for (x, y), amp in sources:
            if not (0 <= x < 1 and 0 <= y < 1):
                raise ValueError("source positions must lie in [0, 1)^2")
            if amp == 0:
                raise ValueError("source amplitudes must be nonzero")
        if self.f_lo < 1:
            raise ValueError("f_lo must be at least 1")
        if self.f_hi < self.f_lo:
            raise ValueError("f_hi must be at least f_lo")
        if self.render_grid < 2 * self.f_hi + 1:
            raise ValueError("render grid must cover every integer frequency")
        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "f_lo", int(self.f_lo))
        object.__setattr__(self, "f_hi", int(self.f_hi))
        object.__setattr__(self, "render_grid", int(self.render_grid))

    @property
    def side(self) -> int:
        return 2 * self.f_hi + 1

    @property
    def dims(self) -> Tuple[int, int]:
        return (self.side, self.side)

    @property
    def m(self) -> int:
        return (2 * self.f_lo + 1) ** 2

    def to_json_dict(self) -> dict:
        return {
            "sources": [
                {"position": [p[0], p[1]], "amplitude": a} for p, a in self.sources
            ],
            "f_lo": self.f_lo,
            "f_hi": self.f_hi,
            "render_grid": self.render_grid,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SuperresSpec":
        sources = [
            (tuple(item["position"]), _as_complex(item["amplitude"]))
            for item in obj["sources"]
        ]
        return cls(
            sources=sources,
            f_lo=int(obj["f_lo"]),
            f_hi=int(obj["f_hi"]),
            render_grid=int(obj.get("render_grid", 256)),
        )


def _as_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        return complex(value[0], value[1])
    return complex(value)


def make_random_sources(
    count: int,
    rng: np.random.Generator,
    min_sep: float = 0.08,
    amplitude: complex = 1.0,
) -> tuple:
    """Random well separated constant-amplitude sources on the unit square."""
    pts = _draw_separated(rng, int(count), [float(min_sep), float(min_sep)])
    return tuple(((float(p[0]), float(p[1])), complex(amplitude)) for p in pts)


def superres_signal(spec: SuperresSpec) -> SpectralSignal:
    """Spectrum of the sources as a sparse-sinusoid signal.

    Grid entry ``t`` holds the Fourier coefficient at integer frequency
    ``k = t - f_hi``, i.e. ``sum_s a_s exp(-2j pi <k, p_s>)``; shifting
    the index origin turns each source into one sinusoid with frequency
    ``(-p) mod 1`` and a phase-rotated amplitude, so the spectrum grid is
    itself spectrally sparse with sparsity equal to the source count.
    """
    freqs = []
    amps = []
    for (x, y), amp in spec.sources:
        freqs.append(((-x) % 1.0, (-y) % 1.0))
        amps.append(amp * np.exp(2j * np.pi * spec.f_hi * (x + y)))
    return SpectralSignal(spec.dims, freqs, amps)


def superres_observation_indices(spec: SuperresSpec) -> np.ndarray:
    """Grid indices of the observed low-frequency block, row-major."""
    offsets = np.arange(-spec.f_lo, spec.f_lo + 1) + spec.f_hi
    grid = np.stack(np.meshgrid(offsets, offsets, indexing="ij"), axis=-1)
    return grid.reshape(-1, 2)


def render_image(spectrum: np.ndarray, f_hi: int, grid: int) -> np.ndarray:
    """Evaluate ``sum_k S[k] exp(2j pi <k, x/grid>)`` on a grid x grid image.

    Each integer frequency is placed in its own FFT bin (mod ``grid``),
    so a single inverse transform evaluates the trigonometric polynomial
    exactly at the image pixels.
    """
    spectrum = np.asarray(spectrum)
    side = 2 * f_hi + 1
    if spectrum.shape != (side, side):
        raise ValueError(f"spectrum shape {spectrum.shape} != {(side, side)}")
    if grid < side:
        raise ValueError("render grid must cover every integer frequency")
    bins = (np.arange(side) - f_hi) % grid
    z = np.zeros((grid, grid), dtype=complex)
    z[np.ix_(bins, bins)] = spectrum
    return np.fft.ifft2(z) * grid**2


def detect_peaks(image: np.ndarray, threshold_ratio: float = 0.5) -> List[Tuple[int, int]]:
    """Local maxima of ``|image|`` above a fraction of the global max.

    A pixel is a peak when it strictly exceeds all eight wraparound
    neighbors and its magnitude is above ``threshold_ratio`` times the
    largest magnitude.  Returned sorted in row-major order.
    """
    mag = np.abs(np.asarray(image))
    mask = mag > threshold_ratio * mag.max()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            mask &= mag > np.roll(mag, (di, dj), axis=(0, 1))
    rows, cols = np.nonzero(mask)
    return sorted((int(i), int(j)) for i, j in zip(rows, cols))


@dataclass(frozen=True)
class SuperresResult:
    """Arrays and diagnostics of one super-resolution run.

    The three spectra live on the ``(2 f_hi + 1)^2`` grid (the low-res
    one is zero outside the observed block); the three images are their
    inverse transforms on the render grid.  ``source_match_cells`` holds,
    per source, the wraparound Chebyshev distance (in render cells) to
    the nearest detected peak; ``spurious_peaks`` counts detected peaks
    farther than one cell from every source.
    """

    spec: SuperresSpec
    truth_spectrum: np.ndarray
    lowres_spectrum: np.ndarray
    recovered_spectrum: np.ndarray
    truth_image: np.ndarray
    lowres_image: np.ndarray
    recovered_image: np.ndarray
    peaks: List[Tuple[int, int]]
    source_match_cells: List[float]
    spurious_peaks: int
    spectrum_nmse: float
    iters: int
    converged: bool

    def to_json_dict(self) -> dict:
        return {
            "spec": self.spec.to_json_dict(),
            "peaks": [list(p) for p in self.peaks],
            "source_match_cells": list(self.source_match_cells),
            "spurious_peaks": self.spurious_peaks,
            "spectrum_nmse": self.spectrum_nmse,
            "iters": self.iters,
            "converged": self.converged,
        }


def _wrap_cell_distance(peak: Tuple[int, int], position: Tuple[float, float], grid: int) -> float:
    d = 0.0
    for x, p in zip(peak, position):
        gap = abs(x - p * grid) % grid
        d = max(d, min(gap, grid - gap))
    return d


def superres_demo(
    spec: SuperresSpec,
    config: Optional[SolverConfig] = None,
    pencils: Optional[Tuple[int, ...]] = None,
    seed: int = 0,
) -> SuperresResult:
    """Recover the high-frequency spectrum from its low-frequency block.

    Parameters
    ----------
    spec : SuperresSpec
        Sources and cutoffs.
    config : SolverConfig, optional
        Solver controls for the completion step.
    pencils : tuple of int, optional
        Pencil split for the lifted matrix.
    seed : int
        Seed forwarded to the solver's randomized range-finder.

    Returns
    -------
    SuperresResult
    """
    truth = synthesize(superres_signal(spec))
    indices = superres_observation_indices(spec)
    lowres = np.zeros_like(truth)
    lowres[indices[:, 0], indices[:, 1]] = truth[indices[:, 0], indices[:, 1]]
    obs = make_observations(truth, [tuple(ix) for ix in indices])
    result = svt_recover(obs, pencil=pencils, config=config, truth=truth, seed=seed)
    recovered = result.data_hat
    grid = spec.render_grid
    truth_image = render_image(truth, spec.f_hi, grid)
    lowres_image = render_image(lowres, spec.f_hi, grid)
    recovered_image = render_image(recovered, spec.f_hi, grid)
    peaks = detect_peaks(recovered_image)
    matches = []
    for position, _ in spec.sources:
        if peaks:
            matches.append(min(_wrap_cell_distance(p, position, grid) for p in peaks))
        else:
            matches.append(math.inf)
    spurious = 0
    for peak in peaks:
        if all(
            _wrap_cell_distance(peak, position, grid) > 1.0
            for position, _ in spec.sources
        ):
            spurious += 1
    return SuperresResult(
        spec=spec,
        truth_spectrum=truth,
        lowres_spectrum=lowres,
        recovered_spectrum=recovered,
        truth_image=truth_image,
        lowres_image=lowres_image,
        recovered_image=recovered_image,
        peaks=peaks,
        source_match_cells=matches,
        spurious_peaks=spurious,
        spectrum_nmse=result.nmse,
        iters=result.iters,
        converged=result.converged,
    )
