"""Spectrally sparse signals, random sampling masks, and noise.

A signal is a weighted sum of r complex sinusoids on a K-dimensional
integer grid: entry t of the synthesized array equals

    sum_i  d_i * exp(2j * pi * <t, f_i>)

with normalized frequencies f_i in [0,1)^K and nonzero complex
amplitudes d_i.  Frequencies live off any grid; r is the spectral
sparsity.

Randomness conventions: every stochastic operation takes either an
integer seed or a numpy Generator.  Parallel experiments derive
independent per-trial generators with ``derive_rng(seed, *path)``,
which feeds the path counters into a SeedSequence spawn key, so results
are reproducible regardless of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def as_rng(seed) -> np.random.Generator:
    """Normalize an int seed / SeedSequence / Generator to a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Deterministic sub-generator for trial counters under a master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))


@dataclass(frozen=True)
class SpectralSignal:
    """A sum of K-dimensional complex sinusoids on an integer grid.

    Parameters
    ----------
    dims : tuple of int
        Grid extent per axis, all positive.
    freqs : sequence of K-tuples
        Normalized frequencies in [0,1)^K, no exact duplicates.
    amps : sequence of complex
        Nonzero amplitudes, one per frequency.
    """

    dims: tuple
    freqs: tuple
    amps: tuple

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        freqs = tuple(tuple(float(x) for x in f) for f in self.freqs)
        amps = tuple(complex(a) for a in self.amps)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "amps", amps)
        if not dims or any(n < 1 for n in dims):
            raise ValueError("dims must be positive integers")
        if len(freqs) < 1:
            raise ValueError("at least one frequency is required")
        if len(freqs) != len(amps):
            raise ValueError("freqs and amps must have equal length")
        k = len(dims)
        for f in freqs:
            if len(f) != k:
                raise ValueError("frequency tuples must match the grid order")
            if any(not (0.0 <= x < 1.0) for x in f):
                raise ValueError("frequency coordinates must lie in [0, 1)")
        if len(set(freqs)) != len(freqs):
            raise ValueError("duplicate frequency tuples make sparsity ill-defined")
        if any(a == 0 for a in amps):
            raise ValueError("amplitudes must be nonzero")

    @property
    def r(self) -> int:
        return len(self.freqs)

    @property
    def order(self) -> int:
        return len(self.dims)

    def to_json_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "freqs": [list(f) for f in self.freqs],
            "amps": [[a.real, a.imag] for a in self.amps],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SpectralSignal":
        amps = [complex(re, im) for re, im in obj["amps"]]
        return cls(tuple(obj["dims"]), [tuple(f) for f in obj["freqs"]], amps)


def synthesize(signal: SpectralSignal) -> np.ndarray:
    """Evaluate the sinusoid sum on the full grid.

    Returns
    -------
    ndarray of complex
        Array of shape ``signal.dims`` whose entry at index t equals
        sum_i amps[i] * exp(2j*pi*<t, freqs[i]>).
    """
    grids = np.meshgrid(*(np.arange(n) for n in signal.dims), indexing="ij")
    out = np.zeros(signal.dims, dtype=complex)
    for f, d in zip(signal.freqs, signal.amps):
        phase = sum(fk * g for fk, g in zip(f, grids))
        out += d * np.exp(2j * np.pi * phase)
    return out


@dataclass(frozen=True)
class ObservationSet:
    """Observed entries of a data array: distinct indices plus values.

    ``noise_level`` is the Frobenius norm bound on the noise carried by
    the observed values (0 for clean observations).
    """

    dims: tuple
    indices: tuple
    values: tuple
    noise_level: float = 0.0

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        indices = tuple(tuple(int(i) for i in ix) for ix in self.indices)
        values = tuple(complex(v) for v in self.values)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "noise_level", float(self.noise_level))
        if len(indices) != len(values):
            raise ValueError("indices and values must have equal length")
        if len(set(indices)) != len(indices):
            raise ValueError("observation indices must be distinct")
        for ix in indices:
            if len(ix) != len(dims):
                raise ValueError("index order must match dims")
            if any(not (0 <= i < n) for i, n in zip(ix, dims)):
                raise ValueError(f"index {ix} outside dims {dims}")
        if self.noise_level < 0:
            raise ValueError("noise_level must be nonnegative")

    @property
    def m(self) -> int:
        return len(self.indices)

    def flat_indices(self) -> np.ndarray:
        if not self.indices:
            return np.zeros(0, dtype=np.intp)
        cols = tuple(np.array([ix[k] for ix in self.indices]) for k in range(len(self.dims)))
        return np.ravel_multi_index(cols, self.dims)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.dims, dtype=bool)
        out.ravel()[self.flat_indices()] = True
        return out

    def zero_filled(self) -> np.ndarray:
        out = np.zeros(self.dims, dtype=complex)
        out.ravel()[self.flat_indices()] = np.asarray(self.values)
        return out

    def to_json_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "indices": [list(ix) for ix in self.indices],
            "values": [[v.real, v.imag] for v in self.values],
            "noise_level": self.noise_level,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ObservationSet":
        return cls(
            dims=tuple(obj["dims"]),
            indices=[tuple(ix) for ix in obj["indices"]],
            values=[complex(v[0], v[1]) for v in obj["values"]],
            noise_level=float(obj.get("noise_level", 0.0)),
        )


def sample_uniform(dims, m: int, seed) -> list:
    """Draw m distinct indices uniformly without replacement.

    Returns the sampled index tuples in ascending row-major order, so a
    given seed always yields an identical, canonical set.
    """
    total = int(np.prod(dims))
    m = int(m)
    if not (0 <= m <= total):
        raise ValueError(f"m={m} outside [0, {total}]")
    if m == 0:
        return []
    rng = as_rng(seed)
    flat = np.sort(rng.choice(total, size=m, replace=False))
    return list(zip(*np.unravel_index(flat, dims)))


def sample_iid(dims, m: int, seed) -> list:
    """Draw m indices i.i.d. uniformly with replacement (order preserved)."""
    total = int(np.prod(dims))
    if m < 0:
        raise ValueError("m must be nonnegative")
    rng = as_rng(seed)
    flat = rng.integers(0, total, size=int(m))
    return list(zip(*np.unravel_index(flat, dims)))


def add_noise(values, snr_amplitude: float, seed) -> np.ndarray:
    """Add circularly symmetric complex Gaussian noise at a target SNR.

    The per-entry variance is chosen so that the expected squared noise
    norm equals ``(|values| / snr_amplitude)**2``; real and imaginary
    components carry half the variance each.  An infinite SNR returns
    the input unchanged.
    """
    values = np.asarray(values, dtype=complex)
    if snr_amplitude <= 0:
        raise ValueError("snr_amplitude must be positive")
    if math.isinf(snr_amplitude):
        return values.copy()
    m = values.size
    if m == 0:
        return values.copy()
    rng = as_rng(seed)
    sigma = np.linalg.norm(values) / (snr_amplitude * math.sqrt(m))
    scale = sigma / math.sqrt(2.0)
    noise = scale * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    return values + noise.reshape(values.shape)


def make_observations(data, indices, snr_amplitude: float = math.inf, seed=0) -> ObservationSet:
    """Sample a data array at given indices, optionally adding noise.

    ``noise_level`` of the result is the realized Frobenius norm of the
    added noise vector (exactly 0 when snr_amplitude is infinite).
    """
    data = np.asarray(data)
    clean = np.array([data[tuple(ix)] for ix in indices], dtype=complex)
    noisy = add_noise(clean, snr_amplitude, seed)
    delta = float(np.linalg.norm(noisy - clean))
    return ObservationSet(data.shape, [tuple(ix) for ix in indices], noisy, delta)
