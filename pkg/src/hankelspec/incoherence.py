"""Incoherence diagnostics for spectrally sparse signals.

Every quantity here measures, in one way or another, how evenly the energy
of a sparse signal spreads across the lifted matrix built by
:mod:`hankelspec.hankel`.  Small values mean well spread energy and easier
recovery from few samples; the sample-complexity report turns the measured
values into concrete thresholds on the number of observations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .hankel import EnhancementMap, PencilShape, basis_matrix, default_pencils, enhance
from .model import SpectralSignal, synthesize

__all__ = [
    "aspect_constant",
    "gram_matrices",
    "gram_incoherence",
    "enhanced_frames",
    "skew_mean_incoherence",
    "tangent_cross_incoherence",
    "projection_mass_incoherence",
    "SampleComplexityReport",
    "sample_complexity_report",
    "IncoherenceReport",
    "incoherence_report",
]

_RANK_RTOL = 1e-10
_SINGULAR_TOL = 1e-13


def aspect_constant(pencil: PencilShape) -> float:
    """Imbalance of the lifted matrix relative to the signal size.

    Parameters
    ----------
    pencil : PencilShape
        Signal dimensions plus the per-axis pencil split.

    Returns
    -------
    float
        ``max(size / rows, size / cols)`` where ``size`` is the number of
        signal entries and ``rows``/``cols`` are the lifted matrix sides.
        Equal to 1 only when the lifted matrix is square with both sides
        as large as the signal itself; it grows as the split becomes
        lopsided.
    """
    size = float(pencil.size)
    return max(size / pencil.rows, size / pencil.cols)


def _dirichlet(delta: np.ndarray, count: int) -> np.ndarray:
    """Mean of exp(2j*pi*p*delta) over p = 0..count-1, elementwise."""
    delta = np.asarray(delta, dtype=float)
    out = np.ones(delta.shape, dtype=complex)
    mask = delta != 0.0
    d = delta[mask]
    out[mask] = (
        np.exp(1j * np.pi * d * (count - 1))
        * np.sin(np.pi * count * d)
        / (count * np.sin(np.pi * d))
    )
    return out


def _check_freqs(freqs: Sequence[Tuple[float, ...]], order: int) -> np.ndarray:
    table = [tuple(float(x) for x in f) for f in freqs]
    if not table:
        raise ValueError("need at least one frequency")
    if any(len(f) != order for f in table):
        raise ValueError("frequency order does not match the pencil order")
    if len(set(table)) != len(table):
        raise ValueError("frequencies must be distinct")
    return np.array(table, dtype=float)


def gram_matrices(
    freqs: Sequence[Tuple[float, ...]], pencil: PencilShape
) -> Tuple[np.ndarray, np.ndarray]:
    """Gram matrices of the normalized complex-exponential frames.

    The lifted matrix of an ``r``-spike signal factors through two
    Vandermonde-type frames, one on the row grid and one on the column
    grid.  Their Gram matrices have unit diagonal and off-diagonal entries
    given by products of Dirichlet kernels of the pairwise frequency
    differences, so they can be evaluated in closed form without building
    the frames.

    Parameters
    ----------
    freqs : sequence of tuple of float
        Distinct frequency locations in ``[0, 1)`` per axis.
    pencil : PencilShape
        Geometry of the lifted matrix.

    Returns
    -------
    (ndarray, ndarray)
        ``(G_rows, G_cols)``, each Hermitian of shape ``(r, r)`` with unit
        diagonal.  Entry ``[i, j]`` is the product over axes of the
        Dirichlet kernel evaluated at ``freqs[j] - freqs[i]``.
    """
    table = _check_freqs(freqs, pencil.order)
    grams = []
    for counts in (pencil.row_shape, pencil.col_shape):
        g = np.ones((len(table), len(table)), dtype=complex)
        for axis, count in enumerate(counts):
            delta = table[None, :, axis] - table[:, None, axis]
            g *= _dirichlet(delta, count)
        grams.append(g)
    return grams[0], grams[1]


def gram_incoherence(freqs: Sequence[Tuple[float, ...]], pencil: PencilShape) -> float:
    """Reciprocal of the smallest frame Gram eigenvalue.

    Parameters
    ----------
    freqs : sequence of tuple of float
        Distinct frequency locations in ``[0, 1)`` per axis.
    pencil : PencilShape
        Geometry of the lifted matrix.

    Returns
    -------
    float
        ``1 / min(eig(G_rows), eig(G_cols))``, or ``inf`` when either Gram
        matrix is numerically singular (frequencies too close for the
        pencil to separate).  Equals 1.0 exactly for a single spike.
    """
    g_rows, g_cols = gram_matrices(freqs, pencil)
    smallest = min(
        np.linalg.eigvalsh(g_rows)[0],
        np.linalg.eigvalsh(g_cols)[0],
    )
    if smallest <= _SINGULAR_TOL * len(g_rows):
        return math.inf
    return 1.0 / smallest


def enhanced_frames(
    signal: SpectralSignal, pencils: Optional[Tuple[int, ...]] = None
) -> Tuple[np.ndarray, np.ndarray, int]:
    """Compact singular frames of the lifted matrix of a signal.

    Parameters
    ----------
    signal : SpectralSignal
        Signal whose lifted matrix is factorized.
    pencils : tuple of int, optional
        Pencil split; defaults to the balanced split.

    Returns
    -------
    (ndarray, ndarray, int)
        ``(U, V, rank)`` where ``U`` has shape ``(rows, rank)``, ``V`` has
        shape ``(cols, rank)`` and ``rank`` is the numerical rank (singular
        values above ``1e-10`` relative to the largest).
    """
    if pencils is None:
        pencils = default_pencils(signal.dims)
    emap = EnhancementMap(PencilShape(signal.dims, pencils))
    lifted = enhance(synthesize(signal), emap)
    u, s, vh = np.linalg.svd(lifted, full_matrices=False)
    rank = int(np.count_nonzero(s > s[0] * _RANK_RTOL))
    return u[:, :rank], vh[:rank].conj().T, rank


def skew_mean_incoherence(
    signal: SpectralSignal, pencils: Optional[Tuple[int, ...]] = None
) -> float:
    """Worst normalized skew-diagonal mean of the sign matrix.

    The sign matrix ``U @ V*`` of the lifted matrix plays the role of a
    sign pattern for nuclear-norm minimization.  This measure looks at its
    sum over each skew-diagonal group, normalized by the squared group
    multiplicity, and reports the worst case scaled so that a perfectly
    flat spread gives an order-one value.

    Parameters
    ----------
    signal : SpectralSignal
        Signal to analyse.
    pencils : tuple of int, optional
        Pencil split; defaults to the balanced split.

    Returns
    -------
    float
        ``(size**2 / rank) * max_a |sum over group a of U @ V*|**2 /
        multiplicity_a**2``.
    """
    if pencils is None:
        pencils = default_pencils(signal.dims)
    emap = EnhancementMap(PencilShape(signal.dims, pencils))
    u, v, rank = enhanced_frames(signal, pencils)
    sums = emap.group_sums(u @ v.conj().T)
    worst = float(np.max(np.abs(sums) ** 2 / emap.mults.astype(float) ** 2))
    return emap.pencil.size**2 / rank * worst


def tangent_cross_incoherence(
    signal: SpectralSignal, pencils: Optional[Tuple[int, ...]] = None
) -> float:
    """Worst tangent-space energy of a single skew-diagonal basis element.

    For each normalized basis matrix supported on one skew-diagonal group,
    project it onto the column and row spaces of the lifted matrix and
    measure how the result distributes over all groups.  Large values mean
    a single group can hide a lot of tangent-space energy, which makes
    sampling that misses it costly.

    Parameters
    ----------
    signal : SpectralSignal
        Signal to analyse.
    pencils : tuple of int, optional
        Pencil split; defaults to the balanced split.

    Returns
    -------
    float
        ``(size / rank) * max_b (1 / multiplicity_b) * sum_a |sum over
        group a of UU* A_b VV*|**2`` with ``A_b`` the unit basis matrix of
        group ``b``.
    """
    if pencils is None:
        pencils = default_pencils(signal.dims)
    emap = EnhancementMap(PencilShape(signal.dims, pencils))
    u, v, rank = enhanced_frames(signal, pencils)
    uuh = u @ u.conj().T
    vvh = v @ v.conj().T
    mults = emap.mults.astype(float)
    worst = 0.0
    for group in range(emap.pencil.size):
        projected = uuh @ basis_matrix(group, emap) @ vvh
        energy = float(np.sum(np.abs(emap.group_sums(projected)) ** 2))
        worst = max(worst, energy / mults[group])
    return emap.pencil.size / rank * worst


def projection_mass_incoherence(u: np.ndarray, v: np.ndarray, emap: EnhancementMap) -> float:
    """Worst projected mass of a skew-diagonal basis element.

    Parameters
    ----------
    u, v : ndarray
        Orthonormal column and row frames of the lifted matrix, shaped
        ``(rows, rank)`` and ``(cols, rank)``.
    emap : EnhancementMap
        Lifting whose skew-diagonal groups are tested.

    Returns
    -------
    float
        ``size / (aspect * rank) * max_a max(|UU* A_a|_F**2,
        |A_a VV*|_F**2)`` where ``aspect`` is :func:`aspect_constant`.
        Never exceeds :func:`gram_incoherence` of the same signal and
        equals ``size / (aspect * rank)`` when the frames span everything.

    Raises
    ------
    ValueError
        If ``u`` or ``v`` is not orthonormal or does not match the map.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.ndim != 2 or v.ndim != 2 or u.shape[1] != v.shape[1]:
        raise ValueError("frames must be 2-d with a common column count")
    if u.shape[0] != emap.pencil.rows or v.shape[0] != emap.pencil.cols:
        raise ValueError("frame row counts do not match the lifted matrix")
    rank = u.shape[1]
    for frame in (u, v):
        gap = np.max(np.abs(frame.conj().T @ frame - np.eye(rank)))
        if gap > 1e-10:
            raise ValueError("frames must have orthonormal columns")
    worst = 0.0
    for group in range(emap.pencil.size):
        a = basis_matrix(group, emap)
        left = np.linalg.norm(u.conj().T @ a) ** 2
        right = np.linalg.norm(a @ v) ** 2
        worst = max(worst, left, right)
    return emap.pencil.size / (aspect_constant(emap.pencil) * rank) * worst


@dataclass(frozen=True)
class SampleComplexityReport:
    """Observation-count thresholds implied by the incoherence measures.

    Attributes
    ----------
    m : int
        Number of observed entries being tested.
    rank : int
        Numerical rank of the lifted matrix.
    aspect_constant : float
        Shape imbalance of the lifted matrix.
    gram_incoherence, skew_mean_incoherence, tangent_cross_incoherence : float
        The three incoherence measures of the signal.
    log_factor : float
        ``ln(size)**2``, the polylog factor in both thresholds.
    bound_max_form : float
        Threshold using the worst single measure:
        ``max(mu1 * aspect, mu2, mu3 * aspect) * rank * log_factor``.
    bound_squared_form : float
        Looser threshold using only the Gram measure:
        ``mu1**2 * aspect**2 * rank**2 * log_factor``.
    satisfied_max_form, satisfied_squared_form : bool
        Whether ``m`` exceeds the respective threshold.  The thresholds
        are reported with unit leading constant; they order instances by
        difficulty rather than certify recovery on their own.
    """

    m: int
    rank: int
    aspect_constant: float
    gram_incoherence: float
    skew_mean_incoherence: float
    tangent_cross_incoherence: float
    log_factor: float
    bound_max_form: float
    bound_squared_form: float
    satisfied_max_form: bool
    satisfied_squared_form: bool

    def to_json_dict(self) -> dict:
        return {
            "m": self.m,
            "rank": self.rank,
            "aspect_constant": self.aspect_constant,
            "gram_incoherence": self.gram_incoherence,
            "skew_mean_incoherence": self.skew_mean_incoherence,
            "tangent_cross_incoherence": self.tangent_cross_incoherence,
            "log_factor": self.log_factor,
            "bound_max_form": self.bound_max_form,
            "bound_squared_form": self.bound_squared_form,
            "satisfied_max_form": self.satisfied_max_form,
            "satisfied_squared_form": self.satisfied_squared_form,
        }


def sample_complexity_report(
    signal: SpectralSignal,
    pencils: Optional[Tuple[int, ...]] = None,
    m: int = 0,
) -> SampleComplexityReport:
    """Evaluate the incoherence-based observation-count thresholds.

    Parameters
    ----------
    signal : SpectralSignal
        Signal to analyse.
    pencils : tuple of int, optional
        Pencil split; defaults to the balanced split.
    m : int
        Number of observed entries to compare against the thresholds.

    Returns
    -------
    SampleComplexityReport
        All measures plus both thresholds and their pass flags.
    """
    if pencils is None:
        pencils = default_pencils(signal.dims)
    pencil = PencilShape(signal.dims, pencils)
    aspect = aspect_constant(pencil)
    mu1 = gram_incoherence(signal.freqs, pencil)
    mu2 = skew_mean_incoherence(signal, pencils)
    mu3 = tangent_cross_incoherence(signal, pencils)
    _, _, rank = enhanced_frames(signal, pencils)
    log_factor = math.log(pencil.size) ** 2
    bound_max = max(mu1 * aspect, mu2, mu3 * aspect) * rank * log_factor
    bound_sq = mu1**2 * aspect**2 * rank**2 * log_factor
    return SampleComplexityReport(
        m=int(m),
        rank=rank,
        aspect_constant=aspect,
        gram_incoherence=mu1,
        skew_mean_incoherence=mu2,
        tangent_cross_incoherence=mu3,
        log_factor=log_factor,
        bound_max_form=bound_max,
        bound_squared_form=bound_sq,
        satisfied_max_form=m > bound_max,
        satisfied_squared_form=m > bound_sq,
    )


@dataclass(frozen=True)
class IncoherenceReport:
    """Bundle of every incoherence diagnostic for one signal.

    Attributes
    ----------
    dims, pencils : tuple of int
        Signal dimensions and pencil split used.
    rank : int
        Numerical rank of the lifted matrix.
    aspect_constant : float
        Shape imbalance of the lifted matrix.
    gram_left, gram_right : ndarray
        Frame Gram matrices on the row and column grids.
    gram_incoherence, skew_mean_incoherence, tangent_cross_incoherence : float
        Scalar incoherence measures.
    projection_mass_incoherence : float
        Worst projected mass of a skew-diagonal basis element.
    sample_bounds : SampleComplexityReport or None
        Threshold evaluation when an observation count was supplied.
    """

    dims: Tuple[int, ...]
    pencils: Tuple[int, ...]
    rank: int
    aspect_constant: float
    gram_left: np.ndarray
    gram_right: np.ndarray
    gram_incoherence: float
    skew_mean_incoherence: float
    tangent_cross_incoherence: float
    projection_mass_incoherence: float
    sample_bounds: Optional[SampleComplexityReport]

    def to_json_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "pencils": list(self.pencils),
            "rank": self.rank,
            "aspect_constant": self.aspect_constant,
            "gram_left": self.gram_left,
            "gram_right": self.gram_right,
            "gram_incoherence": self.gram_incoherence,
            "skew_mean_incoherence": self.skew_mean_incoherence,
            "tangent_cross_incoherence": self.tangent_cross_incoherence,
            "projection_mass_incoherence": self.projection_mass_incoherence,
            "sample_bounds": None if self.sample_bounds is None else self.sample_bounds.to_json_dict(),
        }


def incoherence_report(
    signal: SpectralSignal,
    pencils: Optional[Tuple[int, ...]] = None,
    m: Optional[int] = None,
) -> IncoherenceReport:
    """Compute every incoherence diagnostic for a signal.

    Parameters
    ----------
    signal : SpectralSignal
        Signal to analyse.
    pencils : tuple of int, optional
        Pencil split; defaults to the balanced split.
    m : int, optional
        Observation count; when given the report includes the
        sample-complexity thresholds.

    Returns
    -------
    IncoherenceReport
    """
    if pencils is None:
        pencils = default_pencils(signal.dims)
    pencil = PencilShape(signal.dims, pencils)
    emap = EnhancementMap(pencil)
    u, v, rank = enhanced_frames(signal, pencils)
    g_left, g_right = gram_matrices(signal.freqs, pencil)
    bounds = None if m is None else sample_complexity_report(signal, pencils, m)
    return IncoherenceReport(
        dims=signal.dims,
        pencils=tuple(pencils),
        rank=rank,
        aspect_constant=aspect_constant(pencil),
        gram_left=g_left,
        gram_right=g_right,
        gram_incoherence=gram_incoherence(signal.freqs, pencil),
        skew_mean_incoherence=skew_mean_incoherence(signal, pencils),
        tangent_cross_incoherence=tangent_cross_incoherence(signal, pencils),
        projection_mass_incoherence=projection_mass_incoherence(u, v, emap),
        sample_bounds=bounds,
    )
