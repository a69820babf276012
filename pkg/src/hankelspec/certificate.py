"""Dual-certificate machinery for the lifted completion problem.

Exact recovery by structured nuclear-norm minimization is certified by a
matrix ``W`` that (a) lives, together with the sign matrix of the truth,
inside the span of the observed skew-diagonal groups, (b) is tiny on the
tangent space of the truth, and (c) has small spectral norm off it.  This
module builds such candidates with the golfing scheme, batch by batch,
and measures every quantity involved so the construction can be
inspected numerically at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .hankel import EnhancementMap, PencilShape, default_pencils, structure_project
from .incoherence import enhanced_frames
from .model import SpectralSignal, derive_rng

__all__ = [
    "TangentSpace",
    "tangent_project",
    "normal_project",
    "apply_sampling",
    "sampling_operator_matrices",
    "concentration_norm",
    "GateResult",
    "certificate_gate",
    "GolfingPlan",
    "make_golfing_plan",
    "GolfingReport",
    "golfing_certificate",
]

DEFAULT_OPERATOR_CAP = 4096
SUPPORT_TOL = 1e-9


@dataclass(frozen=True)
class TangentSpace:
    """Orthonormal frames spanning the tangent space of a lifted matrix.

    Parameters
    ----------
    u : ndarray
        Column frame, shape ``(rows, rank)``, orthonormal columns.
    v : ndarray
        Row frame, shape ``(cols, rank)``, orthonormal columns.
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex)
        v = np.asarray(self.v, dtype=complex)
        if u.ndim != 2 or v.ndim != 2 or u.shape[1] != v.shape[1]:
            raise ValueError("frames must be 2-d with a common column count")
        for frame in (u, v):
            gap = np.max(np.abs(frame.conj().T @ frame - np.eye(frame.shape[1])))
            if gap > 1e-8:
                raise ValueError("frames must have orthonormal columns")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def rank(self) -> int:
        return self.u.shape[1]

    @property
    def sign_matrix(self) -> np.ndarray:
        """The partial isometry ``U @ V*`` of the underlying matrix."""
        return self.u @ self.v.conj().T

    @classmethod
    def from_signal(cls, signal: SpectralSignal, pencils=None) -> "TangentSpace":
        """Tangent space of the lifted matrix of a sparse signal."""
        u, v, _ = enhanced_frames(signal, pencils)
        return cls(u, v)


def tangent_project(matrix, tspace: TangentSpace) -> np.ndarray:
    """Orthogonal projection onto the tangent space.

    Parameters
    ----------
    matrix : ndarray
        Matrix of shape ``(rows, cols)``.
    tspace : TangentSpace
        Frames of the reference matrix.

    Returns
    -------
    ndarray
        ``UU* M + M VV* - UU* M VV*``.
    """
    m = np.asarray(matrix, dtype=complex)
    um = tspace.u @ (tspace.u.conj().T @ m)
    mv = (m @ tspace.v) @ tspace.v.conj().T
    umv = um @ tspace.v @ tspace.v.conj().T
    return um + mv - umv


def normal_project(matrix, tspace: TangentSpace) -> np.ndarray:
    """Orthogonal projection onto the complement of the tangent space."""
    m = np.asarray(matrix, dtype=complex)
    return m - tangent_project(m, tspace)


def _check_counts(counts, size: int) -> np.ndarray:
    counts = np.asarray(counts)
    if counts.shape != (size,):
        raise ValueError(f"counts must have shape ({size},)")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    return counts.astype(float)


def apply_sampling(matrix, counts, emap: EnhancementMap) -> np.ndarray:
    """Apply the count-weighted skew-diagonal sampling operator.

    Each skew-diagonal group contributes its normalized basis element
    scaled by how many times that group was sampled, so exhaustive
    single-coverage reproduces the structure projection and repeated
    draws weigh their group proportionally.

    Parameters
    ----------
    matrix : ndarray
        Matrix of shape ``(rows, cols)``.
    counts : ndarray
        Per-group sample counts, shape ``(size,)``, nonnegative.
    emap : EnhancementMap
        Lifting geometry.

    Returns
    -------
    ndarray
        ``sum_a counts[a] * <A_a, M> A_a`` with ``A_a`` the unit basis
        matrix of group ``a``.
    """
    m = np.asarray(matrix, dtype=complex)
    weights = _check_counts(counts, emap.pencil.size)
    coef = weights * group_means(m, emap)
    return coef[emap.cell_to_data].reshape(emap.pencil.matrix_shape)


def group_means(matrix, emap: EnhancementMap) -> np.ndarray:
    """Per-group means of a lifted matrix (group sums over multiplicities)."""
    return emap.group_sums(matrix) / emap.mults


def _structure_frame(emap: EnhancementMap) -> np.ndarray:
    cells = emap.pencil.cells
    frame = np.zeros((cells, emap.pencil.size))
    groups = emap.cell_to_data.reshape(-1)
    frame[np.arange(cells), groups] = 1.0 / np.sqrt(emap.mults[groups])
    return frame


def sampling_operator_matrices(
    emap: EnhancementMap, counts, operator_cap: int = DEFAULT_OPERATOR_CAP
) -> Tuple[np.ndarray, np.ndarray]:
    """Dense matrices of the structure and sampling operators.

    Both act on row-major vectorized lifted matrices.  Intended for desk
    scale inspection; refuses to materialize anything with more than
    ``operator_cap`` cells.

    Parameters
    ----------
    emap : EnhancementMap
        Lifting geometry.
    counts : ndarray
        Per-group sample counts, shape ``(size,)``.
    operator_cap : int
        Largest allowed cell count.

    Returns
    -------
    (ndarray, ndarray)
        ``(A, A_omega)``, each of shape ``(cells, cells)``.  ``A`` is the
        orthogonal projection onto group-constant matrices, ``A_omega``
        its count-weighted counterpart.
    """
    if emap.pencil.cells > operator_cap:
        raise ValueError(
            f"{emap.pencil.cells} cells exceed the operator cap {operator_cap}"
        )
    weights = _check_counts(counts, emap.pencil.size)
    frame = _structure_frame(emap)
    a_full = frame @ frame.T
    a_omega = (frame * weights[None, :]) @ frame.T
    return a_full, a_omega


def _tangent_operator_matrix(tspace: TangentSpace) -> np.ndarray:
    uu = tspace.u @ tspace.u.conj().T
    vv = tspace.v @ tspace.v.conj().T
    rows, cols = uu.shape[0], vv.shape[0]
    eye_r = np.eye(rows)
    eye_c = np.eye(cols)
    return np.kron(uu, eye_c) + np.kron(eye_r, vv.T) - np.kron(uu, vv.T)


def _gap_norm(
    tspace: TangentSpace,
    emap: EnhancementMap,
    counts,
    rescale: float,
    operator_cap: int = DEFAULT_OPERATOR_CAP,
) -> float:
    """Spectral norm of P_T (A - rescale * A_omega) P_T."""
    weights = _check_counts(counts, emap.pencil.size)
    if emap.pencil.cells <= operator_cap:
        a_full, a_omega = sampling_operator_matrices(emap, weights, operator_cap)
        pt = _tangent_operator_matrix(tspace)
        op = pt @ (a_full - rescale * a_omega) @ pt
        op = (op + op.conj().T) / 2
        return float(np.max(np.abs(np.linalg.eigvalsh(op))))

    def operate(m):
        pm = tangent_project(m, tspace)
        gap = structure_project(pm, emap) - apply_sampling(pm, rescale * weights, emap)
        return tangent_project(gap, tspace)

    rng = np.random.default_rng(0)
    shape = emap.pencil.matrix_shape
    x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    x = tangent_project(x, tspace)
    x /= np.linalg.norm(x)
    value = 0.0
    for _ in range(5000):
        y = operate(x)
        norm = np.linalg.norm(y)
        if norm <= 1e-300:
            return 0.0
        new_value = norm
        y /= norm
        if abs(new_value - value) <= 1e-12 * max(1.0, new_value):
            value = new_value
            break
        value = new_value
        x = y
    return float(value)


def concentration_norm(
    tspace: TangentSpace,
    emap: EnhancementMap,
    counts,
    m: Optional[int] = None,
    operator_cap: int = DEFAULT_OPERATOR_CAP,
) -> float:
    """How far the rescaled sampling operator sits from the structure
    projection, seen from the tangent space.

    Parameters
    ----------
    tspace : TangentSpace
        Tangent space of the reference lifted matrix.
    emap : EnhancementMap
        Lifting geometry.
    counts : ndarray
        Per-group sample counts, shape ``(size,)``.
    m : int, optional
        Total sample count; defaults to ``counts.sum()``.
    operator_cap : int
        Cell budget for the dense eigenvalue path; larger problems use
        power iteration on the implicit operator.

    Returns
    -------
    float
        ``|P_T (A - (size/m) A_omega) P_T|`` in spectral norm.  Zero for
        exhaustive single coverage, and below 1/2 in the regime where the
        certificate construction is guaranteed to work.
    """
    weights = _check_counts(counts, emap.pencil.size)
    if m is None:
        m = int(round(float(weights.sum())))
    if m < 1:
        raise ValueError("need at least one sample")
    return _gap_norm(tspace, emap, weights, emap.pencil.size / m, operator_cap)


class GateResult(NamedTuple):
    """Concentration gate outcome: measured norm, threshold, pass flag."""

    norm: float
    threshold: float
    passed: bool


def certificate_gate(
    tspace: TangentSpace,
    emap: EnhancementMap,
    counts,
    m: Optional[int] = None,
    threshold: float = 0.5,
    operator_cap: int = DEFAULT_OPERATOR_CAP,
) -> GateResult:
    """Check the tangent-space concentration precondition.

    Parameters
    ----------
    tspace, emap, counts, m, operator_cap
        As in :func:`concentration_norm`.
    threshold : float
        Pass level for the measured norm.

    Returns
    -------
    GateResult
        Measured norm, the threshold, and whether the norm is below it.
    """
    norm = concentration_norm(tspace, emap, counts, m, operator_cap)
    return GateResult(norm=norm, threshold=threshold, passed=norm <= threshold)


@dataclass(frozen=True)
class GolfingPlan:
    """Batch sampling layout for the golfing construction.

    Attributes
    ----------
    size : int
        Number of skew-diagonal groups (signal entries).
    m : int
        Target total number of samples.
    epsilon : float
        Failure-probability knob controlling the batch count.
    scheme : str
        ``"bernoulli"`` (independent inclusion per batch, union matches
        the target rate) or ``"iid"`` (fixed draws per batch, with
        replacement).
    j0 : int
        Number of batches.
    q : float
        Per-batch expected sampling rate; the construction rescales each
        batch by ``1/q`` so it is an unbiased estimate of the structure
        projection.
    batch_counts : tuple of ndarray
        Per-batch group sample counts, each of shape ``(size,)``.
    """

    size: int
    m: int
    epsilon: float
    scheme: str
    j0: int
    q: float
    batch_counts: Tuple[np.ndarray, ...]

    @property
    def union_count(self) -> int:
        """Number of distinct groups touched by any batch."""
        total = np.zeros(self.size, dtype=np.int64)
        for counts in self.batch_counts:
            total += counts
        return int(np.count_nonzero(total))


def make_golfing_plan(
    size: int,
    m: int,
    epsilon: float = 0.25,
    scheme: str = "bernoulli",
    seed: int = 0,
    j0: Optional[int] = None,
) -> GolfingPlan:
    """Draw the batch layout for a golfing run.

    The batch count is ``ceil(3 ln(size) / ln(1/epsilon))``.  Under the
    Bernoulli scheme each batch includes every group independently with
    probability ``q`` chosen so the union of all batches observes each
    group with probability ``m / size``.  Under the iid scheme each batch
    draws ``ceil(m / j0)`` groups uniformly with replacement.

    Parameters
    ----------
    size : int
        Number of skew-diagonal groups.
    m : int
        Target total sample count; at most ``size`` for the Bernoulli
        scheme.
    epsilon : float
        Failure-probability knob in ``(0, 1)``.
    scheme : str
        ``"bernoulli"`` or ``"iid"``.
    seed : int
        Master seed; batches use independent derived streams.
    j0 : int, optional
        Override the batch count.

    Returns
    -------
    GolfingPlan
    """
    if size < 1:
        raise ValueError("size must be positive")
    if m < 1:
        raise ValueError("need at least one sample")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if scheme not in ("bernoulli", "iid"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if j0 is None:
        j0 = max(1, math.ceil(3 * math.log(size) / math.log(1 / epsilon)))
    if j0 < 1:
        raise ValueError("j0 must be positive")
    batches = []
    if scheme == "bernoulli":
        if m > size:
            raise ValueError("bernoulli scheme needs m <= size")
        rho = m / size
        q = 1.0 - (1.0 - rho) ** (1.0 / j0)
        for i in range(j0):
            rng = derive_rng(seed, 1, i)
            batches.append((rng.random(size) < q).astype(np.int64))
    else:
        per_batch = math.ceil(m / j0)
        q = per_batch / size
        for i in range(j0):
            rng = derive_rng(seed, 1, i)
            draws = rng.integers(0, size, per_batch)
            batches.append(np.bincount(draws, minlength=size).astype(np.int64))
    return GolfingPlan(
        size=size,
        m=int(m),
        epsilon=float(epsilon),
        scheme=scheme,
        j0=int(j0),
        q=float(q),
        batch_counts=tuple(batches),
    )


@dataclass(frozen=True)
class GolfingReport:
    """Everything measured during one golfing run.

    Attributes
    ----------
    j0, q, scheme, epsilon, m, union_count
        Echo of the plan actually used plus how many distinct groups the
        batches touched.
    support_residual : float
        Norm of the structured component of ``sign + W`` outside the
        observed groups; zero by construction up to roundoff.
    tangent_residual : float
        ``|P_T W|_F``, compared against ``tangent_threshold``
        (``1 / (2 size^2)``).
    normal_norm : float
        ``|P_T_perp W|`` in spectral norm, compared against
        ``normal_threshold`` (1/2).
    condition_support, condition_tangent, condition_normal : bool
        The three certificate conditions.
    batch_operator_norms : tuple of float
        Per-batch ``|P_T (A - q^{-1} A_batch) P_T|``; each bounds the
        realized tangent-norm contraction of its batch.
    batch_contractions : tuple of float
        Realized ratios ``|P_T F_i| / |P_T F_{i-1}|`` (nan when the
        previous residual already vanished).
    """

    j0: int
    q: float
    scheme: str
    epsilon: float
    m: int
    union_count: int
    support_residual: float
    tangent_residual: float
    tangent_threshold: float
    normal_norm: float
    normal_threshold: float
    condition_support: bool
    condition_tangent: bool
    condition_normal: bool
    batch_operator_norms: Tuple[float, ...]
    batch_contractions: Tuple[float, ...]

    def to_json_dict(self) -> dict:
        return {
            "j0": self.j0,
            "q": self.q,
            "scheme": self.scheme,
            "epsilon": self.epsilon,
            "m": self.m,
            "union_count": self.union_count,
            "support_residual": self.support_residual,
            "tangent_residual": self.tangent_residual,
            "tangent_threshold": self.tangent_threshold,
            "normal_norm": self.normal_norm,
            "normal_threshold": self.normal_threshold,
            "condition_support": self.condition_support,
            "condition_tangent": self.condition_tangent,
            "condition_normal": self.condition_normal,
            "batch_operator_norms": list(self.batch_operator_norms),
            "batch_contractions": list(self.batch_contractions),
        }


def golfing_certificate(
    signal: SpectralSignal,
    m: int = 0,
    plan: Optional[GolfingPlan] = None,
    pencils=None,
    epsilon: float = 0.25,
    scheme: str = "bernoulli",
    seed: int = 0,
    operator_cap: int = DEFAULT_OPERATOR_CAP,
) -> Tuple[np.ndarray, GolfingReport]:
    """Run the golfing construction and measure the certificate conditions.

    Starting from the sign matrix of the lifted truth, each batch adds an
    unbiased structured estimate of the remaining tangent residual plus
    its unstructured complement, so the accumulated candidate always
    stays inside the span of observed groups while its tangent residual
    shrinks whenever the per-batch operators contract.

    Parameters
    ----------
    signal : SpectralSignal
        Ground-truth sparse signal.
    m : int
        Target sample count (ignored when ``plan`` is given).
    plan : GolfingPlan, optional
        Pre-drawn batch layout.
    pencils : tuple of int, optional
        Pencil split; defaults to the balanced split.
    epsilon : float
        Failure-probability knob for the default plan.
    scheme : str
        Sampling scheme for the default plan.
    seed : int
        Seed for the default plan.
    operator_cap : int
        Cell budget for dense per-batch operator norms.

    Returns
    -------
    (ndarray, GolfingReport)
        The certificate candidate ``W`` of shape ``(rows, cols)`` and the
        measured report.
    """
    if pencils is None:
        pencils = default_pencils(signal.dims)
    pencil = PencilShape(signal.dims, pencils)
    emap = EnhancementMap(pencil)
    tspace = TangentSpace.from_signal(signal, pencils)
    if plan is None:
        plan = make_golfing_plan(pencil.size, m, epsilon=epsilon, scheme=scheme, seed=seed)
    if plan.size != pencil.size:
        raise ValueError("plan size does not match the signal size")

    sign = tspace.sign_matrix
    accum = np.zeros_like(sign)
    tangent_norms = [float(np.linalg.norm(sign))]
    operator_norms = []
    for counts in plan.batch_counts:
        residual = tangent_project(sign - accum, tspace)
        operator_norms.append(
            _gap_norm(tspace, emap, counts, 1.0 / plan.q, operator_cap)
        )
        accum = (
            accum
            + apply_sampling(residual, counts, emap) / plan.q
            + (residual - structure_project(residual, emap))
        )
        tangent_norms.append(
            float(np.linalg.norm(tangent_project(sign - accum, tspace)))
        )

    w = accum - sign
    contractions = []
    for prev, curr in zip(tangent_norms, tangent_norms[1:]):
        contractions.append(curr / prev if prev > 1e-300 else math.nan)

    unobserved = np.ones(pencil.size, dtype=bool)
    for counts in plan.batch_counts:
        unobserved &= counts == 0
    means = group_means(accum, emap)
    support_residual = float(
        math.sqrt(float(np.sum(np.abs(means[unobserved]) ** 2 * emap.mults[unobserved])))
    )

    tangent_residual = tangent_norms[-1]
    tangent_threshold = 1.0 / (2.0 * pencil.size**2)
    normal_norm = float(np.linalg.norm(normal_project(w, tspace), 2))
    report = GolfingReport(
        j0=plan.j0,
        q=plan.q,
        scheme=plan.scheme,
        epsilon=plan.epsilon,
        m=plan.m,
        union_count=plan.union_count,
        support_residual=support_residual,
        tangent_residual=tangent_residual,
        tangent_threshold=tangent_threshold,
        normal_norm=normal_norm,
        normal_threshold=0.5,
        condition_support=support_residual <= SUPPORT_TOL,
        condition_tangent=tangent_residual <= tangent_threshold,
        condition_normal=normal_norm <= 0.5,
        batch_operator_norms=tuple(operator_norms),
        batch_contractions=tuple(contractions),
    )
    return w, report
