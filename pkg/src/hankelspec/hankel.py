"""K-fold Hankel enhancement: index maps, operators, projections.

The enhanced matrix of a K-dimensional data array has one row per
multi-index p in prod([0,k_j)) and one column per multi-index q in
prod([0, n_j - k_j + 1)); cell (p, q) holds the data entry at p + q.
For K = 1 this is the classic Hankel lift; for K > 1 the row-major
flattening of (p, q) reproduces the nested block-Hankel construction up
to a fixed permutation of rows and columns, which leaves singular
values, ranks, and all group structure unchanged.

Every data index a owns the skew-diagonal cell group {(p, q) : p+q = a}
of size ``mults[a]``; the groups partition the cells.  ``enhance`` is an
isometry from the multiplicity-weighted inner product on data arrays to
the Frobenius inner product, and ``group_sums`` is its exact adjoint.

Dense materialization is guarded by a configurable cell cap; beyond the
cap only the implicit FFT-convolution operators are available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft
from scipy.sparse.linalg import LinearOperator

DENSE_CELL_CAP = 16_000_000


def default_pencils(dims) -> tuple:
    """Per-axis pencil split ceil((n+1)/2), the most balanced choice."""
    return tuple((int(n) + 2) // 2 for n in dims)


@dataclass(frozen=True)
class PencilShape:
    """Data dimensions plus per-axis pencil parameters.

    ``pencils[j]`` rows are taken along axis j, leaving
    ``dims[j] - pencils[j] + 1`` columns, so the enhanced matrix is
    (prod pencils) x (prod cols).
    """

    dims: tuple
    pencils: tuple

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        pencils = tuple(int(k) for k in self.pencils)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "pencils", pencils)
        if len(dims) != len(pencils):
            raise ValueError("pencils must match dims in length")
        if not dims:
            raise ValueError("dims must be non-empty")
        for n, k in zip(dims, pencils):
            if n < 1:
                raise ValueError("dims must be positive")
            if not (1 <= k <= n):
                raise ValueError(f"pencil {k} outside [1, {n}]")

    @property
    def order(self) -> int:
        return len(self.dims)

    @property
    def row_shape(self) -> tuple:
        return self.pencils

    @property
    def col_shape(self) -> tuple:
        return tuple(n - k + 1 for n, k in zip(self.dims, self.pencils))

    @property
    def rows(self) -> int:
        return int(np.prod(self.row_shape))

    @property
    def cols(self) -> int:
        return int(np.prod(self.col_shape))

    @property
    def cells(self) -> int:
        return self.rows * self.cols

    @property
    def matrix_shape(self) -> tuple:
        return (self.rows, self.cols)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))


class EnhancementMap:
    """Cell map and multiplicities for one pencil geometry.

    The dense cell index array is built lazily and only when the cell
    count does not exceed ``dense_cell_cap``; multiplicities are always
    available since they factor across axes.
    """

    def __init__(self, pencil: PencilShape, dense_cell_cap: int = DENSE_CELL_CAP):
        self.pencil = pencil
        self.dense_cell_cap = int(dense_cell_cap)

    @cached_property
    def axis_mults(self) -> list:
        out = []
        for n, k in zip(self.pencil.dims, self.pencil.pencils):
            a = np.arange(n)
            c = n - k + 1
            out.append(np.minimum.reduce([a + 1, n - a, np.full(n, min(k, c))]))
        return out

    @cached_property
    def mults(self) -> np.ndarray:
        """Group sizes per data index, flattened in row-major order."""
        w = self.axis_mults[0]
        for axis in self.axis_mults[1:]:
            w = np.multiply.outer(w, axis)
        return w.reshape(-1).astype(np.int64)

    @cached_property
    def cell_to_data(self) -> np.ndarray:
        """(rows, cols) array of flat data indices; dense-path backbone."""
        shape = self.pencil
        if shape.cells > self.dense_cell_cap:
            raise ValueError(
                f"{shape.cells} cells exceed the dense cap {self.dense_cell_cap}; "
                "use the implicit operators"
            )
        P = np.stack(np.unravel_index(np.arange(shape.rows), shape.row_shape))
        Q = np.stack(np.unravel_index(np.arange(shape.cols), shape.col_shape))
        joint = tuple(P[k][:, None] + Q[k][None, :] for k in range(shape.order))
        return np.ravel_multi_index(joint, shape.dims)

    def group_cells(self, a) -> list:
        """All (row, col) cells holding data index a (tuple or flat int)."""
        if np.ndim(a) > 0:
            a = int(np.ravel_multi_index(tuple(a), self.pencil.dims))
        rows, cols = np.nonzero(self.cell_to_data == a)
        return [(int(r), int(c)) for r, c in zip(rows, cols)]

    def group_sums(self, matrix) -> np.ndarray:
        """Per-group sums of a lifted matrix; see :func:`group_sums`."""
        return group_sums(matrix, self)

    @cached_property
    def fft_shape(self) -> tuple:
        return tuple(scipy.fft.next_fast_len(n) for n in self.pencil.dims)


def enhance(data, emap: EnhancementMap) -> np.ndarray:
    """Lift a data array to its enhanced (K-fold Hankel) matrix."""
    data = np.asarray(data)
    if data.shape != emap.pencil.dims:
        raise ValueError(f"data shape {data.shape} != {emap.pencil.dims}")
    return data.reshape(-1)[emap.cell_to_data]


def group_sums(matrix, emap: EnhancementMap) -> np.ndarray:
    """Sum matrix entries over each skew-diagonal group (adjoint of enhance)."""
    matrix = np.asarray(matrix)
    shape = emap.pencil
    if matrix.shape != (shape.rows, shape.cols):
        raise ValueError(f"matrix shape {matrix.shape} != {(shape.rows, shape.cols)}")
    flat = matrix.reshape(-1)
    idx = emap.cell_to_data.reshape(-1)
    total = shape.size
    out = np.bincount(idx, weights=flat.real, minlength=total).astype(complex)
    if np.iscomplexobj(flat):
        out += 1j * np.bincount(idx, weights=flat.imag, minlength=total)
    return out


def dehance(matrix, emap: EnhancementMap) -> np.ndarray:
    """Average each cell group back to a data array (left inverse of enhance)."""
    means = group_sums(matrix, emap) / emap.mults
    return means.reshape(emap.pencil.dims)


def structure_project(matrix, emap: EnhancementMap, observations=None) -> np.ndarray:
    """Project onto structured matrices, then enforce observed groups.

    Each group is replaced by its mean; if an observation set is given,
    groups of observed indices are overwritten with the observed values.
    """
    means = group_sums(matrix, emap) / emap.mults
    if observations is not None:
        if tuple(observations.dims) != emap.pencil.dims:
            raise ValueError("observation dims do not match the map")
        means[observations.flat_indices()] = np.asarray(observations.values)
    return means[emap.cell_to_data]


def basis_matrix(a, emap: EnhancementMap) -> np.ndarray:
    """Unit-Frobenius matrix supported on the cell group of data index a."""
    dims = emap.pencil.dims
    if np.ndim(a) > 0:
        if any(not (0 <= i < n) for i, n in zip(a, dims)):
            raise ValueError(f"index {tuple(a)} outside dims {dims}")
        flat = int(np.ravel_multi_index(tuple(a), dims))
    else:
        flat = int(a)
        if not (0 <= flat < emap.pencil.size):
            raise ValueError(f"flat index {flat} outside dims {dims}")
    out = np.zeros((emap.pencil.rows, emap.pencil.cols))
    out[emap.cell_to_data == flat] = 1.0 / math.sqrt(emap.mults[flat])
    return out


def _spatial_axes(order: int) -> tuple:
    return tuple(range(1, order + 1))


def _reverse_spatial(block: np.ndarray) -> np.ndarray:
    return block[(slice(None),) + (slice(None, None, -1),) * (block.ndim - 1)]


class EnhancedOperator(LinearOperator):
    """Matrix-free enhanced-matrix products via FFT convolution.

    The product X_e @ v is a valid-mode correlation of the data array
    with v laid out on the column grid, so one forward FFT of the data
    (cached here) plus one FFT/inverse-FFT pair per applied block column
    realizes matvec, rmatvec, and their batched variants in
    O(N log N) per vector.
    """

    def __init__(self, data, emap: EnhancementMap):
        data = np.asarray(data, dtype=complex)
        if data.shape != emap.pencil.dims:
            raise ValueError(f"data shape {data.shape} != {emap.pencil.dims}")
        self.emap = emap
        self._fdata = scipy.fft.fftn(data, s=emap.fft_shape)
        super().__init__(dtype=np.complex128, shape=(emap.pencil.rows, emap.pencil.cols))

    def _convolve_blocks(self, blocks: np.ndarray, out_slices: tuple) -> np.ndarray:
        axes = _spatial_axes(blocks.ndim - 1)
        fb = scipy.fft.fftn(blocks, s=self.emap.fft_shape, axes=axes)
        conv = scipy.fft.ifftn(self._fdata[None] * fb, axes=axes)
        return conv[(slice(None),) + out_slices]

    def _matmat(self, B):
        shape = self.emap.pencil
        B = np.asarray(B, dtype=complex)
        blocks = _reverse_spatial(B.T.reshape((B.shape[1],) + shape.col_shape))
        sl = tuple(slice(c - 1, n) for c, n in zip(shape.col_shape, shape.dims))
        out = self._convolve_blocks(blocks, sl)
        return out.reshape(B.shape[1], shape.rows).T

    def _rmatmat(self, U):
        shape = self.emap.pencil
        U = np.asarray(U, dtype=complex)
        blocks = _reverse_spatial(np.conj(U).T.reshape((U.shape[1],) + shape.row_shape))
        sl = tuple(slice(k - 1, n) for k, n in zip(shape.row_shape, shape.dims))
        out = self._convolve_blocks(blocks, sl)
        return np.conj(out.reshape(U.shape[1], shape.cols)).T

    def _matvec(self, v):
        return self._matmat(v.reshape(-1, 1)).reshape(-1)

    def _rmatvec(self, u):
        return self._rmatmat(u.reshape(-1, 1)).reshape(-1)


def implicit_matvec(data, emap: EnhancementMap, vector) -> np.ndarray:
    """Enhanced-matrix product X_e @ vector without materializing X_e."""
    vector = np.asarray(vector, dtype=complex)
    if vector.shape != (emap.pencil.cols,):
        raise ValueError(f"vector length {vector.shape} != {emap.pencil.cols}")
    return EnhancedOperator(data, emap).matvec(vector)


def implicit_rmatvec(data, emap: EnhancementMap, vector) -> np.ndarray:
    """Adjoint product X_e^H @ vector without materializing X_e."""
    vector = np.asarray(vector, dtype=complex)
    if vector.shape != (emap.pencil.rows,):
        raise ValueError(f"vector length {vector.shape} != {emap.pencil.rows}")
    return EnhancedOperator(data, emap).rmatvec(vector)


def lowrank_group_sums(U, s, Vh, emap: EnhancementMap) -> np.ndarray:
    """Group sums of (U * s) @ Vh computed from the factors by FFT.

    The skew-diagonal sum of a rank-1 term u v^T is the full linear
    convolution of u on the row grid with v on the column grid, whose
    length is exactly the data extent per axis; components are
    accumulated in the frequency domain so a single inverse FFT serves
    all of them.
    """
    shape = emap.pencil
    U = np.asarray(U, dtype=complex)
    Vh = np.asarray(Vh, dtype=complex)
    s = np.asarray(s, dtype=float)
    b = U.shape[1]
    if b == 0:
        return np.zeros(shape.size, dtype=complex)
    axes = _spatial_axes(shape.order)
    fu = scipy.fft.fftn(U.T.reshape((b,) + shape.row_shape), s=emap.fft_shape, axes=axes)
    fv = scipy.fft.fftn(Vh.reshape((b,) + shape.col_shape), s=emap.fft_shape, axes=axes)
    spectrum = np.tensordot(s, fu * fv, axes=(0, 0))
    conv = scipy.fft.ifftn(spectrum)
    return conv[tuple(slice(0, n) for n in shape.dims)].reshape(-1)
