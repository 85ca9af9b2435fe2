"""Sparse count tensors and factor-model design matrices.

Counts are stored coordinate-wise: an (nnz, ndim) index array plus a
count vector, canonically sorted in ascending lexicographic order with
duplicates merged.  Indices are 0-based in memory; the text format and
other presentation surfaces are 1-based.

For a factor model with column-stochastic mode factors Phi^(p) and
block-normalized mixing weights, the full design matrix over all cells
is the Khatri-Rao product of the factors times the block-diagonal
weight matrix.  Its defining property is that every column sums to one
over the complete cell grid, so fitted coefficient blocks carry the
expected counts.  The full design is never materialized: solvers only
ever need its rows at observed cells, which are Hadamard products of
factor rows and cost O(nnz * R) memory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FORMAT_HEADER = "mrtensor v1"

# Dense reconstruction refuses grids above this many cells.
DENSE_CELL_CAP = 1_000_000


@dataclass
class SparseCountTensor:
    """Canonical sparse nonnegative integer count tensor."""

    shape: tuple[int, ...]
    indices: np.ndarray
    counts: np.ndarray
    _mode_groups: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        self.shape = tuple(int(d) for d in self.shape)
        if any(d <= 0 for d in self.shape):
            raise ValueError("all mode sizes must be positive")
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.indices.ndim != 2 or self.indices.shape[1] != len(self.shape):
            raise ValueError("indices must be (nnz, ndim)")
        if self.counts.shape != (self.indices.shape[0],):
            raise ValueError("counts must align with indices")
        if self.counts.size:
            if self.counts.min() <= 0:
                raise ValueError("stored counts must be positive")
            upper = np.asarray(self.shape, dtype=np.int64)
            if self.indices.min() < 0 or (self.indices >= upper).any():
                raise ValueError("index out of range for shape")
            order = np.lexsort(self.indices.T[::-1])
            if not np.array_equal(order, np.arange(len(order))):
                raise ValueError("entries must be sorted lexicographically")
            if (np.diff(self.indices, axis=0) == 0).all(axis=1).any():
                raise ValueError("duplicate entries")

    @classmethod
    def from_entries(cls, shape, indices, counts) -> "SparseCountTensor":
        """Build the canonical form: merge duplicates, sort, drop zeros."""
        indices = np.asarray(indices, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if indices.ndim != 2:
            indices = indices.reshape(len(counts), -1)
        if len(indices):
            order = np.lexsort(indices.T[::-1])
            indices = indices[order]
            counts = counts[order]
            new_group = np.ones(len(indices), dtype=bool)
            new_group[1:] = (np.diff(indices, axis=0) != 0).any(axis=1)
            starts = np.flatnonzero(new_group)
            counts = np.add.reduceat(counts, starts)
            indices = indices[starts]
            keep = counts != 0
            indices, counts = indices[keep], counts[keep]
        return cls(tuple(shape), indices, counts)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def nnz(self) -> int:
        return len(self.counts)

    @property
    def n_cells(self) -> int:
        return int(np.prod(np.asarray(self.shape, dtype=np.int64)))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_replicates(self) -> int:
        return self.shape[-1]

    def mode_slice_rows(self, mode: int, value: int) -> np.ndarray:
        """Positions of the stored entries with indices[:, mode] == value.

        Grouped once per mode on first use and answered by binary
        search afterwards, so repeated slicing during a fit is cheap.
        """
        if not 0 <= mode < self.ndim:
            raise ValueError("mode out of range")
        if not 0 <= value < self.shape[mode]:
            raise ValueError("value out of range")
        cached = self._mode_groups.get(mode)
        if cached is None:
            order = np.argsort(self.indices[:, mode], kind="stable")
            bounds = np.searchsorted(
                self.indices[order, mode], np.arange(self.shape[mode] + 1)
            )
            cached = (order, bounds)
            self._mode_groups[mode] = cached
        order, bounds = cached
        return order[bounds[value] : bounds[value + 1]]

    def densify(self) -> np.ndarray:
        """Dense counts; guarded by the cell cap."""
        if self.n_cells > DENSE_CELL_CAP:
            raise ValueError(
                f"{self.n_cells} cells exceed the dense cap {DENSE_CELL_CAP}"
            )
        out = np.zeros(self.shape, dtype=np.int64)
        if self.nnz:
            out[tuple(self.indices.T)] = self.counts
        return out


def write_tensor(tensor: SparseCountTensor, path) -> None:
    """Write the ``mrtensor v1`` text form (1-based, lexicographic)."""
    with open(path, "w") as handle:
        shape = ",".join(str(d) for d in tensor.shape)
        handle.write(
            f"{FORMAT_HEADER} modes={tensor.ndim} shape={shape} "
            f"nnz={tensor.nnz}\n"
        )
        for row, c in zip(tensor.indices + 1, tensor.counts):
            handle.write(" ".join(str(v) for v in row) + f" {c}\n")


def read_tensor(path) -> SparseCountTensor:
    """Read and validate the ``mrtensor v1`` text form."""
    with open(path, "r") as handle:
        header = handle.readline().strip()
        fields = header.split()
        if fields[:2] != FORMAT_HEADER.split() or len(fields) != 5:
            raise ValueError(f"malformed header: {header!r}")
        try:
            parsed = dict(f.split("=", 1) for f in fields[2:])
            modes = int(parsed["modes"])
            shape = tuple(int(d) for d in parsed["shape"].split(","))
            nnz = int(parsed["nnz"])
        except (KeyError, ValueError):
            raise ValueError(f"malformed header: {header!r}") from None
        if modes != len(shape):
            raise ValueError("header modes disagrees with shape")
        rows = np.loadtxt(
            handle, dtype=np.int64, ndmin=2, usecols=range(modes + 1)
        ) if nnz else np.empty((0, modes + 1), dtype=np.int64)
    if rows.shape != (nnz, modes + 1):
        raise ValueError(
            f"expected {nnz} entry lines of {modes + 1} fields, "
            f"found shape {rows.shape}"
        )
    tensor = SparseCountTensor(shape, rows[:, :modes] - 1, rows[:, modes])
    return tensor


@dataclass(frozen=True)
class DesignSubmatrix:
    """Rows of a factor-model design at a subset of stored entries.

    ``values[j]`` is the design row for tensor entry ``row_map[j]``;
    columns follow the coefficient layout of the matching subproblem.
    """

    values: np.ndarray
    row_map: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or len(self.row_map) != len(self.values):
            raise ValueError("values and row_map must align")
        if self.values.size and self.values.min() < 0:
            raise ValueError("design values must be nonnegative")


def factor_rows(
    indices: np.ndarray, factors: list[np.ndarray], skip: int | None = None
) -> np.ndarray:
    """Hadamard products of factor rows at the given cell indices.

    Column r of the result is prod_{p != skip} factors[p][indices[:, p], r];
    with no ``skip`` the product runs over every factor.  This is the
    row-sampled Khatri-Rao product (columnwise), never densified.
    """
    n = len(indices)
    width = factors[0].shape[1]
    out = np.ones((n, width))
    for p, phi in enumerate(factors):
        if p == skip:
            continue
        out *= phi[indices[:, p], :]
    return out


def design_for_replicate(
    tensor: SparseCountTensor,
    replicate: int,
    factors: list[np.ndarray],
    omega_matrix: np.ndarray,
) -> DesignSubmatrix:
    """Design rows of one replicate's score regression.

    One row per stored entry of the replicate, one column per term:
    row j is the Hadamard product of factor rows at the entry's cell,
    mixed through the block-diagonal weight matrix.  A replicate with
    no events yields an empty 0 x H design.
    """
    if len(factors) != tensor.ndim - 1:
        raise ValueError("need one factor per non-replicate mode")
    rows = tensor.mode_slice_rows(tensor.ndim - 1, replicate)
    base = factor_rows(tensor.indices[rows], factors)
    return DesignSubmatrix(base @ omega_matrix, rows)


def design_for_mode_slice(
    tensor: SparseCountTensor,
    mode: int,
    value: int,
    factors: list[np.ndarray],
    psi: np.ndarray,
) -> DesignSubmatrix:
    """Design rows of one mode value's factor regression.

    ``psi`` holds the replicate profiles (n_replicates x R); factor
    ``mode`` is excluded from the Hadamard product since its rows are
    the unknowns of the subproblem.
    """
    if len(factors) != tensor.ndim - 1:
        raise ValueError("need one factor per non-replicate mode")
    if not 0 <= mode < tensor.ndim - 1:
        raise ValueError("mode out of range")
    rows = tensor.mode_slice_rows(mode, value)
    idx = tensor.indices[rows]
    base = factor_rows(idx, factors, skip=mode)
    return DesignSubmatrix(base * psi[idx[:, -1], :], rows)


def dense_reconstruct(
    factors: list[np.ndarray],
    omega_matrix: np.ndarray,
    upsilon: np.ndarray,
) -> np.ndarray:
    """Dense intensity grid of a factor model (small shapes only).

    Returns an array of shape (I_1, ..., I_P, N).  Intended for
    oracle-style cross-checks; raises if the grid exceeds the dense
    cell cap.
    """
    sizes = [phi.shape[0] for phi in factors]
    n = upsilon.shape[1]
    cells = int(np.prod(np.asarray(sizes + [n], dtype=np.int64)))
    if cells > DENSE_CELL_CAP:
        raise ValueError(f"{cells} cells exceed the dense cap {DENSE_CELL_CAP}")
    width = factors[0].shape[1]
    full = np.ones((1, width))
    for phi in factors:
        full = (full[:, None, :] * phi[None, :, :]).reshape(-1, width)
    lam = full @ (omega_matrix @ upsilon)
    return lam.reshape(*sizes, n)
