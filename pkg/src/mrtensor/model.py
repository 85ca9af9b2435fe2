"""Poisson count model with block-term factor structure.

Each of H terms is a motif: a probability tensor over the cell grid
built as a sum of R_h rank-one products of column-stochastic mode
profiles, mixed by a weight vector that sums to one.  Replicate n
superimposes the motifs with nonnegative usage scores, so the cell
intensity is

    lambda(cell, n) = sum_h upsilon[h, n] *
                      sum_r omega[r] * prod_p phi_p[cell_p, r]

with r running over term h's block.  Because every motif is a
probability tensor, a term's usage scores are its expected event
counts per replicate, and marginalizing a motif over its finer scale
pairs reproduces the coarser-scale motif exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sptensor import SparseCountTensor

MODEL_HEADER = "cpbtd v1"

# Mixing weights or usage row sums at or below this are reported inactive.
RANK_THRESHOLD = 1e-10


@dataclass
class CpBtdModel:
    """Factors, mixing weights, and usage scores of the count model.

    factors[p] is I_p x R_total with the R_h columns of each term
    contiguous; ``omega`` is the flat R_total mixing vector; ``upsilon``
    is H x N.  Columns of inactive components may hold stale values and
    are flagged only through zero weights, never removed, so component
    indexing is stable across updates.
    """

    ranks: tuple[int, ...]
    factors: list[np.ndarray]
    omega: np.ndarray
    upsilon: np.ndarray
    _offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.ranks = tuple(int(r) for r in self.ranks)
        if not self.ranks or any(r < 1 for r in self.ranks):
            raise ValueError("every term needs rank >= 1")
        self._offsets = np.concatenate(
            [[0], np.cumsum(np.asarray(self.ranks, dtype=np.int64))]
        )
        total = int(self._offsets[-1])
        self.factors = [np.ascontiguousarray(f, dtype=np.float64) for f in self.factors]
        self.omega = np.ascontiguousarray(self.omega, dtype=np.float64)
        self.upsilon = np.ascontiguousarray(self.upsilon, dtype=np.float64)
        if not self.factors:
            raise ValueError("need at least one mode factor")
        for f in self.factors:
            if f.ndim != 2 or f.shape[1] != total:
                raise ValueError("factor width must equal the total rank")
            if f.size and (not np.isfinite(f).all() or f.min() < 0):
                raise ValueError("factors must be finite and nonnegative")
        if self.omega.shape != (total,):
            raise ValueError("omega must be flat with one entry per component")
        if self.upsilon.ndim != 2 or self.upsilon.shape[0] != len(self.ranks):
            raise ValueError("upsilon must be H x N")
        for arr in (self.omega, self.upsilon):
            if not np.isfinite(arr).all() or (arr.size and arr.min() < 0):
                raise ValueError("weights and scores must be finite, >= 0")

    # -- structure ---------------------------------------------------------

    @property
    def n_terms(self) -> int:
        return len(self.ranks)

    @property
    def total_rank(self) -> int:
        return int(self._offsets[-1])

    @property
    def n_modes(self) -> int:
        return len(self.factors)

    @property
    def mode_sizes(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def n_replicates(self) -> int:
        return self.upsilon.shape[1]

    def block(self, term: int) -> slice:
        """Column slice of term ``term`` inside factors and omega."""
        if not 0 <= term < self.n_terms:
            raise ValueError("term out of range")
        return slice(int(self._offsets[term]), int(self._offsets[term + 1]))

    def block_of_component(self) -> np.ndarray:
        """Term index of every flat component column."""
        return np.repeat(np.arange(self.n_terms), self.ranks)

    def omega_matrix(self) -> np.ndarray:
        """Block-diagonal R_total x H mixing matrix."""
        out = np.zeros((self.total_rank, self.n_terms))
        for h in range(self.n_terms):
            out[self.block(h), h] = self.omega[self.block(h)]
        return out

    def term_usage(self) -> np.ndarray:
        """Total usage (expected events) per term: row sums of upsilon."""
        return self.upsilon.sum(axis=1)

    def component_scale(self) -> np.ndarray:
        """Expected events per flat component: omega * own term's usage."""
        return self.omega * self.term_usage()[self.block_of_component()]

    def copy(self) -> "CpBtdModel":
        return CpBtdModel(
            self.ranks,
            [f.copy() for f in self.factors],
            self.omega.copy(),
            self.upsilon.copy(),
        )


def intensity_at(model: CpBtdModel, cell, replicate: int) -> float:
    """Model intensity at one cell (0-based) of one replicate."""
    cell = tuple(int(i) for i in cell)
    if len(cell) != model.n_modes:
        raise ValueError("cell must index every non-replicate mode")
    prod = model.omega.copy()
    for p, i in enumerate(cell):
        prod *= model.factors[p][i, :]
    scores = model.upsilon[model.block_of_component(), replicate]
    return float(prod @ scores)


def motif_at_scale(model: CpBtdModel, term: int, scale: int) -> np.ndarray:
    """Render term ``term`` as its origin x destination matrix at a scale.

    Modes must come in (origin, destination) pairs of size 4 per scale.
    The matrix is 4**scale square, row index chaining the origin
    quadrants coarsest-first, and sums to one when the term's profiles
    and weights are stochastic.  Aggregating 4 x 4 blocks reproduces
    the scale - 1 matrix.
    """
    if model.n_modes % 2 != 0:
        raise ValueError("motif rendering needs paired scale modes")
    depth = model.n_modes // 2
    if not 1 <= scale <= depth:
        raise ValueError(f"scale must be in [1, {depth}]")
    if any(size != 4 for size in model.mode_sizes):
        raise ValueError("motif rendering needs quadrant modes of size 4")
    blk = model.block(term)
    size = 4**scale
    out = np.zeros((size, size))
    for r in range(blk.start, blk.stop):
        origin = np.ones(1)
        dest = np.ones(1)
        for s in range(scale):
            origin = np.kron(origin, model.factors[2 * s][:, r])
            dest = np.kron(dest, model.factors[2 * s + 1][:, r])
        out += model.omega[r] * np.outer(origin, dest)
    return out


@dataclass(frozen=True)
class MotifView:
    """One term prepared for inspection: matrices at every scale."""

    term: int
    usage: float
    weights: np.ndarray
    matrices: tuple[np.ndarray, ...]
    effective_rank: int

    @property
    def finest(self) -> np.ndarray:
        return self.matrices[-1]


def motif_view(
    model: CpBtdModel, term: int, threshold: float = RANK_THRESHOLD
) -> MotifView:
    depth = model.n_modes // 2
    return MotifView(
        term=term,
        usage=float(model.term_usage()[term]),
        weights=model.omega[model.block(term)].copy(),
        matrices=tuple(
            motif_at_scale(model, term, s) for s in range(1, depth + 1)
        ),
        effective_rank=effective_rank(model, term, threshold),
    )


@dataclass(frozen=True)
class ScoreSummary:
    """Share-normalized scores: theta columns sum to one, eta scales back."""

    theta: np.ndarray
    eta: np.ndarray


def normalize_scores(model: CpBtdModel) -> ScoreSummary:
    """Split the scores into per-replicate shares and totals.

    theta[:, n] = upsilon[:, n] / eta[n] with eta the column sums, so
    theta * diag(eta) reproduces upsilon.  A replicate with all-zero
    scores has no shares and is an error.
    """
    eta = model.upsilon.sum(axis=0)
    if (eta <= 0).any():
        bad = int(np.flatnonzero(eta <= 0)[0])
        raise ValueError(f"replicate {bad} has zero total score")
    return ScoreSummary(model.upsilon / eta, eta)


def effective_rank(
    model: CpBtdModel, term: int, threshold: float = RANK_THRESHOLD
) -> int:
    """Number of mixing weights of one term above the threshold."""
    return int((model.omega[model.block(term)] > threshold).sum())


def effective_terms(
    model: CpBtdModel, threshold: float = RANK_THRESHOLD
) -> int:
    """Number of terms whose total usage exceeds the threshold."""
    return int((model.term_usage() > threshold).sum())


def objective(model: CpBtdModel, tensor: SparseCountTensor) -> float:
    """Poisson deviance core: sum of intensities minus count-weighted logs.

    The linear term is the exact sum of the intensity over every cell
    (computed from factor column sums, so it does not rely on the
    stochasticity constraints).  A zero intensity at a stored positive
    count makes the objective +inf.
    """
    if tensor.ndim != model.n_modes + 1:
        raise ValueError("tensor order does not match the model")
    if tensor.shape[-1] != model.n_replicates:
        raise ValueError("replicate counts disagree")
    if tensor.shape[:-1] != model.mode_sizes:
        raise ValueError("mode sizes disagree")
    colsum = np.ones(model.total_rank)
    for phi in model.factors:
        colsum *= phi.sum(axis=0)
    linear = float(colsum @ model.component_scale())
    if tensor.nnz == 0:
        return linear
    from .sptensor import factor_rows

    rows = factor_rows(tensor.indices[:, :-1], model.factors)
    # Row-wise intensity: mix components, then pick each entry's replicate.
    mixed = rows * model.omega
    scores = model.upsilon[model.block_of_component()][:, tensor.indices[:, -1]]
    lam = np.einsum("jr,rj->j", mixed, scores)
    if (lam <= 0).any():
        return math.inf
    return linear - float(tensor.counts @ np.log(lam))


def write_model(model: CpBtdModel, path) -> None:
    """Write the ``cpbtd v1`` text form (column-major sections)."""
    def fmt(arr):
        return " ".join(format(v, ".17g") for v in arr)

    with open(path, "w") as handle:
        handle.write(f"{MODEL_HEADER}\n")
        sizes = ",".join(str(s) for s in model.mode_sizes)
        ranks = ",".join(str(r) for r in model.ranks)
        handle.write(
            f"P={model.n_modes} I={sizes} H={model.n_terms} "
            f"R={ranks} N={model.n_replicates}\n"
        )
        for p, phi in enumerate(model.factors, start=1):
            handle.write(f"phi {p}\n")
            for r in range(model.total_rank):
                handle.write(fmt(phi[:, r]) + "\n")
        handle.write("omega\n")
        for h in range(model.n_terms):
            handle.write(fmt(model.omega[model.block(h)]) + "\n")
        handle.write("upsilon\n")
        for n in range(model.n_replicates):
            handle.write(fmt(model.upsilon[:, n]) + "\n")


def _read_floats(handle, expected, label):
    line = handle.readline()
    if not line:
        raise ValueError(f"truncated model file inside {label}")
    values = np.array([float(v) for v in line.split()])
    if len(values) != expected:
        raise ValueError(
            f"{label}: expected {expected} values, found {len(values)}"
        )
    return values


def read_model(path) -> CpBtdModel:
    """Read and validate the ``cpbtd v1`` text form."""
    with open(path, "r") as handle:
        if handle.readline().strip() != MODEL_HEADER:
            raise ValueError("not a cpbtd v1 model file")
        meta = handle.readline().split()
        try:
            parsed = dict(f.split("=", 1) for f in meta)
            n_modes = int(parsed["P"])
            sizes = [int(v) for v in parsed["I"].split(",")]
            n_terms = int(parsed["H"])
            ranks = tuple(int(v) for v in parsed["R"].split(","))
            n_rep = int(parsed["N"])
        except (KeyError, ValueError):
            raise ValueError("malformed model metadata line") from None
        if len(sizes) != n_modes or len(ranks) != n_terms:
            raise ValueError("model metadata is inconsistent")
        total = sum(ranks)
        factors = []
        for p in range(1, n_modes + 1):
            if handle.readline().split() != ["phi", str(p)]:
                raise ValueError(f"expected section 'phi {p}'")
            cols = [
                _read_floats(handle, sizes[p - 1], f"phi {p}")
                for _ in range(total)
            ]
            factors.append(np.column_stack(cols))
        if handle.readline().strip() != "omega":
            raise ValueError("expected section 'omega'")
        omega = np.concatenate(
            [_read_floats(handle, r, "omega") for r in ranks]
        )
        if handle.readline().strip() != "upsilon":
            raise ValueError("expected section 'upsilon'")
        ups = np.column_stack(
            [_read_floats(handle, n_terms, "upsilon") for _ in range(n_rep)]
        ) if n_rep else np.empty((n_terms, 0))
        if handle.readline():
            raise ValueError("trailing content after upsilon section")
    return CpBtdModel(ranks, factors, omega, ups)
