"""Block-coordinate fitting of the Poisson block-term count model.

Every block update is a bundle of identity-link Poisson regressions

    minimize  sum_k b_k - sum_j x_j log(sum_k a_jk b_k)   over b >= 0

solved by a majorize-minimize scheme: the log of a sum is bounded below
through Jensen's inequality at the current iterate, which splits each
observation across coefficients proportionally to their current
contribution and gives the closed-form sweep

    b_k <- b_k * sum_j a_jk x_j / (A b)_j .

The objective only involves observations with positive counts, every
sweep keeps the iterate nonnegative, and with a column-stochastic
design the coefficient total is conserved at sum(x) on every sweep.

Group shrinkage augments the objective with beta * sum_k log(group_k
sum + epsilon), a concave log-sum penalty.  Majorizing the logs by
tangent lines turns each sweep into the same closed form scaled by the
reweighting 1 / (1 + beta / (epsilon + old group sum)), which starves
small coefficient groups at a rate that grows as they shrink: an
adaptive pull to zero that leaves large groups nearly untouched.

The outer loop alternates the replicate-score block with one block per
tensor mode.  Mode blocks are solved in the mass-carrying variables
A = Phi * diag(component totals), which keeps each row subproblem an
instance of the regression above; afterwards the columns are
renormalized onto the probability simplex, with the column masses
folded back into the mixing weights and usage scores so the intensity
function is preserved exactly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .model import (
    CpBtdModel,
    RANK_THRESHOLD,
    effective_terms,
    objective,
)
from .sptensor import (
    SparseCountTensor,
    design_for_mode_slice,
    design_for_replicate,
    factor_rows,
)

# Component mass at or below this is treated as numerically dead: the
# column is frozen and excluded from renormalization.
DEAD_FLOOR = 1e-300


@dataclass
class SolverConfig:
    """Knobs shared by both fitting backends.

    ``rank`` may be one bound for every term or a per-term sequence.
    ``beta`` scales with the number of positive observations J of the
    block being solved (rule "subproblem") or with a fixed
    ``global_observations`` count (rule "global"); inside a fit both
    rules see every stored entry, so they coincide unless a global
    count is pinned explicitly.  ``beta = 0`` disables shrinkage.
    """

    n_terms: int = 500
    rank: int | tuple[int, ...] = 5
    beta: float = 1e-3
    beta_rule: str = "subproblem"
    global_observations: int | None = None
    epsilon: float = 1e-8
    max_outer: int = 100
    max_inner: int = 250
    inner_tol: float = 1e-6
    outer_tol: float = 1e-8
    seed: int = 0
    em_entry_cap: int = 50_000_000

    def __post_init__(self):
        if self.n_terms < 1:
            raise ValueError("n_terms must be >= 1")
        if isinstance(self.rank, (int, np.integer)):
            if self.rank < 1:
                raise ValueError("rank must be >= 1")
        else:
            self.rank = tuple(int(r) for r in self.rank)
            if len(self.rank) != self.n_terms or any(r < 1 for r in self.rank):
                raise ValueError("need one positive rank per term")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.beta_rule not in ("subproblem", "global"):
            raise ValueError(f"unknown beta_rule {self.beta_rule!r}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_outer < 0 or self.max_inner < 1:
            raise ValueError("iteration caps out of range")
        if self.inner_tol <= 0 or self.outer_tol <= 0:
            raise ValueError("tolerances must be positive")

    def resolved_ranks(self) -> tuple[int, ...]:
        if isinstance(self.rank, tuple):
            return self.rank
        return (int(self.rank),) * self.n_terms

    def shrinkage_strength(self, n_obs: int) -> float:
        """Effective penalty strength for a block with n_obs positive counts."""
        if self.beta == 0:
            return 0.0
        if self.beta_rule == "global" and self.global_observations is not None:
            n_obs = self.global_observations
        return self.beta * n_obs


@dataclass
class FitReport:
    """Per-outer-iteration trace of a fit.

    Row 0 describes the initialization.  ``objective`` records the
    monitored objective: the Poisson deviance core plus, when
    shrinkage is on, the log-sum penalties of every block; it is
    nonincreasing by construction.
    """

    backend: str
    objective: list[float]
    inner_iterations: list[int]
    effective_terms: list[int]
    converged: bool
    duration: float
    rejected_blocks: int = 0

    @property
    def outer_iterations(self) -> int:
        return len(self.objective) - 1


def write_report(report: FitReport, path) -> None:
    with open(path, "w") as handle:
        handle.write("outer_iter,objective,inner_iters_total,effective_H\n")
        rows = zip(
            report.objective, report.inner_iterations, report.effective_terms
        )
        for k, (obj, inner, eff) in enumerate(rows):
            handle.write(f"{k},{obj:.17g},{inner},{eff}\n")


def read_report(path) -> FitReport:
    with open(path, "r") as handle:
        header = handle.readline().strip()
        if header != "outer_iter,objective,inner_iters_total,effective_H":
            raise ValueError("not a fit report CSV")
        obj, inner, eff = [], [], []
        for k, line in enumerate(handle):
            parts = line.strip().split(",")
            if len(parts) != 4 or int(parts[0]) != k:
                raise ValueError(f"malformed report row {k}")
            obj.append(float(parts[1]))
            inner.append(int(parts[2]))
            eff.append(int(parts[3]))
    return FitReport(
        backend="unknown",
        objective=obj,
        inner_iterations=inner,
        effective_terms=eff,
        converged=False,
        duration=float("nan"),
    )


class SolverError(RuntimeError):
    """Fit aborted; carries the last consistent state for inspection."""

    def __init__(self, message, model=None, report=None):
        super().__init__(message)
        self.model = model
        self.report = report


def _stack_columns(designs, counts):
    sizes = np.array([len(x) for x in counts], dtype=np.int64)
    width = designs[0].shape[1] if designs else 0
    stacked = (
        np.vstack([np.asarray(d, dtype=np.float64) for d in designs])
        if sizes.sum()
        else np.empty((0, width))
    )
    x = (
        np.concatenate([np.asarray(c, dtype=np.float64) for c in counts])
        if sizes.sum()
        else np.empty(0)
    )
    col_of = np.repeat(np.arange(len(sizes)), sizes)
    return stacked, x, col_of, sizes


def mm_poisson_regression_group(
    designs,
    counts,
    start: np.ndarray,
    beta: float = 0.0,
    epsilon: float = 1e-8,
    tol: float = 1e-6,
    max_iter: int = 250,
) -> tuple[np.ndarray, int]:
    """Jointly solve one Poisson regression per column under group shrinkage.

    Parameters
    ----------
    designs, counts : sequences, one per column
        designs[c] is (J_c, K) nonnegative, counts[c] positive counts.
        Columns may be empty; their coefficients decay to zero.
    start : (K, n_columns) nonnegative array
        Initial coefficients; zero entries stay zero (the update is
        multiplicative), which is how inactive components are kept
        frozen across calls.
    beta, epsilon
        Strength and offset of the penalty
        beta * sum_k log(epsilon + sum_c b[k, c]).

    Returns
    -------
    (B, sweeps): the coefficient matrix and the number of sweeps run.
    Each sweep applies the reweighted multiplicative update to every
    column with the reweighting held at the sweep's starting point; the
    penalized objective never increases from sweep to sweep.
    """
    B = np.array(start, dtype=np.float64, copy=True)
    if B.ndim != 2 or B.shape[1] != len(designs) or len(designs) != len(counts):
        raise ValueError("start must be (K, n_columns) matching the data")
    if not np.isfinite(B).all() or (B.size and B.min() < 0):
        raise ValueError("start must be finite and nonnegative")
    for c, (d, xc) in enumerate(zip(designs, counts)):
        if np.asarray(d).shape != (len(np.atleast_1d(xc)), B.shape[0]):
            raise ValueError(f"design for column {c} must be (J_c, K)")
    stacked, x, col_of, sizes = _stack_columns(designs, counts)
    if stacked.size:
        if not np.isfinite(stacked).all() or stacked.min() < 0:
            raise ValueError("designs must be finite and nonnegative")
        if not np.isfinite(x).all() or x.min() <= 0:
            raise ValueError("counts must be positive and finite")
        dead_rows = ~(stacked > 0).any(axis=1)
        if dead_rows.any():
            j = int(np.flatnonzero(dead_rows)[0])
            raise ValueError(
                f"infeasible row: observation {j} has a positive count "
                "but an all-zero design row"
            )
    starts = np.concatenate([[0], np.cumsum(sizes)])[:-1]
    live = starts[sizes > 0]
    numer = np.zeros_like(B)
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        if beta > 0:
            w = 1.0 / (1.0 + beta / (epsilon + B.sum(axis=1)))
        else:
            w = None
        if stacked.size:
            lam = np.einsum("jk,jk->j", stacked, B[:, col_of].T)
            if (lam <= 0).any():
                raise ValueError(
                    "zero intensity at a positive count; the iterate "
                    "cannot support the data"
                )
            contrib = stacked * (x / lam)[:, None]
            numer[:] = 0.0
            numer[:, sizes > 0] = np.add.reduceat(contrib, live, axis=0).T
        else:
            numer[:] = 0.0
        new = B * numer
        if w is not None:
            new *= w[:, None]
        delta = np.abs(new - B) / np.maximum(np.abs(B), 1e-30)
        B = new
        if not delta.size or delta.max() < tol:
            break
    return B, sweeps


def mm_poisson_regression(
    design: np.ndarray,
    counts: np.ndarray,
    start: np.ndarray,
    tol: float = 1e-6,
    max_iter: int = 250,
) -> tuple[np.ndarray, int]:
    """Single unpenalized Poisson regression; see the group form."""
    start = np.asarray(start, dtype=np.float64)
    B, sweeps = mm_poisson_regression_group(
        [np.asarray(design, dtype=np.float64)],
        [np.asarray(counts, dtype=np.float64)],
        start.reshape(-1, 1),
        beta=0.0,
        tol=tol,
        max_iter=max_iter,
    )
    return B[:, 0], sweeps


def poisson_objective(design, counts, coef) -> float:
    """Objective of one regression instance (for tests and oracles)."""
    lam = np.asarray(design) @ np.asarray(coef)
    if (lam <= 0).any():
        return math.inf
    return float(np.sum(coef) - np.asarray(counts) @ np.log(lam))


def initialize(
    config: SolverConfig, shape: tuple[int, ...], total_count: float
) -> CpBtdModel:
    """Deterministic random starting point for both backends.

    Factor columns are normalized positive uniforms; mixing weights
    are uniform within each term; scores start near the count mass
    split evenly across terms and replicates, each entry perturbed by
    +-10% so that no two terms start identical.
    """
    if len(shape) < 2:
        raise ValueError("need at least one mode plus the replicate mode")
    ranks = config.resolved_ranks()
    total_rank = sum(ranks)
    rng = np.random.default_rng(config.seed)
    factors = []
    for size in shape[:-1]:
        u = np.maximum(rng.uniform(size=(size, total_rank)), 1e-300)
        factors.append(u / u.sum(axis=0))
    omega = np.concatenate([np.full(r, 1.0 / r) for r in ranks])
    n = shape[-1]
    base = total_count / (config.n_terms * n)
    upsilon = base * (
        1.0 + rng.uniform(-0.1, 0.1, size=(config.n_terms, n))
    )
    return CpBtdModel(ranks, factors, omega, upsilon)


def update_scores(
    model: CpBtdModel, tensor: SparseCountTensor, config: SolverConfig
) -> tuple[CpBtdModel, int]:
    """Refit every replicate's usage scores at fixed motifs.

    The replicate subproblems are independent Poisson regressions on
    the sampled design rows; with shrinkage on they share the log-sum
    penalty over each term's row of scores.
    """
    om = model.omega_matrix()
    designs, counts = [], []
    for n in range(tensor.shape[-1]):
        sub = design_for_replicate(tensor, n, model.factors, om)
        designs.append(sub.values)
        counts.append(tensor.counts[sub.row_map])
    beta = config.shrinkage_strength(tensor.nnz)
    ups, sweeps = mm_poisson_regression_group(
        designs,
        counts,
        model.upsilon,
        beta=beta,
        epsilon=config.epsilon,
        tol=config.inner_tol,
        max_iter=config.max_inner,
    )
    out = model.copy()
    out.upsilon = ups
    return out, sweeps


def update_mode(
    model: CpBtdModel, tensor: SparseCountTensor, mode: int, config: SolverConfig
) -> tuple[CpBtdModel, int]:
    """Refit one mode's profiles (and the mixing weights) in mass form.

    Solves the row subproblems of A = Phi diag(tau), tau the component
    masses, then splits A back into a column-stochastic factor, block
    mixing weights, and rescaled usage scores.  The rescale is exact:
    the intensity function after the split equals the one the
    regression optimized.  Components whose mass hits zero are frozen
    and their terms' scores zeroed.
    """
    if not 0 <= mode < model.n_modes:
        raise ValueError("mode out of range")
    usage = model.term_usage()
    blocks = model.block_of_component()
    tau = model.component_scale()
    safe = np.where(usage > 0, usage, 1.0)
    psi = (model.upsilon / safe[:, None])[blocks].T
    psi[:, usage[blocks] <= 0] = 0.0

    designs, counts = [], []
    for m in range(model.mode_sizes[mode]):
        sub = design_for_mode_slice(tensor, mode, m, model.factors, psi)
        designs.append(sub.values)
        counts.append(tensor.counts[sub.row_map])
    beta = config.shrinkage_strength(tensor.nnz)
    start = (model.factors[mode] * tau).T
    mass_form, sweeps = mm_poisson_regression_group(
        designs,
        counts,
        start,
        beta=beta,
        epsilon=config.epsilon,
        tol=config.inner_tol,
        max_iter=config.max_inner,
    )
    a = mass_form.T
    rho = a.sum(axis=0)
    out = model.copy()
    active = rho > DEAD_FLOOR
    out.factors[mode][:, active] = a[:, active] / rho[active]
    for h in range(model.n_terms):
        blk = model.block(h)
        mass = float(rho[blk].sum())
        if mass > 0 and usage[h] > 0:
            out.omega[blk] = rho[blk] / mass
            out.upsilon[h, :] = model.upsilon[h, :] * (mass / usage[h])
        else:
            out.upsilon[h, :] = 0.0
    return out, sweeps


def penalized_objective(
    model: CpBtdModel,
    tensor: SparseCountTensor,
    beta: float,
    epsilon: float,
) -> float:
    """Monitored objective: deviance core plus every block's penalty.

    The mode-block penalties all equal the log-sum of the component
    masses when the model is in canonical (column-stochastic) form, so
    they enter once per mode.
    """
    f = objective(model, tensor)
    if beta == 0 or not math.isfinite(f):
        return f
    usage = model.term_usage()
    tau = model.component_scale()
    pen = float(
        np.log(usage + epsilon).sum()
        + model.n_modes * np.log(tau + epsilon).sum()
    )
    return f + beta * pen


def fit_block_gs(
    tensor: SparseCountTensor, config: SolverConfig
) -> tuple[CpBtdModel, FitReport]:
    """Block nonlinear Gauss-Seidel fit: scores first, then each mode.

    Each block update is accepted only if the monitored objective does
    not increase; rejected blocks keep the previous state, so the
    report trace is nonincreasing no matter how the per-block
    penalties interact.  Runs until the relative objective change
    drops below ``outer_tol`` or ``max_outer`` is reached.
    """
    if tensor.total <= 0:
        raise ValueError("cannot fit an empty tensor")
    t0 = time.perf_counter()
    model = initialize(config, tensor.shape, float(tensor.total))
    beta = config.shrinkage_strength(tensor.nnz)

    def monitored(m):
        return penalized_objective(m, tensor, beta, config.epsilon)

    current = monitored(model)
    trace = [current]
    inner_trace = [0]
    eff_trace = [effective_terms(model, RANK_THRESHOLD)]
    rejected = 0
    converged = False
    if not math.isfinite(current):
        raise SolverError(
            "non-finite objective at initialization", model=model
        )
    for _ in range(config.max_outer):
        inner_total = 0

        def attempt(update, *args):
            nonlocal model, current, inner_total, rejected
            trial, sweeps = update(model, tensor, *args, config)
            inner_total += sweeps
            value = monitored(trial)
            if not math.isfinite(value):
                raise SolverError(
                    "fit aborted on a non-finite objective",
                    model=trial,
                    report=_report("block-gs", trace, inner_trace, eff_trace,
                                   False, time.perf_counter() - t0, rejected),
                )
            if value <= current:
                model, current = trial, value
            else:
                rejected += 1

        attempt(update_scores)
        for p in range(model.n_modes):
            attempt(update_mode, p)
        trace.append(current)
        inner_trace.append(inner_total)
        eff_trace.append(effective_terms(model, RANK_THRESHOLD))
        drop = abs(trace[-2] - trace[-1])
        if drop < config.outer_tol * max(1.0, abs(trace[-2])):
            converged = True
            break
    report = _report(
        "block-gs",
        trace,
        inner_trace,
        eff_trace,
        converged,
        time.perf_counter() - t0,
        rejected,
    )
    return model, report


def _report(backend, trace, inner, eff, converged, duration, rejected=0):
    return FitReport(
        backend=backend,
        objective=list(trace),
        inner_iterations=list(inner),
        effective_terms=list(eff),
        converged=converged,
        duration=duration,
        rejected_blocks=rejected,
    )


def fit_em(
    tensor: SparseCountTensor, config: SolverConfig
) -> tuple[CpBtdModel, FitReport]:
    """Expectation-maximization fit of the same model, no shrinkage.

    Serves as an independent route to the unpenalized optimum: counts
    at each stored cell are split across components proportionally to
    their current intensity share, and every parameter group has a
    closed-form update from the expected allocations.  The likelihood
    is nondecreasing, so the objective trace is nonincreasing.

    Raises ValueError when shrinkage is requested (the EM recursions
    cover the plain likelihood only) or when nnz * total rank exceeds
    the responsibility-matrix entry cap.
    """
    if config.beta != 0:
        raise ValueError("the EM backend is unpenalized; set beta = 0")
    if tensor.total <= 0:
        raise ValueError("cannot fit an empty tensor")
    ranks = config.resolved_ranks()
    total_rank = sum(ranks)
    if tensor.nnz * total_rank > config.em_entry_cap:
        raise ValueError(
            f"responsibilities need {tensor.nnz * total_rank} entries, "
            f"over the cap {config.em_entry_cap}; use fit_block_gs"
        )
    t0 = time.perf_counter()
    model = initialize(config, tensor.shape, float(tensor.total))
    blocks = model.block_of_component()
    idx = tensor.indices
    counts = tensor.counts.astype(np.float64)
    n_rep = tensor.shape[-1]
    rep_rows = [
        tensor.mode_slice_rows(tensor.ndim - 1, n) for n in range(n_rep)
    ]
    current = objective(model, tensor)
    trace = [current]
    eff_trace = [effective_terms(model, RANK_THRESHOLD)]
    converged = False
    for _ in range(config.max_outer):
        base = factor_rows(idx[:, :-1], model.factors)
        comp = base * model.omega * model.upsilon[blocks][:, idx[:, -1]].T
        lam = comp.sum(axis=1)
        if (lam <= 0).any():
            raise SolverError(
                "fit aborted: zero intensity at a stored count",
                model=model,
                report=_report("em", trace, [0] + [1] * (len(trace) - 1),
                               eff_trace, False, time.perf_counter() - t0),
            )
        alloc = comp * (counts / lam)[:, None]

        col_mass = alloc.sum(axis=0)
        # Explicit normalizer of the score update; identically one
        # while the factor columns and mixing blocks stay stochastic.
        colsum = np.ones(total_rank)
        for phi in model.factors:
            colsum *= phi.sum(axis=0)
        denom = np.array(
            [
                float(model.omega[model.block(h)] @ colsum[model.block(h)])
                for h in range(model.n_terms)
            ]
        )
        ups = np.empty_like(model.upsilon)
        for n in range(n_rep):
            per_comp = alloc[rep_rows[n]].sum(axis=0)
            ups[:, n] = np.add.reduceat(per_comp, model._offsets[:-1]) / denom
        factors = []
        for p in range(model.n_modes):
            numer = np.zeros_like(model.factors[p])
            np.add.at(numer, idx[:, p], alloc)
            new = model.factors[p].copy()
            live = col_mass > 0
            new[:, live] = numer[:, live] / col_mass[live]
            factors.append(new)
        omega = model.omega.copy()
        for h in range(model.n_terms):
            blk = model.block(h)
            mass = float(col_mass[blk].sum())
            if mass > 0:
                omega[blk] = col_mass[blk] / mass
        model = CpBtdModel(ranks, factors, omega, ups)
        value = objective(model, tensor)
        trace.append(value)
        eff_trace.append(effective_terms(model, RANK_THRESHOLD))
        if abs(trace[-2] - trace[-1]) < config.outer_tol * max(
            1.0, abs(trace[-2])
        ):
            converged = True
            break
    report = _report(
        "em",
        trace,
        [0] + [1] * (len(trace) - 1),
        eff_trace,
        converged,
        time.perf_counter() - t0,
    )
    return model, report
