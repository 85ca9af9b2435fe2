"""Independent reference computations used by several test modules.

Everything here is deliberately naive: dense grids, explicit loops,
and direct formula evaluation.  None of it shares code with the
package beyond numpy itself.
"""

import numpy as np


def poisson_objective_grid(design, counts, grid):
    """Objective at many candidate coefficient vectors at once.

    ``grid`` is (K, n_candidates); returns (n_candidates,) values of
    sum(b) - x . log(A b), with +inf where some intensity is zero.
    """
    lam = np.asarray(design) @ grid
    out = grid.sum(axis=0)
    good = (lam > 0).all(axis=0)
    out[~good] = np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(lam > 0, np.log(np.where(lam > 0, lam, 1.0)), 0.0)
    out[good] = out[good] + -(np.asarray(counts) @ logs[:, good])
    return out


def grid_minimize_poisson(design, counts, stages=8, points=21):
    """Brute-force minimum of the identity-link Poisson objective.

    The objective is convex and every stationary point satisfies
    sum(b) = sum(x), so the box [0, sum(x)]^K brackets the minimizer.
    Each stage evaluates a full mesh and shrinks the window around the
    best point; a best point on the window edge re-centers the window
    instead of shrinking it.
    """
    design = np.asarray(design, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    k = design.shape[1]
    top = counts.sum() * 1.0000001
    lo = np.zeros(k)
    hi = np.full(k, top)
    best_val = np.inf
    best = np.zeros(k)
    for _ in range(stages):
        axes = [np.linspace(lo[d], hi[d], points) for d in range(k)]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([m.ravel() for m in mesh])
        vals = poisson_objective_grid(design, counts, grid)
        j = int(np.argmin(vals))
        best_val = float(vals[j])
        best = grid[:, j]
        spacing = (hi - lo) / (points - 1)
        at_edge = (np.abs(best - lo) < spacing / 2) | (
            np.abs(best - hi) < spacing / 2
        )
        widen = np.where(at_edge, 4.0, 2.0)
        lo = np.maximum(best - widen * spacing, 0.0)
        hi = np.minimum(best + widen * spacing, top)
    return best, best_val


def random_regression_instance(rng, max_rows=6, max_cols=3):
    """One random feasible Poisson-regression instance.

    Every row keeps at least one positive design entry so each
    positive count is explainable.
    """
    m = int(rng.integers(1, max_rows + 1))
    k = int(rng.integers(1, max_cols + 1))
    while True:
        design = rng.uniform(0.05, 1.0, size=(m, k))
        design[rng.random(size=(m, k)) < 0.25] = 0.0
        if (design > 0).any(axis=1).all():
            break
    counts = rng.integers(1, 11, size=m).astype(np.float64)
    return design, counts
