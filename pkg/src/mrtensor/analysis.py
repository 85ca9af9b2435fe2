"""Comparisons, rankings, simulation, and motif rendering.

The ecology-style toolkit around the fitted model: exposure-adjusted
Bray-Curtis dissimilarity between teams' passing networks, usage
rankings of fitted motifs, greedy cosine matching of motif sets, and a
superposition sampler that draws synthetic event tensors from a model.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .encode import adjacency_at_scale, build_tensor, node_tile
from .ingest import EventTable, team_minutes
from .model import CpBtdModel, RANK_THRESHOLD
from .sptensor import SparseCountTensor, dense_reconstruct


def max_workers() -> int:
    """Worker cap for internal parallelism (MRTENSOR_THREADS, default 1)."""
    raw = os.environ.get("MRTENSOR_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"MRTENSOR_THREADS must be an integer, got {raw!r}")


def bray_curtis(u, v) -> float:
    """Bray-Curtis dissimilarity of two nonnegative abundance vectors.

    sum |u - v| / sum (u + v): 0 for identical vectors, 1 for vectors
    with disjoint support, symmetric, and bounded by 1.  Undefined
    (and an error) when both vectors are entirely zero.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ValueError("vectors must have the same length")
    if not (np.isfinite(u).all() and np.isfinite(v).all()):
        raise ValueError("vectors must be finite")
    if u.min(initial=0) < 0 or v.min(initial=0) < 0:
        raise ValueError("vectors must be nonnegative")
    denom = float((u + v).sum())
    if denom == 0:
        raise ValueError("Bray-Curtis is undefined for two zero vectors")
    return float(np.abs(u - v).sum()) / denom


@dataclass(frozen=True)
class DissimilarityMatrix:
    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        if self.values.shape != (n, n):
            raise ValueError("matrix must be square over the labels")


def dissimilarity_matrix(
    table: EventTable,
    scale: int,
    reference_minutes: float | None = None,
) -> DissimilarityMatrix:
    """Pairwise Bray-Curtis between teams' exposure-adjusted networks.

    Each team's replicates are encoded at the requested scale and
    summed into one origin x destination count matrix, multiplied by
    the team's exposure factor (reference minutes over the team's
    total minutes, reference defaulting to the across-team mean), then
    compared entrywise.  A team with no passes has no network to
    compare and raises.
    """
    minutes = team_minutes(table)
    teams = tuple(minutes)
    if not teams:
        raise ValueError("table has no teams")
    if reference_minutes is None:
        reference_minutes = sum(minutes.values()) / len(minutes)
    if reference_minutes <= 0:
        raise ValueError("reference_minutes must be positive")
    tensor = build_tensor(table, scale)
    size = 4**scale
    nets = {team: np.zeros((size, size)) for team in teams}
    for n, rep in enumerate(table.replicates):
        nets[rep.team] += adjacency_at_scale(tensor, n, scale)
    vecs = []
    for team in teams:
        if nets[team].sum() == 0:
            raise ValueError(f"team {team!r} has no passes")
        vecs.append(nets[team].ravel() * (reference_minutes / minutes[team]))
    out = np.zeros((len(teams), len(teams)))
    pairs = [(i, j) for i in range(len(teams)) for j in range(i + 1, len(teams))]

    def fill(pair):
        i, j = pair
        out[i, j] = out[j, i] = bray_curtis(vecs[i], vecs[j])

    workers = max_workers()
    if workers > 1 and len(pairs) > 1:
        # Pairs write disjoint slots, so scheduling cannot change the result.
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, pairs))
    else:
        for pair in pairs:
            fill(pair)
    return DissimilarityMatrix(teams, out)


def write_dissimilarity_csv(dissim: DissimilarityMatrix, path) -> None:
    with open(path, "w") as handle:
        handle.write("team," + ",".join(dissim.labels) + "\n")
        for label, row in zip(dissim.labels, dissim.values):
            handle.write(
                label + "," + ",".join(format(v, ".17g") for v in row) + "\n"
            )


def rank_motifs(
    model: CpBtdModel, threshold: float = RANK_THRESHOLD
) -> list[tuple[int, float]]:
    """Active terms by total usage, descending; ties keep the lower term."""
    usage = model.term_usage()
    active = [(h, float(usage[h])) for h in range(model.n_terms)
              if usage[h] > threshold]
    return sorted(active, key=lambda item: (-item[1], item[0]))


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity of a zero vector is undefined")
    return float(a @ b) / (na * nb)


def match_motifs(fitted, reference) -> list[tuple[int, int, float]]:
    """Greedy best-cosine assignment between two motif collections.

    Both arguments are sequences of arrays (vectorized as given, so
    pass finest-scale matrices for multiresolution motifs).  Pairs are
    picked in descending similarity until the shorter side runs out;
    the result lists (fitted position, reference position, cosine) in
    pick order.
    """
    sims = np.array(
        [[cosine_similarity(f, r) for r in reference] for f in fitted]
    )
    out: list[tuple[int, int, float]] = []
    if sims.size == 0:
        return out
    open_f = set(range(len(fitted)))
    open_r = set(range(len(reference)))
    while open_f and open_r:
        best = max(
            ((i, j) for i in open_f for j in open_r),
            key=lambda ij: (sims[ij], -ij[0], -ij[1]),
        )
        out.append((best[0], best[1], float(sims[best])))
        open_f.discard(best[0])
        open_r.discard(best[1])
    return out


def simulate(
    model: CpBtdModel,
    rates: np.ndarray | None = None,
    seed: int = 0,
    method: str = "superposition",
) -> SparseCountTensor:
    """Draw one synthetic count tensor from the model.

    method "superposition" samples each term's event count per
    replicate from a Poisson at its usage rate, then places every
    event by drawing a component from the term's mixing weights and
    one coordinate per mode from the component's profiles.  Memory
    stays proportional to the event count.

    method "cells" draws independent Poisson counts at every cell of
    the dense intensity grid (small models only); same distribution,
    different route, which is what makes it worth keeping.
    """
    if rates is None:
        rates = model.upsilon
    rates = np.asarray(rates, dtype=np.float64)
    if rates.shape[0] != model.n_terms:
        raise ValueError("rates must have one row per term")
    if rates.ndim != 2:
        raise ValueError("rates must be terms x replicates")
    if not np.isfinite(rates).all() or rates.min() < 0:
        raise ValueError("rates must be finite and nonnegative")
    for h in range(model.n_terms):
        blk = model.block(h)
        if rates[h].max() > 0 and model.omega[blk].sum() <= 0:
            raise ValueError(f"term {h} has zero mixing weights but usage")
    n_rep = rates.shape[1]
    shape = model.mode_sizes + (n_rep,)
    rng = np.random.default_rng(seed)
    if method == "cells":
        lam = dense_reconstruct(model.factors, model.omega_matrix(), rates)
        counts = rng.poisson(lam)
        idx = np.argwhere(counts > 0)
        return SparseCountTensor.from_entries(
            shape, idx, counts[counts > 0].ravel()
        )
    if method != "superposition":
        raise ValueError(f"unknown sampling method {method!r}")
    events = rng.poisson(rates)
    chunks = []
    for h in range(model.n_terms):
        total = int(events[h].sum())
        if total == 0:
            continue
        blk = model.block(h)
        weights = model.omega[blk] / model.omega[blk].sum()
        comp = blk.start + rng.choice(len(weights), size=total, p=weights)
        cells = np.empty((total, model.n_modes + 1), dtype=np.int64)
        cells[:, -1] = np.repeat(np.arange(n_rep), events[h])
        for p, phi in enumerate(model.factors):
            cdf = np.cumsum(phi[:, comp], axis=0)
            if (cdf[-1] <= 0).any():
                raise ValueError(
                    f"term {h} draws events through an all-zero profile"
                )
            cdf /= cdf[-1]
            draws = rng.random(total)
            cells[:, p] = (draws[None, :] > cdf).sum(axis=0)
        chunks.append(cells)
    if not chunks:
        return SparseCountTensor.from_entries(
            shape,
            np.empty((0, model.n_modes + 1), dtype=np.int64),
            np.empty(0, dtype=np.int64),
        )
    idx = np.vstack(chunks)
    return SparseCountTensor.from_entries(
        shape, idx, np.ones(len(idx), dtype=np.int64)
    )


def write_motif_csv(matrix: np.ndarray, path) -> None:
    """Plain CSV of one origin x destination motif matrix."""
    with open(path, "w") as handle:
        for row in np.asarray(matrix):
            handle.write(",".join(format(v, ".17g") for v in row) + "\n")


def write_motif_svg(
    matrix: np.ndarray,
    path,
    top_edges: int = 20,
    width: float = 1150.0,
    height: float = 740.0,
) -> int:
    """Arrow diagram of a motif matrix on the dyadic field grid.

    Draws the ``top_edges`` heaviest positive entries as arrows from
    origin tile center to destination tile center (circles for
    self-loops), opacity proportional to weight.  Returns the number
    of edges drawn.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    size = matrix.shape[0]
    scale = int(round(np.log(size) / np.log(4)))
    if matrix.shape != (size, size) or 4**scale != size:
        raise ValueError("motif matrix must be 4**s square")
    grid = 2**scale
    flat = matrix.ravel()
    order = np.argsort(-flat, kind="stable")
    order = order[flat[order] > 0][:top_edges]
    peak = flat[order[0]] if len(order) else 1.0

    def center(node):
        tx, ty = node_tile(int(node), scale)
        return (
            (tx + 0.5) * width / grid,
            height - (ty + 0.5) * height / grid,
        )

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="0 0 {width:g} {height:g}">',
        '<defs><marker id="tip" viewBox="0 0 10 10" refX="9" refY="5" '
        'markerWidth="7" markerHeight="7" orient="auto-start-reverse">'
        '<path d="M 0 0 L 10 5 L 0 10 z" fill="#1f4e79"/></marker></defs>',
        f'<rect x="0" y="0" width="{width:g}" height="{height:g}" '
        'fill="#f4f7f4" stroke="#333" stroke-width="2"/>',
    ]
    for k in range(1, grid):
        x = k * width / grid
        y = k * height / grid
        lines.append(
            f'<line x1="{x:.2f}" y1="0" x2="{x:.2f}" y2="{height:g}" '
            'stroke="#c8d4c8" stroke-width="1"/>'
        )
        lines.append(
            f'<line x1="0" y1="{y:.2f}" x2="{width:g}" y2="{y:.2f}" '
            'stroke="#c8d4c8" stroke-width="1"/>'
        )
    for flat_index in order:
        vo, vd = divmod(int(flat_index), size)
        opacity = max(flat[flat_index] / peak, 0.05)
        if vo == vd:
            cx, cy = center(vo)
            r = 0.18 * min(width, height) / grid
            lines.append(
                f'<circle class="edge" cx="{cx:.2f}" cy="{cy:.2f}" '
                f'r="{r:.2f}" fill="none" stroke="#1f4e79" '
                f'stroke-width="4" stroke-opacity="{opacity:.4f}"/>'
            )
        else:
            (x1, y1), (x2, y2) = center(vo), center(vd)
            lines.append(
                f'<line class="edge" x1="{x1:.2f}" y1="{y1:.2f}" '
                f'x2="{x2:.2f}" y2="{y2:.2f}" stroke="#1f4e79" '
                f'stroke-width="4" stroke-opacity="{opacity:.4f}" '
                'marker-end="url(#tip)"/>'
            )
    lines.append("</svg>")
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")
    return len(order)
