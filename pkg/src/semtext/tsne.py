"""Exact t-SNE: reduce embeddings to 2-D for visual pattern inspection.

The O(n^2) reference formulation: per-point Gaussian bandwidths are
calibrated by binary search so the conditional distribution's effective
neighbor count (2^entropy) matches the requested perplexity, joint
probabilities are symmetrized, and the layout minimizes KL(P||Q) against
Student-t affinities via gradient descent with early exaggeration, a
momentum switch, and per-coordinate adaptive gains. Runs are fully
deterministic for a fixed seed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateRow, IoFailure
from .vectors import Embedding

P_FLOOR = 1e-12
EXAGGERATION_ITERS = 250
MOMENTUM_EARLY = 0.5
MOMENTUM_LATE = 0.8
INIT_STDEV = 1e-2  # larger than the classic 1e-4: better-conditioned early gradients
GAIN_MIN = 0.01


@dataclass
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    seed: int = 0
    output_dim: int = 2

    def __post_init__(self) -> None:
        if self.perplexity <= 1.0:
            raise ValueError("perplexity must exceed 1")
        if self.iterations < 1 or self.learning_rate <= 0 or self.early_exaggeration <= 0:
            raise ValueError("iterations, learning_rate and early_exaggeration must be positive")
        if self.output_dim != 2:
            raise ValueError("output_dim is fixed at 2")

    def effective_perplexity(self, n: int) -> float:
        """Clamp to at most (n - 1) / 3 so calibration stays well-posed."""
        return max(min(self.perplexity, (n - 1) / 3.0), 1.0 + 1e-9)


@dataclass
class TsneLayout:
    points: np.ndarray  # (n, 2)
    labels: list[str] | None = None
    kl_trace: list[float] = field(default_factory=list)
    item_ids: list[str] | None = None


def _conditional(d_row: np.ndarray, beta: float) -> np.ndarray:
    weights = np.exp(-d_row * beta)
    total = weights.sum()
    if total <= 0.0:
        return np.full_like(d_row, 1.0 / d_row.size)
    return weights / total


def _entropy_bits(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def calibrate_sigma(
    distances_row: np.ndarray | Sequence[float],
    perplexity: float,
    tolerance: float = 1e-5,
    max_steps: int = 50,
) -> float:
    """Bandwidth sigma_i whose conditional hits the requested perplexity.

    Binary search on precision beta = 1/(2 sigma^2) until the relative
    error of 2^entropy against the target is within tolerance; after
    ``max_steps`` bisections the best beta found is accepted.
    """
    d_row = np.asarray(distances_row, dtype=np.float64)
    if d_row.size < 1:
        raise ValueError("distance row is empty")
    if np.all(d_row == 0.0):
        raise DegenerateRow("all distances are zero (duplicate points)")
    beta = 1.0
    lo, hi = 0.0, math.inf
    best_error = math.inf
    best_beta = beta
    for _ in range(max_steps):
        perp = 2.0 ** _entropy_bits(_conditional(d_row, beta))
        error = abs(perp - perplexity) / perplexity
        if error < best_error:
            best_error = error
            best_beta = beta
        if error <= tolerance:
            break
        if perp > perplexity:  # too spread out: sharpen
            lo = beta
            beta = beta * 2.0 if hi == math.inf else (lo + hi) / 2.0
        else:
            hi = beta
            beta = (lo + hi) / 2.0
    return math.sqrt(1.0 / (2.0 * best_beta))


def _squared_distances(points: np.ndarray) -> np.ndarray:
    sq = (points[:, None, :] - points[None, :, :]) ** 2
    return sq.sum(axis=2)


def joint_p(
    embeddings: Sequence[Embedding] | np.ndarray, config: TsneConfig
) -> np.ndarray:
    """Symmetrized neighbor probabilities with a 1e-12 floor.

    Rows of all-zero distances (duplicate points) get a uniform
    conditional instead of a bandwidth search, which keeps P valid
    without dividing by zero.
    """
    points = _as_matrix(embeddings)
    n = points.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    perplexity = config.effective_perplexity(n)
    squared = _squared_distances(points)
    conditionals = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        mask = np.arange(n) != i
        d_row = squared[i][mask]
        if np.all(d_row == 0.0):
            cond = np.full(n - 1, 1.0 / (n - 1))
        else:
            sigma = calibrate_sigma(d_row, perplexity)
            cond = _conditional(d_row, 1.0 / (2.0 * sigma * sigma))
        conditionals[i][mask] = cond
    joint = (conditionals + conditionals.T) / (2.0 * n)
    return np.maximum(joint, P_FLOOR)


def _as_matrix(embeddings: Sequence[Embedding] | np.ndarray) -> np.ndarray:
    if isinstance(embeddings, np.ndarray):
        return embeddings.astype(np.float64)
    return np.asarray([e.values for e in embeddings], dtype=np.float64)


def tsne_embed(
    embeddings: Sequence[Embedding] | np.ndarray,
    config: TsneConfig | None = None,
    labels: Sequence[str] | None = None,
    item_ids: Sequence[str] | None = None,
) -> TsneLayout:
    """Project to 2-D; the layout is re-centered at the origin every iteration.

    ``kl_trace`` records KL(P||Q) per iteration against the true
    (un-exaggerated) P.
    """
    config = config or TsneConfig()
    points = _as_matrix(embeddings)
    n = points.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    P = joint_p(points, config)

    rng = np.random.default_rng(config.seed)
    Y = rng.normal(0.0, INIT_STDEV, size=(n, config.output_dim))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    kl_trace: list[float] = []

    for iteration in range(config.iterations):
        P_step = P * config.early_exaggeration if iteration < EXAGGERATION_ITERS else P
        diff = Y[:, None, :] - Y[None, :, :]
        weight = 1.0 / (1.0 + (diff**2).sum(axis=2))
        np.fill_diagonal(weight, 0.0)
        Q = np.maximum(weight / weight.sum(), P_FLOOR)
        grad = 4.0 * (((P_step - Q) * weight)[:, :, None] * diff).sum(axis=1)

        momentum = MOMENTUM_EARLY if iteration < EXAGGERATION_ITERS else MOMENTUM_LATE
        flipped = np.sign(grad) != np.sign(update)
        gains = np.where(flipped, gains + 0.2, gains * 0.8)
        np.maximum(gains, GAIN_MIN, out=gains)
        update = momentum * update - config.learning_rate * (gains * grad)
        Y = Y + update
        Y = Y - Y.mean(axis=0)

        kl_trace.append(float((P * np.log(P / Q)).sum()))

    return TsneLayout(
        points=Y,
        labels=list(labels) if labels is not None else None,
        kl_trace=kl_trace,
        item_ids=[str(i) for i in item_ids] if item_ids is not None else None,
    )


def export_layout(layout: TsneLayout, path: str | Path, fmt: str = "csv") -> None:
    """Write the layout as CSV (header x,y,label,item_id) or a JSON array."""
    n = layout.points.shape[0]
    labels = layout.labels if layout.labels is not None else [""] * n
    ids = layout.item_ids if layout.item_ids is not None else [""] * n
    try:
        if fmt == "csv":
            with open(path, "w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                writer.writerow(["x", "y", "label", "item_id"])
                for (x, y), label, item_id in zip(layout.points, labels, ids):
                    writer.writerow([f"{x:.6f}", f"{y:.6f}", label, item_id])
        elif fmt == "json":
            rows = [
                {"x": float(x), "y": float(y), "label": label, "item_id": item_id}
                for (x, y), label, item_id in zip(layout.points, labels, ids)
            ]
            Path(path).write_text(json.dumps(rows, indent=2), encoding="utf-8")
        else:
            raise ValueError(f"unknown export format: {fmt!r}")
    except OSError as exc:
        raise IoFailure(f"cannot write layout to {path}: {exc}") from exc
