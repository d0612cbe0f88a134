"""Interpreting similarity scores: threshold bands, best-fit
classification against predefined categories, and k-means topic
clustering over embeddings.

Band boundaries are closed on the side that favors the stronger label
(0.2 and 0.5 belong to the higher band; 0.60 and 0.80 are both
"moderate"), so every score in [-1, 1] maps to exactly one label.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, KTooLarge, OutOfRange
from .providers import ProviderConfig, embed_batch
from .vectors import Embedding, cosine_similarity


@dataclass(frozen=True)
class BandScale:
    """Named score-to-label mapping that partitions [-1, 1] totally."""

    name: str
    # ordered (lower_bound, label); a score maps to the band of the
    # largest lower bound it reaches
    bands: tuple[tuple[float, str], ...]

    def label(self, score: float) -> str:
        chosen = self.bands[0][1]
        for bound, label in self.bands:
            if score >= bound:
                chosen = label
        return chosen


COHEN = BandScale(
    name="cohen",
    bands=((-1.0, "small"), (0.2, "medium"), (0.5, "large")),
)

PRACTICE = BandScale(
    name="practice",
    # "moderate" is the closed interval [0.60, 0.80]; above it is "very high"
    bands=((-1.0, "low"), (0.6, "moderate"), (np.nextafter(0.8, 1.0), "very high")),
)

SCALES = {"cohen": COHEN, "practice": PRACTICE}


def interpret(score: float, scale: BandScale) -> str:
    """The unique band label for a similarity score."""
    if not -1.0 <= score <= 1.0:
        raise OutOfRange(f"score {score} outside [-1, 1]")
    return scale.label(score)


@dataclass(frozen=True)
class Category:
    category_id: str
    description: str
    centroid: Embedding


def load_categories(path: str | Path, provider: ProviderConfig, **embed_kwargs) -> list[Category]:
    """JSON array of {"id", "description"}; centroids are description embeddings."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    descriptions = [entry["description"] for entry in raw]
    embeddings = embed_batch(provider, descriptions, **embed_kwargs)
    return [
        Category(category_id=entry["id"], description=entry["description"], centroid=emb)
        for entry, emb in zip(raw, embeddings)
    ]


def categories_from_exemplars(
    category_id: str, description: str, exemplars: Sequence[Embedding]
) -> Category:
    """Optional multi-exemplar centroid: the mean of exemplar embeddings."""
    mean = np.mean([e.values for e in exemplars], axis=0)
    return Category(
        category_id=category_id,
        description=description,
        centroid=Embedding.create(mean, model_id=exemplars[0].model_id),
    )


@dataclass(frozen=True)
class BestFit:
    category_id: str
    score: float
    margin: float
    runner_up: str | None
    tie: bool = False


def best_fit_classify(doc_embedding: Embedding, categories: Sequence[Category]) -> BestFit:
    """Argmax-cosine category; exact ties break on ascending id and are flagged."""
    if not categories:
        raise ValueError("need at least one category")
    scored = []
    for category in categories:
        if category.centroid.dim != doc_embedding.dim:
            raise DimensionMismatch(
                f"category {category.category_id} dim {category.centroid.dim}, "
                f"document dim {doc_embedding.dim}"
            )
        scored.append((cosine_similarity(doc_embedding, category.centroid), category.category_id))
    scored.sort(key=lambda t: (-t[0], t[1]))
    best_score, best_id = scored[0]
    if len(scored) == 1:
        return BestFit(category_id=best_id, score=best_score, margin=0.0, runner_up=None)
    second_score, second_id = scored[1]
    return BestFit(
        category_id=best_id,
        score=best_score,
        margin=best_score - second_score,
        runner_up=second_id,
        tie=best_score == second_score,
    )


def rank_by_similarity(
    base: str,
    candidates: Sequence[str],
    provider: ProviderConfig,
    **embed_kwargs,
) -> list[tuple[str, float]]:
    """Embed a base sentence and candidates, rank candidates by cosine.

    Ties keep input order (stable sort).
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    embeddings = embed_batch(provider, [base, *candidates], **embed_kwargs)
    base_emb = embeddings[0]
    scored = [
        (text, cosine_similarity(base_emb, emb))
        for text, emb in zip(candidates, embeddings[1:])
    ]
    return sorted(scored, key=lambda t: -t[1])


# -- clustering ----------------------------------------------------------------


@dataclass(frozen=True)
class ClusterAssignment:
    item_id: int | str
    cluster: int
    distance_to_centroid: float


@dataclass
class KmeansResult:
    labels: np.ndarray  # (n,) int
    centroids: np.ndarray  # (k, dim)
    inertia: float
    best_restart: int
    # per restart, inertia after each assignment step (non-increasing)
    inertia_traces: list[list[float]] = field(default_factory=list)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    first = int(rng.integers(0, n))
    centroids[0] = points[first]
    dist_sq = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = dist_sq.sum()
        if total <= 0.0:  # all remaining points coincide with a centroid
            choice = int(rng.integers(0, n))
        else:
            choice = int(rng.choice(n, p=dist_sq / total))
        centroids[i] = points[choice]
        dist_sq = np.minimum(dist_sq, ((points - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _lloyd(
    points: np.ndarray, centroids: np.ndarray, max_iters: int
) -> tuple[np.ndarray, np.ndarray, float, list[float]]:
    labels = np.full(points.shape[0], -1, dtype=np.int64)
    trace: list[float] = []
    for _ in range(max_iters):
        distances = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = distances.argmin(axis=1)
        inertia = float(distances[np.arange(points.shape[0]), new_labels].sum())
        if trace:
            assert inertia <= trace[-1] + 1e-9, "inertia increased during Lloyd iteration"
        trace.append(inertia)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for cluster in range(centroids.shape[0]):
            members = points[labels == cluster]
            if len(members):
                centroids[cluster] = members.mean(axis=0)
            else:
                # re-seed an empty cluster at the worst-served point
                worst = int(
                    distances[np.arange(points.shape[0]), labels].argmax()
                )
                centroids[cluster] = points[worst]
    return labels, centroids, trace[-1], trace


def kmeans_cluster(
    embeddings: Sequence[Embedding] | np.ndarray,
    k: int,
    seed: int = 0,
    restarts: int = 5,
    max_iters: int = 100,
) -> KmeansResult:
    """k-means++ initialized Lloyd iterations, best of ``restarts`` by inertia.

    Euclidean distance on unit-normalized vectors is monotonically
    related to cosine on the sphere. Ties between restarts go to the
    lower restart index, so a fixed seed gives bit-identical output.
    """
    if isinstance(embeddings, np.ndarray):
        points = embeddings.astype(np.float64)
    else:
        points = np.asarray([e.values for e in embeddings], dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise KTooLarge(f"k={k} with only {n} points")
    rng = np.random.default_rng(seed)
    best: KmeansResult | None = None
    traces: list[list[float]] = []
    for restart in range(restarts):
        init = _kmeans_pp_init(points, k, rng)
        labels, centroids, inertia, trace = _lloyd(points, init.copy(), max_iters)
        traces.append(trace)
        if best is None or inertia < best.inertia:
            best = KmeansResult(
                labels=labels,
                centroids=centroids,
                inertia=inertia,
                best_restart=restart,
            )
    assert best is not None
    best.inertia_traces = traces
    return best


def assignments_for(
    result: KmeansResult, items: Sequence[tuple[int | str, np.ndarray]]
) -> list[ClusterAssignment]:
    out = []
    for (item_id, vector), label in zip(items, result.labels):
        cluster = int(label)
        distance = float(
            np.linalg.norm(np.asarray(vector, dtype=np.float64) - result.centroids[cluster])
        )
        out.append(
            ClusterAssignment(item_id=item_id, cluster=cluster, distance_to_centroid=distance)
        )
    return out


def label_clusters(
    result: KmeansResult,
    items: Sequence[tuple[int | str, np.ndarray]],
    m: int = 5,
) -> dict[int, list[ClusterAssignment]]:
    """Per cluster, the m records nearest its centroid as exemplars.

    Ascending distance, ties by item id.
    """
    exemplars: dict[int, list[ClusterAssignment]] = {}
    for cluster in range(result.centroids.shape[0]):
        members = [
            (item_id, vector)
            for (item_id, vector), label in zip(items, result.labels)
            if label == cluster
        ]
        scored = [
            ClusterAssignment(
                item_id=item_id,
                cluster=cluster,
                distance_to_centroid=float(
                    np.linalg.norm(np.asarray(vector, dtype=np.float64) - result.centroids[cluster])
                ),
            )
            for item_id, vector in members
        ]
        scored.sort(key=lambda a: (a.distance_to_centroid, str(a.item_id)))
        exemplars[cluster] = scored[:m]
    return exemplars
