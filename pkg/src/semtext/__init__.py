"""semtext: semantic text analysis.

Embeddings, cosine similarity search (exact and HNSW), lexical
baselines, score interpretation and clustering, t-SNE visualization,
and retrieval-augmented question answering — with a deterministic
offline embedder so everything runs without a model or network.
"""

from .vectors import Embedding, SimilarityResult, cosine_similarity, normalize, similarity_matrix

__all__ = [
    "Embedding",
    "SimilarityResult",
    "cosine_similarity",
    "normalize",
    "similarity_matrix",
]

__version__ = "0.1.0"
