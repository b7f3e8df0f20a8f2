"""Hybrid tool selection: category narrowing plus embedding recall.

The api-select procedure first narrows to a category (chosen by the model),
then either returns the whole category directly (small categories) or runs
cosine top-k over the category's description embeddings (large categories,
capped at M candidates). ``score_retrieval`` computes the all-right /
all-wrong percentage rates used to compare selection methods at Top-5 and
Top-10 cutoffs.

The bundled :class:`HashEmbedder` is a deterministic feature-hashed
bag-of-words embedder: no model downloads, bit-identical vectors on every
platform, and it supports planted-ground-truth fixtures. Real embedding
services plug in behind the same interface.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import numpy as np

from .catalog import Catalog, NotFoundError, list_category


class SearchError(Exception):
    pass


class Embedder(Protocol):
    """Deterministic text embedder: same text, same vector, fixed dimension."""

    @property
    def dim(self) -> int: ...

    def embed(self, text: str) -> np.ndarray: ...


_TOKEN_RE = re.compile(r"[a-z0-9]+")

#: Function words dropped before hashing; at small dimensions their bucket
#: collisions would otherwise drown the content-word signal.
_STOPWORDS = frozenset(
    "a an and as at by for from in into is of on one or out over per the "
    "this to under up use with".split()
)


class HashEmbedder:
    """Feature-hashed bag-of-words embedding, L2-normalized.

    Tokens are lowercased alphanumeric runs minus a small stopword list;
    each token is bucketed by a keyed blake2b hash (never Python's
    randomized ``hash``), so vectors are identical across processes and
    platforms.
    """

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise SearchError("embedder dim must be positive")
        self._dim = dim

    @property
    def dim(self) -> int:
        return self._dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self._dim, dtype=np.float64)
        for token in _TOKEN_RE.findall(text.lower()):
            if token in _STOPWORDS:
                continue
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=b"finagent").digest()
            bucket = int.from_bytes(digest, "big") % self._dim
            vec[bucket] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        return vec


@dataclass(frozen=True)
class SearchConfig:
    """Candidate cap M and the category size at or below which recall is
    skipped and the whole category is returned directly."""

    M: int = 10
    direct_threshold: int = 64

    def __post_init__(self) -> None:
        if self.M < 1:
            raise SearchError("M must be >= 1")
        if self.direct_threshold < self.M:
            raise SearchError("direct_threshold must be >= M")


@dataclass(frozen=True)
class VectorIndex:
    """One embedding per specific tool, immutable after build."""

    names: tuple[str, ...]
    vectors: np.ndarray  # shape (len(names), dim)
    dim: int

    def __len__(self) -> int:
        return len(self.names)


def index_catalog(catalog: Catalog, embedder: Embedder) -> VectorIndex:
    """Embed every specific tool's description text (not its name)."""
    specs = catalog.specific_specs()
    vectors = np.zeros((len(specs), embedder.dim), dtype=np.float64)
    for i, spec in enumerate(specs):
        try:
            vec = embedder.embed(spec.description)
        except Exception as exc:
            raise SearchError(f"embedding failed for tool {spec.name!r}: {exc}") from exc
        if vec.shape != (embedder.dim,):
            raise SearchError(
                f"embedding for tool {spec.name!r} has shape {vec.shape}, "
                f"expected ({embedder.dim},)"
            )
        vectors[i] = vec
    return VectorIndex(
        names=tuple(s.name for s in specs), vectors=vectors, dim=embedder.dim
    )


def _cosine_scores(vectors: np.ndarray, query_vec: np.ndarray) -> np.ndarray:
    # Zero-norm vectors (entry or query) score 0 against everything.
    norms = np.linalg.norm(vectors, axis=1)
    qnorm = float(np.linalg.norm(query_vec))
    sims = np.zeros(len(vectors), dtype=np.float64)
    if qnorm == 0.0:
        return sims
    nonzero = norms > 0.0
    sims[nonzero] = (vectors[nonzero] @ query_vec) / (norms[nonzero] * qnorm)
    return sims


def cosine_topk(
    index: VectorIndex, query_vec: np.ndarray, k: int
) -> list[tuple[str, float]]:
    """Exact top-k by cosine similarity, ties broken lexicographically by name.

    Returns min(k, index size) pairs in descending similarity. The catalog
    is a few hundred entries, so a full scan is exact and fast; there is no
    approximate index.
    """
    if k < 1:
        raise SearchError("k must be >= 1")
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if query_vec.shape != (index.dim,):
        raise SearchError(
            f"query vector dimension {query_vec.shape} does not match index dim {index.dim}"
        )
    sims = _cosine_scores(index.vectors, query_vec)
    ranked = sorted(zip(index.names, sims), key=lambda pair: (-pair[1], pair[0]))
    return [(name, float(sim)) for name, sim in ranked[:k]]


def _restrict(index: VectorIndex, names: Sequence[str]) -> VectorIndex:
    wanted = set(names)
    keep = [i for i, name in enumerate(index.names) if name in wanted]
    return VectorIndex(
        names=tuple(index.names[i] for i in keep),
        vectors=index.vectors[keep] if keep else np.zeros((0, index.dim)),
        dim=index.dim,
    )


def select_candidates(
    catalog: Catalog,
    index: VectorIndex,
    config: SearchConfig,
    category: str,
    task_desc: str,
    embedder: Embedder,
) -> list[str]:
    """Candidate tools for (category, task description).

    Small categories (size <= direct_threshold) are returned whole in
    lexicographic order; large ones go through embedding recall capped at M.
    Output is always a subset of the category.
    """
    members = list_category(catalog, category)  # raises NotFoundError
    if len(members) <= config.direct_threshold:
        return members
    restricted = _restrict(index, members)
    ranked = cosine_topk(restricted, embedder.embed(task_desc), k=config.M)
    return [name for name, _ in ranked]


def rank_in_category(
    catalog: Catalog,
    index: VectorIndex,
    category: str,
    task_desc: str,
    embedder: Embedder,
    k: int,
) -> list[str]:
    """Similarity-ordered top-k within one category, regardless of its size.

    This is the ranking the retrieval scorer evaluates for the
    category+embedding method; ``select_candidates`` itself returns small
    categories in lexicographic order, which is a candidate set, not a
    ranking.
    """
    restricted = _restrict(index, list_category(catalog, category))
    return [name for name, _ in cosine_topk(restricted, embedder.embed(task_desc), k=k)]


@dataclass(frozen=True)
class RetrievalScore:
    """All-right / all-wrong percentage rates at a top-k cutoff.

    A query is all-right when every gold tool appears in its top-k, and
    all-wrong when none does; queries with a partial hit contribute to
    neither rate.
    """

    all_right_rate: float
    all_wrong_rate: float
    k: int
    n_queries: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.all_right_rate <= 100.0 and 0.0 <= self.all_wrong_rate <= 100.0):
            raise SearchError("rates must be within [0, 100]")
        if self.all_right_rate + self.all_wrong_rate > 100.0 + 1e-9:
            raise SearchError("all-right and all-wrong rates cannot sum past 100")


def score_retrieval(
    results: Mapping[str, Sequence[str]],
    gold: Mapping[str, frozenset[str] | set[str]],
    k: int,
) -> RetrievalScore:
    """Score per-query ranked lists against gold tool sets at cutoff *k*."""
    if set(results) != set(gold):
        missing = sorted(set(results) ^ set(gold))
        raise SearchError(f"results and gold must share query ids; mismatched: {missing}")
    if not results:
        raise SearchError("no queries to score")
    all_right = 0
    all_wrong = 0
    for qid, ranked in results.items():
        gold_set = set(gold[qid])
        if not gold_set:
            raise SearchError(f"query {qid!r} has an empty gold set")
        top = set(ranked[:k])
        hits = len(gold_set & top)
        if hits == len(gold_set):
            all_right += 1
        elif hits == 0:
            all_wrong += 1
    n = len(results)
    return RetrievalScore(
        all_right_rate=100.0 * all_right / n,
        all_wrong_rate=100.0 * all_wrong / n,
        k=k,
        n_queries=n,
    )
