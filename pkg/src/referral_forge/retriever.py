"""Exemplar retrieval: a quality-trimmed, clustered index over successful
training requests and exact cosine top-k queries against it.

Index construction drops the top and bottom 3% of successful requests by
predicted probability, keeps the top 10% of the remainder, and clusters
unit embeddings with spherical k-means. Queries derive an eligibility
threshold t = p + (p_max - p)/2 from the pool maximum, then return the
k most cosine-similar eligible entries. Cluster pruning uses an angular
bound and is an optimization only: results always equal an exhaustive
scan, with ties broken by ascending entry id.
"""

import json
import math
import struct
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .text import combine_title_body

INDEX_MAGIC = b"RFIX"
INDEX_FORMAT_VERSION = 1


@dataclass(frozen=True)
class IndexEntry:
    id: str
    embedding: np.ndarray
    p: float
    masked_title: str
    masked_body: str
    ratings: dict | None = None


@dataclass
class RetrievalIndex:
    entries: list[IndexEntry]
    centroids: np.ndarray  # (k, D), unit rows
    assignments: np.ndarray  # (n,)
    radii: np.ndarray  # (k,) max angle between centroid and member
    p_max: float
    trim_frac: float
    keep_frac: float
    n_clusters: int
    seed: int
    embedder_name: str

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass(frozen=True)
class RetrievedExample:
    entry: IndexEntry
    similarity: float


@dataclass(frozen=True)
class RetrievalQueryResult:
    query_p: float
    threshold: float
    examples: list[RetrievedExample]
    underfilled: bool


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    return v if norm == 0.0 else v / norm


def spherical_kmeans(
    vectors: np.ndarray, k: int, seed: int, max_iter: int = 25
) -> tuple[np.ndarray, np.ndarray]:
    """Cosine-consistent k-means on unit vectors: assign by max dot
    product, update centroids as normalized means. Deterministic under the
    seed; empty clusters keep their previous centroid."""
    n = len(vectors)
    rng = np.random.default_rng(seed)
    centroids = vectors[rng.choice(n, size=min(k, n), replace=False)].copy()
    assignments = np.zeros(n, dtype=int)
    for it in range(max_iter):
        sims = vectors @ centroids.T
        new_assignments = np.argmax(sims, axis=1)
        if it > 0 and np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        for c in range(len(centroids)):
            members = vectors[assignments == c]
            if len(members) == 0:
                continue
            mean = members.mean(axis=0)
            norm = np.linalg.norm(mean)
            if norm > 0:
                centroids[c] = mean / norm
    sims = vectors @ centroids.T
    assignments = np.argmax(sims, axis=1)
    return centroids, assignments


def build_index(
    requests,
    scorer,
    embedder,
    trim_frac: float = 0.03,
    keep_frac: float = 0.10,
    seed: int = 0,
    max_iter: int = 25,
) -> RetrievalIndex:
    """Score successful requests, trim both tails, keep the top slice,
    and cluster. Errors when fewer than 5 entries survive."""
    successful = [r for r in requests if r.label]
    scored = [
        (scorer.score(r.masked_title, r.masked_body), r) for r in successful
    ]
    scored.sort(key=lambda pr: (pr[0], pr[1].id))

    n = len(scored)
    cut = math.floor(trim_frac * n)
    remainder = scored[cut : n - cut] if cut > 0 else scored
    keep = math.floor(keep_frac * len(remainder))
    kept = remainder[len(remainder) - keep :]
    if len(kept) < 5:
        raise ValueError(
            f"only {len(kept)} requests survive trimming; need at least 5"
        )

    entries = []
    for p, r in kept:
        emb = _unit(np.asarray(embedder.embed(combine_title_body(r.masked_title, r.masked_body)).values, dtype=float))
        entries.append(
            IndexEntry(id=r.id, embedding=emb, p=float(p), masked_title=r.masked_title, masked_body=r.masked_body)
        )
    entries.sort(key=lambda e: e.id)

    vectors = np.stack([e.embedding for e in entries])
    k = max(1, round(math.sqrt(len(entries))))
    centroids, assignments = spherical_kmeans(vectors, k, seed, max_iter)
    radii = _cluster_radii(vectors, centroids, assignments)
    return RetrievalIndex(
        entries=entries,
        centroids=centroids,
        assignments=assignments,
        radii=radii,
        p_max=max(e.p for e in entries),
        trim_frac=trim_frac,
        keep_frac=keep_frac,
        n_clusters=len(centroids),
        seed=seed,
        embedder_name=getattr(embedder, "name", "unknown"),
    )


def build_index_from_vectors(
    ids: list[str],
    embeddings: np.ndarray,
    probs: np.ndarray,
    titles: list[str] | None = None,
    bodies: list[str] | None = None,
    seed: int = 0,
    max_iter: int = 25,
) -> RetrievalIndex:
    """Assemble an index directly from already-selected entries (no
    trimming); used by tests and by rebuilds from persisted artifacts."""
    titles = titles or ["" for _ in ids]
    bodies = bodies or ["" for _ in ids]
    entries = [
        IndexEntry(
            id=i,
            embedding=_unit(np.asarray(e, dtype=float)),
            p=float(p),
            masked_title=t,
            masked_body=b,
        )
        for i, e, p, t, b in zip(ids, embeddings, probs, titles, bodies)
    ]
    entries.sort(key=lambda e: e.id)
    vectors = np.stack([e.embedding for e in entries])
    k = max(1, round(math.sqrt(len(entries))))
    centroids, assignments = spherical_kmeans(vectors, k, seed, max_iter)
    radii = _cluster_radii(vectors, centroids, assignments)
    return RetrievalIndex(
        entries=entries,
        centroids=centroids,
        assignments=assignments,
        radii=radii,
        p_max=max(e.p for e in entries),
        trim_frac=0.0,
        keep_frac=1.0,
        n_clusters=len(centroids),
        seed=seed,
        embedder_name="prebuilt",
    )


def _cluster_radii(vectors, centroids, assignments) -> np.ndarray:
    radii = np.zeros(len(centroids))
    for c in range(len(centroids)):
        members = vectors[assignments == c]
        if len(members) == 0:
            continue
        dots = np.clip(members @ centroids[c], -1.0, 1.0)
        radii[c] = float(np.max(np.arccos(dots)))
    return radii


def eligibility_threshold(p: float, p_max: float) -> float:
    """Examples must exceed the query's p by at least half the potential
    upside (p_max - p)."""
    return p + (p_max - p) / 2.0


def query(
    text: str,
    index: RetrievalIndex,
    scorer,
    embedder,
    k: int = 5,
) -> RetrievalQueryResult:
    """Exact top-k eligible entries by cosine similarity.

    Clusters are scanned nearest-first and pruned with an angular bound;
    when fewer than k eligible entries exist the result is underfilled,
    never an error.
    """
    p = scorer.score_text(text)
    q = _unit(np.asarray(embedder.embed(text).values, dtype=float))
    t = eligibility_threshold(p, index.p_max)

    centroid_sims = index.centroids @ q
    centroid_angles = np.arccos(np.clip(centroid_sims, -1.0, 1.0))
    # Upper bound on any member's cosine similarity, padded for float
    # safety so pruning can never drop a true top-k member.
    bounds = np.cos(np.maximum(0.0, centroid_angles - index.radii)) + 1e-7
    order = np.argsort(-bounds, kind="stable")

    candidates: list[tuple[float, str, IndexEntry]] = []
    kth_sim = -np.inf
    for c in order:
        if len(candidates) >= k and bounds[c] < kth_sim:
            break
        member_idx = np.flatnonzero(index.assignments == c)
        for mi in member_idx:
            entry = index.entries[mi]
            if entry.p < t:
                continue
            sim = float(entry.embedding @ q)
            candidates.append((sim, entry.id, entry))
        if len(candidates) >= k:
            candidates.sort(key=lambda c3: (-c3[0], c3[1]))
            kth_sim = candidates[k - 1][0]

    candidates.sort(key=lambda c3: (-c3[0], c3[1]))
    top = candidates[:k]
    return RetrievalQueryResult(
        query_p=p,
        threshold=t,
        examples=[RetrievedExample(entry=e, similarity=s) for s, _, e in top],
        underfilled=len(top) < k,
    )


def exhaustive_query(
    text: str,
    index: RetrievalIndex,
    scorer,
    embedder,
    k: int = 5,
) -> RetrievalQueryResult:
    """Reference implementation: full scan over eligible entries."""
    p = scorer.score_text(text)
    q = _unit(np.asarray(embedder.embed(text).values, dtype=float))
    t = eligibility_threshold(p, index.p_max)
    scored = [
        (float(e.embedding @ q), e.id, e) for e in index.entries if e.p >= t
    ]
    scored.sort(key=lambda c3: (-c3[0], c3[1]))
    top = scored[:k]
    return RetrievalQueryResult(
        query_p=p,
        threshold=t,
        examples=[RetrievedExample(entry=e, similarity=s) for s, _, e in top],
        underfilled=len(top) < k,
    )


def attach_ratings(index: RetrievalIndex, ratings: dict[str, dict]) -> RetrievalIndex:
    """Return an index whose entries carry explainer ratings payloads.
    Entries without a rating are kept, with one summary warning."""
    missing = [e.id for e in index.entries if e.id not in ratings]
    if missing:
        warnings.warn(
            f"{len(missing)} indexed entries have no ratings (e.g. {missing[0]!r}); kept without ratings"
        )
    entries = [
        replace(e, ratings=ratings[e.id]) if e.id in ratings else e
        for e in index.entries
    ]
    new_index = replace(index, entries=entries)
    return new_index


# ---------------------------------------------------------------------------
# Persistence: index.bin (little-endian) + index_meta.json
#
# index.bin layout, all little-endian:
#   magic          4 bytes  "RFIX"
#   format_version u32
#   dim            u32
#   n_entries      u32
#   n_clusters     u32
#   seed           u64
#   trim_frac      f64
#   keep_frac      f64
#   p_max          f64
#   centroids      n_clusters * dim f64
#   radii          n_clusters f64
#   entries, each:
#     id           u32 length + utf-8 bytes
#     p            f64
#     cluster      u32
#     embedding    dim f64
#     ratings      u32 length + utf-8 JSON ("" when absent)
#     masked_title u32 length + utf-8 bytes
#     masked_body  u32 length + utf-8 bytes


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def save_index(index: RetrievalIndex, path: str | Path, meta_path: str | Path | None = None) -> None:
    buf = bytearray()
    buf += INDEX_MAGIC
    buf += struct.pack(
        "<IIIIQddd",
        INDEX_FORMAT_VERSION,
        index.dim,
        len(index.entries),
        index.n_clusters,
        index.seed,
        index.trim_frac,
        index.keep_frac,
        index.p_max,
    )
    buf += np.ascontiguousarray(index.centroids, dtype="<f8").tobytes()
    buf += np.ascontiguousarray(index.radii, dtype="<f8").tobytes()
    for e, cluster in zip(index.entries, index.assignments):
        buf += _pack_str(e.id)
        buf += struct.pack("<dI", e.p, int(cluster))
        buf += np.ascontiguousarray(e.embedding, dtype="<f8").tobytes()
        ratings_json = json.dumps(e.ratings, sort_keys=True) if e.ratings is not None else ""
        buf += _pack_str(ratings_json)
        buf += _pack_str(e.masked_title)
        buf += _pack_str(e.masked_body)
    Path(path).write_bytes(bytes(buf))

    if meta_path is not None:
        meta = {
            "format_version": INDEX_FORMAT_VERSION,
            "dim": index.dim,
            "n_entries": len(index.entries),
            "n_clusters": index.n_clusters,
            "seed": index.seed,
            "trim_frac": index.trim_frac,
            "keep_frac": index.keep_frac,
            "p_max": index.p_max,
            "embedder_name": index.embedder_name,
        }
        Path(meta_path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated index file")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def read_str(self) -> str:
        (length,) = self.unpack("<I")
        return self.take(length).decode("utf-8")


def load_index(path: str | Path, embedder_name: str = "") -> RetrievalIndex:
    reader = _Reader(Path(path).read_bytes())
    if reader.take(4) != INDEX_MAGIC:
        raise ValueError(f"{path} is not an index file")
    version, dim, n_entries, n_clusters, seed, trim, keep, p_max = reader.unpack("<IIIIQddd")
    if version != INDEX_FORMAT_VERSION:
        raise ValueError(f"index format version {version} != {INDEX_FORMAT_VERSION}")
    centroids = np.frombuffer(reader.take(8 * n_clusters * dim), dtype="<f8").reshape(n_clusters, dim).copy()
    radii = np.frombuffer(reader.take(8 * n_clusters), dtype="<f8").copy()
    entries = []
    assignments = np.zeros(n_entries, dtype=int)
    for i in range(n_entries):
        eid = reader.read_str()
        p, cluster = reader.unpack("<dI")
        emb = np.frombuffer(reader.take(8 * dim), dtype="<f8").copy()
        ratings_json = reader.read_str()
        title = reader.read_str()
        body = reader.read_str()
        assignments[i] = cluster
        entries.append(
            IndexEntry(
                id=eid,
                embedding=emb,
                p=p,
                masked_title=title,
                masked_body=body,
                ratings=json.loads(ratings_json) if ratings_json else None,
            )
        )
    return RetrievalIndex(
        entries=entries,
        centroids=centroids,
        assignments=assignments,
        radii=radii,
        p_max=p_max,
        trim_frac=trim,
        keep_frac=keep,
        n_clusters=n_clusters,
        seed=seed,
        embedder_name=embedder_name,
    )
