"""Node embeddings from weighted random walks, and guilt-by-association labeling.

Walks move to a neighbour with probability proportional to the edge weight,
which is the same as walking uniformly on the multigraph that repeats each
edge ``w`` times. Skip-gram with negative sampling is trained in numpy on
minibatches, single-threaded, so a fixed seed reproduces the embedding bit
for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.special import expit

from .classifiers import make_classifier
from .graph import Graph

MAX_MATRIX_ENTRIES = 2**31
NOISE_TABLE_SIZE = 1 << 20


@dataclass(frozen=True)
class WalkConfig:
    gamma: int = 80
    walk_len: int = 100
    window: int = 5
    dims: int = 300
    seed: int = 0
    negatives: int = 5
    lr: float = 0.025
    epochs: int = 5
    batch_size: int = 1024

    def __post_init__(self) -> None:
        for name in ("gamma", "walk_len", "window", "dims", "negatives", "epochs", "batch_size"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.window >= self.walk_len:
            raise ValueError("window must be smaller than walk_len")
        if not self.lr > 0:
            raise ValueError("lr must be positive")


def random_walks(g: Graph, cfg: WalkConfig) -> list[list[str]]:
    """``cfg.gamma`` walks from every node, in rounds; round ``r`` visits nodes in sorted order.

    All walks of a round advance together, drawing from their own RNG
    stream seeded by ``(seed, r)``. A walk ends after ``walk_len`` nodes,
    or right away at an isolated node.
    """
    if not len(g):
        raise ValueError("graph has no nodes")
    nodes = list(g.nodes)
    index = {u: i for i, u in enumerate(nodes)}
    indptr = [0]
    targets: list[int] = []
    weights: list[int] = []
    for u in nodes:
        for v, w in sorted(g.neighbors(u).items()):
            targets.append(index[v])
            weights.append(w)
        indptr.append(len(targets))
    indptr_a = np.asarray(indptr, dtype=np.int64)
    targets_a = np.asarray(targets, dtype=np.int64)
    cum = np.cumsum(np.asarray(weights, dtype=np.float64))
    start_cum = np.concatenate([[0.0], cum])[indptr_a[:-1]]
    row_total = np.concatenate([[0.0], cum])[indptr_a[1:]] - start_cum
    has_edges = indptr_a[1:] > indptr_a[:-1]

    walks: list[list[str]] = []
    starts = np.arange(len(nodes))
    for r in range(cfg.gamma):
        rng = np.random.default_rng([cfg.seed, r])
        path = np.full((len(nodes), cfg.walk_len), -1, dtype=np.int64)
        path[:, 0] = starts
        alive = has_edges[starts].copy()
        for step in range(1, cfg.walk_len):
            cur = path[alive, step - 1]
            if not len(cur):
                break
            u = rng.random(len(cur))
            # Weights are integers, so the offset stays inside the row's cumulative span.
            pos = np.searchsorted(cum, start_cum[cur] + u * row_total[cur], side="right")
            pos = np.minimum(pos, indptr_a[cur + 1] - 1)
            path[alive, step] = targets_a[pos]
        for row in path:
            walks.append([nodes[i] for i in row if i >= 0])
    return walks


@dataclass
class Embedding:
    nodes: tuple[str, ...]
    vectors: np.ndarray
    losses: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.shape[0] != len(self.nodes):
            raise ValueError("one vector per node required")
        if not np.isfinite(self.vectors).all():
            raise ValueError("embedding has non-finite entries")
        self._index = {u: i for i, u in enumerate(self.nodes)}

    @property
    def dims(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, node: object) -> bool:
        return node in self._index

    def __getitem__(self, node: str) -> np.ndarray:
        return self.vectors[self._index[node]]

    def matrix(self, nodes: Iterable[str]) -> np.ndarray:
        nodes = list(nodes)
        missing = [u for u in nodes if u not in self._index]
        if missing:
            raise KeyError(f"no embedding for {len(missing)} node(s), e.g. {missing[0]!r}")
        return self.vectors[[self._index[u] for u in nodes]] if nodes else np.zeros((0, self.dims))

    def cosine(self, a: str, b: str) -> float:
        x, y = self[a], self[b]
        den = np.linalg.norm(x) * np.linalg.norm(y)
        return float(x @ y / den) if den else 0.0

    def save(self, stem: str | Path, meta: Mapping[str, object] | None = None) -> tuple[Path, Path]:
        """Write ``<stem>.npy`` (float64 matrix) and ``<stem>.nodes.json`` (row order, losses, ``meta``)."""
        stem = Path(stem)
        matrix_path, index_path = stem.with_suffix(".npy"), stem.with_suffix(".nodes.json")
        np.save(matrix_path, self.vectors)
        index = {**(meta or {}), "nodes": list(self.nodes), "losses": self.losses}
        index_path.write_text(json.dumps(index, indent=1, sort_keys=True) + "\n")
        return matrix_path, index_path

    @classmethod
    def load(cls, stem: str | Path) -> "Embedding":
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".nodes.json").read_text())
        return cls(tuple(meta["nodes"]), np.load(stem.with_suffix(".npy")), list(meta.get("losses", [])))


def _pairs(walks: Sequence[Sequence[int]], window: int, width: int) -> np.ndarray:
    arr = np.full((len(walks), width), -1, dtype=np.int64)
    for i, w in enumerate(walks):
        arr[i, : len(w)] = w
    chunks = []
    for off in range(1, window + 1):
        if off >= width:
            break
        a, b = arr[:, :-off].ravel(), arr[:, off:].ravel()
        keep = (a >= 0) & (b >= 0)
        a, b = a[keep], b[keep]
        chunks.append(np.stack([a, b], 1))
        chunks.append(np.stack([b, a], 1))
    return np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.int64)


def _scatter_mean(target: np.ndarray, idx: np.ndarray, rows: np.ndarray) -> None:
    # Rows hit several times in a batch get the mean update: summing diverges on small vocabularies.
    # Sparse product instead of np.add.at for speed; the summation order is fixed, so still deterministic.
    uniq, inv, counts = np.unique(idx, return_inverse=True, return_counts=True)
    s = csr_matrix((1.0 / counts[inv], (inv, np.arange(len(idx)))), shape=(len(uniq), len(idx)))
    target[uniq] += s @ rows


def _noise_table(freq: np.ndarray) -> np.ndarray:
    p = freq / freq.sum()
    counts = np.maximum(np.round(p * NOISE_TABLE_SIZE).astype(np.int64), (freq > 0).astype(np.int64))
    return np.repeat(np.arange(len(freq)), counts)


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def train_embedding(walks: Sequence[Sequence[str]], cfg: WalkConfig, nodes: Iterable[str] | None = None) -> Embedding:
    """Skip-gram with negative sampling over all (center, context) pairs within ``cfg.window``.

    Negatives come from the unigram distribution raised to 3/4 (through a
    lookup table of about a million entries, as word2vec does). The learning
    rate decays linearly from ``cfg.lr`` to ``cfg.lr / 1e4`` across all
    updates. A row touched several times in one minibatch receives the mean
    of its updates, and batches never exceed the vocabulary size.
    ``losses`` holds the mean per-pair loss of each epoch.
    """
    if not walks:
        raise ValueError("no walks")
    vocab = sorted({u for w in walks for u in w} | set(nodes or ()))
    n, d = len(vocab), cfg.dims
    if n * d > MAX_MATRIX_ENTRIES:
        raise ValueError(f"{n} nodes x {d} dims exceeds the supported matrix size")
    index = {u: i for i, u in enumerate(vocab)}
    rng = np.random.default_rng([cfg.seed, 1 << 20])
    w_in = (rng.random((n, d)) - 0.5) / d
    w_out = np.zeros((n, d))

    coded = [[index[u] for u in w] for w in walks]
    pairs = _pairs(coded, cfg.window, max(len(w) for w in coded))
    if not len(pairs):
        return Embedding(tuple(vocab), w_in, [])
    freq = np.bincount(np.concatenate([np.asarray(w) for w in coded]), minlength=n).astype(np.float64) ** 0.75
    noise = _noise_table(freq)

    # A batch larger than the vocabulary would average most of an epoch into a handful of steps.
    k, bs = cfg.negatives, min(cfg.batch_size, n)
    total_steps = cfg.epochs * -(-len(pairs) // bs)
    step = 0
    losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(pairs))
        epoch_loss = 0.0
        for lo in range(0, len(order), bs):
            batch = pairs[order[lo : lo + bs]]
            lr = cfg.lr * max(1.0 - step / total_steps, 1e-4)
            step += 1
            c, o = batch[:, 0], batch[:, 1]
            neg = noise[rng.integers(0, len(noise), (len(batch), k))]
            v = w_in[c]
            ctx = np.concatenate([o[:, None], neg], 1)
            u = w_out[ctx]
            score = np.einsum("bd,bkd->bk", v, u)
            sign = np.ones_like(score)
            sign[:, 1:] = -1.0
            epoch_loss -= _log_sigmoid(sign * score).sum()
            # d(-log sigmoid(s*x))/dx = -s * sigmoid(-s*x)
            g = -sign * expit(-sign * score)
            grad_v = np.einsum("bk,bkd->bd", g, u)
            grad_u = g[:, :, None] * v[:, None, :]
            _scatter_mean(w_out, ctx.ravel(), -lr * grad_u.reshape(-1, d))
            _scatter_mean(w_in, c, -lr * grad_v)
        losses.append(float(epoch_loss / len(pairs)))
    return Embedding(tuple(vocab), w_in, losses)


def embed_graph(g: Graph, cfg: WalkConfig) -> Embedding:
    return train_embedding(random_walks(g, cfg), cfg, g.nodes)


class GbaModel:
    """Classifier from embedding vectors to worker ids."""

    def __init__(self, algorithm: str = "logreg", **params):
        self.algorithm = algorithm
        self.params = params

    def fit(self, emb: Embedding, labels: Mapping[str, str]) -> "GbaModel":
        nodes = sorted(labels)
        if len({labels[u] for u in nodes}) < 2:
            raise ValueError("guilt-by-association needs labeled nodes from at least two workers")
        self.classifier = make_classifier(self.algorithm, **self.params).fit(
            emb.matrix(nodes), [labels[u] for u in nodes]
        )
        return self

    @property
    def classes(self) -> list[str]:
        return [str(c) for c in self.classifier.classes_]

    def predict_proba(self, emb: Embedding, nodes: Sequence[str]) -> np.ndarray:
        if not nodes:
            return np.zeros((0, len(self.classes)))
        return self.classifier.predict_proba(emb.matrix(nodes))

    def predict(self, emb: Embedding, nodes: Sequence[str]) -> dict[str, tuple[str, float]]:
        """Most probable worker and its probability; ties go to the smaller worker id."""
        proba = self.predict_proba(emb, nodes)
        out = {}
        for u, row in zip(nodes, proba):
            best = int(np.argmax(row))
            out[u] = (self.classes[best], float(row[best]))
        return out


def guilt_by_association(
    emb: Embedding,
    labels: Mapping[str, str],
    unlabeled: Iterable[str],
    threshold: float = 0.5,
    algorithm: str = "logreg",
    **params,
) -> dict[str, tuple[str, float]]:
    """Label ``unlabeled`` nodes with the worker the embedding places them with.

    Nodes whose best probability is below ``threshold`` are left out.
    """
    unlabeled = sorted(set(unlabeled))
    model = GbaModel(algorithm, **params).fit(emb, labels)
    return {u: (w, p) for u, (w, p) in model.predict(emb, unlabeled).items() if p >= threshold}
