"""Biased second-order random walks plus skip-gram negative sampling.

Walk transitions from `cur` (having arrived from `prev`) weight each
neighbor x of cur by 1/p if x == prev, 1 if x neighbors prev, else 1/q,
then normalize. Each walk draws from an independent stream keyed by
(seed, node, walk index), so walks are reproducible in any order.

The embedding stage is word2vec-style SGNS over the walk corpus: center
vectors U, context vectors V, negatives from the unigram^0.75 occurrence
distribution. Returned embeddings are the unit-normalized center vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import _sigmoid
from .errors import ConfigError, InputError
from .rng import stream
from .scenegraph import PlainGraph

SGNS_LR0 = 0.05
SGNS_LR_MIN = 0.005


@dataclass
class Node2VecConfig:
    p: float = 1.0
    q: float = 1.0
    walk_length: int = 20
    walks_per_node: int = 10
    window: int = 5
    embedding_dim: int = 32
    negative_samples: int = 5
    epochs: int = 5
    seed: int = 0

    def validate(self) -> None:
        if self.p <= 0 or self.q <= 0:
            raise ConfigError("p and q must be positive")
        if self.walk_length < 2:
            raise ConfigError("walk_length must be at least 2")
        if self.walks_per_node < 1 or self.window < 1 or self.embedding_dim < 1:
            raise ConfigError("walks_per_node, window, embedding_dim must be >= 1")
        if self.negative_samples < 1 or self.epochs < 1:
            raise ConfigError("negative_samples and epochs must be >= 1")


def transition_probs(graph: PlainGraph, prev: int, cur: int, p: float, q: float
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Neighbors of cur and their normalized transition probabilities."""
    nbrs = graph.neighbors[cur]
    if not nbrs:
        raise InputError(f"node {cur} has no neighbors")
    prev_nbrs = set(graph.neighbors[prev])
    weights = np.array(
        [1.0 / p if x == prev else (1.0 if x in prev_nbrs else 1.0 / q) for x in nbrs],
        dtype=np.float64)
    return np.array(nbrs, dtype=np.int64), weights / weights.sum()


def _walk(graph: PlainGraph, start: int, cfg: Node2VecConfig,
          rng: np.random.Generator) -> list[int]:
    nbrs = graph.neighbors[start]
    walk = [start]
    if not nbrs:
        return walk  # isolated node: the walk is just itself
    walk.append(int(rng.choice(np.array(nbrs, dtype=np.int64))))
    while len(walk) < cfg.walk_length:
        nodes, probs = transition_probs(graph, walk[-2], walk[-1], cfg.p, cfg.q)
        walk.append(int(nodes[rng.choice(len(nodes), p=probs)]))
    return walk


def node2vec_walks(graph: PlainGraph, cfg: Node2VecConfig) -> list[list[int]]:
    """walks_per_node walks from every node, deterministic given cfg.seed."""
    cfg.validate()
    if graph.n < 1:
        raise InputError("walks need a non-empty graph")
    walks = []
    for node in range(graph.n):
        for w in range(cfg.walks_per_node):
            walks.append(_walk(graph, node, cfg, stream(cfg.seed, "walk", node, w)))
    return walks


def skipgram_train(walks: list[list[int]], cfg: Node2VecConfig,
                   n_nodes: int | None = None) -> np.ndarray:
    """SGNS over walk sentences; rows of the result are unit vectors."""
    cfg.validate()
    if not walks:
        raise InputError("skipgram needs at least one walk")
    if n_nodes is None:
        n_nodes = max(max(w) for w in walks) + 1
    d = cfg.embedding_dim
    init = stream(cfg.seed, "sgns-init")
    u = (init.random((n_nodes, d)) - 0.5) / d  # centers
    v = np.zeros((n_nodes, d))  # contexts

    counts = np.zeros(n_nodes, dtype=np.float64)
    for walk in walks:
        for node in walk:
            counts[node] += 1.0
    noise = counts ** 0.75
    noise /= noise.sum()

    k = cfg.negative_samples
    for epoch in range(cfg.epochs):
        frac = epoch / max(1, cfg.epochs - 1) if cfg.epochs > 1 else 0.0
        lr = SGNS_LR0 + frac * (SGNS_LR_MIN - SGNS_LR0)
        rng = stream(cfg.seed, "sgns", epoch)
        for walk in walks:
            for i, center in enumerate(walk):
                lo = max(0, i - cfg.window)
                hi = min(len(walk), i + cfg.window + 1)
                for j in range(lo, hi):
                    if j == i:
                        continue
                    ctx = walk[j]
                    negs = rng.choice(n_nodes, size=k, p=noise)
                    targets = [ctx] + [int(x) for x in negs if x != ctx]
                    labels = np.zeros(len(targets))
                    labels[0] = 1.0
                    rows = v[targets]  # (k+1, d)
                    scores = _sigmoid(rows @ u[center])
                    err = scores - labels
                    grad_center = err @ rows
                    np.add.at(v, targets, -lr * err[:, None] * u[center])
                    u[center] -= lr * grad_center
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return u / norms


def node2vec_embed(graph: PlainGraph, cfg: Node2VecConfig) -> np.ndarray:
    """Walks + SGNS in one call; (n, embedding_dim) unit-row matrix."""
    walks = node2vec_walks(graph, cfg)
    return skipgram_train(walks, cfg, n_nodes=graph.n)
