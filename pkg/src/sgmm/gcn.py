"""Two-layer graph convolutional encoders over scene graphs.

Propagation follows the symmetric-normalized rule: with self-loops added,
A_hat = A + I, D_hat its degree matrix,

    H' = D_hat^{-1/2} A_hat D_hat^{-1/2} H W (+ bias)

A ReLU follows each of the two layers; a whole-graph embedding is the mean
over node rows. The empty graph encodes to the zero vector of the output
width. Fused graphs built around a hub node are read out at that node's
row instead of pooling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, add, constant, matmul, mean_pool, relu, row, zeros
from .errors import ShapeError

Array = np.ndarray


@dataclass
class GcnLayer:
    weight: Tensor  # (in_dim, out_dim)
    bias: Tensor | None = None

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]


def normalized_adjacency(adjacency: Array) -> Array:
    """D_hat^{-1/2} (A + I) D_hat^{-1/2}; symmetric, eigenvalues in [-1, 1]."""
    a = np.asarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"adjacency must be square, got {a.shape}")
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    a_hat = a + np.eye(n)
    inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))  # degrees >= 1 via self-loops
    return inv_sqrt[:, None] * a_hat * inv_sqrt[None, :]


def propagate_normalized(s: Tensor, features: Tensor, layer: GcnLayer) -> Tensor:
    """One convolution given an already-normalized operator s."""
    if features.shape[1] != layer.in_dim:
        raise ShapeError(
            f"features have width {features.shape[1]}, layer expects {layer.in_dim}")
    out = matmul(matmul(s, features), layer.weight)
    if layer.bias is not None:
        out = add(out, layer.bias)
    return out


def gcn_propagate(adjacency: Array, features: Tensor, layer: GcnLayer) -> Tensor:
    """One convolution from a raw 0/1 adjacency (self-loops added here)."""
    a = np.asarray(adjacency, dtype=np.float64)
    if a.shape[0] != features.shape[0]:
        raise ShapeError(
            f"adjacency is {a.shape}, features have {features.shape[0]} rows")
    return propagate_normalized(constant(normalized_adjacency(a)), features, layer)


def convolve_nodes(s: Tensor, features: Tensor, l1: GcnLayer, l2: GcnLayer) -> Tensor:
    """relu(conv2(relu(conv1(X)))) over all nodes."""
    h = relu(propagate_normalized(s, features, l1))
    return relu(propagate_normalized(s, h, l2))


def encode_graph(s: Tensor | None, features: Tensor | None,
                 l1: GcnLayer, l2: GcnLayer) -> Tensor:
    """Whole-graph embedding: mean pooled rows, zeros for the empty graph."""
    if s is None or features is None or features.shape[0] == 0:
        return zeros(l2.out_dim)
    return mean_pool(convolve_nodes(s, features, l1, l2))


def encode_fused_graph(s: Tensor | None, features: Tensor | None,
                       l1: GcnLayer, l2: GcnLayer,
                       dummy: int | None) -> Tensor:
    """Fused-graph embedding: the hub node's row when one exists, else the
    pooled mean. Empty graphs encode to zeros."""
    if s is None or features is None or features.shape[0] == 0:
        return zeros(l2.out_dim)
    h = convolve_nodes(s, features, l1, l2)
    if dummy is None:
        return mean_pool(h)
    if not 0 <= dummy < features.shape[0]:
        raise ShapeError(f"hub index {dummy} out of range for {features.shape[0]} nodes")
    return row(h, dummy)
