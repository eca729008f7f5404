"""Graph convolution: normalization law, dense numpy oracle, hub readout,
and gradient checks."""

import numpy as np
import pytest

from sgmm.autodiff import (Tensor, bce_loss, constant, gradcheck, matmul,
                           param, reshape, sigmoid)
from sgmm.errors import ShapeError
from sgmm.gcn import (GcnLayer, convolve_nodes, encode_fused_graph,
                      encode_graph, gcn_propagate, normalized_adjacency,
                      propagate_normalized)

TOL = 1e-10


# ---------------------------------------------------------------------------
# normalized adjacency (hand oracles)


def test_two_node_path_is_all_half():
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(normalized_adjacency(a),
                               [[0.5, 0.5], [0.5, 0.5]], atol=TOL)


def test_triangle_is_all_one_third():
    a = np.ones((3, 3)) - np.eye(3)
    np.testing.assert_allclose(normalized_adjacency(a),
                               np.full((3, 3), 1.0 / 3.0), atol=TOL)


def test_star_hand_values():
    # node 0 is the center of a 4-node star
    a = np.zeros((4, 4))
    a[0, 1:] = 1.0
    a[1:, 0] = 1.0
    s = normalized_adjacency(a)
    assert abs(s[0, 0] - 0.25) < TOL
    leaf_center = 1.0 / (2.0 * np.sqrt(2.0))
    for leaf in (1, 2, 3):
        assert abs(s[0, leaf] - leaf_center) < TOL
        assert abs(s[leaf, 0] - leaf_center) < TOL
        assert abs(s[leaf, leaf] - 0.5) < TOL
    # no leaf-leaf coupling in one hop
    assert abs(s[1, 2]) < TOL


def test_isolated_node_row_is_identity():
    a = np.zeros((2, 2))
    np.testing.assert_allclose(normalized_adjacency(a), np.eye(2), atol=TOL)


def test_normalized_is_symmetric():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n = int(rng.integers(1, 7))
        a = (rng.random((n, n)) < 0.4).astype(float)
        a = np.maximum(a, a.T)
        np.fill_diagonal(a, 0.0)
        s = normalized_adjacency(a)
        np.testing.assert_allclose(s, s.T, atol=TOL)
        # spectrum of the normalized operator lies in [-1, 1]
        eig = np.linalg.eigvalsh(s)
        assert eig.min() >= -1.0 - 1e-9 and eig.max() <= 1.0 + 1e-9


def test_empty_graph_normalization():
    assert normalized_adjacency(np.zeros((0, 0))).shape == (0, 0)


def test_non_square_rejected():
    with pytest.raises(ShapeError):
        normalized_adjacency(np.zeros((2, 3)))


# ---------------------------------------------------------------------------
# dense numpy oracle for the full two-layer encoder


def dense_encode(a, x, w1, b1, w2, b2):
    s = normalized_adjacency(a)
    h1 = np.maximum(s @ x @ w1 + b1, 0.0)
    h2 = np.maximum(s @ h1 @ w2 + b2, 0.0)
    return h2.mean(axis=0)


def random_layers(rng, f, h, o):
    l1 = GcnLayer(param(rng.standard_normal((f, h))),
                  param(rng.standard_normal(h)))
    l2 = GcnLayer(param(rng.standard_normal((h, o))),
                  param(rng.standard_normal(o)))
    return l1, l2


def test_matches_dense_oracle():
    rng = np.random.default_rng(42)
    for trial in range(20):
        n = int(rng.integers(1, 6))
        f, h, o = 4, 3, 5
        a = (rng.random((n, n)) < 0.5).astype(float)
        a = np.maximum(a, a.T)
        np.fill_diagonal(a, 0.0)
        x = rng.standard_normal((n, f))
        l1, l2 = random_layers(rng, f, h, o)
        got = encode_graph(constant(normalized_adjacency(a)), constant(x),
                           l1, l2)
        want = dense_encode(a, x, l1.weight.data, l1.bias.data,
                            l2.weight.data, l2.bias.data)
        np.testing.assert_allclose(got.data, want, atol=TOL)


def test_propagate_single_layer_oracle():
    rng = np.random.default_rng(7)
    a = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    x = rng.standard_normal((3, 4))
    layer = GcnLayer(param(rng.standard_normal((4, 2))))
    got = gcn_propagate(a, constant(x), layer)
    want = normalized_adjacency(a) @ x @ layer.weight.data
    np.testing.assert_allclose(got.data, want, atol=TOL)


def test_propagate_shape_mismatches():
    layer = GcnLayer(param(np.zeros((4, 2))))
    with pytest.raises(ShapeError):
        gcn_propagate(np.zeros((2, 2)), constant(np.zeros((3, 4))), layer)
    with pytest.raises(ShapeError):
        propagate_normalized(constant(np.zeros((3, 3))),
                             constant(np.zeros((3, 5))), layer)


# ---------------------------------------------------------------------------
# graph readouts


def test_empty_graph_encodes_to_zeros():
    rng = np.random.default_rng(1)
    l1, l2 = random_layers(rng, 4, 3, 5)
    for args in ((None, None), (constant(np.zeros((0, 0))),
                                constant(np.zeros((0, 4))))):
        out = encode_graph(*args, l1, l2)
        np.testing.assert_array_equal(out.data, np.zeros(5))
        fused = encode_fused_graph(*args, l1, l2, dummy=None)
        np.testing.assert_array_equal(fused.data, np.zeros(5))


def test_fused_readout_uses_hub_row():
    rng = np.random.default_rng(3)
    n, f = 4, 4
    a = np.zeros((n, n))
    a[0, 1:] = 1.0
    a[1:, 0] = 1.0  # hub 0 wired to everything
    x = rng.standard_normal((n, f))
    l1, l2 = random_layers(rng, f, 3, 5)
    s = constant(normalized_adjacency(a))
    nodes = convolve_nodes(s, constant(x), l1, l2)
    hub = encode_fused_graph(s, constant(x), l1, l2, dummy=0)
    np.testing.assert_allclose(hub.data, nodes.data[0], atol=TOL)
    pooled = encode_fused_graph(s, constant(x), l1, l2, dummy=None)
    np.testing.assert_allclose(pooled.data, nodes.data.mean(axis=0), atol=TOL)


def test_fused_hub_out_of_range():
    rng = np.random.default_rng(4)
    l1, l2 = random_layers(rng, 4, 3, 5)
    s = constant(normalized_adjacency(np.zeros((2, 2))))
    x = constant(np.zeros((2, 4)))
    with pytest.raises(ShapeError):
        encode_fused_graph(s, x, l1, l2, dummy=2)
    with pytest.raises(ShapeError):
        encode_fused_graph(s, x, l1, l2, dummy=-1)


# ---------------------------------------------------------------------------
# gradients through the whole encoder


def test_gcn_gradcheck():
    rng = np.random.default_rng(9)
    n, f, h, o = 3, 4, 3, 5
    a = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    s = constant(normalized_adjacency(a))
    feats = param(rng.standard_normal((n, f)))
    l1, l2 = random_layers(rng, f, h, o)
    read = param(rng.standard_normal((o, 1)) * 0.3)

    def build_loss() -> Tensor:
        emb = encode_graph(s, feats, l1, l2)
        logit = matmul(reshape(emb, (1, o)), read)
        return bce_loss(sigmoid(logit), 1)

    params = {"x": feats, "w1": l1.weight, "b1": l1.bias,
              "w2": l2.weight, "b2": l2.bias, "read": read}
    errs = gradcheck(build_loss, params, eps=1e-6)
    for name, err in errs.items():
        assert err < 1e-6, f"{name}: {err}"


def test_fused_hub_gradcheck():
    rng = np.random.default_rng(10)
    n, f, h, o = 4, 4, 3, 2
    a = np.zeros((n, n))
    a[0, 1:] = 1.0
    a[1:, 0] = 1.0
    s = constant(normalized_adjacency(a))
    feats = param(rng.standard_normal((n, f)))
    l1, l2 = random_layers(rng, f, h, o)
    read = param(rng.standard_normal((o, 1)) * 0.3)

    def build_loss() -> Tensor:
        emb = encode_fused_graph(s, feats, l1, l2, dummy=0)
        logit = matmul(reshape(emb, (1, o)), read)
        return bce_loss(sigmoid(logit), 0)

    params = {"x": feats, "w1": l1.weight, "w2": l2.weight, "read": read}
    errs = gradcheck(build_loss, params, eps=1e-6)
    for name, err in errs.items():
        assert err < 1e-6, f"{name}: {err}"
