"""Edge masking, shared graph-conv encode/decode, scaled cosine reconstruction."""

import numpy as np
import pytest

from mug import autodiff as ad
from mug import metamae
from mug.metamae import (
    DegenerateViewError,
    MaskSpec,
    encode,
    graph_conv,
    mask_edges,
    normalized_operator,
    recon_loss,
    reconstruct,
)
from mug.rng import RngStream


def sym_adj(n, pairs):
    a = np.zeros((n, n), dtype=bool)
    for u, v in pairs:
        a[u, v] = a[v, u] = True
    return a


# -- masking -------------------------------------------------------------------


def test_mask_rate_zero_keeps_everything():
    adj = sym_adj(5, [(0, 1), (1, 2), (3, 4)])
    masked, _ = mask_edges(adj, MaskSpec(edge_mask_rate=0.0), RngStream(0))
    assert np.array_equal(masked, adj)


def test_mask_rate_one_removes_everything():
    adj = sym_adj(5, [(0, 1), (1, 2), (3, 4)])
    masked, _ = mask_edges(adj, MaskSpec(edge_mask_rate=1.0), RngStream(0))
    assert masked.sum() == 0


def test_mask_half_removes_half_within_binomial_band():
    rng = np.random.default_rng(0)
    n = 200
    adj = np.triu(rng.random((n, n)) < 0.55, k=1)
    adj = adj | adj.T
    n_edges = np.triu(adj, 1).sum()
    assert n_edges >= 10_000
    masked, _ = mask_edges(adj, MaskSpec(edge_mask_rate=0.5), RngStream(7))
    removed = 1.0 - np.triu(masked, 1).sum() / n_edges
    assert 0.48 <= removed <= 0.52


def test_mask_symmetric_view_stays_symmetric():
    rng = np.random.default_rng(1)
    adj = sym_adj(30, [(i, j) for i in range(30) for j in range(i + 1, 30)
                       if rng.random() < 0.3])
    masked, _ = mask_edges(adj, MaskSpec(edge_mask_rate=0.5), RngStream(3))
    assert np.array_equal(masked, masked.T)
    assert not (masked & ~adj).any()  # never creates edges


# -- graph convolution -----------------------------------------------------------


def test_single_isolated_node_identity_conv():
    adj = np.zeros((1, 1), dtype=bool)
    op = normalized_operator(adj)
    assert op[0, 0] == 1.0  # self-loop over degree one
    x = ad.leaf(np.array([[2.0, -3.0]]))
    out = graph_conv(op, x, ad.leaf(np.eye(2)), ad.leaf(np.zeros((1, 2))), "identity")
    assert np.array_equal(out.value, [[2.0, -3.0]])


def test_two_connected_equal_nodes_give_equal_rows():
    adj = sym_adj(2, [(0, 1)])
    op = normalized_operator(adj)
    x = ad.leaf(np.array([[1.0, 2.0], [1.0, 2.0]]))
    rng = RngStream(0, 9)
    w = ad.leaf(rng.normal(size=(2, 3)))
    out = encode(op, x, w, ad.leaf(np.zeros((1, 3))))
    assert np.allclose(out.value[0], out.value[1])


def test_three_node_path_matches_hand_computation():
    adj = sym_adj(3, [(0, 1), (1, 2)])
    a1 = adj.astype(float) + np.eye(3)
    d = a1.sum(1)
    hand_op = a1 / np.sqrt(np.outer(d, d))
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    w = np.array([[2.0, -1.0], [0.5, 1.5]])
    want = hand_op @ x @ w
    out = graph_conv(normalized_operator(adj), ad.leaf(x), ad.leaf(w),
                     ad.leaf(np.zeros((1, 2))), "identity")
    assert np.allclose(out.value, want)


# -- reconstruction ---------------------------------------------------------------


def test_zero_decoded_embeddings_give_half_everywhere():
    adj = np.zeros((3, 3), dtype=bool)
    op = normalized_operator(adj)
    z = ad.leaf(np.random.default_rng(0).normal(size=(3, 2)))
    # zero decoder weight forces z_hat = 0
    _, a_hat = reconstruct(op, z, ad.leaf(np.zeros((2, 2))), ad.leaf(np.zeros((1, 2))))
    assert np.allclose(a_hat.value, 0.5)


def test_orthonormal_rows_give_half_offdiag_sigma1_diag():
    adj = np.zeros((2, 2), dtype=bool)   # identity operator
    z = ad.leaf(np.eye(2))
    _, a_hat = reconstruct(normalized_operator(adj), z, ad.leaf(np.eye(2)),
                           ad.leaf(np.zeros((1, 2))))
    sig1 = 1.0 / (1.0 + np.exp(-1.0))
    assert a_hat.value[0, 1] == pytest.approx(0.5)
    assert a_hat.value[0, 0] == pytest.approx(sig1)


def test_reconstruction_is_sigmoid_outer_product():
    rng = np.random.default_rng(5)
    zv = rng.normal(size=(4, 2))
    adj = np.zeros((4, 4), dtype=bool)
    _, a_hat = reconstruct(normalized_operator(adj), ad.leaf(zv), ad.leaf(np.eye(2)),
                           ad.leaf(np.zeros((1, 2))))
    want = 1.0 / (1.0 + np.exp(-(zv @ zv.T)))
    assert np.allclose(a_hat.value, want)


# -- reconstruction loss -----------------------------------------------------------


def test_recon_loss_zero_for_proportional_rows():
    adj = sym_adj(3, [(0, 1), (1, 2)])
    a_hat = ad.leaf(adj.astype(float) * 0.37)  # same direction per row
    assert recon_loss(adj, a_hat, 2.0).value[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_recon_loss_orthogonal_row_contributes_one():
    adj = np.array([[0, 1], [1, 0]], dtype=bool)
    a_hat = ad.leaf(np.array([[1.0, 0.0], [0.0, 1.0]]))  # orthogonal to each row
    assert recon_loss(adj, a_hat, 2.0).value[0, 0] == pytest.approx(1.0)


def test_recon_loss_hand_case_with_zero_row_and_fd():
    adj = np.array([[0, 1, 1], [1, 0, 0], [0, 0, 0]], dtype=bool)  # row 2 empty
    rng = np.random.default_rng(8)
    a_hat_arr = rng.uniform(0.1, 0.9, size=(3, 3))
    gamma = 2.0

    def cos(u, v):
        return (u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))

    hand = np.mean([(1 - cos(adj[i].astype(float), a_hat_arr[i])) ** gamma
                    for i in range(2)])
    got = recon_loss(adj, ad.leaf(a_hat_arr), gamma).value[0, 0]
    assert got == pytest.approx(hand)

    report = ad.grad_check(lambda n: recon_loss(adj, n["A"], gamma),
                           {"A": a_hat_arr})
    assert report["A"] <= 1e-4


def test_recon_loss_degenerate_view_errors():
    with pytest.raises(DegenerateViewError):
        recon_loss(np.zeros((3, 3), dtype=bool), ad.leaf(np.ones((3, 3))), 2.0)


def test_recon_loss_bounds():
    rng = np.random.default_rng(9)
    gamma = 2.0
    for _ in range(20):
        adj = rng.random((4, 4)) < 0.5
        np.fill_diagonal(adj, False)
        if not adj.sum(axis=1).any():
            continue
        a_hat = rng.uniform(0.01, 0.99, size=(4, 4))
        val = recon_loss(adj, ad.leaf(a_hat), gamma).value[0, 0]
        assert 0.0 <= val <= 2.0**gamma


# -- pipeline gradient and smoke training -------------------------------------------


def test_full_view_pipeline_gradient_matches_fd():
    rng = np.random.default_rng(10)
    n, d, k = 6, 4, 3
    adj = sym_adj(n, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)])
    masked, _ = mask_edges(adj, MaskSpec(edge_mask_rate=0.5), RngStream(2))
    op = normalized_operator(masked)
    x_in = rng.uniform(-1, 1, size=(n, d))

    def build(nodes):
        x = ad.matmul(ad.leaf(x_in), nodes["proj"])  # stand-in for unified input
        z = encode(op, x, nodes["enc_w"], nodes["enc_b"])
        _, a_hat = reconstruct(op, z, nodes["dec_w"], nodes["dec_b"])
        return recon_loss(adj, a_hat, 2.0)

    params = {
        "proj": rng.uniform(-1, 1, size=(d, k)),
        "enc_w": rng.uniform(-1, 1, size=(k, k)),
        "enc_b": rng.uniform(-1, 1, size=(1, k)),
        "dec_w": rng.uniform(-1, 1, size=(k, k)),
        "dec_b": rng.uniform(-1, 1, size=(1, k)),
    }
    report = ad.grad_check(build, params)
    assert max(report.values()) <= 1e-4, report


def test_recon_loss_drops_twenty_percent_in_200_steps():
    from mug import fusion, synth
    from mug.structenc import WalkConfig

    d = {
        "classes": 2, "target_type": "T", "targets_per_class": 40,
        "attr_dim": 6, "centroid_scale": 1.0, "noise": 0.3,
        "aux_types": [{"name": "A", "size": 20}],
        "relations": [{"name": "ta", "src": "T", "dst": "A",
                       "intra": 0.9, "inter": 0.1, "degree": 3.0}],
        "metapaths": [{"name": "TAT", "steps": ["T", "ta", "A", "ta", "T"]}],
    }
    g = synth.generate(synth.SynthSpec.from_dict(d), RngStream(0))
    cfg = fusion.TrainConfig(
        epochs=200, lambda_align=0.0, lambda_scatter=0.0, seed=0,
        sample_size=16, unified_dim=16,
        walk=WalkConfig(dim=8, epochs=2, walks_per_node=4, walk_length=8),
    )
    trace = []
    fusion.pretrain(g, cfg, trace=trace)
    first, last = trace[0]["l_recon_weighted"], trace[-1]["l_recon_weighted"]
    assert last <= 0.8 * first, (first, last)
