import math

import numpy as np
import pytest
import torch

from blockgen.eqnet import EqNet, EqNetConfig, radius_knn_edges, rbf_embed
from blockgen.errors import NumericError

CFG = EqNetConfig(hidden_size=32, n_layers=2, n_heads=4, n_rbf=16, edge_embed_size=8, n_vec=4, cutoff=6.0)


def random_rotation(gen, reflect=False):
    q, r = torch.linalg.qr(torch.randn(3, 3, generator=gen, dtype=torch.float64))
    q = q * torch.sign(torch.diagonal(r))
    if torch.det(q) < 0:
        q[:, 0] = -q[:, 0]
    if reflect:
        q = q @ torch.diag(torch.tensor([1.0, 1.0, -1.0], dtype=torch.float64))
    return q


def toy_graph(n=12, seed=0):
    gen = torch.Generator().manual_seed(seed)
    x = torch.randn(n, 3, generator=gen, dtype=torch.float64) * 2.0
    h = torch.randn(n, CFG.hidden_size, generator=gen, dtype=torch.float64)
    v = torch.randn(n, CFG.n_vec, 3, generator=gen, dtype=torch.float64)
    edges = radius_knn_edges(x, CFG.cutoff, CFG.k_neighbors)
    et = torch.randint(0, 8, (edges.shape[1],), generator=gen)
    return h, x, v, edges, et


def make_net():
    torch.manual_seed(0)
    return EqNet(CFG).double().eval()


def rel(a, b):
    return float((a - b).norm() / b.norm().clamp_min(1e-12))


# -- rbf ---------------------------------------------------------------------
def test_rbf_center_values():
    spacing = CFG.cutoff / (CFG.n_rbf - 1)
    assert float(rbf_embed(3 * spacing, CFG)[3]) == pytest.approx(1.0, abs=1e-15)
    assert float(rbf_embed(0.0, CFG)[0]) == 1.0


def test_rbf_matches_scalar_formula():
    d = CFG.cutoff / 2
    gamma = CFG.cutoff / (CFG.n_rbf - 1)
    want = [math.exp(-(d - k * gamma) ** 2 / (2 * gamma ** 2)) for k in range(CFG.n_rbf)]
    got = rbf_embed(torch.tensor(d, dtype=torch.float64), CFG).numpy()
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
    assert (got > 0).all() and (got <= 1).all()


# -- forward -----------------------------------------------------------------
def test_single_node_zero_vectors_stay_zero():
    net = make_net()
    h = torch.randn(1, CFG.hidden_size, dtype=torch.float64)
    edges = torch.zeros((2, 0), dtype=torch.long)
    out_h, out_v = net(h, torch.zeros(1, 3, dtype=torch.float64), edges, torch.zeros(0, dtype=torch.long))
    assert out_h.shape == h.shape and torch.isfinite(out_h).all()
    assert torch.count_nonzero(out_v) == 0


@pytest.mark.parametrize("reflect", [False, True])
def test_e3_equivariance_20_motions(reflect):
    net = make_net()
    h, x, v, edges, et = toy_graph()
    with torch.no_grad():
        h0, v0 = net(h, x, edges, et, v)
        gen = torch.Generator().manual_seed(5)
        for _ in range(20):
            R = random_rotation(gen, reflect)
            t = torch.randn(3, generator=gen, dtype=torch.float64) * 10
            h1, v1 = net(h, x @ R.T + t, edges, et, v @ R.T)
            assert rel(h1, h0) <= 1e-4
            assert rel(v1, v0 @ R.T) <= 1e-4


def test_translation_leaves_everything_unchanged():
    net = make_net()
    h, x, v, edges, et = toy_graph()
    with torch.no_grad():
        h0, v0 = net(h, x, edges, et, v)
        h1, v1 = net(h, x + torch.tensor([100.0, -50.0, 3.0], dtype=torch.float64), edges, et, v)
    assert rel(h1, h0) <= 1e-10 and rel(v1, v0) <= 1e-10


def test_permutation_equivariance():
    net = make_net()
    h, x, v, edges, et = toy_graph()
    perm = torch.randperm(len(x), generator=torch.Generator().manual_seed(1))
    inv = torch.empty_like(perm)
    inv[perm] = torch.arange(len(perm))
    with torch.no_grad():
        h0, v0 = net(h, x, edges, et, v)
        h1, v1 = net(h[perm], x[perm], inv[edges], et, v[perm])
    assert rel(h1, h0[perm]) <= 1e-10 and rel(v1, v0[perm]) <= 1e-10


def test_parameter_gradients_match_finite_differences():
    net = make_net()
    h, x, v, edges, et = toy_graph(n=5, seed=3)

    def loss():
        oh, ov = net(h, x, edges, et, v)
        return (oh ** 2).sum() * 0.01 + (ov * torch.linspace(-1, 1, 3, dtype=torch.float64)).sum()

    net.zero_grad()
    loss().backward()
    gen = torch.Generator().manual_seed(0)
    checked = 0
    for name, p in net.named_parameters():
        if p.grad is None:
            continue
        flat, gflat = p.data.view(-1), p.grad.view(-1)
        for k in torch.randint(0, flat.numel(), (3,), generator=gen).tolist():
            old = float(flat[k])
            with torch.no_grad():
                flat[k] = old + 1e-3
                up = float(loss())
                flat[k] = old - 1e-3
                down = float(loss())
                flat[k] = old
            fd = (up - down) / 2e-3
            an = float(gflat[k])
            assert abs(fd - an) <= 1e-2 * max(abs(fd), abs(an)) + 1e-6, name
            checked += 1
    assert checked > 30


@pytest.mark.parametrize("field", ["h", "x", "v"])
def test_non_finite_input_names_node(field):
    net = make_net()
    h, x, v, edges, et = toy_graph()
    target = {"h": h, "x": x, "v": v}[field]
    target[7].view(-1)[0] = float("nan")
    with pytest.raises(NumericError, match="node 7"):
        net(h, x, edges, et, v)


def test_edges_symmetric_and_capped():
    x = torch.randn(60, 3, dtype=torch.float64) * 3
    e = radius_knn_edges(x, 5.0, 16)
    pairs = set(map(tuple, e.T.tolist()))
    assert all((d, s) in pairs for s, d in pairs)
    assert all(float((x[s] - x[d]).norm()) < 5.0 for s, d in pairs)
    assert all(s != d for s, d in pairs)
