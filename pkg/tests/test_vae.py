import math
from dataclasses import replace

import numpy as np
import pytest
import torch
from scipy import stats

from fixtures import build_peptide, tiny_vae, toy_complex
from blockgen.blockrepr import Vocabulary, entry_from_smiles, select_binding_site
from blockgen.errors import ConfigError, DataError
from blockgen.structures import Atom, Block, BlockGraph
from blockgen.vae import (DecodeContext, DecodeOptions, LatentCloud, VaeTrainConfig, decode_structure,
                          featurize, kl_coord, kl_loss, kl_state, lookup_entity, perturb_latent_coords,
                          predict_inter_bonds, sample_vae, train_vae, vae_loss)
from blockgen.vae.decode import SampleTrace, _context
from blockgen.vae.losses import distance_loss, interpolate, velocity_mse
from blockgen.vae.train import StepDraws

D = torch.float64


def random_rotation(gen):
    q, r = torch.linalg.qr(torch.randn(3, 3, generator=gen, dtype=D))
    q = q * torch.sign(torch.diagonal(r))
    if torch.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def rel(a, b):
    return float((a - b).norm() / b.norm().clamp_min(1e-12))


def move_cloud(c: LatentCloud, R, t) -> LatentCloud:
    return replace(c, zvec=c.zvec @ R.T + t, muvec=c.muvec @ R.T + t, prior_center=c.prior_center @ R.T + t)


@pytest.fixture(scope="module")
def toy():
    c = toy_complex()
    vocab = Vocabulary([])
    site = select_binding_site(c.target, c.binder)
    return vocab, featurize(c.binder, vocab, D), featurize(site, vocab, D)


# -- KL ----------------------------------------------------------------------
def test_kl_zero_for_identical_distributions():
    mu = torch.zeros(3, 8, dtype=D)
    center = torch.randn(3, 3, dtype=D)
    pts = LatentCloud(mu, center, mu, torch.ones_like(mu), center, torch.ones(3, 3, dtype=D), center)
    assert torch.all(kl_loss(pts) == 0)


def test_kl_closed_form_value_and_linearity():
    mu, sigma = torch.ones(1, 1, dtype=D), torch.ones(1, 1, dtype=D)
    assert float(kl_state(mu, sigma)) == pytest.approx(0.5, abs=1e-15)
    zero = torch.zeros(1, 3, dtype=D)
    pts = LatentCloud(mu, zero, mu, sigma, zero, torch.ones(1, 3, dtype=D), zero)
    assert float(kl_loss(pts, 1.2, 0.8)) == 2 * float(kl_loss(pts, 0.6, 0.8))


def test_kl_matches_monte_carlo_prior_first():
    rng = np.random.default_rng(0)
    for _ in range(10):
        mu, sigma = rng.normal(), rng.uniform(0.4, 2.5)
        c, mv, sv = rng.normal(), rng.normal(), rng.uniform(0.4, 2.5)
        x = rng.standard_normal(1_000_000)
        mc_state = np.mean(stats.norm.logpdf(x) - stats.norm.logpdf(x, mu, sigma))
        y = c + rng.standard_normal(1_000_000)
        mc_coord = np.mean(stats.norm.logpdf(y, c) - stats.norm.logpdf(y, mv, sv))
        t = lambda v: torch.tensor([[v]], dtype=D)
        assert abs(float(kl_state(t(mu), t(sigma))) - mc_state) < 1e-2
        assert abs(float(kl_coord(t(c), t(mv), t(sv))) - mc_coord) < 1e-2


# -- latent perturbation -------------------------------------------------------
def test_perturb_statistics():
    n = 100_000
    z = torch.randn(n, 8, dtype=D)
    c = LatentCloud.from_points(z, torch.zeros(n, 3, dtype=D))
    assert perturb_latent_coords(c, 0.0) is c
    out = perturb_latent_coords(c, 1.0, torch.Generator().manual_seed(0))
    assert torch.equal(out.z, z)
    var = (out.zvec - c.zvec).var(0)
    assert torch.all((var - 1.0).abs() < 0.05)


# -- encoder -----------------------------------------------------------------
def test_deterministic_encode_returns_means(toy):
    vocab, binder, _ = toy
    model = tiny_vae(vocab, D)
    lat = model.encode(binder, deterministic=True)
    assert torch.equal(lat.z, lat.mu) and torch.equal(lat.zvec, lat.muvec)
    assert torch.all(lat.sigma > 0) and torch.all(lat.sigmavec > 0)


def test_single_block_prior_center_is_centroid():
    vocab = Vocabulary([])
    ent = featurize(build_peptide(["SER"]), vocab, D)
    lat = tiny_vae(vocab, D).encode(ent, True)
    assert len(lat) == 1
    assert torch.allclose(lat.prior_center[0], ent.coords.mean(0), atol=1e-12)


def test_encoder_equivariance(toy):
    vocab, binder, _ = toy
    model = tiny_vae(vocab, D).eval()
    gen = torch.Generator().manual_seed(2)
    with torch.no_grad():
        base = model.encode(binder, True)
        for _ in range(20):
            R, t = random_rotation(gen), torch.randn(3, generator=gen, dtype=D) * 5
            moved = model.encode(binder.with_coords(binder.coords @ R.T + t), True)
            assert rel(moved.mu, base.mu) <= 1e-4
            assert rel(moved.sigma, base.sigma) <= 1e-4
            assert rel(moved.muvec, base.muvec @ R.T + t) <= 1e-4


# -- block types ---------------------------------------------------------------
def test_prompt_masks_non_amino_acids():
    vocab = Vocabulary([entry_from_smiles("CC", 4), entry_from_smiles("C", 9)])
    model = tiny_vae(vocab, D)
    z = torch.randn(3, 8, dtype=D)
    lat = LatentCloud.from_points(z, torch.randn(3, 3, dtype=D))
    site = LatentCloud.from_points(torch.randn(2, 8, dtype=D), torch.randn(2, 3, dtype=D))
    logits = model.type_logits(lat, site, torch.tensor([1, 0, 1]))
    probs = torch.softmax(logits, -1)
    non_aa = ~model.aa_mask
    assert torch.all(probs[[0, 2]][:, non_aa] == 0)
    assert torch.all(probs[1] > 0)
    types = model.decode_types(lat, site, torch.tensor([1, 0, 1]))
    assert types.shape == (3,)
    model.aa_mask.zero_()
    with pytest.raises(ConfigError):
        model.type_logits(lat, site, torch.tensor([1, 0, 1]))


# -- structure module ------------------------------------------------------------
def _decode_setup(toy, seed=0):
    vocab, binder, site = toy
    model = tiny_vae(vocab, D, seed).eval()
    lx, ly = model.encode(binder, True), model.encode(site, True)
    return model, binder, site, lx, ly


def test_structure_step_trivial_cases(toy):
    model, binder, site, lx, ly = _decode_setup(toy)
    dc = _context(lx, ly, site)
    x = torch.randn(binder.coords.shape, dtype=D)
    with torch.no_grad():
        _, _, x_same = model.structure_step(binder, x, 0.7, 0.0, dc)
        assert torch.equal(x_same, x)
        torch.nn.init.zeros_(model.structure.vel_head.weight)
        _, vel, x_zero = model.structure_step(binder, x, 0.7, 0.1, dc)
    assert torch.count_nonzero(vel) == 0 and torch.equal(x_zero, x)


def test_structure_equivariance(toy):
    model, binder, site, lx, ly = _decode_setup(toy)
    gen = torch.Generator().manual_seed(4)
    x = binder.coords + torch.randn(binder.coords.shape, generator=gen, dtype=D)
    with torch.no_grad():
        _, v0, x0 = model.structure_step(binder, x, 0.4, 0.1, _context(lx, ly, site), binder.inter)
        for _ in range(20):
            R, t = random_rotation(gen), torch.randn(3, generator=gen, dtype=D) * 5
            dc = _context(move_cloud(lx, R, t), move_cloud(ly, R, t), site.with_coords(site.coords @ R.T + t))
            _, v1, x1 = model.structure_step(binder, x @ R.T + t, 0.4, 0.1, dc, binder.inter)
            assert rel(v1, v0 @ R.T) <= 1e-4
            assert rel(x1, x0 @ R.T + t) <= 1e-4


def test_decode_runs_exactly_ten_updates_and_passes_bonds_through(toy, monkeypatch):
    model, binder, site, lx, ly = _decode_setup(toy)
    seen = []
    orig = model.structure_step

    def counting(gen, x, t, dt, dc, inter=None):
        seen.append((round(t, 12), dt))
        return orig(gen, x, t, dt, dc, inter)

    monkeypatch.setattr(model, "structure_step", counting)
    given = binder.inter.clone()
    _, inter = decode_structure(model, binder, _context(lx, ly, site), given, DecodeOptions(),
                                torch.Generator().manual_seed(0))
    assert len(seen) == 10
    assert [t for t, _ in seen] == [round(1.0 - 0.1 * k, 12) for k in range(10)]
    assert all(dt == pytest.approx(0.1) for _, dt in seen)
    assert torch.equal(inter, given)


@pytest.mark.parametrize("gap,bonded", [(3.4, True), (3.6, False)])
def test_bond_candidate_radius(gap, bonded, monkeypatch):
    vocab = Vocabulary([entry_from_smiles("C", 5)])
    model = tiny_vae(vocab, D)
    gen = lookup_entity([vocab.id_of("C"), vocab.id_of("C")], vocab, dtype=D)
    x = torch.tensor([[0.0, 0, 0], [gap, 0, 0]], dtype=D)
    always_single = lambda hp, hq: torch.tensor([[0.0, 1.0, 0.0, 0.0]], dtype=D).expand(len(hp), -1)
    monkeypatch.setattr(model, "bond_probs", always_single)
    inter = predict_inter_bonds(model, gen, torch.zeros(2, 32, dtype=D), x)
    assert (len(inter) == 1) == bonded


def test_bond_head_symmetric_and_normalized():
    model = tiny_vae(Vocabulary([]), D)
    hp, hq = torch.randn(7, 32, dtype=D), torch.randn(7, 32, dtype=D)
    assert torch.equal(model.bond_head(hp, hq), model.bond_head(hq, hp))
    assert torch.allclose(model.bond_probs(hp, hq).sum(-1), torch.ones(7, dtype=D), atol=1e-6)


# -- losses --------------------------------------------------------------------
def test_interpolation_endpoints_and_ground_truth_velocity():
    x0, x1 = torch.randn(6, 3, dtype=D), torch.randn(6, 3, dtype=D)
    assert torch.equal(interpolate(x0, x1, 0.0), x0) and torch.equal(interpolate(x0, x1, 1.0), x1)
    assert torch.allclose(x1 + (x0 - x1), x0, atol=1e-14, rtol=0)


def test_perfect_prediction_has_zero_reconstruction():
    x = torch.randn(6, 3, dtype=D)
    blk = torch.tensor([0, 0, 0, 1, 1, 1])
    assert torch.all(velocity_mse(x, x, blk, 2) == 0)
    assert torch.all(distance_loss(x, x, blk, 2) == 0)


def small_case():
    """Two ethane-like blocks plus a methyl binder block, next to a two-block site."""
    vocab = Vocabulary([entry_from_smiles("C", 9), entry_from_smiles("CC", 5)])
    cc = vocab["CC"]

    def blk(key, coords):
        entry = vocab[key]
        return Block(key, [Atom(e, n, c) for e, n, c in zip(entry.elements, entry.atom_names, coords)],
                     list(entry.bonds), 0)

    binder = BlockGraph([blk(cc.key, [(0, 0, 0), (1.5, 0, 0)]), blk("C", [(2.3, 1.3, 0)]),
                         blk(cc.key, [(3.8, 1.2, 0.4), (4.6, 2.4, 0.1)])],
                        [(0, 1, 1, 0, 1), (1, 0, 2, 0, 1)])
    site = BlockGraph([blk(cc.key, [(1.0, 3.5, 0), (2.4, 3.9, 0.2)]), blk("C", [(4.0, -2.5, 0.5)])])
    return vocab, featurize(binder, vocab, D), featurize(site, vocab, D)


def _draws(site, t, tf=True, n_atoms=None, seed=0):
    gen = torch.Generator().manual_seed(seed)
    return StepDraws(torch.tensor([True, False]), t, tf,
                     torch.randn(n_atoms, 3, generator=gen, dtype=D))


def test_distance_term_off_above_threshold():
    vocab, binder, site = small_case()
    model = tiny_vae(vocab, D)
    out = vae_loss(model, binder, site, VaeTrainConfig(), _draws(site, 0.3, n_atoms=7), deterministic=True)
    assert torch.all(out["dist"] == 0)
    assert torch.all(out["velocity"] > 0)


def test_loss_decomposition_matches_scalar_recomputation():
    vocab, binder, site = small_case()
    model = tiny_vae(vocab, D)
    cfg = VaeTrainConfig()
    draws = _draws(site, 0.2, n_atoms=7)
    out = {k: v.detach() for k, v in vae_loss(model, binder, site, cfg, draws, kl_weight=0.37,
                                              deterministic=True).items()}

    # independent recomputation with explicit loops
    with torch.no_grad():
        lx, ly = model.encode(binder, True), model.encode(site, True)
    kl_terms = []
    for cloud, rows in ((lx, range(3)), (ly, [0])):
        for i in rows:
            s = sum(math.log(cloud.sigma[i, k]) + (1 + float(cloud.mu[i, k]) ** 2) / (2 * float(cloud.sigma[i, k]) ** 2) - 0.5
                    for k in range(8))
            c = sum(math.log(cloud.sigmavec[i, k])
                    + (1 + float(cloud.prior_center[i, k] - cloud.muvec[i, k]) ** 2) / (2 * float(cloud.sigmavec[i, k]) ** 2)
                    - 0.5 for k in range(3))
            kl_terms.append(cfg.lambda1 * s + cfg.lambda2 * c)
    assert np.allclose(out["kl"].detach().numpy(), kl_terms, atol=1e-10, rtol=0)

    # velocity and distance terms from the same network output
    gen_coords = torch.cat([binder.coords, site.coords[:2]])
    owner = [0, 0, 1, 2, 2, 3, 3]
    latent_row = {0: 0, 1: 1, 2: 2, 3: 3}
    zvec = torch.cat([lx.zvec, ly.zvec])
    x1 = torch.stack([zvec[latent_row[o]] for o in owner]) + draws.x1_noise
    xt = 0.2 * x1 + 0.8 * gen_coords
    from blockgen.vae.losses import concat_entities
    gen = concat_entities(binder, site.select_blocks(torch.tensor([True, False])))
    ctx = site.select_blocks(torch.tensor([False, True]))
    dc = DecodeContext(LatentCloud.cat(lx, ly), torch.tensor([0, 1, 2, 3]), ctx, torch.tensor([4]))
    with torch.no_grad():
        _, vel = model.structure(gen, xt, 0.2, dc, gen.inter)
    v_true = gen_coords - x1
    x0_hat = xt + 0.2 * vel
    all_true = torch.cat([gen_coords, ctx.coords])
    all_pred = torch.cat([x0_hat, ctx.coords])
    for b in range(4):
        atoms = [a for a in range(7) if owner[a] == b]
        mse = sum(float((vel[a, k] - v_true[a, k]) ** 2) for a in atoms for k in range(3)) / (3 * len(atoms))
        assert abs(mse - float(out["velocity"][b])) < 1e-10
        errs = []
        for a in atoms:
            for q in range(len(all_true)):
                if q != a and float((all_true[a] - all_true[q]).norm()) < 6.0:
                    errs.append(abs(float((all_pred[a] - all_pred[q]).norm() - (all_true[a] - all_true[q]).norm())))
        assert abs(np.mean(errs) - float(out["dist"][b])) < 1e-10

    total = (0.37 * out["kl"] + out["type"] + out["bond"] + out["velocity"] + cfg.lambda_dist * out["dist"]).sum() / 4
    assert abs(float(total) - float(out["total"])) < 1e-10


@pytest.mark.parametrize("term", ["kl", "type", "bond", "velocity", "dist"])
def test_loss_term_gradients_match_finite_differences(term):
    vocab, binder, site = small_case()
    model = tiny_vae(vocab, D)
    cfg = VaeTrainConfig()
    draws = _draws(site, 0.15, n_atoms=7)

    def f():
        return vae_loss(model, binder, site, cfg, draws, deterministic=True)[term].sum()

    model.zero_grad()
    val = f()
    assert float(val.detach()) != 0.0
    val.backward()
    params = [(n, p) for n, p in model.named_parameters() if p.grad is not None and p.grad.abs().max() > 1e-8]
    assert params
    gen = torch.Generator().manual_seed(1)
    checked = 0
    for name, p in params:
        flat, g = p.data.view(-1), p.grad.view(-1)
        for k in [int(g.abs().argmax())] + torch.randint(0, flat.numel(), (1,), generator=gen).tolist():
            old = float(flat[k])
            with torch.no_grad():
                flat[k] = old + 1e-3
                up = float(f())
                flat[k] = old - 1e-3
                down = float(f())
                flat[k] = old
            fd, an = (up - down) / 2e-3, float(g[k])
            assert abs(fd - an) <= 1e-2 * max(abs(fd), abs(an)) + 1e-7, (name, k, fd, an)
            checked += 1
    assert checked >= 4


def test_zero_distance_weight_removes_its_gradient():
    vocab, binder, site = small_case()
    cfg = VaeTrainConfig(lambda_dist=0.0)
    draws = _draws(site, 0.1, n_atoms=7)
    grads = []
    for use_total in (True, False):
        model = tiny_vae(vocab, D)
        out = vae_loss(model, binder, site, cfg, draws, deterministic=True)
        loss = out["total"] if use_total else (out["kl"] + out["type"] + out["bond"] + out["velocity"]).sum() / 4
        loss.backward()
        grads.append(torch.cat([p.grad.flatten() for p in model.parameters() if p.grad is not None]))
    assert torch.allclose(grads[0], grads[1], atol=1e-12)


# -- training and sampling -------------------------------------------------------
def test_empty_dataset_rejected():
    with pytest.raises(DataError):
        train_vae(tiny_vae(Vocabulary([])), [], VaeTrainConfig(), 1)


def test_training_loss_decreases(toy):
    vocab, binder, site = toy
    model = tiny_vae(vocab)
    data = [(binder.to(torch.float32), site.to(torch.float32))]
    hist = train_vae(model, data, VaeTrainConfig(lr=1e-3), 100, torch.Generator().manual_seed(0), log_every=0)
    totals = np.array([h["total"] for h in hist])
    assert np.isfinite(totals).all()
    assert totals[-20:].mean() < totals[:20].mean()


def test_sample_vae_control_flow(toy):
    vocab, binder, site = toy
    model = tiny_vae(vocab, D).eval()
    lx, ly = model.encode(binder, True), model.encode(site, True)
    trace = SampleTrace()
    g = sample_vae(model, vocab, lx, ly, site, [1] * len(lx), DecodeOptions(),
                   torch.Generator().manual_seed(0), trace=trace)
    assert (trace.structure_passes, trace.re_encodes) == (2, 1)
    assert len(g.blocks) == len(lx)
    assert all(vocab[b.block_type].is_amino_acid for b in g.blocks)
    g.validate()
