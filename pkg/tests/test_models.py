import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prg import data, models as M
from prg.tensor_nn import Tensor, no_grad
from prg.tensor_nn import autodiff as ad

from gradcheck import numeric_grad, rel_err


@pytest.fixture(scope="module")
def tiny():
    return data.synth_glyphs(np.random.default_rng(0), per_class=6, classes="01ab")


def _batch(ds, n=8):
    return M.batch_of(ds, np.arange(n))


# --- closed forms ---

def test_kl_standard_normal_is_zero():
    kl = M.gaussian_kl(Tensor(np.zeros((3, 16))), Tensor(np.zeros((3, 16))))
    np.testing.assert_array_equal(kl.data, 0.0)


def test_kl_unit_shift():
    kl = M.gaussian_kl(Tensor(np.ones((1, 1))), Tensor(np.zeros((1, 1))))
    assert kl.item() == pytest.approx(0.5)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_kl_matches_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    mu, ls = rng.normal(size=4), rng.uniform(-1.0, 0.5, size=4)
    z = mu + np.exp(ls) * rng.standard_normal((100_000, 4))
    mc = np.mean(M.log_normal(z, mu, ls) - M.log_normal(z, 0.0, 0.0))
    exact = M.gaussian_kl(Tensor(mu[None]), Tensor(ls[None])).item()
    assert abs(mc - exact) <= 0.01 * exact + 0.02


def test_symmetric_kl_unit_shift():
    z = Tensor(np.zeros((1, 1)))
    assert M.symmetric_kl(z, z, Tensor(np.ones((1, 1))), z).item() == pytest.approx(1.0)


def test_symmetric_kl_identical_is_zero():
    rng = np.random.default_rng(3)
    mu, ls = Tensor(rng.normal(size=(5, 16))), Tensor(rng.normal(size=(5, 16)))
    np.testing.assert_allclose(M.symmetric_kl(mu, ls, mu, ls).data, 0.0, atol=1e-12)


def test_perfect_gaussian_reconstruction_log_lik():
    vae = M.build_model("avae-ts").vaes["T"]
    x = Tensor(np.random.default_rng(0).normal(size=(2, 200)))
    np.testing.assert_allclose(-vae.nll(x, x).data, -100 * np.log(2 * np.pi))
    assert -vae.nll(x, x).data[0] == pytest.approx(-183.788, abs=1e-3)


def test_weights_defaults():
    w = M.LossWeights()
    assert (w.lam("S"), w.gamma("T"), w.beta, w.delta, w.a("I")) == (50, 10, 1, 1, 1)


# --- architecture ---

def test_latent_sizes(tiny):
    b = _batch(tiny, 4)
    muse = M.build_model("muse")
    assert M.encode(muse, {"T": b["T"], "S": b["S"], "I": b["I"]}).z.shape == (4, 8)
    avae = M.build_model("avae-ts")
    assert M.encode(avae, {"T": b["T"]}).z.shape == (4, 16)
    cvae = M.build_model("cvae")
    first = cvae.vaes["T"].enc.specs[0]
    assert (first.n_in, cvae.vaes["T"].dec.specs[0].n_in) == (262, 78)


def test_image_vae_profiles():
    for profile, widths in M.PROFILES.items():
        vae = M.build_model("avae-ti", profile).vaes["I"]
        convs = [s.n_out for s in vae.enc.specs if s.kind == "Conv2d"]
        assert convs == list(widths)
        with no_grad():
            out = vae.decode(Tensor(np.zeros((2, 16))))
        assert out.shape == (2, 28, 28)


def test_unknown_kind_and_profile():
    with pytest.raises(M.ModelError, match="kind"):
        M.build_model("gan")
    with pytest.raises(M.ModelError, match="profile"):
        M.build_model("muse", "huge")


# --- losses ---

def test_cvae_zero_conditioning_is_unconditional_elbo(tiny):
    model = M.build_model("cvae", seed=1)
    plain = M.build_model("avae-ts", seed=2).vaes["T"]
    src = model.vaes["T"]
    # copy the conditional weights, dropping the rows that read the label
    for net_c, net_u in ((src.enc, plain.enc), (src.dec, plain.dec), (src.mu_head, plain.mu_head),
                         (src.ls_head, plain.ls_head)):
        for pc, pu in zip(net_c.layer_params, net_u.layer_params):
            for k in pu:
                pu[k].data = pc[k].data[:pu[k].data.shape[0]].copy()
    b = _batch(tiny)
    cond, _ = M.cvae_loss(model, b["T"], np.zeros((8, 62)), np.random.default_rng(5), constant=True)
    uncond, _ = M.elbo(plain, b["T"], np.random.default_rng(5), constant=True)
    assert cond.item() == pytest.approx(uncond.item(), rel=1e-12)


def test_muse_weight_degeneracy(tiny):
    zero = {f.name: 0.0 for f in dataclasses.fields(M.LossWeights)}
    w = M.LossWeights(**{**zero, "alpha_t": 1.0, "lambda_t": 1.0})
    model = M.build_model("muse", weights=w)
    b = _batch(tiny)
    loss, _ = M.muse_loss(model, b, np.random.default_rng(9))
    ref, _ = M.elbo(model.vaes["T"], b["T"], np.random.default_rng(9), constant=False)
    assert loss.item() == pytest.approx(ref.item(), rel=1e-12)


@pytest.mark.parametrize("present", ["S", "T", "I", "TS", "SI"])
def test_muse_missing_modalities(tiny, present):
    model = M.build_model("muse")
    full = _batch(tiny)
    batch = {m: full[m] for m in present}
    loss, parts = M.muse_loss(model, batch, np.random.default_rng(0))
    assert np.isfinite(loss.item())
    loss.backward()
    for name, p in model.parameters().items():
        m = name.split(".")[0]
        if m in M.MODALITIES and m not in present:
            assert p.grad is None or not p.grad.any(), name
    assert any(p.grad is not None and p.grad.any() for p in model.parameters().values())


def test_muse_needs_a_modality():
    with pytest.raises(M.ModelError):
        M.muse_loss(M.build_model("muse"), {}, np.random.default_rng(0))


def test_avae_association_term(tiny):
    model = M.build_model("avae-ts")
    b = _batch(tiny)
    _, parts = M.avae_loss(model, b["T"], b["S"], np.random.default_rng(0))
    assert parts["assoc"] > 0
    assert set(parts) == {"nll_T", "kl_T", "nll_S", "kl_S", "assoc"}


def test_nan_loss_names_term(tiny):
    model = M.build_model("avae-ts")
    b = _batch(tiny)
    t = b["T"].copy()
    t[0, 0] = np.nan
    with pytest.raises(FloatingPointError, match="nll_T"):
        M.avae_loss(model, t, b["S"], np.random.default_rng(0))


def test_trajectory_encoder_finite_differences(tiny):
    model = M.build_model("muse", seed=3)
    vae = model.vaes["T"]
    x = _batch(tiny, 4)["T"]

    def value():
        with no_grad():
            return M.elbo(vae, x, np.random.default_rng(1))[0].item()

    loss, _ = M.elbo(vae, x, np.random.default_rng(1))
    loss.backward()
    rng = np.random.default_rng(0)
    params = list(vae.enc.named_parameters().values())
    for p in params[:2]:
        idx = rng.choice(p.size, size=10, replace=False)
        for i, g in numeric_grad(value, p.data, indices=idx).items():
            # the loss is ~200, so entries below 1e-4 are compared absolutely
            assert rel_err(g, p.grad.reshape(-1)[i], floor=1e-4) < 1e-4


def test_nll_numpy_matches_tensor(tiny):
    model = M.build_model("muse")
    b = _batch(tiny, 3)
    rng = np.random.default_rng(0)
    for m in M.MODALITIES:
        vae = model.vaes[m]
        with no_grad():
            out = vae.decode(Tensor(rng.normal(size=(3, 16))))
            ref = vae.nll(M._as_input(m, b[m]), out).data
        np.testing.assert_allclose(M.nll_numpy(m, b[m].reshape(ref.shape[0], *out.shape[1:])
                                               if m != "S" else b[m], out.data), ref, rtol=1e-12)


# --- inference ---

def test_encode_rejects_unsupported_sets(tiny):
    b = _batch(tiny, 2)
    with pytest.raises(M.ModelError, match=r"supported sets: \{S\}, \{S,T\}"):
        M.encode(M.build_model("cvae"), {"T": b["T"]})
    with pytest.raises(M.ModelError, match="supported"):
        M.encode(M.build_model("avae-ts"), {"T": b["T"], "S": b["S"]})
    with pytest.raises(M.ModelError, match="supported"):
        M.encode(M.build_model("avae-ti"), {"S": b["S"]})


def test_encode_mean_mode_deterministic(tiny):
    model = M.build_model("muse")
    b = _batch(tiny, 5)
    a = M.encode(model, {"S": b["S"], "I": b["I"]}).z
    np.testing.assert_array_equal(a, M.encode(model, {"S": b["S"], "I": b["I"]}).z)
    s = M.encode(model, {"S": b["S"]}, sample=True, rng=np.random.default_rng(0)).z
    assert not np.array_equal(s, M.encode(model, {"S": b["S"]}).z)
    with pytest.raises(M.ModelError, match="rng"):
        M.encode(model, {"S": b["S"]}, sample=True)


def test_decode_dimension_checks():
    muse = M.build_model("muse")
    with pytest.raises(M.ModelError, match="8-d"):
        M.decode_trajectory(muse, M.Latent("muse", np.zeros((1, 16))))
    avae = M.build_model("avae-ts")
    with pytest.raises(M.ModelError, match="16-d"):
        M.decode_trajectory(avae, M.Latent("avae-ts", np.zeros((1, 8))))
    with pytest.raises(M.ModelError, match="no I decoder"):
        M.decode(avae, M.Latent("avae-ts", np.zeros((1, 16))), "I")


@pytest.mark.parametrize("kind", M.KINDS)
def test_zero_latent_decodes_finite(kind):
    model = M.build_model(kind)
    dim = M.TOP_LATENT if kind == "muse" else M.LATENT
    lat = M.Latent(kind, np.zeros((2, dim)), np.array([0, 1]) if kind == "cvae" else None)
    traj = M.decode_trajectory(model, lat)
    assert traj.shape == (2, 100, 2) and np.all(np.isfinite(traj))


def test_decode_continuity():
    model = M.build_model("avae-ts", seed=4)
    z = np.random.default_rng(0).normal(size=(1, 16))
    dz = np.full((1, 16), 1e-3 / 4)
    a = M.decode_trajectory(model, M.Latent("avae-ts", z))
    b = M.decode_trajectory(model, M.Latent("avae-ts", z + dz))
    assert np.linalg.norm(a - b) < 0.1


# --- training and checkpoints ---

def test_training_reduces_loss(tiny):
    model = M.build_model("cvae")
    state = M.train(model, tiny, M.TrainConfig(steps=60, batch_size=16, lr=1e-3, log_every=20))
    losses = [r["loss"] for r in state.history]
    assert state.step == 60 and losses[-1] < 0.5 * losses[0]


def test_train_empty_dataset():
    empty = data.synth_glyphs(np.random.default_rng(0), per_class=2, classes="a").subset([])
    with pytest.raises(M.ModelError, match="empty"):
        M.train(M.build_model("cvae"), empty, M.TrainConfig(steps=1))


@pytest.mark.parametrize("kind", M.KINDS)
def test_checkpoint_bit_identical_forward(tmp_path, tiny, kind):
    model = M.build_model(kind, seed=7)
    state = M.train(model, tiny, M.TrainConfig(steps=2, batch_size=8, log_every=1))
    path = tmp_path / "m.prgm"
    M.save_model(path, model, state)
    back, back_state = M.load_model(path)
    assert back.kind == kind and back_state.step == 2
    assert M.sidecar_path(path).exists()
    b = _batch(tiny, 4)
    inputs = {m: b[m] for m in ("S",)} if "S" in model.modalities else {"I": b["I"]}
    for mdl_a, mdl_b in ((model, back),):
        za, zb = M.encode(mdl_a, inputs), M.encode(mdl_b, inputs)
        np.testing.assert_array_equal(za.z, zb.z)
        np.testing.assert_array_equal(M.decode_trajectory(mdl_a, za), M.decode_trajectory(mdl_b, zb))


def test_resume_matches_uninterrupted(tmp_path, tiny):
    cfg = M.TrainConfig(steps=4, batch_size=8, log_every=1)
    straight = M.build_model("avae-ts", seed=1)
    M.train(straight, tiny, dataclasses.replace(cfg, steps=8))

    first = M.build_model("avae-ts", seed=1)
    state = M.train(first, tiny, cfg)
    M.save_model(tmp_path / "a.prgm", first, state)
    resumed, rstate = M.load_model(tmp_path / "a.prgm")
    rstate = M.train(resumed, tiny, cfg, rstate)
    assert rstate.step == 8
    assert [r["step"] for r in rstate.history] == list(range(1, 9))
    for name, p in straight.parameters().items():
        np.testing.assert_array_equal(p.data, resumed.parameters()[name].data)
