import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prg import data, eval as E, models as M


def _lg(seed=0, n=6, d=3, s=0.5):
    rng = np.random.default_rng(seed)
    return E.LinearGaussian(rng.normal(size=(n, d)), rng.normal(size=n), s)


def _draw(lg, n, rng):
    z = rng.standard_normal((n, lg.W.shape[1]))
    return z @ lg.W.T + lg.b + lg.s * rng.standard_normal((n, len(lg.b)))


def test_marginal_matches_direct_gaussian_density():
    lg = _lg()
    x = _draw(lg, 4, np.random.default_rng(1))
    cov = lg.W @ lg.W.T + lg.s**2 * np.eye(6)
    for row, got in zip(x, lg.marginal(x)):
        r = row - lg.b
        want = -0.5 * (r @ np.linalg.inv(cov) @ r + np.log(np.linalg.det(cov)) + 6 * np.log(2 * np.pi))
        assert got == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_iw_recovers_exact_marginal(seed):
    lg = _lg(seed)
    x = _draw(lg, 100, np.random.default_rng(seed + 10))
    est = E.iw_marginal_ll(lg, x, K=5000, rng=np.random.default_rng(seed))
    assert abs(est - lg.marginal(x).mean()) < 0.05


def test_exact_proposal_gives_exact_answer():
    # with one latent dimension the diagonal proposal is the exact posterior
    lg = _lg(d=1)
    lg.proposal_scale, lg.proposal_shift = 1.0, 0.0
    x = _draw(lg, 5, np.random.default_rng(3))
    vals = E.iw_values(lg, x, x, 1, np.random.default_rng(0))
    np.testing.assert_allclose(vals, lg.marginal(x), atol=1e-9)


def test_estimate_grows_with_K():
    lg = _lg(4)
    x = _draw(lg, 20, np.random.default_rng(5))
    rng = np.random.default_rng(6)
    means = [np.mean([E.iw_marginal_ll(lg, x, K=k, rng=rng) for _ in range(50)]) for k in (10, 100, 1000)]
    assert means[0] < means[1] < means[2] <= lg.marginal(x).mean() + 0.01


def test_single_sample_equals_log_weight():
    lg = _lg()
    x = _draw(lg, 3, np.random.default_rng(7))
    vals = E.iw_values(lg, x, x, 1, np.random.default_rng(8))
    mu, ls = lg.proposal(x)
    eps = np.random.default_rng(8).standard_normal((3, 1, 3))
    z = mu[:, None] + np.exp(ls)[:, None] * eps
    log_q = -0.5 * np.sum(eps**2 + 2 * ls[:, None] + np.log(2 * np.pi), axis=-1)
    want = (lg.log_lik(x, z) + E.log_std_normal(z) - log_q)[:, 0]
    np.testing.assert_allclose(vals, want, atol=1e-12)


@pytest.mark.parametrize("K", [0, -3, 2.5])
def test_invalid_K(K):
    lg = _lg()
    with pytest.raises(E.EvalError, match="positive integer"):
        E.iw_values(lg, np.zeros((1, 6)), np.zeros((1, 6)), K, np.random.default_rng(0))


def test_chunking_keeps_estimate(monkeypatch):
    lg = _lg()
    x = _draw(lg, 4, np.random.default_rng(9))
    a = E.iw_values(lg, x, x, 300, np.random.default_rng(1))
    monkeypatch.setattr(E, "CHUNK_ROWS", 40)
    b = E.iw_values(lg, x, x, 300, np.random.default_rng(1))
    # chunks draw different noise, so only agreement within Monte Carlo error is expected
    assert np.all(np.isfinite(b)) and np.abs(a - b).max() < 0.5


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e6, 1e6), st.integers(1, 50))
def test_logsumexp_stable(shift, n):
    a = np.random.default_rng(n).normal(size=n) + shift
    ref = shift + np.log(np.sum(np.exp(a - shift)))
    assert E.logsumexp(a) == pytest.approx(ref, rel=1e-12, abs=1e-9)


def test_logsumexp_all_neg_inf():
    assert E.logsumexp(np.full(3, -np.inf)) == -np.inf


def test_model_estimates_are_reproducible():
    model = M.build_model("avae-ts", seed=0)
    ds = data.synth_glyphs(np.random.default_rng(0), per_class=1, classes="abc")
    x = ds.trajectories.reshape(len(ds), -1)
    a = E.iw_marginal_ll(model, x, K=20, rng=np.random.default_rng(3))
    b = E.iw_marginal_ll(model, x, K=20, rng=np.random.default_rng(3))
    assert a == b and np.isfinite(a)


@pytest.mark.parametrize("kind", M.KINDS)
def test_report_layout(kind, tmp_path):
    model = M.build_model(kind, seed=0)
    ds = data.synth_glyphs(np.random.default_rng(0), per_class=1, classes="ab")
    rep = E.likelihood_report(model, ds, k_marginal=4, k_conditional=4)
    assert len(rep.rows) == len(E.QUANTITIES[kind])
    if kind == "muse":
        assert len(rep.rows) == 7
    js, txt = rep.save(tmp_path / "report")
    d = json.loads(js.read_text())
    E.validate_report(d)
    assert E.LikelihoodReport.from_dict(d).rows == rep.rows
    assert "not" in txt.read_text() and all(np.isfinite(r["mean"]) for r in rep.rows.values())


def test_validate_report_rejects_bad_layout():
    with pytest.raises(E.EvalError):
        E.validate_report({"kind": "cvae"})
    bad = {"kind": "cvae", "n_samples": 1, "note": "", "quantities": {"q": {"mean": 0.0, "se": 0.0, "K": 0}}}
    with pytest.raises(E.EvalError, match="K"):
        E.validate_report(bad)


def test_empty_sets_raise():
    model = M.build_model("avae-ts", seed=0)
    empty = data.synth_glyphs(np.random.default_rng(0), per_class=1, classes="ab").subset([])
    with pytest.raises(E.EvalError, match="empty"):
        E.likelihood_report(model, empty)
    with pytest.raises(E.EvalError, match="empty"):
        E.cross_modal_accuracy(model, empty)


def test_untrained_coherence_is_low():
    ds = data.synth_glyphs(np.random.default_rng(0), per_class=10, classes="0123456789")
    acc = E.cross_modal_accuracy(M.build_model("avae-ts", seed=0), ds)
    assert acc < 0.4


def test_coherence_source_checks():
    ds = data.synth_glyphs(np.random.default_rng(0), per_class=2, classes="ab")
    with pytest.raises(E.EvalError, match="S or I"):
        E.cross_modal_accuracy(M.build_model("muse"), ds, source="T")
    acc = E.cross_modal_accuracy(M.build_model("avae-ti"), ds)
    assert 0.0 <= acc <= 1.0
