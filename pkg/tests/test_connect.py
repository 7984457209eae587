import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prg import data, glyphs, pipeline as P
from prg.connect import ConnectConfig, ConnectError, candidate_costs, connect, connect_trace


def brute_costs(p, h, nxt, cfg):
    """Cost of every target index, recomputed one index at a time with complex numbers."""
    p, h = complex(*p), complex(*h)
    pts = [complex(*q) for q in nxt]
    n = len(pts)
    turns, starts, aims = [], [], []
    for q in pts:
        a = 0.0 if q == p else math.atan2(((q - p) / h).imag, ((q - p) / h).real)
        a = max(-cfg.alpha_max, min(cfg.alpha_max, a))
        c = p + cfg.delta * h * complex(math.cos(a), math.sin(a))
        turns.append(abs(a))
        starts.append(abs(pts[0] - c))
        aims.append(abs(q - c))

    def norm(v):
        lo, hi = min(v), max(v)
        return [0.0 if hi == lo else (x - lo) / (hi - lo) for x in v]

    ta, ts, tp = norm(turns), norm(starts), norm(aims)
    return [cfg.theta_o * j / n + cfg.theta_a * ta[j] + cfg.theta_f * ts[j] + cfg.theta_p * tp[j]
            for j in range(n)]


def check_connection(prev, nxt, cfg):
    tr = connect_trace(prev, nxt, cfg)
    pts = np.vstack([prev[-1:], tr.points])
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    assert np.all(np.abs(steps - cfg.delta) <= 1e-9)
    dirs = np.diff(pts, axis=0) / cfg.delta
    if len(dirs):
        # turn from the previous heading into each emitted step
        prev_dirs = np.vstack([tr.states[:1, 2:], dirs[:-1]])
        cross = prev_dirs[:, 0] * dirs[:, 1] - prev_dirs[:, 1] * dirs[:, 0]
        turn = np.abs(np.arctan2(cross, np.sum(prev_dirs * dirs, axis=1)))
        assert np.all(turn <= cfg.alpha_max + 1e-9)
    assert np.linalg.norm(pts[-1] - nxt[0]) <= cfg.delta
    assert len(tr.points) <= cfg.max_iters
    for (px, py, hx, hy), j in zip(tr.states, tr.choices):
        costs = brute_costs((px, py), (hx, hy), nxt, cfg)
        assert j == int(np.argmin(costs))
    return tr


def _placed_pair(a, b, rng):
    ta = data.process_stroke(glyphs.jittered(a, rng))
    tb = data.process_stroke(glyphs.jittered(b, rng))
    return P.scale_and_place([ta, tb], [data.label_of(a), data.label_of(b)])


def test_zero_weights_pick_first():
    cfg = ConnectConfig(theta_o=0, theta_a=0, theta_f=0, theta_p=0)
    nxt = np.random.default_rng(0).normal(size=(20, 2))
    costs, _, _ = candidate_costs(np.zeros(2), np.array([1.0, 0.0]), nxt, cfg)
    assert np.all(costs == 0) and int(np.argmin(costs)) == 0


def test_index_weight_alone_picks_first():
    cfg = ConnectConfig(theta_o=1, theta_a=0, theta_f=0, theta_p=0)
    nxt = np.random.default_rng(1).normal(size=(20, 2))
    costs, _, _ = candidate_costs(np.zeros(2), np.array([0.0, 1.0]), nxt, cfg)
    assert int(np.argmin(costs)) == 0
    np.testing.assert_allclose(costs, np.arange(20) / 20)


def test_costs_match_brute_force():
    rng = np.random.default_rng(2)
    cfg = ConnectConfig()
    for _ in range(50):
        p, nxt = rng.normal(size=2), rng.normal(size=(30, 2))
        h = rng.normal(size=2)
        h /= np.linalg.norm(h)
        costs, _, _ = candidate_costs(p, h, nxt, cfg)
        np.testing.assert_allclose(costs, brute_costs(p, h, nxt, cfg), atol=1e-12)


def test_collinear_straight_line():
    d = 0.02
    prev = np.array([[-1.0, 0.0], [0.0, 0.0]])
    nxt = np.array([[3 * d, 0.0], [4 * d, 0.0], [5 * d, 0.0]])
    out = connect(prev, nxt, ConnectConfig(delta=d))
    np.testing.assert_allclose(out, [[d, 0.0], [2 * d, 0.0]], atol=1e-15)


def test_already_close_gives_empty():
    prev = np.array([[0.0, 0.0], [1.0, 0.0]])
    out = connect(prev, np.array([[1.01, 0.0], [2.0, 0.0]]))
    assert out.shape == (0, 2)


def test_max_iters_error_carries_partial():
    prev = np.array([[0.0, 0.0], [1.0, 0.0]])
    nxt = np.array([[50.0, 0.0]])
    with pytest.raises(ConnectError, match="10 steps") as exc:
        connect(prev, nxt, ConnectConfig(max_iters=10))
    assert exc.value.partial.shape == (10, 2)


def test_bad_inputs():
    with pytest.raises(ValueError):
        connect(np.zeros((1, 2)), np.ones((3, 2)))
    with pytest.raises(ValueError):
        connect(np.zeros((3, 2)), np.ones((3, 2)))
    with pytest.raises(ValueError):
        connect(np.array([[0.0, 0.0], [1.0, 0.0]]), np.empty((0, 2)))
    with pytest.raises(ValueError):
        ConnectConfig(alpha_max=4.0)
    with pytest.raises(ValueError):
        ConnectConfig(delta=0.0)


def test_c_to_a_fixture():
    rng = np.random.default_rng(3)
    prev, nxt = _placed_pair("c", "a", rng)
    tr = check_connection(prev, nxt, ConnectConfig())
    assert 0 < len(tr.points) <= 200


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_letter_pairs(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.choice(list(data.ALPHABET), 2)
    check_connection(*_placed_pair(a, b, rng), ConnectConfig())


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 2 * np.pi), st.floats(0.0, 2 * np.pi), st.floats(0.5, 3.0), st.floats(0.2, 1.0))
def test_progress_with_dominant_start_weight(heading, bearing, dist, alpha_max):
    cfg = ConnectConfig(theta_o=0.0, theta_a=0.0, theta_f=1.0, theta_p=0.0, alpha_max=alpha_max)
    h = np.array([np.cos(heading), np.sin(heading)])
    prev = np.vstack([-h * 0.1, [0.0, 0.0]])
    nxt = dist * np.array([[np.cos(bearing), np.sin(bearing)]]) + np.linspace(0, 0.3, 10)[:, None] * [1, 0]
    out = connect(prev, nxt, cfg)
    gaps = np.linalg.norm(out - nxt[0], axis=1)
    settle = math.ceil(np.pi / alpha_max)
    assert np.all(np.diff(gaps[settle:]) <= 1e-12)
