from __future__ import annotations

import math

import numpy as np
import pytest

from evlayout import errors
from evlayout.sffm import (AttentionParams, attention_scores, attention_weights, fuse_scores,
                           sffm_forward, sffm_gradients, similarity, softmax_rows,
                           tokens_from_blob, tokens_to_blob)


def setup(seed=0, n=4, d=3, w=0.7, phi="exp"):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    E = np.abs(rng.normal(size=(n, n)))
    np.fill_diagonal(E, 0.0)
    return X, E, AttentionParams.random(d, d, rng, w=w, tau=0.8, phi=phi)


def test_scores_basic():
    p = AttentionParams(np.eye(2), np.eye(2), np.eye(2))
    assert not attention_scores(np.zeros((3, 2)), p).any()
    assert attention_scores(np.ones((1, 2)), p).shape == (1, 1)
    S = attention_scores(np.array([[1.0, 0.0], [0.0, 1.0]]), p)
    assert S[0, 1] == 0.0 and S[1, 0] == 0.0


def test_fusion_identity_and_similarity():
    X, E, p = setup()
    S = attention_scores(X, p)
    F = fuse_scores(S, E, 0.0, 1.0)
    assert F.tobytes() == S.tobytes()
    assert np.all(np.diag(similarity(E, 0.8)) == 1.0)
    assert similarity(np.array([[50.0 * 0.8]]), 0.8)[0, 0] < 2e-22
    assert np.array_equal(similarity(E, 2.0, "neg"), -E / 2.0)
    with pytest.raises(errors.ShapeMismatch):
        fuse_scores(S, E[:2, :2], 1.0, 1.0)
    with pytest.raises(errors.ValidationError):
        fuse_scores(S, E, 1.0, 0.0)


def test_softmax_rows():
    F = np.array([[1000.0, 1000.0], [0.0, math.log(3.0)]])
    A = softmax_rows(F)
    assert np.allclose(A, [[0.5, 0.5], [0.25, 0.75]])


def test_identical_tokens_identical_rows():
    rng = np.random.default_rng(1)
    X = np.tile(rng.normal(size=(1, 4)), (5, 1))
    p = AttentionParams.random(4, 4, rng)
    Y = sffm_forward(X, np.zeros((5, 5)), p)
    assert np.allclose(Y, Y[0])


def test_forward_matches_stepwise_reimplementation():
    X, E, p = setup(seed=5, n=4, d=3)
    n = len(X)
    Q, K, V = X @ p.w_q, X @ p.w_k, X @ p.w_v
    Y = np.zeros_like(V)
    for i in range(n):
        f = [float(Q[i] @ K[j]) / math.sqrt(3) + p.w * math.exp(-E[i, j] / p.tau) for j in range(n)]
        m = max(f)
        e = [math.exp(v - m) for v in f]
        z = sum(e)
        for j in range(n):
            Y[i] += e[j] / z * V[j]
    assert np.allclose(sffm_forward(X, E, p), Y, rtol=0, atol=1e-12)
    A = attention_weights(X, E, p)
    assert np.allclose(A.sum(axis=1), 1.0)


def test_zero_upstream_and_dead_path():
    X, E, p = setup()
    g = sffm_gradients(X, E, p, np.zeros((4, 3)))
    for v in (g.X, g.w_q, g.w_k, g.w_v, g.E):
        assert not np.any(v)
    assert g.w == 0.0
    big = np.full((4, 4), 1e3)
    g = sffm_gradients(X, big, p, np.ones((4, 3)))
    assert abs(g.w) < 1e-300


@pytest.mark.parametrize("phi", ["exp", "neg"])
def test_gradients_small_case(phi):
    X, E, p = setup(seed=2, phi=phi)
    G = np.random.default_rng(9).normal(size=(4, 3))
    g = sffm_gradients(X, E, p, G)
    h = 1e-6

    def f(X=X, E=E, p=p):
        return float(np.sum(G * sffm_forward(X, E, p)))

    for i, j in [(0, 0), (3, 2)]:
        dX = np.zeros_like(X); dX[i, j] = h
        assert (f(X=X + dX) - f(X=X - dX)) / (2 * h) == pytest.approx(g.X[i, j], rel=1e-6, abs=1e-9)
        dW = np.zeros_like(p.w_q); dW[i % 3, j] = h
        num = (f(p=p.replace(w_q=p.w_q + dW)) - f(p=p.replace(w_q=p.w_q - dW))) / (2 * h)
        assert num == pytest.approx(g.w_q[i % 3, j], rel=1e-6, abs=1e-9)
        dE = np.zeros_like(E); dE[i, 1] = h
        assert (f(E=E + dE) - f(E=E - dE)) / (2 * h) == pytest.approx(g.E[i, 1], rel=1e-6, abs=1e-9)
    num_w = (f(p=p.replace(w=p.w + h)) - f(p=p.replace(w=p.w - h))) / (2 * h)
    assert num_w == pytest.approx(g.w, rel=1e-6, abs=1e-9)


def test_params_validation_and_blob():
    with pytest.raises(errors.ShapeMismatch):
        AttentionParams(np.eye(2), np.eye(3), np.eye(2))
    with pytest.raises(errors.ValidationError):
        AttentionParams(np.eye(2), np.eye(2), np.eye(2), tau=0)
    with pytest.raises(errors.NumericError):
        AttentionParams(np.full((2, 2), np.nan), np.eye(2), np.eye(2))
    X = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(tokens_from_blob(tokens_to_blob(X)), X)
    X, E, p = setup()
    with pytest.raises(errors.ShapeMismatch):
        sffm_forward(X, E[:3, :3], p)
