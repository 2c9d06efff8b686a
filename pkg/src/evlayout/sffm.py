"""Single-head attention whose score matrix is fused with an ETDF map.

    S = (X Wq)(X Wk)^T / sqrt(d_head)
    F = S + w * phi(E)          phi(E) = exp(-E / tau)   (or -E / tau)
    Y = softmax_rows(F) (X Wv)

Everything is float64 numpy; :func:`sffm_gradients` is the hand-written
reverse pass of ``<G, Y>``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import NumericError, ShapeMismatch, ValidationError

PHI_KINDS = ("exp", "neg")


@dataclass(frozen=True, eq=False)
class AttentionParams:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w: float = 0.0
    tau: float = 1.0
    phi: str = "exp"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValidationError("fusion temperature must be > 0")
        if self.phi not in PHI_KINDS:
            raise ValidationError(f"phi must be one of {PHI_KINDS}")
        d = self.w_q.shape[0]
        if self.w_k.shape != self.w_q.shape or self.w_v.shape[0] != d:
            raise ShapeMismatch("W_q, W_k, W_v must share d_model rows (W_q, W_k equal shapes)")
        for m in (self.w_q, self.w_k, self.w_v):
            if not np.all(np.isfinite(m)):
                raise NumericError("non-finite projection entry")

    @property
    def d_model(self) -> int:
        return self.w_q.shape[0]

    @property
    def d_head(self) -> int:
        return self.w_q.shape[1]

    def replace(self, **kw) -> "AttentionParams":
        fields = dict(w_q=self.w_q, w_k=self.w_k, w_v=self.w_v, w=self.w, tau=self.tau, phi=self.phi)
        fields.update(kw)
        return AttentionParams(**fields)

    @classmethod
    def random(cls, d_model: int, d_head: Optional[int] = None, rng=None, **kw) -> "AttentionParams":
        rng = np.random.default_rng(rng)
        d_head = d_head or d_model
        scale = 1.0 / math.sqrt(d_model)
        return cls(*(rng.normal(0.0, scale, (d_model, d_head)) for _ in range(3)), **kw)


def _as_tokens(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch(f"token grid must be 2-D, got shape {X.shape}")
    return X


def _matrix(E) -> np.ndarray:
    return np.asarray(getattr(E, "matrix", E), dtype=np.float64)


def attention_scores(X, params: AttentionParams) -> np.ndarray:
    X = _as_tokens(X)
    if X.shape[1] != params.d_model:
        raise ShapeMismatch(f"tokens have d={X.shape[1]}, params expect {params.d_model}")
    return (X @ params.w_q) @ (X @ params.w_k).T / math.sqrt(params.d_head)


def similarity(E, tau: float, phi: str = "exp") -> np.ndarray:
    E = _matrix(E)
    if phi == "exp":
        return np.exp(-E / tau)
    if phi == "neg":
        return -E / tau
    raise ValidationError(f"phi must be one of {PHI_KINDS}")


def fuse_scores(S, E, w: float, tau: float, phi: str = "exp") -> np.ndarray:
    """``S + w * phi(E)``; exactly ``S`` when ``w == 0``."""
    S = np.asarray(S, dtype=np.float64)
    E = _matrix(E)
    if S.shape != E.shape or S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ShapeMismatch(f"score matrix {S.shape} vs ETDF map {E.shape}")
    if not tau > 0:
        raise ValidationError("fusion temperature must be > 0")
    if w == 0:
        return S.copy()
    return S + w * similarity(E, tau, phi)


def softmax_rows(F: np.ndarray) -> np.ndarray:
    z = F - F.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class ForwardCache(NamedTuple):
    X: np.ndarray
    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    phi: np.ndarray
    A: np.ndarray
    Y: np.ndarray


def _forward(X, E, params: AttentionParams) -> ForwardCache:
    X = _as_tokens(X)
    E = _matrix(E)
    n = X.shape[0]
    if E.shape != (n, n):
        raise ShapeMismatch(f"ETDF map is {E.shape} but there are {n} tokens")
    S = attention_scores(X, params)
    F = fuse_scores(S, E, params.w, params.tau, params.phi)
    A = softmax_rows(F)
    V = X @ params.w_v
    Y = A @ V
    if not np.all(np.isfinite(Y)):
        raise NumericError("non-finite SFFM output")
    phi = similarity(E, params.tau, params.phi)
    return ForwardCache(X, X @ params.w_q, X @ params.w_k, V, phi, A, Y)


def sffm_forward(X, E, params: AttentionParams) -> np.ndarray:
    return _forward(X, E, params).Y


def attention_weights(X, E, params: AttentionParams) -> np.ndarray:
    """Row-stochastic fused attention weights."""
    return _forward(X, E, params).A


class Gradients(NamedTuple):
    X: np.ndarray
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w: float
    E: np.ndarray


def sffm_gradients(X, E, params: AttentionParams, upstream) -> Gradients:
    """Gradients of ``sum(upstream * sffm_forward(X, E, params))``."""
    c = _forward(X, E, params)
    G = np.asarray(upstream, dtype=np.float64)
    if G.shape != c.Y.shape:
        raise ShapeMismatch(f"upstream {G.shape} vs output {c.Y.shape}")
    scale = 1.0 / math.sqrt(params.d_head)
    dV = c.A.T @ G
    dA = G @ c.V.T
    dF = c.A * (dA - np.sum(dA * c.A, axis=1, keepdims=True))
    dQ = dF @ c.K * scale
    dK = dF.T @ c.Q * scale
    dw = float(np.sum(dF * c.phi))
    if params.phi == "exp":
        dE = -params.w / params.tau * c.phi * dF
    else:
        dE = -params.w / params.tau * dF
    dX = dQ @ params.w_q.T + dK @ params.w_k.T + dV @ params.w_v.T
    return Gradients(dX, c.X.T @ dQ, c.X.T @ dK, c.X.T @ dV, dw, dE)


# ------------------------------------------------------------------- blobs

_TOKENS_HEADER = struct.Struct("<II")


def tokens_to_blob(X) -> bytes:
    X = _as_tokens(X)
    return _TOKENS_HEADER.pack(*X.shape) + X.astype("<f8").tobytes()


def tokens_from_blob(data: bytes) -> np.ndarray:
    if len(data) < _TOKENS_HEADER.size:
        raise ValidationError("token blob too short")
    n, d = _TOKENS_HEADER.unpack_from(data, 0)
    if len(data) != _TOKENS_HEADER.size + 8 * n * d:
        raise ValidationError(f"token blob for {n}x{d} has wrong length {len(data)}")
    return np.frombuffer(data, "<f8", offset=_TOKENS_HEADER.size).reshape(n, d).copy()
