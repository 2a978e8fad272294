"""Deviation-based hallucination detector.

Per-step composite features (observed, reference, velocity) are projected to
hidden states, pooled with learned attention weights into a classification
logit, and the same weights aggregate the path-deviation and rebound scores.
Margins for the hinge regularizers track an EMA of factual batch quantiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diffnet
from .diffnet import MLP, binary_ce_batch

DEFAULT_HIDDEN = 64
DEFAULT_ATTN_DIM = 32


def _as_matrix(x) -> np.ndarray:
    """Coerce an EvidenceTrajectory or array-like to a (T+1, 3) float array."""
    if hasattr(x, "as_array"):
        x = x.as_array()
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected (T+1, 3) evidence, got {arr.shape}")
    return arr


def composite_features(observed, reference) -> np.ndarray:
    """(T+1, 9) matrix [a_t; a_hat_t; delta_a_t], descending step order.

    Velocity delta_a_t = a_{t-1} - a_t (the next state in time minus the
    current one); at the final step t=0 no successor exists so it is zero.
    """
    A = _as_matrix(observed)
    R = _as_matrix(reference)
    if A.shape != R.shape:
        raise ValueError(f"length mismatch: observed {A.shape} vs reference {R.shape}")
    V = np.zeros_like(A)
    V[:-1] = A[1:] - A[:-1]
    return np.hstack([A, R, V])


def path_gaps(observed, reference) -> np.ndarray:
    """Per-step summed absolute gap between observed and reference evidence."""
    A = _as_matrix(observed)
    R = _as_matrix(reference)
    return np.abs(A - R).sum(axis=1)


def rebound_terms(observed) -> np.ndarray:
    """Per-step squared positive evidence increases along descending steps.

    Entry i (step t = T - i) is sum_d max(0, a_{t-1,d} - a_{t,d})^2 for
    t >= 1; the t=0 entry is zero.
    """
    A = _as_matrix(observed)
    out = np.zeros(A.shape[0])
    rises = np.maximum(A[1:] - A[:-1], 0.0)
    out[:-1] = (rises * rises).sum(axis=1)
    return out


def softmax(u: np.ndarray) -> np.ndarray:
    shifted = u - u.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def hinge(s: float, m_hat: float, y: int) -> float:
    """(1-y)*s + y*max(0, m_hat - s); margins are constants (no gradient)."""
    return (1 - y) * s + y * max(0.0, m_hat - s)


def hinge_grad(s, m_hat, y):
    """d(hinge)/ds, elementwise."""
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return (1.0 - y) - y * (s < m_hat)


@dataclass
class MarginState:
    m_path: float = 0.0
    m_reb: float = 0.0


@dataclass
class Hyper:
    lambda1: float = 0.2
    lambda2: float = 0.2
    beta: float = 0.1
    quantile_level: float = 0.9

    def validate(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1/lambda2 must be >= 0")
        if not (0.0 < self.beta <= 1.0):
            raise ValueError("beta must be in (0, 1]")
        if not (0.0 < self.quantile_level < 1.0):
            raise ValueError("quantile_level must be in (0, 1)")


class DeviationDetector:
    """Shared projector + attention scorer + classifier head + margin state."""

    def __init__(self, hidden: int = DEFAULT_HIDDEN, attn_dim: int = DEFAULT_ATTN_DIM,
                 hyper: Hyper | None = None, rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.hidden = hidden
        self.attn_dim = attn_dim
        self.hyper = hyper or Hyper()
        self.hyper.validate()
        self.f_phi = MLP([9, hidden, hidden], ["relu", "relu"], rng)
        self.U = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(attn_dim, hidden))
        self.w = rng.normal(0.0, 1.0 / np.sqrt(attn_dim), size=attn_dim)
        self.b_u = np.zeros(attn_dim)
        self.head = MLP([hidden, 32, 1], ["relu", "linear"], rng)
        self.margins = MarginState()
        # attention parameter grads
        self.dU = np.zeros_like(self.U)
        self.dw = np.zeros_like(self.w)
        self.db_u = np.zeros_like(self.b_u)

    # ---- parameter plumbing -------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        return self.f_phi.parameters() + [self.U, self.w, self.b_u] + self.head.parameters()

    def gradients(self) -> list[np.ndarray]:
        return self.f_phi.gradients() + [self.dU, self.dw, self.db_u] + self.head.gradients()

    def zero_grad(self) -> None:
        self.f_phi.zero_grad()
        self.head.zero_grad()
        self.dU[:] = 0.0
        self.dw[:] = 0.0
        self.db_u[:] = 0.0

    # ---- forward ------------------------------------------------------------

    def forward_batch(self, X: np.ndarray) -> dict:
        """Run projector, attention, pooling, and head on a feature batch.

        X: (B, T+1, 9). Returns a cache dict with logits (B,), weights
        omega (B, T+1), and hidden states Z (B, T+1, hidden).
        """
        B, S, F = X.shape
        Z = self.f_phi.forward(X.reshape(B * S, F)).reshape(B, S, self.hidden)
        pre = Z @ self.U.T + self.b_u  # (B, S, attn_dim)
        th = np.tanh(pre)
        u = th @ self.w  # (B, S)
        omega = softmax(u)
        pooled = np.einsum("bs,bsh->bh", omega, Z)
        logits = self.head.forward(pooled)[:, 0]
        return {"X": X, "Z": Z, "th": th, "omega": omega, "pooled": pooled, "logits": logits}

    def backward_batch(self, cache: dict, dlogits: np.ndarray, domega_extra: np.ndarray | None = None) -> None:
        """Accumulate parameter gradients.

        dlogits: (B,) gradient w.r.t. logits. domega_extra: (B, T+1) direct
        gradient w.r.t. omega from the score terms (zero if absent).
        """
        Z, th, omega = cache["Z"], cache["th"], cache["omega"]
        B, S, H = Z.shape
        dpooled = self.head.backward(dlogits[:, None])  # (B, hidden)
        domega = np.einsum("bh,bsh->bs", dpooled, Z)
        if domega_extra is not None:
            domega = domega + domega_extra
        # softmax backward
        du = omega * (domega - (domega * omega).sum(axis=1, keepdims=True))
        # attention scorer backward
        dth = du[:, :, None] * self.w
        dpre = dth * (1.0 - th * th)
        self.dw += np.einsum("bs,bsa->a", du, th)
        self.dU += np.einsum("bsa,bsh->ah", dpre, Z)
        self.db_u += dpre.sum(axis=(0, 1))
        dZ = omega[:, :, None] * dpooled[:, None, :] + dpre @ self.U
        self.f_phi.backward(dZ.reshape(B * S, H))

    # ---- per-sample convenience ---------------------------------------------

    def attend_and_classify(self, features: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        """(logit, omega, Z) for a single (T+1, 9) feature matrix."""
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != 9 or feats.shape[0] < 1:
            raise ValueError(f"expected (T+1, 9) features, got {feats.shape}")
        cache = self.forward_batch(feats[None])
        return float(cache["logits"][0]), cache["omega"][0], cache["Z"][0]

    def path_score(self, observed, reference, omega: np.ndarray) -> float:
        return float(omega @ path_gaps(observed, reference))

    def rebound_score(self, observed, omega: np.ndarray) -> float:
        return float(omega @ rebound_terms(observed))

    def update_margins(self, factual_path_scores, factual_reb_scores) -> MarginState:
        """EMA update from the factual subset of a batch; skipped when empty."""
        sp = np.asarray(factual_path_scores, dtype=np.float64)
        sr = np.asarray(factual_reb_scores, dtype=np.float64)
        if sp.size == 0:
            return self.margins
        q = self.hyper.quantile_level
        b = self.hyper.beta
        self.margins.m_path = (1 - b) * self.margins.m_path + b * float(np.quantile(sp, q))
        self.margins.m_reb = (1 - b) * self.margins.m_reb + b * float(np.quantile(sr, q))
        return self.margins

    def hinge_regularizers(self, s_path: float, s_reb: float, y: int) -> tuple[float, float]:
        return (
            hinge(s_path, self.margins.m_path, y),
            hinge(s_reb, self.margins.m_reb, y),
        )

    def total_loss(self, logit: float, y: int, s_path: float, s_reb: float) -> float:
        l_cls, _ = diffnet.binary_ce(logit, y)
        l_path, l_reb = self.hinge_regularizers(s_path, s_reb, y)
        return l_cls + self.hyper.lambda1 * l_path + self.hyper.lambda2 * l_reb

    # ---- batched training step ----------------------------------------------

    def batch_loss_and_grads(self, X: np.ndarray, gaps: np.ndarray, rebs: np.ndarray,
                             labels: np.ndarray, lambda1: float, lambda2: float) -> dict:
        """Mean total loss over a batch plus accumulated parameter gradients.

        X: (B, T+1, 9) composite features; gaps/rebs: (B, T+1) per-step path
        gaps and rebound terms; labels: (B,) in {0,1}. Margins are treated as
        constants. Caller zero_grads beforehand.
        """
        B = X.shape[0]
        cache = self.forward_batch(X)
        omega = cache["omega"]
        s_path = (omega * gaps).sum(axis=1)
        s_reb = (omega * rebs).sum(axis=1)
        l_cls, dlogits = binary_ce_batch(cache["logits"], labels)
        l_path = (1 - labels) * s_path + labels * np.maximum(0.0, self.margins.m_path - s_path)
        l_reb = (1 - labels) * s_reb + labels * np.maximum(0.0, self.margins.m_reb - s_reb)
        total = (l_cls + lambda1 * l_path + lambda2 * l_reb).mean()

        dsp = lambda1 * hinge_grad(s_path, self.margins.m_path, labels) / B
        dsr = lambda2 * hinge_grad(s_reb, self.margins.m_reb, labels) / B
        domega = dsp[:, None] * gaps + dsr[:, None] * rebs
        self.backward_batch(cache, dlogits / B, domega)
        return {
            "total": float(total),
            "l_cls": float(l_cls.mean()),
            "l_path": float(l_path.mean()),
            "l_reb": float(l_reb.mean()),
            "logits": cache["logits"],
            "s_path": s_path,
            "s_reb": s_reb,
            "omega": omega,
        }

    def score_batch(self, X: np.ndarray, gaps: np.ndarray, rebs: np.ndarray) -> dict:
        """Inference: probabilities, deviation scores, attention weights."""
        cache = self.forward_batch(X)
        omega = cache["omega"]
        return {
            "prob": diffnet.sigmoid(cache["logits"]),
            "logits": cache["logits"],
            "s_path": (omega * gaps).sum(axis=1),
            "s_reb": (omega * rebs).sum(axis=1),
            "omega": omega,
        }

    # ---- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "type": "deviation_detector",
            "hidden": self.hidden,
            "attn_dim": self.attn_dim,
            "hyper": {
                "lambda1": self.hyper.lambda1,
                "lambda2": self.hyper.lambda2,
                "beta": self.hyper.beta,
                "quantile_level": self.hyper.quantile_level,
            },
            "margins": {"m_path": self.margins.m_path, "m_reb": self.margins.m_reb},
            "f_phi": diffnet.mlp_to_json(self.f_phi),
            "U": self.U.tolist(),
            "w": self.w.tolist(),
            "b_u": self.b_u.tolist(),
            "head": diffnet.mlp_to_json(self.head),
        }

    @staticmethod
    def from_json(obj: dict) -> "DeviationDetector":
        det = DeviationDetector(hidden=obj["hidden"], attn_dim=obj["attn_dim"],
                                hyper=Hyper(**obj["hyper"]))
        det.f_phi = diffnet.mlp_from_json(obj["f_phi"])
        det.U = np.array(obj["U"], dtype=np.float64)
        det.w = np.array(obj["w"], dtype=np.float64)
        det.b_u = np.array(obj["b_u"], dtype=np.float64)
        det.head = diffnet.mlp_from_json(obj["head"])
        det.margins = MarginState(**obj["margins"])
        det.dU = np.zeros_like(det.U)
        det.dw = np.zeros_like(det.w)
        det.db_u = np.zeros_like(det.b_u)
        return det
