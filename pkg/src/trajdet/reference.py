"""Query-conditioned reference trajectory generator.

Maps (query embedding, timestep embedding) to an expected evidence vector;
trained on factual samples only, then frozen for the detection stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import diffnet
from .diffnet import MLP, AdamW, smooth_l1
from .evidence import EvidenceVector
from .trajectory import Label

DEFAULT_T_DIM = 16
DEFAULT_HIDDEN = 64

# Lowest sinusoid frequency < pi/2 keeps the first component strictly
# monotone in t/T, so distinct steps always get distinct codes.
_F_MIN = 1.0
_F_MAX = 2048.0


def timestep_frequencies(dim: int) -> np.ndarray:
    half = dim // 2
    if half == 1:
        return np.array([_F_MIN])
    return _F_MIN * (_F_MAX / _F_MIN) ** (np.arange(half) / (half - 1))


def timestep_embed(t: int, T: int, dim: int = DEFAULT_T_DIM) -> np.ndarray:
    """Interleaved sin/cos code of the normalized step t/T."""
    if dim % 2 != 0 or dim < 2:
        raise ValueError(f"dim must be a positive even integer, got {dim}")
    if not (0 <= t <= T):
        raise ValueError(f"t={t} out of range [0, {T}]")
    s = t / T
    freqs = timestep_frequencies(dim)
    out = np.empty(dim)
    out[0::2] = np.sin(freqs * s)
    out[1::2] = np.cos(freqs * s)
    return out


def timestep_embed_all(T: int, dim: int = DEFAULT_T_DIM) -> np.ndarray:
    """(T+1, dim) codes ordered by descending step T..0."""
    return np.stack([timestep_embed(t, T, dim) for t in range(T, -1, -1)])


@dataclass
class ReferenceGenerator:
    d_q: int
    t_dim: int = DEFAULT_T_DIM
    hidden: int = DEFAULT_HIDDEN
    mlp: MLP = None
    meta: dict = field(default_factory=dict)

    @staticmethod
    def create(d_q: int, t_dim: int = DEFAULT_T_DIM, hidden: int = DEFAULT_HIDDEN,
               rng: np.random.Generator | None = None) -> "ReferenceGenerator":
        if rng is None:
            rng = np.random.default_rng(0)
        mlp = MLP([d_q + t_dim, hidden, hidden, 3], ["relu", "relu", "linear"], rng)
        return ReferenceGenerator(d_q=d_q, t_dim=t_dim, hidden=hidden, mlp=mlp)

    def predict_matrix(self, q: np.ndarray, T: int) -> np.ndarray:
        """(T+1, 3) reference evidence, descending step order, clamped at 0."""
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.d_q,):
            raise ValueError(f"query embedding shape {q.shape} != ({self.d_q},)")
        et = timestep_embed_all(T, self.t_dim)
        x = np.hstack([np.tile(q, (T + 1, 1)), et])
        return np.maximum(self.mlp.forward(x), 0.0)

    def predict_reference(self, q: np.ndarray, t: int, T: int) -> EvidenceVector:
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.d_q,):
            raise ValueError(f"query embedding shape {q.shape} != ({self.d_q},)")
        x = np.concatenate([q, timestep_embed(t, T, self.t_dim)])[None, :]
        out = np.maximum(self.mlp.forward(x)[0], 0.0)
        return EvidenceVector(*out)

    def to_json(self) -> dict:
        return {
            "type": "reference_generator",
            "d_q": self.d_q,
            "t_dim": self.t_dim,
            "hidden": self.hidden,
            "mlp": diffnet.mlp_to_json(self.mlp),
            "meta": self.meta,
        }

    @staticmethod
    def from_json(obj: dict) -> "ReferenceGenerator":
        return ReferenceGenerator(
            d_q=obj["d_q"],
            t_dim=obj["t_dim"],
            hidden=obj["hidden"],
            mlp=diffnet.mlp_from_json(obj["mlp"]),
            meta=obj.get("meta", {}),
        )


def train_reference(gen: ReferenceGenerator, samples, config, rng: np.random.Generator) -> list[float]:
    """Fit the generator on factual samples; returns per-epoch loss.

    ``samples`` is a sequence of training samples carrying ``q``, ``label``,
    and an observed evidence matrix; any non-factual label is rejected.
    ``config`` needs lr/wd/epochs/batch attributes.
    """
    for s in samples:
        if s.label != Label.FACTUAL:
            raise ValueError(f"sample {s.id!r} is not factual; stage 1 trains on y=0 only")
    if not samples:
        raise ValueError("no factual samples to train on")

    T = samples[0].evidence_matrix.shape[0] - 1
    et = timestep_embed_all(T, gen.t_dim)
    inputs = np.stack(
        [np.hstack([np.tile(s.q, (T + 1, 1)), et]) for s in samples]
    )  # (N, T+1, d_q + t_dim)
    targets = np.stack([s.evidence_matrix for s in samples])  # (N, T+1, 3)

    opt = AdamW(gen.mlp.parameters(), lr=config.lr, weight_decay=config.wd)
    n = len(samples)
    history = []
    for _epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, config.batch):
            idx = order[start:start + config.batch]
            x = inputs[idx].reshape(-1, inputs.shape[-1])
            y = targets[idx].reshape(-1, 3)
            gen.mlp.zero_grad()
            pred = gen.mlp.forward(x)
            loss, dpred = smooth_l1(pred, y)
            if not math.isfinite(loss):
                raise FloatingPointError("non-finite stage-1 loss")
            gen.mlp.backward(dpred)
            opt.step(gen.mlp.gradients())
            epoch_loss += loss
            n_batches += 1
        history.append(epoch_loss / n_batches)
    gen.meta["stage1_epochs"] = config.epochs
    gen.meta["final_loss_ref"] = history[-1]
    return history
