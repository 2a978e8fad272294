"""Toy masked-diffusion language model, desk scale.

Generates a fixed-length response by iterative denoising: at each step it
predicts a categorical distribution over the vocabulary for every position,
then commits the most certain positions according to a remasking schedule.
Prediction sharpness grows as t decreases, so per-position entropy starts at
the uniform maximum (ln V at t = T) and collapses toward zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .vocab import MASK_TOKEN, default_vocab, tokenize

REMASK_STRATEGIES = ("entropy", "confidence")


def shannon_entropy(probs) -> float:
    """Entropy in nats of one categorical distribution, 0*log(0) = 0."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probs must be a non-empty 1-D distribution")
    if np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=1e-9):
        raise ValueError("probs must be non-negative and sum to 1")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class StepTrace:
    """One denoising step as seen at the capture point."""

    step: int
    probs: np.ndarray        # (l, V) distribution per position
    texts: list[str]         # committed token text or the mask token
    committed: np.ndarray    # (l,) bool


@dataclass
class GenerationTrace:
    steps: list[StepTrace] = field(default_factory=list)
    response_tokens: list[str] = field(default_factory=list)


class ToyMaskedDiffusionModel:
    """Two-layer toy model: embeddings plus a tanh projection.

    The "hidden states" exposed for query pooling are layer 0 (raw
    embeddings) and layer 1 (tanh projection), mirroring the idea of
    choosing a capture layer in a real model.
    """

    def __init__(self, d_model: int = 8, seed: int = 0, sharpness: float = 9.0):
        self.vocab = default_vocab()
        self.index = {w: i for i, w in enumerate(self.vocab)}
        self.d_model = d_model
        self.sharpness = sharpness
        rng = np.random.default_rng(seed)
        V = len(self.vocab)
        self.embed = rng.normal(size=(V, d_model)) / math.sqrt(d_model)
        self.proj = rng.normal(size=(d_model, d_model)) / math.sqrt(d_model)
        self.out_dirs = rng.normal(size=(V, d_model))
        self.pos_enc = rng.normal(size=(512, d_model)) / math.sqrt(d_model)
        self.mask_id = self.index[MASK_TOKEN]

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def hidden_states(self, prompt: str) -> list[np.ndarray]:
        """Per-layer (n_tokens, d_model) states for a prompt."""
        ids = [self.index[w] for w in tokenize(prompt)]
        h0 = self.embed[ids] + self.pos_enc[: len(ids)]
        h1 = np.tanh(h0 @ self.proj)
        return [h0, h1]

    def pooled_query(self, prompt: str, layer: int = 1) -> np.ndarray:
        states = self.hidden_states(prompt)
        if not 0 <= layer < len(states):
            raise ValueError(f"layer {layer} out of range (model has {len(states)})")
        return states[layer].mean(axis=0)

    def _position_logits(self, q: np.ndarray, l: int, t: int, T: int) -> np.ndarray:
        """(l, V) logits; uniform at t = T, sharply peaked at t = 0."""
        h = q[None, :] + self.pos_enc[:l]
        sims = h @ self.out_dirs.T  # (l, V)
        scale = self.sharpness * (1.0 - t / T)
        return scale * sims

    def generate(self, prompt: str, T: int, l: int,
                 remask_strategy: str = "entropy",
                 capture_point: str = "pre_remask") -> GenerationTrace:
        """Run the denoising loop, recording distributions at the capture point.

        pre_remask records each step's predictive distributions before the
        commit decision; post_remask records them after, with newly committed
        positions collapsed to their one-hot outcome.
        """
        if remask_strategy not in REMASK_STRATEGIES:
            raise ValueError(f"unknown remask strategy {remask_strategy!r}")
        if capture_point not in ("pre_remask", "post_remask"):
            raise ValueError(f"unknown capture point {capture_point!r}")
        if T < 1 or l < 1:
            raise ValueError("T and l must be >= 1")

        q = self.pooled_query(prompt)
        committed = np.full(l, -1, dtype=np.int64)  # token id or -1
        trace = GenerationTrace()

        for t in range(T, -1, -1):
            probs = softmax(self._position_logits(q, l, t, T))
            # committed positions are frozen at their outcome
            for i in np.flatnonzero(committed >= 0):
                probs[i] = 0.0
                probs[i, committed[i]] = 1.0

            if capture_point == "pre_remask":
                trace.steps.append(self._snapshot(t, probs, committed))

            # positions that remain masked after this step
            n_masked_after = math.floor(l * t / T)
            masked = np.flatnonzero(committed < 0)
            n_commit = len(masked) - n_masked_after
            if n_commit > 0:
                if remask_strategy == "entropy":
                    cert = np.array([-shannon_entropy(probs[i]) for i in masked])
                else:
                    cert = probs[masked].max(axis=1)
                order = masked[np.argsort(-cert, kind="stable")]
                for i in order[:n_commit]:
                    committed[i] = int(probs[i].argmax())
                    probs[i] = 0.0
                    probs[i, committed[i]] = 1.0

            if capture_point == "post_remask":
                trace.steps.append(self._snapshot(t, probs, committed))

        trace.response_tokens = [self.vocab[i] for i in committed]
        return trace

    def _snapshot(self, t: int, probs: np.ndarray, committed: np.ndarray) -> StepTrace:
        texts = [self.vocab[committed[i]] if committed[i] >= 0 else MASK_TOKEN
                 for i in range(len(committed))]
        return StepTrace(step=t, probs=probs.copy(), texts=texts,
                         committed=(committed >= 0).copy())
