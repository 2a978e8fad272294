"""Synthetic trajectory generator.

Produces labeled raw trajectories whose filtered evidence reproduces the
qualitative class morphologies: factual entropy fields decay exponentially
toward zero, hallucinated ones stagnate at a plateau or rebound in the late
steps. A configurable fraction of positions per step carries structural
padding tokens with class-independent noisy entropies, so unfiltered
statistics mix the signal away.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .evidence import build_trajectory
from .filtering import IgnoreSpec
from .trajectory import (
    DatasetHeader,
    Label,
    RawTrajectory,
    StepRecord,
    TokenRecord,
)

DEFAULT_VOCAB_SIZE = 32000

# Padding entropy model: per-token uniform on [0, span] plus a per-sample
# style offset and a per-step burst offset shared by every pad token in the
# step. Class-independent by construction. The shared per-step term keeps the
# pad contribution to step means noisy no matter how many pads are averaged.
PAD_SPAN = 5.0
PAD_SAMPLE_STD = 0.8
PAD_STEP_STD = 3.4

_PAD_TOKENS = [
    ("<|endoftext|>", "control"),
    ("Answer:", "boilerplate"),
    ("the", "stopword"),
    (".", "lexical_noise"),
    ("##ing", "subword_fragment"),
]


@dataclass(frozen=True)
class RegimeSpec:
    decay_rate: float = 3.0
    start_entropy: float = 5.0
    noise_scale: float = 0.15
    hallucination_mode: str = "mixed"  # stagnation | rebound | mixed
    rebound_onset_fraction: float = 0.75
    plateau_level: float = 1.5
    padding_fraction: float = 0.7
    query_cluster_center: tuple[float, ...] = (0.0,) * 8

    def validate(self):
        if self.decay_rate <= 0 or self.start_entropy <= 0:
            raise ValueError("decay_rate and start_entropy must be positive")
        if self.noise_scale < 0 or self.plateau_level < 0:
            raise ValueError("noise_scale and plateau_level must be >= 0")
        if self.start_entropy < self.plateau_level:
            raise ValueError("start_entropy must be >= plateau_level")
        if self.hallucination_mode not in ("stagnation", "rebound", "mixed"):
            raise ValueError(f"unknown hallucination_mode {self.hallucination_mode!r}")
        if not (0.0 < self.rebound_onset_fraction < 1.0):
            raise ValueError("rebound_onset_fraction must be in (0, 1)")
        if not (0.0 <= self.padding_fraction < 1.0):
            raise ValueError("padding_fraction must be in [0, 1)")

    @staticmethod
    def from_json(obj: dict) -> "RegimeSpec":
        obj = dict(obj)
        if "query_cluster_center" in obj:
            obj["query_cluster_center"] = tuple(obj["query_cluster_center"])
        spec = RegimeSpec(**obj)
        spec.validate()
        return spec


def default_regimes(d_q: int = 8) -> list[RegimeSpec]:
    c1 = tuple([1.0] * (d_q // 2) + [0.0] * (d_q - d_q // 2))
    c2 = tuple([0.0] * (d_q - d_q // 2) + [-1.0] * (d_q // 2))
    return [
        RegimeSpec(decay_rate=2.5, start_entropy=5.0, query_cluster_center=c1),
        RegimeSpec(decay_rate=4.0, start_entropy=6.5, query_cluster_center=c2),
    ]


def decay_law(regime: RegimeSpec, t: int, T: int) -> float:
    return regime.start_entropy * math.exp(-regime.decay_rate * (1.0 - t / T))


def _semantic_curve(regime: RegimeSpec, T: int, hallucinated: bool, mode: str) -> np.ndarray:
    """Noise-free per-step semantic entropy level, descending t=T..0."""
    t_onset = math.floor(T * (1.0 - regime.rebound_onset_fraction))
    levels = np.empty(T + 1)
    for i, t in enumerate(range(T, -1, -1)):
        base = decay_law(regime, t, T)
        if hallucinated and t <= t_onset:
            if mode == "stagnation":
                base = max(base, regime.plateau_level)
            else:  # rebound
                frac = (t_onset - t) / max(t_onset, 1)
                base = base + regime.plateau_level * frac
        levels[i] = base
    return levels


def simulate_dataset(regimes: list[RegimeSpec], n_factual: int, n_hallucinated: int,
                     T: int, l: int, seed: int, d_q: int = 8,
                     vocab_size: int = DEFAULT_VOCAB_SIZE):
    """Generate a labeled dataset; returns (DatasetHeader, [RawTrajectory])."""
    if n_factual < 1 or n_hallucinated < 1:
        raise ValueError("need at least one sample per class")
    if T < 4:
        raise ValueError(f"T must be >= 4, got {T}")
    for regime in regimes:
        regime.validate()
        if len(regime.query_cluster_center) != d_q:
            raise ValueError("query_cluster_center dimension must equal d_q")

    header = DatasetHeader(d_q=d_q, T=T, l=l, vocab_size=vocab_size)
    max_ent = math.log(vocab_size)
    rng = np.random.default_rng(seed)
    labels = [Label.FACTUAL] * n_factual + [Label.HALLUCINATED] * n_hallucinated

    trajectories = []
    for idx, label in enumerate(labels):
        regime = regimes[idx % len(regimes)]
        sub = np.random.default_rng(rng.integers(0, 2**63))
        hallucinated = label == Label.HALLUCINATED
        mode = regime.hallucination_mode
        if mode == "mixed":
            mode = "stagnation" if sub.random() < 0.5 else "rebound"

        q = np.asarray(regime.query_cluster_center) + 0.1 * sub.normal(size=d_q)
        n_pad = int(round(regime.padding_fraction * l))
        positions = sub.permutation(l) + 1
        pad_positions = set(positions[:n_pad].tolist())
        pad_offset = sub.normal(0.0, PAD_SAMPLE_STD)
        levels = _semantic_curve(regime, T, hallucinated, mode)

        steps = []
        for i, t in enumerate(range(T, -1, -1)):
            tokens = []
            step_offset = sub.normal(0.0, PAD_STEP_STD) if n_pad else 0.0
            for pos in range(1, l + 1):
                if pos in pad_positions:
                    text, cls = _PAD_TOKENS[pos % len(_PAD_TOKENS)]
                    ent = pad_offset + step_offset + sub.uniform(0.0, PAD_SPAN)
                else:
                    text, cls = f"w{pos}", "semantic"
                    ent = levels[i] + regime.noise_scale * sub.normal()
                ent = min(max(ent, 0.0), max_ent)
                tokens.append(TokenRecord(pos, text, cls, float(ent)))
            steps.append(StepRecord(step=t, tokens=tuple(tokens)))

        trajectories.append(
            RawTrajectory(
                id=f"syn-{idx:05d}",
                question="",
                response="",
                query_embedding=tuple(float(x) for x in q),
                label=label,
                steps=tuple(steps),
                meta={
                    "generator": "synthetic",
                    "regime": str(idx % len(regimes)),
                    "mode": "factual" if not hallucinated else mode,
                    "entropy_units": "nats",
                },
            )
        )
    return header, trajectories


def emit_plot_csv(trajectories, spec: IgnoreSpec, k: int, path) -> None:
    """Per-class mean and std of the three evidence statistics over t."""
    by_class: dict = {}
    T = None
    for raw in trajectories:
        ev = build_trajectory(raw, spec, k).as_array()
        T = ev.shape[0] - 1
        by_class.setdefault(raw.label.to_json(), []).append(ev)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["label", "t", "mean_avg", "mean_std", "max_avg", "max_std", "topk_avg", "topk_std"]
        )
        for label in sorted(by_class, key=str):
            stack = np.stack(by_class[label])  # (N, T+1, 3)
            mu = stack.mean(axis=0)
            sd = stack.std(axis=0)
            for i in range(T + 1):
                writer.writerow(
                    [label, T - i]
                    + [repr(float(v)) for pair in zip(mu[i], sd[i]) for v in pair]
                )


def load_regimes_file(path) -> dict:
    """Parse a regimes config: counts, T, l, d_q, seed, and regime list."""
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    obj["regimes"] = [RegimeSpec.from_json(r) for r in obj.get("regimes", [])]
    return obj
