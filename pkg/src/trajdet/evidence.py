"""Per-step statistical evidence vectors and evidence trajectories.

Each denoising step's filtered entropy field is condensed into the triple
(mean, max, top-k mean). The hot kernel is a compiled extension when
available; set ``TRAJDET_PURE=1`` to force the pure-Python fallback.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from . import _evidence_py
from .filtering import IgnoreSpec, valid_positions
from .trajectory import RawTrajectory

if os.environ.get("TRAJDET_PURE") == "1":
    _kernel = _evidence_py
else:
    try:
        from . import _evidence as _kernel  # type: ignore[no-redef]
    except ImportError:
        _kernel = _evidence_py

BACKEND = _kernel.BACKEND

DEFAULT_TOP_K = 5


def shannon_entropy(probs) -> float:
    """Entropy in nats of a categorical distribution, with 0*log(0) = 0."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probs must be a non-empty 1-D distribution")
    if np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=1e-9):
        raise ValueError("probs must be non-negative and sum to 1")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


@dataclass(frozen=True)
class EvidenceVector:
    mean_entropy: float
    max_entropy: float
    topk_mean_entropy: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.mean_entropy, self.max_entropy, self.topk_mean_entropy], dtype=np.float64
        )


@dataclass(frozen=True)
class EvidenceTrajectory:
    """Evidence vectors indexed by descending step T..0, plus per-step |K_t|."""

    vectors: tuple[EvidenceVector, ...]
    kept_counts: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.vectors)

    def as_array(self) -> np.ndarray:
        """(T+1, 3) array ordered by descending step."""
        return np.array([v.as_array() for v in self.vectors], dtype=np.float64)


def step_evidence(entropies, k: int = DEFAULT_TOP_K) -> EvidenceVector:
    """Evidence triple over one step's kept entropies.

    Top-k averages the k largest values, or all of them when fewer than k are
    present. Empty input yields the zero vector.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    arr = np.ascontiguousarray(entropies, dtype=np.float64)
    mean, s_max, topk = _kernel.step_stats(arr, k)
    return EvidenceVector(mean, s_max, topk)


def build_trajectory(raw: RawTrajectory, spec: IgnoreSpec, k: int = DEFAULT_TOP_K) -> EvidenceTrajectory:
    vectors = []
    kept_counts = []
    for step in raw.steps:
        keep = valid_positions(step, spec)
        ent = [t.entropy for t in step.tokens if t.position in keep]
        vectors.append(step_evidence(ent, k))
        kept_counts.append(len(ent))
    return EvidenceTrajectory(tuple(vectors), tuple(kept_counts))


def build_many(
    trajectories, spec: IgnoreSpec, k: int = DEFAULT_TOP_K
) -> list[EvidenceTrajectory]:
    return [build_trajectory(raw, spec, k) for raw in trajectories]


def write_evidence_csv(raw_trajectories, spec: IgnoreSpec, k: int, path) -> None:
    """Dump evidence trajectories as flat CSV for plotting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label", "t", "mean", "max", "topk", "kept_count"])
        for raw in raw_trajectories:
            ev = build_trajectory(raw, spec, k)
            T = len(ev) - 1
            for i, (vec, cnt) in enumerate(zip(ev.vectors, ev.kept_counts)):
                writer.writerow(
                    [
                        raw.id,
                        raw.label.to_json(),
                        T - i,
                        repr(vec.mean_entropy),
                        repr(vec.max_entropy),
                        repr(vec.topk_mean_entropy),
                        cnt,
                    ]
                )
