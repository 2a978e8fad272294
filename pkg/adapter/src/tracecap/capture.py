"""Capture sessions: run the toy model over a question set and emit the
canonical trajectory dataset, optionally with a distribution sidecar."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from trajdet.trajectory import (
    DatasetHeader,
    Label,
    RawTrajectory,
    StepRecord,
    TokenRecord,
    write_dataset,
)

from .model import ToyMaskedDiffusionModel, shannon_entropy
from .vocab import tag_token

RECOMPUTE_TOL = 1e-5


@dataclass
class CaptureSession:
    model: ToyMaskedDiffusionModel
    model_id: str = "toy-masked-diffusion"
    T: int = 12
    l: int = 24
    remask_strategy: str = "entropy"
    capture_point: str = "pre_remask"
    query_layer: int = 1
    sidecar_path: str | None = None
    _sidecar: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def validate(self):
        if self.T < 1 or self.l < 1:
            raise ValueError("T and l must be >= 1")
        if self.capture_point not in ("pre_remask", "post_remask"):
            raise ValueError(f"unknown capture point {self.capture_point!r}")


@dataclass(frozen=True)
class Question:
    id: str
    question: str
    label: Label = Label.UNLABELED


def load_questions(path) -> list[Question]:
    """Question file: JSONL of {"id", "question", optional "label"}."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            try:
                out.append(Question(str(obj["id"]), str(obj["question"]),
                                    Label.from_json(obj.get("label"))))
            except KeyError as exc:
                raise ValueError(f"line {lineno}: missing field {exc}") from exc
    if not out:
        raise ValueError("question file is empty")
    return out


def merge_labels(questions: list[Question], labels_path) -> list[Question]:
    """Attach labels from a separate {"id": label} JSON file keyed by id."""
    with open(labels_path, "r", encoding="utf-8") as fh:
        table = json.load(fh)
    return [Question(q.id, q.question, Label.from_json(table[q.id]))
            if q.id in table else q for q in questions]


def capture_one(session: CaptureSession, q: Question) -> RawTrajectory:
    model = session.model
    trace = model.generate(q.question, session.T, session.l,
                           session.remask_strategy, session.capture_point)
    query = model.pooled_query(q.question, session.query_layer)

    steps = []
    dists = np.empty((session.T + 1, session.l, model.vocab_size))
    for row, st in enumerate(trace.steps):
        dists[row] = st.probs
        tokens = []
        for i in range(session.l):
            text = st.texts[i]
            ent = shannon_entropy(st.probs[i])
            tokens.append(TokenRecord(position=i + 1, token_text=text,
                                      token_class=tag_token(text),
                                      entropy=float(ent)))
        steps.append(StepRecord(step=st.step, tokens=tuple(tokens)))

    traj = RawTrajectory(
        id=q.id,
        question=q.question,
        response=" ".join(trace.response_tokens),
        query_embedding=tuple(float(x) for x in query),
        label=q.label,
        steps=tuple(steps),
        meta={
            "model_id": session.model_id,
            "capture_point": session.capture_point,
            "remask_strategy": session.remask_strategy,
            "query_embedding": f"mean_pool_layer{session.query_layer}",
            "entropy_units": "nats",
        },
    )
    if session.sidecar_path is not None:
        session._sidecar[q.id] = dists
    return traj


def verify_against_sidecar(trajectory: RawTrajectory, dists: np.ndarray,
                           tol: float = RECOMPUTE_TOL) -> float:
    """Recompute entropies from dumped distributions; return the max gap.

    Raises if any recorded entropy deviates by more than ``tol``.
    """
    worst = 0.0
    for row, sr in enumerate(trajectory.steps):
        for tok in sr.tokens:
            gap = abs(tok.entropy - shannon_entropy(dists[row, tok.position - 1]))
            worst = max(worst, gap)
    if worst > tol:
        raise ValueError(f"entropy recomputation gap {worst:.2e} exceeds {tol}")
    return worst


def capture(questions: list[Question], session: CaptureSession, out_path) -> int:
    """Capture every question and write the dataset; returns sample count."""
    session.validate()
    header = DatasetHeader(d_q=session.model.d_model, T=session.T, l=session.l,
                           vocab_size=session.model.vocab_size)
    trajectories = [capture_one(session, q) for q in questions]
    if session.sidecar_path is not None:
        np.savez_compressed(session.sidecar_path, **session._sidecar)
        for traj in trajectories:
            verify_against_sidecar(traj, session._sidecar[traj.id])
    write_dataset(header, trajectories, out_path)
    return len(trajectories)
