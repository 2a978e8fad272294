"""Canonical data model and on-disk format for raw uncertainty trajectories.

A dataset file is line-delimited JSON: line 1 is the header object, every
following line is one trajectory object. Files ending in ``.gz`` (or starting
with the gzip magic) are transparently decompressed. Floats are written with
Python's ``repr`` (shortest round-tripping form, >= 9 significant digits).
"""

from __future__ import annotations

import gzip
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable

TOKEN_CLASSES = (
    "control",
    "lexical_noise",
    "boilerplate",
    "stopword",
    "subword_fragment",
    "semantic",
)

SCHEMA_VERSION = "1"


class Label(Enum):
    FACTUAL = 0
    HALLUCINATED = 1
    UNLABELED = "unlabeled"

    def to_json(self):
        return self.value

    @staticmethod
    def from_json(v) -> "Label":
        if v in (0, 1):
            return Label(v)
        if v is None or v == "unlabeled":
            return Label.UNLABELED
        raise FormatError(f"invalid label {v!r}")


class FormatError(ValueError):
    """Raised for any malformed or invariant-violating dataset content."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)


@dataclass(frozen=True)
class TokenRecord:
    position: int
    token_text: str
    token_class: str
    entropy: float

    def validate(self, vocab_size: int | None, line: int | None = None):
        if self.token_class not in TOKEN_CLASSES:
            raise FormatError(f"unknown token_class {self.token_class!r}", line)
        if not math.isfinite(self.entropy) or self.entropy < 0:
            raise FormatError(f"entropy {self.entropy} is negative or non-finite", line)
        if vocab_size is not None and self.entropy > math.log(vocab_size) + 1e-9:
            raise FormatError(
                f"entropy {self.entropy} exceeds ln(vocab_size)={math.log(vocab_size):.6f}",
                line,
            )
        if self.position < 1:
            raise FormatError(f"position {self.position} < 1", line)


@dataclass(frozen=True)
class StepRecord:
    step: int
    tokens: tuple[TokenRecord, ...]

    def validate(self, l: int, vocab_size: int | None, line: int | None = None):
        seen = set()
        for tok in self.tokens:
            tok.validate(vocab_size, line)
            if tok.position > l:
                raise FormatError(f"position {tok.position} > l={l}", line)
            if tok.position in seen:
                raise FormatError(f"duplicate position {tok.position} at step {self.step}", line)
            seen.add(tok.position)


@dataclass(frozen=True)
class RawTrajectory:
    id: str
    question: str
    response: str
    query_embedding: tuple[float, ...]
    label: Label
    steps: tuple[StepRecord, ...]
    meta: dict[str, str] = field(default_factory=dict)

    def validate(self, header: "DatasetHeader", line: int | None = None):
        if len(self.query_embedding) != header.d_q:
            raise FormatError(
                f"query_embedding length {len(self.query_embedding)} != d_q={header.d_q}",
                line,
            )
        if len(self.steps) != header.T + 1:
            raise FormatError(
                f"expected {header.T + 1} steps, got {len(self.steps)}", line
            )
        expected = header.T
        for sr in self.steps:
            if sr.step != expected:
                raise FormatError(
                    f"steps not descending: expected step {expected}, got {sr.step}", line
                )
            expected -= 1
            sr.validate(header.l, header.vocab_size, line)


@dataclass(frozen=True)
class DatasetHeader:
    d_q: int
    T: int
    l: int
    vocab_size: int | None = None
    schema_version: str = SCHEMA_VERSION

    def validate(self):
        if self.d_q <= 0:
            raise FormatError(f"d_q must be positive, got {self.d_q}", line=1)
        if self.T < 1:
            raise FormatError(f"T must be >= 1, got {self.T}", line=1)
        if self.l < 1:
            raise FormatError(f"l must be >= 1, got {self.l}", line=1)
        if self.vocab_size is not None and self.vocab_size < 2:
            raise FormatError(f"vocab_size must be >= 2, got {self.vocab_size}", line=1)


def _open_read(path) -> IO[str]:
    with open(path, "rb") as probe:
        magic = probe.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def _open_write(path) -> IO[str]:
    if str(path).endswith(".gz"):
        return gzip.open(path, "wt", encoding="utf-8")
    return open(path, "w", encoding="utf-8")


def _token_to_json(tok: TokenRecord) -> dict:
    return {
        "position": tok.position,
        "token_text": tok.token_text,
        "token_class": tok.token_class,
        "entropy": tok.entropy,
    }


def _token_from_json(obj: dict, line: int) -> TokenRecord:
    try:
        return TokenRecord(
            position=int(obj["position"]),
            token_text=str(obj.get("token_text", "")),
            token_class=str(obj["token_class"]),
            entropy=float(obj["entropy"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad token record: {exc}", line) from exc


def trajectory_to_json(traj: RawTrajectory) -> dict:
    return {
        "id": traj.id,
        "question": traj.question,
        "response": traj.response,
        "query_embedding": list(traj.query_embedding),
        "label": traj.label.to_json(),
        "steps": [
            {"step": sr.step, "tokens": [_token_to_json(t) for t in sr.tokens]}
            for sr in traj.steps
        ],
        "meta": dict(traj.meta),
    }


def trajectory_from_json(obj: dict, line: int) -> RawTrajectory:
    try:
        steps = tuple(
            StepRecord(
                step=int(sr["step"]),
                tokens=tuple(_token_from_json(t, line) for t in sr["tokens"]),
            )
            for sr in obj["steps"]
        )
        return RawTrajectory(
            id=str(obj["id"]),
            question=str(obj.get("question", "")),
            response=str(obj.get("response", "")),
            query_embedding=tuple(float(x) for x in obj["query_embedding"]),
            label=Label.from_json(obj.get("label")),
            steps=steps,
            meta={str(k): str(v) for k, v in obj.get("meta", {}).items()},
        )
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad trajectory record: {exc}", line) from exc


def read_dataset(path) -> tuple[DatasetHeader, list[RawTrajectory]]:
    """Parse and fully validate a dataset file.

    Every record either parses with all invariants holding or raises a
    :class:`FormatError` carrying the 1-based line number.
    """
    trajectories: list[RawTrajectory] = []
    with _open_read(path) as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise FormatError("missing header line", line=1)
        try:
            hobj = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"malformed header: {exc}", line=1) from exc
        try:
            header = DatasetHeader(
                d_q=int(hobj["d_q"]),
                T=int(hobj["T"]),
                l=int(hobj["l"]),
                vocab_size=(None if hobj.get("vocab_size") is None else int(hobj["vocab_size"])),
                schema_version=str(hobj.get("schema_version", SCHEMA_VERSION)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad header: {exc}", line=1) from exc
        header.validate()

        for lineno, raw in enumerate(fh, start=2):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(f"malformed record: {exc}", lineno) from exc
            traj = trajectory_from_json(obj, lineno)
            traj.validate(header, lineno)
            trajectories.append(traj)
    return header, trajectories


def write_dataset(header: DatasetHeader, trajectories: Iterable[RawTrajectory], path) -> None:
    """Write a dataset file; all invariants are checked before anything is written."""
    header.validate()
    trajs = list(trajectories)
    for traj in trajs:
        traj.validate(header)
    with _open_write(path) as fh:
        hobj = {
            "d_q": header.d_q,
            "T": header.T,
            "l": header.l,
            "vocab_size": header.vocab_size,
            "schema_version": header.schema_version,
        }
        fh.write(json.dumps(hobj) + "\n")
        for traj in trajs:
            fh.write(json.dumps(trajectory_to_json(traj)) + "\n")
