import gzip
import json

import pytest

from conftest import make_trajectory
from trajdet.trajectory import (
    DatasetHeader,
    FormatError,
    Label,
    RawTrajectory,
    StepRecord,
    TokenRecord,
    read_dataset,
    write_dataset,
)


def simple_header(**kw):
    defaults = dict(d_q=2, T=2, l=3)
    defaults.update(kw)
    return DatasetHeader(**defaults)


def simple_traj():
    return make_trajectory({2: [0.5, 1.0, 0.2], 1: [0.4, 0.9, 0.1], 0: [0.3, 0.8, 0.05]})


def test_round_trip(tmp_path):
    header = simple_header()
    traj = simple_traj()
    path = tmp_path / "d.jsonl"
    write_dataset(header, [traj], path)
    h2, trajs = read_dataset(path)
    assert h2 == header
    assert trajs == [traj]


def test_round_trip_gzip(tmp_path):
    header = simple_header()
    traj = simple_traj()
    path = tmp_path / "d.jsonl.gz"
    write_dataset(header, [traj], path)
    with open(path, "rb") as fh:
        assert fh.read(2) == b"\x1f\x8b"
    h2, trajs = read_dataset(path)
    assert trajs == [traj]


def test_empty_dataset(tmp_path):
    path = tmp_path / "empty.jsonl"
    write_dataset(simple_header(), [], path)
    assert len(path.read_text().strip().splitlines()) == 1
    h2, trajs = read_dataset(path)
    assert trajs == []


def test_ascending_steps_rejected(tmp_path):
    traj = simple_traj()
    bad = RawTrajectory(
        id=traj.id, question=traj.question, response=traj.response,
        query_embedding=traj.query_embedding, label=traj.label,
        steps=tuple(reversed(traj.steps)), meta={},
    )
    with pytest.raises(FormatError, match="descending"):
        write_dataset(simple_header(), [bad], tmp_path / "x.jsonl")


def test_embedding_dimension_mismatch(tmp_path):
    traj = make_trajectory({2: [0.5], 1: [0.4], 0: [0.3]}, d_q=3)
    with pytest.raises(FormatError, match="d_q"):
        write_dataset(simple_header(l=1), [traj], tmp_path / "x.jsonl")


def test_negative_entropy_rejected(tmp_path):
    traj = make_trajectory({2: [0.5, -0.1, 0.2], 1: [0.1] * 3, 0: [0.1] * 3})
    with pytest.raises(FormatError, match="entropy"):
        write_dataset(simple_header(), [traj], tmp_path / "x.jsonl")


def test_entropy_above_vocab_bound_rejected(tmp_path):
    traj = make_trajectory({2: [9.0, 0.1, 0.2], 1: [0.1] * 3, 0: [0.1] * 3})
    with pytest.raises(FormatError, match="vocab"):
        write_dataset(simple_header(vocab_size=100), [traj], tmp_path / "x.jsonl")


def test_read_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"
    write_dataset(simple_header(), [simple_traj()], path)
    lines = path.read_text().splitlines()
    lines.append("{not json")
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError, match="line 3"):
        read_dataset(path)


def test_read_rejects_duplicate_positions(tmp_path):
    path = tmp_path / "dup.jsonl"
    write_dataset(simple_header(), [simple_traj()], path)
    lines = path.read_text().splitlines()
    obj = json.loads(lines[1])
    obj["steps"][0]["tokens"][1]["position"] = 1
    lines[1] = json.dumps(obj)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError, match="duplicate position"):
        read_dataset(path)


def test_label_round_trip(tmp_path):
    for label in (Label.FACTUAL, Label.HALLUCINATED, Label.UNLABELED):
        traj = make_trajectory({2: [0.1], 1: [0.1], 0: [0.1]}, label=label)
        path = tmp_path / f"{label.name}.jsonl"
        write_dataset(simple_header(l=1), [traj], path)
        _, trajs = read_dataset(path)
        assert trajs[0].label == label


def test_float_precision_round_trip(tmp_path):
    e = 0.12345678912345678
    traj = make_trajectory({2: [e], 1: [e / 3], 0: [e / 7]})
    path = tmp_path / "p.jsonl"
    write_dataset(simple_header(l=1), [traj], path)
    _, trajs = read_dataset(path)
    got = trajs[0].steps[0].tokens[0].entropy
    assert got == e  # json repr round-trips floats exactly


def test_header_invariants():
    with pytest.raises(FormatError):
        DatasetHeader(d_q=0, T=2, l=3).validate()
    with pytest.raises(FormatError):
        DatasetHeader(d_q=2, T=0, l=3).validate()
    with pytest.raises(FormatError):
        DatasetHeader(d_q=2, T=2, l=0).validate()
