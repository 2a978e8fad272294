"""Acceptance test for the capture adapter, printing a pass/fail line."""

import math

import numpy as np

from tracecap.capture import CaptureSession, Question, capture, verify_against_sidecar
from tracecap.model import ToyMaskedDiffusionModel, shannon_entropy
from trajdet.trajectory import Label, read_dataset


def report(name, ok):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}")
    assert ok, name


def test_adapter_contract(tmp_path):
    ok = True

    # closed forms
    one_hot = np.zeros(64)
    one_hot[5] = 1.0
    ok &= shannon_entropy(one_hot) == 0.0
    ok &= abs(shannon_entropy(np.full(100, 0.01)) - math.log(100)) < 1e-12

    # 10 captured trajectories validate under the canonical reader
    model = ToyMaskedDiffusionModel(seed=42)
    questions = [Question(f"q{i:02d}", f"what is the capital of tok{i} ?",
                          Label(i % 2)) for i in range(10)]
    out = tmp_path / "cap.jsonl"
    sidecar = tmp_path / "dists.npz"
    session = CaptureSession(model=model, T=10, l=16, sidecar_path=str(sidecar))
    capture(questions, session, out)
    header, trajs = read_dataset(out)
    ok &= len(trajs) == 10 and header.T == 10 and header.l == 16

    # recorded entropies match recomputation from the dumped distributions
    dumped = np.load(sidecar)
    worst = max(verify_against_sidecar(t, dumped[t.id]) for t in trajs)
    ok &= worst <= 1e-5

    report(f"adapter contract: 10 toy-model trajectories validate, entropy "
           f"recomputation gap {worst:.1e} <= 1e-5, one-hot/uniform closed forms", ok)
