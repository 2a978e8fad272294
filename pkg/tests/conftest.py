import numpy as np
import pytest

from trajdet import simulate, training
from trajdet.filtering import IgnoreSpec
from trajdet.trajectory import (
    DatasetHeader,
    Label,
    RawTrajectory,
    StepRecord,
    TokenRecord,
)


def make_trajectory(entropies_by_step, traj_id="t0", d_q=2, label=Label.FACTUAL,
                    token_class="semantic"):
    """Build a RawTrajectory from {step: [entropy, ...]} with synthetic tokens."""
    steps = []
    for t in sorted(entropies_by_step, reverse=True):
        tokens = tuple(
            TokenRecord(i + 1, f"w{i + 1}", token_class, float(e))
            for i, e in enumerate(entropies_by_step[t])
        )
        steps.append(StepRecord(step=t, tokens=tokens))
    return RawTrajectory(
        id=traj_id,
        question="q",
        response="r",
        query_embedding=(0.0,) * d_q,
        label=label,
        steps=tuple(steps),
        meta={},
    )


@pytest.fixture(scope="session")
def small_dataset():
    header, trajs = simulate.simulate_dataset(
        simulate.default_regimes(), 120, 120, T=16, l=32, seed=11
    )
    return header, trajs


@pytest.fixture(scope="session")
def small_samples(small_dataset):
    _, trajs = small_dataset
    return training.prepare_samples(trajs, IgnoreSpec())


@pytest.fixture
def rng():
    return np.random.default_rng(0)
