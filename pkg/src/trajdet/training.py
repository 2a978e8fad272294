"""Two-stage training, AUROC evaluation, and grid search."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.stats import rankdata

from .detector import DeviationDetector, Hyper, composite_features, path_gaps, rebound_terms
from .diffnet import AdamW
from .evidence import DEFAULT_TOP_K, build_trajectory
from .filtering import IgnoreSpec
from .reference import ReferenceGenerator, train_reference
from .trajectory import Label, RawTrajectory


@dataclass
class Sample:
    """One question-response pair ready for training: query embedding, label,
    and the observed evidence matrix (T+1, 3) in descending step order."""

    id: str
    q: np.ndarray
    label: Label
    evidence_matrix: np.ndarray
    kept_counts: tuple[int, ...] = ()


def prepare_samples(trajectories: list[RawTrajectory], spec: IgnoreSpec,
                    k: int = DEFAULT_TOP_K) -> list[Sample]:
    samples = []
    for raw in trajectories:
        ev = build_trajectory(raw, spec, k)
        samples.append(
            Sample(
                id=raw.id,
                q=np.asarray(raw.query_embedding, dtype=np.float64),
                label=raw.label,
                evidence_matrix=ev.as_array(),
                kept_counts=ev.kept_counts,
            )
        )
    return samples


@dataclass
class StageConfig:
    lr: float = 1e-3
    wd: float = 0.01
    epochs: int = 120
    batch: int = 64

    def validate(self):
        if self.lr <= 0 or self.epochs < 1 or self.batch < 1 or self.wd < 0:
            raise ValueError(f"invalid stage config {self}")


@dataclass
class TrainConfig:
    stage1: StageConfig = field(default_factory=StageConfig)
    stage2: StageConfig = field(default_factory=lambda: StageConfig(lr=1e-3, wd=1e-4, epochs=60))
    lambda1: float = 0.2
    lambda2: float = 0.2
    warmup_fraction: float = 0.0
    quantile_level: float = 0.9
    beta: float = 0.1
    seed: int = 0
    k: int = DEFAULT_TOP_K
    split: tuple[int, int, int] = (1400, 300, 300)
    standardize: bool = False
    hidden: int = 64
    attn_dim: int = 32
    t_dim: int = 16

    def validate(self):
        self.stage1.validate()
        self.stage2.validate()
        if not (0.0 <= self.warmup_fraction <= 1.0):
            raise ValueError("warmup_fraction must be in [0, 1]")
        if any(s <= 0 for s in self.split):
            raise ValueError("split sizes must be positive")
        Hyper(self.lambda1, self.lambda2, self.beta, self.quantile_level).validate()

    def to_json(self) -> dict:
        d = asdict(self)
        d["split"] = list(self.split)
        return d

    @staticmethod
    def from_json(obj: dict) -> "TrainConfig":
        obj = dict(obj)
        s1 = StageConfig(**obj.pop("stage1", {}))
        s2 = obj.pop("stage2", None)
        s2 = StageConfig(**s2) if s2 is not None else StageConfig(lr=1e-3, wd=1e-4, epochs=60)
        split = tuple(obj.pop("split", (1400, 300, 300)))
        cfg = TrainConfig(stage1=s1, stage2=s2, split=split, **obj)
        cfg.validate()
        return cfg


@dataclass
class RunReport:
    config: dict
    stage1_loss: list[float]
    stage2: dict  # per-epoch lists: l_cls, l_path, l_reb, total, m_path, m_reb, val_auroc
    selected_epoch: int
    val_auroc: float
    test_auroc: float
    standardization: dict | None = None

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "stage1_loss": self.stage1_loss,
            "stage2": self.stage2,
            "selected_epoch": self.selected_epoch,
            "val_auroc": self.val_auroc,
            "test_auroc": self.test_auroc,
            "standardization": self.standardization,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


def auroc(scores, labels) -> float:
    """Rank-based (Mann-Whitney) AUROC with mid-rank tie handling.

    Positive class is y=1 (hallucinated); higher score = more hallucinated.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC undefined: both classes must be present")
    ranks = rankdata(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def split_samples(samples: list[Sample], split: tuple[int, int, int],
                  rng: np.random.Generator) -> tuple[list[Sample], list[Sample], list[Sample]]:
    n_train, n_val, n_test = split
    if n_train + n_val + n_test > len(samples):
        raise ValueError(
            f"split {split} needs {n_train + n_val + n_test} samples, have {len(samples)}"
        )
    order = rng.permutation(len(samples))
    pick = [samples[i] for i in order]
    return pick[:n_train], pick[n_train:n_train + n_val], pick[n_train + n_val:n_train + n_val + n_test]


def _standardization_stats(train_factual: list[Sample]) -> dict:
    ev = np.concatenate([s.evidence_matrix for s in train_factual], axis=0)
    mean = ev.mean(axis=0)
    std = ev.std(axis=0)
    std[std < 1e-12] = 1.0
    return {"mean": mean.tolist(), "std": std.tolist()}


def _apply_standardization(samples: list[Sample], stats: dict) -> list[Sample]:
    mean = np.array(stats["mean"])
    std = np.array(stats["std"])
    return [
        Sample(s.id, s.q, s.label, (s.evidence_matrix - mean) / std, s.kept_counts)
        for s in samples
    ]


def _detector_inputs(samples: list[Sample], gen: ReferenceGenerator):
    """Stack composite features, path gaps, rebound terms, labels."""
    X, G, R, y = [], [], [], []
    T = samples[0].evidence_matrix.shape[0] - 1
    for s in samples:
        ref = gen.predict_matrix(s.q, T)
        X.append(composite_features(s.evidence_matrix, ref))
        G.append(path_gaps(s.evidence_matrix, ref))
        R.append(rebound_terms(s.evidence_matrix))
        y.append(1 if s.label == Label.HALLUCINATED else 0)
    return np.stack(X), np.stack(G), np.stack(R), np.array(y)


def _snapshot(det: DeviationDetector) -> list[np.ndarray]:
    return [p.copy() for p in det.parameters()]


def _restore(det: DeviationDetector, snap: list[np.ndarray]) -> None:
    for p, s in zip(det.parameters(), snap):
        p[:] = s


def run_two_stage(config: TrainConfig, samples: list[Sample],
                  spec: IgnoreSpec | None = None):
    """Full two-stage training with validation-based selection.

    Returns (generator, detector, RunReport). ``samples`` already carry
    evidence matrices; ``spec`` is unused here and accepted for symmetry.
    """
    config.validate()
    ss = np.random.SeedSequence(config.seed)
    seeds = ss.spawn(6)
    rng_split = np.random.default_rng(seeds[0])
    rng_init = np.random.default_rng(seeds[1])
    rng_s1 = np.random.default_rng(seeds[2])
    rng_s2 = np.random.default_rng(seeds[3])

    train, val, test = split_samples(samples, config.split, rng_split)
    train_labels = {s.label for s in train}
    if not {Label.FACTUAL, Label.HALLUCINATED} <= train_labels:
        raise ValueError("train split must contain both factual and hallucinated samples")

    factual_train = [s for s in train if s.label == Label.FACTUAL]

    standardization = None
    if config.standardize:
        standardization = _standardization_stats(factual_train)
        train = _apply_standardization(train, standardization)
        val = _apply_standardization(val, standardization)
        test = _apply_standardization(test, standardization)
        factual_train = [s for s in train if s.label == Label.FACTUAL]

    d_q = train[0].q.shape[0]

    # Stage 1: reference generator on factual samples only
    gen = ReferenceGenerator.create(d_q, t_dim=config.t_dim, rng=rng_init)
    stage1_loss = train_reference(gen, factual_train, config.stage1, rng_s1)

    # Stage 2: detector against the frozen generator
    det = DeviationDetector(
        hidden=config.hidden,
        attn_dim=config.attn_dim,
        hyper=Hyper(config.lambda1, config.lambda2, config.beta, config.quantile_level),
        rng=rng_init,
    )
    opt = AdamW(det.parameters(), lr=config.stage2.lr, weight_decay=config.stage2.wd)

    Xtr, Gtr, Rtr, ytr = _detector_inputs(train, gen)
    Xva, Gva, Rva, yva = _detector_inputs(val, gen)
    Xte, Gte, Rte, yte = _detector_inputs(test, gen)

    n = len(train)
    E2 = config.stage2.epochs
    warm_epochs = math.ceil(config.warmup_fraction * E2)
    hist = {"l_cls": [], "l_path": [], "l_reb": [], "total": [],
            "m_path": [], "m_reb": [], "val_auroc": []}
    best = (-1.0, -1, None)
    for epoch in range(1, E2 + 1):
        ramp = min(1.0, epoch / warm_epochs) if warm_epochs > 0 else 1.0
        lam1 = config.lambda1 * ramp
        lam2 = config.lambda2 * ramp
        order = rng_s2.permutation(n)
        acc = {"l_cls": 0.0, "l_path": 0.0, "l_reb": 0.0, "total": 0.0}
        n_batches = 0
        for start in range(0, n, config.stage2.batch):
            idx = order[start:start + config.stage2.batch]
            Xb, Gb, Rb, yb = Xtr[idx], Gtr[idx], Rtr[idx], ytr[idx]
            # margins first, from the current batch's factual subset
            pre = det.score_batch(Xb, Gb, Rb)
            fmask = yb == 0
            det.update_margins(pre["s_path"][fmask], pre["s_reb"][fmask])
            det.zero_grad()
            out = det.batch_loss_and_grads(Xb, Gb, Rb, yb, lam1, lam2)
            opt.step(det.gradients())
            for key in acc:
                acc[key] += out[key]
            n_batches += 1
        for key in acc:
            hist[key].append(acc[key] / n_batches)
        hist["m_path"].append(det.margins.m_path)
        hist["m_reb"].append(det.margins.m_reb)
        val_scores = det.score_batch(Xva, Gva, Rva)["prob"]
        va = auroc(val_scores, yva)
        hist["val_auroc"].append(va)
        if va > best[0]:
            best = (va, epoch, _snapshot(det))

    val_auroc, selected_epoch, snap = best
    _restore(det, snap)
    test_scores = det.score_batch(Xte, Gte, Rte)["prob"]
    test_auroc = auroc(test_scores, yte)

    report = RunReport(
        config=config.to_json(),
        stage1_loss=stage1_loss,
        stage2=hist,
        selected_epoch=selected_epoch,
        val_auroc=val_auroc,
        test_auroc=test_auroc,
        standardization=standardization,
    )
    return gen, det, report


def evaluate(gen: ReferenceGenerator, det: DeviationDetector, samples: list[Sample],
             standardization: dict | None = None) -> float:
    """Score a labeled sample set with a trained model (no retraining)."""
    for s in samples:
        if s.label == Label.UNLABELED:
            raise ValueError(f"sample {s.id!r} is unlabeled; evaluation needs labels")
    if standardization is not None:
        samples = _apply_standardization(samples, standardization)
    X, G, R, y = _detector_inputs(samples, gen)
    scores = det.score_batch(X, G, R)["prob"]
    return auroc(scores, y)


cross_eval = evaluate


DEFAULT_GRID = {
    "stage1.lr": [3e-4, 1e-3],
    "stage2.lr": [1e-4, 3e-4, 1e-3],
    "stage1.wd": [0.0, 0.01, 0.05],
    "stage2.wd": [0.0, 1e-4, 1e-3],
    "lambda1": [round(0.05 * i, 2) for i in range(9)],
    "lambda2": [round(0.05 * i, 2) for i in range(9)],
    "warmup_fraction": [0.0, 0.3],
}


def _apply_override(cfg: TrainConfig, key: str, value) -> None:
    if "." in key:
        head, tail = key.split(".", 1)
        setattr(getattr(cfg, head), tail, value)
    else:
        setattr(cfg, key, value)


def grid_search(grid: dict, base_config: TrainConfig, samples: list[Sample]):
    """Exhaustive grid evaluation; returns (best_config, [(config, report), ...]).

    Selection: highest validation AUROC; ties broken by smaller lambda1+lambda2,
    then lower stage-2 learning rate.
    """
    if not grid:
        raise ValueError("empty grid")
    keys = sorted(grid.keys())
    results = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        cfg = TrainConfig.from_json(base_config.to_json())
        for key, value in zip(keys, combo):
            _apply_override(cfg, key, value)
        cfg.validate()
        _, _, report = run_two_stage(cfg, samples)
        results.append((cfg, report))
    best_cfg, _ = min(
        results,
        key=lambda cr: (-cr[1].val_auroc, cr[0].lambda1 + cr[0].lambda2, cr[0].stage2.lr),
    )
    return best_cfg, results
