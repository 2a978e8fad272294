"""Command-line entry point wiring all modules into reproducible pipelines.

Exit codes: 0 success, 2 usage error, 3 missing file, 4 validation/format
error, 1 anything else. Errors print a single machine-parseable line to
stderr: ``error:<code>:<message>``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evidence, simulate, training
from .detector import DeviationDetector
from .diffnet import load_checkpoint, save_checkpoint
from .filtering import IgnoreSpec, filter_counts
from .reference import ReferenceGenerator, train_reference
from .trajectory import FormatError, read_dataset, write_dataset

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_INVALID = 4

DATA_DIR_ENV = "TRAJDET_DATA_DIR"


def _resolve_data_path(path: str) -> str:
    if os.path.exists(path):
        return path
    base = os.environ.get(DATA_DIR_ENV)
    if base:
        candidate = os.path.join(base, path)
        if os.path.exists(candidate):
            return candidate
    raise FileNotFoundError(path)


def _load_spec(args) -> IgnoreSpec:
    if getattr(args, "no_filter", False):
        return IgnoreSpec.empty()
    if getattr(args, "ignore_config", None):
        return IgnoreSpec.from_file(_resolve_data_path(args.ignore_config))
    return IgnoreSpec()


def _load_config(args) -> training.TrainConfig:
    if getattr(args, "config", None):
        with open(_resolve_data_path(args.config), "r", encoding="utf-8") as fh:
            cfg = training.TrainConfig.from_json(json.load(fh))
    else:
        cfg = training.TrainConfig()
    # flags win over file values
    for flag, attr in [
        ("seed", "seed"), ("k", "k"), ("lambda1", "lambda1"), ("lambda2", "lambda2"),
        ("quantile", "quantile_level"), ("beta", "beta"), ("warmup", "warmup_fraction"),
    ]:
        v = getattr(args, flag, None)
        if v is not None:
            setattr(cfg, attr, v)
    if getattr(args, "standardize", False):
        cfg.standardize = True
    cfg.validate()
    return cfg


def _load_samples(args, cfg_k: int):
    spec = _load_spec(args)
    _, trajs = read_dataset(_resolve_data_path(args.data))
    return training.prepare_samples(trajs, spec, cfg_k)


def _cmd_simulate(args) -> int:
    if args.regimes:
        obj = simulate.load_regimes_file(_resolve_data_path(args.regimes))
        regimes = obj["regimes"] or simulate.default_regimes(obj.get("d_q", 8))
        header, trajs = simulate.simulate_dataset(
            regimes,
            n_factual=obj.get("n_factual", args.n_factual),
            n_hallucinated=obj.get("n_hallucinated", args.n_hallucinated),
            T=obj.get("T", args.steps),
            l=obj.get("l", args.length),
            d_q=obj.get("d_q", 8),
            seed=args.seed if args.seed is not None else obj.get("seed", 0),
        )
    else:
        header, trajs = simulate.simulate_dataset(
            simulate.default_regimes(),
            n_factual=args.n_factual,
            n_hallucinated=args.n_hallucinated,
            T=args.steps,
            l=args.length,
            seed=args.seed if args.seed is not None else 0,
        )
    write_dataset(header, trajs, args.out)
    print(f"wrote {len(trajs)} trajectories to {args.out}")
    return EXIT_OK


def _cmd_evidence(args) -> int:
    spec = _load_spec(args)
    _, trajs = read_dataset(_resolve_data_path(args.data))
    evidence.write_evidence_csv(trajs, spec, args.k or evidence.DEFAULT_TOP_K, args.out)
    print(f"wrote evidence CSV to {args.out}")
    return EXIT_OK


def _cmd_filter_stats(args) -> int:
    spec = _load_spec(args)
    _, trajs = read_dataset(_resolve_data_path(args.data))
    counts: dict[str, int] = {}
    for traj in trajs:
        for cat, n in filter_counts(traj.steps, spec).items():
            counts[cat] = counts.get(cat, 0) + n
    for cat in sorted(counts):
        print(f"{cat}\t{counts[cat]}")
    return EXIT_OK


def _cmd_train_ref(args) -> int:
    cfg = _load_config(args)
    samples = _load_samples(args, cfg.k)
    factual = [s for s in samples if s.label.value == 0]
    rng = np.random.default_rng(cfg.seed)
    gen = ReferenceGenerator.create(factual[0].q.shape[0], t_dim=cfg.t_dim, rng=rng)
    history = train_reference(gen, factual, cfg.stage1, rng)
    save_checkpoint(gen.to_json(), args.out)
    print(f"stage-1 final loss {history[-1]:.6f}; checkpoint at {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    samples = _load_samples(args, cfg.k)
    gen, det, report = training.run_two_stage(cfg, samples)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(gen.to_json(), out / "generator.json")
    save_checkpoint(det.to_json(), out / "detector.json")
    (out / "report.json").write_text(report.dumps(), encoding="utf-8")
    with open(out / "epochs.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "l_cls", "l_path", "l_reb", "total",
                         "m_path", "m_reb", "val_auroc"])
        s2 = report.stage2
        for i in range(len(s2["total"])):
            writer.writerow([i + 1] + [repr(s2[k][i]) for k in
                                       ["l_cls", "l_path", "l_reb", "total",
                                        "m_path", "m_reb", "val_auroc"]])
    print(f"test AUROC {report.test_auroc:.4f} (epoch {report.selected_epoch}); "
          f"artifacts in {out}")
    return EXIT_OK


def _load_model(model_dir):
    model_dir = Path(_resolve_data_path(str(model_dir)))
    gen = ReferenceGenerator.from_json(load_checkpoint(model_dir / "generator.json"))
    det = DeviationDetector.from_json(load_checkpoint(model_dir / "detector.json"))
    report_path = model_dir / "report.json"
    standardization = None
    if report_path.exists():
        standardization = json.loads(report_path.read_text(encoding="utf-8")).get("standardization")
    return gen, det, standardization


def _cmd_score(args) -> int:
    cfg = _load_config(args)
    gen, det, standardization = _load_model(args.model)
    samples = _load_samples(args, cfg.k)
    if standardization is not None:
        samples = training._apply_standardization(samples, standardization)
    X, G, R, _ = training._detector_inputs(samples, gen)
    out = det.score_batch(X, G, R)
    T1 = X.shape[1]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "prob", "s_path", "s_reb"]
                        + [f"omega_t{T1 - 1 - i}" for i in range(T1)])
        for i, s in enumerate(samples):
            writer.writerow([s.id, repr(float(out["prob"][i])),
                             repr(float(out["s_path"][i])), repr(float(out["s_reb"][i]))]
                            + [repr(float(v)) for v in out["omega"][i]])
    print(f"wrote scores for {len(samples)} samples to {args.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg = _load_config(args)
    gen, det, standardization = _load_model(args.model)
    samples = _load_samples(args, cfg.k)
    value = training.evaluate(gen, det, samples, standardization)
    print(f"AUROC {value:.6f}")
    return EXIT_OK


def _cmd_gridsearch(args) -> int:
    cfg = _load_config(args)
    with open(_resolve_data_path(args.grid), "r", encoding="utf-8") as fh:
        grid = json.load(fh)
    samples = _load_samples(args, cfg.k)
    best_cfg, results = training.grid_search(grid, cfg, samples)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "best_config.json").write_text(
        json.dumps(best_cfg.to_json(), indent=1, sort_keys=True), encoding="utf-8")
    (out / "grid_reports.json").write_text(
        json.dumps([{"config": c.to_json(), "val_auroc": r.val_auroc,
                     "test_auroc": r.test_auroc} for c, r in results],
                   indent=1, sort_keys=True),
        encoding="utf-8")
    print(f"{len(results)} runs; best val AUROC "
          f"{max(r.val_auroc for _, r in results):.4f}; results in {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajdet",
                                     description="Denoising-trajectory hallucination detection")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("--data", required=True)
        p.add_argument("--config")
        p.add_argument("--seed", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--lambda1", type=float)
        p.add_argument("--lambda2", type=float)
        p.add_argument("--quantile", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--warmup", type=float)
        p.add_argument("--standardize", action="store_true")
        p.add_argument("--ignore-config")
        p.add_argument("--no-filter", action="store_true")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("simulate", help="generate a synthetic labeled dataset")
    p.add_argument("--regimes")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-factual", type=int, default=1000)
    p.add_argument("--n-hallucinated", type=int, default=1000)
    p.add_argument("--steps", type=int, default=16)
    p.add_argument("--length", type=int, default=32)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evidence", help="dump evidence trajectories as CSV")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evidence)

    p = sub.add_parser("filter-stats", help="per-category filter counts")
    common(p)
    p.set_defaults(func=_cmd_filter_stats)

    p = sub.add_parser("train-ref", help="stage 1 only: fit the reference generator")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_ref)

    p = sub.add_parser("train", help="full two-stage training")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("score", help="score samples with a trained model")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("eval", help="AUROC of a trained model on labeled data")
    common(p)
    p.add_argument("--model", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gridsearch", help="exhaustive hyperparameter grid")
    common(p)
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gridsearch)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error:{EXIT_MISSING}:file not found: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (FormatError, ValueError) as exc:
        print(f"error:{EXIT_INVALID}:{exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"error:1:{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
