"""CLI mirroring the primary tool's conventions.

Exit codes: 0 success, 2 usage error, 3 missing file, 4 validation error,
1 anything else; errors print ``error:<code>:<message>`` to stderr.
"""

from __future__ import annotations

import argparse
import sys

from .capture import CaptureSession, capture, load_questions, merge_labels
from .model import ToyMaskedDiffusionModel

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_INVALID = 4


def _cmd_capture(args) -> int:
    model = ToyMaskedDiffusionModel(d_model=args.d_model, seed=args.seed)
    session = CaptureSession(
        model=model,
        model_id=args.model_id,
        T=args.steps,
        l=args.length,
        remask_strategy=args.remask,
        capture_point=args.capture_point,
        query_layer=args.layer,
        sidecar_path=args.dump_distributions,
    )
    questions = load_questions(args.questions)
    if args.labels:
        questions = merge_labels(questions, args.labels)
    n = capture(questions, session, args.out)
    print(f"captured {n} trajectories to {args.out}")
    if args.dump_distributions:
        print(f"distribution sidecar at {args.dump_distributions} (verified)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracecap",
        description="Capture entropy trajectories from a toy masked-diffusion model")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capture", help="run the model over a question file")
    p.add_argument("--questions", required=True,
                   help="JSONL of {id, question, label?}")
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="optional {id: label} JSON to merge")
    p.add_argument("--steps", type=int, default=12)
    p.add_argument("--length", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-model", type=int, default=8)
    p.add_argument("--capture-point", choices=["pre_remask", "post_remask"],
                   default="pre_remask")
    p.add_argument("--remask", choices=["entropy", "confidence"], default="entropy")
    p.add_argument("--layer", type=int, default=1,
                   help="hidden layer pooled into the query embedding")
    p.add_argument("--model-id", default="toy-masked-diffusion")
    p.add_argument("--dump-distributions",
                   help="write an npz sidecar of all captured distributions")
    p.set_defaults(func=_cmd_capture)
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
    except ValueError as exc:
        print(f"error:{EXIT_INVALID}:{exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"error:1:{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
