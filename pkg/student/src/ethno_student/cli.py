"""Command-line entry points: ethno-student train | predict.

Exit codes: 0 success, 1 runtime failure (bad data, bad config, missing
files), 2 usage error. Runtime failures print one line to stderr.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import load_config
from .data import load_scheme
from .errors import StudentError
from .inference import predict_test
from .training import train_student


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ethno-student",
        description="Fine-tune a small byte-level language model on exported teacher labels.",
    )
    parser.add_argument("--version", action="version", version=f"ethno-student {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fine-tune on an exported train file")
    train.add_argument("--train", required=True, help="train JSONL exported by the teacher pipeline")
    train.add_argument("--config", required=True, help="trainer config JSON")
    train.add_argument("--scheme", required=True, help="label scheme JSON")
    train.add_argument("--adapter-dir", required=True, help="directory to write the adapter artifact")
    train.add_argument("--quiet", action="store_true", help="suppress stdout")

    predict = sub.add_parser("predict", help="predict labels for a test file")
    predict.add_argument("--test", required=True, help="test JSONL exported by the teacher pipeline")
    predict.add_argument("--config", required=True, help="trainer config JSON")
    predict.add_argument("--scheme", required=True, help="label scheme JSON")
    predict.add_argument("--out", required=True, help="where to write prediction JSONL")
    predict.add_argument(
        "--adapter-dir",
        default=None,
        help="adapter artifact to load; omit for base zero-shot predictions",
    )
    predict.add_argument("--quiet", action="store_true", help="suppress stdout")
    return parser


def _say(args: argparse.Namespace, message: str) -> None:
    if not args.quiet:
        print(message)


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    scheme = load_scheme(args.scheme)
    log = train_student(args.train, cfg, scheme, args.adapter_dir)
    _say(
        args,
        f"trained {log.n_rows} rows for {len(log.losses)} epochs: "
        f"loss {log.losses[0]:.4f} -> {log.losses[-1]:.4f}",
    )
    _say(args, f"adapter written to {args.adapter_dir}")
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    scheme = load_scheme(args.scheme)
    predictions = predict_test(args.test, args.adapter_dir, cfg, scheme, args.out)
    mode = "base" if args.adapter_dir is None else "fine-tuned"
    _say(args, f"wrote {len(predictions)} {mode} predictions to {args.out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "predict": _cmd_predict,
}


def dispatch(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (StudentError, OSError, ValueError) as exc:
        print(f"ethno-student: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())
