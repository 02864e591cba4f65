"""Command-line interface over the classification and validation pipeline.

Subcommands: sample, classify, evaluate, aggregate-validate, audit-bias,
export-distill, score-student. Exit codes: 0 success, 1 data error,
2 usage error. Every run that writes outputs also writes a manifest.json
recording the argv, seed, SHA-256 digests of the input files, tool
version, and output paths, so silent input drift between runs is
detectable and a run can be reproduced from its manifest alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .bisg import classify_bisg, load_bisg_tables
from .distill import (
    DistillSplit,
    evaluate_student,
    export_teacher_set,
    load_distill_rows,
    load_student_predictions,
)
from .errors import EthnoError, GeoUnknown, PromptError
from .ingest import ingest_records, load_canonical_records, load_mapping, write_records_csv
from .llm import (
    BackendConfig,
    PromptConfig,
    ResponseCache,
    TemplateRegistry,
    classify_batch,
    build_prompt,
)
from .metrics import (
    aggregate_error,
    confusion_matrix,
    evaluate,
    income_bias_audit,
    render_aggregate_text,
    render_bias_text,
    render_eval_text,
    write_ventile_csv,
)
from .predictions import read_predictions, write_predictions
from .records import CategoryScheme, RecordSet, load_scheme
from .sampling import stratified_sample


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record for one CLI run."""

    command: str
    argv: tuple[str, ...]
    version: str
    seed: int | None
    inputs: Mapping[str, Mapping[str, str]]
    outputs: tuple[str, ...]
    timestamp: str

    def to_dict(self) -> dict[str, object]:
        return {
            "command": self.command,
            "argv": list(self.argv),
            "version": self.version,
            "seed": self.seed,
            "inputs": {name: dict(info) for name, info in self.inputs.items()},
            "outputs": list(self.outputs),
            "timestamp": self.timestamp,
        }


def _sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(
    command: str,
    argv: Sequence[str],
    seed: int | None,
    inputs: Mapping[str, str | Path],
    outputs: Sequence[str | Path],
    out_dir: str | None,
) -> Path:
    """Write manifest.json into out_dir, or beside the first output."""
    manifest = RunManifest(
        command=command,
        argv=tuple(argv),
        version=__version__,
        seed=seed,
        inputs={
            name: {"path": str(path), "sha256": _sha256_file(path)}
            for name, path in inputs.items()
        },
        outputs=tuple(str(path) for path in outputs),
        timestamp=datetime.now(timezone.utc).isoformat(),
    )
    if out_dir:
        directory = Path(out_dir)
    elif outputs:
        directory = Path(outputs[0]).resolve().parent
    else:
        directory = Path.cwd()
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "manifest.json"
    path.write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


def _say(args: argparse.Namespace, message: str) -> None:
    if not args.quiet:
        print(message)


def _ensure_parent(*paths: str | Path) -> None:
    for path in paths:
        Path(path).parent.mkdir(parents=True, exist_ok=True)


def _load_records(
    path: str, map_path: str | None, scheme: CategoryScheme, args: argparse.Namespace
) -> RecordSet:
    """Ingest records with an explicit mapping or a sniffed canonical one."""
    if map_path:
        record_set, report = ingest_records(path, load_mapping(map_path), scheme)
    else:
        record_set, report = load_canonical_records(path, scheme)
    _say(args, report.summary())
    return record_set


def _scheme_of(args: argparse.Namespace) -> CategoryScheme:
    return load_scheme(args.scheme)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    sub.add_argument("--out-dir", default=None, help="directory for manifest and outputs")
    sub.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub.add_argument("--cache-dir", default=None, help="response cache directory")


def _cmd_sample(args: argparse.Namespace, argv: Sequence[str]) -> int:
    scheme = _scheme_of(args)
    records = _load_records(args.input, args.map, scheme, args)
    sample = stratified_sample(records, args.stratum, args.n, args.seed)
    _ensure_parent(args.out)
    write_records_csv(sample, args.out)
    _say(args, f"wrote {len(sample)} sampled records to {args.out}")
    inputs = {"records": args.input, "scheme": args.scheme}
    if args.map:
        inputs["mapping"] = args.map
    _write_manifest("sample", argv, args.seed, inputs, [args.out], args.out_dir)
    return 0


def _classify_bisg(
    args: argparse.Namespace, scheme: CategoryScheme, records: RecordSet
) -> tuple[list, list[tuple[str, str]]]:
    surnames, geo = load_bisg_tables(args.surname_table, args.geo_table, scheme)
    geo_level = None if args.surname_only else args.geo_level
    predictions = []
    failures: list[tuple[str, str]] = []
    for record in records:
        try:
            predictions.append(classify_bisg(record, surnames, geo, scheme, geo_level))
        except GeoUnknown as exc:
            failures.append((record.id, str(exc)))
    return predictions, failures


def _cmd_classify(args: argparse.Namespace, argv: Sequence[str]) -> int:
    scheme = _scheme_of(args)
    records = _load_records(args.input, args.map, scheme, args)
    inputs = {"records": args.input, "scheme": args.scheme}
    if args.map:
        inputs["mapping"] = args.map

    if args.engine == "bisg":
        if not args.surname_table or not args.geo_table:
            print("error: --engine bisg requires --surname-table and --geo-table", file=sys.stderr)
            return 2
        if not args.surname_only and not args.geo_level:
            print("error: --engine bisg requires --geo-level or --surname-only", file=sys.stderr)
            return 2
        predictions, failures = _classify_bisg(args, scheme, records)
        if failures:
            for record_id, message in failures:
                print(f"row {record_id}: {message}", file=sys.stderr)
            print(f"error: {len(failures)} records could not be classified", file=sys.stderr)
            return 1
        inputs["surname_table"] = args.surname_table
        inputs["geo_table"] = args.geo_table
    else:
        if not args.model:
            print("error: --engine llm requires --model", file=sys.stderr)
            return 2
        registry = (
            TemplateRegistry.from_dir(args.template_dir)
            if args.template_dir
            else TemplateRegistry()
        )
        extras = frozenset(part for part in (args.extras or "").split(",") if part)
        pcfg = PromptConfig(
            scheme=scheme,
            name_mode=args.name_mode,
            include_geo=not args.no_geo,
            geo_level=args.geo_level,
            extra_features=extras,
            template_id=args.template_id,
        )
        failures = []
        for record in records:
            try:
                build_prompt(record, pcfg, registry)
            except PromptError as exc:
                failures.append((record.id, str(exc)))
        if failures:
            for record_id, message in failures:
                print(f"row {record_id}: {message}", file=sys.stderr)
            print(f"error: {len(failures)} records cannot fill the prompt", file=sys.stderr)
            return 1
        bcfg = BackendConfig(
            backend_id=args.backend,
            model_id=args.model,
            temperature=args.temperature,
            reasoning_level=args.reasoning,
            max_retries=args.max_retries,
            concurrency_limit=args.concurrency,
            timeout=args.timeout,
        )
        cache = ResponseCache(args.cache_dir) if args.cache_dir else None
        predictions, usage = classify_batch(records, pcfg, bcfg, cache, registry=registry)
        _say(
            args,
            f"calls={usage.calls} cache_hits={usage.cache_hits} "
            f"retries={usage.retries} unparseable={usage.unparseable}",
        )

    _ensure_parent(args.out)
    write_predictions(predictions, args.out)
    _say(args, f"wrote {len(predictions)} predictions to {args.out}")
    _write_manifest("classify", argv, args.seed, inputs, [args.out], args.out_dir)
    return 0


def _cmd_evaluate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    scheme = _scheme_of(args)
    truths = _load_records(args.truth, args.map, scheme, args)
    preds = read_predictions(args.preds)
    report = evaluate(confusion_matrix(preds, truths, scheme))
    _ensure_parent(args.out)
    Path(args.out).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _say(args, render_eval_text(report))
    inputs = {"predictions": args.preds, "truth": args.truth, "scheme": args.scheme}
    if args.map:
        inputs["mapping"] = args.map
    _write_manifest("evaluate", argv, args.seed, inputs, [args.out], args.out_dir)
    return 0


def _cmd_aggregate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    scheme = _scheme_of(args)
    preds = read_predictions(args.preds)
    census = json.loads(Path(args.census).read_text(encoding="utf-8"))
    if not isinstance(census, dict) or not census:
        raise EthnoError(f"{args.census}: expected a non-empty JSON object of label -> share")
    report = aggregate_error(preds, census, scheme)
    _ensure_parent(args.out)
    Path(args.out).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _say(args, render_aggregate_text(report))
    inputs = {"predictions": args.preds, "census": args.census, "scheme": args.scheme}
    _write_manifest("aggregate-validate", argv, args.seed, inputs, [args.out], args.out_dir)
    return 0


def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_").lower() or "category"


def _cmd_audit(args: argparse.Namespace, argv: Sequence[str]) -> int:
    scheme = _scheme_of(args)
    truths = _load_records(args.truth, args.map, scheme, args)
    preds = read_predictions(args.preds)
    report = income_bias_audit(preds, truths, scheme, args.engine_tag)
    out = Path(args.out)
    _ensure_parent(out)
    out.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    outputs: list[str | Path] = [out]
    for audit in report.per_race:
        if audit.ventiles is None:
            continue
        csv_path = out.parent / f"ventiles_{_safe_name(audit.label)}.csv"
        write_ventile_csv(audit, csv_path)
        outputs.append(csv_path)
    _say(args, render_bias_text(report))
    inputs = {"predictions": args.preds, "truth": args.truth, "scheme": args.scheme}
    if args.map:
        inputs["mapping"] = args.map
    _write_manifest("audit-bias", argv, args.seed, inputs, outputs, args.out_dir)
    return 0


def _cmd_export(args: argparse.Namespace, argv: Sequence[str]) -> int:
    scheme = _scheme_of(args)
    records = _load_records(args.input, args.map, scheme, args)
    preds = read_predictions(args.preds)
    _ensure_parent(args.train_out, args.test_out)
    _, report = export_teacher_set(
        records,
        preds,
        args.fraction,
        args.seed,
        args.train_out,
        args.test_out,
        stratify=args.stratify,
    )
    _say(
        args,
        f"usable={report.usable} excluded_unparseable={report.excluded_unparseable} "
        f"train={report.n_train} test={report.n_test}",
    )
    inputs = {"records": args.input, "teacher_predictions": args.preds, "scheme": args.scheme}
    if args.map:
        inputs["mapping"] = args.map
    _write_manifest(
        "export-distill", argv, args.seed, inputs, [args.train_out, args.test_out], args.out_dir
    )
    return 0


def _cmd_score_student(args: argparse.Namespace, argv: Sequence[str]) -> int:
    test_rows = load_distill_rows(args.test)
    split = DistillSplit(train=(), test=test_rows, seed=args.seed, fraction=0.0)
    teacher = load_student_predictions(args.teacher) if args.teacher else None
    report = evaluate_student(split, args.base, args.finetuned, teacher_preds=teacher)
    _ensure_parent(args.out)
    Path(args.out).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _say(
        args,
        f"teacher={report.teacher_accuracy:.4f} base={report.base_accuracy:.4f} "
        f"finetuned={report.finetuned_accuracy:.4f} gap={report.gap:+.2f}pp "
        f"agreement={report.agreement:.4f}",
    )
    inputs = {"test": args.test, "base": args.base, "finetuned": args.finetuned}
    if args.teacher:
        inputs["teacher"] = args.teacher
    _write_manifest("score-student", argv, args.seed, inputs, [args.out], args.out_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ethno",
        description="Name-based category classification and validation toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    sample = subparsers.add_parser("sample", help="draw a stratified sample")
    sample.add_argument("--in", dest="input", required=True, help="input records file")
    sample.add_argument("--map", default=None, help="column mapping JSON")
    sample.add_argument("--scheme", required=True, help="category scheme JSON")
    sample.add_argument("--stratum", required=True, help="stratum field (truth, gender, party, age, or a geography level)")
    sample.add_argument("--n", type=int, required=True, help="records per stratum")
    sample.add_argument("--out", required=True, help="output CSV path")
    _add_common(sample)
    sample.set_defaults(func=_cmd_sample)

    classify = subparsers.add_parser("classify", help="classify records with one engine")
    classify.add_argument("--in", dest="input", required=True)
    classify.add_argument("--map", default=None)
    classify.add_argument("--scheme", required=True)
    classify.add_argument("--engine", choices=("bisg", "llm"), required=True)
    classify.add_argument("--out", required=True, help="predictions JSON-lines path")
    classify.add_argument("--surname-table", default=None, help="surname probability CSV (bisg)")
    classify.add_argument("--geo-table", default=None, help="geography count CSV (bisg)")
    classify.add_argument("--geo-level", default=None, help="geography level to condition on")
    classify.add_argument("--surname-only", action="store_true", help="ignore geography (bisg)")
    classify.add_argument("--backend", default="mock", help="backend id (llm)")
    classify.add_argument("--model", default=None, help="model id (llm)")
    classify.add_argument("--template-id", default="baseline")
    classify.add_argument("--template-dir", default=None, help="directory of template .txt files")
    classify.add_argument("--name-mode", choices=("full", "surname_only"), default="full")
    classify.add_argument("--no-geo", action="store_true", help="omit the location line (llm)")
    classify.add_argument("--extras", default=None, help="comma list from age,party,zip,gender,all")
    classify.add_argument("--temperature", type=float, default=0.0)
    classify.add_argument("--reasoning", default="off", choices=("off", "minimal", "low", "high", "on"))
    classify.add_argument("--max-retries", type=int, default=3)
    classify.add_argument("--concurrency", type=int, default=4)
    classify.add_argument("--timeout", type=float, default=60.0)
    _add_common(classify)
    classify.set_defaults(func=_cmd_classify)

    ev = subparsers.add_parser("evaluate", help="score predictions against truth labels")
    ev.add_argument("--preds", required=True, help="predictions JSON-lines")
    ev.add_argument("--truth", required=True, help="records file with truth labels")
    ev.add_argument("--map", default=None)
    ev.add_argument("--scheme", required=True)
    ev.add_argument("--out", required=True, help="report JSON path")
    _add_common(ev)
    ev.set_defaults(func=_cmd_evaluate)

    agg = subparsers.add_parser(
        "aggregate-validate", help="compare predicted shares to census shares"
    )
    agg.add_argument("--preds", required=True)
    agg.add_argument("--census", required=True, help="JSON object of label -> share percent")
    agg.add_argument("--scheme", required=True)
    agg.add_argument("--out", required=True)
    _add_common(agg)
    agg.set_defaults(func=_cmd_aggregate)

    audit = subparsers.add_parser("audit-bias", help="income bias audit with OLS")
    audit.add_argument("--preds", required=True)
    audit.add_argument("--truth", required=True, help="records file with truth and income")
    audit.add_argument("--map", default=None)
    audit.add_argument("--scheme", required=True)
    audit.add_argument("--engine-tag", default="llm", help="engine name recorded in the report")
    audit.add_argument("--out", required=True, help="report JSON path; ventile CSVs land beside it")
    _add_common(audit)
    audit.set_defaults(func=_cmd_audit)

    export = subparsers.add_parser(
        "export-distill", help="export teacher-labeled train/test files"
    )
    export.add_argument("--in", dest="input", required=True)
    export.add_argument("--map", default=None)
    export.add_argument("--scheme", required=True)
    export.add_argument("--preds", required=True, help="teacher predictions JSON-lines")
    export.add_argument("--fraction", type=float, default=0.8, help="train share")
    export.add_argument("--train-out", required=True)
    export.add_argument("--test-out", required=True)
    export.add_argument("--stratify", action="store_true", help="split within each teacher label")
    _add_common(export)
    export.set_defaults(func=_cmd_export)

    score = subparsers.add_parser("score-student", help="score student prediction files")
    score.add_argument("--test", required=True, help="test JSON-lines from export-distill")
    score.add_argument("--base", required=True, help="zero-shot student predictions")
    score.add_argument("--finetuned", required=True, help="fine-tuned student predictions")
    score.add_argument("--teacher", default=None, help="optional teacher label override file")
    score.add_argument("--out", required=True, help="report JSON path")
    _add_common(score)
    score.set_defaults(func=_cmd_score_student)

    return parser


def dispatch(argv: Sequence[str] | None = None) -> int:
    """Parse argv and run one subcommand; returns the process exit code."""
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 0
    try:
        return args.func(args, tuple(argv))
    except (EthnoError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
