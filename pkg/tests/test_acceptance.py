"""Acceptance gate: one test per shipped guarantee.

Reference vectors frozen here come from external benchmark tables; each
test states the tolerance it enforces. Where a frozen average row is
arithmetically inconsistent with its own per-class entries, the check is
kept faithful and marked as a strict expected failure instead of being
loosened to pass.
"""

from __future__ import annotations

import json
import random
import time
from pathlib import Path
from statistics import fmean

import pytest

from ethno import (
    CategoryScheme,
    ConfusionMatrix,
    GeoTable,
    MockBackend,
    NameRecord,
    Prediction,
    PromptConfig,
    RecordSet,
    ResponseCache,
    SampleError,
    SurnameTable,
    UNPARSEABLE,
    aggregate_error_from_shares,
    bisg_posterior,
    classify_batch,
    confusion_matrix,
    evaluate,
    ols_slope,
    parse_response,
    stratified_sample,
    write_predictions,
)
from ethno.cli import dispatch
from ethno.ingest import write_records_csv
from ethno.llm.backends import BackendConfig
from tests.conftest import make_record_set

# Printed per-class recall columns (percent) with their printed average,
# keyed by (sample, engine). Tolerance is the table's own rounding grain.
RECALL_TOL_PP = 0.05 + 1e-9
RECALL_COLUMNS: dict[tuple[str, str], tuple[tuple[float, float, float, float], float]] = {
    ("florida", "gemini-3-flash"): ((88.4, 81.7, 92.3, 72.8), 83.8),
    ("florida", "gpt-4o"): ((88.5, 72.2, 91.6, 61.6), 78.5),
    ("florida", "gpt-4.1-mini"): ((90.6, 48.9, 91.4, 51.2), 70.5),
    ("florida", "deepseek-v3.2"): ((88.7, 61.4, 92.6, 62.4), 76.3),
    ("florida", "glm-4.7"): ((90.9, 59.3, 90.3, 57.3), 74.5),
    ("florida", "bisg"): ((86.8, 48.8, 88.8, 48.5), 68.2),
    ("north_carolina", "gemini-3-flash"): ((84.4, 80.0, 84.9, 84.5), 83.5),
    ("north_carolina", "gpt-4o"): ((88.2, 68.3, 85.7, 79.6), 80.5),
    ("north_carolina", "gpt-4.1-mini"): ((90.5, 52.1, 83.8, 70.2), 74.2),
    ("north_carolina", "deepseek-v3.2"): ((89.6, 59.3, 85.6, 79.4), 78.5),
    ("north_carolina", "glm-4.7"): ((86.4, 66.4, 81.6, 77.4), 78.0),
    ("north_carolina", "bisg"): ((85.0, 53.1, 77.0, 60.5), 68.9),
}
# These two columns print an average that does not match the mean of
# their own per-class entries (off by 0.15pp and 0.175pp respectively,
# beyond any rounding of the true mean).
INCONSISTENT_RECALL_COLUMNS: dict[tuple[str, str], tuple[tuple[float, ...], float]] = {
    ("florida", "glm-4.7-flash"): ((70.1, 43.1, 94.9, 40.5), 62.3),
    ("north_carolina", "glm-4.7-flash"): ((83.5, 60.6, 78.4, 67.4), 72.3),
}

# Printed per-category share columns (percent): census row, predicted
# row, and the printed average absolute error.
SHARE_TOL_PP = 0.05
SHARE_TABLES: dict[str, tuple[tuple[str, ...], tuple[float, ...], tuple[float, ...], float]] = {
    "india": (
        ("Hindu", "Muslim", "Christian", "Sikh", "Buddhist", "Jain", "Other"),
        (79.8, 14.2, 2.3, 1.7, 0.7, 0.4, 0.9),
        (80.2, 13.9, 2.1, 2.2, 0.2, 0.3, 1.0),
        0.3,
    ),
    "armenia": (
        ("Armenian", "Yezidi", "Russian"),
        (98.1, 1.2, 0.5),
        (98.2, 1.0, 0.8),
        0.2,
    ),
    "nepal": (
        ("Chhetri", "Brahmin", "Magar", "Tharu", "Tamang", "Newar",
         "Kami", "Yadav", "Rai", "Gurung", "Limbu"),
        (16.6, 12.2, 7.1, 6.6, 5.8, 5.0, 4.8, 4.0, 2.3, 2.0, 1.5),
        (20.8, 16.2, 6.1, 7.6, 6.1, 5.7, 6.2, 3.6, 3.2, 2.3, 1.5),
        1.3,
    ),
}


def macro_pct_from_recalls(recalls_pct: tuple[float, ...]) -> float:
    """Feed per-class recalls through evaluate() via a synthetic matrix
    whose rows each hold 1,000 records, so recall_i is exact."""
    k = len(recalls_pct)
    scheme = CategoryScheme(name=f"syn{k}", labels=tuple(f"L{i}" for i in range(k)))
    counts = []
    for i, pct in enumerate(recalls_pct):
        hits = round(pct * 10)
        row = [0] * k
        row[i] = hits
        row[(i + 1) % k] = 1000 - hits
        counts.append(tuple(row))
    matrix = ConfusionMatrix(
        scheme=scheme, counts=tuple(counts), unparseable_per_truth=(0,) * k
    )
    return 100.0 * evaluate(matrix).macro_recall


def test_macro_recall_reproduces_frozen_average_rows() -> None:
    started = time.perf_counter()
    for (sample, engine), (recalls, printed_avg) in RECALL_COLUMNS.items():
        macro = macro_pct_from_recalls(recalls)
        assert abs(macro - printed_avg) <= RECALL_TOL_PP, (
            f"{sample}/{engine}: macro {macro:.4f} vs printed {printed_avg}"
        )
    assert time.perf_counter() - started < 1.0


@pytest.mark.xfail(
    strict=True,
    reason="frozen average rows are inconsistent with their own per-class "
    "entries (off by 0.15pp and 0.175pp); kept faithful rather than loosened",
)
def test_macro_recall_on_inconsistent_frozen_columns() -> None:
    for (sample, engine), (recalls, printed_avg) in INCONSISTENT_RECALL_COLUMNS.items():
        macro = macro_pct_from_recalls(recalls)
        assert abs(macro - printed_avg) <= RECALL_TOL_PP, (
            f"{sample}/{engine}: macro {macro:.4f} vs printed {printed_avg}"
        )


def test_aggregate_error_reproduces_frozen_average_rows() -> None:
    started = time.perf_counter()
    for country, (labels, census, predicted, printed_avg) in SHARE_TABLES.items():
        report = aggregate_error_from_shares(
            dict(zip(labels, predicted)), dict(zip(labels, census))
        )
        assert abs(report.avg_error - printed_avg) <= SHARE_TOL_PP, (
            f"{country}: avg {report.avg_error:.4f} vs printed {printed_avg}"
        )
        assert not report.extra_predicted
    assert time.perf_counter() - started < 1.0


def test_bisg_matches_product_normalize_oracle() -> None:
    started = time.perf_counter()
    rng = random.Random(1729)
    for case in range(1000):
        k = rng.randint(2, 4)
        labels = tuple(f"L{i}" for i in range(k))
        scheme = CategoryScheme(name=f"s{case}", labels=labels)

        entries: dict[str, tuple[float, ...]] = {}
        for s in range(rng.randint(1, 5)):
            weights = [rng.random() + 1e-9 for _ in range(k)]
            total = sum(weights)
            entries[f"SN{s}"] = tuple(w / total for w in weights)

        counts: dict[str, tuple[float, ...]] = {}
        for u in range(rng.randint(1, 3)):
            counts[f"u{u}"] = tuple(float(rng.randint(0, 100)) for _ in range(k))
        if not any(c > 0 for vec in counts.values() for c in vec):
            first = next(iter(counts))
            counts[first] = (1.0,) + counts[first][1:]
        totals = tuple(sum(vec[r] for vec in counts.values()) for r in range(k))
        grand = sum(totals)
        marginal = tuple(t / grand for t in totals)

        surnames = SurnameTable(scheme=scheme, entries=entries, marginal=marginal)
        geo = GeoTable(scheme=scheme, counts=counts, totals=totals)

        surname = rng.choice(list(entries) + ["ABSENT"])
        unit = rng.choice(list(counts))
        posterior = bisg_posterior(surname, unit, surnames, geo, scheme)

        prior = entries.get(surname, marginal)
        likelihood = [
            counts[unit][r] / totals[r] if totals[r] > 0 else 0.0 for r in range(k)
        ]
        raw = [p * l for p, l in zip(prior, likelihood)]
        norm = sum(raw)
        if norm == 0:
            expected = marginal
            assert posterior.degenerate
        else:
            expected = tuple(v / norm for v in raw)
            assert not posterior.degenerate
        for got, want in zip(posterior.probs, expected):
            assert abs(got - want) <= 1e-12
        peak = max(expected)
        assert posterior.mode_index == next(
            i for i, v in enumerate(expected) if v == peak
        )

        # scaling every geography count by one factor leaves the
        # posterior unchanged
        lam = rng.uniform(0.5, 10.0)
        scaled = GeoTable(
            scheme=scheme,
            counts={u: tuple(c * lam for c in vec) for u, vec in counts.items()},
            totals=tuple(t * lam for t in totals),
        )
        rescaled = bisg_posterior(surname, unit, surnames, scaled, scheme)
        for got, want in zip(rescaled.probs, posterior.probs):
            assert abs(got - want) <= 1e-12

        # no geography unit: the posterior is the surname prior, exactly
        assert bisg_posterior(surname, None, surnames, geo, scheme).probs == prior
    assert time.perf_counter() - started < 5.0


def test_equal_strata_accuracy_equals_macro_recall() -> None:
    rng = random.Random(4)
    for trial in range(100):
        k = rng.randint(2, 5)
        per_class = rng.randint(5, 30)
        labels = tuple(f"L{i}" for i in range(k))
        scheme = CategoryScheme(name=f"eq{trial}", labels=labels)
        records = tuple(
            NameRecord(id=f"r{label}{i}", surname="Surname", truth_label=label)
            for label in labels
            for i in range(per_class)
        )
        truths = RecordSet(records=records, scheme=scheme)
        preds = [
            Prediction(record_id=r.id, label=rng.choice(labels), engine="synthetic")
            for r in records
        ]
        report = evaluate(confusion_matrix(preds, truths, scheme))
        assert abs(report.accuracy - report.macro_recall) <= 1e-12


def test_sampler_counts_determinism_and_underfull_error(us4, tmp_path: Path) -> None:
    records = make_record_set(us4, 30)  # 4 strata x 30
    sample = stratified_sample(records, "truth", 25, seed=17)
    per_label = {label: 0 for label in us4.labels}
    for record in sample:
        per_label[record.truth_label] += 1
    assert all(count == 25 for count in per_label.values())

    blobs = []
    for name in ("a", "b"):
        path = tmp_path / f"sample-{name}.csv"
        write_records_csv(stratified_sample(records, "truth", 25, seed=17), path)
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1]

    with pytest.raises(SampleError, match="fewer than"):
        stratified_sample(records, "truth", 31, seed=17)


PARSER_CASES: tuple[tuple[str, str], ...] = (
    ("White", "White"),
    ("white", "White"),
    ("  Hispanic  ", "Hispanic"),
    ("Asian.", "Asian"),
    ('"Black"', "Black"),
    ("**White**", "White"),
    ("(Hispanic)", "Hispanic"),
    ("BLACK", "Black"),
    ("Latino", "Hispanic"),
    ("caucasian", "White"),
    ("African American", "Black"),
    ("Answer: White", "White"),
    ("Most likely: Black", "Black"),
    ("The person is most likely Hispanic.", "Hispanic"),
    ("I believe this individual is Asian, based on the surname.", "Asian"),
    ("The label is:\nAsian", "Asian"),
    ("hispanic, to be precise", "Hispanic"),
    ("They could be White or Hispanic.", UNPARSEABLE),
    ("Either Black or Asian.", UNPARSEABLE),
    ("I'm sorry, but I can't assist with that.", UNPARSEABLE),
    ("I cannot determine ethnicity from a name alone.", UNPARSEABLE),
    ("", UNPARSEABLE),
    ("   ", UNPARSEABLE),
    ("unknown", UNPARSEABLE),
    ("Whiteish features", UNPARSEABLE),
)


def test_parser_ladder_on_crafted_responses(us4) -> None:
    assert len(PARSER_CASES) >= 20
    for text, expected in PARSER_CASES:
        assert parse_response(text, us4) == expected, f"response {text!r}"


def test_warm_cache_and_order_under_concurrency(us4, tmp_path: Path) -> None:
    records = make_record_set(us4, 8)  # 32 records
    pcfg = PromptConfig(scheme=us4, geo_level="county")
    bcfg = BackendConfig(backend_id="mock", model_id="mock-1", concurrency_limit=8)
    cache = ResponseCache(tmp_path / "cache")

    class JitterBackend(MockBackend):
        def complete(self, prompt: str) -> str:
            time.sleep((hash(prompt) % 5) / 1000.0)
            return super().complete(prompt)

    backend = JitterBackend(bcfg)
    cold, cold_usage = classify_batch(records, pcfg, bcfg, cache, backend=backend)
    assert cold_usage.calls == len(records)
    assert [p.record_id for p in cold] == list(records.ids())

    warm_blobs = []
    for name in ("w1", "w2"):
        warm, warm_usage = classify_batch(records, pcfg, bcfg, cache, backend=backend)
        assert warm_usage.calls == 0
        assert warm_usage.cache_hits == len(records)
        assert [p.record_id for p in warm] == list(records.ids())
        path = tmp_path / f"{name}.jsonl"
        write_predictions(warm, path)
        warm_blobs.append(path.read_bytes())
        for before, after in zip(cold, warm):
            assert before.label == after.label
            assert before.raw_response == after.raw_response
    assert backend.calls == len(records)
    assert warm_blobs[0] == warm_blobs[1]


def test_ols_recovers_planted_income_slope() -> None:
    started = time.perf_counter()
    rng = random.Random(80)
    planted = 0.037
    incomes = [rng.uniform(20_000.0, 120_000.0) for _ in range(10_000)]
    x = [income / 10_000.0 for income in incomes]
    mu = fmean(x)
    y = [1.0 if rng.random() < 0.2 + planted * (xi - mu) else 0.0 for xi in x]
    fit = ols_slope(x, y)
    assert abs(fit.slope - planted) <= 0.005
    assert fit.p < 0.001
    assert time.perf_counter() - started < 5.0


def test_end_to_end_mock_pipeline_deterministic(us4, us4_path, tmp_path: Path) -> None:
    records = make_record_set(us4, 25, incomes=True)  # 100 records
    records_path = tmp_path / "records.csv"
    write_records_csv(records, records_path)

    def run_pipeline(root: Path) -> dict[str, bytes]:
        sample_csv = root / "sample" / "sample.csv"
        preds = root / "classify" / "preds.jsonl"
        eval_json = root / "eval" / "eval.json"
        bias_json = root / "audit" / "bias.json"
        steps = (
            ["sample", "--in", str(records_path), "--scheme", str(us4_path),
             "--stratum", "truth", "--n", "20", "--seed", "9",
             "--out", str(sample_csv), "--quiet"],
            ["classify", "--in", str(sample_csv), "--scheme", str(us4_path),
             "--engine", "llm", "--model", "mock-1", "--geo-level", "county",
             "--out", str(preds), "--quiet"],
            ["evaluate", "--preds", str(preds), "--truth", str(sample_csv),
             "--scheme", str(us4_path), "--out", str(eval_json), "--quiet"],
            ["audit-bias", "--preds", str(preds), "--truth", str(sample_csv),
             "--scheme", str(us4_path), "--engine-tag", "mock",
             "--out", str(bias_json), "--quiet"],
        )
        for argv in steps:
            assert dispatch(argv) == 0, argv
        outputs = {
            "sample": sample_csv.read_bytes(),
            "preds": preds.read_bytes(),
            "eval": eval_json.read_bytes(),
            "bias": bias_json.read_bytes(),
        }
        for label in us4.labels:
            ventile = bias_json.parent / f"ventiles_{label.lower()}.csv"
            outputs[f"ventiles_{label}"] = ventile.read_bytes()
        for step_dir in ("sample", "classify", "eval", "audit"):
            manifest_path = root / step_dir / "manifest.json"
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            digests = {name: info["sha256"] for name, info in manifest["inputs"].items()}
            outputs[f"manifest_inputs_{step_dir}"] = json.dumps(
                digests, sort_keys=True
            ).encode()
        return outputs

    first = run_pipeline(tmp_path / "run1")
    second = run_pipeline(tmp_path / "run2")
    assert set(first) == set(second)
    for key in first:
        assert first[key] == second[key], key


def test_desk_scale_scope_statement_in_readme() -> None:
    readme = Path(__file__).resolve().parents[1] / "README.md"
    assert readme.is_file()
    text = readme.read_text(encoding="utf-8").lower()
    assert "not reproducible at desk scale" in text
    assert "voter" in text
    assert "wru" in text
