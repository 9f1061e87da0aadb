from dataclasses import replace

import numpy as np
import pytest

from tabtext.core import Column, ColumnRole, Table, TaskKind
from tabtext.embed import HashedNgram, TfIdf
from tabtext.evaluate import (
    ConstantTarget,
    EvalResult,
    ExperimentSpec,
    LengthMismatch,
    emit_report,
    format_results_csv,
    format_results_text,
    metric_accuracy,
    metric_r2,
    parse_results_csv,
    run_experiment,
    run_grid,
)
from tabtext.ingest import DatasetManifest
from tabtext.models import Logistic, Ridge
from tabtext.select import SelectorNotApplicable


class TestMetrics:
    def test_accuracy_examples(self):
        assert metric_accuracy(["a", "b"], ["a", "b"]) == 1.0
        assert metric_accuracy(["a", "b"], ["b", "a"]) == 0.0
        assert metric_accuracy(["a", "b", "c", "d"], ["a", "b", "c", "x"]) == 0.75

    def test_accuracy_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            metric_accuracy(["a"], ["a", "b"])

    def test_r2_perfect(self):
        y = [1.0, 2.0, 3.0]
        assert metric_r2(y, y) == pytest.approx(1.0)

    def test_r2_mean_predictor_exactly_zero(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal(40)
        pred = np.full(40, y.mean())
        assert metric_r2(y, pred) == pytest.approx(0.0, abs=1e-12)

    def test_r2_worse_than_mean_is_negative(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        pred = np.array([4.0, 3.0, 2.0, 1.0])
        assert metric_r2(y, pred) < 0.0

    def test_r2_constant_target(self):
        with pytest.raises(ConstantTarget):
            metric_r2([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])


def reg_manifest(name="synth-reg"):
    return DatasetManifest(name, "unused.csv", "y", TaskKind.REGRESSION)


def clf_manifest(name="synth-clf"):
    return DatasetManifest(name, "unused.csv", "y", TaskKind.BINARY)


def linear_reg_table(n=100, seed=0, noise=0.01):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    words = ["alpha", "beta", "gamma", "delta"]
    text = [f"{words[int(i) % 4]} note" for i in rng.integers(0, 4, n)]
    y = 3.0 * x + noise * rng.standard_normal(n)
    return Table(
        "synth-reg",
        [
            Column("x", ColumnRole.NUMERICAL, [float(v) for v in x]),
            Column("txt", ColumnRole.TEXTUAL, text),
            Column("y", None, [float(v) for v in y]),
        ],
        "y",
        TaskKind.REGRESSION,
    )


def text_signal_table(n=120, seed=0):
    """Target readable only from the text column; numbers are pure noise."""
    rng = np.random.default_rng(seed)
    labels = ["up" if i % 2 == 0 else "down" for i in range(n)]
    fillers = ["breeze", "crystal", "jungle", "sunset"]
    text = [
        f"{lab} {fillers[int(a)]} {fillers[int(b)]}"
        for lab, a, b in zip(labels, rng.integers(0, 4, n), rng.integers(0, 4, n))
    ]
    noise = rng.standard_normal(n)
    return Table(
        "synth-clf",
        [
            Column("noise", ColumnRole.NUMERICAL, [float(v) for v in noise]),
            Column("txt", ColumnRole.TEXTUAL, text),
            Column("y", None, labels),
        ],
        "y",
        TaskKind.BINARY,
    )


class TestRunExperiment:
    def test_ridge_on_noiseless_linear(self):
        spec = ExperimentSpec(
            manifest=reg_manifest(),
            embedder=TfIdf(),
            selector=None,
            model=Ridge(alpha=1e-6),
            with_text=False,
            seed=1,
        )
        result = run_experiment(spec, linear_reg_table())
        assert result.metric_name == "r2"
        assert result.mean > 0.99

    def test_without_text_on_text_only_signal_is_chance(self):
        spec = ExperimentSpec(
            manifest=clf_manifest(),
            embedder=TfIdf(),
            selector=None,
            model=Logistic(),
            with_text=False,
            seed=2,
        )
        result = run_experiment(spec, text_signal_table())
        assert result.metric_name == "accuracy"
        assert abs(result.mean - 0.5) < 0.15  # majority-class neighborhood

    def test_with_text_recovers_signal(self):
        spec = ExperimentSpec(
            manifest=clf_manifest(),
            embedder=TfIdf(),
            selector=None,
            model=Logistic(),
            with_text=True,
            seed=2,
        )
        result = run_experiment(spec, text_signal_table())
        assert result.mean > 0.9

    def test_reproducible_bitwise(self):
        spec = ExperimentSpec(
            manifest=clf_manifest(),
            embedder=HashedNgram(buckets=32),
            selector=None,
            model=Logistic(),
            with_text=True,
            seed=5,
        )
        a = run_experiment(spec, text_signal_table())
        b = run_experiment(spec, text_signal_table())
        assert a.per_fold == b.per_fold
        assert a.fold_fingerprints == b.fold_fingerprints

    def test_mean_and_std_relation(self):
        spec = ExperimentSpec(
            manifest=clf_manifest(),
            embedder=TfIdf(),
            selector=None,
            model=Logistic(),
            with_text=True,
            seed=3,
        )
        r = run_experiment(spec, text_signal_table())
        assert r.mean == pytest.approx(float(np.mean(r.per_fold)), abs=1e-12)
        assert r.std == pytest.approx(float(np.std(r.per_fold)), abs=1e-12)

    def test_selector_applies_only_over_cap(self):
        spec = ExperimentSpec(
            manifest=clf_manifest(),
            embedder=HashedNgram(buckets=64),
            selector="anova",
            model=Logistic(),
            with_text=True,
            feature_cap=10,
            seed=4,
        )
        over = run_experiment(spec, text_signal_table())
        assert over.selector_applied

        wide_cap = ExperimentSpec(
            manifest=clf_manifest(),
            embedder=HashedNgram(buckets=64),
            selector="anova",
            model=Logistic(),
            with_text=True,
            feature_cap=300,
            seed=4,
        )
        under = run_experiment(wide_cap, text_signal_table())
        assert not under.selector_applied

    def test_fold_failure_carries_fold_index(self, tmp_path):
        from tabtext.evaluate import ExperimentError
        from tabtext.models import External

        stub = tmp_path / "boom.py"
        stub.write_text("import sys; sys.exit(1)\n")
        spec = ExperimentSpec(
            manifest=clf_manifest(),
            embedder=TfIdf(),
            selector=None,
            model=External(f"python3 {stub}"),
            with_text=True,
        )
        with pytest.raises(ExperimentError) as err:
            run_experiment(spec, text_signal_table())
        assert err.value.fold == 0

    def test_caps_validated(self):
        with pytest.raises(ValueError):
            ExperimentSpec(
                manifest=clf_manifest(), embedder=TfIdf(), selector=None,
                model=Logistic(), with_text=True, k_folds=1,
            )

    def test_inapplicable_selector_rejected(self):
        spec = ExperimentSpec(
            manifest=reg_manifest(),
            embedder=TfIdf(),
            selector="ttest",
            model=Ridge(),
            with_text=True,
        )
        with pytest.raises(SelectorNotApplicable):
            run_experiment(spec, linear_reg_table())

    def test_anti_leak_test_fold_targets(self):
        # regression folds ignore y, so fold membership is stable: mutating a
        # fold-0 target must leave fold 0's fitted pipeline untouched
        base = linear_reg_table(seed=9)
        spec = ExperimentSpec(
            manifest=reg_manifest(),
            embedder=TfIdf(),
            selector=None,
            model=Ridge(),
            with_text=True,
            seed=9,
        )
        from tabtext.core import k_fold_split

        fold = k_fold_split(base, 5, 9)
        victim = fold.fold_rows(0)[0]
        mutated = linear_reg_table(seed=9)
        mutated.column("y").values[victim] = 1234.5
        a = run_experiment(spec, base)
        b = run_experiment(spec, mutated)
        assert a.fold_fingerprints[0] == b.fold_fingerprints[0]
        assert a.per_fold[0] != b.per_fold[0]


class TestReports:
    def make_results(self):
        spec = ExperimentSpec(
            manifest=clf_manifest(),
            embedder=TfIdf(),
            selector=None,
            model=Logistic(),
            with_text=True,
            seed=0,
        )
        return run_grid(
            [spec, replace(spec, with_text=False)],
            tables={"synth-clf": text_signal_table()},
        )

    def test_cell_formatting(self):
        spec = ExperimentSpec(
            manifest=clf_manifest(), embedder=TfIdf(), selector="shap",
            model=Logistic(), with_text=True,
        )
        r = EvalResult(spec, [0.95, 0.97], 0.962, 0.008, "accuracy", True)
        text = format_results_text([r])
        assert "0.962±0.008" in text

    def test_empty_results_header_only(self):
        assert format_results_csv([]).strip().startswith("dataset,task,metric")
        assert format_results_text([]).startswith("dataset")

    def test_round_trip_csv(self):
        results = self.make_results()
        text = format_results_csv(results)
        rows = parse_results_csv(text)
        assert len(rows) == 2
        assert rows[0]["mean"] == results[0].mean
        assert rows[0]["folds"] == results[0].per_fold

    def test_emit_report_files(self, tmp_path):
        results = self.make_results()
        paths = emit_report(results, tmp_path / "run")
        assert paths["csv"].exists()
        assert paths["txt"].exists()
        assert paths["lock"].exists()
        text = paths["txt"].read_text()
        assert "synth-clf" in text
        assert "*" in text  # better half of the pair is marked

    def test_unapplied_selector_renders_as_dashes(self):
        spec = ExperimentSpec(
            manifest=clf_manifest(),
            embedder=HashedNgram(buckets=64),
            selector="anova",
            model=Logistic(),
            with_text=True,
            feature_cap=300,
        )
        r = run_experiment(spec, text_signal_table())
        assert not r.selector_applied
        text = format_results_text([r])
        header_cols = text.splitlines()[0].split()
        body_cols = text.splitlines()[1].split()
        anova_col = next(
            i for i, h in enumerate(header_cols) if "anova" in h and h.endswith(":text")
        )
        assert body_cols[anova_col] == "--"
