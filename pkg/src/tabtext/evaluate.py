"""Cross-validated with-text vs. without-text experiments and their reports."""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import select
from .core import TabTextError, Table, TaskKind, k_fold_split, subsample_rows
from .embed import EmbedderKind, FeatureMatrix, assemble_features
from .ingest import DatasetManifest, ingest_dataset
from .models import External, FittedModel, ModelKind, fit, run_external


class LengthMismatch(TabTextError):
    pass


class ConstantTarget(TabTextError):
    pass


class ExperimentError(TabTextError):
    def __init__(self, message: str, fold: int):
        super().__init__(f"fold {fold}: {message}")
        self.fold = fold


def metric_accuracy(y_true, y_pred) -> float:
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} labels vs {len(y_pred)} predictions")
    if len(y_true) == 0:
        raise LengthMismatch("empty label lists")
    hits = sum(1 for t, p in zip(y_true, y_pred) if str(t) == str(p))
    return hits / len(y_true)


def metric_r2(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} targets vs {len(y_pred)} predictions")
    if len(y_true) < 2:
        raise LengthMismatch("r2 needs at least 2 rows")
    ss_tot = float(((y_true - y_true.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ConstantTarget("target variance is zero")
    ss_res = float(((y_true - y_pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class ExperimentSpec:
    manifest: DatasetManifest
    embedder: EmbedderKind
    selector: str | None
    model: ModelKind
    with_text: bool
    k_folds: int = 5
    feature_cap: int = 300
    row_cap: int = 3000
    seed: int = 0
    corr_method: str = "pearson"

    def __post_init__(self):
        if self.k_folds < 2 or self.feature_cap < 1 or self.row_cap < 1:
            raise ValueError("k_folds must be >= 2 and caps positive")

    @property
    def dataset_name(self) -> str:
        return self.manifest.name

    @property
    def task(self) -> TaskKind:
        return self.manifest.task

    def condition(self) -> tuple[str, str, str, bool]:
        return (self.model.tag, self.embedder.tag, self.selector or "all", self.with_text)

    def spec_hash(self) -> str:
        payload = json.dumps(
            {
                "dataset": self.dataset_name,
                "embedder": repr(self.embedder),
                "selector": self.selector,
                "model": repr(self.model),
                "with_text": self.with_text,
                "k_folds": self.k_folds,
                "feature_cap": self.feature_cap,
                "row_cap": self.row_cap,
                "seed": self.seed,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class EvalResult:
    spec: ExperimentSpec
    per_fold: list[float]
    mean: float
    std: float
    metric_name: str
    selector_applied: bool = False
    fold_fingerprints: list[str] = field(default_factory=list)


def _fold_fingerprint(train_fm: FeatureMatrix, model: FittedModel) -> str:
    """Cheap digest of the fitted pipeline: train-matrix aggregates plus the
    model's own train predictions (wide matrices make full-byte hashing too
    expensive for something recomputed every fold)."""
    h = hashlib.sha256()
    X = train_fm.X
    h.update(repr(X.shape).encode())
    h.update(np.ascontiguousarray(X.sum(axis=0)).tobytes())
    h.update(np.ascontiguousarray(X.sum(axis=1)).tobytes())
    h.update(repr(train_fm.provenance).encode())
    h.update(repr(list(train_fm.y)).encode())
    if model.task is TaskKind.REGRESSION:
        h.update(np.asarray(model.predict(train_fm.X)).tobytes())
    else:
        h.update(repr(model.predict(train_fm.X)).encode())
    return h.hexdigest()[:16]


def _score_fold(spec: ExperimentSpec, table: Table, fold, test_fold: int):
    train_fm, test_fm = assemble_features(
        table, spec.embedder, spec.with_text, fold, test_fold
    )
    applied = False
    if spec.selector is not None and train_fm.width > spec.feature_cap:
        n_non_text = sum(1 for _, tag, _ in train_fm.provenance if tag in ("num", "cat"))
        k = select.default_k(spec.feature_cap, n_non_text)
        result = select.run_selector(
            spec.selector,
            train_fm.X,
            train_fm.y,
            spec.task,
            k,
            spec.seed,
            spec.corr_method,
        )
        train_fm = select.apply_selection(train_fm, result)
        test_fm = select.apply_selection(test_fm, result)
        applied = True

    if isinstance(spec.model, External):
        preds, _ = run_external(
            spec.model.command, train_fm, test_fm, timeout=spec.model.timeout
        )
        if spec.task is TaskKind.REGRESSION:
            score = metric_r2(test_fm.y, [float(p) for p in preds])
        else:
            score = metric_accuracy(test_fm.y, preds)
        return score, applied, ""

    model = fit(spec.model, train_fm.X, train_fm.y, spec.task)
    preds = model.predict(test_fm.X)
    if spec.task is TaskKind.REGRESSION:
        score = metric_r2(test_fm.y, preds)
    else:
        score = metric_accuracy(test_fm.y, preds)
    return score, applied, _fold_fingerprint(train_fm, model)


def run_experiment(spec: ExperimentSpec, table: Table | None = None) -> EvalResult:
    """Run one grid cell: subsample rows, split folds, and per fold embed,
    (maybe) select, fit and score. Deterministic for a fixed spec seed."""
    if spec.selector is not None and not select.applicable(spec.selector, spec.task):
        raise select.SelectorNotApplicable(
            f"{spec.selector} does not support {spec.task.value}"
        )
    if table is None:
        table, _ = ingest_dataset(spec.manifest)
    table = subsample_rows(table, spec.row_cap, spec.seed)
    fold = k_fold_split(table, spec.k_folds, spec.seed)
    per_fold: list[float] = []
    fingerprints: list[str] = []
    applied_any = False
    for test_fold in range(spec.k_folds):
        try:
            score, applied, fp = _score_fold(spec, table, fold, test_fold)
        except Exception as exc:
            raise ExperimentError(str(exc), test_fold) from exc
        per_fold.append(score)
        fingerprints.append(fp)
        applied_any = applied_any or applied
    metric_name = "r2" if spec.task is TaskKind.REGRESSION else "accuracy"
    return EvalResult(
        spec,
        per_fold,
        float(np.mean(per_fold)),
        float(np.std(per_fold)),
        metric_name,
        applied_any,
        fingerprints,
    )


def run_grid(
    specs: list[ExperimentSpec],
    tables: dict[str, Table] | None = None,
    jobs: int = 1,
) -> list[EvalResult]:
    tables = tables or {}

    def one(spec: ExperimentSpec) -> EvalResult:
        return run_experiment(spec, tables.get(spec.dataset_name))

    if jobs <= 1:
        return [one(s) for s in specs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, specs))


# ---------------------------------------------------------------------------
# Reports


def _cell(mean: float, std: float) -> str:
    return f"{mean:.3f}±{std:.3f}"


def result_rows(results: list[EvalResult]) -> list[dict]:
    rows = []
    for r in results:
        spec = r.spec
        rows.append(
            {
                "dataset": spec.dataset_name,
                "task": spec.task.value,
                "metric": r.metric_name,
                "model": spec.model.tag,
                "embedder": spec.embedder.tag,
                "selector": spec.selector or "all",
                "with_text": spec.with_text,
                "selector_applied": r.selector_applied,
                "mean": r.mean,
                "std": r.std,
                "folds": list(r.per_fold),
                "seed": spec.seed,
            }
        )
    return rows


CSV_HEADER = (
    "dataset,task,metric,model,embedder,selector,with_text,selector_applied,mean,std,folds,seed"
)


def format_results_csv(results: list[EvalResult]) -> str:
    lines = [CSV_HEADER]
    for row in result_rows(results):
        lines.append(
            ",".join(
                [
                    row["dataset"],
                    row["task"],
                    row["metric"],
                    row["model"],
                    row["embedder"],
                    row["selector"],
                    str(row["with_text"]).lower(),
                    str(row["selector_applied"]).lower(),
                    repr(row["mean"]),
                    repr(row["std"]),
                    "|".join(repr(v) for v in row["folds"]),
                    str(row["seed"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def parse_results_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise TabTextError("unrecognized results.csv header")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        rows.append(
            {
                "dataset": parts[0],
                "task": parts[1],
                "metric": parts[2],
                "model": parts[3],
                "embedder": parts[4],
                "selector": parts[5],
                "with_text": parts[6] == "true",
                "selector_applied": parts[7] == "true",
                "mean": float(parts[8]),
                "std": float(parts[9]),
                "folds": [float(v) for v in parts[10].split("|") if v],
                "seed": int(parts[11]),
            }
        )
    return rows


def format_rows_text(rows: list[dict]) -> str:
    """Aligned table: one row per dataset, a with/without-text column pair per
    (model, embedder, selector) condition. '*' marks the better half of each
    pair; '--' marks conditions without a result (inapplicable selector, or
    selection skipped because the matrix was under the feature cap)."""
    datasets = sorted({row["dataset"] for row in rows})
    conditions = sorted({(row["model"], row["embedder"], row["selector"]) for row in rows})
    by_key: dict = {}
    for row in rows:
        sel = row["selector"]
        # a configured selector that never fired is a no-selection result
        if sel != "all" and not row["selector_applied"]:
            sel = "all"
        by_key[(row["dataset"], row["model"], row["embedder"], sel, row["with_text"])] = row

    headers = ["dataset"]
    for mo, emb, sel in conditions:
        headers.append(f"{mo}/{emb}/{sel}:text")
        headers.append(f"{mo}/{emb}/{sel}:no-text")
    table = [headers]
    for ds in datasets:
        line = [ds]
        for mo, emb, sel in conditions:
            pair = {wt: by_key.get((ds, mo, emb, sel, wt)) for wt in (True, False)}
            best = None
            if pair[True] and pair[False]:
                best = pair[True]["mean"] >= pair[False]["mean"]
            for wt in (True, False):
                row = pair[wt]
                if row is None:
                    line.append("--")
                    continue
                mark = "*" if best is not None and wt == best else ""
                line.append(_cell(row["mean"], row["std"]) + mark)
        table.append(line)

    widths = [max(len(line[i]) for line in table) for i in range(len(headers))]
    out = []
    for line in table:
        out.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)).rstrip())

    # best-embedding reduction, clearly tagged, never applied silently
    out.append("")
    out.append("[best-embedding reduction: max over embedders]")
    for ds in datasets:
        for mo in sorted({c[0] for c in conditions}):
            for wt in (True, False):
                cands = [
                    row
                    for row in rows
                    if row["dataset"] == ds and row["model"] == mo and row["with_text"] == wt
                ]
                if not cands:
                    continue
                best_row = max(cands, key=lambda row: row["mean"])
                label = "with-text" if wt else "no-text"
                out.append(
                    f"  {ds} {mo} {label}: {_cell(best_row['mean'], best_row['std'])}"
                    f" ({best_row['embedder']}/{best_row['selector']})"
                )
    return "\n".join(out) + "\n"


def format_results_text(results: list[EvalResult]) -> str:
    return format_rows_text(result_rows(results))


def emit_report(results: list[EvalResult], out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    txt_path = out / "results.txt"
    lock_path = out / "manifest-lock"
    csv_path.write_text(format_results_csv(results), encoding="utf-8")
    txt_path.write_text(format_results_text(results), encoding="utf-8")
    lock = {
        "results": [
            {
                "dataset": r.spec.dataset_name,
                "spec_hash": r.spec.spec_hash(),
                "seed": r.spec.seed,
                "metric": r.metric_name,
                "mean": r.mean,
            }
            for r in results
        ]
    }
    lock_path.write_text(json.dumps(lock, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {"csv": csv_path, "txt": txt_path, "lock": lock_path}
