"""Dataset-curation analytics: inclusion-rule checks, schema-coverage math,
and prompt construction/parsing behind a mockable LLM client."""
from __future__ import annotations

import json
import os
import re
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ColumnRole, MISSING, TabTextError, Table, TaskKind, k_fold_split
from .embed import TfIdf, assemble_features
from .evaluate import metric_accuracy, metric_r2
from .models import Logistic, Ridge, fit


class EmptySchema(TabTextError):
    pass


class MalformedResponse(TabTextError):
    pass


class NoVerdictFound(TabTextError):
    pass


# ---------------------------------------------------------------------------
# Inclusion-rule checks


@dataclass
class CurationCheck:
    rule: str
    verdict: str  # pass | fail | manual
    detail: str


def _single_column_score(table: Table, col_name: str, seed: int) -> float:
    """Cross-checked score of a one-column model (text columns get embedded)."""
    sub = Table(
        table.name,
        [table.column(col_name), table.target_column],
        table.target,
        table.task,
    )
    fold = k_fold_split(sub, 5, seed)
    model_kind = Ridge() if table.task is TaskKind.REGRESSION else Logistic(max_iter=200)
    train_fm, test_fm = assemble_features(sub, TfIdf(1, 1, 2000), True, fold, 0)
    model = fit(model_kind, train_fm.X, train_fm.y, table.task)
    preds = model.predict(test_fm.X)
    if table.task is TaskKind.REGRESSION:
        return metric_r2(test_fm.y, preds)
    return metric_accuracy(test_fm.y, preds)


def _chance_level(table: Table) -> float:
    if table.task is TaskKind.REGRESSION:
        return 0.0
    y = table.target_column.values
    top = max(y.count(v) for v in set(y))
    return top / len(y)


def run_curation_checks(table: Table, seed: int = 0, margin: float = 0.02) -> list[CurationCheck]:
    checks = []
    text_cols = [c.name for c in table.feature_columns if c.role is ColumnRole.TEXTUAL]
    checks.append(
        CurationCheck(
            "HasFreeText",
            "pass" if text_cols else "fail",
            f"text columns: {', '.join(text_cols) if text_cols else 'none'}",
        )
    )
    target_ok = table.target in table.column_names
    distinct = len(set(table.target_column.values))
    task_ok = (
        (table.task is TaskKind.REGRESSION and distinct > 1)
        or (table.task is TaskKind.BINARY and distinct == 2)
        or (table.task is TaskKind.MULTICLASS and distinct >= 3)
    )
    checks.append(
        CurationCheck(
            "PredictiveTask",
            "pass" if target_ok and task_ok else "fail",
            f"task={table.task.value}, target={table.target!r}, {distinct} distinct values",
        )
    )

    chance = _chance_level(table)
    non_text = [
        c.name
        for c in table.feature_columns
        if c.role in (ColumnRole.NUMERICAL, ColumnRole.CATEGORICAL)
    ]
    detail = "heuristic: single-column models vs chance"
    verdict = "fail"
    if text_cols and non_text:
        best_text = max(_single_column_score(table, c, seed) for c in text_cols)
        best_other = max(_single_column_score(table, c, seed) for c in non_text)
        verdict = "pass" if best_text > chance + margin and best_other > chance + margin else "fail"
        detail += (
            f"; best text={best_text:.3f}, best non-text={best_other:.3f},"
            f" chance={chance:.3f}"
        )
    else:
        detail += "; needs at least one text and one non-text column"
    checks.append(CurationCheck("DualSignalProxy", verdict, detail))

    checks.append(CurationCheck("Accessible", "manual", "requires human review of the source"))
    checks.append(
        CurationCheck("DomainDiversity", "manual", "requires human review across the corpus")
    )
    return checks


# ---------------------------------------------------------------------------
# Directional schema coverage


@dataclass
class FeatureMatchReport:
    dataset_a: str
    dataset_b: str
    similar_pairs: list[tuple[str, str, str]] = field(default_factory=list)
    dissimilar_a: list[str] = field(default_factory=list)
    dissimilar_b: list[str] = field(default_factory=list)


def directional_coverage(report: FeatureMatchReport) -> tuple[float, float]:
    """(a_to_b, b_to_a): matched features over the source schema size."""
    n_sim = len(report.similar_pairs)
    denom_a = n_sim + len(report.dissimilar_a)
    denom_b = n_sim + len(report.dissimilar_b)
    if denom_a == 0 or denom_b == 0:
        raise EmptySchema("no features on one side of the comparison")
    return n_sim / denom_a, n_sim / denom_b


@dataclass
class CoverageMatrix:
    names: list[str]
    coverage: np.ndarray  # n x n, nan diagonal
    binary: np.ndarray  # n x n int, diagonal untouched (-1)


def binarize(matrix: CoverageMatrix, threshold: float = 0.5) -> CoverageMatrix:
    binary = np.full(matrix.coverage.shape, -1, dtype=int)
    n = len(matrix.names)
    for i in range(n):
        for j in range(n):
            if i != j and not np.isnan(matrix.coverage[i, j]):
                binary[i, j] = int(matrix.coverage[i, j] >= threshold)
    return CoverageMatrix(matrix.names, matrix.coverage, binary)


def export_coverage(matrix: CoverageMatrix, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def render(values, fmt):
        lines = ["," + ",".join(matrix.names)]
        for i, name in enumerate(matrix.names):
            cells = [fmt(values[i, j]) if i != j else "" for j in range(len(matrix.names))]
            lines.append(name + "," + ",".join(cells))
        return "\n".join(lines) + "\n"

    cont = out / "coverage.csv"
    binf = out / "coverage_binary.csv"
    cont.write_text(
        render(matrix.coverage, lambda v: "" if np.isnan(v) else f"{v:.3f}"), encoding="utf-8"
    )
    binf.write_text(render(matrix.binary, lambda v: str(int(v))), encoding="utf-8")
    return {"coverage": cont, "binary": binf}


# ---------------------------------------------------------------------------
# Prompt construction and response parsing


_FORMAT_TEMPLATE = """{
    "similar_features": [
        {
            "dataset1_col_name": {"<column>": "<example value>"},
            "dataset2_col_name": {"<column>": "<example value>"},
            "reason": "<why these columns align>"
        }
    ],
    "dissimilar_features": {
        "dataset1": [{"col_name": "<column>"}],
        "dataset2": [{"col_name": "<column>"}]
    }
}"""

SIMILARITY_PROMPT_TEMPLATE = """
    Analyze and compare the feature space of two datasets: {dataset1_name} and {dataset2_name}.
    Identify relationships between feature names using semantic reasoning.

    **Your Task:**
    1. **Find Similar Features**: Identify columns that represent the same concept, even if their names differ.
       - Match based on **data type, structure, and naming conventions**, rather than relying solely on example values.
       - Consider cases where **one feature in a dataset maps to multiple features** in the other dataset.
       - Note: When a column represents an inherent property of the entity (such as its name, title, or composition/build/materials), treat it as similar across datasets unless context clearly indicates a different meaning.

    2. **Identify Dissimilar Features**: Columns that do not have a meaningful equivalent in the other dataset.
       - Consider **data type mismatches** (e.g., numeric vs. categorical).
       - Features that belong to completely different contexts should be classified as dissimilar.
       - For instance, even if the same term (e.g., "location") is used in both datasets, they should only be considered similar if their contexts align.

    ### Additional Guidelines:
    - **Return column names, with original example values.** Do not assume or generate example values.
    - Consider **semantic similarity** beyond direct string matching.
    - Account for **differences in feature naming conventions** (e.g., "price" vs. "cost", "region" vs. "province").
    - **Preserve structured output strictly in JSON format** - avoid any additional text or explanations.
    - Make sure you always return a pair of features for the "similar_features" section.

    ### Expected Output:
    {format_template}

    ### Dataset 1: {dataset1_name}
    {dataset1_values}

    ### Dataset 2: {dataset2_name}
    {dataset2_values}
"""

FITNESS_PROMPT_TEMPLATE = """
I am a researcher in the field of AI and I want to create a benchmark for tabular datasets with meaningful textual features. The textual features would be replaced with textual embeddings and the dataset will be used to benchmark a set of different tabular models.  For each dataset I will provide you with column names, first few rows and declaration of the target feature. Based on conditions below, review each dataset and classify it as Green (meets all conditions), Yellow (meets some), or Red (meets none) based on its fitness to be included in the benchmark, then justify your choice.
The general conditions are:
(1) suitability for regression/classification (not recommendation or look up table tasks),
(2) prediction is to be boosted by both textual and non textual features
(3) target feature is native to the prediction task and relavant to the feature space
(4) Textual features are semantically rich (e.g., 'item_condition' > 'seller_name').
(5) The features must contain enough signal for the model to go beyond predicting the mean/target statistics.
Always explain your reasoning
(e.g., 'Yellow: meets 1, 3, and 5 but lacks long-text features' and hence is not a good fit for the benchmark).

### Dataset: {dataset_name}
Target feature: {target}
{dataset_values}
"""


def schema_sample(table: Table, max_rows: int = 3) -> str:
    n = min(max_rows, table.n_rows)
    lines = []
    for col in table.columns:
        vals = ["<missing>" if col.values[i] is MISSING else str(col.values[i]) for i in range(n)]
        lines.append(f"{col.name}: [{', '.join(vals)}]")
    return "\n".join(lines)


def build_similarity_prompt(a: Table, b: Table) -> str:
    return SIMILARITY_PROMPT_TEMPLATE.format(
        dataset1_name=a.name,
        dataset2_name=b.name,
        format_template=_FORMAT_TEMPLATE,
        dataset1_values=schema_sample(a),
        dataset2_values=schema_sample(b),
    )


def build_fitness_prompt(table: Table) -> str:
    return FITNESS_PROMPT_TEMPLATE.format(
        dataset_name=table.name, target=table.target, dataset_values=schema_sample(table)
    )


def _extract_json(raw: str) -> dict:
    text = raw.strip()
    fence = re.search(r"```(?:json)?\s*(.*?)```", text, re.DOTALL)
    if fence:
        text = fence.group(1).strip()
    start = text.find("{")
    if start < 0:
        raise MalformedResponse("no JSON object in response")
    decoder = json.JSONDecoder()
    try:
        obj, _ = decoder.raw_decode(text[start:])
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedResponse("response JSON is not an object")
    return obj


def _col_name(entry) -> str:
    if isinstance(entry, str):
        return entry
    if isinstance(entry, dict):
        if "col_name" in entry:
            inner = entry["col_name"]
            return inner if isinstance(inner, str) else next(iter(inner))
        return next(iter(entry))
    raise MalformedResponse(f"cannot read a column name from {entry!r}")


def parse_match_response(raw: str, dataset_a: str = "", dataset_b: str = "") -> FeatureMatchReport:
    """Tolerant parse of a similarity response: code fences and leading prose
    are stripped, unknown keys ignored."""
    obj = _extract_json(raw)
    if "similar_features" not in obj:
        # responses may wrap the payload in a single "<a> vs <b>" key
        wrapped = [v for v in obj.values() if isinstance(v, dict) and "similar_features" in v]
        if len(wrapped) != 1:
            raise MalformedResponse("no similar_features section found")
        obj = wrapped[0]
    report = FeatureMatchReport(dataset_a, dataset_b)
    similar = obj.get("similar_features", [])
    if not isinstance(similar, list):
        raise MalformedResponse("similar_features must be a list")
    for item in similar:
        if not isinstance(item, dict):
            raise MalformedResponse("similar_features entries must be objects")
        report.similar_pairs.append(
            (
                _col_name(item.get("dataset1_col_name")),
                _col_name(item.get("dataset2_col_name")),
                str(item.get("reason", "")),
            )
        )
    dissimilar = obj.get("dissimilar_features", {})
    report.dissimilar_a = [_col_name(e) for e in dissimilar.get("dataset1", [])]
    report.dissimilar_b = [_col_name(e) for e in dissimilar.get("dataset2", [])]
    return report


_VERDICT_RE = re.compile(r"\b(GREEN|YELLOW|RED)\b", re.IGNORECASE)


def parse_fitness_response(raw: str) -> tuple[str, str]:
    m = _VERDICT_RE.search(raw)
    if m is None:
        raise NoVerdictFound("response contains no GREEN/YELLOW/RED verdict")
    color = m.group(1).capitalize()
    return color, raw[m.end() :].strip()


# ---------------------------------------------------------------------------
# LLM clients


class ReplayLlmClient:
    """Canned responses from a fixture directory; the default client, used by
    every test. Fixtures are plain text files looked up by key."""

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)

    def complete(self, prompt: str, key: str) -> str:
        path = self.fixture_dir / f"{key}.txt"
        if not path.exists():
            raise FileNotFoundError(f"no canned response for key {key!r} in {self.fixture_dir}")
        return path.read_text(encoding="utf-8")


class HttpChatLlmClient:
    """Minimal chat-completion client: POSTs a single user message to a
    configurable endpoint, reads choices[0].message.content. The API key
    comes from an environment variable, never from config files."""

    def __init__(self, endpoint: str, model: str, api_key_env: str = "LLM_API_KEY",
                 timeout: float = 120.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout

    def complete(self, prompt: str, key: str | None = None) -> str:
        api_key = os.environ.get(self.api_key_env, "")
        payload = json.dumps(
            {"model": self.model, "messages": [{"role": "user", "content": prompt}]}
        ).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint,
            data=payload,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {api_key}",
            },
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            body = json.loads(resp.read().decode("utf-8"))
        return body["choices"][0]["message"]["content"]


def pair_key(a: str, b: str) -> str:
    return f"{a}__vs__{b}"


def pair_similarity(a: Table, b: Table, client) -> FeatureMatchReport:
    raw = client.complete(build_similarity_prompt(a, b), key=pair_key(a.name, b.name))
    return parse_match_response(raw, a.name, b.name)


def coverage_matrix(tables: list[Table], client) -> CoverageMatrix:
    n = len(tables)
    names = [t.name for t in tables]
    coverage = np.full((n, n), np.nan)
    for i in range(n):
        for j in range(i + 1, n):
            report = pair_similarity(tables[i], tables[j], client)
            a_to_b, b_to_a = directional_coverage(report)
            coverage[i, j] = a_to_b
            coverage[j, i] = b_to_a
    matrix = CoverageMatrix(names, coverage, np.full((n, n), -1, dtype=int))
    return binarize(matrix)


def dataset_fitness(table: Table, client) -> tuple[str, str]:
    raw = client.complete(build_fitness_prompt(table), key=f"{table.name}__fitness")
    return parse_fitness_response(raw)


def default_fixture_dir() -> Path:
    return Path(__file__).parent / "data" / "fixtures"
