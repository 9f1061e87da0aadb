"""CSV loading, table cleaning and heuristic column-role classification."""
from __future__ import annotations

import csv
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .core import (
    MISSING,
    Column,
    ColumnRole,
    TabTextError,
    Table,
    TaskKind,
    parse_task,
)


class ParseError(TabTextError):
    pass


class MissingTargetColumn(TabTextError):
    pass


class EmptyTable(TabTextError):
    pass


class CoercionFailure(TabTextError):
    pass


DEFAULT_ROW_CAP = 100_000

_MISSING_MARKERS = {"", "NaN", "nan"}

# commas, currency symbols and percent signs are stripped before any numeric parse
_FORMATTING_CHARS = str.maketrans("", "", ",$€£%")

# number with an optional short non-numeric prefix/suffix ("ABV 12%", "15s")
_AFFIX_RE = re.compile(r"(.{0,5}?)([+-]?\d+(?:\.\d+)?)(.{0,5})\Z", re.DOTALL)

_TIMESTAMP_RE = re.compile(r"\d{4}-\d{2}-\d{2}([T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?)?\Z")

NUMERIC_PARSE_FRACTION = 0.9
MAX_COERCION_FAILURES = 0.1


@dataclass
class DatasetManifest:
    name: str
    csv_path: str
    target_column: str
    task: TaskKind
    role_overrides: dict[str, ColumnRole] = field(default_factory=dict)
    row_cap: int = DEFAULT_ROW_CAP
    delimiter: str = ","


def manifest_from_dict(raw: dict) -> DatasetManifest:
    overrides = {
        col: ColumnRole(role.lower()) for col, role in raw.get("role_overrides", {}).items()
    }
    return DatasetManifest(
        name=raw["name"],
        csv_path=raw["csv_path"],
        target_column=raw["target_column"],
        task=parse_task(raw["task"]),
        role_overrides=overrides,
        row_cap=int(raw.get("row_cap", DEFAULT_ROW_CAP)),
        delimiter=raw.get("delimiter", ","),
    )


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read a manifest file (JSON key/value tree)."""
    return manifest_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_csv(manifest: DatasetManifest) -> Table:
    """Load a header-full delimited file into an all-string table.

    Empty cells and the NaN markers become MISSING; rows past the manifest
    row cap are truncated before anything else happens.
    """
    path = Path(manifest.csv_path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    rows: list[list] = []
    over_cap = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=manifest.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file has no header row") from None
        width = len(header)
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != width:
                raise ParseError(f"line {lineno}: expected {width} fields, got {len(rec)}")
            if len(rows) >= manifest.row_cap:
                over_cap += 1
                continue
            rows.append([MISSING if cell in _MISSING_MARKERS else cell for cell in rec])
    if manifest.target_column not in header:
        raise MissingTargetColumn(manifest.target_column)
    columns = [
        Column(name, None, [row[i] for row in rows]) for i, name in enumerate(header)
    ]
    meta = {"rows_over_cap": over_cap}
    return Table(manifest.name, columns, manifest.target_column, manifest.task, meta)


@dataclass
class PreprocessReport:
    dataset: str
    dropped_columns: list[tuple[str, str]] = field(default_factory=list)
    dropped_rows: dict[str, int] = field(default_factory=dict)
    role_assignments: dict[str, ColumnRole] = field(default_factory=dict)
    n_rows: int = 0
    target: str = ""

    def role_counts(self) -> dict[str, int]:
        counts = {"categorical": 0, "numerical": 0, "textual": 0}
        for role in self.role_assignments.values():
            counts[role.value] += 1
        return counts

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "n_rows": self.n_rows,
            "target": self.target,
            "dropped_columns": [{"name": n, "reason": r} for n, r in self.dropped_columns],
            "dropped_rows": dict(self.dropped_rows),
            "role_assignments": {c: r.value for c, r in self.role_assignments.items()},
        }

    def to_text(self) -> str:
        counts = self.role_counts()
        lines = [
            f"dataset: {self.dataset}",
            f"rows: {self.n_rows} (dropped: duplicate={self.dropped_rows.get('duplicate', 0)},"
            f" missing-target={self.dropped_rows.get('missing-target', 0)},"
            f" row-cap={self.dropped_rows.get('row-cap', 0)})",
            f"target: {self.target}",
            f"roles: {counts['categorical']} Cat / {counts['numerical']} Num / {counts['textual']} Text",
            "dropped columns:",
        ]
        if self.dropped_columns:
            lines += [f"  - {name} ({reason})" for name, reason in self.dropped_columns]
        else:
            lines.append("  (none)")
        lines.append("role assignments:")
        lines += [f"  - {col}: {role.value}" for col, role in self.role_assignments.items()]
        return "\n".join(lines) + "\n"


def _clean(cell: str) -> str:
    return cell.strip().translate(_FORMATTING_CHARS)


def _direct_number(cell: str) -> float | None:
    try:
        return float(_clean(cell))
    except ValueError:
        return None


def _affix_parts(cell: str) -> tuple[str, str, float] | None:
    """Split a cell into (prefix, suffix, value) when it is a number wearing
    a short non-numeric affix; None when it is not.
    """
    m = _AFFIX_RE.fullmatch(_clean(cell))
    if m is None:
        return None
    prefix, num, suffix = m.groups()
    if any(ch.isdigit() for ch in prefix) or any(ch.isdigit() for ch in suffix):
        return None
    return prefix, suffix, float(num)


def categoricity_threshold(n_rows: int) -> int:
    small = math.ceil(0.05 * n_rows) if n_rows < 1000 else 50
    return max(50, small)


def _is_timestamp_column(vals: list[str]) -> bool:
    if not vals:
        return False
    hits = sum(1 for v in vals if _TIMESTAMP_RE.fullmatch(v.strip()))
    return hits >= NUMERIC_PARSE_FRACTION * len(vals)


def _dominant_affix(vals: list[str]) -> tuple[str, str] | None:
    counts: Counter = Counter()
    for v in vals:
        parts = _affix_parts(v)
        if parts is not None and (parts[0], parts[1]) != ("", ""):
            counts[(parts[0], parts[1])] += 1
    if not counts:
        return None
    return counts.most_common(1)[0][0]


def classify_column(col: Column, n_rows: int) -> ColumnRole:
    """Role heuristic: numeric parse rate, then unique-count categoricity,
    textual otherwise.
    """
    vals = [v for v in col.values if v is not MISSING]
    if not vals:
        return ColumnRole.TEXTUAL
    if all(isinstance(v, (int, float)) for v in vals):
        return ColumnRole.NUMERICAL
    vals = [str(v) for v in vals]
    direct = sum(1 for v in vals if _direct_number(v) is not None)
    if direct >= NUMERIC_PARSE_FRACTION * len(vals):
        return ColumnRole.NUMERICAL
    dom = _dominant_affix(vals)
    if dom is not None:
        covered = direct + sum(
            1 for v in vals if (p := _affix_parts(v)) is not None and (p[0], p[1]) == dom
        )
        if covered >= NUMERIC_PARSE_FRACTION * len(vals):
            return ColumnRole.NUMERICAL
    if _is_timestamp_column(vals):
        return ColumnRole.NUMERICAL
    if len(set(vals)) <= categoricity_threshold(n_rows):
        return ColumnRole.CATEGORICAL
    return ColumnRole.TEXTUAL


def _parse_timestamp(cell: str) -> float | None:
    s = cell.strip()
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def coerce_numeric_column(col: Column) -> Column:
    """Turn every cell of a numerically-classified column into a number or
    MISSING. More than 10% parse failures means the classifier was wrong.
    """
    vals = [v for v in col.values if v is not MISSING]
    timestamps = _is_timestamp_column([str(v) for v in vals]) and not all(
        isinstance(v, (int, float)) for v in vals
    )
    out = []
    failures = 0
    for v in col.values:
        if v is MISSING:
            out.append(MISSING)
            continue
        if isinstance(v, (int, float)):
            out.append(float(v))
            continue
        if timestamps:
            num = _parse_timestamp(str(v))
        else:
            num = _direct_number(str(v))
            if num is None:
                parts = _affix_parts(str(v))
                num = parts[2] if parts is not None else None
        if num is None:
            failures += 1
            out.append(MISSING)
        else:
            out.append(num)
    if vals and failures > MAX_COERCION_FAILURES * len(vals):
        raise CoercionFailure(
            f"column {col.name!r}: {failures}/{len(vals)} cells failed numeric coercion"
        )
    return Column(col.name, ColumnRole.NUMERICAL, out)


def general_preprocess(
    table: Table, role_overrides: dict[str, ColumnRole] | None = None
) -> tuple[Table, PreprocessReport]:
    """The standard cleaning pass, in fixed order: drop mostly-missing
    columns, drop constant columns, drop duplicate rows, drop rows with a
    missing target, drop 'Unnamed' columns; then classify and coerce the
    survivors.
    """
    overrides = role_overrides or {}
    report = PreprocessReport(dataset=table.name, target=table.target)
    report.dropped_rows["row-cap"] = int(table.meta.get("rows_over_cap", 0))

    cols = list(table.columns)
    n = table.n_rows

    kept = []
    for c in cols:
        # an explicit role override is a curator's keep decision: it exempts
        # the column from the mostly-missing drop
        if (
            c.name != table.target
            and c.name not in overrides
            and n > 0
            and c.missing_fraction() > 0.5
        ):
            report.dropped_columns.append((c.name, "missing>50%"))
        else:
            kept.append(c)
    cols = kept

    kept = []
    for c in cols:
        if c.name != table.target and n > 0 and len(set(c.non_missing())) == 1:
            report.dropped_columns.append((c.name, "constant"))
        else:
            kept.append(c)
    cols = kept

    seen = set()
    keep_rows = []
    for i in range(n):
        key = tuple(c.values[i] for c in cols)
        if key in seen:
            continue
        seen.add(key)
        keep_rows.append(i)
    report.dropped_rows["duplicate"] = n - len(keep_rows)
    cols = [Column(c.name, c.role, [c.values[i] for i in keep_rows]) for c in cols]

    tcol = next(c for c in cols if c.name == table.target)
    if table.task is TaskKind.REGRESSION:
        tvals = []
        for v in tcol.values:
            if v is MISSING or isinstance(v, (int, float)):
                tvals.append(float(v) if v is not MISSING else MISSING)
            else:
                num = _direct_number(str(v))
                tvals.append(num if num is not None else MISSING)
        tcol.values = tvals
    keep_rows = [i for i, v in enumerate(tcol.values) if v is not MISSING]
    report.dropped_rows["missing-target"] = len(tcol.values) - len(keep_rows)
    cols = [Column(c.name, c.role, [c.values[i] for i in keep_rows]) for c in cols]

    kept = []
    for c in cols:
        if c.name != table.target and c.name.startswith("Unnamed"):
            report.dropped_columns.append((c.name, "unnamed"))
        else:
            kept.append(c)
    cols = kept

    n_rows = len(cols[0].values) if cols else 0
    if n_rows == 0 or len(cols) < 2:
        raise EmptyTable(
            f"table {table.name!r} has no usable rows or feature columns after cleaning"
        )

    out_cols = []
    for c in cols:
        if c.name == table.target:
            out_cols.append(c)
            continue
        role = overrides.get(c.name) or classify_column(c, n_rows)
        if role is ColumnRole.NUMERICAL:
            c = coerce_numeric_column(c)
        else:
            c = Column(c.name, role, c.values)
        report.role_assignments[c.name] = role
        out_cols.append(c)

    report.n_rows = n_rows
    cleaned = Table(table.name, out_cols, table.target, table.task, dict(table.meta))
    return cleaned.validate(), report


def ingest_dataset(manifest: DatasetManifest) -> tuple[Table, PreprocessReport]:
    table = load_csv(manifest)
    return general_preprocess(table, manifest.role_overrides)


def write_table_cache(table: Table, csv_path: str | Path) -> None:
    """Delimited snapshot of a cleaned table plus a role sidecar file."""
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.column_names)
        for i in range(table.n_rows):
            writer.writerow(
                ["" if c.values[i] is MISSING else c.values[i] for c in table.columns]
            )
    sidecar = {
        "target": table.target,
        "task": table.task.value,
        "roles": {c.name: c.role.value for c in table.feature_columns if c.role},
    }
    csv_path.with_suffix(csv_path.suffix + ".roles.json").write_text(
        json.dumps(sidecar, indent=2) + "\n", encoding="utf-8"
    )
