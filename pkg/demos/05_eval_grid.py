#!/usr/bin/env python3
"""A miniature with-text vs. without-text grid on a synthetic dataset whose
target is mostly readable from the text column, printing the report that a
full run writes to results.txt.
"""
import numpy as np

from tabtext import (
    Column,
    ColumnRole,
    DatasetManifest,
    ExperimentSpec,
    HashedNgram,
    Logistic,
    Table,
    TaskKind,
    TfIdf,
    run_grid,
)
from tabtext.evaluate import format_results_text


def make_table(n=150, seed=0):
    rng = np.random.default_rng(seed)
    labels = ["ship" if i % 2 == 0 else "hold" for i in range(n)]
    fillers = ["alpha", "beta", "gamma", "delta", "epsilon"]
    text = [
        f"{'launch ready' if v == 'ship' else 'needs rework'} {fillers[int(k)]}"
        for v, k in zip(labels, rng.integers(0, 5, n))
    ]
    return Table(
        "tickets",
        [
            Column("age_days", ColumnRole.NUMERICAL, [float(x) for x in rng.gamma(2, 5, n)]),
            Column("summary", ColumnRole.TEXTUAL, text),
            Column("verdict", None, labels),
        ],
        "verdict",
        TaskKind.BINARY,
    )


def main():
    manifest = DatasetManifest("tickets", "unused.csv", "verdict", TaskKind.BINARY)
    specs = [
        ExperimentSpec(manifest, embedder, None, Logistic(), with_text, seed=0)
        for embedder in (TfIdf(), HashedNgram(buckets=64))
        for with_text in (True, False)
    ]
    results = run_grid(specs, tables={"tickets": make_table()})
    print(format_results_text(results))


if __name__ == "__main__":
    main()
