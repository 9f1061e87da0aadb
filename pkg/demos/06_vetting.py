#!/usr/bin/env python3
"""Dataset-curation tooling: inclusion-rule checks, the directional schema
coverage score, and the prompt/parse round trip against the canned-response
client (no API key required).
"""
import numpy as np

from tabtext import Column, ColumnRole, Table, TaskKind
from tabtext.vetting import (
    ReplayLlmClient,
    binarize,
    build_similarity_prompt,
    coverage_matrix,
    default_fixture_dir,
    directional_coverage,
    pair_similarity,
    run_curation_checks,
)


def listing_table(name, text_cols):
    rng = np.random.default_rng(0)
    n = 30
    mileage = rng.uniform(1e3, 9e4, n)
    prices = 5500.0 - 0.05 * mileage + rng.normal(0, 120, n)
    cols = []
    for c in text_cols:
        # the first text column carries real signal, the rest are filler
        if c == text_cols[0]:
            vals = [
                ("pristine low usage " if m < 45000 else "heavily used commuter ") + f"lot {i}"
                for i, m in enumerate(mileage)
            ]
        else:
            vals = [f"{c} entry {i}" for i in range(n)]
        cols.append(Column(c, ColumnRole.TEXTUAL, vals))
    cols.append(Column("mileage", ColumnRole.NUMERICAL, [float(m) for m in mileage]))
    cols.append(Column("price", None, [float(p) for p in prices]))
    return Table(name, cols, "price", TaskKind.REGRESSION)


def main():
    bikes = listing_table(
        "bikedekho",
        ["bike_name", "price_text", "year", "city", "fuel", "brand", "engine_cc",
         "kms_driven", "owner_count"],
    )
    cars = listing_table(
        "cars_24",
        ["car_name", "listed_price", "make_year", "location", "fuel_type", "make",
         "engine_capacity", "insurance_validity"],
    )

    print("inclusion-rule checks for", bikes.name)
    for check in run_curation_checks(bikes):
        print(f"  {check.rule:16s} {check.verdict:7s} {check.detail}")

    client = ReplayLlmClient(default_fixture_dir())
    report = pair_similarity(bikes, cars, client)
    a_to_b, b_to_a = directional_coverage(report)
    print(f"\nschema coverage: {bikes.name}->{cars.name} = {a_to_b:.3f}"
          f" ({len(report.similar_pairs)} matched,"
          f" {len(report.dissimilar_a)} unmatched on the source side)")
    print(f"                 {cars.name}->{bikes.name} = {b_to_a:.3f}")

    matrix = binarize(coverage_matrix([bikes, cars], client))
    print(f"binarized at 0.5: {matrix.binary[0, 1]} / {matrix.binary[1, 0]}")

    prompt = build_similarity_prompt(bikes, cars)
    print(f"\nthe comparison prompt is {len(prompt)} chars; it begins:")
    print("\n".join(prompt.strip().splitlines()[:3]))


if __name__ == "__main__":
    main()
