#!/usr/bin/env python3
"""Walk a messy CSV through loading, cleaning and column-role detection.

Builds a small file with the usual real-world warts (affixed numbers,
mostly-missing columns, duplicated rows, a stray index column) and shows
what the cleaning pass keeps, drops, and how it types the survivors.
"""
import tempfile
from pathlib import Path

from tabtext import DatasetManifest, TaskKind, ingest_dataset

CSV = """\
abv,brew_time,price,mostly_gone,batch_id,Unnamed: 0,style,rating
ABV 5.2%,45s,"1,200",,const,0,crisp pale ale with citrus hops,3.9
ABV 7.0%,60s,"1,850",x,const,1,roasty imperial stout aged on oak,4.4
ABV 4.1%,30s,950,,const,2,easy drinking lager for summer,3.1
ABV 6.3%,55s,"1,400",,const,3,hazy ipa bursting with mango,4.2
ABV 5.2%,45s,"1,200",,const,0,crisp pale ale with citrus hops,3.9
ABV 8.9%,90s,"2,300",,const,5,barrel aged barleywine heavy malt,4.6
ABV 4.8%,40s,"1,050",y,const,6,wheat beer with coriander and orange,3.5
ABV 6.0%,50s,"1,300",,const,7,west coast ipa pine and grapefruit,4.0
"""


def main():
    with tempfile.TemporaryDirectory() as tmp:
        csv_path = Path(tmp) / "beers.csv"
        csv_path.write_text(CSV)
        manifest = DatasetManifest(
            name="beers",
            csv_path=str(csv_path),
            target_column="rating",
            task=TaskKind.REGRESSION,
        )
        table, report = ingest_dataset(manifest)

    print(report.to_text())
    print("cleaned values, first rows:")
    for col in table.feature_columns:
        print(f"  {col.name:10s} ({col.role.value}): {col.values[:3]}")
    print(f"\nnote the duplicate row was removed: {table.n_rows} rows remain")


if __name__ == "__main__":
    main()
