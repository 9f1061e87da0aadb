import json
from pathlib import Path

import numpy as np
import pytest

from tabtext.cli import main
from tabtext.vetting import default_fixture_dir


def write_binary_dataset(path: Path, n=60, seed=0):
    rng = np.random.default_rng(seed)
    words = ["crisp", "malty", "smoky", "floral", "bitter", "sweet"]
    lines = ["notes,reading,grade"]
    for i in range(n):
        label = "good" if i % 2 == 0 else "bad"
        w1, w2 = words[int(rng.integers(6))], words[int(rng.integers(6))]
        marker = "shiny" if label == "good" else "rusty"
        reading = 0.5 * (1 if label == "good" else -1) + float(rng.standard_normal())
        lines.append(f"{marker} {w1} {w2} batch {i},{reading:.4f},{label}")
    path.write_text("\n".join(lines) + "\n")


def write_manifest(path: Path, csv_path: Path, name="taps", target="grade", task="binary"):
    path.write_text(
        json.dumps(
            {
                "name": name,
                "csv_path": str(csv_path),
                "target_column": target,
                "task": task,
                "role_overrides": {"notes": "textual"},
            }
        )
    )


@pytest.fixture()
def dataset(tmp_path):
    csv_path = tmp_path / "taps.csv"
    manifest_path = tmp_path / "taps.json"
    write_binary_dataset(csv_path)
    write_manifest(manifest_path, csv_path)
    return manifest_path


class TestIngestCommand:
    def test_success(self, dataset, tmp_path, capsys):
        code = main(["--out", str(tmp_path / "cache"), "ingest", str(dataset)])
        assert code == 0
        out = capsys.readouterr().out
        assert "Cat" in out and "Num" in out and "Text" in out
        assert (tmp_path / "cache" / "taps.clean.csv").exists()
        assert (tmp_path / "cache" / "taps.clean.csv.roles.json").exists()

    def test_missing_file_exits_two(self, tmp_path):
        manifest = tmp_path / "m.json"
        write_manifest(manifest, tmp_path / "missing.csv")
        assert main(["ingest", str(manifest)]) == 2


def eval_config(tmp_path, dataset, selectors=None, **extra):
    config = {
        "manifests": [str(dataset)],
        "embedders": [{"kind": "tfidf"}, {"kind": "hashed", "buckets": 32}],
        "models": [{"kind": "logistic"}],
        "with_text": [True, False],
        "k_folds": 5,
        "seed": 1,
        **extra,
    }
    if selectors is not None:
        config["selectors"] = selectors
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


class TestEvalCommand:
    def test_grid_produces_four_rows(self, dataset, tmp_path, capsys):
        config = eval_config(tmp_path, dataset)
        out_dir = tmp_path / "run"
        assert main(["--out", str(out_dir), "eval", str(config)]) == 0
        lines = (out_dir / "results.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 4  # header + (2 embedders x with/without)
        assert (out_dir / "results.txt").exists()
        assert (out_dir / "manifest-lock").exists()

    def test_rerun_is_bit_identical(self, dataset, tmp_path):
        config = eval_config(tmp_path, dataset)
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        assert main(["--out", str(a_dir), "eval", str(config)]) == 0
        assert main(["--out", str(b_dir), "eval", str(config)]) == 0
        assert (a_dir / "results.csv").read_bytes() == (b_dir / "results.csv").read_bytes()

    def test_inapplicable_selector_fails_before_compute(self, dataset, tmp_path, capsys):
        config = eval_config(tmp_path, dataset, selectors=["correlation"])  # binary task
        assert main(["--out", str(tmp_path / "x"), "eval", str(config)]) == 3
        err = capsys.readouterr().err
        assert "not applicable" in err
        assert not (tmp_path / "x").exists()


class TestBreakCommand:
    def test_default_run_prints_grid(self, tmp_path, capsys):
        out_dir = tmp_path / "break"
        assert main(["--seed", "0", "--out", str(out_dir), "break"]) == 0
        out = capsys.readouterr().out
        assert "== Complete Leak ==" in out
        assert "Average" in out
        assert (out_dir / "break_matrix.csv").exists()

    def test_bad_config_exits_four(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"model": {"kind": "nonsense"}}))
        assert main(["break", str(bad)]) == 4


class TestVetCommand:
    def make_pair(self, tmp_path):
        specs = {
            "bikedekho": ["bike_name", "price_text", "year", "city", "fuel", "brand",
                          "engine_cc", "kms_driven", "owner_count"],
            "cars_24": ["car_name", "listed_price", "make_year", "location", "fuel_type",
                        "make", "engine_capacity", "insurance_validity"],
        }
        manifest_paths = []
        rng = np.random.default_rng(0)
        for name, cols in specs.items():
            csv_path = tmp_path / f"{name}.csv"
            lines = [",".join(cols + ["price"])]
            for i in range(12):
                cells = [f"{c} value {i} extra" for c in cols]
                cells.append(f"{1000 + i * 17 + int(rng.integers(9))}")
                lines.append(",".join(cells))
            csv_path.write_text("\n".join(lines) + "\n")
            mpath = tmp_path / f"{name}.json"
            mpath.write_text(
                json.dumps(
                    {
                        "name": name,
                        "csv_path": str(csv_path),
                        "target_column": "price",
                        "task": "regression",
                        "role_overrides": {c: "textual" for c in cols},
                    }
                )
            )
            manifest_paths.append(str(mpath))
        return manifest_paths

    def test_checks_only(self, dataset, tmp_path, capsys):
        assert main(["--out", str(tmp_path / "vet"), "vet", str(dataset)]) == 0
        out = capsys.readouterr().out
        assert "HasFreeText: pass" in out
        assert (tmp_path / "vet" / "checks.json").exists()

    def test_pair_coverage_reproduces_fixture(self, tmp_path, capsys):
        manifests = self.make_pair(tmp_path)
        out_dir = tmp_path / "vet"
        code = main(
            ["--out", str(out_dir), "vet", *manifests, "--pair", "bikedekho", "cars_24",
             "--fixtures", str(default_fixture_dir())]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "0.778" in out
        assert (out_dir / "coverage.csv").exists()
        assert (out_dir / "coverage_binary.csv").exists()

    def test_failure_exits_five(self, tmp_path):
        missing = tmp_path / "nope.json"
        assert main(["vet", str(missing)]) == 5


class TestReportCommand:
    def test_rerender_from_csv(self, dataset, tmp_path, capsys):
        config = eval_config(tmp_path, dataset)
        out_dir = tmp_path / "run"
        assert main(["--out", str(out_dir), "eval", str(config)]) == 0
        capsys.readouterr()
        assert main(["report", str(out_dir / "results.csv")]) == 0
        rendered = capsys.readouterr().out
        assert rendered.startswith("dataset")
        assert "taps" in rendered
        assert rendered == (out_dir / "results.txt").read_text()
