"""Edge-path coverage: timeouts, threaded grids, delimiters, multi-table
break averages, and the HTTP chat client against a local stub server."""
import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from tabtext.breaklab import NoiseDilution, make_break_table, run_break_suite, toy_vector_file
from tabtext.cli import main
from tabtext.core import TaskKind, k_fold_split
from tabtext.embed import WordVecAvg
from tabtext.ingest import DatasetManifest, load_csv
from tabtext.models import ExternalTimeout, Gbdt, run_external
from tabtext.vetting import HttpChatLlmClient

from test_evaluate import clf_manifest, text_signal_table
from test_models import make_fm


class TestExternalTimeout:
    def test_sleeping_command_times_out(self, tmp_path):
        stub = tmp_path / "sleepy.py"
        stub.write_text("import time; time.sleep(30)\n")
        with pytest.raises(ExternalTimeout):
            run_external(f"python3 {stub}", make_fm(), make_fm(4, seed=1), timeout=0.5)


class TestThreadedGrid:
    def test_jobs_two_matches_sequential(self):
        from tabtext.embed import HashedNgram
        from tabtext.evaluate import ExperimentSpec, run_grid
        from tabtext.models import Logistic

        specs = [
            ExperimentSpec(clf_manifest(), HashedNgram(buckets=32), None, Logistic(),
                           with_text, seed=3)
            for with_text in (True, False)
        ]
        tables = {"synth-clf": text_signal_table()}
        seq = run_grid(specs, tables=tables, jobs=1)
        par = run_grid(specs, tables=tables, jobs=2)
        assert [r.per_fold for r in seq] == [r.per_fold for r in par]


class TestDelimiterOverride:
    def test_semicolon(self, tmp_path):
        p = tmp_path / "semi.csv"
        p.write_text("a;y\n1;x\n2;y\n")
        manifest = DatasetManifest("semi", str(p), "y", TaskKind.BINARY, delimiter=";")
        table = load_csv(manifest)
        assert table.column("a").values == ["1", "2"]


class TestSmallestFold:
    def test_two_folds_two_rows(self):
        from test_core import make_regression_table

        table = make_regression_table(2)
        fold = k_fold_split(table, 2, seed=0)
        assert sorted(fold.fold_of_row) == [0, 1]


class TestMultiTableBreakSuite:
    def test_average_row_over_two_tables(self):
        tables = [
            make_break_table(120, seed=1, name="tbl-one"),
            make_break_table(120, seed=2, name="tbl-two"),
        ]
        embedders = [WordVecAvg(str(toy_vector_file()))]
        matrix = run_break_suite(
            tables, embedders, Gbdt(3, 0.3, 10), seed=0, scenarios=[NoiseDilution(3)]
        )
        per_table = [
            matrix.values[("noise_dilution", name, "wordvec")] for name in matrix.tables
        ]
        assert matrix.average("noise_dilution", "wordvec") == pytest.approx(
            float(np.mean(per_table))
        )
        text = matrix.to_text()
        assert "tbl-one" in text and "tbl-two" in text and "Average" in text


class _ChatStub(BaseHTTPRequestHandler):
    canned = {"choices": [{"message": {"content": "Final Rating: GREEN - looks usable."}}]}

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        assert body["messages"][0]["role"] == "user"
        payload = json.dumps(self.canned).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


class TestHttpChatClient:
    def test_round_trip_against_local_stub(self, monkeypatch):
        server = HTTPServer(("127.0.0.1", 0), _ChatStub)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            monkeypatch.setenv("LLM_API_KEY", "test-key")
            client = HttpChatLlmClient(
                f"http://127.0.0.1:{server.server_port}/v1/chat/completions", "stub-model"
            )
            raw = client.complete("rate this dataset", key=None)
            assert "Final Rating: GREEN" in raw
        finally:
            server.shutdown()
            thread.join(timeout=5)


class TestCliSeedOverride:
    def test_flag_overrides_config_seed(self, tmp_path, capsys):
        csv_path = tmp_path / "d.csv"
        rows = ["t,x,y"]
        rng = np.random.default_rng(0)
        for i in range(30):
            rows.append(f"word{i % 6} tail,{float(rng.standard_normal()):.4f},{i % 2}")
        csv_path.write_text("\n".join(rows) + "\n")
        manifest = tmp_path / "m.json"
        manifest.write_text(json.dumps({
            "name": "d", "csv_path": str(csv_path), "target_column": "y",
            "task": "binary", "role_overrides": {"t": "textual"},
        }))
        config = tmp_path / "c.json"
        config.write_text(json.dumps({
            "manifests": [str(manifest)],
            "embedders": [{"kind": "hashed", "buckets": 16}],
            "models": [{"kind": "logistic"}],
            "with_text": [True],
            "seed": 0,
        }))
        assert main(["--seed", "9", "--out", str(tmp_path / "r"), "eval", str(config)]) == 0
        content = (tmp_path / "r" / "results.csv").read_text()
        assert content.strip().endswith(",9")
