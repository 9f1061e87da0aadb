import numpy as np
import pytest

from tabtext.core import Column, ColumnRole, Table, TaskKind
from tabtext.embed import FeatureMatrix
from tabtext.models import (
    BadOutputShape,
    Gbdt,
    Logistic,
    NonFiniteInput,
    NonZeroExit,
    Ridge,
    SingularSystem,
    WidthMismatch,
    fit,
    ridge_solve,
    run_external,
)

R, B, M = TaskKind.REGRESSION, TaskKind.BINARY, TaskKind.MULTICLASS


class TestRidge:
    def test_noiseless_recovery_small_alpha(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((200, 2))
        y = 2.0 * X[:, 0] - X[:, 1]
        model = fit(Ridge(alpha=1e-10), X, y, R)
        w, b = model._inner
        assert np.allclose(w, [2.0, -1.0], atol=1e-6)
        assert abs(b) < 1e-6

    def test_gradient_at_solution(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((50, 4))
        y = rng.standard_normal(50)
        alpha = 0.7
        w, b = ridge_solve(X, y, alpha)
        resid = X @ w + b - y
        grad_w = 2.0 * (X.T @ resid) + 2.0 * alpha * w
        grad_b = 2.0 * resid.sum()
        norm = np.sqrt((grad_w**2).sum() + grad_b**2)
        assert norm < 1e-6 * (1.0 + np.linalg.norm(y))

    def test_singular_system(self):
        X = np.ones((10, 2))
        X[:, 1] = X[:, 0]  # rank 1
        with pytest.raises(SingularSystem):
            ridge_solve(X, np.arange(10.0), alpha=0.0)

    def test_non_finite_rejected(self):
        X = np.array([[1.0], [np.nan]])
        with pytest.raises(NonFiniteInput):
            fit(Ridge(), X, np.array([1.0, 2.0]), R)


class TestLogistic:
    def test_separable_1d(self):
        X = np.linspace(-2, 2, 30).reshape(-1, 1)
        y = ["neg" if v < 0 else "pos" for v in X[:, 0]]
        model = fit(Logistic(), X, y, B)
        assert model.predict(X) == y

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((40, 3))
        y = rng.integers(0, 3, 40).tolist()
        model = fit(Logistic(), X, y, M)
        proba = model.predict_proba(X)
        assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)

    def test_empty_predict(self):
        X = np.zeros((6, 2))
        y = [0, 1, 0, 1, 0, 1]
        model = fit(Logistic(), X + np.arange(6)[:, None], y, B)
        assert model.predict(np.zeros((0, 2))) == []

    def test_width_mismatch(self):
        X = np.random.default_rng(3).standard_normal((10, 2))
        model = fit(Logistic(), X, [0, 1] * 5, B)
        with pytest.raises(WidthMismatch):
            model.predict(np.zeros((2, 5)))


class TestGbdt:
    def test_xor_shattered_at_depth_two(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = ["a", "b", "b", "a"]
        model = fit(Gbdt(max_depth=2, learning_rate=0.3, n_rounds=20), X, y, B)
        assert model.predict(X) == y

    def test_regression_fits_linear(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(-2, 2, size=(200, 1))
        y = 3.0 * X[:, 0]
        model = fit(Gbdt(max_depth=3, learning_rate=0.3, n_rounds=60), X, y, R)
        pred = model.predict(X)
        assert float(np.mean((pred - y) ** 2)) < 0.05

    def test_train_loss_non_increasing(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((80, 4))
        y_reg = X @ np.array([1.0, -2.0, 0.5, 0.0]) + 0.1 * rng.standard_normal(80)
        reg = fit(Gbdt(max_depth=3, n_rounds=30), X, y_reg, R)
        for before, after in zip(reg.train_loss, reg.train_loss[1:]):
            assert after <= before + 1e-12
        y_clf = ["p" if v > 0 else "n" for v in y_reg]
        clf = fit(Gbdt(max_depth=3, n_rounds=30), X, y_clf, B)
        for before, after in zip(clf.train_loss, clf.train_loss[1:]):
            assert after <= before + 1e-12

    def test_multiclass_separable(self):
        rng = np.random.default_rng(6)
        centers = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
        X = np.vstack([c + 0.3 * rng.standard_normal((20, 2)) for c in centers])
        y = ["a"] * 20 + ["b"] * 20 + ["c"] * 20
        model = fit(Gbdt(max_depth=3, n_rounds=20), X, y, M)
        assert model.predict(X) == y
        proba = model.predict_proba(X)
        assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)

    def test_label_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((40, 3))
        y = ["cat" if v > 0 else "dog" for v in X[:, 0]]
        swap = {"cat": "dog", "dog": "cat"}
        y_swapped = [swap[v] for v in y]
        m1 = fit(Gbdt(max_depth=3, n_rounds=15), X, y, B)
        m2 = fit(Gbdt(max_depth=3, n_rounds=15), X, y_swapped, B)
        assert [swap[v] for v in m1.predict(X)] == m2.predict(X)

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((50, 5))
        y = (X[:, 0] > 0).astype(int).tolist()
        a = fit(Gbdt(max_depth=4, n_rounds=10), X, y, B).predict(X)
        b = fit(Gbdt(max_depth=4, n_rounds=10), X, y, B).predict(X)
        assert a == b

    def test_config_validation(self):
        with pytest.raises(ValueError):
            Gbdt(max_depth=0)
        with pytest.raises(ValueError):
            Gbdt(learning_rate=0.0)
        with pytest.raises(ValueError):
            Gbdt(n_rounds=0)


def make_fm(n=8, d=2, task=B, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    if task is R:
        y = X[:, 0] * 2.0
    else:
        y = ["x" if v > 0 else "y" for v in X[:, 0]]
    prov = [(f"f{j}", "num", 0) for j in range(d)]
    return FeatureMatrix(X, prov, y)


MAJORITY_STUB = """\
import csv, sys
train, test, out = sys.argv[1], sys.argv[2], sys.argv[3]
with open(train) as fh:
    rows = list(csv.DictReader(fh))
labels = [r["__target"] for r in rows]
top = max(set(labels), key=labels.count)
with open(test) as fh:
    n = sum(1 for _ in csv.DictReader(fh))
with open(out, "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["prediction"])
    for _ in range(n):
        w.writerow([top])
"""


class TestRunExternal:
    def test_majority_stub_round_trip(self, tmp_path):
        stub = tmp_path / "stub.py"
        stub.write_text(MAJORITY_STUB)
        train = make_fm(10, seed=1)
        test = make_fm(4, seed=2)
        preds, probas = run_external(f"python3 {stub}", train, test)
        assert len(preds) == 4
        assert set(preds) <= {"x", "y"}
        assert probas is None

    def test_nonzero_exit(self, tmp_path):
        stub = tmp_path / "boom.py"
        stub.write_text("import sys; sys.stderr.write('kaput'); sys.exit(1)\n")
        with pytest.raises(NonZeroExit) as err:
            run_external(f"python3 {stub}", make_fm(), make_fm(4, seed=3))
        assert err.value.code == 1
        assert "kaput" in err.value.stderr_tail

    def test_short_output_is_bad_shape(self, tmp_path):
        stub = tmp_path / "short.py"
        stub.write_text(
            "import sys\nopen(sys.argv[3], 'w').write('prediction\\nx\\n')\n"
        )
        with pytest.raises(BadOutputShape):
            run_external(f"python3 {stub}", make_fm(), make_fm(4, seed=4))

    def test_raw_table_mode_passes_text_verbatim(self, tmp_path):
        stub = tmp_path / "echo_header.py"
        stub.write_text(
            "import csv, sys\n"
            "with open(sys.argv[1]) as fh:\n"
            "    header = next(csv.reader(fh))\n"
            "assert 'notes' in header, header\n"
            "with open(sys.argv[2]) as fh:\n"
            "    n = sum(1 for _ in fh) - 1\n"
            "with open(sys.argv[3], 'w') as fh:\n"
            "    fh.write('prediction\\n' + 'ok\\n' * n)\n"
        )
        cols = [
            Column("num", ColumnRole.NUMERICAL, [1.0, 2.0, 3.0]),
            Column("notes", ColumnRole.TEXTUAL, ["free text", "more text", "words"]),
            Column("y", None, ["a", "b", "a"]),
        ]
        table = Table("raw", cols, "y", TaskKind.BINARY)
        preds, _ = run_external(f"python3 {stub}", table, table)
        assert preds == ["ok", "ok", "ok"]

    def test_proba_columns_parsed(self, tmp_path):
        stub = tmp_path / "proba.py"
        stub.write_text(
            "import csv, sys\n"
            "with open(sys.argv[2]) as fh:\n"
            "    n = sum(1 for _ in fh) - 1\n"
            "with open(sys.argv[3], 'w', newline='') as fh:\n"
            "    w = csv.writer(fh)\n"
            "    w.writerow(['prediction', 'proba_x', 'proba_y'])\n"
            "    for _ in range(n):\n"
            "        w.writerow(['x', '0.8', '0.2'])\n"
        )
        preds, probas = run_external(f"python3 {stub}", make_fm(), make_fm(3, seed=5))
        assert preds == ["x", "x", "x"]
        assert np.allclose(probas["x"], 0.8)
