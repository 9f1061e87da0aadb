"""Desk-scale predictive models behind one interface, plus a file-protocol
adapter for external prediction commands."""
from __future__ import annotations

import csv
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import MISSING, TabTextError, Table, TaskKind
from .embed import FeatureMatrix


class SingularSystem(TabTextError):
    pass


class NonFiniteInput(TabTextError):
    pass


class WidthMismatch(TabTextError):
    pass


class NonZeroExit(TabTextError):
    def __init__(self, code: int, stderr_tail: str):
        super().__init__(f"external command exited {code}: {stderr_tail}")
        self.code = code
        self.stderr_tail = stderr_tail


class BadOutputShape(TabTextError):
    pass


class ExternalTimeout(TabTextError):
    pass


# ---------------------------------------------------------------------------
# Model configurations


@dataclass(frozen=True)
class Ridge:
    alpha: float = 1.0

    tag = "ridge"


@dataclass(frozen=True)
class Logistic:
    l2: float = 1e-2
    max_iter: int = 1000

    tag = "logistic"


@dataclass(frozen=True)
class Gbdt:
    max_depth: int = 6
    learning_rate: float = 0.3
    n_rounds: int = 100

    tag = "gbdt"

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be at least 1")


@dataclass(frozen=True)
class External:
    command: str
    raw_table: bool = False
    timeout: float = 600.0

    tag = "external"


ModelKind = Ridge | Logistic | Gbdt | External


def make_model(spec: dict) -> ModelKind:
    kinds = {"ridge": Ridge, "logistic": Logistic, "gbdt": Gbdt, "external": External}
    params = dict(spec)
    kind = params.pop("kind")
    try:
        cls = kinds[kind]
    except KeyError:
        raise ValueError(f"unknown model kind: {kind!r}") from None
    return cls(**params)


# ---------------------------------------------------------------------------
# Ridge regression (closed form, unpenalized intercept via centering)


def ridge_solve(X: np.ndarray, y: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    n, d = X.shape
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    if alpha == 0.0 and np.linalg.matrix_rank(Xc) < d:
        raise SingularSystem("rank-deficient design with alpha=0")
    A = Xc.T @ Xc + alpha * np.eye(d)
    try:
        w = np.linalg.solve(A, Xc.T @ (y - y_mean))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    b = y_mean - float(x_mean @ w)
    return w, b


# ---------------------------------------------------------------------------
# L2 logistic regression (softmax, gradient descent with backtracking)


def _softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    e = np.exp(Z)
    return e / e.sum(axis=1, keepdims=True)


def logistic_solve(
    X: np.ndarray,
    Y: np.ndarray,
    l2: float,
    max_iter: int = 1000,
    tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimize mean cross-entropy + (l2/2)*||W||^2 over (W, b); Y is one-hot."""
    n, d = X.shape
    n_classes = Y.shape[1]
    W = np.zeros((d, n_classes))
    b = np.zeros(n_classes)

    def loss_of(W, b):
        P = _softmax(X @ W + b)
        ce = -np.sum(Y * np.log(P + 1e-300)) / n
        return ce + 0.5 * l2 * float((W * W).sum())

    loss = loss_of(W, b)
    step = 1.0
    for _ in range(max_iter):
        P = _softmax(X @ W + b)
        R = (P - Y) / n
        gW = X.T @ R + l2 * W
        gb = R.sum(axis=0)
        gnorm = max(np.abs(gW).max(), np.abs(gb).max())
        if gnorm < tol:
            break
        # backtracking line search (Armijo)
        step = min(step * 2.0, 1e4)
        decrease = float((gW * gW).sum() + (gb * gb).sum())
        while step > 1e-12:
            new_loss = loss_of(W - step * gW, b - step * gb)
            if new_loss <= loss - 1e-4 * step * decrease:
                break
            step *= 0.5
        W = W - step * gW
        b = b - step * gb
        loss = loss_of(W, b)
    return W, b


# ---------------------------------------------------------------------------
# Gradient-boosted trees (second-order, exact greedy splits)


_LEAF_L2 = 1.0
_HESS_FLOOR = 1e-6


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feats = self.feature[node]
            internal = feats >= 0
            if not internal.any():
                break
            rows = np.nonzero(internal)[0]
            goes_left = X[rows, feats[rows]] < self.threshold[node[rows]]
            node[rows] = np.where(
                goes_left, self.left[node[rows]], self.right[node[rows]]
            )
        return self.value[node]


def _best_split(X, order, g, h, mask):
    """Exact greedy scan over all features at once for one node.

    Returns (gain, feature, threshold) or None when no valid candidate
    exists (all feature values identical within the node).
    """
    d = X.shape[1]
    m = int(mask.sum())
    if m < 2:
        return None
    sel = mask[order]  # (n, d): node membership in per-column sorted order
    idx = order.T[sel.T].reshape(d, m).T  # (m, d) row ids, sorted per column
    cols = np.arange(d)
    xs = X[idx, cols]
    gs = np.cumsum(g[idx], axis=0)
    hs = np.cumsum(h[idx], axis=0)
    G, H = gs[-1, 0], hs[-1, 0]
    GL, HL = gs[:-1], hs[:-1]
    GR, HR = G - GL, H - HL
    parent = G * G / (max(H, _HESS_FLOOR) + _LEAF_L2)
    gain = 0.5 * (
        GL * GL / (np.maximum(HL, _HESS_FLOOR) + _LEAF_L2)
        + GR * GR / (np.maximum(HR, _HESS_FLOOR) + _LEAF_L2)
        - parent
    )
    gain[xs[1:] == xs[:-1]] = -np.inf
    flat = int(np.argmax(gain))
    i, j = flat // d, flat % d
    if not np.isfinite(gain[i, j]):
        return None
    return float(gain[i, j]), int(j), float((xs[i, j] + xs[i + 1, j]) / 2.0)


def _grow_tree(X, order, g, h, max_depth):
    feature, threshold, left, right, value = [], [], [], [], []

    def leaf(mask):
        G = g[mask].sum()
        H = h[mask].sum()
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(-G / (max(H, _HESS_FLOOR) + _LEAF_L2))
        return len(feature) - 1

    def grow(mask, depth):
        if depth >= max_depth or mask.sum() < 2:
            return leaf(mask)
        found = _best_split(X, order, g, h, mask)
        if found is None:
            return leaf(mask)
        gain, j, thr = found
        # zero-gain splits are taken only when gradients cancel inside the
        # node; they cost nothing and let deeper levels separate XOR-like
        # patterns that greedy gain alone cannot see
        cancelling = abs(g[mask].sum()) < 1e-9 < np.abs(g[mask]).sum()
        if gain <= 1e-12 and not (gain > -1e-12 and cancelling):
            return leaf(mask)
        node = len(feature)
        feature.append(j)
        threshold.append(thr)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        go_left = mask & (X[:, j] < thr)
        left[node] = grow(go_left, depth + 1)
        right[node] = grow(mask & ~go_left, depth + 1)
        return node

    grow(np.ones(X.shape[0], dtype=bool), 0)
    return _Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value),
    )


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


@dataclass
class _GbdtFit:
    trees: list  # regression/binary: [_Tree]; multiclass: [[_Tree per class]]
    base: float | np.ndarray
    learning_rate: float
    train_loss: list[float] = field(default_factory=list)


def _fit_gbdt(cfg: Gbdt, X: np.ndarray, y_enc: np.ndarray, task: TaskKind, n_classes: int):
    order = np.argsort(X, axis=0, kind="stable")
    fit = _GbdtFit([], 0.0, cfg.learning_rate)
    n = X.shape[0]
    if task is TaskKind.REGRESSION:
        fit.base = float(y_enc.mean())
        F = np.full(n, fit.base)
        for _ in range(cfg.n_rounds):
            tree = _grow_tree(X, order, F - y_enc, np.ones(n), cfg.max_depth)
            F += cfg.learning_rate * tree.predict(X)
            fit.trees.append(tree)
            fit.train_loss.append(float(np.mean((F - y_enc) ** 2)))
    elif n_classes == 2:
        F = np.zeros(n)
        for _ in range(cfg.n_rounds):
            p = _sigmoid(F)
            tree = _grow_tree(X, order, p - y_enc, p * (1 - p), cfg.max_depth)
            F += cfg.learning_rate * tree.predict(X)
            fit.trees.append(tree)
            p = _sigmoid(F)
            fit.train_loss.append(
                float(-np.mean(y_enc * np.log(p + 1e-15) + (1 - y_enc) * np.log(1 - p + 1e-15)))
            )
    else:
        Y = np.eye(n_classes)[y_enc.astype(int)]
        F = np.zeros((n, n_classes))
        for _ in range(cfg.n_rounds):
            P = _softmax(F)
            round_trees = []
            for c in range(n_classes):
                pc = P[:, c]
                tree = _grow_tree(X, order, pc - Y[:, c], pc * (1 - pc), cfg.max_depth)
                F[:, c] += cfg.learning_rate * tree.predict(X)
                round_trees.append(tree)
            fit.trees.append(round_trees)
            P = _softmax(F)
            fit.train_loss.append(float(-np.mean(np.sum(Y * np.log(P + 1e-15), axis=1))))
    return fit


def _gbdt_scores(fit: _GbdtFit, X: np.ndarray, task: TaskKind, n_classes: int) -> np.ndarray:
    n = X.shape[0]
    if task is TaskKind.REGRESSION:
        F = np.full(n, fit.base)
        for tree in fit.trees:
            F += fit.learning_rate * tree.predict(X)
        return F
    if n_classes == 2:
        F = np.zeros(n)
        for tree in fit.trees:
            F += fit.learning_rate * tree.predict(X)
        p = _sigmoid(F)
        return np.column_stack([1 - p, p])
    F = np.zeros((n, n_classes))
    for round_trees in fit.trees:
        for c, tree in enumerate(round_trees):
            F[:, c] += fit.learning_rate * tree.predict(X)
    return _softmax(F)


# ---------------------------------------------------------------------------
# Unified fit/predict


@dataclass
class FittedModel:
    kind: ModelKind
    task: TaskKind
    n_features_expected: int
    classes: list | None
    _inner: object

    @property
    def train_loss(self) -> list[float]:
        if isinstance(self._inner, _GbdtFit):
            return self._inner.train_loss
        return []

    def _check(self, X: np.ndarray):
        if X.ndim != 2 or X.shape[1] != self.n_features_expected:
            raise WidthMismatch(
                f"expected {self.n_features_expected} features, got {X.shape}"
            )

    def predict(self, X: np.ndarray):
        self._check(X)
        if X.shape[0] == 0:
            return np.array([]) if self.task is TaskKind.REGRESSION else []
        if self.task is TaskKind.REGRESSION:
            if isinstance(self._inner, _GbdtFit):
                return _gbdt_scores(self._inner, X, self.task, 0)
            w, b = self._inner
            return X @ w + b
        proba = self.predict_proba(X)
        return [self.classes[i] for i in np.argmax(proba, axis=1)]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        self._check(X)
        if self.task is TaskKind.REGRESSION:
            raise TabTextError("probabilities are undefined for regression")
        if isinstance(self._inner, _GbdtFit):
            return _gbdt_scores(self._inner, X, self.task, len(self.classes))
        W, b = self._inner
        return _softmax(X @ W + b)


def fit(kind: ModelKind, X: np.ndarray, y, task: TaskKind) -> FittedModel:
    X = np.asarray(X, dtype=float)
    if not np.isfinite(X).all():
        raise NonFiniteInput("feature matrix contains non-finite values")
    if X.shape[0] != len(y):
        raise ValueError("X and y disagree on row count")

    if task is TaskKind.REGRESSION:
        y_arr = np.asarray(y, dtype=float)
        if not np.isfinite(y_arr).all():
            raise NonFiniteInput("target contains non-finite values")
        if isinstance(kind, Ridge):
            inner = ridge_solve(X, y_arr, kind.alpha)
        elif isinstance(kind, Gbdt):
            inner = _fit_gbdt(kind, X, y_arr, task, 0)
        else:
            raise TabTextError(f"{kind.tag} does not support regression")
        return FittedModel(kind, task, X.shape[1], None, inner)

    classes = sorted(set(y), key=str)
    index = {c: i for i, c in enumerate(classes)}
    y_enc = np.array([index[v] for v in y], dtype=float)
    if isinstance(kind, Logistic):
        Y = np.eye(len(classes))[y_enc.astype(int)]
        inner = logistic_solve(X, Y, kind.l2, kind.max_iter)
    elif isinstance(kind, Gbdt):
        inner = _fit_gbdt(kind, X, y_enc, task, len(classes))
    else:
        raise TabTextError(f"{kind.tag} does not support classification")
    return FittedModel(kind, task, X.shape[1], classes, inner)


# ---------------------------------------------------------------------------
# External model protocol


TARGET_FIELD = "__target"


def _write_matrix_csv(path: Path, fm: FeatureMatrix, include_target: bool):
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = fm.feature_names()
        if include_target:
            header = header + [TARGET_FIELD]
        writer.writerow(header)
        for i in range(fm.n_rows):
            row = [repr(float(v)) for v in fm.X[i]]
            if include_target:
                row.append(str(fm.y[i]))
            writer.writerow(row)


def _write_table_csv(path: Path, table: Table, include_target: bool):
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        cols = table.feature_columns
        header = [c.name for c in cols]
        if include_target:
            header = header + [TARGET_FIELD]
        writer.writerow(header)
        for i in range(table.n_rows):
            row = ["" if c.values[i] is MISSING else str(c.values[i]) for c in cols]
            if include_target:
                row.append(str(table.target_column.values[i]))
            writer.writerow(row)


def run_external(
    command: str,
    train: FeatureMatrix | Table,
    test: FeatureMatrix | Table,
    timeout: float = 600.0,
):
    """Drive an external predictor over the CSV file protocol.

    Writes train.csv (features plus __target) and test.csv (features only)
    to a scratch directory, invokes `command train.csv test.csv out.csv`,
    and parses out.csv: a 'prediction' column plus optional per-class
    'proba_<label>' columns. Returns (predictions, probas-or-None).
    """
    n_test = test.n_rows
    with tempfile.TemporaryDirectory(prefix="tabtext-ext-") as tmp:
        tmpdir = Path(tmp)
        train_path = tmpdir / "train.csv"
        test_path = tmpdir / "test.csv"
        out_path = tmpdir / "out.csv"
        if isinstance(train, Table):
            _write_table_csv(train_path, train, include_target=True)
            _write_table_csv(test_path, test, include_target=False)
        else:
            _write_matrix_csv(train_path, train, include_target=True)
            _write_matrix_csv(test_path, test, include_target=False)
        argv = shlex.split(command) + [str(train_path), str(test_path), str(out_path)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired as exc:
            raise ExternalTimeout(f"external command exceeded {timeout}s") from exc
        if proc.returncode != 0:
            raise NonZeroExit(proc.returncode, proc.stderr[-2000:])
        if not out_path.exists():
            raise BadOutputShape("external command produced no output file")
        with out_path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "prediction":
        raise BadOutputShape("output header must start with 'prediction'")
    header, body = rows[0], rows[1:]
    if len(body) != n_test:
        raise BadOutputShape(f"expected {n_test} prediction rows, got {len(body)}")
    if any(len(r) != len(header) for r in body):
        raise BadOutputShape("ragged prediction rows")
    predictions = [r[0] for r in body]
    proba_labels = [h[len("proba_") :] for h in header[1:] if h.startswith("proba_")]
    probas = None
    if proba_labels:
        try:
            probas = {
                lab: np.array([float(r[1 + i]) for r in body])
                for i, lab in enumerate(proba_labels)
            }
        except ValueError:
            raise BadOutputShape("non-numeric probability cell") from None
    return predictions, probas
