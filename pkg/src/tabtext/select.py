"""Feature-downsampling strategies: score every feature, keep the top k."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import TabTextError, TaskKind
from .embed import FeatureMatrix
from .models import _softmax, logistic_solve, ridge_solve

SELECTOR_KINDS = (
    "ttest",
    "anova",
    "variance",
    "pca",
    "l1",
    "correlation",
    "shap",
    "random",
)

_ALL_TASKS = {TaskKind.REGRESSION, TaskKind.BINARY, TaskKind.MULTICLASS}

_APPLICABLE: dict[str, set[TaskKind]] = {
    "ttest": {TaskKind.BINARY},
    "anova": {TaskKind.BINARY, TaskKind.MULTICLASS},
    "variance": _ALL_TASKS,
    "pca": _ALL_TASKS,
    "l1": _ALL_TASKS,
    "correlation": {TaskKind.REGRESSION},
    "shap": _ALL_TASKS,
    "random": _ALL_TASKS,
}

_EPS = 1e-12


class NotBinary(TabTextError):
    pass


class DegenerateClasses(TabTextError):
    pass


class SelectorNotApplicable(TabTextError):
    pass


class IndexOutOfRange(TabTextError):
    pass


class NoConvergence(UserWarning):
    pass


def applicable(kind: str, task: TaskKind) -> bool:
    if kind not in _APPLICABLE:
        raise ValueError(f"unknown selector kind: {kind!r}")
    return task in _APPLICABLE[kind]


@dataclass
class SelectorResult:
    kind: str
    scores: np.ndarray
    selected: list[int]
    k: int
    seed: int

    def report(self, provenance=None) -> dict:
        top = sorted(range(len(self.scores)), key=lambda j: (-self.scores[j], j))[:20]
        entry = lambda j: {
            "index": j,
            "score": float(self.scores[j]),
            **({"source": provenance[j][0], "encoder": provenance[j][1]} if provenance else {}),
        }
        return {
            "kind": self.kind,
            "k": self.k,
            "seed": self.seed,
            "top_features": [entry(j) for j in top],
        }


def _top_k(kind: str, scores: np.ndarray, k: int, seed: int = 0) -> SelectorResult:
    if k < 1:
        raise ValueError("k must be at least 1")
    d = len(scores)
    take = min(k, d)
    # higher score wins; ties go to the lower original index
    order = np.lexsort((np.arange(d), -scores))
    return SelectorResult(kind, scores, sorted(int(j) for j in order[:take]), k, seed)


def _groups(y) -> dict:
    out: dict = {}
    for i, v in enumerate(y):
        out.setdefault(v, []).append(i)
    return out


# ---------------------------------------------------------------------------
# Statistical tests


def select_ttest(X: np.ndarray, y, k: int) -> SelectorResult:
    """Per-feature Welch t statistic between the two classes."""
    groups = _groups(y)
    if len(groups) != 2:
        raise NotBinary(f"t-test needs exactly 2 classes, got {len(groups)}")
    (rows0, rows1) = (groups[lab] for lab in sorted(groups, key=str))
    if min(len(rows0), len(rows1)) < 2:
        raise NotBinary("each class needs at least 2 samples")
    X0, X1 = X[rows0], X[rows1]
    var0 = X0.var(axis=0, ddof=1)
    var1 = X1.var(axis=0, ddof=1)
    t = (X1.mean(axis=0) - X0.mean(axis=0)) / np.sqrt(
        var1 / len(rows1) + var0 / len(rows0) + _EPS
    )
    return _top_k("ttest", np.abs(t), k)


def select_anova(X: np.ndarray, y, k: int) -> SelectorResult:
    """One-way F statistic per feature across all classes."""
    groups = _groups(y)
    if len(groups) < 2 or any(len(rows) < 2 for rows in groups.values()):
        raise DegenerateClasses("ANOVA needs >= 2 classes with >= 2 samples each")
    n = X.shape[0]
    grand = X.mean(axis=0)
    between = np.zeros(X.shape[1])
    within = np.zeros(X.shape[1])
    for rows in groups.values():
        Xg = X[rows]
        gm = Xg.mean(axis=0)
        between += len(rows) * (gm - grand) ** 2
        within += ((Xg - gm) ** 2).sum(axis=0)
    msb = between / (len(groups) - 1)
    msw = within / (n - len(groups))
    return _top_k("anova", msb / (msw + _EPS), k)


# ---------------------------------------------------------------------------
# Unsupervised filters


def select_variance(X: np.ndarray, k: int) -> SelectorResult:
    return _top_k("variance", X.var(axis=0), k)


def select_pca(X: np.ndarray, k: int) -> SelectorResult:
    """Score each feature by its |loading| summed over components, weighted
    by explained variance ratio. Columns are centered, not rescaled."""
    if X.shape[0] < 2:
        raise TabTextError("PCA needs at least 2 rows")
    Xc = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    lam = s**2 / X.shape[0]
    keep = lam >= _EPS
    if not keep.any():
        return _top_k("pca", np.zeros(X.shape[1]), k)
    lam = lam[keep]
    loadings = vt[keep].T  # d x c
    evr = lam / lam.sum()
    return _top_k("pca", np.abs(loadings) @ evr, k)


def select_random(d: int, k: int, seed: int) -> SelectorResult:
    rng = np.random.default_rng([seed, d, 0x7A])
    if k < 1:
        raise ValueError("k must be at least 1")
    chosen = rng.choice(d, size=min(k, d), replace=False)
    scores = np.zeros(d)
    scores[chosen] = 1.0
    result = SelectorResult("random", scores, sorted(int(j) for j in chosen), k, seed)
    return result


# ---------------------------------------------------------------------------
# Correlation filter


def _rankdata(a: np.ndarray) -> np.ndarray:
    """Average ranks, 1-based (ties share the mean of their positions)."""
    order = np.argsort(a, kind="stable")
    sa = a[order]
    ranks = np.empty(len(a))
    pos = np.arange(1.0, len(a) + 1.0)
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and sa[j + 1] == sa[i]:
            j += 1
        pos[i : j + 1] = (i + j + 2) / 2.0
        i = j + 1
    ranks[order] = pos
    return ranks


def _abs_pearson(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt((Xc**2).sum(axis=0))
    sy = np.sqrt((yc**2).sum())
    denom = sx * sy
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(denom > 0, Xc.T @ yc / np.where(denom > 0, denom, 1.0), 0.0)
    return np.abs(corr)


def select_correlation(X: np.ndarray, y: np.ndarray, k: int, method: str = "pearson") -> SelectorResult:
    y = np.asarray(y, dtype=float)
    if method == "pearson":
        scores = _abs_pearson(X, y)
    elif method == "spearman":
        Xr = np.column_stack([_rankdata(X[:, j]) for j in range(X.shape[1])])
        scores = _abs_pearson(Xr, _rankdata(y))
    else:
        raise ValueError(f"unknown correlation method: {method!r}")
    return _top_k("correlation", scores, k)


# ---------------------------------------------------------------------------
# L1-regularized linear fits


def _standardize(X: np.ndarray) -> np.ndarray:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return (X - mean) / np.where(std > 0, std, 1.0)


def soft_threshold(a, lam):
    return np.sign(a) * np.maximum(np.abs(a) - lam, 0.0)


def lasso_cd(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = 1e-6,
    max_sweeps: int = 1000,
    w0: np.ndarray | None = None,
) -> tuple[np.ndarray, bool]:
    """Cyclic coordinate descent for (1/2n)||y - Xw||^2 + lam*||w||_1.

    Callers pass X with zero-mean columns; y is centered here so the
    intercept never enters. Converged when no coordinate moves more
    than `tol` in a full sweep.
    """
    n, d = X.shape
    yc = y - y.mean()
    w = np.zeros(d) if w0 is None else w0.copy()
    col_sq = (X * X).sum(axis=0) / n
    r = yc - X @ w
    for _ in range(max_sweeps):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] <= 0:
                continue
            rho = (X[:, j] @ r) / n + col_sq[j] * w[j]
            new_wj = soft_threshold(rho, lam) / col_sq[j]
            delta = new_wj - w[j]
            if delta != 0.0:
                r -= delta * X[:, j]
                w[j] = new_wj
                max_delta = max(max_delta, abs(delta))
        if max_delta < tol:
            return w, True
    return w, False


def _spectral_norm_sq(X: np.ndarray, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(X.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(30):
        u = X.T @ (X @ v)
        nu = np.linalg.norm(u)
        if nu == 0:
            return 0.0
        v = u / nu
    return float(v @ (X.T @ (X @ v)))


def l1_logistic_prox(
    X: np.ndarray,
    Y: np.ndarray,
    lam: float,
    tol: float = 1e-6,
    max_iter: int = 1000,
    W0: np.ndarray | None = None,
) -> tuple[np.ndarray, bool]:
    """Proximal gradient for mean cross-entropy + lam*||W||_1 (soft-threshold
    step on the weights, plain step on the unpenalized intercept)."""
    n, d = X.shape
    n_classes = Y.shape[1]
    W = np.zeros((d, n_classes)) if W0 is None else W0.copy()
    prior = Y.mean(axis=0)
    b = np.log(prior + 1e-12)
    lips = 0.5 * _spectral_norm_sq(X) / n + 1e-12
    step = 1.0 / lips
    for _ in range(max_iter):
        P = _softmax(X @ W + b)
        R = (P - Y) / n
        W_new = soft_threshold(W - step * (X.T @ R), step * lam)
        b_new = b - step * R.sum(axis=0)
        delta = max(np.abs(W_new - W).max(), np.abs(b_new - b).max())
        W, b = W_new, b_new
        if delta < tol:
            return W, True
    return W, False


def lambda_path(lam_max: float, points: int = 20, decades: float = 3.0) -> np.ndarray:
    return np.geomspace(lam_max, lam_max * 10.0**-decades, points)


def select_l1(
    X: np.ndarray,
    y,
    task: TaskKind,
    k: int,
    path: np.ndarray | None = None,
) -> SelectorResult:
    """Lasso (regression) or L1 logistic (classification) on internally
    standardized features; the largest path lambda yielding >= k nonzero
    weights wins, else the smallest."""
    Xs = _standardize(X)
    n = X.shape[0]
    if task is TaskKind.REGRESSION:
        y_arr = np.asarray(y, dtype=float)
        yc = y_arr - y_arr.mean()
        lam_max = np.abs(Xs.T @ yc).max() / n
    else:
        classes = sorted(set(y), key=str)
        Y = np.zeros((n, len(classes)))
        for i, v in enumerate(y):
            Y[i, classes.index(v)] = 1.0
        lam_max = np.abs(Xs.T @ (Y.mean(axis=0) - Y)).max() / n
    if lam_max <= 0:
        return _top_k("l1", np.zeros(X.shape[1]), k)
    lams = lambda_path(lam_max) if path is None else np.asarray(path, dtype=float)

    converged = True
    weights = prev = None
    for lam in lams:  # warm start down the path
        if task is TaskKind.REGRESSION:
            w, ok = lasso_cd(Xs, np.asarray(y, dtype=float), float(lam), w0=prev)
            scores = np.abs(w)
        else:
            w, ok = l1_logistic_prox(Xs, Y, float(lam), W0=prev)
            scores = np.abs(w).mean(axis=1)
        prev = w
        converged = converged and ok
        weights = scores
        if int((scores > 0).sum()) >= k:
            break
    if not converged:
        warnings.warn("L1 path fit hit the sweep limit; using last iterate", NoConvergence)
    return _top_k("l1", weights, k)


# ---------------------------------------------------------------------------
# Model-attribution scores (linear surrogate, exact attributions)


def select_shap(X: np.ndarray, y, task: TaskKind, k: int, seed: int = 0) -> SelectorResult:
    """Mean absolute per-sample attribution of a linear surrogate fitted on
    standardized features. For a linear model under feature independence the
    attribution of feature j at sample i is exactly w_j * (x_ij - mean_j)."""
    Xs = _standardize(X)
    if task is TaskKind.REGRESSION:
        w, _ = ridge_solve(Xs, np.asarray(y, dtype=float), alpha=1.0)
        phi = np.abs(Xs * w)
        scores = phi.mean(axis=0)
    else:
        classes = sorted(set(y), key=str)
        Y = np.zeros((X.shape[0], len(classes)))
        for i, v in enumerate(y):
            Y[i, classes.index(v)] = 1.0
        W, _ = logistic_solve(Xs, Y, l2=1e-2, max_iter=500)
        per_class = np.stack([np.abs(Xs * W[:, c]).mean(axis=0) for c in range(Y.shape[1])])
        scores = per_class.mean(axis=0)
    return _top_k("shap", scores, k, seed)


# ---------------------------------------------------------------------------
# Dispatch and application


def default_k(feature_cap: int, n_non_text: int, floor: int = 10) -> int:
    return max(feature_cap - n_non_text, floor)


def run_selector(
    kind: str,
    X: np.ndarray,
    y,
    task: TaskKind,
    k: int,
    seed: int,
    corr_method: str = "pearson",
) -> SelectorResult:
    if not applicable(kind, task):
        raise SelectorNotApplicable(f"{kind} does not support {task.value}")
    if kind == "ttest":
        return select_ttest(X, y, k)
    if kind == "anova":
        return select_anova(X, y, k)
    if kind == "variance":
        return select_variance(X, k)
    if kind == "pca":
        return select_pca(X, k)
    if kind == "l1":
        return select_l1(X, y, task, k)
    if kind == "correlation":
        return select_correlation(X, np.asarray(y, dtype=float), k, corr_method)
    if kind == "shap":
        return select_shap(X, y, task, k, seed)
    if kind == "random":
        return select_random(X.shape[1], k, seed)
    raise ValueError(f"unknown selector kind: {kind!r}")


def apply_selection(matrix: FeatureMatrix, result: SelectorResult) -> FeatureMatrix:
    """Keep the selected columns (ascending original order), provenance
    intact. The selector must have been fitted on the train fold; the same
    indices are applied verbatim to the test fold."""
    d = matrix.width
    if any(j < 0 or j >= d for j in result.selected):
        raise IndexOutOfRange(f"selected indices outside [0, {d})")
    cols = sorted(result.selected)
    return FeatureMatrix(
        matrix.X[:, cols], [matrix.provenance[j] for j in cols], matrix.y
    )
