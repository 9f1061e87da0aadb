"""Text-to-numeric embedders and model-ready feature matrix assembly."""
from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .core import MISSING, ColumnRole, FoldAssignment, TabTextError, Table, TaskKind


class EmptyCorpus(TabTextError):
    pass


class MalformedVectorFile(TabTextError):
    pass


class RowCountMismatch(TabTextError):
    pass


class ChecksumMismatch(TabTextError):
    pass


_TOKEN_RE = re.compile(r"[a-z0-9]+")

_EPS = 1e-12


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


def word_ngrams(tokens: list[str], lo: int, hi: int) -> list[str]:
    grams = []
    for n in range(lo, hi + 1):
        grams.extend(" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
    return grams


# ---------------------------------------------------------------------------
# TF-IDF


@dataclass(frozen=True)
class TfIdf:
    """Word n-gram TF-IDF with smooth idf and L2-normalized rows."""

    ngram_lo: int = 1
    ngram_hi: int = 2
    max_vocab: int = 20000

    tag = "tfidf"

    def __post_init__(self):
        if self.ngram_lo > self.ngram_hi:
            raise ValueError("ngram_lo must not exceed ngram_hi")

    def fit(self, train_texts: list[str]) -> "TfIdfModel":
        if not train_texts:
            raise EmptyCorpus("tf-idf fit needs at least one document")
        df: Counter = Counter()
        for text in train_texts:
            df.update(set(word_ngrams(tokenize(text), self.ngram_lo, self.ngram_hi)))
        if not df:
            raise EmptyCorpus("training corpus contains no terms")
        # cap by document frequency, ties broken lexicographically
        capped = sorted(df, key=lambda t: (-df[t], t))[: self.max_vocab]
        vocab = {term: i for i, term in enumerate(sorted(capped))}
        n_docs = len(train_texts)
        idf = np.empty(len(vocab))
        for term, i in vocab.items():
            idf[i] = np.log((1.0 + n_docs) / (1.0 + df[term])) + 1.0
        return TfIdfModel(self, vocab, idf)


@dataclass(frozen=True)
class TfIdfModel:
    config: TfIdf
    vocab: dict[str, int]
    idf: np.ndarray

    tag = "tfidf"

    @property
    def dim(self) -> int:
        return len(self.vocab)

    def transform(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        lo, hi = self.config.ngram_lo, self.config.ngram_hi
        get = self.vocab.get
        for r, text in enumerate(texts):
            for term, count in Counter(word_ngrams(tokenize(text), lo, hi)).items():
                col = get(term)
                if col is not None:
                    out[r, col] = count * self.idf[col]
        norms = np.sqrt((out * out).sum(axis=1))
        out /= np.where(norms > 0, norms, 1.0)[:, None]
        return out


# ---------------------------------------------------------------------------
# Averaged word vectors


class WordVecModel:
    """Word-vector table; a text embeds to the mean of its in-vocabulary
    token vectors (zero vector when every token is unknown)."""

    tag = "wordvec"

    def __init__(self, vectors: dict[str, np.ndarray], dim: int):
        self.vectors = vectors
        self.dim = dim

    def transform(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for r, text in enumerate(texts):
            hits = [self.vectors[t] for t in tokenize(text) if t in self.vectors]
            if hits:
                out[r] = np.mean(hits, axis=0)
        return out


_VECTOR_CACHE: dict[tuple[str, int], WordVecModel] = {}


def load_word_vectors(path: str | Path) -> WordVecModel:
    """Plain-text vector file: header '<count> <dim>', then one token and its
    floats per line. Parsed files are cached by path and mtime since models
    are immutable and folds reload the same file."""
    p = Path(path)
    key = (str(p.resolve()), p.stat().st_mtime_ns)
    cached = _VECTOR_CACHE.get(key)
    if cached is not None:
        return cached
    lines = p.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MalformedVectorFile("line 1: empty file")
    head = lines[0].split()
    if len(head) != 2 or not all(p.isdigit() for p in head):
        raise MalformedVectorFile("line 1: expected '<count> <dim>' header")
    count, dim = int(head[0]), int(head[1])
    vectors: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines[1 : count + 1], start=2):
        parts = line.split()
        if len(parts) != dim + 1:
            raise MalformedVectorFile(f"line {lineno}: expected {dim + 1} fields")
        try:
            vectors[parts[0]] = np.array([float(x) for x in parts[1:]])
        except ValueError:
            raise MalformedVectorFile(f"line {lineno}: non-numeric vector entry") from None
    if len(vectors) != count:
        raise MalformedVectorFile(f"header promises {count} vectors, found {len(vectors)}")
    model = WordVecModel(vectors, dim)
    if len(_VECTOR_CACHE) > 4:
        _VECTOR_CACHE.clear()
    _VECTOR_CACHE[key] = model
    return model


@dataclass(frozen=True)
class WordVecAvg:
    vector_file: str

    tag = "wordvec"

    def fit(self, train_texts: list[str]) -> WordVecModel:
        return load_word_vectors(self.vector_file)


# ---------------------------------------------------------------------------
# Hashed n-grams


@lru_cache(maxsize=1 << 18)
def _bucket_of(term: str, buckets: int) -> int:
    digest = hashlib.blake2b(term.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % buckets


@dataclass(frozen=True)
class HashedNgram:
    """Stateless hashed word 1-3 grams, optionally with simple length
    meta-features appended."""

    buckets: int = 512
    add_length_features: bool = True

    tag = "hashed"

    def __post_init__(self):
        if self.buckets < 16:
            raise ValueError("buckets must be at least 16")

    def fit(self, train_texts: list[str]) -> "HashedNgram":
        return self

    @property
    def dim(self) -> int:
        return self.buckets + (3 if self.add_length_features else 0)

    def _bucket(self, term: str) -> int:
        return _bucket_of(term, self.buckets)

    def transform(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for r, text in enumerate(texts):
            for gram in word_ngrams(tokenize(text), 1, 3):
                out[r, _bucket_of(gram, self.buckets)] += 1.0
            if self.add_length_features:
                n_chars = len(text)
                upper = sum(1 for ch in text if ch.isupper())
                out[r, self.buckets] = n_chars
                out[r, self.buckets + 1] = len(text.split())
                out[r, self.buckets + 2] = upper / n_chars if n_chars else 0.0
        return out


# ---------------------------------------------------------------------------
# Topic factorization (non-negative factorization of char n-gram counts)


@dataclass(frozen=True)
class TopicFactorization:
    n_components: int = 30
    ngram_size: int = 3
    iters: int = 100
    seed: int = 0

    tag = "topic"

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("n_components must be at least 1")

    def _char_grams(self, text: str) -> list[str]:
        s = text.lower()
        n = self.ngram_size
        return [s[i : i + n] for i in range(len(s) - n + 1)]

    def _count_matrix(self, texts: list[str], vocab: dict[str, int]) -> np.ndarray:
        V = np.zeros((len(texts), len(vocab)))
        for r, text in enumerate(texts):
            for gram, cnt in Counter(self._char_grams(text)).items():
                col = vocab.get(gram)
                if col is not None:
                    V[r, col] = cnt
        return V

    def fit(self, train_texts: list[str]) -> "TopicModel":
        if not train_texts:
            raise EmptyCorpus("topic fit needs at least one document")
        vocab_terms = sorted({g for t in train_texts for g in self._char_grams(t)})
        if not vocab_terms:
            raise EmptyCorpus("training corpus contains no character n-grams")
        vocab = {g: i for i, g in enumerate(vocab_terms)}
        V = self._count_matrix(train_texts, vocab)
        rng = np.random.default_rng(self.seed)
        k = self.n_components
        W = rng.random((V.shape[0], k)) + 0.01
        H = rng.random((k, V.shape[1])) + 0.01
        for _ in range(self.iters):
            W *= (V @ H.T) / (W @ (H @ H.T) + _EPS)
            H *= (W.T @ V) / ((W.T @ W) @ H + _EPS)
        # canonicalize the scale split between the factors: unit-norm topic
        # rows keep the output activations at count scale
        norms = np.linalg.norm(H, axis=1, keepdims=True)
        norms = np.where(norms > 0, norms, 1.0)
        return TopicModel(self, vocab, H / norms)


@dataclass(frozen=True)
class TopicModel:
    config: TopicFactorization
    vocab: dict[str, int]
    components: np.ndarray  # k x n_grams, frozen at fit time

    tag = "topic"

    @property
    def dim(self) -> int:
        return self.config.n_components

    def transform(self, texts: list[str]) -> np.ndarray:
        V = self.config._count_matrix(texts, self.vocab)
        H = self.components
        rng = np.random.default_rng(self.config.seed + 1)
        W = rng.random((V.shape[0], self.dim)) + 0.01
        HHt = H @ H.T
        for _ in range(self.config.iters):
            W *= (V @ H.T) / (W @ HHt + _EPS)
        return W


def factorize_counts(
    V: np.ndarray, n_components: int, iters: int, seed: int
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Multiplicative-update factorization V ~ W @ H with the per-iteration
    Frobenius error trace (handy for convergence checks)."""
    rng = np.random.default_rng(seed)
    W = rng.random((V.shape[0], n_components)) + 0.01
    H = rng.random((n_components, V.shape[1])) + 0.01
    errors = [float(np.linalg.norm(V - W @ H))]
    for _ in range(iters):
        W *= (V @ H.T) / (W @ (H @ H.T) + _EPS)
        H *= (W.T @ V) / ((W.T @ W) @ H + _EPS)
        errors.append(float(np.linalg.norm(V - W @ H)))
    return W, H, errors


# ---------------------------------------------------------------------------
# Precomputed external embeddings


@dataclass(frozen=True)
class ExternalEmbedding:
    embedding_file: str

    tag = "external"


def table_guard(table: Table) -> str:
    """Fingerprint of the row count and target column; guards row-alignment
    of external embedding files."""
    h = hashlib.sha256()
    h.update(str(table.n_rows).encode())
    for v in table.target_column.values:
        h.update(b"\x00")
        h.update(str(v).encode("utf-8"))
    return h.hexdigest()


def _sidecar_path(embedding_file: str | Path) -> Path:
    p = Path(embedding_file)
    return p.with_suffix(p.suffix + ".check")


def write_external_embeddings(path: str | Path, matrix: np.ndarray, table: Table) -> None:
    np.savetxt(path, matrix, delimiter=",")
    _sidecar_path(path).write_text(table_guard(table) + "\n", encoding="utf-8")


def load_external_embeddings(embedding_file: str | Path, table: Table) -> np.ndarray:
    matrix = np.loadtxt(embedding_file, delimiter=",", ndmin=2)
    if matrix.shape[0] != table.n_rows:
        raise RowCountMismatch(
            f"{matrix.shape[0]} embedding rows for {table.n_rows} table rows"
        )
    sidecar = _sidecar_path(embedding_file)
    if sidecar.exists():
        stored = sidecar.read_text(encoding="utf-8").strip()
        if stored != table_guard(table):
            raise ChecksumMismatch("table changed since embeddings were written")
    return matrix


EmbedderKind = TfIdf | WordVecAvg | HashedNgram | TopicFactorization | ExternalEmbedding


def make_embedder(spec: dict) -> EmbedderKind:
    """Build an embedder from a config mapping, e.g. {"kind": "tfidf"}."""
    kinds = {
        "tfidf": TfIdf,
        "wordvec": WordVecAvg,
        "hashed": HashedNgram,
        "topic": TopicFactorization,
        "external": ExternalEmbedding,
    }
    params = dict(spec)
    kind = params.pop("kind")
    try:
        cls = kinds[kind]
    except KeyError:
        raise ValueError(f"unknown embedder kind: {kind!r}") from None
    return cls(**params)


# ---------------------------------------------------------------------------
# Feature assembly


@dataclass
class EmbeddingBlock:
    """One embedded text column: the source name and its dense matrix."""

    source_column: str
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def validate(self, n_rows: int) -> "EmbeddingBlock":
        if self.dim < 1:
            raise TabTextError(f"embedding block for {self.source_column!r} has zero width")
        if self.matrix.shape[0] != n_rows:
            raise TabTextError(
                f"embedding block for {self.source_column!r} has "
                f"{self.matrix.shape[0]} rows, expected {n_rows}"
            )
        if not np.isfinite(self.matrix).all():
            raise TabTextError(f"non-finite entries in block for {self.source_column!r}")
        return self


@dataclass
class FeatureMatrix:
    """Dense numeric matrix with per-column provenance
    (source column, encoder tag, index within block)."""

    X: np.ndarray
    provenance: list[tuple[str, str, int]]
    y: np.ndarray | list

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def feature_names(self) -> list[str]:
        return [f"{src}__{tag}__{i}" for src, tag, i in self.provenance]


def _texts_of(col_values: list) -> list[str]:
    return ["" if v is MISSING else str(v) for v in col_values]


def assemble_features(
    table: Table,
    embedder: EmbedderKind,
    with_text: bool,
    fold: FoldAssignment,
    test_fold: int,
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Build train/test feature matrices for one fold.

    Numeric columns are median-imputed and standardized with train-fold
    statistics, categoricals get train-learned ordinal codes (unseen -> -1),
    text columns are embedded (embedder fitted on the train fold only) or
    dropped when with_text is false.
    """
    train_rows = fold.train_rows(test_fold)
    test_rows = fold.fold_rows(test_fold)
    tr_blocks: list[np.ndarray] = []
    te_blocks: list[np.ndarray] = []
    provenance: list[tuple[str, str, int]] = []

    external = isinstance(embedder, ExternalEmbedding)

    for col in table.feature_columns:
        if col.role is ColumnRole.NUMERICAL:
            tr = np.array(
                [np.nan if col.values[i] is MISSING else float(col.values[i]) for i in train_rows]
            )
            te = np.array(
                [np.nan if col.values[i] is MISSING else float(col.values[i]) for i in test_rows]
            )
            known = tr[~np.isnan(tr)]
            if known.size == 0:
                continue
            median = float(np.median(known))
            tr = np.where(np.isnan(tr), median, tr)
            te = np.where(np.isnan(te), median, te)
            mean, std = tr.mean(), tr.std()
            if std == 0.0:
                continue
            tr_blocks.append(((tr - mean) / std)[:, None])
            te_blocks.append(((te - mean) / std)[:, None])
            provenance.append((col.name, "num", 0))
        elif col.role is ColumnRole.CATEGORICAL:
            seen = sorted(
                {col.values[i] for i in train_rows if col.values[i] is not MISSING}, key=str
            )
            codes = {v: float(i) for i, v in enumerate(seen)}
            tr = np.array([codes.get(col.values[i], -1.0) for i in train_rows])
            te = np.array([codes.get(col.values[i], -1.0) for i in test_rows])
            tr_blocks.append(tr[:, None])
            te_blocks.append(te[:, None])
            provenance.append((col.name, "cat", 0))
        elif col.role is ColumnRole.TEXTUAL and with_text and not external:
            model = embedder.fit(_texts_of([col.values[i] for i in train_rows]))
            tr = EmbeddingBlock(
                col.name, model.transform(_texts_of([col.values[i] for i in train_rows]))
            ).validate(len(train_rows))
            te = EmbeddingBlock(
                col.name, model.transform(_texts_of([col.values[i] for i in test_rows]))
            ).validate(len(test_rows))
            tr_blocks.append(tr.matrix)
            te_blocks.append(te.matrix)
            provenance.extend((col.name, model.tag, j) for j in range(tr.dim))

    if external and with_text:
        full = load_external_embeddings(embedder.embedding_file, table)
        stem = Path(embedder.embedding_file).stem
        block = EmbeddingBlock(stem, full).validate(table.n_rows)
        tr_blocks.append(block.matrix[train_rows])
        te_blocks.append(block.matrix[test_rows])
        provenance.extend((stem, "external", j) for j in range(block.dim))

    if not tr_blocks:
        raise TabTextError("no features survived assembly")

    X_tr = np.hstack(tr_blocks)
    X_te = np.hstack(te_blocks)
    y_all = table.target_column.values
    if table.task is TaskKind.REGRESSION:
        y_tr: np.ndarray | list = np.array([float(y_all[i]) for i in train_rows])
        y_te: np.ndarray | list = np.array([float(y_all[i]) for i in test_rows])
    else:
        y_tr = [y_all[i] for i in train_rows]
        y_te = [y_all[i] for i in test_rows]
    return (
        FeatureMatrix(X_tr, list(provenance), y_tr),
        FeatureMatrix(X_te, list(provenance), y_te),
    )
