"""Deterministic text machinery.

Tokenization, vocabulary fitting, TF-IDF / bag-of-words vectors, cosine and
embedding similarity, smoothed averaging, registrable-domain extraction and
rule-based URL categorization. Everything here is pure: fitted vocabularies
and rule sets are immutable and safe to share across threads.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence
from urllib.parse import urlsplit

import numpy as np

from .errors import DataError, EmbeddingLookupError

EMBEDDING_DIM = 512

# Alphanumeric runs; underscore is treated as a separator.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str, stopwords: frozenset[str] = frozenset()) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop 1-char tokens and stopwords."""
    return [
        tok
        for tok in _TOKEN_RE.findall(text.lower())
        if len(tok) >= 2 and tok not in stopwords
    ]


@dataclass(frozen=True)
class Vocabulary:
    """Term index plus the document-frequency statistics it was fitted with.

    Indices are dense 0..len-1 assigned in sorted term order, so a vocabulary
    is invariant under permutation of the fitting documents.
    """

    index: Mapping[str, int]
    doc_freq: tuple[int, ...]
    n_docs: int

    def __len__(self) -> int:
        return len(self.index)

    def idf(self, term_idx: int) -> float:
        """Smoothed inverse document frequency: ln((1+n)/(1+df)) + 1."""
        return math.log((1 + self.n_docs) / (1 + self.doc_freq[term_idx])) + 1.0

    def terms(self) -> list[str]:
        """Terms ordered by index."""
        out = [""] * len(self.index)
        for term, i in self.index.items():
            out[i] = term
        return out


def fit_vocabulary(documents: Sequence[Sequence[str]]) -> Vocabulary:
    """Build a vocabulary over all distinct tokens of ``documents``.

    Document frequency counts the number of documents containing each term
    at least once. Empty documents contribute to ``n_docs`` only.
    """
    if len(documents) == 0:
        raise ValueError("cannot fit a vocabulary on an empty document list")
    df: dict[str, int] = {}
    for doc in documents:
        for term in set(doc):
            df[term] = df.get(term, 0) + 1
    terms = sorted(df)
    index = {t: i for i, t in enumerate(terms)}
    return Vocabulary(
        index=index,
        doc_freq=tuple(df[t] for t in terms),
        n_docs=len(documents),
    )


@dataclass(frozen=True)
class SparseVector:
    """Sorted (index, value) pairs with no stored zeros."""

    indices: tuple[int, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must have equal length")
        prev = -1
        for i, v in zip(self.indices, self.values):
            if i <= prev:
                raise ValueError("indices must be strictly increasing")
            if v == 0.0:
                raise ValueError("zero values must not be stored")
            prev = i

    @classmethod
    def from_dict(cls, entries: Mapping[int, float]) -> "SparseVector":
        items = sorted((i, float(v)) for i, v in entries.items() if v != 0.0)
        return cls(tuple(i for i, _ in items), tuple(v for _, v in items))

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def dot(self, other: "SparseVector") -> float:
        total, i, j = 0.0, 0, 0
        while i < len(self.indices) and j < len(other.indices):
            a, b = self.indices[i], other.indices[j]
            if a == b:
                total += self.values[i] * other.values[j]
                i += 1
                j += 1
            elif a < b:
                i += 1
            else:
                j += 1
        return total

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))

    def scale(self, factor: float) -> "SparseVector":
        if factor == 0.0:
            return SparseVector()
        return SparseVector(self.indices, tuple(v * factor for v in self.values))

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim, dtype=np.float64)
        for i, v in zip(self.indices, self.values):
            if i < dim:
                out[i] = v
        return out

    def shifted(self, offset: int) -> "SparseVector":
        return SparseVector(tuple(i + offset for i in self.indices), self.values)


def tfidf_vector(tokens: Sequence[str], vocab: Vocabulary) -> SparseVector:
    """L2-normalized TF-IDF vector: weight = count * (ln((1+n)/(1+df)) + 1).

    Out-of-vocabulary tokens are ignored; all-OOV input yields an empty vector.
    """
    counts: dict[int, int] = {}
    for tok in tokens:
        idx = vocab.index.get(tok)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    if not counts:
        return SparseVector()
    weights = {i: c * vocab.idf(i) for i, c in counts.items()}
    norm = math.sqrt(sum(w * w for w in weights.values()))
    return SparseVector.from_dict({i: w / norm for i, w in weights.items()})


def bow_vector(tokens: Sequence[str], vocab: Vocabulary) -> SparseVector:
    """Raw in-vocabulary term counts; no normalization."""
    counts: dict[int, int] = {}
    for tok in tokens:
        idx = vocab.index.get(tok)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    return SparseVector.from_dict(counts)


def cosine(a: SparseVector, b: SparseVector) -> float:
    """Cosine similarity; 0.0 when either vector is empty."""
    na, nb = a.norm(), b.norm()
    if na == 0.0 or nb == 0.0:
        return 0.0
    return a.dot(b) / (na * nb)


def pairwise_tfidf_cosine(tokens_a: Sequence[str], tokens_b: Sequence[str]) -> float:
    """Cosine of TF-IDF vectors fitted on just these two token lists.

    Stateless: the two token lists form their own 2-document corpus, so no
    fitted vocabulary is carried around. Identical lists score 1.0.
    """
    if not tokens_a or not tokens_b:
        return 0.0
    vocab = fit_vocabulary([tokens_a, tokens_b])
    return cosine(tfidf_vector(tokens_a, vocab), tfidf_vector(tokens_b, vocab))


def smoothed_average(values: Sequence[float], pseudo_count: float = 1.0) -> float:
    """sum(values) / (len(values) + pseudo_count); empty input yields 0.0.

    The pseudo-observation of 0 shrinks short lists toward "no evidence".
    """
    return sum(values) / (len(values) + pseudo_count) if values else 0.0


# ---------------------------------------------------------------------------
# Embeddings


class EmbeddingProvider(Protocol):
    """Maps a text to a unit-norm dense vector of dimension 512."""

    fingerprint: str

    def embed(self, text: str) -> np.ndarray: ...


class TableEmbeddings:
    """File-backed provider: exact text string -> precomputed unit vector."""

    def __init__(self, table: Mapping[str, np.ndarray], fingerprint: str = ""):
        self._table = dict(table)
        self.fingerprint = fingerprint or "table:inline"

    def embed(self, text: str) -> np.ndarray:
        try:
            return self._table[text]
        except KeyError:
            raise EmbeddingLookupError(f"no embedding table entry for text: {text!r}")


class HashedEmbeddings:
    """Deterministic token-hashing encoder. Test/offline stand-in only.

    Not a trained model: tokens are hashed into signed buckets and the result
    is L2-normalized, so overlapping texts get correlated vectors. Texts with
    no tokens map to a fixed basis vector to keep the unit-norm contract.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.fingerprint = f"hashed:{seed}"

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(EMBEDDING_DIM, dtype=np.float64)
        for tok in tokenize(text):
            digest = hashlib.sha256(f"{self.seed}\0{tok}".encode()).digest()
            idx = int.from_bytes(digest[:4], "big") % EMBEDDING_DIM
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[idx] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[0] = 1.0
            return vec
        return vec / norm


def embedding_similarity(text_a: str, text_b: str, provider: EmbeddingProvider) -> float:
    """Dot product of the two unit embedding vectors."""
    return float(np.dot(provider.embed(text_a), provider.embed(text_b)))


def load_embedding_table(path: str | Path) -> TableEmbeddings:
    """Read a `dim=512` header plus tab-separated `text<TAB>v1..v512` lines."""
    path = Path(path)
    raw = path.read_bytes()
    lines = raw.decode("utf-8").splitlines()
    if not lines or lines[0].strip() != f"dim={EMBEDDING_DIM}":
        raise DataError(f"{path}: embedding table must start with 'dim={EMBEDDING_DIM}'")
    table: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != EMBEDDING_DIM + 1:
            raise DataError(f"{path}:{lineno}: expected text plus {EMBEDDING_DIM} values")
        vec = np.array([float(x) for x in fields[1:]], dtype=np.float64)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise DataError(f"{path}:{lineno}: zero embedding vector")
        table[fields[0]] = vec / norm
    digest = hashlib.sha256(raw).hexdigest()[:16]
    return TableEmbeddings(table, fingerprint=f"table:{digest}")


def write_embedding_table(path: str | Path, table: Mapping[str, Sequence[float]]) -> None:
    lines = [f"dim={EMBEDDING_DIM}"]
    for text in sorted(table):
        if "\t" in text or "\n" in text:
            raise ValueError(f"embedding key may not contain tab/newline: {text!r}")
        vec = table[text]
        if len(vec) != EMBEDDING_DIM:
            raise ValueError(f"embedding for {text!r} has dimension {len(vec)}")
        lines.append(text + "\t" + "\t".join(repr(float(v)) for v in vec))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Registrable domains (public-suffix rules)


class UrlParseError(ValueError):
    """URL is not absolute or its host is unusable."""


@dataclass(frozen=True)
class SuffixRules:
    """Parsed public-suffix rules: exact, wildcard (`*.x`) and exception (`!`)."""

    exact: frozenset[tuple[str, ...]]
    wildcard: frozenset[tuple[str, ...]]
    exception: frozenset[tuple[str, ...]]
    digest: str = ""

    def suffix_length(self, labels: Sequence[str]) -> int:
        """Number of labels in the public suffix of ``labels``.

        Exception rules win outright; otherwise the longest match; the
        implicit `*` rule makes one label the floor.
        """
        best = 1
        for n in range(1, len(labels) + 1):
            suffix = tuple(labels[-n:])
            if suffix in self.exception:
                return n - 1
            if suffix in self.exact:
                best = max(best, n)
            if ("*",) + suffix[1:] in self.wildcard:
                best = max(best, n)
        return best


def parse_suffix_rules(lines: Iterable[str]) -> SuffixRules:
    exact: set[tuple[str, ...]] = set()
    wildcard: set[tuple[str, ...]] = set()
    exception: set[tuple[str, ...]] = set()
    kept: list[str] = []
    for line in lines:
        rule = line.strip().lower()
        if not rule or rule.startswith("//"):
            continue
        kept.append(rule)
        if rule.startswith("!"):
            exception.add(tuple(rule[1:].split(".")))
        elif rule.startswith("*."):
            wildcard.add(tuple(rule.split(".")))
        else:
            exact.add(tuple(rule.split(".")))
    digest = hashlib.sha256("\n".join(sorted(kept)).encode()).hexdigest()[:16]
    return SuffixRules(
        exact=frozenset(exact),
        wildcard=frozenset(wildcard),
        exception=frozenset(exception),
        digest=digest,
    )


def load_suffix_rules(path: str | Path) -> SuffixRules:
    return parse_suffix_rules(Path(path).read_text(encoding="utf-8").splitlines())


_IPV4_RE = re.compile(r"^\d{1,3}(\.\d{1,3}){3}$")


def registrable_domain(url: str, rules: SuffixRules | None = None) -> str:
    """Reduce an absolute URL's host to its public-suffix-plus-one-label form.

    IP-literal hosts are returned verbatim (lowercased). Raises UrlParseError
    for relative URLs, empty hosts, or hosts that are themselves a public
    suffix.
    """
    rules = rules if rules is not None else default_suffix_rules()
    parts = urlsplit(url)
    if not parts.scheme or not parts.netloc:
        raise UrlParseError(f"not an absolute URL: {url!r}")
    host = parts.hostname
    if not host:
        raise UrlParseError(f"URL has no host: {url!r}")
    host = host.rstrip(".").lower()
    if not host:
        raise UrlParseError(f"URL has no usable host: {url!r}")
    if _IPV4_RE.match(host) or ":" in host:
        return host
    labels = host.split(".")
    if any(not label for label in labels):
        raise UrlParseError(f"host has empty labels: {url!r}")
    suffix_len = rules.suffix_length(labels)
    if len(labels) <= suffix_len:
        raise UrlParseError(f"host is a bare public suffix: {host!r}")
    return ".".join(labels[-(suffix_len + 1):])


# ---------------------------------------------------------------------------
# Rule-based URL categorization

CategoryRuleSet = Mapping[str, tuple[str, str]]


def load_category_rules(path: str | Path) -> CategoryRuleSet:
    """Read a JSON object mapping lowercase token -> [top, sub] category pair."""
    import json

    data = json.loads(Path(path).read_text(encoding="utf-8"))
    rules: dict[str, tuple[str, str]] = {}
    for token, pair in data.items():
        if len(pair) != 2 or not pair[0] or not pair[1]:
            raise DataError(f"category rule for {token!r} must be a [top, sub] pair")
        rules[token.lower()] = (str(pair[0]), str(pair[1]))
    return rules


def categorize_url(url: str, rules: CategoryRuleSet) -> list[tuple[str, str]]:
    """Match host+path tokens against the rule map; duplicates are kept."""
    parts = urlsplit(url)
    if not parts.scheme or not parts.netloc:
        raise UrlParseError(f"not an absolute URL: {url!r}")
    tokens = tokenize(f"{parts.netloc} {parts.path}")
    return [rules[tok] for tok in tokens if tok in rules]


# ---------------------------------------------------------------------------
# Packaged default data files


def _data_text(name: str) -> str:
    return resources.files("fauxcheck.data").joinpath(name).read_text(encoding="utf-8")


def load_stopwords(path: str | Path) -> frozenset[str]:
    words = Path(path).read_text(encoding="utf-8").split()
    return frozenset(w.lower() for w in words)


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    return frozenset(_data_text("stopwords.txt").split())


@lru_cache(maxsize=1)
def default_suffix_rules() -> SuffixRules:
    return parse_suffix_rules(_data_text("public_suffix_rules.dat").splitlines())


@lru_cache(maxsize=1)
def default_category_rules() -> CategoryRuleSet:
    import json

    data = json.loads(_data_text("category_rules.json"))
    return {tok.lower(): (pair[0], pair[1]) for tok, pair in data.items()}
