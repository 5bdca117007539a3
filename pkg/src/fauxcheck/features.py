"""The 13 evidence feature groups.

Each group has a fit phase (vocabulary statistics from training examples
only) and a transform phase producing a per-example GroupFeatures vector.
Scalar groups (the four percentages and the two similarities) are stateless.

Bundles passed in must already be fact-check filtered and reliability
annotated (see evidence.prepare_bundle).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import ImageClaimPair
from .errors import DataError
from .evidence import EvidenceBundle, Reliability, WebPage
from .text import (
    CategoryRuleSet,
    EmbeddingProvider,
    HashedEmbeddings,
    SparseVector,
    SuffixRules,
    UrlParseError,
    Vocabulary,
    bow_vector,
    categorize_url,
    default_category_rules,
    default_stopwords,
    default_suffix_rules,
    embedding_similarity,
    fit_vocabulary,
    pairwise_tfidf_cosine,
    smoothed_average,
    tfidf_vector,
    tokenize,
)


class FeatureGroup(str, Enum):
    GOOGLE_TAGS = "google_tags"
    URL_DOMAINS = "url_domains"
    URL_CATEGORIES = "url_categories"
    TRUE_MEDIA_PCT = "true_media_pct"
    FALSE_MEDIA_PCT = "false_media_pct"
    MIXED_MEDIA_PCT = "mixed_media_pct"
    KNOWN_MEDIA_PCT = "known_media_pct"
    TRUE_MEDIA_TITLES = "true_media_titles"
    FALSE_MEDIA_TITLES = "false_media_titles"
    MIXED_MEDIA_TITLES = "mixed_media_titles"
    CLAIM_TEXT = "claim_text"
    COSINE_SIM_CLAIM_TRUE_TITLES = "cosine_sim_claim_true_titles"
    EMBEDDING_SIM_CLAIM_TRUE_TITLES = "embedding_sim_claim_true_titles"


ALL_GROUPS: tuple[FeatureGroup, ...] = tuple(FeatureGroup)

SCALAR_GROUPS: frozenset[FeatureGroup] = frozenset(
    {
        FeatureGroup.TRUE_MEDIA_PCT,
        FeatureGroup.FALSE_MEDIA_PCT,
        FeatureGroup.MIXED_MEDIA_PCT,
        FeatureGroup.KNOWN_MEDIA_PCT,
        FeatureGroup.COSINE_SIM_CLAIM_TRUE_TITLES,
        FeatureGroup.EMBEDDING_SIM_CLAIM_TRUE_TITLES,
    }
)

GROUP_PREFIX: dict[FeatureGroup, str] = {
    FeatureGroup.GOOGLE_TAGS: "tags",
    FeatureGroup.URL_DOMAINS: "domains",
    FeatureGroup.URL_CATEGORIES: "categories",
    FeatureGroup.TRUE_MEDIA_PCT: "true_pct",
    FeatureGroup.FALSE_MEDIA_PCT: "false_pct",
    FeatureGroup.MIXED_MEDIA_PCT: "mixed_pct",
    FeatureGroup.KNOWN_MEDIA_PCT: "known_pct",
    FeatureGroup.TRUE_MEDIA_TITLES: "true_titles",
    FeatureGroup.FALSE_MEDIA_TITLES: "false_titles",
    FeatureGroup.MIXED_MEDIA_TITLES: "mixed_titles",
    FeatureGroup.CLAIM_TEXT: "claim",
    FeatureGroup.COSINE_SIM_CLAIM_TRUE_TITLES: "cos_sim",
    FeatureGroup.EMBEDDING_SIM_CLAIM_TRUE_TITLES: "emb_sim",
}

DISPLAY_NAMES: dict[FeatureGroup, str] = {
    FeatureGroup.GOOGLE_TAGS: "Google tags",
    FeatureGroup.URL_DOMAINS: "URL domains",
    FeatureGroup.URL_CATEGORIES: "URL categories",
    FeatureGroup.TRUE_MEDIA_PCT: "True media percentage",
    FeatureGroup.FALSE_MEDIA_PCT: "False media percentage",
    FeatureGroup.MIXED_MEDIA_PCT: "Mixed media percentage",
    FeatureGroup.KNOWN_MEDIA_PCT: "Known media percentage",
    FeatureGroup.TRUE_MEDIA_TITLES: "True media titles",
    FeatureGroup.FALSE_MEDIA_TITLES: "False media titles",
    FeatureGroup.MIXED_MEDIA_TITLES: "Mixed media titles",
    FeatureGroup.CLAIM_TEXT: "Claim text",
    FeatureGroup.COSINE_SIM_CLAIM_TRUE_TITLES: "Cosine similarity of claim & true media titles",
    FeatureGroup.EMBEDDING_SIM_CLAIM_TRUE_TITLES: "Embedding similarity of claim & true media titles",
}

_CLASS_OF_TITLES = {
    FeatureGroup.TRUE_MEDIA_TITLES: Reliability.TRUE,
    FeatureGroup.FALSE_MEDIA_TITLES: Reliability.FALSE,
    FeatureGroup.MIXED_MEDIA_TITLES: Reliability.MIXED,
}

_CLASS_OF_PCT = {
    FeatureGroup.TRUE_MEDIA_PCT: Reliability.TRUE,
    FeatureGroup.FALSE_MEDIA_PCT: Reliability.FALSE,
    FeatureGroup.MIXED_MEDIA_PCT: Reliability.MIXED,
}


@dataclass(frozen=True)
class FeatureConfig:
    """Shared text resources plus the embedding provider."""

    stopwords: frozenset[str]
    suffix_rules: SuffixRules
    category_rules: CategoryRuleSet
    embeddings: EmbeddingProvider

    @classmethod
    def default(cls, embeddings: EmbeddingProvider | None = None) -> "FeatureConfig":
        return cls(
            stopwords=default_stopwords(),
            suffix_rules=default_suffix_rules(),
            category_rules=default_category_rules(),
            embeddings=embeddings if embeddings is not None else HashedEmbeddings(0),
        )

    def fingerprint(self) -> str:
        payload = json.dumps(
            {
                "stopwords": sorted(self.stopwords),
                "suffix_rules": self.suffix_rules.digest,
                "category_rules": {t: list(p) for t, p in sorted(self.category_rules.items())},
                "embeddings": getattr(self.embeddings, "fingerprint", type(self.embeddings).__name__),
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class FittedGroupState:
    group: FeatureGroup
    vocabulary: Vocabulary | None
    config_hash: str

    @property
    def dim(self) -> int:
        return 1 if self.vocabulary is None else len(self.vocabulary)


@dataclass(frozen=True)
class GroupFeatures:
    group: FeatureGroup
    vector: SparseVector
    dim: int


# ---------------------------------------------------------------------------
# Per-group document builders


def _tag_tokens(bundle: EvidenceBundle, config: FeatureConfig) -> list[str]:
    return [tok for tag in bundle.tags for tok in tokenize(tag, config.stopwords)]


def _domain_terms(bundle: EvidenceBundle) -> list[str]:
    # Multiset: duplicate domains among pages count multiply.
    return [p.registrable_domain for p in bundle.pages if p.registrable_domain]


def _category_terms(bundle: EvidenceBundle, config: FeatureConfig) -> list[str]:
    terms: list[str] = []
    for page in bundle.pages:
        try:
            tuples = categorize_url(page.url, config.category_rules)
        except UrlParseError:
            continue
        terms.extend(f"{top}/{sub}" for top, sub in tuples)
    return terms


def _class_pages(bundle: EvidenceBundle, cls: Reliability) -> list[WebPage]:
    return [p for p in bundle.pages if p.reliability == cls]


def _title_tokens(bundle: EvidenceBundle, cls: Reliability, config: FeatureConfig) -> list[str]:
    # One concatenated document per example, not one per page.
    joined = " ".join(p.title for p in _class_pages(bundle, cls))
    return tokenize(joined, config.stopwords)


def _claim_tokens(pair: ImageClaimPair, config: FeatureConfig) -> list[str]:
    return tokenize(pair.claim, config.stopwords)


def _group_document(
    group: FeatureGroup, pair: ImageClaimPair, bundle: EvidenceBundle, config: FeatureConfig
) -> list[str]:
    if group is FeatureGroup.GOOGLE_TAGS:
        return _tag_tokens(bundle, config)
    if group is FeatureGroup.URL_DOMAINS:
        return _domain_terms(bundle)
    if group is FeatureGroup.URL_CATEGORIES:
        return _category_terms(bundle, config)
    if group in _CLASS_OF_TITLES:
        return _title_tokens(bundle, _CLASS_OF_TITLES[group], config)
    if group is FeatureGroup.CLAIM_TEXT:
        return _claim_tokens(pair, config)
    raise ValueError(f"group {group.value} has no vocabulary document")


# ---------------------------------------------------------------------------
# Fit / extract


def fit_group(
    group: FeatureGroup,
    train: Sequence[tuple[ImageClaimPair, EvidenceBundle]],
    config: FeatureConfig,
) -> FittedGroupState:
    """Fit group state from training examples only (leakage control)."""
    if not train:
        raise DataError(f"cannot fit group {group.value} on an empty training set")
    if group in SCALAR_GROUPS:
        return FittedGroupState(group=group, vocabulary=None, config_hash=config.fingerprint())
    documents = [_group_document(group, pair, bundle, config) for pair, bundle in train]
    return FittedGroupState(
        group=group, vocabulary=fit_vocabulary(documents), config_hash=config.fingerprint()
    )


def _scalar(value: float) -> SparseVector:
    return SparseVector.from_dict({0: value})


def extract_group(
    group: FeatureGroup,
    pair: ImageClaimPair,
    bundle: EvidenceBundle,
    state: FittedGroupState,
    config: FeatureConfig,
) -> GroupFeatures:
    """Produce this example's feature vector for one group.

    Out-of-vocabulary tokens drop silently, so extraction with a state fitted
    on disjoint data never errors.
    """
    if state.group is not group:
        raise ValueError(f"state fitted for {state.group.value}, asked to extract {group.value}")
    if state.config_hash != config.fingerprint():
        raise ValueError(f"state for {group.value} was fitted under a different configuration")

    if group in _CLASS_OF_PCT:
        total = len(bundle.pages)
        count = len(_class_pages(bundle, _CLASS_OF_PCT[group]))
        return GroupFeatures(group, _scalar(count / total if total else 0.0), dim=1)
    if group is FeatureGroup.KNOWN_MEDIA_PCT:
        total = len(bundle.pages)
        known = sum(1 for p in bundle.pages if p.reliability != Reliability.UNKNOWN)
        return GroupFeatures(group, _scalar(known / total if total else 0.0), dim=1)
    if group is FeatureGroup.COSINE_SIM_CLAIM_TRUE_TITLES:
        claim_toks = _claim_tokens(pair, config)
        sims = [
            pairwise_tfidf_cosine(claim_toks, tokenize(p.title, config.stopwords))
            for p in _class_pages(bundle, Reliability.TRUE)
        ]
        return GroupFeatures(group, _scalar(smoothed_average(sims)), dim=1)
    if group is FeatureGroup.EMBEDDING_SIM_CLAIM_TRUE_TITLES:
        sims = [
            embedding_similarity(pair.claim, p.title, config.embeddings)
            for p in _class_pages(bundle, Reliability.TRUE)
        ]
        return GroupFeatures(group, _scalar(smoothed_average(sims)), dim=1)

    vocab = state.vocabulary
    assert vocab is not None
    document = _group_document(group, pair, bundle, config)
    if group in (FeatureGroup.GOOGLE_TAGS, *_CLASS_OF_TITLES):
        vector = bow_vector(document, vocab)
    else:
        vector = tfidf_vector(document, vocab)
    return GroupFeatures(group, vector, dim=len(vocab))


def feature_names(state: FittedGroupState) -> list[str]:
    """Prefixed, index-ordered names for a group's dimensions."""
    prefix = GROUP_PREFIX[state.group]
    if state.vocabulary is None:
        return [f"{prefix}:{state.group.value}"]
    return [f"{prefix}:{term}" for term in state.vocabulary.terms()]


@dataclass(frozen=True)
class FeatureExtractor:
    """Fitted states for a set of groups plus the config they were fit under."""

    states: Mapping[FeatureGroup, FittedGroupState]
    config: FeatureConfig

    @property
    def groups(self) -> tuple[FeatureGroup, ...]:
        return tuple(g for g in ALL_GROUPS if g in self.states)

    def extract(self, pair: ImageClaimPair, bundle: EvidenceBundle) -> dict[FeatureGroup, GroupFeatures]:
        return {
            group: extract_group(group, pair, bundle, state, self.config)
            for group, state in self.states.items()
        }

    def concat_names(self) -> list[str]:
        names: list[str] = []
        for group in self.groups:
            names.extend(feature_names(self.states[group]))
        return names

    def concat(self, example: Mapping[FeatureGroup, GroupFeatures]) -> tuple[SparseVector, int]:
        """Concatenate group vectors in canonical group order."""
        entries: dict[int, float] = {}
        offset = 0
        for group in self.groups:
            gf = example[group]
            for i, v in zip(gf.vector.indices, gf.vector.values):
                entries[offset + i] = v
            offset += gf.dim
        return SparseVector.from_dict(entries), offset


def fit_extractor(
    groups: Sequence[FeatureGroup],
    train: Sequence[tuple[ImageClaimPair, EvidenceBundle]],
    config: FeatureConfig,
) -> FeatureExtractor:
    states = {group: fit_group(group, train, config) for group in groups}
    return FeatureExtractor(states=states, config=config)


# ---------------------------------------------------------------------------
# Feature matrix files (one columnar file per group)


def save_feature_matrix(
    path: str | Path,
    group: FeatureGroup,
    dim: int,
    rows: Sequence[tuple[str, SparseVector]],
) -> None:
    lines = [f"group={group.value}\tdim={dim}\tn={len(rows)}"]
    for example_id, vector in rows:
        entries = " ".join(f"{i}:{v!r}" for i, v in zip(vector.indices, vector.values))
        lines.append(f"{example_id}\t{entries}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_feature_matrix(path: str | Path) -> tuple[FeatureGroup, int, list[tuple[str, SparseVector]]]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataError(f"{path}: empty feature matrix file")
    header = dict(field.split("=", 1) for field in lines[0].split("\t"))
    try:
        group = FeatureGroup(header["group"])
        dim = int(header["dim"])
        n = int(header["n"])
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: bad feature matrix header: {exc}")
    rows: list[tuple[str, SparseVector]] = []
    for line in lines[1:]:
        if not line:
            continue
        example_id, _, entries = line.partition("\t")
        pairs: dict[int, float] = {}
        for entry in entries.split():
            idx, _, val = entry.partition(":")
            pairs[int(idx)] = float(val)
        rows.append((example_id, SparseVector.from_dict(pairs)))
    if len(rows) != n:
        raise DataError(f"{path}: header says n={n} but found {len(rows)} rows")
    return group, dim, rows
