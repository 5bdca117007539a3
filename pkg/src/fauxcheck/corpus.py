"""Dataset schema, loading, validation and source tagging.

A corpus is a line-delimited UTF-8 file of JSON records with required keys
``id``, ``claim``, ``label`` ("true"/"false") and ``source``
("snopes"/"reuters"/"other"), plus optional ``image_ref`` and ``published``
(ISO-8601 date). Loaded corpora are immutable and safely shareable.

This module never fetches images; acquisition belongs to `evidence`.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Mapping

from .errors import CorpusError


class Source(str, Enum):
    SNOPES = "snopes"
    REUTERS = "reuters"
    OTHER = "other"


@dataclass(frozen=True)
class ImageClaimPair:
    """One labeled example: a claim about an image.

    ``label`` True means the claim is factual with respect to the image.
    ``image_ref`` may be a URL or a local path; it is never dereferenced here.
    """

    id: str
    claim: str
    label: bool
    source: Source
    image_ref: str = ""
    published: date | None = None


@dataclass(frozen=True)
class Corpus:
    """Ordered, immutable collection of image-claim pairs with tallies."""

    pairs: tuple[ImageClaimPair, ...]
    counts: Mapping[tuple[Source, bool], int] = field(init=False, compare=False)

    def __post_init__(self) -> None:
        tally = Counter((p.source, p.label) for p in self.pairs)
        object.__setattr__(self, "counts", dict(tally))

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def label_counts(self) -> dict[bool, int]:
        out = {True: 0, False: 0}
        for (_, label), n in self.counts.items():
            out[label] += n
        return out

    def select(self, source: Source | None = None, label: bool | None = None) -> tuple[ImageClaimPair, ...]:
        return tuple(
            p
            for p in self.pairs
            if (source is None or p.source == source) and (label is None or p.label == label)
        )

    def ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.pairs)


def merge_corpora(*corpora: Corpus) -> Corpus:
    """Concatenate corpora, rejecting id collisions."""
    pairs: list[ImageClaimPair] = []
    seen: set[str] = set()
    for corpus in corpora:
        for pair in corpus.pairs:
            if pair.id in seen:
                raise CorpusError(f"duplicate id across corpora: {pair.id!r}")
            seen.add(pair.id)
            pairs.append(pair)
    return Corpus(tuple(pairs))


_LABELS = {"true": True, "false": False}
_SOURCES = {s.value: s for s in Source}


def _parse_record(obj: object, lineno: int) -> ImageClaimPair:
    if not isinstance(obj, dict):
        raise CorpusError(f"line {lineno}: record is not a JSON object")
    for key in ("id", "claim", "label", "source"):
        if key not in obj:
            raise CorpusError(f"line {lineno}: missing required key {key!r}")
    pair_id = obj["id"]
    if not isinstance(pair_id, str) or not pair_id:
        raise CorpusError(f"line {lineno}: id must be a non-empty string")
    claim = obj["claim"]
    if not isinstance(claim, str) or not claim.strip():
        raise CorpusError(f"line {lineno}: empty claim")
    label_raw = obj["label"]
    if label_raw not in _LABELS:
        raise CorpusError(f"line {lineno}: unknown label {label_raw!r}")
    source_raw = obj["source"]
    if source_raw not in _SOURCES:
        raise CorpusError(f"line {lineno}: unknown source {source_raw!r}")
    published = None
    if obj.get("published") is not None:
        try:
            published = date.fromisoformat(obj["published"])
        except (TypeError, ValueError):
            raise CorpusError(f"line {lineno}: bad published date {obj['published']!r}")
    image_ref = obj.get("image_ref") or ""
    if not isinstance(image_ref, str):
        raise CorpusError(f"line {lineno}: image_ref must be a string")
    return ImageClaimPair(
        id=pair_id,
        claim=claim,
        label=_LABELS[label_raw],
        source=_SOURCES[source_raw],
        image_ref=image_ref,
        published=published,
    )


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Parse a corpus file, preserving record order.

    Raises CorpusError with the offending line number on malformed records,
    duplicate ids, unknown labels/sources, or empty claims.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format: {format!r}")
    path = Path(path)
    pairs: list[ImageClaimPair] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})")
            pair = _parse_record(obj, lineno)
            if pair.id in seen:
                raise CorpusError(f"line {lineno}: duplicate id {pair.id!r}")
            seen.add(pair.id)
            pairs.append(pair)
    return Corpus(tuple(pairs))


def pair_to_record(pair: ImageClaimPair) -> dict:
    record: dict = {
        "id": pair.id,
        "claim": pair.claim,
        "label": "true" if pair.label else "false",
        "source": pair.source.value,
    }
    if pair.image_ref:
        record["image_ref"] = pair.image_ref
    if pair.published is not None:
        record["published"] = pair.published.isoformat()
    return record


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write one JSON record per line; load_corpus(save(c)) round-trips."""
    lines = [json.dumps(pair_to_record(p), sort_keys=True, ensure_ascii=False) for p in corpus.pairs]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def validate_corpus(corpus: Corpus) -> list[str]:
    """Check corpus invariants; returns one entry per violation (empty = valid).

    Unlike load_corpus, this never raises: programmatically built corpora can
    carry duplicate ids or source/label combinations the loader would reject.
    """
    report: list[str] = []
    seen: dict[str, int] = {}
    for pos, pair in enumerate(corpus.pairs):
        if not pair.id:
            report.append(f"record {pos}: empty id")
        elif pair.id in seen:
            report.append(f"record {pos}: duplicate id {pair.id!r} (first at record {seen[pair.id]})")
        else:
            seen[pair.id] = pos
        if not pair.claim.strip():
            report.append(f"record {pos}: empty claim (id {pair.id!r})")
        if pair.source == Source.REUTERS and pair.label is False:
            report.append(f"record {pos}: reuters-source pair labeled false (id {pair.id!r})")
    recount = Counter((p.source, p.label) for p in corpus.pairs)
    if dict(recount) != dict(corpus.counts):
        report.append("counts tally does not match a recount of pairs")
    return report
