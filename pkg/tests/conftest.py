"""Shared synthetic-data builders for the test suite.

Everything here is seeded and deterministic; no test touches the network.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from fauxcheck.corpus import Corpus, ImageClaimPair, Source
from fauxcheck.evidence import BundleCache, EvidenceBundle, Reliability, ReliabilityTable, WebPage
from fauxcheck.features import FeatureConfig

WORDS = (
    "rocket launch mountain turtle president handshake volcano lava eruption "
    "rainbow storm rescue flood protest crowd winner trophy ceremony bridge "
    "collapse shark beach statue painting museum astronaut orbit satellite "
    "village harvest drought election rally footage camera witness report "
    "soldier parade medal glacier iceberg penguin lion elephant rabbit forest "
    "wildfire skyline tower stadium marathon athlete record comet meteor"
).split()

TRUE_DOMAINS = tuple(f"truemedia{i}.com" for i in range(8))
FALSE_DOMAINS = tuple(f"falsemedia{i}.com" for i in range(8))
MIXED_DOMAINS = tuple(f"mixedmedia{i}.com" for i in range(8))
UNKNOWN_DOMAINS = tuple(f"unlisted{i}.org" for i in range(12))

FIXED_TIMESTAMP = "2026-01-01T00:00:00+00:00"


def reliability_table() -> ReliabilityTable:
    entries = {d: Reliability.TRUE for d in TRUE_DOMAINS}
    entries.update({d: Reliability.FALSE for d in FALSE_DOMAINS})
    entries.update({d: Reliability.MIXED for d in MIXED_DOMAINS})
    return ReliabilityTable(entries=entries)


def write_reliability_csv(path: Path) -> Path:
    lines = ["domain,class"]
    lines += [f"{d},true" for d in TRUE_DOMAINS]
    lines += [f"{d},false" for d in FALSE_DOMAINS]
    lines += [f"{d},mixed" for d in MIXED_DOMAINS]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def make_claim(rng: np.random.Generator, n_words: int = 8) -> str:
    picks = rng.choice(len(WORDS), size=n_words, replace=True)
    return "A photograph shows " + " ".join(WORDS[i] for i in picks)


def make_pair(pair_id: str, label: bool, source: Source, rng: np.random.Generator) -> ImageClaimPair:
    return ImageClaimPair(
        id=pair_id,
        claim=make_claim(rng),
        label=label,
        source=source,
        image_ref=f"images/{pair_id}.jpg",
    )


def synth_corpus(
    n_snopes_true: int = 70,
    n_snopes_false: int = 180,
    n_reuters: int = 50,
    seed: int = 0,
    prefix: str = "s",
) -> Corpus:
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n_snopes_true):
        pairs.append(make_pair(f"{prefix}-st-{i}", True, Source.SNOPES, rng))
    for i in range(n_snopes_false):
        pairs.append(make_pair(f"{prefix}-sf-{i}", False, Source.SNOPES, rng))
    for i in range(n_reuters):
        pairs.append(make_pair(f"{prefix}-r-{i}", True, Source.REUTERS, rng))
    return Corpus(tuple(pairs))


def make_page(domain: str, image_id: str, idx: int, title: str) -> WebPage:
    return WebPage.from_url(
        f"http://{domain}/news/{image_id}-{idx}",
        title=title,
        body_text=f"Article body about {title}.",
    )


def synth_bundle(
    pair: ImageClaimPair,
    rng: np.random.Generator,
    n_pages: int = 6,
    n_true: int | None = None,
    n_false: int | None = None,
    n_mixed: int | None = None,
) -> EvidenceBundle:
    """Raw bundle with a composition that mildly tracks the pair's label.

    True pairs get more reliable-media pages whose titles share words with
    the claim; False pairs get fewer and noisier ones.
    """
    if n_true is None:
        n_true = int(rng.integers(3, 6)) if pair.label else int(rng.integers(0, 3))
    if n_false is None:
        n_false = int(rng.integers(0, 2)) if pair.label else int(rng.integers(1, 3))
    if n_mixed is None:
        n_mixed = int(rng.integers(0, 2))
    n_unknown = max(0, n_pages - n_true - n_false - n_mixed)
    claim_words = pair.claim.split()[-4:]
    pages = []
    idx = 0
    for _ in range(n_true):
        domain = TRUE_DOMAINS[rng.integers(0, len(TRUE_DOMAINS))]
        echo = " ".join(claim_words[: int(rng.integers(2, 5))]) if pair.label else make_claim(rng, 3)
        pages.append(make_page(domain, pair.id, idx, f"Report: {echo}"))
        idx += 1
    for _ in range(n_false):
        domain = FALSE_DOMAINS[rng.integers(0, len(FALSE_DOMAINS))]
        pages.append(make_page(domain, pair.id, idx, "Shocking " + make_claim(rng, 3)))
        idx += 1
    for _ in range(n_mixed):
        domain = MIXED_DOMAINS[rng.integers(0, len(MIXED_DOMAINS))]
        pages.append(make_page(domain, pair.id, idx, make_claim(rng, 4)))
        idx += 1
    for _ in range(n_unknown):
        domain = UNKNOWN_DOMAINS[rng.integers(0, len(UNKNOWN_DOMAINS))]
        pages.append(make_page(domain, pair.id, idx, make_claim(rng, 4)))
        idx += 1
    tag_picks = rng.choice(len(WORDS), size=int(rng.integers(2, 6)), replace=False)
    tags = tuple(WORDS[i] for i in tag_picks)
    return EvidenceBundle(
        image_id=pair.id,
        tags=tags,
        pages=tuple(pages),
        fetched_at=FIXED_TIMESTAMP,
        filtered=False,
    )


def synth_bundles(corpus: Corpus, seed: int = 1, n_pages: int = 6) -> dict[str, EvidenceBundle]:
    rng = np.random.default_rng(seed)
    return {pair.id: synth_bundle(pair, rng, n_pages=n_pages) for pair in corpus.pairs}


def separable_bundles(corpus: Corpus, seed: int = 2, n_pages: int = 10) -> dict[str, EvidenceBundle]:
    """Bundles where TrueMediaPct is 0.6-0.9 for True pairs, 0.0-0.3 for False."""
    rng = np.random.default_rng(seed)
    bundles = {}
    for pair in corpus.pairs:
        n_true = int(rng.integers(6, 10)) if pair.label else int(rng.integers(0, 4))
        bundles[pair.id] = synth_bundle(
            pair, rng, n_pages=n_pages, n_true=n_true, n_false=0, n_mixed=0
        )
    return bundles


def write_cache(bundles: dict[str, EvidenceBundle], directory: Path) -> BundleCache:
    cache = BundleCache(directory)
    for bundle in bundles.values():
        cache.put(bundle)
    return cache


def write_corpus_file(corpus: Corpus, path: Path) -> Path:
    from fauxcheck.corpus import save_corpus

    save_corpus(corpus, path)
    return path


# ---------------------------------------------------------------------------
# JPEG fixtures for ELA


def textured_rgb(seed: int, size: int = 192) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = np.linspace(0, 255, size)
    base = np.add.outer(x, x) / 2
    noise = rng.normal(0, 12, (size, size))
    channel = np.clip(base + noise, 0, 255).astype(np.uint8)
    return np.stack([channel, np.roll(channel, 13, 0), np.roll(channel, 29, 1)], axis=-1)


def to_jpeg_bytes(array: np.ndarray, quality: int = 95) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(array).save(buffer, "JPEG", quality=quality, subsampling=0)
    return buffer.getvalue()


def decode_rgb(data: bytes) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(data)).convert("RGB"))


def resave_times(data: bytes, times: int, quality: int = 95) -> bytes:
    for _ in range(times):
        data = to_jpeg_bytes(decode_rgb(data), quality=quality)
    return data


def splice_fixture(quality: int = 95, resaves: int = 8):
    """(clean_jpeg, spliced_jpeg, patch_box): a fresh patch pasted into a
    quality-equilibrated background, then compressed once."""
    background = decode_rgb(resave_times(to_jpeg_bytes(textured_rgb(1), quality), resaves, quality))
    patch_source = textured_rgb(99)
    box = (64, 64, 128, 128)
    spliced = background.copy()
    spliced[box[1]:box[3], box[0]:box[2]] = patch_source[box[1]:box[3], box[0]:box[2]]
    clean_jpeg = to_jpeg_bytes(background, quality)
    spliced_jpeg = to_jpeg_bytes(spliced, quality)
    return clean_jpeg, spliced_jpeg, box


# ---------------------------------------------------------------------------
# Common fixtures


@pytest.fixture(scope="session")
def feature_config() -> FeatureConfig:
    return FeatureConfig.default()


@pytest.fixture(scope="session")
def rel_table() -> ReliabilityTable:
    return reliability_table()


@pytest.fixture()
def no_network(monkeypatch):
    """Make any socket connection attempt explode."""
    import socket

    def deny(*args, **kwargs):
        raise AssertionError("network access attempted during an offline test")

    monkeypatch.setattr(socket.socket, "connect", deny)
    monkeypatch.setattr(socket, "create_connection", deny)
    return None


def corpus_record(pair_id="p1", claim="A photograph shows a thing", label="true",
                  source="snopes", **extra) -> dict:
    record = {"id": pair_id, "claim": claim, "label": label, "source": source}
    record.update(extra)
    return record


def write_jsonl(path: Path, records: list[dict]) -> Path:
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
    return path
