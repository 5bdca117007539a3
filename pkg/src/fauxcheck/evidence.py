"""Per-image evidence: reverse-image-search results and containing pages.

An EvidenceBundle holds the tags and up to 50 web pages a reverse image
search returned for one image. Bundles are cached on disk (one JSON file per
image id); fact-check filtering and reliability annotation are recomputed on
every load, never cached.

The search and crawl contracts are small protocols with two implementations
each: a live HTTP one (endpoint via environment variables) and a fixture one
reading canned responses, so tests never touch the network.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from functools import lru_cache
from html.parser import HTMLParser
from importlib import resources
from pathlib import Path
from typing import Mapping, NamedTuple, Protocol, Sequence

from .corpus import Corpus
from .errors import CacheMissError, DataError, ExternalServiceError
from .text import SuffixRules, UrlParseError, registrable_domain

MAX_PAGES = 50

SEARCH_URL_ENV = "FAUXCHECK_SEARCH_URL"
SEARCH_KEY_ENV = "FAUXCHECK_SEARCH_KEY"


class Reliability(str, Enum):
    TRUE = "true"
    FALSE = "false"
    MIXED = "mixed"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class WebPage:
    """One page containing the image, with its derived registrable domain."""

    url: str
    registrable_domain: str
    title: str = ""
    body_text: str = ""
    reliability: Reliability = Reliability.UNKNOWN
    fetch_error: bool = False

    @classmethod
    def from_url(
        cls,
        url: str,
        title: str = "",
        body_text: str = "",
        fetch_error: bool = False,
        rules: SuffixRules | None = None,
    ) -> "WebPage":
        try:
            domain = registrable_domain(url, rules)
        except UrlParseError:
            domain = ""
        return cls(url=url, registrable_domain=domain, title=title, body_text=body_text, fetch_error=fetch_error)


@dataclass(frozen=True)
class EvidenceBundle:
    """Tags plus at most 50 pages for one image id."""

    image_id: str
    tags: tuple[str, ...] = ()
    pages: tuple[WebPage, ...] = ()
    fetched_at: str = ""
    filtered: bool = False

    def __post_init__(self) -> None:
        if len(self.pages) > MAX_PAGES:
            raise ValueError(f"bundle for {self.image_id!r} exceeds the {MAX_PAGES}-page cap")


@dataclass(frozen=True)
class ReliabilityTable:
    """Registrable domain -> factuality class (true/false/mixed)."""

    entries: Mapping[str, Reliability]

    @classmethod
    def from_csv(cls, path: str | Path) -> "ReliabilityTable":
        path = Path(path)
        entries: dict[str, Reliability] = {}
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["domain", "class"]:
                raise DataError(f"{path}: reliability table needs a 'domain,class' header")
            for lineno, row in enumerate(reader, start=2):
                domain = (row["domain"] or "").strip().lower()
                cls_raw = (row["class"] or "").strip().lower()
                if not domain:
                    raise DataError(f"{path}:{lineno}: empty domain")
                if cls_raw not in ("true", "false", "mixed"):
                    raise DataError(f"{path}:{lineno}: class must be true/false/mixed, got {cls_raw!r}")
                entries[domain] = Reliability(cls_raw)
        return cls(entries=entries)

    def fingerprint(self) -> str:
        import hashlib

        payload = json.dumps({d: r.value for d, r in sorted(self.entries.items())})
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def lookup_reliability(domain: str, table: ReliabilityTable) -> Reliability:
    """Table value when the domain is present, Unknown otherwise."""
    return table.entries.get(domain, Reliability.UNKNOWN)


def annotate_reliability(bundle: EvidenceBundle, table: ReliabilityTable) -> EvidenceBundle:
    """Set every page's reliability via lookup_reliability. Idempotent."""
    pages = tuple(
        replace(p, reliability=lookup_reliability(p.registrable_domain, table)) for p in bundle.pages
    )
    return replace(bundle, pages=pages)


def filter_fact_check_pages(bundle: EvidenceBundle, blacklist: frozenset[str]) -> EvidenceBundle:
    """Drop pages whose registrable domain is blacklisted; order preserved."""
    pages = tuple(p for p in bundle.pages if p.registrable_domain not in blacklist)
    return replace(bundle, pages=pages, filtered=True)


def prepare_bundle(
    bundle: EvidenceBundle, blacklist: frozenset[str], table: ReliabilityTable
) -> EvidenceBundle:
    """Filter fact-check pages, then annotate reliability."""
    return annotate_reliability(filter_fact_check_pages(bundle, blacklist), table)


def load_blacklist(path: str | Path) -> frozenset[str]:
    """One registrable domain per line; `#` starts a comment."""
    domains: set[str] = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        entry = line.split("#", 1)[0].strip().lower()
        if entry:
            domains.add(entry)
    return frozenset(domains)


@lru_cache(maxsize=1)
def default_blacklist() -> frozenset[str]:
    text = resources.files("fauxcheck.data").joinpath("fact_check_blacklist.txt").read_text(encoding="utf-8")
    return frozenset(
        entry
        for line in text.splitlines()
        if (entry := line.split("#", 1)[0].strip().lower())
    )


# ---------------------------------------------------------------------------
# Search and crawl contracts


class SearchResult(NamedTuple):
    tags: list[str]
    urls: list[str]


class ReverseImageSearch(Protocol):
    def search(self, image_ref: str) -> SearchResult: ...


class PageCrawler(Protocol):
    def fetch(self, url: str) -> tuple[str, str]:
        """Return (title, body_text); raise on failure."""
        ...


class FixtureSearch:
    """Canned reverse-image-search responses keyed by image_ref."""

    def __init__(self, responses: Mapping[str, Mapping[str, Sequence[str]]]):
        self._responses = dict(responses)

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureSearch":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def search(self, image_ref: str) -> SearchResult:
        entry = self._responses.get(image_ref)
        if entry is None:
            raise ExternalServiceError(f"no fixture search response for {image_ref!r}")
        return SearchResult(tags=list(entry.get("tags", [])), urls=list(entry.get("urls", [])))


class FixtureCrawler:
    """Canned page contents keyed by URL; missing URLs raise like a dead link."""

    def __init__(self, pages: Mapping[str, Mapping[str, str]]):
        self._pages = dict(pages)

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureCrawler":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def fetch(self, url: str) -> tuple[str, str]:
        entry = self._pages.get(url)
        if entry is None:
            raise ExternalServiceError(f"no fixture page for {url!r}")
        return entry.get("title", ""), entry.get("text", "")


class _TitleParagraphParser(HTMLParser):
    """Extracts the <title> element and concatenated <p> text."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self._in_title = False
        self._p_depth = 0
        self.title_parts: list[str] = []
        self.paragraphs: list[str] = []
        self._current: list[str] = []

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag == "title":
            self._in_title = True
        elif tag == "p":
            self._p_depth += 1

    def handle_endtag(self, tag: str) -> None:
        if tag == "title":
            self._in_title = False
        elif tag == "p" and self._p_depth > 0:
            self._p_depth -= 1
            if self._p_depth == 0 and self._current:
                self.paragraphs.append(" ".join("".join(self._current).split()))
                self._current = []

    def handle_data(self, data: str) -> None:
        if self._in_title:
            self.title_parts.append(data)
        elif self._p_depth > 0:
            self._current.append(data)


def extract_title_and_text(html: str) -> tuple[str, str]:
    parser = _TitleParagraphParser()
    parser.feed(html)
    parser.close()
    title = " ".join("".join(parser.title_parts).split())
    return title, "\n".join(parser.paragraphs)


class HttpCrawler:
    """Fetches a page over HTTP and extracts title plus paragraph text."""

    def __init__(self, timeout: float = 10.0, max_bytes: int = 2_000_000):
        self.timeout = timeout
        self.max_bytes = max_bytes

    def fetch(self, url: str) -> tuple[str, str]:
        import urllib.request

        request = urllib.request.Request(url, headers={"User-Agent": "fauxcheck/0.1"})
        with urllib.request.urlopen(request, timeout=self.timeout) as response:
            raw = response.read(self.max_bytes)
            charset = response.headers.get_content_charset() or "utf-8"
        return extract_title_and_text(raw.decode(charset, errors="replace"))


class HttpSearch:
    """Live reverse-image-search client.

    POSTs {"image": image_ref} to the endpoint in $FAUXCHECK_SEARCH_URL with
    an optional bearer key from $FAUXCHECK_SEARCH_KEY, and expects a JSON
    response {"tags": [...], "urls": [...]}.
    """

    def __init__(self, endpoint: str | None = None, api_key: str | None = None, timeout: float = 30.0):
        self.endpoint = endpoint or os.environ.get(SEARCH_URL_ENV, "")
        self.api_key = api_key if api_key is not None else os.environ.get(SEARCH_KEY_ENV, "")
        self.timeout = timeout

    def search(self, image_ref: str) -> SearchResult:
        import urllib.request

        if not self.endpoint:
            raise ExternalServiceError(f"no search endpoint configured (set {SEARCH_URL_ENV})")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        request = urllib.request.Request(
            self.endpoint, data=json.dumps({"image": image_ref}).encode(), headers=headers
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except ExternalServiceError:
            raise
        except Exception as exc:
            raise ExternalServiceError(f"search request failed: {exc}")
        return SearchResult(tags=list(payload.get("tags", [])), urls=list(payload.get("urls", [])))


# ---------------------------------------------------------------------------
# Bundle cache


class BundleCache:
    """One JSON file per image id; writes are atomic (tempfile + rename).

    Only raw acquisition output is stored: tags, pages (url/title/text/
    fetch_error) and the fetch timestamp. Registrable domains, filtering and
    reliability are derived on load.
    """

    def __init__(self, directory: str | Path, suffix_rules: SuffixRules | None = None):
        self.directory = Path(directory)
        self.suffix_rules = suffix_rules
        self._lock = threading.Lock()

    def path_for(self, image_id: str) -> Path:
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in image_id)
        return self.directory / f"{safe}.json"

    def get(self, image_id: str) -> EvidenceBundle | None:
        path = self.path_for(image_id)
        if not path.exists():
            return None
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"corrupt evidence cache entry {path}: {exc}")
        pages = tuple(
            WebPage.from_url(
                p["url"],
                title=p.get("title", ""),
                body_text=p.get("text", ""),
                fetch_error=bool(p.get("fetch_error", False)),
                rules=self.suffix_rules,
            )
            for p in obj.get("pages", [])
        )
        return EvidenceBundle(
            image_id=obj["image_id"],
            tags=tuple(obj.get("tags", [])),
            pages=pages,
            fetched_at=obj.get("fetched_at", ""),
            filtered=False,
        )

    def put(self, bundle: EvidenceBundle) -> None:
        if bundle.filtered:
            raise ValueError("only raw (unfiltered) bundles may be cached")
        record = {
            "image_id": bundle.image_id,
            "tags": list(bundle.tags),
            "pages": [
                {"url": p.url, "title": p.title, "text": p.body_text, "fetch_error": p.fetch_error}
                for p in bundle.pages
            ],
            "fetched_at": bundle.fetched_at,
        }
        payload = json.dumps(record, sort_keys=True, ensure_ascii=False)
        with self._lock:
            self.directory.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
            os.replace(tmp_name, self.path_for(bundle.image_id))
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise


def fetch_evidence(
    image_id: str,
    image_ref: str,
    search: ReverseImageSearch,
    crawler: PageCrawler,
    cache: BundleCache,
    offline: bool = False,
    max_pages: int = MAX_PAGES,
) -> EvidenceBundle:
    """Return the cached bundle, or query search + crawl and persist it.

    Pages beyond ``max_pages`` are truncated in search-result order before any
    crawling. Individual page-fetch failures keep the page with empty
    title/text and a fetch_error flag; search failures propagate.
    """
    cached = cache.get(image_id)
    if cached is not None:
        return cached
    if offline:
        raise CacheMissError(f"offline mode: no cached evidence for image {image_id!r}")
    try:
        result = search.search(image_ref)
    except ExternalServiceError as exc:
        raise ExternalServiceError(f"search failed for image {image_id!r}: {exc}")
    except Exception as exc:
        raise ExternalServiceError(f"search failed for image {image_id!r}: {exc}")
    pages = []
    for url in result.urls[:max_pages]:
        try:
            title, text = crawler.fetch(url)
            page = WebPage.from_url(url, title=title, body_text=text, rules=cache.suffix_rules)
        except Exception:
            page = WebPage.from_url(url, fetch_error=True, rules=cache.suffix_rules)
        pages.append(page)
    bundle = EvidenceBundle(
        image_id=image_id,
        tags=tuple(result.tags),
        pages=tuple(pages),
        fetched_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        filtered=False,
    )
    cache.put(bundle)
    return bundle


def fetch_corpus_evidence(
    corpus: Corpus,
    search: ReverseImageSearch,
    crawler: PageCrawler,
    cache: BundleCache,
    offline: bool = False,
    jobs: int = 4,
) -> dict[str, EvidenceBundle]:
    """Fetch (or load) one bundle per corpus pair with bounded parallelism."""
    bundles: dict[str, EvidenceBundle] = {}
    if jobs <= 1:
        for pair in corpus.pairs:
            bundles[pair.id] = fetch_evidence(pair.id, pair.image_ref, search, crawler, cache, offline)
        return bundles
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {
            pair.id: pool.submit(fetch_evidence, pair.id, pair.image_ref, search, crawler, cache, offline)
            for pair in corpus.pairs
        }
        for image_id, future in futures.items():
            bundles[image_id] = future.result()
    return bundles


def load_corpus_evidence(corpus: Corpus, cache: BundleCache) -> dict[str, EvidenceBundle]:
    """Offline convenience: every pair must already be cached."""
    bundles: dict[str, EvidenceBundle] = {}
    missing: list[str] = []
    for pair in corpus.pairs:
        bundle = cache.get(pair.id)
        if bundle is None:
            missing.append(pair.id)
        else:
            bundles[pair.id] = bundle
    if missing:
        preview = ", ".join(missing[:5]) + ("..." if len(missing) > 5 else "")
        raise CacheMissError(f"{len(missing)} corpus images have no cached evidence: {preview}")
    return bundles
