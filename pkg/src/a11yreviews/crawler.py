"""Polite review-page harvesting.

robots.txt is fetched for every host before any of its pages and disallowed
URLs are never requested. Requests to one host are spaced by at least
``delay_ms`` (or the host's ``Crawl-delay``, whichever is longer). Page
fetching is injected so the whole module runs against local fixtures.

Supported robots.txt subset: ``User-agent`` groups, ``Allow``, ``Disallow``
(plain path prefixes, longest match wins, ties go to Allow) and
``Crawl-delay``. Wildcards and sitemaps are not interpreted.
"""

from __future__ import annotations

import json
import logging
import time
import urllib.request
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from urllib.parse import urlsplit

from bs4 import BeautifulSoup, NavigableString, Tag

logger = logging.getLogger(__name__)

Fetcher = Callable[[str], str]

DEFAULT_USER_AGENT = "a11yreviews-crawler/0.1"


class CrawlError(RuntimeError):
    pass


@dataclass(frozen=True)
class CrawlConfig:
    seed_urls: tuple[str, ...]
    review_selector: str
    item_selector: str = "li"
    delay_ms: int = 1000
    user_agent: str = DEFAULT_USER_AGENT
    max_pages: int = 100
    app_name_selector: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "seed_urls", tuple(self.seed_urls))
        if self.delay_ms < 0:
            raise ValueError("delay_ms must be >= 0")
        if self.max_pages < 1:
            raise ValueError("max_pages must be >= 1")
        if not self.review_selector.strip() or not self.item_selector.strip():
            raise ValueError("selectors must be non-empty")


@dataclass(frozen=True)
class RobotsGroup:
    agents: tuple[str, ...]
    rules: tuple[tuple[bool, str], ...] = ()  # (allow, path prefix)
    crawl_delay: float | None = None


@dataclass(frozen=True)
class RobotsRules:
    """Groups that apply to one user agent; empty means allow everything."""

    groups: tuple[RobotsGroup, ...] = ()

    @property
    def crawl_delay(self) -> float | None:
        delays = [g.crawl_delay for g in self.groups if g.crawl_delay is not None]
        return max(delays) if delays else None


@dataclass(frozen=True)
class RawReviewRecord:
    url: str
    app_name: str
    text: str
    fetched_at: datetime

    def to_json(self) -> str:
        stamp = self.fetched_at.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")
        return json.dumps(
            {"url": self.url, "app_name": self.app_name, "text": self.text, "fetched_at": stamp},
            ensure_ascii=False,
        )


def _parse_groups(robots_text: str) -> list[RobotsGroup]:
    groups: list[dict] = []
    current: dict | None = None
    in_agent_block = False
    for raw in robots_text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if ":" not in line:
            continue
        key, _, value = line.partition(":")
        key, value = key.strip().lower(), value.strip()
        if key == "user-agent":
            if current is None or not in_agent_block:
                current = {"agents": [], "rules": [], "delay": None}
                groups.append(current)
            current["agents"].append(value.lower())
            in_agent_block = True
            continue
        in_agent_block = False
        if current is None:
            continue
        if key in ("allow", "disallow"):
            # An empty Disallow means "nothing disallowed".
            if value.startswith("/"):
                current["rules"].append((key == "allow", value))
        elif key == "crawl-delay":
            try:
                current["delay"] = float(value)
            except ValueError:
                continue
    return [RobotsGroup(tuple(g["agents"]), tuple(g["rules"]), g["delay"]) for g in groups]


def _agent_rank(pattern: str, product: str) -> int:
    """Higher is more specific; -1 means no match."""
    if pattern == "*":
        return 0
    if pattern == product:
        return 10_000
    if pattern and pattern in product:
        return len(pattern)
    return -1


def parse_robots(robots_text: str, user_agent: str) -> RobotsRules:
    product = user_agent.split("/", 1)[0].strip().lower()
    groups = _parse_groups(robots_text)
    ranked = [(max(_agent_rank(a, product) for a in g.agents), g) for g in groups if g.agents]
    best = max((rank for rank, _ in ranked), default=-1)
    if best < 0:
        return RobotsRules()
    return RobotsRules(tuple(g for rank, g in ranked if rank == best))


def is_allowed(rules: RobotsRules, path: str) -> bool:
    if not path.startswith("/"):
        raise ValueError(f"path must start with '/': {path!r}")
    best_len, allowed = -1, True
    for group in rules.groups:
        for allow, prefix in group.rules:
            if path.startswith(prefix):
                if len(prefix) > best_len or (len(prefix) == best_len and allow):
                    best_len, allowed = len(prefix), allow
    return allowed


def _clean(text: str) -> str:
    return " ".join(text.split())


def _own_text(item: Tag, items: set[int]) -> str:
    """Text of ``item`` minus any nested items (html.parser nests unclosed <li>)."""
    parts = []
    for node in item.descendants:
        if type(node) is not NavigableString:  # skips comments, CDATA
            continue
        parent = node.parent
        while parent is not None and parent is not item and id(parent) not in items:
            parent = parent.parent
        if parent is item:
            parts.append(str(node))
    return _clean(" ".join(parts))


def extract_reviews(
    html: str, config: CrawlConfig, url: str = "", fetched_at: datetime | None = None
) -> list[RawReviewRecord]:
    """One record per non-blank bullet item inside each review container."""
    if not html.strip():
        raise ValueError("empty page")
    fetched_at = fetched_at or datetime.now(timezone.utc)
    soup = BeautifulSoup(html, "html.parser")
    app_name = ""
    if config.app_name_selector:
        node = soup.select_one(config.app_name_selector)
        app_name = _clean(node.get_text(" ")) if node else ""

    containers = soup.select(config.review_selector)
    items = [item for container in containers for item in container.select(config.item_selector)]
    item_ids = {id(item) for item in items}
    seen: set[int] = set()
    records = []
    for item in items:
        if id(item) not in seen:
            seen.add(id(item))
            text = _own_text(item, item_ids)
            if text:
                records.append(RawReviewRecord(url, app_name, text, fetched_at))
    logger.info("%s: %d containers, %d review items", url or "<page>", len(containers), len(records))
    return records


def http_fetcher(user_agent: str = DEFAULT_USER_AGENT, timeout: float = 30.0) -> Fetcher:
    def fetch(url: str) -> str:
        request = urllib.request.Request(url, headers={"User-Agent": user_agent})
        with urllib.request.urlopen(request, timeout=timeout) as response:
            charset = response.headers.get_content_charset() or "utf-8"
            return response.read().decode(charset, errors="replace")

    return fetch


@dataclass
class _Politeness:
    delay_s: float
    sleep: Callable[[float], None]
    clock: Callable[[], float]
    last: dict[str, float] = field(default_factory=dict)

    def wait(self, host: str, delay_s: float) -> None:
        if host in self.last:
            remaining = self.last[host] + delay_s - self.clock()
            if remaining > 0:
                self.sleep(remaining)
        self.last[host] = self.clock()


def crawl(
    config: CrawlConfig,
    fetcher: Fetcher,
    *,
    sleep: Callable[[float], None] = time.sleep,
    clock: Callable[[], float] = time.monotonic,
    now: Callable[[], datetime] = lambda: datetime.now(timezone.utc),
) -> list[RawReviewRecord]:
    """Fetch the seed pages in order and concatenate their review items.

    Blocked and failed URLs are skipped with a logged diagnostic. Raises
    ``CrawlError`` only when every attempted page fetch failed.
    """
    polite = _Politeness(config.delay_ms / 1000.0, sleep, clock)
    robots: dict[str, RobotsRules] = {}
    records: list[RawReviewRecord] = []
    attempted = failed = 0

    for url in config.seed_urls:
        if attempted >= config.max_pages:
            logger.info("max_pages=%d reached, stopping", config.max_pages)
            break
        parts = urlsplit(url)
        host = f"{parts.scheme}://{parts.netloc}"
        if host not in robots:
            polite.wait(host, polite.delay_s)
            try:
                robots[host] = parse_robots(fetcher(host + "/robots.txt"), config.user_agent)
            except Exception as exc:
                logger.warning("%s/robots.txt unavailable (%s); assuming allow-all", host, exc)
                robots[host] = RobotsRules()
        rules = robots[host]
        path = (parts.path or "/") + (f"?{parts.query}" if parts.query else "")
        if not is_allowed(rules, path):
            logger.warning("blocked by robots: %s", url)
            continue
        delay = max(polite.delay_s, rules.crawl_delay or 0.0)
        polite.wait(host, delay)
        attempted += 1
        try:
            html = fetcher(url)
        except Exception as exc:
            failed += 1
            logger.warning("fetch failed for %s: %s", url, exc)
            continue
        if not html.strip():
            logger.warning("empty page: %s", url)
            continue
        records.extend(extract_reviews(html, config, url=url, fetched_at=now()))

    if attempted and failed == attempted:
        raise CrawlError(f"all {attempted} page fetches failed")
    return records


def write_records(records: Sequence[RawReviewRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.to_json() + "\n")
