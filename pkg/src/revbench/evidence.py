"""Cited-URL evidence pipeline: fetch through a reader endpoint, summarize
long pages with the lightweight judge model, and assemble per-claim bundles.

Fetch failures are data, not errors: the failed page's error text flows into
the bundle and the support judge labels the claim from it.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import requests

from .judging import JudgeClient
from .templates import Decoding, render_prompt

SUMMARIZE_MIN_CHARS = 500
PAGE_DELIMITER = "=== source: {url} ==="


@dataclass(frozen=True)
class PageContent:
    url: str
    fetched_text: str
    status: str  # ok | fetch_failed
    fetched_at: float

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class EvidenceBundle:
    claim: str
    pages: tuple[tuple[str, str], ...]  # (url, summary or error text), citation order
    assembled_text: str


@dataclass
class ReaderConfig:
    base_url: str = "https://r.jina.ai/"
    auth_env: str = ""
    timeout_s: float = 30.0
    retries: int = 2
    cache_dir: str | None = None
    refetch: bool = False
    transport: Callable[[str], str] | None = None  # test stub; raises on failure


class Fetcher:
    """Reader-endpoint client with an in-run URL cache and optional disk cache.

    Concurrent fetches of the same URL are collapsed into a single request.
    """

    def __init__(self, config: ReaderConfig | None = None):
        self.config = config or ReaderConfig()
        self._memory: dict[str, PageContent] = {}
        self._lock = threading.Lock()
        self._inflight: dict[str, threading.Event] = {}
        self.network_calls = 0

    def _disk_path(self, url: str) -> Path | None:
        if not self.config.cache_dir:
            return None
        digest = hashlib.sha256(url.encode("utf-8")).hexdigest()
        return Path(self.config.cache_dir) / f"{digest}.json"

    def _fetch_remote(self, url: str) -> str:
        if self.config.transport is not None:
            return self.config.transport(url)
        headers = {}
        token = os.environ.get(self.config.auth_env, "") if self.config.auth_env else ""
        if token:
            headers["Authorization"] = f"Bearer {token}"
        resp = requests.get(
            self.config.base_url + url, headers=headers, timeout=self.config.timeout_s
        )
        resp.raise_for_status()
        return resp.text

    def fetch(self, url: str) -> PageContent:
        while True:
            with self._lock:
                if url in self._memory:
                    return self._memory[url]
                waiter = self._inflight.get(url)
                if waiter is None:
                    self._inflight[url] = threading.Event()
                    break
            waiter.wait()
        try:
            page = self._fetch_uncached(url)
            with self._lock:
                self._memory[url] = page
            return page
        finally:
            with self._lock:
                self._inflight.pop(url).set()

    def _fetch_uncached(self, url: str) -> PageContent:
        page: PageContent | None = None
        disk = self._disk_path(url)
        if disk and disk.exists() and not self.config.refetch:
            rec = json.loads(disk.read_text(encoding="utf-8"))
            page = PageContent(url, rec["text"], rec["status"], rec["fetched_at"])

        if page is None:
            last_error = ""
            text = None
            for _ in range(self.config.retries + 1):
                self.network_calls += 1
                try:
                    text = self._fetch_remote(url)
                    break
                except Exception as exc:
                    last_error = str(exc)
            if text is not None and text:
                page = PageContent(url, text, "ok", time.time())
            else:
                body = last_error or "empty response"
                page = PageContent(url, f"fetch failed: {body}", "fetch_failed", time.time())
            if disk:
                disk.parent.mkdir(parents=True, exist_ok=True)
                disk.write_text(
                    json.dumps(
                        {"text": page.fetched_text, "status": page.status, "fetched_at": page.fetched_at}
                    ),
                    encoding="utf-8",
                )
        return page


def fetch_url(url: str, reader: Fetcher) -> PageContent:
    return reader.fetch(url)


def summarize_evidence(page: PageContent, claims: list[str], client: JudgeClient) -> str:
    """Summary text for one page. Failed fetches and short pages pass through raw."""
    if not page.ok:
        return page.fetched_text
    if len(page.fetched_text) < SUMMARIZE_MIN_CHARS:
        return page.fetched_text
    prompt = render_prompt(
        client.config.template_for("summarizer"),
        {
            "content": page.fetched_text,
            "claims": json.dumps(claims, ensure_ascii=False),
        },
        Decoding(temperature=0.0, max_tokens=client.config.max_tokens),
    )
    return client.complete(prompt, model=client.config.summarizer_model)


def assemble_bundle(claim: str, pages: list[tuple[str, str]]) -> EvidenceBundle:
    parts = [PAGE_DELIMITER.format(url=url) + "\n" + text for url, text in pages]
    return EvidenceBundle(claim, tuple(pages), "\n\n".join(parts))


def gather_evidence(
    claim: str, urls: list[str], reader: Fetcher, client: JudgeClient,
    claim_batch: list[str] | None = None,
) -> EvidenceBundle:
    """Fetch and summarize each cited URL (deduplicated, citation order kept)."""
    seen: set[str] = set()
    pages: list[tuple[str, str]] = []
    batch = claim_batch if claim_batch is not None else [claim]
    for url in urls:
        if url in seen:
            continue
        seen.add(url)
        page = reader.fetch(url)
        pages.append((url, summarize_evidence(page, batch, client)))
    return assemble_bundle(claim, pages)
