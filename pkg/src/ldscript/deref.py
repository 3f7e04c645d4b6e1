"""Dereferencing URIs into named graphs.

A fetch sends an ``Accept`` header built from the configured media types,
follows 301/302/303 redirects, parses the body by its ``Content-Type`` and
skolemizes blank nodes.  ``load_named`` puts the admitted triples into the
graph named by the URI that was asked for (not the redirect target) and
remembers the outcome so a URI is fetched at most once per run.
"""
from __future__ import annotations

import enum
import json
import logging
import os
import socket
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol
from urllib.parse import urljoin

from .rdfio import (
    SUPPORTED_CONTENT_TYPES, RdfSyntaxError, SkolemMinter, UnsupportedContentType,
    media_type, parse_rdf_document, skolemize,
)
from .store import QuadStore
from .terms import TermError, Uri
from .typesystem import admit_triples

log = logging.getLogger(__name__)

FIXTURES_ENV = "LDSCRIPT_FIXTURES"
FOLLOWED = (301, 302, 303)


@dataclass(frozen=True)
class FetchConfig:
    accept: tuple = SUPPORTED_CONTENT_TYPES
    max_redirects: int = 5
    timeout_ms: int = 10_000
    fixture_dir: Path | None = None
    parallelism: int = 4

    def __post_init__(self):
        if not self.accept:
            raise ValueError("accept list must not be empty")
        if self.max_redirects < 1 or self.parallelism < 1 or self.timeout_ms < 1:
            raise ValueError("max_redirects, parallelism and timeout_ms must be >= 1")

    def accept_header(self) -> str:
        parts = []
        for i, mt in enumerate(self.accept):
            q = max(0.1, 1.0 - 0.1 * i)
            parts.append(mt if i == 0 else f"{mt};q={q:.1f}")
        return ", ".join(parts)


class FailureKind(enum.Enum):
    HTTP_STATUS = "http-status"
    REDIRECT_LIMIT = "redirect-limit"
    REDIRECT_LOOP = "redirect-loop"
    UNSUPPORTED_CONTENT_TYPE = "unsupported-content-type"
    PARSE_ERROR = "parse-error"
    TIMEOUT = "timeout"
    NETWORK = "network"


@dataclass(frozen=True)
class Failure:
    kind: FailureKind
    detail: str = ""

    def __str__(self):
        return f"{self.kind.value}: {self.detail}" if self.detail else self.kind.value


class DereferenceError(Exception):
    def __init__(self, failure: Failure):
        super().__init__(str(failure))
        self.failure = failure


@dataclass
class Response:
    status: int
    content_type: str = ""
    location: str | None = None
    body: bytes = b""


class Transport(Protocol):
    def get(self, uri: str, accept: str, timeout_s: float) -> Response: ...


class _NoRedirect(urllib.request.HTTPRedirectHandler):
    def redirect_request(self, *args, **kwargs):
        return None


class HttpTransport:
    def __init__(self):
        self._opener = urllib.request.build_opener(_NoRedirect)

    def get(self, uri: str, accept: str, timeout_s: float) -> Response:
        if not uri.startswith(("http://", "https://")):
            raise DereferenceError(Failure(FailureKind.NETWORK, f"cannot fetch non-HTTP URI {uri}"))
        req = urllib.request.Request(uri, headers={"Accept": accept})
        try:
            with self._opener.open(req, timeout=timeout_s) as resp:
                return Response(resp.status, resp.headers.get("Content-Type", ""),
                                resp.headers.get("Location"), resp.read())
        except urllib.error.HTTPError as exc:
            return Response(exc.code, exc.headers.get("Content-Type", ""),
                            exc.headers.get("Location"), exc.read() if exc.fp else b"")
        except (socket.timeout, TimeoutError):
            raise DereferenceError(Failure(FailureKind.TIMEOUT, uri)) from None
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                raise DereferenceError(Failure(FailureKind.TIMEOUT, uri)) from None
            raise DereferenceError(Failure(FailureKind.NETWORK, f"{uri}: {exc.reason}")) from None
        except OSError as exc:
            raise DereferenceError(Failure(FailureKind.NETWORK, f"{uri}: {exc}")) from None


class FixtureTransport:
    """Replays canned responses from ``manifest.json``; never opens a socket.

    The n-th GET of a URI returns its n-th listed response (the last one
    repeats).  Every GET is appended to ``access_log``.
    """

    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)
        entries = json.loads((self.directory / "manifest.json").read_text("utf-8"))
        self.responses: dict[str, list] = {}
        for entry in entries:
            self.responses.setdefault(entry["uri"], []).extend(entry["responses"])
        self.access_log: list[str] = []
        self._hits: dict[str, int] = {}
        self._lock = threading.Lock()

    def get(self, uri: str, accept: str, timeout_s: float) -> Response:
        with self._lock:
            self.access_log.append(uri)
            n = self._hits.get(uri, 0)
            self._hits[uri] = n + 1
        chain = self.responses.get(uri)
        if not chain:
            raise DereferenceError(Failure(FailureKind.NETWORK, f"no fixture for {uri}"))
        entry = chain[min(n, len(chain) - 1)]
        if entry.get("timeout"):
            raise DereferenceError(Failure(FailureKind.TIMEOUT, uri))
        body = b""
        if "body_file" in entry:
            body = (self.directory / entry["body_file"]).read_bytes()
        elif "body" in entry:
            body = entry["body"].encode("utf-8")
        return Response(int(entry["status"]), entry.get("content_type", ""),
                        entry.get("location"), body)

    def fetch_count(self, uri: str) -> int:
        return self.access_log.count(uri)


def make_transport(cfg: FetchConfig) -> Transport:
    directory = cfg.fixture_dir or os.environ.get(FIXTURES_ENV)
    return FixtureTransport(directory) if directory else HttpTransport()


@dataclass
class Fetched:
    triples: list
    skipped: list
    hops: list  # [(uri, status), ...]
    final_uri: str


def dereference(uri: Uri, cfg: FetchConfig, transport: Transport | None = None,
                mint: Callable[[], Uri] | None = None) -> Fetched:
    """Fetch and parse ``uri``; raises DereferenceError with a classified Failure."""
    transport = transport or make_transport(cfg)
    mint = mint or SkolemMinter()
    accept = cfg.accept_header()
    current = uri.value
    seen = {current}
    hops = []
    while True:
        resp = transport.get(current, accept, cfg.timeout_ms / 1000)
        hops.append((current, resp.status))
        log.info("GET %s -> %d", current, resp.status)
        if resp.status in FOLLOWED:
            if not resp.location:
                raise DereferenceError(Failure(
                    FailureKind.HTTP_STATUS, f"{resp.status} without Location from {current}"))
            target = urljoin(current, resp.location)
            if target in seen:
                raise DereferenceError(Failure(FailureKind.REDIRECT_LOOP, f"{current} -> {target}"))
            if len(hops) > cfg.max_redirects:
                raise DereferenceError(Failure(
                    FailureKind.REDIRECT_LIMIT, f"more than {cfg.max_redirects} redirects from {uri}"))
            seen.add(target)
            current = target
            continue
        if not 200 <= resp.status < 300:
            raise DereferenceError(Failure(FailureKind.HTTP_STATUS, f"HTTP {resp.status} for {current}"))
        ctype = media_type(resp.content_type)
        if ctype not in cfg.accept:
            raise DereferenceError(Failure(
                FailureKind.UNSUPPORTED_CONTENT_TYPE, f"{resp.content_type or 'none'} from {current}"))
        try:
            doc = parse_rdf_document(resp.body, ctype, base=current)
        except UnsupportedContentType as exc:
            raise DereferenceError(Failure(FailureKind.UNSUPPORTED_CONTENT_TYPE, str(exc))) from None
        except (RdfSyntaxError, TermError, UnicodeDecodeError) as exc:
            raise DereferenceError(Failure(FailureKind.PARSE_ERROR, f"{current}: {exc}")) from None
        return Fetched(skolemize(doc.triples, mint), list(doc.skipped), hops, current)


# ---------------------------------------------------------------- records

class LoadKind(enum.Enum):
    ALREADY_LOADED = "already-loaded"
    LOADED = "loaded"
    FAILED = "failed"


@dataclass(frozen=True)
class LoadStatus:
    kind: LoadKind
    admitted: int = 0
    rejected: int = 0
    reason: Failure | None = None

    def __str__(self):
        if self.kind is LoadKind.LOADED:
            return f"loaded admitted={self.admitted} rejected={self.rejected}"
        if self.kind is LoadKind.FAILED:
            return f"failed {self.reason}"
        return "already-loaded"


@dataclass
class FetchRecord:
    uri: str
    succeeded: bool
    admitted: int = 0
    rejected: int = 0
    reason: str | None = None
    kind: str | None = None
    timestamp: float = field(default_factory=time.time)


class FetchRegistry:
    """One record per URI per run, with a lock per URI so a URI is fetched once.

    With ``path`` set, failures are read from and written back to a JSON file
    so later runs skip URIs already known to fail.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.records: dict[str, FetchRecord] = {}
        self.path = Path(path) if path else None
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        if self.path and self.path.exists():
            for item in json.loads(self.path.read_text("utf-8")):
                rec = FetchRecord(**item)
                if not rec.succeeded:
                    self.records[rec.uri] = rec

    def lock_for(self, uri: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(uri, threading.Lock())

    def get(self, uri: str) -> FetchRecord | None:
        with self._guard:
            return self.records.get(uri)

    def put(self, rec: FetchRecord) -> None:
        with self._guard:
            self.records[rec.uri] = rec

    def __contains__(self, uri: str):
        return self.get(uri) is not None

    def save(self) -> None:
        if not self.path:
            return
        with self._guard:
            failed = [asdict(r) for _, r in sorted(self.records.items()) if not r.succeeded]
        self.path.write_text(json.dumps(failed, indent=2), "utf-8")


def load_named(store: QuadStore, uri: Uri, ont: Mapping, records: FetchRegistry,
               cfg: FetchConfig, transport: Transport | None = None,
               mint: Callable[[], Uri] | None = None) -> LoadStatus:
    with records.lock_for(uri.value):
        rec = records.get(uri.value)
        if rec is not None:
            if rec.succeeded:
                return LoadStatus(LoadKind.ALREADY_LOADED)
            return LoadStatus(LoadKind.FAILED, reason=Failure(FailureKind(rec.kind), rec.reason or ""))
        try:
            fetched = dereference(uri, cfg, transport, mint)
        except DereferenceError as exc:
            f = exc.failure
            log.warning("dereferencing %s failed: %s", uri.value, f)
            records.put(FetchRecord(uri.value, False, reason=f.detail, kind=f.kind.value))
            return LoadStatus(LoadKind.FAILED, reason=f)
        admitted, rejected = admit_triples(fetched.triples, ont)
        rejected_count = len(rejected) + len(fetched.skipped)
        store.insert_quads(uri, admitted, source=fetched.final_uri,
                           admitted=len(admitted), rejected=rejected_count)
        records.put(FetchRecord(uri.value, True, len(admitted), rejected_count))
        return LoadStatus(LoadKind.LOADED, len(admitted), rejected_count)


def load_many(store: QuadStore, uris, ont: Mapping, records: FetchRegistry,
              cfg: FetchConfig, transport: Transport | None = None,
              mint: Callable[[], Uri] | None = None) -> list[LoadStatus]:
    """Load several URIs with at most ``cfg.parallelism`` fetches in flight."""
    transport = transport or make_transport(cfg)
    mint = mint or SkolemMinter()
    with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
        futures = [pool.submit(load_named, store, u, ont, records, cfg, transport, mint)
                   for u in uris]
        return [f.result() for f in futures]
