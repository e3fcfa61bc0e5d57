"""Download and unpack quarterly FAERS archives."""
from __future__ import annotations

import errno
import logging
import os
import shutil
import string
import time
import urllib.error
import urllib.request
import zipfile
from dataclasses import dataclass
from pathlib import Path, PurePosixPath
from typing import Callable, NamedTuple
from urllib.parse import urlsplit

from filelock import FileLock

log = logging.getLogger(__name__)

DEFAULT_URL_TEMPLATE = "https://fis.fda.gov/content/Exports/faers_xml_{year}q{quarter}.zip"
FIRST_YEAR = 2004


class AcquireError(Exception):
    pass


class TemplateError(AcquireError, ValueError):
    pass


class FetchError(AcquireError):
    """Network or HTTP failure; ``status`` is None when no response arrived."""

    def __init__(self, url: str, status: int | None, reason: str):
        detail = f"HTTP {status}" if status is not None else "network error"
        super().__init__(f"{detail} fetching {url}: {reason}")
        self.url = url
        self.status = status


class DiskFullError(AcquireError, OSError):
    pass


class CorruptArchiveError(AcquireError, ValueError):
    pass


class PathTraversalError(AcquireError, ValueError):
    pass


@dataclass(frozen=True)
class QuarterRef:
    year: int
    quarter: int

    def __post_init__(self):
        if self.year < FIRST_YEAR:
            raise ValueError(f"FAERS quarterly data starts in {FIRST_YEAR}, got {self.year}")
        if not 1 <= self.quarter <= 4:
            raise ValueError(f"quarter must be 1..4, got {self.quarter}")


class Fetched(NamedTuple):
    path: Path
    cached: bool


def render_url(ref: QuarterRef, url_template: str) -> str:
    try:
        fields = {name for _, name, _, _ in string.Formatter().parse(url_template) if name is not None}
    except ValueError as exc:
        raise TemplateError(f"bad URL template {url_template!r}: {exc}") from None
    missing = {"year", "quarter"} - fields
    if missing:
        raise TemplateError(f"URL template lacks {{{'}, {'.join(sorted(missing))}}} placeholder")
    extra = fields - {"year", "quarter"}
    if extra:
        raise TemplateError(f"URL template has unknown placeholders {sorted(extra)}")
    return url_template.format(year=ref.year, quarter=ref.quarter)


def _retryable(exc: Exception) -> bool:
    if isinstance(exc, urllib.error.HTTPError):
        return exc.code >= 500 or exc.code == 429
    return isinstance(exc, (urllib.error.URLError, TimeoutError, ConnectionError))


def fetch_quarter(
    ref: QuarterRef,
    url_template: str,
    dest_dir: str | Path,
    *,
    retries: int = 3,
    backoff: float = 1.0,
    timeout: float = 60.0,
    opener: Callable = urllib.request.urlopen,
    sleep: Callable[[float], None] = time.sleep,
) -> Fetched:
    """Download one quarter's archive into ``dest_dir``.

    The body is written to a ``.part`` file and renamed on completion, so a
    file at the final path is always complete and is reused without any
    network access. Transient failures are retried ``retries`` times with
    exponential backoff.
    """
    url = render_url(ref, url_template)
    dest_dir = Path(dest_dir)
    dest_dir.mkdir(parents=True, exist_ok=True)
    name = PurePosixPath(urlsplit(url).path).name or f"faers_{ref.year}q{ref.quarter}.zip"
    target = dest_dir / name

    with FileLock(str(target) + ".lock"):
        if target.exists():
            log.info("using cached %s", target)
            return Fetched(target, True)
        part = target.with_name(target.name + ".part")
        attempt = 0
        while True:
            try:
                with opener(url, timeout=timeout) as response, open(part, "wb") as fh:
                    shutil.copyfileobj(response, fh)
                break
            except OSError as exc:
                part.unlink(missing_ok=True)
                if getattr(exc, "errno", None) == errno.ENOSPC:
                    raise DiskFullError(errno.ENOSPC, f"disk full writing {part}") from exc
                if attempt >= retries or not _retryable(exc):
                    status = exc.code if isinstance(exc, urllib.error.HTTPError) else None
                    reason = getattr(exc, "reason", None) or str(exc)
                    raise FetchError(url, status, str(reason)) from exc
                delay = backoff * (2 ** attempt)
                attempt += 1
                log.warning("fetch of %s failed (%s); retry %d/%d in %.1fs", url, exc, attempt, retries, delay)
                sleep(delay)
        os.replace(part, target)
    return Fetched(target, False)


def extract_archive(archive: str | Path, dest_dir: str | Path) -> list[Path]:
    """Extract only ``.xml`` members; refuse members that would land outside ``dest_dir``."""
    dest_dir = Path(dest_dir)
    root = dest_dir.resolve()
    try:
        with zipfile.ZipFile(archive) as zf:
            members = [m for m in zf.infolist() if not m.is_dir() and m.filename.lower().endswith(".xml")]
            for member in members:
                resolved = (root / member.filename).resolve()
                if member.filename.startswith(("/", "\\")) or not resolved.is_relative_to(root):
                    raise PathTraversalError(f"archive member {member.filename!r} escapes {dest_dir}")
            dest_dir.mkdir(parents=True, exist_ok=True)
            extracted = []
            for member in members:
                target = root / member.filename
                target.parent.mkdir(parents=True, exist_ok=True)
                with zf.open(member) as src, open(target, "wb") as dst:
                    shutil.copyfileobj(src, dst)
                extracted.append(target)
    except zipfile.BadZipFile as exc:
        raise CorruptArchiveError(f"{archive}: {exc}") from exc
    return sorted(extracted)
