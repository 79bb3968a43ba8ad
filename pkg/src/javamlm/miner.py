"""Corpus mining over GH Archive event logs and cloned repository snapshots.

Stages: count pull-request comment events per repository, keep repositories
with a permissive license, Java among their top three languages and enough
comments, then sample their Java files by token count and split them into
train and test sets.
"""

from __future__ import annotations

import gzip
import json
import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .lexer import count_tokens

log = logging.getLogger(__name__)

REVIEW_COMMENT_EVENT = "PullRequestReviewCommentEvent"
ISSUE_COMMENT_EVENT = "IssueCommentEvent"
ALLOWED_LICENSES = ("MIT", "Apache-2.0")
MANIFEST_VERSION = 1

_LICENSE_ALIASES = {
    "mit": "MIT",
    "mit license": "MIT",
    "apache-2.0": "Apache-2.0",
    "apache 2.0": "Apache-2.0",
    "apache license 2.0": "Apache-2.0",
    "apache-2": "Apache-2.0",
}


@dataclass(frozen=True)
class ArchiveEvent:
    event_type: str
    repo_full_name: str
    created_at: str
    action: str | None = None
    on_pull_request: bool = False


@dataclass(frozen=True)
class RepoMetadata:
    repo_full_name: str
    license_id: str | None
    language_ranking: tuple[tuple[str, int], ...]

    def language_rank(self, language: str) -> int | None:
        for i, (name, _) in enumerate(self.language_ranking):
            if name == language:
                return i + 1
        return None


@dataclass(frozen=True)
class RepoActivity:
    repo_full_name: str
    pr_comment_count: int


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    repo: str
    token_count: int
    split: str | None = None

    def to_json(self) -> dict:
        return {"path": self.path, "repo": self.repo, "token_count": self.token_count, "split": self.split}


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry]
    seed: int | None = None
    ratio: float | None = None

    def by_split(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for e in self.entries:
                fh.write(json.dumps(e.to_json(), sort_keys=True, separators=(",", ":")) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "CorpusManifest":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    d = json.loads(line)
                    entries.append(ManifestEntry(d["path"], d["repo"], int(d["token_count"]), d.get("split")))
        return cls(entries)


@dataclass
class MiningSummary:
    """Counts per pipeline stage, in pipeline order."""

    event_lines: int = 0
    malformed_events: int = 0
    qualifying_events: int = 0
    active_repos: int = 0
    missing_metadata: int = 0
    license_ok: int = 0
    java_top3: int = 0
    min_comments_ok: int = 0
    retained_repos: int = 0
    java_files: int = 0
    files_too_small: int = 0
    files_too_large: int = 0
    files_lex_error: int = 0
    files_unreadable: int = 0
    sampled_files: int = 0
    train_files: int = 0
    test_files: int = 0
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["notes"] = list(self.notes)
        return d


def normalize_license(raw) -> str | None:
    if isinstance(raw, Mapping):
        raw = raw.get("spdx_id") or raw.get("key") or raw.get("name")
    if not raw or not isinstance(raw, str):
        return None
    value = raw.strip()
    if value.upper() == "NOASSERTION":
        return None
    return _LICENSE_ALIASES.get(value.lower(), value)


def rank_languages(languages: Mapping[str, int]) -> tuple[tuple[str, int], ...]:
    return tuple(sorted(((k, int(v)) for k, v in languages.items()), key=lambda kv: (-kv[1], kv[0])))


def parse_metadata(record: Mapping) -> RepoMetadata:
    return RepoMetadata(
        repo_full_name=record["full_name"],
        license_id=normalize_license(record.get("license")),
        language_ranking=rank_languages(record.get("languages") or {}),
    )


def load_metadata(path: str | Path) -> dict[str, RepoMetadata]:
    meta = {}
    with _open_text(Path(path)) as fh:
        for line in fh:
            if line.strip():
                m = parse_metadata(json.loads(line))
                meta[m.repo_full_name] = m
    return meta


def parse_event(raw) -> ArchiveEvent:
    """Build an event from a GH Archive JSON line or decoded dict; ValueError if malformed."""
    if isinstance(raw, ArchiveEvent):
        return raw
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValueError(f"not JSON: {exc}") from None
    if not isinstance(raw, Mapping):
        raise ValueError("event is not an object")
    try:
        event_type = raw["type"]
        name = raw["repo"]["name"]
        created_at = raw["created_at"]
    except (KeyError, TypeError):
        raise ValueError("event lacks type, repo.name or created_at") from None
    if not isinstance(event_type, str) or not isinstance(name, str) or name.count("/") != 1:
        raise ValueError(f"bad repository name {name!r}")
    try:
        datetime.fromisoformat(str(created_at).replace("Z", "+00:00"))
    except ValueError:
        raise ValueError(f"bad timestamp {created_at!r}") from None
    payload = raw.get("payload") or {}
    issue = payload.get("issue") if isinstance(payload, Mapping) else None
    return ArchiveEvent(
        event_type=event_type,
        repo_full_name=name,
        created_at=str(created_at),
        action=payload.get("action") if isinstance(payload, Mapping) else None,
        on_pull_request=isinstance(issue, Mapping) and bool(issue.get("pull_request")),
    )


def is_pr_comment_created(event: ArchiveEvent, include_issue_comments: bool = False) -> bool:
    if event.action != "created":
        return False
    if event.event_type == REVIEW_COMMENT_EVENT:
        return True
    return include_issue_comments and event.event_type == ISSUE_COMMENT_EVENT and event.on_pull_request


def aggregate_activity(
    events: Iterable,
    include_issue_comments: bool = False,
    summary: MiningSummary | None = None,
) -> list[RepoActivity]:
    """Count qualifying comment events per repository, sorted by repository name.

    ``events`` may hold raw JSON lines, decoded dicts or ArchiveEvent values;
    malformed items are skipped and counted in ``summary``.
    """
    summary = summary if summary is not None else MiningSummary()
    counts: Counter[str] = Counter()
    for raw in events:
        summary.event_lines += 1
        try:
            event = parse_event(raw)
        except ValueError:
            summary.malformed_events += 1
            continue
        if is_pr_comment_created(event, include_issue_comments):
            summary.qualifying_events += 1
            counts[event.repo_full_name] += 1
    activity = [RepoActivity(name, counts[name]) for name in sorted(counts)]
    summary.active_repos = len(activity)
    return activity


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def event_files(directory: str | Path) -> list[Path]:
    root = Path(directory)
    return sorted(p for p in root.rglob("*") if p.is_file() and p.name.endswith((".json", ".jsonl", ".json.gz", ".jsonl.gz")))


def iter_event_lines(directory: str | Path) -> Iterator[str]:
    for path in event_files(directory):
        with _open_text(path) as fh:
            for line in fh:
                if line.strip():
                    yield line


# -- repository filters; each keeps the input order and only removes --

def has_allowed_license(meta: RepoMetadata, licenses: Iterable[str] = ALLOWED_LICENSES) -> bool:
    return meta.license_id in set(licenses)


def java_in_top(meta: RepoMetadata, top: int = 3, language: str = "Java") -> bool:
    rank = meta.language_rank(language)
    return rank is not None and rank <= top


def enough_comments(activity: RepoActivity, min_comments: int = 10) -> bool:
    return activity.pr_comment_count >= min_comments


def filter_repos(
    activity: Iterable[RepoActivity],
    meta: Mapping[str, RepoMetadata],
    min_comments: int = 10,
    licenses: Iterable[str] = ALLOWED_LICENSES,
    top_languages: int = 3,
    summary: MiningSummary | None = None,
) -> list[str]:
    summary = summary if summary is not None else MiningSummary()
    licenses = tuple(licenses)
    with_meta = []
    for act in activity:
        if act.repo_full_name in meta:
            with_meta.append(act)
        else:
            log.warning("no metadata for %s; dropped", act.repo_full_name)
            summary.missing_metadata += 1
    stage = [a for a in with_meta if has_allowed_license(meta[a.repo_full_name], licenses)]
    summary.license_ok = len(stage)
    stage = [a for a in stage if java_in_top(meta[a.repo_full_name], top_languages)]
    summary.java_top3 = len(stage)
    stage = [a for a in stage if enough_comments(a, min_comments)]
    summary.min_comments_ok = len(stage)
    summary.retained_repos = len(stage)
    return [a.repo_full_name for a in stage]


def _count_file(args: tuple[str, str]) -> tuple[str, int, bool, str | None]:
    path, rel = args
    try:
        source = Path(path).read_bytes().decode("utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        return rel, 0, True, f"{type(exc).__name__}: {exc}"
    count, error = count_tokens(source)
    return rel, count, error, None


def sample_files(
    repos_root: str | Path,
    repos: Iterable[str],
    min_tokens: int = 40,
    max_tokens: int = 3000,
    workers: int = 1,
    summary: MiningSummary | None = None,
) -> CorpusManifest:
    """Keep every ``.java`` file whose token count lies in ``[min_tokens, max_tokens]``.

    Repositories live at ``repos_root/<owner>/<name>``; manifest paths are
    relative to ``repos_root`` and sorted by repository then path.
    """
    summary = summary if summary is not None else MiningSummary()
    root = Path(repos_root)
    jobs = []
    for repo in sorted(set(repos)):
        repo_dir = root / repo
        if not repo_dir.is_dir():
            log.warning("repository %s not found under %s", repo, root)
            summary.notes.append(f"missing repository directory: {repo}")
            continue
        for dirpath, dirnames, filenames in os.walk(repo_dir):
            dirnames.sort()
            for fname in sorted(filenames):
                if fname.endswith(".java"):
                    full = Path(dirpath) / fname
                    jobs.append((str(full), full.relative_to(root).as_posix()))
    summary.java_files = len(jobs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_count_file, jobs, chunksize=64))
    else:
        results = [_count_file(j) for j in jobs]

    entries = []
    for rel, count, error, problem in results:
        if problem is not None:
            log.warning("skipping unreadable file %s (%s)", rel, problem)
            summary.files_unreadable += 1
        elif error:
            summary.files_lex_error += 1
        elif count < min_tokens:
            summary.files_too_small += 1
        elif count > max_tokens:
            summary.files_too_large += 1
        else:
            repo = "/".join(rel.split("/")[:2])
            entries.append(ManifestEntry(rel, repo, count))
    entries.sort(key=lambda e: (e.repo, e.path))
    summary.sampled_files = len(entries)
    return CorpusManifest(entries)


def split(manifest: CorpusManifest, ratio: float, seed: int) -> CorpusManifest:
    """Label each entry ``train`` with probability ``ratio``, independently, from one seeded stream."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie strictly between 0 and 1, got {ratio}")
    draws = np.random.default_rng(seed).random(len(manifest.entries))
    entries = [
        replace(e, split="train" if u < ratio else "test")
        for e, u in zip(manifest.entries, draws)
    ]
    return CorpusManifest(entries, seed=seed, ratio=ratio)


def mine(
    events_dir: str | Path,
    meta_path: str | Path,
    repos_root: str | Path,
    min_tokens: int = 40,
    max_tokens: int = 3000,
    min_comments: int = 10,
    ratio: float = 0.7,
    seed: int = 0,
    include_issue_comments: bool = False,
    workers: int = 1,
) -> tuple[CorpusManifest, MiningSummary]:
    summary = MiningSummary()
    activity = aggregate_activity(iter_event_lines(events_dir), include_issue_comments, summary)
    meta = load_metadata(meta_path)
    repos = filter_repos(activity, meta, min_comments=min_comments, summary=summary)
    sampled = sample_files(repos_root, repos, min_tokens, max_tokens, workers, summary)
    manifest = split(sampled, ratio, seed)
    summary.train_files = len(manifest.by_split("train"))
    summary.test_files = len(manifest.by_split("test"))
    return manifest, summary
