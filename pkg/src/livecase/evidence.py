"""Versioned evidence registry and dynamic-link resolution.

Artifact content is identified by its SHA-256 digest; the registry stores
digests and locators, never the content itself. When a journal path is given,
every new version is appended as one tab-separated line::

    artifact_id <TAB> seq <TAB> sha256-hex <TAB> 2026-01-31T12:00:00Z
"""

from __future__ import annotations

import enum
import hashlib
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from livecase.exceptions import JournalError, RejectedInput, ResolutionError

DIGEST_HEX_LEN = 64
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


class Sensitivity(str, enum.Enum):
    STRICT = "strict"
    ROBUST_TO_EDITORIAL = "robust_to_editorial"


class Freshness(str, enum.Enum):
    FRESH = "fresh"
    STALE = "stale"


def digest(content: bytes) -> str:
    return hashlib.sha256(content).hexdigest()


@dataclass(frozen=True)
class ArtifactVersion:
    seq: int
    content_digest: str
    recorded_at: datetime

    def __post_init__(self) -> None:
        if self.seq < 1:
            raise RejectedInput(f"version seq must be positive, got {self.seq}")
        if len(self.content_digest) != DIGEST_HEX_LEN:
            raise RejectedInput("content digest must be 64 hex characters")


@dataclass
class EvidenceArtifact:
    id: str
    uri: str = ""
    versions: list[ArtifactVersion] = field(default_factory=list)

    @property
    def head(self) -> ArtifactVersion | None:
        return self.versions[-1] if self.versions else None


@dataclass(frozen=True)
class DynamicLink:
    """A reference from a solution to an evidence artifact.

    ``pinned`` selects a fixed version; ``None`` follows the latest one.
    ``reviewed_seq`` records the last version a reviewer signed off on.
    """

    id: str
    artifact_id: str
    pinned: int | None = None
    sensitivity: Sensitivity = Sensitivity.STRICT
    uri: str = ""
    reviewed_seq: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "sensitivity", Sensitivity(self.sensitivity))
        if self.pinned is not None and self.pinned < 1:
            raise RejectedInput(f"pinned version must be positive, got {self.pinned}")

    @property
    def selector(self) -> str:
        return "latest" if self.pinned is None else f"pinned({self.pinned})"


def _utc_seconds(when: datetime | None) -> datetime:
    when = when or datetime.now(timezone.utc)
    if when.tzinfo is None:
        when = when.replace(tzinfo=timezone.utc)
    return when.astimezone(timezone.utc).replace(microsecond=0)


class EvidenceRegistry:
    """Append-only store of artifact versions, optionally journaled to disk."""

    def __init__(self, journal: str | os.PathLike | None = None) -> None:
        self._artifacts: dict[str, EvidenceArtifact] = {}
        self._lock = threading.Lock()
        self.journal = Path(journal) if journal is not None else None
        if self.journal is not None and self.journal.exists():
            self._load()

    def _load(self) -> None:
        data = self.journal.read_bytes()
        complete, sep, partial = data.rpartition(b"\n")
        if partial:
            # Crash mid-append: drop the incomplete tail.
            with open(self.journal, "r+b") as fh:
                fh.truncate(len(complete) + len(sep))
        self._replay(complete, str(self.journal))

    def _replay(self, complete: bytes, source: str) -> None:
        if not complete:
            return
        for lineno, raw in enumerate(complete.split(b"\n"), start=1):
            if not raw.strip():
                continue
            try:
                artifact_id, seq, hexdigest, stamp = raw.decode("utf-8").split("\t")
                version = ArtifactVersion(
                    int(seq),
                    hexdigest,
                    datetime.strptime(stamp, TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc),
                )
            except (ValueError, RejectedInput) as exc:
                raise JournalError(f"{source}:{lineno}: malformed record ({exc})") from None
            artifact = self._artifacts.setdefault(artifact_id, EvidenceArtifact(artifact_id))
            expected = len(artifact.versions) + 1
            if version.seq != expected:
                raise JournalError(f"{source}:{lineno}: {artifact_id} seq {version.seq}, expected {expected}")
            artifact.versions.append(version)

    @classmethod
    def read_only_copy(cls, journal: str | os.PathLike) -> "EvidenceRegistry":
        """In-memory registry holding a journal's complete records; the file is left untouched."""
        registry = cls()
        data = Path(journal).read_bytes()
        registry._replay(data.rpartition(b"\n")[0], str(journal))
        return registry

    def _append(self, artifact_id: str, version: ArtifactVersion) -> None:
        line = "\t".join(
            (artifact_id, str(version.seq), version.content_digest,
             version.recorded_at.strftime(TIMESTAMP_FORMAT))
        ) + "\n"
        with open(self.journal, "ab") as fh:
            fh.write(line.encode("utf-8"))
            fh.flush()
            os.fsync(fh.fileno())

    def register_version(
        self,
        artifact_id: str,
        content: bytes,
        *,
        uri: str | None = None,
        recorded_at: datetime | None = None,
    ) -> ArtifactVersion:
        """Record new content for an artifact, creating the artifact if needed.

        Registering the same bytes as the current head is a no-op that returns
        the head.
        """
        content_digest = digest(content)
        with self._lock:
            artifact = self._artifacts.get(artifact_id)
            if artifact is None:
                artifact = self._artifacts[artifact_id] = EvidenceArtifact(artifact_id, uri or "")
            elif uri:
                artifact.uri = uri
            head = artifact.head
            if head is not None and head.content_digest == content_digest:
                return head
            version = ArtifactVersion(len(artifact.versions) + 1, content_digest, _utc_seconds(recorded_at))
            if self.journal is not None:
                self._append(artifact_id, version)
            artifact.versions.append(version)
            return version

    def artifact(self, artifact_id: str) -> EvidenceArtifact:
        try:
            return self._artifacts[artifact_id]
        except KeyError:
            raise ResolutionError(f"unknown artifact {artifact_id!r}") from None

    def __contains__(self, artifact_id: str) -> bool:
        return artifact_id in self._artifacts

    @property
    def artifact_ids(self) -> list[str]:
        return sorted(self._artifacts)

    def resolve(self, link: DynamicLink) -> ArtifactVersion:
        artifact = self.artifact(link.artifact_id)
        if not artifact.versions:
            raise ResolutionError(f"artifact {link.artifact_id!r} has no versions")
        if link.pinned is None:
            return artifact.versions[-1]
        if link.pinned > len(artifact.versions):
            raise ResolutionError(
                f"link {link.id}: artifact {link.artifact_id!r} has no version {link.pinned}"
            )
        return artifact.versions[link.pinned - 1]

    def staleness(self, link: DynamicLink, last_reviewed_seq: int | None = None) -> Freshness:
        """``stale`` iff the resolved version is newer than the reviewed one.

        Without an explicit ``last_reviewed_seq`` the link's own review record
        is used; a pinned link counts its pinned version as reviewed.
        """
        if last_reviewed_seq is None:
            last_reviewed_seq = link.reviewed_seq
        if last_reviewed_seq is None:
            last_reviewed_seq = link.pinned or 0
        try:
            resolved = self.resolve(link)
        except ResolutionError:
            return Freshness.STALE
        return Freshness.STALE if resolved.seq > last_reviewed_seq else Freshness.FRESH

    def evidence_state(self, links) -> dict[str, Freshness]:
        return {link.id: self.staleness(link) for link in links}
