"""Labeled link-candidate generation, balancing, and TSV persistence.

True candidates are the developer-recorded links. False candidates pair an
already-linked commit with every other issue whose dates fall within a
time window of the commit dates; restricting the false side to linked
commits keeps their date distributions comparable.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from . import HybridLinkerError
from .corpus import SECONDS_PER_DAY, Corpus, Commit, Issue


class CandidateFileError(HybridLinkerError):
    """A candidate TSV file could not be parsed."""


@dataclass(frozen=True)
class LinkCandidate:
    issue_id: str
    commit_hash: str
    label: int  # 1 true link, 0 generated non-link
    provenance: str  # "linked" or "window"

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


def _issue_dates(issue: Issue) -> tuple[int, ...]:
    dates = [issue.created_date, issue.updated_date]
    if issue.resolved_date is not None:
        dates.append(issue.resolved_date)
    return tuple(dates)


def within_window(commit: Commit, issue: Issue, window_days: int | None) -> bool:
    """True when any commit date is within the window of any issue date.

    The bound is inclusive; window_days=None disables the check entirely.
    """
    if window_days is None:
        return True
    limit = window_days * SECONDS_PER_DAY
    for commit_date in (commit.author_time_date, commit.commit_time_date):
        for issue_date in _issue_dates(issue):
            if abs(commit_date - issue_date) <= limit:
                return True
    return False


def generate_candidates(
    corpus: Corpus, window_days: int | None = 7
) -> list[LinkCandidate]:
    """Enumerate labeled candidates in deterministic corpus order.

    For every commit each recorded link becomes a true candidate; for every
    linked commit each other in-window issue becomes a false candidate.
    """
    candidates: list[LinkCandidate] = []
    for commit in corpus.commits:
        for issue_id in commit.linked_issue_ids:
            corpus.issue(issue_id)  # validated, but keep lookups honest
            candidates.append(
                LinkCandidate(
                    issue_id=issue_id,
                    commit_hash=commit.commit_hash,
                    label=1,
                    provenance="linked",
                )
            )
        if not commit.linked_issue_ids:
            continue
        linked = set(commit.linked_issue_ids)
        for issue in corpus.issues:
            if issue.issue_id in linked:
                continue
            if within_window(commit, issue, window_days):
                candidates.append(
                    LinkCandidate(
                        issue_id=issue.issue_id,
                        commit_hash=commit.commit_hash,
                        label=0,
                        provenance="window",
                    )
                )
    return candidates


@dataclass(frozen=True)
class BalanceResult:
    candidates: tuple[LinkCandidate, ...]
    n_true: int
    n_false_available: int
    n_false_sampled: int
    deficit: bool  # fewer false candidates than true ones were available


def balance_candidates(
    candidates: list[LinkCandidate], seed: int
) -> BalanceResult:
    """Keep all true candidates plus an equal-size uniform sample of false ones.

    When the false pool is smaller than the true set, everything is kept and
    the deficit flag is raised. The combined list is shuffled with the same
    seeded generator, so the output order is reproducible.
    """
    true_part = [c for c in candidates if c.label == 1]
    false_pool = [c for c in candidates if c.label == 0]
    rng = random.Random(seed)
    take = min(len(true_part), len(false_pool))
    sampled = rng.sample(false_pool, take)
    combined = true_part + sampled
    rng.shuffle(combined)
    return BalanceResult(
        candidates=tuple(combined),
        n_true=len(true_part),
        n_false_available=len(false_pool),
        n_false_sampled=take,
        deficit=len(false_pool) < len(true_part),
    )


_HEADER = "issue_id\tcommit_hash\tlabel\tprovenance"


def write_candidates(path: str | Path, candidates: list[LinkCandidate]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(_HEADER + "\n")
        for cand in candidates:
            handle.write(
                f"{cand.issue_id}\t{cand.commit_hash}\t{cand.label}\t{cand.provenance}\n"
            )


def read_candidates(path: str | Path) -> list[LinkCandidate]:
    path = Path(path)
    candidates: list[LinkCandidate] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line or (lineno == 1 and line == _HEADER):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise CandidateFileError(
                    f"{path}:{lineno}: expected 4 tab-separated fields, got {len(fields)}"
                )
            issue_id, commit_hash, label_text, provenance = fields
            if label_text not in ("0", "1"):
                raise CandidateFileError(
                    f"{path}:{lineno}: label must be 0 or 1, got {label_text!r}"
                )
            candidates.append(
                LinkCandidate(
                    issue_id=issue_id,
                    commit_hash=commit_hash,
                    label=int(label_text),
                    provenance=provenance,
                )
            )
    return candidates
