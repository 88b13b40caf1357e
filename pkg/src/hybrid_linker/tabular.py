"""Non-textual candidate features: dates, day gaps, categories, identities.

Dates enter as fractional epoch-days. Raw status and type labels reduce to
three classes each through a shipped mapping file. Identity columns one-hot
the most frequent hashes and bucket the rest as OTHER. Near-constant or
mostly-missing inputs are dropped at fit time and the encoder remembers the
decision, so transform never has to guess.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import HybridLinkerError
from .corpus import SECONDS_PER_DAY, Corpus, Issue
from .linkgen import LinkCandidate

STATUS_CLASSES = ("open", "closed", "resolved")
TYPE_CLASSES = ("task", "new_feature", "bug")
DEFAULT_STATUS = "open"
DEFAULT_TYPE = "task"

DEFAULT_IDENTITY_TOP_K = 50
DEFAULT_MISSING_THRESHOLD = 0.5
REDUNDANCY_CUTOFF = 0.99

OTHER = "OTHER"


class CategoryMapError(HybridLinkerError):
    """The status/type mapping file is malformed."""


def load_category_maps(
    path: str | Path | None = None,
) -> tuple[dict[str, str], dict[str, str]]:
    """Read the raw-label mapping file into (status_map, type_map).

    Rows are raw_label<TAB>reduced_class; the reduced class decides whether
    a row belongs to the status or the type map. Raw labels are matched
    case-insensitively.
    """
    if path is None:
        text = resources.files("hybrid_linker.data").joinpath(
            "category_map.tsv"
        ).read_text(encoding="utf-8")
        source = "<packaged category_map.tsv>"
    else:
        text = Path(path).read_text(encoding="utf-8")
        source = str(path)
    status_map: dict[str, str] = {}
    type_map: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise CategoryMapError(
                f"{source}:{lineno}: expected raw_label<TAB>reduced_class"
            )
        raw, reduced = fields[0].strip(), fields[1].strip()
        key = raw.casefold()
        if reduced in STATUS_CLASSES:
            status_map[key] = reduced
        elif reduced in TYPE_CLASSES:
            type_map[key] = reduced
        else:
            raise CategoryMapError(
                f"{source}:{lineno}: unknown reduced class {reduced!r}"
            )
    return status_map, type_map


def _identity_redundancy(issues) -> dict[str, float]:
    issues = list(issues)
    if not issues:
        return {"reporter_creator_equality": 0.0}
    equal = sum(1 for issue in issues if issue.reporter == issue.creator)
    return {"reporter_creator_equality": equal / len(issues)}


def redundancy_report(corpus: Corpus) -> dict[str, float]:
    """Per-pair equality rates between identity columns of the same record."""
    return _identity_redundancy(corpus.issues)


def _top_identities(counts: Counter, top_k: int) -> tuple[str, ...]:
    ordered = sorted(counts, key=lambda ident: (-counts[ident], ident))
    return tuple(ordered[:top_k])


@dataclass(frozen=True)
class TabularEncoder:
    status_map: dict[str, str]
    type_map: dict[str, str]
    identity_vocabs: dict[str, tuple[str, ...]]
    include_reporter: bool
    include_resolved: bool
    gap_features: bool
    identity_top_k: int
    redundancy: dict[str, float]
    unmapped_status: dict[str, int]
    unmapped_type: dict[str, int]
    feature_names: tuple[str, ...] = field(init=False, compare=False)

    def __post_init__(self) -> None:
        names = ["author_time_day", "commit_time_day", "created_day", "updated_day"]
        if self.include_resolved:
            names += ["resolved_day", "resolved_present"]
        if self.gap_features:
            issue_dates = ["created", "updated"]
            if self.include_resolved:
                issue_dates.append("resolved")
            for commit_date in ("author_time", "commit_time"):
                for issue_date in issue_dates:
                    names.append(f"gap_{commit_date}_{issue_date}")
        names += [f"status={cls}" for cls in STATUS_CLASSES]
        names += [f"type={cls}" for cls in TYPE_CLASSES]
        for column in self._identity_columns():
            for ident in self.identity_vocabs[column]:
                names.append(f"{column}={ident}")
            names.append(f"{column}={OTHER}")
        object.__setattr__(self, "feature_names", tuple(names))

    def _identity_columns(self) -> tuple[str, ...]:
        columns = ["creator", "author", "committer"]
        if self.include_reporter:
            columns.append("reporter")
        return tuple(columns)

    @property
    def width(self) -> int:
        return len(self.feature_names)


def fit_encoder(
    candidates: list[LinkCandidate],
    corpus: Corpus,
    *,
    category_map_path: str | Path | None = None,
    identity_top_k: int = DEFAULT_IDENTITY_TOP_K,
    gap_features: bool = True,
    missing_threshold: float = DEFAULT_MISSING_THRESHOLD,
) -> TabularEncoder:
    """Learn the tabular layout from training candidates.

    The resolved date column (and its gaps) is dropped when more than
    missing_threshold of the fit rows lack it; the reporter column is
    dropped when it nearly always equals creator across the fit issues.
    Only records referenced by the given candidates are consulted.
    """
    if not candidates:
        raise ValueError("cannot fit an encoder on zero candidates")
    status_map, type_map = load_category_maps(category_map_path)

    missing = 0
    fit_issues: dict[str, object] = {}
    creator_counts: Counter = Counter()
    reporter_counts: Counter = Counter()
    author_counts: Counter = Counter()
    committer_counts: Counter = Counter()
    unmapped_status: Counter = Counter()
    unmapped_type: Counter = Counter()
    for cand in candidates:
        issue = corpus.issue(cand.issue_id)
        commit = corpus.commit(cand.commit_hash)
        fit_issues.setdefault(issue.issue_id, issue)
        if issue.resolved_date is None:
            missing += 1
        creator_counts[issue.creator] += 1
        reporter_counts[issue.reporter] += 1
        author_counts[commit.author] += 1
        committer_counts[commit.committer] += 1
        if issue.raw_status.casefold() not in status_map:
            unmapped_status[issue.raw_status] += 1
        if issue.raw_type.casefold() not in type_map:
            unmapped_type[issue.raw_type] += 1

    redundancy = _identity_redundancy(fit_issues.values())
    include_reporter = redundancy["reporter_creator_equality"] < REDUNDANCY_CUTOFF
    include_resolved = (missing / len(candidates)) <= missing_threshold
    identity_vocabs = {
        "creator": _top_identities(creator_counts, identity_top_k),
        "author": _top_identities(author_counts, identity_top_k),
        "committer": _top_identities(committer_counts, identity_top_k),
    }
    if include_reporter:
        identity_vocabs["reporter"] = _top_identities(reporter_counts, identity_top_k)
    return TabularEncoder(
        status_map=status_map,
        type_map=type_map,
        identity_vocabs=identity_vocabs,
        include_reporter=include_reporter,
        include_resolved=include_resolved,
        gap_features=gap_features,
        identity_top_k=identity_top_k,
        redundancy=redundancy,
        unmapped_status=dict(unmapped_status),
        unmapped_type=dict(unmapped_type),
    )


def _epoch_day(epoch_seconds: int) -> float:
    return epoch_seconds / float(SECONDS_PER_DAY)


def reduce_status(encoder: TabularEncoder, issue: Issue) -> str:
    return encoder.status_map.get(issue.raw_status.casefold(), DEFAULT_STATUS)


def reduce_type(encoder: TabularEncoder, issue: Issue) -> str:
    return encoder.type_map.get(issue.raw_type.casefold(), DEFAULT_TYPE)


def featurize_pairs_tabular(pairs, encoder: TabularEncoder) -> np.ndarray:
    """Encode (issue, commit) pairs as a dense (n, width) float matrix."""
    pairs = list(pairs)
    out = np.zeros((len(pairs), encoder.width), dtype=np.float64)
    identity_columns = encoder._identity_columns()
    # Column offsets are fixed by the layout built in __post_init__.
    cursor = 4
    if encoder.include_resolved:
        resolved_at = cursor
        cursor += 2
    gaps_at = cursor
    if encoder.gap_features:
        cursor += 4 + (2 if encoder.include_resolved else 0)
    status_at = cursor
    type_at = status_at + len(STATUS_CLASSES)
    identity_at: dict[str, int] = {}
    offset = type_at + len(TYPE_CLASSES)
    for column in identity_columns:
        identity_at[column] = offset
        offset += len(encoder.identity_vocabs[column]) + 1

    identity_index = {
        column: {ident: i for i, ident in enumerate(encoder.identity_vocabs[column])}
        for column in identity_columns
    }

    for row, (issue, commit) in enumerate(pairs):
        author_day = _epoch_day(commit.author_time_date)
        commit_day = _epoch_day(commit.commit_time_date)
        created_day = _epoch_day(issue.created_date)
        updated_day = _epoch_day(issue.updated_date)
        out[row, 0] = author_day
        out[row, 1] = commit_day
        out[row, 2] = created_day
        out[row, 3] = updated_day
        resolved_day = 0.0
        has_resolved = issue.resolved_date is not None
        if has_resolved:
            resolved_day = _epoch_day(issue.resolved_date)
        if encoder.include_resolved:
            out[row, resolved_at] = resolved_day
            out[row, resolved_at + 1] = 1.0 if has_resolved else 0.0
        if encoder.gap_features:
            issue_days = [created_day, updated_day]
            if encoder.include_resolved:
                # Gap stays 0 when resolved is absent; the presence flag is
                # there for the model to tell the two cases apart.
                issue_days.append(resolved_day if has_resolved else None)
            col = gaps_at
            for commit_day_value in (author_day, commit_day):
                for issue_day_value in issue_days:
                    if issue_day_value is not None:
                        out[row, col] = abs(commit_day_value - issue_day_value)
                    col += 1
        status = reduce_status(encoder, issue)
        out[row, status_at + STATUS_CLASSES.index(status)] = 1.0
        type_class = reduce_type(encoder, issue)
        out[row, type_at + TYPE_CLASSES.index(type_class)] = 1.0
        values = {
            "creator": issue.creator,
            "author": commit.author,
            "committer": commit.committer,
            "reporter": issue.reporter,
        }
        for column in identity_columns:
            index = identity_index[column].get(values[column])
            if index is None:
                index = len(encoder.identity_vocabs[column])
            out[row, identity_at[column] + index] = 1.0
    return out


def featurize_tabular_many(
    candidates: list[LinkCandidate],
    corpus: Corpus,
    encoder: TabularEncoder,
) -> np.ndarray:
    """Encode candidates as a dense (n, width) float matrix."""
    pairs = [
        (corpus.issue(c.issue_id), corpus.commit(c.commit_hash)) for c in candidates
    ]
    return featurize_pairs_tabular(pairs, encoder)


def featurize_tabular(
    candidate: LinkCandidate, corpus: Corpus, encoder: TabularEncoder
) -> np.ndarray:
    """Encode a single candidate as a width-long vector."""
    return featurize_tabular_many([candidate], corpus, encoder)[0]
