from __future__ import annotations

import json

import pytest

from hybrid_linker.corpus import (
    CorpusFormatError,
    CorpusValidationError,
    SignalParams,
    format_timestamp,
    load_corpus_dir,
    parse_timestamp,
    save_corpus_dir,
    synthesize_corpus,
    validate_corpus,
)
from tests.conftest import DAY, T0, make_commit, make_corpus, make_issue


def test_parse_timestamp_accepts_offset_and_z():
    assert parse_timestamp("2019-01-01T00:00:00+00:00") == T0
    assert parse_timestamp("2019-01-01T00:00:00Z") == T0
    assert parse_timestamp("2019-01-01T01:00:00+01:00") == T0


def test_parse_timestamp_rejects_naive_and_garbage():
    with pytest.raises(ValueError):
        parse_timestamp("2019-01-01T00:00:00")
    with pytest.raises(ValueError):
        parse_timestamp("not a time")
    with pytest.raises(ValueError):
        parse_timestamp("")


def test_timestamp_round_trip():
    for epoch in (T0, T0 + 12345, T0 + 400 * DAY):
        assert parse_timestamp(format_timestamp(epoch)) == epoch


def test_validate_rejects_duplicate_issue_ids():
    corpus = make_corpus(
        [make_issue(issue_id="I-1"), make_issue(issue_id="I-1")],
        [make_commit()],
    )
    with pytest.raises(CorpusValidationError, match="I-1"):
        validate_corpus(corpus)


def test_validate_rejects_duplicate_commit_hashes():
    corpus = make_corpus(
        [make_issue(issue_id="I-1"), make_issue(issue_id="I-2")],
        [make_commit(tag="same"), make_commit(tag="same")],
    )
    with pytest.raises(CorpusValidationError):
        validate_corpus(corpus)


def test_validate_rejects_dangling_link():
    corpus = make_corpus(
        [make_issue(issue_id="I-1"), make_issue(issue_id="I-2")],
        [make_commit(linked=("I-404",))],
    )
    with pytest.raises(CorpusValidationError, match="I-404"):
        validate_corpus(corpus)


def test_validate_rejects_updated_before_created():
    corpus = make_corpus(
        [
            make_issue(issue_id="I-1", created=T0, updated=T0 - 1),
            make_issue(issue_id="I-2"),
        ],
        [make_commit()],
    )
    with pytest.raises(CorpusValidationError):
        validate_corpus(corpus)


def test_validate_rejects_resolved_before_created():
    corpus = make_corpus(
        [
            make_issue(issue_id="I-1", created=T0, resolved=T0 - DAY),
            make_issue(issue_id="I-2"),
        ],
        [make_commit()],
    )
    with pytest.raises(CorpusValidationError):
        validate_corpus(corpus)


def test_validate_rejects_foreign_project_records():
    corpus = make_corpus(
        [make_issue(issue_id="I-1"), make_issue(issue_id="I-2", project="other")],
        [make_commit()],
    )
    with pytest.raises(CorpusValidationError):
        validate_corpus(corpus)


def test_save_load_round_trip(tmp_path):
    corpus = synthesize_corpus(seed=3, n_issues=12, n_commits=10)
    save_corpus_dir(corpus, tmp_path / "corpus")
    again = load_corpus_dir(tmp_path / "corpus")
    assert again.project == corpus.project
    assert again.issues == corpus.issues
    assert again.commits == corpus.commits


def test_load_reports_file_and_line_for_bad_json(tmp_path):
    corpus = synthesize_corpus(seed=3, n_issues=12, n_commits=10)
    save_corpus_dir(corpus, tmp_path / "corpus")
    issues_path = tmp_path / "corpus" / "issues.jsonl"
    lines = issues_path.read_text(encoding="utf-8").splitlines()
    lines[1] = "{broken"
    issues_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(CorpusFormatError, match="issues.jsonl:2"):
        load_corpus_dir(tmp_path / "corpus")


def test_load_reports_missing_field(tmp_path):
    corpus = synthesize_corpus(seed=3, n_issues=12, n_commits=10)
    save_corpus_dir(corpus, tmp_path / "corpus")
    issues_path = tmp_path / "corpus" / "issues.jsonl"
    lines = issues_path.read_text(encoding="utf-8").splitlines()
    record = json.loads(lines[0])
    del record["summary"]
    lines[0] = json.dumps(record)
    issues_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(CorpusFormatError, match="summary"):
        load_corpus_dir(tmp_path / "corpus")


def test_signal_params_validation():
    with pytest.raises(ValueError):
        SignalParams(lexical_overlap=1.5)
    with pytest.raises(ValueError):
        SignalParams(temporal_proximity=-0.1)
    with pytest.raises(ValueError):
        SignalParams(true_link_density=0.0)


def test_synthesize_is_deterministic():
    a = synthesize_corpus(seed=11, n_issues=30, n_commits=30)
    b = synthesize_corpus(seed=11, n_issues=30, n_commits=30)
    c = synthesize_corpus(seed=12, n_issues=30, n_commits=30)
    assert a.issues == b.issues
    assert a.commits == b.commits
    assert a.issues != c.issues


def test_synthesize_counts_and_validity():
    corpus = synthesize_corpus(
        seed=5, n_issues=40, n_commits=25, signal=SignalParams(0.8, 0.8, 0.6)
    )
    validate_corpus(corpus)
    assert len(corpus.issues) == 40
    assert len(corpus.commits) == 25
    assert len(corpus.linked_commits()) == round(0.6 * 25)
    assert {c.project for c in corpus.commits} == {corpus.project}


def test_synthesize_minimum_sizes():
    with pytest.raises(ValueError):
        synthesize_corpus(seed=1, n_issues=1, n_commits=5)
    with pytest.raises(ValueError):
        synthesize_corpus(seed=1, n_issues=5, n_commits=0)


def _mean_shared_tokens(corpus) -> float:
    shared = []
    for commit in corpus.linked_commits():
        issue = corpus.issue(commit.linked_issue_ids[0])
        overlap = set(issue.summary.split()) & set(commit.message.split())
        shared.append(len(overlap))
    return sum(shared) / len(shared)


def test_lexical_knob_controls_planted_overlap():
    strong = synthesize_corpus(
        seed=9, n_issues=60, n_commits=60, signal=SignalParams(1.0, 0.9, 1.0)
    )
    none = synthesize_corpus(
        seed=9, n_issues=60, n_commits=60, signal=SignalParams(0.0, 0.9, 1.0)
    )
    assert _mean_shared_tokens(strong) >= 3.0
    assert _mean_shared_tokens(none) < 1.0


def test_temporal_knob_controls_commit_gap():
    tight = synthesize_corpus(
        seed=9, n_issues=60, n_commits=60, signal=SignalParams(0.9, 1.0, 1.0)
    )
    loose = synthesize_corpus(
        seed=9, n_issues=60, n_commits=60, signal=SignalParams(0.9, 0.0, 1.0)
    )

    def mean_gap(corpus):
        gaps = []
        for commit in corpus.linked_commits():
            issue = corpus.issue(commit.linked_issue_ids[0])
            gaps.append(abs(commit.author_time_date - issue.created_date))
        return sum(gaps) / len(gaps)

    assert mean_gap(tight) < mean_gap(loose)
    assert mean_gap(tight) <= 0.5 * DAY


def test_some_issues_lack_resolved_date():
    corpus = synthesize_corpus(seed=21, n_issues=80, n_commits=40)
    missing = [it for it in corpus.issues if it.resolved_date is None]
    present = [it for it in corpus.issues if it.resolved_date is not None]
    assert missing and present
