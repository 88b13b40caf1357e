from __future__ import annotations

import numpy as np
import pytest

from hybrid_linker.linkgen import LinkCandidate, generate_candidates
from hybrid_linker.corpus import synthesize_corpus
from hybrid_linker.tabular import (
    CategoryMapError,
    featurize_tabular_many,
    fit_encoder,
    load_category_maps,
    reduce_status,
    reduce_type,
    redundancy_report,
)
from tests.conftest import DAY, T0, make_commit, make_corpus, make_issue


def _paired_corpus(n_pairs=12, resolved=True, reporter_same=True):
    issues = []
    commits = []
    for i in range(n_pairs):
        created = T0 + i * DAY
        issues.append(
            make_issue(
                issue_id=f"I-{i}",
                created=created,
                updated=created + DAY,
                resolved=created + 2 * DAY if resolved else None,
                creator=f"dev-{i % 3}",
                reporter=f"dev-{i % 3}" if reporter_same else f"rep-{i % 5}",
            )
        )
        commits.append(
            make_commit(
                tag=f"c{i}",
                author_time=created + DAY,
                author=f"dev-{i % 3}",
                committer=f"dev-{i % 4}",
                linked=(f"I-{i}",),
            )
        )
    return make_corpus(issues, commits)


def _candidates(corpus):
    return generate_candidates(corpus, window_days=None)


def test_category_maps_load_and_casefold():
    status_map, type_map = load_category_maps()
    assert status_map["open"] == "open"
    assert status_map["won't fix"] == "closed"
    assert type_map["bug"] == "bug"
    assert type_map["improvement"] == "new_feature"
    assert all(key == key.casefold() for key in status_map)
    assert all(key == key.casefold() for key in type_map)


def test_category_map_rejects_unknown_class(tmp_path):
    path = tmp_path / "map.tsv"
    path.write_text("Weird\tnot_a_class\n", encoding="utf-8")
    with pytest.raises(CategoryMapError):
        load_category_maps(path)


def test_reduce_falls_back_on_unseen_labels():
    corpus = _paired_corpus()
    encoder = fit_encoder(_candidates(corpus), corpus)
    odd = make_issue(raw_status="Mystery State", raw_type="Mystery Kind")
    assert reduce_status(encoder, odd) == "open"
    assert reduce_type(encoder, odd) == "task"
    usual = make_issue(raw_status="RESOLVED", raw_type="new feature")
    assert reduce_status(encoder, usual) == "resolved"
    assert reduce_type(encoder, usual) == "new_feature"


def test_epoch_day_and_gap_columns():
    corpus = _paired_corpus(n_pairs=12)
    cands = _candidates(corpus)
    encoder = fit_encoder(cands, corpus)
    names = list(encoder.feature_names)
    X = featurize_tabular_many(cands, corpus, encoder)
    assert X.shape == (len(cands), encoder.width)
    row = X[0]
    cand = cands[0]
    issue = corpus.issue(cand.issue_id)
    commit = corpus.commit(cand.commit_hash)
    assert row[names.index("created_day")] == issue.created_date / DAY
    assert row[names.index("author_time_day")] == commit.author_time_date / DAY
    want_gap = abs(commit.author_time_date - issue.created_date) / DAY
    assert row[names.index("gap_author_time_created")] == want_gap
    want_gap = abs(commit.commit_time_date - issue.resolved_date) / DAY
    assert row[names.index("gap_commit_time_resolved")] == want_gap
    assert row[names.index("resolved_present")] == 1.0


def test_resolved_dropped_when_mostly_missing():
    corpus = _paired_corpus(resolved=False)
    encoder = fit_encoder(_candidates(corpus), corpus)
    assert not encoder.include_resolved
    assert "resolved_day" not in encoder.feature_names
    assert "resolved_present" not in encoder.feature_names
    assert not any(n.endswith("_resolved") for n in encoder.feature_names)
    # 4 date days + 4 gaps + 3 status + 3 type + identity one-hots.
    X = featurize_tabular_many(_candidates(corpus), corpus, encoder)
    assert X.shape[1] == encoder.width


def test_resolved_kept_when_sometimes_missing():
    issues = []
    commits = []
    for i in range(10):
        created = T0 + i * DAY
        issues.append(
            make_issue(
                issue_id=f"I-{i}",
                created=created,
                resolved=created + DAY if i < 8 else None,
            )
        )
        commits.append(
            make_commit(tag=f"c{i}", author_time=created, linked=(f"I-{i}",))
        )
    corpus = make_corpus(issues, commits)
    cands = _candidates(corpus)
    encoder = fit_encoder(cands, corpus)
    assert encoder.include_resolved
    names = list(encoder.feature_names)
    X = featurize_tabular_many(cands, corpus, encoder)
    flags = X[:, names.index("resolved_present")]
    missing_rows = [
        k for k, c in enumerate(cands) if corpus.issue(c.issue_id).resolved_date is None
    ]
    assert set(flags[missing_rows]) == {0.0}
    # Absent resolved dates contribute zeroed day and gap columns.
    assert all(X[k, names.index("resolved_day")] == 0.0 for k in missing_rows)
    assert all(
        X[k, names.index("gap_author_time_resolved")] == 0.0 for k in missing_rows
    )


def test_identity_one_hots_with_other_bucket():
    corpus = _paired_corpus()
    cands = _candidates(corpus)
    encoder = fit_encoder(cands, corpus, identity_top_k=2)
    names = list(encoder.feature_names)
    author_cols = [n for n in names if n.startswith("author=")]
    assert len(author_cols) == 3  # top 2 + OTHER
    assert author_cols[-1] == "author=OTHER"
    X = featurize_tabular_many(cands, corpus, encoder)
    block = X[:, [names.index(n) for n in author_cols]]
    assert np.all(block.sum(axis=1) == 1.0)
    # An identity outside the top-k lands in OTHER.
    kept = set(encoder.identity_vocabs["author"])
    rows_outside = [
        k
        for k, c in enumerate(cands)
        if corpus.commit(c.commit_hash).author not in kept
    ]
    assert rows_outside
    assert set(X[rows_outside, names.index("author=OTHER")]) == {1.0}


def test_identity_vocab_ranked_by_count_then_name():
    corpus = _paired_corpus()
    cands = _candidates(corpus)
    encoder = fit_encoder(cands, corpus)
    from collections import Counter

    counts = Counter(corpus.commit(c.commit_hash).author for c in cands)
    want = tuple(sorted(counts, key=lambda ident: (-counts[ident], ident)))
    assert encoder.identity_vocabs["author"] == want


def test_reporter_excluded_when_redundant():
    redundant = _paired_corpus(reporter_same=True)
    encoder = fit_encoder(_candidates(redundant), redundant)
    assert not encoder.include_reporter
    assert not any(n.startswith("reporter=") for n in encoder.feature_names)
    report = redundancy_report(redundant)
    assert report["reporter_creator_equality"] == 1.0

    distinct = _paired_corpus(reporter_same=False)
    encoder = fit_encoder(_candidates(distinct), distinct)
    assert encoder.include_reporter
    assert any(n.startswith("reporter=") for n in encoder.feature_names)


def test_gap_features_toggle():
    corpus = _paired_corpus()
    encoder = fit_encoder(_candidates(corpus), corpus, gap_features=False)
    assert not any(n.startswith("gap_") for n in encoder.feature_names)


def test_features_do_not_depend_on_labels():
    corpus = _paired_corpus()
    cands = _candidates(corpus)
    flipped = [
        LinkCandidate(c.issue_id, c.commit_hash, 1 - c.label, c.provenance)
        for c in cands
    ]
    encoder_a = fit_encoder(cands, corpus)
    encoder_b = fit_encoder(flipped, corpus)
    assert encoder_a.feature_names == encoder_b.feature_names
    X_a = featurize_tabular_many(cands, corpus, encoder_a)
    X_b = featurize_tabular_many(flipped, corpus, encoder_b)
    assert np.array_equal(X_a, X_b)


def test_encoder_fits_only_on_given_candidates():
    corpus = _paired_corpus()
    cands = _candidates(corpus)
    subset = [c for c in cands if c.issue_id != "I-0"]
    encoder = fit_encoder(subset, corpus, identity_top_k=50)
    synth = synthesize_corpus(seed=3, n_issues=12, n_commits=10)
    # Identities seen only via excluded candidates stay out of the vocab.
    excluded_creator = corpus.issue("I-0").creator
    kept_creators = {
        corpus.issue(c.issue_id).creator for c in subset
    }
    if excluded_creator not in kept_creators:
        assert excluded_creator not in encoder.identity_vocabs["creator"]
    assert synth.project != ""
