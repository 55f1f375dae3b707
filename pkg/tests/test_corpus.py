from __future__ import annotations

import json
import logging

import pytest

from rankfraud.corpus import (
    AttributionConflictError,
    Corpus,
    CorpusError,
    DuplicateReviewError,
    Review,
    SnapshotError,
    load_attributions,
    load_corpus,
    save_corpus,
    snapshot_series,
)


def rec(i, account="a1", product="P", **kw):
    base = {
        "review_id": f"r{i}",
        "account_id": account,
        "product_id": product,
        "text": f"text {i}",
        "rating": 5,
        "timestamp": 1_600_000_000 + i,
        "snapshot_id": None,
    }
    base.update(kw)
    return base


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def test_load_three_records(tmp_path):
    path = write_jsonl(tmp_path / "r.jsonl", [rec(1), rec(2, "a2"), rec(3, "a3", "Q")])
    corpus = load_corpus(path)
    assert len(corpus) == 3
    assert corpus.accounts == {"a1", "a2", "a3"} and corpus.products == {"P", "Q"}
    assert corpus.reviewers_of("P") == ("a1", "a2")


def test_empty_file(tmp_path):
    (tmp_path / "e.jsonl").write_text("")
    assert len(load_corpus(tmp_path / "e.jsonl")) == 0


def test_bad_rating_names_line(tmp_path):
    path = write_jsonl(tmp_path / "r.jsonl", [rec(1), rec(2, rating=7)])
    with pytest.raises(CorpusError, match="line 2"):
        load_corpus(path)


def test_invalid_json_names_line(tmp_path):
    (tmp_path / "r.jsonl").write_text(json.dumps(rec(1)) + "\n{oops\n")
    with pytest.raises(CorpusError) as exc:
        load_corpus(tmp_path / "r.jsonl")
    assert exc.value.line == 2


def test_duplicate_review_id(tmp_path):
    path = write_jsonl(tmp_path / "r.jsonl", [rec(1), rec(1, "a2")])
    with pytest.raises(DuplicateReviewError, match="line 2"):
        load_corpus(path)


def test_same_review_in_two_snapshots_is_allowed(tmp_path):
    path = write_jsonl(tmp_path / "r.jsonl", [rec(1, snapshot_id="s1"), rec(1, snapshot_id="s2")])
    assert len(load_corpus(path)) == 2


def test_unknown_fields_warn_and_round_trip(tmp_path, caplog):
    path = write_jsonl(tmp_path / "r.jsonl", [rec(1, lang="en", helpful=3), rec(2)])
    with caplog.at_level(logging.WARNING):
        corpus = load_corpus(path)
    assert "helpful" in caplog.text
    assert corpus.reviews[0].extra == {"lang": "en", "helpful": 3}
    save_corpus(corpus, tmp_path / "out.jsonl")
    again = load_corpus(tmp_path / "out.jsonl")
    assert again == corpus
    assert [r.to_record() for r in again.reviews] == [r.to_record() for r in corpus.reviews]


def test_index_consistency():
    reviews = [Review(f"r{i}", f"a{i % 3}", f"p{i % 4}", "x", 3, i) for i in range(20)]
    corpus = Corpus(reviews)
    for a in corpus.accounts:
        assert all(r.account_id == a for r in corpus.reviews_by_account(a))
    for p in corpus.products:
        assert all(r.product_id == p for r in corpus.reviews_of(p))


def test_attributions(tmp_path, caplog):
    corpus = load_corpus(write_jsonl(tmp_path / "r.jsonl", [rec(1, "a1"), rec(2, "a2")]))
    attr = write_jsonl(
        tmp_path / "a.jsonl",
        [{"account_id": "a1", "worker_id": "W1"}, {"account_id": "a2", "worker_id": "W1"}],
    )
    labeled = load_attributions(attr, corpus)
    assert dict(labeled.attributions) == {"a1": "W1", "a2": "W1"}
    assert labeled.workers() == {"W1": {"a1", "a2"}}

    attr = write_jsonl(tmp_path / "b.jsonl", [{"account_id": "a9", "worker_id": "W1"}])
    with caplog.at_level(logging.WARNING):
        labeled = load_attributions(attr, corpus)
    assert labeled.skipped_attributions == 1 and not labeled.attributions

    attr = write_jsonl(
        tmp_path / "c.jsonl",
        [{"account_id": "a1", "worker_id": "W1"}, {"account_id": "a1", "worker_id": "W2"}],
    )
    with pytest.raises(AttributionConflictError):
        load_attributions(attr, corpus)


def test_attributions_must_reference_known_accounts():
    with pytest.raises(CorpusError):
        Corpus([Review("r1", "a1", "P", "", 1, 0)], {"zz": "W1"})


def snapshot_corpus(layout):
    """``layout`` maps snapshot id -> list of review ids visible for product P."""
    reviews = []
    for k, (snap, ids) in enumerate(layout.items()):
        for rid in ids:
            reviews.append(Review(rid, "a1", "P", rid, 5, 100 * (k + 1), snap))
    return Corpus(reviews)


def test_snapshot_series_disappear_and_return():
    series = snapshot_series(snapshot_corpus({"s1": ["r1", "r0"], "s2": ["r0"], "s3": ["r1", "r0"]}), "P")
    assert [s.snapshot_id for s in series] == ["s1", "s2", "s3"]
    assert [set(s.review_ids) for s in series] == [{"r0", "r1"}, {"r0"}, {"r0", "r1"}]


def test_snapshot_series_lengths():
    assert len(snapshot_series(snapshot_corpus({"s1": ["r1"], "s2": ["r2"]}), "P")) == 2
    assert len(snapshot_series(snapshot_corpus({"s1": ["r1"]}), "P")) == 1


def test_snapshot_series_orders_by_crawl_time_not_name():
    reviews = [
        Review("r1", "a", "P", "x", 5, 10, "late", {"snapshot_time": 500}),
        Review("r1", "a", "P", "x", 5, 10, "early", {"snapshot_time": 100}),
    ]
    assert [s.snapshot_id for s in snapshot_series(Corpus(reviews), "P")] == ["early", "late"]


def test_snapshot_series_errors():
    plain = Corpus([Review("r1", "a", "P", "x", 5, 10)])
    with pytest.raises(SnapshotError, match="single-snapshot"):
        snapshot_series(plain, "P")
    tied = Corpus([Review("r1", "a", "P", "x", 5, 10, "s1"), Review("r2", "a", "P", "x", 5, 10, "s2")])
    with pytest.raises(SnapshotError):
        snapshot_series(tied, "P")
