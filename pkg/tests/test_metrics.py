from __future__ import annotations

import random
from collections import defaultdict
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankfraud.attribute import AttributionResult
from rankfraud.corpus import Corpus, Review, snapshot_series
from rankfraud.mcdense import FraudComponent, Partition
from rankfraud.metrics import (
    CoverageParams,
    GroundTruth,
    coverage,
    duplicate_count,
    eval_attribution,
    find_duplicates,
    find_reposts,
    load_ground_truth,
    normalize_text,
    p_coverage,
    save_ground_truth,
)


def partition(product, *components, honest=()):
    comps = tuple(FraudComponent(frozenset(c), Fraction(1), Fraction(1), product) for c in components)
    return Partition(product, comps, frozenset(honest))


def gt_of(product_workers, honest=None):
    workers = {p: {w: frozenset(a) for w, a in ws.items()} for p, ws in product_workers.items()}
    pools = defaultdict(set)
    for ws in workers.values():
        for w, a in ws.items():
            pools[w] |= a
    honest = {p: frozenset((honest or {}).get(p, ())) for p in workers}
    return GroundTruth(workers, honest, {w: frozenset(a) for w, a in pools.items()})


def test_coverage_examples():
    w = {"a", "b", "c", "d"}
    assert coverage(w, partition("P", {"a", "b", "c", "x"})) == Fraction(3, 4)
    assert coverage(w, partition("P", {"x"}, honest=w)) == 0
    assert coverage(w, partition("P", w | {"y"})) == 1
    assert coverage(w, partition("P", {"a", "b"}, {"c", "d"})) == 1
    with pytest.raises(ValueError):
        coverage(set(), partition("P"))


def test_p_coverage_examples():
    w1 = {f"a{i}" for i in range(20)}
    w2 = {f"b{i}" for i in range(20)}
    gt = gt_of({"P": {"W1": w1, "W2": w2}})
    ninety_five = w1 | set(sorted(w2)[:19])
    assert p_coverage(gt, partition("P", ninety_five), CoverageParams(0.9, 0.9))
    half = w1 | set(sorted(w2)[:10])
    assert not p_coverage(gt, partition("P", half), CoverageParams(0.9, 0.9))
    assert p_coverage(gt, partition("P"), CoverageParams(0, 0.9))
    with pytest.raises(ValueError):
        p_coverage(gt_of({"Q": {}}), partition("Q"))
    with pytest.raises(ValueError):
        CoverageParams(1.2, 0.5)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_coverage_monotone_and_p_coverage_antitone(data):
    accounts = [f"u{i}" for i in range(12)]
    w1 = set(data.draw(st.lists(st.sampled_from(accounts[:6]), min_size=1, unique=True)))
    w2 = set(data.draw(st.lists(st.sampled_from(accounts[6:]), min_size=1, unique=True)))
    covered = set(data.draw(st.lists(st.sampled_from(accounts), unique=True)))
    extra = set(data.draw(st.lists(st.sampled_from(accounts), unique=True)))
    small, big = partition("P", covered), partition("P", covered | extra)
    assert 0 <= coverage(w1, small) <= coverage(w1, big) <= 1
    gt = gt_of({"P": {"W1": w1, "W2": w2}})
    grid = [Fraction(i, 4) for i in range(5)]
    for p1 in grid:
        for p2 in grid:
            if p_coverage(gt, small, CoverageParams(p1, p2)):
                assert all(p_coverage(gt, small, CoverageParams(q1, q2)) for q1 in grid[: grid.index(p1) + 1] for q2 in grid[: grid.index(p2) + 1])


def result(cid, product, accounts, ranked, attributed):
    return AttributionResult(cid, product, tuple(accounts), tuple(ranked), attributed, attributed is None)


def test_eval_all_correct():
    gt = gt_of({"P": {"W1": {"a1", "a2"}}, "Q": {"W2": {"b1", "b2"}}})
    results = [
        result("P#0", "P", ["a1", "a2"], [("W1", 0.9), ("W2", 0.1)], "W1"),
        result("Q#0", "Q", ["b1", "b2"], [("W2", 0.8), ("W1", 0.2)], "W2"),
    ]
    rep = eval_attribution(results, gt)
    assert rep.topk_accuracy == {1: 1.0, 3: 1.0, 5: 1.0}
    assert all(v["precision"] == v["recall"] == 1.0 for v in rep.per_worker.values())
    assert all(a["recall"] == a["precision"] == 1.0 for a in rep.apps)
    assert rep.app_counts["recall_at_least_90pct"] == rep.app_counts["fraud_apps"] == 2


def test_eval_partial_app_recall():
    gt = gt_of({"P": {"W1": {"a1"}, "W2": {"b1"}}})
    rep = eval_attribution([result("P#0", "P", ["a1"], [("W1", 1.0)], "W1")], gt)
    (app,) = rep.apps
    assert app["recall"] == 0.5 and app["precision"] == 1.0
    assert rep.app_counts["recall_at_least_50pct"] == 1
    assert rep.app_counts["recall_at_least_70pct"] == 0


def test_eval_honest_components_and_abstentions():
    gt = gt_of({"P": {"W1": {"a1", "a2"}}, "H": {}}, honest={"H": {"h1", "h2", "h3"}, "P": {"h9"}})
    results = [
        result("P#0", "P", ["a1", "a2", "h9"], [("W2", 0.6), ("W1", 0.4)], None),
        result("H#0", "H", ["h1", "h2", "h3"], [("W1", 0.7)], "W1"),
    ]
    rep = eval_attribution(results, gt)
    assert rep.n_instances == 1 and rep.topk_accuracy[1] == 0.0 and rep.topk_accuracy[3] == 1.0
    assert rep.honest_components_attributed == 1
    assert rep.app_counts["honest_apps_flagged"] == 1
    assert rep.app_counts["recall_at_least_1_worker"] == 0


def recount(results, gt):
    """Independent tally straight from result records."""
    per_app_pred = {}
    for r in results:
        if r.attributed:
            per_app_pred.setdefault(r.product_id, set()).add(r.attributed)
    top1 = total = 0
    tp, pred, act = defaultdict(int), defaultdict(int), defaultdict(int)
    for r in results:
        votes = defaultdict(int)
        for a in r.accounts:
            for w, accts in gt.workers.get(r.product_id, {}).items():
                votes[w] += a in accts
        honest = sum(a in gt.honest.get(r.product_id, ()) for a in r.accounts)
        best = max(votes.values(), default=0)
        leaders = sorted(w for w, v in votes.items() if v == best)
        truth = leaders[0] if best > honest and best > 0 else None
        if r.attributed:
            pred[r.attributed] += 1
        if truth is None:
            continue
        total += 1
        act[truth] += 1
        ranked = [w for w, _ in r.ranked if not w.startswith("__")]
        top1 += bool(ranked) and ranked[0] == truth
        tp[truth] += r.attributed == truth
    at_least_one = sum(
        1 for p, ws in gt.workers.items() if ws and set(ws) & per_app_pred.get(p, set())
    )
    return top1 / total, {w: (tp[w] / pred[w] if pred[w] else None, tp[w] / act[w] if act[w] else None) for w in act}, at_least_one


def test_eval_matches_recount_on_benchmark_run():
    from rankfraud.attribute import AttributionConfig
    from rankfraud.benchmark import cross_deanonymize
    from rankfraud.mcdense import DensityConfig
    from rankfraud.synth import ScenarioConfig, generate

    sc = generate(ScenarioConfig(n_workers=3, accounts_per_worker=(25, 30), n_products=15, seed=5))
    results = cross_deanonymize(sc.corpus, DensityConfig(), AttributionConfig(), 3, 5)
    rep = eval_attribution(results, sc.ground_truth)
    top1, per_worker, at_least_one = recount(results, sc.ground_truth)
    assert rep.topk_accuracy[1] == pytest.approx(top1)
    for w, (prec, rec) in per_worker.items():
        assert rep.per_worker[w]["precision"] == prec and rep.per_worker[w]["recall"] == rec
    assert rep.app_counts["recall_at_least_1_worker"] == at_least_one


def test_ground_truth_roundtrip_and_owner(tmp_path):
    gt = gt_of({"P": {"W1": {"a1", "a2"}, "W2": {"b1"}}, "H": {}}, honest={"P": {"h1", "h2"}, "H": {"h3"}})
    save_ground_truth(gt, tmp_path / "gt.jsonl")
    assert load_ground_truth(tmp_path / "gt.jsonl") == gt
    assert gt.owner("P", ["a1", "a2", "b1"]) == "W1"
    assert gt.owner("P", ["a1", "h1", "h2"]) is None
    assert gt.fraud_products() == ["P"] and gt.honest_products() == ["H"]
    with pytest.raises(ValueError):
        gt_of({"P": {"W1": {"a1"}, "W2": {"a1"}}})


def rv(i, account, product, text, ts=None, snap=None, **extra):
    return Review(f"r{i:05d}", account, product, text, 5, 1000 + i if ts is None else ts, snap, extra)


def test_normalize_text():
    assert normalize_text("  Great\tApp!\n\nLOVE it ") == "great app! love it"


def test_find_duplicates_examples():
    c = Corpus([rv(0, "a", "P", "Nice app"), rv(1, "b", "P", "nice  APP ")])
    assert find_duplicates(c, "P") == [("r00000", "r00001")]
    c = Corpus([rv(0, "a", "P", "Nice app"), rv(1, "a", "P", "Nice app")])
    assert find_duplicates(c, "P") == []
    c = Corpus([rv(0, "a", "P", "x"), rv(1, "a", "P", "x"), rv(2, "b", "P", "x")])
    assert find_duplicates(c, "P") == [("r00000", "r00002")]


def test_find_duplicates_scaled_fixture():
    # 425 reviews, 127 of which copy an earlier review from another account (1/10 of 4,251 and 1,274).
    rng = random.Random(3)
    sizes = [rng.randint(2, 5) for _ in range(200)]
    groups, total = [], 0
    for s in sizes:
        if total + s - 1 > 127:
            s = 127 - total + 1
        if s < 2:
            break
        groups.append(s)
        total += s - 1
    assert total == 127
    reviews, account = [], 0
    for g, size in enumerate(groups):
        for _ in range(size):
            reviews.append(rv(len(reviews), f"u{account}", "P", f"copied text {g}"))
            account += 1
    # Same-account repeats must not count.
    reviews.append(rv(len(reviews), "u0", "P", "copied text 0"))
    while len(reviews) < 425:
        reviews.append(rv(len(reviews), f"u{account}", "P", f"original {len(reviews)}"))
        account += 1
    c = Corpus(reviews)
    found = find_duplicates(c, "P")
    assert len(c.reviews_of("P")) == 425
    assert len(found) == len(groups)
    assert duplicate_count(found) == 127
    assert Fraction(duplicate_count(found), 425) == Fraction(127, 425)
    flat = [r for g in found for r in g]
    assert len(flat) == len(set(flat))


def snapshot_corpus(presence, text="Best app ever"):
    """Account ``a`` on P present in the snapshots flagged by ``presence``; ``z`` is always there."""
    reviews = []
    for s, here in enumerate(presence):
        sid = f"s{s:03d}"
        t = 10_000 + 100 * s
        reviews.append(rv(len(reviews), "z", "P", "steady", ts=5, snap=sid, snapshot_time=t))
        if here:
            # A re-post is a new review with the same text.
            reviews.append(rv(len(reviews), "a", "P", text, ts=t - 1, snap=sid, snapshot_time=t))
    return Corpus(reviews)


def test_find_reposts_examples():
    c = snapshot_corpus([1, 0, 1])
    assert find_reposts(snapshot_series(c, "P"), c) == [("a", "P", 1)]
    c = snapshot_corpus([1, 1, 1])
    assert find_reposts(snapshot_series(c, "P"), c) == []
    c = snapshot_corpus([1])
    with pytest.raises(ValueError):
        find_reposts(snapshot_series(c, "P"), c)


def test_find_reposts_37_cycles():
    presence = [1, 0] * 37 + [1]
    c = snapshot_corpus(presence)
    assert find_reposts(snapshot_series(c, "P"), c) == [("a", "P", 37)]


def test_find_reposts_ignores_changed_text_and_counts_per_account():
    reviews = []
    for s, (a_text, b_here) in enumerate([("v1", 1), (None, 0), ("v2", 1), (None, 1), ("V2 ", 1)]):
        t = 1000 * (s + 1)
        sid = f"s{s}"
        reviews.append(rv(len(reviews), "z", "P", "steady", ts=1, snap=sid, snapshot_time=t))
        if a_text:
            reviews.append(rv(len(reviews), "a", "P", a_text, ts=t - 1, snap=sid, snapshot_time=t))
        if b_here:
            reviews.append(rv(len(reviews), "b", "P", "same", ts=t - 1, snap=sid, snapshot_time=t))
    c = Corpus(reviews)
    assert find_reposts(snapshot_series(c, "P"), c) == [("a", "P", 1), ("b", "P", 1)]
