from __future__ import annotations

import random

import numpy as np
import pytest

from rankfraud.attribute import (
    BACKGROUND,
    BACKGROUND_STYLE,
    INSUFFICIENT_REVIEWS,
    AttributionConfig,
    AttributionResult,
    AttributorModel,
    attribute_component,
    attribute_instance,
    deanonymize_product,
    train_attributor,
    train_from_corpus,
    worker_set,
)
from rankfraud.benchmark import leave_one_out
from rankfraud.classifiers import KNNClassifier, LogisticRegression
from rankfraud.corpus import Corpus, Review
from rankfraud.mcdense import DensityConfig, FraudComponent
from rankfraud.stylo import ReviewInstance, build_feature_space
from rankfraud.textgen import background_style, worker_style, write_review

VOCAB_A = "alpha bravo charlie delta echo foxtrot golf hotel".split()
VOCAB_B = "zebra yak walrus vulture urchin toucan seal raven".split()


def vocab_corpus(n_products=10, per_product=6):
    """Two workers writing from disjoint word lists, ``n_products`` instances each."""
    rng = random.Random(7)
    reviews = []
    attributions = {}
    for worker, vocab in (("W1", VOCAB_A), ("W2", VOCAB_B)):
        accounts = [f"{worker.lower()}a{i}" for i in range(per_product)]
        attributions.update({a: worker for a in accounts})
        for p in range(n_products):
            for a in accounts:
                text = " ".join(rng.choice(vocab) for _ in range(rng.randint(4, 9)))
                reviews.append(Review(f"r{len(reviews)}", a, f"{worker}P{p}", text, 5, 1000 + len(reviews)))
    return Corpus(reviews, attributions)


def test_disjoint_vocabularies_loo_is_perfect():
    corpus = vocab_corpus()
    results = leave_one_out(corpus, AttributionConfig(background=False))
    assert len(results) == 20
    assert all(r.attributed == r.component_id.split("@")[0] for r in results)


def test_resubstitution_k1_returns_own_label():
    corpus = vocab_corpus(n_products=4)
    cfg = AttributionConfig(params={"k": 1}, background=False)
    model = train_from_corpus(corpus, cfg)
    from rankfraud.stylo.features import group_instances

    for inst in group_instances(corpus):
        assert attribute_instance(inst, model).attributed == inst.worker_id


def test_duplicate_instances_under_two_labels_tie():
    texts = tuple(f"same words here number {i}" for i in range(5))
    a = ReviewInstance("W2", "P", texts)
    b = ReviewInstance("W1", "P", texts)
    other = ReviewInstance("W1", "Q", tuple("completely other wording entirely" for _ in range(5)))
    space = build_feature_space([a, b, other])
    model = train_attributor([a, b, other], space, "knn", k=1)
    res = attribute_instance(ReviewInstance("?", "P", texts), model)
    assert res.tie
    assert res.ranked[:2] == (("W1", 0.5), ("W2", 0.5))
    assert res.attributed == "W1"


def test_single_worker_or_reserved_label_rejected():
    inst = ReviewInstance("W1", "P", ("a b c",) * 5)
    space = build_feature_space([inst])
    with pytest.raises(ValueError):
        train_attributor([inst, ReviewInstance("W1", "Q", ("d e",) * 5)], space)
    with pytest.raises(ValueError):
        train_attributor([inst, ReviewInstance(BACKGROUND, "Q", ("d e",) * 5)], space)


def test_probabilities_sum_to_one():
    corpus = vocab_corpus(n_products=4)
    for algo, params in (("knn", {"k": 5}), ("logreg", {"l2": 1.0})):
        model = train_from_corpus(corpus, AttributionConfig(algorithm=algo, params=params, background=False))
        inst = ReviewInstance("?", "X", tuple(" ".join(VOCAB_A[:5]) for _ in range(6)))
        res = attribute_instance(inst, model)
        assert abs(sum(p for _, p in res.ranked) - 1) < 1e-9
        assert res.attributed == "W1"


def test_classifiers_roundtrip_arrays():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 1, (10, 3)), rng.normal(4, 1, (10, 3))])
    y = ["a"] * 10 + ["b"] * 10
    for clf in (KNNClassifier(3), LogisticRegression()):
        clf.fit(X, y)
        clone = type(clf).from_arrays(clf.to_arrays())
        np.testing.assert_array_equal(clone.predict_proba(X), clf.predict_proba(X))


def styled_corpus():
    """Two workers with private products co-targeting P; honest reviewers on their own products.

    On P the two pools share no other product, so the co-activity graph
    splits into one block per worker.
    """
    rng = random.Random(11)
    styles = {"W1": worker_style(rng), "W2": worker_style(rng)}
    honest = background_style()
    reviews = []
    attributions = {}

    def post(account, product, style):
        reviews.append(Review(f"r{len(reviews):05d}", account, product, write_review(rng, style), 5, 10_000 + len(reviews)))

    for w, style in styles.items():
        accounts = [f"{w.lower()}a{i:02d}" for i in range(12)]
        attributions.update({a: w for a in accounts})
        for p in range(6):
            for a in accounts:
                post(a, f"{w}X{p}", style)
        for a in accounts:
            post(a, "P", style)
    for p in range(8):
        for i in range(15):
            post(f"h{p:02d}{i:02d}", f"H{p}", honest)
    for i in range(4):
        post(f"hp{i}", "P", honest)
    return Corpus(reviews, attributions)


@pytest.fixture(scope="module")
def styled():
    corpus = styled_corpus()
    return corpus, train_from_corpus(corpus)


def test_planted_component_ranks_its_worker_first(styled):
    corpus, model = styled
    comp = FraudComponent(frozenset(a for a, w in corpus.attributions.items() if w == "W1"), 1, 1, "W1X0")
    res = attribute_component(comp, corpus, model)
    assert res.top(1) == ["W1"] and not res.abstain


def test_multi_worker_product_yields_both(styled):
    corpus, model = styled
    results = deanonymize_product(corpus, "P", DensityConfig(), model)
    assert worker_set(results) == {"W1", "W2"}


def test_honest_product_yields_empty_set(styled):
    corpus, model = styled
    assert worker_set(deanonymize_product(corpus, "H0", DensityConfig(), model)) == set()


def test_below_eta_product_yields_empty_set():
    corpus = vocab_corpus(n_products=3, per_product=4)
    model = train_from_corpus(corpus, AttributionConfig(background=False, min_reviews=3))
    assert deanonymize_product(corpus, "W1P0", DensityConfig(), model) == []


def test_honest_component_abstains():
    corpus = styled_corpus()
    held = "H7"
    train = Corpus([r for r in corpus.reviews if r.product_id != held], corpus.attributions)
    model = train_from_corpus(train)
    comp = FraudComponent(frozenset(corpus.reviewers_of(held)), 1, 1, held)
    res = attribute_component(comp, corpus, model)
    assert res.abstain and res.attributed is None
    assert res.reason == BACKGROUND_STYLE


def test_four_reviews_abstain_with_reason(styled):
    corpus, model = styled
    accounts = sorted(a for a, w in corpus.attributions.items() if w == "W1")[:4]
    res = attribute_component(FraudComponent(frozenset(accounts), 1, 1, "P"), corpus, model)
    assert res.abstain and res.reason == INSUFFICIENT_REVIEWS and res.ranked == ()


def test_attribution_is_deterministic_and_serializable(styled, tmp_path):
    corpus, model = styled
    model.save(tmp_path / "m.npz")
    loaded = AttributorModel.load(tmp_path / "m.npz")
    a = deanonymize_product(corpus, "P", DensityConfig(), model)
    b = deanonymize_product(corpus, "P", DensityConfig(), loaded)
    assert a == b
    assert [AttributionResult.from_dict(r.to_dict()) for r in a] == [
        AttributionResult.from_dict(r.to_dict()) for r in b
    ]
    assert all(r.top(3) and BACKGROUND not in r.top(3) for r in a)
