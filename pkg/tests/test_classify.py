import numpy as np
import pytest

from tendermine.classify import (
    ALGORITHMS,
    IRRELEVANT,
    RELEVANT,
    DimensionMismatch,
    LabeledExample,
    ManifestMismatch,
    SingleClassData,
    TrainedModel,
    cross_validate,
    evaluate,
    format_report_table,
    load_model,
    predict,
    predict_many,
    save_model,
    scores_from_counts,
    stratified_folds,
    train,
)
from tendermine.features import FeatureVector, SENTENCE_MANIFEST, manifest_version


def blobs(n=200, d=4, separation=8.0, seed=0):
    """Two Gaussian blobs whose centres differ by ``separation`` along every axis."""
    rng = np.random.default_rng(seed)
    half = n // 2
    pos = rng.normal(separation / 2, 1.0, size=(half, d))
    neg = rng.normal(-separation / 2, 1.0, size=(n - half, d))
    X = np.vstack([pos, neg])
    y = [RELEVANT] * half + [IRRELEVANT] * (n - half)
    return [LabeledExample(tuple(map(float, x)), lab, str(i)) for i, (x, lab) in enumerate(zip(X, y))]


def test_blobs_are_linearly_separable():
    # brute-force check: the projection onto the all-ones direction separates the classes
    ex = blobs()
    proj = {lab: [sum(e.vector) for e in ex if e.label == lab] for lab in (RELEVANT, IRRELEVANT)}
    assert min(proj[RELEVANT]) > max(proj[IRRELEVANT])


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_training_accuracy_on_separable_data(algorithm):
    ex = blobs()
    model = train(ex, algorithm, seed=1)
    preds = predict_many(model, [e.vector for e in ex])
    accuracy = np.mean([p.label == e.label for p, e in zip(preds, ex)])
    assert accuracy >= 0.99


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_same_seed_same_model(algorithm):
    ex = blobs(n=80)
    a, b = train(ex, algorithm, seed=3), train(ex, algorithm, seed=3)
    assert a.to_dict() == b.to_dict()


def test_forest_ignores_example_order():
    ex = blobs(n=60)
    a = train(ex, "random_forest", seed=2)
    b = train(list(reversed(ex)), "random_forest", seed=2)
    assert a.to_dict() == b.to_dict()


def test_duplicating_examples_keeps_logistic_direction():
    ex = blobs(n=80)
    w1 = train(ex, "logistic_regression").parameters["weights"]
    w2 = train(ex + ex, "logistic_regression").parameters["weights"]
    cosine = float(w1 @ w2 / np.linalg.norm(w1) / np.linalg.norm(w2))
    assert cosine == pytest.approx(1.0, abs=1e-9)


def test_single_class_rejected():
    with pytest.raises(SingleClassData):
        train([LabeledExample((0.0,), RELEVANT)] * 3)


def test_far_positive_scores_high():
    ex = blobs()
    model = train(ex, "logistic_regression")
    p = predict(model, (10.0, 10.0, 10.0, 10.0))
    assert p.label == RELEVANT and p.score > 0.9


def _linear(weights, bias=0.0, d=2):
    return TrainedModel(
        "logistic_regression",
        {"mean": np.zeros(d), "scale": np.ones(d), "weights": np.asarray(weights, float), "bias": bias},
        "unversioned:2",
        0,
        d,
    )


def test_decision_boundary_scores_half():
    assert predict(_linear([1.0, -1.0]), (2.0, 2.0)).score == 0.5
    assert predict(_linear([0.0, 0.0]), (0.0, 0.0)).score == 0.5


def test_dimension_and_manifest_checks():
    with pytest.raises(DimensionMismatch):
        predict(_linear([1.0, 1.0]), (1.0, 2.0, 3.0))
    model = _linear([0.0] * 27, d=27)
    model.feature_manifest_version = manifest_version("page")
    with pytest.raises(ManifestMismatch):
        predict(model, FeatureVector((0.0,) * 27, SENTENCE_MANIFEST))


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_serialization_preserves_predictions(tmp_path, algorithm):
    ex = blobs(n=60)
    model = train(ex, algorithm, seed=5)
    save_model(model, tmp_path / "m.json")
    loaded = load_model(tmp_path / "m.json")
    vectors = [e.vector for e in ex]
    assert [p.score for p in predict_many(loaded, vectors)] == [p.score for p in predict_many(model, vectors)]


def test_hand_computed_counts():
    s = scores_from_counts(9, 1, 1)
    assert (s.precision, s.recall, s.f1) == pytest.approx((0.9, 0.9, 0.9), abs=1e-12)


def test_perfect_predictions():
    labels = [RELEVANT, IRRELEVANT, RELEVANT]
    assert evaluate(labels, labels).macro.f1 == 1.0


def test_macro_average_of_four_examples():
    gold = [RELEVANT, RELEVANT, IRRELEVANT, IRRELEVANT]
    pred = [RELEVANT, RELEVANT, RELEVANT, IRRELEVANT]
    r = evaluate(pred, gold, labels=(IRRELEVANT, RELEVANT))
    a, b = r.per_class[IRRELEVANT], r.per_class[RELEVANT]
    assert (a.precision, a.recall, a.f1) == pytest.approx((1.0, 0.5, 2 / 3), abs=1e-12)
    assert (b.precision, b.recall, b.f1) == pytest.approx((2 / 3, 1.0, 0.8), abs=1e-12)
    assert r.macro.precision == pytest.approx((1.0 + 2 / 3) / 2, abs=1e-12)


def test_inverted_labels_score_zero():
    gold = [RELEVANT, IRRELEVANT] * 5
    inverted = [IRRELEVANT if g == RELEVANT else RELEVANT for g in gold]
    assert evaluate(inverted, gold).macro.f1 == 0.0


def test_folds_are_balanced_and_repeatable():
    labels = [RELEVANT, RELEVANT, IRRELEVANT, IRRELEVANT]
    folds = stratified_folds(labels, 2, seed=4)
    for f in (0, 1):
        members = [lab for lab, k in zip(labels, folds) if k == f]
        assert sorted(members) == [IRRELEVANT, RELEVANT]
    assert stratified_folds(labels, 2, seed=4) == folds


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_cross_validation_on_separable_data(algorithm):
    assert cross_validate(blobs(n=100), algorithm, 5, seed=0).mean.f1 >= 0.95


def test_report_table_layout():
    r = evaluate([RELEVANT, IRRELEVANT], [RELEVANT, IRRELEVANT])
    lines = format_report_table({"random_forest": r}).splitlines()
    assert lines[0].split() == ["Models", "Precision", "Recall", "F1"]
    assert lines[1].split() == ["random_forest", "1.00", "1.00", "1.00"]
