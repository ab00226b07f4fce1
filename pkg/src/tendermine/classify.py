"""Binary relevance classifiers and the precision/recall/F1 harness.

Three learners are provided: logistic regression and linear SVM (full-batch
gradient descent on standardised features) and a random forest of Gini
trees. Training is deterministic given the seed: examples are put into a
canonical order first, so the order they arrive in does not matter.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .features import FeatureVector, manifest_version

RELEVANT = "relevant"
IRRELEVANT = "irrelevant"
LABELS = (RELEVANT, IRRELEVANT)
ALGORITHMS = ("logistic_regression", "random_forest", "linear_svm")
MODEL_FORMAT = "tendermine-model/1"

DEFAULT_HYPERPARAMS: dict[str, dict[str, Any]] = {
    "logistic_regression": {"l2": 1e-4, "learning_rate": 0.1, "epochs": 500, "tol": 1e-6},
    "linear_svm": {"l2": 1e-4, "learning_rate": 0.1, "epochs": 500},
    "random_forest": {"n_trees": 100, "max_depth": 12, "max_features": "sqrt", "min_samples_split": 2},
}


class SingleClassData(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class ManifestMismatch(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class LabeledExample:
    vector: tuple[float, ...]
    label: str
    unit_id: str = ""

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")


@dataclass(frozen=True)
class Prediction:
    label: str
    score: float


@dataclass
class TrainedModel:
    algorithm: str
    parameters: dict[str, Any]
    feature_manifest_version: str
    training_seed: int
    n_features: int
    hyperparams: dict[str, Any] = field(default_factory=dict)
    threshold: float = 0.5

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        if self.algorithm == "random_forest":
            return _forest_predict(self.parameters["trees"], X)
        Z = (X - self.parameters["mean"]) / self.parameters["scale"]
        return _sigmoid(Z @ self.parameters["weights"] + self.parameters["bias"])

    def to_dict(self) -> dict:
        params: dict[str, Any] = {}
        for key, value in self.parameters.items():
            if key == "trees":
                params[key] = [{k: v.tolist() for k, v in tree.items()} for tree in value]
            elif isinstance(value, np.ndarray):
                params[key] = value.tolist()
            else:
                params[key] = value
        return {
            "format": MODEL_FORMAT,
            "algorithm": self.algorithm,
            "feature_manifest_version": self.feature_manifest_version,
            "training_seed": self.training_seed,
            "n_features": self.n_features,
            "hyperparams": self.hyperparams,
            "threshold": self.threshold,
            "parameters": params,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainedModel":
        if data.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format {data.get('format')!r}")
        raw = data["parameters"]
        params: dict[str, Any] = {}
        for key, value in raw.items():
            if key == "trees":
                params[key] = [
                    {
                        "feature": np.asarray(t["feature"], dtype=np.int64),
                        "threshold": np.asarray(t["threshold"], dtype=float),
                        "left": np.asarray(t["left"], dtype=np.int64),
                        "right": np.asarray(t["right"], dtype=np.int64),
                        "value": np.asarray(t["value"], dtype=float),
                    }
                    for t in value
                ]
            elif isinstance(value, list):
                params[key] = np.asarray(value, dtype=float)
            else:
                params[key] = value
        return cls(
            algorithm=data["algorithm"],
            parameters=params,
            feature_manifest_version=data["feature_manifest_version"],
            training_seed=data["training_seed"],
            n_features=data["n_features"],
            hyperparams=dict(data.get("hyperparams", {})),
            threshold=data.get("threshold", 0.5),
        )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# ---------------------------------------------------------------------------
# linear models

def _standardise(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def _fit_logistic(Z: np.ndarray, y: np.ndarray, hp: Mapping[str, Any]) -> tuple[np.ndarray, float]:
    n, d = Z.shape
    w = np.zeros(d)
    b = 0.0
    lr, l2, tol = hp["learning_rate"], hp["l2"], hp["tol"]
    prev = math.inf
    for _ in range(int(hp["epochs"])):
        z = Z @ w + b
        p = _sigmoid(z)
        # log(1 + e^z) - y z, computed stably
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + l2 / 2 * (w @ w))
        if abs(prev - loss) < tol:
            break
        prev = loss
        err = p - y
        w = w - lr * (Z.T @ err / n + l2 * w)
        b = b - lr * float(np.mean(err))
    return w, b


def _fit_svm(Z: np.ndarray, y: np.ndarray, hp: Mapping[str, Any]) -> tuple[np.ndarray, float]:
    n, d = Z.shape
    ys = 2.0 * y - 1.0
    w = np.zeros(d)
    b = 0.0
    lr, l2 = hp["learning_rate"], hp["l2"]
    for _ in range(int(hp["epochs"])):
        active = ys * (Z @ w + b) < 1.0
        grad_w = -(Z[active].T @ ys[active]) / n + l2 * w
        grad_b = -float(ys[active].sum()) / n
        w = w - lr * grad_w
        b = b - lr * grad_b
    return w, b


# ---------------------------------------------------------------------------
# random forest

def _gini_split(xs: np.ndarray, ys: np.ndarray) -> tuple[float, float] | None:
    """Best (weighted impurity, threshold) for one feature, lowest threshold on ties."""
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    n = len(xs)
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    left_n = np.arange(1, n, dtype=float)
    right_n = n - left_n
    left_pos = np.cumsum(ys)[:-1]
    right_pos = ys.sum() - left_pos
    pl = left_pos / left_n
    pr = right_pos / right_n
    impurity = (left_n * 2 * pl * (1 - pl) + right_n * 2 * pr * (1 - pr)) / n
    impurity[~valid] = np.inf
    k = int(np.argmin(impurity))
    lo, hi = xs[k], xs[k + 1]
    thr = lo + (hi - lo) / 2
    if not lo <= thr < hi:
        thr = lo
    return float(impurity[k]), float(thr)


def _build_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator, hp: Mapping[str, Any], max_features: int) -> dict:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    d = X.shape[1]

    def new_node(idx: np.ndarray) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        if depth >= hp["max_depth"] or len(idx) < hp["min_samples_split"] or yn.min() == yn.max():
            continue
        sampled = np.sort(rng.choice(d, size=max_features, replace=False))
        best: tuple[float, int, float] | None = None
        for candidates in (sampled, np.setdiff1d(np.arange(d), sampled)):
            for f in candidates:
                found = _gini_split(X[idx, f], yn)
                if found is not None and (best is None or found[0] < best[0]):
                    best = (found[0], int(f), found[1])
            if best is not None:
                break
        if best is None:
            continue
        _, f, thr = best
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left_idx, right_idx = idx[go_left], idx[~go_left]
        left[node] = new_node(left_idx)
        right[node] = new_node(right_idx)
        stack.append((right[node], right_idx, depth + 1))
        stack.append((left[node], left_idx, depth + 1))
    return {
        "feature": np.asarray(feature, dtype=np.int64),
        "threshold": np.asarray(threshold, dtype=float),
        "left": np.asarray(left, dtype=np.int64),
        "right": np.asarray(right, dtype=np.int64),
        "value": np.asarray(value, dtype=float),
    }


def _tree_predict(tree: Mapping[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    node = np.zeros(len(X), dtype=np.int64)
    rows = np.arange(len(X))
    while True:
        f = tree["feature"][node]
        internal = f >= 0
        if not internal.any():
            break
        r = rows[internal]
        n_int = node[internal]
        go_left = X[r, f[internal]] <= tree["threshold"][n_int]
        node[internal] = np.where(go_left, tree["left"][n_int], tree["right"][n_int])
    return tree["value"][node]


def _forest_predict(trees: Sequence[Mapping[str, np.ndarray]], X: np.ndarray) -> np.ndarray:
    total = np.zeros(len(X))
    for tree in trees:
        total += _tree_predict(tree, X)
    return total / len(trees)


def _max_features(spec: Any, d: int) -> int:
    if spec == "sqrt":
        return max(1, int(math.sqrt(d)))
    if spec == "log2":
        return max(1, int(math.log2(d)))
    if spec is None or spec == "all":
        return d
    return max(1, min(d, int(spec)))


# ---------------------------------------------------------------------------
# training / prediction

def _as_arrays(examples: Sequence[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    dims = {len(e.vector) for e in examples}
    if len(dims) != 1:
        raise DimensionMismatch(f"inconsistent vector lengths {sorted(dims)}")
    X = np.asarray([e.vector for e in examples], dtype=float)
    y = np.asarray([1.0 if e.label == RELEVANT else 0.0 for e in examples])
    return X, y


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    keys = [y] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def train(
    examples: Sequence[LabeledExample],
    algorithm: str = "random_forest",
    hyperparams: Mapping[str, Any] | None = None,
    seed: int = 0,
    manifest: str | None = None,
) -> TrainedModel:
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if not examples:
        raise SingleClassData("no training examples")
    X, y = _as_arrays(examples)
    if y.min() == y.max():
        raise SingleClassData("training data holds a single class")
    order = _canonical_order(X, y)
    X, y = X[order], y[order]
    hp = {**DEFAULT_HYPERPARAMS[algorithm], **(hyperparams or {})}
    n, d = X.shape

    if algorithm == "random_forest":
        mf = _max_features(hp["max_features"], d)
        trees = []
        for child in np.random.SeedSequence(seed).spawn(int(hp["n_trees"])):
            rng = np.random.default_rng(child)
            boot = rng.integers(0, n, size=n)
            trees.append(_build_tree(X[boot], y[boot], rng, hp, mf))
        params: dict[str, Any] = {"trees": trees}
    else:
        mean, scale = _standardise(X)
        Z = (X - mean) / scale
        fit = _fit_logistic if algorithm == "logistic_regression" else _fit_svm
        w, b = fit(Z, y, hp)
        params = {"mean": mean, "scale": scale, "weights": w, "bias": float(b)}

    return TrainedModel(
        algorithm=algorithm,
        parameters=params,
        feature_manifest_version=manifest or f"unversioned:{d}",
        training_seed=seed,
        n_features=d,
        hyperparams=hp,
    )


def _check_manifest(model: TrainedModel, vector: FeatureVector | Sequence[float]) -> tuple[float, ...]:
    if isinstance(vector, FeatureVector):
        version = manifest_version(vector.manifest)
        if version != model.feature_manifest_version:
            raise ManifestMismatch(f"model expects {model.feature_manifest_version}, vector is {version}")
        return vector.values
    return tuple(vector)


def predict(model: TrainedModel, vector: FeatureVector | Sequence[float], threshold: float | None = None) -> Prediction:
    values = _check_manifest(model, vector)
    score = float(model.scores(np.asarray(values))[0])
    cut = model.threshold if threshold is None else threshold
    return Prediction(RELEVANT if score >= cut else IRRELEVANT, score)


def predict_many(
    model: TrainedModel, vectors: Sequence[FeatureVector | Sequence[float]], threshold: float | None = None
) -> list[Prediction]:
    if not vectors:
        return []
    rows = [_check_manifest(model, v) for v in vectors]
    scores = model.scores(np.asarray(rows, dtype=float))
    cut = model.threshold if threshold is None else threshold
    return [Prediction(RELEVANT if s >= cut else IRRELEVANT, float(s)) for s in scores]


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path, expected_manifest: str | None = None) -> TrainedModel:
    model = TrainedModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    if expected_manifest is not None and model.feature_manifest_version != expected_manifest:
        raise ManifestMismatch(
            f"{path}: model built for {model.feature_manifest_version}, expected {expected_manifest}"
        )
    return model


# ---------------------------------------------------------------------------
# evaluation

@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class EvaluationReport:
    per_class: dict[str, ClassScores]
    macro: ClassScores
    confusion: dict[str, Confusion]


def scores_from_counts(tp: int, fp: int, fn: int) -> ClassScores:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return ClassScores(p, r, f1)


def evaluate(predictions: Sequence[str], gold: Sequence[str], labels: Sequence[str] = LABELS) -> EvaluationReport:
    """Per-class precision/recall/F1 and their unweighted (macro) mean."""
    if len(predictions) != len(gold):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(gold)} gold labels")
    per_class = {}
    confusion = {}
    for label in labels:
        tp = sum(1 for p, g in zip(predictions, gold) if p == label and g == label)
        fp = sum(1 for p, g in zip(predictions, gold) if p == label and g != label)
        fn = sum(1 for p, g in zip(predictions, gold) if p != label and g == label)
        tn = len(gold) - tp - fp - fn
        confusion[label] = Confusion(tp, fp, fn, tn)
        per_class[label] = scores_from_counts(tp, fp, fn)
    k = len(labels)
    macro = ClassScores(
        sum(s.precision for s in per_class.values()) / k,
        sum(s.recall for s in per_class.values()) / k,
        sum(s.f1 for s in per_class.values()) / k,
    )
    return EvaluationReport(per_class, macro, confusion)


@dataclass(frozen=True)
class CrossValidationResult:
    folds: list[EvaluationReport]
    fold_assignment: list[int]
    mean: ClassScores
    stdev: ClassScores


def stratified_folds(labels: Sequence[str], k: int, seed: int = 0) -> list[int]:
    """Fold id per example; each class is shuffled then dealt round-robin."""
    if k < 2:
        raise InsufficientData("k must be at least 2")
    rng = np.random.default_rng(seed)
    folds = [-1] * len(labels)
    offset = 0
    for label in LABELS:
        members = [i for i, lab in enumerate(labels) if lab == label]
        if len(members) < k:
            raise InsufficientData(f"class {label!r} has {len(members)} examples, fewer than k={k}")
        for j, i in enumerate(rng.permutation(members)):
            folds[int(i)] = (j + offset) % k
        offset += len(members)
    return folds


def cross_validate(
    examples: Sequence[LabeledExample],
    algorithm: str = "random_forest",
    k: int = 5,
    seed: int = 0,
    hyperparams: Mapping[str, Any] | None = None,
) -> CrossValidationResult:
    labels = [e.label for e in examples]
    assignment = stratified_folds(labels, k, seed)
    reports = []
    for fold in range(k):
        train_set = [e for e, f in zip(examples, assignment) if f != fold]
        test_set = [e for e, f in zip(examples, assignment) if f == fold]
        model = train(train_set, algorithm, hyperparams, seed=seed)
        preds = predict_many(model, [e.vector for e in test_set])
        reports.append(evaluate([p.label for p in preds], [e.label for e in test_set]))
    arr = np.asarray([[r.macro.precision, r.macro.recall, r.macro.f1] for r in reports])
    mean = arr.mean(axis=0)
    std = arr.std(axis=0)
    return CrossValidationResult(reports, assignment, ClassScores(*map(float, mean)), ClassScores(*map(float, std)))


def format_report_table(reports: Mapping[str, EvaluationReport | ClassScores], title: str = "") -> str:
    """Macro P/R/F1 per model, laid out as a ``Models Precision Recall F1`` table."""
    lines = [title] if title else []
    lines.append(f"{'Models':<22}{'Precision':>10}{'Recall':>10}{'F1':>10}")
    for name, rep in reports.items():
        s = rep.macro if isinstance(rep, EvaluationReport) else rep
        lines.append(f"{name:<22}{s.precision:>10.2f}{s.recall:>10.2f}{s.f1:>10.2f}")
    return "\n".join(lines)


def examples_from(vectors: Iterable[FeatureVector | Sequence[float]], labels: Iterable[str], ids: Iterable[str] | None = None) -> list[LabeledExample]:
    ids = ids if ids is not None else (str(i) for i in itertools.count())
    out = []
    for vec, label, uid in zip(vectors, labels, ids):
        values = vec.values if isinstance(vec, FeatureVector) else tuple(vec)
        out.append(LabeledExample(tuple(float(v) for v in values), label, uid))
    return out
