"""Small probabilistic classifiers shared by stylometric attribution and guilt-by-association.

Both standardize features with statistics learned at fit time and expose
``fit(X, y)`` / ``predict_proba(X)`` with columns ordered as ``classes_``.
"""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp


class ProbabilisticClassifier(Protocol):
    classes_: np.ndarray

    def fit(self, X: np.ndarray, y: Sequence[str]) -> "ProbabilisticClassifier": ...

    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...


class Standardizer:
    def fit(self, X: np.ndarray) -> "Standardizer":
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale_ = np.where(std > 0, std, 1.0)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean_) / self.scale_


def _check_labels(y: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    classes, codes = np.unique(np.asarray(y, dtype=object).astype(str), return_inverse=True)
    if len(classes) < 2:
        raise ValueError(f"need at least two classes to train, got {list(classes)}")
    return classes, codes


class KNNClassifier:
    """k nearest neighbours, Euclidean on z-scored features, inverse-distance weighted votes.

    Training points at distance zero from a query outvote everything else
    and share the vote equally, however many there are. A training point
    classified by its own model therefore gets its own label, and duplicates
    under two labels tie.
    """

    def __init__(self, k: int = 5, eps: float = 1e-12):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.eps = eps

    def fit(self, X, y) -> "KNNClassifier":
        X = np.asarray(X, dtype=np.float64)
        self.classes_, self._codes = _check_labels(y)
        self._scaler = Standardizer().fit(X)
        self._X = self._scaler.transform(X)
        return self

    def predict_proba(self, X) -> np.ndarray:
        Z = self._scaler.transform(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        k = min(self.k, len(self._X))
        out = np.zeros((len(Z), len(self.classes_)))
        for row, z in enumerate(Z):
            d = np.sqrt(((self._X - z) ** 2).sum(axis=1))
            exact = np.flatnonzero(d <= self.eps)
            if len(exact):
                # Every exact match votes, even beyond k, so duplicates tie instead of losing to index order.
                nearest, weights = exact, np.ones(len(exact))
            else:
                nearest = np.argsort(d, kind="stable")[:k]
                weights = 1.0 / d[nearest]
            np.add.at(out[row], self._codes[nearest], weights)
            out[row] /= out[row].sum()
        return out

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {
            "k": np.array(self.k), "classes": self.classes_.astype(str), "codes": self._codes,
            "X": self._X, "mean": self._scaler.mean_, "scale": self._scaler.scale_,
        }

    @classmethod
    def from_arrays(cls, a) -> "KNNClassifier":
        model = cls(k=int(a["k"]))
        model.classes_ = np.asarray(a["classes"], dtype=object)
        model._codes, model._X = a["codes"], a["X"]
        model._scaler = Standardizer()
        model._scaler.mean_, model._scaler.scale_ = a["mean"], a["scale"]
        return model


class LogisticRegression:
    """Multinomial logistic regression with an L2 penalty, fit by L-BFGS."""

    def __init__(self, l2: float = 1.0, max_iter: int = 500):
        self.l2 = l2
        self.max_iter = max_iter

    def fit(self, X, y) -> "LogisticRegression":
        X = np.asarray(X, dtype=np.float64)
        self.classes_, codes = _check_labels(y)
        self._scaler = Standardizer().fit(X)
        Z = self._scaler.transform(X)
        n, d = Z.shape
        c = len(self.classes_)
        onehot = np.zeros((n, c))
        onehot[np.arange(n), codes] = 1.0

        def loss(theta):
            W = theta[: d * c].reshape(d, c)
            b = theta[d * c :]
            logits = Z @ W + b
            logp = logits - logsumexp(logits, axis=1, keepdims=True)
            value = -(onehot * logp).sum() / n + 0.5 * self.l2 * (W**2).sum() / n
            resid = (np.exp(logp) - onehot) / n
            grad_w = Z.T @ resid + self.l2 * W / n
            return value, np.concatenate([grad_w.ravel(), resid.sum(0)])

        res = minimize(loss, np.zeros(d * c + c), jac=True, method="L-BFGS-B", options={"maxiter": self.max_iter})
        self.coef_ = res.x[: d * c].reshape(d, c)
        self.intercept_ = res.x[d * c :]
        return self

    def predict_proba(self, X) -> np.ndarray:
        Z = self._scaler.transform(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        logits = Z @ self.coef_ + self.intercept_
        return np.exp(logits - logsumexp(logits, axis=1, keepdims=True))

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {
            "l2": np.array(self.l2), "classes": self.classes_.astype(str), "coef": self.coef_,
            "intercept": self.intercept_, "mean": self._scaler.mean_, "scale": self._scaler.scale_,
        }

    @classmethod
    def from_arrays(cls, a) -> "LogisticRegression":
        model = cls(l2=float(a["l2"]))
        model.classes_ = np.asarray(a["classes"], dtype=object)
        model.coef_, model.intercept_ = a["coef"], a["intercept"]
        model._scaler = Standardizer()
        model._scaler.mean_, model._scaler.scale_ = a["mean"], a["scale"]
        return model


CLASSIFIERS = {"knn": KNNClassifier, "logreg": LogisticRegression}


def make_classifier(name: str, **params) -> ProbabilisticClassifier:
    if name == "knn":
        return KNNClassifier(**params)
    if name in ("logreg", "linear"):
        return LogisticRegression(**params)
    raise ValueError(f"unknown classifier {name!r} (expected 'knn' or 'logreg')")
