"""Deterministic, sample-weight-aware binary classifiers.

All five kinds sit behind one train/predict interface with labels in
{+1, -1}. Sample weights enter each objective normalized by their sum, so
uniformly rescaling all weights leaves every model unchanged.

* svm: linear SVM trained by epoch-based stochastic subgradient descent
  (learning rate 1/(lambda*t), shrink + ball projection). The bias rides
  along as a constant unit feature under the same ridge penalty; the final
  epoch's iterates are averaged, which stabilizes the 1/(lambda*t)
  schedule at small lambda.
* logreg: weighted logistic loss + L2 on the weights (bias unpenalized),
  full-batch gradient descent with a step from a Lipschitz bound, so the
  result is independent of example order.
* bernoulli_nb / multinomial_nb: weighted event counts with add-alpha
  smoothing. Bernoulli binarizes features at zero.
* knn: stores the training set; distance is cosine on the sparse (A/E)
  columns plus Euclidean on the standardized dense (U/D) columns; sample
  weights multiply votes.

Dense (U, D) columns are z-score standardized for svm/logreg/knn, fit on
the training data only. Examples are canonically sorted by entity before
training, so models are bit-identical under input permutation; svm mixes
in a seeded shuffle per epoch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import FeatureSpace

logger = logging.getLogger(__name__)

KINDS = ("svm", "logreg", "bernoulli_nb", "multinomial_nb", "knn")

MODEL_FORMAT = "fd-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class LabeledExample:
    entity: str
    x: np.ndarray
    label: int          # +1 or -1
    weight: float       # agreement score in (0, 1]; expert examples use 1.0


@dataclass
class Hyperparameters:
    svm_lambda: float = 1e-4
    svm_epochs: int = 50
    logreg_l2: float = 1e-4
    logreg_epochs: int = 200
    nb_alpha: float = 1.0
    knn_k: int = 5
    seed: int = 0

    def to_dict(self) -> dict:
        return dict(sorted(self.__dict__.items()))


@dataclass
class TrainedModel:
    kind: str
    space_hash: str
    config: dict
    params: dict
    space: FeatureSpace | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind,
            "space_hash": self.space_hash,
            "config": self.config,
            "params": _jsonable(self.params),
            "space": self.space.to_dict() if self.space is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not a model file")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        space = FeatureSpace.from_dict(d["space"]) if d.get("space") else None
        return cls(kind=d["kind"], space_hash=d["space_hash"], config=d["config"],
                   params=_unjsonable(d["params"]), space=space)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "shape": list(obj.shape)}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _unjsonable(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            arr = np.asarray(obj["__ndarray__"], dtype=np.float64)
            return arr.reshape(obj["shape"])
        return {k: _unjsonable(v) for k, v in obj.items()}
    return obj


# -- shared preparation ----------------------------------------------------


def _prepare(examples: Sequence[LabeledExample]):
    if len(examples) < 2:
        raise ValueError("need at least 2 training examples")
    ordered = sorted(examples, key=lambda e: (e.entity, e.label, e.weight))
    X = np.vstack([e.x for e in ordered]).astype(np.float64)
    y = np.asarray([e.label for e in ordered], dtype=np.float64)
    s = np.asarray([e.weight for e in ordered], dtype=np.float64)
    ents = [e.entity for e in ordered]
    if not np.isfinite(X).all():
        raise ValueError("non-finite feature values in training data")
    if np.any((s <= 0) | (s > 1)):
        raise ValueError("sample weights must lie in (0, 1]")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training data must contain both labels")
    return X, y, s, ents


def _fit_standardizer(X: np.ndarray, dense_cols: np.ndarray):
    if dense_cols.size == 0:
        return None
    mu = X[:, dense_cols].mean(axis=0)
    sigma = X[:, dense_cols].std(axis=0)
    sigma = np.where(sigma == 0.0, 1.0, sigma)
    return {"cols": dense_cols.astype(np.float64), "mu": mu, "sigma": sigma}


def _apply_standardizer(std, X: np.ndarray) -> np.ndarray:
    if std is None:
        return X
    X = X.copy()
    cols = std["cols"].astype(np.intp)
    X[:, cols] = (X[:, cols] - std["mu"]) / std["sigma"]
    return X


# -- training ----------------------------------------------------------------


def train(kind: str, examples: Sequence[LabeledExample], space: FeatureSpace,
          hp: Hyperparameters | None = None) -> TrainedModel:
    """Fit one classifier; deterministic for a fixed seed regardless of
    example order."""
    if kind not in KINDS:
        raise ValueError(f"unknown classifier kind {kind!r}; expected one of {KINDS}")
    hp = hp or Hyperparameters()
    if kind == "multinomial_nb" and "D" in space.blocks:
        raise ValueError("the D block is excluded from multinomial_nb feature sets")
    X, y, s, ents = _prepare(examples)
    if X.shape[1] != space.n_cols:
        raise ValueError(f"feature width {X.shape[1]} does not match space ({space.n_cols})")

    params: dict = {}
    if kind in ("svm", "logreg", "knn"):
        std = _fit_standardizer(X, space.dense_columns())
        Xs = _apply_standardizer(std, X)
        params["standardize"] = std
    else:
        Xs = X

    if kind == "svm":
        w, b = _train_svm(Xs, y, s, hp.svm_lambda, hp.svm_epochs, hp.seed)
        params.update({"w": w, "b": float(b)})
    elif kind == "logreg":
        w, b = _train_logreg(Xs, y, s, hp.logreg_l2, hp.logreg_epochs)
        params.update({"w": w, "b": float(b)})
    elif kind == "bernoulli_nb":
        params.update(_train_bernoulli_nb(Xs, y, s, hp.nb_alpha))
    elif kind == "multinomial_nb":
        if np.any(Xs < 0):
            raise ValueError("multinomial_nb requires non-negative features")
        params.update(_train_multinomial_nb(Xs, y, s, hp.nb_alpha))
    elif kind == "knn":
        params.update({
            "X": Xs, "y": y, "s": s, "entities": list(ents),
            "k": int(hp.knn_k),
            "sparse_cols": space.sparse_columns().astype(np.float64),
        })

    return TrainedModel(kind=kind, space_hash=space.sha256(),
                        config=hp.to_dict(), params=params, space=space)


def _train_svm(X, y, s, lam, epochs, seed):
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    coef = n * s / s.sum()
    w = np.zeros(d + 1)
    radius = 1.0 / np.sqrt(lam)
    rng = np.random.default_rng(seed)
    acc = np.zeros(d + 1)
    acc_n = 0
    t = 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        last = epoch == epochs - 1
        for i in order:
            t += 1
            eta = 1.0 / (lam * t)
            violated = y[i] * (Xa[i] @ w) < 1.0
            w *= 1.0 - 1.0 / t
            if violated:
                w += (eta * coef[i] * y[i]) * Xa[i]
            norm = np.linalg.norm(w)
            if norm > radius:
                w *= radius / norm
            if last:
                acc += w
                acc_n += 1
    if acc_n:
        w = acc / acc_n
    return w[:-1], w[-1]


def logreg_value_and_grad(wb: np.ndarray, X: np.ndarray, y: np.ndarray,
                          s: np.ndarray, l2: float):
    """Weight-normalized negative log-likelihood + (l2/2)||w||^2 and its
    gradient over the stacked parameter vector [w, b]."""
    w, b = wb[:-1], wb[-1]
    z = X @ w + b
    yz = y * z
    p = s / s.sum()
    value = float(p @ np.logaddexp(0.0, -yz) + 0.5 * l2 * (w @ w))
    sig = np.empty_like(yz)
    pos = yz >= 0
    sig[pos] = np.exp(-yz[pos]) / (1.0 + np.exp(-yz[pos]))
    sig[~pos] = 1.0 / (1.0 + np.exp(yz[~pos]))
    coefs = -p * y * sig
    grad_w = X.T @ coefs + l2 * w
    grad_b = coefs.sum()
    return value, np.concatenate([grad_w, [grad_b]])


def _train_logreg(X, y, s, l2, epochs):
    n, d = X.shape
    lipschitz = 0.25 * float(np.max((X * X).sum(axis=1)) + 1.0) + l2
    lr = 1.0 / lipschitz
    wb = np.zeros(d + 1)
    for _ in range(epochs):
        _, grad = logreg_value_and_grad(wb, X, y, s, l2)
        wb -= lr * grad
    return wb[:-1], wb[-1]


def _train_bernoulli_nb(X, y, s, alpha):
    Xb = (X != 0).astype(np.float64)
    total = s.sum()
    out = {"theta": [], "log_prior": [], "labels": np.asarray([1.0, -1.0])}
    for label in (1.0, -1.0):
        mask = y == label
        w_c = s[mask].sum()
        theta = (s[mask] @ Xb[mask] + alpha) / (w_c + 2.0 * alpha)
        out["theta"].append(theta)
        out["log_prior"].append(np.log(w_c / total))
    out["theta"] = np.vstack(out["theta"])
    out["log_prior"] = np.asarray(out["log_prior"])
    return out


def _train_multinomial_nb(X, y, s, alpha):
    d = X.shape[1]
    total = s.sum()
    out = {"theta": [], "log_prior": [], "labels": np.asarray([1.0, -1.0])}
    for label in (1.0, -1.0):
        mask = y == label
        w_c = s[mask].sum()
        counts = s[mask] @ X[mask]
        theta = (counts + alpha) / (counts.sum() + alpha * d)
        out["theta"].append(theta)
        out["log_prior"].append(np.log(w_c / total))
    out["theta"] = np.vstack(out["theta"])
    out["log_prior"] = np.asarray(out["log_prior"])
    return out


# -- prediction ---------------------------------------------------------------


def predict(model: TrainedModel, x: np.ndarray,
            space: FeatureSpace | None = None) -> tuple[int, float]:
    """(label, score). Score semantics: svm decision margin; logreg and the
    NB kinds P(+1); knn the +1 share of the weighted vote. Exact ties
    resolve to +1 with a diagnostic."""
    if space is not None and space.sha256() != model.space_hash:
        raise ValueError("feature-space hash mismatch between model and query")
    x = np.asarray(x, dtype=np.float64)
    if model.kind in ("svm", "logreg", "knn"):
        x = _apply_standardizer(model.params.get("standardize"), x[None, :])[0]

    if model.kind == "svm":
        score = float(model.params["w"] @ x + model.params["b"])
        return _sign_with_tie(score, model.kind), score
    if model.kind == "logreg":
        z = float(model.params["w"] @ x + model.params["b"])
        prob = 1.0 / (1.0 + np.exp(-z)) if z >= 0 else np.exp(z) / (1.0 + np.exp(z))
        return _sign_with_tie(prob - 0.5, model.kind), float(prob)
    if model.kind == "bernoulli_nb":
        xb = (x != 0).astype(np.float64)
        theta = model.params["theta"]
        joint = model.params["log_prior"] + (
            xb @ np.log(theta).T + (1.0 - xb) @ np.log(1.0 - theta).T)
        return _posterior_verdict(joint, model.kind)
    if model.kind == "multinomial_nb":
        if np.any(x < 0):
            raise ValueError("multinomial_nb requires non-negative features")
        joint = model.params["log_prior"] + x @ np.log(model.params["theta"]).T
        return _posterior_verdict(joint, model.kind)
    if model.kind == "knn":
        return _predict_knn(model, x)
    raise ValueError(f"unknown model kind {model.kind!r}")


def predict_proba(model: TrainedModel, x: np.ndarray) -> dict[int, float]:
    """Class probabilities for probabilistic kinds (logreg and NB)."""
    if model.kind not in ("logreg", "bernoulli_nb", "multinomial_nb"):
        raise ValueError(f"{model.kind} does not produce probabilities")
    _, score = predict(model, x)
    return {1: score, -1: 1.0 - score}


def _posterior_verdict(joint: np.ndarray, kind: str) -> tuple[int, float]:
    m = joint.max()
    post = np.exp(joint - m)
    post /= post.sum()
    return _sign_with_tie(float(post[0] - post[1]), kind), float(post[0])


def _sign_with_tie(delta: float, kind: str) -> int:
    if delta > 0:
        return 1
    if delta < 0:
        return -1
    logger.warning("%s: tied decision, predicting +1", kind)
    return 1


def _predict_knn(model: TrainedModel, x: np.ndarray) -> tuple[int, float]:
    Xtr = model.params["X"]
    sparse_cols = model.params["sparse_cols"].astype(np.intp)
    n_cols = Xtr.shape[1]
    dense_mask = np.ones(n_cols, dtype=bool)
    dense_mask[sparse_cols] = False

    dist = np.zeros(Xtr.shape[0])
    if sparse_cols.size:
        q = x[sparse_cols]
        T = Xtr[:, sparse_cols]
        qn = np.linalg.norm(q)
        tn = np.linalg.norm(T, axis=1)
        cos = np.zeros(Xtr.shape[0])
        ok = (tn > 0) & (qn > 0)
        if qn > 0:
            cos[ok] = (T[ok] @ q) / (tn[ok] * qn)
        dist += 1.0 - cos
    if dense_mask.any():
        diff = Xtr[:, dense_mask] - x[dense_mask]
        dist += np.sqrt((diff * diff).sum(axis=1))

    order = sorted(range(Xtr.shape[0]),
                   key=lambda i: (dist[i], model.params["entities"][i]))
    k = min(int(model.params["k"]), len(order))
    votes = {1: 0.0, -1: 0.0}
    for i in order[:k]:
        votes[int(model.params["y"][i])] += float(model.params["s"][i])
    total = votes[1] + votes[-1]
    share = votes[1] / total if total else 0.5
    return _sign_with_tie(votes[1] - votes[-1], model.kind), share
