"""Interchangeable continuation-value regressors.

Three families behind one fit/predict contract: a polynomial least-squares
fit, gradient-boosted regression trees, and a small feedforward network.
All of them standardize features internally (training mean and population
std, zero-std columns left unscaled), so callers can feed raw state
variables without caring about conditioning.

Everything here is deterministic: the polynomial solve is an SVD least
squares, tree split ties resolve to the first candidate in scan order, and
the network draws its initial weights and batch shuffles from its own
seeded generator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PolynomialSpec",
    "BoostedTreesSpec",
    "MlpSpec",
    "RegressorSpec",
    "FittedRegressor",
    "fit",
    "predict",
    "gradient_check",
]


@dataclass(frozen=True)
class PolynomialSpec:
    """Monomial basis of total degree <= ``degree``.

    ``terms`` optionally truncates the degree-graded basis to an exact
    number of leading terms (constant first, then degree 1, ...).
    """

    degree: int = 5
    terms: int | None = None

    def __post_init__(self) -> None:
        if self.degree < 0:
            raise ValueError(f"degree must be >= 0, got {self.degree}")
        if self.terms is not None and self.terms < 1:
            raise ValueError(f"terms must be >= 1, got {self.terms}")

    @property
    def name(self) -> str:
        return "polynomial"


@dataclass(frozen=True)
class BoostedTreesSpec:
    """Gradient boosting on squared error with depth-limited trees."""

    estimators: int = 50
    max_depth: int = 3
    learning_rate: float = 0.1

    def __post_init__(self) -> None:
        if self.estimators < 1:
            raise ValueError(f"estimators must be >= 1, got {self.estimators}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")

    @property
    def name(self) -> str:
        return "boosted_trees"


@dataclass(frozen=True)
class MlpSpec:
    """Feedforward net, ReLU hidden layers, identity output.

    Trained with mini-batch gradient descent using adaptive per-parameter
    step sizes (Adam-style first and second moment estimates).  Weight
    init and batch shuffling come from ``seed`` alone.
    """

    hidden_layers: tuple[int, ...] = (20, 20, 20, 20)
    batch_size: int = 256
    epochs: int = 200
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.hidden_layers or any(h < 1 for h in self.hidden_layers):
            raise ValueError(f"hidden_layers must be nonempty positive, got {self.hidden_layers}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")

    @property
    def name(self) -> str:
        return "mlp"


RegressorSpec = PolynomialSpec | BoostedTreesSpec | MlpSpec


def _as_matrix(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"features must be 1- or 2-dimensional, got shape {x.shape}")
    return x


def _validate_training_data(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = _as_matrix(x)
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError(f"targets must be 1-dimensional, got shape {y.shape}")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"feature/target length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in training data")
    return x, y


@dataclass(frozen=True)
class _Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "_Scaler":
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0.0, std, 1.0)
        return cls(mean, std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


class FittedRegressor:
    """Base of all fitted models: stores the spec and feature scaler."""

    def __init__(self, spec: RegressorSpec, scaler: _Scaler):
        self.spec = spec
        self.scaler = scaler
        self.n_features = scaler.mean.shape[0]

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        if x.shape[1] != self.n_features:
            raise ValueError(f"model was fit on {self.n_features} features, got {x.shape[1]}")
        return self.scaler.transform(x)

    def predict(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


# ---------------------------------------------------------------- polynomial

def _monomial_powers(n_features: int, degree: int, terms: int | None) -> np.ndarray:
    """Exponent rows in degree-graded order, constant term first."""
    rows = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(n_features), total):
            p = np.zeros(n_features, dtype=np.int64)
            for j in combo:
                p[j] += 1
            rows.append(p)
    powers = np.array(rows)
    if terms is not None:
        if terms > len(powers):
            raise ValueError(f"terms={terms} exceeds basis size {len(powers)}")
        powers = powers[:terms]
    return powers


def _design_matrix(xs: np.ndarray, powers: np.ndarray) -> np.ndarray:
    return np.prod(xs[:, None, :] ** powers[None, :, :], axis=2)


class PolynomialModel(FittedRegressor):
    def __init__(self, spec, scaler, powers, coef):
        super().__init__(spec, scaler)
        self.powers = powers
        self.coef = coef

    def predict(self, x: np.ndarray) -> np.ndarray:
        xs = self._check(x)
        return _design_matrix(xs, self.powers) @ self.coef


def _fit_polynomial(spec: PolynomialSpec, x: np.ndarray, y: np.ndarray) -> PolynomialModel:
    scaler = _Scaler.fit(x)
    xs = scaler.transform(x)
    powers = _monomial_powers(x.shape[1], spec.degree, spec.terms)
    design = _design_matrix(xs, powers)
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    return PolynomialModel(spec, scaler, powers, coef)


# -------------------------------------------------------------- boosted trees

class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, value=None, feature=None, threshold=None, left=None, right=None):
        self.value = value
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right


def _best_split(x: np.ndarray, y: np.ndarray) -> tuple[int, float, float] | None:
    """Exact greedy search: (feature, threshold, split SSE) or None.

    The rule is ``x[:, feature] <= threshold`` with the threshold taken as
    the left boundary value itself, so the partition is exact in floating
    point.  Ties keep the first candidate found (lowest feature index,
    lowest threshold).
    """
    n = y.shape[0]
    total = y.sum()
    total_sq = (y * y).sum()
    best = None
    for j in range(x.shape[1]):
        order = np.argsort(x[:, j], kind="stable")
        xs = x[order, j]
        ys = y[order]
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        cum = np.cumsum(ys)[:-1]
        cumsq = np.cumsum(ys * ys)[:-1]
        left_n = np.arange(1, n)
        right_n = n - left_n
        sse = (cumsq - cum * cum / left_n) + ((total_sq - cumsq) - (total - cum) ** 2 / right_n)
        sse[~valid] = np.inf
        i = int(np.argmin(sse))
        if best is None or sse[i] < best[2]:
            best = (j, float(xs[i]), float(sse[i]))
    return best


def _grow_tree(x: np.ndarray, y: np.ndarray, depth: int, max_depth: int) -> _Node:
    node_sse = float(((y - y.mean()) ** 2).sum())
    if depth >= max_depth or y.shape[0] < 2 or node_sse <= 0.0:
        return _Node(value=float(y.mean()))
    found = _best_split(x, y)
    if found is None or found[2] >= node_sse:
        return _Node(value=float(y.mean()))
    j, thr, _ = found
    mask = x[:, j] <= thr
    return _Node(feature=j, threshold=thr,
                 left=_grow_tree(x[mask], y[mask], depth + 1, max_depth),
                 right=_grow_tree(x[~mask], y[~mask], depth + 1, max_depth))


def _tree_apply(node: _Node, x: np.ndarray, out: np.ndarray, idx: np.ndarray) -> None:
    if node.value is not None:
        out[idx] = node.value
        return
    mask = x[idx, node.feature] <= node.threshold
    _tree_apply(node.left, x, out, idx[mask])
    _tree_apply(node.right, x, out, idx[~mask])


class BoostedTreesModel(FittedRegressor):
    def __init__(self, spec, scaler, base, trees):
        super().__init__(spec, scaler)
        self.base = base
        self.trees = trees

    def _raw_predict(self, xs: np.ndarray) -> np.ndarray:
        pred = np.full(xs.shape[0], self.base)
        idx = np.arange(xs.shape[0])
        buf = np.empty(xs.shape[0])
        for tree in self.trees:
            _tree_apply(tree, xs, buf, idx)
            pred += self.spec.learning_rate * buf
        return pred

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self._raw_predict(self._check(x))

    def staged_training_mse(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Training MSE after 0, 1, ..., estimators rounds (diagnostic)."""
        xs = self._check(x)
        y = np.asarray(y, dtype=float)
        pred = np.full(xs.shape[0], self.base)
        idx = np.arange(xs.shape[0])
        buf = np.empty(xs.shape[0])
        mses = [float(((y - pred) ** 2).mean())]
        for tree in self.trees:
            _tree_apply(tree, xs, buf, idx)
            pred += self.spec.learning_rate * buf
            mses.append(float(((y - pred) ** 2).mean()))
        return np.array(mses)


def _fit_boosted_trees(spec: BoostedTreesSpec, x: np.ndarray, y: np.ndarray) -> BoostedTreesModel:
    scaler = _Scaler.fit(x)
    xs = scaler.transform(x)
    base = float(y.mean())
    residual = y - base
    idx = np.arange(xs.shape[0])
    buf = np.empty(xs.shape[0])
    trees = []
    for _ in range(spec.estimators):
        tree = _grow_tree(xs, residual, 0, spec.max_depth)
        _tree_apply(tree, xs, buf, idx)
        residual = residual - spec.learning_rate * buf
        trees.append(tree)
    return BoostedTreesModel(spec, scaler, base, trees)


# ------------------------------------------------------------------------ mlp

def _init_layers(spec: MlpSpec, n_features: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """He-normal weights, zero biases, from the spec seed alone."""
    rng = np.random.default_rng(spec.seed)
    sizes = [n_features, *spec.hidden_layers, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _mlp_forward(xs: np.ndarray, weights, biases) -> tuple[np.ndarray, list[np.ndarray]]:
    """Returns (output column, activations per layer incl. input)."""
    acts = [xs]
    for w, b in zip(weights[:-1], biases[:-1]):
        acts.append(np.maximum(acts[-1] @ w + b, 0.0))
    out = acts[-1] @ weights[-1] + biases[-1]
    return out, acts


def _mlp_loss_and_grads(xs, ys, weights, biases, negate_layer_grad=None):
    """Mean squared error and its gradients by backprop.

    ``negate_layer_grad`` flips the sign of one layer's weight gradient; a
    corrupted analytic gradient must make the finite-difference check fail
    loudly, and this hook is how tests corrupt it.
    """
    out, acts = _mlp_forward(xs, weights, biases)
    err = out[:, 0] - ys
    n = xs.shape[0]
    loss = float((err * err).mean())
    delta = (2.0 / n) * err[:, None]
    grads_w = [None] * len(weights)
    grads_b = [None] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        grads_w[layer] = acts[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (acts[layer] > 0.0)
    if negate_layer_grad is not None:
        grads_w[negate_layer_grad] = -grads_w[negate_layer_grad]
    return loss, grads_w, grads_b


class MlpModel(FittedRegressor):
    def __init__(self, spec, scaler, weights, biases, y_mean, y_std, loss_history):
        super().__init__(spec, scaler)
        self.weights = weights
        self.biases = biases
        self.y_mean = y_mean
        self.y_std = y_std
        self.loss_history = loss_history

    def predict(self, x: np.ndarray) -> np.ndarray:
        xs = self._check(x)
        out, _ = _mlp_forward(xs, self.weights, self.biases)
        return out[:, 0] * self.y_std + self.y_mean


def _fit_mlp(spec: MlpSpec, x: np.ndarray, y: np.ndarray) -> MlpModel:
    scaler = _Scaler.fit(x)
    xs = scaler.transform(x)
    # targets are standardized too; at lr 1e-3 raw currency scales stall
    y_mean = float(y.mean())
    y_std = float(y.std())
    if y_std <= 0.0:
        y_std = 1.0
    ys = (y - y_mean) / y_std

    weights, biases = _init_layers(spec, xs.shape[1])
    rng = np.random.default_rng(spec.seed + 1)

    mw = [np.zeros_like(w) for w in weights]
    vw = [np.zeros_like(w) for w in weights]
    mb = [np.zeros_like(b) for b in biases]
    vb = [np.zeros_like(b) for b in biases]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    n = xs.shape[0]
    loss_history = [_mlp_loss_and_grads(xs, ys, weights, biases)[0]]
    for _ in range(spec.epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, spec.batch_size):
            idx = perm[lo:lo + spec.batch_size]
            _, gw, gb = _mlp_loss_and_grads(xs[idx], ys[idx], weights, biases)
            step += 1
            corr1 = 1.0 - beta1 ** step
            corr2 = 1.0 - beta2 ** step
            for i in range(len(weights)):
                mw[i] = beta1 * mw[i] + (1.0 - beta1) * gw[i]
                vw[i] = beta2 * vw[i] + (1.0 - beta2) * gw[i] * gw[i]
                weights[i] -= spec.learning_rate * (mw[i] / corr1) / (np.sqrt(vw[i] / corr2) + eps)
                mb[i] = beta1 * mb[i] + (1.0 - beta1) * gb[i]
                vb[i] = beta2 * vb[i] + (1.0 - beta2) * gb[i] * gb[i]
                biases[i] -= spec.learning_rate * (mb[i] / corr1) / (np.sqrt(vb[i] / corr2) + eps)
        loss_history.append(_mlp_loss_and_grads(xs, ys, weights, biases)[0])

    return MlpModel(spec, scaler, weights, biases, y_mean, y_std, np.array(loss_history))


def gradient_check(spec: MlpSpec, x: np.ndarray, y: np.ndarray,
                   epsilon: float = 1e-6, *,
                   _negate_layer_grad: int | None = None) -> float:
    """Max relative error between backprop and central finite differences.

    The network is built at its seeded initialization and the full-batch
    loss gradient is compared parameter by parameter.  Capped at 32 samples
    to keep the finite-difference sweep tractable.  Parameters where both
    gradients vanish contribute zero error.
    """
    x, y = _validate_training_data(x, y)
    if x.shape[0] > 32:
        raise ValueError(f"gradient check capped at 32 samples, got {x.shape[0]}")
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    scaler = _Scaler.fit(x)
    xs = scaler.transform(x)
    ys = np.asarray(y, dtype=float)

    weights, biases = _init_layers(spec, xs.shape[1])
    _, gw, gb = _mlp_loss_and_grads(xs, ys, weights, biases,
                                    negate_layer_grad=_negate_layer_grad)

    def loss_only() -> float:
        return _mlp_loss_and_grads(xs, ys, weights, biases)[0]

    worst = 0.0
    for params, grads in ((weights, gw), (biases, gb)):
        for arr, grad in zip(params, grads):
            flat = arr.reshape(-1)
            gflat = grad.reshape(-1)
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + epsilon
                up = loss_only()
                flat[i] = keep - epsilon
                down = loss_only()
                flat[i] = keep
                fd = (up - down) / (2.0 * epsilon)
                scale = max(abs(gflat[i]), abs(fd))
                if scale > 1e-12:
                    worst = max(worst, abs(gflat[i] - fd) / scale)
    return worst


# ------------------------------------------------------------------- dispatch

def fit(spec: RegressorSpec, x: np.ndarray, y: np.ndarray) -> FittedRegressor:
    """Fit one regressor family on (features, targets)."""
    x, y = _validate_training_data(x, y)
    if isinstance(spec, PolynomialSpec):
        return _fit_polynomial(spec, x, y)
    if isinstance(spec, BoostedTreesSpec):
        return _fit_boosted_trees(spec, x, y)
    if isinstance(spec, MlpSpec):
        return _fit_mlp(spec, x, y)
    raise TypeError(f"unknown regressor spec {type(spec).__name__}")


def predict(model: FittedRegressor, x: np.ndarray) -> np.ndarray:
    """Predict with a fitted model; feature count must match the fit."""
    return model.predict(x)
