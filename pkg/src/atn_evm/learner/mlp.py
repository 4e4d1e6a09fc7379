"""Feed-forward classifier trained with minibatch gradient descent.

Each unit computes ``y = f(sum_i x_i w_i + b)``. The last layer's outputs go
through a softmax and the loss is the mean cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateSplit, DimensionMismatch, UntrainableActivation

ACTIVATIONS = ("linear", "step", "tanh", "sigmoid", "relu")


def activate(name: str, s, slope: float = 1.0):
    if name == "linear":
        return slope * s
    if name == "step":
        return np.where(s >= 0, 1.0, 0.0)
    if name == "tanh":
        return np.tanh(s)
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * s))
    if name == "relu":
        return np.maximum(s, 0.0)
    raise ValueError(f"unknown activation {name!r}")


def activation_grad(name: str, s, y, slope: float = 1.0):
    if name == "linear":
        return np.full_like(s, slope)
    if name == "tanh":
        return 1.0 - y * y
    if name == "sigmoid":
        return y * (1.0 - y)
    if name == "relu":
        return (s > 0).astype(float)
    raise UntrainableActivation(f"activation {name!r} has no usable gradient")


def neuron_forward(x, w, activation: str = "linear", slope: float = 1.0) -> float:
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape:
        raise DimensionMismatch(f"{len(x)} inputs but {len(w)} weights")
    return float(activate(activation, float(x @ w), slope))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(eq=False)
class Layer:
    w: np.ndarray            # out x in
    b: np.ndarray            # out
    activation: str = "tanh"
    slope: float = 1.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.w.shape


@dataclass(eq=False)
class MlpModel:
    layers: list[Layer]
    dropout_rate: float = 0.0

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.w.shape[0] != b.w.shape[1]:
                raise DimensionMismatch(f"layer sizes {a.w.shape} and {b.w.shape} do not chain")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @classmethod
    def init(cls, sizes, activation: str = "tanh", seed: int = 0, dropout_rate: float = 0.0,
             output_activation: str = "linear") -> "MlpModel":
        rng = np.random.default_rng(seed)
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            std = np.sqrt(2.0 / (fan_in + fan_out))
            act = output_activation if i == len(sizes) - 2 else activation
            layers.append(Layer(rng.normal(0.0, std, (fan_out, fan_in)), np.zeros(fan_out), act))
        return cls(layers, dropout_rate)

    @property
    def sizes(self) -> list[int]:
        return [self.layers[0].w.shape[1]] + [l.w.shape[0] for l in self.layers]

    def forward(self, X, train: bool = False, rng: np.random.Generator | None = None):
        """Return output logits and the cache needed by ``backward``."""
        A = np.asarray(X, dtype=float)
        if A.shape[-1] != self.sizes[0]:
            raise DimensionMismatch(f"model expects {self.sizes[0]} inputs, got {A.shape[-1]}")
        cache = []
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            Z = A @ layer.w.T + layer.b
            Y = activate(layer.activation, Z, layer.slope)
            mask = None
            if train and i < last and self.dropout_rate > 0:
                keep = 1.0 - self.dropout_rate
                mask = (rng.random(Y.shape) < keep) / keep
                out = Y * mask
            else:
                out = Y
            cache.append((A, Z, Y, mask))
            A = out
        return A, cache

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.forward(X)[0])

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.forward(X)[0], axis=-1)

    def backward(self, logits, y, cache):
        """Mean cross-entropy and its gradients ``[(dW, db), ...]``."""
        n = len(y)
        P = softmax(logits)
        loss = -np.mean(np.log(np.clip(P[np.arange(n), y], 1e-300, None)))
        G = P.copy()
        G[np.arange(n), y] -= 1.0
        G /= n      # dLoss / d(output of last layer)
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            A_in, Z, Y, mask = cache[i]
            if mask is not None:
                G = G * mask
            dZ = G * activation_grad(layer.activation, Z, Y, layer.slope)
            grads[i] = (dZ.T @ A_in, dZ.sum(axis=0))
            G = dZ @ layer.w
        return loss, grads

    def loss_and_grads(self, X, y, train: bool = False, rng=None):
        logits, cache = self.forward(X, train, rng)
        return self.backward(logits, np.asarray(y), cache)

    def loss(self, X, y) -> float:
        y = np.asarray(y)
        P = self.predict_proba(X)
        return float(-np.mean(np.log(np.clip(P[np.arange(len(y)), y], 1e-300, None))))

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "dropout_rate": self.dropout_rate,
            "layers": [{"in": l.w.shape[1], "out": l.w.shape[0], "activation": l.activation, "slope": l.slope,
                        "weights": l.w.tolist(), "bias": l.b.tolist()} for l in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        layers = [Layer(np.asarray(l["weights"], dtype=float).reshape(l["out"], l["in"]),
                        np.asarray(l["bias"], dtype=float), l["activation"], float(l.get("slope", 1.0)))
                  for l in d["layers"]]
        return cls(layers, float(d.get("dropout_rate", 0.0)))


@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple[int, ...] = (16,)
    activation: str = "tanh"
    learning_rate: float = 0.1
    momentum: float = 0.9
    epochs: int = 500
    batch_size: int = 32
    dropout_rate: float = 0.0
    test_fraction: float = 0.25
    seed: int = 0


@dataclass
class TrainReport:
    epochs: int
    final_loss: float
    accuracy: float
    per_cluster: dict[int, float]
    split_seed: int
    n_train: int
    n_test: int
    loss_trace: list[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "final_loss": self.final_loss, "accuracy": self.accuracy,
                "per_cluster": {str(k): v for k, v in sorted(self.per_cluster.items())},
                "split_seed": self.split_seed, "n_train": self.n_train, "n_test": self.n_test}


def stratified_split(labels, test_fraction: float, seed: int):
    """Per-class shuffle; each class keeps at least one row on both sides."""
    if not 0.0 < test_fraction < 1.0:
        raise DegenerateSplit("test fraction must lie in (0, 1)")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if len(idx) < 2:
            raise DegenerateSplit(f"cluster {c} has {len(idx)} row(s); need at least 2 to split")
        idx = rng.permutation(idx)
        n_test = min(len(idx) - 1, max(1, int(round(test_fraction * len(idx)))))
        test.extend(idx[:n_test])
        train.extend(idx[n_test:])
    return np.sort(np.array(train, dtype=int)), np.sort(np.array(test, dtype=int))


def per_class_accuracy(pred, labels) -> tuple[float, dict[int, float]]:
    pred, labels = np.asarray(pred), np.asarray(labels)
    per = {int(c): float(np.mean(pred[labels == c] == c)) for c in np.unique(labels)}
    return float(np.mean(pred == labels)), per


def train_mlp(X, y, n_classes: int, config: TrainConfig = TrainConfig(), split=None):
    """Train on a stratified split of ``(X, y)``; report accuracy on the held-out part."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if config.activation == "step":
        raise UntrainableActivation("step activation cannot be trained by gradient descent")
    if config.activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {config.activation!r}")
    train_idx, test_idx = split if split is not None else stratified_split(y, config.test_fraction, config.seed)
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise DegenerateSplit("empty train or test split")

    sizes = [X.shape[1], *config.hidden, n_classes]
    model = MlpModel.init(sizes, config.activation, config.seed, config.dropout_rate)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    drop_rng = np.random.default_rng([config.seed, 2])
    Xtr, ytr = X[train_idx], y[train_idx]
    velocity = [(np.zeros_like(l.w), np.zeros_like(l.b)) for l in model.layers]
    trace = []
    for _ in range(config.epochs):
        order = shuffle_rng.permutation(len(Xtr))
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            _, grads = model.loss_and_grads(Xtr[batch], ytr[batch], train=True, rng=drop_rng)
            for layer, (vw, vb), (gw, gb) in zip(model.layers, velocity, grads):
                vw *= config.momentum
                vw -= config.learning_rate * gw
                vb *= config.momentum
                vb -= config.learning_rate * gb
                layer.w += vw
                layer.b += vb
        trace.append(model.loss(Xtr, ytr))
    final = trace[-1] if trace else model.loss(Xtr, ytr)
    acc, per = per_class_accuracy(model.predict(X[test_idx]), y[test_idx])
    report = TrainReport(config.epochs, final, acc, per, config.seed, len(train_idx), len(test_idx), trace)
    return model, report
