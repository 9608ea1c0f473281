"""Fully connected ReLU network with softmax output, trained by ADAM on cross-entropy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericError, TrainingError

PROB_FLOOR = 1e-12


@dataclass
class MlpModel:
    """Weights are (fan_in, fan_out); ``history`` records how the model was trained."""

    weights: list
    biases: list
    activation: str = "relu"
    history: dict = field(default_factory=dict)

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_features(self):
        return self.weights[0].shape[0]

    @property
    def n_classes(self):
        return self.weights[-1].shape[1]


class _FlatParams:
    """All weights and biases as views into one contiguous vector."""

    def __init__(self, sizes):
        self.sizes = list(sizes)
        shapes = []
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            shapes += [(a, b), (b,)]
        self.shapes = shapes
        total = sum(int(np.prod(s)) for s in shapes)
        self.vector = np.zeros(total)
        self.views = self._views(self.vector)

    def _views(self, vec):
        views, pos = [], 0
        for s in self.shapes:
            n = int(np.prod(s))
            views.append(vec[pos:pos + n].reshape(s))
            pos += n
        return views

    def like(self):
        vec = np.zeros_like(self.vector)
        return vec, self._views(vec)

    @property
    def weights(self):
        return self.views[0::2]

    @property
    def biases(self):
        return self.views[1::2]


def init_model(sizes, rng):
    """Fan-in scaled uniform weights, U(-sqrt(6/fan_in), +sqrt(6/fan_in)); zero biases."""
    weights, biases = [], []
    for a, b in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / a)
        weights.append(rng.uniform(-lim, lim, size=(a, b)))
        biases.append(np.zeros(b))
    return MlpModel(weights=weights, biases=biases)


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(weights, biases, x):
    """Pre-activations and activations of every layer; last entry is the logits."""
    acts, pres = [x], []
    a = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        pres.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    return pres, acts


def mlp_forward(model, x):
    """Class probabilities for one instance (Q,) or a batch (N, Q)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    if xb.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {xb.shape[1]}")
    a = xb
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = a @ w + b
        if not np.all(np.isfinite(a)):
            raise NumericError(f"non-finite activations in layer {i}")
        if i < last:
            a = np.maximum(a, 0.0)
    p = softmax(a)
    return p[0] if single else p


def mlp_predict(model, x):
    return np.argmax(mlp_forward(model, x), axis=-1)


def cross_entropy_loss(probabilities, labels):
    """Mean negative log-likelihood (natural log) of the true classes."""
    p = np.atleast_2d(np.asarray(probabilities, dtype=float))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    picked = p[np.arange(len(labels)), labels]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())


def _backward(weights, pres, acts, labels, grad_w, grad_b):
    """Gradients of the mean cross-entropy, written into grad_w/grad_b in place."""
    n = labels.shape[0]
    delta = softmax(pres[-1])
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    for i in range(len(weights) - 1, -1, -1):
        np.dot(acts[i].T, delta, out=grad_w[i])
        delta.sum(axis=0, out=grad_b[i])
        if i:
            delta = (delta @ weights[i].T) * (pres[i - 1] > 0)


def loss_and_grads(model, x, labels):
    """(loss, weight grads, bias grads) of the mean cross-entropy on a batch."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    pres, acts = _forward(model.weights, model.biases, x)
    gw = [np.zeros_like(w) for w in model.weights]
    gb = [np.zeros_like(b) for b in model.biases]
    _backward(model.weights, pres, acts, labels, gw, gb)
    loss = cross_entropy_loss(softmax(pres[-1]), labels)
    return loss, gw, gb


def mlp_train(x, y, n_classes, hidden=(10,) * 15, learning_rate=1e-3, batch_size=64,
              epochs=200, seed=0, beta1=0.9, beta2=0.999, eps=1e-8):
    """Mini-batch ADAM with per-epoch reshuffling; deterministic per seed.

    ``history["loss"]`` holds the full-training-set loss before training
    followed by its value after every epoch.
    """
    x = np.ascontiguousarray(x, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0 or y.shape != (x.shape[0],):
        raise ConfigError("MLP training needs a nonempty (N, Q) matrix and N labels")
    if np.any((y < 0) | (y >= n_classes)):
        raise ConfigError("labels outside [0, n_classes)")
    rng = np.random.default_rng(seed)
    sizes = [x.shape[1], *hidden, n_classes]
    init = init_model(sizes, rng)
    params = _FlatParams(sizes)
    for dst, src in zip(params.weights, init.weights):
        dst[...] = src
    grad_vec, grad_views = params.like()
    gw, gb = grad_views[0::2], grad_views[1::2]
    m = np.zeros_like(params.vector)
    v = np.zeros_like(params.vector)
    scratch = np.empty_like(params.vector)
    weights, biases = params.weights, params.biases

    def full_loss():
        pres, _ = _forward(weights, biases, x)
        return cross_entropy_loss(softmax(pres[-1]), y)

    losses = [full_loss()]
    step = 0
    n = x.shape[0]
    for epoch in range(epochs):
        order = rng.permutation(n)
        for bi, lo in enumerate(range(0, n, batch_size)):
            idx = order[lo:lo + batch_size]
            pres, acts = _forward(weights, biases, x[idx])
            _backward(weights, pres, acts, y[idx], gw, gb)
            if not np.all(np.isfinite(grad_vec)):
                raise TrainingError("non-finite gradient", epoch=epoch, batch=bi)
            step += 1
            m *= beta1
            m += (1.0 - beta1) * grad_vec
            v *= beta2
            np.multiply(grad_vec, grad_vec, out=scratch)
            v += (1.0 - beta2) * scratch
            # eps is applied to the bias-corrected second moment
            np.sqrt(v / (1.0 - beta2**step), out=scratch)
            scratch += eps
            params.vector -= (learning_rate / (1.0 - beta1**step)) * m / scratch
        loss = full_loss()
        if not np.isfinite(loss):
            raise TrainingError("non-finite loss", epoch=epoch, batch=bi)
        losses.append(loss)
    model = MlpModel(
        weights=[w.copy() for w in weights],
        biases=[b.copy() for b in biases],
        activation="relu",
        history={
            "epochs": epochs,
            "learning_rate": learning_rate,
            "batch_size": batch_size,
            "seed": seed,
            "loss": losses,
            "final_loss": losses[-1],
        },
    )
    return model


def gradient_check(model, x, label, step=1e-5):
    """Worst relative error between backprop and central-difference gradients.

    Relative error per parameter is |a - n| / max(|a| + |n|, 1e-10).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    label = np.atleast_1d(label)
    _, gw, gb = loss_and_grads(model, x, label)
    worst = 0.0
    for params, grads in ((model.weights, gw), (model.biases, gb)):
        for p, g in zip(params, grads):
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                i = it.multi_index
                orig = p[i]
                p[i] = orig + step
                up = cross_entropy_loss(mlp_forward(model, x), label)
                p[i] = orig - step
                down = cross_entropy_loss(mlp_forward(model, x), label)
                p[i] = orig
                num = (up - down) / (2 * step)
                err = abs(num - g[i]) / max(abs(num) + abs(g[i]), 1e-10)
                worst = max(worst, err)
    return worst


def mlp_to_dict(model):
    return {
        "kind": "mlp",
        "activation": model.activation,
        "layer_sizes": model.layer_sizes,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "history": model.history,
    }


def mlp_from_dict(d):
    return MlpModel(
        weights=[np.array(w, dtype=float).reshape(a, b)
                 for w, a, b in zip(d["weights"], d["layer_sizes"][:-1], d["layer_sizes"][1:])],
        biases=[np.array(b, dtype=float) for b in d["biases"]],
        activation=d.get("activation", "relu"),
        history=d.get("history", {}),
    )
