"""A small dense classifier in numpy: training, evaluation and saliency.

Hidden layers use leaky-ReLU with inverted dropout at train time; the
output is a 2-way softmax trained on cross-entropy plus an L2 penalty on
the weight matrices, optimised with Adam.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

FORMAT_VERSION = 1


@dataclass
class MLPConfig:
    hidden: tuple = (256, 128, 64)
    n_classes: int = 2
    leaky_slope: float = 0.01
    dropout: float = 0.01
    l2: float = 1e-4
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 30
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    rng_seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if any(h <= 0 for h in self.hidden) or self.n_classes < 2:
            raise ValueError("layer sizes must be positive")
        for name in ("leaky_slope", "learning_rate", "beta1", "beta2"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if not 0 <= self.dropout < 1 or self.l2 < 0:
            raise ValueError("dropout must lie in [0, 1) and l2 be non-negative")
        if self.batch_size <= 0 or self.epochs < 0:
            raise ValueError("batch_size must be positive and epochs non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> MLPConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became non-finite in epoch {epoch}")
        self.epoch = epoch


@dataclass
class MLPModel:
    weights: list  # weights[i] has shape (fan_in, fan_out)
    biases: list
    config: MLPConfig
    history: list = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]


def init_model(input_dim: int, config: MLPConfig, rng=None) -> MLPModel:
    """He-uniform weights (limit sqrt(6 / fan_in)) and zero biases."""
    rng = np.random.default_rng(config.rng_seed) if rng is None else rng
    sizes = [input_dim, *config.hidden, config.n_classes]
    ws, bs = [], []
    for a, b in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / a)
        ws.append(rng.uniform(-lim, lim, size=(a, b)))
        bs.append(np.zeros(b))
    return MLPModel(ws, bs, config)


def leaky_relu(x, slope=0.01):
    return np.where(x > 0, x, slope * x)


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(model: MLPModel, X, training: bool, rng):
    """Returns probabilities plus the cache needed for backpropagation."""
    cfg = model.config
    pre, masks, acts = [], [], [X]
    h = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W + b
        if i == last:
            return softmax(z), (pre, masks, acts)
        pre.append(z)
        h = leaky_relu(z, cfg.leaky_slope)
        if training and cfg.dropout > 0:
            m = (rng.random(h.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
            h = h * m
        else:
            m = None
        masks.append(m)
        acts.append(h)


def forward(model: MLPModel, x, training: bool = False, rng=None) -> np.ndarray:
    """Class probabilities for one input vector or a batch (rows)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != model.input_dim:
        raise ValueError(f"input has dimension {X.shape[1]}, model expects {model.input_dim}")
    if training and rng is None:
        rng = np.random.default_rng(model.config.rng_seed)
    p, _ = _forward(model, X, training, rng)
    return p[0] if single else p


def _backward(model: MLPModel, cache, dz):
    """Backpropagate dL/d(logits) ``dz``; returns weight/bias grads and dL/dX."""
    cfg = model.config
    pre, masks, acts = cache
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        gw[i] = acts[i].T @ dz
        gb[i] = dz.sum(axis=0)
        dh = dz @ model.weights[i].T
        if i == 0:
            return gw, gb, dh
        if masks[i - 1] is not None:
            dh = dh * masks[i - 1]
        dz = dh * np.where(pre[i - 1] > 0, 1.0, cfg.leaky_slope)


def loss_and_grads(model: MLPModel, X, y, training: bool = False, rng=None):
    """Mean cross-entropy plus l2 * sum of squared weights, and its gradients."""
    p, cache = _forward(model, X, training, rng)
    n = len(X)
    onehot = np.zeros_like(p)
    onehot[np.arange(n), y] = 1
    ce = -np.log(np.clip(p[np.arange(n), y], 1e-300, None)).mean()
    reg = model.config.l2 * sum((W * W).sum() for W in model.weights)
    gw, gb, _ = _backward(model, cache, (p - onehot) / n)
    gw = [g + 2 * model.config.l2 * W for g, W in zip(gw, model.weights)]
    return ce + reg, gw, gb, p


def predicted_class_input_gradient(model: MLPModel, X) -> np.ndarray:
    """d p_c / d x for each row, c being the model's predicted class (no dropout)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    p, cache = _forward(model, X, False, None)
    c = p.argmax(axis=1)
    pc = p[np.arange(len(X)), c]
    # d p_c / d z_j = p_c (delta_cj - p_j)
    dz = -pc[:, None] * p
    dz[np.arange(len(X)), c] += pc
    _, _, dx = _backward(model, cache, dz)
    return dx


def train(X, y, config: Optional[MLPConfig] = None, X_val=None, y_val=None) -> MLPModel:
    """Adam on shuffled mini-batches; every random choice flows from config.rng_seed."""
    config = config or MLPConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.rng_seed)
    model = init_model(X.shape[1], config, rng)
    params = model.weights + model.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    step = 0
    b1, b2 = config.beta1, config.beta2
    for epoch in range(config.epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for lo in range(0, len(X), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            loss, gw, gb, _ = loss_and_grads(model, X[idx], y[idx], True, rng)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            total += loss * len(idx)
            step += 1
            for j, g in enumerate(gw + gb):
                m[j] = b1 * m[j] + (1 - b1) * g
                v[j] = b2 * v[j] + (1 - b2) * g * g
                mhat = m[j] / (1 - b1 ** step)
                vhat = v[j] / (1 - b2 ** step)
                params[j] -= config.learning_rate * mhat / (np.sqrt(vhat) + config.adam_eps)
        rec = {"epoch": epoch + 1, "train_loss": float(total / len(X)),
               "train_accuracy": evaluate(model, X, y).accuracy}
        if X_val is not None and len(X_val):
            ev = evaluate(model, X_val, y_val)
            rec["val_loss"] = ev.loss
            rec["val_accuracy"] = ev.accuracy
        if not np.isfinite(rec["train_loss"]):
            raise TrainingDiverged(epoch)
        model.history.append(rec)
    return model


@dataclass
class Evaluation:
    accuracy: float
    mcc: float
    confusion: np.ndarray  # rows true class, columns predicted
    loss: float = float("nan")


def matthews(confusion) -> float:
    """MCC of a 2x2 confusion matrix (class 1 positive); 0 if undefined."""
    (tn, fp), (fn, tp) = np.asarray(confusion, dtype=np.float64)
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if den == 0:
        return 0.0
    return float((tp * tn - fp * fn) / np.sqrt(den))


def evaluate(model: MLPModel, X, y) -> Evaluation:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("empty test set")
    p = forward(model, X)
    pred = p.argmax(axis=1)
    conf = np.zeros((2, 2), dtype=np.int64)
    np.add.at(conf, (y, pred), 1)
    loss = float(-np.log(np.clip(p[np.arange(len(y)), y], 1e-300, None)).mean())
    return Evaluation(float((pred == y).mean()), matthews(conf), conf, loss)


@dataclass
class CVReport:
    accuracy_mean: float
    accuracy_std: float
    mcc_mean: float
    mcc_std: float
    folds: list
    models: list = field(repr=False, default_factory=list)

    def to_dict(self, pair=None, seeds=None) -> dict:
        return {"pair": pair, "accuracyMean": self.accuracy_mean, "accuracyStd": self.accuracy_std,
                "mccMean": self.mcc_mean, "mccStd": self.mcc_std, "seeds": seeds,
                "folds": self.folds}


def cross_validate(dataset, config: Optional[MLPConfig] = None, jobs: int = 1) -> CVReport:
    """Train one model per fold (that fold held out) and aggregate test scores.

    Fold i trains with seed ``config.rng_seed + i``.
    """
    config = config or MLPConfig()
    X = dataset.X
    y = dataset.labels

    def one(i):
        tr, te = dataset.split(i)
        cfg = MLPConfig.from_dict({**config.to_dict(), "rng_seed": config.rng_seed + i})
        try:
            model = train(X[tr], y[tr], cfg, X[te], y[te])
        except TrainingDiverged as exc:
            raise RuntimeError(f"fold {i}: {exc}") from exc
        ev = evaluate(model, X[te], y[te])
        return model, {"fold": i, "accuracy": ev.accuracy, "mcc": ev.mcc,
                       "confusion": ev.confusion.tolist(), "seed": cfg.rng_seed}

    k = len(dataset.folds)
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(jobs) as pool:
            out = list(pool.map(one, range(k)))
    else:
        out = [one(i) for i in range(k)]
    acc = np.array([r["accuracy"] for _, r in out])
    mcc = np.array([r["mcc"] for _, r in out])
    return CVReport(float(acc.mean()), float(acc.std()), float(mcc.mean()), float(mcc.std()),
                    [r for _, r in out], [m for m, _ in out])


@dataclass
class SaliencyReport:
    matrix: np.ndarray  # (L, 64), max-normalised
    threshold: float
    letter_histogram: np.ndarray  # entries above threshold per alphabet index
    position_histogram: np.ndarray  # entries above threshold per position


def gradient_saliency(models, test_sets, length: int, threshold: float = 1e-4) -> SaliencyReport:
    """Mean absolute input gradient of the predicted-class probability.

    Averaged over each model's test inputs, then over models, and divided by
    the largest entry.
    """
    models = list(models)
    test_sets = list(test_sets)
    if not models:
        raise ValueError("no models given")
    if len(test_sets) != len(models):
        raise ValueError("need one test set per model")
    acc = np.zeros(length * 64)
    for model, X in zip(models, test_sets):
        if model.input_dim != length * 64:
            raise ValueError("model input size does not match the signature length")
        acc += np.abs(predicted_class_input_gradient(model, X)).mean(axis=0)
    acc /= len(models)
    mx = acc.max()
    mat = (acc / mx if mx > 0 else acc).reshape(length, 64)
    above = mat > threshold
    return SaliencyReport(mat, threshold, above.sum(axis=0), above.sum(axis=1))


def save_model(model: MLPModel, path) -> None:
    arrays = {f"w{i}": w for i, w in enumerate(model.weights)}
    arrays.update({f"b{i}": b for i, b in enumerate(model.biases)})
    meta = {"format_version": FORMAT_VERSION, "config": model.config.to_dict(), "history": model.history}
    np.savez(path, meta=np.array(json.dumps(meta)), **arrays)


def load_model(path) -> MLPModel:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
        k = sum(1 for name in z.files if name.startswith("w"))
        ws = [z[f"w{i}"] for i in range(k)]
        bs = [z[f"b{i}"] for i in range(k)]
    return MLPModel(ws, bs, MLPConfig.from_dict(meta["config"]), meta["history"])
