"""Trainable forecasters: a from-scratch single-layer LSTM regressor plus
deterministic baselines.

The LSTM uses the standard gate recurrence over the concatenated input
[x_t, h_{t-1}] with zero-initialized h_0, c_0:

    i = sigmoid(W_i z + b_i)        input gate
    f = sigmoid(W_f z + b_f)        forget gate
    g = tanh(W_g z + b_g)           cell candidate
    o = sigmoid(W_o z + b_o)        output gate
    c = f * c_prev + i * g
    h = o * tanh(c)

and a dense head y = w_out . h_W + b_out. Training is mini-batch Adam on
MSE with per-epoch shuffling, optional early stopping with best-weight
restore, and scaling fitted on the training partition only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.special import expit as sigmoid

from .errors import TrainingError
from .windowing import SequenceSet

SCALING_KINDS = ("none", "minmax", "zscore")

PARAM_KEYS = ("w_i", "w_f", "w_g", "w_o", "b_i", "b_f", "b_g", "b_o", "w_out", "b_out")


@dataclass(frozen=True)
class Scaler:
    """Affine value scaler fitted on training data only.

    transform(x) = (x - shift) / scale. Frozen after fitting, so the test
    partition can never update its parameters. Degenerate fits (constant
    data) fall back to scale 1 and stay invertible.
    """

    kind: str
    shift: float
    scale: float

    @classmethod
    def fit(cls, kind: str, train: SequenceSet) -> "Scaler":
        if kind not in SCALING_KINDS:
            raise TrainingError(f"unknown scaling kind {kind!r}")
        if kind == "none":
            return cls(kind=kind, shift=0.0, scale=1.0)
        pool = np.concatenate([train.inputs().ravel(), train.targets()])
        if kind == "minmax":
            lo, hi = float(pool.min()), float(pool.max())
            return cls(kind=kind, shift=lo, scale=(hi - lo) or 1.0)
        mean, std = float(pool.mean()), float(pool.std())
        return cls(kind=kind, shift=mean, scale=std or 1.0)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.shift) / self.scale

    def inverse_transform(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) * self.scale + self.shift


class LstmModel:
    """Single-layer LSTM with H hidden units and a scalar dense head.

    Parameters live in a dict of float64 arrays: four gate matrices of
    shape (H, 1+H), four gate biases of shape (H,), head weights (H,) and
    head bias (1,).
    """

    def __init__(self, hidden_size: int, params: dict[str, np.ndarray] | None = None):
        if hidden_size < 1:
            raise TrainingError(f"hidden_size must be >= 1, got {hidden_size}")
        self.hidden_size = hidden_size
        if params is None:
            h = hidden_size
            params = {}
            for gate in ("i", "f", "g", "o"):
                params[f"w_{gate}"] = np.zeros((h, 1 + h))
                params[f"b_{gate}"] = np.zeros(h)
            params["w_out"] = np.zeros(h)
            params["b_out"] = np.zeros(1)
        self.params = {k: np.asarray(v, dtype=float) for k, v in params.items()}
        self._check_shapes()

    def _check_shapes(self) -> None:
        h = self.hidden_size
        expected = {f"w_{g}": (h, 1 + h) for g in "ifgo"}
        expected.update({f"b_{g}": (h,) for g in "ifgo"})
        expected["w_out"] = (h,)
        expected["b_out"] = (1,)
        for key in PARAM_KEYS:
            if key not in self.params:
                raise TrainingError(f"missing parameter {key}")
            if self.params[key].shape != expected[key]:
                raise TrainingError(
                    f"parameter {key} has shape {self.params[key].shape}, "
                    f"expected {expected[key]}"
                )

    @classmethod
    def initialize(cls, hidden_size: int, rng: np.random.Generator) -> "LstmModel":
        """Uniform(-k, k) weights with k = 1/sqrt(H); zero biases except the
        forget-gate bias, which starts at 1 for gradient stability."""
        h = hidden_size
        k = 1.0 / np.sqrt(h)
        params = {}
        for gate in ("i", "f", "g", "o"):
            params[f"w_{gate}"] = rng.uniform(-k, k, size=(h, 1 + h))
            params[f"b_{gate}"] = np.zeros(h)
        params["b_f"] = np.ones(h)
        params["w_out"] = rng.uniform(-k, k, size=h)
        params["b_out"] = np.zeros(1)
        return cls(hidden_size, params)

    def copy(self) -> "LstmModel":
        return LstmModel(
            self.hidden_size, {k: v.copy() for k, v in self.params.items()}
        )

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        """Predict a scalar per row of a (batch, W) input matrix."""
        y, _ = _forward_cached(self.params, np.atleast_2d(np.asarray(inputs, float)))
        if not np.all(np.isfinite(y)):
            raise TrainingError("non-finite value in forward pass")
        return y


def lstm_forward(model: LstmModel, inputs: np.ndarray) -> float:
    """Run one input window through the network; deterministic."""
    return float(model.forward(np.asarray(inputs, dtype=float).reshape(1, -1))[0])


# Gate matrices are stacked row-wise in the order (i, f, o, g) for the hot
# loop: one matmul per step, one sigmoid over the first three blocks and one
# tanh over the last.
def _stack(params: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    w = np.vstack([params["w_i"], params["w_f"], params["w_o"], params["w_g"]])
    b = np.concatenate([params["b_i"], params["b_f"], params["b_o"], params["b_g"]])
    return w, b


def _forward_cached(params: dict[str, np.ndarray], x: np.ndarray):
    """Batched forward pass keeping per-step activations for BPTT."""
    batch, steps = x.shape
    h_size = params["w_out"].shape[0]
    w_stack, b_stack = _stack(params)
    w_stack_t = w_stack.T
    h = np.zeros((batch, h_size))
    c = np.zeros((batch, h_size))
    caches = []
    for t in range(steps):
        z = np.concatenate([x[:, t : t + 1], h], axis=1)
        pre = z @ w_stack_t + b_stack
        act = np.empty_like(pre)
        act[:, : 3 * h_size] = sigmoid(pre[:, : 3 * h_size])
        act[:, 3 * h_size :] = np.tanh(pre[:, 3 * h_size :])
        i = act[:, :h_size]
        f = act[:, h_size : 2 * h_size]
        o = act[:, 2 * h_size : 3 * h_size]
        g = act[:, 3 * h_size :]
        c_prev = c
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        caches.append((z, act, c_prev, tc))
    y = h @ params["w_out"] + params["b_out"][0]
    return y, (caches, h, w_stack)


def loss_and_gradients(
    params: dict[str, np.ndarray], x: np.ndarray, targets: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch-mean MSE and its analytic gradient for every parameter."""
    batch = x.shape[0]
    h_size = params["w_out"].shape[0]
    y, (caches, h_last, w_stack) = _forward_cached(params, x)
    resid = y - targets
    loss = float(np.mean(resid**2))

    dw_stack = np.zeros_like(w_stack)
    db_stack = np.zeros(4 * h_size)
    dy = 2.0 * resid / batch
    dw_out = h_last.T @ dy
    db_out = dy.sum()
    dh = np.outer(dy, params["w_out"])
    dc = np.zeros_like(dh)
    da = np.empty((batch, 4 * h_size))
    for t in range(len(caches) - 1, -1, -1):
        z, act, c_prev, tc = caches[t]
        i = act[:, :h_size]
        f = act[:, h_size : 2 * h_size]
        o = act[:, 2 * h_size : 3 * h_size]
        g = act[:, 3 * h_size :]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc**2)
        da[:, :h_size] = (dc * g) * i * (1.0 - i)
        da[:, h_size : 2 * h_size] = (dc * c_prev) * f * (1.0 - f)
        da[:, 2 * h_size : 3 * h_size] = do * o * (1.0 - o)
        da[:, 3 * h_size :] = (dc * i) * (1.0 - g**2)
        dw_stack += da.T @ z
        db_stack += da.sum(axis=0)
        dz = da @ w_stack
        dh = dz[:, 1:]
        dc = dc * f
    grads = {
        "w_i": dw_stack[:h_size],
        "w_f": dw_stack[h_size : 2 * h_size],
        "w_o": dw_stack[2 * h_size : 3 * h_size],
        "w_g": dw_stack[3 * h_size :],
        "b_i": db_stack[:h_size],
        "b_f": db_stack[h_size : 2 * h_size],
        "b_o": db_stack[2 * h_size : 3 * h_size],
        "b_g": db_stack[3 * h_size :],
        "w_out": dw_out,
        "b_out": np.array([db_out]),
    }
    return loss, grads


class _Adam:
    """Adam with the usual bias-corrected first/second moments."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for key, p in params.items():
            gr = grads[key]
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * gr
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * gr**2
            p -= self.lr * (self.m[key] / c1) / (np.sqrt(self.v[key] / c2) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run."""

    epochs: int
    learning_rate: float = 0.001
    batch_size: int = 32
    early_stopping: bool = False
    patience: int = 10
    seed: int | None = None
    scaling: str = "zscore"

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise TrainingError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise TrainingError("learning_rate must be positive")
        if self.batch_size < 1:
            raise TrainingError("batch_size must be >= 1")
        if self.scaling not in SCALING_KINDS:
            raise TrainingError(f"unknown scaling kind {self.scaling!r}")
        if self.early_stopping:
            if self.patience < 1:
                raise TrainingError("patience must be >= 1")
            if self.patience >= self.epochs:
                raise TrainingError(
                    f"patience ({self.patience}) must be < epochs ({self.epochs}) "
                    "when early stopping is on"
                )

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "early_stopping": self.early_stopping,
            "patience": self.patience,
            "seed": self.seed,
            "scaling": self.scaling,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(
            epochs=int(d["epochs"]),
            learning_rate=float(d.get("learning_rate", 0.001)),
            batch_size=int(d.get("batch_size", 32)),
            early_stopping=bool(d.get("early_stopping", False)),
            patience=int(d.get("patience", 10)),
            seed=d.get("seed"),
            scaling=d.get("scaling", "zscore"),
        )


@dataclass(frozen=True, eq=False)
class TrainOutcome:
    """Trained model + scaler and the per-epoch loss record.

    optimal_epoch is the epoch (1-based) of the best monitored loss:
    validation MSE when a validation set exists, training MSE when early
    stopping runs without one, and simply the last epoch when nothing is
    monitored.
    """

    model: LstmModel
    scaler: Scaler
    train_loss_history: tuple[float, ...]
    val_loss_history: Optional[tuple[float, ...]]
    optimal_epoch: int
    last_epoch: int


def train(
    train_set: SequenceSet,
    val_set: Optional[SequenceSet],
    cfg: TrainConfig,
    hidden_size: int = 64,
) -> TrainOutcome:
    """Mini-batch Adam on MSE over the (scaled) training pairs.

    The scaler is fitted on the training partition only and applied to all
    partitions. With early stopping on, the monitor is the validation MSE
    when `val_set` is given and the epoch training MSE otherwise; training
    halts after `patience` epochs without improvement and the best-epoch
    weights are restored. Fully deterministic for a fixed seed.
    """
    if len(train_set) == 0:
        raise TrainingError("empty training set")
    if cfg.early_stopping and val_set is not None and len(val_set) == 0:
        raise TrainingError("early stopping requires a non-empty monitor set")

    scaler = Scaler.fit(cfg.scaling, train_set)
    x_train = scaler.transform(train_set.inputs())
    y_train = scaler.transform(train_set.targets())
    x_val = y_val = None
    if val_set is not None:
        x_val = scaler.transform(val_set.inputs())
        y_val = scaler.transform(val_set.targets())

    rng = np.random.default_rng(cfg.seed)
    model = LstmModel.initialize(hidden_size, rng)
    adam = _Adam(model.params, cfg.learning_rate)

    n = x_train.shape[0]
    train_hist: list[float] = []
    val_hist: list[float] = []
    monitor_hist: list[float] = []
    best_monitor = np.inf
    best_epoch = 0
    best_params: dict[str, np.ndarray] | None = None
    wait = 0
    last_epoch = 0

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        sq_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = loss_and_gradients(model.params, x_train[idx], y_train[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"training diverged at epoch {epoch} (loss={loss})")
            adam.step(model.params, grads)
            sq_sum += loss * idx.shape[0]
        epoch_train_mse = sq_sum / n
        train_hist.append(epoch_train_mse)

        if x_val is not None:
            preds, _ = _forward_cached(model.params, x_val)
            val_mse = float(np.mean((preds - y_val) ** 2))
            if not np.isfinite(val_mse):
                raise TrainingError(f"validation loss diverged at epoch {epoch}")
            val_hist.append(val_mse)
            monitor = val_mse
        else:
            monitor = epoch_train_mse
        monitor_hist.append(monitor)
        last_epoch = epoch

        if monitor < best_monitor:
            best_monitor = monitor
            best_epoch = epoch
            wait = 0
            if cfg.early_stopping:
                best_params = {k: v.copy() for k, v in model.params.items()}
        else:
            wait += 1
            if cfg.early_stopping and wait >= cfg.patience:
                break

    if cfg.early_stopping and best_params is not None:
        model = LstmModel(hidden_size, best_params)

    if val_set is not None or cfg.early_stopping:
        optimal_epoch = best_epoch
    else:
        optimal_epoch = last_epoch

    return TrainOutcome(
        model=model,
        scaler=scaler,
        train_loss_history=tuple(train_hist),
        val_loss_history=tuple(val_hist) if x_val is not None else None,
        optimal_epoch=optimal_epoch,
        last_epoch=last_epoch,
    )


def predict(model: LstmModel, scaler: Scaler, seqs: SequenceSet) -> np.ndarray:
    """One prediction per pair, inverse-scaled back to original units."""
    if len(seqs) == 0:
        return np.zeros(0)
    outputs = model.forward(scaler.transform(seqs.inputs()))
    return scaler.inverse_transform(outputs)


def save_checkpoint(outcome: TrainOutcome, path) -> None:
    """Write model parameters, scaler, and epoch record as JSON."""
    payload = {
        "hidden_size": outcome.model.hidden_size,
        "params": {k: v.tolist() for k, v in outcome.model.params.items()},
        "scaler": {
            "kind": outcome.scaler.kind,
            "shift": outcome.scaler.shift,
            "scale": outcome.scaler.scale,
        },
        "optimal_epoch": outcome.optimal_epoch,
        "last_epoch": outcome.last_epoch,
        "train_loss_history": list(outcome.train_loss_history),
        "val_loss_history": (
            list(outcome.val_loss_history)
            if outcome.val_loss_history is not None
            else None
        ),
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path) -> TrainOutcome:
    """Inverse of save_checkpoint; restores an identical TrainOutcome."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    model = LstmModel(
        int(payload["hidden_size"]),
        {k: np.asarray(v, dtype=float) for k, v in payload["params"].items()},
    )
    scaler = Scaler(
        kind=payload["scaler"]["kind"],
        shift=float(payload["scaler"]["shift"]),
        scale=float(payload["scaler"]["scale"]),
    )
    val_hist = payload["val_loss_history"]
    return TrainOutcome(
        model=model,
        scaler=scaler,
        train_loss_history=tuple(payload["train_loss_history"]),
        val_loss_history=tuple(val_hist) if val_hist is not None else None,
        optimal_epoch=int(payload["optimal_epoch"]),
        last_epoch=int(payload["last_epoch"]),
    )


def write_loss_history(outcome: TrainOutcome, path) -> None:
    """Per-epoch loss record as CSV: epoch,train_mse[,val_mse]."""
    has_val = outcome.val_loss_history is not None
    lines = ["epoch,train_mse,val_mse" if has_val else "epoch,train_mse"]
    for i, train_mse in enumerate(outcome.train_loss_history, start=1):
        if has_val:
            lines.append(f"{i},{train_mse!r},{outcome.val_loss_history[i - 1]!r}")
        else:
            lines.append(f"{i},{train_mse!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


GradFn = Callable[[dict[str, np.ndarray], np.ndarray, np.ndarray], tuple[float, dict]]


def gradient_check(
    model: LstmModel,
    batch: SequenceSet,
    epsilon: float = 1e-5,
    grad_fn: GradFn | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks every parameter of the batch-MSE gradient; the relative error
    denominator is max(|analytic|, |numeric|, 1e-8). Restricted to small
    models (H <= 8, W <= 6) to keep the finite differences well
    conditioned. `grad_fn` substitutes the analytic gradient, which lets
    tests verify that a broken gradient is detected.
    """
    if model.hidden_size > 8:
        raise TrainingError("gradient_check requires hidden_size <= 8")
    if batch.config.window_size > 6:
        raise TrainingError("gradient_check requires window_size <= 6")
    if len(batch) == 0:
        raise TrainingError("gradient_check requires a non-empty batch")
    x = batch.inputs()
    y = batch.targets()
    fn = grad_fn if grad_fn is not None else loss_and_gradients
    _, grads = fn(model.params, x, y)

    max_rel = 0.0
    for key in PARAM_KEYS:
        arr = model.params[key]
        for idx in range(arr.size):
            orig = arr.flat[idx]
            arr.flat[idx] = orig + epsilon
            up, _ = _forward_cached(model.params, x)
            arr.flat[idx] = orig - epsilon
            down, _ = _forward_cached(model.params, x)
            arr.flat[idx] = orig
            numeric = (np.mean((up - y) ** 2) - np.mean((down - y) ** 2)) / (2 * epsilon)
            analytic = grads[key].flat[idx]
            denom = max(abs(analytic), abs(numeric), 1e-8)
            max_rel = max(max_rel, abs(analytic - numeric) / denom)
    return max_rel


def baseline_persistence(seqs: SequenceSet) -> np.ndarray:
    """Predict each target as the last observation of its input window."""
    if len(seqs) == 0:
        raise TrainingError("persistence baseline requires a non-empty set")
    return seqs.inputs()[:, -1].copy()


def baseline_linear_ar(train_set: SequenceSet, eval_set: SequenceSet) -> np.ndarray:
    """Least-squares linear autoregression of order W with intercept.

    Solves the normal equations directly; on a singular or numerically
    degenerate system, retries with an L2 penalty of 1e-8 on the
    non-intercept coefficients.
    """
    w = train_set.config.window_size
    if len(train_set) < w + 1:
        raise TrainingError(
            f"insufficient training pairs: need >= {w + 1}, have {len(train_set)}"
        )
    x = np.hstack([np.ones((len(train_set), 1)), train_set.inputs()])
    y = train_set.targets()
    xtx = x.T @ x
    xty = x.T @ y
    beta = None
    try:
        if np.linalg.cond(xtx) < 1e12:
            beta = np.linalg.solve(xtx, xty)
    except np.linalg.LinAlgError:
        beta = None
    if beta is None or not np.all(np.isfinite(beta)):
        penalty = np.eye(w + 1) * 1e-8
        penalty[0, 0] = 0.0
        try:
            beta = np.linalg.solve(xtx + penalty, xty)
        except np.linalg.LinAlgError as exc:
            raise TrainingError(f"linear AR fit rank failure: {exc}") from exc
        if not np.all(np.isfinite(beta)):
            raise TrainingError("linear AR fit rank failure: non-finite solution")
    if len(eval_set) == 0:
        return np.zeros(0)
    x_eval = np.hstack([np.ones((len(eval_set), 1)), eval_set.inputs()])
    return x_eval @ beta
