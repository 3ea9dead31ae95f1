"""Loss, optimizer, the deterministic training loop, and the gradient checker.

Reproducibility contract: given the same seed, data and build, two training
runs produce bit-identical checkpoints. Shuffling uses a splitmix64 stream
derived from (seed, epoch) and a Fisher-Yates pass, so it does not depend
on any global RNG state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataio import PairedDataset, load_pair
from .errors import DataError, InvalidInputError, InvalidParameterError, NumericError
from .image import ImageTensor
from .model import ModelGrads, RetinaModel, backward, forward, model_param_arrays

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


@dataclass
class TrainConfig:
    """Hyperparameters of one training run (defaults reproduce the standard
    20-epoch protocol)."""

    epochs: int = 20
    batch_size: int = 8
    learning_rate: float = 1e-3
    seed: int = 42
    loss: str = "mse"
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise InvalidParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise InvalidParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise InvalidParameterError(
                f"learning_rate must be > 0, got {self.learning_rate}"
            )
        if self.loss != "mse":
            raise InvalidParameterError(f"unsupported loss {self.loss!r}")
        if self.optimizer != "adam":
            raise InvalidParameterError(f"unsupported optimizer {self.optimizer!r}")

    def summary(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "loss": self.loss,
            "optimizer": self.optimizer,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_epsilon": self.adam_epsilon,
        }


@dataclass
class OptimizerState:
    """Adam moment estimates, one array per parameter group, plus the step count."""

    first_moment: ModelGrads
    second_moment: ModelGrads
    step_count: int = 0

    @classmethod
    def initial(cls, dtype=np.float32) -> "OptimizerState":
        return cls(ModelGrads.zeros(dtype), ModelGrads.zeros(dtype), 0)


def mse_loss(pred: ImageTensor, target: ImageTensor) -> tuple[float, ImageTensor]:
    """Mean squared error over all samples and its gradient 2*(pred-target)/N."""
    if pred.data.shape != target.data.shape:
        raise InvalidInputError(
            f"prediction shape {pred.data.shape} does not match target "
            f"shape {target.data.shape}"
        )
    diff = pred.data - target.data
    loss = float(np.mean(diff * diff))
    grad = ImageTensor(diff * (2.0 / diff.size))
    return loss, grad


def adam_step(
    model: RetinaModel,
    grads: ModelGrads,
    state: OptimizerState,
    cfg: TrainConfig,
) -> tuple[RetinaModel, OptimizerState]:
    """One bias-corrected Adam update, elementwise over all 108 parameters.

    Functional: returns a new model and state. Non-finite gradients abort
    with the offending parameter group named.
    """
    for name, g in grads.arrays():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient in parameter group {name}")
    new_model = model.copy()
    t = state.step_count + 1
    bias1 = 1.0 - cfg.adam_beta1**t
    bias2 = 1.0 - cfg.adam_beta2**t
    new_m = ModelGrads(*(m.copy() for _, m in state.first_moment.arrays()))
    new_v = ModelGrads(*(v.copy() for _, v in state.second_moment.arrays()))
    params = model_param_arrays(new_model)
    packed = zip(params, grads.arrays(), new_m.arrays(), new_v.arrays())
    for (_, p), (_, g), (_, m), (_, v) in packed:
        m[...] = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g
        v[...] = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2
        p[...] = p - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)
    return new_model, OptimizerState(new_m, new_v, t)


def _mix64(x: int) -> int:
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class SplitMix64:
    """Tiny deterministic 64-bit PRNG (splitmix64 stream)."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix64(self._state)


def epoch_order(n: int, seed: int, epoch: int) -> list[int]:
    """Deterministic Fisher-Yates permutation of range(n) for one epoch."""
    rng = SplitMix64(_mix64(seed & _MASK64) ^ _mix64((epoch + 1) * _GOLDEN))
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.next() % (i + 1)
        order[i], order[j] = order[j], order[i]
    return order


def image_gradient(
    model: RetinaModel, low: ImageTensor, high: ImageTensor
) -> tuple[float, ModelGrads]:
    """Loss and parameter gradient for a single image pair."""
    pred, tape = forward(model, low)
    loss, grad = mse_loss(pred, high)
    return loss, backward(model, tape, grad)


def batch_gradient(
    model: RetinaModel, pairs: list[tuple[ImageTensor, ImageTensor]]
) -> tuple[float, ModelGrads]:
    """Mean loss and mean-of-per-image gradients over a batch, accumulated in
    a fixed order."""
    total = ModelGrads.zeros(np.float64)
    losses = []
    for low, high in pairs:
        loss, grads = image_gradient(model, low, high)
        losses.append(loss)
        for (_, acc), (_, g) in zip(total.arrays(), grads.arrays()):
            acc += g
    scale = 1.0 / len(pairs)
    dtype = model.smooth.kernels.dtype
    mean = ModelGrads(*((a * scale).astype(dtype) for _, a in total.arrays()))
    return float(np.mean(losses)), mean


def train(
    dataset: PairedDataset,
    cfg: TrainConfig,
    init: RetinaModel,
    *,
    preload: bool = False,
    log_fn=None,
    epoch_callback=None,
) -> tuple[RetinaModel, list[float]]:
    """Deterministic mini-batch training.

    Runs epochs x ceil(N / batch_size) Adam steps; the per-epoch pair order
    comes from epoch_order(), the final short batch is processed as-is, and
    the batch gradient is the mean of per-image gradients. Returns the
    trained model and the per-epoch mean loss history. ``log_fn`` (if given)
    receives one ``epoch=<i> mean_loss=<v>`` line per epoch;
    ``epoch_callback(epoch, model, mean_loss)`` supports per-epoch
    checkpointing. Any non-finite loss aborts with an epoch/batch diagnostic.
    """
    n = len(dataset)
    if n == 0:
        raise DataError("cannot train on an empty dataset")
    if preload:
        loaded = [load_pair(pair) for pair in dataset.pairs]
        fetch = loaded.__getitem__
    else:
        fetch = lambda i: load_pair(dataset.pairs[i])  # noqa: E731

    model = init.copy()
    state = OptimizerState.initial(model.smooth.kernels.dtype)
    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = epoch_order(n, cfg.seed, epoch)
        epoch_loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            batch_idx = order[start : start + cfg.batch_size]
            batch = [fetch(i) for i in batch_idx]
            loss, grads = batch_gradient(model, batch)
            if not math.isfinite(loss):
                raise NumericError(
                    f"non-finite loss {loss} at epoch {epoch}, "
                    f"batch starting at index {start}"
                )
            epoch_loss_sum += loss * len(batch)
            model, state = adam_step(model, grads, state, cfg)
        mean_loss = epoch_loss_sum / n
        history.append(mean_loss)
        if log_fn is not None:
            log_fn(f"epoch={epoch} mean_loss={mean_loss}")
        if epoch_callback is not None:
            epoch_callback(epoch, model, mean_loss)
    return model, history


@dataclass(frozen=True)
class GradCheckEntry:
    group: str
    index: tuple
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradCheckReport:
    """Per-parameter comparison of analytic vs central-finite-difference
    gradients of mse_loss(forward(model, img), target)."""

    entries: list[GradCheckEntry] = field(default_factory=list)
    epsilon: float = 1e-4

    @property
    def max_rel_error(self) -> float:
        return max(e.rel_error for e in self.entries)

    @property
    def worst(self) -> GradCheckEntry:
        return max(self.entries, key=lambda e: e.rel_error)

    def group_max(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for e in self.entries:
            out[e.group] = max(out.get(e.group, 0.0), e.rel_error)
        return out


def _rel_error(analytic: float, numeric: float) -> float:
    # Denominator floored so near-zero gradients are judged on absolute error.
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-6)


def grad_check(
    model: RetinaModel,
    img: ImageTensor,
    target: ImageTensor,
    epsilon: float = 1e-4,
    corruption: float = 0.0,
) -> GradCheckReport:
    """Check every parameter's analytic gradient against central finite
    differences, in double precision.

    ``corruption`` (debug knob, negative-control for the checker itself)
    adds that amount to the first smoothing-kernel analytic gradient before
    comparison.
    """
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be > 0, got {epsilon}")
    model64 = model.astype(np.float64)
    img64 = img.astype(np.float64)
    target64 = target.astype(np.float64)
    _, analytic = image_gradient(model64, img64, target64)
    if corruption:
        analytic.smooth_kernels[0, 0, 0] += corruption

    def loss_at(m: RetinaModel) -> float:
        pred, _ = forward(m, img64)
        return mse_loss(pred, target64)[0]

    report = GradCheckReport(epsilon=epsilon)
    param_groups = model_param_arrays(model64)
    grad_groups = analytic.arrays()
    for (name, params), (_, grads) in zip(param_groups, grad_groups):
        for index in np.ndindex(params.shape):
            original = params[index]
            params[index] = original + epsilon
            loss_plus = loss_at(model64)
            params[index] = original - epsilon
            loss_minus = loss_at(model64)
            params[index] = original
            numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
            analytic_value = float(grads[index])
            report.entries.append(
                GradCheckEntry(
                    group=name,
                    index=index,
                    analytic=analytic_value,
                    numeric=numeric,
                    rel_error=_rel_error(analytic_value, numeric),
                )
            )
    return report
