"""RMSE training loop, by-image cross-validation and map synthesis."""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError, InvalidInputError
from ..glcm import FeatureMap
from ..image_core import PatchSet, QuantizedImage, extract_patches
from ..rng import Stream, derive_seed
from .model import RADSYNTH_FILTERS, CnnModel, build_radsynth

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Optimisation settings.

    Momentum SGD starting at 0.01 and halving every 10 epochs, minibatches
    of 2000 patches, 50 epochs, two by-image folds.
    """

    minibatch: int = 2000
    epochs: int = 50
    learning_rate: float = 0.01
    momentum: float = 0.9
    lr_step_epochs: int = 10
    lr_decay: float = 0.5
    folds: int = 2
    seed: int = 7
    loss: str = "rmse"
    filters: tuple = RADSYNTH_FILTERS
    dropout: float = 0.2

    def __post_init__(self):
        if self.minibatch < 1:
            raise ConfigError("minibatch must be >= 1")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.loss != "rmse":
            raise ConfigError(f"only the rmse loss is supported, got {self.loss!r}")
        self.filters = tuple(int(f) for f in self.filters)

    def lr_at(self, epoch):
        return self.learning_rate * self.lr_decay ** (epoch // self.lr_step_epochs)

    def to_dict(self):
        d = asdict(self)
        d["filters"] = list(self.filters)
        return d


def rmse_loss(pred, target):
    """Root-mean-squared error and its gradient with respect to ``pred``.

    The gradient divides by ``max(loss, 1e-12)`` so a perfect fit yields a
    zero gradient instead of NaN.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.ndim != 1:
        raise InvalidInputError(f"pred and target must be equal-length vectors, got "
                                f"{pred.shape} and {target.shape}")
    b = pred.shape[0]
    if b == 0:
        raise InvalidInputError("rmse of an empty batch")
    diff = pred - target
    loss = float(np.sqrt(np.mean(diff * diff)))
    return loss, diff / (b * max(loss, 1e-12))


def normalize_patches(patches, g):
    """Levels to [0, 1] float32, shaped (n, P, P, 1)."""
    x = np.asarray(patches, dtype=np.float32) / np.float32(g - 1)
    return x[..., None]


class SGD:
    """Momentum SGD: ``v = mu * v + grad``, ``p -= lr * v``."""

    def __init__(self, model: CnnModel, momentum=0.9):
        self.model = model
        self.momentum = momentum
        self.velocity = {
            (i, name): np.zeros_like(p) for i, name, p in model.parameters()
        }

    def step(self, grads, lr):
        for i, name, p in self.model.parameters():
            v = self.velocity[(i, name)]
            v *= self.momentum
            v += grads[(i, name)]
            p -= np.asarray(lr, dtype=p.dtype) * v


@dataclass
class HistoryRow:
    epoch: int
    fold: int
    train_rmse: float
    learning_rate: float
    seconds: float


def fit_model(model: CnnModel, x, y, config: TrainConfig, stream: Stream, fold=0,
              history=None, callback=None):
    """Minibatch training of ``model`` on normalized patches ``x`` and targets ``y``.

    Samples are reshuffled every epoch from ``stream``; dropout masks draw
    from a child stream. Returns the per-epoch history rows.
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n == 0:
        raise InvalidInputError("no training samples")
    history = [] if history is None else history
    shuffle = stream.spawn()
    drop = stream.spawn()
    opt = SGD(model, config.momentum)
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        lr = config.lr_at(epoch)
        order = shuffle.permutation(n)
        sq = 0.0
        for s in range(0, n, config.minibatch):
            idx = np.sort(order[s : s + config.minibatch])
            if len(idx) < 2 and n >= 2:
                continue  # batch statistics need two samples
            pred = model.forward(x[idx], training=True, rng=drop)
            loss, grad = rmse_loss(pred, y[idx])
            sq += loss * loss * len(idx)
            opt.step(model.backward(grad), lr)
        row = HistoryRow(epoch, fold, float(np.sqrt(sq / n)), lr, time.perf_counter() - t0)
        history.append(row)
        log.info("fold %d epoch %d rmse %.5f lr %.5g (%.1fs)", fold, epoch, row.train_rmse,
                 lr, row.seconds)
        if callback is not None:
            callback(row)
    return history


def fold_assignment(n_images, folds, seed):
    """Image indices per fold from a seeded shuffle; every image in exactly one fold."""
    if n_images < folds:
        raise ConfigError(f"{n_images} images cannot be split into {folds} folds")
    perm = Stream(derive_seed(seed, 0)).permutation(n_images)
    return [sorted(int(i) for i in perm[k::folds]) for k in range(folds)]


@dataclass
class TrainResult:
    models: list[CnnModel]
    history: list[HistoryRow]
    folds: list[list[int]]
    config: TrainConfig
    g: int = 64
    patch_size: int = 5
    extra: dict = field(default_factory=dict)

    def held_out_model(self, image_index):
        """The model that never saw ``image_index`` during training."""
        for k, members in enumerate(self.folds):
            if image_index in members:
                return self.models[k]
        raise KeyError(image_index)

    def history_csv(self):
        return history_csv(self.history)


def history_csv(rows, timing=True):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "fold", "train_rmse", "learning_rate", "seconds"])
    for r in rows:
        w.writerow([r.epoch, r.fold, repr(r.train_rmse), repr(r.learning_rate),
                    f"{r.seconds:.3f}" if timing else ""])
    return buf.getvalue()


def train(dataset: list[PatchSet], config: TrainConfig | None = None, g=64,
          callback=None) -> TrainResult:
    """Cross-validated training, one model per fold.

    ``dataset`` holds one labelled PatchSet per image. Images (never single
    patches) are split into ``config.folds`` groups; the model for fold k is
    trained on all other folds and is meant to be evaluated on fold k.
    """
    config = config or TrainConfig()
    if len(dataset) < config.folds:
        raise ConfigError(f"need at least {config.folds} images for {config.folds}-fold "
                          f"cross-validation, got {len(dataset)}")
    sizes = {ps.patch_size for ps in dataset}
    if len(sizes) != 1:
        raise ConfigError(f"mixed patch sizes in dataset: {sorted(sizes)}")
    patch_size = sizes.pop()
    for i, ps in enumerate(dataset):
        if ps.targets is None:
            raise ConfigError(f"image {i} has no targets; compute oracle maps first")
    folds = fold_assignment(len(dataset), config.folds, config.seed)
    models, history = [], []
    for k, held_out in enumerate(folds):
        train_ids = [i for i in range(len(dataset)) if i not in held_out]
        x = np.concatenate([normalize_patches(dataset[i].patches, g) for i in train_ids])
        y = np.concatenate([dataset[i].targets for i in train_ids])
        stream = Stream(derive_seed(config.seed, k + 1))
        init_seed = int(stream.bits(1)[0])
        model = build_radsynth(config.filters, patch_size, g, seed=init_seed,
                               dropout=config.dropout)
        fit_model(model, x, y, config, stream, fold=k, history=history, callback=callback)
        models.append(model)
    return TrainResult(models, history, folds, config, g, patch_size)


def synthesize_map(model: CnnModel, img: QuantizedImage, batch_size=8192, threads=1):
    """Predict every pixel's entropy from its replicate-padded patch.

    Batches have fixed boundaries, so the result does not depend on
    ``threads``.
    """
    if img.g != model.g:
        raise ConfigError(f"image has g={img.g} but the model was trained for g={model.g}")
    ps = extract_patches(img, model.patch_size)
    x = normalize_patches(ps.patches, img.g)
    starts = list(range(0, len(x), batch_size))

    def run(s):
        return model.forward(x[s : s + batch_size], training=False)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    values = np.concatenate(parts).astype(np.float64).reshape(img.shape)
    return FeatureMap(values, None, kind="synth")
