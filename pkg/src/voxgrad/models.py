"""Desk-scale voxel and point classifiers, training, evaluation, checkpoints."""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from voxgrad.autodiff import (
    SGD,
    FormatError,
    OptimConfig,
    Tape,
    Tensor,
    add,
    backward,
    conv3d,
    dense,
    flatten,
    maxpool3d,
    read_tensor,
    reduce_max,
    relu,
    shared_dense,
    softmax_cross_entropy,
    write_tensor,
)

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"VGC1"


class NumericalError(RuntimeError):
    """Loss or activations became NaN/Inf."""


@dataclass(frozen=True)
class VoxNetLiteConfig:
    num_classes: int = 5
    resolution: int = 32
    channels: tuple[int, int] = (8, 16)
    hidden: int = 64

    def __post_init__(self):
        if self.resolution % 4:
            raise ValueError(f"resolution must be divisible by 4, got {self.resolution}")


@dataclass(frozen=True)
class PointNetLiteConfig:
    num_classes: int = 5
    num_points: int = 1024
    point_features: tuple[int, int] = (32, 64)
    hidden: int = 32


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    bound = np.sqrt(6.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def _zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


class Model:
    """Named parameters plus a forward function.

    ``forward(x, params)`` takes an optional name -> Tensor mapping that
    overrides the stored parameters; masked forwards use it to compute with
    ``W * T`` without touching the stored ``W``.
    """

    kind: str = ""
    input_kind: str = ""
    classifier: str = ""

    def __init__(self, config, params: dict[str, Tensor]):
        self.config = config
        self.params = params
        for name, p in params.items():
            p.name = name
            p.requires_grad = True
        self.metadata: dict = {}

    @property
    def num_classes(self) -> int:
        return self.config.num_classes

    def forward(self, x, params: dict[str, Tensor] | None = None) -> Tensor:
        raise NotImplementedError

    def __call__(self, x, params=None) -> Tensor:
        return self.forward(x, params)

    def prepare(self, batch: np.ndarray) -> np.ndarray:
        """Validate and return a model-ready input batch."""
        raise NotImplementedError

    def weight_names(self) -> list[str]:
        return [n for n in self.params if n.endswith(".w")]

    def config_dict(self) -> dict:
        d = asdict(self.config)
        d = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        return {"model": self.kind, **d}

    def copy(self) -> "Model":
        return type(self)(self.config, {n: Tensor(p.data) for n, p in self.params.items()})

    def state(self) -> dict[str, np.ndarray]:
        return {n: p.data.copy() for n, p in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for n, p in self.params.items():
            arr = np.asarray(state[n], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"{n}: shape {arr.shape} != {p.shape}")
            p.data = arr.copy()

    def predict_logits(self, inputs: np.ndarray, batch_size: int = 32) -> np.ndarray:
        out = []
        for i in range(0, len(inputs), batch_size):
            out.append(self.forward(Tensor.wrap(inputs[i:i + batch_size])).data)
        return np.concatenate(out, axis=0) if out else np.zeros((0, self.num_classes))


class VoxNetLite(Model):
    """conv(1->8) pool conv(8->16) pool, residual block (16), dense 16*(R/4)^3 -> 64 -> C.

    All convolutions are 3x3x3 with padding 1; pools are 2x2x2 stride 2.
    """

    kind = "voxnet"
    input_kind = "voxel"
    classifier = "fc2"

    @classmethod
    def init(cls, config: VoxNetLiteConfig = VoxNetLiteConfig(), seed: int = 0) -> "VoxNetLite":
        rng = np.random.default_rng(seed)
        c1, c2 = config.channels
        feat = c2 * (config.resolution // 4) ** 3
        params = {
            "conv1.w": _uniform(rng, (c1, 1, 3, 3, 3), 27), "conv1.b": _zeros(c1),
            "conv2.w": _uniform(rng, (c2, c1, 3, 3, 3), c1 * 27), "conv2.b": _zeros(c2),
            "res_a.w": _uniform(rng, (c2, c2, 3, 3, 3), c2 * 27), "res_a.b": _zeros(c2),
            "res_b.w": _uniform(rng, (c2, c2, 3, 3, 3), c2 * 27), "res_b.b": _zeros(c2),
            "fc1.w": _uniform(rng, (feat, config.hidden), feat), "fc1.b": _zeros(config.hidden),
            "fc2.w": _uniform(rng, (config.hidden, config.num_classes), config.hidden),
            "fc2.b": _zeros(config.num_classes),
        }
        return cls(config, params)

    def prepare(self, batch):
        batch = np.asarray(batch, dtype=np.float64)
        R = self.config.resolution
        if batch.ndim == 3:
            batch = batch[None, None]
        elif batch.ndim == 4:
            batch = batch[:, None]
        if batch.shape[1:] != (1, R, R, R):
            raise ValueError(f"voxnet expects (N, 1, {R}, {R}, {R}) input, got {batch.shape}")
        return np.ascontiguousarray(batch)

    def forward(self, x, params=None):
        p = self.params if params is None else {**self.params, **params}
        if not isinstance(x, Tensor):
            x = Tensor.wrap(self.prepare(x))
        elif x.ndim != 5 or x.shape[1:] != (1,) + (self.config.resolution,) * 3:
            raise ValueError(f"voxnet: bad input shape {x.shape}")
        h = relu(conv3d(x, p["conv1.w"], p["conv1.b"], 1, 1))
        h = maxpool3d(h, 2)
        h = relu(conv3d(h, p["conv2.w"], p["conv2.b"], 1, 1))
        h = maxpool3d(h, 2)
        r = relu(conv3d(h, p["res_a.w"], p["res_a.b"], 1, 1))
        r = conv3d(r, p["res_b.w"], p["res_b.b"], 1, 1)
        h = relu(add(h, r))
        h = relu(dense(flatten(h), p["fc1.w"], p["fc1.b"]))
        return dense(h, p["fc2.w"], p["fc2.b"])


class PointNetLite(Model):
    """Shared per-point MLP 3->32->64, max over points, dense 64->32->C."""

    kind = "pointnet"
    input_kind = "point"
    classifier = "fc2"

    @classmethod
    def init(cls, config: PointNetLiteConfig = PointNetLiteConfig(), seed: int = 0) -> "PointNetLite":
        rng = np.random.default_rng(seed)
        f1, f2 = config.point_features
        params = {
            "mlp1.w": _uniform(rng, (3, f1), 3), "mlp1.b": _zeros(f1),
            "mlp2.w": _uniform(rng, (f1, f2), f1), "mlp2.b": _zeros(f2),
            "fc1.w": _uniform(rng, (f2, config.hidden), f2), "fc1.b": _zeros(config.hidden),
            "fc2.w": _uniform(rng, (config.hidden, config.num_classes), config.hidden),
            "fc2.b": _zeros(config.num_classes),
        }
        return cls(config, params)

    def prepare(self, batch):
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim == 2:
            batch = batch[None]
        if batch.ndim != 3 or batch.shape[2] != 3 or batch.shape[1] < 1:
            raise ValueError(f"pointnet expects (N, P, 3) input with P >= 1, got {batch.shape}")
        return np.ascontiguousarray(batch)

    def forward(self, x, params=None):
        p = self.params if params is None else {**self.params, **params}
        if not isinstance(x, Tensor):
            x = Tensor.wrap(self.prepare(x))
        elif x.ndim != 3 or x.shape[2] != 3:
            raise ValueError(f"pointnet: bad input shape {x.shape}")
        h = relu(shared_dense(x, p["mlp1.w"], p["mlp1.b"]))
        h = relu(shared_dense(h, p["mlp2.w"], p["mlp2.b"]))
        h = reduce_max(h, axis=1)
        h = relu(dense(h, p["fc1.w"], p["fc1.b"]))
        return dense(h, p["fc2.w"], p["fc2.b"])


MODELS: dict[str, tuple[type[Model], type]] = {
    "voxnet": (VoxNetLite, VoxNetLiteConfig),
    "pointnet": (PointNetLite, PointNetLiteConfig),
}


def build_model(kind: str, num_classes: int, seed: int = 0, **config) -> Model:
    try:
        cls, cfg_cls = MODELS[kind]
    except KeyError:
        raise ValueError(f"unknown model {kind!r}; choose from {sorted(MODELS)}") from None
    return cls.init(cfg_cls(num_classes=num_classes, **config), seed=seed)


def model_inputs(model: Model, dataset, idx=None) -> np.ndarray:
    if model.input_kind == "voxel":
        return dataset.voxel_batch(idx)
    return dataset.point_batch(idx)


# ---------------------------------------------------------------- counting


def count_parameters(model: Model) -> dict:
    """Exact weight + bias counts: ``{"total": n, "per_layer": {layer: n}}``."""
    per_layer: dict[str, int] = {}
    for name, p in model.params.items():
        layer = name.rsplit(".", 1)[0]
        per_layer[layer] = per_layer.get(layer, 0) + int(p.size)
    return {"total": sum(per_layer.values()), "per_layer": per_layer}


# ---------------------------------------------------------------- training


@dataclass
class Checkpoint:
    config: dict
    weights: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def to_model(self) -> Model:
        cfg = dict(self.config)
        kind = cfg.pop("model")
        cls, cfg_cls = MODELS[kind]
        cfg = {k: tuple(v) if isinstance(v, list) else v for k, v in cfg.items()}
        model = cls(cfg_cls(**cfg), {n: Tensor(w) for n, w in self.weights.items()})
        model.metadata = dict(self.metadata)
        return model


def make_checkpoint(model: Model, metadata: dict | None = None) -> Checkpoint:
    return Checkpoint(model.config_dict(), model.state(), dict(metadata or model.metadata))


def loss_and_grads(model: Model, inputs: np.ndarray, labels: np.ndarray,
                   params: dict[str, Tensor] | None = None) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy on one batch and its gradient for every parameter used."""
    used = {**model.params, **(params or {})}
    with Tape() as tape:
        for p in used.values():
            tape.watch(p)
        loss = softmax_cross_entropy(model.forward(Tensor.wrap(inputs), params), labels)
    grads = backward(tape, loss)
    value = loss.item()
    if not np.isfinite(value):
        raise NumericalError(f"non-finite loss {value}")
    return value, {n: grads[p] for n, p in used.items()}


def dataset_loss(model: Model, dataset, batch_size: int = 32) -> float:
    inputs = model_inputs(model, dataset)
    logits = model.predict_logits(inputs, batch_size)
    return softmax_cross_entropy(Tensor.wrap(logits), dataset.labels()).item()


def train(model: Model, dataset, epochs: int, optim: OptimConfig = OptimConfig(), seed: int = 0,
          batch_size: int = 16, on_epoch: Callable[[int, float], None] | None = None) -> Checkpoint:
    """Minibatch SGD with per-epoch shuffling drawn from ``seed``. Updates ``model`` in place."""
    if len(dataset) == 0:
        raise ValueError("train: empty dataset")
    labels = dataset.labels()
    if labels.min() < 0 or labels.max() >= model.num_classes:
        raise ValueError(f"train: labels must lie in [0, {model.num_classes})")
    inputs = model_inputs(model, dataset)
    rng = np.random.default_rng(seed)
    sgd = SGD(optim)
    initial = dataset_loss(model, dataset)
    history = []
    for epoch in range(epochs):
        order = rng.permutation(len(dataset))
        total = 0.0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            loss, grads = loss_and_grads(model, inputs[idx], labels[idx])
            names = list(model.params)
            sgd.step([model.params[n] for n in names], [grads[n] for n in names])
            total += loss * len(idx)
        history.append(total / len(order))
        log.info("epoch %d loss %.6f", epoch + 1, history[-1])
        if on_epoch is not None:
            on_epoch(epoch + 1, history[-1])
    model.metadata = {
        "epochs": epochs, "seed": seed, "batch_size": batch_size,
        "optim": asdict(optim), "initial_loss": initial, "epoch_losses": history,
        "final_loss": history[-1] if history else initial,
    }
    return make_checkpoint(model)


# ---------------------------------------------------------------- evaluation


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # rows = true class, columns = predicted class
    per_class_accuracy: list[float]
    class_names: list[str]

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "class_names": list(self.class_names),
            "confusion_matrix": self.confusion.astype(int).tolist(),
            "per_class_accuracy": self.per_class_accuracy,
            "total": int(self.confusion.sum()),
        }


def report_from_predictions(labels, predictions, class_names) -> EvalReport:
    C = len(class_names)
    conf = np.zeros((C, C), dtype=np.int64)
    np.add.at(conf, (np.asarray(labels), np.asarray(predictions)), 1)
    total = conf.sum()
    rows = conf.sum(axis=1)
    per_class = [float(conf[i, i] / rows[i]) if rows[i] else 0.0 for i in range(C)]
    acc = float(np.trace(conf) / total) if total else 0.0
    return EvalReport(acc, conf, per_class, list(class_names))


def evaluate(model: Model, dataset, batch_size: int = 32,
             params: dict[str, Tensor] | None = None) -> EvalReport:
    """Argmax predictions (first index on ties) tallied into a confusion matrix."""
    inputs = model_inputs(model, dataset)
    preds = []
    for i in range(0, len(inputs), batch_size):
        logits = model.forward(Tensor.wrap(inputs[i:i + batch_size]), params).data
        preds.append(np.argmax(logits, axis=1))
    preds = np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)
    return report_from_predictions(dataset.labels(), preds, dataset.class_names)


# ---------------------------------------------------------------- checkpoints


def write_container(path, magic: bytes, header: dict, tensors: dict[str, np.ndarray]) -> None:
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            write_tensor(fh, arr)


def read_container(path, magic: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        got = fh.read(4)
        if got != magic:
            raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
        try:
            (n,) = struct.unpack("<I", fh.read(4))
            raw = fh.read(n)
            if len(raw) != n:
                raise FormatError(f"{path}: truncated header")
            header = json.loads(raw.decode("utf-8"))
            (count,) = struct.unpack("<I", fh.read(4))
            tensors = {}
            for _ in range(count):
                (ln,) = struct.unpack("<I", fh.read(4))
                name = fh.read(ln).decode("utf-8")
                tensors[name] = read_tensor(fh).data
        except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: truncated or corrupt file ({exc})") from None
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after last tensor")
    return header, tensors


def save_checkpoint(model: Model | Checkpoint, path) -> None:
    ckpt = model if isinstance(model, Checkpoint) else make_checkpoint(model)
    write_container(path, CHECKPOINT_MAGIC, {"config": ckpt.config, "metadata": ckpt.metadata},
                    ckpt.weights)


def read_checkpoint(path) -> Checkpoint:
    header, tensors = read_container(path, CHECKPOINT_MAGIC)
    if "config" not in header or header["config"].get("model") not in MODELS:
        raise FormatError(f"{path}: checkpoint header lacks a known model config")
    return Checkpoint(header["config"], tensors, header.get("metadata", {}))


def load_checkpoint(path) -> Model:
    return read_checkpoint(path).to_model()
