"""The disentangled network, its losses, Adam, training and checkpoints."""

import dataclasses
import io
import json
import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tn
from .errors import ConfigError, ShapeError, TrainingError, ValidationError
from .evaluation import accuracy, macro_f1
from .graphio import normalized_adjacency
from .hsic import independence_loss
from .layers import DisentangleLayerParams, disentangle, gcn_layer, glorot
from .tensor import Tensor

log = logging.getLogger(__name__)

MODEL_KINDS = ("ipgdn", "gcn-baseline")
HSIC_SCOPES = ("labeled", "all")


@dataclass(frozen=True)
class ModelConfig:
    M: int = 4
    delta_f: int = 16
    T: int = 7
    L: int = 1
    lam: float = 5e-6
    dropout: float = 0.35
    lr: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 1000
    patience: int = 100
    seed: int = 0
    hsic_scope: str = "labeled"
    model_kind: str = "ipgdn"

    def __post_init__(self):
        if not 1 <= self.L <= 6:
            raise ConfigError(f"L must lie in [1, 6], got {self.L}")
        if self.M < 1 or self.delta_f < 1 or self.T < 1:
            raise ConfigError("M, delta_f and T must all be >= 1")
        if not self.lam >= 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not self.lr > 0 or not self.weight_decay >= 0:
            raise ConfigError("lr must be > 0 and weight_decay >= 0")
        if self.epochs < 1 or self.patience < 1:
            raise ConfigError("epochs and patience must be >= 1")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.hsic_scope not in HSIC_SCOPES:
            raise ConfigError(f"hsic_scope must be one of {HSIC_SCOPES}, got {self.hsic_scope!r}")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")

    @property
    def width(self):
        return self.M * self.delta_f

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    @classmethod
    def from_dict(cls, data):
        """Build from JSON-style keys (``lambda`` rather than ``lam``); unknown keys are rejected."""
        data = dict(data)
        if "lam" in data:
            raise ConfigError("unknown config key 'lam' (use 'lambda')")
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        names = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(names))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        for key, value in data.items():
            want = names[key].type
            if want is int:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"config key {key!r} must be an integer, got {value!r}")
            elif want is float:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"config key {key!r} must be a number, got {value!r}")
                data[key] = float(value)
            elif not isinstance(value, str):
                raise ConfigError(f"config key {key!r} must be a string, got {value!r}")
        return cls(**data)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class IpgdnModel:
    kind: str
    layers: list  # DisentangleLayerParams, or weight Tensors for the GCN baseline
    head_weight: Tensor
    head_bias: Tensor
    channels: int

    @classmethod
    def init(cls, in_features, num_classes, cfg, rng):
        layers = []
        f_in = in_features
        for _ in range(cfg.L):
            if cfg.model_kind == "ipgdn":
                layers.append(DisentangleLayerParams.init(f_in, cfg.M, cfg.delta_f, rng))
            else:
                w = glorot(rng, f_in, cfg.width, (f_in, cfg.width))
                layers.append(Tensor(w, requires_grad=True, name="weight"))
            f_in = cfg.width
        head = Tensor(glorot(rng, f_in, num_classes, (f_in, num_classes)), requires_grad=True)
        bias = Tensor(np.zeros((1, num_classes)), requires_grad=True)
        return cls(cfg.model_kind, layers, head, bias, cfg.M)

    @property
    def in_features(self):
        first = self.layers[0]
        return (first.weight if isinstance(first, DisentangleLayerParams) else first).rows

    @property
    def num_classes(self):
        return self.head_weight.cols

    def named_parameters(self):
        out = []
        for i, layer in enumerate(self.layers):
            if isinstance(layer, DisentangleLayerParams):
                out.append((f"layer{i}.weight", layer.weight))
                out.append((f"layer{i}.bias", layer.bias))
            else:
                out.append((f"layer{i}.weight", layer))
        out.append(("head.weight", self.head_weight))
        out.append(("head.bias", self.head_bias))
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def weights(self):
        """Weight matrices subject to weight decay (biases excluded)."""
        return [p for name, p in self.named_parameters() if name.endswith("weight")]

    def state(self):
        return [p.data.copy() for p in self.parameters()]

    def load_state(self, arrays):
        params = self.parameters()
        if len(arrays) != len(params):
            raise ShapeError(f"state has {len(arrays)} arrays, model has {len(params)} parameters")
        for p, a in zip(params, arrays):
            if p.shape != a.shape:
                raise ShapeError(f"parameter shape {p.shape} does not match stored {a.shape}")
            p.data = np.array(a, dtype=np.float64)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


def forward(model, graph, cfg, training, rng=None):
    """Return ``(logits, H_L)``; ``H_L`` is the last hidden layer before dropout."""
    if graph.f != model.in_features:
        raise ShapeError(f"graph has {graph.f} features, model expects {model.in_features}")
    h = Tensor(graph.features)
    hidden = None
    adj = Tensor(normalized_adjacency(graph)) if model.kind == "gcn-baseline" else None
    for layer in model.layers:
        if model.kind == "ipgdn":
            hidden = disentangle(h, graph, layer, cfg.T)
        else:
            hidden = gcn_layer(h, adj, layer, activation=True)
        h = tn.dropout(hidden, cfg.dropout, training, rng)
    logits = tn.add(tn.matmul(h, model.head_weight), model.head_bias)
    return logits, hidden


def cross_entropy(logits, labels, mask):
    """Summed negative log-likelihood of ``labels`` over the nodes in ``mask``."""
    mask = np.asarray(mask, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    target = labels[mask]
    if np.any(target < 0):
        raise ValidationError("cross_entropy mask contains unlabeled nodes")
    if np.any(target >= logits.cols):
        raise ValidationError(f"label outside [0, {logits.cols})")
    picked = tn.pick(tn.log_softmax(logits), mask, target)
    return tn.mul(tn.sum(picked), -1.0)


def hsic_nodes(graph, cfg):
    return graph.train if cfg.hsic_scope == "labeled" else None


def total_loss(logits, H_L, graph, cfg, weights=()):
    """``(total, cross_entropy, hsic)``; the HSIC term is computed even when lambda is 0."""
    ce = cross_entropy(logits, graph.labels, graph.train)
    reg = independence_loss(H_L, cfg.M, hsic_nodes(graph, cfg))
    total = ce
    if cfg.lam:
        total = tn.add(total, tn.mul(reg, cfg.lam))
    if cfg.weight_decay and weights:
        decay = None
        for w in weights:
            sq = tn.sum(tn.mul(w, w))
            decay = sq if decay is None else tn.add(decay, sq)
        total = tn.add(total, tn.mul(decay, cfg.weight_decay))
    return total, ce, reg


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros_like(cls, arrays):
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays])


def adam_step(params, grads, state, lr, betas=(0.9, 0.999), eps=1e-8):
    """In-place Adam update with bias correction; missing gradients count as zero."""
    b1, b2 = betas
    state.step += 1
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


@dataclass
class TrainTrace:
    loss: list = field(default_factory=list)
    ce: list = field(default_factory=list)
    hsic: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    best_epoch: int = -1

    def append(self, loss, ce, hsic, val_acc):
        self.loss.append(loss)
        self.ce.append(ce)
        self.hsic.append(hsic)
        self.val_acc.append(val_acc)

    def __len__(self):
        return len(self.loss)

    def to_dict(self):
        return {
            "epochs": len(self),
            "best_epoch": self.best_epoch,
            "loss": self.loss,
            "ce": self.ce,
            "hsic": self.hsic,
            "val_acc": self.val_acc,
        }


def predict(model, graph, cfg):
    logits, hidden = forward(model, graph, cfg, training=False)
    return logits.data.argmax(axis=1), hidden


def evaluate(model, graph, cfg):
    """Accuracy and macro-F1 on val/test plus the HSIC penalty of the eval-mode representation."""
    logits, hidden = forward(model, graph, cfg, training=False)
    pred = logits.data.argmax(axis=1)
    out = {}
    for name in ("train", "val", "test"):
        mask = graph.split(name)
        if mask.size:
            out[f"{name}_acc"] = accuracy(pred, graph.labels, mask)
            out[f"{name}_macro_f1"] = macro_f1(pred, graph.labels, mask, graph.num_classes)
    out["hsic"] = independence_loss(hidden, cfg.M, hsic_nodes(graph, cfg)).item()
    return out


def train(graph, cfg, on_epoch=None):
    """Full-batch Adam training with early stopping on validation accuracy.

    The parameters with the best validation accuracy (ties broken by lower
    validation loss) are restored before returning.
    """
    if graph.train.size == 0:
        raise ConfigError("training split is empty")
    rng = np.random.default_rng(cfg.seed)
    drop_rng = np.random.default_rng([cfg.seed, 1])
    model = IpgdnModel.init(graph.f, graph.num_classes, cfg, rng)
    params = model.parameters()
    weights = model.weights()
    state = AdamState.zeros_like([p.data for p in params])
    trace = TrainTrace()
    val = graph.val
    best = (-1.0, math.inf)
    best_state = model.state()
    since_best = 0
    for epoch in range(cfg.epochs):
        model.zero_grad()
        logits, hidden = forward(model, graph, cfg, training=True, rng=drop_rng)
        total, ce, reg = total_loss(logits, hidden, graph, cfg, weights)
        loss = total.item()
        if not math.isfinite(loss):
            raise TrainingError(f"loss became non-finite ({loss}) at epoch {epoch + 1}")
        total.backward()
        adam_step([p.data for p in params], [p.grad for p in params], state, cfg.lr)

        eval_logits, _ = forward(model, graph, cfg, training=False)
        if val.size:
            val_acc = accuracy(eval_logits.data.argmax(axis=1), graph.labels, val)
            val_loss = cross_entropy(eval_logits, graph.labels, val).item()
        else:
            val_acc, val_loss = 0.0, -ce.item()
        trace.append(loss, ce.item(), reg.item(), val_acc)
        if on_epoch is not None:
            on_epoch(epoch, trace)
        if val_acc > best[0] or (val_acc == best[0] and val_loss < best[1]):
            best = (val_acc, val_loss)
            best_state = model.state()
            trace.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                log.debug("early stop at epoch %d (best %d)", epoch + 1, trace.best_epoch + 1)
                break
    model.load_state(best_state)
    return model, trace


# -- checkpoints ---------------------------------------------------------------

MAGIC = b"IPGDNCKP"
FORMAT_VERSION = 1


def save_checkpoint(path, model, cfg, manifest=None):
    """Write ``MAGIC | u32 version | u64 header length | JSON header | tensors``.

    Each tensor is ``u32 name length | name | u64 rows | u64 cols | rows*cols <f8``.
    """
    header = {
        "format_version": FORMAT_VERSION,
        "config": cfg.to_dict(),
        "in_features": model.in_features,
        "num_classes": model.num_classes,
        "manifest": manifest or {},
        "tensors": [{"name": n, "rows": p.rows, "cols": p.cols} for n, p in model.named_parameters()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IQ", FORMAT_VERSION, len(blob)))
    buf.write(blob)
    for name, p in model.named_parameters():
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<QQ", p.rows, p.cols))
        buf.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path):
    """Return ``(model, cfg, header)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise ValidationError(f"{path}: not a checkpoint file")
    try:
        version, hlen = struct.unpack_from("<IQ", raw, 8)
        if version != FORMAT_VERSION:
            raise ValidationError(f"{path}: unsupported checkpoint version {version}")
        pos = 20
        header = json.loads(raw[pos:pos + hlen].decode("utf-8"))
        pos += hlen
        cfg = ModelConfig.from_dict(header["config"])
        arrays = []
        for spec in header["tensors"]:
            (nlen,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            name = raw[pos:pos + nlen].decode("utf-8")
            pos += nlen
            rows, cols = struct.unpack_from("<QQ", raw, pos)
            pos += 16
            if (name, rows, cols) != (spec["name"], spec["rows"], spec["cols"]):
                raise ValidationError(f"{path}: tensor block {name!r} disagrees with header")
            count = rows * cols
            data = np.frombuffer(raw, dtype="<f8", count=count, offset=pos)
            if data.size != count:
                raise ValidationError(f"{path}: truncated tensor {name!r}")
            pos += 8 * count
            arrays.append(data.reshape(rows, cols).astype(np.float64))
    except (struct.error, KeyError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"{path}: corrupt checkpoint ({exc})") from None
    model = IpgdnModel.init(header["in_features"], header["num_classes"], cfg, np.random.default_rng(0))
    model.load_state(arrays)
    return model, cfg, header
