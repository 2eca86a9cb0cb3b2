"""The three compact CNN architectures and their two output heads.

Each builder lays out the layer sequence declaratively (a ``ModelGraph`` of
``LayerSpec`` rows) and instantiates it into a runnable ``Model``. All three
networks take a 128x128x3 image; the classification head ends in an 8-way
softmax, the regression head in a 2-output linear layer (valence, arousal).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import layers as L
from .tensor import Rng, Tensor, as_array

ARCH_ALEXNET = "arch1-alexnet"
ARCH_VGGNET = "arch2-vggnet"
ARCH_MOBILENET = "arch3-mobilenet"
ARCH_IDS = (ARCH_ALEXNET, ARCH_VGGNET, ARCH_MOBILENET)

HEAD_EMOTION = "emotion"  # 8 classes, softmax
HEAD_VA = "va"  # valence/arousal, linear
HEADS = (HEAD_EMOTION, HEAD_VA)

INPUT_SHAPE = (128, 128, 3)
NUM_EMOTIONS = 8

# Batch sizes used at full training scale; desk runs override them.
REFERENCE_BATCH_SIZE = {ARCH_ALEXNET: 400, ARCH_VGGNET: 400, ARCH_MOBILENET: 250}
REFERENCE_EPOCHS = {"train": 24, "finetune": 16}

HEAD_LAYER_NAME = "head"


class ArchitectureError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    kernel: int = 0
    channels: int = 0
    stride: int = 1
    rate: float = 0.0
    units: int = 0


@dataclass(frozen=True)
class ModelGraph:
    arch_id: str
    head: str
    rows: tuple


class Model:
    """A layer stack plus the metadata needed to rebuild and serialize it."""

    def __init__(self, stack, input_shape, arch_id=None, head=None, dtype="f32"):
        self.stack = stack
        self.input_shape = tuple(input_shape)
        self.arch_id = arch_id
        self.head = head
        self.dtype = dtype

    @property
    def layers(self):
        return self.stack.layers

    def _batchify(self, x):
        arr = np.asarray(as_array(x))
        if arr.shape == self.input_shape:
            return arr[None, ...], True
        if arr.ndim == len(self.input_shape) + 1 and arr.shape[1:] == self.input_shape:
            return arr, False
        raise ArchitectureError(
            f"model expects input shape {self.input_shape} "
            f"(optionally batched), got {arr.shape}"
        )

    def forward(self, x, training=False, rng=None, ctx=None) -> Tensor:
        arr, squeeze = self._batchify(x)
        out = self.stack.forward(arr, ctx, training, rng)
        return Tensor.wrap(out.array[0]) if squeeze else out

    def forward_train(self, x, rng):
        """Training-mode forward over a batch; returns (output, context)."""
        arr, squeeze = self._batchify(x)
        if squeeze:
            raise ArchitectureError("training forward expects a batched input")
        ctx = {}
        out = self.stack.forward(arr, ctx, training=True, rng=rng)
        return out, ctx

    def backward(self, dy, ctx, from_logits=False) -> dict:
        """Backpropagate and return parameter gradients keyed like named_params.

        With ``from_logits`` the gradient is taken with respect to the final
        pre-softmax activations, skipping the softmax layer itself.
        """
        start = None
        if from_logits:
            if self.layers[-1].kind != "softmax":
                raise ArchitectureError("from_logits requires a softmax final layer")
            start = len(self.layers) - 2
        self.stack.backward(dy, ctx, start=start)
        return ctx["grads"]

    def named_params(self):
        return dict(self.stack.named_params())

    def named_state(self):
        return dict(self.stack.named_state())

    def named_tensors(self):
        """Trainable parameters followed by running statistics, in layer order."""
        out = {}
        for layer in self.layers:
            for k, v in layer.named_params():
                out[f"{layer.name}/{k}"] = v
            for k, v in layer.named_state():
                out[f"{layer.name}/{k}"] = v
        return out

    def set_params(self, params: dict):
        for key, value in params.items():
            self.stack.set_param(key, value)

    def param_count(self):
        return self.stack.param_count()

    def activation_shapes(self):
        """Per-layer output shapes for a single input image."""
        x = np.zeros((1,) + self.input_shape, dtype=np.float32)
        shapes = []
        for layer in self.layers:
            x = layer.forward(x).array
            shapes.append((layer.name, layer.kind, tuple(x.shape[1:])))
        return shapes


def _head_layers(head, in_dim=1024):
    if head == HEAD_EMOTION:
        return [
            L.Dense(in_dim, NUM_EMOTIONS, name=HEAD_LAYER_NAME, init="glorot"),
            L.Softmax("softmax"),
        ]
    if head == HEAD_VA:
        return [
            L.Dense(in_dim, 2, name=HEAD_LAYER_NAME, init="glorot"),
            L.Identity("linear"),
        ]
    raise ArchitectureError(f"unknown head {head!r}; expected one of {HEADS}")


def _dense_tail(head):
    # Two hidden dense-1024 layers, ReLU, 0.5 dropout after each.
    tail = []
    in_dim = 2048
    for i in (1, 2):
        tail += [
            L.Dense(in_dim, 1024, name=f"dense{i}"),
            L.ReLU(f"dense{i}_relu"),
            L.Dropout(0.5, name=f"drop{i}"),
        ]
        in_dim = 1024
    return tail + _head_layers(head)


def _alexnet_layers(head):
    convs = [(9, 16), (7, 32), (5, 64), (3, 128), (3, 128)]
    out, in_ch = [], 3
    for i, (k, ch) in enumerate(convs, start=1):
        out += [
            L.conv_block(f"conv{i}", in_ch, ch, k),
            L.MaxPool2x2(f"pool{i}"),
            L.GaussianDropout(0.2, name=f"gdrop{i}"),
        ]
        in_ch = ch
    return out + [L.Flatten("flatten")] + _dense_tail(head)


def _vggnet_layers(head):
    stages = [16, 32, 64, 128, 128]
    out, in_ch = [], 3
    for i, ch in enumerate(stages, start=1):
        out += [
            L.conv_block(f"conv{i}a", in_ch, ch, 3),
            L.conv_block(f"conv{i}b", ch, ch, 3),
            L.MaxPool2x2(f"pool{i}"),
            L.GaussianDropout(0.2, name=f"gdrop{i}"),
        ]
        in_ch = ch
    return out + [L.Flatten("flatten")] + _dense_tail(head)


def _mobilenet_layers(head):
    blocks = [
        (64, 1),
        (128, 2),
        (128, 1),
        (256, 2),
        (256, 1),
        (512, 2),
        (512, 1),
        (512, 1),
        (512, 1),
        (512, 1),
        (512, 1),
        (1024, 2),
        (1024, 1),
    ]
    out = [L.conv_block("conv1", 3, 32, 3, stride=2)]
    in_ch = 32
    for i, (ch, stride) in enumerate(blocks, start=1):
        out.append(L.depthwise_separable_block(f"dconv{i}", in_ch, ch, stride))
        in_ch = ch
    out += [
        L.GlobalAvgPool("gap"),
        L.Dropout(0.3, name="drop"),
    ]
    return out + _head_layers(head)


_BUILDERS = {
    ARCH_ALEXNET: _alexnet_layers,
    ARCH_VGGNET: _vggnet_layers,
    ARCH_MOBILENET: _mobilenet_layers,
}


def graph(arch_id, head) -> ModelGraph:
    """Declarative row listing for an architecture/head pair."""
    model_layers = _layers_for(arch_id, head)
    rows = []
    for layer in model_layers:
        if layer.kind == "conv" and isinstance(layer, L.Stack):
            conv = layer.layers[0]
            rows.append(
                LayerSpec("conv", kernel=conv.kernel, channels=conv.out_channels, stride=conv.stride)
            )
        elif layer.kind == "dconv":
            dw, pw = layer.layers[0], layer.layers[3]
            rows.append(
                LayerSpec("dconv", kernel=dw.kernel, channels=pw.out_channels, stride=dw.stride)
            )
        elif layer.kind == "dense":
            rows.append(LayerSpec("dense", units=layer.out_dim))
        elif layer.kind in ("dropout", "gaussian_dropout"):
            rows.append(LayerSpec(layer.kind, rate=layer.rate))
        else:
            rows.append(LayerSpec(layer.kind))
    return ModelGraph(arch_id=arch_id, head=head, rows=tuple(rows))


def _layers_for(arch_id, head):
    if arch_id not in _BUILDERS:
        raise ArchitectureError(f"unknown architecture {arch_id!r}; expected one of {ARCH_IDS}")
    if head not in HEADS:
        raise ArchitectureError(f"unknown head {head!r}; expected one of {HEADS}")
    return _BUILDERS[arch_id](head)


def build(arch_id, head, seed=0, dtype="f32") -> Model:
    """Instantiate an architecture with freshly initialized parameters."""
    stack = L.Stack(arch_id, _layers_for(arch_id, head))
    stack.init_params(Rng(seed), dtype)
    return Model(stack, INPUT_SHAPE, arch_id=arch_id, head=head, dtype=dtype)


@dataclass
class ParamReport:
    rows: list = field(default_factory=list)  # (layer name, kind, parameter count)
    total_params: int = 0
    serialized_bytes_f32: int = 0

    def to_text(self):
        lines = [f"{name:<12} {kind:<10} {count:>10,}" for name, kind, count in self.rows]
        lines.append(f"{'total':<12} {'':<10} {self.total_params:>10,}")
        lines.append(f"f32 payload  {self.serialized_bytes_f32:,} bytes")
        return "\n".join(lines)


def param_report(model: Model) -> ParamReport:
    rows = [(layer.name, layer.kind, layer.param_count()) for layer in model.layers]
    total = sum(count for _, _, count in rows)
    return ParamReport(rows=rows, total_params=total, serialized_bytes_f32=4 * total)


def swap_head(model: Model, new_head: str, seed: int = 0) -> Model:
    """Replace the output head, copying every backbone tensor bit-for-bit.

    The swapped model is independent of the source: fine-tuning it never
    touches the original's parameters or running statistics.
    """
    if model.arch_id is None:
        raise ArchitectureError("swap_head requires a model built from a known architecture")
    if new_head not in HEADS:
        raise ArchitectureError(f"unknown head {new_head!r}; expected one of {HEADS}")
    if new_head == model.head:
        warnings.warn(f"model already has head {new_head!r}; swap is a no-op", stacklevel=2)
        return model
    swapped = build(model.arch_id, new_head, seed=seed, dtype=model.dtype)
    head_prefix = f"{HEAD_LAYER_NAME}/"
    for key, value in model.named_tensors().items():
        if not key.startswith(head_prefix):
            swapped.stack.set_param(key, value)
    return swapped
