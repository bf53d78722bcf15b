"""Feedforward network description and the float64 ANN reference forward pass."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as tn

LAYER_KINDS = ("dense", "conv2d", "avgpool", "flatten", "relu")
SYNAPTIC = ("dense", "conv2d")


class NetworkError(ValueError):
    """Invalid network description. ``layer`` is the offending index, if any."""

    def __init__(self, message: str, layer: int | None = None):
        self.layer = layer
        prefix = f"layer {layer}: " if layer is not None else ""
        super().__init__(prefix + message)


@dataclass
class Layer:
    kind: str
    weight: np.ndarray | None = None
    bias: np.ndarray | None = None
    stride: int | None = None
    pad: int = 0
    size: int = 2

    @property
    def synaptic(self) -> bool:
        return self.kind in SYNAPTIC

    @property
    def step(self) -> int:
        """Effective stride: 1 for convolutions, the window size for pooling."""
        if self.stride is not None:
            return self.stride
        return self.size if self.kind == "avgpool" else 1


@dataclass
class NetworkSpec:
    input_shape: tuple[int, ...]
    layers: list[Layer]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        self._shapes = self._chain_shapes()

    def _chain_shapes(self) -> list[tuple[int, ...]]:
        shapes = [self.input_shape]
        for i, layer in enumerate(self.layers):
            shapes.append(_output_shape(layer, shapes[-1], i))
        return shapes

    @property
    def shapes(self) -> list[tuple[int, ...]]:
        """Per-sample shapes: ``shapes[i]`` enters layer ``i``; last is the output."""
        return list(self._shapes)

    @property
    def relu_layers(self) -> list[int]:
        return [i for i, layer in enumerate(self.layers) if layer.kind == "relu"]

    def apply_layer(self, i: int, x: np.ndarray) -> np.ndarray:
        """Apply the linear part of layer ``i`` to ``x[..., *shapes[i]]``; relu is identity here."""
        layer = self.layers[i]
        nd = len(self._shapes[i])
        if layer.kind == "dense":
            return tn.dense(x, layer.weight, layer.bias)
        if layer.kind == "conv2d":
            return tn.conv2d(x, layer.weight, layer.bias, layer.step, layer.pad)
        if layer.kind == "avgpool":
            return tn.avgpool2d(x, layer.size, layer.step)
        if layer.kind == "flatten":
            return tn.flatten(x, start=x.ndim - nd)
        return x

    def forward(self, x, record: bool = False):
        """ANN forward pass over a batch ``x[N, *input_shape]``.

        With ``record=True`` also returns ``{layer index: input to relu}``
        for every relu layer, i.e. the pre-activations.
        """
        x = np.asarray(x, dtype=np.float64)
        pre = {}
        for i, layer in enumerate(self.layers):
            if layer.kind == "relu":
                pre[i] = x
                x = tn.relu(x)
            else:
                x = self.apply_layer(i, x)
        return (x, pre) if record else x


def _output_shape(layer: Layer, shape: tuple[int, ...], i: int) -> tuple[int, ...]:
    if layer.kind not in LAYER_KINDS:
        raise NetworkError(f"unknown layer kind {layer.kind!r}", i)
    for name in ("weight", "bias"):
        arr = getattr(layer, name)
        if arr is not None:
            arr = np.asarray(arr, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise NetworkError(f"non-finite {name}", i)
            setattr(layer, name, arr)
    try:
        if layer.kind == "dense":
            if layer.weight is None or layer.weight.ndim != 2:
                raise NetworkError("dense layer needs a 2-D weight [out, in]", i)
            if shape != (layer.weight.shape[1],):
                raise NetworkError(f"dense expects input ({layer.weight.shape[1]},), got {shape}", i)
            _check_bias(layer, layer.weight.shape[0], i)
            return (layer.weight.shape[0],)
        if layer.kind == "conv2d":
            if layer.weight is None or layer.weight.ndim != 4:
                raise NetworkError("conv2d layer needs a 4-D weight [O, C, kh, kw]", i)
            o, c, kh, kw = layer.weight.shape
            if len(shape) != 3 or shape[0] != c:
                raise NetworkError(f"conv2d expects input ({c}, H, W), got {shape}", i)
            _check_bias(layer, o, i)
            return (
                o,
                tn.conv_output_size(shape[1], kh, layer.step, layer.pad),
                tn.conv_output_size(shape[2], kw, layer.step, layer.pad),
            )
        if layer.kind == "avgpool":
            if len(shape) != 3:
                raise NetworkError(f"avgpool expects (C, H, W), got {shape}", i)
            return (
                shape[0],
                tn.conv_output_size(shape[1], layer.size, layer.step, 0),
                tn.conv_output_size(shape[2], layer.size, layer.step, 0),
            )
    except tn.ConfigError as exc:
        raise NetworkError(str(exc), i) from exc
    if layer.kind == "flatten":
        return (int(np.prod(shape)),)
    return shape


def _check_bias(layer: Layer, n_out: int, i: int) -> None:
    if layer.bias is None:
        layer.bias = np.zeros(n_out)
    if layer.bias.shape != (n_out,):
        raise NetworkError(f"bias shape {layer.bias.shape} does not match {n_out} outputs", i)
