"""ANN to SNN conversion and the layer-synchronous spiking simulator.

Conversion keeps every weight and bias, calibrates one full threshold per
ReLU from activation percentiles, and swaps each ReLU for a layer of TMN
neurons. The simulator runs one layer for all ``T`` steps before moving to
the next, so whole-sequence filters are well defined.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .encoding import decode_array
from .network import NetworkError, NetworkSpec
from .neuron import TmnConfig, if_forward, tmn_forward

THRESHOLD_FLOOR = 1e-6
GATES = ("post", "online", "none")
CODINGS = ("css", "rate")


class CalibrationError(ValueError):
    pass


@dataclass
class CalibrationResult:
    thresholds: dict[int, float]  # relu layer index -> v_th
    percentile: float
    n_batches: int
    per_batch: dict[int, list[float]] = field(default_factory=dict)


def calibrate(spec: NetworkSpec, batches, percentile: float = 99.99) -> CalibrationResult:
    """Per-ReLU thresholds: the activation percentile of each batch, averaged over batches."""
    batches = list(batches)
    if not batches:
        raise CalibrationError("calibration needs at least one batch")
    if not 0 < percentile <= 100:
        raise CalibrationError(f"percentile must lie in (0, 100], got {percentile}")
    per_batch: dict[int, list[float]] = {i: [] for i in spec.relu_layers}
    for batch in batches:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.size == 0:
            raise CalibrationError("empty calibration batch")
        _, pre = spec.forward(batch, record=True)
        for i, a in pre.items():
            per_batch[i].append(float(np.percentile(np.maximum(a, 0.0), percentile)))
    thresholds = {}
    for i, values in per_batch.items():
        p_bar = 0.0
        for p in values:
            p_bar += p / len(values)
        thresholds[i] = max(p_bar, THRESHOLD_FLOOR)
    return CalibrationResult(thresholds, percentile, len(batches), per_batch)


@dataclass
class SnnModel:
    spec: NetworkSpec
    thresholds: dict[int, float]
    horizon: int = 8
    precharge: int = 1
    alpha: float = 0.5

    def __post_init__(self):
        TmnConfig(1.0, self.alpha, self.precharge, self.horizon)  # validates the neuron parameters

    def neuron_config(self, layer: int, negative_gate: bool = False) -> TmnConfig:
        return TmnConfig(self.thresholds[layer], self.alpha, self.precharge, self.horizon, negative_gate)

    @property
    def analog_input_layer(self) -> int | None:
        """Index of the first synaptic layer; it sees the input as a constant current."""
        return next((i for i, layer in enumerate(self.spec.layers) if layer.synaptic), None)

    def with_params(self, **kw) -> "SnnModel":
        params = dict(horizon=self.horizon, precharge=self.precharge, alpha=self.alpha)
        params.update(kw)
        return SnnModel(self.spec, self.thresholds, **params)


def convert(
    spec: NetworkSpec, calib: CalibrationResult, horizon: int = 8, precharge: int = 1, alpha: float = 0.5
) -> SnnModel:
    missing = [i for i in spec.relu_layers if i not in calib.thresholds]
    if missing:
        raise CalibrationError(f"no calibrated threshold for relu layer(s) {missing}")
    return SnnModel(
        copy.deepcopy(spec),
        {i: float(calib.thresholds[i]) for i in spec.relu_layers},
        horizon,
        precharge,
        alpha,
    )


def zero_negative_sequences(spikes) -> np.ndarray:
    """Silence every train ``spikes[:, ...]`` whose first nonzero spike is negative."""
    spikes = np.asarray(spikes)
    if spikes.shape[0] == 0:
        return spikes.copy()
    first = np.take_along_axis(spikes, np.argmax(spikes != 0, axis=0)[None], axis=0)[0]
    return np.where(first < 0, 0, spikes).astype(spikes.dtype)


def bias_currents(model: SnnModel) -> dict[int, np.ndarray]:
    """Bias current injected at every step, ``[T, *out_shape]`` per synaptic layer."""
    shapes = model.spec.shapes
    return {
        i: np.broadcast_to(layer.bias.reshape((-1,) + (1,) * (len(shapes[i + 1]) - 1)), (model.horizon,) + shapes[i + 1])
        for i, layer in enumerate(model.spec.layers)
        if layer.synaptic
    }


# -- synaptic fan-out and op counting ---------------------------------------


def fanout_map(spec: NetworkSpec, i: int) -> np.ndarray:
    """Number of outgoing synapses of every input element of layer ``i``."""
    layer = spec.layers[i]
    in_shape = spec.shapes[i]
    if layer.kind == "dense":
        return np.full(in_shape, layer.weight.shape[0], dtype=np.int64)
    if layer.kind in ("conv2d", "avgpool"):
        c, h, w = in_shape
        _, ho, wo = spec.shapes[i + 1]
        if layer.kind == "conv2d":
            n_out, kh, kw, pad = layer.weight.shape[0], layer.weight.shape[2], layer.weight.shape[3], layer.pad
        else:
            n_out, kh, kw, pad = 1, layer.size, layer.size, 0
        s = layer.step
        cover = np.zeros((h + 2 * pad, w + 2 * pad), dtype=np.int64)
        for di in range(kh):
            for dj in range(kw):
                cover[di : di + s * (ho - 1) + 1 : s, dj : dj + s * (wo - 1) + 1 : s] += 1
        cover = cover[pad : pad + h, pad : pad + w] * n_out
        return np.broadcast_to(cover, in_shape).copy()
    return np.zeros(in_shape, dtype=np.int64)


def dense_op_count(spec: NetworkSpec, i: int) -> int:
    """Multiply-accumulates for one analog evaluation of layer ``i`` (bias excluded)."""
    layer = spec.layers[i]
    out = spec.shapes[i + 1]
    if layer.kind == "dense":
        return int(layer.weight.size)
    if layer.kind == "conv2d":
        return int(np.prod(out)) * int(np.prod(layer.weight.shape[1:]))
    if layer.kind == "avgpool":
        return int(np.prod(out)) * layer.size * layer.size
    return 0


# -- simulation -------------------------------------------------------------


@dataclass
class LayerRecord:
    index: int
    kind: str
    input_events: np.ndarray | None = None  # [T, N, *in_shape] nonzero mask of event inputs
    spikes: np.ndarray | None = None  # [T, N, *shape] for spiking layers
    residual: np.ndarray | None = None
    v_th: float | None = None
    acs: int = 0
    macs: int = 0
    deficit: int = 0  # neurons whose final residual exceeds one reset amount


@dataclass
class SimulationTrace:
    coding: str
    horizon: int
    precharge: int
    alpha: float
    gate: str
    n_samples: int
    layers: list[LayerRecord]

    @property
    def ac_count(self) -> int:
        return sum(r.acs for r in self.layers)

    @property
    def mac_count(self) -> int:
        return sum(r.macs for r in self.layers)

    @property
    def spike_count(self) -> int:
        return sum(int(np.count_nonzero(r.spikes)) for r in self.layers if r.spikes is not None)

    def spiking(self) -> list[LayerRecord]:
        return [r for r in self.layers if r.spikes is not None]


def snn_forward(
    model: SnnModel,
    x,
    gate: str = "post",
    coding: str = "css",
    keep_events: bool = True,
):
    """Simulate the converted network on ``x[N, *input_shape]`` (or a single sample).

    ``gate`` selects how negative-valued trains are removed: ``"post"``
    zeroes whole trains whose first spike is negative, ``"online"`` uses
    the neuron's suppression latch, ``"none"`` keeps them. ``coding="rate"``
    swaps TMNs for IF neurons (rate-coding baseline) over ``model.horizon``
    steps.

    The output layer is a non-spiking integrator; the returned logits are
    its exponentially weighted mean input (CSS) or plain mean input (rate).
    Returns ``(logits[N, *out_shape], trace)``.
    """
    if gate not in GATES:
        raise ValueError(f"gate must be one of {GATES}, got {gate!r}")
    if coding not in CODINGS:
        raise ValueError(f"coding must be one of {CODINGS}, got {coding!r}")
    spec = model.spec
    x = np.asarray(x, dtype=np.float64)
    single = x.shape == spec.input_shape
    if single:
        x = x[None]
    if x.shape[1:] != spec.input_shape:
        raise NetworkError(f"input shape {x.shape[1:]} does not match network input {spec.input_shape}")
    n, T = x.shape[0], model.horizon
    P = model.precharge if coding == "css" else 0

    frames = None  # None while the signal is still the analog input
    analog = x
    records = []
    for i, layer in enumerate(spec.layers):
        rec = LayerRecord(i, layer.kind)
        if layer.kind == "relu":
            v_th = model.thresholds[i]
            z = frames if frames is not None else np.broadcast_to(analog, (T,) + analog.shape)
            if coding == "css":
                out = tmn_forward(z, model.neuron_config(i, negative_gate=gate == "online"))
                spikes = zero_negative_sequences(out.spikes) if gate == "post" else out.spikes
                amplitude = 2.0**P * v_th
            else:
                spikes, residual = if_forward(z, v_th)
                out = None
                amplitude = v_th
            residual = out.residual if out is not None else residual
            rec.spikes, rec.residual, rec.v_th = spikes, residual, v_th
            rec.deficit = int(np.count_nonzero(np.abs(residual) > amplitude))
            frames = spikes * amplitude
        elif frames is None:
            analog = spec.apply_layer(i, analog)
            if layer.kind != "flatten":
                rec.macs = dense_op_count(spec, i) * n * T
        else:
            events = frames != 0
            if layer.kind != "flatten":
                rec.acs = int((events * fanout_map(spec, i)).sum())
            if keep_events:
                rec.input_events = events
            frames = spec.apply_layer(i, frames)
        if layer.synaptic:
            rec.macs += int(layer.bias.size) * n * T * int(np.any(layer.bias != 0)) * _bias_sites(spec, i)
        records.append(rec)

    if frames is None:
        logits = analog
    elif spec.layers and spec.layers[-1].kind == "relu":
        last = records[-1]
        logits = decode_array(last.spikes, last.v_th, P) if coding == "css" else last.spikes.mean(axis=0) * last.v_th
    elif coding == "css":
        w = 2.0 ** np.arange(T - 1, -1, -1).reshape((T,) + (1,) * (frames.ndim - 1))
        logits = (w * frames).sum(axis=0) / (2.0**T - 1.0)
    else:
        logits = frames.mean(axis=0)
    trace = SimulationTrace(coding, T, P, model.alpha, gate, n, records)
    return (logits[0] if single else logits), trace


def _bias_sites(spec: NetworkSpec, i: int) -> int:
    """Output positions sharing one bias entry (spatial size for conv, 1 for dense)."""
    out = spec.shapes[i + 1]
    return int(np.prod(out[1:])) if spec.layers[i].kind == "conv2d" else 1


def teacher_forced_errors(model: SnnModel, x, coding: str = "css", horizon: int | None = None, gate: str = "post"):
    """Per-ReLU MSE between the decoded train and the ANN activation when each
    layer is driven by the exact ANN pre-activation as a constant current."""
    _, pre = model.spec.forward(x, record=True)
    T = horizon or model.horizon
    errors = {}
    for i, a in pre.items():
        v_th = model.thresholds[i]
        z = np.broadcast_to(a, (T,) + a.shape)
        if coding == "css":
            cfg = TmnConfig(v_th, model.alpha, model.precharge, T, gate == "online")
            s = tmn_forward(z, cfg).spikes
            if gate == "post":
                s = zero_negative_sequences(s)
            approx = decode_array(s, v_th, model.precharge)
        else:
            s, _ = if_forward(z, v_th)
            approx = s.mean(axis=0) * v_th
        errors[i] = float(np.mean((approx - np.maximum(a, 0.0)) ** 2))
    return errors


def propagated_errors(model: SnnModel, x, coding: str = "css", gate: str = "post"):
    """Per-ReLU MSE between decoded spikes of a full simulation and the ANN activations."""
    _, pre = model.spec.forward(x, record=True)
    _, trace = snn_forward(model, x, gate=gate, coding=coding, keep_events=False)
    errors = {}
    for rec in trace.spiking():
        if coding == "css":
            approx = decode_array(rec.spikes, rec.v_th, trace.precharge)
        else:
            approx = rec.spikes.mean(axis=0) * rec.v_th
        errors[rec.index] = float(np.mean((approx - np.maximum(pre[rec.index], 0.0)) ** 2))
    return errors
