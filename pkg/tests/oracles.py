"""Independent reference implementations shared by several test modules."""

import numpy as np

from css_snn.network import Layer, NetworkSpec


def brute_fanout(spec, i):
    """Count outputs touched by a one-hot input through all-ones weights."""
    layer = spec.layers[i]
    ones = Layer(layer.kind, None if layer.weight is None else np.ones_like(layer.weight), None, layer.stride, layer.pad, layer.size)
    probe = NetworkSpec(spec.shapes[i], [ones])
    in_shape = spec.shapes[i]
    out = np.zeros(in_shape, dtype=np.int64)
    for idx in np.ndindex(*in_shape):
        x = np.zeros(in_shape)
        x[idx] = 1.0
        out[idx] = np.count_nonzero(probe.apply_layer(0, x))
    return out


def recount_acs(spec, trace):
    """Walk every nonzero event one by one and add its fan-out."""
    total = 0
    cache = {}
    for rec in trace.layers:
        if rec.input_events is None or spec.layers[rec.index].kind == "flatten":
            continue
        if rec.index not in cache:
            cache[rec.index] = brute_fanout(spec, rec.index)
        fan = cache[rec.index]
        for idx in zip(*np.nonzero(rec.input_events)):
            total += int(fan[idx[2:]])
    return total
