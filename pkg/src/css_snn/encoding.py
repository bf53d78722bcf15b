"""Canonical signed spike (CSS) code words and the rate-coding baseline.

A CSS train of horizon ``T`` and pre-charge ``P`` decodes to

    v_th * sum_{t >= P} 2**(P + T - 1 - t) * s[t] / (2**T - 1)

(0-based ``t``). The ``2**T - 1`` normalization maps the all-ones ``P=0``
word to exactly ``v_th``, the same full-scale convention as rate coding.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .neuron import SpikeTrain, TmnConfig, if_forward, tmn_forward

MAX_EXHAUSTIVE_DIGITS = 12


class CodecError(ValueError):
    """Raised when a train does not match the codec it is decoded with."""


@dataclass(frozen=True)
class CssCodec:
    v_th: float = 1.0
    horizon: int = 8
    precharge: int = 0

    def __post_init__(self):
        if self.v_th <= 0:
            raise CodecError(f"v_th must be positive, got {self.v_th}")
        if not 0 <= self.precharge < self.horizon:
            raise CodecError(f"need 0 <= P < T, got P={self.precharge}, T={self.horizon}")

    @property
    def norm(self) -> float:
        return 2.0**self.horizon - 1.0

    def weights(self) -> np.ndarray:
        """Decode weight of a unit spike at each step (zero during pre-charge)."""
        T, P = self.horizon, self.precharge
        w = 2.0 ** (P + T - 1 - np.arange(T, dtype=np.float64))
        w[:P] = 0.0
        return w

    def tmn_config(self, alpha: float = 0.5, negative_gate: bool = False) -> TmnConfig:
        return TmnConfig(self.v_th, alpha, self.precharge, self.horizon, negative_gate)

    @classmethod
    def for_config(cls, cfg: TmnConfig) -> "CssCodec":
        return cls(cfg.v_th, cfg.horizon, cfg.precharge)


def decode(train: SpikeTrain, codec: CssCodec | None = None) -> float:
    if codec is None:
        codec = CssCodec(train.v_th, train.horizon, train.precharge)
    elif (train.horizon, train.precharge) != (codec.horizon, codec.precharge) or train.v_th != codec.v_th:
        raise CodecError(
            f"train (T={train.horizon}, P={train.precharge}, v_th={train.v_th}) does not match codec {codec}"
        )
    return float(codec.v_th * (codec.weights() @ train.spikes) / codec.norm)


def decode_array(spikes, v_th, precharge: int = 0) -> np.ndarray:
    """Decode a stack of trains ``spikes[T, ...]``; ``v_th`` broadcasts over one frame."""
    spikes = np.asarray(spikes, dtype=np.float64)
    T = spikes.shape[0]
    w = CssCodec(1.0, T, precharge).weights().reshape((T,) + (1,) * (spikes.ndim - 1))
    return np.asarray(v_th, dtype=np.float64) * (w * spikes).sum(axis=0) / (2.0**T - 1.0)


def encode_constant(a: float, codec: CssCodec, alpha: float = 0.5, negative_gate: bool = False) -> SpikeTrain:
    """Encode ``a`` by driving a TMN with the constant current ``a`` for every step."""
    cfg = codec.tmn_config(alpha, negative_gate)
    out = tmn_forward(np.full(codec.horizon, float(a)), cfg)
    return SpikeTrain(out.spikes, codec.v_th, codec.precharge)


def encode_array(a, codec: CssCodec, alpha: float = 0.5, negative_gate: bool = False):
    """Vectorized ``encode_constant``; returns the raw ``LayerOutput`` (spikes, residual)."""
    a = np.asarray(a, dtype=np.float64)
    z = np.broadcast_to(a, (codec.horizon,) + a.shape)
    return tmn_forward(z, codec.tmn_config(alpha, negative_gate))


def optimal_ternary_code(a: float, codec: CssCodec) -> tuple[SpikeTrain, float]:
    """Exhaustively search the ternary word closest to ``a`` after decoding.

    Ties (within 1e-12 * v_th) go to the word with the fewest nonzero
    spikes, then to the lexicographically smallest word.
    """
    n = codec.horizon - codec.precharge
    if n > MAX_EXHAUSTIVE_DIGITS:
        raise CodecError(f"exhaustive search limited to {MAX_EXHAUSTIVE_DIGITS} digits, got {n}")
    words = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=np.int8)
    full = np.zeros((len(words), codec.horizon), dtype=np.int8)
    full[:, codec.precharge :] = words
    values = codec.v_th * (full @ codec.weights()) / codec.norm
    err = np.abs(a - values)
    tied = np.flatnonzero(err <= err.min() + 1e-12 * codec.v_th)
    best = min(tied, key=lambda i: (np.count_nonzero(full[i]), tuple(full[i])))
    return SpikeTrain(full[best], codec.v_th, codec.precharge), float(err[best])


# -- rate coding -------------------------------------------------------------


def rate_encode(a, v_th: float, horizon: int) -> np.ndarray:
    """Binary IF train(s) for constant current ``a``; shape ``[T, ...]``."""
    a = np.asarray(a, dtype=np.float64)
    spikes, _ = if_forward(np.broadcast_to(a, (horizon,) + a.shape), v_th)
    return spikes


def rate_decode(spikes, v_th: float) -> np.ndarray:
    spikes = np.asarray(spikes)
    return v_th * spikes.sum(axis=0, dtype=np.float64) / spikes.shape[0]
