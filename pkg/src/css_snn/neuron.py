"""Spiking neuron dynamics: the integrate-and-fire baseline and the ternary
momentum neuron (TMN), in float and shift-based fixed-point form.

Timesteps are 0-based in code. A neuron with pre-charge length ``P`` only
integrates during steps ``0 .. P-1`` and may spike from step ``P`` onwards.
Firing and reset amounts are scaled by ``2**P`` to compensate for the
doublings applied during pre-charge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .tensor import ShapeError


class NeuronStateError(RuntimeError):
    """Raised when a neuron is stepped past its horizon."""


@dataclass(frozen=True)
class TmnConfig:
    """Parameters of a ternary momentum neuron.

    ``alpha`` is the ratio between the predictive (firing) threshold and
    the full threshold. ``alpha=1`` disables predictive spiking: the neuron
    fires only at the full threshold but keeps ternary reset semantics.
    """

    v_th: float = 1.0
    alpha: float = 0.5
    precharge: int = 0
    horizon: int = 8
    negative_gate: bool = False

    def __post_init__(self):
        if not (self.v_th > 0 and math.isfinite(self.v_th)):
            raise ValueError(f"v_th must be positive and finite, got {self.v_th}")
        if not (0 < self.alpha <= 1):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not (0 <= self.precharge < self.horizon):
            raise ValueError(
                f"pre-charge length must satisfy 0 <= P < T, got P={self.precharge}, T={self.horizon}"
            )

    @property
    def reset_amount(self) -> float:
        return 2.0**self.precharge * self.v_th

    @property
    def predictive_threshold(self) -> float:
        return self.alpha * self.reset_amount

    def with_threshold(self, v_th: float) -> "TmnConfig":
        return TmnConfig(v_th, self.alpha, self.precharge, self.horizon, self.negative_gate)


@dataclass
class TmnState:
    u: float = 0.0
    t: int = 0
    fired_positive: bool = False

    def reset(self) -> None:
        self.u = 0.0
        self.t = 0
        self.fired_positive = False


@dataclass
class SpikeTrain:
    """Ternary spike train of one neuron.

    A spike at step ``t`` carries ``2**precharge * v_th`` and weight
    ``2**(T-1-t)`` when decoded.
    """

    spikes: np.ndarray
    v_th: float
    precharge: int = 0

    def __post_init__(self):
        self.spikes = np.asarray(self.spikes, dtype=np.int8).reshape(-1)
        if not np.isin(self.spikes, (-1, 0, 1)).all():
            raise ValueError("spike train entries must be in {-1, 0, +1}")
        if self.precharge < 0 or self.precharge >= max(len(self.spikes), 1):
            raise ValueError(f"pre-charge length {self.precharge} invalid for T={len(self.spikes)}")
        if np.any(self.spikes[: self.precharge]):
            raise ValueError("spike emitted during pre-charge")

    @property
    def horizon(self) -> int:
        return len(self.spikes)

    @property
    def amplitude(self) -> float:
        return 2.0**self.precharge * self.v_th

    def first_nonzero(self) -> int:
        """Sign of the first nonzero spike, 0 for a silent train."""
        nz = np.flatnonzero(self.spikes)
        return int(self.spikes[nz[0]]) if len(nz) else 0


# -- integrate-and-fire (rate coding baseline) ------------------------------


# Relative slack on the IF threshold so that accumulated rounding
# (0.3 added ten times is 2.9999999999999996) does not swallow a spike.
IF_TIE_TOL = 1e-12


def if_step(state: TmnState, z: float, v_th: float) -> int:
    u_hat = state.u + z
    spike = 1 if u_hat >= v_th * (1 - IF_TIE_TOL) else 0
    state.u = u_hat - v_th * spike
    state.t += 1
    return spike


def if_forward(z_seq, v_th) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized IF neuron with soft reset over ``z_seq[T, ...]``.

    ``v_th`` may be a scalar or broadcastable against one frame.
    Returns ``(spikes[T, ...] as int8, final membrane)``.
    """
    z_seq = np.asarray(z_seq, dtype=np.float64)
    u = np.zeros(z_seq.shape[1:])
    spikes = np.zeros(z_seq.shape, dtype=np.int8)
    for t in range(z_seq.shape[0]):
        u = u + z_seq[t]
        s = u >= v_th * (1 - IF_TIE_TOL)
        u = u - v_th * s
        spikes[t] = s
    return spikes, u


# -- ternary momentum neuron ------------------------------------------------


def tmn_step(state: TmnState, z: float, cfg: TmnConfig) -> int:
    """Advance one neuron by one step and return the emitted spike."""
    if state.t >= cfg.horizon:
        raise NeuronStateError(f"neuron already ran {cfg.horizon} steps; reset before reuse")
    u_hat = 2.0 * state.u + z
    spike = 0
    if state.t >= cfg.precharge:
        thr = cfg.predictive_threshold
        spike = int(u_hat >= thr) - int(u_hat <= -thr)
        if cfg.negative_gate and spike < 0 and not state.fired_positive:
            spike = 0
        if spike > 0:
            state.fired_positive = True
        u_hat -= cfg.reset_amount * spike
    state.u = u_hat
    state.t += 1
    return spike


class LayerOutput(NamedTuple):
    spikes: np.ndarray  # int8, shape [T, ...]
    residual: np.ndarray  # final membrane u[T], shape [...]
    membranes: np.ndarray | None = None  # post-reset u[t] for every step, if recorded


def tmn_forward(z_seq, cfg: TmnConfig, v_th=None, record: bool = False) -> LayerOutput:
    """Run TMN neurons elementwise over input frames ``z_seq[T, ...]``.

    ``v_th`` optionally overrides ``cfg.v_th`` with a per-element array
    (broadcast against one frame); ``cfg`` still supplies alpha, P, T and
    the gate flag. ``record=True`` also keeps the membrane after every step.
    """
    if isinstance(z_seq, (list, tuple)):
        shapes = {np.shape(f) for f in z_seq}
        if len(shapes) > 1:
            raise ShapeError(f"ragged input frames: {sorted(shapes)}")
    z_seq = np.asarray(z_seq, dtype=np.float64)
    if z_seq.shape[0] != cfg.horizon:
        raise ShapeError(f"expected {cfg.horizon} frames, got {z_seq.shape[0]}")
    scale = 2.0**cfg.precharge * (cfg.v_th if v_th is None else np.asarray(v_th, dtype=np.float64))
    thr = cfg.alpha * scale
    u = np.zeros(z_seq.shape[1:])
    latch = np.zeros(z_seq.shape[1:], dtype=bool)
    spikes = np.zeros(z_seq.shape, dtype=np.int8)
    membranes = np.zeros(z_seq.shape) if record else None
    for t in range(cfg.horizon):
        u = 2.0 * u + z_seq[t]
        if t >= cfg.precharge:
            s = (u >= thr).astype(np.int8) - (u <= -thr).astype(np.int8)
            if cfg.negative_gate:
                s = np.where((s < 0) & ~latch, 0, s).astype(np.int8)
                latch = latch | (s > 0)
            u = u - scale * s
            spikes[t] = s
        if record:
            membranes[t] = u
    return LayerOutput(spikes, u, membranes)


def direct_weighted_integrate(z_seq, v_th, spikes, precharge: int = 0) -> np.ndarray:
    """Closed-form final membrane from an input sequence and replayed decisions.

    Evaluates ``sum_t 2**(T-1-t) * z[t] - 2**P * v_th * sum_{t>=P} 2**(T-1-t) * s[t]``
    with explicit exponential weights and no recurrence.
    """
    z_seq = np.asarray(z_seq, dtype=np.float64)
    spikes = np.asarray(spikes, dtype=np.float64)
    if z_seq.shape != spikes.shape:
        raise ShapeError(f"input {z_seq.shape} and decisions {spikes.shape} differ in shape")
    T = z_seq.shape[0]
    weights = 2.0 ** np.arange(T - 1, -1, -1)
    weights = weights.reshape((T,) + (1,) * (z_seq.ndim - 1))
    drive = (weights * z_seq).sum(axis=0)
    fired = (weights[precharge:] * spikes[precharge:]).sum(axis=0)
    return drive - 2.0**precharge * np.asarray(v_th, dtype=np.float64) * fired


# -- fixed point ------------------------------------------------------------


@dataclass(frozen=True)
class FixedPointParams:
    frac_bits: int = 12
    word_bits: int = 32

    def __post_init__(self):
        if self.frac_bits < 0 or self.word_bits <= self.frac_bits + 2:
            raise ValueError(
                f"need word_bits > frac_bits + 2, got W={self.word_bits}, F={self.frac_bits}"
            )

    @property
    def lo(self) -> int:
        return -(1 << (self.word_bits - 1))

    @property
    def hi(self) -> int:
        return (1 << (self.word_bits - 1)) - 1

    def covers(self, v_th: float) -> bool:
        return 4 * v_th * (1 << self.frac_bits) <= self.hi

    def to_fixed(self, x: float) -> int:
        q = round(x * (1 << self.frac_bits))
        if not self.lo <= q <= self.hi:
            raise OverflowError(f"{x} not representable in Q{self.word_bits - self.frac_bits}.{self.frac_bits}")
        return q

    def to_float(self, q: int) -> float:
        return q / (1 << self.frac_bits)


@dataclass
class FixedTmnState:
    u: int = 0
    t: int = 0
    fired_positive: bool = False
    saturated: bool = False

    def reset(self) -> None:
        self.u, self.t = 0, 0
        self.fired_positive = self.saturated = False


def _saturate(x: int, fxp: FixedPointParams, state: FixedTmnState) -> int:
    if x > fxp.hi:
        state.saturated = True
        return fxp.hi
    if x < fxp.lo:
        state.saturated = True
        return fxp.lo
    return x


def fixed_thresholds(cfg: TmnConfig, fxp: FixedPointParams) -> tuple[int, int]:
    """Integer (firing threshold, reset amount) for the register domain.

    For an integer membrane ``u`` and real threshold ``h``, ``u >= h`` iff
    ``u >= ceil(h)`` and ``u <= -h`` iff ``u <= -ceil(h)``, so the ceiling
    reproduces the float comparisons exactly.
    """
    v_fx = Fraction(cfg.v_th) * (1 << fxp.frac_bits)
    reset = v_fx * (1 << cfg.precharge)
    if reset.denominator != 1:
        raise ValueError(f"v_th={cfg.v_th} is not a multiple of 2**-{fxp.frac_bits}")
    thr = math.ceil(Fraction(cfg.alpha) * reset)
    return thr, int(reset)


def tmn_step_fixed(state: FixedTmnState, z_fx: int, cfg: TmnConfig, fxp: FixedPointParams) -> int:
    """Fixed-point TMN step; the doubling is a one-bit left shift of the register."""
    if state.t >= cfg.horizon:
        raise NeuronStateError(f"neuron already ran {cfg.horizon} steps; reset before reuse")
    if not fxp.lo <= z_fx <= fxp.hi:
        raise OverflowError(f"input {z_fx} exceeds the {fxp.word_bits}-bit word")
    thr, reset = fixed_thresholds(cfg, fxp)
    u_hat = _saturate((state.u << 1) + z_fx, fxp, state)
    spike = 0
    if state.t >= cfg.precharge:
        spike = int(u_hat >= thr) - int(u_hat <= -thr)
        if cfg.negative_gate and spike < 0 and not state.fired_positive:
            spike = 0
        if spike > 0:
            state.fired_positive = True
        u_hat = _saturate(u_hat - reset * spike, fxp, state)
    state.u = u_hat
    state.t += 1
    return spike


def tmn_forward_fixed(z_fx_seq, cfg: TmnConfig, fxp: FixedPointParams) -> tuple[np.ndarray, int, bool]:
    """Run one fixed-point neuron; returns ``(spikes, final register, saturated)``."""
    state = FixedTmnState()
    spikes = np.array([tmn_step_fixed(state, int(z), cfg, fxp) for z in z_fx_seq], dtype=np.int8)
    return spikes, state.u, state.saturated
