"""Ternary momentum neurons and canonical signed spike coding for ANN-to-SNN conversion."""

__version__ = "0.1.0"

from .encoding import CssCodec, decode, decode_array, encode_constant, optimal_ternary_code, rate_decode, rate_encode
from .neuron import (
    FixedPointParams,
    SpikeTrain,
    TmnConfig,
    TmnState,
    direct_weighted_integrate,
    if_step,
    tmn_forward,
    tmn_step,
    tmn_step_fixed,
)

__all__ = [
    "CssCodec",
    "FixedPointParams",
    "SpikeTrain",
    "TmnConfig",
    "TmnState",
    "decode",
    "decode_array",
    "direct_weighted_integrate",
    "encode_constant",
    "if_step",
    "optimal_ternary_code",
    "rate_decode",
    "rate_encode",
    "tmn_forward",
    "tmn_step",
    "tmn_step_fixed",
]
