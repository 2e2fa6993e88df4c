"""Filtering-penalty models for coherent optical links.

Modules: :mod:`spectral` (grid numerics), :mod:`linkmodel` (noise and
channel bookkeeping), :mod:`equalizers` (receiver SNR models),
:mod:`trxmodel` (transceiver SNR and BER conversions), :mod:`timesim`
(LMS time-domain reference), :mod:`config`, :mod:`sweep` and :mod:`cli`.
"""
from .config import ConfigError, load_link_spec
from .equalizers import EQUALIZERS, EqualizerResult, evaluate_link, fle_mmse
from .linkmodel import LinkSpec
from .trxmodel import DP16QAM, DPQPSK, TrxModel

__all__ = [
    "ConfigError",
    "DP16QAM",
    "DPQPSK",
    "EQUALIZERS",
    "EqualizerResult",
    "LinkSpec",
    "TrxModel",
    "evaluate_link",
    "fle_mmse",
    "load_link_spec",
]
__version__ = "0.1.0"
