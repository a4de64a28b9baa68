"""Generalized spatial / space-frequency index modulation: rates, links, detectors."""
from .core import (
    ModulationAlphabet,
    PatternSet,
    build_pattern_set,
    build_qam_alphabet,
    enumerate_patterns,
)
from .gibbs import detect_gsim_gibbs
from .gsfim import GsfimConfig, detect_ml_gsfim, gsfim_decode, gsfim_encode
from .gsim import GsimConfig, detect_ml_bruteforce, detect_mmse, gsim_decode, gsim_encode
from .rates import gsfim_rate, gsim_rate, gsim_rate_max, mimo_ofdm_rate

__version__ = "0.1.0"
