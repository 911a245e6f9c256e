# Covert optical communication models
# Channel model, RS codec, PPM link, Willie's detector, bounds and the Monte-Carlo harness

__version__ = "1.0.0"
__author__ = "CovertLink Team"

from .errors import CovertError, ConfigError, SessionGeometryError, ParameterRangeError, DegenerateRegimeError
from .channel_model import (
    ChannelParams,
    PpmSession,
    CovertBudget,
    RunConfig,
    derive_click_probs,
    load_preset,
    load_run_config,
)
from .gf_codec import GaloisField, ReedSolomonCodec, rs_encode, rs_decode
from .ppm_link import SecretKey, BinarySequence, alice_encode, bob_decode, dmc_capacity, max_throughput
from .willie_detector import FrameClickCounts, DetectionResult, empirical_pe, dkw_halfwidth, gaussian_pe
from .simulator import ExperimentConfig, Regime, run_experiment

__all__ = [
    'CovertError',
    'ConfigError',
    'SessionGeometryError',
    'ParameterRangeError',
    'DegenerateRegimeError',
    'ChannelParams',
    'PpmSession',
    'CovertBudget',
    'RunConfig',
    'derive_click_probs',
    'load_preset',
    'load_run_config',
    'GaloisField',
    'ReedSolomonCodec',
    'rs_encode',
    'rs_decode',
    'SecretKey',
    'BinarySequence',
    'alice_encode',
    'bob_decode',
    'dmc_capacity',
    'max_throughput',
    'FrameClickCounts',
    'DetectionResult',
    'empirical_pe',
    'dkw_halfwidth',
    'gaussian_pe',
    'ExperimentConfig',
    'Regime',
    'run_experiment',
]
