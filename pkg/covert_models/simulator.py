"""
Simulator
Monte-Carlo experiment harness for the covert PPM link.

Each trial pairs a silent block (H0) with a signal block (H1). Willie's view
is sampled as a click-count histogram, O(Q) per trial; only the selected
frames are materialized mode by mode, for Bob.
"""

import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import binom

from .channel_model import ChannelParams, PpmSession, bob_pulse_click_prob, derive_click_probs, validate_session
from .errors import ConfigError, SessionGeometryError
from .gf_codec import get_codec
from .ppm_link import (
    BobFrameObservation,
    SecretKey,
    alice_encode,
    bob_decode,
    dmc_capacity,
    encode_payload,
    generate_secret,
    interleave_with_silence,
    max_throughput,
    scramble,
    usable_frame_count,
)
from .rng_streams import SeedLike, Stream, as_generator, trial_rng
from .willie_detector import (
    DetectionResult,
    FrameClickCounts,
    gaussian_pe,
    llr_weights,
    weighted_llr,
)

logger = logging.getLogger(__name__)

TRIAL_BLOCK = 250
EXPERIMENT_STYLE_TRIALS = 100
FULL_SCALE_TRIALS = 10 ** 5


class Regime(str, Enum):
    CAREFUL = "careful"
    CARELESS = "careless"
    FIXED_0003 = "fixed-0.003"
    FIXED_0008 = "fixed-0.008"
    EXPLICIT = "explicit"


def regime_zeta(regime: Regime, n: int, Q: int, zeta: Optional[float] = None) -> float:
    regime = Regime(regime)
    if regime is Regime.CAREFUL:
        return 0.25 * math.sqrt(Q / n)
    if regime is Regime.CARELESS:
        return 0.03 * (Q / n) ** 0.25
    if regime is Regime.FIXED_0003:
        return 0.003
    if regime is Regime.FIXED_0008:
        return 0.008
    if zeta is None:
        raise ConfigError("regime 'explicit' needs a zeta value", code="BAD_VALUE")
    return zeta


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    session: PpmSession
    params: ChannelParams
    trials: int = Field(1000, ge=1)
    seed: int = 0
    regime: Regime = Regime.EXPLICIT
    detector: str = "llr"
    click_model: str = "detected"
    decode_bob: bool = True
    alpha: float = Field(0.05, gt=0.0, lt=1.0)
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check_detector(self) -> "ExperimentConfig":
        validate_session(self.session, self.params)
        if self.detector not in ("llr", "spd", "count"):
            raise ConfigError(f"unknown detector '{self.detector}'", code="BAD_VALUE")
        if self.detector == "llr" and self.params.p_D_w == 0:
            raise ConfigError("the llr detector needs p_D_w > 0; use detector=spd", code="ZERO_DARK_CLICKS")
        return self

    @classmethod
    def build(
        cls, n: int, regime: Regime, params: ChannelParams, Q: int = 32, rs_k: int = 15,
        zeta: Optional[float] = None, **kwargs: Any,
    ) -> "ExperimentConfig":
        session = PpmSession.for_code(n=n, Q=Q, zeta=regime_zeta(regime, n, Q, zeta), rs_k=rs_k)
        return cls(session=session, params=params, regime=Regime(regime), **kwargs)


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    llr_h0: float
    llr_h1: float
    pulsed_frames: int
    bob_decoded_bits: float = 0.0
    bob_symbol_errors: int = 0
    bob_erasures: int = 0
    rs_block_failures: int = 0
    data_symbols_sent: int = 0
    data_symbols_lost: int = 0


class BobThroughputSummary(NamedTuple):
    bits_mean: float
    max_throughput: float
    capacity_bits: float
    ser: float
    symbol_errors_mean: float
    erasures_mean: float
    block_failures: int


class ExperimentOutcome(NamedTuple):
    detection: DetectionResult
    throughput: BobThroughputSummary
    pe_gauss: float
    trials: List[TrialOutcome]

    def to_row(self, config: ExperimentConfig) -> Dict[str, Any]:
        return {
            "n": config.session.n,
            "Q": config.session.Q,
            "zeta": config.session.zeta,
            "regime": config.regime.value,
            "m": self.detection.trials,
            "pe_hat": self.detection.pe_hat,
            "xi": self.detection.dkw_halfwidth,
            "pe_gauss": self.pe_gauss,
            "bob_bits_mean": self.throughput.bits_mean,
            "max_throughput": self.throughput.max_throughput,
            "ser": self.throughput.ser,
        }

    def trials_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(t) for t in self.trials])


# Samplers

def dark_count_pmf(Q: int, p_D: float) -> np.ndarray:
    return binom.pmf(np.arange(Q + 1), Q, p_D)


def pulsed_frame_pmf(Q: int, p_D: float, p_r: float) -> np.ndarray:
    """Clicks in a frame whose pulse mode fires w.p. 1-(1-p_r)(1-p_D) and the rest w.p. p_D"""
    pulse = 1.0 - (1.0 - p_r) * (1.0 - p_D)
    others = binom.pmf(np.arange(Q), Q - 1, p_D)
    pmf = np.zeros(Q + 1)
    pmf[:Q] += (1.0 - pulse) * others
    pmf[1:] += pulse * others
    return pmf


def _normalized(pmf: np.ndarray) -> np.ndarray:
    pmf = np.clip(pmf, 0.0, None)
    return pmf / pmf.sum()


def sample_dark_histogram(n_frames: int, Q: int, p_D: float, seed: SeedLike) -> FrameClickCounts:
    rng = as_generator(seed)
    return FrameClickCounts(rng.multinomial(n_frames, _normalized(dark_count_pmf(Q, p_D))))


def sample_h0_histogram(session: PpmSession, params: ChannelParams, seed: SeedLike) -> FrameClickCounts:
    """n/Q i.i.d. Binomial(Q, p_D_w) frame counts, drawn as one multinomial"""
    return sample_dark_histogram(session.n_frames, session.Q, params.p_D_w, seed)


def _willie_h1_histogram(
    rng: np.random.Generator, n_frames: int, pulsed: int, Q: int, p_D: float, p_r: float
) -> np.ndarray:
    quiet = rng.multinomial(n_frames - pulsed, _normalized(dark_count_pmf(Q, p_D)))
    loud = rng.multinomial(pulsed, _normalized(pulsed_frame_pmf(Q, p_D, p_r)))
    return quiet + loud


def sample_h1_trial(
    session: PpmSession,
    params: ChannelParams,
    key: SecretKey,
    payload: np.ndarray,
    seed: SeedLike,
    click_model: str = "detected",
) -> Tuple[FrameClickCounts, BobFrameObservation]:
    """Willie's histogram and Bob's clicks on the selected frames for one signal block.

    ``payload`` holds the coded symbols for the used frames; the leftover
    selected frames carry no pulse.
    """
    rng = as_generator(seed)
    Q = session.Q
    used = usable_frame_count(len(key), session.rs_n)
    payload = np.asarray(payload, dtype=np.int64)
    if payload.size != used:
        raise SessionGeometryError(f"payload has {payload.size} symbols for {used} used frames", code="LENGTH_MISMATCH")
    p_r_w = derive_click_probs(params, session.zeta, click_model).p_r
    willie = _willie_h1_histogram(rng, session.n_frames, used, Q, params.p_D_w, p_r_w)

    clicks = rng.random((len(key), Q)) < params.p_D_b
    if used:
        rows = np.arange(used)
        positions = scramble(payload, key.key[:used], Q)
        detected = rng.random(used) < bob_pulse_click_prob(params)
        clicks[rows, positions] |= detected
    return FrameClickCounts(willie), BobFrameObservation(clicks)


def sample_willie_h1_histogram(
    session: PpmSession, params: ChannelParams, seed: SeedLike, click_model: str = "detected"
) -> Tuple[FrameClickCounts, int]:
    """H1 histogram with |S| ~ Binomial(n/Q, zeta) and no key materialized; also returns the pulsed-frame count"""
    rng = as_generator(seed)
    selected = int(rng.binomial(session.n_frames, session.zeta))
    pulsed = usable_frame_count(selected, session.rs_n)
    p_r_w = derive_click_probs(params, session.zeta, click_model).p_r
    histogram = _willie_h1_histogram(rng, session.n_frames, pulsed, session.Q, params.p_D_w, p_r_w)
    return FrameClickCounts(histogram), pulsed


# Trials

def _statistic(config: ExperimentConfig, counts: FrameClickCounts, weights: Optional[np.ndarray]) -> float:
    if config.detector == "spd":
        return float(counts.total_clicks > 0)
    if config.detector == "count":
        return float(counts.total_clicks)
    return float(weighted_llr(counts.histogram, weights))


def _detector_weights(config: ExperimentConfig) -> Optional[np.ndarray]:
    if config.detector != "llr":
        return None
    probs = derive_click_probs(config.params, config.session.zeta, config.click_model)
    return llr_weights(config.session.zeta, probs.p_r, config.params.p_D_w, config.session.Q)


def transmitted_sequence(config: ExperimentConfig, trial_index: int = 0):
    """The interleaved sequence Alice sends in a given trial, with its key"""
    session = config.session
    key = generate_secret(session, trial_rng(config.seed, trial_index, Stream.SECRET))
    blocks = usable_frame_count(len(key), session.rs_n) // session.rs_n
    data = trial_rng(config.seed, trial_index, Stream.PAYLOAD).integers(
        0, session.Q, size=blocks * session.rs_k
    )
    sequence = alice_encode(encode_payload(data, session), key, session)
    return interleave_with_silence(sequence), key, data


def run_trial(config: ExperimentConfig, trial_index: int, weights: Optional[np.ndarray] = None) -> TrialOutcome:
    session, params = config.session, config.params
    if weights is None:
        weights = _detector_weights(config)
    h0 = sample_h0_histogram(session, params, trial_rng(config.seed, trial_index, Stream.WILLIE_H0))

    if not config.decode_bob:
        h1, pulsed = sample_willie_h1_histogram(
            session, params, trial_rng(config.seed, trial_index, Stream.CHANNEL_H1), config.click_model
        )
        return TrialOutcome(trial_index, _statistic(config, h0, weights), _statistic(config, h1, weights), pulsed)

    key = generate_secret(session, trial_rng(config.seed, trial_index, Stream.SECRET))
    used = usable_frame_count(len(key), session.rs_n)
    blocks = used // session.rs_n
    data = trial_rng(config.seed, trial_index, Stream.PAYLOAD).integers(0, session.Q, size=blocks * session.rs_k)
    coded = encode_payload(data, session)
    h1, observations = sample_h1_trial(
        session, params, key, coded,
        trial_rng(config.seed, trial_index, Stream.CHANNEL_H1), config.click_model,
    )
    decoded = bob_decode(observations, key, session, trial_rng(config.seed, trial_index, Stream.BOB_TIEBREAK))

    lost = 0
    truth = data.reshape(blocks, session.rs_k) if blocks else np.zeros((0, session.rs_k), dtype=np.int64)
    for block, message in enumerate(decoded.block_messages):
        lost += session.rs_k if message is None else int(np.count_nonzero(message != truth[block]))
    channel_errors = int(np.count_nonzero((decoded.received_symbols != coded) & (decoded.received_symbols >= 0)))

    return TrialOutcome(
        trial=trial_index,
        llr_h0=_statistic(config, h0, weights),
        llr_h1=_statistic(config, h1, weights),
        pulsed_frames=used,
        bob_decoded_bits=int(decoded.block_success.sum()) * session.rs_k * session.bits_per_symbol,
        bob_symbol_errors=channel_errors,
        bob_erasures=decoded.erasures,
        rs_block_failures=decoded.block_failures,
        data_symbols_sent=int(data.size),
        data_symbols_lost=lost,
    )


def _run_trial_block(config: ExperimentConfig, start: int, stop: int) -> List[TrialOutcome]:
    weights = _detector_weights(config)
    return [run_trial(config, i, weights) for i in range(start, stop)]


def run_experiment(config: ExperimentConfig) -> ExperimentOutcome:
    """m paired trials reduced to Willie's detection estimate and Bob's throughput"""
    session, params = config.session, config.params
    validate_session(session, params)
    get_codec(session.rs_n, session.rs_k)
    logger.info(
        f"Running {config.trials} trials: n={session.n} Q={session.Q} zeta={session.zeta:.5g} "
        f"regime={config.regime.value} detector={config.detector} workers={config.workers}"
    )

    bounds = list(range(0, config.trials, TRIAL_BLOCK)) + [config.trials]
    blocks = Parallel(n_jobs=config.workers)(
        delayed(_run_trial_block)(config, start, stop) for start, stop in zip(bounds[:-1], bounds[1:])
    )
    trials = [outcome for block in blocks for outcome in block]

    detection = DetectionResult.from_samples(
        [t.llr_h0 for t in trials], [t.llr_h1 for t in trials], config.alpha
    )
    capacity = dmc_capacity(session.Q, params.p_D_b, params.nbar_det_b)
    sent = sum(t.data_symbols_sent for t in trials)
    throughput = BobThroughputSummary(
        bits_mean=float(np.mean([t.bob_decoded_bits for t in trials])),
        max_throughput=max_throughput(capacity, session.zeta, session.n, session.Q),
        capacity_bits=capacity,
        ser=sum(t.data_symbols_lost for t in trials) / sent if sent else 0.0,
        symbol_errors_mean=float(np.mean([t.bob_symbol_errors for t in trials])),
        erasures_mean=float(np.mean([t.bob_erasures for t in trials])),
        block_failures=sum(t.rs_block_failures for t in trials),
    )

    if 0.0 < params.p_D_w < 1.0:
        pe_gauss = gaussian_pe(session, params, config.click_model).pe_tilde
    else:
        pe_gauss = math.nan
    logger.info(
        f"n={session.n}: pe_hat={detection.pe_hat:.4f} (xi={detection.dkw_halfwidth:.4f}) "
        f"pe_gauss={pe_gauss:.4f} bits={throughput.bits_mean:.1f}/{throughput.max_throughput:.1f}"
    )
    return ExperimentOutcome(detection, throughput, pe_gauss, trials)
