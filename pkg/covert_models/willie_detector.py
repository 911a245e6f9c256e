"""
Willie Detector
Willie's view of the channel is the per-frame click count. This module holds
that observation type, the log-likelihood-ratio statistic computed from the
count histogram, simpler click detectors, the empirical error-probability
estimate with its DKW confidence half-width and the Gaussian approximation of
the optimal total-count test.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import erfc
from scipy.stats import binom

from .channel_model import ChannelParams, PpmSession, derive_click_probs
from .errors import DegenerateRegimeError, ParameterRangeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrameClickCounts:
    """Histogram N_k of frames with k clicks, k = 0..Q, and optionally the raw counts y_i"""

    histogram: np.ndarray
    frame_counts: Optional[np.ndarray] = None

    def __post_init__(self):
        histogram = np.asarray(self.histogram, dtype=np.int64)
        if histogram.ndim != 1 or histogram.size < 2 or np.any(histogram < 0):
            raise ParameterRangeError("histogram must be a nonnegative vector of length Q+1")
        object.__setattr__(self, "histogram", histogram)
        if self.frame_counts is not None:
            y = np.asarray(self.frame_counts, dtype=np.int64)
            if y.size and (y.min() < 0 or y.max() > self.Q):
                raise ParameterRangeError(f"frame counts must lie in 0..{self.Q}")
            if not np.array_equal(np.bincount(y, minlength=self.Q + 1), histogram):
                raise ParameterRangeError("frame counts disagree with the histogram")
            object.__setattr__(self, "frame_counts", y)

    @classmethod
    def from_frame_counts(cls, y: Sequence[int], Q: int) -> "FrameClickCounts":
        y = np.asarray(y, dtype=np.int64)
        if y.size and (y.min() < 0 or y.max() > Q):
            raise ParameterRangeError(f"frame counts must lie in 0..{Q}")
        return cls(np.bincount(y, minlength=Q + 1), y)

    @property
    def Q(self) -> int:
        return self.histogram.size - 1

    @property
    def n_frames(self) -> int:
        return int(self.histogram.sum())

    @property
    def total_clicks(self) -> int:
        return int(np.arange(self.Q + 1) @ self.histogram)

    def merged(self, other: "FrameClickCounts") -> "FrameClickCounts":
        """Counts of two disjoint mode ranges pooled together"""
        if other.Q != self.Q:
            raise ParameterRangeError(f"cannot merge Q={self.Q} with Q={other.Q}")
        frames = None
        if self.frame_counts is not None and other.frame_counts is not None:
            frames = np.concatenate([self.frame_counts, other.frame_counts])
        return FrameClickCounts(self.histogram + other.histogram, frames)


def _check_llr_inputs(zeta: float, p_r_w: float, p_D_w: float) -> None:
    if p_D_w == 0:
        raise DegenerateRegimeError(
            "the likelihood ratio is undefined without dark clicks; use spd_click_detector",
            code="ZERO_DARK_CLICKS",
        )
    if not 0.0 <= zeta <= 1.0:
        raise ParameterRangeError(f"zeta must lie in [0, 1], got {zeta}")
    if not 0.0 <= p_r_w <= 1.0:
        raise ParameterRangeError(f"p_r_w must lie in [0, 1], got {p_r_w}")
    if not 0.0 < p_D_w < 1.0:
        raise ParameterRangeError(f"p_D_w must lie in (0, 1), got {p_D_w}")


def llr_weights(zeta: float, p_r_w: float, p_D_w: float, Q: int) -> np.ndarray:
    """Per-frame LLR contribution of a frame with k clicks, k = 0..Q"""
    _check_llr_inputs(zeta, p_r_w, p_D_w)
    k = np.arange(Q + 1)
    with np.errstate(divide="ignore"):
        return np.log1p(zeta * p_r_w * (k / (Q * p_D_w) - 1.0))


def weighted_llr(histograms: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # 0 * -inf must count as 0: empty classes contribute nothing
    terms = np.where(histograms > 0, histograms * np.where(np.isfinite(weights), weights, 0.0), 0.0)
    terms = np.where((histograms > 0) & ~np.isfinite(weights), -np.inf, terms)
    return terms.sum(axis=-1)


def llr_statistic(counts: FrameClickCounts, zeta: float, p_r_w: float, p_D_w: float, Q: int) -> float:
    if counts.Q != Q:
        raise ParameterRangeError(f"counts were taken with Q={counts.Q}, not {Q}")
    return float(weighted_llr(counts.histogram, llr_weights(zeta, p_r_w, p_D_w, Q)))


def llr_statistic_batch(
    histograms: np.ndarray, zeta: float, p_r_w: float, p_D_w: float, Q: int
) -> np.ndarray:
    """LLR of every row of an (m, Q+1) histogram matrix"""
    histograms = np.asarray(histograms, dtype=np.int64)
    return weighted_llr(histograms, llr_weights(zeta, p_r_w, p_D_w, Q))


def llr_from_frame_counts(y: Sequence[int], zeta: float, p_r_w: float, p_D_w: float, Q: int) -> float:
    """Frame-by-frame form of the statistic"""
    _check_llr_inputs(zeta, p_r_w, p_D_w)
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log1p(zeta * p_r_w * (y / (Q * p_D_w) - 1.0))))


def spd_click_detector(counts: FrameClickCounts) -> bool:
    """Accuse Alice on any click at all"""
    return counts.total_clicks > 0


def total_click_statistic(counts: FrameClickCounts) -> int:
    return counts.total_clicks


def spd_error_bounds(p_zero: float) -> Tuple[float, float]:
    """Bracket for the optimal error when H1 yields no click with probability p_zero.

    The click detector achieves p_zero/2; no measurement beats
    (1 - sqrt(1 - p_zero))/2. The ratio never exceeds 2.
    """
    if not 0.0 <= p_zero <= 1.0:
        raise ParameterRangeError(f"p_zero must lie in [0, 1], got {p_zero}")
    return (1.0 - math.sqrt(1.0 - p_zero)) / 2.0, p_zero / 2.0


class EmpiricalPe(NamedTuple):
    pe_hat: float
    threshold: float


def empirical_pe(L0_samples: Sequence[float], L1_samples: Sequence[float]) -> EmpiricalPe:
    """Half the minimum over S of 1 - F0(S) + F1(S).

    F0, F1 are the right-continuous empirical CDFs; the minimum is attained
    at a sample value or at -inf, and the smallest attaining S is returned.
    """
    L0 = np.sort(np.asarray(L0_samples, dtype=float))
    L1 = np.sort(np.asarray(L1_samples, dtype=float))
    if L0.size == 0 or L1.size == 0:
        raise ParameterRangeError("both sample vectors must be nonempty")
    candidates = np.unique(np.concatenate([L0, L1]))
    F0 = np.searchsorted(L0, candidates, side="right") / L0.size
    F1 = np.searchsorted(L1, candidates, side="right") / L1.size
    errors = 1.0 - F0 + F1
    best = int(np.argmin(errors))
    if errors[best] < 1.0:
        return EmpiricalPe(0.5 * float(errors[best]), float(candidates[best]))
    return EmpiricalPe(0.5, -math.inf)


def dkw_halfwidth(m: int, alpha: float = 0.05) -> float:
    if m < 1:
        raise ParameterRangeError(f"sample count must be >= 1, got {m}")
    if not 0.0 < alpha < 1.0:
        raise ParameterRangeError(f"alpha must lie in (0, 1), got {alpha}")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * m))


def dkw_band(cdf_values: np.ndarray, xi: float) -> Tuple[np.ndarray, np.ndarray]:
    cdf_values = np.asarray(cdf_values, dtype=float)
    return np.clip(cdf_values - xi, 0.0, 1.0), np.clip(cdf_values + xi, 0.0, 1.0)


@dataclass(frozen=True)
class DetectionResult:
    L0_samples: np.ndarray
    L1_samples: np.ndarray
    pe_hat: float
    threshold: float
    dkw_halfwidth: float

    @classmethod
    def from_samples(cls, L0: Sequence[float], L1: Sequence[float], alpha: float = 0.05) -> "DetectionResult":
        L0 = np.asarray(L0, dtype=float)
        L1 = np.asarray(L1, dtype=float)
        estimate = empirical_pe(L0, L1)
        return cls(L0, L1, estimate.pe_hat, estimate.threshold, dkw_halfwidth(min(L0.size, L1.size), alpha))

    @property
    def trials(self) -> int:
        return int(min(self.L0_samples.size, self.L1_samples.size))

    def as_row(self, **context: Any) -> Dict[str, Any]:
        row = dict(context)
        row.update({"m": self.trials, "pe_hat": self.pe_hat, "xi": self.dkw_halfwidth})
        return row


# Gaussian approximation of the total-count test

class GaussianApproximation(NamedTuple):
    pe_tilde: float
    s_star: float
    mu0: float
    var0: float
    mu1: float
    var1: float


def _normal_sf(x: float, mu: float, var: float) -> float:
    return 0.5 * float(erfc((x - mu) / math.sqrt(2.0 * var)))


def _normal_cdf(x: float, mu: float, var: float) -> float:
    return 0.5 * float(erfc(-(x - mu) / math.sqrt(2.0 * var)))


def _crossing_residual(s: float, mu0: float, var0: float, mu1: float, var1: float) -> float:
    return (s - mu0) ** 2 / var0 - math.log(var1 / var0) - (s - mu1) ** 2 / var1


def gaussian_pe_from_moments(mu0: float, var0: float, mu1: float, var1: float) -> GaussianApproximation:
    """Error of the best threshold test between N(mu0, var0) and N(mu1, var1).

    S* is the likelihood crossing: a root of the quadratic
    (S-mu0)^2/var0 - log(var1/var0) = (S-mu1)^2/var1 lying between the means.
    """
    if var0 <= 0 or var1 <= 0:
        raise DegenerateRegimeError("Gaussian approximation needs positive variances", code="ZERO_NOISE_VARIANCE")

    def pe_at(s: float) -> float:
        return 0.5 * (_normal_sf(s, mu0, var0) + _normal_cdf(s, mu1, var1))

    a = 1.0 / var0 - 1.0 / var1
    b = -2.0 * (mu0 / var0 - mu1 / var1)
    c = mu0 ** 2 / var0 - mu1 ** 2 / var1 - math.log(var1 / var0)

    if var0 == var1 or abs(a) <= 1e-14 * max(1.0 / var0, 1.0 / var1):
        roots = [0.5 * (mu0 + mu1)] if var0 == var1 or b == 0 else [-c / b]
    else:
        disc = math.sqrt(max(0.0, b * b - 4.0 * a * c))
        q = -0.5 * (b + math.copysign(disc, b))
        roots = [q / a] if q == 0 else [q / a, c / q]

    low, high = min(mu0, mu1), max(mu0, mu1)
    inside = [s for s in roots if low <= s <= high]
    s_star = inside[0] if len(inside) == 1 else min(roots, key=pe_at)
    return GaussianApproximation(pe_at(s_star), s_star, mu0, var0, mu1, var1)


def expected_pulsed_fraction(session: PpmSession) -> float:
    """E[rs_n * floor(|S| / rs_n)] / (n/Q) with |S| ~ Binomial(n/Q, zeta)"""
    frames = session.n_frames
    if session.zeta == 0 or frames < session.rs_n:
        return 0.0
    blocks = np.arange(1, frames // session.rs_n + 1)
    expected_blocks = float(np.sum(binom.sf(blocks * session.rs_n - 1, frames, session.zeta)))
    return session.rs_n * expected_blocks / frames


def gaussian_pe(
    session: PpmSession,
    params: ChannelParams,
    click_model: str = "detected",
    leftover_aware: bool = True,
) -> GaussianApproximation:
    """Gaussian approximation of Willie's error for the total-click-count test.

    Under H0 every mode clicks with p_D. Under H1 the n - n/Q modes that never
    carry a pulse stay at p_D; each of the n/Q pulse-capable modes clicks with
    p_s = t + (1 - t) p_D where t = zeta * p_r. With ``leftover_aware`` the
    selection probability is the expected fraction of frames that actually
    carry pulses after the leftover policy.
    """
    p_D = params.p_D_w
    if not 0.0 < p_D < 1.0:
        raise DegenerateRegimeError(
            f"Gaussian approximation needs 0 < p_D_w < 1, got {p_D}", code="ZERO_NOISE_VARIANCE"
        )
    p_r = derive_click_probs(params, session.zeta, click_model).p_r
    zeta = expected_pulsed_fraction(session) if leftover_aware else session.zeta
    n = session.n
    frames = session.n_frames

    mu0 = n * p_D
    var0 = n * p_D * (1.0 - p_D)
    quiet = n - frames
    t = zeta * p_r
    p_s = t + (1.0 - t) * p_D
    mu1 = quiet * p_D + frames * p_s
    var1 = quiet * p_D * (1.0 - p_D) + frames * p_s * (1.0 - t) * (1.0 - p_D)
    result = gaussian_pe_from_moments(mu0, var0, mu1, var1)
    logger.debug(
        f"Gaussian approximation n={n} zeta={session.zeta:.3g} (effective {zeta:.3g}): "
        f"pe={result.pe_tilde:.4f} S*={result.s_star:.3f}"
    )
    return result
