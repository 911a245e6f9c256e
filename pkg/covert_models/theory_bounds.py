"""
Theory Bounds
Closed-form covertness and reliability bounds for the thermal-noise,
dark-count (OOK and PPM), pure-loss and converse regimes.

Logarithm bases: relative entropies are in nats; capacities, message sizes
and exponents of 2 are in bits. Every bound is returned together with its
unclamped value.
"""

import logging
import math
from typing import NamedTuple, Optional

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import xlogy
from scipy.stats import poisson

from .channel_model import ChannelParams, CovertBudget
from .errors import DegenerateRegimeError, ParameterRangeError, require_nonnegative, require_open_interval
from .rng_streams import chunk_seeds

logger = logging.getLogger(__name__)

PPM_EXACT_MAX_Q = 6
PPM_EXACT_MAX_TERMS = 2_000_000
MC_CHUNK = 100_000


class ClampedBound(NamedTuple):
    value: float
    raw: float


def _clamped(raw: float, low: float, high: float) -> ClampedBound:
    return ClampedBound(float(min(high, max(low, raw))), float(raw))


def _check_eps(epsilon: float) -> None:
    require_open_interval("epsilon", epsilon, 0.0, 0.5)


def _check_n(n: float) -> None:
    if n < 1:
        raise ParameterRangeError(f"n must be >= 1, got {n}")


# Thermal noise, Gaussian signalling

def qre_thermal(nbar0: float, nbar1: float) -> float:
    """D(rho(nbar0) || rho(nbar1)) in nats for thermal states of mean photon numbers nbar0, nbar1.

    Returns math.inf when nbar1 = 0 < nbar0.
    """
    require_nonnegative("nbar0", nbar0)
    require_nonnegative("nbar1", nbar1)
    if nbar1 == 0:
        return 0.0 if nbar0 == 0 else math.inf
    value = float(xlogy(nbar0, nbar0 / nbar1)) + (1.0 + nbar0) * (math.log1p(nbar1) - math.log1p(nbar0))
    return max(0.0, value)


def thermal_qre_per_mode(nbar: float, eta_b: float, eta_w: float, nbar_T: float) -> float:
    """Per-mode relative entropy between Willie's idle and averaged signal states"""
    return qre_thermal(eta_b * nbar_T, eta_w * nbar + eta_b * nbar_T)


def _require_thermal(nbar_T: float) -> None:
    if nbar_T <= 0:
        raise DegenerateRegimeError(
            "thermal bounds need nbar_T > 0; use pureloss_bounds for the pure-loss channel",
            code="ZERO_THERMAL_NOISE",
        )


def thermal_willie_bound(n: int, nbar: float, eta_b: float, eta_w: float, nbar_T: float) -> ClampedBound:
    """Pinsker lower bound on Willie's error with the second-order QRE bound"""
    _require_thermal(nbar_T)
    _check_n(n)
    require_nonnegative("nbar", nbar)
    x = eta_b * nbar_T
    raw = 0.5 - eta_w * nbar * math.sqrt(n) / (4.0 * math.sqrt(x * (1.0 + x)))
    return _clamped(raw, 0.0, 0.5)


def thermal_willie_bound_exact(n: int, nbar: float, eta_b: float, eta_w: float, nbar_T: float) -> ClampedBound:
    """Same Pinsker chain with the exact per-mode QRE"""
    _require_thermal(nbar_T)
    _check_n(n)
    D = thermal_qre_per_mode(nbar, eta_b, eta_w, nbar_T)
    return _clamped(0.5 - math.sqrt(n * D / 8.0), 0.0, 0.5)


def covert_nbar(n: int, epsilon: float, eta_b: float, eta_w: float, nbar_T: float) -> float:
    """Largest mean photon number per mode keeping the thermal bound at 1/2 - epsilon"""
    _require_thermal(nbar_T)
    _check_n(n)
    _check_eps(epsilon)
    if eta_w == 0:
        return math.inf
    x = eta_b * nbar_T
    return 4.0 * epsilon * math.sqrt(x * (1.0 + x)) / (math.sqrt(n) * eta_w)


def homodyne_noise_power(eta_b: float, nbar_T: float) -> float:
    if not 0.0 < eta_b <= 1.0:
        raise ParameterRangeError(f"eta_b must lie in (0, 1], got {eta_b}")
    require_nonnegative("nbar_T", nbar_T)
    return (2.0 * (1.0 - eta_b) * nbar_T + 1.0) / (4.0 * eta_b)


def homodyne_reliability_bound(B_bits: float, n: int, nbar: float, eta_b: float, nbar_T: float) -> ClampedBound:
    """Random-coding bound on Bob's error for B bits over the homodyne AWGN channel"""
    require_nonnegative("B_bits", B_bits)
    require_nonnegative("n", n)
    require_nonnegative("nbar", nbar)
    sigma2 = homodyne_noise_power(eta_b, nbar_T)
    exponent = B_bits - (n / 2.0) * math.log2(1.0 + nbar / (2.0 * sigma2))
    raw = math.inf if exponent > 1000 else 2.0 ** exponent
    return _clamped(raw, 0.0, 1.0)


def homodyne_covert_bits(n: int, budget: CovertBudget, eta_b: float, eta_w: float, nbar_T: float) -> float:
    """Bits sent covertly (covert_nbar) with homodyne bound at most delta"""
    nbar = covert_nbar(n, budget.epsilon, eta_b, eta_w, nbar_T)
    sigma2 = homodyne_noise_power(eta_b, nbar_T)
    bits = (n / 2.0) * math.log2(1.0 + nbar / (2.0 * sigma2)) + math.log2(budget.delta)
    return max(0.0, bits)


# Dark counts at Willie: OOK

def _require_dark_counts(lambda_w: float) -> None:
    if lambda_w <= 0:
        raise DegenerateRegimeError(
            "dark-count bounds need lambda_w > 0; use pureloss_bounds", code="ZERO_DARK_COUNT_RATE"
        )


def poisson_cutoff(lam: float, tail_tol: float) -> int:
    """Smallest K with P(Y > K) < tail_tol for Y ~ Poisson(lam)"""
    K = max(0, int(poisson.isf(tail_tol, lam)))
    while poisson.sf(K, lam) >= tail_tol:
        K += 1
    while K > 0 and poisson.sf(K - 1, lam) < tail_tol:
        K -= 1
    return K


def _expm1_ratio(s: float, lam: float) -> float:
    return math.expm1(s * s / lam)


class KlEstimate(NamedTuple):
    exact: float
    taylor_ub: float


def ook_kl(q: float, s_w: float, lambda_w: float, tail_tol: float = 1e-12) -> KlEstimate:
    """Per-mode KL divergence (nats) between dark counts and OOK-with-probability-q counts"""
    _require_dark_counts(lambda_w)
    if not 0.0 <= q < 1.0:
        raise ParameterRangeError(f"q must lie in [0, 1), got {q}")
    require_nonnegative("s_w", s_w)
    y = np.arange(poisson_cutoff(lambda_w, tail_tol) + 1)
    log_ratio = y * math.log1p(s_w / lambda_w) - s_w
    u = q * np.expm1(log_ratio)
    # the first-order term has zero mean under the dark law; drop it before truncating
    terms = poisson.pmf(y, lambda_w) * (u - np.log1p(u))
    return KlEstimate(float(terms.sum()), q * q * _expm1_ratio(s_w, lambda_w) / 2.0)


def ook_q_setting(n: int, epsilon: float, s_w: float, lambda_w: float) -> float:
    _require_dark_counts(lambda_w)
    _check_n(n)
    _check_eps(epsilon)
    spread = n * _expm1_ratio(s_w, lambda_w)
    return math.inf if spread == 0 else 4.0 * epsilon / math.sqrt(spread)


def ook_willie_bound(n: int, q: float, s_w: float, lambda_w: float) -> ClampedBound:
    _require_dark_counts(lambda_w)
    raw = 0.5 - (q / 4.0) * math.sqrt(n * _expm1_ratio(s_w, lambda_w))
    return _clamped(raw, 0.0, 0.5)


class ErrorExponent(NamedTuple):
    E0: float
    C: float


def ook_error_exponent(q: float, p_D_b: float, s_b: float) -> ErrorExponent:
    """Gallager exponent E0 (rho = 1, nats) of Bob's OOK channel and its slope C at q = 0"""
    if not 0.0 <= q <= 1.0:
        raise ParameterRangeError(f"q must lie in [0, 1], got {q}")
    if not 0.0 <= p_D_b < 1.0:
        raise ParameterRangeError(f"p_D_b must lie in [0, 1), got {p_D_b}")
    require_nonnegative("s_b", s_b)
    half = -math.expm1(-s_b / 2.0)
    signal_click = 1.0 - (1.0 - p_D_b) * math.exp(-s_b)
    no_click = (1.0 - p_D_b) * (1.0 - q * half) ** 2
    click = ((1.0 - q) * math.sqrt(p_D_b) + q * math.sqrt(signal_click)) ** 2
    E0 = -math.log(no_click + click)
    grow = math.expm1(s_b / 2.0) + p_D_b
    C = 2.0 * math.exp(-s_b / 2.0) * (grow - math.sqrt(p_D_b * (math.expm1(s_b) + p_D_b)))
    return ErrorExponent(max(0.0, E0), C)


def ook_bob_error_bound(B_bits: float, n: int, E0: float) -> ClampedBound:
    """Union-bound random coding: P_e <= 2^B exp(-n E0)"""
    exponent = B_bits * math.log(2.0) - n * E0
    raw = math.inf if exponent > 700 else math.exp(exponent)
    return _clamped(raw, 0.0, 1.0)


# Dark counts at Willie: PPM

class PpmKlEstimate(NamedTuple):
    value: float
    stderr: float
    method: str
    taylor_ub: float
    cutoff_K: Optional[int]


def _ppm_kl_terms(x: np.ndarray, zeta: float, s_w: float, lambda_w: float) -> np.ndarray:
    """u - log(1 + u) with u = p1/p0 - 1, for frames of counts x, shape (samples, Q).

    E[u] = 0 under the dark law, so this has the same mean as -log(p1/p0) while
    staying nonnegative term by term.
    """
    log_ratio = x * math.log1p(s_w / lambda_w) - s_w
    u = zeta * np.expm1(log_ratio).mean(axis=1)
    return u - np.log1p(u)


def _ppm_kl_chunk(seed_seq, size: int, zeta: float, Q: int, s_w: float, lambda_w: float):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    values = _ppm_kl_terms(rng.poisson(lambda_w, size=(size, Q)), zeta, s_w, lambda_w)
    return float(values.sum()), float(np.square(values).sum()), size


def ppm_kl(
    zeta: float,
    Q: int,
    s_w: float,
    lambda_w: float,
    cutoff_K: Optional[int] = None,
    tail_tol: float = 1e-10,
    method: str = "auto",
    samples: int = 10 ** 6,
    seed: int = 0,
    workers: int = 1,
) -> PpmKlEstimate:
    """Per-frame KL divergence (nats) between dark-count frames and zeta-selected PPM frames.

    ``method="exact"`` sums over {0..K}^Q; ``"mc"`` averages over frames drawn
    from the dark-count law; ``"auto"`` picks exact for Q <= 6 when the grid
    is small enough.
    """
    _require_dark_counts(lambda_w)
    if not 0.0 <= zeta <= 1.0:
        raise ParameterRangeError(f"zeta must lie in [0, 1], got {zeta}")
    if Q < 1:
        raise ParameterRangeError(f"Q must be >= 1, got {Q}")
    require_nonnegative("s_w", s_w)
    taylor = zeta * zeta * _expm1_ratio(s_w, lambda_w) / (2.0 * Q)

    K = cutoff_K if cutoff_K is not None else poisson_cutoff(lambda_w, tail_tol / Q)
    if method == "auto":
        method = "exact" if Q <= PPM_EXACT_MAX_Q and (K + 1) ** Q <= PPM_EXACT_MAX_TERMS else "mc"
        if method == "mc" and Q <= PPM_EXACT_MAX_Q:
            logger.warning(f"ppm_kl: {(K + 1) ** Q} exact terms for Q={Q}, K={K}; using Monte Carlo")

    if method == "exact":
        x = np.indices((K + 1,) * Q).reshape(Q, -1).T
        log_p0 = poisson.logpmf(x, lambda_w).sum(axis=1)
        value = float(np.sum(np.exp(log_p0) * _ppm_kl_terms(x, zeta, s_w, lambda_w)))
        return PpmKlEstimate(value, 0.0, "exact", taylor, K)
    if method != "mc":
        raise ParameterRangeError(f"method must be auto, exact or mc, got '{method}'")

    chunks = max(1, math.ceil(samples / MC_CHUNK))
    sizes = [MC_CHUNK] * (chunks - 1) + [samples - MC_CHUNK * (chunks - 1)]
    parts = Parallel(n_jobs=workers)(
        delayed(_ppm_kl_chunk)(seq, size, zeta, Q, s_w, lambda_w)
        for seq, size in zip(chunk_seeds(seed, chunks), sizes)
    )
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    count = sum(p[2] for p in parts)
    mean = total / count
    variance = max(0.0, total_sq / count - mean * mean) * count / max(1, count - 1)
    return PpmKlEstimate(mean, math.sqrt(variance / count), "mc", taylor, None)


class ZetaSetting(NamedTuple):
    zeta: float
    raw: float
    clamped: bool


def ppm_zeta_setting(n: int, Q: int, epsilon: float, s_w: float, lambda_w: float) -> ZetaSetting:
    _require_dark_counts(lambda_w)
    _check_n(n)
    _check_eps(epsilon)
    spread = n * _expm1_ratio(s_w, lambda_w)
    raw = math.inf if spread == 0 else 4.0 * epsilon * Q / math.sqrt(spread)
    clamped = raw > 1.0
    if clamped:
        logger.warning(f"ppm_zeta_setting: zeta={raw:.4g} exceeds 1 for n={n}, Q={Q}; clamped to 1")
    return ZetaSetting(min(1.0, raw), raw, clamped)


def classical_pinsker_pe_lb(D: float) -> ClampedBound:
    require_nonnegative("D", D)
    return _clamped(0.5 - math.sqrt(D / 8.0), 0.0, 0.5)


def ppm_willie_bound(n: int, Q: int, zeta: float, s_w: float, lambda_w: float) -> ClampedBound:
    """Pinsker bound over n/Q frames with the per-frame Taylor bound on the KL divergence"""
    _require_dark_counts(lambda_w)
    frame_D = zeta * zeta * _expm1_ratio(s_w, lambda_w) / (2.0 * Q)
    return classical_pinsker_pe_lb(n / Q * frame_D)


# Pure loss

class PureLossInput(BaseModel):
    model_config = ConfigDict(frozen=True)

    eta_w: float = Field(ge=0.0, le=1.0)
    epsilon: float = Field(gt=0.0, lt=0.5)
    avg_vacuum_overlap: float = Field(1.0, ge=0.0, le=1.0)


class PureLossBounds(NamedTuple):
    willie_pe_ub: float
    covert_overlap_requirement: float
    bob_pe_lb: float
    bob_pe_lb_raw: float
    validity_flag: bool
    meets_requirement: bool


def pureloss_bounds(data: PureLossInput) -> PureLossBounds:
    """Without noise at Willie a covert code must keep its vacuum weight near 1, which caps Bob"""
    eta_w, epsilon = data.eta_w, data.epsilon
    willie = 0.5 - (eta_w / 2.0) * (1.0 - data.avg_vacuum_overlap)
    if eta_w == 0:
        requirement, bob_raw, valid = 0.0, -math.inf, False
    else:
        requirement = max(0.0, 1.0 - 2.0 * epsilon / eta_w)
        bob_raw = 0.25 - math.sqrt(epsilon / eta_w)
        valid = epsilon <= eta_w / 16.0
    return PureLossBounds(
        willie_pe_ub=willie,
        covert_overlap_requirement=requirement,
        bob_pe_lb=_clamped(bob_raw, 0.0, 0.5).value,
        bob_pe_lb_raw=bob_raw,
        validity_flag=valid,
        meets_requirement=data.avg_vacuum_overlap >= requirement,
    )


# Converse

class ConverseInput(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    eta_w: float = Field(ge=0.0, le=1.0)
    mu_N: float = Field(ge=0.0)
    sigma2_N: float = Field(ge=0.0)
    p_fa_target: float = Field(gt=0.0, lt=1.0)
    nbar_u: float = Field(ge=0.0)
    sigma2_u: float = Field(0.0, ge=0.0)
    M: float = Field(gt=0.0)
    kappa: float = Field(1.0, gt=0.0, le=1.0)
    nbar_U: float = Field(gt=0.0)

    @classmethod
    def from_channel(cls, params: ChannelParams, n: int, **kwargs) -> "ConverseInput":
        """Noise moments per mode from Willie's dark counts and the attenuated thermal light"""
        leak = 1.0 - params.eta_w
        return cls(
            n=n,
            eta_w=params.eta_w,
            mu_N=params.lambda_w + leak * params.nbar_T,
            sigma2_N=params.lambda_w + leak ** 2 * (params.nbar_T + params.nbar_T ** 2),
            **kwargs,
        )


class ConverseBounds(NamedTuple):
    threshold_S: float
    p_md_ub: float
    p_md_raw: float
    bob_pe_lb: float
    bob_pe_lb_raw: float


def chebyshev_false_alarm_bound(S: float, n: int, mu_N: float, sigma2_N: float) -> float:
    gap = S - n * mu_N
    if gap <= 0:
        return 1.0
    return n * sigma2_N / gap ** 2


def converse_bounds(data: ConverseInput) -> ConverseBounds:
    """Photon-counting Willie with a Chebyshev threshold, and Bob's Holevo-limited error"""
    n = data.n
    spread = math.sqrt(n * data.sigma2_N / data.p_fa_target)
    S = n * data.mu_N + spread
    denominator = data.eta_w * data.nbar_u - spread
    if denominator <= 0:
        logger.debug("converse_bounds: missed-detection bound is vacuous")
        p_md_raw = math.inf
    else:
        p_md_raw = (n * data.sigma2_N + data.eta_w ** 2 * data.sigma2_u) / denominator ** 2

    ratio = data.nbar_U / n
    holevo = math.log2(1.0 + ratio) + ratio * math.log2(1.0 + 1.0 / ratio) + 1.0 / n
    rate = math.log2(data.kappa) / n + data.M / n
    bob_raw = data.kappa * (1.0 - holevo / rate) if rate > 0 else -math.inf
    return ConverseBounds(
        threshold_S=S,
        p_md_ub=_clamped(p_md_raw, 0.0, 1.0).value,
        p_md_raw=p_md_raw,
        bob_pe_lb=_clamped(bob_raw, 0.0, 1.0).value,
        bob_pe_lb_raw=bob_raw,
    )
