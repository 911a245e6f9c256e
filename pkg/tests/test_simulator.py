import math

import numpy as np
import pytest
from scipy.stats import binom, chi2_contingency, ttest_ind

from covert_models.channel_model import ChannelParams, PpmSession, load_preset
from covert_models.errors import ConfigError
from covert_models.ppm_link import bob_decode, encode_payload, erasure_probability, generate_secret, usable_frame_count
from covert_models.rng_streams import Stream, trial_rng
from covert_models.simulator import (
    ExperimentConfig,
    Regime,
    regime_zeta,
    run_experiment,
    run_trial,
    sample_dark_histogram,
    sample_h0_histogram,
    sample_h1_trial,
    sample_willie_h1_histogram,
    transmitted_sequence,
)
from covert_models.willie_detector import FrameClickCounts, llr_statistic


def _naive_histogram(rng, frames, Q, p_D):
    clicks = rng.random((frames, Q)) < p_D
    return np.bincount(clicks.sum(axis=1), minlength=Q + 1)


def test_regime_formulas():
    assert regime_zeta(Regime.CAREFUL, 32000, 32) == pytest.approx(0.25 * math.sqrt(0.001))
    assert regime_zeta(Regime.CARELESS, 320000, 32) == pytest.approx(0.003)
    assert regime_zeta("fixed-0.008", 10 ** 6, 32) == 0.008
    assert regime_zeta(Regime.EXPLICIT, 320, 32, zeta=0.2) == 0.2
    with pytest.raises(ConfigError):
        regime_zeta(Regime.EXPLICIT, 320, 32)


def test_counter_streams_are_independent_of_order():
    a = trial_rng(5, 17, Stream.CHANNEL_H1).random(4)
    trial_rng(5, 3, Stream.CHANNEL_H1).random(100)
    b = trial_rng(5, 17, Stream.CHANNEL_H1).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, trial_rng(5, 17, Stream.WILLIE_H0).random(4))


def test_h0_without_dark_clicks():
    session = PpmSession(n=3200, Q=32, zeta=0.1)
    counts = sample_h0_histogram(session, ChannelParams(p_D_w=0.0), seed=1)
    assert counts.histogram[0] == 100 and counts.histogram[1:].sum() == 0


def test_single_mode_frames_are_bernoulli():
    counts = sample_dark_histogram(10 ** 5, 1, 0.1, seed=2)
    assert abs(counts.histogram[1] - 10 ** 4) <= 4 * math.sqrt(10 ** 5 * 0.09)


def test_aggregated_sampler_matches_naive_sampler():
    aggregated = np.zeros(5, dtype=np.int64)
    naive = np.zeros(5, dtype=np.int64)
    for seed in range(100):
        aggregated += sample_dark_histogram(10 ** 4, 4, 0.1, seed=seed).histogram
        naive += _naive_histogram(np.random.default_rng(10 ** 6 + seed), 10 ** 4, 4, 0.1)
    _, p_value, _, _ = chi2_contingency(np.vstack([aggregated, naive]))
    assert p_value > 0.001


def test_h0_sampler_is_deterministic():
    session = PpmSession(n=32 * 1000, Q=32, zeta=0.1)
    params = load_preset("careful")
    a = sample_h0_histogram(session, params, trial_rng(1, 2, Stream.WILLIE_H0))
    b = sample_h0_histogram(session, params, trial_rng(1, 2, Stream.WILLIE_H0))
    np.testing.assert_array_equal(a.histogram, b.histogram)


def test_certain_pulse_gives_one_click_per_frame():
    session = PpmSession(n=32 * 100, Q=32, zeta=0.7)
    params = ChannelParams(p_D_w=0.0, nbar_det_w=50.0, p_D_b=0.0, nbar_det_b=50.0)
    key = generate_secret(session, seed=3)
    used = usable_frame_count(len(key), 31)
    data = np.random.default_rng(0).integers(0, 32, size=used // 31 * 15)
    coded = encode_payload(data, session)
    willie, bob = sample_h1_trial(session, params, key, coded, seed=4)
    assert willie.histogram[1] == used
    assert willie.histogram[0] == session.n_frames - used
    assert willie.histogram[2:].sum() == 0
    np.testing.assert_array_equal(bob.clicks[:used].sum(axis=1), 1)
    assert not bob.clicks[used:].any()
    decoded = bob_decode(bob, key, session, seed=5)
    np.testing.assert_array_equal(decoded.data_symbols, data)


def test_bob_erasure_rate_matches_channel_model():
    session = PpmSession(n=32 * 3100, Q=32, zeta=1.0)
    params = ChannelParams(p_D_b=0.01, nbar_det_b=1.0)
    erased = frames = 0
    for seed in range(20):
        key = generate_secret(session, seed=seed)
        used = usable_frame_count(len(key), session.rs_n)
        data = np.random.default_rng(100 + seed).integers(0, 32, size=used // 31 * 15)
        _, bob = sample_h1_trial(session, params, key, encode_payload(data, session), seed=200 + seed)
        erased += int(bob.erasures[:used].sum())
        frames += used
    p = erasure_probability(32, 0.01, 1.0)
    assert frames == 20 * 3100
    assert abs(erased / frames - p) <= 4 * math.sqrt(p * (1 - p) / frames)


def test_h1_without_selection_matches_h0():
    session = PpmSession(n=32 * 2000, Q=32, zeta=0.0)
    params = ChannelParams(p_D_w=5e-3, nbar_det_w=1.0)
    h0 = np.zeros(33, dtype=np.int64)
    h1 = np.zeros(33, dtype=np.int64)
    for seed in range(50):
        h0 += sample_h0_histogram(session, params, seed).histogram
        counts, pulsed = sample_willie_h1_histogram(session, params, 10 ** 4 + seed)
        assert pulsed == 0
        h1 += counts.histogram
    def collapse(h):
        return np.append(h[:3], h[3:].sum())

    _, p_value, _, _ = chi2_contingency(np.vstack([collapse(h0), collapse(h1)]))
    assert p_value > 0.001


def test_willie_h1_sampler_respects_leftover_policy():
    session = PpmSession(n=32 * 200, Q=32, zeta=0.2)
    for seed in range(20):
        _, pulsed = sample_willie_h1_histogram(session, load_preset("careful"), seed)
        assert pulsed % 31 == 0 and pulsed <= 200


def test_llr_detector_rejects_zero_dark_clicks():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.build(n=3200, regime=Regime.EXPLICIT, zeta=0.1, params=ChannelParams(nbar_det_w=0.1))
    assert info.value.code == "ZERO_DARK_CLICKS"


def test_unknown_detector_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.build(n=3200, regime=Regime.EXPLICIT, zeta=0.1, params=load_preset("target"), detector="psychic")


def test_nothing_to_detect_without_selection():
    config = ExperimentConfig.build(
        n=32 * 500, regime=Regime.EXPLICIT, zeta=0.0, params=load_preset("target"), trials=200, seed=1,
    )
    outcome = run_experiment(config)
    assert abs(outcome.detection.pe_hat - 0.5) <= outcome.detection.dkw_halfwidth
    assert outcome.throughput.bits_mean == 0.0


def test_click_detector_matches_miss_probability():
    frames, zeta, p_r_mean = 200, 0.2, 0.0222
    params = ChannelParams(p_D_w=0.0, nbar_det_w=p_r_mean, p_D_b=0.0, nbar_det_b=1.0)
    config = ExperimentConfig.build(
        n=32 * frames, regime=Regime.EXPLICIT, zeta=zeta, params=params,
        trials=2000, seed=11, detector="spd", decode_bob=False,
    )
    outcome = run_experiment(config)

    miss = math.exp(-p_r_mean)
    blocks = np.arange(frames // 31 + 1)
    p_blocks = binom.cdf(blocks * 31 + 30, frames, zeta) - binom.cdf(blocks * 31 - 1, frames, zeta)
    p_silent = float(np.sum(p_blocks * miss ** (31 * blocks)))
    sigma = 0.5 * math.sqrt(p_silent * (1 - p_silent) / 2000)
    assert outcome.detection.pe_hat == pytest.approx(0.5 * p_silent, abs=4 * sigma)
    assert math.isnan(outcome.pe_gauss)


def test_llr_separates_hypotheses():
    config = ExperimentConfig.build(
        n=320000, regime=Regime.FIXED_0008, params=load_preset("fixed-0.008"),
        trials=300, seed=5, decode_bob=False,
    )
    outcome = run_experiment(config)
    L0, L1 = outcome.detection.L0_samples, outcome.detection.L1_samples
    assert ttest_ind(L1, L0, alternative="greater").pvalue < 0.01
    assert outcome.detection.pe_hat < 0.5


def test_trial_llr_matches_statistic():
    config = ExperimentConfig.build(
        n=32 * 1000, regime=Regime.EXPLICIT, zeta=0.05, params=load_preset("target"), trials=1, seed=2,
    )
    outcome = run_trial(config, 0)
    counts = sample_h0_histogram(config.session, config.params, trial_rng(2, 0, Stream.WILLIE_H0))
    params = config.params
    p_r = 1 - math.exp(-params.nbar_det_w)
    assert outcome.llr_h0 == pytest.approx(llr_statistic(counts, 0.05, p_r, params.p_D_w, 32))


def test_bob_pipeline_statistics():
    config = ExperimentConfig.build(
        n=32 * 1000, regime=Regime.EXPLICIT, zeta=0.1, params=load_preset("target"), trials=40, seed=3,
    )
    outcome = run_experiment(config)
    for trial in outcome.trials:
        assert trial.pulsed_frames % 31 == 0
        assert trial.data_symbols_sent == trial.pulsed_frames // 31 * 15
        assert trial.bob_erasures <= trial.pulsed_frames
        assert trial.bob_decoded_bits <= trial.data_symbols_sent * 5
    assert 0 < outcome.throughput.bits_mean <= outcome.throughput.max_throughput
    assert outcome.throughput.ser <= 1e-2


def test_results_do_not_depend_on_worker_count():
    config = ExperimentConfig.build(
        n=32 * 500, regime=Regime.EXPLICIT, zeta=0.1, params=load_preset("target"), trials=600, seed=9,
    )
    one = run_experiment(config)
    two = run_experiment(config.model_copy(update={"workers": 2}))
    np.testing.assert_array_equal(one.detection.L0_samples, two.detection.L0_samples)
    np.testing.assert_array_equal(one.detection.L1_samples, two.detection.L1_samples)
    assert one.to_row(config) == two.to_row(config)


def test_rows_and_trial_frame():
    config = ExperimentConfig.build(
        n=32 * 500, regime=Regime.EXPLICIT, zeta=0.1, params=load_preset("target"), trials=20, seed=1,
    )
    outcome = run_experiment(config)
    row = outcome.to_row(config)
    assert list(row) == [
        "n", "Q", "zeta", "regime", "m", "pe_hat", "xi", "pe_gauss", "bob_bits_mean", "max_throughput", "ser",
    ]
    assert row["m"] == 20 and 0.0 <= row["pe_hat"] <= 0.5
    frame = outcome.trials_frame()
    assert len(frame) == 20
    assert {"llr_h0", "llr_h1", "bob_decoded_bits", "rs_block_failures"} <= set(frame.columns)


def test_transmitted_sequence_is_interleaved():
    config = ExperimentConfig.build(
        n=32 * 500, regime=Regime.EXPLICIT, zeta=0.1, params=load_preset("target"), trials=1, seed=1,
    )
    sequence, key, data = transmitted_sequence(config, 0)
    assert len(sequence) == 2 * config.session.n
    assert not sequence.bits[config.session.n:].any()
    used = usable_frame_count(len(key), 31)
    assert sequence.bits.sum() == used
    assert data.size == used // 31 * 15


def test_pooled_histograms_add_llrs():
    params = load_preset("target")
    a = sample_dark_histogram(500, 32, params.p_D_w, seed=1)
    b = sample_dark_histogram(300, 32, params.p_D_w, seed=2)
    merged = FrameClickCounts(a.histogram + b.histogram)
    args = (0.05, 0.03, params.p_D_w, 32)
    assert llr_statistic(merged, *args) == pytest.approx(llr_statistic(a, *args) + llr_statistic(b, *args))
