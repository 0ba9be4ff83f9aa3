import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import ndtr

from fsolink.atmosphere import LinkGeometry
from fsolink.channel_trace import (
    ChannelTrace,
    FadingModel,
    coherence_time,
    constant_trace,
    gamma_gamma_params,
    generate_trace,
    scintillation_index,
    trace_from_binary,
    trace_from_csv,
    trace_stats,
    trace_to_binary,
    trace_to_csv,
)
from fsolink.errors import TraceLengthError


def index_oracle(s):
    # Direct evaluation of the interpolation map.
    t1 = 0.49 * s / (1 + 1.11 * s ** 1.2) ** (7 / 6)
    t2 = 0.51 * s / (1 + 0.69 * s ** 1.2) ** (5 / 6)
    return math.exp(t1 + t2) - 1.0


class TestScintillationIndex:
    def test_zero(self):
        assert scintillation_index(0.0) == 0.0

    def test_weak_regime_tracks_rytov(self):
        value = scintillation_index(0.04)
        assert value == pytest.approx(0.04, rel=0.10)
        assert value == pytest.approx(index_oracle(0.04), rel=1e-12)

    def test_saturation(self):
        value = scintillation_index(100.0)
        assert 0.5 < value < 1.5
        assert value == pytest.approx(index_oracle(100.0), rel=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            scintillation_index(-0.1)


class TestGammaGammaParams:
    def test_values_at_unit_rytov(self):
        alpha, beta = gamma_gamma_params(1.0)
        assert alpha == pytest.approx(4.393859025392147, rel=1e-12)
        assert beta == pytest.approx(2.5636319795036955, rel=1e-12)

    @pytest.mark.parametrize("rytov", [0.05, 0.3, 1.0, 4.0, 25.0, 100.0])
    def test_implied_index_identity(self, rytov):
        alpha, beta = gamma_gamma_params(rytov)
        implied = 1 / alpha + 1 / beta + 1 / (alpha * beta)
        assert implied == pytest.approx(scintillation_index(rytov), rel=1e-6)

    def test_beta_limits_to_one_from_above(self):
        _, beta = gamma_gamma_params(100.0)
        assert 1.0 < beta < 1.1

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            gamma_gamma_params(0.0)


class TestCoherenceTime:
    def test_clear_preset_value(self):
        geom = LinkGeometry(distance_m=20000.0, rx_altitude_m=10000.0)
        expected = math.sqrt(1550e-9 * 20000.0) / 1.0
        assert coherence_time(geom, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_inverse_in_wind(self):
        geom = LinkGeometry(distance_m=20000.0)
        assert coherence_time(geom, 6.0) == pytest.approx(
            coherence_time(geom, 1.0) / 6.0, rel=1e-12
        )

    def test_sqrt_distance_scaling(self):
        t1 = coherence_time(LinkGeometry(distance_m=5000.0), 2.0)
        t4 = coherence_time(LinkGeometry(distance_m=20000.0), 2.0)
        assert t4 == pytest.approx(2.0 * t1, rel=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            coherence_time(LinkGeometry(distance_m=1000.0), 0.0)


class TestGenerateTrace:
    def test_no_fading_is_constant_ones(self):
        trace = generate_trace(FadingModel.log_normal(0.0), 1e-3, 1e4, 0.1, seed=5)
        assert np.all(trace.gains == 1.0)
        assert len(trace) == 1000

    def test_same_seed_bit_identical(self):
        a = generate_trace(FadingModel.log_normal(0.1), 1e-3, 1e5, 0.1, seed=42)
        b = generate_trace(FadingModel.log_normal(0.1), 1e-3, 1e5, 0.1, seed=42)
        assert np.array_equal(a.gains, b.gains)
        c = generate_trace(FadingModel.log_normal(0.1), 1e-3, 1e5, 0.1, seed=43)
        assert not np.array_equal(a.gains, c.gains)

    def test_log_normal_moments(self):
        trace = generate_trace(FadingModel.log_normal(0.1), 5e-5, 1e6, 1.0, seed=11)
        assert abs(float(np.mean(trace.gains)) - 1.0) < 0.02
        assert float(np.var(trace.gains)) == pytest.approx(0.1, rel=0.05)

    def test_log_normal_marginal_ks(self):
        sigma_i2 = 0.1
        trace = generate_trace(FadingModel.log_normal(sigma_i2), 5e-5, 1e6, 1.0, seed=11)
        s2 = math.log1p(sigma_i2)

        def cdf(x):
            return ndtr((np.log(x) + s2 / 2) / math.sqrt(s2))

        ks = stats.kstest(trace.gains, cdf).statistic
        assert ks < 0.01

    def test_acf_half_power_near_target(self):
        tau0 = 5e-5
        trace = generate_trace(FadingModel.log_normal(0.1), tau0, 1e6, 1.0, seed=11)
        est = trace_stats(trace)
        assert est.coherence_time_s == pytest.approx(tau0, rel=0.15)

    def test_gamma_gamma_marginal_and_mean(self):
        model = FadingModel.gamma_gamma_from_rytov(1.0)
        trace = generate_trace(model, 2e-5, 1e6, 1.0, seed=21)
        assert abs(float(np.mean(trace.gains)) - 1.0) < 0.02
        # Marginal contract: indistinguishable from an independent
        # product-of-gammas sample of the same size.
        rng = np.random.default_rng(987654321)
        reference = rng.gamma(model.alpha, 1 / model.alpha, 1_000_000) * rng.gamma(
            model.beta, 1 / model.beta, 1_000_000
        )
        ks = stats.ks_2samp(trace.gains, reference).statistic
        assert ks < 0.01

    def test_gamma_gamma_cdf_spot_check(self):
        # Empirical CDF of the sampler against numeric integration of
        # P(XY <= x) = E_Y[F_X(x/Y)] at a few grid points.
        model = FadingModel.gamma_gamma_from_rytov(1.0)
        trace = generate_trace(model, 2e-5, 1e6, 1.0, seed=33)
        a, b = model.alpha, model.beta
        x_grid = np.array([0.2, 0.5, 1.0, 2.0, 4.0])
        for x in x_grid:
            cdf, _ = integrate.quad(
                lambda y: stats.gamma.pdf(y, b, scale=1 / b)
                * stats.gamma.cdf(x / y, a, scale=1 / a),
                0,
                np.inf,
                limit=200,
            )
            empirical = float(np.mean(trace.gains <= x))
            assert empirical == pytest.approx(cdf, abs=0.012)

    def test_gamma_gamma_frozen_limit_is_single_draw(self):
        # Coherence time far beyond the window: the channel holds one
        # fading state, so the trace must be (nearly) constant.
        model = FadingModel.gamma_gamma_from_rytov(1.0)
        trace = generate_trace(model, 10.0, 1e5, 0.01, seed=4)
        spread = float(np.ptp(trace.gains))
        assert spread < 0.02 * float(np.mean(trace.gains))

    def test_gamma_gamma_acf_half_power(self):
        model = FadingModel.gamma_gamma_from_rytov(0.5)
        tau0 = 5e-5
        trace = generate_trace(model, tau0, 1e6, 1.0, seed=77)
        est = trace_stats(trace)
        assert est.coherence_time_s == pytest.approx(tau0, rel=0.15)

    def test_length_budget_enforced(self):
        with pytest.raises(TraceLengthError):
            generate_trace(FadingModel.log_normal(0.1), 1e-3, 1e9, 1.0, seed=0, max_samples=10**6)

    def test_parameter_domains(self):
        with pytest.raises(ValueError):
            generate_trace(FadingModel.log_normal(0.1), 0.0, 1e3, 1.0, seed=0)
        with pytest.raises(ValueError):
            generate_trace(FadingModel.log_normal(0.1), 1e-3, 0.0, 1.0, seed=0)
        with pytest.raises(ValueError):
            generate_trace(FadingModel.log_normal(0.1), 1e-3, 1e3, 0.0, seed=0)

    def test_model_validation(self):
        with pytest.raises(ValueError):
            FadingModel(kind="rayleigh")
        with pytest.raises(ValueError):
            FadingModel(kind="gamma_gamma", sigma_i2=0.5)
        with pytest.raises(ValueError):
            FadingModel(kind="gamma_gamma", sigma_i2=0.5, alpha=-1.0, beta=2.0)


class TestTraceStats:
    def test_constant_trace(self):
        est = trace_stats(constant_trace(1.0, gain=1.0))
        assert est.mean == 1.0
        assert est.sigma_i2 == 0.0
        assert math.isinf(est.coherence_time_s)

    def test_generated_trace_reports_target_index(self):
        trace = generate_trace(FadingModel.log_normal(0.2), 5e-5, 1e6, 0.5, seed=3)
        est = trace_stats(trace)
        assert est.sigma_i2 == pytest.approx(0.2, rel=0.08)

    def test_concatenation_preserves_mean(self):
        trace = generate_trace(FadingModel.log_normal(0.1), 1e-3, 1e4, 0.05, seed=9)
        doubled = ChannelTrace(
            sample_rate_hz=trace.sample_rate_hz,
            duration_s=2 * trace.duration_s,
            seed=trace.seed,
            gains=np.concatenate([trace.gains, trace.gains]),
            coherence_time_s=trace.coherence_time_s,
        )
        assert trace_stats(doubled).mean == pytest.approx(trace_stats(trace).mean, rel=1e-12)

    def test_too_short(self):
        with pytest.raises(ValueError):
            trace_stats(constant_trace(1.0, n=50))


class TestTraceSerialization:
    def test_csv_round_trip_bit_exact(self, tmp_path):
        trace = generate_trace(FadingModel.log_normal(0.15), 1e-3, 1e4, 0.05, seed=101)
        path = tmp_path / "trace.csv"
        trace_to_csv(trace, path)
        back = trace_from_csv(path)
        assert np.array_equal(back.gains, trace.gains)
        assert back.sample_rate_hz == trace.sample_rate_hz
        assert back.duration_s == trace.duration_s
        assert back.seed == trace.seed
        assert back.coherence_time_s == trace.coherence_time_s

    def test_binary_round_trip_bit_exact(self, tmp_path):
        trace = generate_trace(
            FadingModel.gamma_gamma_from_rytov(0.8), 1e-3, 1e4, 0.05, seed=55
        )
        path = tmp_path / "trace.ftr"
        trace_to_binary(trace, path)
        back = trace_from_binary(path)
        assert np.array_equal(back.gains, trace.gains)
        assert back.sample_rate_hz == trace.sample_rate_hz

    def test_binary_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTATRACE" + b"\0" * 64)
        with pytest.raises(ValueError):
            trace_from_binary(path)

    def test_csv_requires_metadata(self, tmp_path):
        path = tmp_path / "bare.csv"
        path.write_text("time_s,gain\n0.0,1.0\n")
        with pytest.raises(ValueError):
            trace_from_csv(path)


class TestTraceType:
    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ChannelTrace(
                sample_rate_hz=100.0,
                duration_s=1.0,
                seed=0,
                gains=np.ones(5),
                coherence_time_s=1.0,
            )

    def test_negative_gains_rejected(self):
        with pytest.raises(ValueError):
            ChannelTrace(
                sample_rate_hz=5.0,
                duration_s=1.0,
                seed=0,
                gains=np.array([1.0, -0.1, 1.0, 1.0, 1.0]),
                coherence_time_s=1.0,
            )
