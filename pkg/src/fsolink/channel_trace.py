"""Seeded, time-correlated fading trace generation.

Software stand-in for a hardware intensity-channel emulator: produces
unit-mean sequences of linear intensity gains whose marginal distribution
(log-normal or gamma-gamma) and Gaussian-shaped autocorrelation are both
prescribed. Correlation is imposed through a stationary Gaussian process
and a copula/rank transform, so marginal and time structure can be chosen
independently. Everything is deterministic given the seed.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal

import numpy as np

from .errors import TraceLengthError

if TYPE_CHECKING:
    from .atmosphere import LinkGeometry

#: Largest trace generated in one in-memory block. Above this the caller
#: must lower rate or duration (bounded-memory contract).
MAX_TRACE_SAMPLES = 100_000_000

_BINARY_MAGIC = b"FSOTRC01"


def scintillation_index(rytov_var: float) -> float:
    """Map Rytov variance to scintillation index (normalized intensity variance).

    Uses the standard plane-wave weak-to-strong interpolation: equals the
    Rytov variance in the weak regime and saturates toward 1 as turbulence
    strengthens.

    Parameters
    ----------
    rytov_var : float
        Rytov variance, >= 0.

    Returns
    -------
    float
        Scintillation index sigma_I^2 >= 0.
    """
    if rytov_var < 0:
        raise ValueError(f"rytov_var must be >= 0, got {rytov_var}")
    if rytov_var == 0:
        return 0.0
    s = rytov_var
    t_large = 0.49 * s / (1.0 + 1.11 * s ** (6.0 / 5.0)) ** (7.0 / 6.0)
    t_small = 0.51 * s / (1.0 + 0.69 * s ** (6.0 / 5.0)) ** (5.0 / 6.0)
    return math.exp(t_large + t_small) - 1.0


def gamma_gamma_params(rytov_var: float) -> tuple[float, float]:
    """Plane-wave gamma-gamma shape parameters (alpha, beta) from Rytov variance.

    alpha and beta are the inverse normalized variances of the large- and
    small-scale intensity factors. The implied scintillation index
    1/alpha + 1/beta + 1/(alpha*beta) equals ``scintillation_index`` exactly.
    """
    if rytov_var <= 0:
        raise ValueError(
            "gamma-gamma parameters require rytov_var > 0; "
            "use the log-normal model for the zero-turbulence case"
        )
    s = rytov_var
    t_large = 0.49 * s / (1.0 + 1.11 * s ** (6.0 / 5.0)) ** (7.0 / 6.0)
    t_small = 0.51 * s / (1.0 + 0.69 * s ** (6.0 / 5.0)) ** (5.0 / 6.0)
    alpha = 1.0 / (math.exp(t_large) - 1.0)
    beta = 1.0 / (math.exp(t_small) - 1.0)
    return alpha, beta


@dataclass(frozen=True)
class FadingModel:
    """Marginal intensity distribution for a fading trace.

    ``log_normal`` uses sigma_i2 alone; ``gamma_gamma`` additionally needs
    the (alpha, beta) shape pair, normally derived from the Rytov variance.
    """

    kind: Literal["log_normal", "gamma_gamma"]
    sigma_i2: float = 0.0
    alpha: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in ("log_normal", "gamma_gamma"):
            raise ValueError(f"unknown fading model kind {self.kind!r}")
        if self.sigma_i2 < 0:
            raise ValueError(f"sigma_i2 must be >= 0, got {self.sigma_i2}")
        if self.kind == "gamma_gamma":
            if self.alpha is None or self.beta is None:
                raise ValueError("gamma_gamma model requires alpha and beta")
            if self.alpha <= 0 or self.beta <= 0:
                raise ValueError("alpha and beta must be > 0")

    @classmethod
    def log_normal(cls, sigma_i2: float) -> "FadingModel":
        return cls(kind="log_normal", sigma_i2=sigma_i2)

    @classmethod
    def gamma_gamma_from_rytov(cls, rytov_var: float) -> "FadingModel":
        alpha, beta = gamma_gamma_params(rytov_var)
        sigma_i2 = 1.0 / alpha + 1.0 / beta + 1.0 / (alpha * beta)
        return cls(kind="gamma_gamma", sigma_i2=sigma_i2, alpha=alpha, beta=beta)


@dataclass(frozen=True)
class ChannelTrace:
    """Time series of nonnegative linear intensity gains at a fixed rate."""

    sample_rate_hz: float
    duration_s: float
    seed: int
    gains: np.ndarray = field(repr=False)
    coherence_time_s: float

    def __post_init__(self):
        expected = int(round(self.sample_rate_hz * self.duration_s))
        if len(self.gains) != expected:
            raise ValueError(
                f"trace length {len(self.gains)} does not match "
                f"rate*duration = {expected}"
            )
        if len(self.gains) and float(np.min(self.gains)) < 0.0:
            raise ValueError("trace gains must be nonnegative")

    def __len__(self) -> int:
        return len(self.gains)

    @property
    def times_s(self) -> np.ndarray:
        return np.arange(len(self.gains)) / self.sample_rate_hz


@dataclass(frozen=True)
class TraceStats:
    """Sample moments and coherence-time estimate of a trace."""

    mean: float
    sigma_i2: float
    coherence_time_s: float


def coherence_time(geometry: "LinkGeometry", wind_speed: float) -> float:
    """Frozen-turbulence coherence time: Fresnel scale over transverse wind.

    tau0 = sqrt(lambda * distance) / v. Halving the wind speed doubles the
    coherence time; quadrupling the distance doubles it.
    """
    if wind_speed <= 0:
        raise ValueError(f"wind_speed must be > 0, got {wind_speed}")
    return math.sqrt(geometry.wavelength_m * geometry.distance_m) / wind_speed


def _gaussian_acf_series(
    n: int, dt: float, tau0: float, rng: np.random.Generator
) -> np.ndarray:
    """Stationary standard-normal series with autocorrelation exp(-(t/tau0)^2).

    Circulant embedding: the circular covariance c_j = rho(min(j, n-j) dt)
    has a nonnegative DFT for a Gaussian correlation shape, so filtering
    white noise with sqrt of that spectrum gives an exact (circularly
    stationary) sample. Wrap-around correlation is part of the contract;
    it matches the open-path ACF whenever tau0 << n*dt.
    """
    if n == 1:
        return rng.standard_normal(1)
    lags = np.minimum(np.arange(n), n - np.arange(n)) * dt
    cov = np.exp(-((lags / tau0) ** 2))
    spectrum = np.fft.fft(cov).real
    # Tiny negative eigenvalues can appear from truncation; clip them.
    np.clip(spectrum, 0.0, None, out=spectrum)
    white = rng.standard_normal(n)
    series = np.fft.ifft(np.sqrt(spectrum) * np.fft.fft(white)).real
    return series


_GG_TABLE_SIZE = 1 << 20


def _gamma_gamma_quantiles(g, alpha, beta, seed_x, seed_y) -> np.ndarray:
    """Copula transform of a standard-normal series to the gamma-gamma marginal.

    The quantile function is tabulated from a large sorted sample of
    products of two unit-mean gamma variates; the Gaussian series is then
    mapped through rank position sqrt -> Phi(g) with linear interpolation.
    Unlike direct rank matching of n fresh draws, this stays constant when
    the driving series is constant (the frozen-channel limit) while being
    asymptotically identical in the well-mixed regime.
    """
    from scipy.special import ndtr

    rng_x = np.random.default_rng(seed_x)
    rng_y = np.random.default_rng(seed_y)
    table = np.sort(
        rng_x.gamma(alpha, 1.0 / alpha, _GG_TABLE_SIZE)
        * rng_y.gamma(beta, 1.0 / beta, _GG_TABLE_SIZE)
    )
    positions = ndtr(g) * (_GG_TABLE_SIZE - 1)
    idx = np.clip(positions.astype(np.intp), 0, _GG_TABLE_SIZE - 2)
    frac = positions - idx
    return table[idx] * (1.0 - frac) + table[idx + 1] * frac


def generate_trace(
    model: FadingModel,
    coherence_time_s: float,
    sample_rate_hz: float,
    duration_s: float,
    seed: int,
    max_samples: int = MAX_TRACE_SAMPLES,
) -> ChannelTrace:
    """Generate a unit-mean fading trace with prescribed marginal and ACF.

    Parameters
    ----------
    model : FadingModel
        Target marginal distribution.
    coherence_time_s : float
        Gaussian-ACF time constant tau0; the autocorrelation of the
        underlying process is exp(-(t/tau0)^2), so the half-power point
        sits at tau0*sqrt(ln 2).
    sample_rate_hz, duration_s : float
        Trace sampling. Length is round(rate*duration).
    seed : int
        Master seed; identical inputs give bit-identical traces.
    max_samples : int
        In-memory budget; longer requests raise ``TraceLengthError``.

    Notes
    -----
    The log-normal trace is the exact monotone transform
    exp(sigma*g - sigma^2/2) of the correlated Gaussian g. The gamma-gamma
    trace maps g through the empirical quantile function of a large
    product-of-two-gammas sample (Gaussian copula), which keeps the
    marginal and degrades gracefully to a single frozen draw when the
    coherence time exceeds the trace duration.
    """
    if sample_rate_hz <= 0:
        raise ValueError(f"sample_rate_hz must be > 0, got {sample_rate_hz}")
    if duration_s <= 0:
        raise ValueError(f"duration_s must be > 0, got {duration_s}")
    if coherence_time_s <= 0:
        raise ValueError(f"coherence_time_s must be > 0, got {coherence_time_s}")
    n = int(round(sample_rate_hz * duration_s))
    if n < 1:
        raise ValueError("rate*duration rounds to zero samples")
    if n > max_samples:
        raise TraceLengthError(
            f"trace of {n} samples exceeds the {max_samples}-sample budget; "
            "lower sample_rate_hz or duration_s"
        )

    if model.sigma_i2 == 0.0:
        gains = np.ones(n)
    else:
        seq = np.random.SeedSequence(seed)
        child_g, child_x, child_y = seq.spawn(3)
        g = _gaussian_acf_series(
            n, 1.0 / sample_rate_hz, coherence_time_s, np.random.default_rng(child_g)
        )
        if model.kind == "log_normal":
            s2 = math.log1p(model.sigma_i2)
            gains = np.exp(math.sqrt(s2) * g - 0.5 * s2)
        else:
            gains = _gamma_gamma_quantiles(
                g, model.alpha, model.beta, child_x, child_y
            )

    return ChannelTrace(
        sample_rate_hz=sample_rate_hz,
        duration_s=duration_s,
        seed=seed,
        gains=gains,
        coherence_time_s=coherence_time_s,
    )


def constant_trace(duration_s: float, gain: float = 1.0, n: int = 1000) -> ChannelTrace:
    """Non-fading trace of ``n`` equal gains spanning ``duration_s``."""
    if duration_s <= 0:
        raise ValueError(f"duration_s must be > 0, got {duration_s}")
    if gain < 0:
        raise ValueError(f"gain must be >= 0, got {gain}")
    return ChannelTrace(
        sample_rate_hz=n / duration_s,
        duration_s=duration_s,
        seed=0,
        gains=np.full(n, float(gain)),
        coherence_time_s=math.inf,
    )


def trace_stats(trace: ChannelTrace, max_lag: int | None = None) -> TraceStats:
    """Sample mean, scintillation index, and ACF half-power coherence time.

    The coherence-time estimate inverts the Gaussian-ACF relation: the lag
    where the normalized autocovariance first drops below 1/2 (linearly
    interpolated) divided by sqrt(ln 2). Infinite for a constant trace.
    """
    g = trace.gains
    if len(g) < 100:
        raise ValueError(f"need >= 100 samples for statistics, got {len(g)}")
    mean = float(np.mean(g))
    var = float(np.var(g))
    sigma_i2 = var / mean**2 if mean != 0 else 0.0
    if var == 0.0:
        return TraceStats(mean=mean, sigma_i2=sigma_i2, coherence_time_s=math.inf)

    n = len(g)
    if max_lag is None:
        max_lag = n // 2
    # Biased autocovariance via FFT, normalized to 1 at lag 0.
    centered = g - mean
    m = 1 << int(math.ceil(math.log2(2 * n)))
    spec = np.fft.rfft(centered, m)
    acov = np.fft.irfft(spec * np.conj(spec), m)[: max_lag + 1]
    acf = acov / acov[0]

    below = np.nonzero(acf < 0.5)[0]
    if len(below) == 0:
        return TraceStats(mean=mean, sigma_i2=sigma_i2, coherence_time_s=math.inf)
    j = int(below[0])
    if j == 0:
        t_half = 0.0
    else:
        frac = (acf[j - 1] - 0.5) / (acf[j - 1] - acf[j])
        t_half = (j - 1 + frac) / trace.sample_rate_hz
    return TraceStats(
        mean=mean,
        sigma_i2=sigma_i2,
        coherence_time_s=t_half / math.sqrt(math.log(2.0)),
    )


def trace_to_csv(trace: ChannelTrace, path) -> None:
    """Write ``time_s,gain`` rows plus metadata comments; bit-exact round trip."""
    with open(path, "w", newline="") as fh:
        fh.write("# fsolink-trace-v1\n")
        fh.write(f"# sample_rate_hz={trace.sample_rate_hz!r}\n")
        fh.write(f"# duration_s={trace.duration_s!r}\n")
        fh.write(f"# coherence_time_s={trace.coherence_time_s!r}\n")
        fh.write(f"# seed={trace.seed}\n")
        writer = csv.writer(fh)
        writer.writerow(["time_s", "gain"])
        rate = trace.sample_rate_hz
        for k, gain in enumerate(trace.gains):
            writer.writerow([repr(k / rate), repr(float(gain))])


def trace_from_csv(path) -> ChannelTrace:
    meta: dict[str, str] = {}
    gains = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                continue
            if line.strip().startswith("time_s"):
                continue
            row = line.strip()
            if not row:
                continue
            gains.append(float(row.split(",")[1]))
    required = ("sample_rate_hz", "duration_s", "coherence_time_s", "seed")
    missing = [key for key in required if key not in meta]
    if missing:
        raise ValueError(f"trace CSV missing metadata keys: {missing}")
    return ChannelTrace(
        sample_rate_hz=float(meta["sample_rate_hz"]),
        duration_s=float(meta["duration_s"]),
        seed=int(meta["seed"]),
        gains=np.array(gains),
        coherence_time_s=float(meta["coherence_time_s"]),
    )


def trace_to_binary(trace: ChannelTrace, path) -> None:
    """Raw little-endian float64 format with an 8-byte magic header."""
    header = struct.pack(
        "<8sddd q q",
        _BINARY_MAGIC,
        trace.sample_rate_hz,
        trace.duration_s,
        trace.coherence_time_s,
        trace.seed,
        len(trace.gains),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(trace.gains, dtype="<f8").tobytes())


def trace_from_binary(path) -> ChannelTrace:
    header_size = struct.calcsize("<8sddd q q")
    with open(path, "rb") as fh:
        header = fh.read(header_size)
        magic, rate, duration, tau0, seed, n = struct.unpack("<8sddd q q", header)
        if magic != _BINARY_MAGIC:
            raise ValueError(f"not a trace file: bad magic {magic!r}")
        payload = fh.read(8 * n)
    if len(payload) != 8 * n:
        raise ValueError("trace file truncated")
    gains = np.frombuffer(payload, dtype="<f8").copy()
    return ChannelTrace(
        sample_rate_hz=rate,
        duration_s=duration,
        seed=seed,
        gains=gains,
        coherence_time_s=tau0,
    )
