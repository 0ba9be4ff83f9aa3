"""PAM-4 intensity modem with statistics-based BER estimation.

Bits are numpy uint8 arrays of 0/1. Intensity levels are nonnegative
(direct detection); the Gray map is 00/01/11/10 onto ascending levels.
Channel application is chunked with per-chunk derived noise seeds so the
result is independent of how many workers execute the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .channel_trace import ChannelTrace
from .errors import DegenerateLevelsError, MissingLevelError, TraceTooShortError

_GRAY_FORWARD = np.array([0, 1, 3, 2])  # bit pair (msb,lsb) value -> level index
_GRAY_MSB = np.array([0, 0, 1, 1], dtype=np.uint8)  # level index -> msb
_GRAY_LSB = np.array([0, 1, 1, 0], dtype=np.uint8)  # level index -> lsb

_CHUNK_SYMBOLS = 1 << 16
_KMEANS_MAX_POINTS = 1 << 20


@dataclass(frozen=True)
class Pam4Config:
    """Four-level intensity modulation parameters."""

    symbol_rate_hz: float = 2e9
    levels: tuple[float, float, float, float] = (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)
    gray_mapping: bool = True
    samples_per_symbol: int = 1

    def __post_init__(self):
        if self.symbol_rate_hz <= 0:
            raise ValueError(f"symbol rate must be > 0, got {self.symbol_rate_hz}")
        lv = tuple(float(x) for x in self.levels)
        if len(lv) != 4:
            raise ValueError(f"need exactly 4 levels, got {len(lv)}")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise ValueError(f"levels must be strictly increasing, got {lv}")
        if lv[0] < 0:
            raise ValueError(f"intensity levels must be nonnegative, got {lv}")
        if self.samples_per_symbol < 1:
            raise ValueError(
                f"samples_per_symbol must be >= 1, got {self.samples_per_symbol}"
            )
        object.__setattr__(self, "levels", lv)


@dataclass(frozen=True)
class LevelStats:
    """Per-level received sample statistics and the three eye Q-factors."""

    means: np.ndarray = field(repr=False)
    stds: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    q_factors: np.ndarray = field(repr=False)

    def __post_init__(self):
        if np.any(np.asarray(self.counts) <= 0):
            raise MissingLevelError(
                f"every level needs samples, got counts {list(self.counts)}"
            )
        if np.any(np.asarray(self.stds) < 0):
            raise ValueError("standard deviations must be >= 0")


@dataclass(frozen=True)
class BerReport:
    """Counted and Q-factor-estimated bit error rates for one run."""

    bits_tx: int
    bit_errors: int
    ber_counted: float
    ber_estimated: float
    level_stats: LevelStats
    snr_db: float


def modulate(bits: np.ndarray, config: Pam4Config) -> tuple[np.ndarray, int]:
    """Map a bit stream onto PAM-4 intensity symbols.

    Odd-length inputs are zero-padded by one bit; the returned pad count
    makes the padding explicit. Returns (symbols, pad_bits).
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1:
        raise ValueError("bits must be a 1-D array")
    pad_bits = len(bits) % 2
    if pad_bits:
        bits = np.concatenate([bits, np.zeros(1, dtype=np.uint8)])
    pairs = (bits[0::2].astype(np.intp) << 1) | bits[1::2]
    idx = _GRAY_FORWARD[pairs] if config.gray_mapping else pairs
    return np.asarray(config.levels)[idx], pad_bits


def apply_channel(
    symbols: np.ndarray,
    trace: ChannelTrace,
    noise_std: float,
    seed: int,
    symbol_rate_hz: float | None = None,
    workers: int = 1,
) -> np.ndarray:
    """r_k = H(t_k) * x_k + n_k with zero-order-hold gains and AWGN.

    The trace is sampled at each symbol start time; it must cover the full
    symbol duration. Noise is generated in fixed-size chunks, each from a
    seed derived from (seed, chunk index), so the output depends only on
    the inputs and never on the worker count.
    """
    symbols = np.asarray(symbols, dtype=float)
    if noise_std < 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")
    n = len(symbols)
    rate = trace.sample_rate_hz if symbol_rate_hz is None else symbol_rate_hz
    t_last = (n - 1) / rate
    idx_last = int(t_last * trace.sample_rate_hz)
    if idx_last >= len(trace.gains):
        raise TraceTooShortError(
            f"trace covers {trace.duration_s:g} s but {n} symbols at "
            f"{rate:g} Baud need {n / rate:g} s"
        )
    if symbol_rate_hz is None or rate == trace.sample_rate_hz:
        gains = trace.gains[:n]
    else:
        idx = (np.arange(n) * (trace.sample_rate_hz / rate)).astype(np.intp)
        gains = trace.gains[idx]
    received = gains * symbols

    if noise_std > 0:
        n_chunks = (n + _CHUNK_SYMBOLS - 1) // _CHUNK_SYMBOLS

        def noise_chunk(i: int) -> np.ndarray:
            lo = i * _CHUNK_SYMBOLS
            hi = min(lo + _CHUNK_SYMBOLS, n)
            rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
            return rng.normal(0.0, noise_std, hi - lo)

        if workers > 1 and n_chunks > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                chunks = list(pool.map(noise_chunk, range(n_chunks)))
        else:
            chunks = [noise_chunk(i) for i in range(n_chunks)]
        received = received + np.concatenate(chunks)
    return received


def _kmeans_levels(samples: np.ndarray) -> np.ndarray:
    """1-D k-means (k=4) level means, initialized at quartile medians."""
    if len(samples) > _KMEANS_MAX_POINTS:
        stride = len(samples) // _KMEANS_MAX_POINTS + 1
        samples = samples[::stride]
    s = np.sort(samples)
    quarter = len(s) // 4
    if quarter == 0:
        raise DegenerateLevelsError("too few samples for adaptive thresholds")
    means = np.array([np.median(s[i * quarter : (i + 1) * quarter]) for i in range(4)])
    for _ in range(50):
        cuts = 0.5 * (means[:-1] + means[1:])
        # right=True sends a sample sitting exactly on a threshold to the
        # lower level.
        labels = np.digitize(samples, cuts, right=True)
        counts = np.bincount(labels, minlength=4)
        if np.any(counts == 0):
            raise DegenerateLevelsError(
                f"adaptive estimation found an empty level (counts {list(counts)})"
            )
        new_means = np.bincount(labels, weights=samples, minlength=4) / counts
        if np.allclose(new_means, means, rtol=1e-12, atol=1e-15):
            means = new_means
            break
        means = new_means
    if np.any(np.diff(means) <= 0):
        raise DegenerateLevelsError(
            f"adaptive estimation found fewer than 4 distinct levels: {list(means)}"
        )
    return means


def demodulate(
    samples: np.ndarray,
    config: Pam4Config,
    thresholds=None,
) -> np.ndarray:
    """Nearest-region PAM-4 decision back to bits (inverse Gray map).

    ``thresholds`` may be three explicit cut points, the string
    ``"adaptive"`` (k-means level estimation, scale invariant), or None to
    use midpoints of the configured levels.
    """
    samples = np.asarray(samples, dtype=float)
    if len(samples) == 0:
        raise ValueError("no samples to demodulate")
    if isinstance(thresholds, str):
        if thresholds != "adaptive":
            raise ValueError(f"unknown threshold mode {thresholds!r}")
        means = _kmeans_levels(samples)
        cuts = 0.5 * (means[:-1] + means[1:])
    elif thresholds is None:
        levels = np.asarray(config.levels)
        cuts = 0.5 * (levels[:-1] + levels[1:])
    else:
        cuts = np.asarray(thresholds, dtype=float)
        if cuts.shape != (3,):
            raise ValueError(f"need exactly 3 thresholds, got shape {cuts.shape}")
        if np.any(np.diff(cuts) <= 0):
            raise ValueError("thresholds must be strictly increasing")
    idx = np.digitize(samples, cuts, right=True)
    bits = np.empty(2 * len(idx), dtype=np.uint8)
    if config.gray_mapping:
        bits[0::2] = _GRAY_MSB[idx]
        bits[1::2] = _GRAY_LSB[idx]
    else:
        bits[0::2] = (idx >> 1).astype(np.uint8)
        bits[1::2] = (idx & 1).astype(np.uint8)
    return bits


def eye_stats(samples: np.ndarray, labels: np.ndarray) -> LevelStats:
    """Genie-aided per-level moments from received samples and true levels."""
    samples = np.asarray(samples, dtype=float)
    labels = np.asarray(labels, dtype=np.intp)
    if samples.shape != labels.shape:
        raise ValueError("samples and labels must have equal length")
    counts = np.bincount(labels, minlength=4)
    if np.any(counts == 0):
        raise MissingLevelError(
            f"level(s) without samples: counts {list(counts)}"
        )
    sums = np.bincount(labels, weights=samples, minlength=4)
    means = sums / counts
    # Two-pass variance: immune to the cancellation that would report
    # nonzero noise on noiseless levels.
    residuals_sq = (samples - means[labels]) ** 2
    variances = np.bincount(labels, weights=residuals_sq, minlength=4) / counts
    stds = np.sqrt(variances)
    gaps = np.diff(means)
    denoms = stds[1:] + stds[:-1]
    with np.errstate(divide="ignore"):
        q = np.where(denoms > 0, gaps / np.where(denoms > 0, denoms, 1.0), np.inf)
        q = np.where((denoms == 0) & (gaps <= 0), -np.inf, q)
    return LevelStats(means=means, stds=stds, counts=counts, q_factors=q)


def gaussian_tail(q) -> np.ndarray | float:
    """P(N(0,1) > q), the Q function."""
    return 0.5 * erfc(np.asarray(q, dtype=float) / math.sqrt(2.0))


def estimate_ber_from_stats(stats: LevelStats) -> float:
    """Q-factor BER estimate (1/4) * sum_i Q(q_i) over the three eyes.

    Adjacent-level errors dominate under Gray coding: symbol error rate
    (1/2) * sum Q(q_i), one wrong bit per two transmitted per symbol error.
    Infinite Q-factors (noiseless eyes) contribute zero.
    """
    q = np.asarray(stats.q_factors, dtype=float)
    gaps = np.diff(np.asarray(stats.means))
    denoms = np.asarray(stats.stds)[1:] + np.asarray(stats.stds)[:-1]
    if np.any((denoms == 0) & (gaps <= 0)):
        raise ValueError(
            "cannot estimate BER: an eye has zero noise and a nonpositive gap"
        )
    contributions = np.where(np.isinf(q), 0.0, gaussian_tail(np.where(np.isinf(q), 0.0, q)))
    ber = 0.25 * float(np.sum(contributions))
    return min(max(ber, 0.0), 0.5)


def count_ber(tx_bits: np.ndarray, rx_bits: np.ndarray) -> tuple[int, int, float]:
    """Exact Hamming error count: returns (bit_errors, bits, ratio)."""
    tx = np.asarray(tx_bits, dtype=np.uint8)
    rx = np.asarray(rx_bits, dtype=np.uint8)
    if tx.shape != rx.shape:
        raise ValueError(
            f"bit streams differ in length: {tx.shape} vs {rx.shape}"
        )
    errors = int(np.count_nonzero(tx != rx))
    return errors, len(tx), errors / len(tx) if len(tx) else 0.0


def q_for_target_ber(target_ber: float) -> float:
    """Eye Q-factor at which the PAM-4 estimate (3/4) Q(q) equals target_ber."""
    if not 0.0 < target_ber < 0.375:
        raise ValueError(f"target BER must be in (0, 0.375), got {target_ber}")
    from scipy.special import ndtri

    return float(-ndtri(4.0 * target_ber / 3.0))


def matched_filter(received: np.ndarray, samples_per_symbol: int) -> np.ndarray:
    """Average each symbol's samples (rectangular-pulse matched filter)."""
    if samples_per_symbol == 1:
        return received
    return received.reshape(-1, samples_per_symbol).mean(axis=1)


def calibrate_noise_std(
    symbols: np.ndarray,
    labels: np.ndarray,
    trace: ChannelTrace,
    target_q: float,
    seed: int,
    symbol_rate_hz: float | None = None,
    rel_tol: float = 1e-4,
    samples_per_symbol: int = 1,
) -> float:
    """Solve for the noise level that hits a target mean eye Q-factor.

    Bisection on noise_std against the mean of the three measured eye
    Q-factors over the given calibration block. The same noise seed is
    used at every trial level, so the bracketed function is deterministic
    and strictly decreasing; the interval is shrunk to ``rel_tol`` relative
    width. The Q-factor is measured after the matched filter when symbols
    are oversampled.
    """
    if target_q <= 0:
        raise ValueError(f"target_q must be > 0, got {target_q}")
    tx = np.repeat(symbols, samples_per_symbol) if samples_per_symbol > 1 else symbols
    rate = (
        None
        if symbol_rate_hz is None
        else symbol_rate_hz * samples_per_symbol
    )

    def mean_q(noise_std: float) -> float:
        received = matched_filter(
            apply_channel(tx, trace, noise_std, seed, symbol_rate_hz=rate),
            samples_per_symbol,
        )
        stats = eye_stats(received, labels)
        return float(np.mean(stats.q_factors))

    span = float(np.max(symbols) - np.min(symbols)) or 1.0
    hi = span
    for _ in range(40):
        if mean_q(hi) < target_q:
            break
        hi *= 4.0
    else:
        raise ValueError("could not bracket the target Q-factor from above")
    lo = span * 1e-9
    if mean_q(lo) <= target_q:
        raise ValueError(
            "target Q-factor unreachable: the channel itself is too noisy"
        )
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if mean_q(mid) > target_q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ber_report(
    tx_bits: np.ndarray, rx_bits: np.ndarray, stats: LevelStats
) -> BerReport:
    """Bundle counted and estimated BER with an SNR read off the eye stats."""
    errors, bits, ratio = count_ber(tx_bits, rx_bits)
    estimated = estimate_ber_from_stats(stats)
    counts = np.asarray(stats.counts, dtype=float)
    mean_power = float(np.sum(counts * np.asarray(stats.means) ** 2) / np.sum(counts))
    noise_var = float(np.sum(counts * np.asarray(stats.stds) ** 2) / np.sum(counts))
    snr_db = 10.0 * math.log10(mean_power / noise_var) if noise_var > 0 else math.inf
    return BerReport(
        bits_tx=bits,
        bit_errors=errors,
        ber_counted=ratio,
        ber_estimated=estimated,
        level_stats=stats,
        snr_db=snr_db,
    )
