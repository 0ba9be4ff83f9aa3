"""Quadrant-detector pointing/acquisition/tracking simulation.

Quadrant convention (beam-centered displacement in detector coordinates):
Q1 = +x+y, Q2 = -x+y, Q3 = -x-y, Q4 = +x-y. The displacement estimator is
the normalized quadrant difference scaled by a calibration gain, so it is
invariant to uniform power scaling and odd under offset negation.

The closed-loop simulation takes m detector samples per correction window
(the channel is held static within a window), averages them, and applies a
proportional correction. Multi-sampling trades acquisition time for an
amplitude-SNR gain of sqrt(m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erf

from .channel_trace import _gaussian_acf_series
from .errors import TrackingDivergedError

#: Consecutive off-detector steps tolerated before declaring divergence.
_DIVERGENCE_STEPS = 10


@dataclass(frozen=True)
class QdReading:
    """One acquisition sample: nonnegative power per quadrant."""

    v1: float
    v2: float
    v3: float
    v4: float

    def __post_init__(self):
        for name in ("v1", "v2", "v3", "v4"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def total(self) -> float:
        return self.v1 + self.v2 + self.v3 + self.v4


@dataclass(frozen=True)
class QdGeometry:
    """Square quadrant detector with a dead-zone gap between cells.

    ``estimator_gain`` converts the normalized quadrant difference to
    meters; when omitted it is calibrated so the estimator has unit slope
    for small displacements of this geometry (the actual optics scale is a
    free calibration).
    """

    detector_size_m: float = 1e-3
    beam_radius_m: float = 0.3e-3
    gap_m: float = 0.0
    estimator_gain: float | None = None

    def __post_init__(self):
        if self.detector_size_m <= 0:
            raise ValueError(f"detector size must be > 0, got {self.detector_size_m}")
        if self.beam_radius_m <= 0:
            raise ValueError(f"beam radius must be > 0, got {self.beam_radius_m}")
        if self.gap_m < 0:
            raise ValueError(f"gap must be >= 0, got {self.gap_m}")
        if self.gap_m >= self.detector_size_m:
            raise ValueError("gap must be smaller than the detector")
        if self.estimator_gain is None:
            object.__setattr__(self, "estimator_gain", _calibrate_gain(self))
        elif self.estimator_gain <= 0:
            raise ValueError(f"estimator gain must be > 0, got {self.estimator_gain}")


@dataclass(frozen=True)
class TrackState:
    """Loop state snapshot: beam-center misalignment and loop settings."""

    offset_x_m: float
    offset_y_m: float
    time_s: float
    m: int
    loop_rate_hz: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"samples per correction must be >= 1, got {self.m}")
        if not 0 < self.loop_rate_hz <= 1000.0:
            raise ValueError(
                f"loop rate must be in (0, 1000] Hz, got {self.loop_rate_hz}"
            )


@dataclass(frozen=True)
class JitterParams:
    """Band-limited Gaussian platform jitter (Gaussian-shaped ACF)."""

    rms_m: float
    bandwidth_hz: float = 50.0

    def __post_init__(self):
        if self.rms_m < 0:
            raise ValueError(f"jitter RMS must be >= 0, got {self.rms_m}")
        if self.bandwidth_hz <= 0:
            raise ValueError(f"jitter bandwidth must be > 0, got {self.bandwidth_hz}")

    @property
    def correlation_time_s(self) -> float:
        # Gaussian ACF exp(-(t/tau)^2) has its half-power spectral point at
        # bandwidth_hz when tau = sqrt(ln 2) / (pi * bandwidth_hz).
        return math.sqrt(math.log(2.0)) / (math.pi * self.bandwidth_hz)


@dataclass(frozen=True)
class MultisampleResult:
    """Aggregate of m static-channel readings."""

    mean_reading: QdReading
    amplitude_snr: float
    m: int
    saturated: bool


@dataclass(frozen=True)
class TrackingResult:
    """Closed-loop run summary plus the residual misalignment trace."""

    times_s: np.ndarray = field(repr=False)
    offsets_x_m: np.ndarray = field(repr=False)
    offsets_y_m: np.ndarray = field(repr=False)
    residual_rms_m: float
    residual_max_m: float
    m: int
    loop_rate_hz: float
    controller_gain: float
    seed: int
    final_state: TrackState


def _axis_fraction(lo: float, hi: float, center: float, w: float) -> float:
    """Fraction of a 1-D Gaussian (1/e^2 radius w, centered at ``center``)
    falling in [lo, hi]."""
    s = math.sqrt(2.0) / w
    return 0.5 * (erf((hi - center) * s) - erf((lo - center) * s))


def _quadrant_fractions(
    offset_x: float, offset_y: float, geometry: QdGeometry
) -> tuple[float, float, float, float]:
    half = 0.5 * geometry.detector_size_m
    inner = 0.5 * geometry.gap_m
    w = geometry.beam_radius_m
    pos_x = _axis_fraction(inner, half, offset_x, w)
    neg_x = _axis_fraction(-half, -inner, offset_x, w)
    pos_y = _axis_fraction(inner, half, offset_y, w)
    neg_y = _axis_fraction(-half, -inner, offset_y, w)
    return (pos_x * pos_y, neg_x * pos_y, neg_x * neg_y, pos_x * neg_y)


def _calibrate_gain(geometry: QdGeometry) -> float:
    """Unit small-signal slope: gain = delta / normalized_difference(delta)."""
    probe = replace(geometry, estimator_gain=1.0)
    delta = geometry.beam_radius_m / 20.0
    f1, f2, f3, f4 = _quadrant_fractions(delta, 0.0, probe)
    total = f1 + f2 + f3 + f4
    diff = ((f1 + f4) - (f2 + f3)) / total
    return delta / diff


def qd_response(
    offset_x: float,
    offset_y: float,
    geometry: QdGeometry,
    signal_power: float = 1.0,
    noise_std: float = 0.0,
    seed: int | np.random.Generator | None = None,
) -> QdReading:
    """Quadrant powers for a Gaussian beam displaced by (offset_x, offset_y).

    Each quadrant receives signal_power times the exact beam overlap with
    its active area (separable Gaussian integrals), plus independent
    Gaussian noise clamped at zero. A centered beam with no noise yields
    four equal powers.
    """
    if signal_power < 0:
        raise ValueError(f"signal power must be >= 0, got {signal_power}")
    if noise_std < 0:
        raise ValueError(f"noise std must be >= 0, got {noise_std}")
    fractions = np.array(_quadrant_fractions(offset_x, offset_y, geometry))
    powers = signal_power * fractions
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        powers = np.maximum(powers + rng.normal(0.0, noise_std, 4), 0.0)
    return QdReading(*powers.tolist())


def estimate_displacement(
    reading: QdReading, geometry: QdGeometry
) -> tuple[float, float]:
    """Displacement estimate from normalized quadrant differences.

    x_hat = g * ((v1+v4) - (v2+v3)) / sum, y_hat = g * ((v1+v2) - (v3+v4)) / sum.
    """
    total = reading.total
    if total <= 0:
        raise ValueError("quadrant powers sum to zero; no displacement information")
    g = geometry.estimator_gain
    x_hat = g * ((reading.v1 + reading.v4) - (reading.v2 + reading.v3)) / total
    y_hat = g * ((reading.v1 + reading.v2) - (reading.v3 + reading.v4)) / total
    return x_hat, y_hat


def multisample_snr(
    readings,
    true_reading: QdReading | None = None,
) -> MultisampleResult:
    """Aggregate m readings of a static channel: coherent signal sum over
    root-sum-square noise.

    ``readings`` is a list of QdReading or an (m, 4) array of quadrant
    powers. With the true (noiseless) reading supplied, per-sample noise
    is exact; otherwise it is estimated from the scatter of the readings
    (needs m >= 2). Zero aggregate noise is flagged as saturated with
    infinite SNR.
    """
    m = len(readings)
    if m == 0:
        raise ValueError("need at least one reading")
    if isinstance(readings, np.ndarray):
        quads = np.atleast_2d(readings)
        if quads.shape[1] != 4:
            raise ValueError(f"expected (m, 4) powers, got shape {quads.shape}")
    else:
        quads = np.array([[r.v1, r.v2, r.v3, r.v4] for r in readings])
    mean_reading = QdReading(*np.mean(quads, axis=0).tolist())
    totals = quads.sum(axis=1)
    if true_reading is not None:
        signal = true_reading.total
        noise_sq = float(np.sum((totals - signal) ** 2))
    else:
        if m < 2:
            raise ValueError(
                "estimating noise from data needs m >= 2 readings "
                "(or pass true_reading)"
            )
        signal = float(np.mean(totals))
        noise_sq = float(np.sum((totals - signal) ** 2)) * m / (m - 1)
    if noise_sq == 0.0:
        return MultisampleResult(
            mean_reading=mean_reading, amplitude_snr=math.inf, m=m, saturated=True
        )
    snr = m * signal / math.sqrt(noise_sq)
    return MultisampleResult(
        mean_reading=mean_reading, amplitude_snr=snr, m=m, saturated=False
    )


def run_tracking_loop(
    initial_offset_m: tuple[float, float],
    disturbance: JitterParams | None,
    geometry: QdGeometry,
    m: int = 1,
    loop_rate_hz: float = 1000.0,
    controller_gain: float = 0.8,
    duration_s: float = 0.5,
    seed: int = 0,
    signal_power: float = 1.0,
    noise_std: float = 0.0,
    settle_steps: int = 20,
) -> TrackingResult:
    """Closed-loop tracking: sample m readings, average, estimate, correct.

    Each loop step adds the jitter disturbance to the controlled offset,
    takes m noisy detector readings of that (static) state, estimates the
    displacement from the averaged reading, and applies a proportional
    correction. Residual RMS is computed after ``settle_steps`` to skip
    the acquisition transient; the max covers the whole run. Raises
    ``TrackingDivergedError`` after 10 consecutive off-detector steps.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not 0 < loop_rate_hz <= 1000.0:
        raise ValueError(f"loop rate must be in (0, 1000] Hz, got {loop_rate_hz}")
    n_steps = int(round(duration_s * loop_rate_hz))
    if n_steps < 100:
        raise ValueError(
            f"duration must cover >= 100 corrections, got {n_steps} steps"
        )
    dt = 1.0 / loop_rate_hz
    seq = np.random.SeedSequence(seed)
    child_noise, child_jx, child_jy = seq.spawn(3)
    rng = np.random.default_rng(child_noise)
    if disturbance is not None and disturbance.rms_m > 0:
        tau = disturbance.correlation_time_s
        jx = disturbance.rms_m * _gaussian_acf_series(
            n_steps, dt, tau, np.random.default_rng(child_jx)
        )
        jy = disturbance.rms_m * _gaussian_acf_series(
            n_steps, dt, tau, np.random.default_rng(child_jy)
        )
    else:
        jx = np.zeros(n_steps)
        jy = np.zeros(n_steps)

    ctrl_x, ctrl_y = float(initial_offset_m[0]), float(initial_offset_m[1])
    xs = np.empty(n_steps)
    ys = np.empty(n_steps)
    off_detector = 0
    half = 0.5 * geometry.detector_size_m
    for k in range(n_steps):
        true_x = ctrl_x + jx[k]
        true_y = ctrl_y + jy[k]
        xs[k] = true_x
        ys[k] = true_y
        if max(abs(true_x), abs(true_y)) > 2 * half:
            off_detector += 1
            if off_detector >= _DIVERGENCE_STEPS:
                raise TrackingDivergedError(
                    f"residual left the detector for {_DIVERGENCE_STEPS} "
                    f"consecutive steps at t={k * dt:g} s"
                )
        else:
            off_detector = 0
        if controller_gain == 0.0:
            continue
        fractions = np.array(_quadrant_fractions(true_x, true_y, geometry))
        samples = signal_power * fractions + (
            rng.normal(0.0, noise_std, (m, 4)) if noise_std > 0 else 0.0
        )
        samples = np.maximum(np.atleast_2d(samples), 0.0)
        mean_quads = samples.mean(axis=0)
        total = float(mean_quads.sum())
        if total <= 0:
            continue  # beam lost: no information this step, hold position
        g = geometry.estimator_gain
        x_hat = g * ((mean_quads[0] + mean_quads[3]) - (mean_quads[1] + mean_quads[2])) / total
        y_hat = g * ((mean_quads[0] + mean_quads[1]) - (mean_quads[2] + mean_quads[3])) / total
        ctrl_x -= controller_gain * x_hat
        ctrl_y -= controller_gain * y_hat

    radial = np.hypot(xs, ys)
    tail = radial[min(settle_steps, n_steps - 1) :]
    return TrackingResult(
        times_s=np.arange(n_steps) * dt,
        offsets_x_m=xs,
        offsets_y_m=ys,
        residual_rms_m=float(np.sqrt(np.mean(tail**2))),
        residual_max_m=float(np.max(radial)),
        m=m,
        loop_rate_hz=loop_rate_hz,
        controller_gain=controller_gain,
        seed=seed,
        final_state=TrackState(
            offset_x_m=float(xs[-1]),
            offset_y_m=float(ys[-1]),
            time_s=(n_steps - 1) * dt,
            m=m,
            loop_rate_hz=loop_rate_hz,
        ),
    )


def tracking_trace_rows(result: TrackingResult):
    """Rows (time_s, offset_x_m, offset_y_m) for CSV export."""
    for t, x, y in zip(result.times_s, result.offsets_x_m, result.offsets_y_m):
        yield float(t), float(x), float(y)
