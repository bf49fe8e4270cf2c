"""Resonance extraction from ringdown series and extraction-ratio spectra.

The time series after source cutoff is modeled as a sum of damped sinusoids

    x(t) = sum_k a_k exp(-kappa_k t) cos(2 pi f_k t + phi_k)

whose poles are recovered with the matrix-pencil method on a boxcar-filtered,
decimated copy of the signal (both operations are LTI, so they preserve the
poles exactly); amplitudes and phases are then fit on the original samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import hankel, lstsq, pinv, svd

from .fdtd import ProbeSeries
from .monitors import Spectrum

SVD_CUTOFF = 1e-8          # relative singular-value threshold
AMPLITUDE_FLOOR = 1e-3     # modes weaker than this fraction of the strongest
GROWTH_TOLERANCE = 1e-6    # |negative decay| below this is clamped to zero
KAPPA_FLOOR = 1e-10        # decay below this fraction of omega reads as lossless


@dataclass(frozen=True)
class ResonanceMode:
    frequency: float          # c/a
    decay: float              # amplitude decay rate kappa, 1/(a/c)
    amplitude: float
    phase: float
    error: float = 0.0        # relative rms residual of the full fit

    @property
    def q(self) -> float:
        return q_factor(self)

    @property
    def wavelength(self) -> float:
        return 1.0 / self.frequency

    def as_dict(self) -> dict:
        return {
            "frequency": self.frequency,
            "decay": self.decay,
            "Q": self.q if math.isfinite(self.q) else None,
            "amplitude": self.amplitude,
            "phase": self.phase,
            "error": self.error,
        }


def q_factor(mode: ResonanceMode) -> float:
    """Q = omega / (2 kappa) = pi f / kappa, with kappa the field-amplitude
    decay rate; infinite for a lossless (kappa = 0) mode."""
    if mode.decay < 0.0:
        raise ValueError("decay rate must be >= 0")
    if mode.decay == 0.0:
        return math.inf
    return math.pi * mode.frequency / mode.decay


class RankDeficiencyWarning(UserWarning):
    """Fewer genuine modes present than requested."""


def _decimate(x: np.ndarray, dt: float, f_max: float):
    """Boxcar-average and decimate so the band sits inside the new Nyquist."""
    d = max(1, int(1.0 / (2.5 * f_max * dt)))
    d = min(d, max(1, len(x) // 64))
    if d == 1:
        return x.astype(complex), dt
    kernel = np.full(d, 1.0 / d)
    y = np.convolve(x, kernel, mode="valid")[::d]
    return y.astype(complex), d * dt


def _pencil_poles(x: np.ndarray, max_poles: int):
    """Pole estimates of sum-of-exponentials data via the matrix pencil."""
    n = len(x)
    L = n // 3
    Y = hankel(x[: n - L], x[n - L - 1:])
    u, s, vh = svd(Y, full_matrices=False)
    if s[0] == 0.0:
        return np.empty(0, complex), 0
    rank = int(np.sum(s > SVD_CUTOFF * s[0]))
    m = min(rank, max_poles, L - 1)
    v = vh.conj().T[:, :m]
    v1 = v[:-1, :]
    v2 = v[1:, :]
    poles = np.linalg.eigvals(pinv(v1) @ v2)
    return poles, rank


def harmonic_inversion(series, f_min: float, f_max: float,
                       max_modes: int = 10) -> list:
    """Damped-sinusoid decomposition of a real ringdown series.

    Accepts a ProbeSeries (the part after source cutoff is used) or a plain
    (values, dt) pair.  Returns modes with frequency inside [f_min, f_max],
    sorted by amplitude, strongest first.
    """
    if isinstance(series, ProbeSeries):
        if series.source_off_time > 0.0:
            series = series.after_source()
        x = np.asarray(series.values, float)
        dt = series.dt
    else:
        x, dt = series
        x = np.asarray(x, float)
    if len(x) < 200:
        raise ValueError("need at least 200 samples for harmonic inversion")
    if not 0.0 <= f_min < f_max:
        raise ValueError("need 0 <= f_min < f_max")
    nyquist = 0.5 / dt
    if f_max > nyquist:
        raise ValueError(f"f_max {f_max} above the Nyquist frequency {nyquist}")

    scale = float(np.max(np.abs(x)))
    if scale == 0.0:
        return []
    xs = x / scale

    y, dt_dec = _decimate(xs, dt, f_max)
    # a real signal contributes two poles per mode, plus headroom for
    # out-of-band content that survives the boxcar filter
    poles, rank = _pencil_poles(y, max_poles=4 * max_modes + 8)
    if len(poles) == 0:
        return []

    s_vals = np.log(poles.astype(complex)) / dt_dec
    freqs = s_vals.imag / (2.0 * np.pi)
    kappas = -s_vals.real

    keep = []
    for f, k in zip(freqs, kappas):
        if f < f_min or f > f_max:
            continue
        if k < -GROWTH_TOLERANCE:
            continue
        if k < KAPPA_FLOOR * 2.0 * math.pi * f:
            k = 0.0
        keep.append((f, max(k, 0.0)))
    if not keep:
        return []

    # refit amplitudes/phases on the original, undecimated samples
    t = np.arange(len(xs)) * dt
    cols = []
    for f, k in keep:
        cols.append(np.exp((-k + 2j * np.pi * f) * t))
        cols.append(np.exp((-k - 2j * np.pi * f) * t))
    V = np.column_stack(cols)
    coef, *_ = lstsq(V, xs.astype(complex), lapack_driver="gelsd")
    resid = xs - (V @ coef).real
    error = float(np.linalg.norm(resid) / np.linalg.norm(xs))

    modes = []
    for idx, (f, k) in enumerate(keep):
        c = coef[2 * idx]
        amp = 2.0 * abs(c) * scale
        modes.append(ResonanceMode(
            frequency=float(f), decay=float(k),
            amplitude=float(amp), phase=float(np.angle(c)), error=error,
        ))
    modes.sort(key=lambda m: m.amplitude, reverse=True)
    if modes:
        floor = AMPLITUDE_FLOOR * modes[0].amplitude
        modes = [m for m in modes if m.amplitude >= floor]
    return modes[:max_modes]


@dataclass
class ExtractionResult:
    """Pointwise ratio of cavity to reference flux, with its band peak."""

    freqs: np.ndarray
    ratio: np.ndarray          # NaN where the reference flux is below floor
    eta_peak: float
    lambda_peak: float
    band: tuple

    def as_dict(self) -> dict:
        return {
            "eta_peak": self.eta_peak,
            "lambda_peak": self.lambda_peak,
            "band": list(self.band),
        }

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("freq_c_per_a,lambda_per_a,ratio\n")
            for f, r in zip(self.freqs, self.ratio):
                fh.write(f"{float(f)!r},{1.0 / float(f)!r},{float(r)!r}\n")


def extraction_ratio(cavity: Spectrum, reference: Spectrum,
                     floor: float | None = None,
                     band: tuple | None = None) -> ExtractionResult:
    """Light extraction ratio: collected cavity power over the reference
    power, pointwise in frequency, masked where the reference is negligible."""
    if not np.array_equal(cavity.freqs, reference.freqs):
        raise ValueError("cavity and reference spectra use different grids")
    ref_peak = float(np.max(reference.values))
    if floor is None:
        floor = 1e-6 * ref_peak
    if floor <= 0.0:
        raise ValueError("floor must be positive")

    valid = reference.values >= floor
    ratio = np.full_like(cavity.values, np.nan)
    ratio[valid] = cavity.values[valid] / reference.values[valid]

    freqs = cavity.freqs
    if band is None:
        band = (float(freqs[0]), float(freqs[-1]))
    in_band = (freqs >= band[0]) & (freqs <= band[1]) & valid
    if not np.any(in_band):
        raise ValueError("no valid samples inside the analysis band")
    sub = np.where(in_band)[0]
    best = sub[int(np.argmax(ratio[sub]))]
    return ExtractionResult(
        freqs=freqs.copy(),
        ratio=ratio,
        eta_peak=float(ratio[best]),
        lambda_peak=float(1.0 / freqs[best]),
        band=band,
    )
