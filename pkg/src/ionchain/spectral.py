"""Spectral analysis of one ion's motion and collision-site inference.

The primary path fits sine/cosine pairs at the known mode frequencies by
linear least squares, which recovers signed amplitudes without leakage
bias.  A model-free fallback locates peaks in the Fourier magnitude
spectrum, refines them by quadratic interpolation, and then re-fits in the
time domain.  Measured amplitude ratios are rescaled into eigenvector
components and matched against the mode table to identify which ion was
struck.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DurationError,
    NoMotionError,
    NoUsableModesError,
    ResolutionError,
)

# Candidate sites whose misfit is within 5% of the best are reported as a tie.
_TIE_RATIO = 0.05

# Fourier peaks below this fraction of the strongest peak are ignored, and
# accepted peaks must be separated by at least this many bins (the Hann
# window's first sidelobes sit closer and roughly 30 dB down).
_PEAK_FLOOR_REL = 5e-3
_PEAK_MIN_SEPARATION_BINS = 6

_MIN_PERIODS = 10


@dataclass(frozen=True)
class MotionSpectrum:
    """Per-mode signed amplitudes extracted from one ion's displacement.

    ``signed_amplitudes`` carry the sign of the sine component at t = 0
    (an impulse response is a pure sine in every mode); ``phases`` are the
    offsets in the A*sin(w t + phi) representation.  ``noise_floor`` is the
    one-sigma amplitude uncertainty implied by the fit residual.
    """

    observe_ion: int
    frequencies: np.ndarray         # rad/s, ascending
    signed_amplitudes: np.ndarray   # meters
    phases: np.ndarray              # rad
    noise_floor: float              # meters

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        a = np.asarray(self.signed_amplitudes, dtype=float)
        ph = np.asarray(self.phases, dtype=float)
        if not (f.size == a.size == ph.size):
            raise ValueError("spectrum arrays must have equal length")
        if f.size >= 2 and np.any(np.diff(f) <= 0):
            raise ValueError("peak frequencies must be strictly ascending")
        for name, arr in (("frequencies", f), ("signed_amplitudes", a), ("phases", ph)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def peaks(self):
        """Peaks as (frequency rad/s, signed amplitude m, phase rad) tuples."""
        return list(zip(self.frequencies, self.signed_amplitudes, self.phases))


@dataclass(frozen=True)
class CollisionReport:
    """Outcome of matching a measured spectrum against the mode table."""

    inferred_site: int
    residuals: np.ndarray
    confidence: float
    recovered_eigenvector_components: np.ndarray
    is_tie: bool
    tied_sites: tuple

    def __post_init__(self):
        r = np.asarray(self.residuals, dtype=float)
        c = np.asarray(self.recovered_eigenvector_components, dtype=float)
        r.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "residuals", r)
        object.__setattr__(self, "recovered_eigenvector_components", c)
        object.__setattr__(self, "tied_sites", tuple(int(s) for s in self.tied_sites))


def _sines_fit(times, signal, omegas):
    """Least-squares sine/cosine amplitudes at fixed angular frequencies."""
    cols = np.empty((times.size, 2 * omegas.size))
    phase = times[:, None] * omegas[None, :]
    cols[:, 0::2] = np.sin(phase)
    cols[:, 1::2] = np.cos(phase)
    coef, *_ = np.linalg.lstsq(cols, signal, rcond=None)
    residual = signal - cols @ coef
    return coef[0::2], coef[1::2], residual


def _check_resolution(omegas, duration):
    resolution = 2 * np.pi / duration
    if omegas.size >= 2:
        gaps = np.diff(omegas)
        worst = int(np.argmin(gaps))
        if gaps[worst] < resolution:
            raise ResolutionError(worst + 1, worst + 2, float(gaps[worst]), resolution)


def _quadratic_peak(log_mags, k):
    """Sub-bin peak offset from a parabola through three log-magnitude bins."""
    if k <= 0 or k >= log_mags.size - 1:
        return 0.0
    a, b, c = log_mags[k - 1], log_mags[k], log_mags[k + 1]
    denom = a - 2 * b + c
    if denom >= 0:
        return 0.0
    return 0.5 * (a - c) / denom


def _locate_peaks(times, signal, sample_rate):
    """Fourier peak search with quadratic sub-bin refinement.

    Local maxima of the Hann-windowed magnitude spectrum are accepted
    strongest-first, skipping anything within a few bins of an already
    accepted peak (window sidelobes) or below a relative floor.
    """
    mags = np.abs(np.fft.rfft(signal * np.hanning(times.size)))
    floor = _PEAK_FLOOR_REL * float(np.max(mags))
    bin_width = 2 * np.pi * sample_rate / times.size

    interior = np.arange(2, mags.size - 1)
    is_max = (mags[interior] >= mags[interior - 1]) & (mags[interior] > mags[interior + 1])
    candidates = interior[is_max & (mags[interior] >= floor)]
    candidates = candidates[np.argsort(mags[candidates])[::-1]]

    accepted = []
    for k in candidates:
        if all(abs(k - j) >= _PEAK_MIN_SEPARATION_BINS for j in accepted):
            accepted.append(int(k))
    if not accepted:
        raise NoMotionError("no motion detected: the spectrum holds no peaks")

    log_mags = np.log(np.maximum(mags, 1e-300))
    return np.sort(
        np.array([(k + _quadratic_peak(log_mags, k)) * bin_width for k in accepted])
    )


def estimate_spectrum(traj, observe_ion, model_frequencies=None):
    """Extract per-mode amplitudes from the motion of one ion.

    With ``model_frequencies`` (rad/s) the amplitudes and phases come from
    a linear least-squares fit of sine/cosine pairs at exactly those
    frequencies.  Without them, peaks are located by Fourier search and
    refined, then re-fit the same way.

    Raises
    ------
    DurationError
        If the record is shorter than 10 periods of the slowest model mode.
    ResolutionError
        If two model frequencies are closer than one resolution bin.
    NoMotionError
        If the signal is identically zero.
    """
    if not 1 <= observe_ion <= traj.n_ions:
        raise ValueError(f"observe_ion {observe_ion} outside 1..{traj.n_ions}")
    signal = traj.ion(observe_ion)
    times = traj.times
    if float(np.max(np.abs(signal))) == 0.0:
        raise NoMotionError("no motion detected: observed displacement is zero")

    if model_frequencies is not None:
        omegas = np.sort(np.asarray(model_frequencies, dtype=float))
        duration = traj.duration
        min_duration = _MIN_PERIODS * 2 * np.pi / float(omegas[0])
        if duration < min_duration * (1 - 1e-9):
            raise DurationError(
                f"record of {duration:.3e} s is shorter than {_MIN_PERIODS} "
                f"periods of the slowest mode ({min_duration:.3e} s)"
            )
        _check_resolution(omegas, duration)
    else:
        omegas = _locate_peaks(times, signal, traj.sample_rate)

    a_sin, a_cos, residual = _sines_fit(times, signal, omegas)
    magnitudes = np.hypot(a_sin, a_cos)
    signs = np.where(a_sin < 0, -1.0, 1.0)
    phases = np.arctan2(a_cos, a_sin)
    noise_floor = float(
        np.sqrt(np.mean(residual**2)) * np.sqrt(2.0 / times.size)
    )
    return MotionSpectrum(
        observe_ion=observe_ion,
        frequencies=omegas,
        signed_amplitudes=signs * magnitudes,
        phases=phases,
        noise_floor=noise_floor,
    )


def _match_peaks_to_modes(spectrum, basis, omega_modes):
    """Map spectrum peaks onto mode indices by nearest frequency.

    Returns a length-N array of signed amplitudes with NaN for modes that
    have no measured peak.
    """
    n = basis.n_ions
    beta = np.full(n, np.nan)
    if n == 1:
        beta[0] = spectrum.signed_amplitudes[np.argmax(np.abs(spectrum.signed_amplitudes))]
        return beta
    half_gap = 0.5 * float(np.min(np.diff(omega_modes)))
    for freq, amp in zip(spectrum.frequencies, spectrum.signed_amplitudes):
        p = int(np.argmin(np.abs(omega_modes - freq)))
        if abs(omega_modes[p] - freq) <= half_gap and np.isnan(beta[p]):
            beta[p] = amp
    return beta


def recover_eigenvector_components(spectrum, basis):
    """Rescale measured amplitude ratios into eigenvector components.

    For a collision at ion n observed at ion m, each mode amplitude
    satisfies beta_p / beta_1 = (N / sqrt(mu_p)) b^(p)_n b^(p)_m, so
    b^(p)_n = (sqrt(mu_p) / (N b^(p)_m)) * beta_p / beta_1.  Modes without
    a measured peak come back as NaN.

    Raises
    ------
    ValueError
        If the observed ion is the central ion of an odd chain (some modes
        never move it, so the rescaling divides by zero).
    NoMotionError
        If the center-of-mass reference amplitude vanishes.
    """
    n = basis.n_ions
    m = spectrum.observe_ion
    if n >= 3 and n % 2 == 1 and m == (n + 1) // 2:
        raise ValueError(
            f"ion {m} is the central ion of an odd chain and must not be "
            "used as the observation site"
        )
    if basis.frequencies is None:
        raise ValueError("basis has no frequencies; fill them in first")

    beta = _match_peaks_to_modes(spectrum, basis, basis.frequencies)
    if np.isnan(beta[0]) or beta[0] == 0.0:
        raise NoMotionError(
            "no motion detected: center-of-mass reference amplitude is zero"
        )
    b_m = basis.eigenvectors[m - 1, :]
    if np.min(np.abs(b_m)) < 1e-12:
        raise NoUsableModesError(
            f"observation ion {m} sits at a node of some mode"
        )
    mu = basis.eigenvalues
    return np.sqrt(mu) / (n * b_m) * (beta / beta[0])


def infer_collision_site(spectrum, basis, use_signs=True):
    """Identify which ion was struck from one ion's motion spectrum.

    Each candidate site n is scored by the weighted misfit
    sum_p mu_p (bhat_p - b^(p)_n)^2 between the recovered eigenvector
    components and the known mode table; the weights equalize the per-mode
    noise contribution since amplitudes scale as 1/sqrt(mu_p).  With
    ``use_signs=False`` only magnitudes are compared, which leaves mirror
    sites n and N+1-n exactly degenerate.

    Candidates within 5% of the best misfit are reported together as a tie.
    """
    recovered = recover_eigenvector_components(spectrum, basis)
    usable = np.isfinite(recovered)
    if not np.any(usable):
        raise NoUsableModesError("no measured mode could be mapped to the model")

    mu = basis.eigenvalues[usable]
    bhat = recovered[usable]
    table = basis.eigenvectors[:, usable]  # rows: candidate sites
    if not use_signs:
        bhat = np.abs(bhat)
        table = np.abs(table)

    residuals = np.sum(mu[None, :] * (table - bhat[None, :]) ** 2, axis=1)
    best = int(np.argmin(residuals))

    floor = 1e-12 * float(np.sum(mu * bhat**2)) + 1e-300
    tied = np.nonzero(residuals <= residuals[best] * (1 + _TIE_RATIO) + floor)[0]
    is_tie = tied.size > 1

    if residuals.size > 1:
        runner_up = float(np.partition(residuals, 1)[1])
        confidence = 0.0 if runner_up <= 0 else max(
            0.0, 1.0 - residuals[best] / runner_up
        )
    else:
        confidence = 1.0

    return CollisionReport(
        inferred_site=best + 1,
        residuals=residuals,
        confidence=float(confidence),
        recovered_eigenvector_components=recovered,
        is_tie=bool(is_tie),
        tied_sites=tuple(int(i) + 1 for i in tied),
    )
