"""801-tone low-PAPR sounding waveform and the calibration response.

The channel itself is synthesised per tone in the frequency domain; this
module defines the tone grid, designs the tone phases and provides the
time-domain envelope used to check the crest factor.
"""
from dataclasses import dataclass, field
import logging

import numpy as np

logger = logging.getLogger(__name__)


class PAPRDesignError(RuntimeError):
    pass


@dataclass(frozen=True)
class MultitoneSpec:
    tone_count: int = 801
    tone_spacing: float = 500e3
    center_frequency: float = 27.85e9
    phases: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self.tone_count < 1:
            raise ValueError("tone count must be >= 1")
        if self.tone_spacing <= 0:
            raise ValueError("tone spacing must be > 0")
        if self.phases is None:
            object.__setattr__(self, "phases", tuple(quadratic_phases(self.tone_count)))
        elif len(self.phases) != self.tone_count:
            raise ValueError("need one phase per tone")

    @property
    def duration(self):
        return 1.0 / self.tone_spacing

    @property
    def bandwidth(self):
        return self.tone_count * self.tone_spacing

    @property
    def delay_resolution(self):
        """Delay bin width of the N-point IDFT, 1 / (N * spacing)."""
        return 1.0 / self.bandwidth

    def offsets(self):
        """Tone frequencies relative to the lower band edge, k * spacing."""
        return np.arange(self.tone_count) * self.tone_spacing

    def with_phases(self, phases):
        return MultitoneSpec(self.tone_count, self.tone_spacing, self.center_frequency, tuple(phases))


def quadratic_phases(n):
    k = np.arange(n)
    return np.mod(np.pi * k.astype(float) ** 2 / n, 2 * np.pi)


def time_domain(spec, oversampling=4, phases=None):
    """One period of s(t) = sum_k exp(j(2 pi k df t + phi_k)), unit tone amplitudes.

    Returns ``tone_count * oversampling`` samples uniformly covering one
    waveform duration.
    """
    if oversampling < 1:
        raise ValueError("oversampling must be >= 1")
    ph = np.asarray(spec.phases if phases is None else phases, dtype=float)
    m = spec.tone_count * oversampling
    spectrum = np.zeros(m, dtype=complex)
    spectrum[: spec.tone_count] = np.exp(1j * ph)
    return np.fft.ifft(spectrum) * m


def papr(samples):
    p = np.abs(np.asarray(samples)) ** 2
    if p.size == 0:
        raise ValueError("papr of empty signal")
    return float(10.0 * np.log10(p.max() / p.mean()))


def design_phases(spec, oversampling=4, target_db=0.5, max_iter=1000, clip_ratio=1.05,
                  fail_db=1.0):
    """Phase-only crest-factor reduction by iterated clipping.

    Starts from quadratic phases; each iteration clips the oversampled
    envelope at ``clip_ratio`` x RMS, transforms back and keeps only the tone
    phases.  Stops once PAPR <= ``target_db``.  The best phases seen are
    returned; raises :class:`PAPRDesignError` if they stay above ``fail_db``.
    """
    n = spec.tone_count
    ph = quadratic_phases(n)
    best_ph, best = ph, papr(time_domain(spec, oversampling, ph))
    it = 0
    while best > target_db and it < max_iter:
        s = time_domain(spec, oversampling, ph)
        a = np.abs(s)
        lim = clip_ratio * np.sqrt(np.mean(a ** 2))
        over = a > lim
        s[over] *= lim / a[over]
        ph = np.angle(np.fft.fft(s)[:n])
        cur = papr(time_domain(spec, oversampling, ph))
        if cur < best:
            best_ph, best = ph, cur
        it += 1
    logger.debug("phase design: %d iterations, PAPR %.3f dB", it, best)
    if best > fail_db:
        raise PAPRDesignError(f"PAPR {best:.2f} dB after {it} iterations exceeds {fail_db} dB")
    return np.mod(best_ph, 2 * np.pi)


def calibration_response(spec, mode="ripple", seed=0, ripple_db=0.5, phase_ripple=0.1):
    """Back-to-back TX+RX chain response per tone.

    ``mode="identity"`` gives all ones.  ``"ripple"`` gives a smooth,
    seed-deterministic amplitude ripple of about +-``ripple_db`` and a phase
    ripple of about +-``phase_ripple`` rad; it never vanishes.
    """
    n = spec.tone_count
    if mode == "identity":
        return np.ones(n, dtype=complex)
    if mode != "ripple":
        raise ValueError(f"unknown calibration mode {mode!r}")
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0xCA1])
    x = np.arange(n) / n
    amp_db = np.zeros(n)
    phase = np.zeros(n)
    for _ in range(3):
        f_a, f_p = rng.uniform(0.5, 4.0, size=2)
        o_a, o_p = rng.uniform(0, 2 * np.pi, size=2)
        amp_db += ripple_db / 3 * np.sin(2 * np.pi * f_a * x + o_a)
        phase += phase_ripple / 3 * np.sin(2 * np.pi * f_p * x + o_p)
    return 10.0 ** (amp_db / 20.0) * np.exp(1j * phase)
