"""Steerable phased-array beams and the TX/RX beam grids.

The mainlobe is Gaussian in azimuth and elevation with the configured 3 dB
widths; outside it the power gain is clamped to a flat sidelobe floor.
"""
from dataclasses import dataclass

import numpy as np

from .units import wrap_deg

DEFAULT_AZIMUTHS = tuple(float(a) for a in range(-45, 46, 10))


@dataclass(frozen=True)
class BeamGrid:
    azimuths: tuple = DEFAULT_AZIMUTHS
    elevations: tuple = (0.0,)

    def __post_init__(self):
        az = tuple(float(a) for a in self.azimuths)
        el = tuple(float(e) for e in self.elevations)
        if not az or not el:
            raise ValueError("beam grid must be non-empty")
        if any(a < -45.0 or a > 45.0 for a in az):
            raise ValueError("steering azimuths must lie in [-45, 45]")
        object.__setattr__(self, "azimuths", az)
        object.__setattr__(self, "elevations", el)

    def __len__(self):
        return len(self.azimuths) * len(self.elevations)

    def beams(self):
        """(az, el) steering pairs, elevation-major then azimuth."""
        return [(a, e) for e in self.elevations for a in self.azimuths]


@dataclass(frozen=True)
class BeamPattern:
    beamwidth_az: float = 12.0
    beamwidth_el: float = 22.0
    gain_dbi: float = 19.5
    sidelobe_db: float = -20.0

    def __post_init__(self):
        if self.beamwidth_az <= 0 or self.beamwidth_el <= 0:
            raise ValueError("beamwidths must be > 0")
        if self.sidelobe_db >= -3.0:
            raise ValueError("sidelobe floor must be below -3 dB")

    @property
    def boresight_power(self):
        return 10.0 ** (self.gain_dbi / 10.0)


def power_gain(pattern, steer_az, steer_el, az, el):
    """Linear power gain towards (az, el) for a beam steered to (steer_az, steer_el).

    Broadcasts over array arguments.
    """
    daz = wrap_deg(np.asarray(az, float) - steer_az)
    dele = wrap_deg(np.asarray(el, float) - steer_el)
    main = np.exp(-4.0 * np.log(2.0) * ((daz / pattern.beamwidth_az) ** 2
                                        + (dele / pattern.beamwidth_el) ** 2))
    floor = 10.0 ** (pattern.sidelobe_db / 10.0)
    return pattern.boresight_power * np.maximum(main, floor)


def beam_gain(pattern, steer_az, steer_el, az, el):
    """Amplitude gain, i.e. sqrt of :func:`power_gain`."""
    return np.sqrt(power_gain(pattern, steer_az, steer_el, az, el))


def enumerate_beam_pairs(tx, rx):
    """All (tx_beam, rx_beam) pairs, TX-major: every RX beam for TX beam 0, then TX beam 1...

    This order is also the slot order within a MIMO snapshot.
    """
    return [(t, r) for t in tx.beams() for r in rx.beams()]


def _beam(grid, beam):
    if np.ndim(beam) == 0:
        beam = (beam, grid.elevations[0])
    return tuple(float(b) for b in beam)


def pair_index(tx, rx, tx_beam, rx_beam):
    """Inverse of :func:`enumerate_beam_pairs`; beams as az or (az, el)."""
    return tx.beams().index(_beam(tx, tx_beam)) * len(rx) + rx.beams().index(_beam(rx, rx_beam))


def gain_matrix(pattern, grid, az, el):
    """Amplitude gains, shape (len(grid), len(az)), for path directions az/el."""
    beams = np.array(grid.beams())
    return beam_gain(pattern, beams[:, :1], beams[:, 1:], np.atleast_1d(az)[None, :],
                     np.atleast_1d(el)[None, :])
