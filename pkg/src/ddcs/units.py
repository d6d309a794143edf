"""Physical constants and dB helpers shared across modules."""
import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
CENTER_FREQUENCY = 27.85e9
WAVELENGTH = SPEED_OF_LIGHT / CENTER_FREQUENCY
BOLTZMANN_DBM_HZ = -174.0


def db(x):
    """Power ratio to dB."""
    return 10.0 * np.log10(x)


def undb(x):
    """dB to power ratio."""
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def wrap_deg(a):
    """Wrap angle(s) to [-180, 180)."""
    return (np.asarray(a, dtype=float) + 180.0) % 360.0 - 180.0
