"""Dynamic double-directional mm-wave channel sounding: scene simulation,
beam-swept measurement synthesis and the evaluation chain that turns the
measurements back into PDPs, MPCs, Doppler spectra and channel statistics."""

__version__ = "0.1.0"
