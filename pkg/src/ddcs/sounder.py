"""Beam-swept sounding campaign: slot schedule, per-tone channel synthesis,
receiver noise and the measurement tensor.

Slot timing for burst ``b``, snapshot ``s`` and beam pair ``p``::

    t = start_time + b * burst_period + s * sweep_duration + p * slot_duration

with ``sweep_duration = slot_duration * pair_count``.  Scene geometry is
evaluated once per snapshot; the carrier phase follows the exact geometric
delay at the snapshot start and each path's Doppler rotates it within the
sweep.

The tensor holds channel gain referenced to 0 dBi terminals with the beam
gains applied.  Noise is expressed in the same units: its per-tone variance
is the noise floor divided by the conducted TX power (EIRP minus TX
boresight gain).
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import os

import numpy as np

from . import textconf
from .array import BeamGrid, BeamPattern, gain_matrix
from .scene import enumerate_paths
from .units import BOLTZMANN_DBM_HZ
from .waveform import MultitoneSpec, calibration_response


class CampaignError(ValueError):
    pass


@dataclass(frozen=True)
class SounderConfig:
    bursts: int = 200
    snapshots: int = 20
    burst_period: float = 60e-3
    slot_duration: float = 4e-6
    waveform_duration: float = 2e-6
    start_time: float = 0.0
    tx_eirp_dbm: float = 36.0
    noise_figure_db: float = 5.0
    bandwidth: float = 400e6
    center_frequency: float = 27.85e9
    tone_count: int = 801
    tone_spacing: float = 500e3
    tx_grid: BeamGrid = field(default_factory=BeamGrid)
    rx_grid: BeamGrid = field(default_factory=BeamGrid)
    pattern: BeamPattern = field(default_factory=BeamPattern)
    calibration: str = "ripple"
    noise: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.bursts < 1 or self.snapshots < 1:
            raise ValueError("bursts and snapshots must be >= 1")
        if self.slot_duration < self.waveform_duration:
            raise ValueError("slot_duration shorter than waveform_duration")
        if self.burst_duration > self.burst_period + 1e-15 and self.bursts > 1:
            raise ValueError(f"burst duration {self.burst_duration} s exceeds burst_period {self.burst_period} s")
        if self.calibration not in ("ripple", "identity"):
            raise ValueError(f"unknown calibration mode {self.calibration!r}")

    @property
    def pair_count(self):
        return len(self.tx_grid) * len(self.rx_grid)

    @property
    def sweep_duration(self):
        return self.slot_duration * self.pair_count

    @property
    def burst_duration(self):
        return self.sweep_duration * self.snapshots

    @property
    def campaign_duration(self):
        return self.bursts * self.burst_period

    @property
    def dims(self):
        return (self.bursts, self.snapshots, len(self.tx_grid), len(self.rx_grid), self.tone_count)

    def multitone(self):
        return MultitoneSpec(self.tone_count, self.tone_spacing, self.center_frequency)

    def cal(self):
        # a property of the hardware, independent of the campaign seed
        return calibration_response(self.multitone(), self.calibration)

    def noise_variance(self):
        """Per-tone complex noise variance in tensor (channel gain) units."""
        conducted = self.tx_eirp_dbm - self.pattern.gain_dbi
        return 10.0 ** ((noise_floor(self) - conducted) / 10.0)


@dataclass
class MeasurementTensor:
    data: np.ndarray  # complex [burst, snapshot, tx, rx, tone]
    timestamps: np.ndarray  # [burst, snapshot, pair], seconds
    center_frequency: float
    tone_spacing: float
    config: SounderConfig = None

    @property
    def dims(self):
        return self.data.shape


def noise_floor(config):
    """Thermal noise floor over the sounding bandwidth, dBm."""
    return BOLTZMANN_DBM_HZ + 10.0 * np.log10(config.bandwidth) + config.noise_figure_db


def slot_times(config):
    b = np.arange(config.bursts)[:, None, None]
    s = np.arange(config.snapshots)[None, :, None]
    p = np.arange(config.pair_count)[None, None, :]
    return (config.start_time + b * config.burst_period + s * config.sweep_duration
            + p * config.slot_duration)


def _pair_gains(paths, config):
    """Amplitude beam-gain product per (pair, path): shape (pairs, paths)."""
    dod_az = np.array([q.dod_az for q in paths])
    dod_el = np.array([q.dod_el for q in paths])
    doa_az = np.array([q.doa_az for q in paths])
    doa_el = np.array([q.doa_el for q in paths])
    gt = gain_matrix(config.pattern, config.tx_grid, dod_az, dod_el)
    gr = gain_matrix(config.pattern, config.rx_grid, doa_az, doa_el)
    return (gt[:, None, :] * gr[None, :, :]).reshape(-1, len(paths))


def _synthesize(paths, amplitudes, gains, offsets, dt, cal):
    """H[pair, k] = cal_k sum_l A_l G[pair,l] exp(j2pi nu_l dt[pair]) exp(-j2pi f_k tau_l)."""
    tau = np.array([q.delay for q in paths])
    nu = np.array([q.doppler for q in paths])
    weights = gains * amplitudes[None, :] * np.exp(2j * np.pi * dt[:, None] * nu[None, :])
    steer = np.exp(-2j * np.pi * tau[:, None] * offsets[None, :])
    return (weights @ steer) * cal[None, :]


def synthesize_response(paths, tx_beam, rx_beam, offsets, t, cal, pattern=None, t_ref=0.0):
    """Frequency response of one beam pair at slot time ``t``.

    ``tx_beam``/``rx_beam`` are (az, el) steering angles, ``offsets`` the
    tone frequencies relative to the band edge.  Each path is rotated by
    exp(j 2 pi nu (t - t_ref)).
    """
    pattern = pattern or BeamPattern()
    offsets = np.asarray(offsets, dtype=float)
    cal = np.broadcast_to(np.asarray(cal, dtype=complex), offsets.shape)
    if not paths:
        return np.zeros(offsets.shape, dtype=complex)
    cfg = SounderConfig(tx_grid=BeamGrid((tx_beam[0],), (tx_beam[1],)),
                        rx_grid=BeamGrid((rx_beam[0],), (rx_beam[1],)), pattern=pattern)
    gains = _pair_gains(paths, cfg)
    amps = np.array([q.amplitude for q in paths])
    return _synthesize(paths, amps, gains, offsets, np.array([t - t_ref]), cal)[0]


def _snapshot_rng(config, b, s):
    # counter-style stream: one generator per (seed, burst, snapshot)
    return np.random.default_rng([int(config.seed) & 0xFFFFFFFF, 0x5EED, b, s])


def iter_bursts(scene, config, cal=None):
    """Yield (burst index, complex64 array [snapshot, tx, rx, tone]) in order."""
    end = config.start_time + config.campaign_duration
    if end > scene.duration + 1e-9:
        raise CampaignError(f"campaign ends at {end:.3f} s but scenario lasts {scene.duration:.3f} s")
    if cal is None:
        cal = config.cal()
    offsets = config.multitone().offsets()
    # tones sit at f_edge + offsets, centred on the carrier
    f_edge = config.center_frequency - 0.5 * offsets[-1]
    sigma = np.sqrt(config.noise_variance() / 2.0) if config.noise else 0.0
    ntx, nrx = len(config.tx_grid), len(config.rx_grid)
    dt = np.arange(config.pair_count) * config.slot_duration

    def snapshot(b, s):
        t0 = config.start_time + b * config.burst_period + s * config.sweep_duration
        paths = enumerate_paths(scene, t0, seed=config.seed)
        if paths:
            amps = np.array([q.amplitude for q in paths])
            amps = amps * np.exp(-2j * np.pi * f_edge * np.array([q.delay for q in paths]))
            h = _synthesize(paths, amps, _pair_gains(paths, config), offsets, dt, cal)
        else:
            h = np.zeros((config.pair_count, config.tone_count), dtype=complex)
        if config.noise:
            z = _snapshot_rng(config, b, s).standard_normal((config.pair_count, config.tone_count, 2))
            h = h + sigma * (z[..., 0] + 1j * z[..., 1])
        return h.reshape(ntx, nrx, config.tone_count)

    # snapshots are independent (own RNG stream), so thread order cannot
    # change the result
    with ThreadPoolExecutor(max_workers=threads()) as pool:
        for b in range(config.bursts):
            out = np.empty((config.snapshots, ntx, nrx, config.tone_count), dtype=np.complex64)
            for s, h in enumerate(pool.map(lambda s: snapshot(b, s), range(config.snapshots))):
                out[s] = h
            yield b, out


def run_campaign(scene, config):
    """Synthesise the whole campaign in memory.  Mind the size for 200 bursts."""
    data = np.empty(config.dims, dtype=np.complex64)
    for b, burst in iter_bursts(scene, config):
        data[b] = burst
    return MeasurementTensor(data, slot_times(config), config.center_frequency, config.tone_spacing, config)


def threads():
    """Worker cap from DDCS_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("DDCS_THREADS", "1")))
    except ValueError:
        return 1


# --------------------------------------------------------------------------- config file

_GRID = {"azimuths": None, "elevations": None}
CONFIG_LAYOUT = {
    "schema": None,
    "bursts": None, "snapshots": None, "burst_period": None, "slot_duration": None,
    "waveform_duration": None, "start_time": None, "tx_eirp_dbm": None, "noise_figure_db": None,
    "bandwidth": None, "center_frequency": None, "tone_count": None, "tone_spacing": None,
    "calibration": None, "noise": None, "seed": None,
    "tx_grid": _GRID, "rx_grid": _GRID,
    "pattern": {"beamwidth_az": None, "beamwidth_el": None, "gain_dbi": None, "sidelobe_db": None},
}
_SCALARS = [k for k, v in CONFIG_LAYOUT.items() if v is None and k != "schema"]
_INTS = ("bursts", "snapshots", "tone_count", "seed")
CONFIG_TYPES = {k: (int if k in _INTS else bool if k == "noise" else str if k == "calibration" else float)
                for k in _SCALARS}
CONFIG_TYPES.update(tx_grid={"azimuths": list, "elevations": list}, rx_grid={"azimuths": list, "elevations": list},
                    pattern={k: float for k in CONFIG_LAYOUT["pattern"]})


def config_from_dict(d, path=None, text=None):
    kw = {k: d[k] for k in _SCALARS if k in d}
    try:
        for g in ("tx_grid", "rx_grid"):
            if g in d:
                kw[g] = BeamGrid(**d[g])
        if "pattern" in d:
            kw["pattern"] = BeamPattern(**d["pattern"])
        return SounderConfig(**kw)
    except (TypeError, ValueError) as exc:
        keys = list(_SCALARS) + list(CONFIG_LAYOUT["pattern"]) + ["azimuths", "elevations"]
        line = textconf.line_for_message(text, str(exc), keys) if text else None
        raise textconf.ConfigError(f"invalid sounder config: {exc}", line, path) from None


def config_to_dict(c):
    d = {"schema": textconf.SCHEMA_VERSION}
    d.update({k: getattr(c, k) for k in _SCALARS})
    d["tx_grid"] = {"azimuths": list(c.tx_grid.azimuths), "elevations": list(c.tx_grid.elevations)}
    d["rx_grid"] = {"azimuths": list(c.rx_grid.azimuths), "elevations": list(c.rx_grid.elevations)}
    d["pattern"] = {"beamwidth_az": c.pattern.beamwidth_az, "beamwidth_el": c.pattern.beamwidth_el,
                    "gain_dbi": c.pattern.gain_dbi, "sidelobe_db": c.pattern.sidelobe_db}
    return d


def loads_config(text, path=None):
    d = textconf.parse(text, CONFIG_LAYOUT, path)
    textconf.check_types(d, CONFIG_TYPES, text, path)
    return config_from_dict(d, path, text)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return loads_config(fh.read(), str(path))


def dump_config(config, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(textconf.dumps(config_to_dict(config)))

