import numpy as np
import pytest

from ddcs.scene import PathTruth
from ddcs.sounder import SounderConfig, _pair_gains, _synthesize


def make_path(delay, dod=0.0, doa=0.0, amp=1e-5, nu=0.0):
    return PathTruth(float(delay), float(dod), 0.0, float(doa), 0.0, complex(amp), float(nu), "LOS")


def synth_burst(paths, cfg=None, snapshots=1, noise_var=0.0, seed=0, interval=None, cal=None):
    """[snapshot, tx, rx, tone] for fixed paths (identity calibration unless ``cal``).

    Each snapshot advances every path's phase by 2 pi nu * interval; within a
    snapshot all pairs see the same phase (no slot offsets).
    """
    cfg = cfg or SounderConfig(calibration="identity")
    interval = cfg.sweep_duration if interval is None else interval
    offsets = cfg.multitone().offsets()
    ntx, nrx = len(cfg.tx_grid), len(cfg.rx_grid)
    out = np.zeros((snapshots, ntx, nrx, cfg.tone_count), dtype=complex)
    if paths:
        g = _pair_gains(paths, cfg)
        amps = np.array([p.amplitude for p in paths])
        nu = np.array([p.doppler for p in paths])
        zero = np.zeros(cfg.pair_count)
        for s in range(snapshots):
            a = amps * np.exp(2j * np.pi * nu * s * interval)
            c = np.ones(cfg.tone_count) if cal is None else cal
            out[s] = _synthesize(paths, a, g, offsets, zero, c).reshape(ntx, nrx, -1)
    if noise_var:
        rng = np.random.default_rng(seed)
        out += np.sqrt(noise_var / 2) * (rng.standard_normal(out.shape) + 1j * rng.standard_normal(out.shape))
    return out


@pytest.fixture
def ones():
    return np.ones(801)


# --------------------------------------------------------------------------- acceptance summary

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
