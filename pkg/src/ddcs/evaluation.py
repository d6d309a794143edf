"""From measured frequency responses to MPCs and time-varying statistics.

Per burst the chain is: calibrated IDFT per beam pair and snapshot ->
snapshot-averaged directional PDP -> noise estimate -> 3D peak search over
(TX beam, RX beam, delay) -> sidelobe ghost removal.  Across bursts MPCs are
tracked, and path gain, RMS delay spread, mean angles / angular spreads and
beam-pair gains are collected.

IDFT normalisation is numpy's: p[n] = (1/N) sum_k X[k] exp(j 2 pi k n / N),
so a unit-gain path sitting exactly on a delay bin has PDP power 1.
Reported powers and gains are de-embedded by the boresight power gains of
both arrays.
"""
from dataclasses import dataclass, field
import itertools

import numpy as np

from .array import BeamGrid, BeamPattern


@dataclass(frozen=True)
class Thresholds:
    det_margin_db: float = 6.0  # above the noise estimate
    dynamic_range_db: float = 30.0  # below the strongest cell, for detection
    rms_clip_db: float = 25.0  # below the PDP peak, for delay spread
    noise_tail: float = 0.1  # fraction of highest-delay bins used for noise
    sidelobe_db: float = -20.0
    ghost_margin_db: float = 3.0


@dataclass
class MPC:
    delay: float
    dod_az: float
    doa_az: float
    power_db: float
    burst: int = 0
    track_id: int = -1
    tx_index: int = 0
    rx_index: int = 0
    delay_bin: int = 0
    doppler: float = float("nan")  # Hz, strongest zero-padded DFT bin


@dataclass
class Track:
    id: int
    mpcs: list = field(default_factory=list)
    misses: int = 0

    @property
    def bursts(self):
        return [m.burst for m in self.mpcs]

    @property
    def last(self):
        return self.mpcs[-1]


# --------------------------------------------------------------------------- PDPs

def directional_pdp(H, cal):
    """|IDFT{H / cal}|^2 along the last (tone) axis."""
    cal = np.asarray(cal)
    if np.any(cal == 0):
        raise ValueError("calibration response has zero entries")
    return np.abs(np.fft.ifft(np.asarray(H) / cal, axis=-1)) ** 2


def delay_axis(tone_count=801, tone_spacing=500e3):
    """Delay of each IDFT bin: n / (N * spacing)."""
    return np.arange(tone_count) / (tone_count * tone_spacing)


def deembed_factor(tx_pattern, rx_pattern=None):
    rx_pattern = rx_pattern or tx_pattern
    return tx_pattern.boresight_power * rx_pattern.boresight_power


def omni_pdp(pdp, tx_pattern=None, rx_pattern=None):
    """Max over beam pairs per delay bin, divided by the boresight gains.

    ``pdp`` has shape (tx, rx, delay).
    """
    tx_pattern = tx_pattern or BeamPattern()
    pdp = np.asarray(pdp)
    return pdp.reshape(-1, pdp.shape[-1]).max(axis=0) / deembed_factor(tx_pattern, rx_pattern)


def estimate_noise(pdp, tail=0.1):
    """Mean power over the highest-delay ``tail`` fraction of bins."""
    pdp = np.asarray(pdp)
    n = pdp.shape[-1]
    k = max(1, int(round(tail * n)))
    return float(pdp[..., n - k:].mean())


def threshold(peak, noise, margin_db, range_db):
    return max(noise * 10 ** (margin_db / 10), peak * 10 ** (-range_db / 10))


# --------------------------------------------------------------------------- MPC extraction

_OFFSETS = [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]


def _local_peaks(p, floor=-np.inf):
    """Cells that dominate their 3x3x3 neighbourhood (edges do not wrap).

    A cell strictly above all neighbours is a peak.  Exact ties form a
    plateau of equal cells; a plateau is one peak when none of its cells
    has a higher neighbour, reported at its lowest (delay, TX, RX) cell.
    Only cells above ``floor`` are considered.
    """
    pad = np.pad(p, 1, mode="constant", constant_values=-np.inf)
    T, R, N = p.shape
    ge = p > floor
    gt = ge.copy()
    for dt, dr, dd in _OFFSETS:
        nb = pad[1 + dt:1 + dt + T, 1 + dr:1 + dr + R, 1 + dd:1 + dd + N]
        ge &= p >= nb
        gt &= p > nb
    mask = gt
    seen = set()
    for start in zip(*np.nonzero(ge & ~gt)):
        if start in seen:
            continue
        # flood the plateau of cells equal to the start value
        v = p[start]
        group, stack, ok = [start], [start], True
        seen.add(start)
        while stack:
            c = stack.pop()
            ok &= bool(ge[c])
            for d in _OFFSETS:
                n = (c[0] + d[0], c[1] + d[1], c[2] + d[2])
                if n in seen or not (0 <= n[0] < T and 0 <= n[1] < R and 0 <= n[2] < N) or p[n] != v:
                    continue
                seen.add(n)
                group.append(n)
                stack.append(n)
        if ok:
            mask[min(group, key=lambda c: (c[2], c[0], c[1]))] = True
    return mask


def peak_search_3d(pdp, tx_az, rx_az, delays, noise=None, thresholds=Thresholds(),
                   deembed=1.0, burst=0):
    """Detect MPCs in a (tx, rx, delay) PDP tensor.

    A cell is reported if it is a neighbourhood peak and exceeds
    max(noise + margin, strongest cell - dynamic range).  Output is sorted
    by delay, then TX, then RX index.
    """
    pdp = np.asarray(pdp, dtype=float)
    if noise is None:
        noise = estimate_noise(pdp, thresholds.noise_tail)
    peak = float(pdp.max())
    if peak <= 0:
        return []
    thr = threshold(peak, noise, thresholds.det_margin_db, thresholds.dynamic_range_db)
    mask = _local_peaks(pdp, thr)
    out = []
    for t, r, n in zip(*np.nonzero(mask)):
        out.append(MPC(delay=float(delays[n]), dod_az=float(tx_az[t]), doa_az=float(rx_az[r]),
                       power_db=float(10 * np.log10(pdp[t, r, n] / deembed)), burst=burst,
                       tx_index=int(t), rx_index=int(r), delay_bin=int(n)))
    out.sort(key=lambda m: (m.delay_bin, m.tx_index, m.rx_index))
    return out


def ghost_filter(mpcs, sidelobe_db=-20.0, margin_db=3.0, max_bins=1):
    """Drop sidelobe ghosts.

    Of two MPCs within ``max_bins`` delay bins that differ in at least one
    beam index, the weaker is dropped if
    ``weaker <= stronger + sidelobe_db + margin_db``.
    """
    keep = []
    for i, m in enumerate(mpcs):
        ghost = False
        for j, s in enumerate(mpcs):
            if i == j or abs(s.delay_bin - m.delay_bin) > max_bins:
                continue
            if (s.tx_index, s.rx_index) == (m.tx_index, m.rx_index):
                continue
            if s.power_db > m.power_db and m.power_db <= s.power_db + sidelobe_db + margin_db:
                ghost = True
                break
        if not ghost:
            keep.append(m)
    return keep


def track_mpcs(per_burst, max_bins=2, max_angle=10.0, max_miss=2):
    """Greedy nearest-neighbour MPC tracking across bursts.

    Distance is Euclidean in (delay bins / max_bins, angles / max_angle);
    pairs outside any gate are never associated.  A track survives up to
    ``max_miss`` consecutive bursts without a detection.  Sets ``track_id``
    on every MPC and returns all tracks in creation order.
    """
    tracks, active = [], []
    for mpcs in per_burst:
        cands = []
        for ti, tr in enumerate(active):
            last = tr.last
            for mi, m in enumerate(mpcs):
                db_ = abs(m.delay_bin - last.delay_bin)
                dd = abs(m.dod_az - last.dod_az)
                da = abs(m.doa_az - last.doa_az)
                if db_ > max_bins or dd > max_angle or da > max_angle:
                    continue
                d = np.sqrt((db_ / max_bins) ** 2 + (dd / max_angle) ** 2 + (da / max_angle) ** 2)
                cands.append((d, tr.id, mi, ti))
        cands.sort()
        used_t, used_m = set(), set()
        for d, _, mi, ti in cands:
            if ti in used_t or mi in used_m:
                continue
            used_t.add(ti)
            used_m.add(mi)
            m = mpcs[mi]
            m.track_id = active[ti].id
            active[ti].mpcs.append(m)
            active[ti].misses = 0
        survivors = []
        for ti, tr in enumerate(active):
            if ti not in used_t:
                tr.misses += 1
            if tr.misses <= max_miss:
                survivors.append(tr)
        for mi, m in enumerate(mpcs):
            if mi in used_m:
                continue
            tr = Track(len(tracks), [m])
            m.track_id = tr.id
            tracks.append(tr)
            survivors.append(tr)
        active = survivors
    return tracks


# --------------------------------------------------------------------------- Doppler

def doppler_axis(n, interval=400e-6):
    return np.fft.fftshift(np.fft.fftfreq(n, d=interval))


def doppler_spectrum(x, interval=400e-6, nfft=None, axis=0):
    """Hann-windowed DFT across snapshots; returns (frequencies, power).

    Frequencies run from -1/(2*interval) upwards (fftshift order).  ``nfft``
    larger than the snapshot count zero-pads for a finer grid; the
    resolution stays 1 / (snapshots * interval).
    """
    x = np.asarray(x)
    s = x.shape[axis]
    if s < 2:
        raise ValueError("Doppler spectrum needs at least 2 snapshots")
    nfft = nfft or s
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(s) / s)
    shape = [1] * x.ndim
    shape[axis] = s
    spec = np.fft.fft(x * w.reshape(shape), n=nfft, axis=axis)
    power = np.abs(np.fft.fftshift(spec, axes=axis)) ** 2 / np.sum(w) ** 2
    return doppler_axis(nfft, interval), power


def delay_doppler(burst, cal, interval=400e-6, nfft=None):
    """Doppler power per (frequency, tx, rx, delay) for one burst [snap, tx, rx, tone]."""
    g = np.fft.ifft(np.asarray(burst) / cal, axis=-1)
    return doppler_spectrum(g, interval, nfft, axis=0)


def doppler_peak(burst, cal, tx_index, rx_index, delay_bin, interval=400e-6, nfft=None):
    """Frequency of the strongest Doppler component at one (pair, delay bin)."""
    g = np.fft.ifft(np.asarray(burst)[:, tx_index, rx_index, :] / cal, axis=-1)[:, delay_bin]
    f, p = doppler_spectrum(g, interval, nfft)
    return float(f[int(np.argmax(p))])


# --------------------------------------------------------------------------- statistics

def rms_delay_spread(pdp, delays, noise=0.0, margin_db=6.0, clip_db=25.0):
    """RMS delay spread (s) of the bins above max(noise + margin, peak - clip); NaN if none."""
    p = np.asarray(pdp, dtype=float)
    tau = np.asarray(delays, dtype=float)
    if p.size == 0 or p.max() <= 0:
        return float("nan")
    thr = threshold(p.max(), noise, margin_db, clip_db)
    sel = p >= thr
    if not sel.any():
        return float("nan")
    w = p[sel]
    t = tau[sel]
    mean = np.sum(w * t) / np.sum(w)
    # central form of sqrt(E[t^2] - E[t]^2), avoids cancellation
    return float(np.sqrt(np.sum(w * (t - mean) ** 2) / np.sum(w)))


def angular_stats(angles_deg, powers):
    """Power-weighted circular mean and spread, both in degrees; NaN if empty.

    The spread is sqrt(sum p |e^(j a) - mu|^2 / sum p) = sqrt(1 - |mu|^2)
    with mu the weighted mean resultant, a dimensionless value (|sin d| for
    two equal paths at +-d) read as radians and converted to degrees.
    """
    a = np.radians(np.asarray(angles_deg, dtype=float))
    p = np.asarray(powers, dtype=float)
    if a.size == 0 or p.sum() <= 0:
        return float("nan"), float("nan")
    e = np.exp(1j * a)
    mu = np.sum(p * e) / np.sum(p)
    spread = np.sqrt(np.sum(p * np.abs(e - mu) ** 2) / np.sum(p))
    return float(np.degrees(np.angle(mu))), float(np.degrees(spread))


def mpc_angular_stats(mpcs, side):
    if side not in ("DoD", "DoA"):
        raise ValueError("side must be 'DoD' or 'DoA'")
    ang = [m.dod_az if side == "DoD" else m.doa_az for m in mpcs]
    pw = [10 ** (m.power_db / 10) for m in mpcs]
    return angular_stats(ang, pw)


def path_gain(omni, noise=0.0, margin_db=6.0, range_db=30.0):
    """10 log10 of the total omni-PDP power above threshold (dB); NaN if none."""
    p = np.asarray(omni, dtype=float)
    if p.size == 0 or p.max() <= 0:
        return float("nan")
    sel = p >= threshold(p.max(), noise, margin_db, range_db)
    return float(10 * np.log10(p[sel].sum())) if sel.any() else float("nan")


def pair_gains(pdp, thr, deembed=1.0):
    """Per-pair gain (dB) summed over delay bins above ``thr``; NaN where none.

    ``pdp`` has shape (tx, rx, delay); result is flattened TX-major.
    """
    p = np.asarray(pdp).reshape(-1, np.shape(pdp)[-1])
    total = np.where(p > thr, p, 0.0).sum(axis=1)
    with np.errstate(divide="ignore"):
        g = 10 * np.log10(total / deembed)
    g[total <= 0] = np.nan
    return g


@dataclass
class BeamPairAnalysis:
    gains: np.ndarray  # [burst, pair] dB
    best_pair: np.ndarray
    best_gain: np.ndarray
    fixed_pair: int
    fixed_gain: np.ndarray
    fixed_excess: np.ndarray
    adaptive_excess: np.ndarray
    pair_excess: np.ndarray  # [burst, pair], each pair vs its own idle median


_FLOOR_DB = -400.0


def beam_pair_analysis(gains, idle, fixed_pair=None):
    """Fixed-beam vs adaptive (best pair per burst) excess loss.

    ``idle`` is a boolean mask over bursts or a burst count K (first K
    bursts).  The fixed pair defaults to the pair with the highest idle
    median; adaptive excess is that idle median minus the current best gain,
    so it never exceeds the fixed-pair excess.
    """
    g = np.nan_to_num(np.asarray(gains, dtype=float), nan=_FLOOR_DB)
    nb = g.shape[0]
    if np.ndim(idle) == 0:
        mask = np.arange(nb) < int(idle)
    else:
        mask = np.asarray(idle, dtype=bool)
    if not mask.any():
        raise ValueError("no idle bursts to reference")
    ref = np.median(g[mask], axis=0)
    if fixed_pair is None:
        fixed_pair = int(np.argmax(ref))
    best_pair = np.argmax(g, axis=1)
    best_gain = g[np.arange(nb), best_pair]
    return BeamPairAnalysis(
        gains=g, best_pair=best_pair, best_gain=best_gain, fixed_pair=fixed_pair,
        fixed_gain=g[:, fixed_pair], fixed_excess=ref[fixed_pair] - g[:, fixed_pair],
        adaptive_excess=ref[fixed_pair] - best_gain, pair_excess=ref[None, :] - g,
    )


@dataclass
class SwitchResult:
    chosen: np.ndarray
    switches: int
    loss_db: np.ndarray  # per burst, best - chosen

    @property
    def cumulative_loss(self):
        return float(self.loss_db.sum())


def beam_switch_strategy(gains, hysteresis_db=3.0, dwell=1):
    """Beam update with trigger hysteresis and minimum dwell.

    Starts on the best pair of the first burst and moves to the per-burst
    best only when it beats the current pair by >= ``hysteresis_db`` and the
    current pair has been held for >= ``dwell`` bursts.
    """
    if hysteresis_db < 0 or dwell < 1:
        raise ValueError("hysteresis must be >= 0 and dwell >= 1")
    g = np.nan_to_num(np.asarray(gains, dtype=float), nan=_FLOOR_DB)
    nb = g.shape[0]
    chosen = np.empty(nb, dtype=int)
    cur = int(np.argmax(g[0]))
    held = 0  # bursts already spent on cur
    switches = 0
    for b in range(nb):
        best = int(np.argmax(g[b]))
        gap = g[b, best] - g[b, cur]
        if b > 0 and gap > 0 and gap >= hysteresis_db and held >= dwell:
            cur = best
            held = 0
            switches += 1
        chosen[b] = cur
        held += 1
    loss = g.max(axis=1) - g[np.arange(nb), chosen]
    return SwitchResult(chosen, switches, loss)


# --------------------------------------------------------------------------- campaign driver

@dataclass
class BurstResult:
    burst: int
    pdp: np.ndarray  # [tx, rx, delay], snapshot-averaged
    omni: np.ndarray  # [delay], de-embedded
    noise: float
    omni_noise: float
    mpcs: list
    pair_gains: np.ndarray
    path_gain_db: float
    rms_ds: float
    dod_stats: tuple
    doa_stats: tuple
    doppler: np.ndarray = None  # [freq, delay], max over pairs


@dataclass(frozen=True)
class Geometry:
    tx_grid: BeamGrid = BeamGrid()
    rx_grid: BeamGrid = BeamGrid()
    tx_pattern: BeamPattern = BeamPattern()
    rx_pattern: BeamPattern = BeamPattern()
    tone_count: int = 801
    tone_spacing: float = 500e3
    snapshot_interval: float = 400e-6

    @property
    def deembed(self):
        return deembed_factor(self.tx_pattern, self.rx_pattern)


def evaluate_burst(burst, cal, geom=Geometry(), thresholds=Thresholds(), index=0, doppler=True,
                   doppler_pad=8):
    """Full per-burst chain on a [snapshot, tx, rx, tone] array.

    With ``doppler`` set (and >= 2 snapshots) each MPC also gets the peak of
    its own ``doppler_pad``-times zero-padded Doppler spectrum, and the
    max-over-pairs Doppler-delay map is kept.
    """
    burst = np.asarray(burst)
    g = np.fft.ifft(burst / cal, axis=-1)
    pdp = (np.abs(g) ** 2).mean(axis=0)
    delays = delay_axis(geom.tone_count, geom.tone_spacing)
    tx_az = np.array([a for a, _ in geom.tx_grid.beams()])
    rx_az = np.array([a for a, _ in geom.rx_grid.beams()])
    noise = estimate_noise(pdp, thresholds.noise_tail)
    mpcs = peak_search_3d(pdp, tx_az, rx_az, delays, noise, thresholds, geom.deembed, burst=index)
    mpcs = ghost_filter(mpcs, thresholds.sidelobe_db, thresholds.ghost_margin_db)
    omni = omni_pdp(pdp, geom.tx_pattern, geom.rx_pattern)
    onoise = estimate_noise(omni, thresholds.noise_tail)
    thr = threshold(pdp.max(), noise, thresholds.det_margin_db, thresholds.dynamic_range_db)
    dmap = None
    if doppler and burst.shape[0] >= 2:
        _, dd = doppler_spectrum(g, geom.snapshot_interval, axis=0)
        dmap = dd.reshape(dd.shape[0], -1, dd.shape[-1]).max(axis=1) / geom.deembed
        for m in mpcs:
            f, p = doppler_spectrum(g[:, m.tx_index, m.rx_index, m.delay_bin], geom.snapshot_interval,
                                    doppler_pad * burst.shape[0])
            m.doppler = float(f[int(np.argmax(p))])
    return BurstResult(
        burst=index, pdp=pdp, omni=omni, noise=noise, omni_noise=onoise, mpcs=mpcs,
        pair_gains=pair_gains(pdp, thr, geom.deembed),
        path_gain_db=path_gain(omni, onoise, thresholds.det_margin_db, thresholds.dynamic_range_db),
        rms_ds=rms_delay_spread(omni, delays, onoise, thresholds.det_margin_db, thresholds.rms_clip_db),
        dod_stats=mpc_angular_stats(mpcs, "DoD"), doa_stats=mpc_angular_stats(mpcs, "DoA"),
        doppler=dmap,
    )


@dataclass
class CampaignResult:
    bursts: list
    tracks: list
    pairs: BeamPairAnalysis
    times: np.ndarray
    idle: np.ndarray

    @property
    def path_gain_db(self):
        return np.array([b.path_gain_db for b in self.bursts])

    @property
    def rms_ds(self):
        return np.array([b.rms_ds for b in self.bursts])

    @property
    def omni(self):
        return np.stack([b.omni for b in self.bursts])

    @property
    def path_excess(self):
        pg = self.path_gain_db
        ref = pg[self.idle]
        if np.all(np.isnan(ref)):
            return np.full_like(pg, np.nan)
        return np.nanmedian(ref) - pg

    def stat(self, side, which):
        k = 0 if which == "mean" else 1
        src = [b.dod_stats if side == "DoD" else b.doa_stats for b in self.bursts]
        return np.array([s[k] for s in src])


def evaluate_campaign(bursts, cal, geom=Geometry(), thresholds=Thresholds(), idle=10, times=None,
                      keep_pdp=False, doppler=True):
    """Run the chain over an iterable of (index, burst) and collect statistics.

    ``idle`` is a burst count (first K bursts) or a boolean mask.
    """
    results = []
    for b, burst in bursts:
        r = evaluate_burst(burst, cal, geom, thresholds, b, doppler)
        if not keep_pdp:
            r.pdp = None
        results.append(r)
    nb = len(results)
    mask = np.arange(nb) < int(idle) if np.ndim(idle) == 0 else np.asarray(idle, dtype=bool)
    tracks = track_mpcs([r.mpcs for r in results])
    pairs = beam_pair_analysis(np.stack([r.pair_gains for r in results]), mask)
    if times is None:
        times = np.arange(nb, dtype=float)
    return CampaignResult(results, tracks, pairs, np.asarray(times), mask)
