"""Evaluation outputs on disk and the plain-text campaign summary.

An output directory holds::

    stats.csv       one row per burst (path gain, RMS-DS, angles, beam pairs)
    mpcs.csv        one row per detected MPC
    tracks.csv      one row per MPC track
    pair_gains.csv  per-burst gain of every beam pair (dB, TX-major)
    pdp_time.bin    omni PDP in dB, grid [burst, delay]
    doppler.bin     Doppler-delay power in dB, grid [burst, doppler, delay]
    meta.toml       evaluation settings, read back by the summary
"""
import csv
import math
import os

import numpy as np

from . import textconf
from .evaluation import beam_switch_strategy, delay_axis, doppler_axis
from .tensorfile import write_grid

STATS_COLUMNS = [
    "burst", "time_s", "path_gain_db", "path_excess_db", "rms_ds_ns",
    "dod_mean_deg", "dod_spread_deg", "doa_mean_deg", "doa_spread_deg",
    "best_pair", "best_tx_deg", "best_rx_deg", "best_gain_db",
    "fixed_gain_db", "fixed_excess_db", "adaptive_excess_db", "mpc_count", "noise_db",
]
MPC_COLUMNS = ["burst", "time_s", "track_id", "delay_ns", "delay_bin", "dod_deg", "doa_deg",
               "power_db", "doppler_hz"]
TRACK_COLUMNS = ["track_id", "first_burst", "last_burst", "length", "delay_ns_mean",
                 "dod_deg", "doa_deg", "power_db_max", "doppler_hz_median"]
OUTPUT_FILES = ("stats.csv", "mpcs.csv", "tracks.csv", "pair_gains.csv", "pdp_time.bin",
                "doppler.bin", "meta.toml")


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else f"{x:.6f}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.maximum(x, 1e-300))


def write_outputs(result, out_dir, geom, meta):
    """Write the full report set for a CampaignResult."""
    os.makedirs(out_dir, exist_ok=True)
    tx_az = [a for a, _ in geom.tx_grid.beams()]
    rx_az = [a for a, _ in geom.rx_grid.beams()]
    nrx = len(rx_az)
    pa = result.pairs
    excess = result.path_excess
    rows = []
    for i, b in enumerate(result.bursts):
        best = int(pa.best_pair[i])
        rows.append([b.burst, result.times[i], b.path_gain_db, excess[i], b.rms_ds * 1e9,
                     b.dod_stats[0], b.dod_stats[1], b.doa_stats[0], b.doa_stats[1],
                     best, tx_az[best // nrx], rx_az[best % nrx], pa.best_gain[i],
                     pa.fixed_gain[i], pa.fixed_excess[i], pa.adaptive_excess[i], len(b.mpcs),
                     _db(b.noise)])
    _write_csv(os.path.join(out_dir, "stats.csv"), STATS_COLUMNS, rows)

    rows = []
    for i, b in enumerate(result.bursts):
        for m in b.mpcs:
            rows.append([m.burst, result.times[i], m.track_id, m.delay * 1e9, m.delay_bin,
                         m.dod_az, m.doa_az, m.power_db, m.doppler])
    _write_csv(os.path.join(out_dir, "mpcs.csv"), MPC_COLUMNS, rows)

    rows = []
    for tr in result.tracks:
        ms = tr.mpcs
        dop = [m.doppler for m in ms if not math.isnan(m.doppler)]
        rows.append([tr.id, ms[0].burst, ms[-1].burst, len(ms), np.mean([m.delay for m in ms]) * 1e9,
                     ms[int(np.argmax([m.power_db for m in ms]))].dod_az,
                     ms[int(np.argmax([m.power_db for m in ms]))].doa_az,
                     max(m.power_db for m in ms), np.median(dop) if dop else float("nan")])
    _write_csv(os.path.join(out_dir, "tracks.csv"), TRACK_COLUMNS, rows)

    header = ["burst"] + [f"tx{t:+g}_rx{r:+g}" for t in tx_az for r in rx_az]
    _write_csv(os.path.join(out_dir, "pair_gains.csv"), header,
               [[b.burst, *pa.gains[i]] for i, b in enumerate(result.bursts)])

    step = geom.tone_count and delay_axis(geom.tone_count, geom.tone_spacing)[1]
    t0 = float(result.times[0]) if len(result.times) else 0.0
    dt = float(result.times[1] - result.times[0]) if len(result.times) > 1 else 0.0
    write_grid(os.path.join(out_dir, "pdp_time.bin"), _db(result.omni), [(t0, dt), (0.0, step)])
    maps = [b.doppler for b in result.bursts]
    if maps and maps[0] is not None:
        dop = _db(np.stack(maps))
        f = doppler_axis(dop.shape[1], geom.snapshot_interval)
        fstep = f[1] - f[0] if len(f) > 1 else 0.0
        write_grid(os.path.join(out_dir, "doppler.bin"), dop, [(t0, dt), (f[0], fstep), (0.0, step)])
    else:
        write_grid(os.path.join(out_dir, "doppler.bin"),
                   np.zeros((len(result.bursts), 0, geom.tone_count), dtype=np.float32),
                   [(t0, dt), (0.0, 0.0), (0.0, step)])

    meta = dict(meta)
    meta.update(schema=textconf.SCHEMA_VERSION, tx_azimuths=list(map(float, tx_az)),
                rx_azimuths=list(map(float, rx_az)), fixed_pair=int(pa.fixed_pair))
    with open(os.path.join(out_dir, "meta.toml"), "w", encoding="utf-8") as fh:
        fh.write(textconf.dumps(meta))


# --------------------------------------------------------------------------- summary

def read_csv(path):
    """Columns of a report CSV as float arrays keyed by header name."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    head, body = rows[0], rows[1:]
    cols = list(zip(*body)) if body else [()] * len(head)
    return {h: np.array(c, dtype=float) for h, c in zip(head, cols)}


def blockage_episodes(fixed_excess, adaptive_excess, on_db=3.0, jump_db=3.0, min_len=2):
    """Runs of bursts with fixed-pair excess >= ``on_db``, cut where either
    excess jumps by more than ``jump_db``; runs shorter than ``min_len``
    bursts are merged into the preceding one.  Returns (start, stop) index
    pairs, stop exclusive."""
    fe = np.asarray(fixed_excess, dtype=float)
    ae = np.asarray(adaptive_excess, dtype=float)
    on = np.nan_to_num(fe, nan=0.0) >= on_db
    segs = []
    i = 0
    while i < len(fe):
        if not on[i]:
            i += 1
            continue
        j = i + 1
        while j < len(fe) and on[j] and abs(fe[j] - fe[j - 1]) <= jump_db and abs(ae[j] - ae[j - 1]) <= jump_db:
            j += 1
        if segs and j - i < min_len and segs[-1][1] == i:
            segs[-1] = (segs[-1][0], j)
        else:
            segs.append((i, j))
        i = j
    return segs


def _pair_label(p, tx_az, rx_az):
    p = int(p)
    return f"[{tx_az[p // len(rx_az)]:g}, {rx_az[p % len(rx_az)]:g}]"


def summarize(out_dir):
    """Plain-text summary of an evaluation directory."""
    missing = [f for f in ("stats.csv", "pair_gains.csv", "meta.toml")
               if not os.path.exists(os.path.join(out_dir, f))]
    if missing:
        raise FileNotFoundError(f"{out_dir}: missing {', '.join(missing)}; run 'evaluate' first")
    with open(os.path.join(out_dir, "meta.toml"), encoding="utf-8") as fh:
        meta = textconf.loads(fh.read())
    st = read_csv(os.path.join(out_dir, "stats.csv"))
    pg = read_csv(os.path.join(out_dir, "pair_gains.csv"))
    tx_az, rx_az = meta["tx_azimuths"], meta["rx_azimuths"]
    n = len(st["burst"])
    if n == 0:
        raise ValueError(f"{out_dir}: stats.csv has no bursts")
    idle = min(int(meta.get("idle_bursts", 10)), n)
    t = st["time_s"]
    lines = []
    add = lines.append
    add(f"input: {meta.get('input', '?')}")
    add(f"bursts: {n}   time: {t[0]:.3f} .. {t[-1]:.3f} s   idle reference: first {idle} bursts")
    fixed = int(meta["fixed_pair"])
    with np.errstate(all="ignore"):
        add("")
        add("idle channel")
        add(f"  path gain          {np.nanmedian(st['path_gain_db'][:idle]):8.2f} dB")
        add(f"  RMS delay spread   {np.nanmedian(st['rms_ds_ns'][:idle]):8.2f} ns")
        add(f"  fixed beam pair    {_pair_label(fixed, tx_az, rx_az)} (TX, RX deg)")
        add("")
        add("excess loss (relative to idle median)")
        add(f"  max fixed-beam     {np.nanmax(st['fixed_excess_db']):8.2f} dB")
        add(f"  max adaptive       {np.nanmax(st['adaptive_excess_db']):8.2f} dB")
        add(f"  max path gain      {np.nanmax(st['path_excess_db']):8.2f} dB (omni)")
        eps = blockage_episodes(st["fixed_excess_db"], st["adaptive_excess_db"])
        if eps:
            add("  blockage episodes (fixed-beam excess >= 3 dB):")
            add(f"    {'start s':>8} {'stop s':>8} {'fixed dB':>9} {'adaptive dB':>12} {'RMS-DS ns':>10}  best pair")
            for a, b in eps:
                best = np.bincount(st["best_pair"][a:b].astype(int)).argmax()
                add(f"    {t[a]:8.3f} {t[b - 1]:8.3f} {np.nanmedian(st['fixed_excess_db'][a:b]):9.2f} "
                    f"{np.nanmedian(st['adaptive_excess_db'][a:b]):12.2f} "
                    f"{np.nanmedian(st['rms_ds_ns'][a:b]):10.2f}  {_pair_label(best, tx_az, rx_az)}")
        else:
            add("  no blockage episodes")
        add("")
        add("spread ranges (min .. max over bursts)")
        for key, label, unit in (("rms_ds_ns", "RMS-DS", "ns"), ("dod_spread_deg", "DoD spread", "deg"),
                                 ("doa_spread_deg", "DoA spread", "deg"), ("dod_mean_deg", "DoD mean", "deg"),
                                 ("doa_mean_deg", "DoA mean", "deg")):
            v = st[key]
            add(f"  {label:<12} {np.nanmin(v):8.3f} .. {np.nanmax(v):8.3f} {unit}")
    add("")
    best = st["best_pair"].astype(int)
    add("best beam pair")
    add(f"  changes of the per-burst best pair: {int(np.count_nonzero(np.diff(best)))}")
    counts = np.bincount(best, minlength=len(tx_az) * len(rx_az))
    top = np.argsort(-counts, kind="stable")[:3]
    add("  most frequent: " + ", ".join(f"{_pair_label(p, tx_az, rx_az)} x{counts[p]}" for p in top if counts[p]))
    gains = np.stack([v for k, v in pg.items() if k != "burst"], axis=1)
    add("  switching with hysteresis (dwell 1 burst):")
    for h in (0.0, 1.0, 3.0, 6.0):
        r = beam_switch_strategy(gains, h, 1)
        add(f"    {h:4.1f} dB: {r.switches:4d} switches, mean loss vs best {r.loss_db.mean():6.2f} dB, "
            f"max {r.loss_db.max():6.2f} dB")
    return "\n".join(lines)
