"""Command line entry point: ``ddcs simulate | evaluate | report | preset``.

``--scene`` takes either a scene file or one of the preset names; with a
preset the sounder config defaults to the preset's own.
"""
import argparse
from dataclasses import replace
import logging
import os
import sys
import time

import numpy as np

from . import textconf
from .array import BeamGrid
from .evaluation import Geometry, Thresholds, evaluate_campaign
from .presets import PRESETS, get_preset
from .report import summarize, write_outputs
from .scene import dump_scene, load_scene
from .sounder import CampaignError, SounderConfig, dump_config, iter_bursts, load_config, noise_floor, slot_times
from .tensorfile import TensorFile, TensorFileError, TensorWriter

log = logging.getLogger("ddcs")

EXIT_INPUT = 2  # bad files / arguments


def _fail(msg, code=EXIT_INPUT):
    print(f"ddcs: error: {msg}", file=sys.stderr)
    return code


def _load_inputs(args):
    if args.scene in PRESETS:
        preset = get_preset(args.scene)
        scene, config = preset.scene, preset.config
    else:
        scene, config = load_scene(args.scene), SounderConfig()
    if args.config:
        config = load_config(args.config)
    over = {"seed": args.seed}
    if args.bursts is not None:
        over["bursts"] = args.bursts
    if args.noiseless:
        over["noise"] = False
    return scene, replace(config, **over)


def cmd_simulate(args):
    try:
        scene, config = _load_inputs(args)
    except (textconf.ConfigError, ValueError, OSError) as exc:
        return _fail(str(exc))
    end = config.start_time + config.campaign_duration
    if end > scene.duration + 1e-9:
        return _fail(f"campaign ends at {end:.3f} s but scenario '{scene.name}' lasts {scene.duration:.3f} s")
    print(f"scene {scene.name}: {len(scene.facets)} facets, {len(scene.movers)} movers")
    print(f"sweep {config.sweep_duration * 1e6:.0f} us, burst {config.burst_duration * 1e3:g} ms, "
          f"period {config.burst_period * 1e3:g} ms, campaign {config.campaign_duration:g} s "
          f"({config.bursts} bursts x {config.snapshots} snapshots x {config.pair_count} pairs)")
    print(f"noise floor {noise_floor(config):.1f} dBm over {config.bandwidth / 1e6:g} MHz"
          + ("" if config.noise else " (disabled)"))
    t0 = time.perf_counter()
    try:
        with TensorWriter(args.out, config.dims, config.center_frequency, config.tone_spacing,
                          slot_times(config)) as w:
            for b, burst in iter_bursts(scene, config):
                w.write_burst(burst)
                log.debug("burst %d/%d", b + 1, config.bursts)
    except CampaignError as exc:
        return _fail(str(exc))
    print(f"wrote {args.out} dims {list(config.dims)} in {time.perf_counter() - t0:.1f} s")
    return 0


def _geometry(tf, config_path):
    _, s, t, r, k = tf.dims
    if config_path:
        cfg = load_config(config_path)
        if (len(cfg.tx_grid), len(cfg.rx_grid), cfg.tone_count) != (t, r, k):
            raise ValueError(f"config grid/tones {len(cfg.tx_grid)}x{len(cfg.rx_grid)}x{cfg.tone_count} "
                             f"do not match file dims {t}x{r}x{k}")
    else:
        # evenly spaced over +-45 deg, which is the default 10-beam grid
        grid = lambda n: BeamGrid(tuple(np.linspace(-45.0, 45.0, n)) if n > 1 else (0.0,))
        cfg = SounderConfig(tx_grid=grid(t), rx_grid=grid(r), tone_count=k, tone_spacing=tf.tone_spacing)
    geom = Geometry(cfg.tx_grid, cfg.rx_grid, cfg.pattern, cfg.pattern, k, tf.tone_spacing,
                    cfg.slot_duration * t * r)
    return cfg, geom


def cmd_evaluate(args):
    try:
        tf = TensorFile(args.inp)
        cfg, geom = _geometry(tf, args.config)
    except (TensorFileError, textconf.ConfigError, ValueError, OSError) as exc:
        return _fail(str(exc))
    thr = Thresholds(det_margin_db=args.det_margin)
    nb = tf.bursts
    idle = min(args.idle_bursts, nb)
    if idle < 1:
        return _fail("--idle-bursts must be >= 1")
    t0 = time.perf_counter()
    times = tf.timestamps[:, 0, 0].copy()
    res = evaluate_campaign(tf.iter_bursts(), cfg.cal(), geom, thr, idle=idle, times=times)
    meta = {"input": os.path.basename(args.inp), "dims": list(tf.dims), "idle_bursts": idle,
            "det_margin_db": thr.det_margin_db, "dynamic_range_db": thr.dynamic_range_db,
            "rms_clip_db": thr.rms_clip_db, "calibration": cfg.calibration}
    write_outputs(res, args.out_dir, geom, meta)
    print(f"evaluated {nb} bursts in {time.perf_counter() - t0:.1f} s -> {args.out_dir}")
    return 0


def cmd_report(args):
    try:
        print(summarize(args.dir))
    except (FileNotFoundError, ValueError, KeyError) as exc:
        return _fail(str(exc))
    return 0


def cmd_preset(args):
    p = get_preset(args.name)
    dump_scene(p.scene, args.scene_out)
    if args.config_out:
        dump_config(p.config, args.config_out)
    print(f"{p.name}: idle window {p.idle[0]:g}-{p.idle[1]:g} s")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="ddcs", description="Beam-swept channel sounder simulation and evaluation.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="synthesise a campaign into a DDCS tensor file")
    p.add_argument("--scene", required=True, help=f"scene file or preset ({', '.join(PRESETS)})")
    p.add_argument("--config", help="sounder config file (default: preset / built-in)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--bursts", type=int)
    p.add_argument("--noiseless", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="extract MPCs and statistics from a DDCS file")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--det-margin", type=float, default=6.0, help="detection margin above noise, dB")
    p.add_argument("--idle-bursts", type=int, default=10, help="leading bursts used as idle reference")
    p.add_argument("--config", help="sounder config used for the run (grids, pattern, calibration)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="print a summary of an evaluation directory")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("preset", help="write a preset's scene (and config) files")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--scene-out", required=True)
    p.add_argument("--config-out")
    p.set_defaults(func=cmd_preset)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
