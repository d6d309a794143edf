"""Synthetic street scenes for the three measured cases.

Coordinates are invented (no site survey exists); they are chosen so the
idle channel reproduces the reported path lengths and beam pairs and the
blockage events happen at the reported times:

* ``case1_blocking_bus``: LOS (51 m, beams [-15, -25]) plus a reflection
  (57.75 m, beams [35, -35]) 9 dB below it, and two weak late arrivals.
  A bus crawls into the near lane, cuts the LOS at t = 5 s (20 dB), then
  the reflection as well at t = 8.5 s, and stops in front of the RX.
* ``case2_moving_scatterers``: TX and RX both look down the street; a far
  static reflector at beams [-5, 5] plus two approaching and two receding
  movers (cars, pedestrians).
* ``case3_blocked_los``: strong LOS with one reflection 10 dB down; a bus
  with metal front/back and glass sides crosses the LOS from t = 6 s.
"""
from dataclasses import dataclass, replace

import numpy as np

from .scene import MaterialTable, Mover, Pose, ReflectorFacet, Scene
from .sounder import SounderConfig


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    scene: Scene
    config: SounderConfig
    idle: tuple  # (t_start, t_end) seconds of undisturbed channel

    def idle_mask(self, config=None):
        config = config or self.config
        t = config.start_time + np.arange(config.bursts) * config.burst_period
        return (t >= self.idle[0]) & (t < self.idle[1])


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _dir(az_deg):
    a = np.radians(az_deg)
    return np.array([np.cos(a), np.sin(a)])


def facet_at(point, tx, rx, width=3.0, height=12.0, loss=6.0, name=""):
    """Vertical facet centred (horizontally) on ``point`` that mirrors tx onto rx."""
    p = np.asarray(point, dtype=float)[:2]
    n = _unit(_unit(np.asarray(tx)[:2] - p) + _unit(np.asarray(rx)[:2] - p))
    t = np.array([-n[1], n[0]])
    a, b = p - t * width / 2, p + t * width / 2
    verts = [(a[0], a[1], 0.0), (b[0], b[1], 0.0), (b[0], b[1], height), (a[0], a[1], height)]
    return ReflectorFacet(verts, loss, name)


def _ray_point(origin, az, target_len, other):
    """Point along ray (origin, az) whose bounce path origin->pt->other has ``target_len`` (2D)."""
    d = _dir(az)
    lo, hi = 0.1, 500.0
    for _ in range(100):
        r = 0.5 * (lo + hi)
        p = origin[:2] + r * d
        if r + np.linalg.norm(p - other[:2]) < target_len:
            lo = r
        else:
            hi = r
    return origin[:2] + 0.5 * (lo + hi) * d


def _bus_waypoints(front_track, length, y, z=0.0):
    """Waypoints of the box centre from (t, x_front) samples for travel along +x."""
    return [(t, xf - length / 2, y, z) for t, xf in front_track]


# --------------------------------------------------------------------------- case 1

def _case1_geometry():
    h_rx, h_tx = 1.8, 3.5
    rx = np.array([0.0, 0.0, h_rx])
    rx_az = 90.0
    doa_los, doa_ref = -23.0, -37.0
    dh = np.sqrt(51.0 ** 2 - (h_tx - h_rx) ** 2)

    def build(e):
        tx = np.r_[dh * _dir(rx_az + doa_los), h_tx]
        tx_az = rx_az + doa_los + 180.0 + 15.0 + e  # LOS leaves TX at -(15 + e)
        d1, d2 = _dir(rx_az + doa_ref), _dir(tx_az + 35.0 + e)
        s, u = np.linalg.solve(np.array([d1, -d2]).T, tx[:2])
        length = np.hypot(s + u, h_tx - h_rx)
        return tx, tx_az, s * d1, length

    # spread the off-grid error evenly over LOS and reflection DoDs
    lo, hi = 0.0, 6.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if build(mid)[3] < 57.75:
            lo = mid
        else:
            hi = mid
    tx, tx_az, p_ref, _ = build(0.5 * (lo + hi))
    return rx, rx_az, tx, (tx_az + 180.0) % 360.0 - 180.0, p_ref


def _ray_cross(p0, az0, p1, az1):
    """Intersection of two horizontal rays, as a point."""
    d0, d1 = _dir(az0), _dir(az1)
    s, _ = np.linalg.solve(np.array([d0, -d1]).T, np.asarray(p1)[:2] - np.asarray(p0)[:2])
    return np.asarray(p0)[:2] + s * d0


def _zigzag(rx, az_rx, tx, az_tx, r_rx, length):
    """Wall points a (seen from rx) and b (seen from tx) of a double bounce of ``length``."""
    a = rx[:2] + r_rx * _dir(az_rx)
    lo, hi = 0.1, 200.0
    for _ in range(100):
        r = 0.5 * (lo + hi)
        b = tx[:2] + r * _dir(az_tx)
        if r_rx + np.linalg.norm(b - a) + r < length:
            lo = r
        else:
            hi = r
    return a, tx[:2] + 0.5 * (lo + hi) * _dir(az_tx)


def case1_blocking_bus():
    rx, rx_az, tx, tx_az, p_ref = _case1_geometry()
    # weak late energy keeps the RMS-DS at ~40 ns once both dominant paths
    # are gone: a west facade at [-45, 35] and a cross-street double bounce
    # at [45, 45], 140 ns behind the LOS
    p_w = _ray_cross(rx, rx_az + 35.0, tx, tx_az - 45.0)
    a, b = _zigzag(rx, rx_az + 45.0, tx, tx_az + 45.0, 20.0, 51.0 + 140e-9 * 299792458.0)
    facets = [
        facet_at(p_ref, tx, rx, width=4.0, loss=7.95, name="shelter"),
        facet_at(p_w, tx, rx, width=4.0, loss=16.3, name="facade_w"),
        facet_at(a, b, rx, width=4.0, loss=9.5, name="canyon_w"),
        facet_at(b, tx, a, width=4.0, loss=9.55, name="canyon_e"),
    ]
    L, W, H = 12.0, 2.5, 3.2
    lane_y = 8.0
    # front enters the LOS at 5 s, the reflection leg at 8.5 s, stops at 10 s
    los_x = (lane_y - W / 2) / np.tan(np.radians(rx_az - 23.0))
    ref_x = (lane_y - W / 2) / np.tan(np.radians(rx_az - 37.0))
    front = [(0.0, -60.0), (4.95, los_x), (8.45, ref_x), (10.0, ref_x + 7.0)]
    bus = Mover("bus", (L, W, H), [(1.0, "metal")], _bus_waypoints(front, L, lane_y),
                reflection_loss=6.0, reflective=False)
    scene = Scene(Pose(tuple(tx), float(tx_az)), Pose(tuple(rx), rx_az), facets, [bus],
                  MaterialTable(metal=20.0, glass=10.0, body=10.0), duration=12.0,
                  name="case1_blocking_bus", max_order=2)
    return ScenarioPreset("case1_blocking_bus", scene, SounderConfig(), idle=(0.0, 4.0))


# --------------------------------------------------------------------------- case 2

def case2_moving_scatterers():
    rx = np.array([0.0, 0.0, 1.8])
    tx = np.array([0.0, 20.0, 2.5])
    mid_y = 10.0
    # far static reflector seen at DoD -5, DoA +5
    x_far = mid_y / np.tan(np.radians(5.0))
    facets = [ReflectorFacet([(x_far, mid_y - 3, 0.0), (x_far, mid_y + 3, 0.0),
                              (x_far, mid_y + 3, 15.0), (x_far, mid_y - 3, 15.0)], 6.4, "far_wall")]
    car = (4.5, 1.8, 1.5)
    ped = (0.3, 0.5, 1.8)
    movers = [
        Mover("car1", car, [(0.2, "metal"), (0.6, "glass"), (0.2, "metal")],
              [(0.0, 60.0, mid_y, 0.0), (9.0, 15.0, mid_y, 0.0), (12.0, 15.0, mid_y, 0.0)],
              reflection_loss=6.0),
        Mover("ped1", ped, [(1.0, "body")],
              [(0.0, 26.0, mid_y, 0.0), (12.0, 9.2, mid_y, 0.0)], reflection_loss=14.0),
        Mover("car2", car, [(0.2, "metal"), (0.6, "glass"), (0.2, "metal")],
              [(0.0, -30.0, mid_y, 0.0), (1.0, -30.0, mid_y, 0.0), (12.0, 25.0, mid_y, 0.0)],
              reflection_loss=6.0),
        Mover("ped2", ped, [(1.0, "body")],
              [(0.0, 11.0, mid_y + 6.0, 0.0), (6.0, 11.0, mid_y, 0.0), (12.0, 19.4, mid_y, 0.0)],
              reflection_loss=14.0),
    ]
    # car2 waits behind the arrays and ped2 steps off the kerb; both only
    # show up in the beams after ~6 s, receding.
    # both arrays look down the street; the direct path is outside both
    # +-45 deg fields and the back/side radiation is not modelled
    scene = Scene(Pose(tuple(tx), 0.0), Pose(tuple(rx), 0.0), facets, movers, MaterialTable(),
                  duration=12.0, name="case2_moving_scatterers", los=False)
    return ScenarioPreset("case2_moving_scatterers", scene, SounderConfig(), idle=(0.0, 1.0))


# --------------------------------------------------------------------------- case 3

def case3_blocked_los():
    rx = np.array([0.0, 0.0, 1.8])
    rx_az = 90.0
    los_h = 20.0
    tx = np.r_[los_h / np.sin(np.radians(95.0)) * _dir(95.0), 4.5]
    tx_az = -80.0  # LOS at [tx, rx] = [-5, 5]
    p_ref = rx[:2] + 14.0 * _dir(rx_az - 35.0)
    facets = [facet_at(p_ref, tx, rx, width=3.0, loss=7.0, name="sign")]
    L, W, H = 12.0, 2.5, 3.3
    lane_y = 7.0
    speed = 7.27
    los_x = lane_y / np.tan(np.radians(95.0)) - (W / 2) / np.tan(np.radians(95.0)) * 0
    # metal front 240 ms, glass 1.14 s, metal back 270 ms at this speed
    spans = np.array([0.24, 1.14, 0.27]) * speed
    spans = spans / spans.sum()
    t_hit = 6.0
    front = [(0.0, los_x - speed * t_hit), (12.0, los_x + speed * (12.0 - t_hit))]
    bus = Mover("bus", (L, W, H), [(spans[0], "metal"), (spans[1], "glass"), (1 - spans[0] - spans[1], "metal")],
                _bus_waypoints(front, L, lane_y), reflective=False)
    scene = Scene(Pose(tuple(tx), tx_az), Pose(tuple(rx), rx_az), facets, [bus],
                  MaterialTable(metal=24.0, glass=10.0, body=10.0), duration=12.0,
                  name="case3_blocked_los")
    return ScenarioPreset("case3_blocked_los", scene, SounderConfig(), idle=(0.0, 5.0))


PRESETS = {
    "case1_blocking_bus": case1_blocking_bus,
    "case2_moving_scatterers": case2_moving_scatterers,
    "case3_blocked_los": case3_blocked_los,
}


def get_preset(name, **config_overrides):
    try:
        preset = PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    if config_overrides:
        preset = replace(preset, config=replace(preset.config, **config_overrides))
    return preset
