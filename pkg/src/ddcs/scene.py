"""Dynamic street-scene geometry and ground-truth multipath.

A :class:`Scene` holds the TX/RX poses, static reflector facets and moving
objects (buses, cars, pedestrians).  :func:`enumerate_paths` returns the LOS
path plus image-method reflections at an instant (first order off facets and
movers, optionally second order between facets), each carrying
free-space loss, reflection loss, mover blockage loss, a static random phase
and its Doppler shift.

Conventions: scene frame is right-handed, z up, azimuth counter-clockwise
from +x in degrees.  Path angles are reported relative to the terminal's
boresight azimuth and wrapped to [-180, 180).
"""
from dataclasses import dataclass, field
import zlib

import numpy as np

from . import textconf
from .units import SPEED_OF_LIGHT, WAVELENGTH, wrap_deg

MATERIALS = ("metal", "glass", "body")


@dataclass(frozen=True)
class Pose:
    position: tuple
    azimuth: float

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3:
            raise ValueError("position must be a 3-vector")
        object.__setattr__(self, "position", pos)
        if pos[2] <= 0:
            raise ValueError(f"antenna height must be > 0, got {pos[2]}")
        if not -180.0 <= self.azimuth < 180.0:
            raise ValueError(f"azimuth {self.azimuth} outside [-180, 180)")

    @property
    def height(self):
        return self.position[2]

    @property
    def xyz(self):
        return np.array(self.position)


@dataclass(frozen=True)
class MaterialTable:
    """Flat blockage attenuation per material, dB."""

    metal: float = 24.0
    glass: float = 10.0
    body: float = 10.0

    def __post_init__(self):
        for m in MATERIALS:
            if getattr(self, m) < 0:
                raise ValueError(f"attenuation for {m} must be >= 0")

    def loss(self, material):
        return getattr(self, material)


@dataclass(frozen=True)
class ReflectorFacet:
    """Planar quad reflector (static), vertices in order around the edge."""

    vertices: tuple
    reflection_loss: float = 6.0
    name: str = ""

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.shape != (4, 3):
            raise ValueError("facet needs 4 vertices of 3 coordinates")
        object.__setattr__(self, "vertices", tuple(tuple(r) for r in v))
        if self.reflection_loss < 0:
            raise ValueError("reflection loss must be >= 0")
        n = _quad_normal(v)
        off = np.abs((v - v[0]) @ n)
        if off.max() > 1e-3:
            raise ValueError(f"facet vertices not coplanar (off by {off.max():.4f} m)")

    @property
    def array(self):
        return np.asarray(self.vertices)


@dataclass(frozen=True)
class Mover:
    """A moving box (vehicle or pedestrian) on a piecewise-linear trajectory.

    ``size`` is (length, width, height); length lies along the direction of
    travel.  ``materials`` lists (span fraction, material) from front to
    back.  ``waypoints`` are (t, x, y, z) with z the box floor.
    """

    id: str
    size: tuple
    materials: tuple
    waypoints: tuple
    reflection_loss: float = 10.0
    reflective: bool = True

    def __post_init__(self):
        size = tuple(float(s) for s in self.size)
        if len(size) != 3 or min(size) <= 0:
            raise ValueError("mover size must be three positive lengths")
        object.__setattr__(self, "size", size)
        mats = tuple((float(f), str(m)) for f, m in self.materials)
        if not mats:
            raise ValueError("mover needs at least one material span")
        for f, m in mats:
            if m not in MATERIALS:
                raise ValueError(f"unknown material {m!r}")
            if f <= 0:
                raise ValueError("material span fractions must be > 0")
        if abs(sum(f for f, _ in mats) - 1.0) > 1e-9:
            raise ValueError("material span fractions must sum to 1")
        object.__setattr__(self, "materials", mats)
        wps = tuple(tuple(float(c) for c in w) for w in self.waypoints)
        if not wps or any(len(w) != 4 for w in wps):
            raise ValueError("waypoints must be (t, x, y, z) rows")
        times = [w[0] for w in wps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        object.__setattr__(self, "waypoints", wps)
        if self.reflection_loss < 0:
            raise ValueError("reflection loss must be >= 0")

    def material_at(self, frac_from_front):
        acc = 0.0
        for f, m in self.materials:
            acc += f
            if frac_from_front <= acc + 1e-12:
                return m
        return self.materials[-1][1]


@dataclass(frozen=True)
class MoverState:
    mover: Mover
    position: np.ndarray
    velocity: np.ndarray
    heading: np.ndarray  # unit horizontal vector, front direction

    @property
    def id(self):
        return self.mover.id

    def local(self, p):
        """Coordinates of point(s) ``p`` in the box frame (along, across, up)."""
        u = self.heading
        v = np.array([-u[1], u[0], 0.0])
        d = np.asarray(p, dtype=float) - self.position
        return np.stack([d @ u, d @ v, d[..., 2]], axis=-1)


@dataclass(frozen=True)
class Scene:
    tx: Pose
    rx: Pose
    facets: tuple = ()
    movers: tuple = ()
    materials: MaterialTable = field(default_factory=MaterialTable)
    duration: float = 12.0
    name: str = "custom"
    los: bool = True  # False drops the direct path (e.g. terminals facing away)
    max_order: int = 1  # 2 adds facet-facet double bounces

    def __post_init__(self):
        object.__setattr__(self, "facets", tuple(self.facets))
        object.__setattr__(self, "movers", tuple(self.movers))
        ids = [m.id for m in self.movers]
        if len(set(ids)) != len(ids):
            raise ValueError("mover ids must be unique")
        if self.max_order not in (0, 1, 2):
            raise ValueError("max_order must be 0, 1 or 2")
        if np.allclose(self.tx.position, self.rx.position):
            raise ValueError("TX and RX must not be co-located")


@dataclass(frozen=True)
class PathTruth:
    delay: float
    dod_az: float
    dod_el: float
    doa_az: float
    doa_el: float
    amplitude: complex
    doppler: float
    kind: str  # "LOS" or "reflection"
    blocked: bool = False
    blockage_db: float = 0.0
    key: str = "los"

    @property
    def length(self):
        return self.delay * SPEED_OF_LIGHT

    @property
    def power_db(self):
        return 20.0 * np.log10(abs(self.amplitude))


# --------------------------------------------------------------------------- kinematics

def _mover_state(mover, t):
    wps = np.asarray(mover.waypoints)
    times, pts = wps[:, 0], wps[:, 1:]
    if len(times) == 1:
        pos, vel = pts[0].copy(), np.zeros(3)
    elif t < times[0]:
        pos, vel = pts[0].copy(), np.zeros(3)
    elif t >= times[-1]:
        pos, vel = pts[-1].copy(), np.zeros(3)
    else:
        i = int(np.searchsorted(times, t, side="right")) - 1
        span = times[i + 1] - times[i]
        vel = (pts[i + 1] - pts[i]) / span
        pos = pts[i] + vel * (t - times[i])
    return MoverState(mover, pos, vel, _heading(pts, times, t))


def _heading(pts, times, t):
    # direction of the active segment, else the nearest moving segment
    segs = np.diff(pts, axis=0)
    horiz = segs.copy()
    if len(horiz):
        horiz[:, 2] = 0.0
    norms = np.linalg.norm(horiz, axis=1) if len(horiz) else np.zeros(0)
    moving = np.nonzero(norms > 1e-9)[0]
    if moving.size == 0:
        return np.array([1.0, 0.0, 0.0])
    i = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(segs) - 1))
    if norms[i] <= 1e-9:
        before = moving[moving <= i]
        i = before[-1] if before.size else moving[0]
    return horiz[i] / norms[i]


def scene_at(scene, t):
    """Instantaneous mover states at time ``t`` (clamped at trajectory ends)."""
    return [_mover_state(m, t) for m in scene.movers]


# --------------------------------------------------------------------------- geometry helpers

def _quad_normal(v):
    n = np.cross(v[2] - v[0], v[3] - v[1])
    return n / np.linalg.norm(n)


def _azel(vec):
    x, y, z = vec
    az = np.degrees(np.arctan2(y, x))
    el = np.degrees(np.arctan2(z, np.hypot(x, y)))
    return float(az), float(el)


def _segment_box(p0, p1, state):
    """Chord parameters (t0, t1) of segment p0->p1 inside the mover box, or None."""
    L, W, H = state.mover.size
    a = state.local(p0)
    b = state.local(p1)
    d = b - a
    lo = np.array([-L / 2, -W / 2, 0.0])
    hi = np.array([L / 2, W / 2, H])
    t0, t1 = 0.0, 1.0
    for k in range(3):
        if abs(d[k]) < 1e-15:
            if a[k] < lo[k] or a[k] > hi[k]:
                return None
            continue
        ta = (lo[k] - a[k]) / d[k]
        tb = (hi[k] - a[k]) / d[k]
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return None
    return t0, t1, a, d


def blockage_loss(p0, p1, states, materials, exclude=None):
    """Total blockage loss (dB) of the segment p0->p1 through the movers.

    Each intersected mover contributes the attenuation of the material span
    at the midpoint of the chord through its box.
    """
    total = 0.0
    for st in states:
        if exclude is not None and st.id == exclude:
            continue
        hit = _segment_box(np.asarray(p0, float), np.asarray(p1, float), st)
        if hit is None:
            continue
        t0, t1, a, d = hit
        along = a[0] + d[0] * 0.5 * (t0 + t1)
        L = st.mover.size[0]
        frac = float(np.clip((L / 2 - along) / L, 0.0, 1.0))
        total += materials.loss(st.mover.material_at(frac))
    return total


def doppler_of_path(vertices, velocities, wavelength=WAVELENGTH):
    """Doppler shift (Hz) of a polyline path from vertex velocities.

    nu = -(1/lambda) dL/dt, with dL/dt summed over legs.  For a specular
    bounce the reflection point may be given the velocity of the reflecting
    body: sliding along the surface does not change L to first order.
    """
    p = np.asarray(vertices, dtype=float)
    v = np.asarray(velocities, dtype=float)
    rate = 0.0
    for i in range(len(p) - 1):
        leg = p[i + 1] - p[i]
        rate += float(leg @ (v[i + 1] - v[i])) / np.linalg.norm(leg)
    return -rate / wavelength


def static_phase(seed, key):
    """Uniform [0, 2pi) phase fixed per (seed, path identity)."""
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, zlib.crc32(key.encode())])
    return float(rng.uniform(0.0, 2.0 * np.pi))


def _specular_point(tx, rx, origin, normal):
    """Specular point on plane (origin, normal) for tx->rx, or None."""
    dt = (tx - origin) @ normal
    dr = (rx - origin) @ normal
    if dt * dr <= 0:  # not both on the same side
        return None
    image = tx - 2.0 * dt * normal
    # crossing of segment image->rx with the plane
    return image + (rx - image) * (dt / (dt + dr))


def _inside_quad(p, verts, normal):
    sign = 0
    for i in range(4):
        a, b = verts[i], verts[(i + 1) % 4]
        c = np.cross(b - a, p - a) @ normal
        if abs(c) < 1e-9:
            continue
        s = 1 if c > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return True


def _mover_face(state, midpoint):
    """Vertical box face of the mover that looks most towards ``midpoint``.

    Returns (origin, normal, half_width_along_face, face_axis).
    """
    L, W, H = state.mover.size
    u = state.heading
    v = np.array([-u[1], u[0], 0.0])
    c = state.position + np.array([0.0, 0.0, H / 2])
    faces = [(u, L / 2, v, W / 2), (-u, L / 2, v, W / 2), (v, W / 2, u, L / 2), (-v, W / 2, u, L / 2)]
    best = None
    for n, off, axis, half in faces:
        origin = c + n * off
        to_mid = midpoint - origin
        score = float(to_mid @ n) / (np.linalg.norm(to_mid) + 1e-12)
        if best is None or score > best[0]:
            best = (score, origin, n, half, axis)
    return best[1:]


# --------------------------------------------------------------------------- paths

def _make_path(kind, key, points, velocities, scene, states, seed, extra_loss_db,
               exclude=None):
    tx, rx = scene.tx, scene.rx
    legs = [np.linalg.norm(points[i + 1] - points[i]) for i in range(len(points) - 1)]
    length = float(sum(legs))
    block = 0.0
    for i in range(len(points) - 1):
        block += blockage_loss(points[i], points[i + 1], states, scene.materials, exclude=exclude)
    dod = points[1] - points[0]
    doa = points[-2] - points[-1]
    dod_az, dod_el = _azel(dod)
    doa_az, doa_el = _azel(doa)
    fspl = WAVELENGTH / (4.0 * np.pi * length)
    mag = fspl * 10.0 ** (-(extra_loss_db + block) / 20.0)
    amp = mag * np.exp(1j * static_phase(seed, key))
    return PathTruth(
        delay=length / SPEED_OF_LIGHT,
        dod_az=float(wrap_deg(dod_az - tx.azimuth)),
        dod_el=dod_el,
        doa_az=float(wrap_deg(doa_az - rx.azimuth)),
        doa_el=doa_el,
        amplitude=complex(amp),
        doppler=doppler_of_path(points, velocities),
        kind=kind,
        blocked=block > 0,
        blockage_db=block,
        key=key,
    )


def _mirror(p, origin, normal):
    return p - 2.0 * ((p - origin) @ normal) * normal


def _double_bounce(tx, rx, fa, fb):
    """Points (pa, pb) of the specular path tx -> fa -> fb -> rx, or None."""
    va, vb = fa.array, fb.array
    na, nb = _quad_normal(va), _quad_normal(vb)
    pb = _specular_point(_mirror(tx, va[0], na), rx, vb[0], nb)
    if pb is None or not _inside_quad(pb, vb, nb):
        return None
    pa = _specular_point(tx, pb, va[0], na)
    if pa is None or not _inside_quad(pa, va, na):
        return None
    return pa, pb


def enumerate_paths(scene, t, max_order=None, seed=0, states=None):
    """LOS plus specular reflections at time ``t``, sorted by delay.

    ``max_order`` defaults to the scene's own; order 2 covers facet-facet
    bounces only (movers reflect once).
    """
    if max_order is None:
        max_order = scene.max_order
    if max_order not in (0, 1, 2):
        raise ValueError("max_order must be 0, 1 or 2")
    if states is None:
        states = scene_at(scene, t)
    tx, rx = scene.tx.xyz, scene.rx.xyz
    zero = np.zeros(3)
    paths = []
    if scene.los:
        paths.append(_make_path("LOS", "los", [tx, rx], [zero, zero], scene, states, seed, 0.0))
    if max_order >= 1:
        for i, f in enumerate(scene.facets):
            verts = f.array
            n = _quad_normal(verts)
            p = _specular_point(tx, rx, verts[0], n)
            if p is None or not _inside_quad(p, verts, n):
                continue
            key = f"facet:{f.name or i}"
            paths.append(_make_path("reflection", key, [tx, p, rx], [zero, zero, zero],
                                    scene, states, seed, f.reflection_loss))
        mid = 0.5 * (tx + rx)
        for st in states:
            if not st.mover.reflective:
                continue
            origin, n, half, axis = _mover_face(st, mid)
            p = _specular_point(tx, rx, origin, n)
            # horizontal extent only: mover faces are treated as tall enough
            if p is None or abs((p - origin) @ axis) > half:
                continue
            paths.append(_make_path("reflection", f"mover:{st.id}", [tx, p, rx],
                                    [zero, st.velocity, zero], scene, states, seed,
                                    st.mover.reflection_loss, exclude=st.id))
    if max_order >= 2:
        for i, fa in enumerate(scene.facets):
            for j, fb in enumerate(scene.facets):
                if i == j:
                    continue
                pts = _double_bounce(tx, rx, fa, fb)
                if pts is None:
                    continue
                key = f"facet:{fa.name or i}>{fb.name or j}"
                paths.append(_make_path("reflection", key, [tx, *pts, rx], [zero] * 4, scene, states,
                                        seed, fa.reflection_loss + fb.reflection_loss))
    paths.sort(key=lambda q: q.delay)
    return paths


# --------------------------------------------------------------------------- file io

_POSE = {"position": None, "azimuth": None}
SCENE_LAYOUT = {
    "schema": None,
    "name": None,
    "duration": None,
    "los": None,
    "max_order": None,
    "tx": _POSE,
    "rx": _POSE,
    "materials": {"metal": None, "glass": None, "body": None},
    "facets": [{"name": None, "vertices": None, "reflection_loss": None}],
    "movers": [{"id": None, "size": None, "materials": None, "waypoints": None,
                "reflection_loss": None, "reflective": None}],
}


def scene_from_dict(d, path=None):
    req = textconf.require
    try:
        tx = req(d, "tx", path=path)
        rx = req(d, "rx", path=path)
        scene = Scene(
            tx=Pose(req(tx, "position", path=path, where="tx."), req(tx, "azimuth", path=path, where="tx.")),
            rx=Pose(req(rx, "position", path=path, where="rx."), req(rx, "azimuth", path=path, where="rx.")),
            facets=[ReflectorFacet(req(f, "vertices", path=path, where="facets."),
                                   f.get("reflection_loss", 6.0), f.get("name", ""))
                    for f in d.get("facets", [])],
            movers=[Mover(req(m, "id", path=path, where="movers."), req(m, "size", path=path, where="movers."),
                          [tuple(x) for x in req(m, "materials", path=path, where="movers.")],
                          req(m, "waypoints", path=path, where="movers."),
                          m.get("reflection_loss", 10.0), m.get("reflective", True))
                    for m in d.get("movers", [])],
            materials=MaterialTable(**d.get("materials", {})),
            duration=float(d.get("duration", 12.0)),
            name=d.get("name", "custom"),
            los=bool(d.get("los", True)),
            max_order=int(d.get("max_order", 1)),
        )
    except textconf.ConfigError:
        raise
    except (TypeError, KeyError, ValueError) as exc:
        raise textconf.ConfigError(f"invalid scene: {exc}", None, path) from None
    return scene


def scene_to_dict(scene):
    return {
        "schema": textconf.SCHEMA_VERSION,
        "name": scene.name,
        "duration": scene.duration,
        "los": scene.los,
        "max_order": scene.max_order,
        "tx": {"position": list(scene.tx.position), "azimuth": scene.tx.azimuth},
        "rx": {"position": list(scene.rx.position), "azimuth": scene.rx.azimuth},
        "materials": {m: scene.materials.loss(m) for m in MATERIALS},
        "facets": [{"name": f.name, "vertices": [list(v) for v in f.vertices],
                    "reflection_loss": f.reflection_loss} for f in scene.facets],
        "movers": [{"id": m.id, "size": list(m.size), "materials": [[f, k] for f, k in m.materials],
                    "waypoints": [list(w) for w in m.waypoints], "reflection_loss": m.reflection_loss,
                    "reflective": m.reflective} for m in scene.movers],
    }


SCENE_TYPES = {"name": str, "duration": float, "los": bool, "max_order": int,
               "tx": {"position": list, "azimuth": float}, "rx": {"position": list, "azimuth": float}}


def loads_scene(text, path=None):
    d = textconf.parse(text, SCENE_LAYOUT, path)
    textconf.check_types(d, SCENE_TYPES, text, path)
    return scene_from_dict(d, path)


def load_scene(path):
    with open(path, encoding="utf-8") as fh:
        return loads_scene(fh.read(), str(path))


def dump_scene(scene, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(textconf.dumps(scene_to_dict(scene)))
