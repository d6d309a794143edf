import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from ddcs import textconf
from ddcs.presets import case1_blocking_bus, case3_blocked_los
from ddcs.scene import (
    MaterialTable, Mover, Pose, ReflectorFacet, Scene, blockage_loss, doppler_of_path, dump_scene,
    enumerate_paths, load_scene, loads_scene, scene_at, scene_to_dict,
)
from ddcs.units import SPEED_OF_LIGHT, WAVELENGTH

C = SPEED_OF_LIGHT


def _mover(id="m", size=(4.0, 2.0, 2.0), mats=((1.0, "metal"),), wps=((0.0, 0.0, 0.0, 0.0),), **kw):
    return Mover(id, size, mats, wps, **kw)


def _wall(x, y0=-50.0, y1=50.0, loss=6.0, name="wall"):
    return ReflectorFacet([(x, y0, 0.0), (x, y1, 0.0), (x, y1, 20.0), (x, y0, 20.0)], loss, name)


# --------------------------------------------------------------------------- scene_at

def test_scene_at_interpolates_position_and_velocity():
    m = _mover(wps=((0.0, 0.0, 0.0, 0.0), (10.0, 20.0, 0.0, 0.0)))
    s = Scene(Pose((0, -5, 2), 0.0), Pose((0, 5, 2), 0.0), movers=[m])
    (st_,) = scene_at(s, 5.0)
    assert st_.position[0] == pytest.approx(10.0)
    assert st_.velocity[0] == pytest.approx(2.0)


def test_scene_at_clamps_before_first_waypoint():
    m = _mover(wps=((0.0, 3.0, 1.0, 0.0), (10.0, 20.0, 1.0, 0.0)))
    s = Scene(Pose((0, -5, 2), 0.0), Pose((0, 5, 2), 0.0), movers=[m])
    (st_,) = scene_at(s, -1.0)
    np.testing.assert_allclose(st_.position, [3.0, 1.0, 0.0])
    np.testing.assert_allclose(st_.velocity, 0.0)


def test_case1_bus_covers_both_dominant_paths_at_8_5s():
    scene = case1_blocking_bus().scene
    paths = {p.key: p for p in enumerate_paths(scene, 8.5)}
    assert paths["los"].blocked and paths["facet:shelter"].blocked
    idle = {p.key: p for p in enumerate_paths(scene, 2.0)}
    assert not idle["los"].blocked and not idle["facet:shelter"].blocked


# --------------------------------------------------------------------------- enumerate_paths

def test_single_los_delay_51m():
    s = Scene(Pose((0, 0, 2.0), 90.0), Pose((0, 51.0, 2.0), -90.0))
    paths = enumerate_paths(s, 0.0)
    assert len(paths) == 1
    assert paths[0].kind == "LOS"
    assert paths[0].delay == pytest.approx(51.0 / C, abs=1e-15)
    assert paths[0].delay * 1e9 == pytest.approx(170.12, abs=0.01)


def test_case1_idle_two_dominant_paths():
    scene = case1_blocking_bus().scene
    paths = sorted(enumerate_paths(scene, 1.0), key=lambda p: -abs(p.amplitude))
    assert paths[0].length == pytest.approx(51.0, abs=1e-6)
    assert paths[1].length == pytest.approx(57.75, abs=1e-6)
    # weaker late arrivals (residual facets) stay well below the two main paths
    for p in paths[2:]:
        assert p.power_db <= paths[1].power_db - 9.0
        assert p.power_db <= paths[0].power_db - 15.0


def test_case1_idle_beam_pairs():
    scene = case1_blocking_bus().scene
    p = {q.key: q for q in enumerate_paths(scene, 1.0)}
    assert p["los"].doa_az == pytest.approx(-23.0)
    assert abs(p["los"].dod_az + 15.0) < 5.0 and abs(p["los"].doa_az + 25.0) < 5.0
    assert abs(p["facet:shelter"].dod_az - 35.0) < 5.0 and abs(p["facet:shelter"].doa_az + 35.0) < 5.0


def test_max_order_zero_gives_los_only():
    scene = case1_blocking_bus().scene
    paths = enumerate_paths(scene, 1.0, max_order=0)
    assert [p.kind for p in paths] == ["LOS"]


def test_bad_max_order():
    s = Scene(Pose((0, 0, 2.0), 0.0), Pose((10, 0, 2.0), 0.0))
    with pytest.raises(ValueError):
        enumerate_paths(s, 0.0, max_order=3)


def test_empty_scene_is_los_only():
    s = Scene(Pose((0, 0, 2.0), 0.0), Pose((10, 0, 2.0), 0.0))
    assert len(enumerate_paths(s, 0.0)) == 1


def test_paths_sorted_by_delay():
    s = Scene(Pose((0, 0, 2.0), 0.0), Pose((10, 0, 2.0), -180.0),
              facets=[_wall(25.0, name="a"), _wall(-30.0, name="b")])
    d = [p.delay for p in enumerate_paths(s, 0.0)]
    assert d == sorted(d) and len(d) == 3


def test_reflection_amplitude_includes_losses():
    s = Scene(Pose((0, 0, 2.0), 0.0), Pose((10, 0, 2.0), -180.0), facets=[_wall(25.0, loss=6.0)])
    (ref,) = [p for p in enumerate_paths(s, 0.0) if p.kind == "reflection"]
    L = 25.0 + 15.0
    assert ref.length == pytest.approx(L)
    expect = 20 * np.log10(WAVELENGTH / (4 * np.pi * L)) - 6.0
    assert ref.power_db == pytest.approx(expect, abs=1e-9)


def test_specular_point_outside_facet_gives_no_path():
    s = Scene(Pose((0, 0, 2.0), 0.0), Pose((10, 0, 2.0), -180.0), facets=[_wall(25.0, y0=5.0, y1=9.0)])
    assert all(p.kind == "LOS" for p in enumerate_paths(s, 0.0))


def test_second_order_between_parallel_walls():
    s = Scene(Pose((0, 0, 2.0), 90.0), Pose((0, 10, 2.0), -90.0),
              facets=[_wall(5.0, name="e"), _wall(-5.0, name="w")], max_order=2)
    paths = enumerate_paths(s, 0.0)
    doubles = [p for p in paths if ">" in p.key]
    assert len(doubles) == 2
    # unfolded: lateral 20 m, longitudinal 10 m
    for p in doubles:
        assert p.length == pytest.approx(np.hypot(20.0, 10.0))
    assert len(enumerate_paths(s, 0.0, max_order=1)) == 3


def test_los_flag_drops_direct_path():
    s = Scene(Pose((0, 0, 2.0), 0.0), Pose((10, 0, 2.0), 0.0), los=False)
    assert enumerate_paths(s, 0.0) == []


# --------------------------------------------------------------------------- blockage

def _segment_scene(movers, materials=MaterialTable()):
    return scene_at(Scene(Pose((-10, 0, 1.0), 0.0), Pose((10, 0, 1.0), -180.0), movers=movers,
                          materials=materials), 0.0)


def test_no_movers_no_loss():
    assert blockage_loss([-10, 0, 1], [10, 0, 1], [], MaterialTable()) == 0.0


def test_metal_span_24db():
    bus = _mover(size=(12.0, 2.5, 3.2), mats=((0.2, "metal"), (0.6, "glass"), (0.2, "metal")),
                 wps=((0.0, 5.5, 0.0, 0.0), (1.0, 5.6, 0.0, 0.0)))
    # heading +x, front at x=11.5: a cross-track segment at x=10.5 hits the front metal
    sts = scene_at(Scene(Pose((10.5, -10, 1.0), 90.0), Pose((10.5, 10, 1.0), -90.0), movers=[bus]), 0.0)
    assert blockage_loss([10.5, -10, 1.0], [10.5, 10, 1.0], sts, MaterialTable(metal=24.0)) == 24.0
    assert blockage_loss([5.5, -10, 1.0], [5.5, 10, 1.0], sts, MaterialTable()) == 10.0


def test_two_pedestrians_add():
    peds = [_mover(id=f"p{i}", size=(0.3, 0.5, 1.8), mats=((1.0, "body"),), wps=((0.0, x, 0.0, 0.0),))
            for i, x in enumerate((-3.0, 4.0))]
    assert blockage_loss([-10, 0, 1], [10, 0, 1], _segment_scene(peds), MaterialTable(body=10.0)) == 20.0


def test_segment_over_the_box_is_clear():
    car = _mover(size=(4.0, 2.0, 1.5))
    assert blockage_loss([-10, 0, 2.0], [10, 0, 2.0], _segment_scene([car]), MaterialTable()) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-8.0, 8.0), min_size=1, max_size=6), st.floats(-1.0, 1.0))
def test_blockage_monotone_in_movers(xs, y):
    movers = [_mover(id=f"m{i}", size=(0.5, 0.5, 2.0), wps=((0.0, x, y * 0.2, 0.0),)) for i, x in enumerate(xs)]
    prev = 0.0
    for k in range(len(movers) + 1):
        loss = blockage_loss([-10, 0, 1], [10, 0, 1], _segment_scene(movers[:k]), MaterialTable())
        assert loss >= prev
        prev = loss


# --------------------------------------------------------------------------- doppler

def test_static_doppler_zero():
    z = np.zeros(3)
    assert doppler_of_path([[0, 0, 0], [5, 5, 0], [10, 0, 0]], [z, z, z]) == 0.0


def test_radial_single_leg_13_33():
    nu = doppler_of_path([[0, 0, 0], [100, 0, 0]], [[0, 0, 0], [-13.33, 0, 0]])
    assert nu == pytest.approx(13.33 / WAVELENGTH)
    assert nu == pytest.approx(1238.5, abs=0.5)


def test_monostatic_head_on_48kph():
    v = 48 / 3.6
    nu = doppler_of_path([[0, 0, 0], [100, 0, 0], [0, 0, 0]], [[0, 0, 0], [-v, 0, 0], [0, 0, 0]])
    assert nu == pytest.approx(2 * v / WAVELENGTH)
    assert nu == pytest.approx(2 * 1238.5, rel=2e-3)


def test_receding_pedestrian():
    nu = doppler_of_path([[0, 0, 0], [20, 0, 0]], [[0, 0, 0], [1.5, 0, 0]])
    assert nu == pytest.approx(-139.3, abs=0.1)


def test_mover_reflection_doppler_sign():
    # car driving towards both terminals along the bisector
    car = _mover(id="car", size=(4.0, 2.0, 1.5), wps=((0.0, 60.0, 0.0, 0.0), (10.0, 10.0, 0.0, 0.0)))
    s = Scene(Pose((0, -5, 1.0), 0.0), Pose((0, 5, 1.0), 0.0), movers=[car], los=False)
    (p,) = enumerate_paths(s, 2.0)
    assert p.key == "mover:car" and p.doppler > 0
    assert p.doppler == pytest.approx(2 * 5.0 / WAVELENGTH, rel=0.02)


# --------------------------------------------------------------------------- properties

_coord = st.floats(-40.0, 40.0)


@settings(max_examples=100, deadline=None)
@given(_coord, _coord, st.floats(1.0, 10.0), _coord, _coord, st.floats(1.0, 10.0))
def test_los_delay_is_distance_over_c(x0, y0, z0, x1, y1, z1):
    if np.hypot(x1 - x0, y1 - y0) < 0.5:
        return
    s = Scene(Pose((x0, y0, z0), 0.0), Pose((x1, y1, z1), 0.0))
    (p,) = enumerate_paths(s, 0.0)
    d = np.linalg.norm(np.subtract((x1, y1, z1), (x0, y0, z0)))
    assert abs(p.delay - d / C) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(-20, 20), st.floats(1, 30), st.floats(1, 8), st.floats(-20, 20), st.floats(1, 30),
       st.floats(1, 8))
def test_image_method_specular(x0, y0, z0, x1, y1, z1):
    assume(np.linalg.norm(np.subtract((x0, y0, z0), (x1, y1, z1))) > 0.1)
    # wall y = 0 seen from both terminals at y > 0; wall length big enough
    wall = ReflectorFacet([(-1e3, 0, -100), (1e3, 0, -100), (1e3, 0, 100), (-1e3, 0, 100)], 0.0, "w")
    s = Scene(Pose((x0, y0, z0), 0.0), Pose((x1, y1, z1), 0.0), facets=[wall])
    (p,) = [q for q in enumerate_paths(s, 0.0) if q.kind == "reflection"]
    image = np.array([x0, -y0, z0])
    assert abs(p.delay - np.linalg.norm(image - [x1, y1, z1]) / C) < 1e-12
    # Fermat: no other wall point gives a shorter bounce
    t, r = np.array([x0, y0, z0]), np.array([x1, y1, z1])
    for qx in np.linspace(-60, 60, 13):
        for qz in np.linspace(0, 10, 5):
            q = np.array([qx, 0.0, qz])
            assert np.linalg.norm(q - t) + np.linalg.norm(r - q) >= p.length - 1e-9
    # both legs head towards the wall
    assert np.sin(np.radians(p.dod_az)) <= 1e-9 and np.sin(np.radians(p.doa_az)) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.floats(-30, 30), st.floats(-30, 30), st.floats(0.5, 15.0), st.floats(2.0, 10.0))
def test_time_reversal_negates_doppler(x_start, x_end, dur, t_frac):
    if abs(x_end - x_start) < 1.0:
        return
    t = dur * t_frac / 10.0
    wps = ((0.0, x_start, 12.0, 0.0), (dur, x_end, 12.0, 0.0))
    rev = ((0.0, x_end, 12.0, 0.0), (dur, x_start, 12.0, 0.0))
    mk = lambda w: Scene(Pose((-3, 0, 1.5), 0.0), Pose((3, 0, 1.5), 0.0),
                         movers=[_mover(id="c", size=(4.0, 60.0, 1.5), wps=w)], los=False, duration=dur)
    a = enumerate_paths(mk(wps), t)
    b = enumerate_paths(mk(rev), dur - t)
    assert len(a) == len(b)
    for p, q in zip(a, b):
        assert p.doppler == pytest.approx(-q.doppler, abs=1e-6)


def test_doppler_positive_when_path_shrinks():
    car = _mover(id="c", size=(4.0, 60.0, 1.5), wps=((0.0, 0.0, 30.0, 0.0), (10.0, 0.0, 10.0, 0.0)))
    s = Scene(Pose((-3, 0, 1.5), 0.0), Pose((3, 0, 1.5), 0.0), movers=[car], los=False)
    (p,) = enumerate_paths(s, 1.0)
    assert p.doppler > 0


def test_static_phase_depends_on_seed_only():
    s = Scene(Pose((0, 0, 2.0), 0.0), Pose((10, 0, 2.0), -180.0))
    a = enumerate_paths(s, 0.0, seed=1)[0].amplitude
    b = enumerate_paths(s, 5.0, seed=1)[0].amplitude
    c = enumerate_paths(s, 0.0, seed=2)[0].amplitude
    assert a == b and a != c and abs(a) == pytest.approx(abs(c))


# --------------------------------------------------------------------------- types

def test_colocated_terminals_rejected():
    with pytest.raises(ValueError):
        Scene(Pose((1, 2, 3.0), 0.0), Pose((1, 2, 3.0), 0.0))


def test_pose_invariants():
    with pytest.raises(ValueError):
        Pose((0, 0, 0.0), 0.0)
    with pytest.raises(ValueError):
        Pose((0, 0, 1.0), 180.0)
    assert Pose((0, 0, 1.8), -180.0).height == 1.8


def test_facet_coplanarity():
    with pytest.raises(ValueError):
        ReflectorFacet([(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0.01, 1)])
    ReflectorFacet([(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0.0005, 1)])


def test_mover_invariants():
    with pytest.raises(ValueError):
        _mover(mats=((0.5, "metal"), (0.4, "glass")))
    with pytest.raises(ValueError):
        _mover(wps=((1.0, 0, 0, 0), (1.0, 1, 0, 0)))
    with pytest.raises(ValueError):
        _mover(mats=((1.0, "wood"),))
    with pytest.raises(ValueError):
        MaterialTable(metal=-1.0)


# --------------------------------------------------------------------------- files

def test_scene_file_round_trip(tmp_path):
    scene = case3_blocked_los().scene
    f = tmp_path / "s.toml"
    dump_scene(scene, f)
    back = load_scene(f)
    assert scene_to_dict(back) == scene_to_dict(scene)
    a = enumerate_paths(scene, 6.1)
    b = enumerate_paths(back, 6.1)
    assert [p.delay for p in a] == pytest.approx([p.delay for p in b], abs=1e-15)


def test_scene_file_unknown_key_has_line():
    text = "schema = 1\n[tx]\nposition = [0, 0, 2]\nazimuth = 0\ncolour = 'red'\n"
    with pytest.raises(textconf.ConfigError) as e:
        loads_scene(text, "x.toml")
    assert e.value.line == 5 and "colour" in str(e.value) and "x.toml:5" in str(e.value)


def test_scene_file_schema_version():
    with pytest.raises(textconf.ConfigError):
        loads_scene("schema = 2\n")
    with pytest.raises(textconf.ConfigError):
        loads_scene("name = 'x'\n")


def test_scene_file_missing_pose():
    with pytest.raises(textconf.ConfigError):
        loads_scene("schema = 1\n[tx]\nposition = [0, 0, 2]\nazimuth = 0\n")


def test_scene_file_bad_values():
    text = "schema = 1\n[tx]\nposition = [0, 0, -2]\nazimuth = 0\n[rx]\nposition = [5, 0, 2]\nazimuth = 0\n"
    with pytest.raises(textconf.ConfigError):
        loads_scene(text)
