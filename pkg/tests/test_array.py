import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddcs.array import (
    BeamGrid, BeamPattern, beam_gain, enumerate_beam_pairs, gain_matrix, pair_index, power_gain,
)

PAT = BeamPattern()
G0 = 10 ** (19.5 / 10)


def _db(x):
    return 10 * np.log10(x)


def test_boresight_gain():
    assert power_gain(PAT, 0, 0, 0, 0) == pytest.approx(G0)
    assert beam_gain(PAT, 10, 0, 10, 0) == pytest.approx(np.sqrt(G0))


def test_half_beamwidth_is_3db():
    assert _db(power_gain(PAT, 0, 0, 6.0, 0)) == pytest.approx(19.5 - 3.0103, abs=1e-3)
    assert _db(power_gain(PAT, 0, 0, 0, 11.0)) == pytest.approx(19.5 - 3.0103, abs=1e-3)


def test_floor_far_off():
    assert _db(power_gain(PAT, 0, 0, 90.0, 0)) == pytest.approx(19.5 - 20.0)
    assert _db(power_gain(PAT, 45, 0, -170.0, 0)) == pytest.approx(19.5 - 20.0)


def test_wrapped_difference():
    # 179 vs -179 deg are 2 deg apart
    assert power_gain(PAT, 179.0, 0, -179.0, 0) == pytest.approx(power_gain(PAT, 0, 0, 2.0, 0))


@settings(max_examples=200, deadline=None)
@given(st.floats(-45, 45), st.floats(-180, 179.99), st.floats(-60, 60))
def test_gain_bounds_and_symmetry(steer, d_az, d_el):
    g = power_gain(PAT, steer, 0.0, steer + d_az, d_el)
    assert G0 * 10 ** (-2.0) * (1 - 1e-12) <= g <= G0 * (1 + 1e-12)
    assert g == pytest.approx(power_gain(PAT, steer, 0.0, steer - d_az, -d_el), rel=1e-12)
    assert g <= power_gain(PAT, steer, 0.0, steer, 0.0)


def test_default_grid():
    g = BeamGrid()
    assert len(g) == 10
    assert g.azimuths == tuple(float(a) for a in range(-45, 46, 10))
    assert g.elevations == (0.0,)


def test_grid_rejects_wide_steering():
    with pytest.raises(ValueError):
        BeamGrid((-50.0, 0.0))
    with pytest.raises(ValueError):
        BeamGrid(())


def test_pattern_invariants():
    with pytest.raises(ValueError):
        BeamPattern(beamwidth_az=0)
    with pytest.raises(ValueError):
        BeamPattern(sidelobe_db=-2.0)


def test_pairs_default():
    pairs = enumerate_beam_pairs(BeamGrid(), BeamGrid())
    assert len(pairs) == 100
    assert pairs[0] == ((-45.0, 0.0), (-45.0, 0.0))
    assert pairs[-1] == ((45.0, 0.0), (45.0, 0.0))
    assert pairs[1] == ((-45.0, 0.0), (-35.0, 0.0))  # TX-major


def test_pairs_single():
    assert len(enumerate_beam_pairs(BeamGrid((0.0,)), BeamGrid((5.0,)))) == 1


def test_case1_los_pair_index():
    assert pair_index(BeamGrid(), BeamGrid(), -15, -25) == 32
    assert pair_index(BeamGrid(), BeamGrid(), (35.0, 0.0), (-35.0, 0.0)) == 81


def test_pair_index_bijection():
    tx, rx = BeamGrid(), BeamGrid((-40.0, 0.0, 40.0))
    pairs = enumerate_beam_pairs(tx, rx)
    assert [pair_index(tx, rx, t, r) for t, r in pairs] == list(range(len(pairs)))


def test_gain_matrix_shape_and_values():
    m = gain_matrix(PAT, BeamGrid(), [-45.0, 3.0], [0.0, 0.0])
    assert m.shape == (10, 2)
    assert m[0, 0] == pytest.approx(np.sqrt(G0))
    assert m[4, 1] == pytest.approx(beam_gain(PAT, -5, 0, 3.0, 0.0))
