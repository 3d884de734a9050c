import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrmimo.antenna import (
    ArrayConfig,
    BeamConfId,
    BeamId,
    ElementPattern,
    array_gain,
    build_subarrays,
    element_field,
    element_gain_db,
    steering_weights,
)

ISO = ElementPattern.ISOTROPIC
DIR = ElementPattern.DIRECTIONAL_3GPP
BORESIGHT = BeamId(0.0, 90.0)

directions = st.builds(
    BeamId.from_angles,
    st.floats(-179.0, 179.0, allow_nan=False),
    st.floats(1.0, 179.0, allow_nan=False),
)


def coherent_sum_gain_db(rows, cols, dv, dh, steer_to, look_at):
    """Independent array-factor oracle: explicit per-element phase sum.

    Elements sit at (0, col*dh, row*dv) wavelengths; no rotation.
    """

    def unit(b):
        t, p = math.radians(b.elevation_deg), math.radians(b.azimuth_deg)
        return (math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t))

    us, ul = unit(steer_to), unit(look_at)
    total = 0j
    k = rows * cols
    for c in range(cols):
        for r in range(rows):
            y, z = c * dh, r * dv
            phase_s = 2 * math.pi * (y * us[1] + z * us[2])
            phase_l = 2 * math.pi * (y * ul[1] + z * ul[2])
            total += cmath.exp(-1j * phase_s) / math.sqrt(k) * cmath.exp(1j * phase_l)
    return 20 * math.log10(abs(total))


# -- build_subarrays ---------------------------------------------------------


def test_two_by_four_dual_pol_gives_two_partitions_of_eight():
    parts = build_subarrays(ArrayConfig(rows=2, cols=4, polarizations=2, pol_slant_angles=(45, -45)))
    assert [p.num_elements for p in parts] == [8, 8]
    assert [p.pol_slant_deg for p in parts] == [45.0, -45.0]
    assert [p.partition_index for p in parts] == [0, 1]


def test_single_element_dual_pol_ue_array():
    parts = build_subarrays(ArrayConfig(rows=1, cols=1, polarizations=2))
    assert len(parts) == 2
    assert all(p.num_elements == 1 for p in parts)


def test_siso_array_is_vertically_polarized():
    (part,) = build_subarrays(ArrayConfig(rows=1, cols=1, polarizations=1))
    assert part.num_elements == 1
    assert part.pol_slant_deg == 0.0


def test_initial_weights_are_uniform():
    for p in build_subarrays(ArrayConfig(rows=2, cols=2)):
        np.testing.assert_allclose(p.weights, np.full(4, 0.5))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(rows=0),
        dict(cols=0),
        dict(polarizations=3),
        dict(dv=0.0),
        dict(dh=-0.5),
        dict(polarizations=2, pol_slant_angles=(45,)),
        dict(polarizations=1, pol_slant_angles=(0, 90)),
    ],
)
def test_invalid_array_config_rejected(kwargs):
    with pytest.raises(ValueError):
        ArrayConfig(**kwargs)


def test_slants_are_configurable_as_vertical_horizontal():
    parts = build_subarrays(ArrayConfig(polarizations=2, pol_slant_angles=(0, 90)))
    assert [p.pol_slant_deg for p in parts] == [0.0, 90.0]


@given(st.integers(1, 4), st.integers(1, 4), st.sampled_from([1, 2]))
def test_partition_count_and_total_elements(rows, cols, pols):
    parts = build_subarrays(ArrayConfig(rows=rows, cols=cols, polarizations=pols))
    assert len(parts) == pols
    assert sum(p.num_elements for p in parts) == rows * cols * pols


@given(st.integers(1, 3), st.integers(1, 3), st.floats(-90, 90), st.floats(-90, 90))
def test_swapping_slants_permutes_partitions(rows, cols, a, b):
    p1 = build_subarrays(ArrayConfig(rows=rows, cols=cols, pol_slant_angles=(a, b)))
    p2 = build_subarrays(ArrayConfig(rows=rows, cols=cols, pol_slant_angles=(b, a)))
    assert (p1[0].pol_slant_deg, p1[1].pol_slant_deg) == (p2[1].pol_slant_deg, p2[0].pol_slant_deg)
    for x, y in zip(p1, reversed(p2)):
        assert x.num_elements == y.num_elements
        np.testing.assert_array_equal(x.weights, y.weights)


# -- element_field -----------------------------------------------------------


def test_field_boresight_vertical_isotropic():
    assert element_field(90, 0, 0, ISO) == pytest.approx((1.0, 0.0), abs=1e-12)


def test_field_boresight_slant45_isotropic():
    h = math.sqrt(2) / 2
    assert element_field(90, 0, 45, ISO) == pytest.approx((h, h), abs=1e-12)


def test_field_boresight_slant45_directional():
    # 8 dBi peak gain split evenly over the two components
    amp = math.sqrt(10**0.8) * math.sqrt(2) / 2
    assert element_field(90, 0, 45, DIR) == pytest.approx((amp, amp), abs=1e-12)


def test_directional_pattern_frozen_values():
    # A = 8 - min(12((theta-90)/65)^2 + 12(phi/65)^2, 30)
    assert element_gain_db(90, 0, DIR) == pytest.approx(8.0)
    assert element_gain_db(90, 32.5, DIR) == pytest.approx(5.0)
    assert element_gain_db(122.5, 0, DIR) == pytest.approx(5.0)
    assert element_gain_db(90, 180, DIR) == pytest.approx(-22.0)


@given(
    st.floats(0, 180),
    st.floats(-180, 180),
    st.floats(-90, 90),
    st.sampled_from([ISO, DIR]),
)
def test_polarization_decomposition_conserves_power(theta, phi, slant, pattern):
    ft, fp = element_field(theta, phi, slant, pattern)
    a = 10 ** (element_gain_db(theta, phi, pattern) / 10)
    assert abs(ft**2 + fp**2 - a) <= 1e-9


# -- steering_weights / array_gain -------------------------------------------


@given(directions)
def test_single_element_weight_is_one(d):
    cfg = ArrayConfig(rows=1, cols=1)
    (p, _) = build_subarrays(cfg)
    np.testing.assert_allclose(steering_weights(p, d, cfg), [1.0])


def test_broadside_weights_are_equal_and_in_phase():
    cfg = ArrayConfig(rows=2, cols=4)
    p = build_subarrays(cfg)[0]
    w = steering_weights(p, BORESIGHT, cfg)
    np.testing.assert_allclose(w, np.full(8, 1 / math.sqrt(8)), atol=1e-12)


@given(directions)
def test_eight_element_steered_gain(d):
    cfg = ArrayConfig(rows=2, cols=4)
    p = build_subarrays(cfg)[0]
    w = steering_weights(p, d, cfg)
    assert array_gain(p, w, d, cfg) == pytest.approx(10 * math.log10(8), abs=1e-9)
    assert array_gain(p, w, d, cfg) == pytest.approx(9.03, abs=0.005)


@given(directions, directions)
@settings(max_examples=50)
def test_array_factor_matches_coherent_sum_oracle(steer_to, look_at):
    cfg = ArrayConfig(rows=2, cols=4, dv=0.5, dh=0.7)
    p = build_subarrays(cfg)[0]
    w = steering_weights(p, steer_to, cfg)
    expected = coherent_sum_gain_db(2, 4, 0.5, 0.7, steer_to, look_at)
    got = array_gain(p, w, look_at, cfg)
    assert got == pytest.approx(max(expected, -300.0), abs=1e-6)


def test_single_isotropic_element_gain_is_zero_everywhere():
    cfg = ArrayConfig(rows=1, cols=1)
    p = build_subarrays(cfg)[0]
    for az in range(-180, 180, 15):
        for el in range(0, 181, 15):
            assert array_gain(p, p.weights, BeamId(az, el), cfg) == pytest.approx(0.0, abs=1e-12)


def test_four_element_directional_boresight_gain():
    cfg = ArrayConfig(rows=2, cols=2, element_pattern=DIR)
    p = build_subarrays(cfg)[0]
    w = steering_weights(p, BORESIGHT, cfg)
    assert array_gain(p, w, BORESIGHT, cfg) == pytest.approx(10 * math.log10(4) + 8.0, abs=1e-9)
    assert array_gain(p, w, BORESIGHT, cfg) == pytest.approx(14.02, abs=0.005)


@given(directions)
def test_steering_weights_unit_norm(d):
    cfg = ArrayConfig(rows=3, cols=2, bearing_deg=30, downtilt_deg=10)
    for p in build_subarrays(cfg):
        assert abs(np.linalg.norm(steering_weights(p, d, cfg)) - 1.0) <= 1e-9


def test_steered_direction_is_maximum_on_one_degree_grid():
    cfg = ArrayConfig(rows=2, cols=2)
    p = build_subarrays(cfg)[0]
    d = BeamId(20.0, 110.0)
    w = steering_weights(p, d, cfg)
    peak = array_gain(p, w, d, cfg)
    worst = max(
        array_gain(p, w, BeamId(az, el), cfg) for az in range(-180, 180) for el in range(0, 181)
    )
    assert worst <= peak + 1e-9


def test_rotation_moves_boresight():
    cfg = ArrayConfig(rows=1, cols=1, element_pattern=DIR, bearing_deg=180.0)
    p = build_subarrays(cfg)[0]
    assert array_gain(p, p.weights, BeamId(-180.0, 90.0), cfg) == pytest.approx(8.0)
    assert array_gain(p, p.weights, BeamId(0.0, 90.0), cfg) == pytest.approx(-22.0)


# -- BeamId / BeamConfId -----------------------------------------------------


@given(st.floats(-1000, 1000), st.floats(-50, 250))
def test_beam_id_ranges(az, el):
    b = BeamId.from_angles(az, el)
    assert -180.0 <= b.azimuth_deg < 180.0
    assert 0.0 <= b.elevation_deg <= 180.0


def test_beam_id_quantization():
    assert BeamId.from_angles(10.004, 90.006) == BeamId(10.0, 90.01)
    assert BeamId.from_angles(180.0, 90) == BeamId(-180.0, 90.0)


def test_beam_conf_equality_is_element_wise():
    b1, b2 = BeamId(0, 90), BeamId(10, 90)
    assert BeamConfId((b1, b2)) == BeamConfId((b1, b2))
    assert BeamConfId((b1, None)) == BeamConfId((b1,))
    assert BeamConfId((b1, b2)) != BeamConfId((b1, None))


def test_beam_conf_needs_a_beam():
    with pytest.raises(ValueError):
        BeamConfId((None, None))
    with pytest.raises(ValueError):
        BeamConfId(())
