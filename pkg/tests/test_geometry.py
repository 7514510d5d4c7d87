import numpy as np
import pytest

from seld_toolkit.core.geometry import (
    AzEl, DirectionVector, angular_distance, angular_distance_matrix, azel_to_unit,
    azel_to_unit_array, normalize, rotate_about_z, slerp, unit_to_azel, unit_to_azel_array,
)
from seld_toolkit.utils.exceptions import (
    InvariantError, RangeError, UndefinedDistanceError, ValidationError,
)


@pytest.mark.parametrize("az, el, expected", [
    (0, 0, (1, 0, 0)),
    (90, 0, (0, 1, 0)),
    (180, 0, (-1, 0, 0)),
    (0, 90, (0, 0, 1)),
    (-90, 0, (0, -1, 0)),
])
def test_azel_to_unit_axes(az, el, expected):
    assert np.allclose(azel_to_unit(AzEl(az, el)).as_array(), expected, atol=1e-12)


def test_azel_45_45():
    d = azel_to_unit(AzEl(45, 45))
    assert np.allclose(d.as_array(), (0.5, 0.5, 0.70711), atol=1e-5)
    assert d.is_normalized()

    back = unit_to_azel(d)
    assert back.azimuth == pytest.approx(45.0, abs=1e-9)
    assert back.elevation == pytest.approx(45.0, abs=1e-9)


def test_azimuth_minus_180_rejected():
    with pytest.raises(RangeError):
        AzEl(-180, 0)
    with pytest.raises(RangeError):
        AzEl(0, 90.5)


def test_unit_to_azel_wraps_to_180():
    assert unit_to_azel((-1.0, -0.0, 0.0)).azimuth == 180.0
    assert unit_to_azel((-1.0, 0.0, 0.0)).azimuth == 180.0


def test_pole_has_zero_azimuth():
    up = unit_to_azel((0.0, 0.0, 1.0))
    assert up.azimuth == 0.0
    assert up.elevation == pytest.approx(90.0)


def test_unit_to_azel_requires_unit_norm():
    with pytest.raises(InvariantError):
        unit_to_azel((0.5, 0.5, 0.5))


def test_angular_distance():
    x, y = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)
    assert angular_distance(x, y) == pytest.approx(90.0)
    assert angular_distance(x, (-1.0, 0.0, 0.0)) == pytest.approx(180.0)
    assert angular_distance(x, x) == 0.0
    assert angular_distance(x, y) == angular_distance(y, x)


def test_angular_distance_clamps_rounding():
    d = azel_to_unit(AzEl(30, 10)).as_array()
    assert angular_distance(d * (1 + 1e-15), d) == pytest.approx(0.0, abs=1e-5)


def test_angular_distance_to_inactive_is_undefined():
    with pytest.raises(UndefinedDistanceError):
        angular_distance(DirectionVector.inactive(), (1.0, 0.0, 0.0))


def test_vectorised_conversions_match_scalar():
    az = np.array([10.0, -120.0, 180.0])
    el = np.array([0.0, 30.0, -45.0])
    vectors = azel_to_unit_array(az, el)
    assert vectors.shape == (3, 3)
    back_az, back_el = unit_to_azel_array(vectors)
    assert np.allclose(back_az, az)
    assert np.allclose(back_el, el)

    with pytest.raises(RangeError):
        azel_to_unit_array([-180.0], [0.0])


def test_distance_matrix():
    a = azel_to_unit_array([0.0, 90.0], [0.0, 0.0])
    b = azel_to_unit_array([0.0], [90.0])
    assert np.allclose(angular_distance_matrix(a, b), [[90.0], [90.0]])


def test_normalize_keeps_zero_vectors():
    out = normalize(np.array([[3.0, 0.0, 4.0], [0.0, 0.0, 0.0]]))
    assert np.allclose(out, [[0.6, 0.0, 0.8], [0.0, 0.0, 0.0]])


def test_slerp_midpoint_and_ends():
    x = np.array([1.0, 0.0, 0.0])
    y = np.array([0.0, 1.0, 0.0])
    assert np.allclose(slerp(x, y, 0.5), [np.sqrt(0.5), np.sqrt(0.5), 0.0])
    assert np.allclose(slerp(x, y, 0.0), x)
    assert np.allclose(slerp(x, y, 1.0), y)
    assert np.allclose(slerp(x, x, 0.3), x)

    with pytest.raises(ValidationError):
        slerp(x, -x, 0.5)


def test_rotate_about_z():
    out = rotate_about_z(np.array([1.0, 0.0, 0.0]), 90.0)
    assert np.allclose(out, [0.0, 1.0, 0.0])


def test_random_round_trip(rng):
    vectors = normalize(rng.standard_normal((10000, 3)))
    az, el = unit_to_azel_array(vectors)
    assert np.all((az > -180.0) & (az <= 180.0))
    assert np.all(np.abs(el) <= 90.0)
    assert np.allclose(azel_to_unit_array(az, el), vectors, atol=1e-9)

    az = rng.uniform(-179.999, 180.0, 10000)
    el = rng.uniform(-89.0, 89.0, 10000)
    back_az, back_el = unit_to_azel_array(azel_to_unit_array(az, el))
    assert np.allclose(back_az, az, atol=1e-9)
    assert np.allclose(back_el, el, atol=1e-9)


def test_rotation_preserves_distances(rng):
    a = normalize(rng.standard_normal((500, 3)))
    b = normalize(rng.standard_normal((500, 3)))
    before = np.diagonal(angular_distance_matrix(a, b))
    for angle in (-135.0, 17.5, 90.0):
        after = np.diagonal(angular_distance_matrix(rotate_about_z(a, angle), rotate_about_z(b, angle)))
        assert np.allclose(after, before, atol=1e-6)


def test_rotation_shifts_azimuth(rng):
    az = rng.uniform(-90.0, 90.0, 200)
    el = rng.uniform(-80.0, 80.0, 200)
    rotated_az, rotated_el = unit_to_azel_array(rotate_about_z(azel_to_unit_array(az, el), 45.0))
    assert np.allclose(rotated_az, az + 45.0, atol=1e-9)
    assert np.allclose(rotated_el, el, atol=1e-9)


def test_triangle_inequality(rng):
    a, b, c = (normalize(rng.standard_normal((2000, 3))) for _ in range(3))
    ab = np.diagonal(angular_distance_matrix(a, b))
    bc = np.diagonal(angular_distance_matrix(b, c))
    ac = np.diagonal(angular_distance_matrix(a, c))
    assert np.all(ac <= ab + bc + 1e-6)
    assert np.all((ab >= 0.0) & (ab <= 180.0))
