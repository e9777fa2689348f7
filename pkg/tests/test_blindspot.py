import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radarlabel.blindspot import BlindspotCone, combine_optical, in_blindspot
from radarlabel.core import CartesianPoint

CONE = BlindspotCone(x_l_m=0.0, z_l_m=2.0, alpha_rad=math.pi / 4)


def test_point_on_cone_axis_is_inside():
    assert in_blindspot(CartesianPoint(0, 0, 1), CONE) is True


def test_point_outside_radius_is_outside():
    assert in_blindspot(CartesianPoint(1.5, 0, 1), CONE) is False


def test_below_ground_is_outside():
    assert in_blindspot(CartesianPoint(0, 0, -0.1), CONE) is False


def test_above_sensor_is_outside():
    assert in_blindspot(CartesianPoint(0, 0, 2.1), CONE) is False


def test_boundary_is_inclusive():
    # radius exactly (z_l - z)/tan(alpha) and z exactly on both interval ends
    assert in_blindspot(CartesianPoint(1.0, 0, 1.0), CONE) is True
    assert in_blindspot(CartesianPoint(0.0, 0, 0.0), CONE) is True
    assert in_blindspot(CartesianPoint(0.0, 0, 2.0), CONE) is True


def test_array_form_matches_scalar():
    pts = np.array([[0, 0, 1.0], [1.5, 0, 1.0], [0, 0, -0.1]])
    assert in_blindspot(pts, CONE).tolist() == [True, False, False]


@settings(max_examples=200, deadline=None)
@given(
    angle=st.floats(0, 2 * math.pi),
    radius=st.floats(0, 3),
    z=st.floats(-0.5, 2.5),
)
def test_rotationally_symmetric_about_axis(angle, radius, z):
    cone = BlindspotCone(x_l_m=1.2, z_l_m=2.0, alpha_rad=0.9)
    p1 = CartesianPoint(1.2 + radius, 0.0, z)
    p2 = CartesianPoint(1.2 + radius * math.cos(angle), radius * math.sin(angle), z)
    assert in_blindspot(p1, cone) == in_blindspot(p2, cone)


INSIDE = CartesianPoint(0, 0, 1)
OUTSIDE = CartesianPoint(5, 0, 1)


@pytest.mark.parametrize(
    "point,w_lm,w_cm,expected",
    [
        (INSIDE, 0.2, 0.7, 0.7),  # in cone: camera wins
        (OUTSIDE, 0.2, 0.7, 0.2),  # out of cone: lidar wins
        (OUTSIDE, None, 0.7, 0.7),  # lidar unavailable: fall back to camera
        (INSIDE, 0.2, None, 0.2),  # camera unavailable: fall back to lidar
        (INSIDE, None, None, None),
        (OUTSIDE, None, None, None),
        (INSIDE, None, 0.4, 0.4),
        (OUTSIDE, 0.4, None, 0.4),
    ],
)
def test_combination_covers_every_case(point, w_lm, w_cm, expected):
    assert combine_optical(w_lm, w_cm, point, CONE) == expected


def test_cone_validation():
    with pytest.raises(ValueError):
        BlindspotCone(x_l_m=0, z_l_m=0.0, alpha_rad=0.5)
    with pytest.raises(ValueError):
        BlindspotCone(x_l_m=0, z_l_m=1.0, alpha_rad=math.pi / 2)
