import math

import numpy as np
import pytest

from flrw_dirac.spacetime import Cone, Cosmology, cone_radius


def test_scale_examples():
    assert Cosmology(2 / 3, 1.0).scale(8.0) == pytest.approx(4.0)
    assert Cosmology(0.0, 1.0).scale(5.0) == pytest.approx(1.0)
    assert Cosmology(0.5, 2.0).scale(4.0) == pytest.approx(4.0)


def test_phi_examples():
    assert Cosmology(2 / 3).phi(8.0) == pytest.approx(6.0)
    assert Cosmology(1.0).phi(math.e) == pytest.approx(1.0)
    assert Cosmology(2.0).phi(2.0) == pytest.approx(-0.5)


def test_travel_distance_examples():
    assert Cosmology(0.0, 1.0).travel_distance(3.0) == pytest.approx(2.0)
    assert Cosmology(1.0, 1.0).travel_distance(math.e**2) == pytest.approx(2.0)
    assert Cosmology(2 / 3, 1.0).travel_distance(8.0) == pytest.approx(3.0)


def test_domain_errors():
    c = Cosmology(0.5)
    with pytest.raises(ValueError):
        c.scale(0.0)
    with pytest.raises(ValueError):
        c.phi(-1.0)
    with pytest.raises(ValueError):
        c.travel_distance(0.5)
    with pytest.raises(ValueError):
        Cosmology(0.5, a0=-1.0)
    with pytest.raises(ValueError):
        Cosmology(math.nan)


def test_cone_radius_examples():
    c = Cosmology(2 / 3, 1.0)
    backward = Cone((0.0, 0.0, 0.0), 8.0, "backward")
    assert cone_radius(backward, c, 1.0) == pytest.approx(3.0)
    forward = Cone((0.0, 0.0, 0.0), 1.0, "forward")
    assert cone_radius(forward, Cosmology(0.0, 1.0), 4.0) == pytest.approx(3.0)
    assert cone_radius(forward, c, 1.0) == pytest.approx(0.0)


def test_cone_wrong_side_rejected():
    c = Cosmology(0.5)
    with pytest.raises(ValueError):
        cone_radius(Cone((0, 0, 0), 2.0, "forward"), c, 1.0)
    with pytest.raises(ValueError):
        cone_radius(Cone((0, 0, 0), 2.0, "backward"), c, 3.0)
    with pytest.raises(ValueError):
        Cone((0, 0, 0), -1.0, "forward")
    with pytest.raises(ValueError):
        Cone((0, 0, 0), 1.0, "sideways")


@pytest.mark.parametrize("ell", [-0.5, 0.0, 0.5, 1.0, 2.0])
def test_travel_distance_equals_unit_apex_cone_radius(ell):
    c = Cosmology(ell, 1.0)
    cone = Cone((0.0, 0.0, 0.0), 1.0, "forward")
    for t in (1.0, 1.7, 3.0, 9.0):
        assert c.travel_distance(t) == pytest.approx(cone_radius(cone, c, t))


@pytest.mark.parametrize("ell", [-1.0, 0.0, 0.5, 1.0, 1.5, 3.0])
def test_phi_strictly_increasing(ell):
    c = Cosmology(ell)
    t = np.linspace(0.2, 30.0, 400)
    assert np.all(np.diff(c.phi(t)) > 0)


def test_travel_distance_asymptotics():
    # expanding slower than light cones: unbounded travel distance
    assert Cosmology(0.5, 1.0).travel_distance(1e6) > 1e2
    # accelerating expansion: travel distance converges to 1/(a0 (ell-1))
    c = Cosmology(2.0, 3.0)
    assert c.travel_distance(1e6) == pytest.approx(
        1.0 / (3.0 * (2.0 - 1.0)), rel=1e-5
    )


def test_a0_scaling_of_cones():
    c = Cosmology(0.0, a0=2.0)
    cone = Cone((0.0, 0.0, 0.0), 1.0, "forward")
    assert cone_radius(cone, c, 3.0) == pytest.approx(1.0)
    assert c.travel_distance(3.0) == pytest.approx(1.0)
