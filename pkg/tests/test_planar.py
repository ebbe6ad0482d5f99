import numpy as np
import pytest

from lagsweep import planar as pl
from lagsweep.errors import DomainError, InputError
from lagsweep.symplectic import fd_jacobian
from lagsweep.verify import wobbly_curve

CIRCLE = pl.PlaneCurve.circle()
ELLIPSE = pl.PlaneCurve.ellipse(2.0, 1.0)


def test_circle_step_by_hand():
    b, t = pl.planar_outer_step(CIRCLE, [2.0, 0.0], "forward")
    c, s = pl.planar_outer_step(CIRCLE, [2.0, 0.0], "backward")
    got = sorted([tuple(np.round(b, 12)), tuple(np.round(c, 12))])
    assert got == sorted([(-1.0, round(np.sqrt(3), 12)), (-1.0, -round(np.sqrt(3), 12))])
    for point, param in ((b, t), (c, s)):
        foot = CIRCLE.point(param)
        assert abs(np.linalg.norm(point - foot) - np.linalg.norm(np.array([2.0, 0.0]) - foot)) <= 1e-10


@pytest.mark.parametrize("curve", [ELLIPSE, wobbly_curve()], ids=["ellipse", "trig"])
def test_round_trip_and_area(curve, rng):
    for _ in range(10):
        ang = rng.uniform(0, 2 * np.pi)
        a = curve.point(ang) + rng.uniform(0.2, 2.0) * np.array([np.cos(ang), np.sin(ang)])
        b, _ = pl.planar_outer_step(curve, a, "forward")
        back, _ = pl.planar_outer_step(curve, b, "backward")
        assert np.max(np.abs(back - a)) <= 1e-8
        jac = fd_jacobian(lambda v: pl.planar_outer_step(curve, v)[0], a)
        assert abs(np.linalg.det(jac) - 1.0) <= 1e-5


def test_ellipse_example_round_trip():
    b, _ = pl.planar_outer_step(ELLIPSE, [4.0, 0.0])
    a, _ = pl.planar_outer_step(ELLIPSE, b, "backward")
    np.testing.assert_allclose(a, [4.0, 0.0], atol=1e-8)


def test_inside_points_are_refused():
    with pytest.raises(DomainError):
        pl.planar_outer_step(CIRCLE, [0.2, 0.1])


def test_curve_json_and_validation():
    c = pl.PlaneCurve.from_json({"kind": "ellipse", "a": 2, "b": 1})
    assert c == ELLIPSE
    assert pl.PlaneCurve.from_json(wobbly_curve().to_json()) == wobbly_curve()
    with pytest.raises(InputError):
        pl.PlaneCurve.from_json({"kind": "ellipse", "a": 1, "b": 1, "tilt": 3})
    with pytest.raises(InputError):
        pl.PlaneCurve.ellipse(-1.0, 1.0)


def test_circle_three_orbit_is_equilateral():
    orbits = pl.find_planar_periodic(CIRCLE, 3, seed=0, starts=16)
    assert orbits
    o = orbits[0]
    np.testing.assert_allclose(np.linalg.norm(o.points, axis=1), 2.0, atol=1e-8)
    gaps = np.sort(np.mod(np.diff(np.sort(o.params), append=np.sort(o.params)[0] + 2 * np.pi), 2 * np.pi))
    np.testing.assert_allclose(gaps, 2 * np.pi / 3, atol=1e-6)


def test_perturbed_circle_has_two_three_orbits():
    orbits = pl.find_planar_periodic(wobbly_curve(), 3, seed=0, starts=32)
    assert len(orbits) >= 2
    assert all(o.step_defect <= 1e-8 for o in orbits)


def test_ellipse_five_orbit():
    orbits = pl.find_planar_periodic(ELLIPSE, 5, seed=0, starts=16)
    assert orbits and pl.planar_step_defect(ELLIPSE, orbits[0].points)[0] <= 1e-6


def test_even_period_refused():
    with pytest.raises(InputError):
        pl.find_planar_periodic(CIRCLE, 4)


def test_tractrix():
    full = pl.tractrix_area(1e-3)
    assert abs(full - np.pi / 2) <= 1e-4
    assert abs(pl.tractrix_area(5e-4) - full) <= 1e-6
    assert abs(pl.tractrix_area(1e-3, half=True) - np.pi / 4) <= 1e-4


def test_mamikon_small_runs():
    assert pl.mamikon_area_check(CIRCLE, pl.SweepRegion(0.0, 0.0), 1000) == (0.0, 0.0)
    sweep, cluster = pl.mamikon_area_check(CIRCLE, pl.SweepRegion(), 200_000, seed=1)
    assert abs(sweep - cluster) / cluster <= 0.03
    quarter = pl.SweepRegion(0.0, 1.0, 0.0, np.pi / 2)
    sweep, cluster = pl.mamikon_area_check(ELLIPSE, quarter, 200_000, seed=2)
    assert abs(sweep - cluster) / cluster <= 0.03
    assert abs(cluster - np.pi / 4) / (np.pi / 4) <= 0.03


def test_mamikon_is_seed_deterministic():
    assert pl.mamikon_area_check(CIRCLE, pl.SweepRegion(), 20_000, seed=5) == pl.mamikon_area_check(
        CIRCLE, pl.SweepRegion(), 20_000, seed=5
    )
