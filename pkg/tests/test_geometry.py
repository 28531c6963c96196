import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.errors import DomainError, StarvationError
from src.geometry.ball import (
    BallPoint,
    CarlesonTent,
    bergman_distance,
    carleson_tent_contains,
    involution,
    radial_projection,
)
from src.geometry.quadrature import average, build_quadrature, radial_edges, sphere_grid

radii = st.floats(min_value=0.0, max_value=0.95)
angles = st.floats(min_value=0.0, max_value=2 * math.pi)


class TestBallPoint:
    def test_rejects_boundary_and_outside(self):
        with pytest.raises(DomainError):
            BallPoint(np.array([1.0 + 0j]))
        with pytest.raises(DomainError):
            BallPoint(np.array([0.8, 0.8j]))

    def test_rejects_three_coordinates(self):
        with pytest.raises(DomainError):
            BallPoint(np.zeros(3, dtype=complex))

    def test_polar(self):
        z = BallPoint.polar(0.5, math.pi / 2, d=2)
        np.testing.assert_allclose(z.coords, [0.5j, 0.0], atol=1e-15)
        assert z.d == 2


class TestBergmanDistance:
    def test_from_origin_is_arctanh(self):
        for r in (0.1, 0.5, 0.9, 0.999):
            z = BallPoint.polar(r, 0.3)
            assert bergman_distance(BallPoint(np.zeros(1)), z) == pytest.approx(math.atanh(r), rel=1e-12)

    def test_zero_on_diagonal(self):
        z = np.array([[0.3 + 0.4j], [0.9 - 0.1j]])
        np.testing.assert_allclose(bergman_distance(z, z), 0.0, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(radii, angles, radii, angles, angles)
    def test_rotation_invariance(self, r1, a1, r2, a2, turn):
        z = r1 * np.exp(1j * a1)
        w = r2 * np.exp(1j * a2)
        rotate = np.exp(1j * turn)
        before = bergman_distance(np.array([z]), np.array([w]))
        after = bergman_distance(np.array([rotate * z]), np.array([rotate * w]))
        assert after == pytest.approx(before, rel=1e-9, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(radii, angles, radii, angles)
    def test_involution_moves_z_to_origin(self, r1, a1, r2, a2):
        z = np.array([r1 * np.exp(1j * a1)])
        w = np.array([r2 * np.exp(1j * a2)])
        np.testing.assert_allclose(involution(z, z), 0.0, atol=1e-12)
        # φ_z is an isometry that exchanges z and 0
        assert bergman_distance(involution(z, w), np.zeros(1)) == pytest.approx(
            bergman_distance(z, w), rel=1e-8, abs=1e-10)

    def test_radial_projection_at_origin(self):
        with pytest.raises(DomainError):
            radial_projection(np.zeros((1, 1)), 1.0)


class TestCarlesonTent:
    def test_origin_tent_is_whole_ball(self):
        tent = CarlesonTent(BallPoint(np.zeros(1)))
        assert tent.is_origin
        assert tent.contains(np.array([[0.99j], [0.0]])).all()

    def test_apex_lies_in_its_tent(self):
        apex = BallPoint.polar(0.8, 1.0)
        tent = CarlesonTent(apex)
        assert tent.contains(apex.coords[None, :])[0]
        assert not tent.contains(np.array([[-0.8 * np.exp(1j)]]))[0]


def _random_points(rng, n, d, max_radius=0.9):
    raw = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    return raw * (max_radius * rng.uniform(0.0, 1.0, size=(n, 1)))


class TestInvolutionIdentities:
    @pytest.mark.parametrize("d", [1, 2])
    def test_involution_is_its_own_inverse(self, d):
        rng = np.random.default_rng(42)
        z, w = _random_points(rng, 100, d), _random_points(rng, 100, d)
        np.testing.assert_allclose(involution(z, involution(z, w)), w, rtol=0.0, atol=1e-12)

    def test_involution_at_origin_is_minus_identity(self):
        w = _random_points(np.random.default_rng(3), 10, 2)
        np.testing.assert_allclose(involution(np.zeros((10, 2)), w), -w, atol=1e-15)

    @pytest.mark.parametrize("d", [1, 2])
    def test_distance_is_symmetric(self, d):
        rng = np.random.default_rng(7)
        z, w = _random_points(rng, 100, d, 0.99), _random_points(rng, 100, d, 0.99)
        np.testing.assert_allclose(bergman_distance(z, w), bergman_distance(w, z), rtol=1e-9, atol=1e-12)


class TestTentMembership:
    def test_truth_table_on_the_disc(self):
        tent = CarlesonTent(BallPoint.polar(0.5))
        points = np.array([[0.9], [-0.9], [0.5], [0.0], [0.7 + 0.2j]])
        np.testing.assert_array_equal(tent.contains(points), [True, False, True, False, True])
        assert carleson_tent_contains(tent, BallPoint(np.array([0.9])))
        assert not carleson_tent_contains(tent, BallPoint(np.array([-0.9])))

    @pytest.mark.parametrize("d", [1, 2])
    def test_tents_nest_along_a_ray(self, d):
        points = build_quadrature(d, "monte-carlo", size=20_000, seed=5).nodes
        outer = CarlesonTent(BallPoint.polar(0.4, 0.8, d))
        inner_tent = CarlesonTent(BallPoint.polar(0.8, 0.8, d))
        inside_inner = inner_tent.contains(points)
        assert inside_inner.any()
        assert np.all(outer.contains(points)[inside_inner])
        assert np.count_nonzero(outer.contains(points)) > np.count_nonzero(inside_inner)


class TestQuadrature:
    @pytest.mark.parametrize("d", [1, 2])
    @pytest.mark.parametrize("scheme", ["polar-grid", "monte-carlo"])
    def test_total_mass_is_one(self, d, scheme):
        rule = build_quadrature(d, scheme, size=16, seed=3)
        assert rule.masses.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(rule.radii < 1.0)

    def test_polar_grid_integrates_radial_moments(self):
        # ∫ |z|^2 dν = 1/2 on the disc and 2/3 on the ball of ℂ²
        for d, expected in ((1, 0.5), (2, 2.0 / 3.0)):
            rule = build_quadrature(d, "polar-grid", size=32, angular=8, grading=1.0)
            value = rule.integrate(lambda z: np.sum(np.abs(z) ** 2, axis=1)).value
            assert value == pytest.approx(expected, rel=1e-12)

    def test_monte_carlo_is_seeded(self):
        a = build_quadrature(1, "monte-carlo", size=100, seed=7)
        b = build_quadrature(1, "monte-carlo", size=100, seed=7)
        np.testing.assert_array_equal(a.nodes, b.nodes)

    def test_empty_region(self):
        rule = build_quadrature(1, size=8)
        assert rule.integrate(1.0, np.zeros(rule.size, dtype=bool)).empty
        with pytest.raises(StarvationError):
            average(1.0, np.zeros(rule.size, dtype=bool), rule)

    def test_radial_edges_grading(self):
        edges = radial_edges(5, 0.5)
        assert edges[0] == 0.0 and edges[-1] == 1.0
        widths = np.diff(edges)
        np.testing.assert_allclose(widths[1:] / widths[:-1], 0.5)
        with pytest.raises(DomainError):
            radial_edges(5, 1.5)

    def test_sphere_grid_is_unit(self):
        u = sphere_grid(2, 8)
        np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1.0)
