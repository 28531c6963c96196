import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from config import settings as lab_settings
from src.errors import ConvergenceError, DomainError, StarvationError
from src.geometry.quadrature import build_quadrature
from src.model.dyadic import DyadicGrid
from src.operators.kernels import KernelKind, bergman_kernel, bergman_projection, kernel_matrix, maximal_projection
from src.operators.norms import (
    dense_norm,
    estimate_operator_norm,
    modal_projection_norm,
    power_iteration,
    weighted_matrix,
)
from src.operators.sparse import SparseCollection, build_test_bank, row_max, weighted_maximal_norm
from src.operators.stopping import audit_stopping_family, stopping_family
from src.tree.bergman_tree import build_tree
from src.tree.tents import TentSystem
from src.weights.weight import Weight
from tests.conftest import SMALL_PARAMS

seeds = st.integers(min_value=0, max_value=10_000)


class TestSparseCollection:
    def test_empty_set_is_starved(self):
        membership = sparse.csr_matrix(np.array([[1.0, 0.0], [1.0, 0.0]]))
        with pytest.raises(StarvationError):
            SparseCollection(membership, np.full(2, 0.5))

    def test_kernel_matrix_reproduces_apply(self):
        family = DyadicGrid(4).family()
        f = np.random.default_rng(42).uniform(0.0, 1.0, size=family.n_points)
        np.testing.assert_allclose(family.kernel_matrix() @ (family.point_masses * f), family.apply(f))

    def test_weighted_averages(self):
        family = DyadicGrid(3).family()
        sigma = np.arange(1.0, 9.0)
        f = np.ones(8)
        np.testing.assert_allclose(family.averages(f, sigma), 1.0)
        # the root average of σ itself
        assert family.averages(sigma)[0] == pytest.approx(4.5)

    def test_row_max_of_empty_rows(self):
        membership = sparse.csr_matrix(np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_array_equal(row_max(membership, np.array([2.0, 5.0])), [5.0, 0.0, 5.0])

    def test_subfamily_keeps_nearest_parent(self):
        grid = DyadicGrid(3)
        full = grid.family()
        sub = full.subfamily([0, 3, 7])
        assert sub.labels == (0, 3, 7)
        np.testing.assert_array_equal(sub.parents, [-1, 0, 1])
        assert sub.children() == [[1], [2], []]

    def test_union(self):
        grid = DyadicGrid(3)
        a, b = grid.family([0, 1]), grid.family([0, 2])
        union = SparseCollection.union([a, b])
        assert union.n_sets == 4
        assert union.groups == 2
        assert union.tau == pytest.approx(2.0 * max(a.tau, b.tau))
        np.testing.assert_array_equal(union.parents, [-1, 0, -1, 2])
        assert union.audit().certified

    def test_local_apply_on_root_is_global(self):
        family = DyadicGrid(4).family()
        f = np.random.default_rng(42).uniform(size=family.n_points)
        np.testing.assert_allclose(family.local_apply(0, f), family.apply(f))

    def test_test_bank_is_seeded(self):
        family = DyadicGrid(4).family()
        first = build_test_bank(family, seed=5, size=8, extra=[np.ones(family.n_points)])
        second = build_test_bank(family, seed=5, size=8, extra=[np.ones(family.n_points)])
        assert len(first) == 8
        for x, y in zip(first, second):
            np.testing.assert_array_equal(x, y)
        np.testing.assert_array_equal(first[-1], 1.0)

    @settings(max_examples=10, deadline=None)
    @given(seeds)
    def test_weighted_maximal_norm_between_one_and_two(self, seed):
        family = DyadicGrid(5).family()
        sigma = 2.0 ** np.random.default_rng(seed).uniform(-2, 2, size=family.n_points)
        norm = weighted_maximal_norm(family, sigma, p=2.0, seed=seed)
        assert 1.0 - 1e-12 <= norm <= 2.0 + 1e-12


class TestKernels:
    @pytest.fixture(scope="class")
    def disc_rule(self):
        return build_quadrature(1, "polar-grid", size=24, angular=48, grading=1.0)

    def test_kernel_at_origin_is_one(self, disc_rule):
        np.testing.assert_allclose(bergman_kernel(np.zeros((1, 1)), disc_rule), 1.0)

    @pytest.mark.parametrize("z", [0.0, 0.3 + 0.2j, -0.5j])
    def test_reproduces_holomorphic_polynomials(self, disc_rule, z):
        point = np.array([z])
        assert bergman_projection(1.0, point, disc_rule) == pytest.approx(1.0, abs=1e-10)
        assert bergman_projection(lambda x: x[:, 0], point, disc_rule) == pytest.approx(z, abs=1e-10)

    def test_maximal_dominates(self, disc_rule):
        rng = np.random.default_rng(42)
        f = rng.standard_normal(disc_rule.size)
        points = 0.8 * np.exp(2j * np.pi * rng.uniform(size=(5, 1)))
        assert np.all(maximal_projection(f, points, disc_rule) >= np.abs(bergman_projection(f, points, disc_rule)) - 1e-12)

    def test_dimension_mismatch(self, disc_rule):
        with pytest.raises(DomainError):
            bergman_kernel(np.zeros((1, 2)), disc_rule)

    def test_sparse_kernel_needs_matching_system(self, disc_rule, small_system):
        with pytest.raises(DomainError):
            kernel_matrix(KernelKind.SPARSE, disc_rule)
        with pytest.raises(DomainError):
            kernel_matrix(KernelKind.SPARSE, disc_rule, small_system)


class TestNorms:
    def test_power_iteration_matches_svd(self):
        rng = np.random.default_rng(42)
        u, v = rng.standard_normal(30), rng.standard_normal(30)
        matrix = rng.standard_normal((30, 30)) / 30.0 + np.outer(u, v)
        value, iterations = power_iteration(matrix)
        assert value == pytest.approx(dense_norm(matrix), rel=1e-7)
        assert iterations > 1

    def test_power_iteration_zero_matrix(self):
        assert power_iteration(np.zeros((4, 4)))[0] == 0.0

    def test_power_iteration_budget(self):
        with pytest.raises(ConvergenceError):
            power_iteration(np.diag([1.0, 0.99, 0.5]), tol=1e-15, maxiter=1)

    def test_weighted_matrix(self):
        kernel = np.ones((2, 2))
        matrix = weighted_matrix(kernel, [0.5, 0.5], [1.0, 4.0], [1.0, 1.0])
        np.testing.assert_allclose(matrix, [[0.5, 0.5], [1.0, 1.0]])

    def test_sparse_norm_dense_cross_check(self):
        rule = build_quadrature(1, "polar-grid", size=6, angular=12, grading=1.0)
        system = TentSystem([build_tree(SMALL_PARAMS)], rule)
        one = Weight.constant()
        estimate = estimate_operator_norm(KernelKind.SPARSE, one, one, rule, system)
        assert estimate.dense is not None
        assert estimate.value == estimate.dense
        assert estimate.discrepancy is None or estimate.discrepancy < 1e-3
        # ⟨Λ1, 1⟩ ≥ ⟨1, 1⟩ on the nodes inside the horizon
        assert estimate.value >= 1.0 - 1e-9

    def test_unconverged_iteration_falls_back_to_dense(self, monkeypatch):
        # the projection on a uniform polar rule has a cluster of singular values near one
        monkeypatch.setattr(lab_settings, "POWER_MAXITER", 2)
        rule = build_quadrature(1, "polar-grid", size=6, angular=12, grading=1.0)
        one = Weight.constant()
        estimate = estimate_operator_norm(KernelKind.PROJECTION, one, one, rule)
        assert estimate.power is None
        assert estimate.discrepancy is None
        matrix = weighted_matrix(kernel_matrix(KernelKind.PROJECTION, rule), rule.masses, np.ones(rule.size), np.ones(rule.size))
        assert estimate.value == dense_norm(matrix)

    def test_unconverged_iteration_without_dense_raises(self, monkeypatch):
        monkeypatch.setattr(lab_settings, "POWER_MAXITER", 2)
        monkeypatch.setattr(lab_settings, "DENSE_LIMIT", 10)
        rule = build_quadrature(1, "polar-grid", size=6, angular=12, grading=1.0)
        one = Weight.constant()
        with pytest.raises(ConvergenceError):
            estimate_operator_norm(KernelKind.PROJECTION, one, one, rule)

    def test_loose_iteration_reports_dense(self, monkeypatch):
        monkeypatch.setattr(lab_settings, "POWER_TOL", 0.5)
        rule = build_quadrature(1, "polar-grid", size=6, angular=12, grading=1.0)
        w, sigma = Weight.power_radial(0.5), Weight.power_radial(-0.25)
        estimate = estimate_operator_norm(KernelKind.PROJECTION, sigma, w, rule)
        assert estimate.power is not None
        assert estimate.value == estimate.dense

    def test_modal_norm_unweighted(self):
        one = Weight.constant()
        assert modal_projection_norm(one, one) == pytest.approx(1.0)
        assert modal_projection_norm(one.scaled(4.0), one) == pytest.approx(2.0)
        assert modal_projection_norm(one, one, d=2) == pytest.approx(1.0)

    def test_modal_norm_edge_cases(self):
        assert modal_projection_norm(Weight.power_radial(-0.5), Weight.power_radial(0.25)) == float("inf")
        with pytest.raises(DomainError):
            modal_projection_norm(Weight.power_radial(-1.0), Weight.power_radial(2.0))
        with pytest.raises(DomainError):
            modal_projection_norm(Weight.explicit("bump"), Weight.constant())

    def test_modal_norm_grows_with_exponent_gap(self):
        w = Weight.power_radial(0.5)
        assert modal_projection_norm(w, w.inverse()) >= 1.0
        assert modal_projection_norm(w, w) < modal_projection_norm(w, w.inverse())


class TestStopping:
    def test_constant_function_stops_at_root(self):
        family = DyadicGrid(4).family()
        stopping = stopping_family(np.ones(family.n_points), np.ones(family.n_points), 0, family)
        assert stopping.members == [0]
        np.testing.assert_array_equal(stopping.block(0), np.arange(family.n_sets))

    def test_negative_function_rejected(self):
        family = DyadicGrid(2).family()
        with pytest.raises(DomainError):
            stopping_family(-np.ones(4), np.ones(4), 0, family)

    def test_spike_selects_its_chain(self):
        grid = DyadicGrid(3)
        family = grid.family()
        f = np.full(8, 1e-3)
        f[0] = 1.0
        stopping = stopping_family(f, np.ones(8), 0, family)
        assert 0 in stopping
        assert all(grid.contains(m, grid.leaf(0)) for m in stopping.members)
        assert stopping.generation[stopping.members[-1]] == len(stopping.members) - 1

    @settings(max_examples=15, deadline=None)
    @given(seeds)
    def test_audit_is_clean(self, seed):
        rng = np.random.default_rng(seed)
        family = DyadicGrid(6).family()
        f = 2.0 ** rng.uniform(-4, 4, size=family.n_points)
        sigma = 2.0 ** rng.uniform(-2, 2, size=family.n_points)
        stopping = stopping_family(f, sigma, 0, family)
        audit = audit_stopping_family(stopping, family, sigma)
        assert audit.sparse
        for member in stopping.members[1:]:
            parent = stopping.stopping_parent[member]
            assert member in stopping.children_of(parent)
            assert stopping.projection[member] == member
