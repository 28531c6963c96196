import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.errors import ConfigError, DomainError
from src.geometry.quadrature import build_quadrature
from src.orlicz.young import YoungFunction
from src.tree.bergman_tree import TreeParams, build_tree_family
from src.tree.tents import TentSystem
from src.weights.characteristics import (
    ApexGrid,
    b_infty,
    bp_classical,
    carleson_membership,
    growth_flag,
    joint_bp_dyadic,
    joint_bp_products,
    orlicz_bump,
    orlicz_bump_values,
    sigma_sparsity,
)
from src.weights.weight import Weight, node_values, register_expression

alphas = st.floats(min_value=-0.9, max_value=2.0)


class TestWeight:
    def test_power_radial_values(self):
        z = np.array([[0.0], [0.5], [0.9j]])
        np.testing.assert_allclose(Weight.power_radial(0.5)(z), np.sqrt([1.0, 0.75, 0.19]))
        np.testing.assert_allclose(Weight.power_radial(0.0)(z), 1.0)

    @settings(max_examples=30, deadline=None)
    @given(alphas, st.floats(min_value=1.2, max_value=4.0))
    def test_dual_exponent(self, alpha, p):
        w = Weight.power_radial(alpha)
        assert w.dual(p).radial_exponent == pytest.approx(alpha * (1.0 - p / (p - 1.0)))
        assert w.inverse().radial_exponent == pytest.approx(-alpha)

    def test_dual_of_two_is_inverse(self, small_rule):
        w = Weight.explicit("log-radial")
        np.testing.assert_allclose(w.dual(2.0)(small_rule.nodes), 1.0 / w(small_rule.nodes))

    def test_product_centred_at_origin_is_power_radial(self, small_rule):
        product = Weight.product([(0.3, [0.0])])
        np.testing.assert_allclose(product(small_rule.nodes), Weight.power_radial(0.3)(small_rule.nodes))

    def test_product_is_one_at_its_centre(self):
        a = np.array([0.4 + 0.2j])
        w = Weight.product([(1.0, a)])
        # 1 − |φ_a(a)|² = 1 at the centre itself
        assert w(a[None, :])[0] == pytest.approx(1.0)

    def test_tabulated(self, small_tree):
        table = np.arange(1, small_tree.n_nodes + 1, dtype=float)
        w = Weight.tabulated(small_tree, table)
        np.testing.assert_allclose(w(small_tree.centers), table)
        with pytest.raises(DomainError):
            Weight.tabulated(small_tree, np.zeros(small_tree.n_nodes))

    def test_from_spec(self):
        w = Weight.from_spec({"kind": "power-radial", "alpha": 0.5, "scale": 2.0})
        assert w.radial_exponent == 0.5 and w.scale == 2.0
        with pytest.raises(ConfigError):
            Weight.from_spec({"kind": "cell-tabulated", "table": [1.0]})
        with pytest.raises(ConfigError):
            Weight.explicit("no-such-expression")

    def test_from_spec_malformed_table_is_config_error(self, small_tree):
        with pytest.raises(ConfigError):
            Weight.from_spec({"kind": "cell-tabulated", "table": [1.0, 2.0]}, small_tree)
        with pytest.raises(ConfigError):
            Weight.from_spec({"kind": "cell-tabulated", "table": [0.0] * small_tree.n_nodes}, small_tree)
        with pytest.raises(ConfigError):
            Weight.from_spec({"kind": "product"})

    def test_registered_expression(self, small_rule):
        register_expression("three", lambda z: np.full(z.shape[0], 3.0))
        np.testing.assert_allclose(node_values(Weight.explicit("three"), small_rule), 3.0)

    def test_node_values_rejects_nonpositive(self, small_rule):
        register_expression("signed", lambda z: np.real(z[:, 0]))
        with pytest.raises(DomainError):
            node_values(Weight.explicit("signed"), small_rule)

    def test_label(self):
        assert Weight.power_radial(0.5).label() == "(1-|z|^2)^0.5"
        assert Weight.constant(2.0).label() == "2*(1-|z|^2)^0"


class TestCharacteristics:
    def test_constant_weights(self, small_system):
        one = Weight.constant()
        assert joint_bp_dyadic(one, one, 2.0, small_system).value == pytest.approx(1.0)
        assert b_infty(one, small_system).value == pytest.approx(1.0)
        phi = YoungFunction.power(1.5)
        assert orlicz_bump(one, one, phi, phi, small_system).value == pytest.approx(1.0, rel=1e-8)

    @pytest.mark.parametrize("alpha", [-0.5, 0.0, 0.7])
    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_holder_lower_bound(self, small_system, alpha, p):
        w = Weight.power_radial(alpha)
        rule = small_system.rule
        products = joint_bp_products(small_system, node_values(w, rule), node_values(w.dual(p), rule), p)
        assert np.all(products >= 1.0 - 1e-12)

    def test_b_infty_at_least_one(self, small_system):
        report = b_infty(Weight.power_radial(0.8), small_system)
        assert report.value >= 1.0 - 1e-12
        assert report.trend[1] == report.value
        assert report.truncation["coarse_depth"] == 0

    def test_report_row(self, small_system):
        w = Weight.power_radial(0.25)
        row = joint_bp_dyadic(w, w.dual(2.0), 2.0, small_system).to_row()
        assert row["characteristic"] == "joint_bp_dyadic"
        assert row["truncation_depth"] == small_system.depth
        assert row["w"] == w.label()

    def test_joint_bp_rejects_p_at_most_one(self, small_system):
        with pytest.raises(DomainError):
            joint_bp_dyadic(Weight.constant(), Weight.constant(), 1.0, small_system)

    def test_growth_flag(self):
        assert growth_flag(1.0, 2.0)
        assert not growth_flag(1.0, 1.9)
        assert not growth_flag(0.0, 5.0)

    def test_sigma_sparsity_within_budget(self, small_system):
        for alpha in (-0.5, 0.0, 0.6):
            result = sigma_sparsity(Weight.power_radial(alpha), small_system, p=2.0)
            assert result.within_budget
            assert result.tau_hat >= 1.0

    def test_quadratic_bump_is_root_of_joint_b2(self, small_system):
        # ⟨w^{1/2}⟩_{t²} = ⟨w⟩^{1/2}, so the bump with Φ = Ψ = t² is [w, σ]_{B₂}^{1/2}
        w, sigma = Weight.power_radial(0.3), Weight.power_radial(-0.4)
        quadratic = YoungFunction.power(2.0)
        rule = small_system.rule
        wv, sv = node_values(w, rule), node_values(sigma, rule)
        np.testing.assert_allclose(
            orlicz_bump_values(small_system, wv, sv, quadratic, quadratic),
            np.sqrt(joint_bp_products(small_system, wv, sv, 2.0)),
            rtol=1e-6,
        )
        bump = orlicz_bump(w, sigma, quadratic, quadratic, small_system).value
        assert bump == pytest.approx(np.sqrt(joint_bp_dyadic(w, sigma, 2.0, small_system).value), rel=1e-6)


class TestSchemeRobustness:
    def test_polar_and_monte_carlo_agree(self):
        params = TreeParams(R=0.7, delta=0.35, depth=1, d=1)
        trees = build_tree_family(params, 2)
        w, sigma = Weight.power_radial(0.25), Weight.power_radial(0.5)
        phi = YoungFunction.power(1.5)
        apex_grid = ApexGrid(levels=2, angular=8)

        values = {}
        for scheme, rule in (
            ("polar", build_quadrature(1, "polar-grid", size=32, angular=128, grading=0.9)),
            ("monte-carlo", build_quadrature(1, "monte-carlo", size=40_000, seed=17)),
        ):
            system = TentSystem(trees, rule)
            values[scheme] = np.array([
                joint_bp_dyadic(w, sigma, 2.0, system).value,
                bp_classical(w, sigma, 2.0, apex_grid, rule).value,
                b_infty(sigma, system).value,
                orlicz_bump(w, sigma, phi, phi, system).value,
            ])
        np.testing.assert_allclose(values["monte-carlo"], values["polar"], rtol=0.1)


class TestClassical:
    def test_apex_grid(self):
        grid = ApexGrid(levels=3, angular=4, d=1)
        apexes = grid.apexes()
        assert apexes.shape == (4 * (2 + 4 + 8), 1)
        np.testing.assert_allclose(np.abs(apexes[:8, 0]), 0.5)
        assert grid.coarse(2).levels == 1
        assert ApexGrid(levels=0).apexes().shape == (0, 1)

    def test_membership_matches_tent_test(self, small_rule):
        apexes = ApexGrid(levels=3, angular=4).apexes()
        membership, kept = carleson_membership(apexes, small_rule)
        dense = membership.toarray() > 0
        assert dense[:, 0].all()
        for column, apex in enumerate(kept, start=1):
            norm = np.linalg.norm(apex)
            direct = np.abs(1.0 - small_rule.nodes[:, 0] * np.conj(apex[0] / norm)) <= 1.0 - norm + 1e-12
            np.testing.assert_array_equal(dense[:, column], direct)

    def test_constant_pair(self, small_rule):
        one = Weight.constant()
        report = bp_classical(one, one, 2.0, ApexGrid(levels=3), small_rule)
        assert report.value == pytest.approx(1.0)

    def test_whole_ball_tent_bounds_from_below(self, small_rule):
        w = Weight.power_radial(0.5)
        sigma = w.dual(2.0)
        report = bp_classical(w, sigma, 2.0, ApexGrid(levels=4), small_rule)
        whole = np.sum(small_rule.masses * w(small_rule.nodes)) * np.sum(small_rule.masses * sigma(small_rule.nodes))
        assert report.value >= whole * (1.0 - 1e-9)
