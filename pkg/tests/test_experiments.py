import os
from pathlib import Path

import numpy as np
import pytest

from config import settings
from config.schema import parse_config
from src.db.report_store import ReportStore
from src.errors import ConfigError
from src.experiments.reports import RatioReport, Verdict, depth_stability, summarize
from src.experiments.router import ExperimentRouter
from src.experiments.verify import (
    power_radial_pairs,
    run_sweep,
    verify_prop34,
    verify_prop42,
    verify_theorem1,
)
from src.geometry.quadrature import build_quadrature
from src.weights.weight import Weight

ORACLE_DOC = {"depth": 3, "coarse_depth": 2, "seeds": 2, "threads": 1}
VERIFY_DOC = {
    "tree": {"depth": 1},
    "quadrature": {"size": 12, "angular": 24},
    "norm_quadrature": {"size": 4, "angular": 16, "grading": 1.0},
    "runs": ["theorem1", "prop34"],
    "alphas": [0.0],
    "p_values": [2.0],
    "threads": 1,
}


@pytest.fixture(scope="module")
def uniform_norm_rule():
    # ‖P‖ at w = σ ≡ 1 is within 1e-4 of one on this rule
    return build_quadrature(1, "polar-grid", size=8, angular=128, grading=1.0)


class TestRatioReport:
    def test_bounded_and_growth(self):
        assert RatioReport("x", 1.0, 1.0, coarse_ratio=0.9).verdict == Verdict.BOUNDED
        assert RatioReport("x", 4.0, 1.0, coarse_ratio=1.5).verdict == Verdict.GROWTH
        assert RatioReport("x", 1.0, 1.0, coarse_ratio=0.0).growth == 1.0

    def test_bracket(self):
        report = RatioReport("compare_b2", 10.0, 1.0, coarse_ratio=10.0, bracket=(0.125, 8.0))
        assert not report.in_bracket
        assert report.verdict == Verdict.GROWTH

    def test_row(self):
        row = RatioReport("x", 2.0, 4.0, 0.5, {"w": "1"}, {"depth": 3}).to_row()
        assert row["ratio"] == 0.5
        assert row["input_w"] == "1"
        assert row["truncation_depth"] == 3
        assert row["verdict"] == "BOUNDED-EVIDENCE"

    def test_summarize(self):
        reports = [
            RatioReport("a", 1.0, 2.0, 0.5),
            RatioReport("a", 3.0, 2.0, 0.5),
            RatioReport("b", 1.0, 1.0, 1.0),
        ]
        summary = summarize(reports)
        assert summary["a"]["max_ratio"] == 1.5
        assert summary["a"]["points"] == 2
        assert summary["a"][Verdict.GROWTH.value] == 1
        assert summary["b"][Verdict.BOUNDED.value] == 1

    def test_diverging_hypothesis_is_not_applicable(self):
        report = RatioReport("theorem1", 9.0, 1.0, coarse_ratio=9.0, diverging=("b2",))
        assert not report.applicable
        assert report.verdict == Verdict.NOT_APPLICABLE
        row = report.to_row()
        assert row["diverging"] == "b2"
        assert row["verdict"] == "NOT-APPLICABLE"

        summary = summarize([report, RatioReport("theorem1", 1.0, 2.0, 0.5)])
        assert summary["theorem1"]["max_ratio"] == 0.5
        assert summary["theorem1"][Verdict.NOT_APPLICABLE.value] == 1
        assert summary["theorem1"]["points"] == 2

    def test_row_carries_bracket(self):
        row = RatioReport("prop34", 1.2, 1.0, 1.0, bracket=(0.0, 1.05)).to_row()
        assert row["bracket_low"] == 0.0 and row["bracket_high"] == 1.05
        assert row["in_bracket"] is False
        assert row["verdict"] == Verdict.GROWTH.value

    def test_depth_stability(self):
        rows = [
            {"name": "a", "seed": 0, "depth": 2, "ratio": 1.0},
            {"name": "a", "seed": 0, "depth": 4, "ratio": 1.1},
            {"name": "a", "seed": 1, "depth": 2, "ratio": 2.0},
            {"name": "a", "seed": 1, "depth": 4, "ratio": 3.0},
            {"name": "b", "seed": None, "depth": 4, "ratio": 5.0},
        ]
        stability = depth_stability(rows, coarse_depth=2, depth=4)
        assert set(stability) == {"a"}
        assert stability["a"]["seeds"] == 2
        assert stability["a"]["max_drift"] == pytest.approx(0.5)
        assert not stability["a"]["stable"]


class TestVerify:
    def test_prop42_constant_pair(self, small_system):
        one = Weight.constant()
        report = verify_prop42(one, one, small_system)
        # Λ1 ≥ 1 on each tent, and both characteristics equal one
        assert report.rhs == pytest.approx(1.0)
        assert report.lhs >= 1.0 - 1e-9
        assert report.truncation["coarse_depth"] == max(0, small_system.depth - settings.REFINE_STEP)

    def test_prop42_dual_swaps_roles(self, small_system):
        w, sigma = Weight.power_radial(0.3), Weight.power_radial(-0.3)
        report = verify_prop42(w, sigma, small_system, dual=True)
        assert report.name == "prop42_dual"
        assert report.inputs["w"] == sigma.label()

    def test_prop34_denominator_at_least_one(self, small_system):
        report = verify_prop34(Weight.power_radial(0.5), 2.0, small_system)
        assert report.rhs >= 1.0 - 1e-12
        assert report.lhs >= 1.0 - 1e-12

    def test_theorem1_identity_pair(self, small_system, uniform_norm_rule):
        one = Weight.constant()
        report = verify_theorem1(one, one, small_system, norm_rule=uniform_norm_rule)
        assert report.lhs == pytest.approx(1.0, abs=1e-3)
        assert report.ratio == pytest.approx(0.5, rel=1e-3)
        assert report.bracket == pytest.approx((0.45, 0.55))
        assert report.in_bracket
        assert report.diverging == ()
        assert report.verdict == Verdict.BOUNDED

    def test_theorem1_coarse_angular_rule_leaves_bracket(self, small_system):
        # 48 angles miss too many modes of the kernel and ‖P‖ comes out near 1.15
        coarse = build_quadrature(1, "polar-grid", size=16, angular=48, grading=1.0)
        one = Weight.constant()
        report = verify_theorem1(one, one, small_system, norm_rule=coarse)
        assert not report.in_bracket
        assert report.verdict == Verdict.GROWTH

    def test_theorem1_with_nonintegrable_sigma_is_not_applicable(self, small_system):
        # σ = (1−|z|²)^{-3/2} is not integrable and the joint B₂ grows with the truncation
        w, sigma = Weight.power_radial(1.5), Weight.power_radial(-1.5)
        norm_rule = build_quadrature(1, "polar-grid", size=6, angular=12, grading=1.0)
        report = verify_theorem1(w, sigma, small_system, norm_rule=norm_rule)
        assert "b2" in report.diverging
        assert report.verdict == Verdict.NOT_APPLICABLE
        assert report.to_row()["verdict"] == "NOT-APPLICABLE"

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_prop34_at_most_one(self, small_system, alpha, p):
        report = verify_prop34(Weight.power_radial(alpha), p, small_system)
        assert report.ratio <= 1.05
        assert report.in_bracket

    def test_run_sweep_preserves_order(self):
        assert run_sweep(list(range(6)), lambda x: x * x, threads=2) == [0, 1, 4, 9, 16, 25]

    def test_power_radial_pairs(self):
        pairs = power_radial_pairs([0.0, 0.5])
        assert len(pairs) == 4
        assert pairs[1][1].radial_exponent == 0.5


class TestReportStore:
    def test_json_is_deterministic(self, tmp_path):
        store = ReportStore(str(tmp_path))
        doc = {"b": np.float64(0.1), "a": np.arange(3), "z": 1 + 2j}
        first = Path(store.write_json("doc", doc)).read_text()
        second = Path(store.write_json("doc", dict(reversed(list(doc.items()))))).read_text()
        assert first == second
        assert store.read_json("doc") == {"a": [0, 1, 2], "b": 0.1, "z": [1.0, 2.0]}

    def test_rows(self, tmp_path):
        store = ReportStore(str(tmp_path))
        path = store.write_rows("rows", [{"x": 0.1, "ok": True}, {"x": float("inf"), "y": None, "n": np.int64(3)}])
        with open(path) as f:
            lines = f.read().splitlines()
        assert lines == ["x,ok,y,n", "0.1,true,,", "inf,,,3"]


class TestSchema:
    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            parse_config("build-tree", {"bogus": 1})

    def test_unknown_command(self):
        with pytest.raises(ConfigError):
            parse_config("nope", {})

    def test_depths_ordered(self):
        with pytest.raises(ConfigError):
            parse_config("model-oracle", {"depth": 4, "coarse_depth": 5})

    def test_product_needs_factors(self):
        with pytest.raises(ConfigError):
            parse_config("characteristics", {"pairs": [{"w": {"kind": "product"}, "sigma": {}}]})

    def test_defaults(self):
        cfg = parse_config("verify", {"runs": ["prop34"]})
        assert cfg.d == 1
        assert cfg.quadrature.scheme == "polar-grid"
        assert cfg.norm_method == "discrete"


class TestRouter:
    def test_missing_defaults_file(self, tmp_path):
        router = ExperimentRouter(ReportStore(str(tmp_path)), path=str(tmp_path / "missing.json"))
        assert router.defaults == {}

    def test_seed_override(self, tmp_path):
        router = ExperimentRouter(ReportStore(str(tmp_path)), seed=3, path=str(tmp_path / "missing.json"))
        assert router.config_for("model-oracle", {}).seed == 3

    def test_build_tree(self, tmp_path):
        router = ExperimentRouter(ReportStore(str(tmp_path)))
        summary = router.run("build-tree", {"tree": {"depth": 1}, "output": "t"})
        assert summary["trees"] == 1
        assert os.path.exists(tmp_path / "t.json")
        assert os.path.exists(tmp_path / "t_summary.json")

    def test_model_oracle(self, tmp_path):
        router = ExperimentRouter(ReportStore(str(tmp_path)), seed=7)
        summary = router.run("model-oracle", dict(ORACLE_DOC))
        assert summary["lemma_aux1@3"]["points"] == 2
        assert summary["lemma_aux1@3"]["violations"] == 0
        assert summary["lemma_aux1@2"]["violations"] == 0
        assert os.path.exists(tmp_path / "model.csv")

    def test_model_oracle_is_stable_in_depth(self, tmp_path):
        router = ExperimentRouter(ReportStore(str(tmp_path)), seed=11)
        summary = router.run("model-oracle", {"depth": 6, "coarse_depth": 4, "seeds": 2, "spread": 1, "threads": 1})
        aux2 = summary["stability"]["lemma_aux2"]
        assert aux2["seeds"] == 2
        assert aux2["stable"]
        assert aux2["max_drift"] <= 0.25
        assert summary["sawyer@6"]["violations"] == 0
        assert summary["sawyer@4"]["violations"] == 0

    def test_verify_writes_one_file_per_run(self, tmp_path):
        router = ExperimentRouter(ReportStore(str(tmp_path)))
        summary = router.run("verify", dict(VERIFY_DOC))
        assert summary["theorem1"]["points"] == 1
        assert summary["prop34"]["points"] == 1
        for run in ("theorem1", "prop34"):
            with open(tmp_path / f"verify_{run}.csv") as f:
                lines = f.read().splitlines()
            assert len(lines) == 2
            assert lines[1].startswith(run + ",")
        assert not os.path.exists(tmp_path / "verify.csv")
        assert os.path.exists(tmp_path / "verify_summary.json")

    def test_model_oracle_is_deterministic(self, tmp_path):
        outputs = []
        for attempt in range(2):
            out_dir = tmp_path / f"run{attempt}"
            ExperimentRouter(ReportStore(str(out_dir)), seed=7).run("model-oracle", dict(ORACLE_DOC))
            outputs.append({name: (out_dir / name).read_bytes() for name in sorted(os.listdir(out_dir))})
        assert outputs[0] == outputs[1]
