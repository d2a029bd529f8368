"""Tests for the grid-certified pooling solver on the bundled networks.

The classic single-pool instance has a hand-checkable optimum: feed B (1%
sulfur, cost 16) alone satisfies product Y's 1.5% cap at 100 units while the
direct arc tops Y up with 100 units of C, for a profit of 400.  Frozen values
below follow from that flow pattern and linear-scaling arguments.
"""

import numpy as np
import pytest

from bo4io.fop.networks import haverly1, two_pool_synthetic
from bo4io.fop.pooling import pooling_residuals, solve_pooling
from bo4io.fop.types import STATUS_GRID_OPTIMAL


class TestClassicInstance:
    def test_nominal_optimum_fine_grid(self):
        sol = solve_pooling(haverly1(), grid_divisions=2000)
        assert sol.status == STATUS_GRID_OPTIMAL
        assert sol.objective == pytest.approx(-400.0, abs=0.5)

    def test_nominal_decision_pattern(self):
        sol = solve_pooling(haverly1(), grid_divisions=2000)
        assert sol.component("f", "B->P") == pytest.approx(100.0, abs=1e-6)
        assert sol.component("y", "P->Y") == pytest.approx(100.0, abs=1e-6)
        assert sol.component("z", "C->Y") == pytest.approx(100.0, abs=1e-6)
        assert sol.component("f", "A->P") == pytest.approx(0.0, abs=1e-6)
        # pool runs pure B, so its sulfur level sits at B's 1%
        assert sol.family_values("p")[0] == pytest.approx(1.0, abs=1e-6)

    def test_nominal_solution_is_feasible(self):
        sol = solve_pooling(haverly1(), grid_divisions=2000)
        assert pooling_residuals(haverly1(), sol) <= 1e-6

    def test_unit_demand_caps(self):
        # theta overrides the absolute demand caps.  At 0.5 units per product
        # the only profitable route is Y fed by a 50/50 pool-B / direct-C
        # blend sitting exactly on the 1.5% cap: profit 0.25*(15-16) +
        # 0.25*5 ... per the net-margin encoding, total 1.0.
        sol = solve_pooling(haverly1(), theta=np.array([0.5, 0.5]), grid_divisions=200)
        assert sol.objective == pytest.approx(-1.0, abs=1e-9)

    def test_zero_demand_zero_profit(self):
        sol = solve_pooling(haverly1(), theta=np.zeros(2), grid_divisions=200)
        assert sol.objective == pytest.approx(0.0, abs=1e-12)

    def test_price_override_shifts_optimum(self):
        # One extra unit of revenue on Y adds exactly 100 at the nominal
        # optimal flows, and the optimum can only improve on that.
        sol = solve_pooling(
            haverly1(), u={"revenue_y": np.array([9.0, 16.0])}, grid_divisions=200
        )
        assert sol.objective <= -500.0 + 1e-6

    def test_availability_override_caps_profit(self):
        # With one unit of each feed, no flow pattern can earn more than the
        # total feed volume times the best per-unit margin (5 on C->Y).
        sol = solve_pooling(
            haverly1(), u={"availability": np.ones(3)}, grid_divisions=200
        )
        assert sol.objective >= -15.0 - 1e-9
        assert sol.objective == pytest.approx(-4.0, abs=1e-9)


class TestGapCertificate:
    @pytest.mark.parametrize("divisions", [60, 150, 400])
    def test_reported_minus_gap_bounds_best_known(self, divisions):
        net = haverly1()
        sol = solve_pooling(net, grid_divisions=divisions)
        best_known = solve_pooling(net, grid_divisions=3000)
        assert sol.gap is not None and np.isfinite(sol.gap) and sol.gap >= 0.0
        # any certified solve must bracket the best value we can find
        assert best_known.objective <= sol.objective + 1e-9
        assert sol.objective - sol.gap <= best_known.objective + 1e-9

    def test_refinement_never_hurts(self):
        net = haverly1()
        refined = solve_pooling(net, grid_divisions=200, refine=True)
        plain = solve_pooling(net, grid_divisions=200, refine=False)
        assert refined.objective <= plain.objective + 1e-12


class TestTwoPoolNetwork:
    def test_feasible_and_certified(self):
        net = two_pool_synthetic()
        sol = solve_pooling(net, grid_divisions=40)
        assert sol.status == STATUS_GRID_OPTIMAL
        assert pooling_residuals(net, sol) <= 1e-9
        finer = solve_pooling(net, grid_divisions=80)
        assert finer.objective <= sol.objective + 1e-9
        assert sol.objective - sol.gap <= finer.objective + 1e-9

    def test_deterministic(self):
        net = two_pool_synthetic()
        a = solve_pooling(net, grid_divisions=40)
        b = solve_pooling(net, grid_divisions=40)
        assert a.objective == b.objective
        assert np.array_equal(a.decision, b.decision)


class TestValidation:
    def test_negative_demand_rejected(self):
        with pytest.raises(ValueError):
            solve_pooling(haverly1(), theta=np.array([-0.1, 0.5]))

    def test_index_map_families(self):
        sol = solve_pooling(haverly1(), grid_divisions=60)
        assert list(sol.index_map) == ["f", "y", "z", "p"]
        assert sol.decision.size == sum(len(v) for v in sol.index_map.values())
