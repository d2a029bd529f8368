"""Tests for the box / simplex-coupled search domain and its projections."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bo4io.domain import ParameterDomain, project, project_sum_capped


def _unit_box(dim: int, coupled: bool = False) -> ParameterDomain:
    return ParameterDomain(np.zeros(dim), np.ones(dim), simplex_coupled=coupled)


class TestConstruction:
    def test_dim_and_width(self):
        dom = ParameterDomain(np.array([0.5, 0.2]), np.array([1.0, 0.6]))
        assert dom.dim == 2
        assert np.allclose(dom.width, [0.5, 0.4])

    def test_rejects_inverted_bounds(self):
        with pytest.raises(ValueError):
            ParameterDomain(np.array([1.0]), np.array([0.0]))

    def test_rejects_coupling_outside_unit_box(self):
        with pytest.raises(ValueError):
            ParameterDomain(np.array([0.0]), np.array([1.5]), simplex_coupled=True)

    def test_contains_checks_sum_when_coupled(self):
        dom = _unit_box(2, coupled=True)
        assert dom.contains(np.array([0.4, 0.5]))
        assert not dom.contains(np.array([0.6, 0.6]))

    def test_reconstruct_appends_implicit_weight(self):
        dom = _unit_box(2, coupled=True)
        full = dom.reconstruct(np.array([0.2, 0.3]))
        assert np.allclose(full, [0.2, 0.3, 0.5])
        # uncoupled domains pass the point through untouched
        plain = _unit_box(2)
        assert np.allclose(plain.reconstruct(np.array([0.2, 0.3])), [0.2, 0.3])


class TestProjection:
    def test_box_projection_is_clip(self):
        dom = ParameterDomain(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
        got = project(dom, np.array([-0.5, 1.7]))
        assert np.allclose(got, [0.0, 1.0])

    def test_interior_point_unchanged(self):
        dom = _unit_box(3, coupled=True)
        p = np.array([0.1, 0.2, 0.3])
        assert np.allclose(project(dom, p), p)

    def test_symmetric_overflow_splits_evenly(self):
        # Projecting (0.6, 0.6) onto the coupled unit box must land on the
        # sum = 1 face at the symmetric point (0.5, 0.5).
        dom = _unit_box(2, coupled=True)
        got = project(dom, np.array([0.6, 0.6]))
        assert np.allclose(got, [0.5, 0.5], atol=1e-12)

    def test_coupled_projection_hits_sum_face(self):
        dom = _unit_box(3, coupled=True)
        got = project(dom, np.array([0.9, 0.8, 0.7]))
        assert abs(got.sum() - 1.0) < 1e-9
        assert dom.contains(got)

    @given(
        st.lists(st.floats(-2.0, 3.0), min_size=2, max_size=5).map(np.array),
    )
    @settings(max_examples=200, deadline=None)
    def test_projection_feasible_and_idempotent(self, point):
        dom = _unit_box(point.size, coupled=True)
        got = project(dom, point)
        assert dom.contains(got, tol=1e-8)
        again = project(dom, got)
        assert np.allclose(again, got, atol=1e-9)

    @given(
        st.lists(st.floats(-2.0, 3.0), min_size=2, max_size=4).map(np.array),
        st.lists(st.floats(0.0, 1.0), min_size=2, max_size=4).map(np.array),
    )
    @settings(max_examples=200, deadline=None)
    def test_projection_is_closest_feasible_point(self, point, probe):
        # Euclidean projection: no feasible point may be strictly closer.
        if probe.size != point.size:
            probe = np.resize(probe, point.size)
        dom = _unit_box(point.size, coupled=True)
        got = project(dom, point)
        candidate = project(dom, probe)  # some other feasible point
        assert np.linalg.norm(point - got) <= np.linalg.norm(point - candidate) + 1e-9


class TestSumCappedProjection:
    def test_matches_domain_projection_at_unit_cap(self):
        lower, upper = np.zeros(3), np.ones(3)
        dom = ParameterDomain(lower, upper, simplex_coupled=True)
        p = np.array([0.9, 0.8, 0.7])
        a = project(dom, p)
        b = project_sum_capped(lower, upper, 1.0, p)
        assert np.allclose(a, b, atol=1e-12)

    def test_none_cap_is_plain_clip(self):
        got = project_sum_capped(np.zeros(2), np.ones(2), None, np.array([1.5, -0.2]))
        assert np.allclose(got, [1.0, 0.0])

    def test_reduced_budget(self):
        got = project_sum_capped(np.zeros(2), np.ones(2), 0.4, np.array([0.5, 0.5]))
        assert abs(got.sum() - 0.4) < 1e-9
        assert np.allclose(got, [0.2, 0.2], atol=1e-9)

    def test_infeasible_budget_returns_lower_corner(self):
        lower = np.array([0.3, 0.3])
        got = project_sum_capped(lower, np.ones(2), 0.1, np.array([0.5, 0.5]))
        assert np.allclose(got, lower)
