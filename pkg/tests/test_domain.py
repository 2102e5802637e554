"""Product domains, tensor grids, dilations, cylinders."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracpoincare.domain import (
    ConfigurationError,
    DomainSpec,
    GridFunction,
    box,
    build_grid,
    cylinder,
    dilate,
)


class TestDomainSpec:
    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            box((1.0, 1.0))
        with pytest.raises(ValueError):
            box((2.0, -1.0))

    def test_no_factors_rejected(self):
        with pytest.raises(ValueError):
            DomainSpec(factors=())

    def test_volume(self):
        assert box((-1, 1), (0, 1)).volume() == pytest.approx(2.0)


class TestDilate:
    def test_interval_scaling(self):
        d = dilate(box((-1, 1)), 2.0)
        assert d.factors == ((-2.0, 2.0),)

    def test_identity(self):
        om = box((-1, 1), (0, 3))
        assert dilate(om, 1.0) == om

    def test_group_property_collapses(self):
        om = box((-1.5, 2.5))
        assert dilate(dilate(om, 2.0), 0.5) == om

    @given(t=st.sampled_from([0.25, 0.5, 2.0, 4.0, 8.0]))
    @settings(max_examples=20, deadline=None)
    def test_volume_scales_by_t_pow_n(self, t):
        om = box((-1, 1), (0, 1), (2, 5))
        assert dilate(om, t).volume() == pytest.approx(t ** 3 * om.volume(), rel=1e-12)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            dilate(box((-1, 1)), 0.0)


class TestCylinder:
    def test_unit_square_member(self):
        c = cylinder(1.0, [(-1, 1)], [(-1, 1)])
        assert c.factors == ((-1.0, 1.0), (-1.0, 1.0))
        assert c.free_dims == 1

    def test_scaled_first_factor(self):
        c = cylinder(2.0, [(-1, 1)], [(0, 1)])
        assert c.factors == ((-2.0, 2.0), (0.0, 1.0))

    def test_nesting_when_zero_in_omega1(self):
        c1 = cylinder(1.0, [(-1, 1)], [(0, 1)])
        c2 = cylinder(4.0, [(-1, 1)], [(0, 1)])
        assert c2.contains(c1)
        assert not c1.contains(c2)

    def test_empty_factors_rejected(self):
        with pytest.raises(ValueError):
            cylinder(1.0, [], [(0, 1)])


class TestBuildGrid:
    def test_interval_cell_centers(self):
        g = build_grid(box((-1, 1)), 0.5)
        assert g.shape == (4,)
        np.testing.assert_allclose(g.axes[0], [-0.75, -0.25, 0.25, 0.75])

    def test_2d_lattice(self):
        g = build_grid(box((-1, 1), (0, 1)), 0.5)
        assert g.shape == (4, 2)
        assert g.size == 8

    def test_dilated_interval(self):
        g = build_grid(dilate(box((-1, 1)), 2.0), 0.5)
        assert g.shape == (8,)
        assert g.axes[0][0] == pytest.approx(-1.75)
        assert g.axes[0][-1] == pytest.approx(1.75)

    def test_too_coarse_rejected(self):
        with pytest.raises(ConfigurationError):
            build_grid(box((-1, 1)), 1.5)
        # Exactly two cells per axis is the coarsest legal grid.
        assert build_grid(box((-1, 1)), 1.0).shape == (2,)

    def test_spacing_never_exceeds_target(self):
        g = build_grid(box((0, 1), (0, 0.3)), 0.07)
        assert all(h <= 0.07 + 1e-15 for h in g.h)

    def test_cell_volumes_sum_to_domain_volume(self):
        om = box((-1, 1), (0.2, 1.7))
        g = build_grid(om, 0.083)
        assert g.size * g.cell_volume == pytest.approx(om.volume(), abs=1e-12)

    def test_nodes_strictly_inside(self):
        om = box((-1, 1), (0, 2))
        g = build_grid(om, 0.11)
        pts = g.nodes()
        for ax, (a, b) in enumerate(om.factors):
            assert np.all(pts[:, ax] > a) and np.all(pts[:, ax] < b)

    @pytest.mark.parametrize("t", [0.5, 2.0, 4.0])
    def test_dilation_commutes_with_node_scaling(self, t):
        om = box((-1, 1), (0.5, 1.5))
        h = 0.125
        g = build_grid(om, h)
        gt = build_grid(dilate(om, t), t * h)
        assert gt.shape == g.shape
        for ax in range(2):
            np.testing.assert_array_equal(gt.axes[ax], t * g.axes[ax])


class TestGridFunction:
    def test_rejects_nonfinite(self):
        g = build_grid(box((-1, 1)), 0.5)
        with pytest.raises(ValueError):
            GridFunction(g, [1.0, np.nan, 0.0, 2.0])

    def test_sample_at_nodes_is_exact(self):
        g = build_grid(box((-1, 1), (0, 1)), 0.25)
        rng = np.random.default_rng(3)
        u = GridFunction(g, rng.standard_normal(g.shape))
        got = u.sample(g.nodes())
        np.testing.assert_allclose(got, u.values.ravel(), atol=1e-14)

    def test_sample_outside_is_zero(self):
        g = build_grid(box((-1, 1)), 0.25)
        u = GridFunction(g, np.ones(g.shape))
        assert u.sample(np.array([[1.5], [-2.0]])).tolist() == [0.0, 0.0]

    def test_sample_linear_between_nodes(self):
        g = build_grid(box((0, 1)), 0.25)
        u = GridFunction(g, g.axes[0])  # u(x) = x at nodes
        mid = 0.5 * (g.axes[0][1] + g.axes[0][2])
        assert u.sample([[mid]])[0] == pytest.approx(mid, rel=1e-12)
