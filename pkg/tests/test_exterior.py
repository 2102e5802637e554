"""Exterior kernel weight: closed forms vs quadrature oracle."""

import numpy as np
import pytest

from fracpoincare.domain import box, build_grid
from fracpoincare.exterior import (
    exterior_kernel_weight,
    exterior_kernel_weight_quadrature,
    exterior_weights_grid,
)


class TestInterval:
    def test_center_sp1(self):
        # kappa(0) on (-1,1) with sp=1: 2 * int_1^inf r^-2 dr = 2.
        assert exterior_kernel_weight([0.0], box((-1, 1)), 0.5, 2.0) == pytest.approx(2.0, rel=1e-14)

    def test_closed_form_at_nodes(self):
        om = box((-1, 1))
        g = build_grid(om, 1 / 16)
        s, p = 0.6, 2.5
        sp = s * p
        got = exterior_weights_grid(g, s, p)
        x = g.axes[0]
        ref = ((1.0 - x) ** (-sp) + (x + 1.0) ** (-sp)) / sp
        np.testing.assert_allclose(got, ref, rtol=1e-10)

    def test_symmetry(self):
        om = box((-1, 1))
        for x in (0.3, 0.77):
            a = exterior_kernel_weight([x], om, 0.4, 3.0)
            b = exterior_kernel_weight([-x], om, 0.4, 3.0)
            assert a == pytest.approx(b, rel=1e-13)

    def test_monotone_toward_boundary(self):
        om = box((-1, 1))
        xs = np.linspace(0.0, 0.95, 20)
        vals = [exterior_kernel_weight([x], om, 0.5, 2.0) for x in xs]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_quadrature_oracle_agrees(self):
        om = box((-1, 1))
        for x in (0.0, 0.5, -0.9):
            fast = exterior_kernel_weight([x], om, 0.45, 2.2)
            ref = exterior_kernel_weight_quadrature([x], om, 0.45, 2.2)
            assert fast == pytest.approx(ref, rel=1e-8)

    def test_boundary_rejected(self):
        with pytest.raises(ValueError):
            exterior_kernel_weight([1.0], box((-1, 1)), 0.5, 2.0)
        with pytest.raises(ValueError):
            exterior_kernel_weight([1.2], box((-1, 1)), 0.5, 2.0)


class TestBox2D:
    @pytest.mark.parametrize("s,p", [(0.5, 2.0), (0.3, 1.5), (0.75, 3.0)])
    def test_closed_form_vs_quadrature(self, s, p):
        om = box((-1, 1), (0, 1))
        for pt in ([0.0, 0.5], [0.7, 0.2], [-0.9, 0.9]):
            fast = exterior_kernel_weight(pt, om, s, p)
            ref = exterior_kernel_weight_quadrature(pt, om, s, p)
            assert fast == pytest.approx(ref, rel=1e-8)

    def test_grid_vectorization_matches_pointwise(self):
        om = box((-1, 1), (0, 1))
        g = build_grid(om, 0.26)
        vals = exterior_weights_grid(g, 0.5, 2.0)
        pts = g.nodes()
        ref = np.array([exterior_kernel_weight(pt, om, 0.5, 2.0) for pt in pts])
        np.testing.assert_allclose(vals.ravel(), ref, rtol=1e-12)

    def test_symmetry_square(self):
        om = box((-1, 1), (-1, 1))
        a = exterior_kernel_weight([0.3, 0.5], om, 0.5, 2.0)
        b = exterior_kernel_weight([0.5, 0.3], om, 0.5, 2.0)
        c = exterior_kernel_weight([-0.3, -0.5], om, 0.5, 2.0)
        assert a == pytest.approx(b, rel=1e-12)
        assert a == pytest.approx(c, rel=1e-12)

    def test_boundary_rejected(self):
        with pytest.raises(ValueError):
            exterior_kernel_weight([0.0, 0.0], box((-1, 1), (0, 1)), 0.5, 2.0)
