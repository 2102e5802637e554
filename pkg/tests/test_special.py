"""Gamma/beta machinery and the normalization identities."""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fracpoincare.special import (
    FracParams,
    beta,
    cos_power_integral,
    gamma,
    kernel_constant,
    log_gamma,
    reduction_constant,
    sphere_area,
    surface_element,
)

S_GRID = [0.1, 0.25, 0.5, 0.75, 0.9]
P_GRID = [1.0, 1.5, 2.0, 3.0, 5.0]


class TestGamma:
    def test_exact_values(self):
        assert gamma(1.0) == pytest.approx(1.0, rel=1e-14)
        assert gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
        assert gamma(5.0) == pytest.approx(24.0, rel=1e-14)

    def test_against_mpmath_on_contract_range(self):
        mpmath.mp.dps = 40
        xs = np.concatenate([
            np.linspace(0.05, 2.0, 400),
            np.linspace(2.0, 50.0, 600),
            [0.05, 50.0, 1e-0 + 1e-9],
        ])
        worst = 0.0
        for x in xs:
            ref = float(mpmath.gamma(mpmath.mpf(float(x))))
            worst = max(worst, abs(gamma(float(x)) - ref) / abs(ref))
        assert worst <= 1e-13

    def test_domain_error(self):
        for bad in (0.0, -1.0, -0.5):
            with pytest.raises(ValueError):
                gamma(bad)

    def test_log_gamma_consistency(self):
        for x in (0.07, 0.4, 1.3, 7.0, 41.0):
            assert log_gamma(x) == pytest.approx(math.log(gamma(x)), abs=1e-12)


class TestBeta:
    def test_trivial_values(self):
        assert beta(1.0, 1.0) == pytest.approx(1.0, rel=1e-13)
        assert beta(0.5, 0.5) == pytest.approx(math.pi, rel=1e-13)

    def test_quadrature_oracle(self):
        # beta(2, 3) = int_0^1 t (1-t)^2 dt
        ref, _ = integrate.quad(lambda t: t * (1.0 - t) ** 2, 0.0, 1.0, epsrel=1e-12)
        assert ref == pytest.approx(1.0 / 12.0, rel=1e-12)
        assert beta(2.0, 3.0) == pytest.approx(ref, rel=1e-12)

    @given(
        x=st.floats(min_value=0.1, max_value=20.0),
        y=st.floats(min_value=0.1, max_value=20.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_symmetry_and_right_unit(self, x, y):
        assert beta(x, y) == pytest.approx(beta(y, x), rel=1e-12)
        assert beta(x, 1.0) == pytest.approx(1.0 / x, rel=1e-12)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            beta(0.0, 1.0)
        with pytest.raises(ValueError):
            beta(1.0, -2.0)


class TestSphereArea:
    def test_known_values(self):
        assert sphere_area(1) == pytest.approx(2.0, rel=1e-14)
        assert sphere_area(2) == pytest.approx(2.0 * math.pi, rel=1e-14)
        assert sphere_area(3) == pytest.approx(4.0 * math.pi, rel=1e-14)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            sphere_area(0)


class TestSurfaceElement:
    def test_n2_is_one(self):
        for a in (0.3, 1.0, 5.0):
            assert surface_element([a]) == 1.0

    def test_n3_equator(self):
        assert surface_element([math.pi / 2, 1.0]) == pytest.approx(1.0, rel=1e-15)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_quadrature_recovers_sphere_area(self, n):
        # Tensor-product quadrature of the surface element over the
        # angle box (0,pi)^(n-2) x (0,2pi); the element is separable,
        # so iterate 1D quadratures.
        total = 2.0 * math.pi  # the free last angle
        for k in range(1, n - 1):  # sigma_k, exponent n-k-1
            val, _ = integrate.quad(
                lambda a, e=n - k - 1: math.sin(a) ** e, 0.0, math.pi, epsrel=1e-12
            )
            total *= val
        assert total == pytest.approx(sphere_area(n), rel=1e-6)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            surface_element([3.5, 1.0])  # first angle beyond pi for n=3
        with pytest.raises(ValueError):
            surface_element([])


class TestKernelConstant:
    def test_closed_value_1d(self):
        # Direct evaluation at n=1, s=1/2, p=2 gives exactly 1/pi.
        assert kernel_constant(1, 0.5, 2.0) == pytest.approx(1.0 / math.pi, rel=1e-13)

    def test_high_precision_oracle(self):
        mpmath.mp.dps = 40
        for (n, s, p) in [(1, 0.5, 2.0), (2, 0.3, 1.5), (4, 0.9, 3.0), (6, 0.1, 5.0)]:
            sp = mpmath.mpf(s) * p
            ref = (
                sp * mpmath.mpf(2) ** (2 * mpmath.mpf(s) - 1)
                * mpmath.gamma((n + sp) / 2)
                / (2 * mpmath.pi ** (mpmath.mpf(n - 1) / 2)
                   * mpmath.gamma(1 - mpmath.mpf(s))
                   * mpmath.gamma((p + 1) / mpmath.mpf(2)))
            )
            assert kernel_constant(n, s, p) == pytest.approx(float(ref), rel=1e-12)

    @given(
        n=st.integers(min_value=1, max_value=8),
        s=st.floats(min_value=0.05, max_value=0.95),
        p=st.floats(min_value=1.0, max_value=6.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_positive(self, n, s, p):
        assert kernel_constant(n, s, p) > 0.0

    def test_reduction_identity_example(self):
        lhs = kernel_constant(2, 0.5, 2.0) * reduction_constant(1, 2, 0.5, 2.0)
        assert lhs == pytest.approx(kernel_constant(1, 0.5, 2.0), rel=1e-12)


class TestReductionConstant:
    def _defining_integral(self, m, n, s, p):
        sp = s * p
        f = lambda t: t ** (m - 1) * (1.0 + t * t) ** (-0.5 * (n + sp))
        # Truncate at t = 1e6, splitting so the adaptive rule sees the
        # decay scale on each piece.
        val = 0.0
        for lo, hi in [(0.0, 10.0), (10.0, 1e3), (1e3, 1e6)]:
            piece, _ = integrate.quad(f, lo, hi, epsrel=1e-10, limit=200)
            val += piece
        # Tail beyond t = 1e6: integrand <= t^(m-1-n-sp).
        tail = 1e6 ** (m - n - sp) / (n + sp - m)
        return sphere_area(m) * val, sphere_area(m) * tail

    def test_value_m1_n2(self):
        got = reduction_constant(1, 2, 0.5, 2.0)
        assert got == pytest.approx(2.0, rel=1e-12)  # sqrt(pi)*G(1)/G(3/2)
        ref, tail = self._defining_integral(1, 2, 0.5, 2.0)
        assert abs(got - ref) <= 1e-8 * got + tail

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_codimension_one_vs_quadrature(self, n):
        m = n - 1
        got = reduction_constant(m, n, 0.5, 2.0)
        ref, tail = self._defining_integral(m, n, 0.5, 2.0)
        assert abs(got - ref) / got <= 1e-6 + tail / got

    def test_full_identity_grid(self):
        for n in range(2, 7):
            for m in range(1, n):
                for s in S_GRID:
                    for p in P_GRID:
                        lhs = kernel_constant(n, s, p) * reduction_constant(m, n, s, p)
                        rhs = kernel_constant(n - m, s, p)
                        assert abs(lhs - rhs) / rhs <= 1e-10

    def test_domain_error(self):
        with pytest.raises(ValueError):
            reduction_constant(3, 3, 0.5, 2.0)


class TestCosPowerIntegral:
    def test_n2_sp1_is_four(self):
        # int_0^{2pi} |cos a| da = 4 by direct quadrature.
        ref, _ = integrate.quad(lambda a: abs(math.cos(a)), 0.0, 2.0 * math.pi,
                                points=[math.pi / 2, 1.5 * math.pi], epsrel=1e-12)
        assert ref == pytest.approx(4.0, rel=1e-10)
        assert cos_power_integral(2, 0.5, 2.0) == pytest.approx(4.0, rel=1e-12)

    def test_n3_sp1_vs_angular_quadrature(self):
        # 2D angular quadrature of |cos s1|^1 * sin(s1) over
        # (0,pi) x (0,2pi), separable.
        s1, _ = integrate.quad(
            lambda a: abs(math.cos(a)) * math.sin(a), 0.0, math.pi,
            points=[math.pi / 2], epsrel=1e-12,
        )
        ref = s1 * 2.0 * math.pi
        assert cos_power_integral(3, 0.5, 2.0) == pytest.approx(ref, rel=1e-8)

    def test_normalization_identity(self):
        for n in range(2, 7):
            for s in S_GRID:
                for p in P_GRID:
                    val = (
                        kernel_constant(n, s, p)
                        / (2.0 * kernel_constant(1, s, p))
                        * cos_power_integral(n, s, p)
                    )
                    assert abs(val - 1.0) <= 1e-10

    def test_domain_error(self):
        with pytest.raises(ValueError):
            cos_power_integral(1, 0.5, 2.0)


class TestFracParams:
    def test_valid(self):
        fp = FracParams(n=3, s=0.5, p=2.0, m=1)
        assert fp.sp == 1.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n=0, s=0.5, p=2.0),
            dict(n=2, s=0.0, p=2.0),
            dict(n=2, s=1.0, p=2.0),
            dict(n=2, s=0.5, p=0.5),
            dict(n=2, s=0.5, p=2.0, m=2),
            dict(n=2, s=0.5, p=2.0, m=0),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            FracParams(**kwargs)
