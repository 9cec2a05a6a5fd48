"""Tests for Bessel/Hankel evaluation and the 2D Helmholtz kernels.

Expected values are frozen from independent oracles: a truncated power
series for J_0, a Gauss-Legendre cosh-integral for K_0, and bisection on
the J_0 series for its first zero.  mpmath provides the high-precision
sweep oracle for the Wronskian and high-order checks.
"""

import math

import mpmath as mp
import numpy as np
import pytest

from fembem import special as sf

mp.mp.dps = 30


# --- independent oracles ----------------------------------------------------

def j0_series_oracle(x: float, terms: int = 30) -> float:
    q = 0.25 * x * x
    term, acc = 1.0, 1.0
    for k in range(1, terms):
        term *= -q / (k * k)
        acc += term
    return acc


def k0_quadrature_oracle(x: float) -> float:
    """K_0(x) = int_0^inf exp(-x cosh t) dt by panelwise 40-point Gauss."""
    nodes, weights = np.polynomial.legendre.leggauss(40)
    tmax = math.acosh(46.0 / x)
    total = 0.0
    for a, b in zip(np.linspace(0, tmax, 5)[:-1], np.linspace(0, tmax, 5)[1:]):
        t = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        total += 0.5 * (b - a) * np.sum(weights * np.exp(-x * np.cosh(t)))
    return total


def j0_zero_oracle() -> float:
    lo, hi = 2.0, 3.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if j0_series_oracle(lo) * j0_series_oracle(mid) <= 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# --- spec examples ----------------------------------------------------------

def test_bessel_j0_at_zero():
    assert sf.bessel("J", 0, 0.0) == 1.0


def test_bessel_j0_at_one_matches_series_oracle():
    assert sf.bessel("J", 0, 1.0) == pytest.approx(j0_series_oracle(1.0), rel=1e-12)
    assert sf.bessel("J", 0, 1.0) == pytest.approx(0.7651976865579666, rel=1e-12)


def test_bessel_k0_at_one_matches_quadrature_oracle():
    assert sf.bessel("K", 0, 1.0) == pytest.approx(k0_quadrature_oracle(1.0), rel=1e-10)
    assert sf.bessel("K", 0, 1.0) == pytest.approx(0.42102443824070834, rel=1e-12)


def test_bessel_relative_accuracy_sweep():
    # 1e-10 relative to an amplitude envelope, per the oscillatory regime
    xs = np.linspace(0.01, 60.0, 91)
    for kind, ref in [("J", mp.besselj), ("Y", mp.bessely), ("K", mp.besselk)]:
        for m in (0, 1, 2, 7, 20):
            for x in xs:
                r = float(ref(m, x))
                v = sf.bessel(kind, m, float(x))
                env = max(abs(r), math.sqrt(2.0 / (math.pi * x)))
                if kind == "K" and r > 1e200:
                    continue
                assert abs(v - r) <= 1e-10 * env, (kind, m, x)


def test_bessel_domain_errors():
    with pytest.raises(sf.DomainError):
        sf.bessel("Y", 0, 0.0)
    with pytest.raises(sf.DomainError):
        sf.bessel("K", 1, -1.0)
    with pytest.raises(sf.DomainError):
        sf.bessel("J", 0, -0.5)
    with pytest.raises(sf.DomainError):
        sf.bessel("J", 61, 1.0)


def test_bessel_k_overflow_guard():
    with pytest.raises(OverflowError):
        sf.bessel("K", 60, 1e-3)


def test_hankel1_is_j_plus_iy():
    for m in (0, 1, 3):
        for x in (0.3, 1.0, 7.7):
            h = sf.hankel1(m, x)
            assert h == complex(sf.bessel("J", m, x), sf.bessel("Y", m, x))


def test_hankel1_purely_imaginary_at_j0_zero():
    x0 = j0_zero_oracle()
    h = sf.hankel1(0, x0)
    assert abs(h.real) <= 1e-10 * abs(h.imag)


def test_hankel1_small_argument_growth():
    # |H_1| ~ 2/(pi x) for x -> 0, checked as a ratio
    for x in (1e-3, 1e-4):
        assert abs(sf.hankel1(1, x)) * (np.pi * x) / 2.0 == pytest.approx(1.0, rel=1e-2)
    with pytest.raises(sf.DomainError):
        sf.hankel1(0, 0.0)


def test_wronskian_identity():
    # J_m(x) Y_{m+1}(x) - J_{m+1}(x) Y_m(x) = -2/(pi x)
    xs = np.linspace(0.1, 50.0, 57)
    J = sf.jn_all(21, xs)
    Y = sf.yn_all(21, xs)
    for m in range(21):
        w = J[m] * Y[m + 1] - J[m + 1] * Y[m] if m < 21 else None
    for m in range(20 + 1):
        w = J[m] * Y[m + 1] - J[m + 1] * Y[m]
        ref = -2.0 / (np.pi * xs)
        assert np.max(np.abs(w - ref) / np.abs(ref)) <= 1e-9


# --- Green kernel -----------------------------------------------------------

def test_green_kernel_real_zero_at_j0_zero():
    x0 = j0_zero_oracle()
    k = sf.WaveNumber(2.0)
    g = sf.green_kernel(k, x0 / 2.0)  # k*r = j_{0,1}
    # real part of 4G/i is J0(kr) = 0
    assert abs((4.0 * g / 1j).real) <= 1e-10


def test_green_kernel_imaginary_wavenumber():
    g = sf.green_kernel(sf.WaveNumber(1j), 1.0)
    assert g.imag == 0.0
    assert g.real == pytest.approx(k0_quadrature_oracle(1.0) / (2 * np.pi), rel=1e-10)


def test_green_kernel_log_singularity_split():
    # G(r) + (1/2pi) log r approaches a finite limit on a geometric sequence
    k = sf.WaveNumber(1.0)
    rs = 10.0 ** -np.arange(2, 9)
    vals = sf.green_log_remainder(k, rs)
    diffs = np.abs(np.diff(vals))
    assert diffs[-1] < 1e-6
    assert np.all(diffs[1:] < diffs[:-1] + 1e-12)


def test_green_kernel_domain_error():
    with pytest.raises(sf.DomainError):
        sf.green_kernel(sf.WaveNumber(1.0), 0.0)


# --- double layer kernel ----------------------------------------------------

def test_dl_kernel_orthogonal_normal_vanishes():
    k = sf.WaveNumber(1.0)
    v = sf.dl_kernel(k, (1.0, 0.0), (0.0, 0.0), (0.0, 1.0))
    assert v == 0.0


def test_dl_kernel_linearity_in_normal():
    k = sf.WaveNumber(1.3)
    x, y = (0.7, 0.4), (-0.2, 0.1)
    n = (0.6, 0.8)
    v = sf.dl_kernel(k, x, y, n)
    v_neg = sf.dl_kernel(k, x, y, (-n[0], -n[1]))
    assert v_neg == -v


def test_dl_kernel_against_h1():
    # k=1, x-y=(1,0), n_y=(1,0) -> -(i/4) H_1^(1)(1)
    v = sf.dl_kernel(sf.WaveNumber(1.0), (1.0, 0.0), (0.0, 0.0), (1.0, 0.0))
    ref = -0.25j * sf.hankel1(1, 1.0)
    assert v == pytest.approx(ref, rel=1e-12)


def test_dl_kernel_odd_under_argument_exchange():
    k = sf.WaveNumber(2.0)
    x, y, n = (0.5, 0.2), (-0.1, 0.9), (0.0, 1.0)
    assert sf.dl_kernel(k, x, y, n) == pytest.approx(-sf.dl_kernel(k, y, x, n), rel=1e-14)


def test_kernel_eval_pair():
    ke = sf.kernel_eval(1.0, (1.0, 0.0), (0.0, 0.0), (1.0, 0.0))
    assert ke.value == pytest.approx(0.25j * sf.hankel1(0, 1.0), rel=1e-12)
    assert ke.gradient_dot_normal == pytest.approx(-0.25j * sf.hankel1(1, 1.0), rel=1e-12)
    with pytest.raises(sf.DomainError):
        sf.kernel_eval(1.0, (1.0, 0.0), (1.0, 0.0), (1.0, 0.0))


# --- wavenumber type --------------------------------------------------------

def test_wavenumber_validation():
    sf.WaveNumber(2.5)
    sf.WaveNumber(1j)
    for bad in (0.0, -1.0, 1 + 1j, -2j):
        with pytest.raises(ValueError):
            sf.WaveNumber(bad)


def test_hess_green_consistency_fd():
    # Hessian coefficients agree with finite differences of grad G
    for k in (sf.WaveNumber(1.7), sf.WaveNumber(1j)):
        r = 0.8
        h = 1e-6
        c1, c2 = (c[0] for c in sf.hess_green_coeffs(k, np.array([r])))
        # d/dr of G'(r): G'' = c1 + c2
        def gp(rr):
            return sf.grad_green_coeff(k, np.array([rr]))[0] * rr
        gpp_fd = (gp(r + h) - gp(r - h)) / (2 * h)
        assert c1 + c2 == pytest.approx(gpp_fd, rel=1e-8)
