"""Real-argument Bessel/Hankel evaluation and the 2D Helmholtz kernels.

Everything here is dependency-free (numpy only).  Accuracy target is
1e-10 relative (against a high-precision oracle) on the desk-scale
argument range, which is what the downstream Calderon / Mie tests need.

Evaluation strategy:
    J0, Y0, J1, Y1 : power series for x <= 18, Hankel asymptotic beyond.
    J_m            : Miller downward recurrence with sum normalization.
    Y_m            : upward recurrence seeded from Y0, Y1.
    K0, K1         : I-series for x <= 6, cosh-integral trapezoid for
                     6 < x < 13, asymptotic series beyond.
    K_m            : upward recurrence with an overflow guard.

Wavenumbers are either strictly positive reals or i*t with t > 0; the
kernels branch accordingly (H_0^(1) family vs. K_0 family).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.5772156649015328606

_SERIES_CUT = 14.0    # J/Y: series below, asymptotic above
_K_SERIES_CUT = 6.0   # K0/K1: I-series below
_K_ASYM_CUT = 13.0    # K0/K1: asymptotic above, cosh-integral between
MAX_ORDER = 60


class DomainError(ValueError):
    """Argument outside the supported domain of a special function."""


@dataclass(frozen=True)
class WaveNumber:
    """Wavenumber kappa, either kappa > 0 real or kappa = i*t with t > 0."""

    value: complex

    def __post_init__(self):
        v = complex(self.value)
        real_ok = v.imag == 0.0 and v.real > 0.0
        imag_ok = v.real == 0.0 and v.imag > 0.0
        if not (real_ok or imag_ok):
            raise ValueError(
                f"wavenumber must be positive real or purely imaginary, got {v}"
            )
        object.__setattr__(self, "value", v)

    @property
    def is_imaginary(self) -> bool:
        return self.value.real == 0.0

    @property
    def t(self) -> float:
        """The positive t in kappa = i*t (imaginary regime only)."""
        if not self.is_imaginary:
            raise ValueError("wavenumber is real, no imaginary parameter t")
        return self.value.imag

    @property
    def k(self) -> float:
        """The positive real wavenumber (real regime only)."""
        if self.is_imaginary:
            raise ValueError("wavenumber is imaginary")
        return self.value.real

    @property
    def square(self) -> complex:
        return self.value * self.value


def as_wavenumber(k) -> WaveNumber:
    if isinstance(k, WaveNumber):
        return k
    return WaveNumber(complex(k))


@dataclass(frozen=True)
class KernelEval:
    """Green kernel value and its n_y-directional derivative at one pair."""

    value: complex
    gradient_dot_normal: complex


# ---------------------------------------------------------------------------
# order-0 / order-1 evaluators (vectorized over x)
# ---------------------------------------------------------------------------
# Power series in q = x^2/4 with precomputed coefficients, evaluated by
# Horner with a degree picked from the largest argument (the tail of the
# J series at degree ceil(e sqrt(q)) + 12 is below 1e-17 relative).

def _series_coeffs(nmax: int = 46):
    j0c = np.empty(nmax)
    j1c = np.empty(nmax)
    y0c = np.empty(nmax)
    y1c = np.empty(nmax)
    fk = 1.0       # k!
    fk1 = 1.0      # (k+1)!
    h0, h1 = 0.0, 1.0
    sign = 1.0
    for k in range(nmax):
        if k > 0:
            fk *= k
            fk1 *= k + 1
            h0 += 1.0 / k
            h1 += 1.0 / (k + 1)
            sign = -sign
        j0c[k] = sign / (fk * fk)
        j1c[k] = sign / (fk * fk1)
        y0c[k] = -sign * h0 / (fk * fk)      # -(-1)^k H_k / (k!)^2
        y1c[k] = sign * (h0 + h1) / (fk * fk1)
    return j0c, j1c, y0c, y1c


_J0C, _J1C, _Y0C, _Y1C = _series_coeffs()


def _series_degree(qmax: float) -> int:
    return min(len(_J0C) - 1, int(np.ceil(2.72 * np.sqrt(max(qmax, 1.0)))) + 12)


def _horner(c, q, deg):
    acc = np.full_like(q, c[deg])
    for k in range(deg - 1, -1, -1):
        acc *= q
        acc += c[k]
    return acc


def _jy01_series(x, which=(True, True, True, True)):
    """(J0, J1, Y0, Y1) by power series; entries of `which` select outputs."""
    q = 0.25 * x * x
    deg = _series_degree(float(np.max(q, initial=0.0)))
    wj0, wj1, wy0, wy1 = which
    j0v = _horner(_J0C, q, deg) if (wj0 or wy0) else None
    j1v = 0.5 * x * _horner(_J1C, q, deg) if (wj1 or wy1) else None
    y0v = y1v = None
    if wy0 or wy1:
        lg = np.log(0.5 * x) + EULER_GAMMA
        if wy0:
            y0v = (2.0 / np.pi) * (lg * j0v + _horner(_Y0C, q, deg))
        if wy1:
            s1 = _horner(_Y1C, q, deg)
            y1v = (2.0 / np.pi) * (lg * j1v - 1.0 / x - 0.25 * x * s1)
    return j0v, j1v, y0v, y1v


def _j0_series(x):
    return _jy01_series(x, (True, False, False, False))[0]


def _j1_series(x):
    return _jy01_series(x, (False, True, False, False))[1]


def _y0_series(x):
    return _jy01_series(x, (True, False, True, False))[2]


def _y1_series(x):
    return _jy01_series(x, (False, True, False, True))[3]


def _hankel_pq(nu, x):
    """P_nu, Q_nu of the large-x Hankel expansion, truncated at minimal term."""
    p = np.ones_like(x)
    q = np.zeros_like(x)
    ak = 1.0
    xk = np.ones_like(x)
    four_nu2 = 4.0 * nu * nu
    prev = None
    for k in range(1, 30):
        ak = ak * (four_nu2 - (2 * k - 1) ** 2) / (8.0 * k)
        xk = xk / x
        term = ak * xk
        size = float(np.max(np.abs(term)))
        if prev is not None and size > prev:
            break
        prev = size
        m, r = divmod(k, 2)
        s = -1.0 if m % 2 else 1.0
        if r:  # odd k -> Q
            q = q + s * term
        else:  # even k -> P
            p = p + s * term
    return p, q


def _jy_asym(nu, x):
    p, q = _hankel_pq(nu, x)
    chi = x - (2 * nu + 1) * np.pi / 4.0
    amp = np.sqrt(2.0 / (np.pi * x))
    c, s = np.cos(chi), np.sin(chi)
    return amp * (p * c - q * s), amp * (p * s + q * c)


def _pair(x, f_series, f_asym):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    lo = x <= _SERIES_CUT
    if np.any(lo):
        out[lo] = f_series(x[lo])
    if np.any(~lo):
        out[~lo] = f_asym(x[~lo])
    return out


def j0(x):
    """J_0(x), vectorized, x >= 0."""
    return _pair(x, _j0_series, lambda t: _jy_asym(0, t)[0])


def j1(x):
    return _pair(x, _j1_series, lambda t: _jy_asym(1, t)[0])


def y0(x):
    """Y_0(x), vectorized, x > 0."""
    return _pair(x, _y0_series, lambda t: _jy_asym(0, t)[1])


def y1(x):
    return _pair(x, _y1_series, lambda t: _jy_asym(1, t)[1])


def _i0_series(x):
    q = 0.25 * x * x
    term = np.ones_like(x)
    acc = np.ones_like(x)
    for k in range(1, 46):
        term = term * q / (k * k)
        acc += term
    return acc


def _i1_series(x):
    q = 0.25 * x * x
    term = np.ones_like(x)
    acc = np.ones_like(x)
    for k in range(1, 46):
        term = term * q / (k * (k + 1.0))
        acc += term
    return 0.5 * x * acc


def _k0_series(x):
    q = 0.25 * x * x
    term = np.ones_like(x)
    acc = np.zeros_like(x)
    h = 0.0
    for k in range(1, 46):
        term = term * q / (k * k)
        h += 1.0 / k
        acc += term * h
    return -(np.log(0.5 * x) + EULER_GAMMA) * _i0_series(x) + acc


def _k1_series(x):
    # A&S 9.6.11 for nu = 1
    q = 0.25 * x * x
    term = np.ones_like(x)
    h0, h1 = 0.0, 1.0
    acc = (h0 + h1) * np.ones_like(x)
    for k in range(1, 46):
        term = term * q / (k * (k + 1.0))
        h0 += 1.0 / k
        h1 += 1.0 / (k + 1.0)
        acc += (h0 + h1) * term
    return (np.log(0.5 * x) + EULER_GAMMA) * _i1_series(x) + 1.0 / x \
        - 0.25 * x * acc


def _k_coshint(x, weight_cosh):
    """Trapezoid on K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt."""
    h = 0.1
    tmax = np.arccosh(46.0 / np.min(x)) if np.min(x) < 46.0 else 1.0
    t = np.arange(0.0, tmax + h, h)
    w = np.full_like(t, h)
    w[0] = 0.5 * h
    ct = np.cosh(t)
    f = np.exp(-np.outer(x, ct))
    if weight_cosh:
        f = f * ct
    return f @ w


def _k_asym(nu, x):
    ak = 1.0
    xk = np.ones_like(x)
    acc = np.ones_like(x)
    four_nu2 = 4.0 * nu * nu
    prev = None
    for k in range(1, 30):
        ak = ak * (four_nu2 - (2 * k - 1) ** 2) / (8.0 * k)
        xk = xk / x
        term = ak * xk
        size = float(np.max(np.abs(term)))
        if prev is not None and size > prev:
            break
        prev = size
        acc = acc + term
    return np.sqrt(np.pi / (2.0 * x)) * np.exp(-x) * acc


def _k_piecewise(x, nu):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    lo = x <= _K_SERIES_CUT
    hi = x >= _K_ASYM_CUT
    mid = ~lo & ~hi
    series = _k0_series if nu == 0 else _k1_series
    if np.any(lo):
        out[lo] = series(x[lo])
    if np.any(mid):
        out[mid] = _k_coshint(x[mid], weight_cosh=(nu == 1))
    if np.any(hi):
        out[hi] = _k_asym(nu, x[hi])
    return out


def k0(x):
    """K_0(x), vectorized, x > 0."""
    return _k_piecewise(x, 0)


def k1(x):
    return _k_piecewise(x, 1)


# ---------------------------------------------------------------------------
# general integer order
# ---------------------------------------------------------------------------

def jn_all(mmax: int, x) -> np.ndarray:
    """J_m(x) for m = 0..mmax, Miller downward recurrence.

    Returns an array of shape (mmax + 1,) + x.shape; valid for x >= 0.
    """
    if mmax > MAX_ORDER:
        raise DomainError(f"order {mmax} exceeds cap {MAX_ORDER}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((mmax + 1,) + x.shape)
    tiny = np.abs(x) < 1e-300
    if np.any(tiny):
        out[0][tiny] = 1.0
    act = ~tiny
    if np.any(act):
        xa = x[act]
        start = int(max(mmax, np.ceil(1.2 * np.max(xa)))) + 26 \
            + int(2.0 * np.sqrt(max(mmax, 10)))
        if start % 2:
            start += 1
        jp = np.zeros_like(xa)
        jc = np.full_like(xa, 1e-30)
        norm = np.zeros_like(xa)
        cols = np.zeros((mmax + 1,) + xa.shape)
        for m in range(start, 0, -1):
            jm = (2.0 * m / xa) * jc - jp
            jp, jc = jc, jm
            # renormalize to avoid overflow on long recurrences
            big = np.abs(jc) > 1e250
            if np.any(big):
                jc[big] *= 1e-250
                jp[big] *= 1e-250
                norm[big] *= 1e-250
                cols[:, big] *= 1e-250
            if m - 1 <= mmax:
                cols[m - 1] = jc
            if (m - 1) % 2 == 0 and m - 1 > 0:
                norm += 2.0 * jc
        norm += jc  # J_0 term of J0 + 2*sum J_{2k} = 1
        out[:, act] = cols / norm
    return out


def yn_all(mmax: int, x) -> np.ndarray:
    """Y_m(x) for m = 0..mmax by upward recurrence; x > 0."""
    if mmax > MAX_ORDER:
        raise DomainError(f"order {mmax} exceeds cap {MAX_ORDER}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0.0):
        raise DomainError("Y_m requires x > 0")
    out = np.zeros((mmax + 1,) + x.shape)
    out[0] = y0(x)
    if mmax >= 1:
        out[1] = y1(x)
    for m in range(1, mmax):
        out[m + 1] = (2.0 * m / x) * out[m] - out[m - 1]
    return out


def kn_all(mmax: int, x) -> np.ndarray:
    """K_m(x) for m = 0..mmax by upward recurrence; x > 0.

    Raises OverflowError when the recurrence exceeds the double range
    (large order together with small argument).
    """
    if mmax > MAX_ORDER:
        raise DomainError(f"order {mmax} exceeds cap {MAX_ORDER}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0.0):
        raise DomainError("K_m requires x > 0")
    out = np.zeros((mmax + 1,) + x.shape)
    out[0] = k0(x)
    if mmax >= 1:
        out[1] = k1(x)
    for m in range(1, mmax):
        out[m + 1] = out[m - 1] + (2.0 * m / x) * out[m]
        if not np.all(np.isfinite(out[m + 1])) or np.any(out[m + 1] > 1e260):
            raise OverflowError(
                f"K_{m + 1} overflows at x = {float(np.min(x)):g}"
            )
    return out


def bessel(kind: str, order: int, x: float) -> float:
    """Bessel function of kind 'J', 'Y' or 'K', integer order >= 0.

    J accepts x >= 0; Y and K require x > 0.  Orders are capped at 60.
    """
    if kind not in ("J", "Y", "K"):
        raise ValueError(f"kind must be 'J', 'Y' or 'K', got {kind!r}")
    if order < 0 or order > MAX_ORDER:
        raise DomainError(f"order must be in [0, {MAX_ORDER}], got {order}")
    x = float(x)
    if kind == "J":
        if x < 0.0:
            raise DomainError("J_m requires x >= 0")
        return float(jn_all(order, np.array([x]))[order][0])
    if x <= 0.0:
        raise DomainError(f"{kind}_m requires x > 0")
    table = yn_all if kind == "Y" else kn_all
    return float(table(order, np.array([x]))[order][0])


def hankel1(order: int, x: float) -> complex:
    """H_m^(1)(x) = J_m(x) + i Y_m(x) for x > 0."""
    if x <= 0.0:
        raise DomainError("hankel1 requires x > 0")
    return bessel("J", order, x) + 1j * bessel("Y", order, x)


def h0_h1(x):
    """H_0^(1) and H_1^(1) on an array, the kernel workhorse."""
    x = np.asarray(x, dtype=float)
    return j0(x) + 1j * y0(x), j1(x) + 1j * y1(x)


# ---------------------------------------------------------------------------
# 2D Helmholtz kernels
# ---------------------------------------------------------------------------

def green_vals(k: WaveNumber, r) -> np.ndarray:
    """G_kappa(r) on an array of separation distances r > 0.

    Real kappa: (i/4) H_0^(1)(kappa r); kappa = i t: K_0(t r)/(2 pi).
    Both solve (-Lap - kappa^2) G = delta in 2D and share the
    -(1/2pi) log r singularity at r = 0.
    """
    r = np.asarray(r, dtype=float)
    if k.is_imaginary:
        return k0(k.t * r) / (2.0 * np.pi) + 0.0j
    h0 = j0(k.k * r) + 1j * y0(k.k * r)
    return 0.25j * h0


def grad_green_coeff(k: WaveNumber, r) -> np.ndarray:
    """c(r) with (grad G)(z) = c(|z|) * z, i.e. c = G'(r)/r."""
    r = np.asarray(r, dtype=float)
    if k.is_imaginary:
        t = k.t
        return -(t / (2.0 * np.pi)) * k1(t * r) / r + 0.0j
    kk = k.k
    h1 = j1(kk * r) + 1j * y1(kk * r)
    return -0.25j * kk * h1 / r


def hess_green_coeffs(k: WaveNumber, r):
    """(c1, c2) with Hess G(z) = c1*I + c2*rhat rhat^T, rhat = z/|z|.

    c1 = G'(r)/r and c2 = G''(r) - G'(r)/r.
    """
    r = np.asarray(r, dtype=float)
    if k.is_imaginary:
        t = k.t
        x = t * r
        kk0, kk1 = k0(x), k1(x)
        c1 = -(t / (2.0 * np.pi)) * kk1 / r
        # K1'(x) = -K0(x) - K1(x)/x
        gpp = (t * t / (2.0 * np.pi)) * (kk0 + kk1 / x)
        return c1 + 0.0j, gpp - c1 + 0.0j
    kk = k.k
    x = kk * r
    hh0, hh1 = h0_h1(x)
    c1 = -0.25j * kk * hh1 / r
    # H1'(x) = H0(x) - H1(x)/x
    gpp = -0.25j * kk * kk * (hh0 - hh1 / x)
    return c1, gpp - c1


def green_and_grad(k: WaveNumber, r):
    """(G(r), c(r)) with c = G'(r)/r, sharing the Bessel evaluations.

    This is the assembly hot path; the piecewise series/asymptotic split
    is done once for all four order-0/1 functions.
    """
    r = np.asarray(r, dtype=float)
    if k.is_imaginary:
        t = k.t
        x = t * r
        g = k0(x) / (2.0 * np.pi) + 0.0j
        c = -(t / (2.0 * np.pi)) * k1(x) / r + 0.0j
        return g, c
    x = k.k * r
    j0v = np.empty_like(x)
    j1v = np.empty_like(x)
    y0v = np.empty_like(x)
    y1v = np.empty_like(x)
    lo = x <= _SERIES_CUT
    if np.any(lo):
        xs = x[lo]
        a, b, c_, d = _jy01_series(xs)
        j0v[lo], j1v[lo], y0v[lo], y1v[lo] = a, b, c_, d
    hi = ~lo
    if np.any(hi):
        xh = x[hi]
        j0v[hi], y0v[hi] = _jy_asym(0, xh)
        j1v[hi], y1v[hi] = _jy_asym(1, xh)
    g = 0.25j * (j0v + 1j * y0v)
    c = -0.25j * k.k * (j1v + 1j * y1v) / r
    return g, c


def green_kernel(k, r: float) -> complex:
    """Scalar Green kernel; domain error for r <= 0."""
    if r <= 0.0:
        raise DomainError("green_kernel requires r > 0")
    return complex(green_vals(as_wavenumber(k), np.array([r]))[0])


def green_log_remainder(k: WaveNumber, r) -> np.ndarray:
    """G_kappa(r) + (1/2pi) log r, the smooth part of the kernel."""
    r = np.asarray(r, dtype=float)
    return green_vals(k, r) + np.log(r) / (2.0 * np.pi)


def dl_kernel(k, x, y, n_y) -> complex:
    """Double layer kernel n_y . (grad G)(x - y) with the sign convention
    that makes the representation formula read U = DL(u) + SL(p).

    For real kappa this is -(i kappa/4) H_1^(1)(kappa|x-y|) n_y.(x-y)/|x-y|.
    """
    k = as_wavenumber(k)
    z = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = float(np.hypot(z[0], z[1]))
    if r == 0.0:
        raise DomainError("dl_kernel requires x != y")
    c = grad_green_coeff(k, np.array([r]))[0]
    return complex(c * (n_y[0] * z[0] + n_y[1] * z[1]))


def kernel_eval(k, x, y, n_y) -> KernelEval:
    """Green kernel value and n_y-derivative at a single point pair."""
    k = as_wavenumber(k)
    z = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = float(np.hypot(z[0], z[1]))
    if r == 0.0:
        raise DomainError("kernel_eval requires x != y")
    return KernelEval(
        value=complex(green_vals(k, np.array([r]))[0]),
        gradient_dot_normal=dl_kernel(k, x, y, n_y),
    )
