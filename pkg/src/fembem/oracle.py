"""Analytic references and experiment drivers.

The Mie solver handles the two-interface concentric benchmark (disk of
radius a with constant kappa_sigma, annulus a<r<b with kappa_1, free
space kappa_0) by per-mode 4x4 matching of value and radial derivative;
it is the independent oracle behind the convergence acceptance run.
Disk resonance targets come from Bessel zeros, and the sweep driver
records sigma_min of an assembled formulation along a wavenumber grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import formulations as fm
from .linalg import sigma_extremes
from .special import jn_all, yn_all


def _jy_with_derivs(mmax: int, x: np.ndarray):
    J = jn_all(mmax + 1, x)
    Y = yn_all(mmax + 1, x)
    m = np.arange(mmax + 1)[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        Jp = np.where(m == 0, -J[1], J[np.maximum(m[:, 0] - 1, 0)] - m / x * J[:-1])
        Yp = np.where(m == 0, -Y[1], Y[np.maximum(m[:, 0] - 1, 0)] - m / x * Y[:-1])
    return J[:-1], Jp, Y[:-1], Yp


@dataclass
class MieSolution:
    """Per-mode coefficients of the concentric transmission problem.

    coeff[m] holds (a_m, b_m, c_m, d_m) for modes m = 0..M; negative
    modes reuse them scaled by the incident factors (the radial systems
    depend on |m| only).
    """

    a: float
    b: float
    k_sigma: float
    k1: float
    k0: float
    wave: fm.IncidentWave
    truncation: int
    unit_coeffs: np.ndarray   # (M+1, 4) for unit incident factor

    def _inc_factor(self, m: int) -> complex:
        # plane wave: sum over m of i^m J_m e^{im(phi-phi_d)}; expressing
        # the negative orders through J_{|m|} = (-1)^m J_m leaves i^{|m|}
        phi_d = np.arctan2(self.wave.direction[1], self.wave.direction[0])
        return self.wave.amplitude * 1j ** abs(m) * np.exp(-1j * m * phi_d)

    def total_field(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        out = np.zeros(len(pts), dtype=complex)
        M = self.truncation
        zones = [r < self.a, (r >= self.a) & (r < self.b), r >= self.b]
        vals = np.zeros((M + 1, len(pts)), dtype=complex)  # per |m| radial part
        for zid, mask in enumerate(zones):
            if not np.any(mask):
                continue
            rr = r[mask]
            if zid == 0:
                J, _, _, _ = _jy_with_derivs(M, self.k_sigma * rr)
                vals[:, mask] = self.unit_coeffs[:, 0:1] * J
            elif zid == 1:
                J, _, Y, _ = _jy_with_derivs(M, self.k1 * rr)
                vals[:, mask] = self.unit_coeffs[:, 1:2] * J \
                    + self.unit_coeffs[:, 2:3] * Y
            else:
                # exterior: exact incident field plus the scattered series
                J, _, Y, _ = _jy_with_derivs(M, self.k0 * rr)
                H = J + 1j * Y
                vals[:, mask] = self.unit_coeffs[:, 3:4] * H
                out[mask] += self.wave.field(pts[mask])
        for m in range(-M, M + 1):
            out += self._inc_factor(m) * vals[abs(m)] * np.exp(1j * m * phi)
        return out

    def radial_derivative(self, radius: float, angles: np.ndarray) -> np.ndarray:
        """d/dr of the total field on a circle (outside zone)."""
        if radius < self.b:
            raise ValueError("radial derivative implemented for r >= b")
        M = self.truncation
        x = np.array([self.k0 * radius])
        J, Jp, Y, Yp = _jy_with_derivs(M, x)
        Hp = Jp + 1j * Yp
        der = self.k0 * self.unit_coeffs[:, 3] * Hp[:, 0]
        out = np.zeros(len(angles), dtype=complex)
        for m in range(-M, M + 1):
            out += self._inc_factor(m) * der[abs(m)] * np.exp(1j * m * angles)
        # exact radial derivative of the incident plane wave
        d = np.asarray(self.wave.direction)
        pts = radius * np.column_stack([np.cos(angles), np.sin(angles)])
        rhat = pts / radius
        out += 1j * self.k0 * (rhat @ d) * self.wave.field(pts)
        return out


def mie_transmission(a: float, b: float, k_sigma: float, k1: float,
                     k0: float, wave: fm.IncidentWave,
                     tol: float = 1e-12) -> MieSolution:
    """Solve the concentric two-interface transmission problem."""
    if not 0 < a < b:
        raise ValueError("radii must satisfy 0 < a < b")
    if abs(wave.k0 - k0) > 1e-14:
        raise ValueError("incident wavenumber must match k0")
    # truncation start: largest interior argument must clear the J tail
    from math import lgamma
    xmax = max(k_sigma, k1, k0) * b
    M = 8
    while M * np.log(max(xmax, 1e-9) / 2.0) - lgamma(M + 1) > np.log(tol) \
            and M < 80:
        M += 1
    M = max(M, int(np.ceil(k0 * b)) + 6)
    while True:
        coeffs = _mie_modes(a, b, k_sigma, k1, k0, M)
        # adaptive truncation: the physical scattered tail d_m H_m(k0 b)
        # must fall below tol (H_m grows rapidly with the order)
        xb = k0 * np.array([b])
        J, _, Y, _ = _jy_with_derivs(M, xb)
        tail = np.abs(coeffs[-3:, 3] * (J + 1j * Y)[-3:, 0]).max()
        if tail <= tol or M > 80:
            break
        M += 5
    return MieSolution(a=a, b=b, k_sigma=k_sigma, k1=k1, k0=k0, wave=wave,
                       truncation=M, unit_coeffs=coeffs)


def _mie_modes(a, b, ks, k1, k0, M) -> np.ndarray:
    xa_s = ks * np.array([a])
    xa_1 = k1 * np.array([a])
    xb_1 = k1 * np.array([b])
    xb_0 = k0 * np.array([b])
    Js_a, Jps_a, _, _ = _jy_with_derivs(M, xa_s)
    J1_a, Jp1_a, Y1_a, Yp1_a = _jy_with_derivs(M, xa_1)
    J1_b, Jp1_b, Y1_b, Yp1_b = _jy_with_derivs(M, xb_1)
    J0_b, Jp0_b, Y0_b, Yp0_b = _jy_with_derivs(M, xb_0)
    H0_b, Hp0_b = J0_b + 1j * Y0_b, Jp0_b + 1j * Yp0_b
    out = np.zeros((M + 1, 4), dtype=complex)
    for m in range(M + 1):
        A = np.array([
            [Js_a[m, 0], -J1_a[m, 0], -Y1_a[m, 0], 0.0],
            [ks * Jps_a[m, 0], -k1 * Jp1_a[m, 0], -k1 * Yp1_a[m, 0], 0.0],
            [0.0, J1_b[m, 0], Y1_b[m, 0], -H0_b[m, 0]],
            [0.0, k1 * Jp1_b[m, 0], k1 * Yp1_b[m, 0], -k0 * Hp0_b[m, 0]],
        ], dtype=complex)
        rhs = np.array([0.0, 0.0, J0_b[m, 0], k0 * Jp0_b[m, 0]],
                       dtype=complex)
        try:
            out[m] = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as e:
            raise RuntimeError(f"near-singular Mie mode system at m={m}") from e
    return out


def bessel_zero(m: int, k: int) -> float:
    """k-th positive zero of J_m, bisection refined to |J_m| <= 1e-13."""
    if not (0 <= m <= 20 and 1 <= k <= 10):
        raise ValueError("supported range: m <= 20, k <= 10")
    x = np.linspace(max(m, 1e-3), m + 3 + (k + 2) * np.pi, 4000)
    vals = jn_all(m, x)[m]
    sign_changes = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if len(sign_changes) < k:
        raise RuntimeError("bracketing failed")
    lo, hi = x[sign_changes[k - 1]], x[sign_changes[k - 1] + 1]
    f = lambda t: float(jn_all(m, np.array([t]))[m][0])
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm_ = f(mid)
        if flo * fm_ <= 0.0:
            hi = mid
        else:
            lo, flo = mid, fm_
        if hi - lo < 1e-15 * hi:
            break
    root = 0.5 * (lo + hi)
    assert abs(f(root)) <= 1e-12
    return root


# ---------------------------------------------------------------------------
# experiment drivers
# ---------------------------------------------------------------------------

@dataclass
class SweepRow:
    k0: float
    sigma_min: float
    condition: float
    kind: str


@dataclass
class ResonanceSweepResult:
    rows: list[SweepRow]

    def sigma_at(self, k0: float) -> float:
        i = int(np.argmin([abs(r.k0 - k0) for r in self.rows]))
        return self.rows[i].sigma_min


WorkbenchBuilder = Callable[[float], fm.Workbench]


def sweep_sigma_min(kind: str, builder: WorkbenchBuilder,
                    k0_grid: np.ndarray) -> ResonanceSweepResult:
    """Assemble the formulation on each grid wavenumber and record
    sigma_min and a condition estimate; never solves."""
    k0_grid = np.asarray(k0_grid, dtype=float)
    if len(k0_grid) < 3 or np.any(np.diff(k0_grid) <= 0):
        raise ValueError("need an increasing grid of at least 3 points")
    rows = []
    for k0 in k0_grid:
        wb = builder(float(k0))
        wave = fm.IncidentWave(k0=float(k0))
        system = fm.assemble(kind, wb, wave)
        smin, smax = sigma_extremes(system.matrix)
        rows.append(SweepRow(k0=float(k0), sigma_min=smin,
                             condition=smax / smin, kind=kind))
    return ResonanceSweepResult(rows=rows)


@dataclass
class ConvergenceRow:
    h: float
    rel_l2_error: float


@dataclass
class ConvergenceResult:
    rows: list[ConvergenceRow]
    estimated_order: float


def probe_circle_error(bundle: fm.SolutionBundle, mie: MieSolution,
                       radius: float, n_angles: int = 256) -> float:
    """Relative L2 error of the reconstructed total field against the
    Mie oracle on a probe circle (trapezoid in angle)."""
    ang = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
    pts = radius * np.column_stack([np.cos(ang), np.sin(ang)])
    got = fm.reconstruct(bundle, pts)
    ref = mie.total_field(pts)
    return float(np.sqrt(np.sum(np.abs(got - ref) ** 2)
                         / np.sum(np.abs(ref) ** 2)))


def convergence_study(kind: str, builder: Callable[[int], fm.Workbench],
                      wave: fm.IncidentWave, mie: MieSolution,
                      levels: int, probe_radius: float) -> ConvergenceResult:
    """Solve at `levels` refinements (level L doubles level L-1) and
    report probe-circle errors and the least-squares order."""
    if levels < 3:
        raise ValueError("need at least 3 levels")
    rows = []
    for lev in range(levels):
        wb = builder(lev)
        system = fm.assemble(kind, wb, wave)
        bundle = fm.solve(system, wb, wave)
        h = float(np.max(wb.part.sigma.lengths))
        rows.append(ConvergenceRow(h=h, rel_l2_error=probe_circle_error(
            bundle, mie, probe_radius)))
    hs = np.log([r.h for r in rows])
    es = np.log([r.rel_l2_error for r in rows])
    order = float(np.polyfit(hs, es, 1)[0])
    return ConvergenceResult(rows=rows, estimated_order=order)


def mie_flux_balance(mie: MieSolution, radius: float = 3.0) -> float:
    """Net energy flux of the total field through a circle; zero for a
    lossless scatterer (optical-theorem-style sanity)."""
    ang = np.linspace(0.0, 2.0 * np.pi, 512, endpoint=False)
    pts = radius * np.column_stack([np.cos(ang), np.sin(ang)])
    u = mie.total_field(pts)
    du = mie.radial_derivative(radius, ang)
    flux = np.imag(np.conj(u) @ du) * (2.0 * np.pi * radius / len(ang))
    scale = np.max(np.abs(u)) * np.max(np.abs(du)) * 2.0 * np.pi * radius
    return float(abs(flux) / scale)
