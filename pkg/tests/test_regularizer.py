"""Regularizing operator M and the coupling operator C."""

import numpy as np
import pytest

from fembem import geometry as geo
from fembem import regularizer as reg
from fembem import traces as tr


@pytest.fixture(scope="module")
def sigma64():
    mesh = geo.circle_mesh(1.0, 64)
    return mesh, reg.assemble_M(mesh)


def test_im_positivity_random(sigma64):
    mesh, m = sigma64
    rng = np.random.default_rng(42)
    for _ in range(100):
        phi = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        val = m.dual_pairing(phi, np.conj(phi))
        assert val.imag > 0.0


def test_im_positivity_rayleigh_spectrum(sigma64):
    # the Gram form B (S+Mm)^{-1} B^T is PSD with exactly the alternating
    # mixed-mass kernel as null space (even panel count)
    mesh, m = sigma64
    G = m.B @ np.linalg.solve(m.SM, m.B.T)
    eig = np.linalg.eigvalsh(0.5 * (G + G.T))
    assert eig[0] >= -1e-12
    assert eig[0] < 1e-14  # alternating mode
    assert eig[1] > 1e-8
    alt = np.cos(np.pi * np.arange(64))
    assert np.linalg.norm(m.B.T @ alt) < 1e-12


def test_constant_density_maps_to_i(sigma64):
    # -Lap_Sigma 1 = 0, so (S+Mm) w = B^T 1 recovers w ~ 1 and M 1 ~ i
    mesh, m = sigma64
    w = m.apply(np.ones(64))
    assert np.max(np.abs(w - 1j)) <= 1e-10


def test_M_complex_symmetric(sigma64):
    mesh, m = sigma64
    rng = np.random.default_rng(7)
    p = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    q = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    assert m.dual_pairing(q, p) == pytest.approx(m.dual_pairing(p, q), rel=1e-12)


def test_M_star_equals_M(sigma64):
    # M* = M for this choice; compared as functionals (B-weighted) and
    # pointwise after projecting out the alternating mixed-mass kernel
    mesh, m = sigma64
    rng = np.random.default_rng(3)
    for _ in range(5):
        p = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        star = reg.apply_M_star(m, p)
        direct = m.apply(p)
        scale = np.max(np.abs(m.B @ direct))
        assert np.max(np.abs(m.B @ (star - direct))) <= 1e-12 * scale
        alt = np.cos(np.pi * np.arange(64))
        alt /= np.linalg.norm(alt)
        proj = lambda v: v - alt * (alt @ v)
        assert np.max(np.abs(proj(star) - proj(direct))) <= 1e-10 * np.max(np.abs(direct))
    z = reg.apply_M_star(m, np.zeros(64))
    assert np.all(z == 0)
    two = reg.apply_M_star(m, 2.0 * p)
    assert np.allclose(two, 2.0 * star, rtol=1e-12, atol=0)


def test_M_open_curve_rejected():
    mesh = geo.circle_mesh(1.0, 16)
    open_mesh = geo.CurveMesh(mesh.vertices, mesh.panels[:-1])
    with pytest.raises(ValueError):
        reg.assemble_M(open_mesh)


@pytest.fixture(scope="module")
def halfdisk_C():
    part, _ = geo.make_halfdisk_config(1.0, 2.0, 16)
    stm = tr.SingleTraceDofMap(part)
    m = reg.assemble_M(part.sigma)
    C = reg.assemble_C(part, stm, m)
    return part, stm, m, C


def test_C_squared_zero_exactly(halfdisk_C):
    _, _, _, C = halfdisk_C
    assert np.all(C @ C == 0)


def test_C_trace_identities(halfdisk_C):
    # Tr_dir o C = M o Tr_nu and Tr_nu o C = 0 on free vectors
    part, stm, m, C = halfdisk_C
    rng = np.random.default_rng(11)
    free = rng.standard_normal(stm.n_free) + 1j * rng.standard_normal(stm.n_free)
    cf = C @ free
    t_c = stm.sigma_restriction(cf)
    t_nu = stm.sigma_restriction(free).neu
    want = m.apply(t_nu)
    assert np.max(np.abs(t_c.dir - want)) <= 1e-12 * np.max(np.abs(want))
    assert np.all(t_c.neu == 0)


def test_R_inverse_is_identity_minus_C(halfdisk_C):
    _, stm, _, C = halfdisk_C
    I = np.eye(stm.n_free)
    R = I + C
    Rinv = I - C
    assert np.max(np.abs(R @ Rinv - I)) <= 1e-13
    assert np.max(np.abs(Rinv @ R - I)) <= 1e-13
