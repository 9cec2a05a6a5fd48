"""Layer operator assembly: circle symbols, Calderon identities, jumps,
cross blocks with shared-panel corrections."""

import warnings

import numpy as np
import pytest

from fembem import bem
from fembem import geometry as geo
from fembem import special as sf
from fembem import traces as tr


def circle_symbols(m, k):
    """Reference Fourier symbols of V, K, Kp, W on the unit circle."""
    J = sf.jn_all(max(m, 0) + 1, np.array([k]))
    Y = sf.yn_all(max(m, 0) + 1, np.array([k]))
    Jm, Ym = J[m, 0], Y[m, 0]
    Jp = (J[m - 1, 0] - (m / k) * Jm) if m > 0 else -J[1, 0]
    Yp = (Y[m - 1, 0] - (m / k) * Ym) if m > 0 else -Y[1, 0]
    H, Hp = Jm + 1j * Ym, Jp + 1j * Yp
    V = 0.5j * np.pi * Jm * H
    K = -0.25j * np.pi * k * (Jp * H + Jm * Hp)
    W = -0.5j * np.pi * k * k * Jp * Hp
    return V, K, -K, W


def plane_wave_trace(mesh, k, d=(1.0, 0.0), amplitude=1.0):
    d = np.asarray(d, dtype=float)
    u = amplitude * np.exp(1j * k * (mesh.vertices @ d))
    p = amplitude * 1j * k * (mesh.normals @ d) \
        * np.exp(1j * k * (mesh.midpoints @ d))
    return tr.TraceVec(u, p)


@pytest.fixture(scope="module")
def circle256():
    mesh = geo.circle_mesh(1.0, 256)
    return mesh, bem.assemble_block(1.3, mesh)


def test_single_layer_circle_symbol(circle256):
    # A3 operation-level check: V on e^{im phi} matches (i pi/2) J_m H_m
    mesh, blk = circle256
    ang = np.arctan2(mesh.midpoints[:, 1], mesh.midpoints[:, 0])
    for m in range(5):
        p = np.exp(1j * m * ang)
        ref = circle_symbols(m, 1.3)[0]
        ratios = (blk.V @ p) / (mesh.lengths * p)
        val = np.median(ratios.real) + 1j * np.median(ratios.imag)
        assert abs(val - ref) <= 0.02 * abs(ref)


def test_all_blocks_circle_symbols(circle256):
    mesh, blk = circle256
    angm = np.arctan2(mesh.midpoints[:, 1], mesh.midpoints[:, 0])
    angv = np.arctan2(mesh.vertices[:, 1], mesh.vertices[:, 0])
    B = tr.mixed_mass(mesh)
    for m in (0, 2, 4):
        Vr, Kr, Kpr, Wr = circle_symbols(m, 1.3)
        p = np.exp(1j * m * angm)
        u = np.exp(1j * m * angv)
        bphi = B.T @ p
        for mat, vec, den, ref in [(blk.K, u, mesh.lengths * p, Kr),
                                   (blk.Kp, p, bphi, Kpr),
                                   (blk.W, u, bphi, Wr)]:
            ratios = (mat @ vec) / den
            val = np.median(ratios.real) + 1j * np.median(ratios.imag)
            assert abs(val - ref) <= 0.03 * abs(ref), m


@pytest.mark.parametrize("n", [64, 128])
def test_block_symmetry(n):
    # the [A.,.] form is symmetric; realized as the sign-normalized matrix
    mesh = geo.circle_mesh(1.0, n)
    blk = bem.assemble_block(2.0, mesh)
    S = blk.symmetrized()
    assert np.linalg.norm(S - S.T) <= 1e-10 * np.linalg.norm(S)


def _calderon_residual(n, k):
    mesh = geo.circle_mesh(1.0, n)
    blk = bem.assemble_block(k, mesh)
    tv = plane_wave_trace(mesh, k)
    Au = bem.apply_average_operator(blk, mesh, tv)
    num = np.sqrt(np.linalg.norm(Au.dir - 0.5 * tv.dir) ** 2
                  + np.linalg.norm(Au.neu - 0.5 * tv.neu) ** 2)
    den = np.sqrt(np.linalg.norm(tv.dir) ** 2 + np.linalg.norm(tv.neu) ** 2)
    return float(num / den)


def test_calderon_cauchy_data():
    # (A + 1/2) gamma u = gamma u for interior plane-wave Cauchy data
    res = {n: _calderon_residual(n, 2.0) for n in (64, 128, 256)}
    assert res[128] <= 0.05
    order = np.log(res[64] / res[256]) / np.log(4.0)
    assert order >= 1.5


def test_a_squared_is_quarter_identity():
    k = 2.0
    errs = []
    for n in (64, 128):
        mesh = geo.circle_mesh(1.0, n)
        blk = bem.assemble_block(k, mesh)
        tv = plane_wave_trace(mesh, k)
        once = bem.apply_average_operator(blk, mesh, tv)
        twice = bem.apply_average_operator(blk, mesh, once)
        num = np.sqrt(np.linalg.norm(twice.dir - 0.25 * tv.dir) ** 2
                      + np.linalg.norm(twice.neu - 0.25 * tv.neu) ** 2)
        den = np.sqrt(np.linalg.norm(tv.dir) ** 2 + np.linalg.norm(tv.neu) ** 2)
        errs.append(float(num / den))
    assert errs[-1] < errs[0]
    assert errs[-1] <= 0.05


def test_im_positivity_random_traces():
    rng = np.random.default_rng(42)
    for k in (1.0, 2.5):
        mesh = geo.circle_mesh(1.0, 64)
        blk = bem.assemble_block(k, mesh)
        P = blk.plain_bilinear()
        G = np.zeros_like(P, dtype=float)
        n = mesh.n_vertices
        G[:n, :n] = tr.p1_mass(mesh) + tr.p1_stiffness(mesh)
        G[n:, n:] = np.diag(mesh.lengths)
        for _ in range(100):
            c = rng.standard_normal(2 * n) + 1j * rng.standard_normal(2 * n)
            im = np.imag(np.conj(c) @ (P @ c))
            nrm = np.real(np.conj(c) @ (G @ c))
            assert im >= -1e-8 * nrm


def test_garding_at_imaginary_wavenumber():
    for n in (64, 128):
        mesh = geo.circle_mesh(1.0, n)
        blk = bem.assemble_block(sf.WaveNumber(1j), mesh)
        T = blk.bilinear
        H = 0.5 * (T + T.conj().T)
        assert np.linalg.eigvalsh(H).min() > 0.0


def test_eval_potential_representation():
    # interior plane-wave Cauchy data reproduces the wave inside,
    # zero outside
    k = 1.5
    mesh = geo.circle_mesh(1.0, 256)
    tv = plane_wave_trace(mesh, k)
    inside = np.array([[0.3, 0.1], [-0.2, 0.4]])
    vals = bem.eval_potential(k, mesh, tv, inside)
    exact = np.exp(1j * k * inside[:, 0])
    assert np.max(np.abs(vals - exact)) <= 0.01
    outside = np.array([[1.7, 0.3], [0.0, -2.5]])
    vals_out = bem.eval_potential(k, mesh, tv, outside)
    assert np.max(np.abs(vals_out)) <= 0.01
    zeros = bem.eval_potential(k, mesh, tr.TraceVec.zeros(mesh), inside)
    assert np.all(zeros == 0)


def test_eval_potential_warns_and_raises():
    mesh = geo.circle_mesh(1.0, 32)
    tv = tr.TraceVec.zeros(mesh)
    with pytest.raises(ValueError):
        bem.eval_potential(1.0, mesh, tv, mesh.vertices[:1])
    with pytest.warns(UserWarning):
        bem.eval_potential(1.0, mesh, tv,
                           np.array([[1.0 + 1e-4, 0.0]]))


def _bandlimited_trace(rng, mesh, mmax=4):
    angv = np.arctan2(mesh.vertices[:, 1], mesh.vertices[:, 0])
    angm = np.arctan2(mesh.midpoints[:, 1], mesh.midpoints[:, 0])
    u = np.zeros(mesh.n_vertices, complex)
    p = np.zeros(mesh.n_panels, complex)
    for m in range(-mmax, mmax + 1):
        cu = rng.standard_normal() + 1j * rng.standard_normal()
        cp = rng.standard_normal() + 1j * rng.standard_normal()
        u += cu * np.exp(1j * m * angv)
        p += cp * np.exp(1j * m * angm)
    return tr.TraceVec(u, p)


def test_jump_relations_near_boundary():
    rng = np.random.default_rng(42)
    k = 2.0
    mesh128 = geo.circle_mesh(1.0, 128)
    dens = _bandlimited_trace(rng, mesh128)
    r128 = bem.jump_test(k, mesh128, dens)
    assert r128 <= 0.05
    mesh64 = geo.circle_mesh(1.0, 64)
    r64 = bem.jump_test(k, mesh64, _bandlimited_trace(rng, mesh64))
    assert r128 < r64
    z = bem.jump_test(k, mesh128, tr.TraceVec.zeros(mesh128))
    assert np.isnan(z) or z == 0.0


# ---------------------------------------------------------------------------
# cross blocks
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def concentric():
    part, _ = geo.make_concentric_config(1.0, 2.0, 64, 128)
    return part


def test_cross_block_shared_correction_flag(concentric):
    part = concentric
    x = bem.assemble_cross(1.5, geo.SIGMA, 1, part)
    assert x.shared_panel_correction
    y = bem.assemble_cross(1.5, geo.SIGMA, 0, part)
    assert not y.shared_panel_correction
    assert np.all(np.isfinite(y.matrix))
    with pytest.raises(ValueError):
        bem.assemble_cross(1.5, 1, 1, part)


def _point_source_trace(mesh, k, src):
    """Trace pair of the outgoing fundamental solution centered at src,
    with respect to the mesh's own normals."""
    rv = mesh.vertices - src
    rm = mesh.midpoints - src
    u = sf.green_vals(sf.as_wavenumber(k), np.linalg.norm(rv, axis=1))
    c = sf.grad_green_coeff(sf.as_wavenumber(k), np.linalg.norm(rm, axis=1))
    p = c * np.sum(rm * mesh.normals, axis=1)
    return tr.TraceVec(u, p)


def test_cross_block_exterior_representation(concentric):
    # G^Sigma(gamma_c V) = -V outside Omega_Sigma for radiating V;
    # the tested cross block must reproduce -V on Gamma_1, including on
    # the panels Gamma_1 shares with Sigma.
    part = concentric
    k = 1.5
    src = np.array([0.2, -0.1])  # inside the disk
    sig, g1 = part.sigma, part.gamma[1]
    dens = _point_source_trace(sig, k, src)
    x = bem.assemble_cross(k, geo.SIGMA, 1, part)
    tested = x.matrix @ dens.packed()
    ref = _point_source_trace(g1, k, src)
    B = tr.mixed_mass(g1)
    want = np.concatenate([B.T @ (-ref.neu), B @ (-ref.dir)])
    scale = np.max(np.abs(want))
    assert np.max(np.abs(tested - want)) <= 2e-3 * scale


def test_cross_block_interior_data_annihilated(concentric):
    # interior Cauchy data on Sigma: the potential vanishes outside, so
    # every tested trace on Gamma_1 must be ~0 (exercises the +-1/2
    # shared-panel corrections)
    part = concentric
    k = 1.5
    sig, g1 = part.sigma, part.gamma[1]
    dens = plane_wave_trace(sig, k)
    x = bem.assemble_cross(k, geo.SIGMA, 1, part)
    tested = x.matrix @ dens.packed()
    B = tr.mixed_mass(g1)
    scale = np.max(np.abs(np.concatenate([B.T @ dens_neu_on(g1, k),
                                          B @ np.exp(1j * k * g1.vertices[:, 0])])))
    assert np.max(np.abs(tested)) <= 5e-3 * scale


def dens_neu_on(mesh, k):
    return 1j * k * (mesh.normals @ np.array([1.0, 0.0])) \
        * np.exp(1j * k * (mesh.midpoints @ np.array([1.0, 0.0])))


def test_matrix_dump_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    M = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    path = tmp_path / "m.txt"
    bem.dump_matrix(M, path)
    back = bem.load_matrix(path)
    assert np.array_equal(back, M)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        bem.QuadratureSpec(gauss_order=1)
    with pytest.raises(ValueError):
        bem.QuadratureSpec(self_panel_rule="bogus")
    q = bem.QuadratureSpec(self_panel_rule="graded-subdivision",
                           graded_levels=14)
    mesh = geo.circle_mesh(1.0, 64)
    blk_g = bem.assemble_block(1.3, mesh, q)
    blk_a = bem.assemble_block(1.3, mesh)
    # the two self-panel rules agree closely on V's diagonal
    dg = np.diag(blk_g.V)
    da = np.diag(blk_a.V)
    assert np.max(np.abs(dg - da)) <= 1e-6 * np.max(np.abs(da))


def test_open_mesh_rejected():
    mesh = geo.circle_mesh(1.0, 16)
    open_mesh = geo.CurveMesh(mesh.vertices, mesh.panels[:-1])
    with pytest.raises(ValueError):
        bem.assemble_block(1.0, open_mesh)
