"""Pairings, theta identities, single-trace embedding, modified polarity."""

import numpy as np
import pytest

from fembem import geometry as geo
from fembem import traces as tr


@pytest.fixture(scope="module")
def circle():
    return geo.circle_mesh(1.0, 64)


@pytest.fixture(scope="module")
def halfdisk_map():
    part, _ = geo.make_halfdisk_config(1.0, 2.0, 16)
    return part, tr.SingleTraceDofMap(part)


@pytest.fixture(scope="module")
def concentric_map():
    part, _ = geo.make_concentric_config(1.0, 2.0, 16, 16)
    return part, tr.SingleTraceDofMap(part)


def _rand_trace(rng, mesh):
    return tr.TraceVec(rng.standard_normal(mesh.n_vertices) * 1j
                       + rng.standard_normal(mesh.n_vertices),
                       rng.standard_normal(mesh.n_panels) * 1j
                       + rng.standard_normal(mesh.n_panels))


def test_pairing_skew_symmetry(circle):
    rng = np.random.default_rng(42)
    for _ in range(20):
        a = _rand_trace(rng, circle)
        b = _rand_trace(rng, circle)
        pab = tr.pairing_local(a, b, circle)
        pba = tr.pairing_local(b, a, circle)
        scale = tr.trace_norm(circle, a) * tr.trace_norm(circle, b)
        assert abs(pab + pba) <= 1e-13 * scale
        assert abs(tr.pairing_local(a, a, circle)) <= 1e-13 * scale


def test_pairing_constant_pair_is_perimeter(circle):
    # a = (1, 0), b = (0, 1): [a,b] = <1, 1> = perimeter of the 64-gon
    a = tr.TraceVec(np.ones(64), np.zeros(64))
    b = tr.TraceVec(np.zeros(64), np.ones(64))
    perim = 64 * 2 * np.sin(np.pi / 64)
    assert tr.pairing_local(a, b, circle) == pytest.approx(perim, rel=1e-14)
    fine = geo.circle_mesh(1.0, 4096)
    af = tr.TraceVec(np.ones(4096), np.zeros(4096))
    bf = tr.TraceVec(np.zeros(4096), np.ones(4096))
    assert tr.pairing_local(af, bf, fine) == pytest.approx(2 * np.pi, rel=1e-5)


def test_theta_definition_and_involution(circle):
    a = tr.TraceVec(np.array([1.0 + 0j] * 64), np.array([2.0 + 0j] * 64))
    th = tr.theta(a)
    assert np.all(th.dir == -1.0) and np.all(th.neu == 2.0)
    back = tr.theta(th)
    assert np.array_equal(back.dir, a.dir) and np.array_equal(back.neu, a.neu)


def test_theta_identities(circle):
    # [a, theta b] = <u,q> + <p,v>;  difference/sum identities
    rng = np.random.default_rng(7)
    for _ in range(10):
        a = _rand_trace(rng, circle)
        b = _rand_trace(rng, circle)
        scale = tr.trace_norm(circle, a) * tr.trace_norm(circle, b)
        lhs = tr.pairing_local(a, tr.theta(b), circle)
        uq = tr.dual_pair(circle, a.dir, b.neu)
        pv = tr.dual_pair(circle, b.dir, a.neu)
        assert abs(lhs - (uq + pv)) <= 1e-13 * scale
        base = tr.pairing_local(a, b, circle)
        assert abs((lhs - base) - 2 * pv) <= 1e-13 * scale
        assert abs((lhs + base) - 2 * uq) <= 1e-13 * scale


def test_pairing_gamma_componentwise(concentric_map):
    part, _ = concentric_map
    rng = np.random.default_rng(3)
    a = tr.MultiTraceVec([_rand_trace(rng, m) for m in part.gamma])
    b = tr.MultiTraceVec([tr.TraceVec.zeros(m) for m in part.gamma])
    b.components[1] = _rand_trace(rng, part.gamma[1])
    total = tr.pairing_gamma(a, b, part)
    local = tr.pairing_local(a.components[1], b.components[1], part.gamma[1])
    assert total == pytest.approx(local, rel=1e-14)
    assert abs(tr.pairing_gamma(a, a, part)) <= 1e-12 * (
        sum(tr.trace_norm(m, c) for m, c in zip(part.gamma, a.components)) ** 2)
    two = tr.pairing_gamma(
        tr.MultiTraceVec([tr.TraceVec(2 * c.dir, 2 * c.neu) for c in a.components]),
        b, part)
    assert two == pytest.approx(2 * total, rel=1e-13)


def test_embed_matching_conditions(concentric_map):
    part, stm = concentric_map
    free = np.ones(stm.n_free, dtype=complex)
    m = stm.embed(free)
    g0, g1 = m.components[0], m.components[1]
    # shared outer circle: equal Dirichlet, opposite Neumann
    pos0 = {tuple(np.round(v, 12)): i for i, v in enumerate(part.gamma[0].vertices)}
    for i1, v in enumerate(part.gamma[1].vertices):
        key = tuple(np.round(v, 12))
        if key in pos0:
            assert g1.dir[i1] == g0.dir[pos0[key]]
    shared = {int(s): i for i, s in enumerate(part.gamma[0].skeleton_ids)}
    for i1, sid in enumerate(part.gamma[1].skeleton_ids):
        if int(sid) in shared:
            assert g1.neu[i1] == -g0.neu[shared[int(sid)]]
    zero = stm.embed(np.zeros(stm.n_free))
    assert all(np.all(c.packed() == 0) for c in zero.components)


def test_trace_sigma_two_subdomain_rule():
    # n = 0: single disk, Tr((u, p)) = (u, -p)
    part, _ = _n0_partition(24)
    stm = tr.SingleTraceDofMap(part)
    rng = np.random.default_rng(5)
    free = rng.standard_normal(stm.n_free) + 1j * rng.standard_normal(stm.n_free)
    m = stm.embed(free)
    t = stm.trace_sigma(m)
    g0 = m.components[0]
    # vertices/panels of sigma and gamma_0 are the same skeleton objects
    sig = part.sigma
    g0m = part.gamma[0]
    vmap = {int(s): i for i, s in enumerate(g0m.vertex_skeleton_ids)}
    pmap = {int(s): i for i, s in enumerate(g0m.skeleton_ids)}
    for i, sv in enumerate(sig.vertex_skeleton_ids):
        assert t.dir[i] == g0.dir[vmap[int(sv)]]
    for i, sid in enumerate(sig.skeleton_ids):
        assert t.neu[i] == -g0.neu[pmap[int(sid)]]
    zero = stm.trace_sigma(stm.embed(np.zeros(stm.n_free)))
    assert np.all(zero.packed() == 0)


def test_trace_sigma_rejects_non_single_trace(concentric_map):
    part, stm = concentric_map
    rng = np.random.default_rng(11)
    m = tr.MultiTraceVec([_rand_trace(rng, mesh) for mesh in part.gamma])
    with pytest.raises(ValueError):
        stm.trace_sigma(m)


def test_modified_polarity_halfdisk(halfdisk_map):
    # [u, v]_Gamma + [Tr u, Tr v]_Sigma = 0 at rounding level, with
    # cross-points present
    part, stm = halfdisk_map
    rng = np.random.default_rng(42)
    for _ in range(50):
        fa = rng.standard_normal(stm.n_free) + 1j * rng.standard_normal(stm.n_free)
        fb = rng.standard_normal(stm.n_free) + 1j * rng.standard_normal(stm.n_free)
        ma, mb = stm.embed(fa), stm.embed(fb)
        lhs = tr.pairing_gamma(ma, mb, part)
        rhs = tr.pairing_local(stm.sigma_restriction(fa),
                               stm.sigma_restriction(fb), part.sigma)
        na = sum(tr.trace_norm(m, c) for m, c in zip(part.gamma, ma.components))
        nb = sum(tr.trace_norm(m, c) for m, c in zip(part.gamma, mb.components))
        assert abs(lhs + rhs) <= 1e-12 * na * nb


def test_variational_characterization_rank(concentric_map):
    # Discrete form of the variational characterization of the
    # single-trace space: the annihilator of {v in X : Tr v = 0} under
    # [.,.]_Gamma equals the embedded space PLUS the kernel of the
    # P1/P0 mixed mass (alternating modes; closed curves with even panel
    # counts make B singular).  The two subspaces are computed and the
    # annihilator dimension matched exactly.
    part, stm = concentric_map
    sizes = [m.n_vertices + m.n_panels for m in part.gamma]
    offs = np.cumsum([0] + sizes)
    total = sum(sizes)
    sig = stm.regions[geo.SIGMA]
    zmask = np.ones(stm.n_free, bool)
    zmask[sig.dir_index] = False
    zmask[stm.n_dir + sig.neu_index] = False
    zidx = np.nonzero(zmask)[0]

    def flatten(m):
        return np.concatenate([np.concatenate([c.dir.real, c.neu.real])
                               for c in m.components])

    Q = np.zeros((len(zidx), total))
    for col, z in enumerate(zidx):
        free = np.zeros(stm.n_free)
        free[z] = 1.0
        m = stm.embed(free)
        row = []
        for j, mesh in enumerate(part.gamma):
            B = tr.mixed_mass(mesh)
            row.append(np.concatenate([
                -(m.components[j].neu @ B).real,
                (B @ m.components[j].dir).real,
            ]))
        Q[col] = np.concatenate(row)
    E = np.zeros((total, stm.n_free))
    for c in range(stm.n_free):
        free = np.zeros(stm.n_free)
        free[c] = 1.0
        E[:, c] = flatten(stm.embed(free))
    K = _alternating_modes(part, offs, total)
    assert np.abs(Q @ K).max() < 1e-12
    null_dim = total - np.linalg.matrix_rank(Q, tol=1e-10)
    assert null_dim == np.linalg.matrix_rank(np.hstack([E, K]), tol=1e-10)
    # a generic vector outside that span pairs nonzero with a Tr-zero test
    rng = np.random.default_rng(1)
    u = rng.standard_normal(total)
    assert np.linalg.norm(Q @ u) > 1e-8


def _alternating_modes(part, offs, total):
    mods = []
    for j, mesh in enumerate(part.gamma):
        nxt = {int(a): (int(b), k) for k, (a, b) in enumerate(mesh.panels)}
        seen = set()
        for v0 in range(mesh.n_vertices):
            if v0 in seen:
                continue
            cyc_v, cyc_p, v = [], [], v0
            while True:
                seen.add(v)
                cyc_v.append(v)
                v, k = nxt[v]
                cyc_p.append(k)
                if v == v0:
                    break
            if len(cyc_v) % 2 == 0:
                dv = np.zeros(total)
                pv = np.zeros(total)
                for i, vv in enumerate(cyc_v):
                    dv[offs[j] + vv] = (-1.0) ** i
                for i, pp in enumerate(cyc_p):
                    pv[offs[j] + mesh.n_vertices + pp] = (-1.0) ** i
                mods += [dv, pv]
    return np.array(mods).T


def _n0_partition(n_panels):
    """Single heterogeneous disk in free space (n = 0)."""
    from fembem.geometry import _SkeletonBuilder, _arc_vertex_ids, _region_mesh
    bld = _SkeletonBuilder()
    ids = _arc_vertex_ids(bld, 1.0, 0.0,
                          -2.0 * np.pi * (1 - 1.0 / n_panels), n_panels - 1)
    pans = [bld.panel(ids[i], ids[(i + 1) % n_panels], 0, geo.SIGMA)
            for i in range(n_panels)]
    part = bld.finish(n=0)
    part.gamma = [_region_mesh(part, pans, [+1] * n_panels)]
    part.sigma = _region_mesh(part, pans, [-1] * n_panels)
    return part, None


def test_pairing_doublehat(concentric_map):
    part, _ = concentric_map
    rng = np.random.default_rng(9)
    a = tr.DoubleHatVec([_rand_trace(rng, part.gamma[1])],
                        _rand_trace(rng, part.sigma))
    b = tr.DoubleHatVec([_rand_trace(rng, part.gamma[1])],
                        _rand_trace(rng, part.sigma))
    pab = tr.pairing_doublehat(a, b, part)
    pba = tr.pairing_doublehat(b, a, part)
    assert abs(pab + pba) <= 1e-12 * max(abs(pab), 1.0)
    only_sigma = tr.DoubleHatVec([tr.TraceVec.zeros(part.gamma[1])], a.sigma)
    assert tr.pairing_doublehat(only_sigma, b, part) == pytest.approx(
        tr.pairing_local(a.sigma, b.sigma, part.sigma), rel=1e-13)
    twice = tr.DoubleHatVec(
        [tr.TraceVec(2 * a.components[0].dir, 2 * a.components[0].neu)],
        tr.TraceVec(2 * a.sigma.dir, 2 * a.sigma.neu))
    assert tr.pairing_doublehat(twice, b, part) == pytest.approx(2 * pab, rel=1e-13)


def test_theta_commutes_with_trace(halfdisk_map):
    part, stm = halfdisk_map
    rng = np.random.default_rng(2)
    free = rng.standard_normal(stm.n_free) + 1j * rng.standard_normal(stm.n_free)
    m = stm.embed(free)
    lhs = tr.theta(stm.trace_sigma(m))
    rhs = stm.trace_sigma(tr.MultiTraceVec([tr.theta(c) for c in m.components]))
    assert np.allclose(lhs.packed(), rhs.packed(), atol=0, rtol=0)
