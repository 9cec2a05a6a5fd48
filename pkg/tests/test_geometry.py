"""Partition builders, validation, cross-points, disk triangulation."""

import numpy as np
import pytest

from fembem import geometry as geo


@pytest.fixture(scope="module")
def concentric():
    return geo.make_concentric_config(1.0, 2.0, 64, 64)


@pytest.fixture(scope="module")
def halfdisk():
    return geo.make_halfdisk_config(1.0, 2.0, 32)


def test_concentric_shape(concentric):
    part, vol = concentric
    assert part.n == 1
    assert part.n_skeleton_panels == 128
    assert geo.cross_points(part) == []
    assert geo.validate_partition(part) == []


def test_concentric_region_meshes(concentric):
    part, _ = concentric
    assert part.gamma[0].n_panels == 64
    assert part.gamma[1].n_panels == 128
    assert part.sigma.n_panels == 64
    # outward normals: signed area positive for bounded regions
    assert part.gamma[1].signed_area() > 0
    assert part.sigma.signed_area() > 0
    assert part.gamma[0].signed_area() < 0  # unbounded complement


def test_divergence_theorem_identity(concentric):
    # sum over panels of (n . mid) L equals 2 * polygon area exactly
    part, _ = concentric
    for mesh in [part.sigma, part.gamma[1]]:
        lhs = np.sum(np.sum(mesh.normals * mesh.midpoints, axis=1) * mesh.lengths)
        assert lhs == pytest.approx(2.0 * mesh.signed_area(), abs=1e-12)


def test_shared_panels_have_opposite_normals(concentric):
    part, _ = concentric
    sig, g1 = part.sigma, part.gamma[1]
    shared = {int(s): i for i, s in enumerate(g1.skeleton_ids)}
    for i, sid in enumerate(sig.skeleton_ids):
        j = shared[int(sid)]
        assert np.allclose(sig.normals[i], -g1.normals[j], atol=1e-15)
        assert sig.orientation[i] == -g1.orientation[j]


def test_locate_regions(concentric):
    part, _ = concentric
    assert part.locate((0.2, 0.1)) == geo.SIGMA
    assert part.locate((1.5, 0.0)) == 1
    assert part.locate((3.0, 1.0)) == 0


def test_validate_detects_flipped_region():
    part, _ = geo.make_concentric_config(1.0, 2.0, 16, 16)
    g1 = part.gamma[1]
    part.gamma[1] = geo.CurveMesh(
        g1.vertices, g1.panels[:, ::-1], True,
        g1.skeleton_ids, -g1.orientation, g1.vertex_skeleton_ids)
    problems = geo.validate_partition(part)
    assert any("normal points inward" in p for p in problems)


def test_validate_detects_duplicated_owner():
    part, _ = geo.make_concentric_config(1.0, 2.0, 16, 16)
    sig = part.sigma
    ids = sig.skeleton_ids.copy()
    ids[0] = ids[1]
    part.sigma = geo.CurveMesh(sig.vertices, sig.panels, True, ids,
                               sig.orientation, sig.vertex_skeleton_ids)
    problems = geo.validate_partition(part)
    assert any("owned twice" in p or "owners" in p for p in problems)


def test_halfdisk_cross_points(halfdisk):
    part, _ = halfdisk
    pts = geo.cross_points(part)
    # three regions meet exactly where the interface junctions hit y = 0
    got = sorted((round(p.x, 12), round(p.y, 12)) for p in pts)
    assert got == [(-1.0, 0.0), (1.0, 0.0)]
    assert geo.validate_partition(part) == []


def test_halfdisk_sigma_split(halfdisk):
    part, _ = halfdisk
    # every sigma panel pairs with region 0 (lower half) or 1 (upper half)
    length = {0: 0.0, 1: 0.0}
    for i, sid in enumerate(part.sigma.skeleton_ids):
        own = set(part.owners[sid])
        own.discard(geo.SIGMA)
        j = own.pop()
        mid = part.sigma.midpoints[i]
        assert (j == 1) == (mid[1] > 0)
        length[j] += part.sigma.lengths[i]
    assert length[0] > 0 and length[1] > 0


def test_halfdisk_locate(halfdisk):
    part, _ = halfdisk
    assert part.locate((0.0, 0.5)) == geo.SIGMA
    assert part.locate((0.0, 1.5)) == 1
    assert part.locate((0.0, -1.5)) == 0
    assert part.locate((0.0, 2.5)) == 0


def test_triangulate_disk_area_and_conformity():
    sigma = geo.circle_mesh(1.0, 64)
    vol = geo.triangulate_disk(sigma, 0.1)
    areas = vol.areas()
    assert np.all(areas > 0)
    # polygon area of the 64-gon, not pi
    poly = 0.5 * 64 * np.sin(2 * np.pi / 64)
    assert np.sum(areas) == pytest.approx(poly, rel=1e-12)
    assert np.sum(areas) == pytest.approx(np.pi, rel=0.01)
    assert vol.max_edge() <= 0.2
    # boundary map is a bijection onto sigma vertices, bit-exact
    assert sorted(vol.boundary_vertex_map) == sorted(set(vol.boundary_vertex_map))
    assert np.all(vol.vertices[vol.boundary_vertex_map] == sigma.vertices)


def test_volume_mesh_io_roundtrip(tmp_path, concentric):
    _, vol = concentric
    path = tmp_path / "disk.mesh"
    geo.write_volume_mesh(vol, path)
    back = geo.read_volume_mesh(path)
    assert np.array_equal(back.vertices, vol.vertices)
    assert np.array_equal(back.triangles, vol.triangles)
    assert np.array_equal(back.boundary_vertex_map, vol.boundary_vertex_map)


def test_curve_mesh_io_roundtrip(tmp_path):
    mesh = geo.circle_mesh(1.5, 32)
    path = tmp_path / "curve.mesh"
    geo.write_curve_mesh(mesh, path)
    back = geo.read_curve_mesh(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.panels, mesh.panels)


def test_invalid_radii():
    with pytest.raises(ValueError):
        geo.make_concentric_config(2.0, 1.0, 64, 64)
    with pytest.raises(ValueError):
        geo.make_halfdisk_config(1.0, 2.0, 7)


def test_point_validation():
    with pytest.raises(ValueError):
        geo.Point(np.nan, 0.0)
