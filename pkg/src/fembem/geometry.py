"""Plane partitions, boundary curve meshes, and disk triangulation.

Geometry conventions used throughout the package:

  * A curve mesh stores a traversal of one or more closed polygonal
    components.  The unit normal of a panel with direction t is
    n = (t_y, -t_x); region boundary meshes are traversed so that this
    normal points outward of the region.  Equivalently the tangent is
    the normal rotated by +90 degrees, which is what the arc-length
    derivatives of the hypersingular assembly rely on.
  * Shared interface geometry is stored once as skeleton panels.  The
    stored panel direction is chosen so that its normal is the outward
    normal of the lower-indexed adjacent region, the heterogeneous
    region counting as index n+1.  Region meshes record a +-1
    orientation sign against the stored panel.
  * All interface meshes are conforming: a region mesh panel IS a
    skeleton panel, possibly reversed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIGMA = -1  # region code for the heterogeneous subdomain in owner records


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("point coordinates must be finite")


@dataclass
class CurveMesh:
    """Closed polygonal curve(s) with an oriented traversal.

    vertices : (nv, 2) float array
    panels   : (np, 2) int array of vertex indices, traversal order
    closed   : every component is a cycle
    skeleton_ids / orientation : per-panel link into the owning
        partition's skeleton (orientation +1 when the stored skeleton
        direction matches this traversal), absent for standalone meshes
    vertex_skeleton_ids : per-vertex skeleton vertex index
    """

    vertices: np.ndarray
    panels: np.ndarray
    closed: bool = True
    skeleton_ids: np.ndarray | None = None
    orientation: np.ndarray | None = None
    vertex_skeleton_ids: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.panels = np.asarray(self.panels, dtype=int)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_panels(self) -> int:
        return len(self.panels)

    @property
    def starts(self) -> np.ndarray:
        return self.vertices[self.panels[:, 0]]

    @property
    def ends(self) -> np.ndarray:
        return self.vertices[self.panels[:, 1]]

    @property
    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.ends - self.starts, axis=1)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.starts + self.ends)

    @property
    def tangents(self) -> np.ndarray:
        d = self.ends - self.starts
        return d / self.lengths[:, None]

    @property
    def normals(self) -> np.ndarray:
        t = self.tangents
        return np.column_stack([t[:, 1], -t[:, 0]])

    def signed_area(self) -> float:
        """Shoelace area of the traversal (negative for hole curves)."""
        a = self.starts
        b = self.ends
        return 0.5 * float(np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]))

    def validate(self) -> list[str]:
        problems = []
        if not np.all(np.isfinite(self.vertices)):
            problems.append("non-finite vertex coordinates")
        if np.any(self.lengths <= 0.0):
            problems.append("non-positive panel length")
        counts = np.zeros(self.n_vertices, dtype=int)
        for v0, v1 in self.panels:
            counts[v0] += 1
            counts[v1] += 1
        if self.closed and np.any(counts != 2):
            problems.append("panels do not form closed cycles")
        return problems


def circle_mesh(radius: float, n_panels: int, center=(0.0, 0.0),
                ccw: bool = True) -> CurveMesh:
    """Regular n-gon inscribed in a circle, CCW unless stated."""
    ang = 2.0 * np.pi * np.arange(n_panels) / n_panels
    verts = np.column_stack([center[0] + radius * np.cos(ang),
                             center[1] + radius * np.sin(ang)])
    nxt = np.roll(np.arange(n_panels), -1)
    panels = np.column_stack([np.arange(n_panels), nxt])
    if not ccw:
        panels = panels[::-1, ::-1]
    return CurveMesh(verts, panels)


@dataclass
class VolumeMesh:
    """Conforming P1 triangulation of the heterogeneous region.

    boundary_vertex_map[i] is the volume vertex index matching local
    vertex i of the boundary curve mesh; coordinates agree bit-exactly.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex_map: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=int)
        self.boundary_vertex_map = np.asarray(self.boundary_vertex_map, dtype=int)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def max_edge(self) -> float:
        p = self.vertices[self.triangles]
        e = [np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1) for i in range(3)]
        return float(np.max(e))


@dataclass
class SubdomainPartition:
    """Non-overlapping decomposition R^2 = union of Omega_j and Omega_Sigma.

    gamma[j] is the boundary mesh of Omega_j with outward normals,
    sigma the boundary of the heterogeneous region.  owners[p] holds
    the two adjacent region codes of skeleton panel p (codes 0..n plus
    SIGMA), ordered so the stored panel normal is the outward normal of
    owners[p][0] per the lower-index convention.
    """

    n: int
    skeleton_vertices: np.ndarray
    skeleton_panels: np.ndarray
    owners: np.ndarray
    gamma: list[CurveMesh] = field(default_factory=list)
    sigma: CurveMesh | None = None

    @property
    def n_skeleton_panels(self) -> int:
        return len(self.skeleton_panels)

    @property
    def n_skeleton_vertices(self) -> int:
        return len(self.skeleton_vertices)

    def region_meshes(self) -> list[tuple[int, CurveMesh]]:
        out = [(j, m) for j, m in enumerate(self.gamma)]
        out.append((SIGMA, self.sigma))
        return out

    def _rank(self, code: int) -> int:
        # Sigma counts as index n+1 in the lower-index normal convention
        return self.n + 1 if code == SIGMA else code

    def sigma_vertex_ids(self) -> np.ndarray:
        return self.sigma.vertex_skeleton_ids

    def locate(self, point) -> int:
        """Region code containing the point (0..n or SIGMA).

        Winding-number test against the oriented region boundaries;
        points on boundaries are not reliably classified.
        """
        p = np.asarray(point, dtype=float)
        if _winding(self.sigma, p) > 0.5:
            return SIGMA
        for j in range(1, self.n + 1):
            if _winding(self.gamma[j], p) > 0.5:
                return j
        return 0

    def cross_point_ids(self) -> np.ndarray:
        incident: dict[int, set[int]] = {}
        for pid, (v0, v1) in enumerate(self.skeleton_panels):
            for v in (v0, v1):
                s = incident.setdefault(v, set())
                s.add(int(self.owners[pid, 0]))
                s.add(int(self.owners[pid, 1]))
        ids = [v for v, regs in incident.items() if len(regs) >= 3]
        return np.array(sorted(ids), dtype=int)


def _winding(mesh: CurveMesh, p: np.ndarray) -> float:
    a = mesh.starts - p
    b = mesh.ends - p
    ang = np.arctan2(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0],
                     np.sum(a * b, axis=1))
    return float(np.sum(ang) / (2.0 * np.pi))


def cross_points(p: SubdomainPartition) -> list[Point]:
    """Skeleton vertices where three or more regions are adjacent."""
    return [Point(*p.skeleton_vertices[i]) for i in p.cross_point_ids()]


# ---------------------------------------------------------------------------
# partition assembly helpers
# ---------------------------------------------------------------------------

class _SkeletonBuilder:
    def __init__(self):
        self.vertices: list[np.ndarray] = []
        self.panels: list[tuple[int, int]] = []
        self.owners: list[tuple[int, int]] = []
        self._vkey: dict[tuple[float, float], int] = {}

    def vertex(self, xy) -> int:
        # snap to 13 decimals so analytically coincident endpoints merge
        key = (round(float(xy[0]), 13), round(float(xy[1]), 13))
        if key not in self._vkey:
            self._vkey[key] = len(self.vertices)
            self.vertices.append(np.array(key))
        return self._vkey[key]

    def panel(self, v0: int, v1: int, owner_normal_side: int, owner_other: int) -> int:
        """Add a stored panel v0->v1 whose normal is outward of
        owner_normal_side; returns the panel id."""
        self.panels.append((v0, v1))
        self.owners.append((owner_normal_side, owner_other))
        return len(self.panels) - 1

    def finish(self, n: int) -> SubdomainPartition:
        return SubdomainPartition(
            n=n,
            skeleton_vertices=np.array(self.vertices),
            skeleton_panels=np.array(self.panels, dtype=int),
            owners=np.array(self.owners, dtype=int),
        )


def _region_mesh(part: SubdomainPartition, panel_ids, signs) -> CurveMesh:
    """Build a region boundary mesh from skeleton panels and flips.

    sign +1 keeps the stored direction, -1 reverses it, so that the
    resulting traversal has the region's outward normals.
    """
    panel_ids = np.asarray(panel_ids, dtype=int)
    signs = np.asarray(signs, dtype=int)
    local_of: dict[int, int] = {}
    verts: list[int] = []
    pans = []
    for pid, s in zip(panel_ids, signs):
        v0, v1 = part.skeleton_panels[pid]
        if s < 0:
            v0, v1 = v1, v0
        loc = []
        for v in (v0, v1):
            if v not in local_of:
                local_of[v] = len(verts)
                verts.append(v)
            loc.append(local_of[v])
        pans.append(loc)
    vertex_skel = np.array(verts, dtype=int)
    return CurveMesh(
        vertices=part.skeleton_vertices[vertex_skel].copy(),
        panels=np.array(pans, dtype=int),
        skeleton_ids=panel_ids.copy(),
        orientation=signs.copy(),
        vertex_skeleton_ids=vertex_skel,
    )


def _arc_vertex_ids(b: _SkeletonBuilder, radius, ang0, ang1, n_panels) -> list[int]:
    angs = np.linspace(ang0, ang1, n_panels + 1)
    return [b.vertex((radius * np.cos(t), radius * np.sin(t))) for t in angs]


def make_concentric_config(a: float, b: float, n_panels_inner: int,
                           n_panels_outer: int, volume_h: float | None = None):
    """Disk of radius a (heterogeneous) in an annulus a<r<b (region 1)
    in free space (region 0); no cross-points.

    Returns (SubdomainPartition, VolumeMesh).
    """
    if not 0.0 < a < b:
        raise ValueError("radii must satisfy 0 < a < b")
    for n in (n_panels_inner, n_panels_outer):
        if n < 16 or n % 2:
            raise ValueError("panel counts must be even and >= 16")
    bld = _SkeletonBuilder()
    # inner circle, owners (1, Sigma): stored normal outward of region 1,
    # i.e. pointing toward the center -> store clockwise
    inner = _arc_vertex_ids(bld, a, 0.0, -2.0 * np.pi * (1 - 1.0 / n_panels_inner),
                            n_panels_inner - 1)
    inner_p = [bld.panel(inner[i], inner[(i + 1) % n_panels_inner], 1, SIGMA)
               for i in range(n_panels_inner)]
    # outer circle, owners (0, 1): stored normal outward of region 0 -> clockwise
    outer = _arc_vertex_ids(bld, b, 0.0, -2.0 * np.pi * (1 - 1.0 / n_panels_outer),
                            n_panels_outer - 1)
    outer_p = [bld.panel(outer[i], outer[(i + 1) % n_panels_outer], 0, 1)
               for i in range(n_panels_outer)]
    part = bld.finish(n=1)
    part.gamma = [
        _region_mesh(part, outer_p, [+1] * n_panels_outer),                    # Gamma_0
        _region_mesh(part, inner_p + outer_p,
                     [+1] * n_panels_inner + [-1] * n_panels_outer),           # Gamma_1
    ]
    part.sigma = _region_mesh(part, inner_p, [-1] * n_panels_inner)
    vol = triangulate_disk(part.sigma, volume_h or 2.0 * np.pi * a / n_panels_inner)
    return part, vol


make_gap_demo_config = make_concentric_config  # nested-circles demo geometry


def make_halfdisk_config(a: float, b: float, n_arc: int,
                         volume_h: float | None = None):
    """Disk of radius a (heterogeneous), upper half-annulus a<r<b as
    region 1, everything else region 0.  The boundary circle of the
    disk is split between region 0 (lower half) and region 1 (upper
    half), so neither contains it entirely; cross-points sit where the
    interface junctions meet the x-axis.

    n_arc is the panel count per half of the inner circle.
    """
    if not 0.0 < a < b:
        raise ValueError("radii must satisfy 0 < a < b")
    if n_arc < 8 or n_arc % 2:
        raise ValueError("n_arc must be even and >= 8")
    bld = _SkeletonBuilder()
    n_b = int(round(n_arc * b / a))
    h = np.pi * a / n_arc
    n_seg = max(2, int(round((b - a) / h)))

    # upper inner arc, owners (1, Sigma): normal outward of region 1 = -rhat
    # -> stored clockwise, i.e. from pi down to 0
    up_a = _arc_vertex_ids(bld, a, np.pi, 0.0, n_arc)
    up_a_p = [bld.panel(up_a[i], up_a[i + 1], 1, SIGMA) for i in range(n_arc)]
    # lower inner arc, owners (0, Sigma): normal outward of region 0 points
    # toward the disk center -> stored clockwise: from 2pi down to pi
    lo_a = _arc_vertex_ids(bld, a, 2.0 * np.pi, np.pi, n_arc)
    lo_a_p = [bld.panel(lo_a[i], lo_a[i + 1], 0, SIGMA) for i in range(n_arc)]
    # upper outer arc, owners (0, 1): normal outward of region 0 = -rhat
    # -> stored clockwise: from pi down to 0... traversed pi -> 0 is the
    # top arc from (-b,0) to (b,0), whose normal (t_y,-t_x) is -rhat
    up_b = _arc_vertex_ids(bld, b, np.pi, 0.0, n_b)
    up_b_p = [bld.panel(up_b[i], up_b[i + 1], 0, 1) for i in range(n_b)]
    # segments on y = 0, owners (0, 1): normal outward of region 0 = +yhat
    # -> stored direction -xhat
    xs_r = np.linspace(b, a, n_seg + 1)
    seg_r = [bld.vertex((x, 0.0)) for x in xs_r]
    seg_r_p = [bld.panel(seg_r[i], seg_r[i + 1], 0, 1) for i in range(n_seg)]
    xs_l = np.linspace(-a, -b, n_seg + 1)
    seg_l = [bld.vertex((x, 0.0)) for x in xs_l]
    seg_l_p = [bld.panel(seg_l[i], seg_l[i + 1], 0, 1) for i in range(n_seg)]

    part = bld.finish(n=1)
    # all four stored groups carry region-0-outward normals where region 0
    # is adjacent, so Gamma_0 takes them with sign +1 in traversal order
    g0_ids = lo_a_p + seg_l_p + up_b_p + seg_r_p
    part.gamma = [
        _region_mesh(part, g0_ids, [+1] * len(g0_ids)),
        _region_mesh(part, up_a_p + seg_r_p + up_b_p + seg_l_p,
                     [+1] * n_arc + [-1] * n_seg + [-1] * n_b + [-1] * n_seg),
    ]
    part.sigma = _region_mesh(part, up_a_p + lo_a_p,
                              [-1] * n_arc + [-1] * n_arc)
    vol = triangulate_disk(part.sigma, volume_h or np.pi * a / n_arc)
    return part, vol


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def validate_partition(part: SubdomainPartition) -> list[str]:
    """Check partition invariants; returns a list of violations."""
    problems: list[str] = []
    usage: dict[int, list[int]] = {}
    for code, mesh in part.region_meshes():
        problems += [f"region {code}: {msg}" for msg in mesh.validate()]
        # outward-normal signed-area rule
        area2 = float(np.sum(np.sum(mesh.normals * mesh.midpoints, axis=1)
                             * mesh.lengths))
        if code == 0:
            if area2 >= 0.0:
                problems.append("region 0: normal points inward")
        elif area2 <= 0.0:
            problems.append(f"region {code}: normal points inward")
        if mesh.skeleton_ids is None:
            problems.append(f"region {code}: missing skeleton link")
            continue
        for pid in mesh.skeleton_ids:
            usage.setdefault(int(pid), []).append(code)
    for pid in range(part.n_skeleton_panels):
        regs = usage.get(pid, [])
        own = part.owners[pid]
        if len(regs) != 2 or len(set(regs)) != 2:
            for code in set(r for r in regs if regs.count(r) > 1):
                problems.append(f"panel {pid} owned twice by region {code}")
            if len(regs) != 2:
                problems.append(f"panel {pid} has {len(regs)} owners, expected 2")
        elif set(regs) != set(own):
            problems.append(f"panel {pid} owner record mismatch")
        if SIGMA in own:
            other = own[0] if own[1] == SIGMA else own[1]
            if other == SIGMA or not (0 <= other <= part.n):
                problems.append(f"sigma panel {pid} does not pair with one region")
    problems += _self_intersections(part)
    return problems


def _self_intersections(part: SubdomainPartition) -> list[str]:
    a = part.skeleton_vertices[part.skeleton_panels[:, 0]]
    b = part.skeleton_vertices[part.skeleton_panels[:, 1]]
    n = len(a)
    problems = []
    for i in range(n):
        d1 = b[i] - a[i]
        d2 = b[i + 1:] - a[i + 1:]
        rel = a[i + 1:] - a[i]
        den = d1[0] * d2[:, 1] - d1[1] * d2[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (rel[:, 0] * d2[:, 1] - rel[:, 1] * d2[:, 0]) / den
            s = (rel[:, 0] * d1[1] - rel[:, 1] * d1[0]) / (-den)
        eps = 1e-12
        crosses = (np.abs(den) > eps) & (t > eps) & (t < 1 - eps) \
            & (s > eps) & (s < 1 - eps)
        for j in np.nonzero(crosses)[0]:
            problems.append(f"panels {i} and {i + 1 + j} intersect")
    return problems


# ---------------------------------------------------------------------------
# disk triangulation
# ---------------------------------------------------------------------------

def triangulate_disk(sigma: CurveMesh, target_h: float) -> VolumeMesh:
    """Conforming triangulation of the region enclosed by a star-shaped
    closed curve, by scaled copies of the boundary polygon with angular
    halving toward the center.

    The outermost ring reuses the boundary vertex coordinates exactly.
    """
    if sigma.validate():
        raise ValueError("triangulate_disk requires a closed curve")
    # order boundary vertices along the traversal
    order = _traversal_order(sigma)
    nb = len(order)
    center = sigma.vertices.mean(axis=0)
    radius = float(np.mean(np.linalg.norm(sigma.vertices - center, axis=1)))
    n_rings = max(2, int(np.ceil(radius / target_h)))

    verts = [sigma.vertices[i] for i in order]
    boundary_map = np.empty(nb, dtype=int)
    boundary_map[order] = np.arange(nb)

    tris: list[tuple[int, int, int]] = []
    ring_idx = list(range(nb))
    ring_pts = sigma.vertices[order]
    count = nb
    for k in range(1, n_rings):
        scale = 1.0 - k / n_rings
        halve = (count % 2 == 0 and count > 8
                 and scale * 2 * np.pi * radius / count < 0.7 * radius / n_rings)
        new_count = count // 2 if halve else count
        sub = ring_pts[::2] if halve else ring_pts
        new_pts = center + scale / (1.0 - (k - 1) / n_rings) * (sub - center)
        new_idx = list(range(len(verts), len(verts) + new_count))
        verts.extend(new_pts)
        if halve:
            for i in range(new_count):
                f0, f1, f2 = (ring_idx[2 * i], ring_idx[(2 * i + 1) % count],
                              ring_idx[(2 * i + 2) % count])
                c0, c1 = new_idx[i], new_idx[(i + 1) % new_count]
                tris += [(f0, f1, c0), (f1, c1, c0), (f1, f2, c1)]
        else:
            for i in range(count):
                o0, o1 = ring_idx[i], ring_idx[(i + 1) % count]
                i0, i1 = new_idx[i], new_idx[(i + 1) % count]
                tris += [(o0, o1, i0), (o1, i1, i0)]
        ring_idx, ring_pts, count = new_idx, new_pts, new_count
    cid = len(verts)
    verts.append(center)
    for i in range(count):
        tris.append((ring_idx[i], ring_idx[(i + 1) % count], cid))

    mesh = VolumeMesh(np.array(verts), np.array(tris, dtype=int),
                      boundary_map)
    areas = mesh.areas()
    flip = areas < 0.0
    if np.any(flip):
        t = mesh.triangles[flip]
        mesh.triangles[flip] = t[:, [0, 2, 1]]
    if np.any(mesh.areas() <= 0.0):
        raise ValueError("degenerate triangle in disk triangulation")
    return mesh


def _traversal_order(mesh: CurveMesh) -> np.ndarray:
    """Vertex indices in traversal order around a single closed curve."""
    nxt = {int(v0): int(v1) for v0, v1 in mesh.panels}
    order = [int(mesh.panels[0, 0])]
    for _ in range(mesh.n_panels - 1):
        order.append(nxt[order[-1]])
    if len(set(order)) != mesh.n_vertices:
        raise ValueError("curve is not a single closed component")
    return np.array(order, dtype=int)


# ---------------------------------------------------------------------------
# mesh file I/O  (plain text, see README)
# ---------------------------------------------------------------------------

def write_volume_mesh(mesh: VolumeMesh, path):
    with open(path, "w") as f:
        f.write(f"{mesh.n_vertices} {len(mesh.triangles)} "
                f"{len(mesh.boundary_vertex_map)}\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for i, j, k in mesh.triangles:
            f.write(f"{i} {j} {k}\n")
        for s, v in enumerate(mesh.boundary_vertex_map):
            f.write(f"{s} {v}\n")


def read_volume_mesh(path) -> VolumeMesh:
    with open(path) as f:
        nv, nt, nb = map(int, f.readline().split())
        verts = np.array([[float(t) for t in f.readline().split()]
                          for _ in range(nv)])
        tris = np.array([[int(t) for t in f.readline().split()]
                         for _ in range(nt)], dtype=int)
        bmap = np.zeros(nb, dtype=int)
        for _ in range(nb):
            s, v = map(int, f.readline().split())
            bmap[s] = v
    return VolumeMesh(verts, tris, bmap)


def write_curve_mesh(mesh: CurveMesh, path):
    with open(path, "w") as f:
        f.write(f"{mesh.n_vertices} {mesh.n_panels}\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for i, j in mesh.panels:
            f.write(f"{i} {j}\n")


def read_curve_mesh(path) -> CurveMesh:
    with open(path) as f:
        nv, npan = map(int, f.readline().split())
        verts = np.array([[float(t) for t in f.readline().split()]
                          for _ in range(nv)])
        pans = np.array([[int(t) for t in f.readline().split()]
                         for _ in range(npan)], dtype=int)
    return CurveMesh(verts, pans)
