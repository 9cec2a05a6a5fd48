"""P1 volume finite elements on the heterogeneous region.

Assembles the complex-symmetric Helmholtz form
    a(U, V) = int (grad U . grad V - kappa(x)^2 U V) dx
with exact element stiffness and order-2 (edge midpoint) quadrature for
the variable-coefficient mass term, plus the load functional and the
Dirichlet restriction onto the boundary curve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import VolumeMesh


@dataclass
class MediumField:
    """Wavenumber field kappa(x) on the heterogeneous region."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    kind: str = "constant"

    @classmethod
    def constant(cls, kappa: float) -> "MediumField":
        k = float(kappa)
        if k < 0.0:
            raise ValueError("kappa must be >= 0")
        return cls(lambda pts: np.full(len(pts), k), "constant")

    @classmethod
    def radial_profile(cls, profile: Callable[[np.ndarray], np.ndarray],
                       center=(0.0, 0.0)) -> "MediumField":
        c = np.asarray(center, dtype=float)

        def ev(pts):
            r = np.linalg.norm(pts - c, axis=1)
            return np.asarray(profile(r), dtype=float)

        return cls(ev, "radial-profile")

    @classmethod
    def table(cls, points: np.ndarray, values: np.ndarray) -> "MediumField":
        """Nearest-point lookup in an (x, y, kappa) table."""
        pts = np.asarray(points, dtype=float)
        vals = np.asarray(values, dtype=float)

        def ev(q):
            d = np.linalg.norm(q[:, None, :] - pts[None, :, :], axis=2)
            return vals[np.argmin(d, axis=1)]

        return cls(ev, "table")

    @classmethod
    def from_table_file(cls, path) -> "MediumField":
        rows = np.loadtxt(path, ndmin=2)
        return cls.table(rows[:, :2], rows[:, 2])


@dataclass
class SourceField:
    """Volume source density f, complex-valued."""

    evaluator: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def zero(cls) -> "SourceField":
        return cls(lambda pts: np.zeros(len(pts), complex))

    @classmethod
    def constant(cls, value: complex) -> "SourceField":
        return cls(lambda pts: np.full(len(pts), complex(value)))


@dataclass
class FemBlocks:
    a_sigma: np.ndarray
    load: np.ndarray
    trace_dir: np.ndarray  # boundary_vertex_map copy: sigma vertex -> volume vertex


def _element_geometry(mesh: VolumeMesh):
    p = mesh.vertices[mesh.triangles]          # (nt, 3, 2)
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det <= 0.0):
        raise ValueError("degenerate or inverted triangle")
    area = 0.5 * det
    # gradients of the three hats: rows of [[-1,-1],[1,0],[0,1]] / jacobian
    g = np.empty((len(p), 3, 2))
    g[:, 1, 0] = e2[:, 1] / det
    g[:, 1, 1] = -e2[:, 0] / det
    g[:, 2, 0] = -e1[:, 1] / det
    g[:, 2, 1] = e1[:, 0] / det
    g[:, 0] = -g[:, 1] - g[:, 2]
    return p, area, g


# order-2 triangle rule: edge midpoints, equal weights
_QP = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
_QW = np.array([1.0, 1.0, 1.0]) / 3.0
_HATS = np.column_stack([1.0 - _QP[:, 0] - _QP[:, 1], _QP[:, 0], _QP[:, 1]])


def _quad_points(p):
    # (nt, nq, 2) physical quadrature points
    return np.einsum("qj,tjx->tqx", _HATS, p)


def assemble_a_sigma(mesh: VolumeMesh, medium: MediumField) -> np.ndarray:
    """Helmholtz bilinear form matrix (complex symmetric)."""
    p, area, g = _element_geometry(mesh)
    n = mesh.n_vertices
    A = np.zeros((n, n), dtype=complex)
    stiff = np.einsum("tix,tjx,t->tij", g, g, area)
    xq = _quad_points(p)
    kq = medium.evaluator(xq.reshape(-1, 2)).reshape(len(p), len(_QW))
    mass = np.einsum("tq,q,qi,qj,t->tij", kq * kq, _QW, _HATS, _HATS, area)
    local = stiff - mass
    idx = mesh.triangles
    for i in range(3):
        for j in range(3):
            np.add.at(A, (idx[:, i], idx[:, j]), local[:, i, j])
    return A


def assemble_load(mesh: VolumeMesh, source: SourceField) -> np.ndarray:
    """Load vector int f V by the order-2 rule."""
    p, area, _ = _element_geometry(mesh)
    xq = _quad_points(p)
    fq = np.asarray(source.evaluator(xq.reshape(-1, 2)),
                    dtype=complex).reshape(len(p), len(_QW))
    local = np.einsum("tq,q,qi,t->ti", fq, _QW, _HATS, area)
    b = np.zeros(mesh.n_vertices, dtype=complex)
    np.add.at(b, mesh.triangles.ravel(), local.ravel())
    return b


def trace_dirichlet(mesh: VolumeMesh) -> np.ndarray:
    """Selection map from volume vertices to boundary vertices, in the
    boundary mesh's local vertex order."""
    if mesh.boundary_vertex_map is None or len(mesh.boundary_vertex_map) == 0:
        raise ValueError("mesh has no boundary vertex map")
    return mesh.boundary_vertex_map.copy()


def assemble(mesh: VolumeMesh, medium: MediumField,
             source: SourceField) -> FemBlocks:
    return FemBlocks(
        a_sigma=assemble_a_sigma(mesh, medium),
        load=assemble_load(mesh, source),
        trace_dir=trace_dirichlet(mesh),
    )


def p1_volume_mass(mesh: VolumeMesh) -> np.ndarray:
    """Plain P1 mass matrix (exact), for error measurement."""
    p, area, _ = _element_geometry(mesh)
    n = mesh.n_vertices
    M = np.zeros((n, n))
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    idx = mesh.triangles
    for i in range(3):
        for j in range(3):
            np.add.at(M, (idx[:, i], idx[:, j]), base[i, j] * area)
    return M


def interpolate(mesh: VolumeMesh, coeffs: np.ndarray,
                points: np.ndarray) -> np.ndarray:
    """P1 interpolation at points inside the mesh (brute-force location)."""
    p, area, _ = _element_geometry(mesh)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(pts), dtype=complex)
    for i, x in enumerate(pts):
        v0, v1, v2 = p[:, 0], p[:, 1], p[:, 2]
        d = 2.0 * area
        l1 = ((v2[:, 1] - v0[:, 1]) * (x[0] - v0[:, 0])
              - (v2[:, 0] - v0[:, 0]) * (x[1] - v0[:, 1])) / d
        l2 = (-(v1[:, 1] - v0[:, 1]) * (x[0] - v0[:, 0])
              + (v1[:, 0] - v0[:, 0]) * (x[1] - v0[:, 1])) / d
        l0 = 1.0 - l1 - l2
        eps = -1e-12
        inside = (l0 >= eps) & (l1 >= eps) & (l2 >= eps)
        t = np.argmax(inside)
        if not inside[t]:
            raise ValueError(f"point {x} outside the volume mesh")
        lam = np.array([l0[t], l1[t], l2[t]])
        out[i] = lam @ coeffs[mesh.triangles[t]]
    return out
