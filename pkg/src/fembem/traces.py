"""Discrete trace spaces, duality pairings, and the single-trace machinery.

Dirichlet traces are continuous P1 (one coefficient per curve vertex),
Neumann traces are P0 (one per panel).  The duality between them is the
bilinear L2 pairing <u, q> = q^T B u with the mixed mass matrix
B[k, i] = integral over panel k of the P1 hat i; no conjugation enters
any pairing here.

The single-trace subspace is parameterized by one Dirichlet DOF per
skeleton vertex and one Neumann DOF per skeleton panel (carrying the
stored panel orientation); embedding into the per-region trace tuples
makes the matching conditions u_j = u_k, p_j = -p_k hold exactly by
construction, and the induced trace on the heterogeneous boundary obeys
the modified polarity identity at rounding level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SIGMA, CurveMesh, SubdomainPartition


@dataclass
class TraceVec:
    """A (Dirichlet, Neumann) coefficient pair on one boundary mesh."""

    dir: np.ndarray
    neu: np.ndarray

    def __post_init__(self):
        self.dir = np.asarray(self.dir, dtype=complex)
        self.neu = np.asarray(self.neu, dtype=complex)

    @classmethod
    def zeros(cls, mesh: CurveMesh) -> "TraceVec":
        return cls(np.zeros(mesh.n_vertices, complex),
                   np.zeros(mesh.n_panels, complex))

    def check_mesh(self, mesh: CurveMesh):
        if len(self.dir) != mesh.n_vertices or len(self.neu) != mesh.n_panels:
            raise ValueError("trace vector does not match mesh")

    def packed(self) -> np.ndarray:
        return np.concatenate([self.dir, self.neu])

    @classmethod
    def unpack(cls, mesh: CurveMesh, x: np.ndarray) -> "TraceVec":
        return cls(x[:mesh.n_vertices], x[mesh.n_vertices:])


SigmaTrace = TraceVec


@dataclass
class MultiTraceVec:
    """One TraceVec per homogeneous boundary Gamma_0..Gamma_n."""

    components: list[TraceVec]


@dataclass
class HatMultiTraceVec:
    """Traces on Gamma_1..Gamma_n plus a Neumann density on Sigma."""

    components: list[TraceVec]
    p_sigma: np.ndarray


@dataclass
class DoubleHatVec:
    """Traces on Gamma_1..Gamma_n plus a full trace pair on Sigma."""

    components: list[TraceVec]
    sigma: TraceVec


def theta(a: TraceVec) -> TraceVec:
    """theta(v, q) = (-v, q)."""
    return TraceVec(-a.dir, a.neu.copy())


def Theta(m):
    """Componentwise theta on multi-trace containers."""
    if isinstance(m, MultiTraceVec):
        return MultiTraceVec([theta(c) for c in m.components])
    if isinstance(m, DoubleHatVec):
        return DoubleHatVec([theta(c) for c in m.components], theta(m.sigma))
    raise TypeError(f"Theta does not apply to {type(m).__name__}")


# ---------------------------------------------------------------------------
# boundary mass/stiffness matrices
# ---------------------------------------------------------------------------

def mixed_mass(mesh: CurveMesh) -> np.ndarray:
    """B[k, i] = integral over panel k of hat function i (exact)."""
    B = np.zeros((mesh.n_panels, mesh.n_vertices))
    L = mesh.lengths
    for k, (v0, v1) in enumerate(mesh.panels):
        B[k, v0] += 0.5 * L[k]
        B[k, v1] += 0.5 * L[k]
    return B


def p1_mass(mesh: CurveMesh) -> np.ndarray:
    M = np.zeros((mesh.n_vertices, mesh.n_vertices))
    L = mesh.lengths
    for k, (v0, v1) in enumerate(mesh.panels):
        M[v0, v0] += L[k] / 3.0
        M[v1, v1] += L[k] / 3.0
        M[v0, v1] += L[k] / 6.0
        M[v1, v0] += L[k] / 6.0
    return M


def p1_stiffness(mesh: CurveMesh) -> np.ndarray:
    S = np.zeros((mesh.n_vertices, mesh.n_vertices))
    L = mesh.lengths
    for k, (v0, v1) in enumerate(mesh.panels):
        S[v0, v0] += 1.0 / L[k]
        S[v1, v1] += 1.0 / L[k]
        S[v0, v1] -= 1.0 / L[k]
        S[v1, v0] -= 1.0 / L[k]
    return S


def dual_pair(mesh: CurveMesh, u_dir: np.ndarray, q_neu: np.ndarray) -> complex:
    """<u, q> on one boundary, bilinear."""
    return complex(q_neu @ (mixed_mass(mesh) @ u_dir))


def pairing_local(a: TraceVec, b: TraceVec, mesh: CurveMesh) -> complex:
    """Skew-symmetric self-duality pairing [a, b] = <u_a, q_b> - <p_a, v_b>."""
    a.check_mesh(mesh)
    b.check_mesh(mesh)
    B = mixed_mass(mesh)
    return complex(b.neu @ (B @ a.dir) - a.neu @ (B @ b.dir))


def trace_norm(mesh: CurveMesh, a: TraceVec) -> float:
    """Surrogate H^1/2 x H^-1/2 norm: P1 (mass+stiffness) energy for the
    Dirichlet part, panel-length-weighted l2 for the Neumann part."""
    a.check_mesh(mesh)
    G = p1_mass(mesh) + p1_stiffness(mesh)
    d = float(np.real(np.conj(a.dir) @ (G @ a.dir)))
    n = float(np.real(np.conj(a.neu) @ (mesh.lengths * a.neu)))
    return np.sqrt(d + n)


# ---------------------------------------------------------------------------
# single-trace DOF map
# ---------------------------------------------------------------------------

@dataclass
class RegionTraceMap:
    """Index maps from single-trace free DOFs into one region's traces.

    u_region = free_dir[dir_index]; p_region = neu_sign * free_neu[neu_index].
    """

    code: int
    mesh: CurveMesh
    dir_index: np.ndarray
    neu_index: np.ndarray
    neu_sign: np.ndarray


class SingleTraceDofMap:
    """Free DOFs of the single-trace space and their region embeddings.

    Free Dirichlet DOFs: one per skeleton vertex (shared across all
    incident regions, also at cross-points).  Free Neumann DOFs: one per
    skeleton panel, oriented along the stored panel normal; region j
    receives the sign +1 exactly when its outward normal matches the
    stored one.
    """

    def __init__(self, part: SubdomainPartition):
        self.part = part
        self.n_dir = part.n_skeleton_vertices
        self.n_neu = part.n_skeleton_panels
        self.regions: dict[int, RegionTraceMap] = {}
        for code, mesh in part.region_meshes():
            self.regions[code] = RegionTraceMap(
                code=code,
                mesh=mesh,
                dir_index=mesh.vertex_skeleton_ids.copy(),
                neu_index=mesh.skeleton_ids.copy(),
                neu_sign=mesh.orientation.astype(float),
            )
        # per skeleton panel: the Gamma_j owner(s), for Tr and residuals
        self._panel_gamma: dict[int, list[tuple[int, int]]] = {}
        for code, mesh in part.region_meshes():
            if code == SIGMA:
                continue
            for loc, sid in enumerate(mesh.skeleton_ids):
                self._panel_gamma.setdefault(int(sid), []).append((code, loc))
        self._vertex_gamma: dict[int, list[tuple[int, int]]] = {}
        for code, mesh in part.region_meshes():
            if code == SIGMA:
                continue
            for loc, sv in enumerate(mesh.vertex_skeleton_ids):
                self._vertex_gamma.setdefault(int(sv), []).append((code, loc))

    @property
    def n_free(self) -> int:
        return self.n_dir + self.n_neu

    def split(self, free: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        free = np.asarray(free, dtype=complex)
        if len(free) != self.n_free:
            raise ValueError("free vector size mismatch")
        return free[:self.n_dir], free[self.n_dir:]

    def embed(self, free: np.ndarray) -> MultiTraceVec:
        """Free coefficients -> element of the embedded single-trace space."""
        fd, fn = self.split(free)
        comps = []
        for j in range(self.part.n + 1):
            r = self.regions[j]
            comps.append(TraceVec(fd[r.dir_index], r.neu_sign * fn[r.neu_index]))
        return MultiTraceVec(comps)

    def sigma_restriction(self, free: np.ndarray) -> TraceVec:
        """Tr of the embedded vector, directly from free coefficients."""
        fd, fn = self.split(free)
        r = self.regions[SIGMA]
        return TraceVec(fd[r.dir_index], r.neu_sign * fn[r.neu_index])

    def constraint_residual(self, m: MultiTraceVec) -> float:
        """How far a multi-trace tuple is from the embedded subspace."""
        worst = 0.0
        for sid, ents in self._panel_gamma.items():
            if len(ents) == 2:
                (c0, l0), (c1, l1) = ents
                p0 = m.components[c0].neu[l0]
                p1 = m.components[c1].neu[l1]
                worst = max(worst, abs(p0 + p1))
        for sv, ents in self._vertex_gamma.items():
            vals = [m.components[c].dir[l] for c, l in ents]
            for v in vals[1:]:
                worst = max(worst, abs(v - vals[0]))
        return worst

    def trace_sigma(self, m: MultiTraceVec, tol: float = 1e-12) -> TraceVec:
        """Induced trace on Sigma of a single-trace tuple.

        Dirichlet: restriction of the shared vertex values; Neumann on a
        Sigma panel shared with Omega_j: -p_j, since n_Sigma = -n_j there.
        Raises when the input is not in the embedded subspace.
        """
        scale = max((float(np.max(np.abs(c.packed()), initial=0.0))
                     for c in m.components), default=0.0)
        if self.constraint_residual(m) > tol * max(scale, 1.0):
            raise ValueError("input does not satisfy the single-trace constraints")
        sig = self.regions[SIGMA]
        nd = np.zeros(sig.mesh.n_vertices, complex)
        nn = np.zeros(sig.mesh.n_panels, complex)
        for loc, sv in enumerate(sig.mesh.vertex_skeleton_ids):
            c, l = self._vertex_gamma[int(sv)][0]
            nd[loc] = m.components[c].dir[l]
        for loc, sid in enumerate(sig.mesh.skeleton_ids):
            c, l = self._panel_gamma[int(sid)][0]
            nn[loc] = -m.components[c].neu[l]
        return TraceVec(nd, nn)


# ---------------------------------------------------------------------------
# pairings over partitions
# ---------------------------------------------------------------------------

def pairing_gamma(a: MultiTraceVec, b: MultiTraceVec,
                  part: SubdomainPartition) -> complex:
    """[a, b]_Gamma = sum of the local pairings over Gamma_0..Gamma_n."""
    if len(a.components) != part.n + 1 or len(b.components) != part.n + 1:
        raise ValueError("component count does not match partition")
    return sum(pairing_local(aj, bj, part.gamma[j])
               for j, (aj, bj) in enumerate(zip(a.components, b.components)))


def pairing_doublehat(a: DoubleHatVec, b: DoubleHatVec,
                      part: SubdomainPartition) -> complex:
    """Skew pairing on Gamma_1..Gamma_n plus the Sigma pair."""
    if len(a.components) != part.n or len(b.components) != part.n:
        raise ValueError("component count does not match partition")
    total = sum(pairing_local(aj, bj, part.gamma[j + 1])
                for j, (aj, bj) in enumerate(zip(a.components, b.components)))
    return total + pairing_local(a.sigma, b.sigma, part.sigma)
