"""Assembly and solution of the five coupled FEM-BEM systems.

Kinds and their unknown layouts (DofLayout blocks):

  costabel : [volume U, p0 on the single interface]        (requires n = 0)
  stf/cstf : [volume U, non-Sigma skeleton Dirichlet, skeleton Neumann];
             the Sigma-vertex Dirichlet DOFs are the volume boundary
             DOFs (strong identification)
  mtf/cmtf : [volume U, (u_j, p_j) for j = 1..n, p_Sigma]

All pairings are bilinear (no conjugation); the test space equals the
trial space.  Incident data enters through the discrete trace pair of
incident_traces paired with the mixed mass, so that the documented
n = 0 sign mapping (u_0, p_0) = (gamma_dir U, -p_Sigma) renders the
assembled mtf and costabel systems entrywise equal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import bem, fem
from .geometry import SIGMA, CurveMesh, SubdomainPartition, VolumeMesh
from .linalg import lu_solve, sigma_extremes
from .regularizer import RegularizerM, assemble_C, assemble_M
from .special import WaveNumber, as_wavenumber
from .traces import (MultiTraceVec, SingleTraceDofMap, TraceVec, mixed_mass)

logger = logging.getLogger(__name__)

KINDS = ("costabel", "stf", "cstf", "mtf", "cmtf")


class NearSingularSystemError(RuntimeError):
    """Solve refused: matrix near-singular (possible spurious resonance)."""

    def __init__(self, sigma_min: float, sigma_max: float):
        super().__init__(
            f"near-singular system (possible spurious resonance): "
            f"sigma_min = {sigma_min:.3e}, sigma_max = {sigma_max:.3e}")
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max


@dataclass(frozen=True)
class IncidentWave:
    k0: float
    direction: tuple[float, float] = (1.0, 0.0)
    amplitude: complex = 1.0 + 0.0j

    def __post_init__(self):
        WaveNumber(self.k0)  # must be positive real
        d = np.hypot(*self.direction)
        if abs(d - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")

    def field(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(self.direction)
        return self.amplitude * np.exp(1j * self.k0 * (points @ d))


def incident_traces(wave: IncidentWave, mesh: CurveMesh) -> TraceVec:
    """Vertex samples of the incident field and the P0 L2 projection of
    its normal derivative (2-point Gauss per panel)."""
    d = np.asarray(wave.direction)
    u = wave.field(mesh.vertices)
    x, w = np.polynomial.legendre.leggauss(2)
    xi = 0.5 * (x + 1.0)
    pts = mesh.starts[:, None, :] + xi[None, :, None] \
        * (mesh.ends - mesh.starts)[:, None, :]
    g = 1j * wave.k0 * (mesh.normals @ d)[:, None] \
        * wave.field(pts.reshape(-1, 2)).reshape(len(mesh.panels), 2)
    p = 0.5 * (g @ w)  # projection onto P0: mean value over the panel
    return TraceVec(u, p)


@dataclass(frozen=True)
class DofLayout:
    kind: str
    size: int
    blocks: dict[str, slice]

    def of(self, name: str) -> slice:
        return self.blocks[name]


@dataclass
class DiscreteSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    layout: DofLayout
    kind: str


@dataclass
class SolutionBundle:
    coefficients: np.ndarray
    kind: str
    layout: DofLayout
    workbench: "Workbench"
    wave: IncidentWave
    sigma_min: float
    residual: float


# ---------------------------------------------------------------------------
# the workbench: problem data plus assembly caches
# ---------------------------------------------------------------------------

class Workbench:
    """One scattering problem: geometry, media, wave, quadrature.

    Caches layer-operator blocks per (region, wavenumber) so that the
    formulations and the sweeps can share assemblies.
    """

    def __init__(self, part: SubdomainPartition, vol: VolumeMesh,
                 kappa0: float, kappas: list[float],
                 medium: fem.MediumField, source: fem.SourceField | None = None,
                 quad: bem.QuadratureSpec | None = None):
        if len(kappas) != part.n:
            raise ValueError(f"expected {part.n} interior wavenumbers")
        self.part = part
        self.vol = vol
        self.kappa0 = kappa0
        self.kappas = [kappa0] + list(kappas)   # kappa_j, j = 0..n
        self.medium = medium
        self.source = source or fem.SourceField.zero()
        self.quad = quad or bem.QuadratureSpec()
        self.stm = SingleTraceDofMap(part)
        self.meshes = dict(part.region_meshes())
        self._blocks: dict = {}
        self._cross: dict = {}
        self._fem: fem.FemBlocks | None = None
        self._regM: RegularizerM | None = None
        # volume DOF of each Sigma-local vertex / skeleton vertex on Sigma
        self.sig_vol = vol.boundary_vertex_map
        self.skel_to_vol = {}
        for loc, sv in enumerate(part.sigma.vertex_skeleton_ids):
            self.skel_to_vol[int(sv)] = int(self.sig_vol[loc])

    def kappa(self, code: int) -> float:
        return self.kappa0 if code == SIGMA else self.kappas[code]

    def block(self, code: int, kappa) -> bem.OperatorBlockMatrix:
        key = (code, complex(as_wavenumber(kappa).value))
        if key not in self._blocks:
            self._blocks[key] = bem.assemble_block(
                kappa, self.meshes[code], self.quad)
        return self._blocks[key]

    def cross(self, source: int, target: int) -> bem.CrossBlock:
        key = (source, target)
        if key not in self._cross:
            self._cross[key] = bem.assemble_cross(
                self.kappa0, source, target, self.part, self.quad)
        return self._cross[key]

    @property
    def fem_blocks(self) -> fem.FemBlocks:
        if self._fem is None:
            self._fem = fem.assemble(self.vol, self.medium, self.source)
        return self._fem

    @property
    def regM(self) -> RegularizerM:
        if self._regM is None:
            self._regM = assemble_M(self.part.sigma)
        return self._regM

    def inc_theta_vec(self, code: int, wave: IncidentWave) -> np.ndarray:
        """[gamma U_inc, theta v] tested on one boundary, packed rows
        (P1-tested Neumann part first, then P0-tested Dirichlet part)."""
        mesh = self.meshes[code]
        tv = incident_traces(wave, mesh)
        B = mixed_mass(mesh)
        return np.concatenate([B.T @ tv.neu, B @ tv.dir])


# ---------------------------------------------------------------------------
# layouts and embedding maps
# ---------------------------------------------------------------------------

def make_layout(kind: str, wb: Workbench) -> DofLayout:
    if kind not in KINDS:
        raise ValueError(f"unknown formulation kind {kind!r}")
    part = wb.part
    nvol = wb.vol.n_vertices
    blocks: dict[str, slice] = {"volume": slice(0, nvol)}
    pos = nvol
    if kind == "costabel":
        if part.n != 0:
            raise ValueError("costabel requires n = 0")
        npan = part.gamma[0].n_panels
        blocks["p_sigma"] = slice(pos, pos + npan)
        pos += npan
    elif kind in ("stf", "cstf"):
        sig_sv = set(int(s) for s in part.sigma.vertex_skeleton_ids)
        nonsig = [sv for sv in range(part.n_skeleton_vertices)
                  if sv not in sig_sv]
        blocks["dir_free"] = slice(pos, pos + len(nonsig))
        pos += len(nonsig)
        blocks["neu_free"] = slice(pos, pos + part.n_skeleton_panels)
        pos += part.n_skeleton_panels
    else:  # mtf / cmtf
        for j in range(1, part.n + 1):
            m = part.gamma[j]
            blocks[f"u_{j}"] = slice(pos, pos + m.n_vertices)
            pos += m.n_vertices
            blocks[f"p_{j}"] = slice(pos, pos + m.n_panels)
            pos += m.n_panels
        blocks["p_sigma"] = slice(pos, pos + part.sigma.n_panels)
        pos += part.sigma.n_panels
    return DofLayout(kind=kind, size=pos, blocks=blocks)


def _stf_free_map(wb: Workbench, layout: DofLayout) -> np.ndarray:
    """Matrix F: stf unknowns -> single-trace free coefficients, with the
    Sigma-vertex Dirichlet DOFs identified with volume boundary DOFs."""
    stm = wb.stm
    part = wb.part
    F = np.zeros((stm.n_free, layout.size))
    sig_sv = set(int(s) for s in part.sigma.vertex_skeleton_ids)
    nonsig = [sv for sv in range(part.n_skeleton_vertices)
              if sv not in sig_sv]
    for sv in sig_sv:
        F[sv, wb.skel_to_vol[sv]] = 1.0
    off = layout.of("dir_free").start
    for i, sv in enumerate(nonsig):
        F[sv, off + i] = 1.0
    off = layout.of("neu_free").start
    for p in range(part.n_skeleton_panels):
        F[stm.n_dir + p, off + p] = 1.0
    return F


def _region_embed(stm: SingleTraceDofMap, code: int) -> np.ndarray:
    """Matrix E_j: free coefficients -> packed traces on one boundary."""
    r = stm.regions[code]
    nv, npan = r.mesh.n_vertices, r.mesh.n_panels
    E = np.zeros((nv + npan, stm.n_free))
    for loc, sv in enumerate(r.dir_index):
        E[loc, int(sv)] = 1.0
    for loc, sid in enumerate(r.neu_index):
        E[nv + loc, stm.n_dir + int(sid)] = r.neu_sign[loc]
    return E


def _mtf_region_map(wb: Workbench, layout: DofLayout, code: int) -> np.ndarray:
    """Matrix P: mtf unknowns -> packed traces on Gamma_j or Sigma."""
    mesh = wb.meshes[code]
    nv, npan = mesh.n_vertices, mesh.n_panels
    P = np.zeros((nv + npan, layout.size))
    if code == SIGMA:
        for loc in range(nv):
            P[loc, wb.sig_vol[loc]] = 1.0
        ps = layout.of("p_sigma")
        P[nv:, ps] = np.eye(npan)
    else:
        P[:nv, layout.of(f"u_{code}")] = np.eye(nv)
        P[nv:, layout.of(f"p_{code}")] = np.eye(npan)
    return P


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def assemble(kind: str, wb: Workbench, wave: IncidentWave) -> DiscreteSystem:
    """Assemble the chosen coupled system for one incident wave."""
    layout = make_layout(kind, wb)
    if kind == "costabel":
        M, b = _assemble_costabel(wb, layout, wave)
    elif kind in ("stf", "cstf"):
        M, b = _assemble_stf(wb, layout, wave, combined=(kind == "cstf"))
    else:
        M, b = _assemble_mtf(wb, layout, wave, combined=(kind == "cmtf"))
    if not np.all(np.isfinite(M)):
        raise FloatingPointError("non-finite entry in system matrix")
    return DiscreteSystem(matrix=M, rhs=b, layout=layout, kind=kind)


def _volume_part(wb: Workbench, layout: DofLayout):
    M = np.zeros((layout.size, layout.size), dtype=complex)
    b = np.zeros(layout.size, dtype=complex)
    vol = layout.of("volume")
    M[vol, vol] = wb.fem_blocks.a_sigma
    b[vol] = wb.fem_blocks.load
    return M, b


def _assemble_costabel(wb: Workbench, layout, wave):
    # a_S(U,V) + [A0 u, theta v] - [u, v]/2 = F(V) - [gamma0 Uinc, theta v]
    M, b = _volume_part(wb, layout)
    g0 = wb.meshes[0]
    R = np.zeros((g0.n_vertices + g0.n_panels, layout.size))
    for loc, sv in enumerate(g0.vertex_skeleton_ids):
        R[loc, wb.skel_to_vol[int(sv)]] = 1.0
    R[g0.n_vertices:, layout.of("p_sigma")] = np.eye(g0.n_panels)
    T = wb.block(0, wb.kappa0).bilinear
    pair = bem.skew_pair_matrix(g0)
    M += R.T @ (T - 0.5 * pair) @ R
    b -= R.T @ wb.inc_theta_vec(0, wave)
    return M, b


def _assemble_stf(wb: Workbench, layout, wave, combined: bool):
    M, b = _volume_part(wb, layout)
    stm = wb.stm
    F = _stf_free_map(wb, layout)
    embeds = {j: _region_embed(stm, j) for j in range(wb.part.n + 1)}
    # [A u, Theta v] over the skeleton
    for j in range(wb.part.n + 1):
        T = wb.block(j, wb.kappas[j]).bilinear
        RF = embeds[j] @ F
        M += RF.T @ T @ RF
    # + [Tr u, Tr v]/2 on Sigma
    TR = _sigma_trace_map(wb) @ F
    M += 0.5 * TR.T @ bem.skew_pair_matrix(wb.part.sigma) @ TR
    # incident data on Gamma_0 only
    g = embeds[0].T @ wb.inc_theta_vec(0, wave)
    if not combined:
        b -= F.T @ g
        return M, b
    # combined field: c(u, v) = [(A - Id/2) u, Theta C v] and the
    # (Id + C)^T-transformed incident vector
    C = assemble_C(wb.part, stm, wb.regM)
    G = np.zeros((stm.n_free, stm.n_free), dtype=complex)
    for j in range(wb.part.n + 1):
        T = wb.block(j, wb.kappas[j]).bilinear
        P = bem.theta_pair_matrix(wb.meshes[j])
        G += embeds[j].T @ (T - 0.5 * P) @ embeds[j]
    M += F.T @ (C.T @ G) @ F
    b -= F.T @ (np.eye(stm.n_free) + C).T @ g
    return M, b


def _sigma_trace_map(wb: Workbench) -> np.ndarray:
    """Tr in free coordinates: packed Sigma trace of the embedding."""
    stm = wb.stm
    sig = stm.regions[SIGMA]
    nv, npan = sig.mesh.n_vertices, sig.mesh.n_panels
    T = np.zeros((nv + npan, stm.n_free))
    for loc, sv in enumerate(sig.dir_index):
        T[loc, int(sv)] = 1.0
    for loc, sid in enumerate(sig.neu_index):
        T[nv + loc, stm.n_dir + int(sid)] = sig.neu_sign[loc]
    return T


def _assemble_mtf(wb: Workbench, layout, wave, combined: bool):
    M, b = _volume_part(wb, layout)
    part = wb.part
    maps = {code: _mtf_region_map(wb, layout, code)
            for code in list(range(1, part.n + 1)) + [SIGMA]}
    sig = part.sigma
    nvs = sig.n_vertices
    # diagonal blocks
    for j in range(1, part.n + 1):
        T = wb.block(j, wb.kappas[j]).bilinear \
            + wb.block(j, wb.kappa0).bilinear
        M += maps[j].T @ T @ maps[j]
    Tss = wb.block(SIGMA, wb.kappa0).bilinear
    M += maps[SIGMA].T @ (Tss + 0.5 * bem.skew_pair_matrix(sig)) @ maps[SIGMA]
    # cross blocks at kappa_0
    codes = list(range(1, part.n + 1)) + [SIGMA]
    for srccode in codes:
        for tgtcode in codes:
            if srccode == tgtcode:
                continue
            X = wb.cross(srccode, tgtcode).matrix
            M += maps[tgtcode].T @ X @ maps[srccode]
    # incident data on Gamma_1..Gamma_n and Sigma, plus sign
    for code in codes:
        b += maps[code].T @ wb.inc_theta_vec(code, wave)
    if not combined:
        return M, b
    # M*-augmentation of the Sigma Dirichlet rows (the p_sigma-tested
    # equations): rows += M^T . (P1-tested interior gamma_N^Sigma of all
    # source blocks), interior trace = average + p/2 on the self block
    regM = wb.regM
    B = mixed_mass(sig)
    rows = layout.of("p_sigma")
    N_self = Tss[:nvs, :].copy()
    N_self[:, nvs:] += 0.5 * B.T
    N_all = N_self @ maps[SIGMA]
    for j in range(1, part.n + 1):
        N_all += wb.cross(j, SIGMA).matrix[:nvs, :] @ maps[j]
    M[rows, :] += regM.matrix.T @ N_all
    inc_sig = incident_traces(wave, sig)
    b[rows] += regM.matrix.T @ (B.T @ inc_sig.neu)
    return M, b


# ---------------------------------------------------------------------------
# solve and reconstruct
# ---------------------------------------------------------------------------

def solve(system: DiscreteSystem, wb: Workbench, wave: IncidentWave,
          near_singular_tol: float = 1e-10) -> SolutionBundle:
    """LU solve with a sigma_min report; refuses near-singular systems."""
    smin, smax = sigma_extremes(system.matrix)
    logger.info("%s solve: n = %d, sigma_min = %.3e, sigma_max = %.3e",
                system.kind, system.layout.size, smin, smax)
    if smin <= near_singular_tol * smax:
        raise NearSingularSystemError(smin, smax)
    res = lu_solve(system.matrix, system.rhs)
    logger.info("residual %.3e, growth %.1f", res.residual, res.growth_factor)
    return SolutionBundle(coefficients=res.x, kind=system.kind,
                          layout=system.layout, workbench=wb, wave=wave,
                          sigma_min=smin, residual=res.residual)


def _bundle_traces(b: SolutionBundle):
    """Per-region trace vectors of a solution, by kind."""
    wb = b.workbench
    x = b.coefficients
    if b.kind == "costabel":
        g0 = wb.meshes[0]
        u0 = np.array([x[wb.skel_to_vol[int(sv)]]
                       for sv in g0.vertex_skeleton_ids])
        return {0: TraceVec(u0, x[b.layout.of("p_sigma")])}
    if b.kind in ("stf", "cstf"):
        F = _stf_free_map(wb, b.layout)
        free = F @ x
        m = wb.stm.embed(free)
        return {j: m.components[j] for j in range(wb.part.n + 1)}
    out = {}
    for j in range(1, wb.part.n + 1):
        out[j] = TraceVec(x[b.layout.of(f"u_{j}")], x[b.layout.of(f"p_{j}")])
    usig = x[wb.sig_vol]
    out[SIGMA] = TraceVec(usig, x[b.layout.of("p_sigma")])
    return out


def reconstruct(b: SolutionBundle, points) -> np.ndarray:
    """Total physical field at points, by the representation formulas."""
    wb = b.workbench
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(pts), dtype=complex)
    regions = np.array([wb.part.locate(p) for p in pts])
    traces = _bundle_traces(b)
    vol_mask = regions == SIGMA
    if np.any(vol_mask):
        out[vol_mask] = fem.interpolate(
            wb.vol, b.coefficients[:wb.vol.n_vertices], pts[vol_mask])
    if b.kind in ("costabel", "stf", "cstf"):
        for j in range(wb.part.n + 1):
            m = regions == j
            if not np.any(m):
                continue
            val = bem.eval_potential(wb.kappas[j], wb.meshes[j], traces[j],
                                     pts[m], wb.quad)
            if j == 0:
                val = val + b.wave.field(pts[m])
            out[m] = val
        return out
    # mtf / cmtf
    for j in range(1, wb.part.n + 1):
        m = regions == j
        if np.any(m):
            out[m] = bem.eval_potential(wb.kappas[j], wb.meshes[j],
                                        traces[j], pts[m], wb.quad)
    m = regions == 0
    if np.any(m):
        val = b.wave.field(pts[m])
        val -= bem.eval_potential(wb.kappa0, wb.part.sigma, traces[SIGMA],
                                  pts[m], wb.quad)
        for j in range(1, wb.part.n + 1):
            val -= bem.eval_potential(wb.kappa0, wb.meshes[j], traces[j],
                                      pts[m], wb.quad)
        out[m] = val
    return out
