"""The regularizing operator on the heterogeneous boundary and the
compact coupling operator feeding the combined-field formulations.

M = i (-Lap_Sigma + Id)^{-1} realized with the periodic arc-length P1
stiffness S and mass Mm:  phi (P0) -> i (S + Mm)^{-1} B^T phi  (P1).
Its sign property Im<M phi, conj phi> = phi^H B (S+Mm)^{-1} B^T phi >= 0
is strict away from the alternating kernel of the mixed mass B (present
on closed curves with even panel counts).

C reads the induced Neumann trace on Sigma, applies M, and extends the
resulting Dirichlet datum by zero onto the skeleton:
    C(v) = (gamma_dir^j E_Sigma M Tr_nu(v), 0)_j,
expressed here directly in the free single-trace coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SIGMA, CurveMesh, SubdomainPartition
from .traces import SingleTraceDofMap, mixed_mass, p1_mass, p1_stiffness


@dataclass
class RegularizerM:
    mesh: CurveMesh
    SM: np.ndarray        # S + Mm, symmetric positive definite
    B: np.ndarray         # mixed P0 x P1 mass
    matrix: np.ndarray    # dense P0 -> P1 realization i (S+Mm)^{-1} B^T

    def apply(self, phi: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(phi, dtype=complex)

    def dual_pairing(self, phi: np.ndarray, psi: np.ndarray) -> complex:
        """<M phi, psi>_Sigma = psi^T B M phi (bilinear)."""
        return complex(np.asarray(psi) @ (self.B @ (self.matrix @ phi)))


def assemble_M(mesh: CurveMesh) -> RegularizerM:
    """Regularizer on a closed boundary curve."""
    if mesh.validate():
        raise ValueError("regularizer requires a closed curve")
    SM = p1_stiffness(mesh) + p1_mass(mesh)
    eig = np.linalg.eigvalsh(SM)
    if eig[0] <= 0.0:
        raise ValueError("S + M not positive definite")
    B = mixed_mass(mesh)
    matrix = 1j * np.linalg.solve(SM, B.T)
    return RegularizerM(mesh=mesh, SM=SM, B=B, matrix=matrix)


def apply_M_star(m: RegularizerM, p: np.ndarray) -> np.ndarray:
    """Adjoint regularizer via the defining relation <M* p, q> = <M q, p>.

    Computed independently of apply(): the tested identity B (M* p) =
    (B M)^T p is lifted through the pseudo-inverse of B (B has the
    alternating kernel vector on even closed curves, which pairs to
    zero with every P0 function).
    """
    p = np.asarray(p, dtype=complex)
    if len(p) != m.mesh.n_panels:
        raise ValueError("density size mismatch")
    rhs = (m.B @ m.matrix).T @ p
    return np.linalg.lstsq(m.B, rhs, rcond=None)[0]


@dataclass
class ExtensionMap:
    """Nodal extension-by-zero from Sigma P1 onto the skeleton Dirichlet
    DOFs; a right inverse of the Sigma vertex restriction by construction.

    The continuous-level operator is a bounded extension; extension by
    zero is exact at fixed mesh and only enters compact coupling terms.
    """

    matrix: np.ndarray  # (n_dir_free, n_sigma_vertices)


def nodal_extension(stm: SingleTraceDofMap) -> ExtensionMap:
    sig = stm.regions[SIGMA]
    E = np.zeros((stm.n_dir, sig.mesh.n_vertices))
    for loc, sv in enumerate(sig.dir_index):
        E[int(sv), loc] = 1.0
    return ExtensionMap(matrix=E)


def assemble_C(part: SubdomainPartition, stm: SingleTraceDofMap,
               m: RegularizerM, ext: ExtensionMap | None = None) -> np.ndarray:
    """Matrix of C in the free single-trace coordinates.

    Reads the free Neumann DOFs through Tr_nu, applies M, extends onto
    the free Dirichlet DOFs; the Neumann output is zero, so C^2 = 0
    exactly.
    """
    ext = ext or nodal_extension(stm)
    sig = stm.regions[SIGMA]
    # Tr_nu from free coordinates: sign of the Sigma mesh orientation
    S_nu = np.zeros((sig.mesh.n_panels, stm.n_neu))
    for loc, sid in enumerate(sig.neu_index):
        S_nu[loc, int(sid)] = sig.neu_sign[loc]
    C = np.zeros((stm.n_free, stm.n_free), dtype=complex)
    C[:stm.n_dir, stm.n_dir:] = ext.matrix @ (m.matrix @ S_nu)
    return C
