"""Discrete Neumann-to-Dirichlet operators and their linearization.

The boundary operator is represented by its Galerkin matrix on a basis of
patch traction loads: G[i, j] = f_i . (S^-1 f_j), which equals the
boundary pairing of load i with the displacement produced by load j. The
derivative of G with respect to the material parameters has, per element,
the quadratic-form value

    -( 2*h_mu*strain_i:strain_j + h_lam*div_i*div_j
       - omega^2*h_rho*u_i.u_j )

integrated against background solutions, which is assembled here from
cached quadrature snapshots without any new PDE solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from elastomon.fem import Factorization, element_dof_map, element_matrices, load_vector, solve
from elastomon.mesh import Mesh, PatchSet

MODES = ("all", "normal_only", "tangential_only")

_MODE_DIRECTIONS = {
    "all": ("normal", "t1", "t2"),
    "normal_only": ("normal",),
    "tangential_only": ("t1", "t2"),
}


@dataclass(frozen=True)
class LoadBasis:
    """Ordered patch traction loads; columns are patch-major, direction-minor."""

    loads: tuple
    F: np.ndarray
    mode: str


def build_load_basis(mesh: Mesh, patches: PatchSet, mode: str = "all", skip_faces=()) -> LoadBasis:
    """Assemble the load-vector matrix for every (patch, direction) pair.

    ``skip_faces`` drops patches lying on the given cube faces (used when a
    face is clamped and carries no traction basis).
    """
    if mode not in _MODE_DIRECTIONS:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    skip = {int(f) for f in skip_faces}
    dirs = _MODE_DIRECTIONS[mode]

    loads = []
    cols = []
    for p in range(patches.count):
        if int(patches.patch_cube_face[p]) in skip:
            continue
        for d in dirs:
            loads.append((p, d))
            cols.append(load_vector(mesh, patches, p, d))
    F = np.column_stack(cols)
    F.setflags(write=False)
    return LoadBasis(loads=tuple(loads), F=F, mode=mode)


def mode_column_indices(basis: LoadBasis, mode: str) -> np.ndarray:
    """Columns of a basis whose direction belongs to ``mode``."""
    if mode not in _MODE_DIRECTIONS:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    dirs = set(_MODE_DIRECTIONS[mode])
    return np.array([i for i, (_, d) in enumerate(basis.loads) if d in dirs], dtype=np.int64)


def asymmetry(A: np.ndarray) -> float:
    """max |A - A^T| / max |A|, 0 for the zero matrix."""
    scale = float(np.max(np.abs(A)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(A - A.T))) / scale


@dataclass(frozen=True)
class NtdMatrix:
    """Dense symmetric Galerkin matrix of the boundary operator."""

    values: np.ndarray
    presym_defect: float
    provenance: str = ""


def ntd_matrix(fact: Factorization, basis: LoadBasis, provenance: str = "", tol: float = 1e-8) -> NtdMatrix:
    """G = F^T S^-1 F, symmetrized; records the pre-symmetrization defect."""
    sol = solve(fact, basis.F, tol=tol)
    raw = basis.F.T @ sol.U
    G = 0.5 * (raw + raw.T)
    G.setflags(write=False)
    return NtdMatrix(values=G, presym_defect=asymmetry(raw), provenance=provenance)


class SnapshotFields:
    """Per-element quadrature products of a set of background solutions.

    For each element the square-root-weighted strain, divergence and
    displacement rows of every solution column are cached (or recomputed on
    demand when the cache would exceed ``cache_limit_bytes``), so that any
    element-subset Gram matrix needs one matrix product and no PDE solve.
    """

    def __init__(self, mesh: Mesh, U0: np.ndarray, omega: float, cache_limit_bytes: float = 2e9):
        if U0.shape[0] != mesh.n_dofs:
            raise ValueError("solution matrix does not match mesh dof count")
        self.mesh = mesh
        self.omega = float(omega)
        self.U0 = U0
        self.n_loads = U0.shape[1]
        em = element_matrices(mesh.h)
        self._rows = (em.strain_rows, em.div_rows, em.disp_rows)
        self._dofmap = element_dof_map(mesh)
        nel = mesh.n_elements
        need = nel * (48 + 8 + 24) * self.n_loads * 8
        self._cache = None
        if need <= cache_limit_bytes:
            self._cache = tuple(
                self._transform(op, np.arange(nel)) for op in self._rows
            )

    def _transform(self, op: np.ndarray, elements: np.ndarray) -> np.ndarray:
        """(len(elements), rows, n_loads) quadrature rows for an element subset."""
        Ue = self.U0[self._dofmap[elements]]          # (ne, 24, N)
        ne = elements.size
        flat = Ue.transpose(1, 0, 2).reshape(24, ne * self.n_loads)
        out = (op @ flat).reshape(op.shape[0], ne, self.n_loads)
        return np.ascontiguousarray(out.transpose(1, 0, 2))

    def block_rows(self, elements) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stacked (rows, n_loads) factors for strain, divergence, displacement.

        Each returned X satisfies X^T X = the corresponding Gram matrix
        integrated over the element subset (strain factor includes the
        factor 2 of the shear energy pairing).
        """
        elements = np.asarray(elements, dtype=np.int64)
        if self._cache is not None:
            picked = (c[elements] for c in self._cache)
        else:
            picked = (self._transform(op, elements) for op in self._rows)
        return tuple(p.reshape(-1, self.n_loads) for p in picked)

    def _weighted_gram(self, which: int, weights: np.ndarray) -> np.ndarray:
        """Sum_e weights[e] * X_e^T X_e for one product kind, split by sign."""
        out = np.zeros((self.n_loads, self.n_loads))
        for sign in (1.0, -1.0):
            sel = np.nonzero(sign * weights > 0)[0]
            if sel.size == 0:
                continue
            if self._cache is not None:
                rows = self._cache[which][sel]
            else:
                rows = self._transform(self._rows[which], sel)
            scale = np.sqrt(sign * weights[sel])
            X = (rows * scale[:, None, None]).reshape(-1, self.n_loads)
            out += sign * (X.T @ X)
        return out


def frechet_matrix(
    snapshots: SnapshotFields,
    h_lam: np.ndarray,
    h_mu: np.ndarray,
    h_rho: np.ndarray,
    symmetrize: bool = True,
) -> np.ndarray:
    """Derivative of the NtD Galerkin matrix for a per-element perturbation.

    Linear in (h_lam, h_mu, h_rho); only elements with a nonzero entry
    contribute.
    """
    nel = snapshots.mesh.n_elements
    h_lam = np.broadcast_to(np.asarray(h_lam, dtype=float), (nel,))
    h_mu = np.broadcast_to(np.asarray(h_mu, dtype=float), (nel,))
    h_rho = np.broadcast_to(np.asarray(h_rho, dtype=float), (nel,))

    D = -(
        snapshots._weighted_gram(0, h_mu)
        + snapshots._weighted_gram(1, h_lam)
        - snapshots.omega**2 * snapshots._weighted_gram(2, h_rho)
    )
    if symmetrize:
        D = 0.5 * (D + D.T)
    return D


def frechet_block(snapshots: SnapshotFields, elements, alpha) -> np.ndarray:
    """Linearized test matrix for weights alpha = (a1, a2, a3) >= 0 on a block.

    Equals the derivative for the perturbation (a1, a2, -a3) restricted to
    ``elements``; assembled as a negated Gram sum, so it is negative
    semidefinite by construction. Cost scales with the block size and needs
    no new solve.
    """
    a1, a2, a3 = (float(a) for a in alpha)
    if a1 < 0 or a2 < 0 or a3 < 0:
        raise ValueError(f"test weights must be nonnegative, got {(a1, a2, a3)}")
    elements = np.asarray(elements, dtype=np.int64)
    N = snapshots.n_loads
    if elements.size == 0 or (a1 == 0.0 and a2 == 0.0 and a3 == 0.0):
        return np.zeros((N, N))

    Xs, Xd, Xp = snapshots.block_rows(elements)
    D = np.zeros((N, N))
    if a2 > 0:
        D -= a2 * (Xs.T @ Xs)
    if a1 > 0:
        D -= a1 * (Xd.T @ Xd)
    if a3 > 0:
        D -= a3 * snapshots.omega**2 * (Xp.T @ Xp)
    return 0.5 * (D + D.T)
