"""Trilinear hexahedral discretization of time-harmonic linear elasticity.

The weak form pairs, for trial u and test v,

    integral( 2*mu*sym_grad(u):sym_grad(v) + lam*div(u)*div(v)
              - omega^2*rho*u.v ) dx  =  integral_boundary( g.v ) dS,

so the assembled system is S = K(lam, mu) - omega^2 * M(rho) with traction
load vectors on the right. Elements are Q1 voxels with 2x2x2 Gauss
quadrature, which integrates every element integrand exactly.

Element degrees of freedom are node-major (dof = 3*node + component), and
each of the three unit-coefficient element matrices is built as a Gram
matrix Q^T Q of square-root-weighted quadrature rows. This makes symmetry
and semidefiniteness structural rather than numerical, and the same row
matrices later evaluate the linearization integrand on background
solutions (see ntd.SnapshotFields).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.linalg
from scipy.sparse.linalg import splu

from elastomon.mesh import FACE_NORMALS, FACE_TANGENTS1, FACE_TANGENTS2, Mesh, PatchSet
from elastomon.materials import MaterialField


class ResonanceError(RuntimeError):
    """The assembled operator is singular or too ill-conditioned to trust."""


# 2-point Gauss abscissae on [0, 1]
_GP = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


def _quadrature_rows(h: float):
    """Square-root-weighted quadrature row operators for one voxel element.

    Returns (strain_rows, div_rows, disp_rows) of shapes (48, 24), (8, 24)
    and (24, 24). For element dof vectors u, v:

        (strain_rows @ u) . (strain_rows @ v) = integral 2*sym_grad(u):sym_grad(v)
        (div_rows    @ u) . (div_rows    @ v) = integral div(u)*div(v)
        (disp_rows   @ u) . (disp_rows   @ v) = integral u.v
    """
    pts = [(x * h, y * h, z * h) for z in _GP for y in _GP for x in _GP]
    w = (h / 2.0) ** 3

    def shape_1d(t, i):
        return 1.0 - t / h if i == 0 else t / h

    def dshape_1d(i):
        return -1.0 / h if i == 0 else 1.0 / h

    strain_rows = np.zeros((48, 24))
    div_rows = np.zeros((8, 24))
    disp_rows = np.zeros((24, 24))
    off_scale = np.sqrt(2.0)

    for q, (x, y, z) in enumerate(pts):
        N = np.zeros(8)
        G = np.zeros((8, 3))
        for a in range(8):
            ax, ay, az = a & 1, (a >> 1) & 1, (a >> 2) & 1
            nx, ny, nz = shape_1d(x, ax), shape_1d(y, ay), shape_1d(z, az)
            N[a] = nx * ny * nz
            G[a] = (dshape_1d(ax) * ny * nz, nx * dshape_1d(ay) * nz, nx * ny * dshape_1d(az))

        ev = np.zeros((6, 8, 3))
        for a in range(8):
            ev[0, a, 0] = G[a, 0]
            ev[1, a, 1] = G[a, 1]
            ev[2, a, 2] = G[a, 2]
            ev[3, a, 0] = 0.5 * G[a, 1]
            ev[3, a, 1] = 0.5 * G[a, 0]
            ev[4, a, 0] = 0.5 * G[a, 2]
            ev[4, a, 2] = 0.5 * G[a, 0]
            ev[5, a, 1] = 0.5 * G[a, 2]
            ev[5, a, 2] = 0.5 * G[a, 1]
        ev[3:] *= off_scale
        strain_rows[6 * q : 6 * q + 6] = np.sqrt(2.0 * w) * ev.reshape(6, 24)

        dv = np.zeros((8, 3))
        dv[:, :] = G
        div_rows[q] = np.sqrt(w) * dv.reshape(24)

        pv = np.zeros((3, 8, 3))
        for c in range(3):
            pv[c, :, c] = N
        disp_rows[3 * q : 3 * q + 3] = np.sqrt(w) * pv.reshape(3, 24)

    return strain_rows, div_rows, disp_rows


@dataclass(frozen=True)
class ElementMatrices:
    """Unit-coefficient element matrices and their quadrature row factors."""

    h: float
    k_mu: np.ndarray
    k_lam: np.ndarray
    mass: np.ndarray
    strain_rows: np.ndarray
    div_rows: np.ndarray
    disp_rows: np.ndarray


def element_matrices(h: float) -> ElementMatrices:
    """Element matrices for edge length ``h``: K_mu, K_lam scale with h, mass with h^3."""
    if h <= 0:
        raise ValueError(f"element edge length must be positive, got {h}")
    strain_rows, div_rows, disp_rows = _quadrature_rows(h)

    def gram(X):
        A = X.T @ X
        return 0.5 * (A + A.T)

    return ElementMatrices(
        h=float(h),
        k_mu=gram(strain_rows),
        k_lam=gram(div_rows),
        mass=gram(disp_rows),
        strain_rows=strain_rows,
        div_rows=div_rows,
        disp_rows=disp_rows,
    )


def element_dof_map(mesh: Mesh) -> np.ndarray:
    """(n_elements, 24) global dof indices, node-major within the element."""
    dofs = (3 * mesh.elements[:, :, None] + np.arange(3)[None, None, :]).reshape(-1, 24)
    return dofs


@dataclass(frozen=True)
class SystemMatrix:
    """Assembled symmetric operator with Dirichlet dofs eliminated.

    ``matrix`` is the reduced sparse operator over ``free_dofs``;
    ``dirichlet_dofs`` lists the eliminated global dofs (may be empty).
    """

    matrix: sp.csc_matrix
    omega: float
    n_dofs_full: int
    free_dofs: np.ndarray
    dirichlet_dofs: np.ndarray

    @property
    def n_free(self) -> int:
        return self.free_dofs.size


def assemble(
    mesh: Mesh,
    field: MaterialField,
    omega: float,
    dirichlet_faces=(),
) -> SystemMatrix:
    """Assemble S = K(lam, mu) - omega^2 * M(rho) over the mesh.

    ``dirichlet_faces`` is an iterable of cube face ids whose nodes are
    clamped in all components; elimination is symmetric (rows and columns
    dropped).
    """
    if field.lam_e.shape[0] != mesh.n_elements:
        raise ValueError("material field does not match mesh element count")
    em = element_matrices(mesh.h)
    dofmap = element_dof_map(mesh)

    coef = (
        field.mu_e[:, None, None] * em.k_mu[None]
        + field.lam_e[:, None, None] * em.k_lam[None]
        - (omega**2) * field.rho_e[:, None, None] * em.mass[None]
    )
    rows = np.repeat(dofmap, 24, axis=1).ravel()
    cols = np.tile(dofmap, (1, 24)).ravel()
    nd = mesh.n_dofs
    S = sp.coo_matrix((coef.ravel(), (rows, cols)), shape=(nd, nd)).tocsc()
    # duplicate summation order differs between (i,j) and (j,i); restore
    # exact symmetry (entrywise means commute in IEEE arithmetic)
    S = (0.5 * (S + S.T)).tocsc()

    constrained = np.zeros(nd, dtype=bool)
    for face_id in dirichlet_faces:
        for node in mesh.nodes_on_face(int(face_id)):
            constrained[3 * node : 3 * node + 3] = True
    free = np.nonzero(~constrained)[0]
    if constrained.any():
        S = S[free][:, free].tocsc()

    return SystemMatrix(
        matrix=S,
        omega=float(omega),
        n_dofs_full=nd,
        free_dofs=free,
        dirichlet_dofs=np.nonzero(constrained)[0],
    )


def load_vector(mesh: Mesh, patches: PatchSet, patch_id: int, direction: str) -> np.ndarray:
    """Nodal load for a unit-magnitude constant traction on one patch.

    ``direction`` is one of ``normal``, ``t1``, ``t2`` in the face frame of
    the patch. The 2x2 Gauss surface rule on a bilinear face reduces, for a
    constant traction, to weight h^2/4 at each face node; that keeps the
    boundary pairing consistent with the volume quadrature.
    """
    if not 0 <= patch_id < patches.count:
        raise ValueError(f"patch id {patch_id} out of range 0..{patches.count - 1}")
    face_id = int(patches.patch_cube_face[patch_id])
    if direction == "normal":
        d = FACE_NORMALS[face_id]
    elif direction == "t1":
        d = FACE_TANGENTS1[face_id]
    elif direction == "t2":
        d = FACE_TANGENTS2[face_id]
    else:
        raise ValueError(f"direction must be normal, t1 or t2, got {direction!r}")

    w = mesh.h**2 / 4.0
    f = np.zeros(mesh.n_dofs)
    for row in patches.patch_faces[patch_id]:
        for node in mesh.face_nodes[row]:
            f[3 * node : 3 * node + 3] += w * d
    return f


@dataclass
class Factorization:
    """Direct factorization of the reduced system, reused for every load."""

    system: SystemMatrix
    lu: object


@dataclass(frozen=True)
class SolutionSet:
    """Nodal solutions (full-length columns, zeros on Dirichlet dofs)."""

    U: np.ndarray
    residuals: np.ndarray


def factorize(system: SystemMatrix) -> Factorization:
    """LU-factorize the reduced operator; raises ResonanceError when singular."""
    try:
        lu = splu(system.matrix.tocsc())
    except RuntimeError as exc:
        raise ResonanceError(f"operator factorization failed: {exc}") from exc
    return Factorization(system=system, lu=lu)


def solve(fact: Factorization, F: np.ndarray, tol: float = 1e-8) -> SolutionSet:
    """Solve S u = f for every column of F (full-length load vectors).

    Each column must meet ``norm(S u - f) <= tol * norm(f)`` on the reduced
    system (absolute for zero loads); otherwise the operator is reported as
    resonant/ill-conditioned.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.shape[0] != fact.system.n_dofs_full:
        F = F.T
    if F.shape[0] != fact.system.n_dofs_full:
        raise ValueError("load matrix does not match system size")

    free = fact.system.free_dofs
    Fr = F[free]
    Ur = fact.lu.solve(Fr)
    if Ur.ndim == 1:
        Ur = Ur[:, None]

    R = fact.system.matrix @ Ur - Fr
    fn = np.linalg.norm(Fr, axis=0)
    rn = np.linalg.norm(R, axis=0)
    rel = np.where(fn > 0, rn / np.maximum(fn, 1e-300), rn)
    if np.any(~np.isfinite(rel)) or np.any(rel > tol):
        worst = float(np.nanmax(rel))
        raise ResonanceError(
            f"solve residual {worst:.3e} exceeds {tol:.1e}; "
            "operator is singular or near a resonance"
        )

    U = np.zeros((fact.system.n_dofs_full, F.shape[1]))
    U[free] = Ur
    return SolutionSet(U=U, residuals=rel)


@dataclass(frozen=True)
class InertiaReport:
    """Signature (n_neg, n_zero, n_pos) of the assembled symmetric operator."""

    n_neg: int
    n_zero: int
    n_pos: int
    min_pivot: float
    max_pivot: float
    near_singular: bool
    method: str


_PIVOT_ZERO_REL = 1e-12
_DENSE_INERTIA_LIMIT = 6000


def _inertia_dense(A: np.ndarray) -> tuple[int, int, int, float, float]:
    lower, d, _ = scipy.linalg.ldl(A)
    n = A.shape[0]
    pivots = []
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            pivots.extend(np.linalg.eigvalsh(d[i : i + 2, i : i + 2]))
            i += 2
        else:
            pivots.append(d[i, i])
            i += 1
    pivots = np.asarray(pivots)
    mx = float(np.max(np.abs(pivots))) if pivots.size else 0.0
    cut = _PIVOT_ZERO_REL * mx
    n_zero = int(np.sum(np.abs(pivots) <= cut))
    n_neg = int(np.sum(pivots < -cut))
    return n_neg, n_zero, pivots.size - n_neg - n_zero, float(np.min(np.abs(pivots))), mx


def resonance_guard(system: SystemMatrix) -> InertiaReport:
    """Inertia of the reduced operator, flagging near-singularity.

    Uses a diagonal-pivoted sparse factorization (valid for inertia by
    congruence when no off-diagonal pivoting occurs); falls back to a dense
    LDL^T when pivoting broke symmetry and the system is small enough.
    """
    A = system.matrix.tocsc()
    method = "sparse-ldl"
    pivots = None
    try:
        lu = splu(
            A,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options=dict(SymmetricMode=True),
        )
        if np.array_equal(lu.perm_r, lu.perm_c):
            pivots = lu.U.diagonal()
    except RuntimeError:
        pivots = None

    if pivots is None:
        if system.n_free > _DENSE_INERTIA_LIMIT:
            raise ResonanceError(
                "inertia unavailable: sparse factorization pivoted off the "
                f"diagonal and the system ({system.n_free} dofs) is too large "
                "for the dense fallback"
            )
        n_neg, n_zero, n_pos, mn, mx = _inertia_dense(A.toarray())
        return InertiaReport(
            n_neg=n_neg,
            n_zero=n_zero,
            n_pos=n_pos,
            min_pivot=mn,
            max_pivot=mx,
            near_singular=n_zero > 0 or mn < _PIVOT_ZERO_REL * mx,
            method="dense-ldl",
        )

    pivots = np.asarray(pivots)
    mx = float(np.max(np.abs(pivots))) if pivots.size else 0.0
    cut = _PIVOT_ZERO_REL * mx
    n_zero = int(np.sum(np.abs(pivots) <= cut))
    n_neg = int(np.sum(pivots < -cut))
    n_pos = pivots.size - n_zero - n_neg
    mn = float(np.min(np.abs(pivots))) if pivots.size else 0.0
    return InertiaReport(
        n_neg=n_neg,
        n_zero=n_zero,
        n_pos=n_pos,
        min_pivot=mn,
        max_pivot=mx,
        near_singular=n_zero > 0 or mn < _PIVOT_ZERO_REL * mx,
        method=method,
    )
