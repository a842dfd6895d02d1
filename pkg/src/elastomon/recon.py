"""Monotonicity tests: negative-eigenvalue counting over a grid of test blocks.

A block B is classified as inside the inclusion support when the
symmetrized matrix G0 + D_B - G has few negative eigenvalues, where G and
G0 are the true and background NtD matrices and D_B the linearized update
for nonnegative test weights on B. Counting with weight pattern
(0, a2, 0) isolates the shear-modulus support; the set difference of the
cavity-filled masks separates the remaining inclusions.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from elastomon.mesh import Mesh
from elastomon.ntd import SnapshotFields, frechet_block

DEFAULT_EIGEN_REL = 1e-10


@dataclass(frozen=True)
class TestGrid:
    """k^3 axis-aligned blocks tiling the cube, aligned to element boundaries.

    Block ordering matches the element convention: index = ix + k*(iy + k*iz).
    """

    k: int
    boxes: np.ndarray
    block_elements: tuple
    centers: np.ndarray


def build_test_grid(mesh: Mesh, k: int) -> TestGrid:
    """Tile the cube into k^3 blocks; k must divide the mesh resolution."""
    n = mesh.n
    if k < 1 or n % k != 0:
        raise ValueError(f"test grid k={k} must divide mesh n={n}")
    per = n // k
    lo = mesh.bounds[0]
    side = mesh.h * per

    boxes = np.empty((k**3, 2, 3))
    centers = np.empty((k**3, 3))
    blocks = []
    for b in range(k**3):
        bx = b % k
        by = (b // k) % k
        bz = b // (k * k)
        corner = lo + side * np.array([bx, by, bz])
        boxes[b, 0] = corner
        boxes[b, 1] = corner + side
        centers[b] = corner + 0.5 * side
        ex = np.arange(bx * per, (bx + 1) * per)
        ey = np.arange(by * per, (by + 1) * per)
        ez = np.arange(bz * per, (bz + 1) * per)
        ids = (
            ex[None, None, :]
            + n * ey[None, :, None]
            + n * n * ez[:, None, None]
        ).ravel()
        blocks.append(np.sort(ids))
    return TestGrid(k=int(k), boxes=boxes, block_elements=tuple(blocks), centers=centers)


def count_negative_eigenvalues(A: np.ndarray, eps_rel: float = DEFAULT_EIGEN_REL) -> int:
    """Number of eigenvalues below -eps_rel * max(|sigma_min|, |sigma_max|).

    Multiplicity is counted; ``A`` must be symmetric and finite.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")
    sigma = np.linalg.eigvalsh(A)
    scale = max(abs(sigma[0]), abs(sigma[-1]))
    return int(np.sum(sigma < -eps_rel * scale))


@dataclass(frozen=True)
class EigencountReport:
    """Per-block eigencounts for one test weight pattern."""

    counts: np.ndarray
    sigma_min: np.ndarray
    sigma_max: np.ndarray
    alpha: tuple[float, float, float]
    threshold: int
    eps_rel: float


def _test_matrix(G: np.ndarray, G0: np.ndarray, D_B: np.ndarray) -> np.ndarray:
    A = G0 + D_B - G
    return 0.5 * (A + A.T)


def test_block(
    G: np.ndarray,
    G0: np.ndarray,
    snapshots: SnapshotFields,
    elements,
    alpha,
    threshold: int,
    eps_rel: float = DEFAULT_EIGEN_REL,
) -> tuple[int, bool]:
    """Eigencount for one block and its inside/outside decision."""
    if G.shape != G0.shape or G.shape[0] != snapshots.n_loads:
        raise ValueError("operator dimensions disagree across G, G0 and snapshots")
    A = _test_matrix(G, G0, frechet_block(snapshots, elements, alpha))
    n_b = count_negative_eigenvalues(A, eps_rel)
    return n_b, n_b <= threshold


def _run_grid(G, G0, snapshots, grid, alpha, eps_rel, workers):
    def one(block):
        A = _test_matrix(G, G0, frechet_block(snapshots, grid.block_elements[block], alpha))
        sigma = np.linalg.eigvalsh(A)
        scale = max(abs(sigma[0]), abs(sigma[-1]))
        return int(np.sum(sigma < -eps_rel * scale)), sigma[0], sigma[-1]

    nb = len(grid.block_elements)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, range(nb)))
    else:
        rows = [one(b) for b in range(nb)]
    counts = np.array([r[0] for r in rows], dtype=np.int64)
    smin = np.array([r[1] for r in rows])
    smax = np.array([r[2] for r in rows])
    return counts, smin, smax


def reconstruct_D(
    G: np.ndarray,
    G0: np.ndarray,
    snapshots: SnapshotFields,
    grid: TestGrid,
    alpha,
    threshold: int,
    eps_rel: float = DEFAULT_EIGEN_REL,
    workers: int = 1,
) -> tuple[np.ndarray, EigencountReport]:
    """Raw inside mask for the combined inclusion support (no cavity fill)."""
    a = tuple(float(v) for v in alpha)
    if any(v < 0 for v in a):
        raise ValueError(f"test weights must be nonnegative, got {a}")
    if all(v == 0 for v in a):
        raise ValueError("test weights must not all vanish")
    counts, smin, smax = _run_grid(G, G0, snapshots, grid, a, eps_rel, workers)
    report = EigencountReport(
        counts=counts, sigma_min=smin, sigma_max=smax, alpha=a,
        threshold=int(threshold), eps_rel=eps_rel,
    )
    return counts <= threshold, report


def reconstruct_mu(
    G: np.ndarray,
    G0: np.ndarray,
    snapshots: SnapshotFields,
    grid: TestGrid,
    alpha2: float,
    threshold: int,
    eps_rel: float = DEFAULT_EIGEN_REL,
    workers: int = 1,
    rho_constant: bool = True,
    full_neumann: bool = True,
) -> tuple[np.ndarray, EigencountReport]:
    """Raw inside mask for the shear-modulus support, weights (0, a2, 0)."""
    if not alpha2 > 0:
        raise ValueError(f"shear test weight must be positive, got {alpha2}")
    if not (rho_constant and full_neumann):
        warnings.warn(
            "shear-support test assumes constant density and a traction-only "
            "boundary; results outside that regime are heuristic",
            stacklevel=2,
        )
    return reconstruct_D(
        G, G0, snapshots, grid, (0.0, float(alpha2), 0.0), threshold, eps_rel, workers
    )


def fill_cavities(mask: np.ndarray, grid: TestGrid) -> np.ndarray:
    """Add to the mask every unmarked region not face-connected to the boundary."""
    k = grid.k
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (k**3,):
        raise ValueError(f"mask must have {k**3} entries, got {mask.shape}")
    vol = mask.reshape(k, k, k)  # axes (z, y, x) per block index convention
    labels, n_labels = ndimage.label(~vol)
    if n_labels == 0:
        return mask.copy()
    reached = set()
    for axis in range(3):
        for sl in (0, -1):
            face = np.take(labels, sl, axis=axis)
            reached.update(np.unique(face[face > 0]).tolist())
    fill = ~vol & ~np.isin(labels, sorted(reached))
    return (vol | fill).ravel()


LABEL_EXTERIOR = "exterior"
LABEL_D2 = "D2"
LABEL_D_ONLY = "D_only"


def classify(
    mask_D_filled: np.ndarray, mask_D2_filled: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Three-way block labels and the blocks where the masks disagree.

    A block in the shear mask but not in the combined mask keeps the D2
    label and is reported in the returned inconsistency index array.
    """
    mask_D_filled = np.asarray(mask_D_filled, dtype=bool)
    mask_D2_filled = np.asarray(mask_D2_filled, dtype=bool)
    if mask_D_filled.shape != mask_D2_filled.shape:
        raise ValueError("masks live on different grids")
    labels = np.full(mask_D_filled.shape, LABEL_EXTERIOR, dtype=object)
    labels[mask_D_filled] = LABEL_D_ONLY
    labels[mask_D2_filled] = LABEL_D2
    inconsistent = np.nonzero(mask_D2_filled & ~mask_D_filled)[0]
    return labels, inconsistent


@dataclass(frozen=True)
class ThresholdSuggestion:
    """Largest-gap statistics of an eigencount distribution."""

    significant: bool
    suggested: int | None
    gap_low: int
    gap_high: int
    low_range: tuple[int, int]
    high_range: tuple[int, int]


def threshold_advisor(counts) -> ThresholdSuggestion:
    """Suggest a threshold from the largest gap in the sorted eigencounts.

    The gap is significant when it exceeds 1 and is at least twice the
    median of the remaining positive gaps (within-cluster scatter); the
    suggestion is the floor of the gap midpoint.
    """
    counts = np.sort(np.asarray(counts, dtype=np.int64))
    if counts.size == 0:
        raise ValueError("empty eigencount report")
    diffs = np.diff(counts)
    if counts.size == 1 or diffs.max() == 0:
        c = int(counts[0])
        return ThresholdSuggestion(False, None, c, c, (c, int(counts[-1])), (c, int(counts[-1])))
    i = int(np.argmax(diffs))
    lo, hi = int(counts[i]), int(counts[i + 1])
    gap = hi - lo
    rest = np.delete(diffs, i)
    rest = rest[rest > 0]
    scatter = float(np.median(rest)) if rest.size else 0.0
    significant = gap > 1 and gap >= 2.0 * scatter
    return ThresholdSuggestion(
        significant=significant,
        suggested=(lo + hi) // 2 if significant else None,
        gap_low=lo,
        gap_high=hi,
        low_range=(int(counts[0]), lo),
        high_range=(hi, int(counts[-1])),
    )
