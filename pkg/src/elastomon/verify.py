"""Acceptance checks runnable from the CLI (``elastomon verify``) and pytest.

Each check returns a CheckResult; the fast level covers the sub-minute
property checks, the full level adds the finite-difference slope study and
the desk-scale reconstruction scenarios.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from elastomon import fem, recon
from elastomon.materials import Inclusion, default_alphas, field_from_scenario
from elastomon.mesh import build_cube_mesh, build_patches, face_name_to_id, voxel_box_elements
from elastomon.ntd import (
    SnapshotFields,
    asymmetry,
    build_load_basis,
    frechet_block,
    frechet_matrix,
    mode_column_indices,
    ntd_matrix,
)
from elastomon.pipeline import ntd_pair, run_forward, run_sweep
from elastomon.presets import separated_inclusions
from elastomon.recon import (
    build_test_grid,
    count_negative_eigenvalues,
    fill_cavities,
    threshold_advisor,
)
from elastomon.scenario import Scenario

_TABLE_BG = (6.0e5, 6.0e3, 3.0e3)
_TABLE_INC = (2.0e6, 2.0e4, 3.0e3)
_OMEGA = 50.0


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def ldl_negative_count(A: np.ndarray) -> int:
    """Eigenvalue-free negative count via a symmetric-indefinite factorization.

    Serves as the independent oracle for count_negative_eigenvalues: by
    congruence, the signature of the block-diagonal factor equals the
    signature of A.
    """
    A = np.asarray(A, dtype=float)
    _, d, _ = scipy.linalg.ldl(A)
    n = A.shape[0]
    count = 0
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            block = d[i : i + 2, i : i + 2]
            # 2x2 block: one negative eigenvalue iff det < 0, two iff det > 0 and trace < 0
            det = block[0, 0] * block[1, 1] - block[0, 1] * block[1, 0]
            if det < 0:
                count += 1
            elif det > 0 and block[0, 0] + block[1, 1] < 0:
                count += 2
            i += 2
        else:
            if d[i, i] < 0:
                count += 1
            i += 1
    return count


def _criterion1_setup():
    """6^3 mesh, m=2, omega=50 background with the box perturbation direction."""
    mesh = build_cube_mesh([(-1, -1, -1), (1, 1, 1)], 6)
    patches = build_patches(mesh, 2)
    basis = build_load_basis(mesh, patches, "all")
    box = ((-2.0 / 3.0,) * 3, (-1.0 / 3.0,) * 3)
    fld0 = field_from_scenario(mesh, _TABLE_BG)
    fact0 = fem.factorize(fem.assemble(mesh, fld0, _OMEGA))
    U0 = fem.solve(fact0, basis.F).U
    G0 = ntd_matrix(fact0, basis)
    snaps = SnapshotFields(mesh, U0, _OMEGA)
    ids = voxel_box_elements(mesh, box)
    h_lam = np.zeros(mesh.n_elements)
    h_mu = np.zeros(mesh.n_elements)
    h_lam[ids] = _TABLE_INC[0] - _TABLE_BG[0]
    h_mu[ids] = _TABLE_INC[1] - _TABLE_BG[1]
    return mesh, patches, basis, box, G0, snaps, h_lam, h_mu


def check_frechet_slope() -> CheckResult:
    """Criterion 1: second-order remainder of the linearized NtD map."""
    mesh, patches, basis, box, G0, snaps, h_lam, h_mu = _criterion1_setup()
    D = frechet_matrix(snaps, h_lam, h_mu, 0.0)
    ts = (1e-1, 1e-2, 1e-3)
    remainders = []
    for t in ts:
        fld = field_from_scenario(
            mesh,
            _TABLE_BG,
            [Inclusion(box=box, lam=_TABLE_BG[0] + t * h_lam.max(), mu=_TABLE_BG[1] + t * h_mu.max())],
        )
        Gt = ntd_matrix(fem.factorize(fem.assemble(mesh, fld, _OMEGA)), basis)
        remainders.append(np.linalg.norm(Gt.values - G0.values - t * D))
    slope = float(np.polyfit(np.log(ts), np.log(remainders), 1)[0])
    ok = abs(slope - 2.0) <= 0.2
    return CheckResult(
        "C1 frechet-slope", ok,
        f"log-log remainder slope {slope:.3f} (target 2.0 +/- 0.2)",
    )


def check_self_adjointness() -> CheckResult:
    """Criterion 2: pre-symmetrization asymmetry of G, G0 and D[h]."""
    mesh, patches, basis, box, G0, snaps, h_lam, h_mu = _criterion1_setup()
    fld = field_from_scenario(
        mesh, _TABLE_BG,
        [Inclusion(box=box, lam=_TABLE_INC[0], mu=_TABLE_INC[1])],
    )
    G = ntd_matrix(fem.factorize(fem.assemble(mesh, fld, _OMEGA)), basis)
    D_raw = frechet_matrix(snaps, h_lam, h_mu, 0.0, symmetrize=False)
    defects = (G.presym_defect, G0.presym_defect, asymmetry(D_raw))
    worst = max(defects)
    return CheckResult(
        "C2 self-adjointness", worst <= 1e-8,
        f"asymmetry G {defects[0]:.2e}, G0 {defects[1]:.2e}, D {defects[2]:.2e} (<= 1e-8)",
    )


def check_block_semidefiniteness() -> CheckResult:
    """Criterion 3: the block test matrix is negative semidefinite for a >= 0."""
    mesh, patches, basis, box, G0, snaps, _, _ = _criterion1_setup()
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(20):
        lo = rng.integers(0, mesh.n, size=3)
        hi = lo + 1 + rng.integers(0, mesh.n - lo, size=3).clip(max=3)
        h = mesh.h
        b0 = mesh.bounds[0] + h * lo
        b1 = mesh.bounds[0] + h * np.minimum(hi, mesh.n)
        ids = voxel_box_elements(mesh, (b0, b1))
        alpha = tuple(rng.uniform(0, 2) * a for a in (18760.0, 375.2, 1e6))
        D_B = frechet_block(snaps, ids, alpha)
        ev = np.linalg.eigvalsh(D_B)
        norm = max(abs(ev[0]), abs(ev[-1]))
        if norm > 0:
            worst = max(worst, ev[-1] / norm)
    return CheckResult(
        "C3 block-semidefiniteness", worst <= 1e-10,
        f"max eigenvalue / norm over 20 random blocks: {worst:.2e} (<= 1e-10)",
    )


def check_static_monotonicity() -> CheckResult:
    """Criterion 4: stiffer medium gives a smaller NtD form in the coercive regime."""
    mesh = build_cube_mesh([(-1, -1, -1), (1, 1, 1)], 4)
    patches = build_patches(mesh, 2)
    clamped = (face_name_to_id("-z"),)
    basis = build_load_basis(mesh, patches, "all", skip_faces=clamped)
    soft = field_from_scenario(mesh, _TABLE_BG)
    stiff = field_from_scenario(
        mesh, _TABLE_BG,
        [Inclusion(box=((-1.0, -1.0, -1.0), (0.5, 1.0, 1.0)), lam=1.5 * _TABLE_BG[0], mu=2.0 * _TABLE_BG[1])],
    )
    G_soft = ntd_matrix(fem.factorize(fem.assemble(mesh, soft, 0.0, clamped)), basis)
    G_stiff = ntd_matrix(fem.factorize(fem.assemble(mesh, stiff, 0.0, clamped)), basis)
    diff = G_soft.values - G_stiff.values
    min_eig = float(np.linalg.eigvalsh(diff)[0])
    scale = float(np.linalg.norm(G_soft.values, 2))
    ok = min_eig >= -1e-8 * scale
    return CheckResult(
        "C4 static-monotonicity", ok,
        f"min eigenvalue of (G_background - G_stiffer) = {min_eig:.3e} (>= {-1e-8 * scale:.1e})",
    )


def check_eigencount_oracle() -> CheckResult:
    """Criterion 5: eigencount equals the factorization-signature oracle, exactly."""
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(200):
        n = int(rng.integers(1, 31))
        A = rng.standard_normal((n, n))
        A = 0.5 * (A + A.T)
        if count_negative_eigenvalues(A, eps_rel=0.0) != ldl_negative_count(A):
            mismatches += 1
    return CheckResult(
        "C5 eigencount-oracle", mismatches == 0,
        f"{mismatches} mismatches over 200 random symmetric matrices up to 30x30",
    )


def check_alpha_constants() -> CheckResult:
    """Criterion 8: contrast formula reproduces the reference weights exactly."""
    mesh = build_cube_mesh([(-1, -1, -1), (1, 1, 1)], 2)
    fld = field_from_scenario(
        mesh, _TABLE_BG,
        [Inclusion(box=((-1.0,) * 3, (0.0,) * 3), lam=_TABLE_INC[0], mu=_TABLE_INC[1])],
    )
    a1, a2, a3 = default_alphas(fld, 0.0134, _OMEGA)
    ok = (
        abs(a1 - 18760.0) <= 1e-9 * 18760.0
        and abs(a2 - 375.2) <= 1e-9 * 375.2
        and a3 == 0.0
    )
    return CheckResult(
        "C8 alpha-constants", ok, f"a1={a1!r}, a2={a2!r}, a3={a3!r} (want 18760, 375.2, 0)"
    )


def _boundary_connected_complement(mask: np.ndarray, k: int) -> bool:
    """Pure-BFS check that every unmarked block reaches the grid boundary."""
    vol = mask.reshape(k, k, k)
    seen = np.zeros_like(vol, dtype=bool)
    stack = []
    for z in range(k):
        for y in range(k):
            for x in range(k):
                if (0 in (x, y, z) or k - 1 in (x, y, z)) and not vol[z, y, x]:
                    stack.append((z, y, x))
                    seen[z, y, x] = True
    while stack:
        z, y, x = stack.pop()
        for dz, dy, dx in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            nz, ny, nx = z + dz, y + dy, x + dx
            if 0 <= nz < k and 0 <= ny < k and 0 <= nx < k:
                if not vol[nz, ny, nx] and not seen[nz, ny, nx]:
                    seen[nz, ny, nx] = True
                    stack.append((nz, ny, nx))
    return bool(np.all(vol | seen))


def check_cavity_fill() -> CheckResult:
    """Criterion 10: idempotence, monotonicity and boundary-connected complement."""
    k = 10
    mesh = build_cube_mesh([(-1, -1, -1), (1, 1, 1)], k)
    grid = build_test_grid(mesh, k)
    rng = np.random.default_rng(11)
    failures = []
    for trial in range(100):
        mask = rng.random(k**3) < rng.uniform(0.05, 0.6)
        filled = fill_cavities(mask, grid)
        if not np.all(filled >= mask):
            failures.append(f"trial {trial}: not monotone")
        if not np.array_equal(fill_cavities(filled, grid), filled):
            failures.append(f"trial {trial}: not idempotent")
        if not _boundary_connected_complement(filled, k):
            failures.append(f"trial {trial}: complement not boundary-connected")
    return CheckResult(
        "C10 cavity-fill", not failures,
        "100 random masks on a 10^3 grid pass" if not failures else "; ".join(failures[:3]),
    )


# -- desk-scale reconstructions (criteria 6, 7, 9) --------------------------


@dataclass
class DeskRun:
    """Shared artifacts of the separated-inclusion desk scenario."""

    scenario: Scenario
    fwd: object
    G: np.ndarray
    G0: np.ndarray
    grid: object
    alphas: tuple
    truth_mu: np.ndarray
    truth_lam: np.ndarray


def desk_run() -> DeskRun:
    scn = Scenario.from_dict(separated_inclusions())
    fwd = run_forward(scn)
    G, G0 = (g.values for g in ntd_pair(fwd))
    grid = build_test_grid(fwd.mesh, scn.k)
    alphas = default_alphas(scn.true_field(fwd.mesh), scn.alpha_C, scn.omega)

    field = scn.true_field(fwd.mesh)
    sup = field.supports()
    nb = len(grid.block_elements)
    truth_mu = np.array([np.all(np.isin(grid.block_elements[b], sup.D2)) for b in range(nb)])
    truth_lam = np.array([np.all(np.isin(grid.block_elements[b], sup.D1)) for b in range(nb)])
    return DeskRun(scn, fwd, G, G0, grid, alphas, truth_mu, truth_lam)


def _counts(run: DeskRun, G, G0, U0, alpha, eps_rel=1e-10) -> np.ndarray:
    snaps = SnapshotFields(run.fwd.mesh, U0, run.scenario.omega)
    _, rep = recon.reconstruct_D(G, G0, snaps, run.grid, alpha, threshold=0, eps_rel=eps_rel)
    return rep.counts


def _gap_threshold(counts: np.ndarray, truth: np.ndarray):
    """Midpoint threshold of the gap between inside and outside counts.

    Returns (threshold, gap_exists).
    """
    inside_max = int(counts[truth].max())
    outside_min = int(counts[~truth].min())
    return (inside_max + outside_min) // 2, inside_max < outside_min


def _best_misclassification(counts: np.ndarray, truth: np.ndarray) -> int:
    """Fewest misclassified blocks over all thresholds (block-count metric)."""
    best = truth.size
    for t in np.unique(np.concatenate([counts, [counts.min() - 1]])):
        mask = counts <= t
        best = min(best, int(np.sum(mask != truth)))
    return best


def desk_checks(run: DeskRun | None = None) -> list[CheckResult]:
    """Criteria 6 and 7 on the shared desk run."""
    if run is None:
        run = desk_run()
    truth_d = run.truth_mu | run.truth_lam
    out = []

    # criterion 6: full basis
    counts_d = _counts(run, run.G, run.G0, run.fwd.U_background, run.alphas)
    counts_mu = _counts(run, run.G, run.G0, run.fwd.U_background, (0.0, run.alphas[1], 0.0))
    thr_d, gap_d = _gap_threshold(counts_d, truth_d)
    thr_mu, gap_mu = _gap_threshold(counts_mu, run.truth_mu)
    mask_d = fill_cavities(counts_d <= thr_d, run.grid)
    mask_mu = fill_cavities(counts_mu <= thr_mu, run.grid)
    green = mask_d & ~mask_mu
    ok6 = (
        gap_d
        and gap_mu
        and np.array_equal(mask_mu, run.truth_mu)
        and np.array_equal(green, run.truth_lam)
    )
    adv = threshold_advisor(counts_d)
    out.append(
        CheckResult(
            "C6 desk-separated", ok6,
            f"combined-test gap {'yes' if gap_d else 'NO'} "
            f"(inside max {counts_d[truth_d].max()}, outside min {counts_d[~truth_d].min()}), "
            f"shear mask exact {np.array_equal(mask_mu, run.truth_mu)}, "
            f"set-difference exact {np.array_equal(green, run.truth_lam)}, "
            f"advisor suggestion {adv.suggested}",
        )
    )

    # criterion 7: restricted load directions reuse the same forward solves
    per_mode = {}
    for mode in ("normal_only", "tangential_only"):
        idx = mode_column_indices(run.fwd.basis, mode)
        sub = np.ix_(idx, idx)
        Gs, G0s = run.G[sub], run.G0[sub]
        U0s = run.fwd.U_background[:, idx]
        cd = _counts(run, Gs, G0s, U0s, run.alphas)
        cm = _counts(run, Gs, G0s, U0s, (0.0, run.alphas[1], 0.0))
        per_mode[mode] = (cd, cm)

    cm_n = per_mode["normal_only"][1]
    thr_mu_n, gap_mu_n = _gap_threshold(cm_n, run.truth_mu)
    mu_mask_n = cm_n <= thr_mu_n
    mu_ok = gap_mu_n and np.array_equal(mu_mask_n, run.truth_mu)

    err_n = _best_misclassification(per_mode["normal_only"][0], truth_d)
    err_t = _best_misclassification(per_mode["tangential_only"][0], truth_d)
    ok7 = mu_ok and err_t <= err_n
    out.append(
        CheckResult(
            "C7 desk-load-modes", ok7,
            f"normal-only shear mask exact {mu_ok} (gap {cm_n[run.truth_mu].max()}"
            f"->{cm_n[~run.truth_mu].min()}); combined-test misclassified blocks: "
            f"tangential {err_t} <= normal {err_n}",
        )
    )
    return out


def check_speedup() -> CheckResult:
    """Criterion 9: linearized per-block test beats the full re-solve."""
    scn = Scenario.from_dict(separated_inclusions())
    rows, _ = run_sweep(scn, modes=("all",), alpha_scales=(1.0,), timing_blocks=4)
    lin = rows[0].lin_ms_per_block
    full = rows[0].resolve_ms_per_block
    ok = lin < full
    return CheckResult(
        "C9 speedup", ok,
        f"linearized {lin:.1f} ms/block vs full re-solve {full:.1f} ms/block "
        f"(ratio {full / max(lin, 1e-9):.0f}x)",
    )


FAST_CHECKS = (
    check_self_adjointness,
    check_block_semidefiniteness,
    check_static_monotonicity,
    check_eigencount_oracle,
    check_alpha_constants,
    check_cavity_fill,
)


def run_checks(level: str = "fast") -> list[CheckResult]:
    if level not in ("fast", "full"):
        raise ValueError(f"level must be fast or full, got {level!r}")
    results = []

    def guard(fn):
        t0 = time.perf_counter()
        try:
            res = fn()
        except Exception as exc:  # report, never crash the suite
            res = CheckResult(fn.__name__, False, f"raised {type(exc).__name__}: {exc}")
        items = res if isinstance(res, list) else [res]
        dt = time.perf_counter() - t0
        for r in items:
            r.detail += f" [{dt:.1f}s]"
            results.append(r)

    for fn in FAST_CHECKS:
        guard(fn)
    if level == "full":
        guard(check_frechet_slope)
        guard(desk_checks)
        guard(check_speedup)
    return results
