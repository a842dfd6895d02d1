"""End-to-end orchestration: forward solves, NtD matrices, reconstruction, sweep.

All functions here are pure with respect to the filesystem; the cli module
owns every read and write. The stages mirror the CLI verbs:

    run_forward      solve true and background media for the whole load basis
    ntd_pair         Galerkin NtD matrices for both media
    run_reconstruct  per-block eigencount tests, cavity fill, classification
    run_sweep        load-mode / weight-scale study with timing comparison
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from elastomon import fem, recon
from elastomon.materials import Inclusion, default_alphas, field_from_scenario
from elastomon.mesh import Mesh, PatchSet
from elastomon.ntd import (
    LoadBasis,
    NtdMatrix,
    SnapshotFields,
    asymmetry,
    build_load_basis,
    frechet_block,
    mode_column_indices,
)
from elastomon.recon import (
    LABEL_D2,
    LABEL_D_ONLY,
    LABEL_EXTERIOR,
    TestGrid,
    build_test_grid,
    classify,
    count_negative_eigenvalues,
    fill_cavities,
    reconstruct_D,
    reconstruct_mu,
    threshold_advisor,
)
from elastomon.scenario import Scenario, ScenarioError


@dataclass
class ForwardResult:
    """In-memory artifacts of the forward stage."""

    mesh: Mesh
    patches: PatchSet
    basis: LoadBasis
    U_true: np.ndarray
    U_background: np.ndarray
    guard_true: fem.InertiaReport
    guard_background: fem.InertiaReport
    max_residual: float
    timings: dict


def run_forward(scn: Scenario) -> ForwardResult:
    """Assemble, guard and solve both media for every basis load."""
    timings = {}
    t0 = time.perf_counter()
    mesh = scn.mesh()
    patches = scn.patch_set(mesh)
    basis = build_load_basis(mesh, patches, scn.mode, skip_faces=scn.dirichlet_faces)
    timings["setup"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    S_true = fem.assemble(mesh, scn.true_field(mesh), scn.omega, scn.dirichlet_faces)
    S_bg = fem.assemble(mesh, scn.background_field(mesh), scn.omega, scn.dirichlet_faces)
    timings["assemble"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    guard_true = fem.resonance_guard(S_true)
    guard_bg = fem.resonance_guard(S_bg)
    for name, guard in (("true", guard_true), ("background", guard_bg)):
        if guard.near_singular:
            raise fem.ResonanceError(
                f"{name} medium operator is near-singular "
                f"(inertia {guard.n_neg}/{guard.n_zero}/{guard.n_pos}, "
                f"min pivot {guard.min_pivot:.3e})"
            )
    timings["guard"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sol_true = fem.solve(fem.factorize(S_true), basis.F, tol=scn.solve_rel)
    sol_bg = fem.solve(fem.factorize(S_bg), basis.F, tol=scn.solve_rel)
    timings["solve"] = time.perf_counter() - t0

    return ForwardResult(
        mesh=mesh,
        patches=patches,
        basis=basis,
        U_true=sol_true.U,
        U_background=sol_bg.U,
        guard_true=guard_true,
        guard_background=guard_bg,
        max_residual=float(max(sol_true.residuals.max(), sol_bg.residuals.max())),
        timings=timings,
    )


def ntd_pair(fwd: ForwardResult, provenance=("", "")) -> tuple[NtdMatrix, NtdMatrix]:
    """(true, background) NtD matrices from forward solutions."""
    F = fwd.basis.F

    def pair(U, prov):
        raw = F.T @ U
        G = 0.5 * (raw + raw.T)
        return NtdMatrix(values=G, presym_defect=asymmetry(raw), provenance=prov)

    return pair(fwd.U_true, provenance[0]), pair(fwd.U_background, provenance[1])


def resolve_alphas(scn: Scenario, mesh: Mesh) -> tuple[float, float, float]:
    """Test weights from the scenario policy (explicit or contrast formula)."""
    if scn.alpha_policy == "explicit":
        return scn.alpha_values
    alphas = default_alphas(scn.true_field(mesh), scn.alpha_C, scn.omega)
    if all(a == 0 for a in alphas):
        raise ScenarioError(
            "alpha.policy=from_contrast found no positive contrast; "
            "use alpha.policy=explicit for blind or contrast-free runs"
        )
    return alphas


def _resolve_threshold(configured: int | None, counts: np.ndarray):
    """(threshold, source, advisor) honoring an explicit config value."""
    advisor = threshold_advisor(counts)
    if configured is not None:
        return int(configured), "config", advisor
    if advisor.significant:
        return int(advisor.suggested), "auto", advisor
    # no usable gap: classify everything as outside rather than guessing
    return int(counts.min()) - 1, "auto-no-gap", advisor


def _advisor_dict(adv) -> dict:
    return {
        "significant": adv.significant,
        "suggested": adv.suggested,
        "gap": [adv.gap_low, adv.gap_high],
        "low_range": list(adv.low_range),
        "high_range": list(adv.high_range),
    }


def run_reconstruct(
    scn: Scenario,
    G: np.ndarray,
    G0: np.ndarray,
    U_background: np.ndarray,
    workers: int = 1,
) -> dict:
    """Run both block tests and produce the result document (a JSON-ready dict)."""
    timings = {}
    t0 = time.perf_counter()
    mesh = scn.mesh()
    grid = build_test_grid(mesh, scn.k)
    snapshots = SnapshotFields(mesh, U_background, scn.omega)
    alphas = resolve_alphas(scn, mesh)
    field_true = scn.true_field(mesh)
    timings["setup"] = time.perf_counter() - t0
    notes = []

    t0 = time.perf_counter()
    mask_d, rep_d = reconstruct_D(
        G, G0, snapshots, grid, alphas,
        threshold=0 if scn.threshold_d is None else scn.threshold_d,
        eps_rel=scn.eigen_rel, workers=workers,
    )
    thr_d, src_d, adv_d = _resolve_threshold(scn.threshold_d, rep_d.counts)
    mask_d = rep_d.counts <= thr_d
    rep_d = replace(rep_d, threshold=thr_d)
    if src_d == "auto-no-gap":
        notes.append("combined test: no significant eigencount gap; all blocks exterior")
    timings["test_d"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    alpha2 = alphas[1]
    if alpha2 > 0:
        mask_mu, rep_mu = reconstruct_mu(
            G, G0, snapshots, grid, alpha2,
            threshold=0 if scn.threshold_mu is None else scn.threshold_mu,
            eps_rel=scn.eigen_rel, workers=workers,
            rho_constant=field_true.supports().D3.size == 0,
            full_neumann=len(scn.dirichlet_faces) == 0,
        )
        thr_mu, src_mu, adv_mu = _resolve_threshold(scn.threshold_mu, rep_mu.counts)
        mask_mu = rep_mu.counts <= thr_mu
        rep_mu = replace(rep_mu, threshold=thr_mu)
        if src_mu == "auto-no-gap":
            notes.append("shear test: no significant eigencount gap; all blocks exterior")
        mu_skipped = False
    else:
        mask_mu = np.zeros(len(grid.block_elements), dtype=bool)
        rep_mu, thr_mu, src_mu, adv_mu = None, None, "skipped", None
        notes.append("shear test skipped: shear weight a2 is zero")
        mu_skipped = True
    timings["test_mu"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    mask_d_filled = fill_cavities(mask_d, grid)
    mask_mu_filled = fill_cavities(mask_mu, grid)
    labels, inconsistent = classify(mask_d_filled, mask_mu_filled)
    timings["classify"] = time.perf_counter() - t0

    blocks = []
    for b in range(len(grid.block_elements)):
        blocks.append(
            {
                "index": b,
                "center": [float(c) for c in grid.centers[b]],
                "count_d": int(rep_d.counts[b]),
                "count_mu": None if mu_skipped else int(rep_mu.counts[b]),
                "in_d": bool(mask_d[b]),
                "in_mu": bool(mask_mu[b]),
                "in_d_filled": bool(mask_d_filled[b]),
                "in_mu_filled": bool(mask_mu_filled[b]),
                "label": str(labels[b]),
            }
        )

    label_counts = {
        LABEL_EXTERIOR: int(np.sum(labels == LABEL_EXTERIOR)),
        LABEL_D2: int(np.sum(labels == LABEL_D2)),
        LABEL_D_ONLY: int(np.sum(labels == LABEL_D_ONLY)),
    }

    return {
        "scenario": scn.to_dict(),
        "basis": {"mode": scn.mode, "columns": int(G.shape[0])},
        "alphas": [float(a) for a in alphas],
        "tests": {
            "d": {
                "threshold": thr_d,
                "threshold_source": src_d,
                "advisor": _advisor_dict(adv_d),
                "counts": rep_d.counts.tolist(),
            },
            "mu": {
                "skipped": mu_skipped,
                "threshold": thr_mu,
                "threshold_source": src_mu,
                "advisor": None if adv_mu is None else _advisor_dict(adv_mu),
                "counts": None if mu_skipped else rep_mu.counts.tolist(),
            },
        },
        "blocks": blocks,
        "label_counts": label_counts,
        "inconsistencies": [int(i) for i in inconsistent],
        "notes": notes,
        "timings": timings,
    }


def labels_from_result(result: dict) -> list[str]:
    return [b["label"] for b in result["blocks"]]


def vtk_mask_text(grid: TestGrid, labels) -> str:
    """Legacy-VTK structured-points text with the three-way label per block.

    Cell values: 0 exterior, 1 combined-only (set difference), 2 shear.
    VTK cell ordering (x fastest) matches the block index convention.
    """
    k = grid.k
    code = {LABEL_EXTERIOR: 0, LABEL_D_ONLY: 1, LABEL_D2: 2}
    origin = grid.boxes[0, 0]
    spacing = grid.boxes[0, 1] - grid.boxes[0, 0]
    lines = [
        "# vtk DataFile Version 3.0",
        "three-way inclusion mask",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {k + 1} {k + 1} {k + 1}",
        f"ORIGIN {origin[0]:.17g} {origin[1]:.17g} {origin[2]:.17g}",
        f"SPACING {spacing[0]:.17g} {spacing[1]:.17g} {spacing[2]:.17g}",
        f"CELL_DATA {k**3}",
        "SCALARS label int 1",
        "LOOKUP_TABLE default",
    ]
    lines.extend(str(code[str(l)]) for l in labels)
    return "\n".join(lines) + "\n"


@dataclass
class SweepRow:
    mode: str
    alpha_scale: float
    test: str
    threshold: int
    inside_count: int
    count_min: int
    count_max: int
    gap_low: int
    gap_high: int
    significant: bool
    lin_ms_per_block: float
    resolve_ms_per_block: float


def _full_resolve_counts(scn, mesh, basis_F, G, grid, alphas, block_ids, eps_rel):
    """Reference non-linearized test: re-assemble and re-solve per block."""
    lam0, mu0, rho0 = scn.background
    a1, a2, a3 = alphas
    if a3 >= rho0:
        raise ScenarioError(f"density weight a3={a3} leaves a nonpositive density")
    counts = []
    for b in block_ids:
        box = grid.boxes[b]
        pert = field_from_scenario(
            mesh,
            scn.background,
            [Inclusion(box=(tuple(box[0]), tuple(box[1])), lam=lam0 + a1,
                       mu=mu0 + a2, rho=rho0 - a3 if a3 > 0 else None)],
        )
        S = fem.assemble(mesh, pert, scn.omega, scn.dirichlet_faces)
        U = fem.solve(fem.factorize(S), basis_F, tol=scn.solve_rel).U
        raw = basis_F.T @ U
        Gp = 0.5 * (raw + raw.T)
        counts.append(count_negative_eigenvalues(0.5 * ((Gp - G) + (Gp - G).T), eps_rel))
    return counts


def run_sweep(
    scn: Scenario,
    modes=("all", "normal_only", "tangential_only"),
    alpha_scales=(1.0,),
    timing_blocks: int = 4,
    workers: int = 1,
) -> tuple[list[SweepRow], dict]:
    """Load-mode and weight-scale study on one scenario.

    The forward problem is solved once for the full basis; each mode row
    reuses the corresponding column subset. Per mode, the wall clock of the
    linearized per-block test is compared against a full re-assemble and
    re-solve of the weight-perturbed background on ``timing_blocks`` evenly
    spaced blocks.
    """
    base = replace(scn, mode="all")
    fwd = run_forward(base)
    mesh, grid = fwd.mesh, build_test_grid(fwd.mesh, scn.k)
    G_all, G0_all = (g.values for g in ntd_pair(fwd))
    alphas = resolve_alphas(scn, mesh)

    n_blocks = len(grid.block_elements)
    timing_blocks = max(1, min(timing_blocks, n_blocks))
    timed = np.linspace(0, n_blocks - 1, timing_blocks).astype(int).tolist()

    rows = []
    masks = {}
    for mode in modes:
        idx = mode_column_indices(fwd.basis, mode)
        G = G_all[np.ix_(idx, idx)]
        G0 = G0_all[np.ix_(idx, idx)]
        snapshots = SnapshotFields(mesh, fwd.U_background[:, idx], scn.omega)
        Fsub = fwd.basis.F[:, idx]

        t0 = time.perf_counter()
        for b in timed:
            A = G0 + frechet_block(snapshots, grid.block_elements[b], alphas) - G
            count_negative_eigenvalues(0.5 * (A + A.T), scn.eigen_rel)
        lin_ms = 1000.0 * (time.perf_counter() - t0) / len(timed)

        t0 = time.perf_counter()
        _full_resolve_counts(scn, mesh, Fsub, G, grid, alphas, timed, scn.eigen_rel)
        resolve_ms = 1000.0 * (time.perf_counter() - t0) / len(timed)

        for scale in alpha_scales:
            a_scaled = tuple(scale * a for a in alphas)
            for test, a_used in (("d", a_scaled), ("mu", (0.0, a_scaled[1], 0.0))):
                if all(v == 0 for v in a_used):
                    continue
                _, rep = reconstruct_D(
                    G, G0, snapshots, grid, a_used, threshold=0,
                    eps_rel=scn.eigen_rel, workers=workers,
                )
                thr, _, adv = _resolve_threshold(None, rep.counts)
                mask = rep.counts <= thr
                rows.append(
                    SweepRow(
                        mode=mode,
                        alpha_scale=float(scale),
                        test=test,
                        threshold=thr,
                        inside_count=int(mask.sum()),
                        count_min=int(rep.counts.min()),
                        count_max=int(rep.counts.max()),
                        gap_low=adv.gap_low,
                        gap_high=adv.gap_high,
                        significant=adv.significant,
                        lin_ms_per_block=lin_ms,
                        resolve_ms_per_block=resolve_ms,
                    )
                )
                masks[f"{mode}/x{scale:g}/{test}"] = [int(i) for i in np.nonzero(mask)[0]]
    return rows, masks
