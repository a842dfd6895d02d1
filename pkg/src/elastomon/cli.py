"""Command-line interface.

Verbs:

    forward      solve both media, persist loads and solutions
    ntd          build the true/background NtD matrices from forward artifacts
    reconstruct  run the block tests and write the result JSON (and VTK)
    verify       run the acceptance checks (fast or full)
    sweep        load-mode / weight-scale study with timing CSV

Exit codes: 0 success, 2 usage or input error, 3 resonance detected,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

from elastomon.fem import ResonanceError
from elastomon.matrixio import MatrixFileError, read_matrix, write_matrix
from elastomon.pipeline import (
    ntd_pair,
    run_forward,
    run_reconstruct,
    run_sweep,
    vtk_mask_text,
)
from elastomon.recon import build_test_grid
from elastomon.scenario import Scenario, ScenarioError
from elastomon.verify import run_checks

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RESONANCE = 3
EXIT_VERIFY = 4

_FILES = {
    "loads": "F.emnt",
    "u_true": "U_true.emnt",
    "u_background": "U_background.emnt",
    "ntd_true": "G.emnt",
    "ntd_background": "G0.emnt",
    "forward_meta": "forward_meta.json",
    "result": "result.json",
    "vtk": "masks.vtk",
}


def _out_dir(scn: Scenario, override: str | None) -> Path:
    out = Path(override) if override else Path(scn.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_scenario(path: str) -> Scenario:
    return Scenario.load(path)


def cmd_forward(args) -> int:
    scn = _load_scenario(args.scenario)
    out = _out_dir(scn, args.out)
    t0 = time.perf_counter()
    fwd = run_forward(scn)

    write_matrix(out / _FILES["loads"], fwd.basis.F, False, scn.provenance("loads"))
    write_matrix(out / _FILES["u_true"], fwd.U_true, False, scn.provenance("solutions-true"))
    write_matrix(
        out / _FILES["u_background"], fwd.U_background, False,
        scn.provenance("solutions-background"),
    )

    meta = {
        "scenario": scn.to_dict(),
        "provenance": {
            role: scn.provenance(role).hex()
            for role in ("loads", "solutions-true", "solutions-background",
                         "ntd-true", "ntd-background")
        },
        "columns": int(fwd.basis.F.shape[1]),
        "dofs": int(fwd.basis.F.shape[0]),
        "max_residual": fwd.max_residual,
        "inertia": {
            "true": asdict(fwd.guard_true),
            "background": asdict(fwd.guard_background),
        },
        "timings": fwd.timings,
    }
    (out / _FILES["forward_meta"]).write_text(json.dumps(meta, indent=2))

    for name, guard in (("true", fwd.guard_true), ("background", fwd.guard_background)):
        print(
            f"{name}: inertia (neg/zero/pos) = {guard.n_neg}/{guard.n_zero}/{guard.n_pos}, "
            f"min pivot {guard.min_pivot:.3e}, method {guard.method}"
        )
    print(
        f"forward: {fwd.basis.F.shape[1]} loads x 2 media solved, "
        f"max residual {fwd.max_residual:.2e}, {time.perf_counter() - t0:.1f}s -> {out}"
    )
    return EXIT_OK


def cmd_ntd(args) -> int:
    scn = _load_scenario(args.scenario)
    out = _out_dir(scn, args.out)
    for key in ("loads", "u_true", "u_background"):
        if not (out / _FILES[key]).exists():
            raise MatrixFileError(f"missing forward artifact {out / _FILES[key]}; run forward first")
    F, _ = read_matrix(out / _FILES["loads"], scn.provenance("loads"))
    U, _ = read_matrix(out / _FILES["u_true"], scn.provenance("solutions-true"))
    U0, _ = read_matrix(out / _FILES["u_background"], scn.provenance("solutions-background"))

    for name, sol, role in (("G", U, "ntd-true"), ("G0", U0, "ntd-background")):
        raw = F.T @ sol
        G = 0.5 * (raw + raw.T)
        write_matrix(out / _FILES["ntd_true" if name == "G" else "ntd_background"],
                     G, True, scn.provenance(role))
        print(f"{name}: {G.shape[0]}x{G.shape[1]} written")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    scn = _load_scenario(args.scenario)
    out = _out_dir(scn, args.out)
    for key in ("ntd_true", "ntd_background", "u_background"):
        if not (out / _FILES[key]).exists():
            raise MatrixFileError(f"missing artifact {out / _FILES[key]}; run forward and ntd first")
    G, _ = read_matrix(out / _FILES["ntd_true"], scn.provenance("ntd-true"))
    G0, _ = read_matrix(out / _FILES["ntd_background"], scn.provenance("ntd-background"))
    U0, _ = read_matrix(out / _FILES["u_background"], scn.provenance("solutions-background"))

    result = run_reconstruct(scn, G, G0, U0, workers=args.threads)
    (out / _FILES["result"]).write_text(json.dumps(result, indent=2))
    if scn.vtk:
        grid = build_test_grid(scn.mesh(), scn.k)
        labels = [b["label"] for b in result["blocks"]]
        (out / _FILES["vtk"]).write_text(vtk_mask_text(grid, labels))

    d = result["tests"]["d"]
    mu = result["tests"]["mu"]
    print(f"blocks: {len(result['blocks'])}, labels: {result['label_counts']}")
    print(
        f"combined test: threshold {d['threshold']} ({d['threshold_source']}), "
        f"largest gap {d['advisor']['gap'][0]}->{d['advisor']['gap'][1]}"
    )
    if mu["skipped"]:
        print("shear test: skipped (zero shear weight)")
    else:
        print(
            f"shear test: threshold {mu['threshold']} ({mu['threshold_source']}), "
            f"largest gap {mu['advisor']['gap'][0]}->{mu['advisor']['gap'][1]}"
        )
    if result["inconsistencies"]:
        print(f"inconsistent blocks (shear outside combined): {result['inconsistencies']}")
    for note in result["notes"]:
        print(f"note: {note}")
    print(f"result -> {out / _FILES['result']}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_checks(args.level)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_VERIFY


def cmd_sweep(args) -> int:
    scn = _load_scenario(args.scenario)
    out = _out_dir(scn, args.out)
    modes = tuple(s.strip() for s in args.modes.split(",") if s.strip())
    scales = tuple(float(s) for s in args.alpha_scales.split(",") if s.strip())
    rows, masks = run_sweep(
        scn, modes=modes, alpha_scales=scales,
        timing_blocks=args.timing_blocks, workers=args.threads,
    )

    csv_path = out / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(asdict(rows[0]).keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))
    (out / "sweep_masks.json").write_text(json.dumps(masks, indent=2))

    for row in rows:
        print(
            f"{row.mode:<16} x{row.alpha_scale:<4g} {row.test:<2} "
            f"thr={row.threshold:<5d} inside={row.inside_count:<4d} "
            f"counts [{row.count_min},{row.count_max}] "
            f"lin {row.lin_ms_per_block:.1f} ms vs resolve {row.resolve_ms_per_block:.1f} ms"
        )
    print(f"sweep -> {csv_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elastomon",
        description="Inclusion reconstruction in an elastic cube from boundary data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario YAML path")
        p.add_argument("--out", default=None, help="artifact directory (default: scenario output.dir)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for per-block tests")

    p = sub.add_parser("forward", help="solve true and background media")
    add_common(p)
    p.set_defaults(fn=cmd_forward)

    p = sub.add_parser("ntd", help="build NtD matrices from forward artifacts")
    add_common(p)
    p.set_defaults(fn=cmd_ntd)

    p = sub.add_parser("reconstruct", help="run the monotonicity block tests")
    add_common(p)
    p.set_defaults(fn=cmd_reconstruct)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("sweep", help="load-mode / weight-scale study")
    add_common(p)
    p.add_argument("--modes", default="all,normal_only,tangential_only")
    p.add_argument("--alpha-scales", default="1.0")
    p.add_argument("--timing-blocks", type=int, default=4)
    p.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ResonanceError as exc:
        print(f"resonance: {exc}", file=sys.stderr)
        return EXIT_RESONANCE
    except (ScenarioError, MatrixFileError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
