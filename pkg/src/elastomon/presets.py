"""Built-in scenario dictionaries.

Desk-scale presets run in well under a minute each; the paper-scale preset
(600 patches, 1800 loads) is provided for completeness and takes far
longer and several GB of memory.
"""

from __future__ import annotations

_TABLE = {
    "background": {"lam": 6.0e5, "mu": 6.0e3, "rho": 3.0e3},
    "inclusion": {"lam": 2.0e6, "mu": 2.0e4},
}


def separated_inclusions(n: int = 12, m: int = 4, k: int = 6, mode: str = "all") -> dict:
    """Two separated cubes on the main diagonal: one shear-only, one lambda-only.

    Inclusion centers sit at (-1/2,-1/2,-1/2) and (1/2,1/2,1/2); with the
    default grid each inclusion coincides with exactly one test block.
    """
    t = 1.0 / 3.0
    return {
        "mesh": {"bounds": [[-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]], "n": n},
        "patches": {"m": m},
        "loads": {"mode": mode},
        "omega": 50.0,
        "background": dict(_TABLE["background"]),
        "inclusions": [
            {"box": [[-2 * t, -2 * t, -2 * t], [-t, -t, -t]], "mu": _TABLE["inclusion"]["mu"]},
            {"box": [[t, t, t], [2 * t, 2 * t, 2 * t]], "lam": _TABLE["inclusion"]["lam"]},
        ],
        "test_grid": {"k": k},
        "alpha": {"policy": "from_contrast", "C": 0.0134},
        "thresholds": {"m1": "auto", "m2": "auto"},
    }


def intersecting_rods(n: int = 12, m: int = 4, k: int = 6) -> dict:
    """Two crossing rods: lambda-only along x, shear-only along y.

    The shared cell is also listed explicitly with both overrides, so the
    result does not depend on the inclusion order.
    """
    t = 1.0 / 3.0
    lam1 = _TABLE["inclusion"]["lam"]
    mu1 = _TABLE["inclusion"]["mu"]
    return {
        "mesh": {"bounds": [[-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]], "n": n},
        "patches": {"m": m},
        "loads": {"mode": "all"},
        "omega": 50.0,
        "background": dict(_TABLE["background"]),
        "inclusions": [
            {"box": [[-2 * t, -t, -t], [2 * t, 0.0, 0.0]], "lam": lam1},
            {"box": [[-t, -2 * t, -t], [0.0, 2 * t, 0.0]], "mu": mu1},
            {"box": [[-t, -t, -t], [0.0, 0.0, 0.0]], "lam": lam1, "mu": mu1},
        ],
        "test_grid": {"k": k},
        "alpha": {"policy": "from_contrast", "C": 0.0134},
        "thresholds": {"m1": "auto", "m2": "auto"},
    }


def paper_scale() -> dict:
    """Full-resolution preset: 10x10 patches per face, 1800 loads, 1000 blocks."""
    scn = separated_inclusions(n=20, m=10, k=10)
    scn["inclusions"] = [
        {"box": [[-0.7, -0.7, -0.7], [-0.3, -0.3, -0.3]], "mu": _TABLE["inclusion"]["mu"]},
        {"box": [[0.3, 0.3, 0.3], [0.7, 0.7, 0.7]], "lam": _TABLE["inclusion"]["lam"]},
    ]
    return scn


def zero_contrast(n: int = 12, m: int = 4, k: int = 6) -> dict:
    """Homogeneous medium with explicit test weights; every block is exterior."""
    scn = separated_inclusions(n=n, m=m, k=k)
    scn["inclusions"] = []
    scn["alpha"] = {"policy": "explicit", "values": [18760.0, 375.2, 0.0]}
    return scn
