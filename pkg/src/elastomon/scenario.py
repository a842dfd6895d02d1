"""Scenario files: one YAML document describing a full reconstruction run.

The schema is documented in the README; every field has a default except
the inclusion list, so a minimal scenario is just the inclusions. Parsed
scenarios are validated eagerly (divisibility of patch and test-grid
counts, box containment, positivity) so that CLI commands fail before any
expensive work starts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from elastomon.mesh import FACE_NAMES, Mesh, build_cube_mesh, build_patches, face_name_to_id
from elastomon.materials import Inclusion, MaterialField, field_from_scenario
from elastomon.ntd import MODES

FORMAT_VERSION = 1


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario input."""


@dataclass(frozen=True)
class Scenario:
    bounds: tuple
    n: int
    m: int
    mode: str
    omega: float
    background: tuple[float, float, float]
    inclusions: tuple[Inclusion, ...]
    dirichlet_faces: tuple[int, ...]
    k: int
    alpha_policy: str              # "from_contrast" | "explicit"
    alpha_C: float
    alpha_values: tuple[float, float, float] | None
    threshold_d: int | None        # None means "auto" (advisor)
    threshold_mu: int | None
    eigen_rel: float
    solve_rel: float
    out_dir: str
    vtk: bool
    seed: int

    # -- construction ------------------------------------------------------

    @staticmethod
    def from_dict(raw: dict) -> "Scenario":
        try:
            return _parse(raw)
        except ScenarioError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad scenario: {exc}") from exc

    @staticmethod
    def load(path) -> "Scenario":
        text = Path(path).read_text()
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"cannot parse scenario YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ScenarioError("scenario file must contain a mapping")
        return Scenario.from_dict(raw)

    # -- derived objects ----------------------------------------------------

    def mesh(self) -> Mesh:
        return build_cube_mesh(self.bounds, self.n)

    def patch_set(self, mesh: Mesh):
        return build_patches(mesh, self.m)

    def true_field(self, mesh: Mesh) -> MaterialField:
        return field_from_scenario(mesh, self.background, self.inclusions)

    def background_field(self, mesh: Mesh) -> MaterialField:
        return field_from_scenario(mesh, self.background)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        incs = []
        for inc in self.inclusions:
            d = {"box": [list(inc.box[0]), list(inc.box[1])]}
            if inc.lam is not None:
                d["lam"] = inc.lam
            if inc.mu is not None:
                d["mu"] = inc.mu
            if inc.rho is not None:
                d["rho"] = inc.rho
            incs.append(d)
        alpha: dict = {"policy": self.alpha_policy, "C": self.alpha_C}
        if self.alpha_values is not None:
            alpha["values"] = list(self.alpha_values)
        return {
            "format_version": FORMAT_VERSION,
            "mesh": {"bounds": [list(self.bounds[0]), list(self.bounds[1])], "n": self.n},
            "patches": {"m": self.m},
            "loads": {"mode": self.mode},
            "omega": self.omega,
            "background": {
                "lam": self.background[0],
                "mu": self.background[1],
                "rho": self.background[2],
            },
            "inclusions": incs,
            "dirichlet_faces": [FACE_NAMES[f] for f in self.dirichlet_faces],
            "test_grid": {"k": self.k},
            "alpha": alpha,
            "thresholds": {
                "m1": "auto" if self.threshold_d is None else self.threshold_d,
                "m2": "auto" if self.threshold_mu is None else self.threshold_mu,
            },
            "tolerances": {"eigen_rel": self.eigen_rel, "solve_rel": self.solve_rel},
            "output": {"dir": self.out_dir, "vtk": self.vtk},
            "seed": self.seed,
        }

    def provenance(self, role: str) -> bytes:
        """32-byte digest binding an artifact to this scenario and its role."""
        blob = json.dumps({"scenario": self.to_dict(), "role": role}, sort_keys=True)
        return hashlib.sha256(blob.encode()).digest()


def _expect_positive(name, value) -> float:
    v = float(value)
    if v <= 0:
        raise ScenarioError(f"{name} must be positive, got {v}")
    return v


def _parse(raw: dict) -> Scenario:
    mesh_cfg = raw.get("mesh", {})
    bounds_raw = mesh_cfg.get("bounds", [[-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]])
    bounds = np.asarray(bounds_raw, dtype=float)
    if bounds.shape != (2, 3):
        raise ScenarioError(f"mesh.bounds must be two corner points, got {bounds_raw}")
    sides = bounds[1] - bounds[0]
    if np.any(sides <= 0) or not np.allclose(sides, sides[0], rtol=1e-12, atol=0.0):
        raise ScenarioError(f"mesh.bounds must describe a cube, got sides {sides}")
    n = int(mesh_cfg.get("n", 12))
    if n < 2:
        raise ScenarioError(f"mesh.n must be at least 2, got {n}")

    m = int(raw.get("patches", {}).get("m", 4))
    if m < 1 or n % m != 0:
        raise ScenarioError(f"patches.m={m} must divide mesh.n={n}")

    mode = str(raw.get("loads", {}).get("mode", "all"))
    if mode not in MODES:
        raise ScenarioError(f"loads.mode must be one of {MODES}, got {mode!r}")

    omega = float(raw.get("omega", 50.0))

    bg_cfg = raw.get("background", {"lam": 6.0e5, "mu": 6.0e3, "rho": 3.0e3})
    background = (
        _expect_positive("background.lam", bg_cfg["lam"]),
        _expect_positive("background.mu", bg_cfg["mu"]),
        _expect_positive("background.rho", bg_cfg["rho"]),
    )

    inclusions = []
    for i, inc in enumerate(raw.get("inclusions", []) or []):
        box = np.asarray(inc["box"], dtype=float)
        if box.shape != (2, 3) or np.any(box[1] <= box[0]):
            raise ScenarioError(f"inclusions[{i}].box is not a valid box")
        if np.any(box[1] < bounds[0]) or np.any(box[0] > bounds[1]):
            raise ScenarioError(f"inclusions[{i}].box does not intersect the domain")
        vals = {}
        for key in ("lam", "mu", "rho"):
            if key in inc and inc[key] is not None:
                vals[key] = _expect_positive(f"inclusions[{i}].{key}", inc[key])
        if not vals:
            raise ScenarioError(f"inclusions[{i}] overrides no parameter")
        inclusions.append(
            Inclusion(box=(tuple(box[0]), tuple(box[1])), **vals)
        )

    faces = []
    for name in raw.get("dirichlet_faces", []) or []:
        try:
            faces.append(face_name_to_id(str(name)))
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc

    k = int(raw.get("test_grid", {}).get("k", 6))
    if k < 1 or n % k != 0:
        raise ScenarioError(f"test_grid.k={k} must divide mesh.n={n}")

    alpha_cfg = raw.get("alpha", {"policy": "from_contrast", "C": 0.0134})
    policy = str(alpha_cfg.get("policy", "from_contrast"))
    if policy not in ("from_contrast", "explicit"):
        raise ScenarioError(f"alpha.policy must be from_contrast or explicit, got {policy!r}")
    alpha_C = float(alpha_cfg.get("C", 0.0134))
    alpha_values = None
    if policy == "explicit":
        vals = alpha_cfg.get("values")
        if vals is None or len(vals) != 3:
            raise ScenarioError("alpha.policy=explicit requires alpha.values=[a1,a2,a3]")
        alpha_values = tuple(float(v) for v in vals)
        if any(v < 0 for v in alpha_values):
            raise ScenarioError(f"alpha.values must be nonnegative, got {alpha_values}")

    thr = raw.get("thresholds", {})

    def _thr(key):
        v = thr.get(key, "auto")
        if isinstance(v, str):
            if v != "auto":
                raise ScenarioError(f"thresholds.{key} must be an integer or 'auto'")
            return None
        return int(v)

    tol = raw.get("tolerances", {})
    out = raw.get("output", {})

    return Scenario(
        bounds=(tuple(bounds[0]), tuple(bounds[1])),
        n=n,
        m=m,
        mode=mode,
        omega=omega,
        background=background,
        inclusions=tuple(inclusions),
        dirichlet_faces=tuple(faces),
        k=k,
        alpha_policy=policy,
        alpha_C=alpha_C,
        alpha_values=alpha_values,
        threshold_d=_thr("m1"),
        threshold_mu=_thr("m2"),
        eigen_rel=float(tol.get("eigen_rel", 1e-10)),
        solve_rel=float(tol.get("solve_rel", 1e-8)),
        out_dir=str(out.get("dir", "out")),
        vtk=bool(out.get("vtk", False)),
        seed=int(raw.get("seed", 0)),
    )
