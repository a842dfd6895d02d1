"""Piecewise-constant material fields: homogeneous background plus box inclusions.

All Lame values are in Pa, densities in kg/m^3; units are documentation
only, no checked arithmetic is performed on them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from elastomon.mesh import Mesh, voxel_box_elements


@dataclass(frozen=True)
class Inclusion:
    """Axis-aligned box overriding selected material parameters.

    Overrides left as None keep whatever value the element had before this
    inclusion was applied (background, or an earlier inclusion in the list).
    """

    box: tuple
    lam: float | None = None
    mu: float | None = None
    rho: float | None = None


@dataclass(frozen=True)
class MaterialField:
    """Per-element (lambda, mu, rho) arrays plus their defining data."""

    background: tuple[float, float, float]
    inclusions: tuple[Inclusion, ...]
    lam_e: np.ndarray
    mu_e: np.ndarray
    rho_e: np.ndarray

    def supports(self) -> "PerturbationSupports":
        lam0, mu0, rho0 = self.background
        d1 = np.nonzero(self.lam_e != lam0)[0]
        d2 = np.nonzero(self.mu_e != mu0)[0]
        d3 = np.nonzero(self.rho_e != rho0)[0]
        return PerturbationSupports(D1=d1, D2=d2, D3=d3)


@dataclass(frozen=True)
class PerturbationSupports:
    """Element supports of the lambda, mu and rho deviations from background."""

    D1: np.ndarray
    D2: np.ndarray
    D3: np.ndarray

    @property
    def D(self) -> np.ndarray:
        return np.unique(np.concatenate([self.D1, self.D2, self.D3]))


def field_from_scenario(mesh: Mesh, background, inclusions=()) -> MaterialField:
    """Build the per-element field from background values and inclusion boxes.

    Inclusions are applied in list order; where boxes overlap, later entries
    override earlier ones (per parameter). Every value must stay positive.
    """
    lam0, mu0, rho0 = (float(v) for v in background)
    for name, v in (("lambda", lam0), ("mu", mu0), ("rho", rho0)):
        if v <= 0:
            raise ValueError(f"background {name} must be positive, got {v}")

    ne = mesh.n_elements
    lam_e = np.full(ne, lam0)
    mu_e = np.full(ne, mu0)
    rho_e = np.full(ne, rho0)

    incs = tuple(
        inc if isinstance(inc, Inclusion) else Inclusion(**inc) for inc in inclusions
    )
    for inc in incs:
        for name, v in (("lambda", inc.lam), ("mu", inc.mu), ("rho", inc.rho)):
            if v is not None and v <= 0:
                raise ValueError(f"inclusion {name} must be positive, got {v}")
        ids = voxel_box_elements(mesh, inc.box)
        if inc.lam is not None:
            lam_e[ids] = inc.lam
        if inc.mu is not None:
            mu_e[ids] = inc.mu
        if inc.rho is not None:
            rho_e[ids] = inc.rho

    out = MaterialField(
        background=(lam0, mu0, rho0),
        inclusions=incs,
        lam_e=lam_e,
        mu_e=mu_e,
        rho_e=rho_e,
    )
    for arr in (out.lam_e, out.mu_e, out.rho_e):
        arr.setflags(write=False)
    return out


def wavelengths(lam0: float, mu0: float, rho0: float, omega: float) -> tuple[float, float]:
    """Pressure and shear wavelengths (l_p, l_s) of the homogeneous background.

    l_p = 2*pi*v_p/omega with v_p = sqrt((lambda+2*mu)/rho) and
    l_s = 2*pi*v_s/omega with v_s = sqrt(mu/rho).
    """
    for name, v in (("lambda", lam0), ("mu", mu0), ("rho", rho0), ("omega", omega)):
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")
    v_p = np.sqrt((lam0 + 2.0 * mu0) / rho0)
    v_s = np.sqrt(mu0 / rho0)
    return 2.0 * np.pi * v_p / omega, 2.0 * np.pi * v_s / omega


def default_alphas(field: MaterialField, C: float, omega: float) -> tuple[float, float, float]:
    """Test weights derived from the known inclusion contrasts.

    Returns (C*dlam, 2*C*dmu, C*omega**2*drho) where dlam and dmu are the
    smallest positive lambda/mu contrasts over their supports and drho the
    smallest positive density deficit (rho0 - rho), each 0 when that
    parameter is unperturbed or perturbed the wrong way. Meant for
    benchmarks where the contrast is known; blind runs supply explicit
    weights in the scenario instead.
    """
    lam0, mu0, rho0 = field.background

    def min_positive(delta: np.ndarray) -> float:
        pos = delta[delta > 0]
        return float(pos.min()) if pos.size else 0.0

    dlam = min_positive(field.lam_e - lam0)
    dmu = min_positive(field.mu_e - mu0)
    drho = min_positive(rho0 - field.rho_e)
    return C * dlam, 2.0 * C * dmu, C * omega**2 * drho
