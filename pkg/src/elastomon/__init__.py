"""Shape reconstruction of material inclusions in an elastic cube.

elastomon simulates boundary traction/displacement measurements for
time-harmonic linear elasticity on a voxelized cube, builds discrete
Neumann-to-Dirichlet (NtD) operators for the true and background media,
and locates inclusions by counting negative eigenvalues of linearized
monotonicity test matrices. A separate shear-modulus test splits the
reconstruction into mu-perturbed and remaining regions.
"""

from elastomon.mesh import Mesh, PatchSet, build_cube_mesh, build_patches, voxel_box_elements
from elastomon.materials import (
    Inclusion,
    MaterialField,
    default_alphas,
    field_from_scenario,
    wavelengths,
)
from elastomon.fem import (
    Factorization,
    InertiaReport,
    ResonanceError,
    SystemMatrix,
    assemble,
    element_matrices,
    factorize,
    load_vector,
    resonance_guard,
    solve,
)
from elastomon.ntd import (
    LoadBasis,
    NtdMatrix,
    SnapshotFields,
    build_load_basis,
    frechet_block,
    frechet_matrix,
    ntd_matrix,
)
from elastomon.recon import (
    TestGrid,
    build_test_grid,
    classify,
    count_negative_eigenvalues,
    fill_cavities,
    reconstruct_D,
    reconstruct_mu,
    test_block,
    threshold_advisor,
)

__version__ = "0.1.0"
