"""Voxel hexahedral mesh of an axis-aligned cube with boundary patches.

Conventions used throughout the package:

* Nodes are indexed lexicographically, x fastest: ``ix + (n+1)*(iy + (n+1)*iz)``.
* Elements likewise: ``ix + n*(iy + n*iz)``; each element lists its 8 node
  indices with local node ``a = ax + 2*ay + 4*az``.
* The six cube faces are ordered ``+x, -x, +y, -y, +z, -z`` (ids 0..5).
* Every face carries a right-handed orthonormal frame (t1, t2, nu) with nu
  the outward normal; for axis-aligned faces the tangents are coordinate axes.
* Boundary faces are listed face by face in the order above; within a face
  they run lexicographically over the two in-plane axes (lower axis fastest).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FACE_NAMES = ("+x", "-x", "+y", "-y", "+z", "-z")

# Outward normals, indexed by face id.
FACE_NORMALS = np.array(
    [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ]
)

# Tangents chosen so (t1, t2, nu) is right-handed on every face.
FACE_TANGENTS1 = np.array(
    [
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
    ]
)

FACE_TANGENTS2 = np.array(
    [
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
    ]
)

# In-plane coordinate axes of each cube face, in increasing axis order.
FACE_INPLANE_AXES = ((1, 2), (1, 2), (0, 2), (0, 2), (0, 1), (0, 1))

# Local nodes (a = ax + 2*ay + 4*az) lying on each local face, ordered by
# the in-plane axes of that face (lower axis fastest).
_LOCAL_FACE_NODES = (
    (1, 3, 5, 7),  # +x
    (0, 2, 4, 6),  # -x
    (2, 3, 6, 7),  # +y
    (0, 1, 4, 5),  # -y
    (4, 5, 6, 7),  # +z
    (0, 1, 2, 3),  # -z
)


def face_name_to_id(name: str) -> int:
    try:
        return FACE_NAMES.index(name)
    except ValueError:
        raise ValueError(f"unknown cube face {name!r}; expected one of {FACE_NAMES}") from None


@dataclass(frozen=True)
class Mesh:
    """Uniform hexahedral voxelization of an axis-aligned cube.

    Attributes
    ----------
    bounds : (2, 3) array, min and max corner in meters.
    n : elements per axis.
    nodes : ((n+1)**3, 3) array of node coordinates.
    elements : (n**3, 8) array of node indices per element.
    boundary_faces : (6*n*n, 3) int array of (element id, local face id,
        cube face id); local and cube face ids coincide for voxel meshes.
    face_nodes : (6*n*n, 4) array, the four nodes of each boundary face.
    """

    bounds: np.ndarray
    n: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_faces: np.ndarray
    face_nodes: np.ndarray

    @property
    def h(self) -> float:
        """Element edge length."""
        return float(self.bounds[1, 0] - self.bounds[0, 0]) / self.n

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def n_dofs(self) -> int:
        return 3 * self.n_nodes

    def element_centroids(self) -> np.ndarray:
        lo = self.bounds[0]
        n = self.n
        h = self.h
        e = np.arange(n**3)
        ix = e % n
        iy = (e // n) % n
        iz = e // (n * n)
        return lo + h * (np.stack([ix, iy, iz], axis=1) + 0.5)

    def nodes_on_face(self, face_id: int) -> np.ndarray:
        """Node indices lying on one cube face."""
        axis = face_id // 2
        value = self.bounds[1, axis] if face_id % 2 == 0 else self.bounds[0, axis]
        on = np.abs(self.nodes[:, axis] - value) <= 1e-12 * max(1.0, abs(value))
        return np.nonzero(on)[0]


def build_cube_mesh(bounds, n: int) -> Mesh:
    """Build the voxel mesh of the cube ``bounds`` with ``n`` elements per axis.

    ``bounds`` is ((x0,y0,z0), (x1,y1,z1)); all three side lengths must be
    equal and positive, and ``n >= 2``.
    """
    bounds = np.asarray(bounds, dtype=float).reshape(2, 3)
    if n < 2:
        raise ValueError(f"need n >= 2 elements per axis, got {n}")
    sides = bounds[1] - bounds[0]
    if np.any(sides <= 0):
        raise ValueError(f"degenerate bounds: sides {sides}")
    if not np.allclose(sides, sides[0], rtol=1e-12, atol=0.0):
        raise ValueError(f"domain must be a cube, got sides {sides}")

    h = sides[0] / n
    xs = bounds[0, 0] + h * np.arange(n + 1)
    ys = bounds[0, 1] + h * np.arange(n + 1)
    zs = bounds[0, 2] + h * np.arange(n + 1)
    Z, Y, X = np.meshgrid(zs, ys, xs, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    npa = n + 1
    e = np.arange(n**3)
    ex = e % n
    ey = (e // n) % n
    ez = e // (n * n)
    base = ex + npa * (ey + npa * ez)
    # loop order (az outer, ax inner) lists offsets exactly in a = ax+2*ay+4*az order
    offsets = np.array(
        [ax + npa * (ay + npa * az) for az in (0, 1) for ay in (0, 1) for ax in (0, 1)]
    )
    elements = base[:, None] + offsets[None, :]

    boundary = []
    for face_id in range(6):
        axis = face_id // 2
        layer = n - 1 if face_id % 2 == 0 else 0
        a, b = FACE_INPLANE_AXES[face_id]
        idx = [0, 0, 0]
        for ib in range(n):
            for ia in range(n):
                idx[axis] = layer
                idx[a] = ia
                idx[b] = ib
                eid = idx[0] + n * (idx[1] + n * idx[2])
                boundary.append((eid, face_id, face_id))
    boundary_faces = np.array(boundary, dtype=np.int64)
    face_nodes = np.array(
        [
            elements[eid][list(_LOCAL_FACE_NODES[loc])]
            for eid, loc, _ in boundary_faces
        ],
        dtype=np.int64,
    )

    mesh = Mesh(
        bounds=bounds,
        n=int(n),
        nodes=nodes,
        elements=elements,
        boundary_faces=boundary_faces,
        face_nodes=face_nodes,
    )
    for arr in (mesh.bounds, mesh.nodes, mesh.elements, mesh.boundary_faces, mesh.face_nodes):
        arr.setflags(write=False)
    return mesh


@dataclass(frozen=True)
class PatchSet:
    """Tiling of each cube face into m x m square patches.

    ``patch_faces[p]`` lists the boundary-face row indices (into
    ``mesh.boundary_faces``) covered by patch ``p``. Patch ordering is
    face-major in the fixed face order, then lexicographic over the
    in-plane patch grid (lower axis fastest).
    """

    m: int
    patch_faces: tuple
    patch_cube_face: np.ndarray
    patch_centers: np.ndarray

    @property
    def count(self) -> int:
        return len(self.patch_faces)


def build_patches(mesh: Mesh, m: int) -> PatchSet:
    """Tile every cube face into ``m`` x ``m`` patches; ``m`` must divide ``n``."""
    n = mesh.n
    if m < 1 or n % m != 0:
        raise ValueError(f"patches per side m={m} must divide mesh n={n}")
    per = n // m

    patch_faces = []
    patch_cube_face = []
    centers = []
    faces_per_cube_face = n * n
    for face_id in range(6):
        offset = face_id * faces_per_cube_face
        axis = face_id // 2
        a, b = FACE_INPLANE_AXES[face_id]
        for pb in range(m):
            for pa in range(m):
                rows = []
                for ib in range(pb * per, (pb + 1) * per):
                    for ia in range(pa * per, (pa + 1) * per):
                        rows.append(offset + ia + n * ib)
                patch_faces.append(np.array(rows, dtype=np.int64))
                patch_cube_face.append(face_id)
                c = np.zeros(3)
                side = mesh.bounds[1, axis] if face_id % 2 == 0 else mesh.bounds[0, axis]
                c[axis] = side
                c[a] = mesh.bounds[0, a] + mesh.h * per * (pa + 0.5)
                c[b] = mesh.bounds[0, b] + mesh.h * per * (pb + 0.5)
                centers.append(c)

    return PatchSet(
        m=int(m),
        patch_faces=tuple(patch_faces),
        patch_cube_face=np.array(patch_cube_face, dtype=np.int64),
        patch_centers=np.array(centers),
    )


def voxel_box_elements(mesh: Mesh, box) -> np.ndarray:
    """Ids of all elements whose centroid lies in the closed box.

    ``box`` is ((x0,y0,z0), (x1,y1,z1)). Returns a sorted int array; empty
    when the box misses every centroid.
    """
    box = np.asarray(box, dtype=float).reshape(2, 3)
    c = mesh.element_centroids()
    inside = np.all((c >= box[0]) & (c <= box[1]), axis=1)
    return np.nonzero(inside)[0]
