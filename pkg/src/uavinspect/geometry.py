"""Triangle-mesh and camera field-of-view geometry.

Everything the planner needs from the scene is computed here: facet
normals and centroids, the gimbal-rotated FOV pyramid in vertex and
half-space form, the per-orientation back-face table, the structure's
convex hull, and a naive ray-tracing visibility oracle used as ground
truth in the evaluation studies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

_EPS = 1e-9


@dataclass(frozen=True)
class TriMesh:
    """Triangle mesh with per-facet outward unit normals and centroids."""

    vertices: np.ndarray   # V x 3
    faces: np.ndarray      # F x 3, int indices
    normals: np.ndarray    # F x 3, unit
    centroids: np.ndarray  # F x 3

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]

    def facet_vertices(self, index: int) -> np.ndarray:
        """The 3x3 array of the facet's corner points (rows)."""
        return self.vertices[self.faces[index]]


def make_mesh(vertices: np.ndarray, faces: np.ndarray) -> TriMesh:
    """Build a TriMesh, deriving normals from the vertex winding order
    (counter-clockwise seen from outside).

    Rejects out-of-range or repeated indices and near-degenerate
    triangles (area below 1e-9 m^2), reporting the offending facets.
    """
    vertices = np.asarray(vertices, dtype=float)
    faces = np.asarray(faces, dtype=int)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise ValueError("vertices must be V x 3")
    if faces.ndim != 2 or faces.shape[1] != 3:
        raise ValueError("faces must be F x 3")
    if faces.min(initial=0) < 0 or faces.max(initial=-1) >= len(vertices):
        raise ValueError("face index out of range")
    bad = [i for i, f in enumerate(faces) if len(set(f.tolist())) != 3]
    if bad:
        raise ValueError(f"facets with repeated vertices: {bad}")

    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    cross = np.cross(b - a, c - a)
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    degenerate = np.nonzero(areas <= 1e-9)[0]
    if degenerate.size:
        raise ValueError(f"degenerate facets (area <= 1e-9): "
                         f"{degenerate.tolist()}")
    normals = cross / (2.0 * areas[:, None])
    centroids = (a + b + c) / 3.0
    return TriMesh(vertices=vertices, faces=faces, normals=normals,
                   centroids=centroids)


def outward_fraction(mesh: TriMesh) -> float:
    """Fraction of facets whose normal points away from the vertex mean;
    validation aid for watertight meshes (should be ~1)."""
    interior = mesh.vertices.mean(axis=0)
    flux = np.einsum("ij,ij->i", mesh.centroids - interior, mesh.normals)
    return float(np.mean(flux > 0.0))


def load_mesh(path: str | Path) -> TriMesh:
    """Read an ASCII OFF or ASCII STL triangle mesh."""
    path = Path(path)
    text = path.read_text()
    head = text.lstrip()[:80].lower()
    if head.startswith("off"):
        return _parse_off(text)
    if head.startswith("solid"):
        return _parse_stl(text)
    raise ValueError(f"{path}: not an ASCII OFF or STL file")


def _parse_off(text: str) -> TriMesh:
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0].upper() != "OFF":
        raise ValueError("missing OFF header")
    pos = 1
    try:
        nv, nf = int(tokens[pos]), int(tokens[pos + 1])
        pos += 3  # vertex count, face count, edge count
        verts = np.array(tokens[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            if k != 3:
                raise ValueError("only triangular faces are supported")
            faces.append([int(t) for t in tokens[pos + 1:pos + 4]])
            pos += 1 + k
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed OFF file: {exc}") from exc
    return make_mesh(verts, np.array(faces, dtype=int))


def _parse_stl(text: str) -> TriMesh:
    verts: list[list[float]] = []
    index: dict[tuple[float, float, float], int] = {}
    faces = []
    current: list[int] = []
    for raw in text.splitlines():
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "vertex":
            if len(parts) != 4:
                raise ValueError(f"malformed STL vertex line: {raw!r}")
            key = (float(parts[1]), float(parts[2]), float(parts[3]))
            if key not in index:
                index[key] = len(verts)
                verts.append(list(key))
            current.append(index[key])
        elif parts[0] == "endfacet":
            if len(current) != 3:
                raise ValueError("STL facet without exactly 3 vertices")
            faces.append(current)
            current = []
    if current:
        raise ValueError("unterminated STL facet")
    if not faces:
        raise ValueError("no facets found in STL file")
    return make_mesh(np.array(verts), np.array(faces, dtype=int))


def write_off(mesh: TriMesh, path: str | Path) -> None:
    """Write the mesh as ASCII OFF (used to bundle the demo scenes)."""
    lines = ["OFF", f"{len(mesh.vertices)} {len(mesh.faces)} 0"]
    for v in mesh.vertices:
        lines.append(f"{v[0]:.10g} {v[1]:.10g} {v[2]:.10g}")
    for f in mesh.faces:
        lines.append(f"3 {f[0]} {f[1]} {f[2]}")
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class TargetSet:
    """Facets to inspect and their (positive) rewards."""

    indices: np.ndarray  # int
    rewards: np.ndarray  # float

    def __post_init__(self) -> None:
        if len(self.indices) != len(set(self.indices.tolist())):
            raise ValueError("target indices must be distinct")
        if np.any(self.rewards <= 0):
            raise ValueError("rewards must be positive")

    @property
    def count(self) -> int:
        return len(self.indices)


def load_targets(path: str | Path) -> TargetSet:
    """Read a JSON array of {facet_index, reward} records."""
    records = json.loads(Path(path).read_text())
    idx = np.array([r["facet_index"] for r in records], dtype=int)
    rew = np.array([r["reward"] for r in records], dtype=float)
    return TargetSet(indices=idx, rewards=rew)


def save_targets(targets: TargetSet, path: str | Path) -> None:
    records = [{"facet_index": int(i), "reward": float(r)}
               for i, r in zip(targets.indices, targets.rewards)]
    Path(path).write_text(json.dumps(records, indent=1) + "\n")


# ---------------------------------------------------------------------------
# Camera field of view


@dataclass(frozen=True)
class FovPyramid:
    """Right square camera FOV pyramid, apex at the origin.

    The base is a W x W square at distance H along +z; vertex matrix
    columns 1..4 are the base corners, column 5 the apex.
    """

    width: float
    height: float

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("FOV width and height must be positive")

    @property
    def vertices(self) -> np.ndarray:
        w, h = 0.5 * self.width, self.height
        return np.array([
            [-w,  w,  w, -w, 0.0],
            [ w,  w, -w, -w, 0.0],
            [ h,  h,  h,  h, 0.0],
        ])


def rotation_y(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotate_fov(pyramid: FovPyramid, theta_z: float, theta_y: float
               ) -> np.ndarray:
    """Gimbal the FOV: rotate about y first, then about z."""
    return rotation_z(theta_z) @ rotation_y(theta_y) @ pyramid.vertices


def fov_halfspaces(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Half-space form {x : Gamma x <= Delta} of the FOV pyramid hull.

    Rows 0..3 are the lateral facets (apex and base edge k, k+1), row 4
    the base; normals are unit and outward.
    """
    V = np.asarray(V, dtype=float)
    if V.shape != (3, 5):
        raise ValueError("FOV vertex matrix must be 3 x 5")
    apex = V[:, 4]
    base = V[:, :4]
    interior = V.mean(axis=1)  # on the pyramid axis, strictly inside
    rows = []
    offsets = []
    for k in range(4):
        p1, p2 = base[:, k], base[:, (k + 1) % 4]
        n = np.cross(p1 - apex, p2 - apex)
        norm = np.linalg.norm(n)
        if norm <= _EPS:
            raise ValueError("degenerate FOV pyramid (flat lateral facet)")
        n = n / norm
        d = float(n @ apex)
        if n @ interior > d:
            n, d = -n, -d
        rows.append(n)
        offsets.append(d)
    n = np.cross(base[:, 1] - base[:, 0], base[:, 2] - base[:, 0])
    norm = np.linalg.norm(n)
    if norm <= _EPS:
        raise ValueError("degenerate FOV pyramid (flat base)")
    n = n / norm
    d = float(n @ base[:, 0])
    if n @ interior > d:
        n, d = -n, -d
    rows.append(n)
    offsets.append(d)
    return np.array(rows), np.array(offsets)


def viewing_direction(V: np.ndarray) -> np.ndarray:
    """Origin-anchored viewing direction: centroid of the 4 base vertices."""
    V = np.asarray(V, dtype=float)
    return V[:, :4].mean(axis=1)


@dataclass(frozen=True)
class FovOrientation:
    """One gimbal setting: rotated vertices, half-space form, view ray."""

    index: int
    theta_z: float
    theta_y: float
    vertices: np.ndarray    # 3 x 5
    gamma: np.ndarray       # 5 x 3 outward unit normals
    delta: np.ndarray       # 5 offsets
    view_dir: np.ndarray    # 3, = base centroid with apex at origin
    base_center: np.ndarray  # 3


def orient_fov(pyramid: FovPyramid, index: int, theta_z: float,
               theta_y: float) -> FovOrientation:
    V = rotate_fov(pyramid, theta_z, theta_y)
    gamma, delta = fov_halfspaces(V)
    view = viewing_direction(V)
    return FovOrientation(index=index, theta_z=theta_z, theta_y=theta_y,
                          vertices=V, gamma=gamma, delta=delta,
                          view_dir=view, base_center=view.copy())


def build_fov_catalog(pyramid: FovPyramid,
                      theta_z_grid: np.ndarray | None = None,
                      theta_y_grid: np.ndarray | None = None
                      ) -> list[FovOrientation]:
    """All (theta_z, theta_y) grid combinations, theta_z-major.

    Default grids are 8 equally spaced angles over the full circle on
    both axes.
    """
    if theta_z_grid is None:
        theta_z_grid = 2.0 * np.pi * np.arange(8) / 8.0
    if theta_y_grid is None:
        theta_y_grid = 2.0 * np.pi * np.arange(8) / 8.0
    catalog = []
    idx = 0
    for tz in np.asarray(theta_z_grid, dtype=float):
        for ty in np.asarray(theta_y_grid, dtype=float):
            catalog.append(orient_fov(pyramid, idx, tz, ty))
            idx += 1
    return catalog


def backface_table(mesh: TriMesh, targets: TargetSet,
                   orientations: list[FovOrientation]) -> np.ndarray:
    """Visibility pre-filter b[i][phi]: camera orientation phi faces
    target facet i.

    True iff dot(view_dir, normal) <= 0; an edge-on facet (zero dot)
    counts as facing.
    """
    normals = mesh.normals[targets.indices]           # I x 3
    views = np.stack([o.view_dir for o in orientations], axis=0)  # Phi x 3
    return (normals @ views.T) <= 0.0


def point_in_fov(gamma: np.ndarray, delta: np.ndarray,
                 camera_pos: np.ndarray, point: np.ndarray,
                 tol: float = _EPS) -> bool:
    """Containment of a world point in the FOV hull anchored at camera_pos."""
    shift = gamma @ np.asarray(camera_pos, dtype=float)
    return bool(np.all(gamma @ np.asarray(point, dtype=float)
                       <= delta + shift + tol))


# ---------------------------------------------------------------------------
# Structure hull and ray-traced visibility


@dataclass(frozen=True)
class HalfSpaceHull:
    """Convex hull as {x : normals @ x <= offsets}, coplanar faces merged."""

    normals: np.ndarray  # J x 3, unit rows
    offsets: np.ndarray  # J

    @property
    def num_planes(self) -> int:
        return self.normals.shape[0]

    def contains(self, point: np.ndarray, tol: float = _EPS) -> bool:
        return bool(np.all(self.normals @ np.asarray(point, dtype=float)
                           <= self.offsets + tol))

    def margin(self, point: np.ndarray) -> float:
        """Largest signed distance outside any plane (>0 means outside)."""
        return float(np.max(self.normals @ np.asarray(point, dtype=float)
                            - self.offsets))


def hull_halfspaces(mesh: TriMesh) -> HalfSpaceHull:
    """Convex hull of the mesh vertices in half-space form."""
    try:
        hull = ConvexHull(mesh.vertices)
    except Exception as exc:  # qhull raises on flat/degenerate input
        raise ValueError(f"degenerate vertex set for convex hull: {exc}")
    # qhull equations: n.x + b <= 0 with |n| = 1
    normals = hull.equations[:, :3]
    offsets = -hull.equations[:, 3]
    keep_n: list[np.ndarray] = []
    keep_d: list[float] = []
    for n, d in zip(normals, offsets):
        merged = False
        for j, (nk, dk) in enumerate(zip(keep_n, keep_d)):
            if n @ nk > 1.0 - _EPS and abs(d - dk) <= 1e-9 * max(1.0, abs(dk)):
                merged = True
                break
        if not merged:
            keep_n.append(n)
            keep_d.append(float(d))
    return HalfSpaceHull(normals=np.array(keep_n), offsets=np.array(keep_d))


def ray_hits_triangle(origin: np.ndarray, direction: np.ndarray,
                      tri: np.ndarray, tol: float = _EPS
                      ) -> float | None:
    """Moeller-Trumbore ray/triangle test.

    Returns the intersection parameter t along ``direction`` (any real
    multiple), or None when the ray misses the (tolerance-shrunk)
    triangle or runs parallel to its plane.
    """
    e1 = tri[1] - tri[0]
    e2 = tri[2] - tri[0]
    pvec = np.cross(direction, e2)
    det = float(e1 @ pvec)
    if abs(det) < tol:
        return None
    inv = 1.0 / det
    tvec = origin - tri[0]
    u = float(tvec @ pvec) * inv
    if u < -tol or u > 1.0 + tol:
        return None
    qvec = np.cross(tvec, e1)
    v = float(direction @ qvec) * inv
    if v < -tol or u + v > 1.0 + tol:
        return None
    return float(e2 @ qvec) * inv


def ray_visible(mesh: TriMesh, origin: np.ndarray, facet_index: int,
                tol: float = _EPS) -> bool:
    """Ground-truth visibility of a facet's centroid from a viewpoint.

    The facet must be front-facing from the origin and the open segment
    origin -> centroid must cross no other facet of the mesh.
    """
    origin = np.asarray(origin, dtype=float)
    centroid = mesh.centroids[facet_index]
    normal = mesh.normals[facet_index]
    if (centroid - origin) @ normal >= 0.0:
        return False
    direction = centroid - origin
    for j in range(mesh.num_faces):
        if j == facet_index:
            continue
        t = ray_hits_triangle(origin, direction, mesh.vertices[mesh.faces[j]],
                              tol)
        if t is not None and tol < t < 1.0 - tol:
            return False
    return True
