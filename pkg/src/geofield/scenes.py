"""Built-in geometry: primitive factories, extrusion, and demo part pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptor import IntegrationPolicy, KernelSpec, SampleGrid, affinity_field
from .energy import PartAsset
from .solids import Polygon2, Solid, TriangleMesh

__all__ = [
    "box_mesh",
    "icosphere",
    "lbracket",
    "extrude_polygon",
    "random_polygon",
    "grid_for_pair",
    "build_pair_assets",
    "Scene",
    "SCENES",
    "get_scene",
]


# ---------------------------------------------------------------------------
# primitives


def box_mesh(extents=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)):
    e = 0.5 * np.asarray(extents, dtype=np.float64)
    c = np.asarray(center, dtype=np.float64)
    # vertex i has coordinate signs given by bits (x, y, z) of i
    verts = np.array([
        [sx, sy, sz]
        for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)
    ], dtype=np.float64)
    verts = verts * e + c
    faces = np.array([
        [4, 6, 7], [4, 7, 5],   # +x
        [0, 1, 3], [0, 3, 2],   # -x
        [2, 3, 7], [2, 7, 6],   # +y
        [0, 4, 5], [0, 5, 1],   # -y
        [1, 5, 7], [1, 7, 3],   # +z
        [0, 2, 6], [0, 6, 4],   # -z
    ], dtype=np.int64)
    return Solid(TriangleMesh(verts, faces))


def icosphere(radius=1.0, subdivisions=3, center=(0.0, 0.0, 0.0)):
    """Geodesic sphere; 20 * 4^subdivisions faces (1280 at the default)."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    V = np.asarray(verts) * radius + np.asarray(center, dtype=np.float64)
    return Solid(TriangleMesh(V, np.asarray(faces, dtype=np.int64)))


_LBRACKET_LOOP = [
    (-0.5, -0.5), (0.5, -0.5), (0.5, -0.2),
    (-0.2, -0.2), (-0.2, 0.5), (-0.5, 0.5),
]


def lbracket(height=0.4, scale=1.0):
    loop = np.asarray(_LBRACKET_LOOP, dtype=np.float64) * scale
    return extrude_polygon([loop], height)


# ---------------------------------------------------------------------------
# extrusion


def _point_in_tri(p, a, b, c):
    def side(u, v):
        return (v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0])

    d1, d2, d3 = side(a, b), side(b, c), side(c, a)
    neg = (d1 < 0) or (d2 < 0) or (d3 < 0)
    pos = (d1 > 0) or (d2 > 0) or (d3 > 0)
    return not (neg and pos)


def _ear_clip(loop):
    """Triangulate one simple CCW loop into index triples."""
    n = len(loop)
    idx = list(range(n))
    scale = float(np.max(np.abs(loop))) or 1.0
    tris = []
    spins = 0
    while len(idx) > 3:
        spins += 1
        if spins > n * n + 16:
            raise ValueError("ear clipping stalled; loop may be non-simple")
        m = len(idx)
        for k in range(m):
            i0, i1, i2 = idx[(k - 1) % m], idx[k], idx[(k + 1) % m]
            a, b, c = loop[i0], loop[i1], loop[i2]
            cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if cross <= 1e-12 * scale * scale:
                continue  # reflex or degenerate corner, not an ear
            if any(
                _point_in_tri(loop[j], a, b, c)
                for j in idx
                if j not in (i0, i1, i2)
            ):
                continue
            tris.append((i0, i1, i2))
            del idx[k]
            break
        else:
            raise ValueError("no ear found; loop may be non-simple")
    tris.append(tuple(idx))
    return tris


def extrude_polygon(loops, height):
    """Prism over a single-loop polygon, centered on z = 0, outward normals."""
    poly = Polygon2(loops)
    if len(poly.loops) != 1:
        raise ValueError("extrusion supports a single loop")
    loop = poly.loops[0]  # normalized CCW
    n = len(loop)
    h = 0.5 * float(height)
    bottom = np.column_stack([loop, np.full(n, -h)])
    top = np.column_stack([loop, np.full(n, +h)])
    verts = np.vstack([bottom, top])
    caps = _ear_clip(loop)
    faces = []
    for i0, i1, i2 in caps:
        faces.append((i2, i1, i0))            # bottom cap faces -z
        faces.append((n + i0, n + i1, n + i2))  # top cap faces +z
    for i in range(n):
        j = (i + 1) % n
        faces.append((i, j, n + j))
        faces.append((i, n + j, n + i))
    return Solid(TriangleMesh(verts, np.asarray(faces, dtype=np.int64)))


def random_polygon(rng, n_vertices=9, r_min=0.4, r_max=1.0):
    """Star-shaped (hence simple) polygon about the origin.

    Angles are jittered off a uniform fan so every angular gap stays below
    pi; a chord spanning more than half a turn can leave its wedge and cross
    non-adjacent edges.
    """
    jitter = rng.uniform(0.15, 0.85, n_vertices)
    theta = (np.arange(n_vertices) + jitter) * (2.0 * np.pi / n_vertices)
    r = rng.uniform(r_min, r_max, n_vertices)
    loop = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return Solid(Polygon2([loop]))


# ---------------------------------------------------------------------------
# pair grids and assets


def grid_for_pair(fixed, moving, n, domain=None, center="cell"):
    """Shared grid sized for clean translations at any rotation.

    The moved part's support reach is its largest corner radius (rotation
    safe); add the fixed part's half diagonal so every clean translation of
    interest keeps the dilated support inside the box.  center="node" puts a
    sample node exactly at the coordinate origin, so a mate at t = 0 lands on
    a node of every power-of-two refinement instead of between four of them.
    """
    d = fixed.dimension
    if moving.dimension != d:
        raise ValueError("mixed dimensions")
    if domain is None:
        lo1, hi1 = fixed.bbox
        lo2, hi2 = moving.bbox
        rho1 = float(np.max(np.abs(np.stack([lo1, hi1]))))
        rho2 = float(np.linalg.norm(np.maximum(np.abs(lo2), np.abs(hi2))))
        r1 = 0.5 * float(np.linalg.norm(hi1 - lo1))
        domain = 2.0 * 1.25 * (max(rho1, rho2) + rho2 + r1)
    h = float(domain) / n
    if center not in ("cell", "node"):
        raise ValueError("center must be 'cell' or 'node'")
    shift = 0.5 * h if center == "cell" else 0.0
    origin = (-0.5 * float(domain) + shift,) * d
    return SampleGrid(dimension=d, dims=(n,) * d, origin=origin, spacing=h)


def build_pair_assets(fixed, moving, grid, kernel=KernelSpec(),
                      policy=IntegrationPolicy(), m_prime=None, threads=None):
    """Affinity fields for both parts on one grid, packaged as assets."""
    f1 = affinity_field(fixed, grid, kernel, policy, threads=threads)
    f2 = affinity_field(moving, grid, kernel, policy, threads=threads)
    a1 = PartAsset.from_field("fixed", f1, movable=False, m_prime=m_prime,
                              solid_box=fixed.bbox)
    a2 = PartAsset.from_field("moving", f2, movable=True, m_prime=m_prime,
                              solid_box=moving.bbox)
    return a1, a2


# ---------------------------------------------------------------------------
# demo scenes

# Socket: a slab with a rectangular notch opening upward. Peg: a T-plug whose
# stem fills the notch exactly at t = 0 (the peg is drawn seated, so the snap
# pose is the coordinate origin and sits on a grid node of every refinement).
_SOCKET_LOOP = [
    (-0.55, -0.35), (0.55, -0.35), (0.55, 0.25), (0.15, 0.25),
    (0.15, -0.15), (-0.15, -0.15), (-0.15, 0.25), (-0.55, 0.25),
]
_PEG_LOOP = [
    (-0.15, -0.15), (0.15, -0.15), (0.15, 0.25), (0.3, 0.25),
    (0.3, 0.35), (-0.3, 0.35), (-0.3, 0.25), (-0.15, 0.25),
]


@dataclass
class Scene:
    """A fixed part, a moving part, and the pose where they mate."""

    name: str
    fixed: Solid
    moving: Solid
    kernel: KernelSpec
    domain: float
    default_n: int
    snap_translation: np.ndarray
    grid_center: str = "cell"

    @property
    def dimension(self):
        return self.fixed.dimension

    def grid(self, n=None):
        return grid_for_pair(self.fixed, self.moving, n or self.default_n,
                             domain=self.domain, center=self.grid_center)

    def build_assets(self, n=None, m_prime=None, threads=None,
                     policy=IntegrationPolicy()):
        return build_pair_assets(self.fixed, self.moving, self.grid(n),
                                 self.kernel, policy, m_prime, threads)


def _peg2d():
    return Scene(
        name="peg2d",
        fixed=Solid(Polygon2([np.asarray(_SOCKET_LOOP, dtype=np.float64)])),
        moving=Solid(Polygon2([np.asarray(_PEG_LOOP, dtype=np.float64)])),
        kernel=KernelSpec(sigma=0.5, lambda_in=1.0, lambda_out=3.0),
        domain=6.0,
        default_n=256,
        snap_translation=np.array([0.0, 0.0]),
        grid_center="node",
    )


def _peg3d():
    fixed = extrude_polygon([np.asarray(_SOCKET_LOOP, dtype=np.float64)], 0.5)
    moving = extrude_polygon([np.asarray(_PEG_LOOP, dtype=np.float64)], 0.5)
    return Scene(
        name="peg3d",
        fixed=fixed,
        moving=moving,
        kernel=KernelSpec(sigma=0.5, lambda_in=1.0, lambda_out=3.0),
        domain=6.0,
        default_n=32,
        snap_translation=np.array([0.0, 0.0, 0.0]),
        grid_center="node",
    )


SCENES = {"peg2d": _peg2d, "peg3d": _peg3d}


def get_scene(name):
    try:
        return SCENES[name]()
    except KeyError:
        raise ValueError(f"unknown scene {name!r}; have {sorted(SCENES)}") from None
