"""Watertight boundary solids: triangle meshes in 3D, polygon loop sets in 2D.

Loading, validation (closure, orientation, simplicity), bounding boxes and
exact point-to-boundary distance. Everything downstream assumes the
invariants enforced here, in particular that winding numbers are trustworthy.
"""

from __future__ import annotations

import json
import struct

import numpy as np

__all__ = [
    "SolidError",
    "TriangleMesh",
    "Polygon2",
    "Solid",
    "load_solid",
    "unsigned_distance",
    "bounding_box",
]


class SolidError(ValueError):
    """Geometry rejected by validation; .element is the offending index when known."""

    def __init__(self, message, element=None):
        if element is not None:
            message = f"{message} (element {element})"
        super().__init__(message)
        self.element = element


# ---------------------------------------------------------------------------
# 3D: triangle meshes


class TriangleMesh:
    """Closed, consistently oriented triangle mesh with outward normals.

    Rejects open meshes, mixed orientation, degenerate faces and
    negative-genus edge graphs rather than attempting repair.
    """

    def __init__(self, vertices, faces, normalize=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise SolidError("vertices must be an (n, 3) array")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise SolidError("faces must be an (n, 3) array of vertex indices")
        if len(self.faces) == 0:
            raise SolidError("empty mesh")
        self._validate_indices()
        self._compute_face_data()
        self._validate_closure()
        if self.signed_volume() < 0:
            if normalize:
                self.faces = self.faces[:, ::-1].copy()
                self._compute_face_data()
            else:
                raise SolidError("mesh oriented inward (signed volume < 0)")
        if self.signed_volume() <= 0:
            raise SolidError("mesh has nonpositive signed volume")
        self.bbox = (self.vertices.min(axis=0), self.vertices.max(axis=0))

    def _validate_indices(self):
        bad = np.nonzero((self.faces < 0) | (self.faces >= len(self.vertices)))[0]
        if bad.size:
            raise SolidError("face references missing vertex", element=int(bad[0]))

    def _compute_face_data(self):
        tri = self.vertices[self.faces]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        area2 = np.linalg.norm(cross, axis=1)
        diag = float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))
        bad = np.nonzero(area2 <= 2e-12 * diag * diag)[0]
        if bad.size:
            raise SolidError("degenerate face (zero area)", element=int(bad[0]))
        self.areas = 0.5 * area2
        self.normals = cross / area2[:, None]

    def _validate_closure(self):
        # each undirected edge must appear exactly twice, once per direction
        f = self.faces
        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        owner = np.tile(np.arange(len(f)), 3)
        key = directed[:, 0] * len(self.vertices) + directed[:, 1]
        uniq, counts = np.unique(key, return_counts=True)
        if np.any(counts > 1):
            dup = uniq[np.argmax(counts > 1)]
            idx = int(owner[np.nonzero(key == dup)[0][0]])
            raise SolidError("directed edge repeated (inconsistent orientation)", element=idx)
        undirected = np.sort(directed, axis=1)
        ukey = undirected[:, 0] * len(self.vertices) + undirected[:, 1]
        uu, uc = np.unique(ukey, return_counts=True)
        if np.any(uc != 2):
            bad = uu[np.argmax(uc != 2)]
            idx = int(owner[np.nonzero(ukey == bad)[0][0]])
            raise SolidError("boundary edge not shared by 2 faces (open mesh)", element=idx)
        n_v = len(np.unique(self.faces))
        n_e = len(uu)
        n_f = len(f)
        chi = n_v - n_e + n_f
        if chi % 2 != 0 or chi > 2:
            raise SolidError(f"edge graph Euler characteristic {chi} not 2 - 2g with g >= 0")
        self.genus = (2 - chi) // 2

    def signed_volume(self):
        """Divergence-theorem volume; positive for outward orientation."""
        tri = self.vertices[self.faces]
        return float(np.einsum("ij,ij->", tri[:, 0], np.cross(tri[:, 1], tri[:, 2]))) / 6.0

    @property
    def triangles(self):
        return self.vertices[self.faces]


# ---------------------------------------------------------------------------
# 2D: polygon loop sets


def _shoelace(loop):
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _point_in_loop(p, loop):
    """Even-odd crossing test, robust enough for off-boundary queries."""
    x, y = p
    a = loop
    b = np.roll(loop, -1, axis=0)
    cond = (a[:, 1] > y) != (b[:, 1] > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
    return int(np.sum(cond & (xs > x))) % 2 == 1


def _segments_cross(a0, a1, b0, b1):
    """Proper or improper crossing of two segments, excluding shared endpoints."""

    def orient(p, q, r):
        v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        scale = max(abs(q[0] - p[0]), abs(q[1] - p[1]), abs(r[0] - p[0]), abs(r[1] - p[1]), 1e-30)
        if abs(v) < 1e-14 * scale * scale:
            return 0
        return 1 if v > 0 else -1

    o1, o2 = orient(a0, a1, b0), orient(a0, a1, b1)
    o3, o4 = orient(b0, b1, a0), orient(b0, b1, a1)
    if o1 != o2 and o3 != o4:
        return True
    # collinear overlap counts as a crossing too
    def on(p, q, r):
        return (min(p[0], q[0]) - 1e-14 <= r[0] <= max(p[0], q[0]) + 1e-14
                and min(p[1], q[1]) - 1e-14 <= r[1] <= max(p[1], q[1]) + 1e-14)

    if o1 == 0 and on(a0, a1, b0):
        return True
    if o2 == 0 and on(a0, a1, b1):
        return True
    return False


class Polygon2:
    """Set of simple closed loops; outer loops CCW, hole loops CW.

    Orientation is normalized from containment depth (even depth = outer)
    so callers can hand loops in either winding.
    """

    def __init__(self, loops):
        if not loops:
            raise SolidError("empty polygon")
        norm_loops = []
        for i, raw in enumerate(loops):
            arr = np.ascontiguousarray(raw, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise SolidError("loop must be a (k, 2) array", element=i)
            if len(arr) > 1 and np.allclose(arr[0], arr[-1]):
                arr = arr[:-1]
            if len(arr) < 3:
                raise SolidError("loop needs at least 3 distinct vertices", element=i)
            if abs(_shoelace(arr)) < 1e-14:
                raise SolidError("loop has zero area", element=i)
            norm_loops.append(arr)
        self._validate_simplicity(norm_loops)
        self.loops = self._normalize_orientation(norm_loops)
        if sum(_shoelace(L) for L in self.loops) <= 0:
            raise SolidError("union of loops has nonpositive area")
        allv = np.concatenate(self.loops)
        self.bbox = (allv.min(axis=0), allv.max(axis=0))
        self._build_segments()

    def _validate_simplicity(self, loops):
        segs = []
        for li, L in enumerate(loops):
            nb = np.roll(L, -1, axis=0)
            for k in range(len(L)):
                segs.append((li, k, L[k], nb[k]))
        for i in range(len(segs)):
            li, ki, a0, a1 = segs[i]
            for j in range(i + 1, len(segs)):
                lj, kj, b0, b1 = segs[j]
                if li == lj:
                    n = len(loops[li])
                    if kj == (ki + 1) % n or ki == (kj + 1) % n:
                        continue  # adjacent edges share a vertex by construction
                if _segments_cross(a0, a1, b0, b1):
                    raise SolidError("self-intersecting loop set", element=li)

    def _normalize_orientation(self, loops):
        out = []
        for i, L in enumerate(loops):
            depth = sum(
                1 for j, other in enumerate(loops) if j != i and _point_in_loop(L[0], other)
            )
            ccw = _shoelace(L) > 0
            want_ccw = depth % 2 == 0
            out.append(L if ccw == want_ccw else L[::-1].copy())
        return out

    def _build_segments(self):
        a, b = [], []
        for L in self.loops:
            a.append(L)
            b.append(np.roll(L, -1, axis=0))
        self.seg_a = np.ascontiguousarray(np.concatenate(a))
        self.seg_b = np.ascontiguousarray(np.concatenate(b))
        d = self.seg_b - self.seg_a
        self.seg_len = np.linalg.norm(d, axis=1)
        t = d / self.seg_len[:, None]
        # outward normal of a CCW loop: rotate tangent by -90 degrees
        self.seg_normal = np.ascontiguousarray(np.stack([t[:, 1], -t[:, 0]], axis=1))

    def area(self):
        return sum(_shoelace(L) for L in self.loops)


# ---------------------------------------------------------------------------
# wrapper


class Solid:
    """Dimension-tagged boundary representation with a cached bounding box."""

    def __init__(self, shape):
        if isinstance(shape, TriangleMesh):
            self.dimension = 3
        elif isinstance(shape, Polygon2):
            self.dimension = 2
        else:
            raise SolidError(f"unsupported shape type {type(shape).__name__}")
        self.shape = shape
        self.bbox = shape.bbox
        self._bvh = None

    @property
    def mesh(self):
        if self.dimension != 3:
            raise SolidError("not a 3D solid")
        return self.shape

    @property
    def polygon(self):
        if self.dimension != 2:
            raise SolidError("not a 2D solid")
        return self.shape

    @property
    def bbox_diag(self):
        return float(np.linalg.norm(self.bbox[1] - self.bbox[0]))

    def measure(self):
        """Signed volume (3D) or signed area (2D)."""
        return self.shape.signed_volume() if self.dimension == 3 else self.shape.area()

    def element_boxes(self):
        if self.dimension == 3:
            tri = self.mesh.triangles
            return tri.min(axis=1), tri.max(axis=1)
        pts = np.stack([self.polygon.seg_a, self.polygon.seg_b], axis=1)
        return pts.min(axis=1), pts.max(axis=1)

    def bvh(self):
        if self._bvh is None:
            self._bvh = build_bvh(*self.element_boxes())
        return self._bvh


# ---------------------------------------------------------------------------
# BVH over boundary elements (median split, flat arrays, leaf size 4)


def build_bvh(elem_min, elem_max, leaf_size=4):
    """Returns flat arrays (bmin, bmax, left, right, start, count, perm).

    Interior nodes have left/right child indices and count == 0; leaves have
    left == -1 and reference perm[start:start+count].
    """
    n = len(elem_min)
    centers = 0.5 * (elem_min + elem_max)
    perm = np.arange(n, dtype=np.int64)
    bmin, bmax, left, right, start, count = [], [], [], [], [], []

    def new_node():
        bmin.append(None)
        bmax.append(None)
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(bmin) - 1

    stack = [(new_node(), 0, n)]
    while stack:
        node, lo, hi = stack.pop()
        ids = perm[lo:hi]
        bmin[node] = elem_min[ids].min(axis=0)
        bmax[node] = elem_max[ids].max(axis=0)
        if hi - lo <= leaf_size:
            start[node], count[node] = lo, hi - lo
            continue
        axis = int(np.argmax(bmax[node] - bmin[node]))
        order = np.argsort(centers[ids, axis], kind="stable")
        perm[lo:hi] = ids[order]
        mid = (lo + hi) // 2
        lc, rc = new_node(), new_node()
        left[node], right[node] = lc, rc
        stack.append((lc, lo, mid))
        stack.append((rc, mid, hi))

    return (
        np.ascontiguousarray(bmin, dtype=np.float64),
        np.ascontiguousarray(bmax, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(start, dtype=np.int64),
        np.asarray(count, dtype=np.int64),
        perm,
    )


# ---------------------------------------------------------------------------
# public queries


def unsigned_distance(solid, p):
    """Exact min distance from p to the discrete boundary (point-element, not vertex-only)."""
    from . import backend

    p = np.asarray(p, dtype=np.float64).reshape(1, -1)
    if p.shape[1] != solid.dimension:
        raise SolidError("query point dimension mismatch")
    return float(backend.distance_batch(solid, p)[0])


def bounding_box(solid):
    return solid.bbox


# ---------------------------------------------------------------------------
# loaders


def _load_obj(path):
    verts, faces = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    try:
                        idx.append(int(tok.split("/")[0]))
                    except ValueError as exc:
                        raise SolidError(f"bad face token {tok!r} at line {ln}") from exc
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                if len(idx) < 3:
                    raise SolidError(f"face with < 3 vertices at line {ln}")
                for k in range(1, len(idx) - 1):  # fan-triangulate n-gons
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not verts or not faces:
        raise SolidError("OBJ file has no geometry")
    return np.asarray(verts, dtype=np.float64), np.asarray(faces, dtype=np.int64)


def _load_stl(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 84:
        head = blob.decode("latin-1", errors="replace")
        if "facet" not in head:
            raise SolidError("STL file too short")
    if blob[:5] == b"solid" and b"facet" in blob[:400]:
        return _parse_stl_ascii(blob.decode("latin-1"))
    (nf,) = struct.unpack_from("<I", blob, 80)
    need = 84 + nf * 50
    if len(blob) < need:
        raise SolidError("binary STL truncated")
    rec = np.frombuffer(blob, dtype=np.uint8, count=nf * 50, offset=84).reshape(nf, 50)
    tri = rec[:, 12:48].copy().view("<f4").reshape(nf, 3, 3).astype(np.float64)
    return _weld(tri)


def _parse_stl_ascii(text):
    vals = []
    for line in text.splitlines():
        parts = line.split()
        if parts[:1] == ["vertex"]:
            vals.append([float(parts[1]), float(parts[2]), float(parts[3])])
    if not vals or len(vals) % 3:
        raise SolidError("ASCII STL vertex count not a multiple of 3")
    return _weld(np.asarray(vals, dtype=np.float64).reshape(-1, 3, 3))


def _weld(tri, tol=1e-9):
    """Merge positionally identical corners of an STL triangle soup."""
    pts = tri.reshape(-1, 3)
    scale = max(float(np.abs(pts).max()), 1.0)
    key = np.round(pts / (scale * tol)).astype(np.int64)
    _, index, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    verts = pts[index]
    faces = inverse.reshape(-1, 3)
    return verts, faces


def _load_poly_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SolidError(f"poly-json parse failure: {exc}") from exc
    if not isinstance(doc, dict) or "loops" not in doc:
        raise SolidError("poly-json must be an object with a 'loops' key")
    return doc["loops"]


def load_solid(path, format=None):
    """Load a Solid from OBJ / binary STL (3D) or poly-json (2D).

    Orientation is normalized to the outward convention; meshes that fail
    closure or loops that self-intersect are rejected with the offending
    element index in the error.
    """
    path = str(path)
    if format is None:
        low = path.lower()
        if low.endswith(".obj"):
            format = "obj"
        elif low.endswith(".stl"):
            format = "stl"
        elif low.endswith(".json"):
            format = "poly-json"
        else:
            raise SolidError(f"cannot infer format of {path!r}")
    if format == "obj":
        verts, faces = _load_obj(path)
        return Solid(TriangleMesh(verts, faces))
    if format == "stl":
        verts, faces = _load_stl(path)
        return Solid(TriangleMesh(verts, faces))
    if format == "poly-json":
        return Solid(Polygon2(_load_poly_json(path)))
    raise SolidError(f"unknown format {format!r}")
