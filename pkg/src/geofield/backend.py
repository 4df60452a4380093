"""Backend selection and dispatch for the hot kernels.

The compiled extension (_core) is used when importable; the pure-numpy
implementation (_fallback) otherwise. GEOFIELD_BACKEND=fallback|core forces a
choice, GEOFIELD_THREADS sets the default node-partition count. Both backends
give deterministic results independent of the partition count: every node's
accumulation order is fixed by element order and recursion order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _fallback

try:
    from . import _core

    HAVE_CORE = True
except ImportError:  # pure-python install or failed build
    _core = None
    HAVE_CORE = False

_env = os.environ.get("GEOFIELD_BACKEND", "").strip().lower()
if _env == "core" and not HAVE_CORE:
    raise ImportError("GEOFIELD_BACKEND=core but the compiled extension is not importable")
_active = _env if _env in ("core", "fallback") else ("core" if HAVE_CORE else "fallback")


def current():
    return _active


def use(name):
    """Switch backends at runtime (used by the benchmark comparison)."""
    global _active
    if name not in ("core", "fallback"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "core" and not HAVE_CORE:
        raise RuntimeError("compiled extension not available")
    _active = name


def default_threads():
    try:
        n = int(os.environ.get("GEOFIELD_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def _ranges(n, threads):
    threads = max(1, min(threads, n)) if n else 1
    bounds = np.linspace(0, n, threads + 1).astype(int)
    return [(int(bounds[i]), int(bounds[i + 1])) for i in range(threads) if bounds[i] < bounds[i + 1]]


def _run_partitioned(fn, n, threads):
    """fn(i0, i1) writes disjoint output slices; partitioning never changes values."""
    parts = _ranges(n, threads)
    if len(parts) <= 1:
        fn(0, n)
        return
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        list(pool.map(lambda r: fn(*r), parts))


def distance_batch(solid, P, threads=None):
    """Min distance from each row of P to the solid's boundary elements."""
    P = np.ascontiguousarray(P, dtype=np.float64)
    threads = threads or default_threads()
    if _active == "core":
        out = np.empty(len(P))
        bmin, bmax, left, right, start, count, perm = solid.bvh()
        if solid.dimension == 2:
            poly = solid.polygon
            fn = lambda i0, i1: _core.distance_2d(
                bmin, bmax, left, right, start, count, perm, poly.seg_a, poly.seg_b, P, out, i0, i1
            )
        else:
            tri = np.ascontiguousarray(solid.mesh.triangles)
            fn = lambda i0, i1: _core.distance_3d(
                bmin, bmax, left, right, start, count, perm, tri, P, out, i0, i1
            )
        _run_partitioned(fn, len(P), threads)
        return out
    if solid.dimension == 2:
        poly = solid.polygon
        return _fallback.distance_2d(poly.seg_a, poly.seg_b, P)
    return _fallback.distance_3d(solid.mesh.triangles, P)


def winding_batch(solid, P, threads=None):
    """Exact winding number (per-element subtended angles) at each row of P."""
    P = np.ascontiguousarray(P, dtype=np.float64)
    threads = threads or default_threads()
    if _active == "core":
        out = np.empty(len(P))
        if solid.dimension == 2:
            poly = solid.polygon
            fn = lambda i0, i1: _core.winding_2d(poly.seg_a, poly.seg_b, P, out, i0, i1)
        else:
            tri = np.ascontiguousarray(solid.mesh.triangles)
            fn = lambda i0, i1: _core.winding_3d(tri, P, out, i0, i1)
        _run_partitioned(fn, len(P), threads)
        return out
    if solid.dimension == 2:
        poly = solid.polygon
        return _fallback.winding_2d(poly.seg_a, poly.seg_b, P)
    return _fallback.winding_3d(solid.mesh.triangles, P)


def sweep_batch(solid, P, xi_eff, sigma, gconst, max_angle, max_depth, eta_min, threads=None):
    """Adaptive skeletal quadrature I+ per node; returns (values, residuals, clamp count)."""
    P = np.ascontiguousarray(P, dtype=np.float64)
    xi_eff = np.ascontiguousarray(xi_eff, dtype=np.float64)
    threads = threads or default_threads()
    if _active == "core":
        out = np.empty(len(P), dtype=np.complex128)
        resid = np.zeros(len(P))
        clamps = np.zeros(len(P), dtype=np.int64)
        if solid.dimension == 2:
            poly = solid.polygon
            fn = lambda i0, i1: _core.sweep_2d(
                poly.seg_a, poly.seg_b, poly.seg_normal, poly.seg_len, P, xi_eff,
                sigma, gconst, max_angle, max_depth, eta_min, out, resid, clamps, i0, i1
            )
        else:
            mesh = solid.mesh
            tri = np.ascontiguousarray(mesh.triangles)
            fn = lambda i0, i1: _core.sweep_3d(
                tri, mesh.normals, mesh.areas, P, xi_eff,
                sigma, gconst, max_angle, max_depth, eta_min, out, resid, clamps, i0, i1
            )
        _run_partitioned(fn, len(P), threads)
        return out, resid, int(clamps.sum())
    if solid.dimension == 2:
        poly = solid.polygon
        return _fallback.sweep_2d(
            poly.seg_a, poly.seg_b, poly.seg_normal, poly.seg_len, P, xi_eff,
            sigma, gconst, max_angle, max_depth, eta_min
        )
    mesh = solid.mesh
    return _fallback.sweep_3d(
        mesh.triangles, mesh.normals, mesh.areas, P, xi_eff,
        sigma, gconst, max_angle, max_depth, eta_min
    )


def cascade(C1, C2, wrap, domega, dcell, R, t_eff, center):
    """Score + gradients over one retained-mode window; see _fallback.cascade_eval."""
    C1 = np.ascontiguousarray(C1, dtype=np.complex128)
    C2 = np.ascontiguousarray(C2, dtype=np.complex128)
    R = np.ascontiguousarray(R, dtype=np.float64)
    t_eff = np.ascontiguousarray(t_eff, dtype=np.float64)
    center = np.ascontiguousarray(center, dtype=np.float64)
    if _active == "core":
        if C1.ndim == 2:
            return _core.cascade_2d(C1, C2, wrap, domega[0], domega[1], dcell, R, t_eff, center)
        return _core.cascade_3d(C1, C2, wrap, domega[0], domega[1], domega[2], dcell, R, t_eff, center)
    return _fallback.cascade_eval(C1, C2, wrap, domega, dcell, R, t_eff, center)
