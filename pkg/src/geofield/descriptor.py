"""Skeletal density and winding-number fields on uniform grids.

The field evaluator runs one adaptive sweep over the boundary per grid node:
winding numbers come from exact per-element subtended angles (the
analytically integrated inverse-square flux, so PMC needs no subdivision),
the complex skeletal kernel from a midpoint rule over adaptively subdivided
elements. The interior value is the conjugate of the exterior-form integral,
so both classifications share the sweep.
"""

from __future__ import annotations

import logging
import struct
import time
from dataclasses import dataclass

import numpy as np

from . import _fallback, backend
from .solids import Solid

log = logging.getLogger(__name__)

__all__ = [
    "KernelSpec",
    "IntegrationPolicy",
    "BoundaryProjection",
    "SampleGrid",
    "ComplexField",
    "VectorField",
    "QuadratureError",
    "gaussian",
    "kernel_eval",
    "point_membership",
    "affinity_field",
    "indicator_field",
    "vector_density",
    "write_field",
    "read_field",
]

SQRT_TWO_PI = float(np.sqrt(2.0 * np.pi))


class QuadratureError(RuntimeError):
    """Recursion budget exhausted before the angle criterion was met."""

    def __init__(self, worst_residual):
        super().__init__(
            f"recursion depth exhausted, worst residual angle {worst_residual:.3g}"
        )
        self.worst_residual = worst_residual


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and coefficients; penalty = lambda_out / lambda_in."""

    family: str = "SkeletalDensity"
    sigma: float = 0.5
    lambda_in: float = 1.0
    lambda_out: float = 3.0

    def __post_init__(self):
        if self.family not in ("InverseSquare", "SkeletalDensity"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not (self.sigma > 0 and self.lambda_in > 0 and self.lambda_out > 0):
            raise ValueError("sigma, lambda_in, lambda_out must be positive")

    @property
    def penalty(self):
        return self.lambda_out / self.lambda_in


@dataclass(frozen=True)
class IntegrationPolicy:
    """Adaptive quadrature controls; angle threshold in sr (3D) or rad (2D)."""

    max_solid_angle: float = 0.02
    max_recursion_depth: int = 16
    eta_floor: float = 0.25

    def __post_init__(self):
        if not 0 < self.max_solid_angle <= 4 * np.pi:
            raise ValueError("max_solid_angle must be in (0, 4*pi]")
        if not 0 < self.max_recursion_depth <= 24:
            raise ValueError("max_recursion_depth must be in [1, 24]")
        if not self.eta_floor > 0:
            raise ValueError("eta_floor must be positive")


@dataclass(frozen=True)
class BoundaryProjection:
    """One (query point, boundary point) pair: xi signed, eta = |q - p|."""

    xi: float
    eta: float

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.eta < abs(self.xi) - 1e-9 * max(1.0, abs(self.xi)):
            raise ValueError("eta cannot be smaller than the minimum boundary distance")


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SampleGrid:
    """Uniform cell-centered grid; per-axis power-of-two node counts."""

    dimension: int
    dims: tuple
    origin: tuple
    spacing: float

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if len(self.dims) != self.dimension or len(self.origin) != self.dimension:
            raise ValueError("dims/origin length must match dimension")
        for n in self.dims:
            if not _is_pow2(n) or n < 4:
                raise ValueError("each axis count must be a power of two >= 4")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @property
    def node_count(self):
        return int(np.prod(self.dims))

    @property
    def cell_volume(self):
        return self.spacing ** self.dimension

    def axes(self):
        return [self.origin[a] + self.spacing * np.arange(self.dims[a]) for a in range(self.dimension)]

    def points(self):
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def box(self):
        """Covered volume: each node owns one cell of side spacing."""
        lo = np.asarray(self.origin) - 0.5 * self.spacing
        hi = lo + self.spacing * np.asarray(self.dims)
        return lo, hi

    def center(self):
        """Coordinate of the DC-center node (index dims/2 on every axis)."""
        return np.asarray(
            [self.origin[a] + self.spacing * (self.dims[a] // 2) for a in range(self.dimension)]
        )

    def delta_omega(self):
        return tuple(1.0 / (n * self.spacing) for n in self.dims)

    def freq_axes(self):
        return [np.fft.fftshift(np.fft.fftfreq(n, d=self.spacing)) for n in self.dims]

    def contains_box(self, lo, hi, margin=0.0):
        glo, ghi = self.box()
        return bool(np.all(np.asarray(lo) - margin >= glo) and np.all(np.asarray(hi) + margin <= ghi))

    def node_index(self, p):
        """Nearest node multi-index for a physical point."""
        idx = np.rint((np.asarray(p) - np.asarray(self.origin)) / self.spacing).astype(int)
        return tuple(int(np.clip(idx[a], 0, self.dims[a] - 1)) for a in range(self.dimension))


class ComplexField:
    """Complex samples over a SampleGrid, row-major by axis order."""

    def __init__(self, grid, values, flags=None, stats=None, wrap_mask=None):
        values = np.asarray(values, dtype=np.complex128).ravel()
        if len(values) != grid.node_count:
            raise ValueError("value count does not match grid")
        if not np.all(np.isfinite(values.view(np.float64))):
            raise ValueError("field contains non-finite values")
        self.grid = grid
        self.values = values
        self.flags = list(flags) if flags is not None else []
        self.stats = dict(stats) if stats is not None else {}
        self.wrap_mask = wrap_mask

    def reshaped(self):
        return self.values.reshape(self.grid.dims)


class VectorField:
    """d componentwise ComplexFields sharing one grid."""

    def __init__(self, components):
        grids = {id(c.grid) for c in components}
        if len(components) != components[0].grid.dimension or len(grids) != 1:
            raise ValueError("need d components on one shared grid")
        self.components = list(components)
        self.grid = components[0].grid


# ---------------------------------------------------------------------------
# kernels


def gaussian(x, sigma):
    """Normalized Gaussian (1 / (sqrt(2 pi) sigma)) exp(-x^2 / (2 sigma^2))."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=np.float64)
    out = np.exp(-0.5 * (x / sigma) ** 2) / (SQRT_TWO_PI * sigma)
    return float(out) if out.ndim == 0 else out


def _unit_constant(dimension):
    # fixes the inverse-square kernel so the closed-boundary flux is +1 inside
    return 1.0 / (4.0 * np.pi) if dimension == 3 else 1.0 / (2.0 * np.pi)


def kernel_eval(spec, proj, inside, dimension=3, eta_floor=0.0):
    """Pointwise kernel value for one boundary projection.

    eta below eta_floor is clamped (the sweep counts such clamps in its
    statistics). InverseSquare is real; SkeletalDensity carries the complex
    reciprocal square of zeta = xi + i eta and the signed coefficient.
    """
    c = _unit_constant(dimension)
    eta = max(proj.eta, eta_floor)
    if spec.family == "InverseSquare":
        return complex(c / (eta * eta))
    lam = spec.lambda_in if inside else -spec.lambda_out
    xi_abs = abs(proj.xi)
    # |tan(angle(zeta))| - 1 = eta/|xi| - 1; the ANN peak sits at eta = |xi|
    g = gaussian(eta / xi_abs - 1.0, spec.sigma) if xi_abs > 0 else 0.0
    zeta = complex(xi_abs, eta)
    val = c * g / (zeta * zeta)
    # interior uses the conjugate form (zeta mirrored to negative real part)
    return lam * (val.conjugate() if inside else val)


def point_membership(solid, p, policy=IntegrationPolicy()):
    """Winding number by adaptive quadrature of the inverse-square kernel.

    Accepts a single point or a (k, d) batch. Raises QuadratureError when the
    recursion budget runs out before every sub-element subtends at most
    max_solid_angle (policy too strict for the mesh).
    """
    p = np.asarray(p, dtype=np.float64)
    single = p.ndim == 1
    P = np.ascontiguousarray(p.reshape(1, -1) if single else p)
    if P.shape[1] != solid.dimension:
        raise ValueError("point dimension mismatch")
    if solid.dimension == 2:
        poly = solid.polygon
        w, resid = _fallback.winding_adaptive_2d(
            poly.seg_a, poly.seg_b, P, policy.max_solid_angle, policy.max_recursion_depth
        )
    else:
        w, resid = _fallback.winding_adaptive_3d(
            solid.mesh.triangles, P, policy.max_solid_angle, policy.max_recursion_depth
        )
    worst = float(resid.max()) if len(resid) else 0.0
    if worst > policy.max_solid_angle:
        raise QuadratureError(worst)
    return float(w[0]) if single else w


# ---------------------------------------------------------------------------
# fields


def _check_grid(solid, grid):
    if grid.dimension != solid.dimension:
        raise ValueError("grid/solid dimension mismatch")
    if not grid.contains_box(*solid.bbox, margin=2.0 * grid.spacing):
        raise ValueError("grid must contain the solid bounding box with a 2h margin")


def _neighbor_average(values, excluded, dims):
    """Replace excluded nodes by the mean of their non-excluded face neighbors."""
    vals = values.reshape(dims)
    ex = excluded.reshape(dims)
    acc = np.zeros(dims, dtype=np.complex128)
    cnt = np.zeros(dims, dtype=np.int64)
    d = len(dims)
    for a in range(d):
        for off in (-1, 1):
            src = [slice(None)] * d
            dst = [slice(None)] * d
            if off == 1:
                src[a] = slice(1, None)
                dst[a] = slice(0, -1)
            else:
                src[a] = slice(0, -1)
                dst[a] = slice(1, None)
            good = ~ex[tuple(src)]
            acc[tuple(dst)] += np.where(good, vals[tuple(src)], 0)
            cnt[tuple(dst)] += good
    with np.errstate(invalid="ignore"):
        avg = np.where(cnt > 0, acc / np.maximum(cnt, 1), 0)
    out = np.where(ex, avg, vals)
    return out.ravel()


def affinity_field(solid, grid, spec, policy=IntegrationPolicy(), threads=None):
    """Evaluate the kernel's boundary flux at every grid node.

    One sweep per node: exact winding classifies the node, the adaptive
    midpoint quadrature accumulates the exterior-form skeletal integral, and
    the signed coefficient (+lambda_in conj inside, -lambda_out outside) is
    applied afterwards. Nodes closer to the boundary than eta_floor * h are
    excluded and take the average of their face-adjacent neighbors.
    """
    _check_grid(solid, grid)
    d = grid.dimension
    eta_min = policy.eta_floor * grid.spacing
    P = grid.points()
    stats = {}
    t0 = time.perf_counter()
    xi = backend.distance_batch(solid, P, threads)
    stats["seconds_distance"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    wind = backend.winding_batch(solid, P, threads)
    stats["seconds_winding"] = time.perf_counter() - t0
    inside = wind >= 0.5
    excluded = xi < eta_min

    if spec.family == "InverseSquare":
        values = wind.astype(np.complex128)
        resid = np.zeros(len(P))
        nclamp = 0
    else:
        t0 = time.perf_counter()
        xi_eff = np.maximum(xi, eta_min)
        iplus, resid, nclamp = backend.sweep_batch(
            solid, P, xi_eff, spec.sigma, _unit_constant(d),
            policy.max_solid_angle, policy.max_recursion_depth, eta_min, threads
        )
        values = np.where(inside, spec.lambda_in * np.conj(iplus), -spec.lambda_out * iplus)
        stats["seconds_sweep"] = time.perf_counter() - t0

    values = _neighbor_average(values, excluded, grid.dims)
    unresolved = np.nonzero(resid > policy.max_solid_angle)[0]
    stats.update(
        excluded=int(excluded.sum()),
        eta_clamped=int(nclamp),
        worst_residual=float(resid.max()) if len(resid) else 0.0,
        unresolved_nodes=len(unresolved),
        inside_nodes=int(inside.sum()),
    )
    flags = sorted(set(np.nonzero(excluded)[0].tolist()) | set(unresolved.tolist()))
    log.debug("affinity_field %s nodes=%d excluded=%d", spec.family, len(P), stats["excluded"])
    return ComplexField(grid, values, flags=flags, stats=stats)


def indicator_field(solid, grid, policy=IntegrationPolicy(), threads=None):
    """1 inside (winding >= 0.5), 0 outside."""
    _check_grid(solid, grid)
    P = grid.points()
    wind = backend.winding_batch(solid, P, threads)
    values = (wind >= 0.5).astype(np.complex128)
    return ComplexField(grid, values, stats={"inside_nodes": int(values.real.sum())})


def vector_density(field):
    """Componentwise product rho(p) * p_k with node physical coordinates."""
    P = field.grid.points()
    comps = [
        ComplexField(field.grid, field.values * P[:, a], flags=field.flags)
        for a in range(field.grid.dimension)
    ]
    return VectorField(comps)


# ---------------------------------------------------------------------------
# field file format: GFLD, little-endian, complex64 payload


_MAGIC = b"GFLD"
_VERSION = 1


def write_field(field, path):
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, g.dimension))
        fh.write(struct.pack(f"<{g.dimension}I", *g.dims))
        fh.write(struct.pack(f"<{g.dimension}d", *g.origin))
        fh.write(struct.pack("<d", g.spacing))
        fh.write(field.values.astype(np.complex64).tobytes())
        flags = np.asarray(field.flags, dtype=np.uint32)
        fh.write(struct.pack("<I", len(flags)))
        fh.write(flags.tobytes())


def read_field(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a GFLD file")
        version, d = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ValueError(f"unsupported GFLD version {version}")
        dims = struct.unpack(f"<{d}I", fh.read(4 * d))
        origin = struct.unpack(f"<{d}d", fh.read(8 * d))
        (spacing,) = struct.unpack("<d", fh.read(8))
        grid = SampleGrid(d, tuple(dims), tuple(origin), spacing)
        m = grid.node_count
        values = np.frombuffer(fh.read(8 * m), dtype=np.complex64).astype(np.complex128)
        (nflags,) = struct.unpack("<I", fh.read(4))
        flags = np.frombuffer(fh.read(4 * nflags), dtype=np.uint32).tolist()
    return ComplexField(grid, values, flags=flags)
