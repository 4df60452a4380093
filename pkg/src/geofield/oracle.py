"""Slow independent reference paths.

Everything in this module is deliberately naive: real-space sums, direct
transform sums, ray casting, plain central differences, 1D quadrature for
circular boundaries. None of it shares code with the fast paths, so the two
routes can genuinely disagree; tests compare them.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "MAX_DIRECT_NODES",
    "brute_score",
    "direct_dft",
    "cascade_dft",
    "raycast_pmc",
    "fd_gradient",
    "disk_density",
]

MAX_DIRECT_NODES = 2 ** 14


# ---------------------------------------------------------------------------
# real-space cross sum


def _interp_nodes(values, grid, Q, wrap):
    """Multilinear interpolation of node values at physical points Q.

    Zero outside the grid box unless wrap, in which case indices fold mod N.
    Written from scratch on purpose; do not replace with the engine's version.
    """
    g = grid
    d = g.dimension
    vals = values.reshape(g.dims)
    u = (np.asarray(Q, dtype=np.float64) - np.asarray(g.origin)) / g.spacing
    base = np.floor(u).astype(np.int64)
    frac = u - base
    out = np.zeros(len(u), dtype=values.dtype)
    for corner in range(2 ** d):
        idx = base.copy()
        w = np.ones(len(u))
        for a in range(d):
            bit = (corner >> a) & 1
            idx[:, a] += bit
            w *= frac[:, a] if bit else (1.0 - frac[:, a])
        if wrap:
            folded = idx % np.asarray(g.dims)
            out += w * vals[tuple(folded.T)]
        else:
            ok = np.all((idx >= 0) & (idx < np.asarray(g.dims)), axis=1)
            safe = np.where(ok[:, None], idx, 0)
            out += np.where(ok, w * vals[tuple(safe.T)], 0.0)
    return out


def brute_score(field1, field2, R, t, wrap=False):
    """sum_j rho1(p_j) rho2(R^T (p_j - t)) dV over every grid node."""
    g = field1.grid
    if field2.grid != g:
        raise ValueError("grid mismatch")
    R = np.asarray(R, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    P = g.points()
    Q = (P - t) @ R  # row form of R^T (p - t)
    samples = _interp_nodes(field2.values, g, Q, wrap)
    return complex(np.sum(field1.values * samples) * g.cell_volume)


# ---------------------------------------------------------------------------
# direct transforms


def _guard(grid):
    if grid.node_count > MAX_DIRECT_NODES:
        raise ValueError(
            f"direct transform refused above {MAX_DIRECT_NODES} nodes "
            f"(got {grid.node_count}); use the fast path"
        )


def _direct_amplitude(field, freqs):
    """A(w) = sum_i f_i exp(-2 pi i w.p_i) dV by explicit summation."""
    P = field.grid.points()
    f = field.values
    dV = field.grid.cell_volume
    out = np.empty(len(freqs), dtype=np.complex128)
    for k, w in enumerate(freqs):
        out[k] = np.sum(f * np.exp(-2j * np.pi * (P @ w))) * dV
    return out


def direct_dft(field):
    """Full amplitude array, DC-centered ordering, one mode at a time."""
    g = field.grid
    _guard(g)
    axes = [(np.arange(n) - n // 2) * dw for n, dw in zip(g.dims, g.delta_omega())]
    W = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    return _direct_amplitude(field, W)


def cascade_dft(field1, field2, R, t, m_prime=None):
    """Mode sum with exact rotated amplitudes, no interpolation anywhere.

    A2 is evaluated at the exact continuous frequencies -R^T w by direct
    summation, so at lattice rotations this equals the fast cascade to
    roundoff and at generic rotations it is the exact band-limited score.
    """
    g = field1.grid
    if field2.grid != g:
        raise ValueError("grid mismatch")
    _guard(g)
    R = np.asarray(R, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if m_prime is None:
        sides = g.dims
    else:
        side = round(m_prime ** (1.0 / g.dimension))
        if side ** g.dimension != m_prime:
            for cand in (side - 1, side + 1):
                if cand ** g.dimension == m_prime:
                    side = cand
        sides = (side,) * g.dimension
    axes = [(np.arange(w) - w // 2) * dw for w, dw in zip(sides, g.delta_omega())]
    W = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    A1 = _direct_amplitude(field1, W)
    A2 = _direct_amplitude(field2, -(W @ R))
    d_omega = 1.0 / (g.node_count * g.cell_volume)
    return complex(np.sum(A1 * A2 * np.exp(2j * np.pi * (W @ t))) * d_omega)


# ---------------------------------------------------------------------------
# ray-cast membership


def _cast_batch_2d(poly, P, d_hat):
    """Crossing counts for every point along one direction; -1 marks a graze."""
    A, B = poly.seg_a, poly.seg_b
    e = B - A
    denom = d_hat[0] * (-e[:, 1]) + d_hat[1] * e[:, 0]
    rhs = A[None, :, :] - P[:, None, :]
    par = np.abs(denom) < 1e-14
    safe = np.where(par, 1.0, denom)
    tt = (rhs[:, :, 0] * (-e[None, :, 1]) + rhs[:, :, 1] * e[None, :, 0]) / safe
    ss = (d_hat[0] * rhs[:, :, 1] - d_hat[1] * rhs[:, :, 0]) / safe
    on_line = np.abs(rhs[:, :, 0] * d_hat[1] - rhs[:, :, 1] * d_hat[0]) < 1e-12
    behind = tt <= 1e-12
    at_origin = behind & (tt > -1e-12) & (ss >= -1e-9) & (ss <= 1 + 1e-9)
    interior = (ss > 1e-9) & (ss < 1 - 1e-9)
    endpoint = ((ss >= -1e-9) & (ss <= 1e-9)) | ((ss >= 1 - 1e-9) & (ss <= 1 + 1e-9))
    degen = (par[None, :] & on_line) | (~par[None, :] & (at_origin | (~behind & endpoint)))
    hit = ~par[None, :] & ~behind & interior
    counts = hit.sum(axis=1)
    counts[degen.any(axis=1)] = -1
    return counts


def _cast_batch_3d(mesh, P, d_hat):
    V, F = mesh.vertices, mesh.faces
    counts = np.zeros(len(P), dtype=np.int64)
    degen = np.zeros(len(P), dtype=bool)
    chunk = max(1, 4_000_000 // max(len(P), 1))
    for s in range(0, len(F), chunk):
        f = F[s:s + chunk]
        v0, e1, e2 = V[f[:, 0]], V[f[:, 1]] - V[f[:, 0]], V[f[:, 2]] - V[f[:, 0]]
        h = np.cross(d_hat[None, :], e2)
        det = np.einsum("md,md->m", e1, h)
        par = np.abs(det) < 1e-14
        safe = np.where(par, 1.0, det)
        sv = (P[:, None, :] - v0[None, :, :]) / safe[None, :, None]
        u = np.einsum("kmd,md->km", sv, h)
        q = np.cross(sv * safe[None, :, None], e1[None, :, :]) / safe[None, :, None]
        v = np.einsum("kmd,d->km", q, d_hat)
        tt = np.einsum("kmd,md->km", q, e2)
        live = ~par[None, :] & (tt > 1e-12)
        inside = live & (u >= -1e-9) & (v >= -1e-9) & (u + v <= 1 + 1e-9)
        graze = inside & ((u < 1e-9) | (v < 1e-9) | (u + v > 1 - 1e-9))
        counts += (inside & ~graze).sum(axis=1)
        degen |= graze.any(axis=1)
    counts[degen] = -1
    return counts


def raycast_pmc(solid, points, seed=0):
    """Parity ray casting, majority vote over three random directions.

    Degenerate casts (vertex or edge grazes) are retried with new directions,
    so the answer never depends on a measure-zero hit. Each round casts every
    unresolved point along one shared direction.
    """
    rng = np.random.default_rng(seed)
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    odd = np.zeros(len(P), dtype=np.int64)
    counted = np.zeros(len(P), dtype=np.int64)
    active = np.arange(len(P))
    attempts = 0
    while len(active):
        attempts += 1
        if attempts > 64:
            raise RuntimeError("ray casting failed to find clean directions")
        d = rng.normal(size=solid.dimension)
        n = np.linalg.norm(d)
        if n < 1e-12:
            continue
        if solid.dimension == 2:
            hits = _cast_batch_2d(solid.polygon, P[active], d / n)
        else:
            hits = _cast_batch_3d(solid.mesh, P[active], d / n)
        ok = hits >= 0
        odd[active[ok]] += hits[ok] % 2
        counted[active[ok]] += 1
        active = active[counted[active] < 3]
    out = odd >= 2
    return out if len(out) > 1 else bool(out[0])


# ---------------------------------------------------------------------------
# finite differences


def _axis_rotation(d, axis, angle):
    if d == 2:
        c, s = np.cos(angle), np.sin(angle)
        return np.array([[c, -s], [s, c]])
    k = np.zeros(3)
    k[axis] = 1.0
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def fd_gradient(scorer, config, translation_step=1e-6, rotation_step=1e-6):
    """Central differences of scorer(rotation, translation) around config.

    Rotation is perturbed on the left (exp(eps G) R), one generator at a time,
    matching the analytic convention. The score's angle dependence is only
    piecewise smooth when the engine resamples spectra (interpolation-cell
    kinks), so the rotation step shrinks until two successive central
    estimates agree; a straddled kink otherwise pollutes the quotient.
    Returns (d translation components, n_rot rotation components).
    """
    R = np.asarray(config.rotation, dtype=np.float64)
    t = np.asarray(config.translation, dtype=np.float64)
    d = len(t)
    tgrad = np.empty(d, dtype=np.complex128)
    for a in range(d):
        e = np.zeros(d)
        e[a] = translation_step
        tgrad[a] = (scorer(R, t + e) - scorer(R, t - e)) / (2 * translation_step)

    def central(g, delta):
        Rp = _axis_rotation(d, g, +delta) @ R
        Rm = _axis_rotation(d, g, -delta) @ R
        return (scorer(Rp, t) - scorer(Rm, t)) / (2 * delta)

    n_rot = 1 if d == 2 else 3
    rgrad = np.empty(n_rot, dtype=np.complex128)
    for g in range(n_rot):
        delta = rotation_step
        est = central(g, delta)
        for _ in range(3):
            delta /= 10.0
            finer = central(g, delta)
            settled = abs(finer - est) <= 1e-4 * max(abs(finer), 1e-12)
            est = finer
            if settled:
                break
        rgrad[g] = est
    return tgrad, rgrad


# ---------------------------------------------------------------------------
# exact circular-boundary density


def disk_density(kernel, disk_radius, radii, n_theta=8192, dimension=2):
    """Density at radius r from the center of a disk, by 1D quadrature.

    The boundary integral over a circle reduces to one angular integral;
    Gauss-Legendre handles it to near machine precision once n_theta clears
    the kernel's angular scale. Interior points get the conjugated +lambda_in
    branch, exterior the -lambda_out branch. r must stay off the circle.
    """
    if dimension != 2:
        raise ValueError("only the 2D disk is supported")
    a = float(disk_radius)
    nodes, weights = np.polynomial.legendre.leggauss(n_theta)
    theta = np.pi * (nodes + 1.0)  # map [-1,1] to [0, 2 pi]
    wq = np.pi * weights
    qx, qy = a * np.cos(theta), a * np.sin(theta)
    out = np.empty(len(np.atleast_1d(radii)), dtype=np.complex128)
    for k, r in enumerate(np.atleast_1d(radii)):
        xi = abs(r - a)
        if xi < 1e-12:
            raise ValueError("sample point sits on the boundary")
        rx, ry = qx - r, qy  # q - p with p = (r, 0): the interior-positive form
        eta = np.hypot(rx, ry)
        # outward normal is q/a; projected length element (n.(q-p))/eta dL,
        # the same orientation that makes the closed inverse-square flux +1 inside
        proj = (qx * rx + qy * ry) / (a * eta)
        gauss = np.exp(-0.5 * ((eta / xi - 1.0) / kernel.sigma) ** 2) / (
            np.sqrt(2.0 * np.pi) * kernel.sigma
        )
        zeta = xi + 1j * eta
        integrand = gauss * proj / (zeta * zeta)
        I = np.sum(wq * integrand) * a / (2.0 * np.pi)
        inside = r < a
        out[k] = kernel.lambda_in * np.conj(I) if inside else -kernel.lambda_out * I
    return out if out.size > 1 else complex(out[0])
