"""Pure-numpy compute kernels: distances, winding numbers, the adaptive
boundary sweep and the cascade mode sum.

Mirrors the compiled extension's contracts exactly; selected by backend.py
when the extension is missing or explicitly requested. Subdivision is done
breadth-first over (element, node) row queues so everything stays vectorized.
"""

from __future__ import annotations

import itertools

import numpy as np

SQRT_TWO_PI = float(np.sqrt(2.0 * np.pi))


# ---------------------------------------------------------------------------
# exact point-element distances


def _seg_dist_rows(A, B, P):
    """Row-wise point-segment distance: A, B, P all (k, 2|3)."""
    ab = B - A
    den = np.einsum("ij,ij->i", ab, ab)
    t = np.einsum("ij,ij->i", P - A, ab) / np.maximum(den, 1e-300)
    t = np.clip(t, 0.0, 1.0)
    proj = A + t[:, None] * ab
    return np.linalg.norm(P - proj, axis=1)


def _tri_dist_rows(V0, V1, V2, P):
    """Row-wise exact point-triangle distance."""
    e0 = V1 - V0
    e1 = V2 - V0
    n = np.cross(e0, e1)
    nn = np.linalg.norm(n, axis=1)
    d = P - V0
    dot00 = np.einsum("ij,ij->i", e0, e0)
    dot01 = np.einsum("ij,ij->i", e0, e1)
    dot11 = np.einsum("ij,ij->i", e1, e1)
    d0 = np.einsum("ij,ij->i", d, e0)
    d1 = np.einsum("ij,ij->i", d, e1)
    den = np.maximum(dot00 * dot11 - dot01 * dot01, 1e-300)
    u = (dot11 * d0 - dot01 * d1) / den
    v = (dot00 * d1 - dot01 * d0) / den
    inside = (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0)
    plane = np.abs(np.einsum("ij,ij->i", d, n)) / np.maximum(nn, 1e-300)
    ds = np.minimum(
        _seg_dist_rows(V0, V1, P),
        np.minimum(_seg_dist_rows(V1, V2, P), _seg_dist_rows(V0, V2, P)),
    )
    return np.where(inside, plane, ds)


def distance_2d(seg_a, seg_b, P):
    best = np.full(len(P), np.inf)
    for e in range(len(seg_a)):
        A = np.broadcast_to(seg_a[e], P.shape)
        B = np.broadcast_to(seg_b[e], P.shape)
        np.minimum(best, _seg_dist_rows(A, B, P), out=best)
    return best


def distance_3d(tri, P):
    best = np.full(len(P), np.inf)
    for e in range(len(tri)):
        V0 = np.broadcast_to(tri[e, 0], P.shape)
        V1 = np.broadcast_to(tri[e, 1], P.shape)
        V2 = np.broadcast_to(tri[e, 2], P.shape)
        np.minimum(best, _tri_dist_rows(V0, V1, V2, P), out=best)
    return best


# ---------------------------------------------------------------------------
# exact per-element angles (the analytically integrated inverse-square flux)


def _seg_angle_rows(A, B, P):
    a = A - P
    b = B - P
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = np.einsum("ij,ij->i", a, b)
    return np.arctan2(cross, dot)


def _tri_solid_angle_rows(V0, V1, V2, P):
    a = V0 - P
    b = V1 - P
    c = V2 - P
    la = np.linalg.norm(a, axis=1)
    lb = np.linalg.norm(b, axis=1)
    lc = np.linalg.norm(c, axis=1)
    num = np.einsum("ij,ij->i", a, np.cross(b, c))
    den = (
        la * lb * lc
        + np.einsum("ij,ij->i", a, b) * lc
        + np.einsum("ij,ij->i", a, c) * lb
        + np.einsum("ij,ij->i", b, c) * la
    )
    return 2.0 * np.arctan2(num, den)


def winding_2d(seg_a, seg_b, P):
    acc = np.zeros(len(P))
    for e in range(len(seg_a)):
        A = np.broadcast_to(seg_a[e], P.shape)
        B = np.broadcast_to(seg_b[e], P.shape)
        acc += _seg_angle_rows(A, B, P)
    return acc / (2.0 * np.pi)


def winding_3d(tri, P):
    acc = np.zeros(len(P))
    for e in range(len(tri)):
        V0 = np.broadcast_to(tri[e, 0], P.shape)
        V1 = np.broadcast_to(tri[e, 1], P.shape)
        V2 = np.broadcast_to(tri[e, 2], P.shape)
        acc += _tri_solid_angle_rows(V0, V1, V2, P)
    return acc / (4.0 * np.pi)


# ---------------------------------------------------------------------------
# adaptive winding (subdivides until each sub-element subtends <= max_angle;
# values equal the flat sums above by angle additivity, but the recursion
# depth budget becomes observable, which point_membership's contract needs)


def winding_adaptive_2d(seg_a, seg_b, P, max_angle, max_depth):
    npts = len(P)
    acc = np.zeros(npts)
    resid = np.zeros(npts)
    for e in range(len(seg_a)):
        A = np.broadcast_to(seg_a[e], P.shape).copy()
        B = np.broadcast_to(seg_b[e], P.shape).copy()
        idx = np.arange(npts)
        length = float(np.linalg.norm(seg_b[e] - seg_a[e]))
        for depth in range(max_depth + 1):
            if len(idx) == 0:
                break
            Pq = P[idx]
            de = _seg_dist_rows(A, B, Pq)
            measure = length / np.maximum(de, 1e-300)
            split = (measure > max_angle) & (depth < max_depth)
            leaf = ~split
            if np.any(leaf):
                acc += np.bincount(idx[leaf], weights=_seg_angle_rows(A[leaf], B[leaf], Pq[leaf]), minlength=npts)
                capped = leaf & (measure > max_angle)
                if np.any(capped):
                    np.maximum.at(resid, idx[capped], measure[capped])
            if not np.any(split):
                break
            A, B, idx = A[split], B[split], idx[split]
            mid = 0.5 * (A + B)
            A = np.concatenate([A, mid])
            B = np.concatenate([mid, B])
            idx = np.concatenate([idx, idx])
            length *= 0.5
    return acc / (2.0 * np.pi), resid


def winding_adaptive_3d(tri, P, max_angle, max_depth):
    npts = len(P)
    acc = np.zeros(npts)
    resid = np.zeros(npts)
    for e in range(len(tri)):
        V0 = np.broadcast_to(tri[e, 0], P.shape).copy()
        V1 = np.broadcast_to(tri[e, 1], P.shape).copy()
        V2 = np.broadcast_to(tri[e, 2], P.shape).copy()
        idx = np.arange(npts)
        area = 0.5 * float(np.linalg.norm(np.cross(tri[e, 1] - tri[e, 0], tri[e, 2] - tri[e, 0])))
        for depth in range(max_depth + 1):
            if len(idx) == 0:
                break
            Pq = P[idx]
            de = _tri_dist_rows(V0, V1, V2, Pq)
            measure = area / np.maximum(de * de, 1e-300)
            split = (measure > max_angle) & (depth < max_depth)
            leaf = ~split
            if np.any(leaf):
                ang = _tri_solid_angle_rows(V0[leaf], V1[leaf], V2[leaf], Pq[leaf])
                acc += np.bincount(idx[leaf], weights=ang, minlength=npts)
                capped = leaf & (measure > max_angle)
                if np.any(capped):
                    np.maximum.at(resid, idx[capped], measure[capped])
            if not np.any(split):
                break
            V0, V1, V2, idx = V0[split], V1[split], V2[split], idx[split]
            M01 = 0.5 * (V0 + V1)
            M02 = 0.5 * (V0 + V2)
            M12 = 0.5 * (V1 + V2)
            V0 = np.concatenate([V0, M01, M02, M01])
            V1 = np.concatenate([M01, V1, M12, M12])
            V2 = np.concatenate([M02, M12, V2, M02])
            idx = np.concatenate([idx, idx, idx, idx])
            area *= 0.25
    return acc / (4.0 * np.pi), resid


# ---------------------------------------------------------------------------
# skeletal sweep: midpoint rule over adaptively subdivided boundary elements,
# accumulating I+ = sum g_sigma(eta/|xi| - 1) * (|xi| + i eta)^-2 * dAperp


def _skel_accumulate(acc, idx, r, eta_min, xi_rows, sigma, gconst, weight):
    """Shared leaf contribution; weight is the signed projected element measure / eta."""
    eta = np.linalg.norm(r, axis=1)
    nclamp = int(np.sum(eta < eta_min))
    eta = np.maximum(eta, eta_min)
    dA = weight / eta
    g = np.exp(-0.5 * ((eta / xi_rows - 1.0) / sigma) ** 2) / (SQRT_TWO_PI * sigma)
    zeta = xi_rows + 1j * eta
    contrib = gconst * g * dA / (zeta * zeta)
    np_ = len(acc)
    acc += np.bincount(idx, weights=contrib.real, minlength=np_) + 1j * np.bincount(
        idx, weights=contrib.imag, minlength=np_
    )
    return nclamp


def sweep_2d(seg_a, seg_b, seg_n, seg_len, P, xi_abs, sigma, gconst, max_angle, max_depth, eta_min):
    npts = len(P)
    acc = np.zeros(npts, dtype=np.complex128)
    resid = np.zeros(npts)
    nclamp = 0
    xi_eff = np.maximum(xi_abs, eta_min)
    for e in range(len(seg_a)):
        A = np.broadcast_to(seg_a[e], P.shape).copy()
        B = np.broadcast_to(seg_b[e], P.shape).copy()
        idx = np.arange(npts)
        length = float(seg_len[e])
        nrm = seg_n[e]
        for depth in range(max_depth + 1):
            if len(idx) == 0:
                break
            Pq = P[idx]
            de = _seg_dist_rows(A, B, Pq)
            measure = length / np.maximum(de, 1e-300)
            split = (measure > max_angle) & (depth < max_depth)
            leaf = ~split
            if np.any(leaf):
                mid = 0.5 * (A[leaf] + B[leaf])
                r = mid - Pq[leaf]
                w = np.einsum("ij,j->i", r, nrm) * length
                nclamp += _skel_accumulate(
                    acc, idx[leaf], r, eta_min, xi_eff[idx[leaf]], sigma, gconst, w
                )
                capped = leaf & (measure > max_angle)
                if np.any(capped):
                    np.maximum.at(resid, idx[capped], measure[capped])
            if not np.any(split):
                break
            A, B, idx = A[split], B[split], idx[split]
            mid = 0.5 * (A + B)
            A = np.concatenate([A, mid])
            B = np.concatenate([mid, B])
            idx = np.concatenate([idx, idx])
            length *= 0.5
    return acc, resid, nclamp


def sweep_3d(tri, normals, areas, P, xi_abs, sigma, gconst, max_angle, max_depth, eta_min):
    npts = len(P)
    acc = np.zeros(npts, dtype=np.complex128)
    resid = np.zeros(npts)
    nclamp = 0
    xi_eff = np.maximum(xi_abs, eta_min)
    for e in range(len(tri)):
        V0 = np.broadcast_to(tri[e, 0], P.shape).copy()
        V1 = np.broadcast_to(tri[e, 1], P.shape).copy()
        V2 = np.broadcast_to(tri[e, 2], P.shape).copy()
        idx = np.arange(npts)
        area = float(areas[e])
        nrm = normals[e]
        for depth in range(max_depth + 1):
            if len(idx) == 0:
                break
            Pq = P[idx]
            de = _tri_dist_rows(V0, V1, V2, Pq)
            measure = area / np.maximum(de * de, 1e-300)
            split = (measure > max_angle) & (depth < max_depth)
            leaf = ~split
            if np.any(leaf):
                mid = (V0[leaf] + V1[leaf] + V2[leaf]) / 3.0
                r = mid - Pq[leaf]
                w = np.einsum("ij,j->i", r, nrm) * area
                nclamp += _skel_accumulate(
                    acc, idx[leaf], r, eta_min, xi_eff[idx[leaf]], sigma, gconst, w
                )
                capped = leaf & (measure > max_angle)
                if np.any(capped):
                    np.maximum.at(resid, idx[capped], measure[capped])
            if not np.any(split):
                break
            V0, V1, V2, idx = V0[split], V1[split], V2[split], idx[split]
            M01 = 0.5 * (V0 + V1)
            M02 = 0.5 * (V0 + V2)
            M12 = 0.5 * (V1 + V2)
            V0 = np.concatenate([V0, M01, M02, M01])
            V1 = np.concatenate([M01, V1, M12, M12])
            V2 = np.concatenate([M02, M12, V2, M02])
            idx = np.concatenate([idx, idx, idx, idx])
            area *= 0.25
    return acc, resid, nclamp


# ---------------------------------------------------------------------------
# cascade mode sum: score plus translational and rotational gradients in one
# pass over the retained frequency window


def _interp_window(C, u, wrap):
    """Multilinear sample of window array C at continuous indices u (M, d).

    Returns (values, d_values/d_index). Out-of-window samples are zero unless
    wrap is set (full spectra are N-periodic per axis).
    """
    d = C.ndim
    dims = C.shape
    flat = C.ravel()
    i0 = np.floor(u).astype(np.int64)
    f = u - i0
    M = len(u)
    V = np.zeros(M, dtype=np.complex128)
    dV = np.zeros((M, d), dtype=np.complex128)
    for corner in itertools.product((0, 1), repeat=d):
        idx = i0 + np.asarray(corner, dtype=np.int64)
        if wrap:
            lin = np.zeros(M, dtype=np.int64)
            for a in range(d):
                lin = lin * dims[a] + idx[:, a] % dims[a]
            cv = flat[lin]
        else:
            ok = np.ones(M, dtype=bool)
            lin = np.zeros(M, dtype=np.int64)
            for a in range(d):
                ok &= (idx[:, a] >= 0) & (idx[:, a] < dims[a])
                lin = lin * dims[a] + np.clip(idx[:, a], 0, dims[a] - 1)
            cv = np.where(ok, flat[lin], 0.0)
        w = np.ones(M)
        for a in range(d):
            w = w * (f[:, a] if corner[a] else 1.0 - f[:, a])
        V += w * cv
        for a in range(d):
            dw = np.ones(M)
            for b in range(d):
                if b == a:
                    continue
                dw = dw * (f[:, b] if corner[b] else 1.0 - f[:, b])
            dV[:, a] += (dw if corner[a] else -dw) * cv
    return V, dV


def _rotation_generators(d):
    if d == 2:
        return [np.array([[0.0, -1.0], [1.0, 0.0]])]
    return [
        np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
        np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
        np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
    ]


def cascade_eval(C1, C2, wrap, domega, d_omega_cell, R, t_eff, center):
    """Evaluate score, translational gradient and rotational gradient.

    C1, C2: center-referenced window arrays (same shape, row-major axes).
    domega: per-axis frequency spacing. d_omega_cell: global 1/(m*deltaV).
    t_eff: t - c + R c precomputed by the caller. center: grid center c.
    Returns complex array [score, tgrad_0..d-1, rgrad_0..n_rot-1].
    """
    d = C1.ndim
    win = C1.shape
    axes = [(np.arange(w) - w // 2) * dw for w, dw in zip(win, domega)]
    W = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    nu = -(W @ R)
    u = nu / np.asarray(domega) + np.asarray([w // 2 for w in win])
    V, dV = _interp_window(C2, u, wrap)
    phase = np.exp(2j * np.pi * (W @ t_eff))
    base = C1.ravel() * phase
    out = []
    out.append(np.sum(base * V))
    for a in range(d):
        out.append(np.sum(base * V * (2j * np.pi * W[:, a])))
    dV_nu = dV / np.asarray(domega)
    for G in _rotation_generators(d):
        dnu = -(W @ (G @ R))
        term1 = np.einsum("ij,ij->i", dV_nu, dnu)
        term2 = 2j * np.pi * (W @ (G @ (R @ center))) * V
        out.append(np.sum(base * (term1 + term2)))
    return d_omega_cell * np.asarray(out)
