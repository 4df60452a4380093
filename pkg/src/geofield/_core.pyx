# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: BVH point-boundary distance, exact winding sums, the
adaptive skeletal sweep, and cascade mode sums.

Contracts mirror _fallback exactly; descriptor/energy pick whichever backend
is available. All heavy loops run without the GIL so callers can partition
node ranges across threads.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, exp, fabs, floor, sin, sqrt

cnp.import_array()

cdef double SQRT_TWO_PI = 2.5066282746310002
cdef double TWO_PI = 6.283185307179586
cdef double FOUR_PI = 12.566370614359172


# ---------------------------------------------------------------------------
# scalar distance helpers


cdef inline double _seg_dist_2d(double ax, double ay, double bx, double by,
                                double px, double py) nogil:
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double den = dx * dx + dy * dy
    cdef double t = 0.0
    cdef double cx, cy
    if den > 1e-300:
        t = ((px - ax) * dx + (py - ay) * dy) / den
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    cx = ax + t * dx - px
    cy = ay + t * dy - py
    return sqrt(cx * cx + cy * cy)


cdef inline double _seg_dist_3d(double ax, double ay, double az,
                                double bx, double by, double bz,
                                double px, double py, double pz) nogil:
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double dz = bz - az
    cdef double den = dx * dx + dy * dy + dz * dz
    cdef double t = 0.0
    cdef double cx, cy, cz
    if den > 1e-300:
        t = ((px - ax) * dx + (py - ay) * dy + (pz - az) * dz) / den
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    cx = ax + t * dx - px
    cy = ay + t * dy - py
    cz = az + t * dz - pz
    return sqrt(cx * cx + cy * cy + cz * cz)


cdef inline double _tri_dist_3d(double v0x, double v0y, double v0z,
                                double v1x, double v1y, double v1z,
                                double v2x, double v2y, double v2z,
                                double px, double py, double pz) nogil:
    cdef double e0x = v1x - v0x, e0y = v1y - v0y, e0z = v1z - v0z
    cdef double e1x = v2x - v0x, e1y = v2y - v0y, e1z = v2z - v0z
    cdef double nx = e0y * e1z - e0z * e1y
    cdef double ny = e0z * e1x - e0x * e1z
    cdef double nz = e0x * e1y - e0y * e1x
    cdef double nn = sqrt(nx * nx + ny * ny + nz * nz)
    cdef double dx = px - v0x, dy = py - v0y, dz = pz - v0z
    cdef double dot00 = e0x * e0x + e0y * e0y + e0z * e0z
    cdef double dot01 = e0x * e1x + e0y * e1y + e0z * e1z
    cdef double dot11 = e1x * e1x + e1y * e1y + e1z * e1z
    cdef double d0 = dx * e0x + dy * e0y + dz * e0z
    cdef double d1 = dx * e1x + dy * e1y + dz * e1z
    cdef double den = dot00 * dot11 - dot01 * dot01
    cdef double u, v, plane, m, s
    if den < 1e-300:
        den = 1e-300
    u = (dot11 * d0 - dot01 * d1) / den
    v = (dot00 * d1 - dot01 * d0) / den
    if u >= 0.0 and v >= 0.0 and u + v <= 1.0:
        if nn < 1e-300:
            nn = 1e-300
        plane = fabs(dx * nx + dy * ny + dz * nz) / nn
        return plane
    m = _seg_dist_3d(v0x, v0y, v0z, v1x, v1y, v1z, px, py, pz)
    s = _seg_dist_3d(v1x, v1y, v1z, v2x, v2y, v2z, px, py, pz)
    if s < m:
        m = s
    s = _seg_dist_3d(v0x, v0y, v0z, v2x, v2y, v2z, px, py, pz)
    if s < m:
        m = s
    return m


# ---------------------------------------------------------------------------
# BVH nearest-element queries


cdef inline double _box_dist2_2d(double bx0, double by0, double bx1, double by1,
                                 double px, double py) nogil:
    cdef double s = 0.0, v
    if px < bx0:
        v = bx0 - px
        s += v * v
    elif px > bx1:
        v = px - bx1
        s += v * v
    if py < by0:
        v = by0 - py
        s += v * v
    elif py > by1:
        v = py - by1
        s += v * v
    return s


cdef inline double _box_dist2_3d(double bx0, double by0, double bz0,
                                 double bx1, double by1, double bz1,
                                 double px, double py, double pz) nogil:
    cdef double s = 0.0, v
    if px < bx0:
        v = bx0 - px
        s += v * v
    elif px > bx1:
        v = px - bx1
        s += v * v
    if py < by0:
        v = by0 - py
        s += v * v
    elif py > by1:
        v = py - by1
        s += v * v
    if pz < bz0:
        v = bz0 - pz
        s += v * v
    elif pz > bz1:
        v = pz - bz1
        s += v * v
    return s


def distance_2d(double[:, ::1] bmin, double[:, ::1] bmax,
                long[::1] left, long[::1] right,
                long[::1] start, long[::1] count, long[::1] perm,
                double[:, ::1] seg_a, double[:, ::1] seg_b,
                double[:, ::1] P, double[::1] out,
                Py_ssize_t i0, Py_ssize_t i1):
    cdef Py_ssize_t i, k
    cdef long stack[128]
    cdef int sp
    cdef long node, e
    cdef double px, py, best, d
    with nogil:
        for i in range(i0, i1):
            px = P[i, 0]
            py = P[i, 1]
            best = 1e300
            sp = 0
            stack[sp] = 0
            sp += 1
            while sp > 0:
                sp -= 1
                node = stack[sp]
                if _box_dist2_2d(bmin[node, 0], bmin[node, 1],
                                 bmax[node, 0], bmax[node, 1], px, py) >= best * best:
                    continue
                if left[node] < 0:
                    for k in range(start[node], start[node] + count[node]):
                        e = perm[k]
                        d = _seg_dist_2d(seg_a[e, 0], seg_a[e, 1],
                                         seg_b[e, 0], seg_b[e, 1], px, py)
                        if d < best:
                            best = d
                else:
                    stack[sp] = left[node]
                    sp += 1
                    stack[sp] = right[node]
                    sp += 1
            out[i] = best


def distance_3d(double[:, ::1] bmin, double[:, ::1] bmax,
                long[::1] left, long[::1] right,
                long[::1] start, long[::1] count, long[::1] perm,
                double[:, :, ::1] tri,
                double[:, ::1] P, double[::1] out,
                Py_ssize_t i0, Py_ssize_t i1):
    cdef Py_ssize_t i, k
    cdef long stack[128]
    cdef int sp
    cdef long node, e
    cdef double px, py, pz, best, d
    with nogil:
        for i in range(i0, i1):
            px = P[i, 0]
            py = P[i, 1]
            pz = P[i, 2]
            best = 1e300
            sp = 0
            stack[sp] = 0
            sp += 1
            while sp > 0:
                sp -= 1
                node = stack[sp]
                if _box_dist2_3d(bmin[node, 0], bmin[node, 1], bmin[node, 2],
                                 bmax[node, 0], bmax[node, 1], bmax[node, 2],
                                 px, py, pz) >= best * best:
                    continue
                if left[node] < 0:
                    for k in range(start[node], start[node] + count[node]):
                        e = perm[k]
                        d = _tri_dist_3d(tri[e, 0, 0], tri[e, 0, 1], tri[e, 0, 2],
                                         tri[e, 1, 0], tri[e, 1, 1], tri[e, 1, 2],
                                         tri[e, 2, 0], tri[e, 2, 1], tri[e, 2, 2],
                                         px, py, pz)
                        if d < best:
                            best = d
                else:
                    stack[sp] = left[node]
                    sp += 1
                    stack[sp] = right[node]
                    sp += 1
            out[i] = best


# ---------------------------------------------------------------------------
# exact winding accumulation


cdef inline double _seg_angle(double ax, double ay, double bx, double by,
                              double px, double py) nogil:
    cdef double ux = ax - px, uy = ay - py
    cdef double vx = bx - px, vy = by - py
    return atan2(ux * vy - uy * vx, ux * vx + uy * vy)


cdef inline double _tri_solid_angle(double v0x, double v0y, double v0z,
                                    double v1x, double v1y, double v1z,
                                    double v2x, double v2y, double v2z,
                                    double px, double py, double pz) nogil:
    cdef double ax = v0x - px, ay = v0y - py, az = v0z - pz
    cdef double bx = v1x - px, by = v1y - py, bz = v1z - pz
    cdef double cx = v2x - px, cy = v2y - py, cz = v2z - pz
    cdef double la = sqrt(ax * ax + ay * ay + az * az)
    cdef double lb = sqrt(bx * bx + by * by + bz * bz)
    cdef double lc = sqrt(cx * cx + cy * cy + cz * cz)
    cdef double num = ax * (by * cz - bz * cy) + ay * (bz * cx - bx * cz) + az * (bx * cy - by * cx)
    cdef double den = la * lb * lc \
        + (ax * bx + ay * by + az * bz) * lc \
        + (ax * cx + ay * cy + az * cz) * lb \
        + (bx * cx + by * cy + bz * cz) * la
    return 2.0 * atan2(num, den)


def winding_2d(double[:, ::1] seg_a, double[:, ::1] seg_b,
               double[:, ::1] P, double[::1] out,
               Py_ssize_t i0, Py_ssize_t i1):
    cdef Py_ssize_t i, e, ne = seg_a.shape[0]
    cdef double acc, px, py
    with nogil:
        for i in range(i0, i1):
            px = P[i, 0]
            py = P[i, 1]
            acc = 0.0
            for e in range(ne):
                acc += _seg_angle(seg_a[e, 0], seg_a[e, 1], seg_b[e, 0], seg_b[e, 1], px, py)
            out[i] = acc / TWO_PI


def winding_3d(double[:, :, ::1] tri, double[:, ::1] P, double[::1] out,
               Py_ssize_t i0, Py_ssize_t i1):
    cdef Py_ssize_t i, e, ne = tri.shape[0]
    cdef double acc, px, py, pz
    with nogil:
        for i in range(i0, i1):
            px = P[i, 0]
            py = P[i, 1]
            pz = P[i, 2]
            acc = 0.0
            for e in range(ne):
                acc += _tri_solid_angle(tri[e, 0, 0], tri[e, 0, 1], tri[e, 0, 2],
                                        tri[e, 1, 0], tri[e, 1, 1], tri[e, 1, 2],
                                        tri[e, 2, 0], tri[e, 2, 1], tri[e, 2, 2],
                                        px, py, pz)
            out[i] = acc / FOUR_PI


# ---------------------------------------------------------------------------
# adaptive skeletal sweep (midpoint rule at leaves, depth-first with an
# explicit stack; split criterion uses the exact point-element distance)


def sweep_2d(double[:, ::1] seg_a, double[:, ::1] seg_b, double[:, ::1] seg_n,
             double[::1] seg_len, double[:, ::1] P, double[::1] xi_eff,
             double sigma, double gconst, double max_angle, int max_depth,
             double eta_min, double complex[::1] out, double[::1] resid,
             long[::1] clamps, Py_ssize_t i0, Py_ssize_t i1):
    cdef Py_ssize_t i, e, ne = seg_a.shape[0]
    cdef double st[80][5]
    cdef int sd[80]
    cdef int sp, depth
    cdef double px, py, xi, ginv, acc_re, acc_im, wresid
    cdef long nclamp
    cdef double ax, ay, bx, by, L, de, measure, mx, my, rx, ry, eta, dot, dA
    cdef double targ, g, z2r, z2i, den, scale
    ginv = 1.0 / (SQRT_TWO_PI * sigma)
    with nogil:
        for i in range(i0, i1):
            px = P[i, 0]
            py = P[i, 1]
            xi = xi_eff[i]
            acc_re = 0.0
            acc_im = 0.0
            wresid = resid[i]
            nclamp = 0
            for e in range(ne):
                sp = 0
                st[0][0] = seg_a[e, 0]
                st[0][1] = seg_a[e, 1]
                st[0][2] = seg_b[e, 0]
                st[0][3] = seg_b[e, 1]
                st[0][4] = seg_len[e]
                sd[0] = 0
                sp = 1
                while sp > 0:
                    sp -= 1
                    ax = st[sp][0]
                    ay = st[sp][1]
                    bx = st[sp][2]
                    by = st[sp][3]
                    L = st[sp][4]
                    depth = sd[sp]
                    de = _seg_dist_2d(ax, ay, bx, by, px, py)
                    if de < 1e-300:
                        de = 1e-300
                    measure = L / de
                    if measure > max_angle and depth < max_depth:
                        mx = 0.5 * (ax + bx)
                        my = 0.5 * (ay + by)
                        st[sp][0] = ax
                        st[sp][1] = ay
                        st[sp][2] = mx
                        st[sp][3] = my
                        st[sp][4] = 0.5 * L
                        sd[sp] = depth + 1
                        sp += 1
                        st[sp][0] = mx
                        st[sp][1] = my
                        st[sp][2] = bx
                        st[sp][3] = by
                        st[sp][4] = 0.5 * L
                        sd[sp] = depth + 1
                        sp += 1
                        continue
                    if measure > max_angle and measure > wresid:
                        wresid = measure
                    mx = 0.5 * (ax + bx) - px
                    my = 0.5 * (ay + by) - py
                    eta = sqrt(mx * mx + my * my)
                    if eta < eta_min:
                        eta = eta_min
                        nclamp += 1
                    dot = mx * seg_n[e, 0] + my * seg_n[e, 1]
                    dA = dot * L / eta
                    targ = (eta / xi - 1.0) / sigma
                    g = exp(-0.5 * targ * targ) * ginv
                    z2r = xi * xi - eta * eta
                    z2i = 2.0 * xi * eta
                    den = z2r * z2r + z2i * z2i
                    scale = gconst * g * dA / den
                    acc_re += scale * z2r
                    acc_im -= scale * z2i
            out[i] = acc_re + 1j * acc_im
            resid[i] = wresid
            clamps[i] += nclamp


def sweep_3d(double[:, :, ::1] tri, double[:, ::1] normals, double[::1] areas,
             double[:, ::1] P, double[::1] xi_eff,
             double sigma, double gconst, double max_angle, int max_depth,
             double eta_min, double complex[::1] out, double[::1] resid,
             long[::1] clamps, Py_ssize_t i0, Py_ssize_t i1):
    cdef Py_ssize_t i, e, ne = tri.shape[0]
    cdef double st[200][10]
    cdef int sd[200]
    cdef int sp, depth
    cdef double px, py, pz, xi, ginv, acc_re, acc_im, wresid
    cdef long nclamp
    cdef double v0x, v0y, v0z, v1x, v1y, v1z, v2x, v2y, v2z, area
    cdef double m01x, m01y, m01z, m02x, m02y, m02z, m12x, m12y, m12z
    cdef double de, measure, mx, my, mz, eta, dot, dA, targ, g, z2r, z2i, den, scale, qarea
    ginv = 1.0 / (SQRT_TWO_PI * sigma)
    with nogil:
        for i in range(i0, i1):
            px = P[i, 0]
            py = P[i, 1]
            pz = P[i, 2]
            xi = xi_eff[i]
            acc_re = 0.0
            acc_im = 0.0
            wresid = resid[i]
            nclamp = 0
            for e in range(ne):
                st[0][0] = tri[e, 0, 0]
                st[0][1] = tri[e, 0, 1]
                st[0][2] = tri[e, 0, 2]
                st[0][3] = tri[e, 1, 0]
                st[0][4] = tri[e, 1, 1]
                st[0][5] = tri[e, 1, 2]
                st[0][6] = tri[e, 2, 0]
                st[0][7] = tri[e, 2, 1]
                st[0][8] = tri[e, 2, 2]
                st[0][9] = areas[e]
                sd[0] = 0
                sp = 1
                while sp > 0:
                    sp -= 1
                    v0x = st[sp][0]
                    v0y = st[sp][1]
                    v0z = st[sp][2]
                    v1x = st[sp][3]
                    v1y = st[sp][4]
                    v1z = st[sp][5]
                    v2x = st[sp][6]
                    v2y = st[sp][7]
                    v2z = st[sp][8]
                    area = st[sp][9]
                    depth = sd[sp]
                    de = _tri_dist_3d(v0x, v0y, v0z, v1x, v1y, v1z, v2x, v2y, v2z, px, py, pz)
                    measure = area / (de * de + 1e-300)
                    if measure > max_angle and depth < max_depth:
                        m01x = 0.5 * (v0x + v1x)
                        m01y = 0.5 * (v0y + v1y)
                        m01z = 0.5 * (v0z + v1z)
                        m02x = 0.5 * (v0x + v2x)
                        m02y = 0.5 * (v0y + v2y)
                        m02z = 0.5 * (v0z + v2z)
                        m12x = 0.5 * (v1x + v2x)
                        m12y = 0.5 * (v1y + v2y)
                        m12z = 0.5 * (v1z + v2z)
                        qarea = 0.25 * area
                        # corner 0
                        st[sp][0] = v0x
                        st[sp][1] = v0y
                        st[sp][2] = v0z
                        st[sp][3] = m01x
                        st[sp][4] = m01y
                        st[sp][5] = m01z
                        st[sp][6] = m02x
                        st[sp][7] = m02y
                        st[sp][8] = m02z
                        st[sp][9] = qarea
                        sd[sp] = depth + 1
                        sp += 1
                        # corner 1
                        st[sp][0] = m01x
                        st[sp][1] = m01y
                        st[sp][2] = m01z
                        st[sp][3] = v1x
                        st[sp][4] = v1y
                        st[sp][5] = v1z
                        st[sp][6] = m12x
                        st[sp][7] = m12y
                        st[sp][8] = m12z
                        st[sp][9] = qarea
                        sd[sp] = depth + 1
                        sp += 1
                        # corner 2
                        st[sp][0] = m02x
                        st[sp][1] = m02y
                        st[sp][2] = m02z
                        st[sp][3] = m12x
                        st[sp][4] = m12y
                        st[sp][5] = m12z
                        st[sp][6] = v2x
                        st[sp][7] = v2y
                        st[sp][8] = v2z
                        st[sp][9] = qarea
                        sd[sp] = depth + 1
                        sp += 1
                        # center
                        st[sp][0] = m01x
                        st[sp][1] = m01y
                        st[sp][2] = m01z
                        st[sp][3] = m12x
                        st[sp][4] = m12y
                        st[sp][5] = m12z
                        st[sp][6] = m02x
                        st[sp][7] = m02y
                        st[sp][8] = m02z
                        st[sp][9] = qarea
                        sd[sp] = depth + 1
                        sp += 1
                        continue
                    if measure > max_angle and measure > wresid:
                        wresid = measure
                    mx = (v0x + v1x + v2x) / 3.0 - px
                    my = (v0y + v1y + v2y) / 3.0 - py
                    mz = (v0z + v1z + v2z) / 3.0 - pz
                    eta = sqrt(mx * mx + my * my + mz * mz)
                    if eta < eta_min:
                        eta = eta_min
                        nclamp += 1
                    dot = mx * normals[e, 0] + my * normals[e, 1] + mz * normals[e, 2]
                    dA = dot * area / eta
                    targ = (eta / xi - 1.0) / sigma
                    g = exp(-0.5 * targ * targ) * ginv
                    z2r = xi * xi - eta * eta
                    z2i = 2.0 * xi * eta
                    den = z2r * z2r + z2i * z2i
                    scale = gconst * g * dA / den
                    acc_re += scale * z2r
                    acc_im -= scale * z2i
            out[i] = acc_re + 1j * acc_im
            resid[i] = wresid
            clamps[i] += nclamp


# ---------------------------------------------------------------------------
# cascade mode sums


def cascade_2d(double complex[:, ::1] C1, double complex[:, ::1] C2, bint wrap,
               double dox, double doy, double dcell,
               double[:, ::1] R, double[::1] t_eff, double[::1] center):
    cdef int w0 = C1.shape[0], w1 = C1.shape[1]
    cdef int h0 = w0 // 2, h1 = w1 // 2
    cdef int kx, ky, iu, iv, iu1, iv1
    cdef double omx, omy, nux, nuy, u, v, fu, fv, arg
    cdef double a00, a01, a10, a11, qx, qy, rdot
    cdef double complex c00, c01, c10, c11, V, dVdu, dVdv, ph, base, term
    cdef double complex score = 0, tgx = 0, tgy = 0, rg = 0
    cdef double r00 = R[0, 0], r01 = R[0, 1], r10 = R[1, 0], r11 = R[1, 1]
    # A = Omega @ R with Omega = [[0,-1],[1,0]]; q = A @ center
    a00 = -r10
    a01 = -r11
    a10 = r00
    a11 = r01
    qx = a00 * center[0] + a01 * center[1]
    qy = a10 * center[0] + a11 * center[1]
    cdef double tx = t_eff[0], ty = t_eff[1]
    with nogil:
        for kx in range(w0):
            omx = (kx - h0) * dox
            for ky in range(w1):
                omy = (ky - h1) * doy
                nux = -(r00 * omx + r10 * omy)
                nuy = -(r01 * omx + r11 * omy)
                u = nux / dox + h0
                v = nuy / doy + h1
                iu = <int>floor(u)
                iv = <int>floor(v)
                fu = u - iu
                fv = v - iv
                iu1 = iu + 1
                iv1 = iv + 1
                if wrap:
                    c00 = C2[(iu % w0 + w0) % w0, (iv % w1 + w1) % w1]
                    c10 = C2[(iu1 % w0 + w0) % w0, (iv % w1 + w1) % w1]
                    c01 = C2[(iu % w0 + w0) % w0, (iv1 % w1 + w1) % w1]
                    c11 = C2[(iu1 % w0 + w0) % w0, (iv1 % w1 + w1) % w1]
                else:
                    c00 = C2[iu, iv] if 0 <= iu < w0 and 0 <= iv < w1 else 0
                    c10 = C2[iu1, iv] if 0 <= iu1 < w0 and 0 <= iv < w1 else 0
                    c01 = C2[iu, iv1] if 0 <= iu < w0 and 0 <= iv1 < w1 else 0
                    c11 = C2[iu1, iv1] if 0 <= iu1 < w0 and 0 <= iv1 < w1 else 0
                V = (1 - fu) * (1 - fv) * c00 + fu * (1 - fv) * c10 \
                    + (1 - fu) * fv * c01 + fu * fv * c11
                dVdu = (1 - fv) * (c10 - c00) + fv * (c11 - c01)
                dVdv = (1 - fu) * (c01 - c00) + fu * (c11 - c10)
                arg = TWO_PI * (omx * tx + omy * ty)
                ph = cos(arg) + 1j * sin(arg)
                base = C1[kx, ky] * ph
                score = score + base * V
                tgx = tgx + base * V * (1j * TWO_PI * omx)
                tgy = tgy + base * V * (1j * TWO_PI * omy)
                # dnu_a = -(omx * A[0,a] + omy * A[1,a])
                rdot = omx * qx + omy * qy
                term = dVdu / dox * (-(omx * a00 + omy * a10)) \
                    + dVdv / doy * (-(omx * a01 + omy * a11)) \
                    + (1j * TWO_PI * rdot) * V
                rg = rg + base * term
    out = np.empty(4, dtype=np.complex128)
    out[0] = score * dcell
    out[1] = tgx * dcell
    out[2] = tgy * dcell
    out[3] = rg * dcell
    return out


def cascade_3d(double complex[:, :, ::1] C1, double complex[:, :, ::1] C2, bint wrap,
               double dox, double doy, double doz, double dcell,
               double[:, ::1] R, double[::1] t_eff, double[::1] center):
    cdef int w0 = C1.shape[0], w1 = C1.shape[1], w2 = C1.shape[2]
    cdef int h0 = w0 // 2, h1 = w1 // 2, h2 = w2 // 2
    cdef int kx, ky, kz, iu, iv, iw, iu1, iv1, iw1, g, a, b
    cdef double omx, omy, omz, nux, nuy, nuz, u, v, w, fu, fv, fw, arg
    cdef double A[3][3][3]
    cdef double q[3][3]
    cdef double Rm[3][3]
    cdef double dnx, dny, dnz, rdot
    cdef double complex c000, c100, c010, c110, c001, c101, c011, c111
    cdef double complex V, dVdu, dVdv, dVdw, ph, base, term
    cdef double complex score = 0, tg0 = 0, tg1 = 0, tg2 = 0, rg0 = 0, rg1 = 0, rg2 = 0
    for a in range(3):
        for b in range(3):
            Rm[a][b] = R[a, b]
    # generators about x, y, z; A[g] = Omega_g @ R, q[g] = A[g] @ center
    for g in range(3):
        for a in range(3):
            for b in range(3):
                A[g][a][b] = 0.0
    for b in range(3):
        A[0][1][b] = -Rm[2][b]
        A[0][2][b] = Rm[1][b]
        A[1][0][b] = Rm[2][b]
        A[1][2][b] = -Rm[0][b]
        A[2][0][b] = -Rm[1][b]
        A[2][1][b] = Rm[0][b]
    for g in range(3):
        for a in range(3):
            q[g][a] = A[g][a][0] * center[0] + A[g][a][1] * center[1] + A[g][a][2] * center[2]
    cdef double t0 = t_eff[0], t1 = t_eff[1], t2 = t_eff[2]
    with nogil:
        for kx in range(w0):
            omx = (kx - h0) * dox
            for ky in range(w1):
                omy = (ky - h1) * doy
                for kz in range(w2):
                    omz = (kz - h2) * doz
                    nux = -(Rm[0][0] * omx + Rm[1][0] * omy + Rm[2][0] * omz)
                    nuy = -(Rm[0][1] * omx + Rm[1][1] * omy + Rm[2][1] * omz)
                    nuz = -(Rm[0][2] * omx + Rm[1][2] * omy + Rm[2][2] * omz)
                    u = nux / dox + h0
                    v = nuy / doy + h1
                    w = nuz / doz + h2
                    iu = <int>floor(u)
                    iv = <int>floor(v)
                    iw = <int>floor(w)
                    fu = u - iu
                    fv = v - iv
                    fw = w - iw
                    iu1 = iu + 1
                    iv1 = iv + 1
                    iw1 = iw + 1
                    if wrap:
                        c000 = C2[(iu % w0 + w0) % w0, (iv % w1 + w1) % w1, (iw % w2 + w2) % w2]
                        c100 = C2[(iu1 % w0 + w0) % w0, (iv % w1 + w1) % w1, (iw % w2 + w2) % w2]
                        c010 = C2[(iu % w0 + w0) % w0, (iv1 % w1 + w1) % w1, (iw % w2 + w2) % w2]
                        c110 = C2[(iu1 % w0 + w0) % w0, (iv1 % w1 + w1) % w1, (iw % w2 + w2) % w2]
                        c001 = C2[(iu % w0 + w0) % w0, (iv % w1 + w1) % w1, (iw1 % w2 + w2) % w2]
                        c101 = C2[(iu1 % w0 + w0) % w0, (iv % w1 + w1) % w1, (iw1 % w2 + w2) % w2]
                        c011 = C2[(iu % w0 + w0) % w0, (iv1 % w1 + w1) % w1, (iw1 % w2 + w2) % w2]
                        c111 = C2[(iu1 % w0 + w0) % w0, (iv1 % w1 + w1) % w1, (iw1 % w2 + w2) % w2]
                    else:
                        c000 = C2[iu, iv, iw] if 0 <= iu < w0 and 0 <= iv < w1 and 0 <= iw < w2 else 0
                        c100 = C2[iu1, iv, iw] if 0 <= iu1 < w0 and 0 <= iv < w1 and 0 <= iw < w2 else 0
                        c010 = C2[iu, iv1, iw] if 0 <= iu < w0 and 0 <= iv1 < w1 and 0 <= iw < w2 else 0
                        c110 = C2[iu1, iv1, iw] if 0 <= iu1 < w0 and 0 <= iv1 < w1 and 0 <= iw < w2 else 0
                        c001 = C2[iu, iv, iw1] if 0 <= iu < w0 and 0 <= iv < w1 and 0 <= iw1 < w2 else 0
                        c101 = C2[iu1, iv, iw1] if 0 <= iu1 < w0 and 0 <= iv < w1 and 0 <= iw1 < w2 else 0
                        c011 = C2[iu, iv1, iw1] if 0 <= iu < w0 and 0 <= iv1 < w1 and 0 <= iw1 < w2 else 0
                        c111 = C2[iu1, iv1, iw1] if 0 <= iu1 < w0 and 0 <= iv1 < w1 and 0 <= iw1 < w2 else 0
                    V = (1 - fu) * (1 - fv) * (1 - fw) * c000 \
                        + fu * (1 - fv) * (1 - fw) * c100 \
                        + (1 - fu) * fv * (1 - fw) * c010 \
                        + fu * fv * (1 - fw) * c110 \
                        + (1 - fu) * (1 - fv) * fw * c001 \
                        + fu * (1 - fv) * fw * c101 \
                        + (1 - fu) * fv * fw * c011 \
                        + fu * fv * fw * c111
                    dVdu = (1 - fv) * (1 - fw) * (c100 - c000) + fv * (1 - fw) * (c110 - c010) \
                        + (1 - fv) * fw * (c101 - c001) + fv * fw * (c111 - c011)
                    dVdv = (1 - fu) * (1 - fw) * (c010 - c000) + fu * (1 - fw) * (c110 - c100) \
                        + (1 - fu) * fw * (c011 - c001) + fu * fw * (c111 - c101)
                    dVdw = (1 - fu) * (1 - fv) * (c001 - c000) + fu * (1 - fv) * (c101 - c100) \
                        + (1 - fu) * fv * (c011 - c010) + fu * fv * (c111 - c110)
                    arg = TWO_PI * (omx * t0 + omy * t1 + omz * t2)
                    ph = cos(arg) + 1j * sin(arg)
                    base = C1[kx, ky, kz] * ph
                    score = score + base * V
                    tg0 = tg0 + base * V * (1j * TWO_PI * omx)
                    tg1 = tg1 + base * V * (1j * TWO_PI * omy)
                    tg2 = tg2 + base * V * (1j * TWO_PI * omz)
                    # generator 0 (x)
                    dnx = -(omx * A[0][0][0] + omy * A[0][1][0] + omz * A[0][2][0])
                    dny = -(omx * A[0][0][1] + omy * A[0][1][1] + omz * A[0][2][1])
                    dnz = -(omx * A[0][0][2] + omy * A[0][1][2] + omz * A[0][2][2])
                    rdot = omx * q[0][0] + omy * q[0][1] + omz * q[0][2]
                    term = dVdu / dox * dnx + dVdv / doy * dny + dVdw / doz * dnz \
                        + (1j * TWO_PI * rdot) * V
                    rg0 = rg0 + base * term
                    # generator 1 (y)
                    dnx = -(omx * A[1][0][0] + omy * A[1][1][0] + omz * A[1][2][0])
                    dny = -(omx * A[1][0][1] + omy * A[1][1][1] + omz * A[1][2][1])
                    dnz = -(omx * A[1][0][2] + omy * A[1][1][2] + omz * A[1][2][2])
                    rdot = omx * q[1][0] + omy * q[1][1] + omz * q[1][2]
                    term = dVdu / dox * dnx + dVdv / doy * dny + dVdw / doz * dnz \
                        + (1j * TWO_PI * rdot) * V
                    rg1 = rg1 + base * term
                    # generator 2 (z)
                    dnx = -(omx * A[2][0][0] + omy * A[2][1][0] + omz * A[2][2][0])
                    dny = -(omx * A[2][0][1] + omy * A[2][1][1] + omz * A[2][2][1])
                    dnz = -(omx * A[2][0][2] + omy * A[2][1][2] + omz * A[2][2][2])
                    rdot = omx * q[2][0] + omy * q[2][1] + omz * q[2][2]
                    term = dVdu / dox * dnx + dVdv / doy * dny + dVdw / doz * dnz \
                        + (1j * TWO_PI * rdot) * V
                    rg2 = rg2 + base * term
    out = np.empty(7, dtype=np.complex128)
    out[0] = score * dcell
    out[1] = tg0 * dcell
    out[2] = tg1 * dcell
    out[3] = tg2 * dcell
    out[4] = rg0 * dcell
    out[5] = rg1 * dcell
    out[6] = rg2 * dcell
    return out
