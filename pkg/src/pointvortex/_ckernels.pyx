# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled N-vortex kernels for the plane, half-plane and unit disk.

Mirrors ``_kernels_py`` operation for operation (same expression order, same
Neumaier accumulation) so both backends round identically on IEEE hardware.
Return codes: 0 ok, 1 coincident pair (bad[0], bad[1]), 2 outside (bad[0]).
"""
from libc.math cimport log, fabs, sqrt

cdef double PI = 3.141592653589793
cdef double TWO_PI = 2.0 * 3.141592653589793
cdef double FOUR_PI = 4.0 * 3.141592653589793
cdef double COINCIDENCE_RTOL = 1e-13


cdef inline void _acc(double* s, double* c, double v) noexcept nogil:
    cdef double t = s[0] + v
    if fabs(s[0]) >= fabs(v):
        c[0] += (s[0] - t) + v
    else:
        c[0] += (v - t) + s[0]
    s[0] = t


cdef inline int _check_inside(int kind, double x, double y) noexcept nogil:
    if kind == 1:
        return y > 0.0
    if kind == 2:
        return x * x + y * y < 1.0
    return 1


cdef inline int _coincident(double xi, double yi, double xj, double yj, double r2) noexcept nogil:
    cdef double ni = sqrt(xi * xi + yi * yi)
    cdef double nj = sqrt(xj * xj + yj * yj)
    cdef double thr = COINCIDENCE_RTOL * (1.0 + ni + nj)
    return sqrt(r2) < thr


cdef int _validate(int kind, const double[:, ::1] pos, Py_ssize_t[::1] bad) noexcept nogil:
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t i, j
    cdef double dx, dy
    for i in range(n):
        if not _check_inside(kind, pos[i, 0], pos[i, 1]):
            bad[0] = i
            return 2
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            if _coincident(pos[i, 0], pos[i, 1], pos[j, 0], pos[j, 1], dx * dx + dy * dy):
                bad[0] = i
                bad[1] = j
                return 1
    return 0


def velocities(int kind, const double[:, ::1] pos, const double[::1] a,
               double[:, ::1] out, Py_ssize_t[::1] bad):
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t i, j
    cdef double xi, yi, xj, yj, dx, dy, r2, c, ey, rb2, cb, ni2, nj2, den, wx, wy, cw
    cdef double sx, cx, sy, cy, tx, ty
    cdef int code
    code = _validate(kind, pos, bad)
    if code != 0:
        return code
    with nogil:
        for i in range(n):
            xi = pos[i, 0]
            yi = pos[i, 1]
            sx = 0.0
            cx = 0.0
            sy = 0.0
            cy = 0.0
            for j in range(n):
                if j == i:
                    continue
                xj = pos[j, 0]
                yj = pos[j, 1]
                dx = xi - xj
                dy = yi - yj
                r2 = dx * dx + dy * dy
                c = a[j] / (TWO_PI * r2)
                tx = -c * dy
                ty = c * dx
                if kind == 1:
                    ey = yi + yj
                    rb2 = dx * dx + ey * ey
                    cb = a[j] / (TWO_PI * rb2)
                    tx = tx + cb * ey
                    ty = ty - cb * dx
                elif kind == 2:
                    ni2 = xi * xi + yi * yi
                    nj2 = xj * xj + yj * yj
                    den = r2 + (1.0 - ni2) * (1.0 - nj2)
                    wx = nj2 * xi - xj
                    wy = nj2 * yi - yj
                    cw = a[j] / (TWO_PI * den)
                    tx = tx + cw * wy
                    ty = ty - cw * wx
                _acc(&sx, &cx, tx)
                _acc(&sy, &cy, ty)
            if kind == 1:
                _acc(&sx, &cx, a[i] / (FOUR_PI * yi))
            elif kind == 2:
                ni2 = xi * xi + yi * yi
                c = a[i] / (TWO_PI * (1.0 - ni2))
                _acc(&sx, &cx, -c * yi)
                _acc(&sy, &cy, c * xi)
            out[i, 0] = sx + cx
            out[i, 1] = sy + cy
    return 0


def hamiltonian(int kind, const double[:, ::1] pos, const double[::1] a, Py_ssize_t[::1] bad):
    """Half the ordered-pair sum of a_i a_j G(x_i, x_j) plus half the Robin self-energies.

    Returns (code, value).
    """
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t i, j
    cdef double xi, yi, xj, yj, dx, dy, r2, g, ey, ni2, nj2
    cdef double s = 0.0, comp = 0.0
    cdef int code
    with nogil:
        code = _validate(kind, pos, bad)
        if code == 0:
            for i in range(n):
                xi = pos[i, 0]
                yi = pos[i, 1]
                for j in range(n):
                    if j == i:
                        continue
                    xj = pos[j, 0]
                    yj = pos[j, 1]
                    dx = xi - xj
                    dy = yi - yj
                    r2 = dx * dx + dy * dy
                    if kind == 0:
                        g = log(r2) / FOUR_PI
                    elif kind == 1:
                        ey = yi + yj
                        g = (log(r2) - log(dx * dx + ey * ey)) / FOUR_PI
                    else:
                        ni2 = xi * xi + yi * yi
                        nj2 = xj * xj + yj * yj
                        g = (log(r2) - log(r2 + (1.0 - ni2) * (1.0 - nj2))) / FOUR_PI
                    _acc(&s, &comp, 0.5 * a[i] * a[j] * g)
                if kind == 1:
                    _acc(&s, &comp, 0.5 * a[i] * a[i] * (-log(2.0 * yi) / TWO_PI))
                elif kind == 2:
                    ni2 = xi * xi + yi * yi
                    _acc(&s, &comp, 0.5 * a[i] * a[i] * (-log(1.0 - ni2) / TWO_PI))
    return code, s + comp
