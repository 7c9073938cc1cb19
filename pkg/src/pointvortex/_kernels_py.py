"""Pure-Python twin of ``_ckernels.pyx``.

Keep the two files in lockstep: same loop order, same expressions, same
Neumaier accumulation.  Plain floats and ``math`` beat numpy for the small N
this package targets.
"""
from math import log, pi, sqrt

TWO_PI = 2.0 * pi
FOUR_PI = 4.0 * pi
COINCIDENCE_RTOL = 1e-13


def _inside(kind, x, y):
    if kind == 1:
        return y > 0.0
    if kind == 2:
        return x * x + y * y < 1.0
    return True


def _validate(kind, pts, bad):
    n = len(pts)
    for i in range(n):
        if not _inside(kind, pts[i][0], pts[i][1]):
            bad[0] = i
            return 2
    for i in range(n):
        xi, yi = pts[i]
        for j in range(i + 1, n):
            xj, yj = pts[j]
            dx = xi - xj
            dy = yi - yj
            r2 = dx * dx + dy * dy
            thr = COINCIDENCE_RTOL * (1.0 + sqrt(xi * xi + yi * yi) + sqrt(xj * xj + yj * yj))
            if sqrt(r2) < thr:
                bad[0] = i
                bad[1] = j
                return 1
    return 0


def velocities(kind, pos, a, out, bad):
    pts = pos.tolist()
    a = a.tolist()
    code = _validate(kind, pts, bad)
    if code:
        return code
    n = len(pts)
    res = []
    for i in range(n):
        xi, yi = pts[i]
        sx = cx = sy = cy = 0.0
        for j in range(n):
            if j == i:
                continue
            xj, yj = pts[j]
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
            # Neumaier accumulation, x then y
            t = sx + tx
            cx += ((sx - t) + tx) if abs(sx) >= abs(tx) else ((tx - t) + sx)
            sx = t
            t = sy + ty
            cy += ((sy - t) + ty) if abs(sy) >= abs(ty) else ((ty - t) + sy)
            sy = t
        if kind == 1:
            v = a[i] / (FOUR_PI * yi)
            t = sx + v
            cx += ((sx - t) + v) if abs(sx) >= abs(v) else ((v - t) + sx)
            sx = t
        elif kind == 2:
            ni2 = xi * xi + yi * yi
            c = a[i] / (TWO_PI * (1.0 - ni2))
            v = -c * yi
            t = sx + v
            cx += ((sx - t) + v) if abs(sx) >= abs(v) else ((v - t) + sx)
            sx = t
            v = c * xi
            t = sy + v
            cy += ((sy - t) + v) if abs(sy) >= abs(v) else ((v - t) + sy)
            sy = t
        res.append((sx + cx, sy + cy))
    out[:, :] = res
    return 0


def hamiltonian(kind, pos, a, bad):
    pts = pos.tolist()
    a = a.tolist()
    code = _validate(kind, pts, bad)
    if code:
        return code, 0.0
    n = len(pts)
    s = comp = 0.0
    for i in range(n):
        xi, yi = pts[i]
        for j in range(n):
            if j == i:
                continue
            xj, yj = pts[j]
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
            v = 0.5 * a[i] * a[j] * g
            t = s + v
            comp += ((s - t) + v) if abs(s) >= abs(v) else ((v - t) + s)
            s = t
        if kind:
            if kind == 1:
                v = 0.5 * a[i] * a[i] * (-log(2.0 * yi) / TWO_PI)
            else:
                ni2 = xi * xi + yi * yi
                v = 0.5 * a[i] * a[i] * (-log(1.0 - ni2) / TWO_PI)
            t = s + v
            comp += ((s - t) + v) if abs(s) >= abs(v) else ((v - t) + s)
            s = t
    return code, s + comp
