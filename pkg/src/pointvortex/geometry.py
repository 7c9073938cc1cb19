"""Planar domains: Green and Robin kernels, boundary distance and projection.

Every domain uses the Green function of the Laplacian (not of minus the
Laplacian), so ``green`` is non-positive on bounded domains and on the
half-plane.  All point arguments may be a single point ``(2,)`` or a batch
``(..., 2)``; results broadcast over the leading axes and scalars come back
as plain floats.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from .errors import (
    CoincidentPointsError,
    GeometryError,
    InvalidMapError,
    OutsideBandError,
    OutsideDomainError,
    UnsupportedDomainError,
)

TWO_PI = 2.0 * np.pi
FOUR_PI = 4.0 * np.pi
COINCIDENCE_RTOL = 1e-13
DEFAULT_D0 = 0.2


def as_points(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise ValueError(f"expected point(s) with trailing dimension 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite")
    return arr


def perp(v) -> np.ndarray:
    """Counter-clockwise rotation by pi/2: (v1, v2) -> (-v2, v1)."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


def _sq(v):
    return v[..., 0] ** 2 + v[..., 1] ** 2


def _dot(u, v):
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]


def _scalar(a):
    a = np.asarray(a)
    if a.ndim == 0:
        return a.item()
    return a


def check_distinct(x, y):
    x, y = np.broadcast_arrays(x, y)
    r = np.sqrt(_sq(x - y))
    thr = COINCIDENCE_RTOL * (1.0 + np.sqrt(_sq(x)) + np.sqrt(_sq(y)))
    if np.any(r < thr):
        raise CoincidentPointsError(f"coincident points: |x - y| below {COINCIDENCE_RTOL:g} relative threshold")


# Unit-disk formulas shared by UnitDisk and ConformalDisk (the latter pulls back).
# The image-charge denominator |x - y*|^2 |y|^2 is written as
# |x - y|^2 + (1 - |x|^2)(1 - |y|^2), which is symmetric, positive and defined at y = 0.

def _one_minus_sq(x):
    # 1 - |x|^2 without cancellation near the unit circle
    r = np.hypot(x[..., 0], x[..., 1])
    return (1.0 - r) * (1.0 + r)


def _disk_image_den(x, y, r2):
    return r2 + _one_minus_sq(x) * _one_minus_sq(y)


def _disk_green(x, y):
    # log1p form keeps full relative accuracy when G is small (far pairs, near-wall points)
    r2 = _sq(x - y)
    return -np.log1p(_one_minus_sq(x) * _one_minus_sq(y) / r2) / FOUR_PI


def _disk_grad_green(x, y):
    d = x - y
    r2 = _sq(d)
    den = _disk_image_den(x, y, r2)
    img = _sq(y)[..., None] * x - y
    return (d / r2[..., None] - img / den[..., None]) / TWO_PI


def _disk_robin(x):
    return -np.log1p(-_sq(x)) / TWO_PI


def _disk_grad_robin(x):
    return x / (np.pi * (1.0 - _sq(x)))[..., None]


@dataclass(frozen=True)
class Domain:
    """Common interface.  Subclasses fill in the private kernels."""

    name: ClassVar[str] = "abstract"
    kernel_code: ClassVar[int | None] = None

    # -- membership ------------------------------------------------------
    def contains(self, x):
        return _scalar(self._contains(as_points(x)))

    def _require_inside(self, x):
        inside = np.asarray(self._contains(x))
        if not np.all(inside):
            raise OutsideDomainError(f"point outside the open {self.name} domain")

    def _require_band(self, x, dist):
        d0 = getattr(self, "d0", None)
        if d0 is not None and np.any(np.asarray(dist) > d0):
            raise OutsideBandError(f"point at boundary distance > d0 = {d0:g}")

    # -- kernels ---------------------------------------------------------
    def green(self, x, y):
        x, y = as_points(x), as_points(y)
        self._require_inside(x)
        self._require_inside(y)
        check_distinct(x, y)
        return _scalar(self._green(x, y))

    def grad_green_x(self, x, y) -> np.ndarray:
        """Gradient of ``green`` in its first argument."""
        x, y = as_points(x), as_points(y)
        self._require_inside(x)
        self._require_inside(y)
        check_distinct(x, y)
        return self._grad_green(x, y)

    def symmetrized_green_gradient(self, x, y) -> np.ndarray:
        """grad_x G(x, y) + grad_x G(y, x)."""
        x, y = as_points(x), as_points(y)
        self._require_inside(x)
        self._require_inside(y)
        check_distinct(x, y)
        return self._grad_green(x, y) + self._grad_green(y, x)

    def robin(self, x):
        x = as_points(x)
        self._require_inside(x)
        return _scalar(self._robin(x))

    def grad_robin(self, x) -> np.ndarray:
        x = as_points(x)
        self._require_inside(x)
        return self._grad_robin(x)

    # -- boundary geometry -------------------------------------------------
    def boundary_distance(self, x):
        x = as_points(x)
        self._require_inside(x)
        return _scalar(self._dist(x))

    def boundary_projection(self, x, check_band: bool = True) -> np.ndarray:
        x = as_points(x)
        self._require_inside(x)
        proj, dist = self._project(x)
        if check_band:
            self._require_band(x, dist)
        return proj

    def dist_gradient(self, x, check_band: bool = True) -> np.ndarray:
        """Unit vector (x - P(x)) / |x - P(x)|, i.e. minus the outward normal at P(x)."""
        x = as_points(x)
        self._require_inside(x)
        proj, dist = self._project(x)
        if check_band:
            self._require_band(x, dist)
        return (x - proj) / np.asarray(dist)[..., None]

    def boundary_normal(self, x, check_band: bool = True) -> np.ndarray:
        return -self.dist_gradient(x, check_band)

    def tangent_at_projection(self, x, check_band: bool = True) -> np.ndarray:
        """tau(P(x)) = n(P(x))^perp = -(grad dist(x))^perp; counter-clockwise on the disk."""
        return -perp(self.dist_gradient(x, check_band))

    def curvature_lambda(self, x, check_band: bool = True):
        """(Hess dist . grad-perp dist) . grad-perp dist, the only nonzero Hessian entry."""
        x = as_points(x)
        self._require_inside(x)
        dist = self._dist(x)
        if check_band:
            self._require_band(x, dist)
        return _scalar(self._lambda(x))

    # -- N-body reference evaluation (numpy, no compensated sums) ----------
    def velocities(self, positions, intensities) -> np.ndarray:
        """Reference velocity field; the fast path lives in ``pointvortex.kernels``."""
        pos = as_points(positions)
        a = np.asarray(intensities, dtype=float)
        n = len(a)
        self._require_inside(pos)
        vel = np.zeros((n, 2))
        if n > 1:
            ii, jj = np.nonzero(~np.eye(n, dtype=bool))
            check_distinct(pos[ii], pos[jj])
            g = perp(self._grad_green(pos[ii], pos[jj])) * a[jj][:, None]
            np.add.at(vel, ii, g)
        if self.has_robin:
            vel += 0.5 * a[:, None] * perp(self._grad_robin(pos))
        return vel

    def hamiltonian(self, positions, intensities) -> float:
        pos = as_points(positions)
        a = np.asarray(intensities, dtype=float)
        n = len(a)
        self._require_inside(pos)
        h = 0.0
        if n > 1:
            ii, jj = np.nonzero(~np.eye(n, dtype=bool))
            check_distinct(pos[ii], pos[jj])
            h += 0.5 * float(np.sum(a[ii] * a[jj] * self._green(pos[ii], pos[jj])))
        if self.has_robin:
            h += 0.5 * float(np.sum(a**2 * self._robin(pos)))
        return h

    has_robin: ClassVar[bool] = True

    def describe(self) -> dict:
        return {"type": self.name}


@dataclass(frozen=True)
class Plane(Domain):
    name: ClassVar[str] = "plane"
    kernel_code: ClassVar[int | None] = 0
    has_robin: ClassVar[bool] = False

    def _contains(self, x):
        return np.ones(x.shape[:-1], dtype=bool)

    def _green(self, x, y):
        return np.log(_sq(x - y)) / FOUR_PI

    def _grad_green(self, x, y):
        d = x - y
        return d / (TWO_PI * _sq(d))[..., None]

    def _robin(self, x):
        raise UnsupportedDomainError("the plane has no Robin function")

    _grad_robin = _robin

    def _dist(self, x):
        return np.full(x.shape[:-1], np.inf)

    def _project(self, x):
        raise UnsupportedDomainError("the plane has no boundary")

    def _lambda(self, x):
        raise UnsupportedDomainError("the plane has no boundary")

    def _require_band(self, x, dist):
        raise UnsupportedDomainError("the plane has no boundary")


@dataclass(frozen=True)
class HalfPlane(Domain):
    """{x : x2 > 0}."""

    d0: float = DEFAULT_D0
    name: ClassVar[str] = "half-plane"
    kernel_code: ClassVar[int | None] = 1

    def __post_init__(self):
        if not (self.d0 > 0):
            raise GeometryError("d0 must be positive")

    def _contains(self, x):
        return x[..., 1] > 0

    def _green(self, x, y):
        d = x - y
        # |x - conj y|^2 = |x - y|^2 + 4 x2 y2
        return -np.log1p(4.0 * x[..., 1] * y[..., 1] / _sq(d)) / FOUR_PI

    def _grad_green(self, x, y):
        d = x - y
        img = np.stack([d[..., 0], x[..., 1] + y[..., 1]], axis=-1)
        return (d / _sq(d)[..., None] - img / _sq(img)[..., None]) / TWO_PI

    def _robin(self, x):
        return -np.log(2.0 * x[..., 1]) / TWO_PI

    def _grad_robin(self, x):
        g = np.zeros_like(x)
        g[..., 1] = -1.0 / (TWO_PI * x[..., 1])
        return g

    def _dist(self, x):
        return x[..., 1].copy()

    def _project(self, x):
        p = x.copy()
        p[..., 1] = 0.0
        return p, x[..., 1].copy()

    def _lambda(self, x):
        return np.zeros(x.shape[:-1])

    def _require_band(self, x, dist):
        # flat boundary: the projection is single-valued on the whole domain
        pass

    def describe(self):
        return {"type": self.name, "d0": self.d0}


@dataclass(frozen=True)
class UnitDisk(Domain):
    d0: float = DEFAULT_D0
    name: ClassVar[str] = "unit-disk"
    kernel_code: ClassVar[int | None] = 2

    def __post_init__(self):
        if not (0 < self.d0 < 1):
            raise GeometryError("d0 must lie in (0, 1)")

    def _contains(self, x):
        return _sq(x) < 1.0

    def _green(self, x, y):
        return _disk_green(x, y)

    def _grad_green(self, x, y):
        return _disk_grad_green(x, y)

    def _robin(self, x):
        return _disk_robin(x)

    def _grad_robin(self, x):
        return _disk_grad_robin(x)

    def _dist(self, x):
        return 1.0 - np.sqrt(_sq(x))

    def _project(self, x):
        r = np.sqrt(_sq(x))
        if np.any(r == 0.0):
            raise GeometryError("boundary projection is not unique at the disk center")
        return x / r[..., None], 1.0 - r

    def _lambda(self, x):
        return -1.0 / np.sqrt(_sq(x))

    def describe(self):
        return {"type": self.name, "d0": self.d0}


def _horner(coeffs, z):
    out = np.zeros_like(z, dtype=complex)
    for c in coeffs[::-1]:
        out = out * z + c
    return out


def _to_complex(x):
    return x[..., 0] + 1j * x[..., 1]


def _to_vec(z):
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-1)


def _winding(values):
    ang = np.unwrap(np.angle(np.append(values, values[0])))
    return int(round((ang[-1] - ang[0]) / TWO_PI))


def _segments_intersect(pts):
    """True if the closed polygon ``pts`` (complex, M vertices) self-intersects."""
    p = pts
    q = np.roll(pts, -1)
    m = len(p)

    def orient(a, b, c):
        return np.sign(((b - a).conjugate() * (c - a)).imag)

    for i in range(m):
        j = np.arange(i + 2, m)
        if i == 0:
            j = j[j != m - 1]  # adjacent through wrap-around
        if len(j) == 0:
            continue
        o1 = orient(p[i], q[i], p[j])
        o2 = orient(p[i], q[i], q[j])
        o3 = orient(p[j], q[j], p[i])
        o4 = orient(p[j], q[j], q[i])
        if np.any((o1 * o2 < 0) & (o3 * o4 < 0)):
            return True
    return False


@dataclass(frozen=True)
class ConformalDisk(Domain):
    """Image of the unit disk under the polynomial ``f(z) = sum_k c_k z^k``.

    The inverse map is computed by Newton iteration, warm-started from the
    previous query of the same shape in the calling thread.  ``d0`` defaults to
    half the smallest sampled radius of curvature of the boundary.
    """

    coefficients: tuple = (0j, 1 + 0j)
    d0: float | None = None
    newton_tol: float = 1e-13
    newton_max_iter: int = 50
    name: ClassVar[str] = "conformal-disk"
    kernel_code: ClassVar[int | None] = None
    _boundary_samples: ClassVar[int] = 1024
    _state: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coefficients)
        if len(coeffs) < 2 or all(c == 0 for c in coeffs[1:]):
            raise InvalidMapError("map needs at least one nonzero coefficient of positive degree")
        object.__setattr__(self, "coefficients", coeffs)
        c = np.array(coeffs)
        dc = c[1:] * np.arange(1, len(c))
        ddc = dc[1:] * np.arange(1, len(dc)) if len(dc) > 1 else np.zeros(1, complex)
        m = self._boundary_samples
        theta = np.linspace(0.0, TWO_PI, m, endpoint=False)
        zeta = np.exp(1j * theta)
        b = _horner(c, zeta)
        fp = _horner(dc, zeta)
        fpp = _horner(ddc, zeta)
        scale = float(np.max(np.abs(b - b.mean())))
        if np.min(np.abs(fp)) <= 1e-8 * max(scale, 1.0):
            raise InvalidMapError("f' vanishes on the unit circle")
        if _winding(fp) != 0:
            raise InvalidMapError("f' has zeros inside the unit disk")
        if _winding(b - b.mean()) != 1 or _segments_intersect(b[::2]):
            raise InvalidMapError("boundary image is not a simple positively oriented curve")
        kappa = (1.0 + (zeta * fpp / fp).real) / np.abs(fp)
        if self.d0 is None:
            object.__setattr__(self, "d0", float(0.5 / np.max(kappa)))
        elif not self.d0 > 0:
            raise InvalidMapError("d0 must be positive")

        # seed grid for the inverse map
        rr, tt = np.meshgrid(np.linspace(0.0, 0.995, 48), np.linspace(0.0, TWO_PI, 192, endpoint=False))
        zg = (rr * np.exp(1j * tt)).ravel()
        fg = _horner(c, zg)
        state = {
            "c": c, "dc": dc, "ddc": ddc,
            "theta": theta, "b": b, "tree_b": cKDTree(_to_vec(b)),
            "zgrid": zg, "tree_f": cKDTree(_to_vec(fg)),
            "local": threading.local(),
            "scale": scale,
        }
        object.__setattr__(self, "_state", state)
        self._validate_band()

    def __reduce__(self):
        return (ConformalDisk, (self.coefficients, self.d0, self.newton_tol, self.newton_max_iter))

    def describe(self):
        return {
            "type": self.name,
            "coefficients": [[c.real, c.imag] for c in self.coefficients],
            "d0": self.d0,
            "newton_tol": self.newton_tol,
            "newton_max_iter": self.newton_max_iter,
        }

    # -- map evaluation ----------------------------------------------------
    def f(self, z):
        return _horner(self._state["c"], np.asarray(z, dtype=complex))

    def fprime(self, z):
        return _horner(self._state["dc"], np.asarray(z, dtype=complex))

    def fsecond(self, z):
        return _horner(self._state["ddc"], np.asarray(z, dtype=complex))

    def _newton(self, w, z):
        tol, maxit = self.newton_tol, self.newton_max_iter
        converged = np.zeros(w.shape, dtype=bool)
        with np.errstate(all="ignore"):
            for _ in range(maxit):
                step = (self.f(z) - w) / self.fprime(z)
                z = z - step
                converged = np.abs(step) <= tol
                if np.all(converged | ~np.isfinite(z)):
                    break
        z = np.asarray(z, dtype=complex)
        ok = np.asarray(converged & np.isfinite(z) & (np.abs(z) < 1.0))
        return z, ok

    def _try_inverse(self, w):
        """Return (z, ok) with f(z) = w and |z| < 1 where ok."""
        w = np.asarray(w, dtype=complex)
        local = self._state["local"]
        prev = getattr(local, "last", None)
        if prev is not None and prev.shape == w.shape:
            z, ok = self._newton(w, prev.copy())
        else:
            z, ok = np.zeros(w.shape, complex), np.zeros(w.shape, dtype=bool)
        if not np.all(ok):
            bad = ~ok
            _, idx = self._state["tree_f"].query(_to_vec(w[bad]))
            z_b, ok_b = self._newton(w[bad], self._state["zgrid"][idx])
            z[bad], ok[bad] = z_b, ok_b
        if np.all(ok):
            local.last = z.copy()
        return z, ok

    def inverse(self, x):
        """Preimage z in the unit disk (complex) of the point(s) x."""
        z, ok = self._try_inverse(_to_complex(as_points(x)))
        if not np.all(ok):
            raise OutsideDomainError("point outside the conformal domain")
        return _scalar(z)

    def _contains(self, x):
        _, ok = self._try_inverse(_to_complex(x))
        return ok

    def _require_inside(self, x):
        self._pullback(x)

    def _pullback(self, x):
        z, ok = self._try_inverse(_to_complex(x))
        if not np.all(ok):
            raise OutsideDomainError("point outside the conformal domain")
        return z

    # -- kernels -----------------------------------------------------------
    def _green(self, x, y):
        return _disk_green(_to_vec(self._pullback(x)), _to_vec(self._pullback(y)))

    def _grad_green(self, x, y):
        z, w = self._pullback(x), self._pullback(y)
        g = _to_complex(_disk_grad_green(_to_vec(z), _to_vec(w)))
        return _to_vec(np.conj(1.0 / self.fprime(z)) * g)

    def _robin(self, x):
        z = self._pullback(x)
        return _disk_robin(_to_vec(z)) - np.log(np.abs(self.fprime(z))) / TWO_PI

    def _grad_robin(self, x):
        z = self._pullback(x)
        fp = self.fprime(z)
        g = _to_complex(_disk_grad_robin(_to_vec(z))) - np.conj(self.fsecond(z) / fp) / TWO_PI
        return _to_vec(np.conj(1.0 / fp) * g)

    # -- boundary ----------------------------------------------------------
    def _nearest_theta(self, w):
        """Boundary parameter of the nearest boundary point(s) of complex w."""
        st = self._state
        flat = np.atleast_1d(w).ravel()
        _, idx = st["tree_b"].query(_to_vec(flat))
        dtheta = TWO_PI / self._boundary_samples
        theta0 = st["theta"][idx]
        theta = theta0.copy()
        for _ in range(40):
            zeta = np.exp(1j * theta)
            fp, fpp = self.fprime(zeta), self.fsecond(zeta)
            diff = self.f(zeta) - flat
            b1 = 1j * zeta * fp
            b2 = -zeta * fp - zeta**2 * fpp
            phi = (np.conj(diff) * b1).real
            dphi = np.abs(b1) ** 2 + (np.conj(diff) * b2).real
            step = phi / dphi
            theta = theta - step
            if np.all(np.abs(step) < 1e-15):
                break
        suspect = (np.abs(theta - theta0) > 2 * dtheta) | ~np.isfinite(theta)
        for k in np.nonzero(suspect)[0]:
            res = minimize_scalar(
                lambda t: abs(self.f(np.exp(1j * t)) - flat[k]) ** 2,
                bounds=(theta0[k] - 2 * dtheta, theta0[k] + 2 * dtheta),
                method="bounded",
                options={"xatol": 1e-14},
            )
            theta[k] = res.x
        return theta.reshape(np.shape(w))

    def boundary_point(self, theta):
        return _to_vec(self.f(np.exp(1j * np.asarray(theta, dtype=float))))

    def boundary_curvature(self, theta):
        zeta = np.exp(1j * np.asarray(theta, dtype=float))
        fp = self.fprime(zeta)
        return (1.0 + (zeta * self.fsecond(zeta) / fp).real) / np.abs(fp)

    def boundary_parameter(self, x):
        x = as_points(x)
        self._require_inside(x)
        return _scalar(self._nearest_theta(_to_complex(x)))

    def arc_length(self, theta0, theta1):
        """Signed boundary arc length between parameters (no wrapping)."""
        nodes, weights = np.polynomial.legendre.leggauss(32)
        t0 = np.asarray(theta0, dtype=float)
        t1 = np.asarray(theta1, dtype=float)
        half = 0.5 * (t1 - t0)
        mid = 0.5 * (t1 + t0)
        tt = mid[..., None] + half[..., None] * nodes
        speed = np.abs(self.fprime(np.exp(1j * tt)))
        return _scalar(half * np.sum(weights * speed, axis=-1))

    def _project(self, x):
        w = _to_complex(x)
        theta = self._nearest_theta(w)
        p = self.f(np.exp(1j * theta))
        return _to_vec(p), np.abs(w - p)

    def _dist(self, x):
        return self._project(x)[1]

    def _lambda(self, x):
        w = _to_complex(x)
        theta = self._nearest_theta(w)
        p = self.f(np.exp(1j * theta))
        kappa = self.boundary_curvature(theta)
        return -kappa / (1.0 - kappa * np.abs(w - p))

    def _validate_band(self):
        """Points at depth d0 along inward normals must project back to their foot."""
        st = self._state
        idx = np.arange(0, self._boundary_samples, 8)
        zeta = np.exp(1j * st["theta"][idx])
        fp = self.fprime(zeta)
        normal = zeta * fp / np.abs(fp)
        foot = st["b"][idx]
        for s in (0.5, 1.0):
            pts = foot - s * self.d0 * normal
            _, ok = self._try_inverse(pts)
            if not np.all(ok):
                raise InvalidMapError("d0 band leaves the domain")
            theta = self._nearest_theta(pts)
            back = self.f(np.exp(1j * theta))
            if np.max(np.abs(back - foot)) > 1e-6 * max(st["scale"], 1.0):
                raise InvalidMapError(f"boundary projection is not single-valued at depth d0 = {self.d0:g}")


def domain_from_description(desc: dict) -> Domain:
    kind = desc["type"]
    if kind == "plane":
        return Plane()
    if kind == "half-plane":
        return HalfPlane(d0=desc.get("d0", DEFAULT_D0))
    if kind == "unit-disk":
        return UnitDisk(d0=desc.get("d0", DEFAULT_D0))
    if kind == "conformal-disk":
        coeffs = tuple(complex(re, im) for re, im in desc["coefficients"])
        return ConformalDisk(
            coefficients=coeffs,
            d0=desc.get("d0"),
            newton_tol=desc.get("newton_tol", 1e-13),
            newton_max_iter=desc.get("newton_max_iter", 50),
        )
    raise GeometryError(f"unknown domain type {kind!r}")
