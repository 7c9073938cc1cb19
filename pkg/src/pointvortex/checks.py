"""Randomized property checks of the kernel layer.

Each check draws its own samples from a seeded generator and reports the
worst observed value against a tolerance.  The acceptance suite and the
``kernel-check`` CLI command both run these.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ConformalDisk, Domain, HalfPlane, Plane, UnitDisk, perp

TEST_MAP = (0.0, 1.0, 0.2)  # f(z) = z + 0.2 z^2, a smooth convex-ish image of the disk


@dataclass(frozen=True)
class CheckResult:
    name: str
    worst: float
    tolerance: float
    n_samples: int

    @property
    def passed(self) -> bool:
        return bool(self.worst <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: worst {self.worst:.3e} (tol {self.tolerance:.1e}, n={self.n_samples})"


def default_domains() -> dict:
    return {
        "plane": Plane(),
        "half-plane": HalfPlane(),
        "unit-disk": UnitDisk(),
        "conformal-disk": ConformalDisk(coefficients=TEST_MAP),
    }


def sample_points(domain: Domain, n: int, rng: np.random.Generator, min_dist: float = 1e-3) -> np.ndarray:
    """Interior points with boundary distances spread log-uniformly down to ``min_dist``."""
    if isinstance(domain, Plane):
        return rng.uniform(-2.0, 2.0, (n, 2))
    if isinstance(domain, HalfPlane):
        return np.column_stack([rng.uniform(-2.0, 2.0, n), 10 ** rng.uniform(np.log10(min_dist), 0.5, n)])
    r = 1.0 - 10 ** rng.uniform(np.log10(min_dist), 0.0, n)
    th = rng.uniform(0.0, 2 * np.pi, n)
    z = r * np.exp(1j * th)
    if isinstance(domain, ConformalDisk):
        z = domain.f(z)
    return np.column_stack([z.real, z.imag])


def sample_pairs(domain, n, rng, min_sep=1e-3, min_dist=1e-3):
    x = sample_points(domain, n, rng, min_dist)
    y = sample_points(domain, n, rng, min_dist)
    keep = np.hypot(*(x - y).T) > min_sep
    return x[keep], y[keep]


def _norm(v):
    return np.hypot(v[..., 0], v[..., 1])


# -- identities -----------------------------------------------------------------

def green_symmetry(domain, n, rng) -> CheckResult:
    x, y = sample_pairs(domain, n, rng)
    worst = np.max(np.abs(domain.green(x, y) - domain.green(y, x)))
    return CheckResult(f"green symmetry [{domain.name}]", float(worst), 1e-12, len(x))


def boundary_vanishing(domain, n, rng, depth=1e-6) -> CheckResult:
    th = rng.uniform(0.0, 2 * np.pi, n)
    if isinstance(domain, HalfPlane):
        x = np.column_stack([rng.uniform(-3.0, 3.0, n), np.full(n, depth)])
        y = np.array([0.3, 1.0])
    elif isinstance(domain, UnitDisk):
        x = (1.0 - depth) * np.column_stack([np.cos(th), np.sin(th)])
        y = np.array([0.2, 0.1])
    else:
        foot = domain.boundary_point(th)
        zeta = np.exp(1j * th)
        fp = domain.fprime(zeta)
        nrm = zeta * fp / np.abs(fp)
        x = foot - depth * np.column_stack([nrm.real, nrm.imag])
        y = np.array([0.1, 0.05])
    worst = np.max(np.abs(domain.green(x, np.broadcast_to(y, x.shape))))
    return CheckResult(f"boundary vanishing [{domain.name}]", float(worst), 1e-4, n)


def negativity(domain, n, rng) -> CheckResult:
    x, y = sample_pairs(domain, n, rng)
    worst = np.max(domain.green(x, y))
    # reported as max G; passes when strictly negative
    return CheckResult(f"green negativity [{domain.name}] (max G < 0)", float(worst), -np.finfo(float).tiny, len(x))


def disk_robin_cancellation(n, rng) -> CheckResult:
    D = UnitDisk()
    x = sample_points(D, n, rng)
    worst = np.max(np.abs((x * perp(D.grad_robin(x))).sum(-1)))
    return CheckResult("disk x . perp grad robin = 0", float(worst), 1e-12, n)


def disk_pair_cancellation(n, rng) -> CheckResult:
    D = UnitDisk()
    x, y = sample_pairs(D, n, rng)
    s = (x * perp(D.grad_green_x(x, y))).sum(-1) + (y * perp(D.grad_green_x(y, x))).sum(-1)
    return CheckResult("disk pair cancellation", float(np.max(np.abs(s))), 1e-10, len(x))


def disk_pair_bound(n, rng) -> CheckResult:
    """|x . perp grad G(x, y)| - 2 d(x) d(y) / (pi |x - y|^3); worst excess over zero."""
    D = UnitDisk()
    x, y = sample_pairs(D, n, rng)
    lhs = np.abs((x * perp(D.grad_green_x(x, y))).sum(-1))
    rhs = 2.0 * (1.0 - _norm(x)) * (1.0 - _norm(y)) / (np.pi * _norm(x - y) ** 3)
    return CheckResult("disk pair bound", float(np.max(lhs - rhs)), 1e-12, len(x))


def _hp_grad_regular(x, y):
    # gradient in x of the image part -(1/2pi) ln|x - conj(y)|
    yb = y * np.array([1.0, -1.0])
    d = x - yb
    return -d / (2 * np.pi * (d**2).sum(-1))[..., None]


def halfplane_symmetries(n, rng) -> tuple[CheckResult, CheckResult]:
    H = HalfPlane()
    x, y = sample_pairs(H, n, rng)
    r1 = perp(_hp_grad_regular(x, y))[:, 0] - perp(_hp_grad_regular(y, x))[:, 0]
    g = perp(H.grad_green_x(x, y))[:, 1] + perp(H.grad_green_x(y, x))[:, 1]
    return (
        CheckResult("half-plane regular-part e1 symmetry", float(np.max(np.abs(r1))), 1e-12, len(x)),
        CheckResult("half-plane green e2 antisymmetry", float(np.max(np.abs(g))), 1e-12, len(x)),
    )


def kernel_identity_checks(seed: int = 0, n_pairs: int = 100_000, domains: dict | None = None) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    domains = domains or default_domains()
    out = []
    for name, dom in domains.items():
        m = n_pairs if name != "conformal-disk" else n_pairs // 10
        out.append(green_symmetry(dom, m, rng))
        if name != "plane":
            out.append(boundary_vanishing(dom, 1000, rng))
        if name in ("half-plane", "unit-disk"):
            out.append(negativity(dom, n_pairs, rng))
    out.append(disk_robin_cancellation(n_pairs, rng))
    out.append(disk_pair_cancellation(n_pairs, rng))
    out.extend(halfplane_symmetries(n_pairs, rng))
    out.append(disk_pair_bound(n_pairs, rng))
    return out


# -- gradients vs central differences ---------------------------------------------

def _fd_grad(fun, x, h):
    h = np.asarray(h, dtype=float).reshape(-1)
    e1 = np.zeros_like(x)
    e1[:, 0] = h
    e2 = np.zeros_like(x)
    e2[:, 1] = h
    g1 = (fun(x + e1) - fun(x - e1)) / (2 * h)
    g2 = (fun(x + e2) - fun(x - e2)) / (2 * h)
    return np.column_stack([g1, g2])


def _relerr(fd, an):
    return _norm(fd - an) / np.maximum(_norm(an), 1e-300)


def gradient_checks(seed: int = 0, n: int = 10_000, domains: dict | None = None) -> list[CheckResult]:
    """Analytic grad_green_x and grad_robin against central differences, step 1e-6 * local scale."""
    rng = np.random.default_rng(seed)
    domains = domains or default_domains()
    out = []
    for name, dom in domains.items():
        x, y = sample_pairs(dom, n, rng, min_sep=1e-2, min_dist=1e-2)
        local = _norm(x - y)
        if name != "plane":
            local = np.minimum(local, np.asarray(dom.boundary_distance(x)))
        h = 1e-6 * np.minimum(local, 1.0)
        fd = _fd_grad(lambda p: dom.green(p, y), x, h)
        err = _relerr(fd, dom.grad_green_x(x, y))
        out.append(CheckResult(f"grad green vs central differences [{name}]", float(np.max(err)), 1e-6, len(x)))
        if name != "plane":
            hr = 1e-6 * np.minimum(np.asarray(dom.boundary_distance(x)), 1.0)
            fd = _fd_grad(dom.robin, x, hr)
            err = _relerr(fd, dom.grad_robin(x))
            out.append(CheckResult(f"grad robin vs central differences [{name}]", float(np.max(err)), 1e-6, len(x)))
    return out


def run_all(seed: int = 0) -> list[CheckResult]:
    return kernel_identity_checks(seed) + gradient_checks(seed)
