import math

import numpy as np
import pytest

from pointvortex.checks import sample_pairs, sample_points
from pointvortex.errors import (
    CoincidentPointsError,
    InvalidMapError,
    OutsideBandError,
    OutsideDomainError,
    UnsupportedDomainError,
)
from pointvortex.geometry import (
    ConformalDisk,
    HalfPlane,
    Plane,
    UnitDisk,
    domain_from_description,
    perp,
)

TWO_PI = 2 * math.pi


def naive_green_halfplane(x, y):
    yb = (y[0], -y[1])
    return math.log(math.dist(x, y) / math.dist(x, yb)) / TWO_PI


def naive_green_disk(x, y):
    ny2 = y[0] ** 2 + y[1] ** 2
    ys = (y[0] / ny2, y[1] / ny2)
    return math.log(math.dist(x, y) / (math.dist(x, ys) * math.sqrt(ny2))) / TWO_PI


# -- membership -------------------------------------------------------------------

def test_contains_examples():
    assert HalfPlane().contains((0, 1))
    assert not UnitDisk().contains((1, 0))
    assert Plane().contains((1e6, -1e6))
    assert not HalfPlane().contains((0, 0))
    assert not HalfPlane().contains((0, -1))


def test_contains_vectorized():
    got = UnitDisk().contains([[0, 0], [0.999, 0], [1, 0], [2, 0]])
    assert list(got) == [True, True, False, False]


# -- Green and Robin values ---------------------------------------------------------

def test_green_halfplane_value():
    assert HalfPlane().green((0, 1), (0, 3)) == pytest.approx(math.log(0.5) / TWO_PI, rel=1e-14)
    assert HalfPlane().green((0, 1), (0, 3)) == pytest.approx(-0.110318, abs=5e-7)


def test_green_disk_value():
    assert UnitDisk().green((0.5, 0), (-0.5, 0)) == pytest.approx(math.log(1 / 1.25) / TWO_PI, rel=1e-14)
    assert UnitDisk().green((0.5, 0), (-0.5, 0)) == pytest.approx(-0.035514, abs=5e-7)


@pytest.mark.parametrize("r", [0.1, 0.5, 0.9, 0.999])
def test_green_disk_center(r):
    assert UnitDisk().green((0, 0), (r, 0)) == pytest.approx(math.log(r) / TWO_PI, rel=1e-13)


def test_green_plane_value():
    assert Plane().green((3, 4), (0, 0)) == pytest.approx(math.log(5) / TWO_PI, rel=1e-15)


def test_green_matches_naive_closed_forms(rng):
    for _ in range(200):
        x = (rng.uniform(-2, 2), rng.uniform(0.05, 2))
        y = (rng.uniform(-2, 2), rng.uniform(0.05, 2))
        assert HalfPlane().green(x, y) == pytest.approx(naive_green_halfplane(x, y), rel=1e-10, abs=1e-14)
    D = UnitDisk()
    for x, y in zip(*sample_pairs(D, 200, rng, min_dist=0.05)):
        assert D.green(x, y) == pytest.approx(naive_green_disk(x, y), rel=1e-10, abs=1e-14)


def test_grad_green_plane_value():
    g = Plane().grad_green_x((1, 0), (0, 0))
    np.testing.assert_allclose(g, [1 / TWO_PI, 0], atol=1e-15)
    assert g[0] == pytest.approx(0.159155, abs=5e-7)


def test_grad_green_halfplane_fd():
    H = HalfPlane()
    x, y, h = np.array([0.0, 1.0]), np.array([2.0, 1.0]), 1e-6
    fd = [(H.green(x + e, y) - H.green(x - e, y)) / (2 * h) for e in (np.array([h, 0]), np.array([0, h]))]
    np.testing.assert_allclose(H.grad_green_x(x, y), fd, atol=1e-8)


def test_grad_green_path_derivative_disk():
    # d/ds G(x(s), y) along a straight path equals grad . direction
    D = UnitDisk()
    y = np.array([0.1, -0.4])
    x0, v = np.array([0.3, 0.2]), np.array([0.6, 0.8])
    h = 1e-6
    fd = (D.green(x0 + h * v, y) - D.green(x0 - h * v, y)) / (2 * h)
    assert D.grad_green_x(x0, y) @ v == pytest.approx(fd, rel=1e-7)


def test_robin_values():
    assert UnitDisk().robin((0, 0)) == 0.0
    assert UnitDisk().robin((0.5, 0)) == pytest.approx(-math.log(0.75) / TWO_PI, rel=1e-14)
    assert UnitDisk().robin((0.5, 0)) == pytest.approx(0.045786, abs=5e-7)
    assert HalfPlane().robin((0, 1)) == pytest.approx(-math.log(2) / TWO_PI, rel=1e-14)


def test_grad_robin_values():
    np.testing.assert_allclose(UnitDisk().grad_robin((0.5, 0)), [0.5 / (math.pi * 0.75), 0], rtol=1e-14)
    assert UnitDisk().grad_robin((0.5, 0))[0] == pytest.approx(0.212207, abs=5e-7)


def test_grad_robin_halfplane_perp_has_no_normal_part(rng):
    x = sample_points(HalfPlane(), 1000, rng)
    assert np.all(perp(HalfPlane().grad_robin(x))[:, 1] == 0.0)


def test_identity_map_matches_disk(identity_map):
    D = UnitDisk()
    for p in [(0.5, 0.0), (0.1, -0.3), (-0.7, 0.2)]:
        np.testing.assert_allclose(identity_map.grad_robin(p), D.grad_robin(p), atol=1e-12)
        assert identity_map.robin(p) == pytest.approx(D.robin(p), abs=1e-12)
    assert identity_map.green((0.5, 0), (-0.5, 0)) == pytest.approx(D.green((0.5, 0), (-0.5, 0)), abs=1e-12)
    assert identity_map.boundary_distance((0.6, 0)) == pytest.approx(0.4, abs=1e-10)


def test_robin_plane_unsupported():
    with pytest.raises(UnsupportedDomainError):
        Plane().robin((0, 0))
    with pytest.raises(UnsupportedDomainError):
        Plane().grad_robin((0, 0))


def test_coincident_points_error():
    with pytest.raises(CoincidentPointsError):
        UnitDisk().green((0.1, 0.1), (0.1, 0.1))
    with pytest.raises(CoincidentPointsError):
        HalfPlane().grad_green_x((0.1, 0.1), (0.1, 0.1 + 1e-15))


def test_outside_domain_error():
    with pytest.raises(OutsideDomainError):
        HalfPlane().green((0, -1), (0, 1))
    with pytest.raises(OutsideDomainError):
        UnitDisk().robin((1.0, 0.0))


# -- boundary geometry ------------------------------------------------------------

def test_boundary_distance_examples():
    assert HalfPlane().boundary_distance((3, 0.25)) == 0.25
    assert UnitDisk().boundary_distance((0.6, 0)) == pytest.approx(0.4, abs=1e-15)
    assert Plane().boundary_distance((5, 5)) == math.inf


def test_boundary_projection_examples():
    np.testing.assert_allclose(HalfPlane().boundary_projection((7, 0.3)), [7, 0])
    np.testing.assert_allclose(UnitDisk().boundary_projection((0, 0.9)), [0, 1], atol=1e-15)


def test_projection_outside_band():
    with pytest.raises(OutsideBandError):
        UnitDisk().boundary_projection((0.5, 0))
    # a flat boundary projects uniquely at any depth
    np.testing.assert_allclose(HalfPlane().boundary_projection((2, 5.0)), [2, 0])


def test_tangent_examples():
    np.testing.assert_allclose(HalfPlane().tangent_at_projection((0, 0.05)), [1, 0])
    np.testing.assert_allclose(UnitDisk().tangent_at_projection((0.9, 0)), [0, 1], atol=1e-15)


def test_tangent_unit_norm(rng, test_map):
    for dom in (HalfPlane(), UnitDisk(), test_map):
        x = sample_points(dom, 10_000 if dom.name != "conformal-disk" else 1000, rng, min_dist=1e-4)
        x = x[np.asarray(dom.boundary_distance(x)) <= dom.d0]
        t = dom.tangent_at_projection(x)
        np.testing.assert_allclose(np.hypot(t[:, 0], t[:, 1]), 1.0, atol=1e-10)
        n = dom.boundary_normal(x)
        np.testing.assert_allclose((t * n).sum(-1), 0.0, atol=1e-10)


def test_lambda_examples():
    assert HalfPlane().curvature_lambda((0.3, 0.1)) == 0.0
    assert UnitDisk().curvature_lambda((0.8, 0)) == pytest.approx(-1.25, rel=1e-14)


def _fd_hessian(fun, x, h=1e-5):
    H = np.zeros((2, 2))
    e = np.eye(2) * h
    for i in range(2):
        for j in range(2):
            H[i, j] = (fun(x + e[i] + e[j]) - fun(x + e[i] - e[j]) - fun(x - e[i] + e[j]) + fun(x - e[i] - e[j])) / (4 * h * h)
    return H


@pytest.mark.parametrize("dom_name", ["unit-disk", "conformal"])
def test_lambda_against_fd_hessian(dom_name, test_map, rng):
    dom = UnitDisk() if dom_name == "unit-disk" else test_map
    x = sample_points(dom, 200, rng, min_dist=0.02)
    x = x[np.asarray(dom.boundary_distance(x)) <= 0.8 * dom.d0][:30]
    assert len(x) > 5
    for p in x:
        H = _fd_hessian(lambda q: dom.boundary_distance(q), p)
        tp = perp(dom.dist_gradient(p))
        assert dom.curvature_lambda(p) == pytest.approx(tp @ H @ tp, abs=2e-4)


def test_hessian_rank_one(rng):
    D = UnitDisk()
    x = sample_points(D, 1000, rng, min_dist=1e-3)
    x = x[np.asarray(D.boundary_distance(x)) <= D.d0]
    for p in x[:200]:
        # analytic Hessian of 1 - |x| is -(I - u u^T)/|x|
        r = np.linalg.norm(p)
        u = p / r
        H = -(np.eye(2) - np.outer(u, u)) / r
        v = rng.normal(size=2)
        assert abs((H @ D.dist_gradient(p)) @ v) <= 1e-6
        Hfd = _fd_hessian(lambda q: D.boundary_distance(q), p)
        assert abs((Hfd @ D.dist_gradient(p)) @ v) <= 1e-3 * np.linalg.norm(v)


def test_conformal_projection_against_dense_boundary(test_map, rng):
    theta = np.linspace(0, 2 * np.pi, 400_000, endpoint=False)
    b = test_map.boundary_point(theta)
    x = sample_points(test_map, 400, rng, min_dist=1e-3)
    x = x[np.asarray(test_map.boundary_distance(x)) <= test_map.d0]
    p = test_map.boundary_projection(x)
    d = np.asarray(test_map.boundary_distance(x))
    np.testing.assert_allclose(np.hypot(*(x - p).T), d, atol=1e-8)
    for pi, xi, di in zip(p, x, d):
        k = np.argmin(np.hypot(*(b - xi).T))
        step = theta[1]
        fine = np.linspace(theta[k] - 2 * step, theta[k] + 2 * step, 4001)
        dense = np.min(np.hypot(*(test_map.boundary_point(fine) - xi).T))
        assert di == pytest.approx(dense, abs=1e-8)
        assert np.min(np.hypot(*(b - pi).T)) <= 1e-4  # grid spacing bound
        # foot point lies on the curve: its preimage has modulus one
        assert abs(abs(test_map.inverse(pi * (1 - 1e-12))) - 1) < 1e-8


def test_conformal_inverse_roundtrip(test_map, rng):
    z = 0.95 * np.sqrt(rng.uniform(0, 1, 500)) * np.exp(1j * rng.uniform(0, 2 * np.pi, 500))
    w = test_map.f(z)
    np.testing.assert_allclose(test_map.inverse(np.column_stack([w.real, w.imag])), z, atol=1e-12)


def test_conformal_rejects_non_injective():
    with pytest.raises(InvalidMapError):
        ConformalDisk(coefficients=(0, 1, 0.6))  # f' vanishes inside the disk
    with pytest.raises(InvalidMapError):
        ConformalDisk(coefficients=(0, 0, 1))


def test_symmetrized_gradient():
    P = Plane()
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=(50, 2)), rng.normal(size=(50, 2))
    np.testing.assert_allclose(P.symmetrized_green_gradient(x, y), 0.0, atol=1e-15)
    H = HalfPlane()
    x, y = np.array([0, 0.1]), np.array([0.05, 0.12])
    s = H.symmetrized_green_gradient(x, y)
    assert np.all(np.isfinite(s))
    np.testing.assert_allclose(s, H.grad_green_x(x, y) + H.grad_green_x(y, x), atol=1e-12)


def _disk_dekvs_quantity(D, x, y):
    s = D.symmetrized_green_gradient(x, y)
    dx = np.asarray(D.boundary_distance(x))
    dy = np.asarray(D.boundary_distance(y))
    corr = (x - D.boundary_projection(x) + y - D.boundary_projection(y))
    den = math.pi * (np.sum((x - y) ** 2, -1) + 4 * dx * dy)
    return np.hypot(*(s + corr / den[:, None]).T)


def test_disk_symmetrized_gradient_fitted_bound_stable():
    D = UnitDisk()
    fits = []
    for seed in (1, 2):
        rng = np.random.default_rng(seed)
        x, y = sample_pairs(D, 10_000, rng, min_sep=1e-3, min_dist=1e-4)
        band = (np.asarray(D.boundary_distance(x)) <= D.d0) & (np.asarray(D.boundary_distance(y)) <= D.d0)
        q = _disk_dekvs_quantity(D, x[band], y[band])
        assert np.all(np.isfinite(q))
        fits.append(q.max())
    assert fits[0] == pytest.approx(fits[1], rel=0.1)


# -- fitted-constant stability ------------------------------------------------------

@pytest.mark.parametrize("dom", [HalfPlane(), UnitDisk()], ids=lambda d: d.name)
def test_grad_green_times_distance_bounded_and_stable(dom):
    fits = []
    for seed in (10, 11):
        rng = np.random.default_rng(seed)
        x, y = sample_pairs(dom, 100_000, rng)
        g = dom.grad_green_x(x, y)
        fits.append(np.max(np.hypot(*g.T) * np.hypot(*(x - y).T)))
    assert np.isfinite(fits).all()
    assert fits[0] == pytest.approx(fits[1], rel=0.1)


@pytest.mark.parametrize("dom", [HalfPlane(), UnitDisk()], ids=lambda d: d.name)
def test_normal_robin_gradient_bounded_and_stable(dom):
    fits = []
    for seed in (20, 21):
        rng = np.random.default_rng(seed)
        x = sample_points(dom, 40_000, rng, min_dist=1e-4)
        x = x[np.asarray(dom.boundary_distance(x)) <= dom.d0][:10_000]
        q = np.abs((dom.dist_gradient(x) * perp(dom.grad_robin(x))).sum(-1))
        fits.append(q.max())
    assert fits[0] == pytest.approx(fits[1], rel=0.1, abs=1e-12)


@pytest.mark.parametrize("dom_name", ["half-plane", "unit-disk", "conformal"])
def test_robin_blows_up_monotonically(dom_name, test_map):
    dom = {"half-plane": HalfPlane(), "unit-disk": UnitDisk(), "conformal": test_map}[dom_name]
    for theta in np.linspace(0, 2 * np.pi, 7, endpoint=False):
        k = np.arange(3, 21)
        depth = 2.0 ** -k
        if isinstance(dom, HalfPlane):
            x = np.column_stack([np.full_like(depth, math.cos(theta)), depth])
        elif isinstance(dom, UnitDisk):
            x = (1 - depth)[:, None] * [math.cos(theta), math.sin(theta)]
        else:
            zeta = np.exp(1j * theta)
            fp = dom.fprime(zeta)
            nrm = zeta * fp / abs(fp)
            foot = dom.boundary_point(theta)
            x = foot - depth[:, None] * [nrm.real, nrm.imag]
        r = np.asarray(dom.robin(x))
        assert np.all(np.diff(r) > 0)


# -- description round trip ---------------------------------------------------------

@pytest.mark.parametrize("desc", [
    {"type": "plane"},
    {"type": "half-plane", "d0": 0.3},
    {"type": "unit-disk", "d0": 0.1},
])
def test_domain_description_roundtrip(desc):
    d = domain_from_description(desc)
    assert d.describe() == desc
    assert domain_from_description(d.describe()) == d


def test_conformal_description_roundtrip(test_map):
    d = domain_from_description(test_map.describe())
    assert d == test_map
