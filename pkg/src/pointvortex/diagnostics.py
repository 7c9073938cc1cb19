"""Invariants, cluster functionals and Gronwall-type certificates over a trajectory."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import (
    BOUNDARY_COLLAPSE,
    TrajectoryRecord,
    VortexConfiguration,
    check_non_neutral,
    min_pair_distance,
    velocity_field,
)
from .errors import (
    EmptyTrajectoryError,
    GeometryError,
    InsufficientSamplesError,
    OutsideBandError,
    SizeError,
    WrongDomainError,
)
from .geometry import ConformalDisk, Domain, HalfPlane, Plane, UnitDisk

DEFAULT_ETA = 0.1
DEFAULT_WINDOW_FRACTION = 0.1
DEGENERATE_GAP = 1e-6
MAX_SUBSET_N = 10
FD_NOISE_FLOOR = 1e-8


def hamiltonian(domain: Domain, config: VortexConfiguration) -> float:
    """Kirchhoff-Routh energy: half the ordered-pair sum of a_i a_j G plus half the Robin self-energies.

    This is the function with a_i dx_i/dt = perp-grad_{x_i} H for the velocity
    field in ``dynamics``, hence conserved along trajectories.
    """
    code = domain.kernel_code
    if code is not None:
        return kernels.hamiltonian(code, config.positions, config.intensities)
    return domain.hamiltonian(config.positions, config.intensities)


def conserved_quantities(config: VortexConfiguration) -> tuple[np.ndarray, float]:
    """Center of vorticity M = sum a_i x_i and moment I = sum a_i |x_i|^2."""
    a, x = config.intensities, config.positions
    m = np.array([math.fsum(a * x[:, 0]), math.fsum(a * x[:, 1])])
    i = math.fsum(a * (x[:, 0] ** 2 + x[:, 1] ** 2))
    return m, i


@dataclass(frozen=True)
class ClusterPartition:
    """Boundary cluster Q, interior cluster P and their measured separation.

    ``delta_hat`` is ``inf`` when either cluster is empty.  The domains here
    have a single boundary component, so ``components == (Q,)``.
    """

    Q: tuple
    P: tuple
    delta_hat: float

    @property
    def components(self) -> tuple:
        return (self.Q,) if self.Q else ()


def _require_domain(traj: TrajectoryRecord, domain: Domain | None = None) -> Domain:
    dom = domain if domain is not None else traj.domain
    if dom is None:
        raise ValueError("trajectory carries no domain; pass one explicitly")
    return dom


def boundary_distances(domain: Domain, positions) -> np.ndarray:
    """d_i for each sample, shape (K, N); +inf on the plane."""
    pos = np.asarray(positions, dtype=float)
    if isinstance(domain, Plane):
        return np.full(pos.shape[:-1], np.inf)
    return np.asarray(domain.boundary_distance(pos.reshape(-1, 2)), dtype=float).reshape(pos.shape[:-1])


def detect_clusters(
    domain: Domain | None,
    trajectory: TrajectoryRecord,
    window: float | None = None,
    eta: float = DEFAULT_ETA,
) -> ClusterPartition:
    """i is in Q iff min of d_i over the trailing ``window`` is <= ``eta``."""
    if len(trajectory) < 2:
        raise EmptyTrajectoryError(f"need at least 2 samples, got {len(trajectory)}")
    if not eta > 0:
        raise ValueError("eta must be positive")
    domain = _require_domain(trajectory, domain)
    t = trajectory.times
    span = t[-1] - t[0]
    if window is None:
        window = DEFAULT_WINDOW_FRACTION * span
    if window < 0 or window > span * (1 + 1e-12):
        raise ValueError(f"window {window!r} must lie in [0, span={span!r}]")
    d = boundary_distances(domain, trajectory.positions)
    tail = t >= t[-1] - window
    dmin = d[tail].min(axis=0)
    Q = tuple(int(i) for i in np.flatnonzero(dmin <= eta))
    P = tuple(i for i in range(trajectory.n) if i not in Q)
    delta = math.inf
    if Q and P:
        xq = trajectory.positions[:, Q, None, :]
        xp = trajectory.positions[:, None, P, :]
        delta = float(np.sqrt(((xq - xp) ** 2).sum(-1)).min())
    return ClusterPartition(Q, P, delta)


@dataclass(frozen=True, eq=False)
class DiagnosticsSeries:
    """Per-sample diagnostics; arrays have the sample axis first.

    ``l`` is the signed arc length travelled by each projection P(x_i) along
    the boundary, measured geometrically; ``l_trap`` is the trapezoidal
    integral of its rate (1 - d Lambda) v . tau.  ``J`` is NaN off the disk.
    """

    t: np.ndarray
    H: np.ndarray
    M: np.ndarray
    I: np.ndarray
    min_pair_dist: np.ndarray
    min_boundary_dist: np.ndarray
    d: np.ndarray
    M_Q: np.ndarray
    I_Q: np.ndarray
    D_gamma: np.ndarray
    l: np.ndarray
    l_trap: np.ndarray
    l_rate: np.ndarray
    L_gamma: np.ndarray
    J: np.ndarray
    cluster_a: float
    cluster_A: float
    partition: ClusterPartition
    subset_centers: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)


def _unwound_angle(x):
    return np.unwrap(np.arctan2(x[:, 1], x[:, 0]))


def _projection_arc_length(domain: Domain, x: np.ndarray) -> np.ndarray:
    """Signed boundary arc length from P(x(t0)) to P(x(t)) for one vortex track (K, 2)."""
    if isinstance(domain, HalfPlane):
        return x[:, 0] - x[0, 0]
    if isinstance(domain, UnitDisk):
        ang = _unwound_angle(x)
        return ang - ang[0]
    if isinstance(domain, ConformalDisk):
        theta = np.unwrap(np.array([domain.boundary_parameter(p) for p in x]))
        out = np.empty(len(theta))
        out[0] = 0.0
        for k in range(1, len(theta)):
            out[k] = out[k - 1] + domain.arc_length(theta[k - 1], theta[k])
        return out
    return np.full(len(x), np.nan)


def _projection_rates(domain: Domain, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(1 - d Lambda)(v . tau) for one vortex track; the speed of P(x(t)) along the boundary."""
    tau = domain.tangent_at_projection(x, check_band=False)
    dist = np.asarray(domain.boundary_distance(x), dtype=float)
    lam = np.asarray(domain.curvature_lambda(x, check_band=False), dtype=float)
    return (1.0 - dist * lam) * (v * tau).sum(-1)


def _cumtrapz(y, t):
    """Cumulative trapezoid with the Euler-Maclaurin end correction on each interval.

    The correction -h^2/12 (y'(t_{k+1}) - y'(t_k)) telescopes on a uniform grid
    and lifts the rule from O(h^2) to O(h^4); y' comes from second-order
    differences on the sample grid.
    """
    out = np.zeros_like(y)
    if len(t) < 2:
        return out
    h = np.diff(t)[:, None]
    inc = 0.5 * (y[1:] + y[:-1]) * h
    if len(t) >= 3:
        dy = np.gradient(y, t, axis=0, edge_order=2)
        inc -= h**2 / 12.0 * (dy[1:] - dy[:-1])
    out[1:] = np.cumsum(inc, axis=0)
    return out


def subset_centers(d: np.ndarray, intensities) -> dict:
    """B_P = sum_P a_i d_i / sum_P a_i for every nonempty subset with nonzero sum."""
    a = np.asarray(intensities, dtype=float)
    n = len(a)
    if n > MAX_SUBSET_N:
        raise SizeError(f"subset enumeration limited to N <= {MAX_SUBSET_N}, got {n}")
    scale = np.abs(a).sum()
    out = {}
    for r in range(1, n + 1):
        for sub in itertools.combinations(range(n), r):
            s = a[list(sub)].sum()
            if abs(s) <= 1e-12 * scale:
                continue
            out[sub] = (d[:, list(sub)] * a[list(sub)]).sum(1) / s
    return out


def cluster_functionals(
    domain: Domain | None,
    trajectory: TrajectoryRecord,
    partition: ClusterPartition,
) -> DiagnosticsSeries:
    domain = _require_domain(trajectory, domain)
    a = trajectory.intensities
    pos = trajectory.positions
    K, n = pos.shape[:2]
    Q = list(partition.Q)

    H = np.empty(K)
    M = np.empty((K, 2))
    I = np.empty(K)
    vel = np.empty((K, n, 2))
    pair = np.empty(K)
    for k in range(K):
        cfg = VortexConfiguration(pos[k], a)
        H[k] = hamiltonian(domain, cfg)
        M[k], I[k] = conserved_quantities(cfg)
        vel[k] = velocity_field(domain, cfg, trajectory.forcing)
        pair[k] = min_pair_distance(pos[k])[0] if n > 1 else np.inf
    d = boundary_distances(domain, pos)

    l = np.full((K, n), np.nan)
    rate = np.full((K, n), np.nan)
    if not isinstance(domain, Plane):
        for i in range(n):
            try:
                if isinstance(domain, ConformalDisk) and np.any(d[:, i] > domain.d0):
                    raise OutsideBandError(f"vortex {i} leaves the projection band (d0 = {domain.d0:g})")
                l[:, i] = _projection_arc_length(domain, pos[:, i])
                rate[:, i] = _projection_rates(domain, pos[:, i], vel[:, i])
            except GeometryError:
                if i in Q:
                    raise
    l_trap = _cumtrapz(rate, trajectory.times)

    aQ = a[Q]
    xQ = pos[:, Q]
    M_Q = (aQ[None, :, None] * xQ).sum(1) if Q else np.zeros((K, 2))
    I_Q = (aQ * (xQ**2).sum(-1)).sum(1) if Q else np.zeros(K)
    D = (aQ * d[:, Q]).sum(1) if Q else np.zeros(K)
    L = (aQ * l[:, Q]).sum(1) if Q else np.zeros(K)
    if isinstance(domain, UnitDisk):
        J = (aQ * d[:, Q] * (2.0 - d[:, Q])).sum(1) if Q else np.zeros(K)
    else:
        J = np.full(K, np.nan)
    centers = subset_centers(d, a) if n <= MAX_SUBSET_N and not isinstance(domain, Plane) else {}
    return DiagnosticsSeries(
        t=trajectory.times.copy(),
        H=H,
        M=M,
        I=I,
        min_pair_dist=pair,
        min_boundary_dist=d.min(axis=1),
        d=d,
        M_Q=M_Q,
        I_Q=I_Q,
        D_gamma=D,
        l=l,
        l_trap=l_trap,
        l_rate=rate,
        L_gamma=L,
        J=J,
        cluster_a=float(np.abs(aQ).sum()),
        cluster_A=float(abs(aQ.sum())),
        partition=partition,
        subset_centers=centers,
    )


# -- certificates -----------------------------------------------------------

@dataclass(frozen=True)
class CertificateSeries:
    """Measured functional, its exponential floor value(0) e^{-C t}, and the margin."""

    t: np.ndarray
    value: np.ndarray
    floor: np.ndarray
    margin: np.ndarray
    rate: float

    def __len__(self):
        return len(self.t)

    @property
    def min_margin(self) -> float:
        return float(self.margin.min()) if len(self.margin) else math.inf


def _empty_certificate():
    e = np.zeros(0)
    return CertificateSeries(e, e, e, e, 0.0)


def _check_domain(trajectory, cls, label):
    if trajectory.domain is not None and not isinstance(trajectory.domain, cls):
        raise WrongDomainError(f"{label} certificate needs a {cls.name} trajectory, got {trajectory.domain.name}")


def halfplane_rate(partition: ClusterPartition, intensities) -> float:
    """(2 / (pi delta^2)) (N - |Q|) max_{j not in Q} |a_j|; zero when P is empty."""
    a = np.asarray(intensities, dtype=float)
    if not partition.P:
        return 0.0
    return 2.0 / (np.pi * partition.delta_hat**2) * len(partition.P) * float(np.abs(a[list(partition.P)]).max())


def disk_rate(partition: ClusterPartition, intensities) -> float:
    """(4 / (pi delta^3)) sum_{j not in Q} |a_j|; zero when P is empty."""
    a = np.asarray(intensities, dtype=float)
    if not partition.P:
        return 0.0
    return 4.0 / (np.pi * partition.delta_hat**3) * float(np.abs(a[list(partition.P)]).sum())


def halfplane_certificate(trajectory: TrajectoryRecord, partition: ClusterPartition, intensities=None) -> CertificateSeries:
    """Compare M_Q . e2 with its floor M_Q(0) . e2 exp(-C t)."""
    _check_domain(trajectory, HalfPlane, "half-plane")
    if not partition.Q:
        return _empty_certificate()
    a = trajectory.intensities if intensities is None else np.asarray(intensities, dtype=float)
    Q = list(partition.Q)
    t = trajectory.times
    value = (a[Q] * trajectory.positions[:, Q, 1]).sum(1)
    c = halfplane_rate(partition, a)
    floor = value[0] * np.exp(-c * (t - t[0]))
    return CertificateSeries(t.copy(), value, floor, value - floor, c)


def disk_certificate(trajectory: TrajectoryRecord, partition: ClusterPartition, intensities=None) -> CertificateSeries:
    """Compare J = sum_Q a_i d_i (2 - d_i) with its floor J(0) exp(-C t)."""
    _check_domain(trajectory, UnitDisk, "unit-disk")
    if not partition.Q:
        return _empty_certificate()
    a = trajectory.intensities if intensities is None else np.asarray(intensities, dtype=float)
    Q = list(partition.Q)
    t = trajectory.times
    r2 = (trajectory.positions[:, Q] ** 2).sum(-1)
    value = (a[Q] * (1.0 - r2)).sum(1)  # d (2 - d) == 1 - |x|^2
    c = disk_rate(partition, a)
    floor = value[0] * np.exp(-c * (t - t[0]))
    return CertificateSeries(t.copy(), value, floor, value - floor, c)


# -- subset-center drift monitor ---------------------------------------------

def fit_kernel_constant(domain: Domain, n_samples: int = 20000, seed: int = 0) -> float:
    """Empirical sup of |grad_x G(x, y)| |x - y| over random interior pairs."""
    rng = np.random.default_rng(seed)
    x, y = _random_pairs(domain, n_samples, rng)
    g = domain.grad_green_x(x, y)
    return float((np.hypot(g[:, 0], g[:, 1]) * np.hypot(*(x - y).T)).max())


def _random_pairs(domain, n, rng):
    if isinstance(domain, HalfPlane):
        # heights log-uniform so pairs hug the wall as well as the interior
        def draw(m):
            return np.column_stack([rng.uniform(-2, 2, m), 10 ** rng.uniform(-4, 0.5, m)])
    elif isinstance(domain, Plane):
        def draw(m):
            return rng.uniform(-2, 2, (m, 2))
    else:
        def draw(m):
            r = 1 - 10 ** rng.uniform(-4, 0, m)
            th = rng.uniform(0, 2 * np.pi, m)
            pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
            if isinstance(domain, ConformalDisk):
                z = pts[:, 0] + 1j * pts[:, 1]
                w = domain.f(z)
                pts = np.column_stack([w.real, w.imag])
            return pts
    x, y = draw(n), draw(n)
    keep = np.hypot(*(x - y).T) > 1e-9
    return x[keep], y[keep]


@dataclass(frozen=True)
class AppendixAReport:
    subsets: tuple
    drift: dict
    bound: dict
    margin: dict
    degenerate: dict
    skipped: tuple
    C0: float
    C2: float
    kernel_constant: float

    @property
    def min_margin(self) -> float:
        vals = [m[np.isfinite(m)].min() for m in self.margin.values() if np.any(np.isfinite(m))]
        return float(min(vals)) if vals else math.inf

    @property
    def n_degenerate(self) -> int:
        return int(sum(v.sum() for v in self.degenerate.values()))


def _derivative(y, t):
    """Central differences on the sample grid, one-sided at the ends."""
    return np.gradient(y, t, edge_order=1)


def appendix_a_monitor(
    trajectory: TrajectoryRecord,
    intensities=None,
    kernel_constant: float | None = None,
    C2: float = FD_NOISE_FLOOR,
) -> AppendixAReport:
    """Check |dB_P/dt| <= sum_{i in P, j not in P} C0 / |d_i - d_j| + C2 for every subset P.

    Half-plane only, with d_i = x_i . e2.  C0 = C_k max|a|^2 / min_P |sum_P a|
    where C_k is the fitted kernel constant sup |grad G| |x - y|.  The default
    C2 is a noise floor for finite differences of the (exactly conserved)
    full-set center.  Samples where some |d_i - d_j| < 1e-6 are flagged as
    degenerate and excluded from the margin.
    """
    a = trajectory.intensities if intensities is None else np.asarray(intensities, dtype=float)
    n = len(a)
    if n > MAX_SUBSET_N:
        raise SizeError(f"subset enumeration limited to N <= {MAX_SUBSET_N}, got {n}")
    if len(trajectory) < 3:
        raise InsufficientSamplesError("need at least 3 samples for finite differences")
    domain = _require_domain(trajectory)
    if not isinstance(domain, HalfPlane):
        raise WrongDomainError(f"subset-center monitor needs a half-plane trajectory, got {domain.name}")
    if kernel_constant is None:
        kernel_constant = fit_kernel_constant(domain)
    t = trajectory.times
    d = boundary_distances(domain, trajectory.positions)
    centers = subset_centers(d, a)
    all_subsets = [s for r in range(1, n + 1) for s in itertools.combinations(range(n), r)]
    skipped = tuple(s for s in all_subsets if s not in centers)
    min_sum = min(abs(a[list(s)].sum()) for s in centers)
    C0 = kernel_constant * float(np.abs(a).max()) ** 2 / min_sum
    drift, bound, margin, degenerate = {}, {}, {}, {}
    for sub, B in centers.items():
        rest = [j for j in range(n) if j not in sub]
        dr = np.abs(_derivative(B, t))
        if rest:
            gaps = np.abs(d[:, list(sub)][:, :, None] - d[:, rest][:, None, :])
            deg = (gaps < DEGENERATE_GAP).any(axis=(1, 2))
            with np.errstate(divide="ignore"):
                b = (C0 / gaps).sum(axis=(1, 2)) + C2
        else:
            deg = np.zeros(len(t), dtype=bool)
            b = np.full(len(t), C2)
        m = b - dr
        m[deg] = np.nan
        drift[sub], bound[sub], margin[sub], degenerate[sub] = dr, b, m, deg
    return AppendixAReport(
        subsets=tuple(centers),
        drift=drift,
        bound=bound,
        margin=margin,
        degenerate=degenerate,
        skipped=skipped,
        C0=C0,
        C2=C2,
        kernel_constant=kernel_constant,
    )


# -- unsigned-intensity criteria -----------------------------------------------

@dataclass(frozen=True)
class AppendixBReport:
    domain: str
    non_neutral: bool
    all_collapse_hypothesis: bool | None
    hypothesis_quantity: float | None
    ratio_max: float | None
    threshold: float | None
    t1: float | None
    excludes_collapse: bool | None
    verdict: str


COLLAPSE_EXCLUDED = "cluster-size criterion excludes boundary collapse on this run"


def appendix_b_checkers(
    domain: Domain,
    config: VortexConfiguration,
    trajectory: TrajectoryRecord | None = None,
    partition: ClusterPartition | None = None,
    t1: float | None = None,
) -> AppendixBReport:
    """Hypotheses that rule out all vortices (or a size-controlled cluster) reaching the wall.

    * half-plane: M(0) . e2 != 0;  disk: I(0) != sum a_i  (whole-system check);
    * ratio rho(t) = max_Q d / min_Q d over [t1, end] against 1 / (1 - A/a),
      with a = sum_Q |a_i|, A = |sum_Q a_i| (threshold +inf when A == a).
    """
    a = config.intensities
    try:
        nn = check_non_neutral(a)
    except SizeError:
        nn = None
    hyp, q = None, None
    M, I = conserved_quantities(config)
    if isinstance(domain, HalfPlane):
        q = float(M[1])
        hyp = q != 0.0
    elif isinstance(domain, UnitDisk):
        q = float(I - math.fsum(a))
        hyp = q != 0.0

    ratio = thr = excl = None
    verdict = "no boundary cluster; ratio criterion not evaluated"
    if trajectory is not None and partition is not None and partition.Q:
        Q = list(partition.Q)
        aq = a[Q]
        small_a = float(np.abs(aq).sum())
        big_a = float(abs(aq.sum()))
        thr = math.inf if big_a >= small_a * (1 - 1e-15) else 1.0 / (1.0 - big_a / small_a)
        t = trajectory.times
        t1 = float(t[0]) if t1 is None else float(t1)
        sel = t >= t1
        dq = boundary_distances(domain, trajectory.positions[sel][:, Q])
        ratio = float((dq.max(1) / dq.min(1)).max())
        excl = ratio < thr
        verdict = COLLAPSE_EXCLUDED if excl else "ratio criterion inconclusive"
    return AppendixBReport(
        domain=domain.name,
        non_neutral=nn,
        all_collapse_hypothesis=hyp,
        hypothesis_quantity=q,
        ratio_max=ratio,
        threshold=thr,
        t1=t1,
        excludes_collapse=excl,
        verdict=verdict,
    )


# -- Lipschitz / divergence monitor --------------------------------------------

@dataclass(frozen=True)
class DivergenceReport:
    max_D_slope: float
    t_hat: float
    t_hat_source: str
    L_slope: float
    L_intercept: float
    correlation: float
    n_fit: int


def estimate_collapse_time(t, D, fraction: float = 0.1) -> float:
    """Zero of the least-squares line through D over the final ``fraction`` of the span."""
    t = np.asarray(t)
    sel = t >= t[-1] - fraction * (t[-1] - t[0])
    if sel.sum() < 2:
        sel = np.zeros(len(t), dtype=bool)
        sel[-2:] = True
    slope, icpt = np.polyfit(t[sel], np.asarray(D)[sel], 1)
    if slope >= 0:
        return math.inf
    return float(-icpt / slope)


def lipschitz_and_divergence_monitor(
    trajectory: TrajectoryRecord,
    partition: ClusterPartition,
    functionals: DiagnosticsSeries,
) -> DivergenceReport:
    """Max |dD/dt| over the samples and a fit of L against -log(T_hat - t)."""
    if len(trajectory) < 3:
        raise InsufficientSamplesError("need at least 3 samples")
    if not partition.Q:
        raise ValueError("boundary cluster is empty")
    t = functionals.t
    D = functionals.D_gamma
    L = functionals.L_gamma
    max_slope = float(np.max(np.abs(np.diff(D) / np.diff(t))))
    if trajectory.t_hat is not None and trajectory.termination.kind == BOUNDARY_COLLAPSE:
        t_hat, src = float(trajectory.t_hat), "event"
    else:
        t_hat, src = estimate_collapse_time(t, D), "fit"
    slope = icpt = corr = math.nan
    n_fit = 0
    if math.isfinite(t_hat):
        sel = t < t_hat
        n_fit = int(sel.sum())
        if n_fit >= 3:
            xlog = -np.log(t_hat - t[sel])
            slope, icpt = np.polyfit(xlog, L[sel], 1)
            if np.ptp(L[sel]) > 0:
                corr = float(np.corrcoef(xlog, L[sel])[0, 1])
    return DivergenceReport(max_slope, t_hat, src, float(slope), float(icpt), corr, n_fit)
