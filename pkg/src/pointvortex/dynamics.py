"""Velocity field assembly and adaptive time integration with collapse events."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Mapping

import numpy as np

from . import kernels
from ._dopri import StepUnderflow, dopri5, locate_crossing
from .errors import (
    CoincidentPointsError,
    OutsideDomainError,
    SettingsError,
    SizeError,
)
from .geometry import COINCIDENCE_RTOL, Domain, HalfPlane, as_points

REACHED_T_END = "ReachedTEnd"
PAIR_COLLAPSE = "PairCollapse"
BOUNDARY_COLLAPSE = "BoundaryCollapse"
STEP_UNDERFLOW = "StepUnderflow"
TERMINATION_KINDS = (REACHED_T_END, PAIR_COLLAPSE, BOUNDARY_COLLAPSE, STEP_UNDERFLOW)

MACHINE_EPS = np.finfo(float).eps


def _frozen_array(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class VortexConfiguration:
    positions: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        pos = as_points(self.positions).reshape(-1, 2)
        a = np.asarray(self.intensities, dtype=float).reshape(-1)
        if len(a) != len(pos):
            raise ValueError(f"{len(pos)} positions but {len(a)} intensities")
        if len(a) == 0:
            raise ValueError("configuration needs at least one vortex")
        if not np.all(np.isfinite(a)):
            raise ValueError("intensities must be finite")
        if np.any(a == 0.0):
            raise ValueError(f"intensity of vortex {int(np.flatnonzero(a == 0.0)[0])} is zero; intensities must be nonzero")
        object.__setattr__(self, "positions", _frozen_array(pos))
        object.__setattr__(self, "intensities", _frozen_array(a))

    @property
    def n(self) -> int:
        return len(self.intensities)

    def validate(self, domain: Domain) -> "VortexConfiguration":
        """Raise if a vortex is outside ``domain`` or two vortices coincide."""
        for i, x in enumerate(self.positions):
            if not domain.contains(x):
                raise OutsideDomainError(f"vortex {i} at {tuple(x)} is outside the {domain.name}", index=i)
        for i, j in itertools.combinations(range(self.n), 2):
            xi, xj = self.positions[i], self.positions[j]
            thr = COINCIDENCE_RTOL * (1.0 + np.hypot(*xi) + np.hypot(*xj))
            if np.hypot(*(xi - xj)) < thr:
                raise CoincidentPointsError(f"vortices {i} and {j} coincide", indices=(i, j))
        return self

    def __eq__(self, other):
        if not isinstance(other, VortexConfiguration):
            return NotImplemented
        return np.array_equal(self.positions, other.positions) and np.array_equal(
            self.intensities, other.intensities
        )

    __hash__ = None


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    initial_step: float = 1e-3
    max_step: float = 0.1
    t_end: float = 10.0
    pair_collapse_eps: float = 1e-6
    boundary_collapse_eps: float = 1e-6
    min_step: float = 1e-14
    sample_stride: float = 0.1
    record_steps: bool = False

    def __post_init__(self):
        for f in fields(self):
            if f.name == "record_steps":
                continue
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise SettingsError(f"{f.name} must be a finite number, got {v!r}")
            if f.name == "t_end":
                if v < 0:
                    raise SettingsError("t_end must be non-negative")
            elif v <= 0:
                raise SettingsError(f"{f.name} must be positive, got {v!r}")
        for name in ("pair_collapse_eps", "boundary_collapse_eps"):
            if getattr(self, name) < 10 * MACHINE_EPS:
                raise SettingsError(f"{name} must be at least 10 machine epsilons")
        if self.initial_step > self.max_step:
            raise SettingsError("initial_step exceeds max_step")

    def with_(self, **kw) -> "IntegratorSettings":
        return replace(self, **kw)


@dataclass(frozen=True)
class Termination:
    kind: str
    t: float
    indices: tuple = ()

    def __str__(self):
        if self.indices:
            return f"{self.kind}{self.indices} at t={self.t!r}"
        return f"{self.kind} at t={self.t!r}"


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Samples ``times[k]``, ``positions[k]`` plus how the run ended.

    ``t_hat`` is the extrapolated collapse time (``None`` unless a collapse
    event fired).  ``crossings`` maps a watch name to ``(t, positions)``
    tuples, in time order.
    """

    times: np.ndarray
    positions: np.ndarray
    intensities: np.ndarray
    termination: Termination
    n_accepted: int = 0
    n_rejected: int = 0
    t_hat: float | None = None
    crossings: Mapping[str, tuple] = field(default_factory=dict)
    domain: Domain | None = None
    forcing: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen_array(self.times))
        object.__setattr__(self, "positions", _frozen_array(self.positions).reshape(len(self.times), -1, 2))
        object.__setattr__(self, "intensities", _frozen_array(self.intensities))

    def __len__(self):
        return len(self.times)

    @property
    def n(self) -> int:
        return len(self.intensities)

    def configuration(self, k: int) -> VortexConfiguration:
        return VortexConfiguration(self.positions[k], self.intensities)

    def __eq__(self, other):
        if not isinstance(other, TrajectoryRecord):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.intensities, other.intensities)
            and self.termination == other.termination
            and self.domain == other.domain
            and self.forcing == other.forcing
            and (self.n_accepted, self.n_rejected, self.t_hat) == (other.n_accepted, other.n_rejected, other.t_hat)
        )

    __hash__ = None


@dataclass(frozen=True)
class ToyModelSpec:
    """One unit vortex in the half-plane pushed by a constant field."""

    forcing: tuple = (0.0, -1.0 / (4.0 * np.pi))
    initial: tuple = (0.0, 1.0)
    intensity: float = 1.0

    def __post_init__(self):
        if not self.initial[1] > 0:
            raise ValueError("toy model starts in the upper half-plane (x2 > 0)")
        if self.intensity == 0:
            raise ValueError("intensity must be nonzero")


def velocity_field(domain: Domain, config: VortexConfiguration, forcing=None) -> np.ndarray:
    """Velocities of all vortices, shape (N, 2); ``forcing`` is a constant drift added to each."""
    code = domain.kernel_code
    if code is not None:
        v = kernels.velocities(code, config.positions, config.intensities)
    else:
        v = domain.velocities(config.positions, config.intensities)
    if forcing is not None:
        v = v + np.asarray(forcing, dtype=float)
    return v


def _rhs(domain: Domain, intensities: np.ndarray, forcing):
    code = domain.kernel_code
    a = np.ascontiguousarray(intensities, dtype=float)
    n = len(a)
    drift = None if forcing is None else np.asarray(forcing, dtype=float)

    if code is not None:
        def f(t, y):
            v = kernels.velocities(code, y.reshape(n, 2), a)
            if drift is not None:
                v += drift
            return v.reshape(-1)
    else:
        def f(t, y):
            v = domain.velocities(y.reshape(n, 2), a)
            if drift is not None:
                v = v + drift
            return v.reshape(-1)
    return f


def min_pair_distance(positions) -> tuple[float, tuple]:
    """Smallest pairwise distance and the (lowest-index) pair attaining it."""
    pos = np.asarray(positions).reshape(-1, 2)
    best, arg = math.inf, ()
    for i in range(len(pos)):
        for j in range(i + 1, len(pos)):
            d = math.hypot(pos[i, 0] - pos[j, 0], pos[i, 1] - pos[j, 1])
            if d < best:
                best, arg = d, (i, j)
    return best, arg


def min_boundary_distance(domain: Domain, positions) -> tuple[float, tuple]:
    pos = np.asarray(positions).reshape(-1, 2)
    if domain.name == "plane":
        return math.inf, ()
    d = np.asarray(domain.boundary_distance(pos), dtype=float).reshape(-1)
    i = int(np.argmin(d))
    return float(d[i]), (i,)


def _extrapolate(t0, m0, te, me, power):
    # metric**power assumed linear in t between the step start and the event
    num = me**power
    den = m0**power - num
    if den <= 0:
        return te
    return te + num * (te - t0) / den


def integrate(
    domain: Domain,
    config: VortexConfiguration,
    settings: IntegratorSettings | None = None,
    forcing=None,
    watches: Mapping[str, Callable[[np.ndarray], float]] | None = None,
) -> TrajectoryRecord:
    """Integrate the vortex system until ``t_end`` or the first collapse event.

    Samples are taken at multiples of ``sample_stride`` (and at ``t_end``).  On
    a collapse event the located event state is appended as the last sample.
    ``watches`` are non-terminal scalar functions of the (N, 2) positions whose
    sign changes are located and stored in ``record.crossings``.
    """
    settings = settings or IntegratorSettings()
    config.validate(domain)
    n = config.n
    a = config.intensities
    f = _rhs(domain, a, forcing)
    watches = dict(watches or {})
    has_boundary = domain.name != "plane"
    pair_eps, bnd_eps = settings.pair_collapse_eps, settings.boundary_collapse_eps

    def pair_metric(y):
        return min_pair_distance(y)[0] if n > 1 else math.inf

    def bnd_metric(y):
        if not has_boundary:
            return math.inf
        try:
            return min_boundary_distance(domain, y)[0]
        except OutsideDomainError:
            return -1.0

    times = [0.0]
    samples = [config.positions.copy()]
    crossings = {name: [] for name in watches}
    stride = settings.sample_stride
    t_end = settings.t_end
    k_next = 1
    stats = {}

    def emit(t, y):
        if t > times[-1]:
            times.append(t)
            samples.append(np.asarray(y).reshape(n, 2).copy())

    y0 = config.positions.reshape(-1).copy()
    termination = None
    t_hat = None
    d_pair, pair_idx = (min_pair_distance(y0) if n > 1 else (math.inf, ()))
    d_bnd, bnd_idx = (min_boundary_distance(domain, y0) if has_boundary else (math.inf, ()))
    if d_pair <= pair_eps:
        termination = Termination(PAIR_COLLAPSE, 0.0, pair_idx)
    elif d_bnd <= bnd_eps:
        termination = Termination(BOUNDARY_COLLAPSE, 0.0, bnd_idx)
    watch_prev = {name: float(g(config.positions)) for name, g in watches.items()}

    if termination is None:
        try:
            for step in dopri5(
                f, 0.0, y0, t_end,
                rtol=settings.rel_tol, atol=settings.abs_tol,
                h0=settings.initial_step, hmax=settings.max_step, hmin=settings.min_step,
                stats=stats,
            ):
                tol = min(1e-10, 1e-8 * (step.t1 - step.t0))
                event = None
                y1 = step.y1
                m_pair = pair_metric(y1)
                m_bnd = bnd_metric(y1)
                candidates = []
                if m_pair <= pair_eps:
                    te = locate_crossing(step, lambda y: pair_metric(y) - pair_eps, tol)
                    candidates.append((te, PAIR_COLLAPSE))
                if m_bnd <= bnd_eps:
                    te = locate_crossing(step, lambda y: bnd_metric(y) - bnd_eps, tol)
                    candidates.append((te, BOUNDARY_COLLAPSE))
                if candidates:
                    event = min(candidates)
                t_stop = event[0] if event else step.t1

                for name, g in watches.items():
                    g1 = float(g(step(t_stop).reshape(n, 2)))
                    g0 = watch_prev[name]
                    if (g0 > 0) != (g1 > 0):
                        sgn = 1.0 if g0 > 0 else -1.0
                        tc = locate_crossing(step, lambda y: sgn * g(y.reshape(n, 2)), tol)
                        crossings[name].append((tc, step(tc).reshape(n, 2)))
                    watch_prev[name] = g1

                while k_next * stride <= t_stop * (1 + 1e-15) and k_next * stride <= t_end:
                    ts = min(k_next * stride, t_stop)
                    emit(ts, step(ts))
                    k_next += 1
                if settings.record_steps and event is None:
                    emit(step.t1, step.y1)

                if event:
                    te, kind = event
                    ye = step(te)
                    emit(te, ye)
                    if kind == PAIR_COLLAPSE:
                        m0, idx = min_pair_distance(step.y0)
                        me, idx = min_pair_distance(ye)
                        t_hat = _extrapolate(step.t0, m0, te, me, 2)
                    else:
                        m0 = bnd_metric(step.y0)
                        me, idx = min_boundary_distance(domain, ye)
                        t_hat = _extrapolate(step.t0, m0, te, me, 1)
                    termination = Termination(kind, te, idx)
                    break
                if step.t1 >= t_end:
                    emit(t_end, step.y1)
        except StepUnderflow as exc:
            termination = Termination(STEP_UNDERFLOW, exc.t)
        if termination is None:
            termination = Termination(REACHED_T_END, t_end)
    return TrajectoryRecord(
        times=np.array(times),
        positions=np.array(samples),
        intensities=a,
        termination=termination,
        n_accepted=stats.get("accepted", 0),
        n_rejected=stats.get("rejected", 0),
        t_hat=t_hat,
        crossings={k: tuple(v) for k, v in crossings.items()},
        domain=domain,
        forcing=None if forcing is None else tuple(float(v) for v in forcing),
    )


def toy_domain() -> HalfPlane:
    return HalfPlane()


def integrate_toy(spec: ToyModelSpec, settings: IntegratorSettings | None = None, watches=None) -> TrajectoryRecord:
    """Single half-plane vortex with constant forcing: dx/dt = a/(4 pi x2) e1 + F."""
    config = VortexConfiguration([spec.initial], [spec.intensity])
    return integrate(toy_domain(), config, settings, forcing=spec.forcing, watches=watches)


def check_non_neutral(intensities) -> bool:
    """True iff no nonempty subset of intensities sums to zero (relative tol 1e-12)."""
    a = [float(v) for v in intensities]
    if len(a) > 20:
        raise SizeError(f"exhaustive subset check limited to N <= 20, got {len(a)}")
    if any(v == 0 for v in a):
        raise ValueError("intensities must be nonzero")
    tol = 1e-12 * sum(abs(v) for v in a)
    # subset sums built incrementally: sums[mask | bit] = sums[mask] + a[k]
    sums = np.zeros(1)
    for v in a:
        new = sums + v
        if np.any(np.abs(new) <= tol):
            return False
        sums = np.concatenate([sums, new])
    return True
