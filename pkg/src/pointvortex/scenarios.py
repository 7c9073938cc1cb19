"""Canned configurations with analytic or brute-force oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .diagnostics import (
    ClusterPartition,
    DiagnosticsSeries,
    cluster_functionals,
    detect_clusters,
    disk_certificate,
    halfplane_certificate,
    lipschitz_and_divergence_monitor,
)
from .dynamics import (
    BOUNDARY_COLLAPSE,
    PAIR_COLLAPSE,
    REACHED_T_END,
    IntegratorSettings,
    TrajectoryRecord,
    VortexConfiguration,
    integrate,
    min_pair_distance,
)
from .errors import UnknownScenarioError
from .geometry import Domain, HalfPlane, Plane, UnitDisk

TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi

# Groebli triangle for intensities (2, 2, -1).  Produced by solve_groebli_triangle()
# (brentq on the zero angular-impulse condition 2 d12^2 = d13^2 + d23^2 with the
# first two vortices pinned at (-1, 0), (1, 0) and the third on x1 = 1); the
# orientation with x3 above the axis is the one that collapses forward in time.
GROEBLI_INTENSITIES = (2.0, 2.0, -1.0)
GROEBLI_POSITIONS = ((-1.0, 0.0), (1.0, 0.0), (1.0, 1.4142135623730956))

NEARWALL_INTENSITIES = (1.0, 1.0, 2.0)


def solve_groebli_triangle(intensities=GROEBLI_INTENSITIES) -> tuple:
    """Third vertex height making sum_{i<j} a_i a_j d_ij^2 vanish (zero angular impulse)."""
    a = np.asarray(intensities, dtype=float)

    def impulse(h):
        p = np.array([(-1.0, 0.0), (1.0, 0.0), (1.0, h)])
        return sum(
            a[i] * a[j] * float(np.sum((p[i] - p[j]) ** 2))
            for i in range(3) for j in range(i + 1, 3)
        )

    h = brentq(impulse, 0.5, 3.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return ((-1.0, 0.0), (1.0, 0.0), (1.0, h))


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    expected: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class Verdict:
    scenario: str
    passed: bool
    checks: tuple
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "passed": self.passed,
            "note": self.note,
            "checks": [
                {"name": c.name, "measured": c.measured, "expected": c.expected,
                 "tolerance": c.tolerance, "passed": c.passed}
                for c in self.checks
            ],
        }


def _close(name, measured, expected, tol):
    measured = float(measured)
    ok = bool(abs(measured - expected) <= tol)
    return Check(name, measured, float(expected), float(tol), ok)


def _at_most(name, measured, bound):
    measured = float(measured)
    return Check(name, measured, 0.0, float(bound), bool(measured <= bound))


def _at_least(name, measured, bound):
    measured = float(measured)
    return Check(name, measured, float(bound), 0.0, bool(measured >= bound))


def _flag(name, ok):
    return Check(name, float(bool(ok)), 1.0, 0.0, bool(ok))


@dataclass(frozen=True)
class Scenario:
    """A named run: domain, initial configuration, settings and an oracle.

    ``oracle`` maps (record, series) to a list of :class:`Check`.
    """

    name: str
    domain: Domain
    config: VortexConfiguration
    settings: IntegratorSettings
    description: str
    oracle: Callable = field(repr=False, compare=False, default=None)
    forcing: tuple | None = None
    watches: tuple = ()
    eta: float = 0.1
    exploratory: bool = False

    def with_settings(self, **kw) -> "Scenario":
        return replace(self, settings=replace(self.settings, **kw))


# -- oracles -----------------------------------------------------------------

def _relative_drift(values):
    v = np.asarray(values, dtype=float)
    return float(np.max(np.abs(v - v[0])) / max(1.0, abs(v[0])))


def _oracle_corotation(rec, series):
    # a = 2 pi each at distance 2: rigid rotation at omega = 0.5 about the origin
    t = rec.times
    x0 = np.array([(-1.0, 0.0), (1.0, 0.0)])
    c, s = np.cos(0.5 * t), np.sin(0.5 * t)
    exact = np.stack([np.stack([x0[:, 0] * ci - x0[:, 1] * si, x0[:, 0] * si + x0[:, 1] * ci], -1) for ci, si in zip(c, s)])
    return [
        _flag("reached t_end", rec.termination.kind == REACHED_T_END),
        _at_most("max position error vs rigid rotation", np.abs(rec.positions - exact).max(), 1e-6),
        _at_most("return to start after t_end", np.abs(rec.positions[-1] - rec.positions[0]).max(), 1e-6),
    ]


def _oracle_pair_translation(rec, series):
    exact = rec.positions[0][None] + np.stack([rec.times, np.zeros_like(rec.times)], -1)[:, None, :]
    return [
        _flag("reached t_end", rec.termination.kind == REACHED_T_END),
        _at_most("max position error vs unit-speed translation", np.abs(rec.positions - exact).max(), 1e-9),
    ]


def _oracle_hp_translate(rec, series):
    a = rec.intensities[0]
    x0 = rec.positions[0, 0]
    rate = a / (FOUR_PI * x0[1])
    exact = np.stack([x0[0] + rate * rec.times, np.full_like(rec.times, x0[1])], -1)
    return [
        _flag("reached t_end", rec.termination.kind == REACHED_T_END),
        _at_most("max position error vs translation", np.abs(rec.positions[:, 0] - exact).max(), 1e-9),
    ]


def _oracle_disk_orbit(rec, series):
    x = rec.positions[:, 0]
    r0 = float(np.hypot(*x[0]))
    omega = rec.intensities[0] / (TWO_PI * (1.0 - r0**2))
    checks = [
        _flag("reached t_end", rec.termination.kind == REACHED_T_END),
        _at_most("radius drift", np.abs(np.hypot(x[:, 0], x[:, 1]) - r0).max(), 1e-9),
    ]
    if len(rec) >= 2 and rec.times[-1] > 0:
        ang = np.unwrap(np.arctan2(x[:, 1], x[:, 0]))
        measured = np.polyfit(rec.times, ang, 1)[0]
        checks.append(_close("angular speed", measured, omega, 1e-8))
        checks.append(_at_most("trapezoidal vs angle arc length", np.abs(series.l - series.l_trap).max(), 1e-6))
    return checks


def toy_exact_x1(t, x2_0=1.0, c=1.0 / FOUR_PI):
    return np.log(x2_0 / (x2_0 - c * np.asarray(t))) / (FOUR_PI * c)


def _oracle_toy(rec, series):
    c = -rec.forcing[1]
    x2_0 = rec.positions[0, 0, 1]
    T = x2_0 / c
    checks = [_flag("boundary collapse", rec.termination.kind == BOUNDARY_COLLAPSE)]
    cross = rec.crossings.get("x2=0.5", ())
    if cross:
        checks.append(_close("x1 at x2 = 0.5", cross[0][1][0, 0], math.log(2.0), 1e-6))
    else:
        checks.append(_flag("x2 = 0.5 crossing found", False))
    checks.append(_close("extrapolated collapse time", rec.t_hat if rec.t_hat is not None else math.nan, T, 1e-4))
    if series.partition.Q:
        rep = lipschitz_and_divergence_monitor(rec, series.partition, series)
        checks.append(_at_least("L vs -log(T - t) correlation", rep.correlation, 0.9999))
        exact = toy_exact_x1(rec.times[:-1], x2_0, c)
        rel = np.abs(series.L_gamma[:-1] - exact) / np.maximum(np.abs(exact), 1.0)
        checks.append(_at_most("L relative error vs closed form", rel.max(), 1e-4))
    return checks


def collapse_exponent(rec: TrajectoryRecord, eps: float | None = None) -> tuple[float, float, int]:
    """Fit log(min pair distance) against log(T_hat - t) over the final decade of distance.

    Uses samples with eps <= d_min <= 10 eps before the pair-collapse event.
    Returns (exponent, correlation, n_points).
    """
    if rec.t_hat is None:
        return math.nan, math.nan, 0
    if eps is None:
        eps = min_pair_distance(rec.positions[-1])[0]
    d = np.array([min_pair_distance(p)[0] for p in rec.positions])
    tau = rec.t_hat - rec.times
    sel = (tau > 0) & (d <= 10.0 * eps * (1 + 1e-9))
    if sel.sum() < 3:
        return math.nan, math.nan, int(sel.sum())
    lx, ly = np.log(tau[sel]), np.log(d[sel])
    p = np.polyfit(lx, ly, 1)[0]
    return float(p), float(np.corrcoef(lx, ly)[0, 1]), int(sel.sum())


def _oracle_groebli(rec, series):
    checks = [_flag("pair collapse", rec.termination.kind == PAIR_COLLAPSE)]
    p, corr, n = collapse_exponent(rec)
    checks.append(_close("min-distance exponent", p, 0.5, 0.02))
    checks.append(_at_least("square-root fit correlation", corr, 0.999))
    return checks


def _oracle_nearwall(rec, series):
    checks = [_flag("no boundary collapse before t_end", rec.termination.kind == REACHED_T_END)]
    checks.append(_at_most("Hamiltonian relative drift", _relative_drift(series.H), 1e-7))
    dom = rec.domain
    if isinstance(dom, HalfPlane):
        checks.append(_at_most("sum a_i x_i.e2 relative drift", _relative_drift(series.M[:, 1]), 1e-8))
        cert = halfplane_certificate(rec, series.partition)
    else:
        checks.append(_at_most("moment of inertia relative drift", _relative_drift(series.I), 1e-8))
        checks.append(_at_most("trapezoidal vs angle arc length", np.nanmax(np.abs(series.l - series.l_trap)), 1e-6))
        cert = disk_certificate(rec, series.partition)
    checks.append(_flag("boundary cluster nonempty", bool(series.partition.Q)))
    checks.append(_at_least("certificate margin", cert.min_margin, -1e-8))
    return checks


def _oracle_exploratory(rec, series):
    # no analytic oracle: only energy bookkeeping while the run stays regular
    if rec.termination.kind == REACHED_T_END:
        return [_at_most("Hamiltonian relative drift", _relative_drift(series.H), 1e-7)]
    return []


# -- registry ----------------------------------------------------------------

def builtin_scenarios() -> list[Scenario]:
    base = IntegratorSettings()
    near = base.with_(t_end=20.0, sample_stride=1e-3)
    return [
        Scenario(
            "pair-corotation", Plane(),
            VortexConfiguration([(-1.0, 0.0), (1.0, 0.0)], [TWO_PI, TWO_PI]),
            base.with_(t_end=4 * math.pi),
            "two equal vortices rotate rigidly with omega = 0.5; full period 4 pi",
            _oracle_corotation,
        ),
        Scenario(
            "pair-translation", Plane(),
            VortexConfiguration([(0.0, 0.5), (0.0, -0.5)], [TWO_PI, -TWO_PI]),
            base.with_(t_end=10.0),
            "opposite pair translates along e1 at unit speed",
            _oracle_pair_translation,
        ),
        Scenario(
            "hp-translate", HalfPlane(),
            VortexConfiguration([(0.0, 1.0)], [FOUR_PI]),
            base.with_(t_end=3.0),
            "single half-plane vortex translates at a / (4 pi x2) = 1",
            _oracle_hp_translate,
        ),
        Scenario(
            "disk-orbit", UnitDisk(),
            VortexConfiguration([(0.5, 0.0)], [1.0]),
            base.with_(t_end=10.0),
            "single disk vortex circles at r = 0.5 with omega = 2 / (3 pi)",
            _oracle_disk_orbit,
        ),
        Scenario(
            "toy-collapse", HalfPlane(),
            VortexConfiguration([(0.0, 1.0)], [1.0]),
            base.with_(t_end=20.0, boundary_collapse_eps=1e-8),
            "unit vortex pushed into the wall by F = -e2 / (4 pi); T = 4 pi, x1 = ln 2 at x2 = 0.5",
            _oracle_toy,
            forcing=(0.0, -1.0 / FOUR_PI),
            watches=("x2=0.5",),
        ),
        Scenario(
            "groebli-collapse", Plane(),
            VortexConfiguration(GROEBLI_POSITIONS, GROEBLI_INTENSITIES),
            base.with_(t_end=30.0, record_steps=True),
            "self-similar three-vortex collision; min distance ~ (T - t)^(1/2)",
            _oracle_groebli,
        ),
        Scenario(
            "hp-nearwall-positive", HalfPlane(),
            VortexConfiguration([(0.0, 0.05), (0.3, 0.08), (0.1, 0.5)], NEARWALL_INTENSITIES),
            near,
            "positive vortices near the wall; exponential floor on M_Q . e2, no boundary collapse",
            _oracle_nearwall,
        ),
        Scenario(
            "disk-nearwall-positive", UnitDisk(),
            VortexConfiguration([(0.95, 0.0), (0.0, 0.92), (-0.5, 0.0)], NEARWALL_INTENSITIES),
            near,
            "positive vortices near the circle; exponential floor on J, no boundary collapse",
            _oracle_nearwall,
        ),
        Scenario(
            "disk-signed-exploratory", UnitDisk(),
            VortexConfiguration([(0.9, 0.0), (0.85, 0.1), (-0.3, 0.2)], (1.0, -0.6, 0.8)),
            base.with_(t_end=10.0),
            "signed intensities near the circle; no oracle (open question), energy bookkeeping only",
            _oracle_exploratory,
            exploratory=True,
        ),
    ]


WATCHES = {
    "x2=0.5": lambda p: p[0, 1] - 0.5,
}


def scenario_names() -> list[str]:
    return [s.name for s in builtin_scenarios()]


def get_scenario(name: str) -> Scenario:
    for s in builtin_scenarios():
        if s.name == name:
            return s
    raise UnknownScenarioError(name, scenario_names())


def run_scenario(s: Scenario) -> tuple[TrajectoryRecord, DiagnosticsSeries, Verdict]:
    rec = integrate(
        s.domain, s.config, s.settings, forcing=s.forcing,
        watches={w: WATCHES[w] for w in s.watches},
    )
    if len(rec) >= 2:
        part = detect_clusters(s.domain, rec, eta=s.eta)
    else:
        part = ClusterPartition((), tuple(range(rec.n)), math.inf)
    series = cluster_functionals(s.domain, rec, part)
    checks = tuple(s.oracle(rec, series)) if s.oracle else ()
    note = "exploratory: no oracle" if s.exploratory else ""
    return rec, series, Verdict(s.name, all(c.passed for c in checks), checks, note)
