import math

import numpy as np
import pytest

from pointvortex._dopri import dopri5
from pointvortex.dynamics import (
    BOUNDARY_COLLAPSE,
    PAIR_COLLAPSE,
    REACHED_T_END,
    STEP_UNDERFLOW,
    IntegratorSettings,
    ToyModelSpec,
    VortexConfiguration,
    check_non_neutral,
    integrate,
    integrate_toy,
    min_pair_distance,
    velocity_field,
)
from pointvortex.errors import CoincidentPointsError, OutsideDomainError, SettingsError, SizeError
from pointvortex.geometry import HalfPlane, Plane, UnitDisk
from pointvortex.scenarios import GROEBLI_INTENSITIES, GROEBLI_POSITIONS

FOUR_PI = 4 * math.pi


# -- velocity field -------------------------------------------------------------------

def test_velocity_disk_single():
    v = velocity_field(UnitDisk(), VortexConfiguration([(0.5, 0)], [1.0]))
    np.testing.assert_allclose(v, [[0, 1 / (3 * math.pi)]], atol=1e-16, rtol=1e-14)
    assert v[0, 1] == pytest.approx(0.106103, abs=5e-7)


def test_velocity_halfplane_single():
    v = velocity_field(HalfPlane(), VortexConfiguration([(0, 1)], [FOUR_PI]))
    np.testing.assert_allclose(v, [[1, 0]], rtol=1e-15)


def test_velocity_plane_pair():
    v = velocity_field(Plane(), VortexConfiguration([(1, 0), (-1, 0)], [2 * math.pi] * 2))
    np.testing.assert_allclose(v, [[0, 0.5], [0, -0.5]], atol=1e-16)


def test_velocity_order_independent(rng):
    x = rng.uniform(-1, 1, (7, 2))
    a = rng.uniform(0.5, 2, 7)
    perm = rng.permutation(7)
    v = velocity_field(Plane(), VortexConfiguration(x, a))
    vp = velocity_field(Plane(), VortexConfiguration(x[perm], a[perm]))
    np.testing.assert_allclose(vp, v[perm], rtol=1e-15, atol=1e-16)


def test_velocity_forcing():
    v = velocity_field(HalfPlane(), VortexConfiguration([(0, 1)], [1.0]), forcing=(0.0, -0.5))
    np.testing.assert_allclose(v, [[1 / FOUR_PI, -0.5]], rtol=1e-15)


# -- configuration / settings validation -----------------------------------------------

def test_configuration_validation():
    with pytest.raises(ValueError):
        VortexConfiguration([(0, 0)], [0.0])
    with pytest.raises(ValueError):
        VortexConfiguration([(0, 0), (1, 1)], [1.0])
    with pytest.raises(OutsideDomainError):
        VortexConfiguration([(0, 0), (0, 2)], [1, 1]).validate(UnitDisk())
    with pytest.raises(CoincidentPointsError) as ei:
        VortexConfiguration([(0.1, 0), (0.1, 0)], [1, 1]).validate(UnitDisk())
    assert ei.value.indices == (0, 1)


def test_configuration_immutable():
    c = VortexConfiguration([(0.1, 0)], [1.0])
    with pytest.raises(ValueError):
        c.positions[0, 0] = 3.0


@pytest.mark.parametrize("kw", [
    {"rel_tol": 0.0}, {"abs_tol": -1.0}, {"t_end": -1.0}, {"pair_collapse_eps": 1e-17},
    {"initial_step": 1.0, "max_step": 0.1}, {"min_step": float("nan")},
])
def test_invalid_settings(kw):
    with pytest.raises(SettingsError):
        IntegratorSettings(**kw)


def test_check_non_neutral_examples():
    assert check_non_neutral([1, 2, 3])
    assert not check_non_neutral([1, -1, 5])
    assert check_non_neutral([2, 2, -1])
    with pytest.raises(SizeError):
        check_non_neutral([1.0] * 21)


def test_check_non_neutral_against_enumeration(rng):
    import itertools

    for _ in range(50):
        a = rng.integers(-4, 5, 6).astype(float)
        a[a == 0] = 1.0
        brute = all(sum(s) != 0 for k in range(1, 7) for s in itertools.combinations(a, k))
        assert check_non_neutral(a) == brute


# -- closed-form trajectories --------------------------------------------------------

def test_corotation_full_period():
    cfg = VortexConfiguration([(1, 0), (-1, 0)], [2 * math.pi] * 2)
    rec = integrate(Plane(), cfg, IntegratorSettings(t_end=4 * math.pi))
    assert rec.termination.kind == REACHED_T_END
    assert rec.times[-1] == 4 * math.pi
    np.testing.assert_allclose(rec.positions[-1], cfg.positions, atol=1e-6)


def test_halfplane_translation():
    rec = integrate(HalfPlane(), VortexConfiguration([(0, 1)], [FOUR_PI]), IntegratorSettings(t_end=3))
    np.testing.assert_allclose(rec.positions[-1, 0], [3, 1], atol=1e-9)


def test_disk_orbit():
    rec = integrate(UnitDisk(), VortexConfiguration([(0.5, 0)], [1.0]), IntegratorSettings(t_end=10))
    r = np.hypot(*rec.positions[:, 0].T)
    assert np.max(np.abs(r - 0.5)) <= 1e-9
    angle = np.unwrap(np.arctan2(rec.positions[:, 0, 1], rec.positions[:, 0, 0]))
    omega = np.polyfit(rec.times, angle, 1)[0]
    assert omega == pytest.approx(1 / (2 * math.pi * 0.75), abs=1e-8)


def test_sample_stride_and_times():
    rec = integrate(UnitDisk(), VortexConfiguration([(0.5, 0)], [1.0]), IntegratorSettings(t_end=1, sample_stride=0.1))
    assert len(rec) == 11
    assert np.all(np.diff(rec.times) > 0)
    assert rec.times[-1] == 1.0
    assert rec.termination.t >= rec.times[-1]


def test_zero_duration():
    cfg = VortexConfiguration([(0.5, 0)], [1.0])
    rec = integrate(UnitDisk(), cfg, IntegratorSettings(t_end=0.0))
    assert len(rec) == 1
    assert rec.termination.kind == REACHED_T_END
    assert rec.configuration(0) == cfg


# -- toy model --------------------------------------------------------------------------

def test_toy_crossing_and_collapse_time():
    watch = {"half": lambda x: x[0, 1] - 0.5}
    rec = integrate_toy(ToyModelSpec(), IntegratorSettings(t_end=20, boundary_collapse_eps=1e-8), watches=watch)
    t_cross, x_cross = rec.crossings["half"][0]
    assert x_cross[0, 0] == pytest.approx(math.log(2), abs=1e-6)
    assert t_cross == pytest.approx(2 * math.pi, abs=1e-9)
    assert rec.termination.kind == BOUNDARY_COLLAPSE
    assert rec.termination.indices == (0,)
    assert rec.t_hat == pytest.approx(FOUR_PI, abs=1e-6)


def test_toy_unforced():
    spec = ToyModelSpec(forcing=(0.0, 0.0), initial=(0.0, 2.0))
    rec = integrate_toy(spec, IntegratorSettings(t_end=5))
    np.testing.assert_allclose(rec.positions[:, 0, 1], 2.0, rtol=0, atol=1e-14)
    np.testing.assert_allclose(rec.positions[:, 0, 0], rec.times / (FOUR_PI * 2.0), atol=1e-12)


def test_toy_closed_form_along_trajectory():
    c = 1 / FOUR_PI
    rec = integrate_toy(ToyModelSpec(), IntegratorSettings(t_end=12))
    t = rec.times
    x2 = 1 - c * t
    x1 = np.log(1 / x2) / (FOUR_PI * c)
    np.testing.assert_allclose(rec.positions[:, 0, 1], x2, atol=1e-10)
    np.testing.assert_allclose(rec.positions[:, 0, 0], x1, atol=1e-8)


def test_toy_spec_validation():
    with pytest.raises(ValueError):
        ToyModelSpec(initial=(0.0, -1.0))


# -- events -----------------------------------------------------------------------------

def test_pair_collapse_event_soundness():
    s = IntegratorSettings(t_end=30, pair_collapse_eps=1e-6)
    rec = integrate(Plane(), VortexConfiguration(GROEBLI_POSITIONS, GROEBLI_INTENSITIES), s)
    assert rec.termination.kind == PAIR_COLLAPSE
    assert rec.termination.t == rec.times[-1]
    d, pair = min_pair_distance(rec.positions[-1])
    assert set(pair) == set(rec.termination.indices)
    assert 0.5 * s.pair_collapse_eps <= d <= 2 * s.pair_collapse_eps
    assert rec.t_hat >= rec.termination.t


def test_boundary_collapse_event_soundness():
    s = IntegratorSettings(t_end=20, boundary_collapse_eps=1e-5)
    rec = integrate_toy(ToyModelSpec(), s)
    d = rec.positions[-1, 0, 1]
    assert 0.5 * s.boundary_collapse_eps <= d <= 2 * s.boundary_collapse_eps


def test_step_underflow():
    # a min_step larger than anything the controller would pick near collapse
    s = IntegratorSettings(t_end=30, pair_collapse_eps=1e-12, min_step=1e-4)
    rec = integrate(Plane(), VortexConfiguration(GROEBLI_POSITIONS, GROEBLI_INTENSITIES), s)
    assert rec.termination.kind == STEP_UNDERFLOW
    assert rec.termination.t >= rec.times[-1]


# -- integrator properties -------------------------------------------------------------

def test_determinism():
    cfg = VortexConfiguration([(0.3, 0.1), (-0.2, 0.4), (0.0, -0.6)], [1.0, 2.0, 0.5])
    s = IntegratorSettings(t_end=5)
    assert integrate(UnitDisk(), cfg, s) == integrate(UnitDisk(), cfg, s)


def test_reversibility_plane():
    cfg = VortexConfiguration([(1, 0), (-0.5, 0.3), (0.1, -0.8)], [1.0, 1.5, 0.7])
    s = IntegratorSettings(t_end=5)
    fwd = integrate(Plane(), cfg, s)
    # negating all intensities reverses time for this Hamiltonian flow
    back = integrate(Plane(), VortexConfiguration(fwd.positions[-1], -cfg.intensities), s)
    np.testing.assert_allclose(back.positions[-1], cfg.positions, atol=100 * s.rel_tol)


def _fixed_step_error(h):
    # corotating pair with closed-form angle t/2
    f = lambda t, y: velocity_field(Plane(), VortexConfiguration(y.reshape(2, 2), [2 * math.pi] * 2)).ravel()  # noqa: E731
    y0 = np.array([1.0, 0.0, -1.0, 0.0])
    t_end = 4.0
    last = None
    for step in dopri5(f, 0.0, y0, t_end, rtol=1e10, atol=1e10, h0=h, hmax=h):
        last = step
    exact = np.array([math.cos(t_end / 2), math.sin(t_end / 2)])
    return np.linalg.norm(last.y1[:2] - exact)


def test_convergence_order():
    hs = np.array([0.8, 0.4, 0.2, 0.1])
    errs = np.array([_fixed_step_error(h) for h in hs])
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope >= 4.0


def test_dense_output_order():
    f = lambda t, y: np.array([-y[1], y[0]])  # noqa: E731
    errs = []
    for h in (0.4, 0.2, 0.1):
        worst = 0.0
        for step in dopri5(f, 0.0, np.array([1.0, 0.0]), 2.0, rtol=1e10, atol=1e10, h0=h, hmax=h):
            for s in np.linspace(step.t0, step.t1, 7):
                worst = max(worst, abs(step(s)[0] - math.cos(s)))
        errs.append(worst)
    slope = np.polyfit(np.log([0.4, 0.2, 0.1]), np.log(errs), 1)[0]
    assert slope >= 4.0


def test_adaptive_tolerance_sweep_monotone():
    cfg = VortexConfiguration([(0, 0.3), (0.5, 0.6)], [1.0, 1.0])
    ref = integrate(HalfPlane(), cfg, IntegratorSettings(t_end=5, rel_tol=1e-13, abs_tol=1e-15))
    errs = []
    for tol in (1e-6, 1e-8, 1e-10):
        rec = integrate(HalfPlane(), cfg, IntegratorSettings(t_end=5, rel_tol=tol, abs_tol=tol * 1e-2))
        errs.append(np.abs(rec.positions[-1] - ref.positions[-1]).max())
    assert errs[0] > errs[1] > errs[2]


def test_record_steps_adds_step_ends():
    cfg = VortexConfiguration([(0.5, 0)], [1.0])
    a = integrate(UnitDisk(), cfg, IntegratorSettings(t_end=1))
    b = integrate(UnitDisk(), cfg, IntegratorSettings(t_end=1, record_steps=True))
    assert len(b) >= len(a)
    assert set(a.times) <= set(b.times)
    assert np.all(np.diff(b.times) > 0)
