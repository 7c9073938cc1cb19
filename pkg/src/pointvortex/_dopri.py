"""Dormand-Prince 5(4) stepper with PI step control and 5th-order dense output.

Coefficients and the dense-output polynomial follow Hairer, Norsett & Wanner's
DOPRI5.  The stepper is a generator of accepted steps; the caller decides what
to sample and when to stop.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423

# step controller (Hairer defaults)
BETA = 0.04
EXPO1 = 0.2 - BETA * 0.75
SAFE = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
REJECT_SHRINK = 0.25


class StepUnderflow(Exception):
    def __init__(self, t, h):
        super().__init__(f"step size {h:.3e} below minimum at t={t!r}")
        self.t = t
        self.h = h


@dataclass(frozen=True)
class Step:
    """One accepted step with its interpolant."""

    t0: float
    t1: float
    y0: np.ndarray
    y1: np.ndarray
    rcont: tuple

    def __call__(self, t: float) -> np.ndarray:
        if t == self.t1:
            return self.y1.copy()
        if t == self.t0:
            return self.y0.copy()
        r1, r2, r3, r4, r5 = self.rcont
        th = (t - self.t0) / (self.t1 - self.t0)
        th1 = 1.0 - th
        return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))


def _initial_step(f, t, y, k1, rtol, atol, hmax):
    # Hairer's hinit heuristic, order 5
    sk = atol + rtol * np.abs(y)
    dnf = np.max(np.abs(k1 / sk))
    dny = np.max(np.abs(y / sk))
    h = 1e-6 if dnf <= 1e-10 or dny <= 1e-10 else 0.01 * dny / dnf
    h = min(h, hmax)
    try:
        k2 = f(t + h, y + h * k1)
        der2 = np.max(np.abs((k2 - k1) / sk)) / h
    except ValueError:
        return h * 0.1
    der12 = max(der2, dnf)
    h1 = max(1e-6, h * 1e-3) if der12 <= 1e-15 else (0.01 / der12) ** 0.2
    return min(100 * h, h1, hmax)


def dopri5(f, t0, y0, t_end, *, rtol, atol, h0=None, hmax=np.inf, hmin=0.0, stats=None):
    """Yield accepted :class:`Step` objects from ``t0`` up to ``t_end``.

    ``f(t, y)`` may raise ``ValueError`` (e.g. a stage left the domain); that
    counts as a rejection and the step is shrunk by ``REJECT_SHRINK``.  Raises
    :class:`StepUnderflow` once the step would drop below ``hmin``.
    ``stats`` (a dict) receives running ``accepted``/``rejected`` counts.
    """
    if stats is None:
        stats = {}
    stats.setdefault("accepted", 0)
    stats.setdefault("rejected", 0)
    t = float(t0)
    y = np.array(y0, dtype=np.float64)
    if t_end <= t:
        return
    k1 = f(t, y)
    h = h0 if h0 else _initial_step(f, t, y, k1, rtol, atol, hmax)
    h = min(h, hmax)
    facold = 1e-4
    last_rejected = False
    while t < t_end:
        last = False
        if t + h >= t_end or t + 1.01 * h >= t_end:
            h = t_end - t
            last = True
        if h < hmin and not last:
            raise StepUnderflow(t, h)
        try:
            k2 = f(t + C2 * h, y + h * (A21 * k1))
            k3 = f(t + C3 * h, y + h * (A31 * k1 + A32 * k2))
            k4 = f(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
            k5 = f(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
            ysti = y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)
            k6 = f(t + h, ysti)
            y1 = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
            k7 = f(t + h, y1)
        except ValueError:
            stats["rejected"] += 1
            last_rejected = True
            h *= REJECT_SHRINK
            continue
        err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sk = atol + rtol * np.maximum(np.abs(y), np.abs(y1))
        err = float(np.max(np.abs(err_vec) / sk))
        if not np.isfinite(err):
            stats["rejected"] += 1
            last_rejected = True
            h *= REJECT_SHRINK
            continue
        fac11 = err ** EXPO1
        if err <= 1.0:
            fac = fac11 / facold ** BETA
            fac = min(1.0 / FAC_MIN, max(1.0 / FAC_MAX, fac / SAFE))
            hnew = h / fac
            facold = max(err, 1e-4)
            if last_rejected:
                hnew = min(hnew, h)
            ydiff = y1 - y
            bspl = h * k1 - ydiff
            rcont = (
                y,
                ydiff,
                bspl,
                ydiff - h * k7 - bspl,
                h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
            )
            t_new = t_end if last else t + h
            stats["accepted"] += 1
            yield Step(t, t_new, y, y1, rcont)
            t, y, k1 = t_new, y1, k7
            h = min(hnew, hmax)
            last_rejected = False
        else:
            stats["rejected"] += 1
            last_rejected = True
            h = h / min(1.0 / FAC_MIN, fac11 / SAFE)


def locate_crossing(step: Step, g, tol: float):
    """Bisect for the first zero of ``g(y)`` inside ``step`` given ``g(y0) > 0 >= g(y1)``.

    Returns the time of the left edge of the final bracket where ``g`` is
    already non-positive (i.e. the right bracket end).
    """
    lo, hi = step.t0, step.t1
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(step(mid)) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi
