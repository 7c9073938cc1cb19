"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--repeat 200]

Times the velocity kernel for several N in each domain, then one full
scenario integration per backend.
"""
import argparse
import timeit

import numpy as np

from pointvortex import kernels
from pointvortex.dynamics import integrate
from pointvortex.geometry import HalfPlane, Plane, UnitDisk
from pointvortex.scenarios import get_scenario


def random_state(domain, n, rng):
    if isinstance(domain, UnitDisk):
        r = np.sqrt(rng.uniform(0.0, 0.8, n))
        th = rng.uniform(0, 2 * np.pi, n)
        x = np.column_stack([r * np.cos(th), r * np.sin(th)])
    else:
        x = np.column_stack([rng.uniform(-1, 1, n), rng.uniform(0.1, 1.0, n)])
    return np.ascontiguousarray(x), rng.uniform(0.5, 2.0, n)


def time_velocity(backend, domain, x, a, repeat):
    out = np.empty_like(x)
    fn = lambda: kernels.velocities(domain.kernel_code, x, a, out=out, backend=backend)  # noqa: E731
    return min(timeit.repeat(fn, number=repeat, repeat=5)) / repeat


def time_scenario(backend):
    s = get_scenario("disk-nearwall-positive")
    settings = s.settings.with_(t_end=2.0)
    saved = kernels._impl
    kernels._impl = kernels._select(backend)[1]
    try:
        return min(timeit.repeat(lambda: integrate(s.domain, s.config, settings), number=1, repeat=3))
    finally:
        kernels._impl = saved


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=200)
    args = p.parse_args()
    rng = np.random.default_rng(0)
    backends = kernels.available_backends()
    print(f"{'domain':10s} {'N':>4s} " + " ".join(f"{b:>12s}" for b in backends) + "   speedup")
    for domain in (Plane(), HalfPlane(), UnitDisk()):
        for n in (3, 10, 30, 100):
            x, a = random_state(domain, n, rng)
            ts = {b: time_velocity(b, domain, x, a, args.repeat if n < 100 else 20) for b in backends}
            speed = ts["python"] / ts["cython"] if "cython" in ts else float("nan")
            print(f"{domain.name:10s} {n:4d} " + " ".join(f"{ts[b] * 1e6:10.1f}us" for b in backends)
                  + f"   {speed:6.1f}x")
    for b in backends:
        print(f"disk-nearwall-positive, t_end 2, backend {b}: {time_scenario(b):.3f} s")


if __name__ == "__main__":
    main()
