"""Run orchestration and persistence: trajectory/diagnostics CSV and metadata JSON.

CSV floats use ``repr`` (shortest round-trip representation), so reading a
file back with ``float`` recovers every value bit for bit.  Metadata carries
no timestamps; reruns of the same configuration are byte-identical.
"""
from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from .config import DiagnosticsOptions, OutputOptions, RunConfig, config_to_dict
from .diagnostics import (
    ClusterPartition,
    DiagnosticsSeries,
    appendix_a_monitor,
    appendix_b_checkers,
    cluster_functionals,
    detect_clusters,
    disk_certificate,
    halfplane_certificate,
)
from .dynamics import (
    BOUNDARY_COLLAPSE,
    PAIR_COLLAPSE,
    REACHED_T_END,
    STEP_UNDERFLOW,
    TrajectoryRecord,
    integrate,
)
from .geometry import HalfPlane, UnitDisk

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CODES = {REACHED_T_END: 0, PAIR_COLLAPSE: 10, BOUNDARY_COLLAPSE: 11, STEP_UNDERFLOW: 12}
EXIT_CERTIFICATE = 13
CERTIFICATE_SLACK = 1e-8


def fmt(x) -> str:
    return repr(float(x))


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r]
    return header, np.array(data, dtype=float).reshape(len(data), len(header))


def trajectory_table(rec: TrajectoryRecord) -> tuple[list[str], np.ndarray]:
    n = rec.n
    header = ["t"] + [f"x{i + 1}_{c}" for i in range(n) for c in (1, 2)]
    data = np.column_stack([rec.times, rec.positions.reshape(len(rec), 2 * n)])
    return header, data


def diagnostics_table(series: DiagnosticsSeries, certificate=None) -> tuple[list[str], np.ndarray]:
    cols = {
        "t": series.t,
        "H": series.H,
        "M1": series.M[:, 0],
        "M2": series.M[:, 1],
        "I": series.I,
        "min_pair_dist": series.min_pair_dist,
        "min_boundary_dist": series.min_boundary_dist,
        "M_Q2": series.M_Q[:, 1],
        "I_Q": series.I_Q,
        "D_gamma": series.D_gamma,
        "L_gamma": series.L_gamma,
        "J": series.J,
    }
    if certificate is not None and len(certificate):
        cols["certificate_value"] = certificate.value
        cols["certificate_floor"] = certificate.floor
        cols["certificate_margin"] = certificate.margin
    return list(cols), np.column_stack(list(cols.values()))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def versions() -> dict:
    return {
        "pointvortex": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "kernel_backend": kernels.BACKEND,
    }


@dataclass(frozen=True)
class RunReport:
    exit_code: int
    record: TrajectoryRecord
    series: DiagnosticsSeries | None
    metadata: dict
    paths: dict


def _certificate_for(rec, partition):
    if isinstance(rec.domain, HalfPlane):
        return "half-plane", halfplane_certificate(rec, partition)
    if isinstance(rec.domain, UnitDisk):
        return "unit-disk", disk_certificate(rec, partition)
    return None, None


def execute(
    rc: RunConfig,
    out_dir: str | Path | None = None,
    stride: float | None = None,
    strict: bool = False,
    watches: dict | None = None,
    extra_metadata: dict | None = None,
    verdict_fn=None,
) -> RunReport:
    """Integrate, evaluate the selected diagnostics and write the three output files.

    ``verdict_fn(record, series)`` may return an oracle verdict dict that is
    stored in the metadata (used by the scenario runner).
    """
    if stride is not None:
        rc = replace(rc, integrator=replace(rc.integrator, sample_stride=stride))
    out = Path(out_dir if out_dir is not None else rc.output.directory)
    out.mkdir(parents=True, exist_ok=True)

    rec = integrate(rc.domain, rc.vortices, rc.integrator, forcing=rc.forcing, watches=watches)
    opts = rc.diagnostics
    meta = {
        "name": rc.name,
        "termination": {
            "kind": rec.termination.kind,
            "t": rec.termination.t,
            "indices": [i + 1 for i in rec.termination.indices],
        },
        "event_times": {k: [c[0] for c in v] for k, v in rec.crossings.items()},
        "t_hat": rec.t_hat,
        "steps": {"accepted": rec.n_accepted, "rejected": rec.n_rejected},
        "n_samples": len(rec),
        "versions": versions(),
        "config": config_to_dict(rc),
    }

    if opts.clusters and len(rec) >= 2:
        window = opts.window
        span = rec.times[-1] - rec.times[0]
        if window is not None:
            window = min(window, span)
        partition = detect_clusters(rc.domain, rec, window=window, eta=opts.eta)
    else:
        partition = ClusterPartition((), tuple(range(rec.n)), math.inf)
    series = cluster_functionals(rc.domain, rec, partition)
    meta["clusters"] = {
        "Q": [i + 1 for i in partition.Q],
        "P": [i + 1 for i in partition.P],
        "delta_hat": partition.delta_hat,
    }

    violation = False
    cert = None
    if opts.certificates:
        kind, cert = _certificate_for(rec, partition)
        if kind is not None:
            meta["certificate"] = {
                "domain": kind,
                "rate": cert.rate,
                "min_margin": cert.min_margin,
                "n_samples": len(cert),
            }
            violation |= cert.min_margin < -CERTIFICATE_SLACK

    if opts.appendix_monitors:
        mon = {}
        b = appendix_b_checkers(rc.domain, rc.vortices, rec, partition)
        mon["unsigned_criteria"] = {
            "non_neutral": b.non_neutral,
            "all_collapse_hypothesis": b.all_collapse_hypothesis,
            "hypothesis_quantity": b.hypothesis_quantity,
            "ratio_max": b.ratio_max,
            "threshold": b.threshold,
            "verdict": b.verdict,
        }
        if isinstance(rc.domain, HalfPlane) and rec.n <= 10 and len(rec) >= 3:
            a = appendix_a_monitor(rec)
            mon["subset_center_drift"] = {
                "C0": a.C0,
                "C2": a.C2,
                "kernel_constant": a.kernel_constant,
                "min_margin": a.min_margin,
                "degenerate_samples": a.n_degenerate,
                "skipped_neutral_subsets": [[i + 1 for i in s] for s in a.skipped],
            }
            violation |= a.min_margin < 0
        meta["appendix_monitors"] = mon

    if verdict_fn is not None:
        meta["verdict"] = verdict_fn(rec, series)
    if extra_metadata:
        meta.update(extra_metadata)

    paths = {
        "trajectory": out / rc.output.trajectory,
        "diagnostics": out / rc.output.diagnostics,
        "metadata": out / rc.output.metadata,
    }
    header, data = trajectory_table(rec)
    write_csv(paths["trajectory"], header, data)
    header, data = diagnostics_table(series, cert)
    write_csv(paths["diagnostics"], header, data)

    code = EXIT_CODES[rec.termination.kind]
    if strict and violation:
        code = EXIT_CERTIFICATE
    meta["exit_code"] = code
    meta["strict_violation"] = bool(violation)
    write_json(paths["metadata"], meta)
    return RunReport(code, rec, series, meta, paths)


def run(rc: RunConfig, out_dir=None, stride=None, strict=False) -> RunReport:
    return execute(rc, out_dir=out_dir, stride=stride, strict=strict)


def scenario_config(s) -> RunConfig:
    """The RunConfig equivalent of a builtin scenario (exact round-trip through JSON)."""
    return RunConfig(
        domain=s.domain,
        vortices=s.config,
        integrator=s.settings,
        diagnostics=DiagnosticsOptions(eta=s.eta),
        output=OutputOptions(),
        forcing=s.forcing,
        name=s.name,
    )


def run_scenario_by_name(name: str, out_dir=None, stride=None, strict=False) -> RunReport:
    """Run a builtin scenario and store its oracle verdict in the metadata."""
    from .scenarios import WATCHES, Verdict, get_scenario

    s = get_scenario(name)
    rc = scenario_config(s)

    def verdict(rec, series):
        checks = tuple(s.oracle(rec, series)) if s.oracle else ()
        note = "exploratory: no oracle" if s.exploratory else ""
        return Verdict(s.name, all(c.passed for c in checks), checks, note).as_dict()

    return execute(
        rc, out_dir=out_dir, stride=stride, strict=strict,
        watches={w: WATCHES[w] for w in s.watches}, verdict_fn=verdict,
    )
