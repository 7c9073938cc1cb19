"""Run configuration: JSON schema, parsing with path-qualified errors, serialization.

A configuration is a single JSON object::

    {
      "name": "optional label",
      "domain": {"type": "unit-disk", "d0": 0.2},
      "vortices": [{"position": [0.5, 0.0], "intensity": 1.0}],
      "forcing": [0.0, -0.0795],          # optional constant drift
      "integrator": {"t_end": 10.0, "sample_stride": 0.1, ...},
      "diagnostics": {"clusters": true, "certificates": true,
                      "appendix_monitors": false, "eta": 0.1, "window": null},
      "output": {"directory": "out", "trajectory": "trajectory.csv",
                 "diagnostics": "diagnostics.csv", "metadata": "metadata.json"}
    }

Only ``domain`` and ``vortices`` are required; everything else has defaults.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

import jsonschema

from .dynamics import IntegratorSettings, VortexConfiguration
from .errors import CoincidentPointsError, ConfigError, GeometryError, OutsideDomainError, SettingsError
from .geometry import Domain, domain_from_description

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POINT = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["domain", "vortices"],
    "properties": {
        "name": {"type": "string"},
        "domain": {
            "type": "object",
            "required": ["type"],
            "properties": {"type": {"enum": ["plane", "half-plane", "unit-disk", "conformal-disk"]}},
            "allOf": [
                {
                    "if": {"properties": {"type": {"const": "conformal-disk"}}},
                    "then": {
                        "additionalProperties": False,
                        "required": ["type", "coefficients"],
                        "properties": {
                            "type": {},
                            "coefficients": {"type": "array", "minItems": 2, "items": _POINT},
                            "d0": _POS,
                            "newton_tol": _POS,
                            "newton_max_iter": {"type": "integer", "minimum": 1},
                        },
                    },
                },
                {
                    "if": {"properties": {"type": {"const": "plane"}}},
                    "then": {"additionalProperties": False, "properties": {"type": {}}},
                },
                {
                    "if": {"properties": {"type": {"enum": ["half-plane", "unit-disk"]}}},
                    "then": {"additionalProperties": False, "properties": {"type": {}, "d0": _POS}},
                },
            ],
        },
        "vortices": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["position", "intensity"],
                "properties": {"position": _POINT, "intensity": _NUM},
            },
        },
        "forcing": _POINT,
        "integrator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                **{f.name: _NUM for f in fields(IntegratorSettings) if f.name != "record_steps"},
                "record_steps": {"type": "boolean"},
            },
        },
        "diagnostics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "clusters": {"type": "boolean"},
                "certificates": {"type": "boolean"},
                "appendix_monitors": {"type": "boolean"},
                "eta": _POS,
                "window": {"type": ["number", "null"], "minimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "trajectory": {"type": "string"},
                "diagnostics": {"type": "string"},
                "metadata": {"type": "string"},
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


@dataclass(frozen=True)
class DiagnosticsOptions:
    clusters: bool = True
    certificates: bool = True
    appendix_monitors: bool = False
    eta: float = 0.1
    window: float | None = None


@dataclass(frozen=True)
class OutputOptions:
    directory: str = "out"
    trajectory: str = "trajectory.csv"
    diagnostics: str = "diagnostics.csv"
    metadata: str = "metadata.json"


@dataclass(frozen=True)
class RunConfig:
    domain: Domain
    vortices: VortexConfiguration
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    diagnostics: DiagnosticsOptions = field(default_factory=DiagnosticsOptions)
    output: OutputOptions = field(default_factory=OutputOptions)
    forcing: tuple | None = None
    name: str | None = None


def _json_path(path) -> str:
    out = "$"
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _schema_error(err: jsonschema.ValidationError) -> ConfigError:
    # descend into the most specific sub-error
    while err.context:
        err = max(err.context, key=lambda e: len(e.absolute_path))
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        msg = f"unknown key(s) {', '.join(map(repr, extra))}"
    elif err.validator == "type":
        msg = f"expected {err.validator_value}, got {type(err.instance).__name__} {err.instance!r}"
    elif err.validator == "minItems" and err.absolute_path and err.absolute_path[-1] == "vortices":
        msg = "vortex list is empty; at least one vortex is required"
    else:
        msg = err.message
    return ConfigError(msg, _json_path(err.absolute_path))


def config_from_dict(doc) -> RunConfig:
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.validator))
    if errors:
        raise _schema_error(errors[0])
    try:
        domain = domain_from_description(doc["domain"])
    except GeometryError as exc:
        raise ConfigError(str(exc), "$.domain") from exc

    vort = doc["vortices"]
    for k, v in enumerate(vort):
        if v["intensity"] == 0:
            raise ConfigError(f"vortex {k + 1} has zero intensity; intensities must be nonzero real numbers",
                              f"$.vortices[{k}].intensity")
    positions = [v["position"] for v in vort]
    intensities = [v["intensity"] for v in vort]
    try:
        config = VortexConfiguration(positions, intensities)
    except ValueError as exc:
        raise ConfigError(str(exc), "$.vortices") from exc
    try:
        config.validate(domain)
    except OutsideDomainError as exc:
        raise ConfigError(f"vortex {exc.index + 1} lies outside the {domain.name} domain",
                          f"$.vortices[{exc.index}].position") from exc
    except CoincidentPointsError as exc:
        i, j = exc.indices
        raise ConfigError(f"vortices {i + 1} and {j + 1} coincide", f"$.vortices[{j}].position") from exc

    try:
        settings = IntegratorSettings(**doc.get("integrator", {}))
    except SettingsError as exc:
        raise ConfigError(str(exc), "$.integrator") from exc

    forcing = doc.get("forcing")
    return RunConfig(
        domain=domain,
        vortices=config,
        integrator=settings,
        diagnostics=DiagnosticsOptions(**doc.get("diagnostics", {})),
        output=OutputOptions(**doc.get("output", {})),
        forcing=None if forcing is None else (float(forcing[0]), float(forcing[1])),
        name=doc.get("name"),
    )


def parse_config(text: str | bytes) -> RunConfig:
    """Parse and validate a JSON run configuration."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from exc
    return config_from_dict(doc)


def config_to_dict(rc: RunConfig) -> dict:
    doc = {}
    if rc.name is not None:
        doc["name"] = rc.name
    doc["domain"] = rc.domain.describe()
    doc["vortices"] = [
        {"position": [float(p[0]), float(p[1])], "intensity": float(a)}
        for p, a in zip(rc.vortices.positions, rc.vortices.intensities)
    ]
    if rc.forcing is not None:
        doc["forcing"] = [float(rc.forcing[0]), float(rc.forcing[1])]
    doc["integrator"] = asdict(rc.integrator)
    doc["diagnostics"] = asdict(rc.diagnostics)
    doc["output"] = asdict(rc.output)
    return doc


def serialize_config(rc: RunConfig) -> str:
    """JSON text that :func:`parse_config` maps back to an equal RunConfig."""
    return json.dumps(config_to_dict(rc), indent=2) + "\n"
