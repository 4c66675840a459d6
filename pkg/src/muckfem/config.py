"""Experiment configuration files.

One experiment per file, INI syntax::

    [experiment]
    kind = interp-rate
    levels = 5

    [weight]
    kind = power
    center = 0.5, 0.5
    exponent = 0.5

Unknown keys are rejected so that typos surface as config errors.
"""
from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field

from .errors import ConfigError
from .weights import Weight

KINDS = (
    "interp-rate",
    "aniso-rate",
    "ap-check",
    "poincare",
    "elliptic-rate",
    "dirac-rate",
    "fractional-rate",
    "metrics-check",
)

DESCRIPTIONS = {
    "interp-rate": "quasi-interpolation error on uniformly refined simplicial meshes",
    "aniso-rate": "Q1 quasi-interpolation on tensor meshes refined along one axis",
    "ap-check": "sampled A_p constants of power weights and divergence flags",
    "poincare": "weighted Poincare ratios of sampled cubics under dilation",
    "elliptic-rate": "weighted elliptic Galerkin error for a manufactured solution",
    "dirac-rate": "Poisson problem with a point source against a refined reference",
    "fractional-rate": "fractional Laplacian through the truncated extension",
    "metrics-check": "interpolation error measured in a second weight and exponent",
}

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "experiment": {
        "kind": (str, None),
        "name": (str, ""),
        "levels": (int, 5),
        "fit_all": (bool, False),
        "seed": (int, 0),
    },
    "mesh": {
        "domain": (str, "unit-square"),
        "h0": (float, 0.0),
        "nx": (int, 4),
        "ny": (int, 8),
        "refine": (str, "x"),
        "window": (str, "0.25, 0.75"),
    },
    "weight": {
        "kind": (str, "constant"),
        "center": (str, ""),
        "exponent": (float, 0.0),
        "dim": (int, 0),
        "diameter": (float, 0.0),
        "level": (float, 0.0),
    },
    "second_weight": {
        "kind": (str, "constant"),
        "center": (str, ""),
        "exponent": (float, 0.0),
        "dim": (int, 0),
        "diameter": (float, 0.0),
        "level": (float, 0.0),
    },
    "norm": {
        "p": (float, 2.0),
        "orders": (str, "0, 1"),
        "q": (float, 2.0),
        "degree": (int, 1),
        "function": (str, "sin(pi*x)*sin(pi*y)"),
    },
    "problem": {
        "s": (float, 0.5),
        "mode": (str, "graded"),
        "grading": (float, 0.0),
        "intervals": (int, 8),
        "truncation_factor": (float, 0.5),
        "x0": (str, "0.5, 0.5"),
        "rhs": (str, "sin(pi*x) + sin(2*pi*x)"),
        "exponents": (str, "-1.5, -0.5, 0.5, 0.9, 1.1, 1.5"),
        "samples": (int, 20),
        "dilations": (int, 4),
        "solution": (str, ""),
    },
    "tolerances": {
        "quadrature": (float, 1e-12),
        "solver": (float, 1e-10),
    },
    "output": {
        "dir": (str, "out"),
        "formats": (str, "csv,summary"),
    },
}

FORMATS = ("csv", "summary", "plot")


def parse_floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma separated numbers, got {text!r}") from exc


@dataclass
class ExperimentConfig:
    kind: str
    values: dict[str, dict[str, object]] = field(default_factory=dict)
    source: str = ""

    def get(self, section: str, key: str):
        return self.values[section][key]

    @property
    def name(self) -> str:
        return self.get("experiment", "name") or self.kind

    @property
    def levels(self) -> int:
        return self.get("experiment", "levels")

    @property
    def formats(self) -> tuple[str, ...]:
        return tuple(f.strip() for f in self.get("output", "formats").split(",") if f.strip())

    def weight(self, section: str = "weight", dim: int = 2) -> Weight:
        sec = dict(self.values[section])
        cfg = {"kind": sec["kind"], "dimension": sec["dim"] or dim}
        if sec["center"]:
            cfg["center"] = parse_floats(sec["center"])
            cfg["dimension"] = sec["dim"] or len(cfg["center"])
        # dirac_log keeps its natural exponent unless one is given
        if sec["exponent"] or sec["kind"] != "dirac_log":
            cfg["exponent"] = sec["exponent"]
        if sec["diameter"]:
            cfg["diameter"] = sec["diameter"]
        cfg["level"] = sec["level"]
        try:
            return Weight.from_config(cfg)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad [{section}] section: {exc}") from exc

    def canonical(self) -> str:
        """Normalized ``section.key = value`` listing used for hashing."""
        lines = [f"experiment.kind = {self.kind}"]
        for sec in sorted(self.values):
            for key in sorted(self.values[sec]):
                if sec == "experiment" and key == "kind":
                    continue
                lines.append(f"{sec}.{key} = {self.values[sec][key]!r}")
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def with_levels(self, n: int) -> "ExperimentConfig":
        values = {s: dict(v) for s, v in self.values.items()}
        values["experiment"]["levels"] = n
        out = ExperimentConfig(self.kind, values, self.source)
        out.validate()
        return out

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {', '.join(KINDS)}")
        rate_kinds = {"interp-rate", "aniso-rate", "elliptic-rate", "dirac-rate", "fractional-rate",
                      "metrics-check"}
        if self.kind in rate_kinds and self.levels < 3:
            raise ConfigError("rate studies need at least 3 levels")
        if self.levels < 1:
            raise ConfigError("levels must be positive")
        p = self.get("norm", "p")
        if not 1 < p < float("inf"):
            raise ConfigError("p must lie in (1, inf)")
        s = self.get("problem", "s")
        if not 0 < s < 1:
            raise ConfigError("s must lie in (0, 1)")
        if self.get("problem", "mode") not in ("graded", "uniform"):
            raise ConfigError("mode must be graded or uniform")
        if self.get("mesh", "refine") not in ("x", "y"):
            raise ConfigError("refine must be x or y")
        for f in self.formats:
            if f not in FORMATS:
                raise ConfigError(f"unknown output format {f!r}")


def _convert(section: str, key: str, raw: str, typ: type):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {typ.__name__}") from exc


def loads(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key in parser[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
    values: dict[str, dict[str, object]] = {}
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        for key, (typ, default) in keys.items():
            if parser.has_option(sec, key):
                values[sec][key] = _convert(sec, key, parser[sec][key], typ)
            else:
                values[sec][key] = default
    kind = values["experiment"]["kind"]
    if not kind:
        raise ConfigError("[experiment] kind is required")
    cfg = ExperimentConfig(kind, values, source)
    cfg.validate()
    return cfg


def load(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text, str(path))


def dumps(cfg: ExperimentConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    for sec, keys in cfg.values.items():
        parser[sec] = {k: str(v) for k, v in keys.items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
