"""Run configuration: INI file with [model], [compute], [output] sections.

Unknown sections or keys are errors. Environment variables named
POLARON_<SECTION>_<KEY> (e.g. POLARON_COMPUTE_SEED=7) override the file, and
explicit ``section.key=value`` overrides from the command line win over both.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field

from .errors import ConfigError
from .model import CUTOFFS, DISPERSIONS, ModelSpec
from .series import NMAX_CAP, SeriesSettings

ENV_PREFIX = "POLARON_"


def _pos_int(v):
    out = int(v)
    if out < 1:
        raise ValueError("must be a positive integer")
    return out


def _nonneg_int(v):
    out = int(v)
    if out < 0:
        raise ValueError("must be a nonnegative integer")
    return out


def _choice(options):
    def parse(v):
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return v
    return parse


SCHEMA = {
    "model": {
        "dimension": _pos_int,
        "dispersion": _choice(DISPERSIONS),
        "mass": float,
        "coupling_g": float,
        "coupling_beta": float,
        "cutoff": _choice(CUTOFFS),
        "cutoff_lambda": float,
    },
    "compute": {
        "seed": _nonneg_int,
        "nmax": _pos_int,
        "nmax_cap": _pos_int,
        "mc_count": _pos_int,
        "mc_concentration": float,
        "coupling_order": _pos_int,
        "dispersion_order": _pos_int,
        "rule_order": _pos_int,
        "pairing_cap": _pos_int,
        "basis_cap": _pos_int,
        "threads": _pos_int,
    },
    "output": {
        "format": _choice(("csv", "json")),
        "path": str,
    },
}

REQUIRED = {"compute": ("seed",)}


@dataclass(frozen=True)
class ComputeConfig:
    seed: int = 0
    nmax: int = 3
    nmax_cap: int = NMAX_CAP
    mc_count: int = 4000
    mc_concentration: float = 1.0
    coupling_order: int = 16
    dispersion_order: int = 48
    rule_order: int = 48
    pairing_cap: int = 6
    basis_cap: int = 20000
    threads: int = 1

    def settings(self) -> SeriesSettings:
        return SeriesSettings(mc_count=self.mc_count, seed=self.seed, concentration=self.mc_concentration,
                              coupling_order=self.coupling_order, dispersion_order=self.dispersion_order,
                              rule_order=self.rule_order, threads=self.threads, cap=self.nmax_cap)


@dataclass(frozen=True)
class OutputConfig:
    format: str = "csv"
    path: str = "-"  # "-" writes to stdout, anything else is a directory


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec | None = None
    compute: ComputeConfig = field(default_factory=ComputeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def canonical(self) -> dict:
        model = None
        if self.model is not None:
            m = self.model
            model = dict(dimension=m.d, dispersion=m.dispersion, mass=m.mass, coupling_g=m.g,
                         coupling_beta=m.beta, cutoff=m.cutoff,
                         cutoff_lambda=None if math.isinf(m.cutoff_lambda) else m.cutoff_lambda)
        return dict(model=model, compute=asdict(self.compute), output=asdict(self.output))

    def hash(self) -> str:
        """Digest of everything that can change artifact contents (the output location cannot)."""
        body = self.canonical()
        body["output"].pop("path")
        blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def require_model(self) -> ModelSpec:
        if self.model is None:
            raise ConfigError("this command needs a [model] section in the config", key="model")
        return self.model


def _parse_value(section, key, raw):
    if section not in SCHEMA:
        raise ConfigError(f"unknown config section [{section}]", key=section)
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown config key {section}.{key}", key=f"{section}.{key}")
    try:
        return SCHEMA[section][key](raw.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {section}.{key}={raw!r}: {exc}", key=f"{section}.{key}") from None


def _collect(text, env, overrides):
    values = {}
    if text is not None:
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}".splitlines()[0]) from None
        for section in cp.sections():
            for key, raw in cp.items(section):
                values[(section, key)] = _parse_value(section, key, raw)
    for name, raw in sorted(env.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        section, _, key = rest.partition("_")
        values[(section, key)] = _parse_value(section, key, raw)
    for item in overrides or ():
        lhs, sep, raw = item.partition("=")
        section, dot, key = lhs.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} is not of the form section.key=value", key=item)
        values[(section, key)] = _parse_value(section, key, raw)
    return values


def load_config(path=None, text=None, env=None, overrides=None, require_seed=True) -> RunConfig:
    """Build a RunConfig from a file (or text), the environment and overrides."""
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}", key=str(path)) from None
    env = os.environ if env is None else env
    values = _collect(text, env, overrides)
    sections = {s for s, _ in values}
    model = None
    if "model" in sections:
        mv = {k: v for (s, k), v in values.items() if s == "model"}
        try:
            model = ModelSpec(
                d=mv.get("dimension", 3), dispersion=mv.get("dispersion", "constant"), mass=mv.get("mass", 0.0),
                g=mv.get("coupling_g", 1.0), beta=mv.get("coupling_beta", 0.0), cutoff=mv.get("cutoff", "none"),
                cutoff_lambda=mv.get("cutoff_lambda", math.inf))
        except ValueError as exc:
            raise ConfigError(f"invalid [model]: {exc}", key="model") from None
    cv = {k: v for (s, k), v in values.items() if s == "compute"}
    if require_seed and text is not None and "seed" not in cv:
        raise ConfigError("compute.seed is required (no wall-clock seeding)", key="compute.seed")
    compute = ComputeConfig(**cv)
    if compute.nmax > compute.nmax_cap:
        raise ConfigError(f"compute.nmax={compute.nmax} exceeds compute.nmax_cap={compute.nmax_cap}",
                          key="compute.nmax")
    output = OutputConfig(**{k: v for (s, k), v in values.items() if s == "output"})
    return RunConfig(model, compute, output)
