"""Strict sectioned key-value configuration for simulation campaigns.

Syntax is INI (``[section]`` headers, ``key = value`` lines, ``#`` comments).
Every key must be known; lists are comma separated; feature indices are
1-based as in the output files.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

__all__ = ["SimulationConfig", "ConfigError", "load_config", "parse_config", "config_hash", "TABLE1_DEFAULTS"]


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violation found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


METHOD_NAMES = ("lasso", "enet", "stabl", "staben", "jitter_oracle", "jitter_dd")


@dataclass
class SimulationConfig:
    # design
    n: int = 100
    p: int = 1000
    active_set: tuple = (200, 400, 600, 800, 1000)
    coefficients: tuple = (5.0, 4.0, 3.0, 2.0, 1.0)
    rho_rel: float = 0.5
    rho_irr: float = 0.05
    rho_mix: float = 0.4
    sigma_eps: float = 1.0
    pd_floor: float = 1e-8
    # campaign
    delta_obs: tuple = (0.0, 0.5, 1.0, 1.5, 2.0)
    n_rep: int = 200
    base_seed: int = 2026
    workers: int = 1
    output_dir: str = "results"
    # methods
    methods: tuple = METHOD_NAMES
    lam: str = "auto"
    enet_alpha: float = 0.5
    stab_taus: tuple = (0.6, 0.7, 0.8, 0.9)
    stab_bags: int = 100
    # jitter grid
    grid: str = "0.05:2.5:10"
    bags: int = 100
    # path command
    path_grid: str = "0.01:5:25:log"
    path_alpha: float = 1.0
    # theory battery
    theory_alpha: float = 0.05
    C_t: float = 4.0
    extra: dict = field(default_factory=dict)

    def validate(self):
        from .jitter import parse_grid

        problems = []
        for name in ("n", "p", "n_rep", "workers", "stab_bags", "bags"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive, got {getattr(self, name)}")
        if self.n < 2:
            problems.append("n must be at least 2")
        if self.p < 2:
            problems.append("p must be at least 2")
        if len(self.active_set) != len(self.coefficients):
            problems.append("active_set and coefficients must have equal length")
        if len(set(self.active_set)) != len(self.active_set):
            problems.append("active_set indices must be distinct")
        if any(not 1 <= j <= self.p for j in self.active_set):
            problems.append(f"active_set indices must lie in 1..{self.p}")
        for name in ("rho_rel", "rho_irr", "rho_mix"):
            if not -1 < getattr(self, name) < 1:
                problems.append(f"{name} must lie in (-1, 1)")
        if self.sigma_eps < 0:
            problems.append("sigma_eps must be nonnegative")
        if self.pd_floor <= 0:
            problems.append("pd_floor must be positive")
        if not self.delta_obs or any(d < 0 for d in self.delta_obs):
            problems.append("delta_obs must be a nonempty list of nonnegative levels")
        if not self.methods:
            problems.append("methods must be nonempty")
        for m in self.methods:
            if m not in METHOD_NAMES:
                problems.append(f"unknown method {m!r}; choose from {', '.join(METHOD_NAMES)}")
        if self.lam not in ("auto", "auto-1se"):
            try:
                if float(self.lam) <= 0:
                    problems.append("lambda must be positive")
            except ValueError:
                problems.append(f"lambda must be a positive real, 'auto' or 'auto-1se', got {self.lam!r}")
        if not 0 < self.enet_alpha <= 1 or not 0 < self.path_alpha <= 1:
            problems.append("elastic-net alpha must lie in (0, 1]")
        if any(not 0.5 < t <= 1 for t in self.stab_taus):
            problems.append("stability thresholds must lie in (0.5, 1]")
        for name in ("grid", "path_grid"):
            try:
                parse_grid(getattr(self, name))
            except ValueError as exc:
                problems.append(f"{name}: {exc}")
        if not 0 < self.theory_alpha < 1:
            problems.append("theory alpha must lie in (0, 1)")
        if problems:
            raise ConfigError(problems)
        return self

    @property
    def active_set0(self):
        """Active set as 0-based column indices."""
        return tuple(j - 1 for j in self.active_set)

    def as_dict(self):
        d = asdict(self)
        d.pop("extra")
        return d


# key in file -> (section, attribute, parser)
def _ints(v):
    return tuple(int(x) for x in _split(v))


def _floats(v):
    return tuple(float(x) for x in _split(v))


def _strs(v):
    return tuple(x for x in _split(v))


def _split(v):
    return [x.strip() for x in v.split(",") if x.strip()]


def _bool_free_str(v):
    return v.strip()


SCHEMA = {
    "design": {
        "n": ("n", int),
        "p": ("p", int),
        "active_set": ("active_set", _ints),
        "coefficients": ("coefficients", _floats),
        "rho_rel": ("rho_rel", float),
        "rho_irr": ("rho_irr", float),
        "rho_mix": ("rho_mix", float),
        "sigma_eps": ("sigma_eps", float),
        "pd_floor": ("pd_floor", float),
    },
    "simulation": {
        "delta_obs": ("delta_obs", _floats),
        "n_rep": ("n_rep", int),
        "base_seed": ("base_seed", int),
        "workers": ("workers", int),
        "output_dir": ("output_dir", _bool_free_str),
    },
    "methods": {
        "methods": ("methods", _strs),
        "lambda": ("lam", _bool_free_str),
        "enet_alpha": ("enet_alpha", float),
        "stability_taus": ("stab_taus", _floats),
        "stability_bags": ("stab_bags", int),
    },
    "jitter": {
        "grid": ("grid", _bool_free_str),
        "bags": ("bags", int),
    },
    "path": {
        "grid": ("path_grid", _bool_free_str),
        "alpha": ("path_alpha", float),
    },
    "theory": {
        "alpha": ("theory_alpha", float),
        "C_t": ("C_t", float),
    },
}

TABLE1_DEFAULTS = SimulationConfig()


def parse_config(text, base=None):
    """Parse configuration text on top of ``base`` (defaults if None)."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax error: {exc}"]) from None
    values = {} if base is None else base.as_dict()
    problems = []
    for section in parser.sections():
        if section not in SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                problems.append(f"unknown key {key!r} in [{section}]")
                continue
            attr, conv = SCHEMA[section][key]
            try:
                values[attr] = conv(raw)
            except ValueError as exc:
                problems.append(f"[{section}] {key}: cannot parse {raw!r} ({exc})")
    if problems:
        raise ConfigError(problems)
    cfg = SimulationConfig(**values)
    return cfg.validate()


def load_config(path, base=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base)


def config_hash(cfg):
    """SHA-256 of the canonical JSON form; independent of key order."""
    d = cfg.as_dict()
    d.pop("workers", None)
    d.pop("output_dir", None)
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=list)
    return hashlib.sha256(blob.encode()).hexdigest()


def field_names():
    return [f.name for f in fields(SimulationConfig)]
