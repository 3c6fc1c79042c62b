"""Line-oriented experiment configuration.

Format: ``[section]`` headers followed by ``key = value`` lines; ``#`` starts
a comment; booleans are true/false; arrays are comma separated. In the
``[obstacles]`` section ``disk = cx, cy, r`` may repeat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

EXPERIMENTS = ("simulate", "resolvent", "decay", "rays", "foliation", "ikawa", "convolution", "report")


class ConfigError(Exception):
    """Parse error or unknown key (exit status 2)."""

    def __init__(self, line: int, message: str, text: str = ""):
        self.line, self.text = line, text
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{message}" + (f": {text!r}" if text else ""))


class ValidationError(Exception):
    """A value parsed but is out of range (exit status 3)."""


def _bool(s):
    if s.lower() in ("true", "false"):
        return s.lower() == "true"
    raise ValueError("expected true or false")


def _floats(s):
    return tuple(float(v) for v in s.split(",") if v.strip())


def _positive(name):
    def check(v):
        if not v > 0:
            raise ValidationError(f"{name} must be positive")
    return check


def _nonneg(name):
    def check(v):
        if not v >= 0:
            raise ValidationError(f"{name} must be nonnegative")
    return check


def _choice(name, options):
    def check(v):
        if v not in options:
            raise ValidationError(f"{name} must be one of {', '.join(options)}")
    return check


def _power_of_two(name):
    def check(v):
        if v < 8 or v & (v - 1):
            raise ValidationError(f"{name} must be a power of two >= 8")
    return check


def _odd_power(v):
    if v < 3 or v % 2 == 0:
        raise ValidationError("p must be an odd integer >= 3")


# section -> key -> (parser, default, validator)
SCHEMA = {
    "experiment": {
        "kind": (str, None, _choice("kind", EXPERIMENTS)),
        "seed": (int, 0, _nonneg("seed")),
        "threads": (int, 1, _positive("threads")),
    },
    "geometry": {
        "kind": (str, "open_book", _choice("geometry kind", (
            "open_book", "circle_half", "circle", "torus", "flat_torus", "disk_with_holes", "peanut"))),
        "l1": (float, 2 * math.pi, _positive("l1")),
        "l2": (float, 2 * math.pi, _positive("l2")),
        "n1": (int, 64, _power_of_two("n1")),
        "n2": (int, 64, _power_of_two("n2")),
        "alpha": (float, 1.0, _positive("alpha")),
        "outer_radius": (float, 2.0, _positive("outer_radius")),
        "preset": (str, "", _choice("obstacle preset", ("", "equilateral", "collinear", "two_disk"))),
        "y_max": (float, 3.0, _positive("y_max")),
    },
    "obstacles": {},
    "damping": {
        "kind": (str, "power_abs", _choice("damping kind", (
            "power_abs", "constant", "undamped", "strip", "annulus", "band"))),
        "beta": (float, 2.0, _positive("beta")),
        "value": (float, 1.0, _nonneg("value")),
        "lo": (float, 0.0, None),
        "hi": (float, math.pi, None),
        "inner_radius": (float, 1.8, _positive("inner_radius")),
        "edge": (float, 0.8, _positive("edge")),
    },
    "nonlinearity": {
        "kind": (str, "zero", _choice("nonlinearity kind", ("zero", "odd_power"))),
        "p": (int, 3, _odd_power),
        "coefficient": (float, 1.0, _nonneg("coefficient")),
    },
    "numeric": {
        "mode": (str, "", None),
        "dt_fraction": (float, 0.5, _positive("dt_fraction")),
        "t_final": (float, 10.0, _positive("t_final")),
        "n_samples": (int, 101, _positive("n_samples")),
        "times": (_floats, (), None),
        "sigma": (float, 1.0, _nonneg("sigma")),
        "amplitude": (float, 1.0, _positive("amplitude")),
        "energy_tol": (float, 1e-5, _positive("energy_tol")),
        "mu_min": (float, 4.0, _positive("mu_min")),
        "mu_max": (float, 64.0, _positive("mu_max")),
        "mu_count": (int, 16, _positive("mu_count")),
        "mu_grid": (str, "resonance", _choice("mu_grid", ("resonance", "geometric", "linear"))),
        "use_blocks": (_bool, True, None),
        "k2_max": (int, 0, _nonneg("k2_max")),
        "shift": (float, 1.0, None),
        "decay": (str, "operator", _choice("decay", ("operator", "nonlinear"))),
        "low_block": (int, 1, _nonneg("low_block")),
        "edge_fraction": (float, 0.5, _positive("edge_fraction")),
        "instances": (int, 5, _positive("instances")),
        "n_modes": (int, 12, _positive("n_modes")),
        "epsilon": (float, 1e-3, _positive("epsilon")),
        "T": (float, 0.0, _nonneg("T")),
        "n_rays": (int, 10000, _positive("n_rays")),
        "refine": (_bool, False, None),
        "escape": (_bool, False, None),
        "escape_eps": (_floats, (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8), None),
        "foliation": (str, "peanut", _choice("foliation", (
            "peanut", "peanut_mirror", "torus_planes", "sphere", "disk"))),
        "sample_count": (int, 1000, _positive("sample_count")),
        "case": (str, "polynomial", _choice("case", ("polynomial", "stretched"))),
        "rate": (float, 2.0, _positive("rate")),
        "c": (float, 1.0, _positive("c")),
        "gamma": (float, 0.5, _positive("gamma")),
        "stability": (float, 1e-3, _positive("stability")),
    },
    "output": {
        "plot": (_bool, False, None),
    },
}


@dataclass
class Config:
    """Parsed values (defaults filled in) plus the raw text and obstacle list."""

    values: dict = field(default_factory=dict)
    obstacles: list = field(default_factory=list)
    explicit: set = field(default_factory=set)
    text: str = ""

    def __getitem__(self, key):
        section, name = key.split(".", 1)
        return self.values[section][name]

    def get(self, key, default=None):
        try:
            return self[key]
        except KeyError:
            return default

    def is_set(self, key) -> bool:
        return key in self.explicit

    def echo(self) -> dict:
        out = {s: dict(v) for s, v in self.values.items()}
        out["obstacles"] = [list(d) for d in self.obstacles]
        return out


def _convert(section, key, raw, line, text):
    spec = SCHEMA[section].get(key)
    if spec is None:
        raise ConfigError(line, f"unknown key '{section}.{key}'", text)
    parser = spec[0]
    try:
        return parser(raw)
    except ValueError as exc:
        raise ConfigError(line, f"cannot parse '{section}.{key}' ({exc})", text) from None


def parse_config(text: str, overrides=()) -> Config:
    """Parse config text and apply ``section.key=value`` overrides.

    Raises :class:`ConfigError` for syntax errors and unknown keys and
    :class:`ValidationError` for out-of-range values.
    """
    cfg = Config(values={s: {k: v[1] for k, v in keys.items()} for s, keys in SCHEMA.items()}, text=text)
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(lineno, f"unknown section '{section}'", line)
            continue
        if "=" not in stripped:
            raise ConfigError(lineno, "expected 'key = value'", line)
        if section is None:
            raise ConfigError(lineno, "key outside of a section", line)
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if section == "obstacles":
            if key != "disk":
                raise ConfigError(lineno, f"unknown key 'obstacles.{key}'", line)
            try:
                disk = _floats(raw)
            except ValueError:
                raise ConfigError(lineno, "disk expects 'cx, cy, r'", line) from None
            if len(disk) != 3:
                raise ConfigError(lineno, "disk expects 'cx, cy, r'", line)
            cfg.obstacles.append(disk)
            continue
        cfg.values[section][key] = _convert(section, key, raw, lineno, line)
        cfg.explicit.add(f"{section}.{key}")
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(0, "override must look like section.key=value", item)
        full, raw = (s.strip() for s in item.split("=", 1))
        section, key = full.split(".", 1)
        if section not in SCHEMA or section == "obstacles":
            raise ConfigError(0, f"unknown section '{section}'", item)
        cfg.values[section][key] = _convert(section, key, raw, 0, item)
        cfg.explicit.add(full)
    validate(cfg)
    return cfg


def validate(cfg: Config):
    for section, keys in SCHEMA.items():
        for key, (_, _, check) in keys.items():
            value = cfg.values[section][key]
            if check is not None and value is not None:
                check(value)
    if cfg["numeric.mu_min"] >= cfg["numeric.mu_max"]:
        raise ValidationError("mu_min must be smaller than mu_max")
    times = cfg["numeric.times"]
    if times and (any(t < 0 for t in times) or any(b <= a for a, b in zip(times, times[1:]))):
        raise ValidationError("times must be nonnegative and strictly increasing")
    for d in cfg.obstacles:
        if d[2] <= 0:
            raise ValidationError("obstacle radius must be positive")
