"""Run configuration files: a sectioned ``key = value`` text format.

Example::

    [run]
    command = matpoint

    [material]
    preset = vhb4910
    kappa = 146200 kPa

    [loading]
    mode = uniaxial
    shape = cycle
    peak = 3
    rate = 0.05 1/s

    [numerics]
    dt = 0.05 s

    [output]
    every = 0.5 s

Comments start with ``#``.  Numbers may carry a unit suffix from the
table in :data:`UNITS`; values are converted to kPa, s and m.  Every key
is checked against the schema of the selected command; unknown or
repeated keys are errors that cite line numbers.
"""

import math
import re
from dataclasses import dataclass, field

from .material import PARAM_NAMES, VHB4910, MaterialParams, ParameterError

COMMANDS = ("matpoint", "shell-exact", "patch-test", "shell-fem", "convergence")
SECTIONS = ("run", "material", "loading", "numerics", "output")
PRESETS = {"vhb4910": VHB4910}

# unit -> factor to the base unit, per dimension
UNITS = {
    "stress": {"kPa": 1.0, "Pa": 1e-3, "MPa": 1e3},
    "viscosity": {"kPa*s": 1.0, "Pa*s": 1e-3, "MPa*s": 1e3},
    "inv_stress2": {"1/kPa^2": 1.0, "1/Pa^2": 1e6, "1/MPa^2": 1e-6},
    "time": {"s": 1.0, "ms": 1e-3, "min": 60.0},
    "rate": {"1/s": 1.0, "1/min": 1.0 / 60.0},
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3},
    "none": {},
}

_REQUIRED = object()


class ConfigError(ValueError):
    """Malformed or inconsistent configuration; ``line`` is 1-based or None."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class Key:
    kind: str  # "number", "int", "choice", "levels", "ints"
    default: object = _REQUIRED
    dim: str = "none"
    choices: tuple = ()
    positive: bool = False
    allow_inf: bool = False


_MATERIAL_DIMS = dict(mu1="stress", mu2="stress", m1="stress", m2="stress",
                      kappa="stress", eta0="viscosity", etaInf="viscosity",
                      K1="viscosity", K2="inv_stress2")

MATERIAL_KEYS = {n: Key("number", _REQUIRED, _MATERIAL_DIMS.get(n, "none"),
                        allow_inf=(n == "kappa")) for n in PARAM_NAMES}
MATERIAL_KEYS["preset"] = Key("choice", None, choices=tuple(PRESETS))

_TOLS = dict(tol1=Key("number", 1e-8, positive=True), tol2=Key("number", 1e-9, positive=True),
             safety=Key("number", 1.0, positive=True))
_PROGRAM = dict(shape=Key("choice", "cycle", choices=("cycle", "ramp")),
                peak=Key("number", positive=True), rate=Key("number", dim="rate", positive=True),
                hold=Key("number", 0.0, dim="time"))
_SHELL = dict(A=Key("number", 0.9, dim="length", positive=True),
              B=Key("number", 1.0, dim="length", positive=True),
              rate=Key("number", dim="rate", positive=True),
              t_end=Key("number", dim="time", positive=True))

LOADING_KEYS = {
    "matpoint": dict(_PROGRAM, mode=Key("choice", "uniaxial", choices=("uniaxial", "prescribed")),
                     lateral=Key("choice", "isochoric", choices=("isochoric", "fixed"))),
    "patch-test": dict(_PROGRAM),
    "shell-exact": dict(_SHELL),
    "shell-fem": dict(_SHELL),
    "convergence": dict(_SHELL),
}

NUMERICS_KEYS = {
    "matpoint": dict(_TOLS, dt=Key("number", dim="time", positive=True)),
    "patch-test": dict(_TOLS, dt=Key("number", dim="time", positive=True),
                       meshes=Key("ints", (1, 2)), distort=Key("number", 0.15),
                       seed=Key("int", 0)),
    "shell-exact": dict(safety=_TOLS["safety"], dt=Key("number", dim="time", positive=True),
                        n_gauss=Key("int", 100, positive=True)),
    "shell-fem": dict(_TOLS, dt=Key("number", dim="time", positive=True),
                      mesh=Key("levels", ((2, 3),))),
    "convergence": dict(_TOLS, n_steps=Key("int", 10, positive=True),
                        n_gauss=Key("int", 100, positive=True),
                        levels=Key("levels", ((1, 2), (2, 3), (3, 4)))),
}

OUTPUT_KEYS = {"every": Key("number", None, dim="time", positive=True)}


def schema(command):
    return {"material": MATERIAL_KEYS, "loading": LOADING_KEYS[command],
            "numerics": NUMERICS_KEYS[command], "output": OUTPUT_KEYS}


@dataclass(frozen=True)
class RunConfig:
    """Validated run description with every default filled in (base units)."""

    command: str
    material: MaterialParams
    loading: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)


_NUM = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[+-]?inf)\s*(.*)$")


def _number(raw, name, key, line):
    m = _NUM.match(raw)
    if not m:
        raise ConfigError(f"{name}: expected a number, got {raw!r}", line)
    value = float(m.group(1))
    unit = m.group(2).strip().replace(" ", "")
    if unit:
        table = UNITS[key.dim]
        if unit not in table:
            raise ConfigError(f"{name}: unit {unit!r} is not valid here"
                              + (f" (expected one of {', '.join(table)})" if table else
                                 " (dimensionless value)"), line)
        value *= table[unit]
    return value


def _convert(name, key, raw, line):
    if key.kind == "choice":
        if raw not in key.choices:
            raise ConfigError(f"{name} must be one of {', '.join(key.choices)}", line)
        return raw
    if key.kind == "int":
        try:
            v = int(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}", line) from None
        if key.positive and v < 1:
            raise ConfigError(f"{name} must be positive", line)
        return v
    if key.kind == "ints":
        try:
            v = tuple(int(x) for x in raw.replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"{name}: expected integers, got {raw!r}", line) from None
        if not v or min(v) < 1:
            raise ConfigError(f"{name}: need at least one positive integer", line)
        return v
    if key.kind == "levels":
        out = []
        for item in raw.split(","):
            m = re.fullmatch(r"\s*(\d+)\s*x\s*(\d+)\s*", item)
            if not m or min(int(m.group(1)), int(m.group(2))) < 1:
                raise ConfigError(f"{name}: expected entries like '2x3', got {item.strip()!r}",
                                  line)
            out.append((int(m.group(1)), int(m.group(2))))
        return tuple(out)
    v = _number(raw, name, key, line)
    if math.isinf(v) and not key.allow_inf:
        raise ConfigError(f"{name} must be finite", line)
    if key.positive and not v > 0:
        raise ConfigError(f"{name} must be positive", line)
    return v


def _tokenize(text):
    """Section -> {key: (raw value, line)}; rejects duplicates and stray lines."""
    sections, current, seen = {}, None, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        m = re.fullmatch(r"\[\s*([\w-]+)\s*\]", s)
        if m:
            current = m.group(1)
            if current not in SECTIONS:
                raise ConfigError(f"unknown section [{current}]", lineno)
            if current in seen:
                raise ConfigError(f"section [{current}] repeated (first at line "
                                  f"{seen[current]})", lineno)
            seen[current] = lineno
            sections[current] = {}
            continue
        if "=" not in s:
            raise ConfigError(f"expected 'key = value', got {s!r}", lineno)
        if current is None:
            raise ConfigError("assignment before any [section]", lineno)
        k, v = (x.strip() for x in s.split("=", 1))
        if not k or not v:
            raise ConfigError(f"expected 'key = value', got {s!r}", lineno)
        if k in sections[current]:
            first = sections[current][k][1]
            raise ConfigError(f"duplicate key {k!r} in [{current}] at lines {first} and "
                              f"{lineno}", lineno)
        sections[current][k] = (v, lineno)
    return sections, seen


def _fill(section, entries, keys, header_line):
    out = {}
    for k, (raw, line) in entries.items():
        if k not in keys:
            raise ConfigError(f"unknown key {k!r} in [{section}]", line)
        out[k] = _convert(k, keys[k], raw, line)
    for k, key in keys.items():
        if k not in out:
            if key.default is _REQUIRED:
                raise ConfigError(f"missing required key {k!r} in [{section}]", header_line)
            out[k] = key.default
    return out


def parse_config(text):
    """Parse and validate configuration text into a :class:`RunConfig`."""
    sections, lines = _tokenize(text)
    if "run" not in sections:
        raise ConfigError("missing section [run]")
    run = sections["run"]
    for k, (_, line) in run.items():
        if k != "command":
            raise ConfigError(f"unknown key {k!r} in [run]", line)
    if "command" not in run:
        raise ConfigError("missing required key 'command' in [run]", lines["run"])
    command, line = run["command"]
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}", line)
    for name in ("material", "loading", "numerics"):
        if not sections.get(name):
            raise ConfigError(f"missing or empty section [{name}]", lines.get(name))
    sch = schema(command)

    mat = dict(sections["material"])
    preset = mat.pop("preset", None)
    base = {}
    if preset is not None:
        base = dict(PRESETS[_convert("preset", MATERIAL_KEYS["preset"], *preset)],
                    kappa=math.inf)
    keys = {k: (Key(v.kind, base[k], v.dim, allow_inf=v.allow_inf) if k in base else v)
            for k, v in MATERIAL_KEYS.items() if k != "preset"}
    values = _fill("material", mat, keys, lines["material"])
    try:
        material = MaterialParams(**values)
    except ParameterError as exc:
        raise ConfigError(str(exc), lines["material"]) from exc

    loading = _fill("loading", sections["loading"], sch["loading"], lines["loading"])
    numerics = _fill("numerics", sections["numerics"], sch["numerics"], lines["numerics"])
    output = _fill("output", sections.get("output", {}), sch["output"], lines.get("output"))
    if "A" in loading and not loading["A"] < loading["B"]:
        raise ConfigError("need A < B", lines["loading"])
    return RunConfig(command, material, loading, numerics, output)


def _format(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple) and value and isinstance(value[0], tuple):
        return ", ".join(f"{a}x{b}" for a, b in value)
    if isinstance(value, tuple):
        return " ".join(str(v) for v in value)
    return str(value)


def serialize(cfg):
    """Text form of a :class:`RunConfig` in base units with every value explicit."""
    lines = ["[run]", f"command = {cfg.command}", "", "[material]"]
    lines += [f"{k} = {_format(float(v))}" for k, v in cfg.material.as_dict().items()]
    for name in ("loading", "numerics", "output"):
        items = [(k, v) for k, v in getattr(cfg, name).items() if v is not None]
        if items or name != "output":
            lines += ["", f"[{name}]"] + [f"{k} = {_format(v)}" for k, v in items]
    return "\n".join(lines) + "\n"


def as_record(cfg):
    """JSON-friendly dict of every value in effect, defaults included."""
    conv = lambda v: [list(x) if isinstance(x, tuple) else x for x in v] \
        if isinstance(v, tuple) else ("inf" if isinstance(v, float) and math.isinf(v) else v)
    return {"command": cfg.command,
            "material": {k: conv(v) for k, v in cfg.material.as_dict().items()},
            "loading": {k: conv(v) for k, v in cfg.loading.items()},
            "numerics": {k: conv(v) for k, v in cfg.numerics.items()},
            "output": {k: conv(v) for k, v in cfg.output.items()}}
