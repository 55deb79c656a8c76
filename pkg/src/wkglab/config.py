"""Strict sectioned ``key = value`` run configuration.

Every key has a type, a default and a range check. Unknown sections or keys,
type mismatches and out-of-range values raise :class:`ConfigError` carrying the
line number. ``serialize`` writes every field (defaults included) so that
``parse_config(serialize(cfg)) == cfg``.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from . import models
from .evolution import SchemeConfig
from .models import FRModel, InitialData, WKGModel

OUTPUT_ROOT_ENV = "WKGLAB_OUTPUT_ROOT"


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.key = key


@dataclass(frozen=True)
class Field:
    kind: str  # float, int, bool, str, choice, set, window
    default: Any
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple[str, ...] = ()
    optional: bool = False


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


SCHEMA: dict[str, dict[str, Field]] = {
    "model": {
        "kind": Field("choice", "wkg", choices=("wkg", "fr")),
        "c": Field("float", 1.0, _pos, "> 0"),
        "kappa": Field("float", None, _pos, "> 0", optional=True),
        "q": Field("float", 1.0),
        "coupling": Field("bool", True),
        "nonlinearities": Field("set", tuple(sorted(models.CATALOG)), choices=tuple(sorted(models.CATALOG))),
        "null_coeff": Field("float", 1.0),
        "quasi_null_coeff": Field("float", 0.1),
    },
    "data": {
        "epsilon": Field("float", 1e-3, _nonneg, ">= 0"),
        "u": Field("float", 1.0),
        "phi": Field("float", 1.0),
        "power": Field("int", 6, lambda p: 3 <= p <= 12, "in 3..12"),
        "support": Field("float", 1.0, lambda x: 0 < x <= 1, "in (0, 1]"),
        "rho": Field("choice", "well_prepared", choices=("well_prepared", "ill_prepared")),
    },
    "grid": {
        "dr": Field("float", 0.05, _pos, "> 0"),
        "r_max": Field("float", 10.0, _pos, "> 0"),
    },
    "scheme": {
        "cfl": Field("float", 0.5, lambda x: 0 < x <= 1, "in (0, 1]"),
        "dt": Field("float", None, _pos, "> 0", optional=True),
        "dissipation": Field("float", 0.0, lambda x: 0 <= x < 1, "in [0, 1)"),
        "stiff": Field("bool", False),
        "sponge_width": Field("float", None, _nonneg, ">= 0", optional=True),
        "sponge_strength": Field("float", 2.0, _nonneg, ">= 0"),
    },
    "run": {
        "mode": Field("choice", "cartesian", choices=("cartesian", "hyperboloidal")),
        "start": Field("float", 2.0, _pos, "> 0"),
        "stop": Field("float", 10.0, _pos, "> 0"),
        "record_every": Field("float", 0.25, _pos, "> 0"),
        "checkpoint_every": Field("int", 0, _nonneg, ">= 0"),
        "deterministic": Field("bool", True),
    },
    "analysis": {
        "energy_order": Field("int", 2, lambda n: 0 <= n <= 2, "in 0..2"),
        "energy_radius": Field("float", None, _pos, "> 0", optional=True),
        "fit_window": Field("window", None, optional=True),
        "energy_factor": Field("float", 2.0, _pos, "> 0"),
    },
    "output": {
        "directory": Field("str", None, optional=True),
    },
}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(section: str, key: str, raw: str, f: Field, line: int | None):
    name = f"{section}.{key}"
    text = raw.strip()
    if text == "" and f.optional:
        return None
    try:
        if f.kind == "float":
            v = float(text)
            if not math.isfinite(v):
                raise ValueError
        elif f.kind == "int":
            v = int(text)
        elif f.kind == "bool":
            low = text.lower()
            if low not in _TRUE | _FALSE:
                raise ValueError
            v = low in _TRUE
        elif f.kind == "choice":
            if text not in f.choices:
                raise ConfigError(f"{name} must be one of {', '.join(f.choices)}, got {text!r}", line, name)
            v = text
        elif f.kind == "set":
            items = tuple(sorted({x.strip() for x in text.split(",") if x.strip()}))
            bad = [x for x in items if x not in f.choices]
            if bad:
                raise ConfigError(f"{name}: unknown entries {bad}; allowed {list(f.choices)}", line, name)
            v = items
        elif f.kind == "window":
            lo, sep, hi = text.partition(":")
            if not sep:
                raise ValueError
            v = (float(lo), float(hi))
            if not v[0] < v[1]:
                raise ConfigError(f"{name} must satisfy lo < hi", line, name)
        else:
            v = text
    except ValueError:
        raise ConfigError(f"{name}: expected {f.kind}, got {raw!r}", line, name) from None
    if f.check is not None and not f.check(v):
        raise ConfigError(f"{name} = {v!r} is out of range (must be {f.rule})", line, name)
    return v


def _line_numbers(text: str) -> dict[tuple[str | None, str | None], int]:
    """(section, key) -> 1-based line number, keys lower-cased like configparser."""
    out: dict[tuple[str | None, str | None], int] = {}
    section = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            out.setdefault((section, None), i)
        elif "=" in s:
            out.setdefault((section, s.split("=", 1)[0].strip().lower()), i)
    return out


@dataclass(frozen=True)
class RunConfig:
    values: tuple[tuple[str, tuple[tuple[str, Any], ...]], ...]

    def section(self, name: str) -> dict[str, Any]:
        return dict(dict(self.values)[name])

    def get(self, section: str, key: str):
        return self.section(section)[key]

    def as_dict(self) -> dict[str, dict[str, Any]]:
        return {s: dict(kv) for s, kv in self.values}

    # -- builders -----------------------------------------------------------

    def model(self):
        m = self.section("model")
        common = dict(c=m["c"], coupling=m["coupling"], nonlinearities=frozenset(m["nonlinearities"]),
                      null_coeff=m["null_coeff"], quasi_null_coeff=m["quasi_null_coeff"])
        if m["kind"] == "fr":
            return FRModel(m["kappa"], q=m["q"], **common)
        return WKGModel(**common)

    def initial_data(self) -> InitialData:
        d = self.section("data")
        return InitialData.bumps(d["epsilon"], u=d["u"], phi=d["phi"], support=d["support"],
                                 power=d["power"], rho=d["rho"])

    def scheme(self) -> SchemeConfig:
        return SchemeConfig(**self.section("scheme"))

    def output_dir(self, override: str | None = None) -> Path:
        if override:
            return Path(override)
        d = self.get("output", "directory")
        if d:
            return Path(d)
        return Path(os.environ.get(OUTPUT_ROOT_ENV, "wkglab-output"))


def _validate(values: dict[str, dict[str, Any]], lines) -> None:
    m = values["model"]
    if m["kind"] == "fr" and m["kappa"] is None:
        raise ConfigError("model.kappa is required for kind = fr", lines.get(("model", "kind")), "model.kappa")
    r = values["run"]
    if not r["stop"] > r["start"]:
        raise ConfigError("run.stop must exceed run.start", lines.get(("run", "stop")), "run.stop")
    g = values["grid"]
    if g["r_max"] / g["dr"] < 4:
        raise ConfigError("grid needs at least 5 nodes (r_max / dr >= 4)", lines.get(("grid", "r_max")), "grid.r_max")


def parse_config(text: str) -> RunConfig:
    lines = _line_numbers(text)
    cp = configparser.ConfigParser(interpolation=None, strict=True, empty_lines_in_values=False,
                                   default_section="\0none")
    try:
        cp.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.section}.{exc.option}", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if getattr(exc, "errors", None) else None
        raise ConfigError("malformed line", line) from None
    out: dict[str, dict[str, Any]] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", lines.get((section, None)), section)
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}", lines.get((section, key)), f"{section}.{key}")
    for section, fields in SCHEMA.items():
        out[section] = {}
        for key, f in fields.items():
            if cp.has_option(section, key):
                out[section][key] = _convert(section, key, cp.get(section, key), f, lines.get((section, key)))
            else:
                out[section][key] = f.default
    _validate(out, lines)
    return RunConfig(tuple((s, tuple(kv.items())) for s, kv in out.items()))


def _format(f: Field, v) -> str:
    if v is None:
        return ""
    if f.kind == "float":
        return repr(float(v))
    if f.kind == "bool":
        return "true" if v else "false"
    if f.kind == "set":
        return ",".join(v)
    if f.kind == "window":
        return f"{v[0]!r}:{v[1]!r}"
    return str(v)


def serialize(config: RunConfig) -> str:
    chunks = []
    for section, kv in config.values:
        body = [f"[{section}]"]
        for key, v in kv:
            body.append(f"{key} = {_format(SCHEMA[section][key], v)}".rstrip())
        chunks.append("\n".join(body))
    return "\n\n".join(chunks) + "\n"


def load_config(path: str | os.PathLike) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"config file not found: {path}") from None
    return parse_config(text)
