"""Scenario files: TOML documents with a fixed schema, plus builders for the numerical objects."""
from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np
import tomli

from .analytic import parse_descriptor, sample_analytic
from .exponents import ExponentConfig
from .grid import Field, GridSpec
from .regions import Ball, Box, RegionSpec


class ConfigError(ValueError):
    def __init__(self, msg, line=None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line


FLOAT, INT, STR, BOOL = "float", "int", "str", "bool"
FLOATS, STRS, NUMS, MATRIX = "float[]", "str[]", "num[]", "float[][]"

# section -> key -> kind (order is the canonical order)
SCHEMA: Dict[str, Dict[str, str]] = {
    "grid": {"dim": INT, "half_width": FLOAT, "points": INT},
    "exponents": {"s": FLOATS, "b": NUMS},
    "region": {"O": STRS, "omega": STRS, "kappa": FLOAT},
    "fields": {"v": STRS, "eps": FLOAT},
    "pipeline": {"M_max": INT, "m_residue": INT, "x": FLOATS, "samples": MATRIX, "delta": FLOAT,
                 "support_delta": FLOAT, "seed": INT, "t": FLOATS, "s": FLOATS, "tol": FLOAT},
    "ip2": {"omega": STRS, "w1": STRS, "w2": STRS, "s": FLOATS, "b": FLOATS, "q": STR,
            "n_sources": INT, "n_receivers": INT, "eta": FLOAT, "tol": FLOAT},
    "symbol": {"matrix": MATRIX, "x0": FLOATS, "xi": FLOATS, "lambdas": FLOATS, "expected": FLOAT,
               "tol": FLOAT},
}


@dataclass
class ScenarioConfig:
    sections: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        try:
            return self.sections[section][key]
        except KeyError:
            raise ConfigError(f"missing [{section}] {key}") from None

    def has(self, section: str) -> bool:
        return section in self.sections


def _locate(text: str, section: str, key: str = None):
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return i
            continue
        if key is not None and cur == section and re.match(rf"^\"?{re.escape(key)}\"?\s*=", s):
            return i
    return None


def _coerce(kind: str, value, where: str, line):
    def num(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {v!r}", line)
        return float(v)

    if kind == FLOAT:
        return num(value)
    if kind == INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}", line)
        return value
    if kind == BOOL:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false", line)
        return value
    if kind == STR:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string", line)
        return value
    if not isinstance(value, list):
        raise ConfigError(f"{where}: expected a list", line)
    if kind == FLOATS:
        return [num(v) for v in value]
    if kind == STRS:
        return [_coerce(STR, v, where, line) for v in value]
    if kind == NUMS:
        return [v if isinstance(v, str) else num(v) for v in value]
    if kind == MATRIX:
        return [[num(v) for v in _coerce(FLOATS, row, where, line)] for row in value]
    raise AssertionError(kind)


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a scenario document; unknown sections or keys are errors."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    out = {}
    for sec, body in raw.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", _locate(text, sec))
        if not isinstance(body, dict):
            raise ConfigError(f"[{sec}] must be a table", _locate(text, sec))
        vals = {}
        for key, value in body.items():
            line = _locate(text, sec, key)
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", line)
            vals[key] = _coerce(SCHEMA[sec][key], value, f"[{sec}] {key}", line)
        out[sec] = vals
    return ScenarioConfig(out)


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _toml_str(v: str) -> str:
    """TOML basic string; only quote, backslash and control characters are escaped."""
    out = []
    for ch in v:
        if ch in '"\\':
            out.append("\\" + ch)
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def _fmt(kind, v) -> str:
    if kind == FLOAT:
        return repr(float(v))
    if kind == INT:
        return str(int(v))
    if kind == BOOL:
        return "true" if v else "false"
    if kind == STR:
        return _toml_str(v)
    if kind == FLOATS:
        return "[" + ", ".join(repr(float(x)) for x in v) + "]"
    if kind == STRS:
        return "[" + ", ".join(_toml_str(x) for x in v) + "]"
    if kind == NUMS:
        return "[" + ", ".join(_toml_str(x) if isinstance(x, str) else repr(float(x)) for x in v) + "]"
    if kind == MATRIX:
        return "[" + ", ".join(_fmt(FLOATS, row) for row in v) + "]"
    raise AssertionError(kind)


def serialize_config(cfg: ScenarioConfig) -> str:
    """Canonical text: schema order for sections and keys, ``repr`` floats."""
    parts = []
    for sec, keys in SCHEMA.items():
        if sec not in cfg.sections:
            continue
        body = cfg.sections[sec]
        lines = [f"[{sec}]"]
        for key, kind in keys.items():
            if key in body:
                lines.append(f"{key} = {_fmt(kind, body[key])}")
        parts.append("\n".join(lines))
    return "\n\n".join(parts) + "\n"


# --------------------------------------------------------------------------
# builders


def parse_shape(text: str):
    """``ball([c...], r)`` or ``box([lo...], [hi...])``."""
    try:
        node = ast.parse(text.strip(), mode="eval").body
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse shape {text!r}: {exc.msg}") from None
    if not (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)) or node.keywords:
        raise ConfigError(f"shape must be ball(...) or box(...): {text!r}")
    try:
        args = [ast.literal_eval(a) for a in node.args]
    except ValueError:
        raise ConfigError(f"shape arguments must be literals: {text!r}") from None
    name = node.func.id
    if name == "ball" and len(args) == 2:
        return Ball(tuple(float(c) for c in np.atleast_1d(args[0])), float(args[1]))
    if name == "box" and len(args) == 2:
        return Box(tuple(float(c) for c in np.atleast_1d(args[0])), tuple(float(c) for c in np.atleast_1d(args[1])))
    raise ConfigError(f"unknown shape {text!r}")


def build_grid(cfg: ScenarioConfig) -> GridSpec:
    return GridSpec(cfg.get("grid", "dim", 2), cfg.get("grid", "half_width", 12.0), cfg.get("grid", "points", 256))


def _complex(v):
    return complex(v.replace(" ", "").replace("i", "j")) if isinstance(v, str) else complex(v)


def build_exponents(cfg: ScenarioConfig) -> ExponentConfig:
    s = cfg.require("exponents", "s")
    b = cfg.get("exponents", "b", [1.0] * len(s))
    if len(b) != len(s):
        raise ConfigError("[exponents] s and b differ in length")
    return ExponentConfig.of(s, [_complex(x) for x in b])


def build_region(cfg: ScenarioConfig) -> RegionSpec:
    return RegionSpec([parse_shape(t) for t in cfg.require("region", "O")],
                      [parse_shape(t) for t in cfg.require("region", "omega")],
                      cfg.get("region", "kappa", 0.3))


def build_fields(cfg: ScenarioConfig, grid: GridSpec) -> List[Field]:
    return [sample_analytic(grid, parse_descriptor(t)) for t in cfg.require("fields", "v")]


_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs,
          "tanh": np.tanh, "log": np.log}
_OPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide, ast.Pow: np.power}


def eval_expression(text: str, grid: GridSpec) -> np.ndarray:
    """Evaluate an arithmetic expression in ``x1, x2, x3`` (``x`` = ``x1``) on the grid."""
    coords = grid.coords()
    names = {"pi": math.pi, "e": math.e, "x": coords[0]}
    for i, c in enumerate(coords):
        names[f"x{i + 1}"] = c

    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name) and node.id in names:
            return names[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
                and len(node.args) == 1 and not node.keywords:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"unsupported expression element in {text!r}")

    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    return np.broadcast_to(np.asarray(ev(tree.body), float), grid.shape).copy()


def build_ip2(cfg: ScenarioConfig, grid: GridSpec):
    """Reference geometry (q = 0) and the potential samples."""
    from .calderon import ExteriorProblem
    ecfg = ExponentConfig.of(cfg.require("ip2", "s"), cfg.get("ip2", "b", None))
    shapes = {k: [parse_shape(t) for t in cfg.require("ip2", k)] for k in ("omega", "w1", "w2")}
    geo = ExteriorProblem(grid, shapes["omega"], shapes["w1"], shapes["w2"], ecfg, 0.0)
    q = eval_expression(cfg.get("ip2", "q", "0"), grid)
    return geo, q
