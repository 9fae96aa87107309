"""Experiment configuration: INI parsing, schema, symbolic values.

Grammar (configparser INI)::

    [experiment]  command, seed, output_dir, thresholds_report
    [grid]        dim, n, length
    [model]       p, mu, b, c, problem
    [solver]      gradient-flow and Petviashvili settings
    [evolution]   time stepping and stability experiment settings
    [thresholds]  lambda0 / mu0 / gncheck settings

Every numeric value may be an arithmetic expression over numbers, ``pi``
and the threshold names ``lambda1, b_star, b_lower, beta, lambda0, k_star,
mu0, B_pd, C_pd``. Threshold names come from ``experiment.thresholds_report``
when given; otherwise the cheap ones are computed on the fly from profiles.
"""

from __future__ import annotations

import ast
import configparser
import io
import math
import operator
from dataclasses import dataclass
from typing import Any, Callable

from .errors import ConfigError

COMMANDS = ("groundstate", "profile", "thresholds", "mu0", "lambda0", "evolve", "stability", "gncheck")
SYMBOLS = ("lambda1", "b_star", "b_lower", "beta", "lambda0", "k_star", "mu0", "B_pd", "C_pd")


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def opt_str(s: str) -> str | None:
    s = s.strip()
    return None if s in ("", "none") else s


def _floats(s: str) -> list[float]:
    return [float(t) for t in s.replace(",", " ").split()]


# (kind, default); kind "expr" is a float expression, "int" an integer expression
SCHEMA: dict[str, dict[str, tuple[str, Any]]] = {
    "experiment": {
        "command": ("str", "groundstate"),
        "seed": ("int", 0),
        "output_dir": ("str", "output"),
        "thresholds_report": ("optstr", None),
    },
    "grid": {"dim": ("int", 1), "n": ("int", 256), "length": ("expr", "32*pi")},
    "model": {
        "p": ("expr", 3.0),
        "mu": ("expr", 0.0),
        "b": ("expr", 1.0),
        "c": ("expr", 1.0),
        "problem": ("str", "VP"),
    },
    "solver": {
        "time_step": ("expr", 1.0),
        "shift": ("optexpr", None),
        "max_iters": ("int", 50_000),
        "energy_tol": ("expr", 1e-13),
        "residual_tol": ("expr", 1e-6),
        "equation_tol": ("expr", 1e-9),
        "initial_guess": ("str", "gaussian"),
        "initial_width": ("expr", 1.0),
        "initial_path": ("optstr", None),
        "multistart": ("bool", False),
        "profile": ("str", "qp"),
        "profile_max_iters": ("int", 5000),
        "fixed_point_tol": ("expr", 1e-11),
        "stabilization": ("optexpr", None),
    },
    "evolution": {
        "dt": ("expr", 1e-3),
        "t_final": ("expr", 1.0),
        "splitting": ("str", "strang"),
        "dealias": ("bool", False),
        "record_every": ("int", 10),
        "initial_path": ("optstr", None),
        "reference_path": ("optstr", None),
        "ground_state": ("optstr", None),
        "deltas": ("floats", "0.001 0.01"),
        "blowup_factor": ("expr", 1e6),
    },
    "thresholds": {
        "mu": ("optexpr", None),
        "mu0": ("bool", False),
        "mu0_lo": ("expr", 0.0),
        "mu0_hi": ("expr", 0.4),
        "mu0_tol": ("expr", 0.05),
        "mu0_n": ("int", 1024),
        "mu0_length": ("expr", "64*pi"),
        "mu0_max_iters": ("int", 20_000),
        "k_min": ("expr", 1e-2),
        "k_max": ("expr", 1e2),
        "k_count": ("int", 40),
        "samples": ("int", 1000),
        "profile_n": ("int", 512),
        "profile_length": ("expr", "32*pi"),
    },
}

# resolution order inside [model]: mu may reference lambda1, b may reference b_lower(mu)
_ORDER = [("grid", "dim"), ("grid", "n"), ("grid", "length"), ("model", "p"), ("model", "mu"), ("model", "c")]


_BINOPS: dict[type, Callable] = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: operator.pow, ast.Mod: operator.mod,
}
_UNARY: dict[type, Callable] = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS: dict[str, Callable] = {"sqrt": math.sqrt, "exp": math.exp, "log": math.log, "abs": abs}


def expression_names(text: str) -> set[str]:
    try:
        tree = ast.parse(str(text), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    return {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)} - set(_FUNCS) - {"pi"}


def evaluate(text: str | float, names: dict[str, float] | None = None) -> float:
    """Evaluate an arithmetic expression with a whitelist of node types."""
    if isinstance(text, (int, float)):
        return float(text)
    env = {"pi": math.pi, **(names or {})}
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise ConfigError(f"unknown name {node.id!r} in {text!r}")
            return float(env[node.id])
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
                and len(node.args) == 1 and not node.keywords:
            return float(_FUNCS[node.func.id](ev(node.args[0])))
        raise ConfigError(f"disallowed syntax in expression {text!r}")

    try:
        return ev(tree)
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise ConfigError(f"cannot evaluate {text!r}: {exc}") from None


@dataclass
class ExperimentConfig:
    """Fully resolved configuration: every value is a plain Python scalar."""

    values: dict[str, dict[str, Any]]

    @property
    def command(self) -> str:
        return self.values["experiment"]["command"]

    @property
    def seed(self) -> int:
        return self.values["experiment"]["seed"]

    def section(self, name: str) -> dict[str, Any]:
        return self.values[name]

    def __getitem__(self, dotted: str) -> Any:
        sec, key = dotted.split(".", 1)
        return self.values[sec][key]

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for sec, kv in self.values.items():
            cp[sec] = {k: _format(v) for k, v in kv.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _format(v: Any) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return " ".join(repr(float(t)) for t in v)
    return str(v)


def read_raw(path: str | None, overrides: list[str] | None = None) -> dict[str, dict[str, str]]:
    """Parse the file and apply dotted ``section.key=value`` overrides; rejects unknown keys."""
    cp = configparser.ConfigParser(interpolation=None)
    if path is not None:
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
    raw: dict[str, dict[str, str]] = {s: {} for s in SCHEMA}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, val in cp[sec].items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")
            raw[sec][key] = val
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        lhs, val = item.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError(f"unknown key {lhs.strip()}")
        raw[sec][key] = val.strip()
    return raw


def resolve(raw: dict[str, dict[str, str]], symbols: Callable[[str, dict], float] | None = None) -> ExperimentConfig:
    """Convert raw strings to typed values.

    ``symbols(name, partial)`` supplies threshold names on demand; ``partial``
    holds already-resolved grid/model values so that e.g. b_lower can use mu.
    """
    out: dict[str, dict[str, Any]] = {s: {} for s in SCHEMA}
    cache: dict[str, float] = {}

    def env_for(text) -> dict[str, float]:
        names = expression_names(text) if isinstance(text, str) else set()
        env = {}
        for nm in names:
            if nm not in SYMBOLS:
                raise ConfigError(f"unknown name {nm!r} in {text!r}")
            if nm not in cache:
                if symbols is None:
                    raise ConfigError(f"{nm!r} needs a thresholds report")
                cache[nm] = float(symbols(nm, out))
            env[nm] = cache[nm]
        return env

    def convert(sec, key, text):
        kind, _ = SCHEMA[sec][key]
        try:
            if kind == "str":
                return str(text).strip()
            if kind == "optstr":
                return opt_str(str(text)) if text is not None else None
            if kind == "bool":
                return text if isinstance(text, bool) else _bool(str(text))
            if kind == "floats":
                return text if isinstance(text, list) else _floats(str(text))
            if kind == "optexpr":
                if text is None or (isinstance(text, str) and opt_str(text) is None):
                    return None
                return evaluate(text, env_for(text))
            if kind == "int":
                v = evaluate(text, env_for(text))
                if v != int(v):
                    raise ConfigError(f"{sec}.{key} must be an integer, got {text!r}")
                return int(v)
            return evaluate(text, env_for(text))
        except ValueError as exc:
            raise ConfigError(f"bad value for {sec}.{key}: {exc}") from None

    keys = list(_ORDER) + [(s, k) for s in SCHEMA for k in SCHEMA[s] if (s, k) not in _ORDER]
    for sec, key in keys:
        text = raw[sec].get(key, SCHEMA[sec][key][1])
        out[sec][key] = convert(sec, key, text)

    cmd = out["experiment"]["command"]
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}; choose from {', '.join(COMMANDS)}")
    if out["model"]["problem"] not in ("VP", "VPb", "MinPc"):
        raise ConfigError(f"model.problem must be VP, VPb or MinPc, got {out['model']['problem']!r}")
    if out["solver"]["profile"] not in ("qstar", "qp"):
        raise ConfigError("solver.profile must be qstar or qp")
    return ExperimentConfig(out)
