"""Experiment configuration files.

Grammar: one ``key = value`` per line; ``#`` starts a comment; arrays are
written ``[a, b]``; numbers may use ``pi`` with ``+ - * /`` (``3*pi``,
``0.5 * pi``, ``4pi``).  Unknown keys are rejected.

Required keys: ``orders``, ``H``, ``source``.  ``source`` is ``example1``,
``example2``, ``example3`` or ``custom:<path>``.
"""
import ast
from dataclasses import dataclass, fields, replace
import math
import operator
import re

from .fdm import GridSpec
from .frac_core import FractionalOrders, HurstIndex
from .sources import BUILTIN, builtin_source, load_source


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    orders: FractionalOrders
    H: HurstIndex
    source: str
    T: float = 4.0 * math.pi
    N: int = 100
    M: int = 128
    P: int = 1000
    N_m: int = 60
    N_omega: int = 64
    W: float = None
    epsilon: float = 0.05
    master_seed: int = 0
    output_dir: str = "out"
    lambda_scale: float = 1e-3
    lambda_stages: int = 3
    max_iters: int = 5000
    tol: float = 1e-10
    tail_cutoff: float = 1e4

    def __post_init__(self):
        if self.W is None:
            # W = 10 pi for purely sub-diffusive orders, 3 pi otherwise
            w = 10.0 * math.pi if max(self.orders) < 1.0 else 3.0 * math.pi
            object.__setattr__(self, "W", w)
        for key in ("T", "W", "lambda_scale", "tol", "tail_cutoff"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive")
        for key in ("N", "M", "P", "N_m", "N_omega", "lambda_stages", "max_iters"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be a positive integer")
        if self.M < 2:
            raise ConfigError("M must be at least 2")
        if not self.epsilon >= 0:
            raise ConfigError("epsilon must be nonnegative")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if self.source not in BUILTIN and not self.source.startswith("custom:"):
            raise ConfigError(f"unknown source {self.source!r}")

    @property
    def grid(self):
        return GridSpec(self.T, self.N, self.M)

    @property
    def source_name(self):
        return self.source

    def source_samples(self):
        grid = self.grid
        if self.source.startswith("custom:"):
            f = load_source(self.source[len("custom:"):], grid)
        else:
            f = builtin_source(self.source, grid)
        if f[0] != 0.0:
            raise ConfigError("source must vanish at t = 0")
        return f

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_INT_KEYS = {"N", "M", "P", "N_m", "N_omega", "master_seed", "lambda_stages", "max_iters"}
_KEYS = {f.name for f in fields(ExperimentConfig)}
_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_number(text):
    """Evaluate a numeric literal possibly involving ``pi``."""
    src = re.sub(r"(\d)\s*pi\b", r"\1*pi", text.strip())

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(f"not a number: {text!r}")

    try:
        return ev(ast.parse(src, mode="eval"))
    except SyntaxError:
        raise ValueError(f"not a number: {text!r}") from None


def _convert(key, raw):
    if key == "orders":
        body = raw.strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise ValueError("orders must be an array like [0.3, 1.5]")
        items = [s for s in body[1:-1].split(",") if s.strip()]
        return FractionalOrders(tuple(parse_number(s) for s in items))
    if key == "H":
        return HurstIndex(parse_number(raw))
    if key in ("source", "output_dir"):
        return raw.strip().strip('"').strip("'")
    value = parse_number(raw)
    if key in _INT_KEYS:
        if float(value) != int(value):
            raise ValueError(f"{key} must be an integer")
        return int(value)
    return float(value)


def parse_config_text(text, origin="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"{origin}:{lineno}: invalid value for {key!r}: {exc}") from None
    missing = [k for k in ("orders", "H", "source") if k not in values]
    if missing:
        raise ConfigError(f"{origin}: missing required key(s) {', '.join(missing)}")
    try:
        return ExperimentConfig(**values)
    except ValueError as exc:
        raise ConfigError(f"{origin}: {exc}") from None


def parse_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read(), origin=str(path))


def format_config(cfg):
    """Serialise a config in the same grammar (used for metadata sidecars)."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, FractionalOrders):
            v = "[" + ", ".join(repr(a) for a in v.orders) + "]"
        elif isinstance(v, HurstIndex):
            v = repr(v.H)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
