"""Run configuration: an INI file with sections.

Example::

    [domain]
    dim = 2
    lengths = 1, 1
    counts = 17, 17

    [coefficients]
    a = 1
    b = 1 + 0.5*x
    c = 1

    [nonlinearity]
    F = log-coupled            # catalog name or expression in s, t

    [solver]
    lambda = 2/s_F             # single value for `solve` / `perturb`
    lambdas = linspace(0.2/S_F, 3/s_F, 12)   # list for `sweep`
    rng_seed = 0
    n_starts = 20

    [thresholds]
    n_radii = 200
    n_angles = 512

    [perturbation]
    G = log-coupled
    d = 1
    mus = 0, 1e-4*lambda

    [output]
    dir = out

Every key is optional; defaults are the dataclass defaults below.
"""
import configparser
import math
import re
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .expr import Expression, ExpressionError
from .solvers import SolveConfig
from .thresholds import SearchConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "resolve_values"]


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "domain": {"dim", "lengths", "counts"},
    "coefficients": {"a", "b", "c", "d"},
    "nonlinearity": {"f", "override_hypotheses"},
    "solver": {f.name for f in fields(SolveConfig)} | {"lambda", "lambdas", "certify"},
    "thresholds": {f.name for f in fields(SearchConfig)} | {"hyp_tol", "hyp_angles"},
    "perturbation": {"g", "d", "mus", "growth_exponent"},
    "output": {"dir", "csv"},
}


@dataclass
class RunConfig:
    dim: int = 2
    lengths: tuple = (1.0, 1.0)
    counts: tuple = (17, 17)
    a: str = "1"
    b: str = "1"
    c: str = "1"
    d: Optional[str] = None
    F: str = "log-coupled"
    override_hypotheses: bool = False
    lam: str = "2/s_F"
    lambdas: str = "linspace(0.2/S_F, 3/s_F, 12)"
    certify: bool = True
    solve: SolveConfig = field(default_factory=SolveConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    hyp_tol: float = 1e-2
    hyp_angles: int = 64
    G: str = "log-coupled"
    mus: str = "0, 1e-4*lambda"
    growth_exponent: float = 3.0
    out_dir: str = "neumannsys-out"
    csv_name: str = "sweep.csv"


def _where(section, key):
    return f"[{section}] {key}"


def _number(section, key, text, kind=float):
    try:
        value = kind(text)
    except ValueError:
        try:
            value = float(Expression(text).check_variables(())())
        except (ExpressionError, ValueError, TypeError) as exc:
            raise ConfigError(f"{_where(section, key)}: expected a number, got {text!r} ({exc})") from None
        if kind is int:
            if value != int(value):
                raise ConfigError(f"{_where(section, key)}: expected an integer, got {text!r}")
            value = int(value)
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"{_where(section, key)}: value must be finite, got {text!r}")
    return value


def _tuple(section, key, text, kind, dim):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if len(parts) != dim:
        raise ConfigError(f"{_where(section, key)}: expected {dim} comma-separated value(s), got {text!r}")
    return tuple(_number(section, key, p, kind) for p in parts)


def _bool(section, key, text):
    t = text.strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ConfigError(f"{_where(section, key)}: expected a boolean, got {text!r}")


def _check_expression(section, key, text, allowed):
    try:
        Expression(text).check_variables(allowed)
    except ExpressionError as exc:
        raise ConfigError(f"{_where(section, key)}: {exc}") from None
    return text


def parse_config(text, source="<config>"):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                       interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig()
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{source}: unknown key {_where(section, key)}")

    def get(section, key):
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        return None

    if (v := get("domain", "dim")) is not None:
        cfg.dim = _number("domain", "dim", v, int)
        if cfg.dim not in (1, 2):
            raise ConfigError(f"[domain] dim: must be 1 or 2, got {cfg.dim}")
        if cfg.dim == 1:
            cfg.lengths, cfg.counts = (1.0,), (33,)
    if (v := get("domain", "lengths")) is not None:
        cfg.lengths = _tuple("domain", "lengths", v, float, cfg.dim)
    if (v := get("domain", "counts")) is not None:
        cfg.counts = _tuple("domain", "counts", v, int, cfg.dim)
    if any(L <= 0 for L in cfg.lengths):
        raise ConfigError(f"[domain] lengths: must be positive, got {cfg.lengths}")
    if any(n < 3 for n in cfg.counts):
        raise ConfigError(f"[domain] counts: need at least 3 nodes per axis, got {cfg.counts}")

    coords = {"x", "y"} if cfg.dim == 2 else {"x"}
    for key in ("a", "b", "c", "d"):
        if (v := get("coefficients", key)) is not None:
            setattr(cfg, key, _check_expression("coefficients", key, v, coords))

    if (v := get("nonlinearity", "f")) is not None:
        cfg.F = v
    if (v := get("nonlinearity", "override_hypotheses")) is not None:
        cfg.override_hypotheses = _bool("nonlinearity", "override_hypotheses", v)

    solve_kwargs = {}
    for f in fields(SolveConfig):
        if (v := get("solver", f.name)) is not None:
            kind = int if f.name in ("max_iters", "n_starts", "rng_seed", "inner_maxiter", "stall_iters") else float
            solve_kwargs[f.name] = _number("solver", f.name, v, kind)
    try:
        cfg.solve = SolveConfig(**solve_kwargs)
    except ValueError as exc:
        raise ConfigError(f"[solver]: {exc}") from None
    if (v := get("solver", "lambda")) is not None:
        cfg.lam = v
    if (v := get("solver", "lambdas")) is not None:
        cfg.lambdas = v
    if (v := get("solver", "certify")) is not None:
        cfg.certify = _bool("solver", "certify", v)
    for key in ("lambda", "lambdas"):
        text = cfg.lam if key == "lambda" else cfg.lambdas
        try:
            _split_values(text, {"s_F", "S_F"})
        except ExpressionError as exc:
            raise ConfigError(f"[solver] {key}: {exc}") from None

    search_kwargs = {}
    for f in fields(SearchConfig):
        if (v := get("thresholds", f.name)) is not None:
            kind = int if f.name in ("n_radii", "n_angles", "n_starts", "max_iter") else float
            search_kwargs[f.name] = _number("thresholds", f.name, v, kind)
    try:
        cfg.search = SearchConfig(**search_kwargs)
    except ValueError as exc:
        raise ConfigError(f"[thresholds]: {exc}") from None
    if (v := get("thresholds", "hyp_tol")) is not None:
        cfg.hyp_tol = _number("thresholds", "hyp_tol", v)
    if (v := get("thresholds", "hyp_angles")) is not None:
        cfg.hyp_angles = _number("thresholds", "hyp_angles", v, int)

    if (v := get("perturbation", "g")) is not None:
        cfg.G = v
    if (v := get("perturbation", "d")) is not None:
        cfg.d = _check_expression("perturbation", "d", v, coords)
    if (v := get("perturbation", "mus")) is not None:
        cfg.mus = v
    try:
        _split_values(cfg.mus, {"lambda", "s_F", "S_F"})
    except ExpressionError as exc:
        raise ConfigError(f"[perturbation] mus: {exc}") from None
    if (v := get("perturbation", "growth_exponent")) is not None:
        cfg.growth_exponent = _number("perturbation", "growth_exponent", v)

    if (v := get("output", "dir")) is not None:
        cfg.out_dir = v
    if (v := get("output", "csv")) is not None:
        cfg.csv_name = v
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=str(path))


def _top_level_split(text):
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


_LINSPACE = re.compile(r"^linspace\s*\((.*)\)$", re.S)


def _split_values(text, allowed):
    """Parse ``"v1, v2, linspace(a, b, n)"`` into (kind, payload) items."""
    items = []
    for part in _top_level_split(text):
        m = _LINSPACE.match(part)
        if m:
            args = _top_level_split(m.group(1))
            if len(args) != 3:
                raise ExpressionError(f"linspace needs 3 arguments, got {part!r}")
            lo, hi = (Expression(a).check_variables(allowed) for a in args[:2])
            count = Expression(args[2]).check_variables(())
            items.append(("linspace", (lo, hi, count)))
        else:
            items.append(("value", Expression(part).check_variables(allowed)))
    return items


def resolve_values(text, **env):
    """Evaluate a value-list spec with the given bindings (``s_F``, ``S_F``, ...)."""
    out = []
    for kind, payload in _split_values(text, set(env)):
        if kind == "linspace":
            lo, hi, count = payload
            n = float(count())
            if n != int(n) or n < 1:
                raise ExpressionError(f"linspace count must be a positive integer, got {n}")
            out.extend(float(x) for x in np.linspace(float(lo(**env)), float(hi(**env)), int(n)))
        else:
            out.append(float(payload(**env)))
    for v in out:
        if not math.isfinite(v):
            raise ExpressionError(f"non-finite value in {text!r}")
    return out
