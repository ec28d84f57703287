"""Scenario files: YAML validated against a JSON schema, then built into model objects.

Numbers may be YAML numbers or quoted decimal strings. Either way each value
is rounded once to the nearest double (strings go through Decimal), so
"0.1" and 0.1 give the same float.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import dist
from .economy import Additive, Binary, Multiplicative, SBTCShift, Tabulated
from .errors import ConfigError, InputError


def load_schema() -> dict:
    return json.loads(resources.files("teamsort").joinpath("scenario_schema.json").read_text())


@dataclass(frozen=True)
class Analysis:
    n: int = 100_000
    seed: int = 0
    alpha_l: float = 0.5
    grid: int = 11
    outsourcing_cost: float | None = None
    sbtc_levels: tuple[float, float] | None = None
    sweep_steps: int = 21
    oracle_sizes: tuple[int, ...] = (12,)
    oracle_seeds: int = 50
    skill_pairs: tuple[tuple[float, float], ...] | None = None


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    f: object
    traits: object
    analysis: Analysis
    raw: dict = field(repr=False)
    source: str = ""

    @property
    def sbtc(self) -> SBTCShift | None:
        if self.analysis.sbtc_levels is None:
            return None
        return SBTCShift.binary(*self.analysis.sbtc_levels)


# --------------------------------------------------------------------------
# line lookup


def _line_index(text: str) -> dict[tuple, int]:
    """Map key paths to 1-based line numbers using the YAML node tree."""
    out: dict[tuple, int] = {}

    def walk(node, path):
        out[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                walk(v, path + (k.value,))
                out.setdefault(path + (k.value,), k.start_mark.line + 1)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return out
    if root is not None:
        walk(root, ())
    return out


class _Ctx:
    def __init__(self, source: str, lines: dict):
        self.source, self.lines = source, lines

    def error(self, path: tuple, msg: str) -> ConfigError:
        p = tuple(path)
        line = None
        while p:
            if p in self.lines:
                line = self.lines[p]
                break
            p = p[:-1]
        return ConfigError(msg, ".".join(map(str, path)), line, self.source)

    def num(self, d: dict, key: str, path: tuple, default=None) -> float:
        if key not in d:
            if default is None:
                raise self.error(path + (key,), "required number is missing")
            return default
        v = d[key]
        if isinstance(v, bool):
            raise self.error(path + (key,), f"expected a number, got {v!r}")
        if isinstance(v, str):
            try:
                return float(Decimal(v.strip()))
            except InvalidOperation:
                raise self.error(path + (key,), f"not a decimal number: {v!r}") from None
        if isinstance(v, (int, float)):
            return float(v)
        raise self.error(path + (key,), f"expected a number, got {type(v).__name__}")

    def sub(self, d: dict, key: str, path: tuple) -> dict:
        v = d.get(key)
        if not isinstance(v, dict):
            raise self.error(path + (key,), "expected a mapping")
        return v


# --------------------------------------------------------------------------
# builders


def _marginal(ctx: _Ctx, d: dict, path: tuple) -> dist.Marginal:
    if not isinstance(d, dict) or "kind" not in d:
        raise ctx.error(path, "marginal needs a 'kind'")
    kind = d["kind"]
    try:
        if kind == "uniform":
            return dist.Uniform(ctx.num(d, "a", path, 0.0), ctx.num(d, "b", path, 1.0))
        if kind == "normal":
            return dist.Normal(ctx.num(d, "mean", path, 0.0), ctx.num(d, "sd", path, 1.0))
        if kind == "lognormal":
            return dist.LogNormal(ctx.num(d, "delta", path, 0.0), ctx.num(d, "omega", path, 1.0))
        if kind == "affine":
            base = _marginal(ctx, ctx.sub(d, "base", path), path + ("base",))
            return dist.Affine(base, ctx.num(d, "loc", path, 0.0), ctx.num(d, "scale", path, 1.0))
        if kind == "discrete":
            atoms = [ctx.num({"v": a}, "v", path + ("atoms", i)) for i, a in enumerate(d.get("atoms", []))]
            w = [ctx.num({"v": a}, "v", path + ("weights", i)) for i, a in enumerate(d.get("weights", []))]
            return dist.Discrete(np.array(atoms), np.array(w))
        if kind == "empirical":
            vals = [ctx.num({"v": a}, "v", path + ("values", i)) for i, a in enumerate(d.get("values", []))]
            return dist.Empirical(np.array(vals))
    except ConfigError:
        raise
    except InputError as e:
        raise ctx.error(path, str(e)) from None
    raise ctx.error(path + ("kind",), f"unknown marginal kind {kind!r}")


def _production(ctx: _Ctx, d: dict):
    path = ("production", "params")
    p = d.get("params", {}) or {}
    v = d["variant"]
    try:
        if v == "binary":
            return Binary(ctx.num(p, "F_ll", path), ctx.num(p, "F_hl", path), ctx.num(p, "F_hh", path),
                          ctx.num(p, "l", path, 0.0), ctx.num(p, "h", path, 1.0))
        if v == "additive":
            K = p.get("K", "linear")
            if K == "linear":
                return Additive.linear(ctx.num(p, "slope", path, 1.0), ctx.num(p, "intercept", path, 0.0))
            if K == "power":
                return Additive.power(ctx.num(p, "scale", path, 1.0), ctx.num(p, "exponent", path, 2.0))
            raise ctx.error(path + ("K",), f"unknown K {K!r}; expected linear or power")
        if v == "multiplicative":
            return Multiplicative(ctx.num(p, "A", path, 1.0), ctx.num(p, "c", path, 1.0))
        if v == "tabulated":
            grid = [ctx.num({"v": a}, "v", path + ("grid", i)) for i, a in enumerate(p.get("grid", []))]
            rows = p.get("table", [])
            table = [[ctx.num({"v": a}, "v", path + ("table", i, j)) for j, a in enumerate(r)]
                     for i, r in enumerate(rows)]
            return Tabulated(np.array(grid), np.array(table))
    except ConfigError:
        raise
    except InputError as e:
        raise ctx.error(path, str(e)) from None
    raise ctx.error(("production", "variant"), f"unknown variant {v!r}")


def _traits(ctx: _Ctx, d: dict):
    path = ("traits", "params")
    p = d.get("params", {}) or {}
    v = d["variant"]

    def m(key):
        return _marginal(ctx, ctx.sub(p, key, path), path + (key,))

    try:
        if v == "binary":
            share = ctx.num(p, "p", path, 0.5)
            try:
                return dist.BinarySkill(m("G_l"), m("G_h"), ctx.num(p, "l", path, 0.0),
                                        ctx.num(p, "h", path, 1.0), share)
            except ConfigError:
                raise
            except InputError as e:
                raise ctx.error(path + ("p",) if share != 0.5 else path, str(e)) from None
        if v == "inequity":
            return dist.inequity_aversion_traits(m("alpha"), m("beta"), ctx.num(p, "l", path, 0.0),
                                                 ctx.num(p, "h", path, 1.0))
        if v == "product":
            return dist.Product(m("x1"), m("x2"))
        if v == "gaussian_copula":
            return dist.GaussianCopula(m("x1"), m("x2"), ctx.num(p, "rho", path, 0.0))
        if v == "lognormal":
            return dist.LogNormalJoint(ctx.num(p, "delta1", path, 0.0), ctx.num(p, "delta2", path, 0.0),
                                       ctx.num(p, "omega11", path, 1.0), ctx.num(p, "omega12", path, 0.0),
                                       ctx.num(p, "omega22", path, 1.0))
    except ConfigError:
        raise
    except InputError as e:
        # keep the underlying message; it names the violated requirement
        raise ctx.error(path, str(e)) from None
    raise ctx.error(("traits", "variant"), f"unknown variant {v!r}")


def _analysis(ctx: _Ctx, d: dict) -> Analysis:
    path = ("analysis",)
    base = Analysis()
    kw = {}
    for k in ("n", "seed", "grid", "sweep_steps", "oracle_seeds"):
        if k in d:
            kw[k] = int(d[k])
    if "alpha_l" in d:
        kw["alpha_l"] = ctx.num(d, "alpha_l", path)
        if not 0.0 <= kw["alpha_l"] <= 1.0:
            raise ctx.error(path + ("alpha_l",), "alpha_l must lie in [0, 1]")
    if "outsourcing_cost" in d:
        kw["outsourcing_cost"] = ctx.num(d, "outsourcing_cost", path)
        if kw["outsourcing_cost"] < 0:
            raise ctx.error(path + ("outsourcing_cost",), "outsourcing cost must be >= 0")
    if "sbtc" in d:
        lv = d["sbtc"]["levels"]
        kw["sbtc_levels"] = tuple(ctx.num({"v": x}, "v", path + ("sbtc", "levels", i))
                                  for i, x in enumerate(lv))
        if not kw["sbtc_levels"][1] > kw["sbtc_levels"][0]:
            raise ctx.error(path + ("sbtc", "levels"), "SBTC shift must be increasing: S(h) > S(l)")
    if "oracle_sizes" in d:
        sizes = tuple(int(x) for x in d["oracle_sizes"])
        for i, s in enumerate(sizes):
            if s % 2:
                raise ctx.error(path + ("oracle_sizes", i), f"oracle size must be even, got {s}")
        kw["oracle_sizes"] = sizes
    if "skill_pairs" in d:
        kw["skill_pairs"] = tuple(
            tuple(ctx.num({"v": x}, "v", path + ("skill_pairs", i, j)) for j, x in enumerate(pr))
            for i, pr in enumerate(d["skill_pairs"]))
    return Analysis(**{**base.__dict__, **kw})


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(e, 'problem', e)}", "",
                          mark.line + 1 if mark else None, source) from None
    ctx = _Ctx(source, _line_index(text))
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a mapping", "", 1, source)
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise ctx.error(tuple(e.absolute_path), e.message)
    f = _production(ctx, raw["production"])
    traits = _traits(ctx, raw["traits"])
    analysis = _analysis(ctx, raw.get("analysis", {}) or {})
    return Scenario(raw.get("name", Path(source).stem), f, traits, analysis, raw, source)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read scenario: {e.strerror}", "", None, str(path)) from None
    return parse_scenario(text, str(path))
