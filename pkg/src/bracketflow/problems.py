"""Problem files (JSON) and the bundled presets.

A problem names a bracket by its nonzero structure constants, a reductive
split, an invariant tensor on p, a preferred direction and optional flow
settings.  Numbers may be given as decimals or as exact fractions "p/q".
"""

from __future__ import annotations

import importlib
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .curvature import PreferredDirection, ricci_flow_direction
from .integrate import IntegratorConfig
from .lie import BracketTensor, ReductiveSplit
from .tensors import (
    InvariantTensor,
    euclidean,
    hermitian_triple,
    metric,
    pseudo_metric,
    standard_g2,
    standard_hermitian,
    standard_symplectic,
    symplectic,
    three_form,
)

FLOW_KINDS = ("geometric", "bracket", "normalized")
TENSOR_PRESETS = ("euclidean", "standard_symplectic", "standard_hermitian", "standard_g2")


class ProblemParseError(ValueError):
    """Malformed or inconsistent problem file."""


def parse_number(value) -> float:
    if isinstance(value, bool):
        raise ProblemParseError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ProblemParseError(f"cannot parse number {value!r}") from exc
    raise ProblemParseError(f"expected a number, got {value!r}")


def _number_array(value, what: str) -> np.ndarray:
    try:
        arr = np.vectorize(parse_number, otypes=[float])(np.asarray(value, dtype=object))
    except ProblemParseError:
        raise
    except Exception as exc:
        raise ProblemParseError(f"{what}: cannot read array") from exc
    return arr


@dataclass(frozen=True)
class FlowSpec:
    which: str = "bracket"
    t_span: tuple = (0.0, 1.0)
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 0.1

    def config(self, **overrides) -> IntegratorConfig:
        kw = dict(rel_tol=self.rel_tol, abs_tol=self.abs_tol, max_step=self.max_step)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return IntegratorConfig(**kw)


@dataclass(frozen=True)
class Problem:
    dimension: int
    k_dim: int
    entries: tuple  # (i, j, k, value), 0-based, i < j
    tensor: dict
    direction: dict = field(default_factory=lambda: {"name": "ricci"})
    flow: FlowSpec | None = None
    name: str = ""

    @property
    def p_dim(self) -> int:
        return self.dimension - self.k_dim

    @property
    def split(self) -> ReductiveSplit:
        return ReductiveSplit(self.k_dim, self.p_dim)

    def bracket(self, validate: bool = False) -> BracketTensor:
        return BracketTensor.from_entries(self.dimension, self.entries, validate=validate)

    def gamma(self) -> InvariantTensor:
        return build_tensor(self.tensor, self.p_dim)

    def preferred_direction(self) -> PreferredDirection:
        return build_direction(self.direction)

    def to_dict(self) -> dict:
        out = {
            "dimension": self.dimension,
            "k_dim": self.k_dim,
            "bracket": [{"i": i, "j": j, "k": k, "value": v} for i, j, k, v in self.entries],
            "tensor": self.tensor,
            "direction": self.direction,
        }
        if self.name:
            out["name"] = self.name
        if self.flow is not None:
            out["flow"] = {"which": self.flow.which, "t_span": list(self.flow.t_span),
                           "tolerances": {"rel_tol": self.flow.rel_tol, "abs_tol": self.flow.abs_tol,
                                          "max_step": self.flow.max_step}}
        return out


def build_tensor(spec: dict, p_dim: int) -> InvariantTensor:
    if "preset" in spec:
        name = spec["preset"]
        if name == "euclidean":
            return euclidean(p_dim)
        if name == "standard_symplectic":
            if p_dim % 2:
                raise ProblemParseError("standard_symplectic needs even p_dim")
            return standard_symplectic(p_dim)
        if name == "standard_hermitian":
            if p_dim % 2:
                raise ProblemParseError("standard_hermitian needs even p_dim")
            return standard_hermitian(p_dim)
        if name == "standard_g2":
            if p_dim != 7:
                raise ProblemParseError("standard_g2 needs p_dim = 7")
            return standard_g2()
        raise ProblemParseError(f"unknown tensor preset {name!r}")
    kind = spec.get("kind")
    comps = _number_array(spec.get("components"), "tensor components")
    try:
        if kind == "metric":
            return metric(comps)
        if kind == "pseudo_metric":
            return pseudo_metric(comps)
        if kind == "symplectic":
            return symplectic(comps)
        if kind == "three_form":
            return three_form(comps)
        if kind == "hermitian_triple":
            return hermitian_triple(comps[0], comps[1], comps[2])
        if kind == "generic":
            return InvariantTensor(comps, r=comps.ndim)
    except ValueError as exc:
        raise ProblemParseError(f"invalid {kind} tensor: {exc}") from exc
    raise ProblemParseError(f"unknown tensor kind {kind!r}")


def build_direction(spec: dict) -> PreferredDirection:
    name = spec.get("name", "ricci")
    if name == "ricci":
        return ricci_flow_direction()
    if name == "custom":
        target = spec.get("callable")
        if not target or ":" not in target:
            raise ProblemParseError("custom direction needs 'callable': 'module:function'")
        mod, func = target.split(":", 1)
        try:
            evaluate = getattr(importlib.import_module(mod), func)
        except (ImportError, AttributeError) as exc:
            raise ProblemParseError(f"cannot import {target!r}") from exc
        return PreferredDirection(evaluate, parse_number(spec.get("alpha", 0.0)),
                                  tuple(int(x) for x in spec.get("rs", (2, 0))), name=target)
    raise ProblemParseError(f"unknown direction {name!r}")


def _need(data: dict, key: str):
    if key not in data:
        raise ProblemParseError(f"missing field {key!r}")
    return data[key]


def _parse_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProblemParseError(f"{what} must be an integer, got {value!r}")
    return value


def parse_problem(data: dict) -> Problem:
    if not isinstance(data, dict):
        raise ProblemParseError("problem file must hold a JSON object")
    dim = _parse_int(_need(data, "dimension"), "dimension")
    k_dim = _parse_int(data.get("k_dim", 0), "k_dim")
    if dim < 1 or not 0 <= k_dim < dim:
        raise ProblemParseError(f"need 0 <= k_dim < dimension, got k_dim={k_dim}, dimension={dim}")
    entries = []
    seen = set()
    for n, e in enumerate(_need(data, "bracket")):
        try:
            i, j, k = (_parse_int(e[key], f"bracket entry {n} index {key}") for key in "ijk")
            value = parse_number(e["value"])
        except (KeyError, TypeError) as exc:
            raise ProblemParseError(f"bracket entry {n} needs fields i, j, k, value") from exc
        if not all(0 <= x < dim for x in (i, j, k)):
            raise ProblemParseError(f"bracket entry {n}: index out of range 0..{dim - 1}")
        if not i < j:
            raise ProblemParseError(f"bracket entry {n}: need i < j, got i={i}, j={j}")
        if (i, j, k) in seen:
            raise ProblemParseError(f"bracket entry {n}: duplicate ({i}, {j}, {k})")
        seen.add((i, j, k))
        entries.append((i, j, k, value))
    tensor = _need(data, "tensor")
    if not isinstance(tensor, dict) or not ("preset" in tensor or "kind" in tensor):
        raise ProblemParseError("tensor needs 'preset' or 'kind' with 'components'")
    if "components" in tensor:
        tensor = dict(tensor, components=_number_array(tensor["components"], "tensor components").tolist())
    direction = data.get("direction", {"name": "ricci"})
    if "alpha" in direction:
        direction = dict(direction, alpha=parse_number(direction["alpha"]))
    flow = None
    if "flow" in data:
        f = data["flow"]
        which = f.get("which", "bracket")
        if which not in FLOW_KINDS:
            raise ProblemParseError(f"flow.which must be one of {FLOW_KINDS}")
        span = f.get("t_span", [0.0, 1.0])
        span = (0.0, parse_number(span)) if not isinstance(span, (list, tuple)) else tuple(
            parse_number(x) for x in span)
        if len(span) != 2:
            raise ProblemParseError("flow.t_span needs two numbers")
        tol = {k: parse_number(v) for k, v in f.get("tolerances", {}).items()}
        unknown = set(tol) - {"rel_tol", "abs_tol", "max_step"}
        if unknown:
            raise ProblemParseError(f"unknown tolerance fields {sorted(unknown)}")
        flow = FlowSpec(which, span, **tol)
    problem = Problem(dim, k_dim, tuple(entries), tensor, direction, flow, str(data.get("name", "")))
    if problem.gamma().p_dim != problem.p_dim:
        raise ProblemParseError(f"tensor lives on dimension {problem.gamma().p_dim}, p has {problem.p_dim}")
    return problem


def load_problem(path) -> Problem:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProblemParseError(f"{path}: invalid JSON ({exc})") from exc
    return parse_problem(data)


def dump_problem(problem: Problem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem.to_dict(), fh, indent=2)
        fh.write("\n")


# presets

def _p(name, dim, k_dim, entries, tensor=None, flow=None):
    return Problem(dim, k_dim, tuple((i, j, k, float(v)) for i, j, k, v in entries),
                   tensor or {"preset": "euclidean"}, {"name": "ricci"}, flow, name)


PRESETS = {
    "heisenberg3": _p("heisenberg3", 3, 0, [(0, 1, 2, 1)], flow=FlowSpec("bracket", (0.0, 1.0))),
    "su2": _p("su2", 3, 0, [(0, 1, 2, 1), (1, 2, 0, 1), (0, 2, 1, -1)],
              flow=FlowSpec("geometric", (0.0, 2.0))),
    "heisenberg_plus_r": _p("heisenberg_plus_r", 4, 0, [(0, 1, 2, 1)],
                            flow=FlowSpec("normalized", (0.0, 10.0), max_step=1.0)),
    "filiform4": _p("filiform4", 4, 0, [(0, 1, 2, 1), (0, 2, 3, 2)],
                    flow=FlowSpec("normalized", (0.0, 50.0), max_step=1.0)),
    # so(3) acting on R^3 by rotations; static example with k_dim = 3
    "so3_semidirect_r3": _p("so3_semidirect_r3", 6, 3,
                            [(0, 1, 2, 1), (1, 2, 0, 1), (0, 2, 1, -1),
                             (0, 4, 5, 1), (0, 5, 4, -1), (1, 5, 3, 1),
                             (1, 3, 5, -1), (2, 3, 4, 1), (2, 4, 3, -1)]),
    # S^2 = SO(3)/SO(2) with k spanned by e0
    "sphere2": _p("sphere2", 3, 1, [(1, 2, 0, 1), (0, 1, 2, 1), (0, 2, 1, -1)]),
    "standard_g2_form": _p("standard_g2_form", 7, 0, [], tensor={"preset": "standard_g2"}),
}


def preset(name: str) -> Problem:
    try:
        return PRESETS[name]
    except KeyError:
        raise ProblemParseError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None


def resolve(source: str) -> Problem:
    """A problem from a file path or ``preset:NAME``."""
    if source.startswith("preset:"):
        return preset(source.split(":", 1)[1])
    return load_problem(source)


def with_flow(problem: Problem, **changes) -> Problem:
    return replace(problem, flow=replace(problem.flow or FlowSpec(), **changes))
