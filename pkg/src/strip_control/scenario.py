"""Scenario files: TOML with dotted keys describing a domain, a control set and a task.

Grammar (all tables optional except ``domain`` and ``task``)::

    task = "thickness"            # one of TASKS
    name = "stripes-demo"         # output file stem, default: scenario file stem
    seed = 0

    [domain]                      # d, L, bc, X, N_max, M_max, h
    d = 2
    L = 0.5

    [set]                         # see build_set for the kinds
    kind = "stripes"
    width = 1.0

    [params]                      # task parameters
    a = [3.141592653589793, 2.0]

    [sweep]                       # ranged fields, expanded as a Cartesian product
    "params.T" = {start = 0.5, stop = 2.0, num = 4}
    "domain.X" = [8, 16]
"""

from __future__ import annotations

import copy
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .domain import DomainError, StripDomain, build_domain
from .geometry import (Box, BoxUnion, Complement, GeometryError, Intersection, Periodic, SetDescription,
                       Union, empty_set, full_space, product_section, strip_set, stripes)

TASKS = ("thickness", "spectral-check", "dissipation", "cost-bound", "hum", "lr",
         "observability", "necessity", "kernel-check")
MAX_SWEEP_POINTS = 100_000


class ConfigError(ValueError):
    pass


@dataclass
class Scenario:
    task: str
    name: str
    seed: int
    domain: StripDomain
    set_spec: dict
    params: dict
    raw: dict = field(repr=False, default_factory=dict)

    def control_set(self) -> SetDescription:
        return build_set(self.set_spec, self.domain)

    def param(self, key: str, default=None, required: bool = False):
        if key in self.params:
            return self.params[key]
        if required:
            raise ConfigError(f"field 'params.{key}' is required for task {self.task!r}")
        return default


def parse_text(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None


def load_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_text(text)


def _section(raw: dict, key: str) -> dict:
    value = raw.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"field '{key}' must be a table")
    return value


def scenario_from_dict(raw: dict, default_name: str = "scenario", seed: Optional[int] = None) -> Scenario:
    task = raw.get("task")
    if task not in TASKS:
        raise ConfigError(f"field 'task' must be one of {', '.join(TASKS)}; got {task!r}")
    if "domain" not in raw:
        raise ConfigError("field 'domain' is required")
    try:
        domain = build_domain(_section(raw, "domain"))
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"field 'domain': {exc}") from None
    name = str(raw.get("name", default_name))
    if not name or any(c in name for c in "/\\"):
        raise ConfigError("field 'name' must be a plain file stem")
    s = raw.get("seed", 0) if seed is None else seed
    if not isinstance(s, int) or isinstance(s, bool):
        raise ConfigError("field 'seed' must be an integer")
    set_spec = _section(raw, "set") or {"kind": "full"}
    scen = Scenario(task, name, int(s), domain, set_spec, dict(_section(raw, "params")), raw)
    scen.control_set()  # validate eagerly
    return scen


# -- set descriptions -----------------------------------------------------------

def _boxes(items, dim, where):
    if not isinstance(items, list):
        raise ConfigError(f"field '{where}' must be a list of boxes")
    out = []
    for i, b in enumerate(items):
        try:
            lo, hi = b["lo"], b["hi"]
            out.append(Box(tuple(_num(v) for v in lo), tuple(_num(v) for v in hi)))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"field '{where}[{i}]' needs numeric 'lo' and 'hi' lists") from None
        except GeometryError as exc:
            raise ConfigError(f"field '{where}[{i}]': {exc}") from None
        if out[-1].dim != dim:
            raise ConfigError(f"field '{where}[{i}]' has dimension {out[-1].dim}, expected {dim}")
    return out


def _num(v):
    if isinstance(v, str):
        key = v.strip().lower()
        if key in ("inf", "+inf"):
            return math.inf
        if key == "-inf":
            return -math.inf
        raise ConfigError(f"not a number: {v!r}")
    return float(v)


def build_set(spec: dict, domain: StripDomain, where: str = "set") -> SetDescription:
    """Kinds: full, strip, empty, boxes, section, periodic, stripes, union,
    intersection, complement."""
    d = domain.d
    kind = spec.get("kind")
    try:
        if kind == "full":
            return full_space(d)
        if kind == "strip":
            return strip_set(d, domain.L)
        if kind == "empty":
            return empty_set(d)
        if kind == "boxes":
            return BoxUnion(_boxes(spec.get("boxes"), d, f"{where}.boxes"), d)
        if kind == "section":
            return product_section(_boxes(spec.get("boxes"), d - 1, f"{where}.boxes"), d)
        if kind == "stripes":
            return stripes(domain, float(spec.get("width", 1.0)), float(spec.get("period", 2.0)),
                           float(spec.get("offset", 0.0)))
        if kind == "periodic":
            periods = spec.get("periods")
            if not isinstance(periods, list) or len(periods) != d:
                raise ConfigError(f"field '{where}.periods' must list {d} entries (0 = aperiodic)")
            cell = BoxUnion(_boxes(spec.get("boxes"), d, f"{where}.boxes"), d)
            per = tuple(float(p) if p else None for p in periods)
            origin = spec.get("origin")
            return Periodic(cell, per, tuple(float(v) for v in origin) if origin else None)
        if kind in ("union", "intersection"):
            kids = spec.get("children")
            if not isinstance(kids, list) or not kids:
                raise ConfigError(f"field '{where}.children' must be a nonempty list")
            built = [build_set(k, domain, f"{where}.children[{i}]") for i, k in enumerate(kids)]
            return Union(built) if kind == "union" else Intersection(built)
        if kind == "complement":
            child = spec.get("child")
            if not isinstance(child, dict):
                raise ConfigError(f"field '{where}.child' must be a table")
            return Complement(build_set(child, domain, f"{where}.child"))
    except GeometryError as exc:
        raise ConfigError(f"field '{where}': {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"field '{where}': {exc}") from None
    raise ConfigError(f"field '{where}.kind' unknown: {kind!r}")


# -- sweeps ---------------------------------------------------------------------

def _expand_range(key, spec) -> list:
    if isinstance(spec, list):
        values = spec
    elif isinstance(spec, dict):
        try:
            start, stop = float(spec["start"]), float(spec["stop"])
        except KeyError:
            raise ConfigError(f"field 'sweep.{key}' needs start and stop") from None
        if "num" in spec:
            num = int(spec["num"])
            if num < 1:
                raise ConfigError(f"field 'sweep.{key}' has an empty range")
            values = np.linspace(start, stop, num).tolist()
        elif "step" in spec:
            step = float(spec["step"])
            if step <= 0:
                raise ConfigError(f"field 'sweep.{key}.step' must be positive")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(max(n, 0))]
        else:
            raise ConfigError(f"field 'sweep.{key}' needs num or step")
    else:
        raise ConfigError(f"field 'sweep.{key}' must be a list or a range table")
    if not values:
        raise ConfigError(f"field 'sweep.{key}' has an empty range")
    return values


def _set_path(raw: dict, dotted: str, value):
    parts = dotted.split(".")
    node = raw
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"sweep key {dotted!r} does not address a table field")
    node[parts[-1]] = value


def expand_sweep(raw: dict) -> tuple[list, list]:
    """Return the swept keys and one concrete raw config per Cartesian point."""
    sweep = raw.get("sweep")
    if not isinstance(sweep, dict) or not sweep:
        raise ConfigError("field 'sweep' must be a nonempty table of ranged fields")
    keys = list(sweep)
    axes = [_expand_range(k, sweep[k]) for k in keys]
    total = math.prod(len(a) for a in axes)
    if total > MAX_SWEEP_POINTS:
        raise ConfigError(f"sweep expands to {total} points (limit {MAX_SWEEP_POINTS})")
    base = {k: v for k, v in raw.items() if k != "sweep"}
    points = []
    for combo in itertools.product(*axes):
        cfg = copy.deepcopy(base)
        for k, v in zip(keys, combo):
            _set_path(cfg, k, v)
        points.append((dict(zip(keys, combo)), cfg))
    return keys, points
