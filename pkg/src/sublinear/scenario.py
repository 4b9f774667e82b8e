"""Scenario files: YAML documents describing a finite space and run parameters.

Example::

    name: coin
    seed: 42
    space:
      outcomes: [-1, 1]
      measures:
        - name: tails-heavy
          probabilities: [0.7, 0.3]
        - name: heads-heavy
          probabilities: [0.3, 0.7]
    sequence:
      horizon: 100000
      decay: 0
    parameters:
      p: 1.5

``space.variable`` (optional) gives ``X(w)`` per outcome and defaults to the
outcome values. The series checks use ``X_n = n^(-decay) X`` with every
marginal drawn from the same family; the strong-law run always uses the
i.i.d. sequence ``X_n = X``. Validation errors carry the line of the
offending node.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .core import TOL, MeasureFamily, RandomVariable
from .independence import SequenceSpec

#: parameter name -> (default, kind, validity check, description of the valid range)
PARAMETERS: dict[str, tuple[Any, str, Any, str]] = {
    "p": (1.5, "real", lambda v: v > 0, "> 0"),
    "q": (2.0, "real", lambda v: 1 <= v <= 2, "in [1, 2]"),
    "c": (1.0, "real", lambda v: v > 0, "> 0"),
    "mu": (0.0, "real", lambda v: True, "finite"),
    "eps": (1e-6, "real", lambda v: v > 0, "> 0"),
    "window": (1000, "int", lambda v: v >= 1, ">= 1"),
    "trials": (10_000, "int", lambda v: v >= 1, ">= 1"),
    "exhaustive_max": (10, "int", lambda v: 0 <= v <= 12, "in [0, 12]"),
    "moments": ([0.5, 1.0, 1.5, 2.0], "reals", lambda v: all(x > 0 for x in v), "all > 0"),
    "fuzz_instances": (100_000, "int", lambda v: v >= 1, ">= 1"),
    "supports": ([-1.0, -0.5, 0.5, 1.0], "reals", lambda v: len(v) >= 2, "at least two values"),
    "prob_grid": ([round(0.1 * i, 1) for i in range(1, 10)], "reals",
                  lambda v: v and all(0 < x < 1 for x in v), "nonempty, in (0, 1)"),
    "max_length": (3, "int", lambda v: 1 <= v <= 4, "in [1, 4]"),
    "exponents": ([1.0, 1.5, 2.0], "reals", lambda v: v and all(1 <= x <= 2 for x in v),
                  "nonempty, in [1, 2]"),
    "replicates": (100, "int", lambda v: v >= 1, ">= 1"),
    "checkpoints": (None, "ints", lambda v: v and all(x >= 1 for x in v)
                    and all(b > a for a, b in zip(v, v[1:])), "strictly increasing, >= 1"),
    "threshold": (0.7, "real", lambda v: v > 0, "> 0"),
    "ratio_bound": (0.5, "real", lambda v: v > 0, "> 0"),
    "expect": (None, "text", lambda v: v in ("satisfied", "not-satisfied"),
               "'satisfied' or 'not-satisfied'"),
}

SEED_LIMIT = 2**64


class ScenarioError(ValueError):
    """Invalid scenario; ``line`` is 1-based, or ``None`` when unknown."""

    def __init__(self, message: str, line: int | None = None, source: str = "<scenario>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    outcomes: tuple[float, ...]
    measure_names: tuple[str, ...]
    family: MeasureFamily
    variable: RandomVariable
    horizon: int
    decay: float
    parameters: dict
    document: dict  # the validated document with defaults filled in

    def param(self, key: str):
        return self.parameters[key]

    def sequence(self, horizon: int | None = None, decay: float | None = None) -> SequenceSpec:
        n = self.horizon if horizon is None else horizon
        decay = self.decay if decay is None else decay
        if decay == 0:
            return SequenceSpec.iid(self.family, self.variable, n)
        scales = np.arange(1, n + 1, dtype=float) ** -decay
        return SequenceSpec.scaled(self.family, self.variable, scales)

    def with_overrides(self, seed: int | None = None, horizon: int | None = None) -> "Scenario":
        doc = copy.deepcopy(self.document)
        if seed is not None:
            doc["seed"] = seed
        if horizon is not None:
            doc["sequence"]["horizon"] = horizon
        return from_document(doc)


class _Locator:
    """Maps key paths in a composed YAML document to source lines."""

    def __init__(self, node: yaml.Node | None):
        self.node = node

    def line(self, path: tuple) -> int | None:
        node, best = self.node, None
        if node is not None:
            best = node.start_mark.line + 1
        for key in path:
            if isinstance(node, yaml.MappingNode):
                match = [v for k, v in node.value if k.value == key]
                if not match:
                    return best
                node = match[0]
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                node = node.value[key]
            else:
                return best
            best = node.start_mark.line + 1
        return best


def _is_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


class _Validator:
    def __init__(self, locator: _Locator, source: str):
        self.locator = locator
        self.source = source

    def fail(self, path: tuple, message: str):
        raise ScenarioError(message, self.locator.line(path), self.source)

    def mapping(self, doc, path: tuple, required: tuple, optional: tuple = ()) -> dict:
        if not isinstance(doc, dict):
            self.fail(path, f"{_name(path)} must be a mapping")
        for key in required:
            if key not in doc:
                self.fail(path, f"{_name(path)} is missing required key '{key}'")
        for key in doc:
            if key not in required and key not in optional:
                self.fail(path + (key,), f"unknown key '{key}' in {_name(path)}")
        return doc

    def reals(self, v, path: tuple, length: int | None = None) -> list[float]:
        if not isinstance(v, list) or not v:
            self.fail(path, f"{_name(path)} must be a nonempty list of numbers")
        for i, x in enumerate(v):
            if not _is_real(x):
                self.fail(path + (i,), f"{_name(path)}[{i}] is not a finite number: {x!r}")
        if length is not None and len(v) != length:
            self.fail(path, f"{_name(path)} has {len(v)} entries, expected {length}")
        return [float(x) for x in v]


def _name(path: tuple) -> str:
    return ".".join(str(k) for k in path) if path else "document"


def from_document(doc, locator: _Locator | None = None, source: str = "<scenario>") -> Scenario:
    """Validate a parsed scenario document."""
    val = _Validator(locator or _Locator(None), source)
    val.mapping(doc, (), ("name", "seed", "space"), ("sequence", "parameters"))

    name = doc["name"]
    if not isinstance(name, str) or not name:
        val.fail(("name",), "name must be a nonempty string")
    seed = doc["seed"]
    if not _is_int(seed) or not 0 <= seed < SEED_LIMIT:
        val.fail(("seed",), f"seed must be an integer in [0, 2^64), got {seed!r}")

    space = val.mapping(doc["space"], ("space",), ("outcomes", "measures"), ("variable",))
    outcomes = val.reals(space["outcomes"], ("space", "outcomes"))
    n = len(outcomes)
    measures = space["measures"]
    if not isinstance(measures, list) or not measures:
        val.fail(("space", "measures"), "space.measures must be a nonempty list")
    names, rows = [], []
    for i, m in enumerate(measures):
        path = ("space", "measures", i)
        val.mapping(m, path, ("name", "probabilities"))
        label = m["name"]
        if not isinstance(label, str) or not label:
            val.fail(path + ("name",), "measure name must be a nonempty string")
        if label in names:
            val.fail(path + ("name",), f"duplicate measure name '{label}'")
        probs = val.reals(m["probabilities"], path + ("probabilities",), n)
        if any(x < 0 for x in probs):
            val.fail(path + ("probabilities",), f"measure '{label}' has a negative probability")
        total = math.fsum(probs)
        if abs(total - 1.0) > TOL:
            val.fail(path + ("probabilities",),
                     f"measure '{label}' probabilities sum to {total:.12g}, expected 1")
        names.append(label)
        rows.append(probs)
    variable = outcomes
    if "variable" in space:
        variable = val.reals(space["variable"], ("space", "variable"), n)

    sequence = doc.get("sequence") or {}
    val.mapping(sequence, ("sequence",), (), ("horizon", "decay"))
    horizon = sequence.get("horizon", 1000)
    if not _is_int(horizon) or horizon < 1:
        val.fail(("sequence", "horizon"), f"horizon must be a positive integer, got {horizon!r}")
    decay = sequence.get("decay", 0)
    if not _is_real(decay) or decay < 0:
        val.fail(("sequence", "decay"), f"decay must be a non-negative number, got {decay!r}")

    given = doc.get("parameters") or {}
    val.mapping(given, ("parameters",), (), tuple(PARAMETERS))
    params = {}
    for key, (default, kind, ok, valid) in PARAMETERS.items():
        v = given.get(key, default)
        path = ("parameters", key)
        if v is None:
            params[key] = None
            continue
        if kind == "real" and not _is_real(v):
            val.fail(path, f"parameter '{key}' must be a number, got {v!r}")
        if kind == "int" and not _is_int(v):
            val.fail(path, f"parameter '{key}' must be an integer, got {v!r}")
        if kind == "text" and not isinstance(v, str):
            val.fail(path, f"parameter '{key}' must be a string, got {v!r}")
        if kind == "reals":
            v = val.reals(v, path)
        if kind == "ints":
            if not isinstance(v, list) or not all(_is_int(x) for x in v):
                val.fail(path, f"parameter '{key}' must be a list of integers")
        if not ok(v):
            val.fail(path, f"parameter '{key}' must be {valid}, got {v!r}")
        params[key] = float(v) if kind == "real" else v

    family = MeasureFamily.from_probabilities(rows, labels=[f"{x:g}" for x in outcomes])
    document = {
        "name": name, "seed": seed,
        "space": {"outcomes": outcomes,
                  "measures": [{"name": a, "probabilities": r} for a, r in zip(names, rows)],
                  "variable": variable},
        "sequence": {"horizon": horizon, "decay": float(decay)},
        "parameters": params,
    }
    return Scenario(name, seed, tuple(outcomes), tuple(names), family,
                    RandomVariable(variable), horizon, float(decay), params, document)


def loads(text: str, source: str = "<scenario>") -> Scenario:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                            mark.line + 1 if mark else None, source) from None
    return from_document(doc, _Locator(node), source)


def load(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", None, str(path)) from None
    return loads(text, str(path))
