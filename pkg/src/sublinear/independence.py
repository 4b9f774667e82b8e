"""Peng-independent sequences and their joint upper expectations.

For a sequence whose ``k``-th variable is independent of the prefix, the
joint upper expectation of ``phi(X_1, ..., X_n)`` is obtained by backward
recursion with the LAST variable innermost::

    phi_n = phi
    phi_{k-1}(x_1..x_{k-1}) = E^_k[ phi_k(x_1..x_{k-1}, X_k) ]
    result = phi_0

Reversing the nesting generally changes the value, so the order is fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .core import (TOL, DimensionError, MeasureFamily, RandomVariable, TestFunction,
                   _values, truncate, upper_expectation)

#: Enumeration guard on the number of grid points / reachable states.
MAX_STATES = 10**7


class StateSpaceError(ValueError):
    """Raised when an exact recursion would exceed the enumeration guard."""

    def __init__(self, size: int, limit: int):
        super().__init__(f"state space of {size:,} exceeds the enumeration guard of {limit:,}")
        self.size = size
        self.limit = limit


@dataclass(frozen=True)
class Marginal:
    family: MeasureFamily
    variable: RandomVariable

    def __post_init__(self):
        X = self.variable
        if not isinstance(X, RandomVariable):
            X = RandomVariable(X)
            object.__setattr__(self, "variable", X)
        if len(X) != self.family.n_outcomes:
            raise DimensionError(
                f"variable has {len(X)} values, family has {self.family.n_outcomes} outcomes")

    @property
    def values(self) -> np.ndarray:
        return self.variable.values


@dataclass(frozen=True)
class SequenceSpec:
    """Ordered marginals of an independent sequence ``X_1, ..., X_n``."""

    marginals: tuple[Marginal, ...]

    def __post_init__(self):
        marginals = tuple(
            m if isinstance(m, Marginal) else Marginal(*m) for m in self.marginals)
        if not marginals:
            raise ValueError("a sequence needs at least one marginal")
        object.__setattr__(self, "marginals", marginals)

    @classmethod
    def iid(cls, family: MeasureFamily, X, n: int) -> "SequenceSpec":
        m = Marginal(family, X)
        return cls((m,) * n)

    @classmethod
    def scaled(cls, family: MeasureFamily, X, scales) -> "SequenceSpec":
        """``X_k = scales[k-1] * X`` with every marginal drawn from ``family``."""
        x = _values(X, family.n_outcomes)
        return cls(tuple(Marginal(family, RandomVariable(a * x)) for a in np.asarray(scales, float)))

    def __len__(self):
        return len(self.marginals)

    def __iter__(self) -> Iterator[Marginal]:
        return iter(self.marginals)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return SequenceSpec(self.marginals[k])
        return self.marginals[k]

    @property
    def grid_size(self) -> int:
        """Number of joint outcomes, the cost of full enumeration."""
        size = 1
        for m in self.marginals:
            size *= m.family.n_outcomes
        return size

    @property
    def identically_distributed(self) -> bool:
        first = self.marginals[0]
        return all(
            m is first or (np.array_equal(m.values, first.values)
                           and np.array_equal(m.family.matrix, first.family.matrix))
            for m in self.marginals[1:])

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "SequenceSpec":
        """Apply ``fn`` to every variable's values, keeping the families."""
        return SequenceSpec(tuple(Marginal(m.family, m.variable.apply(fn)) for m in self.marginals))

    def truncated(self, c: float) -> "SequenceSpec":
        return SequenceSpec(tuple(Marginal(m.family, truncate(m.variable, c)) for m in self.marginals))


_TRACKERS = {
    "none": lambda e, s: e,
    "min": np.minimum,
    "max": np.maximum,
    "maxabs": lambda e, s: np.maximum(e, np.abs(s)),
}

_KINDS = {
    # kind: (tracker, terminal(sum, extremum, p))
    "final-sum": ("none", lambda s, e, p: np.abs(s) ** p),
    # max_{0<=k<=n} (S_n - S_k) = S_n - min_{0<=k<=n} S_k >= 0
    "max-suffix-drawdown": ("min", lambda s, e, p: (s - e) ** p),
    "max-abs-partial-sum": ("maxabs", lambda s, e, p: e ** p),
}


@dataclass(frozen=True)
class PartialSumFunctional:
    """A path functional of ``S_0 = 0, S_1, ..., S_n`` through (final sum, running extremum).

    kinds
        ``final-sum``            ``|S_n|^p``
        ``max-suffix-drawdown``  ``|max_{0<=k<=n} (S_n - S_k)|^p``
        ``max-abs-partial-sum``  ``max_{0<=k<=n} |S_k|^p``
        ``custom``               ``terminal(S_n, e_n)`` where ``e`` follows
                                 ``tracker`` (none/min/max/maxabs) from ``e_0 = 0``.
    """

    kind: str = "final-sum"
    p: float = 1.0
    terminal: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    tracker: str = "none"

    def __post_init__(self):
        if self.kind == "custom":
            if self.terminal is None:
                raise ValueError("a custom functional needs a terminal function")
            if self.tracker not in _TRACKERS:
                raise ValueError(f"unknown tracker {self.tracker!r}")
        elif self.kind in _KINDS:
            object.__setattr__(self, "tracker", _KINDS[self.kind][0])
        else:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if not self.p > 0:
            raise ValueError("exponent p must be positive")

    def update(self, extremum, s):
        return _TRACKERS[self.tracker](extremum, s)

    def value(self, s, extremum) -> np.ndarray:
        s = np.asarray(s, float)
        extremum = np.asarray(extremum, float)
        if self.kind == "custom":
            return np.broadcast_to(np.asarray(self.terminal(s, extremum), float), s.shape)
        return _KINDS[self.kind][1](s, extremum, self.p)

    def on_paths(self, increments) -> np.ndarray:
        """Evaluate on explicit paths; ``increments`` has shape ``(..., n)``."""
        inc = np.asarray(increments, float)
        s = np.zeros(inc.shape[:-1])
        e = np.zeros(inc.shape[:-1])
        for k in range(inc.shape[-1]):
            s = s + inc[..., k]
            e = self.update(e, s)
        return self.value(s, e)

    def as_test_function(self, n: int) -> TestFunction:
        """The expanded path functional ``(x_1..x_n) -> f(path)``."""
        def fn(*xs):
            xs = np.broadcast_arrays(*[np.asarray(x, float) for x in xs])
            return self.on_paths(np.stack(xs, axis=-1))
        return TestFunction(fn, arity=n, degree=2, name=f"{self.kind}^{self.p}")


def _evaluate_on_grid(phi: Callable, values: Sequence[np.ndarray]) -> np.ndarray:
    n = len(values)
    shape = tuple(v.size for v in values)
    axes = [v.reshape((1,) * k + (-1,) + (1,) * (n - k - 1)) for k, v in enumerate(values)]
    out = np.asarray(phi(*axes), dtype=float)
    return np.array(np.broadcast_to(out, shape))


def nested_upper(grid: np.ndarray, probs: Sequence[np.ndarray]) -> np.ndarray:
    """Backward nested envelope over a batch of joint grids.

    ``grid`` has shape ``(B, m_1, ..., m_n)``; ``probs[k]`` has shape
    ``(B, K_k, m_k)`` (measures of marginal ``k`` for each batch member).
    Returns the ``(B,)`` joint upper expectations.
    """
    V = np.asarray(grid, float)
    for P in reversed(probs):
        V = np.einsum("b...m,bkm->b...k", V, P).max(axis=-1)
    return V


def joint_upper_expectation(spec: SequenceSpec, phi: Callable,
                            max_states: int = MAX_STATES) -> float:
    """Exact ``E^[phi(X_1, ..., X_n)]`` for an independent sequence.

    ``phi`` is a :class:`TestFunction` (or any callable) taking ``n``
    broadcastable arrays.
    """
    arity = getattr(phi, "arity", None)
    if arity is not None and arity != len(spec):
        raise ValueError(f"test function has arity {arity}, sequence has length {len(spec)}")
    if spec.grid_size > max_states:
        raise StateSpaceError(spec.grid_size, max_states)
    grid = _evaluate_on_grid(phi, [m.values for m in spec])
    return float(nested_upper(grid[None], [m.family.matrix[None] for m in spec])[0])


def _reachable_states(values: Sequence[np.ndarray], f: PartialSumFunctional, max_states: int):
    """Forward pass: per-layer (sum, extremum) states and successor tables."""
    sums, ext = np.zeros(1), np.zeros(1)
    layers = [(sums, ext)]
    successors = []
    total = 1
    for x in values:
        s2 = (sums[:, None] + x[None, :])
        e2 = f.update(ext[:, None], s2)
        keys = np.stack([s2.ravel(), np.broadcast_to(e2, s2.shape).ravel()], axis=1)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        total += len(uniq)
        if total > max_states:
            raise StateSpaceError(total, max_states)
        successors.append(inverse.reshape(s2.shape))
        sums, ext = uniq[:, 0], uniq[:, 1]
        layers.append((sums, ext))
    return layers, successors


def functional_dp(values: Sequence[np.ndarray], probs: Sequence[np.ndarray],
                  f: PartialSumFunctional, max_states: int = MAX_STATES) -> np.ndarray:
    """Batched backward recursion over reachable (running sum, extremum) states.

    ``values[k]`` is the shared support of ``X_{k+1}``; ``probs[k]`` has shape
    ``(B, K_k, m_k)``. States are exact sums of support values (no
    rounding), so distinct paths with equal ``(sum, extremum)`` merge.
    """
    values = [np.asarray(v, float) for v in values]
    layers, successors = _reachable_states(values, f, max_states)
    s, e = layers[-1]
    V = np.broadcast_to(f.value(s, e), (probs[0].shape[0], s.size))
    for succ, P in zip(reversed(successors), reversed(probs)):
        # V[:, succ] has shape (B, S_k, m_k)
        V = np.einsum("bsm,bkm->bsk", V[:, succ], P).max(axis=-1)
    return V[:, 0]


def functional_upper_expectation(spec: SequenceSpec, f: PartialSumFunctional,
                                 max_states: int = MAX_STATES) -> float:
    """Exact ``E^[f(S_0, ..., S_n)]`` by dynamic programming over reachable states."""
    return float(functional_dp([m.values for m in spec], [m.family.matrix[None] for m in spec],
                               f, max_states)[0])


def default_battery() -> list[TestFunction]:
    """Polynomials up to degree 4 (both signs), absolute value and clamps."""
    battery = []
    for k in range(1, 5):
        battery.append(TestFunction(lambda x, k=k: x**k, degree=k - 1, constant=k, name=f"x^{k}"))
        battery.append(TestFunction(lambda x, k=k: -(x**k), degree=k - 1, constant=k, name=f"-x^{k}"))
    battery.append(TestFunction(np.abs, name="|x|"))
    battery.append(TestFunction(lambda x: -np.abs(x), name="-|x|"))
    for c in (0.5, 1.0, 2.0):
        battery.append(TestFunction(lambda x, c=c: np.clip(x, -c, c), name=f"clamp{c}"))
        battery.append(TestFunction(lambda x, c=c: -np.clip(x, -c, c), name=f"-clamp{c}"))
    return battery


@dataclass
class IdenticalDistributionReport:
    discrepancies: dict[str, float] = field(default_factory=dict)
    tolerance: float = 1e-10

    @property
    def max_discrepancy(self) -> float:
        return max(self.discrepancies.values(), default=0.0)

    @property
    def identical(self) -> bool:
        return self.max_discrepancy <= self.tolerance


def check_identical_distribution(f1: MeasureFamily, X1, f2: MeasureFamily, X2,
                                 battery: Sequence[Callable] | None = None,
                                 tol: float = 1e-10) -> IdenticalDistributionReport:
    """Compare ``E^_1[phi(X_1)]`` with ``E^_2[phi(X_2)]`` over a battery of test functions."""
    if battery is None:
        battery = default_battery()
    if not battery:
        raise ValueError("battery must be nonempty")
    x1 = _values(X1, f1.n_outcomes)
    x2 = _values(X2, f2.n_outcomes)
    report = IdenticalDistributionReport(tolerance=tol)
    for i, phi in enumerate(battery):
        name = getattr(phi, "name", "") or f"phi{i}"
        a = upper_expectation(f1, np.asarray(phi(x1), float))
        b = upper_expectation(f2, np.asarray(phi(x2), float))
        report.discrepancies[name] = abs(a - b)
    return report
