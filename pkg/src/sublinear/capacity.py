"""Upper/lower capacities of events and Choquet integrals.

On a finite outcome set the indicator of every event is a random variable,
so the upper capacity reduces to ``V(A) = E^[I_A] = max_P P(A)`` and the lower
capacity to ``v(A) = 1 - V(A^c) = min_P P(A)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .core import TOL, DimensionError, MeasureFamily, _values

Which = Literal["upper", "lower"]


@dataclass(frozen=True, eq=False)
class Event:
    """Subset of the outcome set, as a boolean membership vector."""

    membership: np.ndarray

    def __post_init__(self):
        m = np.array(self.membership, dtype=bool)
        if m.ndim != 1:
            raise ValueError("membership must be one-dimensional")
        m.setflags(write=False)
        object.__setattr__(self, "membership", m)

    def __len__(self):
        return self.membership.size

    @classmethod
    def of(cls, n: int, indices) -> "Event":
        m = np.zeros(n, dtype=bool)
        m[list(indices)] = True
        return cls(m)

    @classmethod
    def empty(cls, n: int) -> "Event":
        return cls(np.zeros(n, dtype=bool))

    @classmethod
    def full(cls, n: int) -> "Event":
        return cls(np.ones(n, dtype=bool))

    @classmethod
    def where(cls, X, predicate: Callable[[np.ndarray], np.ndarray]) -> "Event":
        """Event ``{w : predicate(X(w))}``, e.g. ``Event.where(X, lambda x: x >= t)``."""
        return cls(predicate(_values(X)))

    def _check(self, other: "Event"):
        if len(other) != len(self):
            raise DimensionError("events over different outcome sets")

    def complement(self) -> "Event":
        return Event(~self.membership)

    def __or__(self, other: "Event") -> "Event":
        self._check(other)
        return Event(self.membership | other.membership)

    def __and__(self, other: "Event") -> "Event":
        self._check(other)
        return Event(self.membership & other.membership)

    def __eq__(self, other):
        return isinstance(other, Event) and np.array_equal(self.membership, other.membership)

    def __hash__(self):
        return hash(self.membership.tobytes())


@dataclass(frozen=True)
class ChoquetValue:
    value: float
    method: Literal["exact-discrete", "quadrature"] = "exact-discrete"
    node_count: int | None = None

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class CapacityPair:
    """The pair ``(V, v)`` generated by a measure family."""

    family: MeasureFamily

    @property
    def n_outcomes(self) -> int:
        return self.family.n_outcomes

    def _membership(self, A) -> np.ndarray:
        m = A.membership if isinstance(A, Event) else np.asarray(A, dtype=bool)
        if m.shape != (self.n_outcomes,):
            raise DimensionError(f"event has {m.size} entries, outcome set has {self.n_outcomes}")
        return m

    def upper(self, A) -> float:
        m = self._membership(A)
        if m.all():
            return 1.0
        return min(1.0, float(np.max(self.family.matrix[:, m].sum(axis=1))))

    def lower(self, A) -> float:
        return 1.0 - self.upper(~self._membership(A))

    def capacity(self, which: Which):
        if which == "upper":
            return self.upper
        if which == "lower":
            return self.lower
        raise ValueError(f"which must be 'upper' or 'lower', got {which!r}")


def upper_capacity(pair: CapacityPair, A) -> float:
    return pair.upper(A)


def lower_capacity(pair: CapacityPair, A) -> float:
    return pair.lower(A)


def choquet_integral(pair: CapacityPair, X, which: Which = "upper") -> ChoquetValue:
    """Exact Choquet integral of a finite-valued ``X``.

    With the distinct values ``v_1 < ... < v_m`` of ``X`` the map
    ``t -> V(X >= t)`` equals 1 for ``t <= v_1`` and ``V(X >= v_i)`` on
    ``(v_{i-1}, v_i]``, so the layer-cake integral collapses to

        v_1 + sum_{i>=2} (v_i - v_{i-1}) V(X >= v_i).
    """
    x = _values(X, pair.n_outcomes)
    cap = pair.capacity(which)
    levels = np.unique(x)
    total = float(levels[0])
    for lo, hi in zip(levels[:-1], levels[1:]):
        total += float(hi - lo) * cap(x >= hi)
    return ChoquetValue(total)


def choquet_quadrature(survival: Callable[[np.ndarray], np.ndarray], lower: float,
                       upper: float, nodes: int = 2001) -> ChoquetValue:
    """Choquet integral of a variable known only through ``t -> V(X >= t)``.

    ``X`` must take values in ``[lower, upper]``; then the integral equals
    ``lower + int_lower^upper V(X >= t) dt``, evaluated with the trapezoid
    rule on ``nodes`` equally spaced points. ``survival`` receives an array
    of levels and returns the capacity at each.
    """
    if nodes < 2 or not upper >= lower:
        raise ValueError("need nodes >= 2 and upper >= lower")
    t = np.linspace(lower, upper, nodes)
    s = np.asarray(survival(t), dtype=float)
    area = float(np.sum((s[1:] + s[:-1]) * np.diff(t)) / 2.0)
    return ChoquetValue(lower + area, "quadrature", nodes)


def _all_subsets(n: int) -> np.ndarray:
    codes = np.arange(1 << n)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(bool)


@dataclass
class SubadditivityReport:
    mode: Literal["exhaustive", "sampled"]
    pairs: int
    upper_violations: list[tuple] = field(default_factory=list)
    mixed_violations: list[tuple] = field(default_factory=list)
    # (A, B, v(AuB), v(A) + v(B)) showing the lower capacity is not sub-additive
    lower_witness: tuple | None = None

    @property
    def ok(self) -> bool:
        return not self.upper_violations and not self.mixed_violations


def check_capacity_subadditivity(pair: CapacityPair, exhaustive_max: int = 10,
                                 samples: int = 100_000, seed: int = 0,
                                 tol: float = TOL) -> SubadditivityReport:
    """Check ``V(AuB) <= V(A)+V(B)`` and ``v(AuB) <= v(A)+V(B)`` over event pairs.

    All ``4^n`` ordered pairs are enumerated when ``n <= exhaustive_max``;
    otherwise ``samples`` random pairs are drawn. The report also carries a
    witness, if one exists among the pairs visited, that ``v`` alone fails
    sub-additivity.
    """
    n = pair.n_outcomes
    P = pair.family.matrix
    if n <= exhaustive_max:
        subsets = _all_subsets(n)
        V = np.max(subsets.astype(float) @ P.T, axis=1)
        v = 1.0 - V[::-1]  # complement of code k is code (2^n - 1 - k)
        codes = np.arange(1 << n)
        report = SubadditivityReport("exhaustive", (1 << n) ** 2)
        chunk = max(1, (1 << 20) >> n)
        for start in range(0, 1 << n, chunk):
            a, b = np.meshgrid(codes[start:start + chunk], codes, indexing="ij")
            _collect(report, subsets, a, b, a | b, V, v, tol)
        return report

    rng = np.random.default_rng(seed)
    A = rng.random((samples, n)) < rng.random((samples, 1))
    B = rng.random((samples, n)) < rng.random((samples, 1))
    U = A | B

    def upper(M):
        return np.max(M.astype(float) @ P.T, axis=1)

    VA, VB, VU = upper(A), upper(B), upper(U)
    vA, vB, vU = 1 - upper(~A), 1 - upper(~B), 1 - upper(~U)
    report = SubadditivityReport("sampled", samples)
    for i in np.flatnonzero(VU > VA + VB + tol):
        report.upper_violations.append((A[i].tolist(), B[i].tolist(), VU[i], VA[i] + VB[i]))
    for i in np.flatnonzero(vU > vA + VB + tol):
        report.mixed_violations.append((A[i].tolist(), B[i].tolist(), vU[i], vA[i] + VB[i]))
    gap = vU - (vA + vB)
    i = int(np.argmax(gap))
    if gap[i] > tol:
        report.lower_witness = (A[i].tolist(), B[i].tolist(), float(vU[i]), float(vA[i] + vB[i]))
    return report


def _collect(report, subsets, a, b, u, V, v, tol):
    excess = V[u] - (V[a] + V[b])
    for i, j in zip(*np.nonzero(excess > tol)):
        report.upper_violations.append(
            (subsets[a[i, j]].tolist(), subsets[b[i, j]].tolist(), float(V[u[i, j]]),
             float(V[a[i, j]] + V[b[i, j]])))
    excess = v[u] - (v[a] + V[b])
    for i, j in zip(*np.nonzero(excess > tol)):
        report.mixed_violations.append(
            (subsets[a[i, j]].tolist(), subsets[b[i, j]].tolist(), float(v[u[i, j]]),
             float(v[a[i, j]] + V[b[i, j]])))
    gap = v[u] - (v[a] + v[b])
    k = np.unravel_index(np.argmax(gap), gap.shape)
    if gap[k] > tol and (report.lower_witness is None or gap[k] > report.lower_witness[2] - report.lower_witness[3]):
        report.lower_witness = (subsets[a[k]].tolist(), subsets[b[k]].tolist(),
                                float(v[u[k]]), float(v[a[k]] + v[b[k]]))
