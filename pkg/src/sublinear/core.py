"""Sub-linear expectations on a finite outcome set.

A sub-linear expectation is realized as the upper envelope of a finite
family of probability vectors::

    E^[X] = max_P  sum_w P(w) X(w)

which is monotone, constant preserving, sub-additive and positively
homogeneous by construction. The conjugate (lower) expectation is
``-E^[-X]``, i.e. the minimum over the same family.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

#: Absolute tolerance for every equality/inequality assertion on sums of
#: at most ~10^4 doubles.
TOL = 1e-12


class DimensionError(ValueError):
    """Random variable, event or measure defined over a different outcome set."""


class Outcome(NamedTuple):
    index: int
    label: str | None = None


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """A probability vector over ``len(probabilities)`` outcomes."""

    probabilities: np.ndarray

    def __post_init__(self):
        p = _as_vector(self.probabilities, "probabilities")
        if p.size == 0:
            raise ValueError("a measure needs at least one outcome")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError(f"probabilities must be finite and non-negative: {p}")
        total = float(p.sum())
        if abs(total - 1.0) > TOL:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")
        object.__setattr__(self, "probabilities", p)

    def __len__(self):
        return self.probabilities.size

    def expectation(self, X) -> float:
        x = _values(X, len(self))
        return float(self.probabilities @ x)

    @classmethod
    def point_mass(cls, n: int, index: int) -> "DiscreteMeasure":
        p = np.zeros(n)
        p[index] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, n: int) -> "DiscreteMeasure":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True, eq=False)
class MeasureFamily:
    """Nonempty finite set of measures over a common outcome set.

    ``matrix`` stacks the probability vectors row-wise, shape
    ``(n_measures, n_outcomes)``. Outcome labels are optional.
    """

    measures: tuple[DiscreteMeasure, ...]
    labels: tuple[str, ...] | None = None
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        measures = tuple(
            m if isinstance(m, DiscreteMeasure) else DiscreteMeasure(m)
            for m in self.measures
        )
        if not measures:
            raise ValueError("a measure family must be nonempty")
        sizes = {len(m) for m in measures}
        if len(sizes) != 1:
            raise DimensionError(f"measures disagree on outcome count: {sorted(sizes)}")
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != len(measures[0]):
                raise DimensionError("one label per outcome required")
            object.__setattr__(self, "labels", labels)
        matrix = np.vstack([m.probabilities for m in measures])
        matrix.setflags(write=False)
        object.__setattr__(self, "measures", measures)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_probabilities(cls, rows, labels=None) -> "MeasureFamily":
        return cls(tuple(DiscreteMeasure(r) for r in np.atleast_2d(rows)), labels)

    @classmethod
    def singleton(cls, probabilities, labels=None) -> "MeasureFamily":
        return cls((DiscreteMeasure(probabilities),), labels)

    @property
    def n_outcomes(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_measures(self) -> int:
        return self.matrix.shape[0]

    @property
    def outcomes(self) -> tuple[Outcome, ...]:
        labels = self.labels or (None,) * self.n_outcomes
        return tuple(Outcome(i, lab) for i, lab in enumerate(labels))

    def expectations(self, X) -> np.ndarray:
        """Linear expectation of ``X`` under each member measure."""
        return self.matrix @ _values(X, self.n_outcomes)

    def __len__(self):
        return self.n_measures


@dataclass(frozen=True, eq=False)
class RandomVariable:
    """Real values aligned with an outcome set.

    Supports elementwise arithmetic with scalars and other random variables
    over the same outcome set, ``abs()`` and ``apply`` for test functions.
    """

    values: np.ndarray

    def __post_init__(self):
        v = _as_vector(self.values, "values")
        if not np.all(np.isfinite(v)):
            raise ValueError("random variable values must be finite")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def apply(self, fn: Callable) -> "RandomVariable":
        return RandomVariable(np.asarray(fn(self.values), dtype=float))

    def _other(self, other):
        if isinstance(other, RandomVariable):
            if len(other) != len(self):
                raise DimensionError(f"outcome counts differ: {len(self)} vs {len(other)}")
            return other.values
        return other

    def __add__(self, other):
        return RandomVariable(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return RandomVariable(self.values - self._other(other))

    def __rsub__(self, other):
        return RandomVariable(self._other(other) - self.values)

    def __mul__(self, other):
        return RandomVariable(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return RandomVariable(self.values / self._other(other))

    def __neg__(self):
        return RandomVariable(-self.values)

    def __abs__(self):
        return RandomVariable(np.abs(self.values))

    def __pow__(self, p):
        return RandomVariable(self.values**p)

    @classmethod
    def constant(cls, c: float, n: int) -> "RandomVariable":
        return cls(np.full(n, float(c)))


def _values(X, n: int | None = None) -> np.ndarray:
    x = X.values if isinstance(X, RandomVariable) else np.asarray(X, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"random variable must be one-dimensional, got shape {x.shape}")
    if n is not None and x.size != n:
        raise DimensionError(f"random variable has {x.size} values, outcome set has {n}")
    return x


@dataclass(frozen=True)
class TestFunction:
    """A locally Lipschitz test function of ``arity`` real arguments.

    The envelope ``|f(x)-f(y)| <= C (1 + |x|^m + |y|^m) |x-y|`` is declared via
    ``degree`` (m) and ``constant`` (C) and can be spot-checked on sampled
    pairs with :meth:`spot_check`; it is never proven.

    ``fn`` is called with numpy arrays (one per argument, broadcastable) and
    must return an array of the broadcast shape.
    """

    __test__ = False  # not a pytest class

    fn: Callable[..., np.ndarray]
    arity: int = 1
    degree: int = 0
    constant: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError("arity must be positive")
        if self.degree < 0 or self.constant <= 0:
            raise ValueError("need degree >= 0 and constant > 0")

    def __call__(self, *args):
        return self.fn(*args)

    def spot_check(self, samples: int = 1000, scale: float = 10.0, seed: int = 0) -> float:
        """Largest observed ratio ``|f(x)-f(y)| / envelope``; <= 1 means no violation found."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(-scale, scale, (samples, self.arity))
        y = rng.uniform(-scale, scale, (samples, self.arity))
        fx = np.asarray(self.fn(*x.T), dtype=float)
        fy = np.asarray(self.fn(*y.T), dtype=float)
        nx = np.linalg.norm(x, axis=1)
        ny = np.linalg.norm(y, axis=1)
        dist = np.linalg.norm(x - y, axis=1)
        envelope = self.constant * (1 + nx**self.degree + ny**self.degree) * dist
        mask = envelope > 0
        if not mask.any():
            return 0.0
        return float(np.max(np.abs(fx - fy)[mask] / envelope[mask]))


def upper_expectation(family: MeasureFamily, X) -> float:
    """Upper expectation ``max_P E_P[X]`` over the family.

    >>> coin = MeasureFamily.from_probabilities([[0.7, 0.3], [0.3, 0.7]])
    >>> round(upper_expectation(coin, [-1, 1]), 12)
    0.4
    """
    return float(np.max(family.expectations(X)))


def lower_expectation(family: MeasureFamily, X) -> float:
    """Conjugate expectation ``-E^[-X]``, the minimum over the family."""
    return -upper_expectation(family, -_values(X, family.n_outcomes))


def truncate(X, c: float) -> RandomVariable:
    """Clamp ``X`` pointwise to ``[-c, c]``."""
    if not c > 0:
        raise ValueError(f"truncation level must be positive, got {c}")
    return RandomVariable(np.clip(_values(X), -c, c))


def random_family(rng: np.random.Generator, n_outcomes: int, n_measures: int,
                  sparsity: float = 0.0) -> MeasureFamily:
    """Draw a family of Dirichlet(1) measures, optionally zeroing entries.

    With ``sparsity > 0`` each entry is dropped with that probability
    (at least one entry per row survives) to exercise boundary measures.
    """
    rows = rng.dirichlet(np.ones(n_outcomes), size=n_measures)
    if sparsity > 0:
        keep = rng.random(rows.shape) >= sparsity
        keep[np.arange(n_measures), rng.integers(0, n_outcomes, n_measures)] = True
        rows = rows * keep
        rows /= rows.sum(axis=1, keepdims=True)
    return MeasureFamily.from_probabilities(rows)


@dataclass(frozen=True)
class AxiomViolation:
    axiom: str
    excess: float
    witness: dict


@dataclass
class AxiomReport:
    trials: int
    checks: int = 0
    violations: list[AxiomViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def merge(self, other: "AxiomReport") -> "AxiomReport":
        return AxiomReport(self.trials + other.trials, self.checks + other.checks,
                           self.violations + other.violations)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for v in self.violations:
            out[v.axiom] = out.get(v.axiom, 0) + 1
        return out


AXIOMS = (
    "monotonicity",
    "constant_preserving",
    "sub_additivity",
    "positive_homogeneity",
    "translation_invariance",
    "lower_le_upper",
    "difference_lower_bound",
)


def check_axioms(family: MeasureFamily, trials: int, seed: int = 0,
                 scale: float = 10.0, tol: float = TOL) -> AxiomReport:
    """Randomized check of the sub-linear expectation axioms for ``family``.

    Each trial draws ``X, Y`` (uniform on ``[-scale, scale]``, with a share of
    ties and zeros), a non-negative ``D`` so that ``X + D >= X``, ``lam >= 0``
    (zero in some trials) and a real constant ``c``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    n = family.n_outcomes
    P = family.matrix

    X = rng.uniform(-scale, scale, (trials, n))
    Y = rng.uniform(-scale, scale, (trials, n))
    # Coarse values make ties and exact zeros common.
    coarse = rng.random(trials) < 0.25
    X[coarse] = np.round(X[coarse])
    D = np.abs(rng.uniform(-scale, scale, (trials, n))) * (rng.random((trials, n)) < 0.7)
    lam = rng.uniform(0, 5, trials)
    lam[rng.random(trials) < 0.1] = 0.0
    c = rng.uniform(-scale, scale, trials)

    def E(Z):
        return np.max(Z @ P.T, axis=1)

    eX, eY = E(X), E(Y)
    checks = {
        # E[X + D] >= E[X]
        "monotonicity": eX - E(X + D),
        "constant_preserving": np.abs(E(np.repeat(c[:, None], n, axis=1)) - c),
        "sub_additivity": E(X + Y) - (eX + eY),
        "positive_homogeneity": np.abs(E(lam[:, None] * X) - lam * eX),
        "translation_invariance": np.abs(E(X + c[:, None]) - (eX + c)),
        "lower_le_upper": -E(-X) - eX,
        "difference_lower_bound": (eX - eY) - E(X - Y),
    }
    report = AxiomReport(trials=trials, checks=trials * len(checks))
    for axiom, excess in checks.items():
        for i in np.flatnonzero(excess > tol):
            report.violations.append(AxiomViolation(
                axiom, float(excess[i]),
                {"X": X[i].tolist(), "Y": Y[i].tolist(), "D": D[i].tolist(),
                 "lambda": float(lam[i]), "c": float(c[i])},
            ))
    return report
