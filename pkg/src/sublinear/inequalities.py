"""Checks of the moment and tail inequalities that hold for sub-linear expectations.

Every ``verify_*`` function evaluates both sides exactly on one instance and
reports whether the bound holds. The ``fuzz_*`` functions run the same checks
on large vectorized batches of random envelopes, and :func:`rosenthal_sweep`
enumerates a grid of short independent sequences.

Inequalities are asserted up to ``tol * max(1, |rhs|)``.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .capacity import CapacityPair
from .core import TOL, MeasureFamily, _values, lower_expectation, upper_expectation
from .independence import (PartialSumFunctional, SequenceSpec, functional_dp,
                           functional_upper_expectation, nested_upper)


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    holds: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def _holds(lhs, rhs, tol):
    return lhs <= rhs + tol * np.maximum(1.0, np.abs(rhs))


def _probe_points(x, *extra):
    pts = np.concatenate([np.ravel(x), np.ravel(extra)]) if extra else np.ravel(x)
    lo, hi = float(pts.min()) - 1.0, float(pts.max()) + 1.0
    t = np.unique(np.concatenate([pts, np.linspace(lo, hi, 201)]))
    # Nearly coincident points make finite-difference slopes meaningless.
    keep = np.concatenate([[True], np.diff(t) > 1e-9 * max(1.0, abs(lo), abs(hi))])
    return t[keep]


def _assert_nondecreasing(f, t, what="f"):
    ft = np.asarray(f(t), float)
    if np.any(np.diff(ft) < -TOL * np.maximum(1.0, np.abs(ft[1:]))):
        raise ValueError(f"{what} is not nondecreasing on the sampled points")


def _assert_convex(f, t):
    ft = np.asarray(f(t), float)
    slopes = np.diff(ft) / np.diff(t)
    if np.any(np.diff(slopes) < -1e-9 * np.maximum(1.0, np.abs(slopes[1:]))):
        raise ValueError("f is not convex on the sampled points")


def verify_holder(family: MeasureFamily, X, Y, p: float, tol: float = TOL) -> InequalityReport:
    """``E^|XY| <= (E^|X|^p)^(1/p) (E^|Y|^q)^(1/q)`` with ``1/p + 1/q = 1``."""
    if not p > 1:
        raise ValueError(f"Holder exponent must exceed 1, got {p}")
    q = p / (p - 1)
    x = np.abs(_values(X, family.n_outcomes))
    y = np.abs(_values(Y, family.n_outcomes))
    lhs = upper_expectation(family, x * y)
    rhs = upper_expectation(family, x**p) ** (1 / p) * upper_expectation(family, y**q) ** (1 / q)
    return InequalityReport("holder", lhs, rhs, bool(_holds(lhs, rhs, tol)))


def verify_chebyshev(family: MeasureFamily, X, f: Callable, x: float, form: str = "upper",
                     tol: float = TOL) -> InequalityReport:
    """Tail bound ``V(X >= x) <= E^[f(X)] / f(x)``.

    ``form="upper"`` needs ``f`` nondecreasing; ``form="abs"`` bounds
    ``V(|X| >= x)`` for ``x > 0`` and needs ``f`` even and nondecreasing on
    ``(0, inf)``. In both forms ``f >= 0`` and ``f(x) > 0`` suffice, so
    ``f(t) = |t|^p`` is admissible. The shape of ``f`` is checked on sampled
    points.
    """
    values = _values(X, family.n_outcomes)
    fx = float(f(np.float64(x)))
    if not fx > 0:
        raise ValueError(f"f(x) must be positive, got {fx}")
    t = _probe_points(values, x)
    if np.any(np.asarray(f(t), float) < 0):
        raise ValueError("f must be non-negative")
    if form == "upper":
        _assert_nondecreasing(f, t)
        event = values >= x
    elif form == "abs":
        if not x > 0:
            raise ValueError("the absolute-value form needs x > 0")
        if not np.allclose(f(t), f(-t), rtol=1e-12, atol=0):
            raise ValueError("f must be even")
        _assert_nondecreasing(f, t[t > 0])
        event = np.abs(values) >= x
    else:
        raise ValueError(f"form must be 'upper' or 'abs', got {form!r}")
    lhs = CapacityPair(family).upper(event)
    rhs = upper_expectation(family, np.asarray(f(values), float)) / fx
    return InequalityReport(f"chebyshev-{form}", lhs, rhs, bool(_holds(lhs, rhs, tol)))


def verify_jensen(family: MeasureFamily, X, f: Callable, tol: float = TOL) -> InequalityReport:
    """``E^[f(X)] >= f(E^[X])`` for convex ``f``."""
    values = _values(X, family.n_outcomes)
    mean = upper_expectation(family, values)
    _assert_convex(f, _probe_points(values, mean))
    rhs = upper_expectation(family, np.asarray(f(values), float))
    lhs = float(f(np.float64(mean)))
    return InequalityReport("jensen", lhs, rhs, bool(_holds(lhs, rhs, tol)))


def verify_cr(x, y, p, tol: float = TOL):
    """``|x+y|^p <= 2^(p-1) (|x|^p + |y|^p)`` for ``1 <= p <= 2``; vectorizes."""
    p = np.asarray(p, float)
    if np.any((p < 1) | (p > 2)):
        raise ValueError("p must lie in [1, 2]")
    x, y = np.asarray(x, float), np.asarray(y, float)
    lhs = np.abs(x + y) ** p
    rhs = 2 ** (p - 1) * (np.abs(x) ** p + np.abs(y) ** p)
    out = _holds(lhs, rhs, tol)
    return bool(out) if np.ndim(out) == 0 else out


def verify_positive_part(x, y):
    """``(x+y)^+ <= x^+ + |y|`` and ``(x+y)^- <= x^- + |y|``; vectorizes."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    s = x + y
    ok = (np.maximum(s, 0) <= np.maximum(x, 0) + np.abs(y)) & \
         (np.maximum(-s, 0) <= np.maximum(-x, 0) + np.abs(y))
    return bool(ok) if np.ndim(ok) == 0 else ok


@dataclass(frozen=True)
class RosenthalReport:
    form: str
    p: float
    lhs: float
    rhs: float
    holds: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def verify_rosenthal(spec: SequenceSpec, p: float, form: str = "drawdown",
                     tol: float = TOL) -> RosenthalReport:
    """Exact check of the maximal moment bounds for independent sequences.

    ``form="drawdown"`` (needs ``E^[X_k] <= 0``)::

        E^|max_{0<=k<=n}(S_n - S_k)|^p <= 2^(2-p) sum_k E^|X_k|^p

    ``form="maximal"`` (needs ``E^[X_k] = E_[X_k] = 0``)::

        E^[max_{k<=n} |S_k|^p] <= 2 sum_k E^|X_k|^p
    """
    if not 1 <= p <= 2:
        raise ValueError(f"p must lie in [1, 2], got {p}")
    for k, m in enumerate(spec, start=1):
        up = upper_expectation(m.family, m.values)
        if form == "drawdown":
            if up > tol:
                raise ValueError(f"X_{k} has upper expectation {up:.6g} > 0")
        elif form == "maximal":
            lo = lower_expectation(m.family, m.values)
            if abs(up) > tol or abs(lo) > tol:
                raise ValueError(f"X_{k} has upper/lower expectation {up:.6g}/{lo:.6g}, need both 0")
        else:
            raise ValueError(f"form must be 'drawdown' or 'maximal', got {form!r}")
    if form == "drawdown":
        lhs = functional_upper_expectation(spec, PartialSumFunctional("max-suffix-drawdown", p))
        const = 2.0 ** (2 - p)
    else:
        lhs = functional_upper_expectation(spec, PartialSumFunctional("max-abs-partial-sum", p))
        const = 2.0
    rhs = const * sum(upper_expectation(m.family, np.abs(m.values) ** p) for m in spec)
    return RosenthalReport(form, p, lhs, rhs, bool(_holds(lhs, rhs, tol)))


# ---------------------------------------------------------------------------
# Vectorized fuzzing

@dataclass
class FuzzReport:
    name: str
    instances: int = 0
    violations: int = 0
    worst_excess: float = -np.inf
    witness: dict | None = None

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def absorb(self, lhs, rhs, tol, describe: Callable[[int], dict]):
        self.instances += lhs.size
        bad = ~_holds(lhs, rhs, tol)
        self.violations += int(bad.sum())
        excess = (lhs - rhs) / np.maximum(1.0, np.abs(rhs))
        i = int(np.argmax(excess))
        if excess[i] > self.worst_excess:
            self.worst_excess = float(excess[i])
            self.witness = describe(i)


def _random_envelopes(rng, size, n, K, scale=5.0):
    P = rng.dirichlet(np.ones(n), size=(size, K))
    drop = rng.random(P.shape) < 0.2
    drop[..., 0] = False
    P = np.where(drop, 0.0, P)
    P /= P.sum(axis=-1, keepdims=True)
    X = rng.uniform(-scale, scale, (size, n))
    coarse = rng.random(size) < 0.2
    X[coarse] = np.round(X[coarse])
    return P, X


def _upper(P, X):
    return np.einsum("bkn,bn->bk", P, X).max(axis=1)


def _chunks(instances, chunk):
    for start in range(0, instances, chunk):
        yield start, min(chunk, instances - start)


def _shape(rng):
    return int(rng.integers(2, 9)), int(rng.integers(1, 6))


def fuzz_holder(instances: int = 10**6, seed: int = 0, chunk: int = 100_000,
                tol: float = TOL) -> FuzzReport:
    rng = np.random.default_rng(seed)
    report = FuzzReport("holder")
    for _, size in _chunks(instances, chunk):
        n, K = _shape(rng)
        P, X = _random_envelopes(rng, size, n, K)
        Y = rng.uniform(-5, 5, (size, n))
        p = rng.uniform(1.05, 4.0, size)
        q = p / (p - 1)
        ax, ay = np.abs(X), np.abs(Y)
        lhs = _upper(P, ax * ay)
        rhs = _upper(P, ax ** p[:, None]) ** (1 / p) * _upper(P, ay ** q[:, None]) ** (1 / q)
        report.absorb(lhs, rhs, tol, lambda i: {"P": P[i].tolist(), "X": X[i].tolist(),
                                                "Y": Y[i].tolist(), "p": float(p[i])})
    return report


_MONOTONE = (
    ("exp", lambda t, a: np.exp(a * t)),
    ("shifted-power", lambda t, a: 0.1 + np.maximum(t + a, 0.0) ** (1 + a)),
    ("logistic", lambda t, a: 1.0 / (1.0 + np.exp(-a * t))),
)

_EVEN = (
    ("abs-power", lambda t, a: 0.05 + np.abs(t) ** (0.5 + a)),
    ("cosh", lambda t, a: np.cosh(a * t)),
    ("capped-square", lambda t, a: 0.2 + np.minimum(t * t, 4 * a)),
)


def fuzz_chebyshev(instances: int = 10**6, seed: int = 0, chunk: int = 100_000,
                   tol: float = TOL) -> FuzzReport:
    """Both tail forms, cycling through families of admissible ``f``."""
    rng = np.random.default_rng(seed)
    report = FuzzReport("chebyshev")
    for c, (_, size) in enumerate(_chunks(instances, chunk)):
        n, K = _shape(rng)
        P, X = _random_envelopes(rng, size, n, K)
        a = rng.uniform(0.1, 1.5, size)[:, None]
        if c % 2 == 0:
            name, f = _MONOTONE[(c // 2) % len(_MONOTONE)]
            x = rng.uniform(-6, 6, size)
            x[: size // 5] = X[np.arange(size // 5), 0]  # thresholds at atoms
            event = X >= x[:, None]
        else:
            name, f = _EVEN[(c // 2) % len(_EVEN)]
            x = rng.uniform(0.01, 6, size)
            x[: size // 5] = np.maximum(np.abs(X[np.arange(size // 5), 0]), 0.01)
            event = np.abs(X) >= x[:, None]
        lhs = _upper(P, event.astype(float))
        rhs = _upper(P, f(X, a)) / f(x[:, None], a)[:, 0]
        report.absorb(lhs, rhs, tol, lambda i: {"f": name, "a": float(a[i, 0]), "x": float(x[i]),
                                                "P": P[i].tolist(), "X": X[i].tolist()})
    return report


_CONVEX = (
    ("square", lambda t, a: t * t),
    ("abs-shift", lambda t, a: np.abs(t - a)),
    ("exp", lambda t, a: np.exp(a * t / 3)),
    ("hinge", lambda t, a: np.maximum(t - a, 0.0)),
    ("abs-power", lambda t, a: np.abs(t) ** (1 + np.abs(a) / 2)),
)


def fuzz_jensen(instances: int = 10**6, seed: int = 0, chunk: int = 100_000,
                tol: float = TOL) -> FuzzReport:
    rng = np.random.default_rng(seed)
    report = FuzzReport("jensen")
    for c, (_, size) in enumerate(_chunks(instances, chunk)):
        n, K = _shape(rng)
        P, X = _random_envelopes(rng, size, n, K)
        name, f = _CONVEX[c % len(_CONVEX)]
        a = rng.uniform(-2, 2, size)
        lhs = f(_upper(P, X), a)
        rhs = _upper(P, f(X, a[:, None]))
        report.absorb(lhs, rhs, tol, lambda i: {"f": name, "a": float(a[i]),
                                                "P": P[i].tolist(), "X": X[i].tolist()})
    return report


def fuzz_cr(instances: int = 10**6, seed: int = 0, tol: float = TOL) -> FuzzReport:
    rng = np.random.default_rng(seed)
    x = rng.uniform(-10, 10, instances)
    y = rng.uniform(-10, 10, instances)
    p = rng.uniform(1, 2, instances)
    # equality and boundary cases
    k = instances // 10
    y[:k] = x[:k]
    p[k:2 * k] = rng.choice([1.0, 2.0], k)
    y[2 * k:3 * k] = 0.0
    verify_cr(x[:1], y[:1], p[:1])  # domain check
    lhs = np.abs(x + y) ** p
    rhs = 2 ** (p - 1) * (np.abs(x) ** p + np.abs(y) ** p)
    report = FuzzReport("cr")
    report.absorb(lhs, rhs, tol, lambda i: {"x": float(x[i]), "y": float(y[i]), "p": float(p[i])})
    return report


def fuzz_positive_part(instances: int = 10**6, seed: int = 0) -> FuzzReport:
    rng = np.random.default_rng(seed)
    x = rng.uniform(-10, 10, instances)
    y = rng.uniform(-10, 10, instances)
    x[: instances // 10] = np.round(x[: instances // 10])
    y[: instances // 10] = np.round(y[: instances // 10])
    s = x + y
    lhs = np.maximum(np.maximum(s, 0) - np.maximum(x, 0), np.maximum(-s, 0) - np.maximum(-x, 0))
    report = FuzzReport("positive-part")
    report.absorb(lhs, np.abs(y), 0.0, lambda i: {"x": float(x[i]), "y": float(y[i])})
    report.violations = int((~verify_positive_part(x, y)).sum())
    return report


# ---------------------------------------------------------------------------
# Exhaustive Rosenthal sweep

DEFAULT_SUPPORTS = (-1.0, -0.5, 0.5, 1.0)
DEFAULT_PROB_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


def two_point_marginals(supports=DEFAULT_SUPPORTS, prob_grid=DEFAULT_PROB_GRID,
                        max_mean: float = 0.0) -> dict[tuple, np.ndarray]:
    """Two-point variables with two-measure families whose upper mean is ``<= max_mean``.

    Returns ``{(a, b): probs}`` with ``probs`` of shape ``(F, 2, 2)``: ``F``
    families, each with two distinct measures ``(P(a), P(b))``.
    """
    out = {}
    for a, b in itertools.combinations(sorted(supports), 2):
        fams = []
        for p1, p2 in itertools.combinations(prob_grid, 2):
            P = np.array([[p1, 1 - p1], [p2, 1 - p2]])
            if np.max(P @ [a, b]) <= max_mean + TOL:
                fams.append(P)
        if fams:
            out[(a, b)] = np.array(fams)
    return out


@dataclass
class SweepReport:
    cases: int = 0
    sequences: int = 0
    violations: list[dict] = field(default_factory=list)
    violation_count: int = 0
    max_enumeration_gap: float = 0.0
    min_slack_ratio: float = np.inf
    tightest: dict | None = None
    per_exponent: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.violation_count == 0

    def merge(self, other: "SweepReport"):
        self.cases += other.cases
        self.sequences += other.sequences
        self.violations.extend(other.violations[: max(0, 20 - len(self.violations))])
        self.violation_count += other.violation_count
        self.max_enumeration_gap = max(self.max_enumeration_gap, other.max_enumeration_gap)
        if other.min_slack_ratio < self.min_slack_ratio:
            self.min_slack_ratio = other.min_slack_ratio
            self.tightest = other.tightest
        for p, n in other.per_exponent.items():
            self.per_exponent[p] = self.per_exponent.get(p, 0) + n


def _sweep_block(args) -> SweepReport:
    supports, fams, exponents, check_enumeration, tol = args
    n = len(supports)
    values = [np.array(s) for s in supports]
    idx = np.meshgrid(*[np.arange(len(F)) for F in fams], indexing="ij")
    idx = [i.ravel() for i in idx]
    probs = [F[i] for F, i in zip(fams, idx)]
    B = idx[0].size
    paths = np.stack(np.meshgrid(*values, indexing="ij"), axis=-1)
    report = SweepReport(sequences=B)
    for p in exponents:
        f = PartialSumFunctional("max-suffix-drawdown", p)
        lhs = functional_dp(values, probs, f)
        # sum_k E^|X_k|^p, per family then broadcast over the batch
        rhs = 2.0 ** (2 - p) * sum(
            np.max(F @ (np.abs(v) ** p), axis=1)[i] for F, v, i in zip(fams, values, idx))
        report.cases += B
        report.per_exponent[p] = B
        if check_enumeration:
            grid = np.broadcast_to(f.on_paths(paths), (B,) + paths.shape[:-1])
            enum = nested_upper(grid, probs)
            report.max_enumeration_gap = max(report.max_enumeration_gap,
                                             float(np.max(np.abs(enum - lhs))))
        bad = ~_holds(lhs, rhs, tol)
        report.violation_count += int(bad.sum())
        for j in np.flatnonzero(bad)[:20]:
            report.violations.append(_describe(supports, probs, j, p, lhs[j], rhs[j]))
        ratio = (rhs - lhs) / rhs
        j = int(np.argmin(ratio))
        if ratio[j] < report.min_slack_ratio:
            report.min_slack_ratio = float(ratio[j])
            report.tightest = _describe(supports, probs, j, p, lhs[j], rhs[j])
    return report


def _describe(supports, probs, j, p, lhs, rhs):
    return {"supports": [list(s) for s in supports],
            "families": [P[j].tolist() for P in probs],
            "p": float(p), "lhs": float(lhs), "rhs": float(rhs)}


def rosenthal_sweep(supports: Sequence[float] = DEFAULT_SUPPORTS,
                    prob_grid: Sequence[float] = DEFAULT_PROB_GRID,
                    max_length: int = 3,
                    exponents: Sequence[float] = (1.0, 1.5, 2.0),
                    check_enumeration: bool = True,
                    workers: int = 1,
                    tol: float = TOL) -> SweepReport:
    """Exhaustive drawdown-form Rosenthal check over short two-point sequences.

    Covers every sequence of length ``1..max_length`` whose marginals are
    independently chosen from :func:`two_point_marginals`. The exact DP value
    is compared with the bound and, if ``check_enumeration``, with full-path
    enumeration. Blocks (one per support tuple) run in ``workers`` processes
    and are merged in a fixed order.
    """
    marg = two_point_marginals(supports, prob_grid)
    keys = sorted(marg)
    blocks = [
        (combo, [marg[s] for s in combo], tuple(exponents), check_enumeration, tol)
        for n in range(1, max_length + 1)
        for combo in itertools.product(keys, repeat=n)
    ]
    report = SweepReport()
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sweep_block, blocks))
    else:
        results = map(_sweep_block, blocks)
    for r in results:
        report.merge(r)
    return report
