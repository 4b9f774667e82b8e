"""Numerical checkers for the convergence criteria of independent random series.

Convergence of an infinite series cannot be decided from finitely many
partial sums. :func:`convergence_verdict` therefore uses a Cauchy-window
surrogate with three outcomes:

* ``converged``      every partial sum in the last ``W`` lies within ``eps``
                     of every other,
* ``not-converged``  every increment in the last window has magnitude at
                     least ``10 * eps`` (terms bounded away from zero), or a
                     partial sum exceeds ``1e12`` in magnitude,
* ``inconclusive``   anything else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .independence import SequenceSpec

Verdict = Literal["converged", "not-converged", "inconclusive"]
DIVERGENCE_GUARD = 1e12


def convergence_verdict(partial_sums, eps: float, window: int) -> Verdict:
    s = np.asarray(partial_sums, dtype=float)
    if window < 1 or not eps > 0:
        raise ValueError("need window >= 1 and eps > 0")
    if s.size < 2 * window:
        raise ValueError(f"need at least {2 * window} partial sums, got {s.size}")
    tail = s[-window:]
    if np.ptp(tail) < eps:
        return "converged"
    increments = np.abs(np.diff(s[-window - 1:]))
    if np.min(increments) >= 10 * eps or np.max(np.abs(s)) > DIVERGENCE_GUARD:
        return "not-converged"
    return "inconclusive"


@dataclass
class SeriesDiagnostics:
    """Partial-sum traces, per-condition verdicts and the overall criterion verdict."""

    partial_sums: dict[str, np.ndarray]
    window: int
    tolerance: float
    verdicts: dict[str, Verdict] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        if not self.verdicts:
            self.verdicts = {k: convergence_verdict(v, self.tolerance, self.window)
                             for k, v in self.partial_sums.items()}

    @property
    def overall(self) -> str:
        if all(v == "converged" for v in self.verdicts.values()):
            return "criterion-satisfied"
        return "criterion-not-satisfied"

    @property
    def satisfied(self) -> bool:
        return self.overall == "criterion-satisfied"

    def terms(self, name: str) -> np.ndarray:
        s = self.partial_sums[name]
        return np.diff(s, prepend=0.0)


def _check_horizon(spec: SequenceSpec, N: int | None, window: int) -> int:
    N = len(spec) if N is None else N
    if N > len(spec):
        raise ValueError(f"horizon {N} exceeds the sequence length {len(spec)}")
    if window < 1 or N < 2 * window:
        raise ValueError(f"need window >= 1 and horizon >= 2*window, got N={N}, W={window}")
    return N


def _term_expectations(spec: SequenceSpec, N: int, transform) -> tuple[np.ndarray, np.ndarray]:
    """Upper and lower expectations of ``transform(X_n)`` for ``n = 1..N``.

    Consecutive marginals sharing one family are evaluated as a block.
    """
    upper = np.empty(N)
    lower = np.empty(N)
    start = 0
    while start < N:
        fam = spec[start].family
        stop = start + 1
        while stop < N and spec[stop].family is fam:
            stop += 1
        vals = np.stack([transform(spec[k].values) for k in range(start, stop)])
        E = vals @ fam.matrix.T
        upper[start:stop] = E.max(axis=1)
        lower[start:stop] = E.min(axis=1)
        start = stop
    return upper, lower


def moment_series_check(spec: SequenceSpec, p: float = 2.0, N: int | None = None,
                        eps: float = 1e-6, window: int = 1000) -> SeriesDiagnostics:
    """Check the mean and moment series conditions for a.s. convergence of ``sum X_n``.

    Traces: ``upper_mean`` (sum of E^[X_n]), ``lower_mean`` (sum of E_[X_n])
    and ``moment`` (sum of E^|X_n|^p); the criterion is satisfied when all
    three converge.
    """
    if not 1 <= p <= 2:
        raise ValueError(f"p must lie in [1, 2], got {p}")
    N = _check_horizon(spec, N, window)
    up, lo = _term_expectations(spec, N, lambda x: x)
    mom, _ = _term_expectations(spec, N, lambda x: np.abs(x) ** p)
    diag = SeriesDiagnostics(
        {"upper_mean": np.cumsum(up), "lower_mean": np.cumsum(lo), "moment": np.cumsum(mom)},
        window, eps)
    diag.checks["lower_le_upper"] = bool(np.all(lo <= up))
    return diag


def three_series_check(spec: SequenceSpec, c: float = 1.0, q: float = 2.0,
                       N: int | None = None, eps: float = 1e-6,
                       window: int = 1000) -> SeriesDiagnostics:
    """Check the truncated three-series conditions at level ``c``.

    Traces: ``tail_capacity`` (sum of V(|X_n| > c)), ``upper_mean`` and
    ``lower_mean`` of the truncated ``X_n^c``, and ``moment`` (sum of
    E^|X_n^c|^q). A satisfied criterion is sufficient for a.s. convergence;
    an unsatisfied one says nothing about divergence.
    """
    if not c > 0:
        raise ValueError(f"truncation level must be positive, got {c}")
    if not 1 <= q <= 2:
        raise ValueError(f"q must lie in [1, 2], got {q}")
    N = _check_horizon(spec, N, window)
    tail, _ = _term_expectations(spec, N, lambda x: (np.abs(x) > c).astype(float))
    up, lo = _term_expectations(spec, N, lambda x: np.clip(x, -c, c))
    mom, _ = _term_expectations(spec, N, lambda x: np.abs(np.clip(x, -c, c)) ** q)
    diag = SeriesDiagnostics(
        {"tail_capacity": np.cumsum(tail), "upper_mean": np.cumsum(up),
         "lower_mean": np.cumsum(lo), "moment": np.cumsum(mom)},
        window, eps)
    diag.checks["lower_le_upper"] = bool(np.all(lo <= up))
    return diag


@dataclass
class KroneckerReport:
    premise: Verdict
    normalized_sums: np.ndarray
    tolerance: float

    @property
    def premise_satisfied(self) -> bool:
        return self.premise == "converged"

    @property
    def conclusion_holds(self) -> bool | None:
        """``None`` when the premise is not satisfied (nothing is asserted)."""
        if not self.premise_satisfied:
            return None
        tail = self.normalized_sums[-max(1, self.normalized_sums.size // 10):]
        return bool(np.max(np.abs(tail)) < self.tolerance)

    @property
    def status(self) -> str:
        if not self.premise_satisfied:
            return "premise not satisfied"
        return "conclusion holds" if self.conclusion_holds else "conclusion fails"


def kronecker_check(x, a, eps: float = 1e-3, window: int = 100, tol: float = 1e-2,
                    growth: float = 1e3, enforce_growth: bool = True) -> KroneckerReport:
    """If ``sum x_n / a_n`` converges then ``(x_1 + ... + x_N) / a_N -> 0``.

    The premise uses :func:`convergence_verdict`; the conclusion requires
    ``|sum_{i<=n} x_i| / a_n < tol`` over the last tenth of the horizon.
    ``a`` must be positive and nondecreasing with ``a_N > growth * a_1``
    unless ``enforce_growth`` is off.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    if x.shape != a.shape or x.ndim != 1:
        raise ValueError("x and a must be one-dimensional of equal length")
    if np.any(a <= 0) or np.any(np.diff(a) < 0):
        raise ValueError("a must be positive and nondecreasing")
    if enforce_growth and not a[-1] > growth * a[0]:
        raise ValueError(f"a_N = {a[-1]:g} does not exceed {growth:g} * a_1")
    premise = convergence_verdict(np.cumsum(x / a), eps, window)
    return KroneckerReport(premise, np.cumsum(x) / a, tol)

