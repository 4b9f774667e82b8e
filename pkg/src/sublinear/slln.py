"""Marcinkiewicz strong-law experiments under distributional ambiguity.

Almost-sure statements "in capacity" are tested by simulation: an event of
upper capacity zero has probability zero under every measure of the
envelope, including measures chosen adaptively step by step. Paths are
therefore sampled under several measure-selection strategies, and the
normalized deviation ``|S_n - n mu| / n^(1/p)`` must shrink under all of
them.

Random streams: replicate ``r`` of a strategy with seed ``s`` draws from
``SeedSequence(seed, spawn_key=(s, r))``, one uniform per step for the
outcome and one for the measure choice. Strategies sharing a seed therefore
share streams (common random numbers), and results do not depend on how
replicates are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from .capacity import CapacityPair, choquet_integral
from .core import TOL, MeasureFamily, _values, lower_expectation, upper_expectation
from .independence import SequenceSpec
from .series import Verdict, convergence_verdict

DEFAULT_CHECKPOINTS = (100, 1_000, 10_000, 100_000)


def choquet_moment(family: MeasureFamily, X, p: float) -> float:
    """Upper Choquet integral of ``|X|^p``."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    x = np.abs(_values(X, family.n_outcomes)) ** p
    return choquet_integral(CapacityPair(family), x, "upper").value


def tail_expectation(family: MeasureFamily, X, a: float) -> float:
    """``E^[(|X| - a)^+]``."""
    if a < 0:
        raise ValueError(f"a must be non-negative, got {a}")
    x = _values(X, family.n_outcomes)
    return upper_expectation(family, np.maximum(np.abs(x) - a, 0.0))


@dataclass
class SquareSumReport:
    p: float
    terms: np.ndarray
    partial_sums: np.ndarray
    verdict: Verdict
    choquet_moment: float
    #: first n with n^(1/p) >= max|X|, from which the clamp is inactive
    clamp_inactive_from: int
    #: max |term - E^[X^2] / n^(2/p)| over n >= clamp_inactive_from
    closed_form_gap: float

    @property
    def limit_estimate(self) -> float:
        return float(self.partial_sums[-1])


def square_sum_trace(family: MeasureFamily, X, p: float, N: int,
                     eps: float = 1e-3, window: int = 100) -> SquareSumReport:
    """Partial sums of ``E^[(|X| ^ n^(1/p))^2] / n^(2/p)`` for ``n = 1..N``."""
    if not 0 < p < 2:
        raise ValueError(f"p must lie in (0, 2), got {p}")
    x = np.abs(_values(X, family.n_outcomes))
    n = np.arange(1, N + 1, dtype=float)
    level = n ** (1 / p)
    clamped = np.minimum(x[None, :], level[:, None]) ** 2
    terms = np.max(clamped @ family.matrix.T, axis=1) / n ** (2 / p)
    sums = np.cumsum(terms)

    inactive = int(np.searchsorted(level, x.max(), side="left")) + 1
    second = upper_expectation(family, x**2)
    tail = slice(inactive - 1, None)
    gap = float(np.max(np.abs(terms[tail] - second / n[tail] ** (2 / p)), initial=0.0))
    return SquareSumReport(p, terms, sums, convergence_verdict(sums, eps, window),
                           choquet_moment(family, x, p), inactive, gap)


@dataclass(frozen=True)
class SelectionStrategy:
    """Rule choosing, at each step, the measure to sample ``X_n`` from.

    ``fixed``   always measure ``index``;
    ``random``  a uniformly random member, independently each step;
    ``greedy``  the member maximizing the one-step expected ``|S_n - n mu|``
                (``target="centered-sum"``) or the probability of the probed
                event (``target="event"``); ties go to the lowest index.
    """

    kind: Literal["fixed", "random", "greedy"] = "fixed"
    index: int = 0
    seed: int = 0
    target: Literal["centered-sum", "event"] = "centered-sum"

    def __post_init__(self):
        if self.kind not in ("fixed", "random", "greedy"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")

    @property
    def name(self) -> str:
        if self.kind == "fixed":
            return f"fixed-{self.index}"
        if self.kind == "greedy" and self.target == "event":
            return "greedy-event"
        return self.kind


DEFAULT_STRATEGIES = (SelectionStrategy("fixed", 0), SelectionStrategy("random"),
                      SelectionStrategy("greedy"))


def _streams(seed: int, strategy: SelectionStrategy, replicates: int, horizon: int):
    u_out = np.empty((replicates, horizon))
    u_sel = np.empty((replicates, horizon))
    for r in range(replicates):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(seed, spawn_key=(strategy.seed, r))))
        u_out[r] = rng.random(horizon)
        u_sel[r] = rng.random(horizon)
    return u_out, u_sel


def _cdf(P):
    c = np.cumsum(P, axis=-1)
    return c / c[..., -1:]


def _draw(cdf_rows, u):
    return np.sum(cdf_rows <= u[..., None], axis=-1)


def sample_paths(spec: SequenceSpec, strategy: SelectionStrategy, replicates: int,
                 horizon: int, seed: int = 0, mu: float = 0.0,
                 events: Sequence[np.ndarray] | None = None):
    """Sample ``replicates`` paths of ``X_1..X_horizon``.

    Returns ``(outcomes, values)``, both of shape ``(replicates, horizon)``:
    the drawn outcome index and ``X_n`` at that outcome. ``events[n-1]`` is
    the membership vector used by the ``greedy``/``event`` target.
    """
    if horizon > len(spec):
        raise ValueError(f"horizon {horizon} exceeds the sequence length {len(spec)}")
    for m in spec.marginals[:horizon]:
        if strategy.kind == "fixed" and not 0 <= strategy.index < m.family.n_measures:
            raise ValueError(f"measure index {strategy.index} outside the family")
    u_out, u_sel = _streams(seed, strategy, replicates, horizon)
    outcomes = np.empty((replicates, horizon), dtype=np.int64)
    values = np.empty((replicates, horizon))

    first = spec[0]
    iid = spec[:horizon].identically_distributed
    if iid and (strategy.kind != "greedy" or strategy.target == "centered-sum"):
        P, x = first.family.matrix, first.values
        cdf = _cdf(P)
        if strategy.kind == "fixed":
            outcomes[:] = _draw(cdf[strategy.index], u_out)
        elif strategy.kind == "random":
            sel = np.minimum((u_sel * len(P)).astype(np.int64), len(P) - 1)
            outcomes[:] = _draw(cdf[sel], u_out)
        else:
            s = np.zeros(replicates)
            for k in range(horizon):
                score = np.abs(s[:, None] + x[None, :] - (k + 1) * mu) @ P.T
                sel = np.argmax(score, axis=1)
                outcomes[:, k] = _draw(cdf[sel], u_out[:, k])
                s += x[outcomes[:, k]]
        values[:] = x[outcomes]
        return outcomes, values

    s = np.zeros(replicates)
    for k in range(horizon):
        m = spec[k]
        P, x = m.family.matrix, m.values
        if strategy.kind == "fixed":
            sel = np.full(replicates, strategy.index)
        elif strategy.kind == "random":
            sel = np.minimum((u_sel[:, k] * len(P)).astype(np.int64), len(P) - 1)
        elif strategy.target == "event":
            if events is None:
                raise ValueError("the event target needs events")
            sel = np.full(replicates, int(np.argmax(P[:, events[k]].sum(axis=1))))
        else:
            score = np.abs(s[:, None] + x[None, :] - (k + 1) * mu) @ P.T
            sel = np.argmax(score, axis=1)
        outcomes[:, k] = _draw(_cdf(P)[sel], u_out[:, k])
        values[:, k] = x[outcomes[:, k]]
        s += values[:, k]
    return outcomes, values


@dataclass
class SllnReport:
    """Normalized deviations ``|S_n - n mu| / n^(1/p)`` at checkpoints.

    ``values[name]`` has shape ``(replicates, len(checkpoints))``.
    """

    p: float
    mu: float
    checkpoints: tuple[int, ...]
    values: dict[str, np.ndarray] = field(default_factory=dict)
    note: str = ""

    def quantiles(self, name: str) -> dict[str, np.ndarray]:
        v = self.values[name]
        return {"median": np.median(v, axis=0), "q90": np.quantile(v, 0.9, axis=0),
                "max": np.max(v, axis=0)}

    def decade_ratios(self, name: str) -> np.ndarray:
        """Ratio of median statistics between consecutive checkpoints (0 when both vanish)."""
        med = self.quantiles(name)["median"]
        return np.array([_ratio(b, a) for a, b in zip(med[:-1], med[1:])])

    def scaling_ratio(self, name: str) -> float:
        """Ratio of the median statistic at the last checkpoint to that at the first."""
        med = self.quantiles(name)["median"]
        return _ratio(med[-1], med[0])

    def final_max(self) -> float:
        return max(float(np.max(v[:, -1])) for v in self.values.values())

    def to_dict(self) -> dict:
        return {
            "p": self.p, "mu": self.mu, "checkpoints": list(self.checkpoints), "note": self.note,
            "strategies": {
                name: {"values": v.tolist(),
                       **{k: q.tolist() for k, q in self.quantiles(name).items()},
                       "decade_ratios": self.decade_ratios(name).tolist(),
                       "scaling_ratio": self.scaling_ratio(name)}
                for name, v in self.values.items()},
        }


def _ratio(num, den) -> float:
    if den == 0:
        return 0.0 if num == 0 else float("inf")
    return float(num / den)


OUTSIDE_SCOPE = "outside proven scope (p = 1)"


def _check_moments(spec: SequenceSpec, horizon: int, mu: float, tol: float = TOL):
    for k, m in enumerate(spec.marginals[:horizon], start=1):
        up = upper_expectation(m.family, m.values)
        lo = lower_expectation(m.family, m.values)
        if abs(up - mu) > tol or abs(lo - mu) > tol:
            raise ValueError(
                f"X_{k} has upper/lower expectation {up:.6g}/{lo:.6g}, need both equal to mu={mu:g}")


def simulate_trajectories(spec: SequenceSpec,
                          strategies: Sequence[SelectionStrategy] = DEFAULT_STRATEGIES,
                          replicates: int = 100, horizon: int = 100_000, p: float = 1.5,
                          mu: float = 0.0, seed: int = 0,
                          checkpoints: Sequence[int] | None = None) -> SllnReport:
    """Record ``|S_n - n mu| / n^(1/p)`` at checkpoints under each strategy.

    For ``1 < p < 2`` the upper and lower means must both equal ``mu``. The
    case ``p = 1`` runs but is labelled as outside the proven scope.
    """
    if not 0 < p < 2:
        raise ValueError(f"p must lie in (0, 2), got {p}")
    if 1 < p < 2:
        _check_moments(spec, horizon, mu)
    if checkpoints is None:
        checkpoints = tuple(c for c in DEFAULT_CHECKPOINTS if c <= horizon)
    checkpoints = tuple(int(c) for c in checkpoints)
    if not checkpoints or any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be nonempty and strictly increasing")
    if checkpoints[0] < 1 or checkpoints[-1] > horizon:
        raise ValueError("checkpoints must lie in [1, horizon]")
    names = [s.name for s in strategies]
    if len(set(names)) != len(names):
        raise ValueError(f"strategy names must be distinct: {names}")

    idx = np.array(checkpoints) - 1
    n = np.array(checkpoints, dtype=float)
    report = SllnReport(p, mu, checkpoints, note=OUTSIDE_SCOPE if p == 1 else "")
    for strategy in strategies:
        _, values = sample_paths(spec, strategy, replicates, horizon, seed, mu)
        S = np.cumsum(values, axis=1)[:, idx]
        report.values[strategy.name] = np.abs(S - n * mu) / n ** (1 / p)
    return report


@dataclass
class BorelCantelliReport:
    premise: Verdict
    capacities: np.ndarray
    n0_grid: tuple[int, ...]
    replicates: int
    #: per strategy: fraction of replicates with an occurrence at some n in (n0, horizon]
    late_fractions: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def premise_satisfied(self) -> bool:
        return self.premise == "converged"

    @property
    def union_bounds(self) -> np.ndarray:
        """``sum_{n0 < n <= horizon} V(A_n)`` for each ``n0`` (capped at 1)."""
        tail = np.cumsum(self.capacities[::-1])[::-1]  # tail[k] = sum_{n >= k+1}
        out = np.array([tail[n0] if n0 < tail.size else 0.0 for n0 in self.n0_grid])
        return np.minimum(out, 1.0)

    @property
    def allowances(self) -> np.ndarray:
        """Union bound plus three binomial standard errors."""
        b = self.union_bounds
        return b + 3 * np.sqrt(b * (1 - b) / self.replicates)

    @property
    def ok(self) -> bool | None:
        if not self.premise_satisfied:
            return None
        return all(np.all(f <= self.allowances) for f in self.late_fractions.values())

    @property
    def status(self) -> str:
        if not self.premise_satisfied:
            return "premise not satisfied"
        return "late occurrences within bound" if self.ok else "late occurrences exceed bound"


def borel_cantelli_probe(event_rule: Callable[[int], object], spec: SequenceSpec,
                         strategies: Sequence[SelectionStrategy] = DEFAULT_STRATEGIES,
                         replicates: int = 1000, horizon: int = 10_000, seed: int = 0,
                         n0_grid: Sequence[int] | None = None, eps: float = 1e-3,
                         window: int = 100) -> BorelCantelliReport:
    """Empirical late-occurrence frequencies of events ``A_n = event_rule(n)`` on ``X_n``.

    ``event_rule(n)`` returns an :class:`~sublinear.capacity.Event` (or
    membership vector) over the outcomes of marginal ``n`` (1-based). Under
    the premise ``sum V(A_n) < infinity`` (Cauchy surrogate) the fraction of
    replicates with an occurrence after ``n0`` must stay below the union
    bound, up to sampling error. Without the premise nothing is asserted.
    """
    if n0_grid is None:
        n0_grid = tuple(g for g in (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000)
                        if g < horizon)
    events = []
    caps = np.empty(horizon)
    for k in range(horizon):
        pair = CapacityPair(spec[k].family)
        A = event_rule(k + 1)
        mask = pair._membership(A)
        events.append(mask)
        caps[k] = pair.upper(mask)
    report = BorelCantelliReport(convergence_verdict(np.cumsum(caps), eps, window), caps,
                                 tuple(int(g) for g in n0_grid), replicates)
    for strategy in strategies:
        outcomes, _ = sample_paths(spec, strategy, replicates, horizon, seed, events=events)
        hits = np.zeros((replicates, horizon), dtype=bool)
        for k in range(horizon):
            hits[:, k] = events[k][outcomes[:, k]]
        # last[r] = 1-based index of the last occurrence (0 if none)
        any_hit = hits.any(axis=1)
        last = np.where(any_hit, horizon - np.argmax(hits[:, ::-1], axis=1), 0)
        report.late_fractions[strategy.name] = np.array(
            [np.mean(last > n0) for n0 in report.n0_grid])
    return report


@dataclass
class SllnConfig:
    replicates: int = 100
    horizon: int = 100_000
    checkpoints: tuple[int, ...] = DEFAULT_CHECKPOINTS
    threshold: float = 0.7
    ratio_bound: float = 0.5
    seed: int = 0
    strategies: tuple[SelectionStrategy, ...] = DEFAULT_STRATEGIES
    a_grid: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


@dataclass
class MarcinkiewiczReport:
    verdict: str
    hypotheses: dict
    report: SllnReport
    final_max: float
    scaling_ratios: dict[str, float]
    note: str = ""

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent with theorem"


def marcinkiewicz_check(spec: SequenceSpec, p: float, mu: float = 0.0,
                        config: SllnConfig | None = None) -> MarcinkiewiczReport:
    """Verify the hypotheses, simulate, and compare against the configured thresholds.

    For ``0 < p < 1`` the statistic is uncentered (``mu`` is ignored). For
    ``1 < p < 2`` the upper and lower means must equal ``mu`` and the tail
    expectation ``E^[(|X_1| - a)^+]`` must decrease to zero along ``a_grid``.
    The verdict is "consistent with theorem" when the largest statistic at the
    final checkpoint is below ``threshold`` and every strategy's median
    first-to-last checkpoint ratio is below ``ratio_bound``.
    """
    config = config or SllnConfig()
    if not 0 < p < 2:
        raise ValueError(f"p must lie in (0, 2), got {p}")
    if not spec[:config.horizon].identically_distributed:
        raise ValueError("the sequence must be identically distributed")
    first = spec[0]
    hypotheses = {"choquet_moment": choquet_moment(first.family, first.values, p)}
    if not np.isfinite(hypotheses["choquet_moment"]):
        raise ValueError("Choquet moment is not finite")
    if p < 1:
        mu = 0.0
    elif p > 1:
        _check_moments(spec, 1, mu)
        tails = [tail_expectation(first.family, first.values, a) for a in config.a_grid]
        hypotheses["tail_expectations"] = dict(zip(config.a_grid, tails))
        if any(b > a + TOL for a, b in zip(tails, tails[1:])):
            raise ValueError("tail expectation is not nonincreasing in a")
        if tails[-1] > TOL:
            raise ValueError(f"tail expectation at a={config.a_grid[-1]} is {tails[-1]:g}, not 0")
        hypotheses["upper_mean"] = upper_expectation(first.family, first.values)
        hypotheses["lower_mean"] = lower_expectation(first.family, first.values)

    report = simulate_trajectories(spec, config.strategies, config.replicates, config.horizon,
                                   p, mu, config.seed, config.checkpoints)
    final = report.final_max()
    ratios = {name: report.scaling_ratio(name) for name in report.values}
    ok = final < config.threshold and all(r < config.ratio_bound for r in ratios.values())
    return MarcinkiewiczReport("consistent with theorem" if ok else "inconsistent with theorem",
                               hypotheses, report, final, ratios, report.note)
