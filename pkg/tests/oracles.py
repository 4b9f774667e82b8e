"""Independent reference implementations used as test oracles.

Everything here is written in plain Python loops (no numpy vectorization and
no calls into the package's algorithms) so that agreement with the library
is evidence rather than tautology.
"""

from __future__ import annotations

import itertools
import math


def envelope(rows, x):
    """max_P sum_w P(w) x(w), by explicit loops."""
    return max(math.fsum(p * v for p, v in zip(row, x)) for row in rows)


def classical_mean(probs, x):
    return math.fsum(p * v for p, v in zip(probs, x))


def recursive_joint(marginals, phi):
    """E^[phi(X_1..X_n)] by recursion on the definition of independence.

    ``marginals`` is a list of ``(rows, values)``. The expectation of the last
    variable is taken innermost: for a fixed prefix ``x_1..x_{k-1}`` the inner
    value is ``max_P sum_w P(w) * inner(x_1..x_{k-1}, X_k(w))``.
    """
    n = len(marginals)

    def inner(prefix):
        k = len(prefix)
        if k == n:
            return float(phi(*prefix))
        rows, values = marginals[k]
        vals = [inner(prefix + (v,)) for v in values]
        return envelope(rows, vals)

    return inner(())


def reversed_joint(marginals, phi):
    """Same recursion with the FIRST variable innermost (the wrong order)."""
    rev = list(reversed(marginals))
    return recursive_joint(rev, lambda *ys: phi(*reversed(ys)))


def path_functional_joint(marginals, terminal):
    """E^[terminal(path)] where the path is S_0 = 0, S_1, ..., S_n."""
    def phi(*xs):
        path = [0.0]
        for x in xs:
            path.append(path[-1] + x)
        return terminal(path)
    return recursive_joint(marginals, phi)


def max_suffix_drawdown(p):
    return lambda path: max(path[-1] - s for s in path) ** p


def max_abs_partial_sum(p):
    return lambda path: max(abs(s) for s in path) ** p


def brute_product_max(marginals, phi):
    """max over product measures (one member per marginal) of the linear expectation.

    Always <= the nested upper expectation; useful as a lower bound.
    """
    best = -math.inf
    for choice in itertools.product(*[range(len(rows)) for rows, _ in marginals]):
        total = 0.0
        for outcome in itertools.product(*[range(len(values)) for _, values in marginals]):
            w = 1.0
            xs = []
            for (rows, values), j, i in zip(marginals, choice, outcome):
                w *= rows[j][i]
                xs.append(values[i])
            total += w * phi(*xs)
        best = max(best, total)
    return best


def cauchy_window_verdict(sums, eps, window, guard=1e12):
    """Reference copy of the Cauchy-window rule, written from its definition."""
    tail = sums[-window:]
    if max(tail) - min(tail) < eps:
        return "converged"
    incs = [abs(sums[i] - sums[i - 1]) for i in range(len(sums) - window, len(sums))]
    if min(incs) >= 10 * eps or max(abs(s) for s in sums) > guard:
        return "not-converged"
    return "inconclusive"


def classical_three_series(probs, x, scales, c, eps, window):
    """Kolmogorov's three-series criterion for independent X_n = scales[n] * X under one measure.

    Conditions: sum P(|X_n| > c), sum E[X_n^c] and sum Var(X_n^c) all converge,
    where X^c is X clamped to [-c, c].
    """
    tail, mean, var = [], [], []
    t = m = v = 0.0
    for a in scales:
        xs = [a * xi for xi in x]
        t += math.fsum(p for p, xi in zip(probs, xs) if abs(xi) > c)
        clamped = [min(max(xi, -c), c) for xi in xs]
        mu = classical_mean(probs, clamped)
        m += mu
        v += math.fsum(p * (xi - mu) ** 2 for p, xi in zip(probs, clamped))
        tail.append(t)
        mean.append(m)
        var.append(v)
    verdicts = {name: cauchy_window_verdict(s, eps, window)
                for name, s in (("tail", tail), ("mean", mean), ("variance", var))}
    satisfied = all(v == "converged" for v in verdicts.values())
    return satisfied, verdicts


def layer_cake(capacity, x):
    """Choquet integral by integrating t -> capacity(X >= t) piecewise, from the definition.

    ``capacity`` maps a tuple of booleans (membership) to a real.
    """
    full = capacity(tuple(True for _ in x))
    total = 0.0
    # positive part: int_0^inf V(X >= t) dt ; negative part: int_-inf^0 [V(X >= t) - 1] dt
    points = sorted(set(x) | {0.0})
    for lo, hi in zip(points[:-1], points[1:]):
        # on (lo, hi] the set {X >= t} equals {X >= hi}
        cap = capacity(tuple(v >= hi for v in x))
        if hi <= 0:
            total += (hi - lo) * (cap - full)
        else:
            total += (hi - lo) * cap
    return total
