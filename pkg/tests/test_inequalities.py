import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sublinear.core import MeasureFamily, upper_expectation
from sublinear.independence import Marginal, SequenceSpec
from sublinear.inequalities import (DEFAULT_PROB_GRID, DEFAULT_SUPPORTS, fuzz_chebyshev, fuzz_cr,
                                    fuzz_holder, fuzz_jensen, fuzz_positive_part, rosenthal_sweep,
                                    two_point_marginals, verify_chebyshev, verify_cr,
                                    verify_holder, verify_jensen, verify_positive_part,
                                    verify_rosenthal)

from .conftest import COIN_X, MEAN_ZERO_X, family_and_variables, families
from .oracles import max_abs_partial_sum, max_suffix_drawdown, path_functional_joint


class TestHolder:
    def test_constants_give_equality(self, coin):
        r = verify_holder(coin, [1.0, 1.0], [1.0, 1.0], 2)
        assert r.holds and r.lhs == pytest.approx(1.0) and r.rhs == pytest.approx(1.0)

    def test_mean_zero_equality(self, mean_zero):
        r = verify_holder(mean_zero, MEAN_ZERO_X, MEAN_ZERO_X, 2)
        assert r.holds and r.lhs == pytest.approx(1.0) and r.rhs == pytest.approx(1.0)

    def test_coin_with_constant(self, coin):
        r = verify_holder(coin, COIN_X, [2.0, 2.0], 2)
        assert r.holds and r.lhs == pytest.approx(2.0) and r.rhs == pytest.approx(2.0)

    def test_rejects_small_exponent(self, coin):
        with pytest.raises(ValueError):
            verify_holder(coin, COIN_X, COIN_X, 1.0)

    @given(family_and_variables(count=2), st.floats(1.05, 6))
    def test_property(self, case, p):
        fam, x, y = case
        assert verify_holder(fam, x, y, p).holds


class TestChebyshev:
    def test_coin_square(self, coin):
        r = verify_chebyshev(coin, COIN_X, np.square, 1.0, form="abs")
        assert r.holds and r.lhs == pytest.approx(1.0) and r.rhs == pytest.approx(1.0)

    def test_fair_exponential(self, fair):
        r = verify_chebyshev(fair, COIN_X, np.exp, 1.0)
        assert r.lhs == pytest.approx(0.5)
        assert r.rhs == pytest.approx((math.e + 1 / math.e) / (2 * math.e), abs=1e-12)
        assert r.holds

    def test_threshold_above_support(self, coin):
        r = verify_chebyshev(coin, COIN_X, np.exp, 5.0)
        assert r.lhs == 0.0 and r.rhs > 0 and r.holds

    def test_shape_checks(self, coin):
        with pytest.raises(ValueError, match="positive"):
            verify_chebyshev(coin, COIN_X, np.square, 0.0, form="upper")
        with pytest.raises(ValueError, match="non-negative"):
            verify_chebyshev(coin, COIN_X, lambda t: t, 0.5)
        with pytest.raises(ValueError, match="nondecreasing"):
            verify_chebyshev(coin, COIN_X, lambda t: np.exp(-t), 0.5)
        with pytest.raises(ValueError, match="even"):
            verify_chebyshev(coin, COIN_X, np.exp, 0.5, form="abs")
        with pytest.raises(ValueError):
            verify_chebyshev(coin, COIN_X, np.exp, 0.5, form="sideways")

    @given(family_and_variables(), st.floats(-5, 5), st.floats(0.1, 3))
    def test_property(self, case, x, k):
        fam, values = case
        assert verify_chebyshev(fam, values, lambda t: np.exp(k * t), x).holds
        if x > 0:
            assert verify_chebyshev(fam, values, lambda t: 1 + np.abs(t) ** k, x, form="abs").holds


class TestJensen:
    def test_identity_equality(self, coin):
        r = verify_jensen(coin, COIN_X, lambda t: t)
        assert r.holds and r.lhs == pytest.approx(r.rhs)

    def test_mean_zero_square(self, mean_zero):
        r = verify_jensen(mean_zero, MEAN_ZERO_X, np.square)
        assert r.rhs == pytest.approx(1.0) and r.lhs == pytest.approx(0.0) and r.holds

    def test_coin_abs(self, coin):
        r = verify_jensen(coin, COIN_X, np.abs)
        assert r.rhs == pytest.approx(1.0) and r.lhs == pytest.approx(0.4) and r.holds

    def test_rejects_concave(self, coin):
        with pytest.raises(ValueError, match="convex"):
            verify_jensen(coin, COIN_X, lambda t: -t * t)

    @given(family_and_variables(), st.sampled_from(["square", "exp", "hinge", "abs"]))
    def test_property(self, case, which):
        fam, x = case
        f = {"square": np.square, "exp": lambda t: np.exp(t / 4), "hinge": lambda t: np.maximum(t - 1, 0),
             "abs": np.abs}[which]
        assert verify_jensen(fam, x, f).holds


class TestScalarInequalities:
    def test_cr_examples(self):
        assert verify_cr(1.0, 1.0, 2.0)  # 4 <= 4
        assert all(verify_cr(1.0, 0.0, p) for p in (1.0, 1.3, 2.0))
        assert verify_cr(0.7, -0.3, 1.5)

    def test_cr_range(self):
        with pytest.raises(ValueError):
            verify_cr(1.0, 1.0, 2.5)

    def test_positive_part_examples(self):
        assert verify_positive_part(1.0, -2.0)
        assert verify_positive_part(-1.0, 0.0)

    @given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(1, 2))
    def test_cr_property(self, x, y, p):
        assert verify_cr(x, y, p)

    @given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
    def test_positive_part_property(self, x, y):
        assert verify_positive_part(x, y)

    def test_vectorized(self):
        x = np.linspace(-3, 3, 7)
        assert verify_cr(x, x[::-1], 1.5).all()
        assert verify_positive_part(x, -x).all()


class TestFuzzers:
    @pytest.mark.parametrize("fuzz", [fuzz_holder, fuzz_chebyshev, fuzz_jensen, fuzz_cr,
                                      fuzz_positive_part])
    def test_small_runs_are_clean(self, fuzz):
        report = fuzz(20_000, seed=3)
        assert report.instances == 20_000
        assert report.ok, report.witness

    def test_deterministic(self):
        a, b = fuzz_holder(5000, seed=9), fuzz_holder(5000, seed=9)
        assert a.worst_excess == b.worst_excess and a.witness == b.witness

    def test_detects_a_false_inequality(self):
        from sublinear.inequalities import FuzzReport
        report = FuzzReport("fake")
        lhs = np.array([1.0, 2.0])
        report.absorb(lhs, np.array([1.0, 1.0]), 1e-12, lambda i: {"i": i})
        assert report.violations == 1 and report.witness == {"i": 1}


def _mean_zero_family(a, b, ts):
    # measures on values (-a, 0, b) with mean zero: weights (b t, (a + b)(1 - t), a t) / (a + b)
    rows = [[b * t / (a + b), 1 - t, a * t / (a + b)] for t in ts]
    return MeasureFamily.from_probabilities(rows), np.array([-a, 0.0, b])


@st.composite
def nonpositive_mean_specs(draw, max_len=3):
    marginals = []
    for _ in range(draw(st.integers(1, max_len))):
        fam = draw(families(max_outcomes=4, max_measures=3))
        x = np.array(draw(st.lists(st.sampled_from([-1.0, -0.5, 0.0, 0.5, 1.0]),
                                   min_size=fam.n_outcomes, max_size=fam.n_outcomes)))
        x = x - max(upper_expectation(fam, x), 0.0)  # upper mean <= 0
        marginals.append(Marginal(fam, x))
    return SequenceSpec(tuple(marginals))


@st.composite
def zero_mean_specs(draw, max_len=3):
    marginals = []
    for _ in range(draw(st.integers(1, max_len))):
        a = draw(st.sampled_from([0.5, 1.0, 2.0]))
        b = draw(st.sampled_from([0.5, 1.0, 1.5]))
        ts = draw(st.lists(st.floats(0, 1), min_size=1, max_size=3))
        marginals.append(Marginal(*_mean_zero_family(a, b, ts)))
    return SequenceSpec(tuple(marginals))


class TestRosenthal:
    def test_single_step(self, mean_zero):
        spec = SequenceSpec.iid(mean_zero, MEAN_ZERO_X, 1)
        r = verify_rosenthal(spec, 1.0)
        assert r.lhs == pytest.approx(0.5) and r.rhs == pytest.approx(2.0) and r.holds
        assert r.slack == pytest.approx(1.5)

    def test_zero_sequence(self):
        fam = MeasureFamily.singleton([1.0])
        spec = SequenceSpec.iid(fam, [0.0], 3)
        r = verify_rosenthal(spec, 1.5)
        assert r.lhs == 0.0 and r.rhs == 0.0 and r.holds

    def test_precondition_names_the_variable(self, mean_zero, coin):
        spec = SequenceSpec((Marginal(mean_zero, MEAN_ZERO_X), Marginal(coin, COIN_X)))
        with pytest.raises(ValueError, match="X_2"):
            verify_rosenthal(spec, 1.5)
        with pytest.raises(ValueError, match="X_2"):
            verify_rosenthal(spec, 1.5, form="maximal")

    def test_exponent_range(self, mean_zero):
        with pytest.raises(ValueError):
            verify_rosenthal(SequenceSpec.iid(mean_zero, MEAN_ZERO_X, 1), 2.5)

    @given(nonpositive_mean_specs(), st.sampled_from([1.0, 1.25, 1.5, 1.75, 2.0]))
    def test_drawdown_property(self, spec, p):
        r = verify_rosenthal(spec, p)
        assert r.holds
        oracle = [(m.family.matrix.tolist(), m.values.tolist()) for m in spec]
        assert r.lhs == pytest.approx(path_functional_joint(oracle, max_suffix_drawdown(p)), abs=1e-10)

    @given(zero_mean_specs(), st.sampled_from([1.0, 1.25, 1.5, 1.75, 2.0]))
    def test_maximal_property(self, spec, p):
        r = verify_rosenthal(spec, p, form="maximal")
        assert r.holds
        oracle = [(m.family.matrix.tolist(), m.values.tolist()) for m in spec]
        assert r.lhs == pytest.approx(path_functional_joint(oracle, max_abs_partial_sum(p)), abs=1e-10)


class TestSweep:
    def test_marginal_counts(self):
        marg = two_point_marginals(DEFAULT_SUPPORTS, DEFAULT_PROB_GRID)
        counts = {k: len(v) for k, v in marg.items()}
        # both measures must give mean <= 0 and use distinct probabilities
        assert counts == {(-1.0, -0.5): 36, (-1.0, 0.5): 15, (-1.0, 1.0): 10,
                          (-0.5, 0.5): 10, (-0.5, 1.0): 3}

    def test_marginals_have_nonpositive_means(self):
        for (a, b), probs in two_point_marginals().items():
            means = probs @ np.array([a, b])
            assert np.all(means <= 1e-12)
            assert np.all(probs[:, 0, 0] != probs[:, 1, 0])

    def test_short_sweep(self):
        report = rosenthal_sweep(max_length=2)
        assert report.ok
        assert report.max_enumeration_gap <= 1e-10
        assert report.cases == 3 * report.sequences
        assert set(report.per_exponent) == {1.0, 1.5, 2.0}

    def test_parallel_matches_serial(self):
        serial = rosenthal_sweep(max_length=2)
        parallel = rosenthal_sweep(max_length=2, workers=2)
        assert (serial.cases, serial.min_slack_ratio, serial.tightest) == \
               (parallel.cases, parallel.min_slack_ratio, parallel.tightest)
