import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from sublinear.core import TOL, MeasureFamily, TestFunction, upper_expectation
from sublinear.independence import (Marginal, PartialSumFunctional, SequenceSpec,
                                    StateSpaceError, check_identical_distribution,
                                    default_battery, functional_upper_expectation,
                                    joint_upper_expectation)

from .conftest import COIN_ROWS, COIN_X, MEAN_ZERO_ROWS, MEAN_ZERO_X, families
from .oracles import (brute_product_max, max_abs_partial_sum, max_suffix_drawdown,
                      path_functional_joint, recursive_joint, reversed_joint)


def _as_oracle(spec):
    return [(m.family.matrix.tolist(), m.values.tolist()) for m in spec]


@st.composite
def specs(draw, max_len=4, max_outcomes=4, max_measures=3):
    n = draw(st.integers(1, max_len))
    marginals = []
    for _ in range(n):
        fam = draw(families(max_outcomes=max_outcomes, max_measures=max_measures))
        # small integer-ish supports so running sums collide and states merge
        x = draw(hnp.arrays(float, fam.n_outcomes,
                            elements=st.sampled_from([-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5])))
        marginals.append(Marginal(fam, x))
    return SequenceSpec(tuple(marginals))


class TestSequenceSpec:
    def test_iid_shares_one_marginal(self, coin):
        spec = SequenceSpec.iid(coin, COIN_X, 5)
        assert len(spec) == 5 and spec.identically_distributed
        assert spec.grid_size == 32
        assert all(m is spec[0] for m in spec)

    def test_scaled(self, coin):
        spec = SequenceSpec.scaled(coin, COIN_X, [1.0, 0.5])
        np.testing.assert_array_equal(spec[1].values, [-0.5, 0.5])
        assert not spec.identically_distributed

    def test_slice_and_truncate(self, coin):
        spec = SequenceSpec.scaled(coin, COIN_X, [3.0, 2.0, 1.0])
        assert len(spec[:2]) == 2
        np.testing.assert_array_equal(spec.truncated(1.5)[0].values, [-1.5, 1.5])

    def test_needs_a_marginal(self):
        with pytest.raises(ValueError):
            SequenceSpec(())

    def test_marginal_dimension(self, coin):
        with pytest.raises(ValueError):
            Marginal(coin, [1.0, 2.0, 3.0])


class TestJointUpperExpectation:
    def test_coin_sum(self, coin):
        spec = SequenceSpec.iid(coin, COIN_X, 2)
        assert joint_upper_expectation(spec, lambda x, y: x + y) == pytest.approx(0.8, abs=TOL)

    def test_coin_product(self, coin):
        spec = SequenceSpec.iid(coin, COIN_X, 2)
        value = joint_upper_expectation(spec, lambda x, y: x * y)
        assert value == pytest.approx(0.4, abs=TOL)
        assert value == pytest.approx(recursive_joint(_as_oracle(spec), lambda x, y: x * y), abs=TOL)
        # under a product measure E[XY] = E[X] E[Y] = +-0.16
        assert brute_product_max(_as_oracle(spec), lambda x, y: x * y) == pytest.approx(0.16)

    def test_constant(self, coin, mean_zero):
        spec = SequenceSpec((Marginal(coin, COIN_X), Marginal(mean_zero, MEAN_ZERO_X)))
        assert joint_upper_expectation(spec, lambda x, y: 3.0) == pytest.approx(3.0, abs=TOL)

    def test_nesting_order_witness(self, coin, mean_zero):
        # X1 from the mean-zero family, X2 from the coin family, phi = x^2 * y.
        # Last variable innermost: E^[X1^2 E^[y]] = 0.4.
        # First variable innermost would give E^[max(Y, 0)] = 0.7.
        spec = SequenceSpec((Marginal(mean_zero, MEAN_ZERO_X), Marginal(coin, COIN_X)))
        phi = lambda x, y: x**2 * y
        assert joint_upper_expectation(spec, phi) == pytest.approx(0.4, abs=TOL)
        assert recursive_joint(_as_oracle(spec), phi) == pytest.approx(0.4, abs=TOL)
        assert reversed_joint(_as_oracle(spec), phi) == pytest.approx(0.7, abs=TOL)

    def test_arity_mismatch(self, coin):
        spec = SequenceSpec.iid(coin, COIN_X, 2)
        with pytest.raises(ValueError, match="arity"):
            joint_upper_expectation(spec, TestFunction(lambda x: x, arity=1))

    def test_state_guard(self, coin):
        spec = SequenceSpec.iid(coin, COIN_X, 30)
        with pytest.raises(StateSpaceError) as info:
            joint_upper_expectation(spec, lambda *xs: 0.0)
        assert info.value.size == 2**30

    @given(specs(), st.sampled_from(["poly", "sin", "max", "prod"]))
    def test_matches_recursive_oracle(self, spec, which):
        fns = {
            "poly": lambda *xs: sum((k + 1) * x**2 - x for k, x in enumerate(xs)),
            "sin": lambda *xs: np.sin(sum(xs)) * np.cos(xs[0]),
            "max": lambda *xs: np.maximum.reduce(np.broadcast_arrays(*xs)) if len(xs) > 1 else xs[0],
            "prod": lambda *xs: np.prod(np.broadcast_arrays(*xs), axis=0),
        }
        phi = fns[which]
        expected = recursive_joint(_as_oracle(spec), lambda *xs: phi(*map(np.float64, xs)))
        assert joint_upper_expectation(spec, phi) == pytest.approx(expected, abs=1e-10)

    @given(specs(max_len=3))
    def test_dominates_product_measures(self, spec):
        phi = lambda *xs: np.abs(sum(xs)) - 0.3 * xs[-1]
        oracle = _as_oracle(spec)
        assert joint_upper_expectation(spec, phi) >= brute_product_max(
            oracle, lambda *xs: phi(*map(np.float64, xs))) - 1e-10


class TestFunctionalDP:
    def test_drawdown_single_step(self, mean_zero):
        spec = SequenceSpec.iid(mean_zero, MEAN_ZERO_X, 1)
        f = PartialSumFunctional("max-suffix-drawdown", 1.0)
        assert functional_upper_expectation(spec, f) == pytest.approx(0.5, abs=TOL)

    def test_zero_functional(self, mean_zero):
        spec = SequenceSpec.iid(mean_zero, MEAN_ZERO_X, 3)
        f = PartialSumFunctional("custom", terminal=lambda s, e: 0.0 * s)
        assert functional_upper_expectation(spec, f) == 0.0

    def test_two_step_max_abs_square(self, mean_zero):
        spec = SequenceSpec.iid(mean_zero, MEAN_ZERO_X, 2)
        f = PartialSumFunctional("max-abs-partial-sum", 2.0)
        value = functional_upper_expectation(spec, f)
        expected = path_functional_joint(_as_oracle(spec), max_abs_partial_sum(2.0))
        assert value == pytest.approx(expected, abs=1e-12)
        assert value == pytest.approx(2.5, abs=1e-12)
        assert value <= 4.0

    def test_custom_tracker_validation(self):
        with pytest.raises(ValueError):
            PartialSumFunctional("custom")
        with pytest.raises(ValueError):
            PartialSumFunctional("custom", terminal=lambda s, e: s, tracker="median")
        with pytest.raises(ValueError):
            PartialSumFunctional("sideways")

    def test_on_paths(self):
        f = PartialSumFunctional("max-suffix-drawdown", 1.0)
        # path 0, 1, -1, 0: S_n - min S_k = 0 - (-1) = 1
        assert f.on_paths([1.0, -2.0, 1.0]) == 1.0
        g = PartialSumFunctional("max-abs-partial-sum", 1.0)
        assert g.on_paths([1.0, -2.0, 1.0]) == 1.0

    def test_state_guard(self):
        # distinct running sums are multisets of the support: C(12 + 7, 7) > 10^4 in total
        spec = SequenceSpec.iid(MeasureFamily.from_probabilities(
            [np.full(7, 1 / 7)]), np.array([0, 1, 10, 100, 1000, 1e4, 1e5]), 12)
        with pytest.raises(StateSpaceError):
            functional_upper_expectation(spec, PartialSumFunctional("final-sum"), max_states=10_000)

    @given(specs(), st.sampled_from(["final-sum", "max-suffix-drawdown", "max-abs-partial-sum"]),
           st.sampled_from([1.0, 1.5, 2.0]))
    def test_matches_enumeration(self, spec, kind, p):
        f = PartialSumFunctional(kind, p)
        dp = functional_upper_expectation(spec, f)
        enum = joint_upper_expectation(spec, f.as_test_function(len(spec)))
        terminal = {"final-sum": lambda path: abs(path[-1]) ** p,
                    "max-suffix-drawdown": max_suffix_drawdown(p),
                    "max-abs-partial-sum": max_abs_partial_sum(p)}[kind]
        oracle = path_functional_joint(_as_oracle(spec), terminal)
        assert dp == pytest.approx(enum, abs=1e-10)
        assert dp == pytest.approx(oracle, abs=1e-10)

    @given(specs(), st.sampled_from([1.0, 2.0]))
    def test_monotone_in_functional(self, spec, p):
        # |S_n|^p <= max_k |S_k|^p pathwise
        small = functional_upper_expectation(spec, PartialSumFunctional("final-sum", p))
        large = functional_upper_expectation(spec, PartialSumFunctional("max-abs-partial-sum", p))
        assert small <= large + 1e-12

    @given(specs(max_len=3))
    def test_drawdown_is_non_negative(self, spec):
        f = PartialSumFunctional("max-suffix-drawdown", 1.0)
        assert functional_upper_expectation(spec, f) >= 0.0


class TestIdenticalDistribution:
    def test_reflexive(self, coin):
        report = check_identical_distribution(coin, COIN_X, coin, COIN_X)
        assert report.max_discrepancy == 0.0 and report.identical

    def test_relabeled_outcomes(self, coin):
        flipped = MeasureFamily.from_probabilities([row[::-1] for row in COIN_ROWS])
        report = check_identical_distribution(coin, COIN_X, flipped, COIN_X[::-1])
        assert report.max_discrepancy == pytest.approx(0.0, abs=1e-12)
        assert report.identical

    def test_coin_versus_fair(self, coin, fair):
        report = check_identical_distribution(coin, COIN_X, fair, COIN_X)
        assert not report.identical
        assert report.discrepancies["x^1"] == pytest.approx(0.4, abs=TOL)

    def test_battery_contents(self):
        names = [phi.name for phi in default_battery()]
        assert {"x^1", "x^4", "-x^2", "|x|", "clamp1.0"} <= set(names)

    def test_empty_battery(self, coin):
        with pytest.raises(ValueError):
            check_identical_distribution(coin, COIN_X, coin, COIN_X, battery=[])

    @given(families(max_outcomes=5), st.data())
    def test_permutation_invariance(self, fam, data):
        n = fam.n_outcomes
        x = data.draw(hnp.arrays(float, n, elements=st.floats(-3, 3)))
        perm = np.array(data.draw(st.permutations(range(n))))
        permuted = MeasureFamily.from_probabilities(fam.matrix[:, perm])
        assert check_identical_distribution(fam, x, permuted, x[perm]).identical
        assert upper_expectation(fam, x) == pytest.approx(upper_expectation(permuted, x[perm]), abs=1e-12)
