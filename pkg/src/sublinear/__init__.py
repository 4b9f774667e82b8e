"""Sub-linear expectations on finite outcome spaces.

A sub-linear expectation is represented as the upper envelope of a finite
family of probability measures. On top of that the package provides
capacities and Choquet integrals, Peng-independent sequences with exact
nested expectations, moment inequalities, convergence checkers for random
series, and strong-law simulations under measure-selection strategies.
"""

__version__ = "0.1.0"

from .capacity import CapacityPair, ChoquetValue, Event, choquet_integral, lower_capacity, upper_capacity
from .core import (DiscreteMeasure, DimensionError, MeasureFamily, RandomVariable, TestFunction,
                   check_axioms, lower_expectation, truncate, upper_expectation)
from .independence import (Marginal, PartialSumFunctional, SequenceSpec, StateSpaceError,
                           functional_upper_expectation, joint_upper_expectation)
from .series import convergence_verdict, kronecker_check, moment_series_check, three_series_check
from .slln import SelectionStrategy, SllnConfig, marcinkiewicz_check, simulate_trajectories

__all__ = [
    "CapacityPair", "ChoquetValue", "Event", "choquet_integral", "lower_capacity", "upper_capacity",
    "DiscreteMeasure", "DimensionError", "MeasureFamily", "RandomVariable", "TestFunction",
    "check_axioms", "lower_expectation", "truncate", "upper_expectation",
    "Marginal", "PartialSumFunctional", "SequenceSpec", "StateSpaceError",
    "functional_upper_expectation", "joint_upper_expectation",
    "convergence_verdict", "kronecker_check", "moment_series_check", "three_series_check",
    "SelectionStrategy", "SllnConfig", "marcinkiewicz_check", "simulate_trajectories",
]
