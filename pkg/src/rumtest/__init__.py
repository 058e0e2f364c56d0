"""Testing random utility models on cross-sectional budget data.

Typical use::

    from rumtest import Dataset, TestConfig, run_test
    report = run_test(Dataset(prices, bundles=bundles), TestConfig(seed=1))
    print(report.J_N, report.p_value)
"""

from rumtest.choice_types import (
    enumerate_rational_types,
    induced_relations,
    is_rational,
    sample_rational_types,
    to_matrix,
    to_vector,
)
from rumtest.colgen import ColgenConfig, ColumnPool, bounded_project, project
from rumtest.errors import (
    ContractViolation,
    DegenerateBudgets,
    Exhausted,
    InfeasibleMargin,
    InputError,
    IterationLimit,
    NumericalFailure,
    OnBoundary,
    RumTestError,
    TimedOut,
    TooLarge,
    UnknownPatch,
)
from rumtest.geometry import (
    Dataset,
    Frequencies,
    PatchStructure,
    empirical_frequencies,
    enumerate_patches,
    frequencies_from_counts,
)
from rumtest.master import RestrictedMaster, solve_restricted, solve_restricted_shifted
from rumtest.pricing import PricingConfig, best_insertion, exact_pricing, price
from rumtest.pipeline import TestConfig, TestReport, run_test, run_test_counts

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
