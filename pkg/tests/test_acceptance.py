"""One test per acceptance criterion; each prints a PASS/FAIL line with its metrics."""

import pytest

from ionflux import checks

CRITERIA = [
    ("1 zeroth-order exactness", checks.check_zeroth_order),
    ("2 first-order oracle", checks.check_first_order_oracle),
    ("3 second-order oracle", checks.check_second_order_oracle),
    ("4 convergence order", checks.check_convergence_order),
    ("5 algebraic identities", checks.check_identities),
    ("6 sign table and critical-voltage roots", checks.check_sign_table),
    ("7 figure grid structure", checks.check_figure_grids),
    ("8 mirror symmetry", checks.check_mirror_symmetry),
]


@pytest.mark.parametrize("label,check", CRITERIA, ids=[c[0].split()[0] for c in CRITERIA])
def test_criterion(label, check):
    result = check()
    print(f"\n[criterion {label}] {result.line()}")
    assert result.passed, result.detail
