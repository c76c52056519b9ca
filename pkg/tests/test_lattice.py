import math

import numpy as np
import pytest

from trunclab import lattice, oracle
from trunclab.lattice import (
    EvaluationError,
    LatticeFormatError,
    LatticeRule,
    declared_node_range,
    draw_shift,
    estimate_truncation_error,
    estimate_truncation_errors,
    generate_node,
    generate_nodes,
    lattice_rule,
    multishift_truncation_estimates,
    parse_generating_vector,
    qmc_mean,
    scalar_distance,
    with_seed,
)


def _unshifted(n, z):
    return LatticeRule(n=n, z=np.asarray(z, dtype=np.int64), shift=np.zeros(len(z)), seed=0)


def test_parse_single_column():
    assert parse_generating_vector("1\n182667\n").tolist() == [1, 182667]


def test_parse_two_column():
    assert parse_generating_vector("1 1\n2 182667\n").tolist() == [1, 182667]


def test_parse_empty_rejected():
    with pytest.raises(LatticeFormatError):
        parse_generating_vector("")
    with pytest.raises(LatticeFormatError):
        parse_generating_vector("\n  \n")


def test_parse_malformed_line_number_reported():
    with pytest.raises(LatticeFormatError, match="line 2"):
        parse_generating_vector("1\nx\n")


def test_parse_nonmonotone_index_rejected():
    with pytest.raises(LatticeFormatError, match="increase strictly"):
        parse_generating_vector("1 1\n3 5\n2 7\n")


def test_parse_mixed_formats_rejected():
    with pytest.raises(LatticeFormatError):
        parse_generating_vector("1\n2 5\n")


def test_builtin_vector_loads(builtin_z):
    assert builtin_z.size == 3600
    assert builtin_z[0] == 1
    assert np.all(builtin_z >= 1)


def test_declared_node_range():
    assert declared_node_range("lattice-rcbc-1024-1048576.3600.txt") == (1024, 1048576)
    assert declared_node_range("lattice-39101-1024-1048576.3600") == (1024, 1048576)
    assert declared_node_range("myvector.txt") is None


def test_node_zero_index_is_corner():
    rule = _unshifted(4, [1, 3])
    assert generate_node(rule, 0, 2).tolist() == [-0.5, -0.5]


def test_node_arithmetic_example():
    rule = _unshifted(4, [1, 3])
    assert generate_node(rule, 1, 2).tolist() == [-0.25, 0.25]


def test_node_shift_symmetry():
    base = _unshifted(8, [1, 5, 3])
    shifted = LatticeRule(n=8, z=base.z, shift=np.full(3, 0.5), seed=0)
    for i in (0, 1, 5, 7):
        a = generate_node(base, i, 3) + 0.5  # back to [0,1)
        b = generate_node(shifted, i, 3) + 0.5
        assert np.allclose((a + 0.5) % 1.0, b, rtol=0, atol=1e-15)


def test_node_periodicity(small_rule):
    for i in (0, 1, 17, 1023):
        a = generate_node(small_rule, i, 16)
        b = generate_node(small_rule, i + small_rule.n, 16)
        assert np.array_equal(a, b)


def test_generate_nodes_matches_single(small_rule):
    block = generate_nodes(small_rule, 5, 21, 12)
    for k, i in enumerate(range(5, 21)):
        assert np.array_equal(block[k], generate_node(small_rule, i, 12))


def test_node_dimension_cap(small_rule):
    with pytest.raises(ValueError):
        generate_node(small_rule, 0, small_rule.z.size + 1)


def test_exact_integer_reduction(rng):
    # against a plain big-integer reference, components must agree exactly
    n = 2 ** 20
    z = rng.integers(1, 2 ** 31, size=64, dtype=np.int64) | 1  # odd, never 0 mod n
    z[0] = 1
    rule = lattice_rule(n, z, seed=3)
    shift = rule.shift
    for _ in range(200):
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, 64))
        want = ((i * int(z[j])) % n) / n  # python ints: exact
        want = (want + shift[j]) % 1.0 - 0.5
        got = generate_node(rule, i, 64)[j]
        assert got == want


def test_draw_shift_deterministic():
    assert np.array_equal(draw_shift(42, 16), draw_shift(42, 16))
    assert not np.array_equal(draw_shift(1, 16), draw_shift(2, 16))
    delta = draw_shift(7, 1000)
    assert np.all(delta >= 0.0)
    assert np.all(delta < 1.0)


def test_lattice_rule_validation(builtin_z):
    with pytest.raises(ValueError):
        lattice_rule(100, builtin_z)  # not a power of two
    with pytest.raises(ValueError):
        lattice_rule(2 ** 21, builtin_z)  # beyond supported range
    with pytest.raises(ValueError, match="z_2"):
        lattice_rule(8, np.array([1, 16]))  # reduces to zero residue


def test_lattice_rule_warns_on_nonstandard_first():
    with pytest.warns(UserWarning):
        lattice_rule(8, np.array([3, 5]))


def test_with_seed_changes_only_shift(small_rule):
    other = with_seed(small_rule, 99)
    assert other.n == small_rule.n
    assert np.array_equal(other.z, small_rule.z)
    assert not np.array_equal(other.shift, small_rule.shift)


def test_qmc_mean_constant_is_exact(small_rule):
    assert qmc_mean(lambda y: 2.75, small_rule, 4) == 2.75


def test_qmc_mean_first_coordinate_closed_form():
    for n in (4, 64, 1024):
        rule = _unshifted(n, [1, 17])
        got = qmc_mean(lambda y: y[0], rule, 2)
        assert got == -1.0 / (2.0 * n)


def test_qmc_mean_parity_counting():
    n = 256
    rule = _unshifted(n, [1, 3])

    def parity_indicator(y):
        i = round((y[0] + 0.5) * n)
        return 1.0 if i % 2 == 0 else 0.0

    assert qmc_mean(parity_indicator, rule, 2) == 0.5


def test_qmc_mean_rejects_bad_budget(small_rule):
    with pytest.raises(ValueError):
        qmc_mean(lambda y: 1.0, small_rule, 2, n_used=small_rule.n * 2)
    with pytest.raises(ValueError):
        qmc_mean(lambda y: 1.0, small_rule, 2, n_used=100)


def test_qmc_mean_nonfinite_reports_node_index(small_rule):
    def bad(y):
        return math.nan if y is not None else 0.0

    with pytest.raises(EvaluationError, match="node index 0"):
        qmc_mean(bad, small_rule, 2)


def test_shift_invariance_for_constant_integrand(builtin_z):
    rules = [lattice_rule(512, builtin_z, seed=s) for s in (1, 2)]
    values = [qmc_mean(lambda y: 4.25, r, 8) for r in rules]
    assert values[0] == values[1] == 4.25


def test_estimate_zero_at_reference_dimension(small_rule):
    spec = oracle.ScalarModelSpec(a0=1.5, b=(0.1, 0.05, 0.02))
    model = oracle.ScalarTruncationModel(spec)
    err = estimate_truncation_error(model, 3, 3, small_rule, scalar_distance, n_used=64)
    assert err == 0.0


def test_estimate_matches_sweep(small_rule):
    spec = oracle.ScalarModelSpec(a0=1.5, b=(0.1, 0.05, 0.02, 0.01))
    model = oracle.ScalarTruncationModel(spec)
    sweep = estimate_truncation_errors(
        model, [1, 2, 3], 4, small_rule, scalar_distance, n_used=256
    )
    for k, s in enumerate([1, 2, 3]):
        single = estimate_truncation_error(
            model, s, 4, small_rule, scalar_distance, n_used=256
        )
        assert single == sweep[k]


def test_estimate_monotone_in_s(small_rule):
    spec = oracle.ScalarModelSpec(a0=1.5, b=(0.2, 0.1, 0.05, 0.025, 0.0125))
    model = oracle.ScalarTruncationModel(spec)
    errs = estimate_truncation_errors(
        model, [1, 2, 3, 4], 5, small_rule, scalar_distance, n_used=1024
    )
    assert np.all(np.diff(errs) < 0)


def test_estimate_validates_dimensions(small_rule):
    spec = oracle.ScalarModelSpec(a0=1.5, b=(0.1, 0.05))
    model = oracle.ScalarTruncationModel(spec)
    with pytest.raises(ValueError):
        estimate_truncation_errors(model, [3], 2, small_rule, scalar_distance)
    with pytest.raises(ValueError):
        estimate_truncation_errors(
            model, [1], small_rule.z.size + 1, small_rule, scalar_distance
        )


def test_estimate_worker_counts_agree(small_rule):
    spec = oracle.ScalarModelSpec(a0=1.5, b=(0.1, 0.05, 0.02))
    model = oracle.ScalarTruncationModel(spec)
    serial = estimate_truncation_errors(
        model, [1, 2], 3, small_rule, scalar_distance, n_used=256, workers=1
    )
    parallel = estimate_truncation_errors(
        model, [1, 2], 3, small_rule, scalar_distance, n_used=256, workers=2
    )
    assert np.array_equal(serial, parallel)


def test_multishift_estimates(builtin_z):
    spec = oracle.ScalarModelSpec(a0=1.5, b=(0.1, 0.05, 0.02))
    model = oracle.ScalarTruncationModel(spec)
    rule = lattice_rule(256, builtin_z, seed=1)
    values = multishift_truncation_estimates(
        model, 1, 3, rule, scalar_distance, seeds=(1, 2, 3), n_used=256
    )
    assert len(values) == 3
    assert values[0] != values[1]  # distinct shifts move the estimate
    again = multishift_truncation_estimates(
        model, 1, 3, rule, scalar_distance, seeds=(1, 2, 3), n_used=256
    )
    assert np.array_equal(values, again)


def test_shift_agreement_diagnostic(builtin_z):
    """Distinct shifts agree within a few standard deviations over 8 shifts."""
    from trunclab.field import PERIODIC

    spec = oracle.ScalarModelSpec(a0=1.5, b=(0.1, 0.05, 0.02), transform=PERIODIC)
    model = oracle.ScalarTruncationModel(spec)
    rule = lattice_rule(1024, builtin_z, seed=1)
    pool = multishift_truncation_estimates(
        model, 1, 3, rule, scalar_distance, seeds=tuple(range(1, 9)), n_used=1024
    )
    spread = float(np.std(pool))
    a = estimate_truncation_error(
        model, 1, 3, with_seed(rule, 11), scalar_distance, n_used=1024
    )
    b = estimate_truncation_error(
        model, 1, 3, with_seed(rule, 12), scalar_distance, n_used=1024
    )
    assert abs(a - b) <= 3.0 * math.sqrt(2.0) * spread + 1e-12


def test_sweep_wraps_model_failures_with_node_index(small_rule):
    class Explodes:
        def __call__(self, s, y):
            raise RuntimeError("synthetic failure")

    with pytest.raises(EvaluationError, match="node index 0"):
        estimate_truncation_errors(
            Explodes(), [1], 2, small_rule, scalar_distance, n_used=64
        )
