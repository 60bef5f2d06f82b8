import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from feasmass.instance import (CapacityError, InstanceDimensionError,
                               InstanceFormatError, bits_to_matrix,
                               bitstring_str, build_cost, default_penalty_weight,
                               enumerate_feasible, is_permutation_feasible,
                               load_instance, make_instance, parse_bitstring,
                               synthetic_instance)


def write_instance(tmp_path, text, name="inst.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_simple(tmp_path):
    p = write_instance(tmp_path, "3\n0 1 2\n1 0 3\n2 3 0\n")
    inst = load_instance(p)
    assert inst.n == 3
    assert inst.dist[0][1] == 1
    assert inst.dist[1][2] == 3
    assert inst.penalty_weight == 3 * 3 + 1


def test_load_with_comments(tmp_path):
    p = write_instance(tmp_path, "# header\n2\n0 5\n# interior comment\n5 0\n")
    inst = load_instance(p)
    assert inst.n == 2
    assert inst.dist[0][1] == 5


def test_load_dimension_error(tmp_path):
    p = write_instance(tmp_path, "3\n0 1 2\n1 0 3\n")
    with pytest.raises(InstanceDimensionError):
        load_instance(p)


def test_load_parse_error_names_line(tmp_path):
    p = write_instance(tmp_path, "2\n0 x\n5 0\n")
    with pytest.raises(InstanceFormatError, match=":2:"):
        load_instance(p)


INSTANCES = Path(__file__).resolve().parent.parent / "instances"


def test_load_shipped_instances():
    for name, n in (("wi3", 3), ("wi4", 4), ("wi5", 5)):
        inst = load_instance(INSTANCES / f"{name}.txt")
        assert inst.n == n
        assert inst.num_qubits == n * n
        d = inst.dist_array()
        assert (d == d.T).all() and (np.diag(d) == 0).all()


def test_make_instance_validation():
    with pytest.raises(InstanceDimensionError):
        make_instance([[0, 1, 2], [1, 0, 3]])
    with pytest.raises(ValueError):
        make_instance([[1, 2], [2, 1]])  # nonzero diagonal


def test_default_penalty_weight():
    assert default_penalty_weight([[0, 7], [7, 0]]) == 15


def test_feasibility_n2():
    assert is_permutation_feasible(parse_bitstring("1001"), 2)
    assert not is_permutation_feasible(parse_bitstring("1100"), 2)
    assert bitstring_str(parse_bitstring("1001"), 2) == "1001"


def test_feasibility_matches_brute_force():
    for n in (2, 3):
        brute = [x for x in range(1 << (n * n))
                 if (bits_to_matrix(x, n).sum(axis=0) == 1).all()
                 and (bits_to_matrix(x, n).sum(axis=1) == 1).all()]
        assert sorted(enumerate_feasible(n)) == brute
        assert all(is_permutation_feasible(x, n) for x in brute)
        others = set(range(1 << (n * n))) - set(brute)
        assert not any(is_permutation_feasible(x, n) for x in list(others)[:200])


def test_enumerate_counts():
    assert set(enumerate_feasible(2)) == {parse_bitstring("1001"), parse_bitstring("0110")}
    assert len(enumerate_feasible(3)) == 6
    assert len(enumerate_feasible(5)) == 120
    with pytest.raises(CapacityError):
        enumerate_feasible(9)


def test_enumerate_order_is_lexicographic():
    feas = enumerate_feasible(3)
    perms = []
    for x in feas:
        m = bits_to_matrix(x, 3)
        perms.append(tuple(int(np.argmax(row)) for row in m))
    assert perms == sorted(perms)


def test_cost_all_zero_dist():
    inst = make_instance([[0, 0], [0, 0]], penalty_weight=1)
    cost = build_cost(inst)
    assert cost.value(0) == 4  # all four one-hot sums are off by one


def test_cost_identity_tour():
    inst = make_instance([[0, 5], [5, 0]], penalty_weight=11)
    cost = build_cost(inst)
    y = parse_bitstring("1001")
    assert cost.value(y) == 10  # zero penalty, tour 5 + 5


def test_cost_feasible_has_zero_penalty():
    inst = synthetic_instance(3, seed=4, high=5)
    cost = build_cost(inst)
    bare = build_cost(inst, include_penalty=False)
    for x in enumerate_feasible(3):
        assert cost.value(x) == bare.value(x)


def test_cost_vector_matches_scalar():
    for n in (2, 3):
        inst = synthetic_instance(n, seed=1, high=5)
        cost = build_cost(inst)
        vec = cost.cost_vector()
        for y in range(1 << (n * n)):
            assert int(vec[y]) == cost.value(y)


def test_cost_vector_matches_scalar_n4_sampled():
    inst = synthetic_instance(4, seed=2, high=9)
    cost = build_cost(inst)
    vec = cost.cost_vector()
    rng = np.random.default_rng(0)
    for y in rng.integers(0, 1 << 16, size=300):
        assert int(vec[y]) == cost.value(int(y))


def test_cost_nonnegative_integer_lattice():
    inst = synthetic_instance(3, seed=5, high=5)
    vec = build_cost(inst).cost_vector()
    assert vec.min() >= 0
    assert np.issubdtype(vec.dtype, np.integer)


def test_tie_broken_vector_is_injective():
    inst = synthetic_instance(2, seed=3, high=3)
    tb = build_cost(inst).tie_broken_vector()
    assert len(np.unique(tb)) == len(tb)


def test_spread_exact_small():
    inst = synthetic_instance(3, seed=1, high=5)
    cost = build_cost(inst)
    vec = cost.cost_vector()
    assert cost.spread == int(vec.max() - vec.min())


def test_spread_analytic_bound_n5():
    inst = synthetic_instance(5, seed=1, high=9)
    cost = build_cost(inst)
    bound = cost.spread
    # the bound must dominate the cost at the all-ones label and a sample
    all_ones = (1 << 25) - 1
    assert cost.value(all_ones) <= bound
    rng = np.random.default_rng(1)
    for y in rng.integers(0, 1 << 25, size=50):
        assert cost.value(int(y)) <= bound


def test_baseline_fraction_arithmetic():
    assert Fraction(math.factorial(3), 2 ** 9) == Fraction(6, 512)


def test_big_m_separates_infeasible_strings():
    # with the default weight every infeasible label costs strictly more
    # than its bare tour value, and more than any feasible tour
    inst = synthetic_instance(2, seed=6, high=3)
    cost = build_cost(inst)
    bare = build_cost(inst, include_penalty=False)
    max_tour = max(cost.value(x) for x in enumerate_feasible(2))
    for y in range(16):
        if is_permutation_feasible(y, 2):
            assert cost.value(y) == bare.value(y)
        else:
            assert cost.value(y) > bare.value(y)
            assert cost.value(y) > max_tour
