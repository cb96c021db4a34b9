from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ktinv.dimgrp import (
    AffElement,
    InductiveSystem,
    StageVector,
    TraceFunctional,
    approx_in_range_D,
    default_system,
    dimension_map,
    dimension_matrix,
    extreme_traces,
    make_admissible_system,
    push_forward,
)
from ktinv.realize import RotationAlgebraModel
from ktinv.zmod import IntMatrix, smith_normal_form


def small_system():
    return InductiveSystem([2, 2, 3, 2],
                           [[[1, 2], [3, 1]], [[1, 1], [2, 1], [1, 3]], [[1, 2, 1], [2, 1, 1]]],
                           [[[1, 0], [1, 1]], [[0, 1], [1, 0], [1, -1]], [[1, 0, 1], [0, 1, -1]]],
                           (1, 2))


def matmul(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))]
            for i in range(len(A))]


def test_units_follow_chi0():
    s = small_system()
    assert s.unit_at(2) == (5, 5)
    assert s.unit_at(3) == (10, 15, 20)
    assert s.ell(3) == 20


def test_unit_validation():
    with pytest.raises(ValueError):
        InductiveSystem([1, 1], [[[2]]], [[[1]]], [[1], [3]])
    with pytest.raises(ValueError):
        InductiveSystem([1, 1], [[[0]]], [[[1]]], [1])
    s = InductiveSystem([1, 1], [[[2]]], [[[1]]], [[1], [2]])
    assert s.unit_at(2) == (2,)


def test_push_forward_examples():
    s = small_system()
    x = StageVector(1, (3, -1))
    assert push_forward(x, s, 1) == x
    assert push_forward(StageVector(1, (0, 1)), s, 2).coords == s.chi(0, 1).col(1)
    two = push_forward(push_forward(x, s, 2), s, 3)
    assert two == push_forward(x, s, 3)
    prod = matmul(s.chi(0, 2).tolist(), s.chi(0, 1).tolist())
    assert s.compose(0, 3, 1).tolist() == prod


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=2, max_size=2), st.integers(1, 4),
       st.integers(0, 3), st.sampled_from([0, 1]))
def test_push_forward_functorial(coords, a, gap, parity):
    s = small_system()
    b = min(a + gap, 4)
    x = StageVector(1, tuple(coords))
    mid = push_forward(x, s, a, parity)
    assert push_forward(mid, s, b, parity) == push_forward(x, s, b, parity)


def test_dimension_map_examples():
    s = small_system()
    for stage in range(1, 5):
        assert dimension_map(StageVector(1, s.unit_at(1)), s, stage).values == (1,) * s.rank(stage)
    assert dimension_map(StageVector(2, (0, 0)), s, 3).values == (0, 0, 0)
    u = s.unit_at(3)
    for j in range(3):
        e = tuple(int(i == j) for i in range(3))
        assert dimension_map(StageVector(3, e), s, 3).values == \
            tuple(Fraction(int(i == j), u[i]) for i in range(3))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=2, max_size=2), st.integers(1, 4))
def test_dimension_map_positive(coords, stage):
    s = small_system()
    d = dimension_map(StageVector(1, tuple(coords)), s, stage)
    assert all(v >= 0 for v in d.values)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-40, 40), min_size=2, max_size=2))
def test_aff_push_is_convex_and_consistent(coords):
    s = small_system()
    a = StageVector(1, tuple(coords))
    d1 = dimension_map(a, s, 1)
    for stage in range(2, 5):
        pushed = d1.push(s, stage)
        assert pushed == dimension_map(a, s, stage)
        assert min(d1.values) <= min(pushed.values) and max(pushed.values) <= max(d1.values)
        assert pushed.sup_norm() <= d1.sup_norm()


def test_traces_normalized():
    s = small_system()
    for stage in range(1, 5):
        for tau in extreme_traces(s, stage):
            assert tau(StageVector(stage, s.unit_at(stage))) == 1
        d = dimension_map(StageVector(stage, s.unit_at(stage)), s, stage)
        for tau in extreme_traces(s, stage):
            assert d.evaluate(tau, s) == 1
    mixed = TraceFunctional.create(s, 2, ("1/10", "1/10"))
    assert mixed(StageVector(2, s.unit_at(2))) == 1
    with pytest.raises(ValueError):
        TraceFunctional.create(s, 2, ("1/5", "1/5"))
    with pytest.raises(ValueError):
        TraceFunctional.create(s, 2, ("3/10", "-1/10"))


def test_dimension_matrix_columns():
    s = small_system()
    D = dimension_matrix(s, 2, 4)
    for j in range(2):
        e = tuple(int(i == j) for i in range(2))
        assert D.col(j) == dimension_map(StageVector(2, e), s, 4).values


# --- approximation in the range of D -----------------------------------------------

def test_approx_member_is_hit_exactly():
    s = small_system()
    a = StageVector(2, (4, -3))
    target = dimension_map(a, s, 4)
    xi = approx_in_range_D(target, s, AffElement.constant(s, 4, Fraction(1, 10 ** 9)), 4)
    assert dimension_map(xi, s, 4) == target


def test_approx_half_with_even_units():
    s = InductiveSystem.stationary([[2]], [[1]], (1,), 6)
    half = AffElement.constant(s, 6, Fraction(1, 2))
    xi = approx_in_range_D(half, s, AffElement.constant(s, 6, Fraction(1, 10 ** 12)), 6)
    assert xi.stage == 2 and xi.coords == (1,)
    assert dimension_map(xi, s, 6) == half


def dyadic(stages):
    return InductiveSystem.stationary([[2]], [[1]], (1,), stages)


@pytest.mark.parametrize("eps_exp", [3, 6, 10, 14])
def test_approx_irrational_matches_convergent_oracle(eps_exp):
    s = dyadic(60)
    theta = RotationAlgebraModel.golden(digits=40).theta
    eps = Fraction(1, 10 ** eps_exp)
    target = AffElement.constant(s, 60, theta)
    xi = approx_in_range_D(target, s, AffElement.constant(s, 60, eps), 60)
    assert xi is not None
    assert abs(dimension_map(xi, s, 60).values[0] - theta) < eps
    # stage m offers denominators 2^(m-1); best approximations with that
    # denominator bound come from the continued fraction of theta
    for m in range(1, xi.stage):
        q = 2 ** (m - 1)
        best = theta.limit_denominator(q)
        if abs(best - theta) >= eps:
            continue
        # a convergent could succeed, the dyadic grid still has to
        assert abs(Fraction(round(theta * q), q) - theta) >= eps
    q = 2 ** (xi.stage - 1)
    assert abs(Fraction(round(theta * q), q) - theta) < eps
    # nothing with a small denominator can beat the convergent error
    q_small = 2 ** (xi.stage - 2) if xi.stage > 1 else 1
    if abs(theta.limit_denominator(q_small) - theta) >= eps:
        assert approx_in_range_D(target, s, AffElement.constant(s, 60, eps),
                                 xi.stage - 1) is None


def test_approx_not_found_is_depth_relative():
    s = dyadic(10)
    third = AffElement.constant(s, 10, Fraction(1, 3))
    bound = AffElement.constant(s, 10, Fraction(1, 10 ** 6))
    assert approx_in_range_D(third, s, bound, 10) is None
    with pytest.raises(ValueError):
        approx_in_range_D(third, s, AffElement.constant(s, 10, 0), 3)


@settings(max_examples=40, deadline=None)
@given(st.fractions(min_value=-3, max_value=3, max_denominator=1000),
       st.fractions(min_value=-3, max_value=3, max_denominator=1000),
       st.integers(1, 30))
def test_approx_output_meets_bound(t0, t1, k):
    s = default_system(8)
    target = AffElement(8, (t0, t1))
    bound = AffElement.constant(s, 8, Fraction(1, 2 ** k))
    xi = approx_in_range_D(target, s, bound, 8)
    if xi is not None:
        err = dimension_map(xi, s, 8) - target
        assert all(abs(e) < b for e, b in zip(err.values, bound.values))


# --- telescoping ------------------------------------------------------------------------

def test_default_system_is_admissible_and_unchanged():
    s = default_system(10)
    assert s.is_admissible()
    assert make_admissible_system(s, 10) == s


def test_telescoping_powers_of_two():
    seed = InductiveSystem.stationary([[2]], [[1]], (1,), 40)
    out = make_admissible_system(seed, 6)
    assert out.is_admissible()
    assert [m[0, 0] for m in out.maps0] == [2 ** (n + 1) for n in range(1, 6)]


def test_telescoping_mixed_signs_keeps_invariants():
    seed = InductiveSystem.stationary([[2, 1], [1, 1]], [[1, -1], [0, 1]], (1, 1), 30)
    assert not seed.is_admissible()
    out = make_admissible_system(seed, 5)
    assert out.is_admissible()
    from ktinv.dimgrp import admissible_stages
    st_ = admissible_stages(seed, 5)
    for n, (a, b) in enumerate(zip(st_, st_[1:]), start=1):
        assert smith_normal_form(out.chi(1, n))[1] == smith_normal_form(seed.compose(1, b, a))[1]
        assert smith_normal_form(out.chi(0, n))[1] == smith_normal_form(seed.compose(0, b, a))[1]
    assert out.compose(0, 5, 1) == seed.compose(0, st_[-1], 1)


def test_telescoping_fails_without_enough_stages():
    seed = InductiveSystem.stationary([[2]], [[1]], (1,), 5)
    with pytest.raises(ValueError):
        make_admissible_system(seed, 5)


def test_system_json_round_trip():
    s = small_system()
    assert InductiveSystem.from_json(s.to_json()) == s
    assert InductiveSystem.from_json(default_system(5).to_json()) == default_system(5)


def test_select_rejects_bad_stages():
    with pytest.raises(ValueError):
        default_system(5).select([1, 3, 2])
    assert default_system(5).select([1, 3, 5]).compose(1, 3, 1) == IntMatrix([[1, 4], [0, 1]])
