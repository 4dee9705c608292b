import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttscheck.model import closed_interval, parse_interval
from ttscheck.zone import (
    LE_ZERO,
    Dbm,
    add_variable,
    bound_add,
    bound_le,
    canonicalize,
    constrain,
    from_constraints,
    project_out,
    satisfies,
    trivial,
    zones_equal,
)


def _zone(names, cons):
    d = from_constraints(tuple(names), cons)
    assert d is not None
    return d


def test_point_interval_canonical_nonempty():
    # th1 = 4 exactly
    d = _zone(("t1",), {(1, 0): (Fraction(4), False), (0, 1): (Fraction(-4), False)})
    assert d.bounds_of("t1") == ((Fraction(-4), False), (Fraction(4), False))


def test_strict_contradiction_empty():
    # th1 < 2 and th1 >= 2
    d = from_constraints(("t1",), {(1, 0): (Fraction(2), True),
                                   (0, 1): (Fraction(-2), False)})
    assert d is None


def test_shortest_path_derives_entry():
    # th1 <= 3, th2 - th1 <= 1 ==> th2 <= 4
    d = _zone(("t1", "t2"), {(1, 0): (Fraction(3), False),
                             (2, 1): (Fraction(1), False)})
    assert d.m[2][0] == (Fraction(4), False)


def test_canonicalize_idempotent():
    d = _zone(("t1", "t2"), {(1, 0): (Fraction(3), False),
                             (2, 1): (Fraction(1), True)})
    assert canonicalize(d).m == d.m


def test_constrain_with_unbounded_is_identity():
    d = _zone(("t1",), {(1, 0): (Fraction(4), False)})
    assert constrain(d, 1, 0, None) is d


def test_constrain_below_zero_empties():
    d = _zone(("t1",), {(1, 0): (Fraction(4), False), (0, 1): LE_ZERO})
    assert constrain(d, 1, 0, (Fraction(0), True)) is None


def test_constrain_propagates_through_difference():
    # th1 in [0,4], th2 in [0,2], then th1 <= th2 gives th1 in [0,2]
    d = _zone(("t1", "t2"), {(1, 0): (Fraction(4), False), (0, 1): LE_ZERO,
                             (2, 0): (Fraction(2), False), (0, 2): LE_ZERO})
    d2 = constrain(d, 1, 2, (Fraction(0), False))
    assert d2.m[1][0] == (Fraction(2), False)


def test_project_out_unconstrained_identity():
    d = _zone(("t1", "t2"), {(1, 0): (Fraction(5), False), (0, 1): LE_ZERO})
    p = project_out(d, "t2")
    assert p.names == ("t1",)
    assert p.bounds_of("t1") == d.bounds_of("t1")


def test_project_out_substitutes():
    # th1 = 4 and th2 - th1 in [2,2] ==> th2 = 6
    d = _zone(("t1", "t2"), {(1, 0): (Fraction(4), False), (0, 1): (Fraction(-4), False),
                             (2, 1): (Fraction(2), False), (1, 2): (Fraction(-2), False)})
    p = project_out(d, "t1")
    assert p.bounds_of("t2") == ((Fraction(-6), False), (Fraction(6), False))


def test_project_last_variable_leaves_trivial():
    d = _zone(("t1",), {(1, 0): (Fraction(1), False)})
    p = project_out(d, "t1")
    assert p.names == () and p.m == ((LE_ZERO,),)


def test_add_variable_punctual():
    d = add_variable(trivial(), "v", closed_interval(Fraction(6), Fraction(6)))
    assert d.bounds_of("v") == ((Fraction(-6), False), (Fraction(6), False))


def test_add_variable_unbounded():
    d = add_variable(trivial(), "v", parse_interval("[0,oo["))
    lo, up = d.bounds_of("v")
    assert up is None and lo == (Fraction(0), False)


def test_add_variable_strict_lower():
    d = add_variable(trivial(), "v", parse_interval("]0,4]"))
    lo, up = d.bounds_of("v")
    assert lo == (Fraction(0), True) and up == (Fraction(4), False)


def test_equals_same_zone():
    d = _zone(("t1",), {(1, 0): (Fraction(2), False)})
    assert zones_equal(d, d)


def test_equals_distinguishes_strictness():
    d1 = _zone(("t1",), {(1, 0): (Fraction(2), False)})
    d2 = _zone(("t1",), {(1, 0): (Fraction(2), True)})
    assert not zones_equal(d1, d2)


def test_equals_identifies_redundant_presentations():
    base = {(1, 0): (Fraction(3), False), (2, 0): (Fraction(5), False),
            (2, 1): (Fraction(2), False)}
    redundant = dict(base)
    redundant[(2, 0)] = (Fraction(7), False)  # implied tighter by the others
    d1 = _zone(("t1", "t2"), base)
    d2 = _zone(("t1", "t2"), redundant)
    assert zones_equal(d1, d2)


def test_equals_rejects_mismatched_index_sets():
    d1 = _zone(("t1",), {})
    d2 = _zone(("t2",), {})
    with pytest.raises(ValueError):
        zones_equal(d1, d2)


def test_dump_format():
    d = _zone(("t1",), {(1, 0): (Fraction(4), True)})
    text = d.dump()
    assert "<4" in text and "inf" in text and "<=0" in text


# ---------------------------------------------------------------------------
# properties

def test_bound_add_associative_and_monotone():
    rng = random.Random(5)

    def rnd():
        if rng.random() < 0.15:
            return None
        return (Fraction(rng.randint(-8, 8), rng.randint(1, 4)), rng.random() < 0.5)

    for _ in range(300):
        a, b, c = rnd(), rnd(), rnd()
        assert bound_add(bound_add(a, b), c) == bound_add(a, bound_add(b, c))
        if bound_le(a, b):
            assert bound_le(bound_add(a, c), bound_add(b, c))


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 10**6))
def test_sampling_soundness_random_zones(seed):
    """A rational point satisfies the raw constraints iff it satisfies the
    canonical form: closure neither loses nor invents solutions."""
    rng = random.Random(seed)
    names = ("a", "b", "c")
    cons = {}
    for _ in range(rng.randint(2, 6)):
        i, j = rng.sample(range(4), 2)
        cons[(i, j)] = (Fraction(rng.randint(-6, 10), rng.randint(1, 3)),
                        rng.random() < 0.4)
    raw_rows = [[None if i != j else LE_ZERO for j in range(4)] for i in range(4)]
    for (i, j), bb in cons.items():
        raw_rows[i][j] = bb
    raw = Dbm(names, tuple(tuple(r) for r in raw_rows))
    canon = canonicalize(raw)
    for _ in range(20):
        point = {n: Fraction(rng.randint(0, 24), 2) for n in names}
        in_raw = satisfies(raw, point)
        in_canon = canon is not None and satisfies(canon, point)
        assert in_raw == in_canon


def test_project_commutes_with_unrelated_constraint():
    rng = random.Random(11)
    for _ in range(100):
        cons = {}
        for _ in range(rng.randint(1, 5)):
            i, j = rng.sample(range(4), 2)
            cons[(i, j)] = (Fraction(rng.randint(0, 9)), rng.random() < 0.5)
        d = from_constraints(("a", "b", "c"), cons)
        if d is None:
            continue
        extra = (Fraction(rng.randint(1, 9)), False)
        # constrain a (index 1 in both orderings) then project c, and converse
        left = constrain(d, 1, 0, extra)
        left = None if left is None else project_out(left, "c")
        right = constrain(project_out(d, "c"), 1, 0, extra)
        if left is None or right is None:
            assert left is None and right is None
        else:
            assert zones_equal(left, right)
