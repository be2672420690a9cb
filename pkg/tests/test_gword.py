import random

import pytest

from chevcalc.chevrep import RepMatrix, get_representation
from chevcalc.errors import ParseError
from chevcalc.exactring import IdealSpec, Ring
from chevcalc.gword import (
    EMPTY,
    AttestedShape,
    BarShape,
    Comm,
    Conj,
    ElemShape,
    Gen,
    Inv,
    LevelShape,
    MixedCommShape,
    Prod,
    RelConjShape,
    VaserFormShape,
    YShape,
    check_shape,
    flatten,
    free_reduce,
    gen_count,
    inv_word,
    is_word,
    node_count,
    substitute_word,
    word_from_text,
    word_to_text,
)
from chevcalc.rootsys import build_root_system

from wordgen import random_ring_element, random_word

A2 = build_root_system("A", 2)


def eval_gens(rep, gens, ring):
    m = RepMatrix.identity(ring, rep.dim)
    for g in gens:
        m = m * rep.generator_matrix(g.root, g.arg)
    return m


def test_flatten_and_inverse_against_matrices():
    rep = get_representation(A2, "defining")
    ring = Ring.integers().extend("t")
    rng = random.Random(20260815)
    for _ in range(12):
        w = random_word(A2, ring, rng, depth=3)
        direct = rep.evaluate_word(w, ring)
        assert direct == eval_gens(rep, flatten(w), ring)
        assert (direct * rep.evaluate_word(inv_word(w), ring)).is_identity()
        assert rep.evaluate_word(Inv(w), ring) == rep.evaluate_word(inv_word(w), ring)


def test_free_reduce():
    ring = Ring.integers().extend("t")
    t = ring.var("t")
    a = (1, -1, 0)
    b = (0, 1, -1)
    w = Prod((Gen(a, t), Gen(a, t + 1), Gen(b, t), Gen(b, -t)))
    red = free_reduce(w)
    assert red == Prod((Gen(a, 2 * t + 1),))
    # Cancelling the middle pair exposes the outer pair.
    w2 = Prod((Gen(a, t), Gen(b, t), Gen(b, -t), Gen(a, -t)))
    assert free_reduce(w2) == EMPTY
    rep = get_representation(A2, "defining")
    rng = random.Random(5)
    for _ in range(8):
        w = random_word(A2, ring, rng, depth=3)
        assert rep.evaluate_word(w, ring) == rep.evaluate_word(free_reduce(w), ring)


def test_counts():
    ring = Ring.integers()
    g = Gen((1, -1, 0), ring.one())
    h = Gen((0, 1, -1), ring.one())
    assert node_count(g) == 1
    assert node_count(Comm(g, h)) == 3
    assert node_count(Prod((g, Inv(h)))) == 4
    assert gen_count(Comm(g, h)) == 4
    assert gen_count(Conj(g, h)) == 3
    assert flatten(EMPTY) == ()
    assert is_word(g) and is_word(EMPTY) and not is_word("x")


def test_serialization_round_trip():
    ring = Ring.integers().extend("t")
    rng = random.Random(99)
    for _ in range(15):
        w = random_word(A2, ring, rng, depth=3)
        assert word_from_text(word_to_text(w), ring, A2) == w
    loc = Ring.integers().extend("t").localize_at(2)
    arg = loc.parse("(t + 3)/s^2")
    w = Conj(Gen((1, -1, 0), arg), Gen((-1, 1, 0), loc.int_(4)))
    assert word_from_text(word_to_text(w), loc, A2) == w


def test_parse_errors():
    ring = Ring.integers().extend("t")
    for text in [
        "(x 9,9,9 {t})",
        "(foo)",
        "(x 1,-1,0 {t}",
        "(prod) (prod)",
        "(x 1,-1,0 {t)",
        "(inv)",
        "x 1,-1,0",
    ]:
        with pytest.raises(ParseError):
            word_from_text(text, ring, A2)


def test_substitute_word():
    ring = Ring.integers().extend("t")
    target = Ring.integers().extend("u")
    u = target.var("u")
    w = Comm(Gen((1, -1, 0), ring.var("t")), Gen((0, 1, -1), ring.int_(3)))
    out = substitute_word(w, {"t": u * u}, target)
    assert [g.arg for g in flatten(out)] == [-u * u, target.int_(-3), u * u, target.int_(3)]


def test_shape_elem_and_level():
    ring = Ring.integers().extend("t")
    t = ring.var("t")
    two = IdealSpec.gens(ring, ring.int_(2))
    w = Prod((Gen((1, -1, 0), 2 * t), Gen((0, 1, -1), ring.int_(-4))))
    assert check_shape(w, ElemShape())
    assert check_shape(w, LevelShape(two))
    # The level grammar is the relative one: conjugates of level generators
    # by arbitrary elementary words stay inside.
    conj = Conj(Gen((1, -1, 0), 2 * t), Prod((Gen((0, 1, -1), t + 1), Gen((1, 0, -1), t))))
    assert check_shape(Prod((w, conj)), LevelShape(two))
    bad = Prod((Gen((1, -1, 0), t),))
    assert not check_shape(bad, LevelShape(two))
    assert "outside" in check_shape(bad, LevelShape(two)).reason


def test_shape_rel_conj():
    ring = Ring.integers().extend("t")
    t = ring.var("t")
    two = IdealSpec.gens(ring, ring.int_(2))
    tee = IdealSpec.gens(ring, t)
    a = (1, -1, 0)
    b = (0, 1, -1)
    good = Prod(
        (
            Conj(Gen(a, 2 * t), Prod((Gen(b, t), Gen(a, ring.one())))),
            Gen(b, ring.int_(2)),
            Inv(Conj(Gen(b, ring.int_(6)), Gen(a, t))),
        )
    )
    assert check_shape(good, RelConjShape(None, two))
    # The conjugator grammar tightens when an ideal is given.
    assert not check_shape(good, RelConjShape(tee, two))
    tight = Conj(Gen(a, 2 * t), Gen(b, 3 * t))
    assert check_shape(tight, RelConjShape(tee, two))
    assert not check_shape(Conj(Prod((Gen(a, 2 * t),)), Gen(b, t)), RelConjShape(None, two))
    assert not check_shape(Conj(Gen(a, t), Gen(b, t)), RelConjShape(None, two))


def test_shape_y():
    ring = Ring.integers().extend("t")
    t = ring.var("t")
    two = IdealSpec.gens(ring, ring.int_(2))
    tee = IdealSpec.gens(ring, t)
    avoid = (1, 0, -1)
    a = (1, -1, 0)
    b = (0, 1, -1)
    nb = (0, -1, 1)
    good = Prod((Conj(Gen(a, 2 * t), Gen(b, t)), Inv(Gen(nb, ring.int_(2)))))
    assert check_shape(good, YShape(avoid, tee, two))
    # Any factor touching the avoided pair is rejected.
    assert not check_shape(Conj(Gen(avoid, 2 * t), Gen(b, t)), YShape(avoid, tee, two))
    assert not check_shape(Conj(Gen(a, 2 * t), Gen((-1, 0, 1), t)), YShape(avoid, tee, two))
    assert not check_shape(Gen(avoid, ring.int_(2)), YShape(avoid, tee, two))
    # Argument levels are enforced on both slots.
    assert not check_shape(Conj(Gen(a, 2 * t), Gen(b, ring.one())), YShape(avoid, tee, two))
    assert not check_shape(Conj(Gen(a, t), Gen(b, t)), YShape(avoid, tee, two))


def test_shape_mixed_comm():
    ring = Ring.integers().extend("t")
    t = ring.var("t")
    two = IdealSpec.gens(ring, ring.int_(2))
    tee = IdealSpec.gens(ring, t)
    a = (1, -1, 0)
    b = (0, 1, -1)
    fac = Comm(Gen(a, ring.int_(2)), Gen(b, t))
    assert check_shape(fac, MixedCommShape(two, tee))
    # Either orientation of the two levels is accepted.
    assert check_shape(Comm(Gen(b, t), Gen(a, ring.int_(2))), MixedCommShape(two, tee))
    assert check_shape(Prod((fac, Inv(Conj(fac, Gen(b, ring.one()))))), MixedCommShape(two, tee))
    # Conjugated and commutator-wrapped sides stay inside the closure.
    deep = Comm(Conj(Gen(a, ring.int_(4)), Gen(b, t + 1)), Comm(Gen(b, t), Gen(a, ring.one())))
    assert check_shape(deep, MixedCommShape(two, tee))
    assert not check_shape(Comm(Gen(a, ring.one()), Gen(b, t)), MixedCommShape(two, tee))
    assert not check_shape(Gen(a, 2 * t), MixedCommShape(two, tee))


def test_shape_bar_and_attested():
    ring = Ring.integers().extend("t")
    t = ring.var("t")
    two = IdealSpec.gens(ring, ring.int_(2))
    tee = IdealSpec.gens(ring, t)
    a = (1, -1, 0)
    b = (0, 1, -1)
    comm_fac = Comm(Gen(a, ring.int_(2)), Gen(b, t))
    # 2t lies in the product ideal (2)(t), so this factor needs no oracle.
    prod_fac = Conj(Gen(a, 2 * t), Gen(b, ring.one()))
    stray = Gen(a, t)
    w = Prod((comm_fac, prod_fac, stray))
    # The stray factor needs attestation, so the check fails closed.
    rep = check_shape(w, BarShape(two, tee))
    assert not rep and "oracle" in rep.reason
    seen = []

    def oracle(sub, spec):
        seen.append((sub, spec.describe()))
        return True

    rep = check_shape(w, BarShape(two, tee), oracle)
    assert rep and len(rep.attested) == 1
    assert seen and seen[0][0] == stray
    assert not check_shape(w, BarShape(two, tee), lambda sub, spec: False)

    att = AttestedShape(two)
    assert not check_shape(stray, att)
    assert check_shape(stray, att, lambda sub, spec: True)


def test_shape_vaserstein():
    ring = Ring.integers().extend("t")
    t = ring.var("t")
    a = (1, -1, 0)
    na = (-1, 1, 0)
    w = Prod((Gen(na, -t), Gen(a, t + 1), Gen(na, t)))
    assert check_shape(w, VaserFormShape())
    assert check_shape(w, VaserFormShape(root=a))
    assert not check_shape(w, VaserFormShape(root=na))
    assert check_shape(Conj(Gen(a, t), Gen(na, t)), VaserFormShape(root=a))
    bad = Prod((Gen(na, -t), Gen(a, t + 1), Gen(na, t + t)))
    assert not check_shape(bad, VaserFormShape())
