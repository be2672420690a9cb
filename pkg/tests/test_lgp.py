import random

import pytest

from chevcalc.errors import (
    CongruenceFailed,
    ConditionViolated,
    LocalizationMismatch,
    NodeBudgetExceeded,
    NotSplittingIdeal,
    NotUnimodular,
    OracleMismatch,
    SubstitutionMismatch,
    UndecidableIdealClass,
)
from chevcalc.exactring import IdealSpec, Ring
from chevcalc.gword import (
    EMPTY,
    Comm,
    Conj,
    Gen,
    LevelShape,
    Prod,
    RelConjShape,
    check_shape,
    substitute_word,
    word_args,
)
from chevcalc.lgp import (
    LocalDatum,
    PatchProblem,
    dilate,
    extract_cover,
    for_dilation,
    patch,
    torsion_exponent,
    unimodular_combination,
)
from chevcalc.rewrite import RewriteEngine

A, B, C = (1, -1, 0), (0, 1, -1), (1, 0, -1)


def lift(word, target):
    ring = word_args(word)[0].ring
    return substitute_word(word, {n: target.var(n) for n in ring.var_names}, target)


# ----- torsion_exponent -----


def test_torsion_exponent_kills_nilpotent_tail():
    # over Z/4 the entries of x_a(2t) die under t -> 2t but not before
    ring = Ring(4, ("t",))
    eng = RewriteEngine("A2", ring)
    rep = eng.reps[0]
    g = rep.evaluate_word(Gen(A, ring.parse("2*t")), ring)
    ident = rep.evaluate_word(EMPTY, ring)
    assert torsion_exponent(g, ident, 2) == 1


def test_torsion_exponent_equal_is_zero():
    ring = Ring(4, ("t",))
    eng = RewriteEngine("A2", ring)
    g = eng.reps[0].evaluate_word(Gen(A, ring.parse("2*t")), ring)
    assert torsion_exponent(g, g, 2) == 0


def test_torsion_exponent_agrees_with_direct_scan():
    ring = Ring(8, ("t",))
    eng = RewriteEngine("A2", ring)
    rep = eng.reps[0]
    ident = rep.evaluate_word(EMPTY, ring)
    rng = random.Random(41)
    for _ in range(10):
        c = rng.choice((2, 4, 6))
        g = rep.evaluate_word(Gen(rng.choice((A, B, C)), ring.int_(c) * ring.var("t")), ring)
        m = torsion_exponent(g, ident, 2)
        scan = 0
        while True:
            dil = {"t": ring.int_(2) ** scan * ring.var("t")}
            entries = [v.substitute(dil, ring) for _, v in g.entries_minus_identity()]
            if all(v.is_zero() for v in entries):
                break
            scan += 1
        assert m == scan


def test_torsion_exponent_rejects_persistent_difference():
    ring = Ring(0, ("t",))
    eng = RewriteEngine("A2", ring)
    rep = eng.reps[0]
    g = rep.evaluate_word(Gen(A, ring.var("t")), ring)
    ident = rep.evaluate_word(EMPTY, ring)
    # over Z nothing divides t away
    with pytest.raises(LocalizationMismatch):
        torsion_exponent(g, ident, 2)


def test_torsion_exponent_rejects_constant_difference():
    ring = Ring(4, ("t",))
    eng = RewriteEngine("A2", ring)
    rep = eng.reps[0]
    g = rep.evaluate_word(Gen(A, ring.int_(2)), ring)
    ident = rep.evaluate_word(EMPTY, ring)
    with pytest.raises(LocalizationMismatch):
        torsion_exponent(g, ident, 2)


def test_torsion_exponent_input_checks():
    ring = Ring(4, ("t",))
    other = Ring(4, ("u",))
    eng = RewriteEngine("A2", ring)
    g = eng.reps[0].evaluate_word(Gen(A, ring.parse("2*t")), ring)
    ident = eng.reps[0].evaluate_word(EMPTY, ring)
    h = RewriteEngine("A2", other).reps[0].evaluate_word(Gen(A, other.parse("2*u")), other)
    with pytest.raises(LocalizationMismatch):
        torsion_exponent(g, h, 2)
    with pytest.raises(LocalizationMismatch):
        torsion_exponent(g, ident, 2, var="x")
    loc = Ring(0, ("t",)).localize_at(2)
    gl = RewriteEngine("A2", loc).reps[0].evaluate_word(Gen(A, loc.parse("2*t")), loc)
    il = RewriteEngine("A2", loc).reps[0].evaluate_word(EMPTY, loc)
    with pytest.raises(LocalizationMismatch):
        torsion_exponent(gl, il, 2)


# ----- unimodular_combination / extract_cover -----


def test_unimodular_combination_integers():
    ring = Ring.integers()
    combo = unimodular_combination(ring, [2, 3])
    assert [str(c) for c in combo] == ["-1", "1"]
    total = ring.zero()
    for c, v in zip(combo, (ring.int_(2), ring.int_(3))):
        total = total + c * v
    assert total == ring.one()


def test_unimodular_combination_rejects_common_divisor():
    with pytest.raises(NotUnimodular):
        unimodular_combination(Ring.integers(), [2, 4])
    with pytest.raises(NotUnimodular):
        unimodular_combination(Ring.integers(), [])


def test_unimodular_combination_polynomials():
    ring = Ring(0, ("X",))
    X = ring.var("X")
    combo = unimodular_combination(ring, [X, ring.one() - X])
    assert [str(c) for c in combo] == ["1", "1"]
    combo = unimodular_combination(ring, [X, ring.int_(2) * X + ring.one()])
    assert [str(c) for c in combo] == ["-2", "1"]


def test_unimodular_combination_beyond_pool_is_undecided():
    ring = Ring(0, ("X",))
    X = ring.var("X")
    with pytest.raises(UndecidableIdealClass):
        unimodular_combination(ring, [X * X, X * X + X**4])


def test_extract_cover_collects_denominators():
    base = Ring(0, ("X",))
    w1 = Prod((Gen(A, base.localize_at(2).parse("3*X/s")),))
    w2 = Prod((Gen(C, base.localize_at(3).parse("X/s^2")),))
    cover = extract_cover([w1, w2])
    assert cover == [base.int_(2), base.int_(9)]


def test_extract_cover_multiplies_distinct_depths():
    base = Ring(0, ("X",))
    loc = base.localize_at(2)
    w1 = Prod((Gen(A, loc.parse("3*X/s")), Gen(C, loc.parse("5*X/s^2"))))
    w2 = Prod((Gen(A, base.localize_at(3).parse("X/s")),))
    cover = extract_cover([w1, w2])
    assert cover == [base.int_(8), base.int_(3)]


def test_extract_cover_denominator_free_word():
    base = Ring(0, ("X",))
    w = Prod((Gen(A, base.parse("3*X")),))
    assert extract_cover([w]) == [base.one()]


def test_extract_cover_rejections():
    base = Ring(0, ("X",))
    w2 = Prod((Gen(A, base.localize_at(2).parse("X/s")),))
    w4 = Prod((Gen(A, base.localize_at(4).parse("X/s")),))
    with pytest.raises(NotUnimodular):
        extract_cover([w2, w4])
    with pytest.raises(NotUnimodular):
        extract_cover([])
    with pytest.raises(LocalizationMismatch):
        extract_cover([w2, EMPTY])
    other = Prod((Gen(A, Ring(0, ("Y",)).localize_at(3).parse("Y/s")),))
    with pytest.raises(LocalizationMismatch):
        extract_cover([w2, other])


# ----- for_dilation -----


def ninth_splitting(ring):
    t = ring.var("t")
    return Prod((
        Gen(A, ring.int_(3) * t**9),
        Conj(Gen(B, ring.int_(6) * t**9), Gen(C, ring.int_(5))),
        Comm(Gen(A, ring.int_(3) * t), Gen(B, ring.int_(2) * t**9)),
    ))


def test_for_dilation_normalizes_ninth_power_splitting():
    ring = Ring(0, ("t",))
    eng = RewriteEngine("A2", ring)
    K = IdealSpec.gens(ring, 3)
    w = ninth_splitting(ring)
    out, rec = for_dilation(eng, w, K, "t")
    assert rec.attested == 2
    assert rec.details["level_factors"] == 2
    assert rec.details["mixed_factors"] == 2
    assert rec.details["kept_factors"] == 0
    assert rec.details["condition_falls"] == 0
    assert rec.details["budget"] == ()
    assert rec.nodes_out == 27
    for rep in eng.reps:
        assert rep.words_equal(out, w, ring)
    t_spec = IdealSpec.gens(ring, ring.var("t"))
    report = check_shape(out, RelConjShape(t_spec, K.product(t_spec)), eng.congruence_oracle())
    assert report.ok and len(report.attested) == 2


def test_for_dilation_keeps_unroutable_factors_whole():
    ring = Ring(0, ("t",))
    eng = RewriteEngine("C2", ring)
    K = IdealSpec.gens(ring, 3)
    t = ring.var("t")
    short, long_ = (1, -1), (0, 2)
    w = Prod((
        Gen(long_, ring.int_(3) * t**9),
        Conj(Gen(short, ring.int_(3) * t**9), Gen(long_, ring.int_(5))),
        Comm(Gen(short, ring.int_(3) * t), Gen(long_, ring.int_(2) * t**9)),
    ))
    out, rec = for_dilation(eng, w, K, "t")
    # the commutator has no move route over Z; it rides as one attestation
    assert rec.details["kept_factors"] == 1
    assert rec.details["level_factors"] == 2
    assert rec.attested == 1
    for rep in eng.reps:
        assert rep.words_equal(out, w, ring)


def test_for_dilation_rejects_shallow_splitting():
    ring = Ring(0, ("t",))
    eng = RewriteEngine("A2", ring)
    w = Prod((Gen(A, ring.parse("3*t^8")),))
    with pytest.raises(ConditionViolated):
        for_dilation(eng, w, IdealSpec.gens(ring, 3), "t")


# ----- dilate -----


def test_dilate_clears_denominators():
    loc = Ring(0, ("t",)).localize_at(2)
    eng = RewriteEngine("A2", loc)
    I = IdealSpec.gens(loc, 3)
    w = Prod((Gen(A, loc.parse("3*t/s")), Gen(C, loc.parse("3*t"))))
    l, h, rec = dilate(eng, w, I)
    assert l == 9
    assert rec.details["den_exponents"] == [1]
    assert rec.details["clear_m"] == 1
    assert rec.details["n"] == 9
    assert rec.details["torsion_k"] == 0
    assert rec.details["ninth_power_attested"] == 0
    assert rec.nodes_out == 3
    base = loc.delocalized()
    assert all(a.den == 0 for a in word_args(h))
    assert all(a.ring == base for a in word_args(h))
    # h evaluates to w with t dilated by 2^9, checked over the localization
    dil = {"t": loc.int_(2) ** l * loc.var("t")}
    w_dil = substitute_word(w, dil, loc)
    for rep in eng.reps:
        assert rep.words_equal(lift(h, loc), w_dil, loc)
    report = check_shape(h, LevelShape(IdealSpec.gens(base, 3)), RewriteEngine("A2", base).congruence_oracle())
    assert report.ok and not report.attested


def test_dilate_exponent_floor_covers_denominators():
    loc = Ring(0, ("t",)).localize_at(2)
    eng = RewriteEngine("A2", loc)
    I = IdealSpec.gens(loc, 3)
    w = Prod((Gen(A, loc.parse("3*t/s")), Gen(C, loc.parse("3*t"))))
    l, _, rec = dilate(eng, w, I)
    assert rec.details["n"] >= 9 * max(rec.details["den_exponents"])
    l_min, _, rec_min = dilate(eng, w, I, minimize_l=True)
    assert rec_min.details["minimized"]
    assert l_min <= l
    assert l_min == 9


def test_dilate_peels_level_conjugators():
    loc = Ring(0, ("t",)).localize_at(2)
    eng = RewriteEngine("A2", loc)
    I = IdealSpec.gens(loc, 3)
    w = Prod((Conj(Gen(A, loc.parse("3*t/s")), Gen(B, loc.int_(5))), Gen(C, loc.parse("3*t"))))
    l, h, rec = dilate(eng, w, I)
    assert l == 9
    assert rec.details["ninth_power_attested"] == 0
    dil = {"t": loc.int_(2) ** l * loc.var("t")}
    for rep in eng.reps:
        assert rep.words_equal(lift(h, loc), substitute_word(w, dil, loc), loc)


def test_dilate_zero_divisor_base_pins_by_torsion():
    # Z/4 localized at 2 collapses, so the cleared word is empty and the
    # torsion scan alone finds the exponent that makes the match exact
    loc = Ring(4, ("t",)).localize_at(2)
    eng = RewriteEngine("A2", loc)
    w = Prod((Gen(A, loc.parse("2*t")),))
    l, h, rec = dilate(eng, w, IdealSpec.gens(loc, 2))
    assert l == 1
    assert h == EMPTY
    assert rec.details["n"] == 0
    assert rec.details["torsion_k"] == 1


def test_dilate_trivial_cases():
    ring = Ring(0, ("t",))
    eng = RewriteEngine("A2", ring)
    w = Prod((Gen(A, ring.parse("3*t")),))
    l, h, rec = dilate(eng, w, IdealSpec.gens(ring, 3))
    assert (l, h) == (0, w)
    assert rec.details["l"] == 0
    loc = ring.localize_at(2)
    l, h, _ = dilate(RewriteEngine("A2", loc), EMPTY, IdealSpec.gens(loc, 3))
    assert (l, h) == (0, EMPTY)


def test_dilate_input_checks():
    loc = Ring(0, ("t",)).localize_at(2)
    eng = RewriteEngine("A2", loc)
    I = IdealSpec.gens(loc, 3)
    with pytest.raises(ConditionViolated):
        dilate(eng, Prod((Gen(A, loc.parse("2*t")),)), I)
    with pytest.raises(CongruenceFailed):
        dilate(eng, Prod((Gen(A, loc.int_(3)),)), I)
    flat = Ring.integers().localize_at(2)
    with pytest.raises(NotSplittingIdeal):
        dilate(RewriteEngine("A2", flat), Prod((Gen(A, flat.int_(3)),)), IdealSpec.gens(flat, 3))


# ----- patch -----


def crafted_problem():
    base = Ring(0, ("X",))
    l2, l3 = base.localize_at(2), base.localize_at(3)
    d1 = Prod((Gen(A, l2.parse("3*X/s")), Gen(A, l2.parse("3*X/s")), Gen(C, l2.parse("3*X"))))
    d2 = Prod((Gen(A, l3.parse("3*X")), Gen(C, l3.parse("6*X/s^2")), Gen(C, l3.parse("21*X/s^2"))))
    prob = PatchProblem("A2", base, IdealSpec.gens(base, 3),
                        (LocalDatum(2, d1), LocalDatum(3, d2)), "X")
    g_word = Prod((Gen(A, base.parse("3*X")), Gen(C, base.parse("3*X"))))
    return base, prob, g_word


def test_patch_glues_crafted_cover():
    base, prob, g_word = crafted_problem()
    out, rec = patch(prob)
    assert rec.details["cover"] == ["2", "3"]
    assert rec.details["exponents"] == [9, 9]
    assert rec.details["coefficients"] == ["-7804", "203"]
    assert rec.details["gluing_vars"] == ["u1", "u2"]
    assert rec.attested == 0
    # the coefficients really partition 1 across the powered cover
    assert -7804 * 2**9 + 203 * 3**9 == 1
    eng = RewriteEngine("A2", base)
    for rep in eng.reps:
        assert rep.words_equal(out, g_word, base)
    report = check_shape(out, LevelShape(prob.ideal), eng.congruence_oracle())
    assert report.ok


def test_patch_reproduces_random_integral_words():
    rng = random.Random(11)
    base = Ring(0, ("X",))
    roots = [A, B, C, tuple(-x for x in A), tuple(-x for x in B), tuple(-x for x in C)]
    eng = RewriteEngine("A2", base)
    for _ in range(3):
        factors = []
        for _ in range(2):
            c = rng.randrange(-3, 4)
            arg = base.int_(3) * base.var("X")
            factors.append(Gen(rng.choice(roots), arg * base.int_(c) if c else arg))
        g_word = Prod(tuple(factors))
        data = []
        for s in (2, 3):
            loc = base.localize_at(s)
            data.append(LocalDatum(s, lift(g_word, loc)))
        out, rec = patch(PatchProblem("A2", base, IdealSpec.gens(base, 3), tuple(data), "X"))
        assert rec.oracle_checked
        for rep in eng.reps:
            assert rep.words_equal(out, g_word, base)


def test_patch_single_chart_at_unit():
    base = Ring(0, ("X",))
    loc = base.localize_at(1)
    d = Prod((Gen(A, loc.parse("3*X")),))
    out, rec = patch(PatchProblem("A2", base, IdealSpec.gens(base, 3), (LocalDatum(1, d),), "X"))
    assert rec.details["exponents"] == [0]
    g = Prod((Gen(A, base.parse("3*X")),))
    for rep in RewriteEngine("A2", base).reps:
        assert rep.words_equal(out, g, base)


def test_patch_surfaces_inconsistent_data():
    base = Ring(0, ("X",))
    l2, l3 = base.localize_at(2), base.localize_at(3)
    prob = PatchProblem("A2", base, IdealSpec.gens(base, 3), (
        LocalDatum(2, Prod((Gen(A, l2.parse("3*X")),))),
        LocalDatum(3, Prod((Gen(A, l3.parse("6*X")),))),
    ), "X")
    with pytest.raises(OracleMismatch):
        patch(prob)


def test_patch_rejections():
    base, prob, _ = crafted_problem()
    l2 = base.localize_at(2)
    I3 = IdealSpec.gens(base, 3)
    with pytest.raises(NotUnimodular):
        patch(PatchProblem("A2", base, I3, (), "X"))
    with pytest.raises(LocalizationMismatch):
        patch(PatchProblem("A2", l2, IdealSpec.gens(l2, 3),
                           (LocalDatum(2, Prod((Gen(A, l2.parse("3*X")),))),), "X"))
    with pytest.raises(NotUnimodular):
        patch(PatchProblem("A2", base, I3, (
            LocalDatum(2, Prod((Gen(A, l2.parse("3*X")),))),
            LocalDatum(4, Prod((Gen(A, base.localize_at(4).parse("3*X")),))),
        ), "X"))
    with pytest.raises(NodeBudgetExceeded):
        patch(prob, node_budget=2)
    with pytest.raises(CongruenceFailed):
        patch(PatchProblem("A2", base, I3, (LocalDatum(2, Prod((Gen(A, l2.int_(3)),))),), "X"))
    with pytest.raises(LocalizationMismatch):
        patch(PatchProblem("A2", base, I3, (LocalDatum(2, Prod((Gen(A, base.parse("3*X")),))),), "X"))
    with pytest.raises(NotSplittingIdeal):
        patch(PatchProblem("A2", base, I3, (LocalDatum(2, Prod((Gen(A, l2.parse("3*X")),))),), "Y"))
    other = Ring(0, ("Y",))
    with pytest.raises(SubstitutionMismatch):
        patch(PatchProblem("A2", base, IdealSpec.gens(other, 3),
                           (LocalDatum(2, Prod((Gen(A, l2.parse("3*X")),))),), "X"))
