"""Local-global assembly of relative elementary words.

A level word over a localized polynomial ring that is trivial at the zero
fiber of one variable can be pulled back to the unlocalized ring once the
variable is dilated by a high enough power of the localized element.  The
functions here carry that out exactly and glue the pullbacks:

- `torsion_exponent` finds the least dilation making two candidate
  pullbacks agree entrywise, bounded by the torsion of the localization;
- `for_dilation` rewrites a relative splitting whose indeterminate sits
  at a ninth power into a word whose conjugators live at level (t);
- `dilate` composes splitting, ninth power, normalization and clearing
  into the pullback itself, tracking every exponent in its receipt;
- `extract_cover` and `unimodular_combination` handle the cover
  bookkeeping, and `patch` glues dilated pullbacks over a unimodular
  cover into one global word.

Every step is checked against the matrix representations; nothing is
returned without either a structural certificate or an oracle-verified
congruence attestation.
"""

import itertools
from dataclasses import dataclass

from .chevrep import RepMatrix
from .errors import (
    ConditionViolated,
    CongruenceFailed,
    LocalizationMismatch,
    NodeBudgetExceeded,
    NotInIdeal,
    NotSplittingIdeal,
    NotUnimodular,
    NoUnitCombination,
    OracleMismatch,
    SubstitutionMismatch,
    UndecidableIdealClass,
)
from .exactring import IdealSpec
from .gword import (
    EMPTY,
    BarShape,
    Comm,
    Conj,
    Gen,
    Inv,
    LevelShape,
    Prod,
    RelConjShape,
    check_shape,
    inv_word,
    is_word,
    node_count,
    substitute_word,
    word_args,
)
from .rewrite import Budget, RewriteEngine, RewriteReceipt


# ----- small helpers -----


def _self_map(ring):
    return {n: ring.var(n) for n in ring.var_names}


def _lift_map(src, target):
    return {n: target.var(n) for n in src.var_names}


def _to_ring(elt, target):
    return elt.substitute(_lift_map(elt.ring, target), target)


def _mat_substitute(m, mapping, target):
    entries = {}
    for pos, v in m.entries.items():
        img = v.substitute(mapping, target)
        if img.num:
            entries[pos] = img
    return RepMatrix(target, m.dim, entries)


def _receipt(eng, op, w_in, w_out, cert, target=None, details=None):
    """Oracle check, certificate check and node gate, like the engine's
    own finisher; `eng` must live over the ring of the output word."""
    nodes_in = node_count(w_in) if is_word(w_in) else 0
    nodes_out = node_count(w_out)
    if eng.node_budget is not None and nodes_out > eng.node_budget:
        raise NodeBudgetExceeded(
            "%s produced %d nodes (budget %d)" % (op, nodes_out, eng.node_budget)
        )
    attested = 0
    if eng.verify:
        if target is not None:
            for rep in eng.reps:
                if not rep.words_equal(w_out, target, eng.ring):
                    raise OracleMismatch(
                        "%s output differs from its target in the %s representation"
                        % (op, rep.kind)
                    )
        if cert is not None:
            report = check_shape(w_out, cert, eng.congruence_oracle())
            if not report.ok:
                raise OracleMismatch("%s certificate failed: %s" % (op, report.reason))
            attested = len(report.attested)
    return RewriteReceipt(
        op,
        w_in,
        w_out,
        cert,
        eng.verify,
        nodes_in,
        nodes_out,
        attested,
        details or {},
    )


# ----- torsion pinning -----


def torsion_exponent(g, h, s, var=None):
    """Least m >= 0 with g(s^m v) == h(s^m v) entrywise, v a chosen variable.

    Both matrices must live over the same unlocalized polynomial ring,
    agree at v = 0, and become equal after inverting s.  The difference is
    then s-power torsion concentrated in positive v-degrees, so the scan
    is bounded by the torsion exponent of the localization and always
    terminates.  `var` defaults to the last variable of the ring.
    """
    ring = g.ring
    if not isinstance(h, RepMatrix) or h.ring != ring:
        raise LocalizationMismatch("torsion comparison needs matrices over one ring")
    if g == h:
        return 0
    if ring.loc_num is not None:
        raise LocalizationMismatch(
            "torsion pinning works over the base ring, not its localization"
        )
    if not ring.var_names:
        raise LocalizationMismatch("unequal matrices over a ring with no variables")
    if var is None:
        var = ring.var_names[-1]
    elif var not in ring.var_names:
        raise LocalizationMismatch("%r is not a variable of %s" % (var, ring))
    s_elt = ring.coerce(s)
    bound = ring.localize_at(s_elt).torsion_bound()
    kill = s_elt ** bound
    for pos in set(g.entries) | set(h.entries):
        d = g.entry(*pos) - h.entry(*pos)
        if not (kill * d).is_zero():
            raise LocalizationMismatch(
                "the matrices still differ after inverting %s" % s_elt
            )
    at_zero = _self_map(ring)
    at_zero[var] = ring.zero()
    if _mat_substitute(g, at_zero, ring) != _mat_substitute(h, at_zero, ring):
        raise LocalizationMismatch("the matrices disagree at %s = 0" % var)
    for m in range(bound + 1):
        dil = _self_map(ring)
        dil[var] = s_elt ** m * ring.var(var)
        if _mat_substitute(g, dil, ring) == _mat_substitute(h, dil, ring):
            return m
    # every positive v-degree coefficient of the difference is killed by
    # s^bound, so the loop cannot fall through
    raise OracleMismatch("no dilation exponent at or below %d" % bound)


# ----- cover bookkeeping -----


def unimodular_combination(ring, values):
    """Coefficients c with sum(c[k] * values[k]) = 1 in `ring`.

    Integer and Z/m families are settled by the ideal witness machinery.
    Over polynomial rings an inconclusive witness falls back to a bounded
    pool of small coefficients; covers beyond the pool raise
    UndecidableIdealClass rather than guess.
    """
    vals = [ring.coerce(v) for v in values]
    if not vals:
        raise NotUnimodular("an empty family generates nothing")
    spec = IdealSpec.gens(ring, *vals)
    try:
        wit = spec.witness(ring.one())
    except NotInIdeal:
        raise NotUnimodular(
            "{%s} does not generate the unit ideal of %s"
            % (", ".join(str(v) for v in vals), ring)
        )
    except UndecidableIdealClass:
        combo = _bounded_combination_search(ring, vals)
        if combo is None:
            raise UndecidableIdealClass(
                "no unit combination of %s found in the bounded search pool"
                % [str(v) for v in vals]
            )
        return combo
    coeffs = [ring.zero() for _ in vals]
    for coeff, tag in wit.combo:
        coeffs[tag[1]] = coeffs[tag[1]] + coeff
    total = ring.zero()
    for c, v in zip(coeffs, vals):
        total = total + c * v
    if total != ring.one():
        raise OracleMismatch("unit combination does not sum to 1")
    return coeffs


def _bounded_combination_search(ring, vals):
    pool = [ring.int_(n) for n in range(-3, 4)]
    one = ring.one()
    for name in ring.var_names:
        x = ring.var(name)
        pool.extend((x, -x, one + x, one - x))
    for combo in itertools.product(pool, repeat=len(vals)):
        total = ring.zero()
        for c, v in zip(combo, vals):
            total = total + c * v
        if total == one:
            return list(combo)
    return None


def extract_cover(words):
    """One base-ring element per word, multiplying the distinct denominator
    values its arguments carry, checked to generate the unit ideal.

    Words without denominators contribute 1.  All words must delocalize to
    the same base ring; the resulting cover is returned in word order.
    """
    if not words:
        raise NotUnimodular("an empty family of words covers nothing")
    base = None
    cover = []
    for w in words:
        args = word_args(w)
        if not args:
            raise LocalizationMismatch("a word without arguments names no ring")
        ring = args[0].ring
        b = ring.delocalized()
        if base is None:
            base = b
        elif b != base:
            raise LocalizationMismatch(
                "words over %s and %s do not share a base ring" % (b, base)
            )
        vals = []
        for a in args:
            if a.den:
                v = _to_ring(ring.loc_element() ** a.den, b)
                if all(v != u for u in vals):
                    vals.append(v)
        s_w = b.one()
        for v in vals:
            s_w = s_w * v
        cover.append(s_w)
    unimodular_combination(base, cover)
    return cover


# ----- normalizing a ninth-power splitting -----


def _conj_gen_form(f):
    """Collapse Inv/Conj wrappers around a single generator to Gen or
    Conj(Gen, word); None when the core is not one generator."""
    by = None
    neg = False
    while True:
        if isinstance(f, Conj):
            by = f.by if by is None else Prod((f.by, by))
            f = f.base
        elif isinstance(f, Inv):
            neg = not neg
            f = f.word
        elif isinstance(f, Prod) and len(f.factors) == 1:
            f = f.factors[0]
        elif isinstance(f, Gen):
            break
        else:
            return None
    g = Gen(f.root, -f.arg) if neg else f
    return g if by is None else Conj(g, by)


def _normalize_level_factor(eng, f, level_spec, budget, out, stats):
    g = _conj_gen_form(f)
    if g is None:
        out.append(f)
        stats["kept_factors"] += 1
        return
    try:
        piece, rec = eng.conjugation_normalize(g, level_spec, budget)
    except (ConditionViolated, NoUnitCombination):
        # no decomposition route over this ring; the factor stays whole
        # and rides as a congruence attestation
        out.append(f)
        stats["condition_falls"] += 1
        return
    out.extend(piece.factors)
    stats["level_factors"] += 1
    stats["attest_falls"] += rec.details.get("attest_falls", 0)
    stats["decompositions"] += rec.details.get("decompositions", 0)


def for_dilation(eng, w, k_spec, var):
    """Rewrite a relative splitting at var^9 into level-(var) conjugators.

    The input certifies BarShape(k_spec, (var^9)) over the engine's ring.
    Commutator factors are split off by move_indeterminate with middle
    ideal (var^3); level factors are then normalized one at a time by
    conjugation_normalize funded as k*(var^3) = (k*(var)) * (var)^(2),
    which turns every surviving conjugator into a level-(var) word.
    Factors without a decomposition route over the ring are kept whole;
    they are honest congruences at level k*(var) and come back as
    oracle-checked attestations in the receipt.

    Returns (word, receipt); the word is oracle-equal to the input and
    certifies RelConjShape((var), k_spec * (var)).
    """
    ring = eng.ring
    t = ring.var(var)
    t_spec = IdealSpec.gens(ring, t)
    cube = IdealSpec.gens(ring, t ** 3)
    ninth = IdealSpec.gens(ring, t ** 9)
    if eng.verify:
        report = check_shape(w, BarShape(k_spec, ninth), eng.congruence_oracle())
        if not report.ok:
            raise ConditionViolated(
                "input is not a relative splitting at %s^9: %s" % (var, report.reason)
            )
    level_spec = k_spec.product(cube)
    budget = Budget([(k_spec, t_spec)], repeat_last=False, allow_attest=True)
    stats = {
        "level_factors": 0,
        "mixed_factors": 0,
        "kept_factors": 0,
        "condition_falls": 0,
        "attest_falls": 0,
        "decompositions": 0,
    }
    out = []
    for f in (w.factors if isinstance(w, Prod) else (w,)):
        core = f
        while isinstance(core, (Inv, Conj)):
            core = core.word if isinstance(core, Inv) else core.base
        if isinstance(core, Comm):
            try:
                level_w, mixed_w, _ = eng.move_indeterminate(Prod((f,)), cube, k_spec)
            except (ConditionViolated, NoUnitCombination):
                out.append(f)
                stats["kept_factors"] += 1
                continue
            for piece in level_w.factors:
                _normalize_level_factor(eng, piece, level_spec, budget, out, stats)
            out.extend(mixed_w.factors)
            stats["mixed_factors"] += len(mixed_w.factors)
        else:
            _normalize_level_factor(eng, f, level_spec, budget, out, stats)
    out_word = Prod(tuple(out))
    cert = RelConjShape(t_spec, k_spec.product(t_spec))
    details = dict(stats)
    details["budget"] = budget.trace()
    return out_word, _receipt(
        eng, "for_dilation", w, out_word, cert, target=w, details=details
    )


# ----- dilation -----


def dilate(eng, w, i_spec, var=None, minimize_l=False):
    """Pull a local level word back to the unlocalized ring.

    `w` is a level-i_spec word over the engine's ring localized at s,
    trivial at var = 0 (`var` defaults to the last variable).  Returns
    (l, h, receipt) with h a level word over the unlocalized base whose
    evaluation equals the entrywise dilation of w by var -> s^l * var in
    every representation.

    The variable is doubled through a fresh one (var -> var * var'), the
    splitting of the doubled word along var' is raised to the ninth power
    and rewritten by for_dilation, and var' -> s^m * var' with m covering
    every argument denominator clears the localization, so l = 9*m and up.
    var' = 1 collapses the result, and a torsion scan per representation
    pins the final exponent exactly, including over base rings where s
    divides zero.  With minimize_l the clearing exponent is the least one
    that stays integral instead of the recorded denominator maximum.
    """
    ring = eng.ring
    if ring.loc_num is None:
        # already integral: nothing to clear
        return 0, w, _receipt(
            eng,
            "dilate",
            w,
            w,
            LevelShape(i_spec),
            target=w,
            details={"l": 0, "n": 0, "clear_m": 0, "torsion_k": 0, "den_exponents": []},
        )
    if var is None:
        if not ring.var_names:
            raise NotSplittingIdeal("no polynomial variable to dilate along")
        var = ring.var_names[-1]
    s_elt = ring.loc_element()
    base_out = ring.delocalized()
    eng_out = RewriteEngine(eng.rs, base_out, verify=eng.verify, node_budget=eng.node_budget)
    i_base = i_spec.substitute(_lift_map(ring, base_out), base_out)
    if isinstance(w, Prod) and not w.factors:
        return 0, EMPTY, _receipt(
            eng_out,
            "dilate",
            w,
            EMPTY,
            LevelShape(i_base),
            details={"l": 0, "n": 0, "clear_m": 0, "torsion_k": 0, "den_exponents": []},
        )
    t = ring.var(var)
    oracle = eng.congruence_oracle()
    if eng.verify:
        report = check_shape(w, LevelShape(i_spec), oracle)
        if not report.ok:
            raise ConditionViolated("input is not a level word: %s" % report.reason)
        if not oracle(w, IdealSpec.gens(ring, t)):
            raise CongruenceFailed("the input word is not trivial at %s = 0" % var)

    # double the variable through a fresh one and split along it
    vp = var + "p"
    while vp in ring.var_names or vp in ring.alias:
        vp += "p"
    ring2 = ring.extend(vp)
    eng2 = RewriteEngine(eng.rs, ring2, verify=eng.verify, node_budget=eng.node_budget)
    tp = ring2.var(vp)
    doubled = _lift_map(ring, ring2)
    doubled[var] = ring2.var(var) * tp
    i2 = i_spec.substitute(_lift_map(ring, ring2), ring2)
    f_word = substitute_word(w, doubled, ring2)
    bar, _ = eng2.relative_split(f_word, i2, vp)
    nine = _self_map(ring2)
    nine[vp] = tp ** 9
    bar9 = substitute_word(bar, nine, ring2)
    h9, rec_ford = for_dilation(eng2, bar9, i2, vp)

    # clear denominators with var' -> s^m var'
    dens = sorted({a.den for a in word_args(h9) if a.den})
    den_max = dens[-1] if dens else 0
    base2 = ring2.delocalized()
    s_b2 = _to_ring(s_elt, base2)

    def clear_at(m_try):
        mp = _lift_map(ring2, base2)
        mp[vp] = s_b2 ** m_try * base2.var(vp)
        return substitute_word(h9, mp, base2)

    cleared = None
    last_err = None
    for m in range(0, den_max + 1) if minimize_l else (den_max,):
        try:
            cleared = clear_at(m)
            break
        except SubstitutionMismatch as e:
            last_err = e
    if cleared is None:
        # an attested factor kept a bare localized argument that no power
        # of s can absorb; report the boundary instead of guessing
        raise SubstitutionMismatch(
            "clearing %s -> %s^m * %s leaves a denominator standing: %s"
            % (vp, s_elt, vp, last_err)
        )
    n = 9 * m

    # collapse the auxiliary variable
    drop = _lift_map(ring, base_out)
    drop[vp] = base_out.one()
    h_word = substitute_word(cleared, drop, base_out)

    # the dilated input must be integral entrywise before it can be compared;
    # raise n when a matrix entry carries a deeper denominator than the word
    s_out = _to_ring(s_elt, base_out)
    mats_in = [rep.evaluate_word(w, ring) for rep in eng.reps]
    entry_den = 0
    for gm in mats_in:
        for _, v in gm.entries_minus_identity():
            if v.den > entry_den:
                entry_den = v.den
    if entry_den > n:
        bump = _self_map(base_out)
        bump[var] = s_out ** (entry_den - n) * base_out.var(var)
        h_word = substitute_word(h_word, bump, base_out)
        n = entry_den

    def integral_dilation(gm, e):
        mp = _lift_map(ring, base_out)
        mp[var] = s_out ** e * base_out.var(var)
        return _mat_substitute(gm, mp, base_out)

    # pin the exponent: over a base with s-torsion the cleared word may
    # still differ from the integral dilation by s-torsion in positive
    # var-degrees, and a further bounded dilation kills it
    k = 0
    for rep, gm in zip(eng.reps, mats_in):
        hm = rep.evaluate_word(h_word, base_out)
        k = max(k, torsion_exponent(integral_dilation(gm, n), hm, s_out, var))
    l = n + k
    if k:
        shift = _self_map(base_out)
        shift[var] = s_out ** k * base_out.var(var)
        h_final = substitute_word(h_word, shift, base_out)
    else:
        h_final = h_word
    if eng.verify:
        for rep, gm in zip(eng.reps, mats_in):
            if rep.evaluate_word(h_final, base_out) != integral_dilation(gm, l):
                raise OracleMismatch(
                    "dilate output differs from the dilated input in the %s "
                    "representation" % rep.kind
                )
    details = {
        "s": str(s_elt),
        "var": var,
        "aux_var": vp,
        "den_exponents": dens,
        "clear_m": m,
        "n": n,
        "torsion_k": k,
        "l": l,
        "minimized": bool(minimize_l),
        "ninth_power_attested": rec_ford.attested,
    }
    return l, h_final, _receipt(
        eng_out, "dilate", w, h_final, LevelShape(i_base), details=details
    )


# ----- patching -----


@dataclass(frozen=True)
class LocalDatum:
    """One local solution: a word over the base ring localized at s."""

    s: object
    word: object


@dataclass(frozen=True)
class PatchProblem:
    """Gluing data for one global word.

    system is a root system or its label, base the unlocalized ring, ideal
    the level over base, data one LocalDatum per cover element, and var
    the gluing variable (default: the last variable of base).
    """

    system: object
    base: object
    ideal: object
    data: tuple
    var: object = None


def patch(problem, verify=True, node_budget=200000, minimize_l=False):
    """Glue local words over a unimodular cover into one global word.

    Each datum's word lives over base localized at its s, certifies the
    level ideal there, and is trivial at var = 0.  The k-th overlap word
    compares the datum at var * (u_1 + ... + u_k) against the same datum
    at var * (u_1 + ... + u_{k-1}) over fresh variables u_i, one per
    cover element; dilate pulls each overlap back to the unlocalized
    extension, a unit combination of the powered cover elements pins the
    u_i to constants summing to 1, and the pinned words concatenate.

    The glued word is checked against every datum: over each localization
    it must evaluate to exactly the datum's matrices (OracleMismatch
    otherwise, which is how inconsistent local data surfaces), and it
    certifies LevelShape(ideal) over the base.  Returns (word, receipt).
    """
    base = problem.base
    data = tuple(problem.data)
    if not data:
        raise NotUnimodular("a patching problem needs at least one local datum")
    if base.loc_num is not None:
        raise LocalizationMismatch("the patching base must not be localized")
    var = problem.var
    if var is None:
        if not base.var_names:
            raise NotSplittingIdeal("no variable to glue along")
        var = base.var_names[-1]
    elif var not in base.var_names:
        raise NotSplittingIdeal("%r is not a variable of %s" % (var, base))
    if problem.ideal.ring != base:
        raise SubstitutionMismatch("the level ideal must live over the base ring")

    cover = []
    loc_rings = []
    loc_engines = []
    for d in data:
        s_k = base.coerce(d.s)
        loc = base.localize_at(s_k)
        eng_k = RewriteEngine(problem.system, loc, verify=verify, node_budget=node_budget)
        for a in word_args(d.word):
            if a.ring != loc:
                raise LocalizationMismatch(
                    "a local word does not live over %s localized at %s" % (base, s_k)
                )
        if verify:
            i_loc = problem.ideal.substitute(_lift_map(base, loc), loc)
            report = check_shape(d.word, LevelShape(i_loc), eng_k.congruence_oracle())
            if not report.ok:
                raise ConditionViolated(
                    "a local word is not a level word: %s" % report.reason
                )
            if not eng_k.congruence_oracle()(d.word, IdealSpec.gens(loc, loc.var(var))):
                raise CongruenceFailed("a local word is not trivial at %s = 0" % var)
        cover.append(s_k)
        loc_rings.append(loc)
        loc_engines.append(eng_k)
    unimodular_combination(base, cover)

    aux = []
    for k in range(len(data)):
        nm = "u%d" % (k + 1)
        while nm in base.var_names or nm in base.alias or nm in aux:
            nm += "u"
        aux.append(nm)
    big = base.extend(*aux)

    exponents = []
    pulled = []
    dilation_details = []
    for k, d in enumerate(data):
        loc_big = big.localize_at(_to_ring(cover[k], big))
        eng_w = RewriteEngine(problem.system, loc_big, verify=verify, node_budget=node_budget)
        sigma = loc_big.zero()
        for nm in aux[: k + 1]:
            sigma = sigma + loc_big.var(nm)
        to_k = _lift_map(base, loc_big)
        to_k[var] = loc_big.var(var) * sigma
        a_word = substitute_word(d.word, to_k, loc_big)
        if k == 0:
            w_k = a_word
        else:
            to_prev = _lift_map(base, loc_big)
            to_prev[var] = loc_big.var(var) * (sigma - loc_big.var(aux[k]))
            w_k = Prod((inv_word(substitute_word(d.word, to_prev, loc_big)), a_word))
        i_loc_big = problem.ideal.substitute(_lift_map(base, loc_big), loc_big)
        l_k, h_k, rec_k = dilate(eng_w, w_k, i_loc_big, var=aux[k], minimize_l=minimize_l)
        exponents.append(l_k)
        pulled.append(h_k)
        dilation_details.append(rec_k.details)

    # pin the auxiliary variables: 1 = sum of p_k * s_k^{l_k}, u_k -> p_k
    # in its own word and u_j -> p_j * s_j^{l_j} in the others, so every
    # pinned word ends at the same partial sums of a partition of 1
    powered = [cover[k] ** exponents[k] for k in range(len(data))]
    combo = unimodular_combination(base, powered)
    pinned_vals = [powered[k] * combo[k] for k in range(len(data))]
    out_factors = []
    for k, h_k in enumerate(pulled):
        phi = _lift_map(base, base)
        for j in range(len(data)):
            phi[aux[j]] = combo[j] if j == k else pinned_vals[j]
        img = substitute_word(h_k, phi, base)
        if isinstance(img, Prod):
            out_factors.extend(img.factors)
        else:
            out_factors.append(img)
    out = Prod(tuple(out_factors))

    eng_base = RewriteEngine(problem.system, base, verify=verify, node_budget=node_budget)
    if verify:
        for k, d in enumerate(data):
            loc = loc_rings[k]
            out_loc = substitute_word(out, _lift_map(base, loc), loc)
            for rep in loc_engines[k].reps:
                if not rep.words_equal(out_loc, d.word, loc):
                    raise OracleMismatch(
                        "the glued word differs from local datum %d in the %s "
                        "representation" % (k + 1, rep.kind)
                    )
    details = {
        "cover": [str(s) for s in cover],
        "exponents": exponents,
        "coefficients": [str(c) for c in combo],
        "gluing_vars": aux,
        "dilations": dilation_details,
    }
    return out, _receipt(
        eng_base, "patch", None, out, LevelShape(problem.ideal), details=details
    )
