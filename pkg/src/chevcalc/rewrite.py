"""Certified word rewriting: expansion, splitting, decomposition, collection.

Every operation takes a word (or the data for one), produces a word of a
prescribed shape, and returns a RewriteReceipt alongside it.  In verify mode
the receipt is only issued after two independent checks pass: the output
evaluates to the same matrix as the input in every configured representation,
and the output matches its shape certificate.  Factors that the grammar alone
cannot place are attested by a matrix congruence check; the receipt records
how many such attestations were needed (zero on the fully structural paths).
"""

from dataclasses import dataclass, field

from .chevrep import congruence_check, get_representation
from .errors import (
    BudgetExhausted,
    ConditionViolated,
    CongruenceFailed,
    NodeBudgetExceeded,
    NoUnitCombination,
    NotExtendedIdeal,
    NotInIdeal,
    NotSplittingIdeal,
    OppositeRoots,
    OracleMismatch,
    UndecidableIdealClass,
)
from .exactring import IdealElement, IdealSpec
from .gword import (
    EMPTY,
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
    _match_rel_like,
    check_shape,
    flatten,
    free_reduce,
    inv_word,
    is_word,
    node_count,
    word_to_text,
)
from .rootsys import (
    build_root_system,
    compute_structure_constants,
    find_unit_sum_decomposition,
)


def _neg(root):
    return tuple(-x for x in root)


def _vsum(a, b, i=1, j=1):
    return tuple(i * x + j * y for x, y in zip(a, b))


def _prod(factors):
    factors = tuple(f for f in factors if f is not None and f != EMPTY)
    return Prod(factors)


def _conj_factor(f, by):
    """Conjugate a factor, merging conjugators instead of nesting them."""
    if by is None or by == EMPTY:
        return f
    if isinstance(f, Conj):
        inner = f.by.factors if isinstance(f.by, Prod) else (f.by,)
        outer = by.factors if isinstance(by, Prod) else (by,)
        return Conj(f.base, Prod(inner + outer))
    return Conj(f, by)


def _inv_factors(pieces):
    """Invert a factor list, keeping commutator cores side-stable.

    inv_word would rewrite [a,b]^-1 as [b,a]; an explicit Inv node leaves
    the generation side of each core where the shape grammar looks for it.
    """
    out = []
    for p in reversed(pieces):
        if isinstance(p, Conj):
            out.append(Conj(Inv(p.base), p.by))
        else:
            out.append(Inv(p))
    return out


def unit_from_idempotent_defect(ring):
    """A finite combination sum(a_i * (r_i**2 - r_i)) = 1 in the ring.

    The defects r**2 - r generate the unit ideal exactly when no residue
    field of the ring is F2, so the search is guarded by that test and the
    failure is a NoUnitCombination, not a timeout.
    """
    if not ring.no_f2_residue():
        raise NoUnitCombination(
            "every element r of %s has r^2 - r in the kernel of a map onto "
            "the field of two elements" % ring
        )
    combo = None
    if ring.n_invertible(2):
        # r = 2 gives defect 2; divide it away.
        combo = ((ring.inverse_of_int(2), ring.int_(2)),)
    else:
        candidates = []
        for n in ring.var_names:
            candidates += [-ring.var(n), ring.var(n)]
        if ring.loc_num is not None:
            candidates += [ring.s_power(k) for k in (1, 2, 3)]
        for r in candidates:
            d = r * r - r
            if d.is_zero():
                continue
            for k in range(5):
                target = ring.one() if k == 0 else ring.loc_element() ** k
                q = target.divide_exact(d)
                if q is not None:
                    a = q if k == 0 else q * ring.s_power(k)
                    combo = ((a, r),)
                    break
            if combo:
                break
        if combo is None:
            raise NoUnitCombination(
                "no small idempotent defect generates the unit ideal of %s" % ring
            )
    total = ring.zero()
    for a, r in combo:
        total = total + a * (r * r - r)
    if not (total - ring.one()).is_zero():
        raise OracleMismatch("idempotent defect combination does not sum to 1")
    return combo


class Budget:
    """Funding plan for decompositions triggered inside a rewrite.

    levels[d] = (arg_ideal, conj_ideal) funds a decomposition forced at
    conjugation depth d: the blocked argument must be witnessed inside
    arg_ideal * conj_ideal * conj_ideal (or the squares variant) and the
    replacement factors land in Y(root, conj_ideal, arg_ideal * conj_ideal).
    `spent` keeps one entry per charge so the exponent bookkeeping that made
    a pipeline work (or fail) is visible in receipts.
    """

    def __init__(self, levels, repeat_last=False, allow_attest=False, limit=None):
        self.levels = tuple(levels)
        self.repeat_last = repeat_last
        self.allow_attest = allow_attest
        self.limit = limit
        self.spent = []

    def fund(self, depth):
        if self.limit is not None and len(self.spent) >= self.limit:
            return None
        if depth < len(self.levels):
            return self.levels[depth]
        if self.repeat_last and self.levels:
            return self.levels[-1]
        return None

    def charge(self, depth, root, value, note):
        self.spent.append(
            {"depth": depth, "root": root, "value": str(value), "note": note}
        )

    def trace(self):
        return tuple(dict(e) for e in self.spent)


@dataclass
class RewriteReceipt:
    """What a rewrite did and how it was checked."""

    op: str
    input_word: object
    output_word: object
    certificate: object = None
    oracle_checked: bool = False
    nodes_in: int = 0
    nodes_out: int = 0
    attested: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "op": self.op,
            "oracle_checked": self.oracle_checked,
            "nodes_in": self.nodes_in,
            "nodes_out": self.nodes_out,
            "attested": self.attested,
            "details": {k: str(v) for k, v in self.details.items()},
        }
        if is_word(self.input_word):
            out["input"] = word_to_text(self.input_word)
        if is_word(self.output_word):
            out["output"] = word_to_text(self.output_word)
        if self.certificate is not None:
            out["certificate"] = type(self.certificate).__name__
        return out


class RewriteEngine:
    """Rewrites words over one root system and one ring.

    verify=True (the default) runs the matrix oracle and the certificate
    check on every operation; verify=False trusts the construction, which
    is only sensible inside already-tested pipelines.
    """

    def __init__(self, rs, ring, verify=True, node_budget=200000):
        if isinstance(rs, str):
            rs = build_root_system(rs[0], int(rs[1:]))
        self.rs = rs
        self.sc = compute_structure_constants(rs)
        self.ring = ring
        self.verify = verify
        self.node_budget = node_budget
        self.reps = [get_representation(rs, "adjoint")]
        if rs.label in ("A", "C"):
            self.reps.append(get_representation(rs, "defining"))

    # ----- plumbing -----

    def congruence_oracle(self):
        def check(word, spec):
            for rep in self.reps:
                if not congruence_check(rep.evaluate_word(word, self.ring), spec):
                    return False
            return True

        return check

    def _assert_equal(self, a, b, op):
        for rep in self.reps:
            if not rep.words_equal(a, b, self.ring):
                raise OracleMismatch(
                    "%s output differs from its target in the %s representation"
                    % (op, rep.kind)
                )

    def _finish(self, op, w_in, w_out, cert, target=None, details=None):
        nodes_in = node_count(w_in) if is_word(w_in) else 0
        nodes_out = node_count(w_out)
        if self.node_budget is not None and nodes_out > self.node_budget:
            raise NodeBudgetExceeded(
                "%s produced %d nodes (budget %d)" % (op, nodes_out, self.node_budget)
            )
        attested = 0
        if self.verify:
            goal = target if target is not None else w_in
            if is_word(goal):
                self._assert_equal(w_out, goal, op)
            if cert is not None:
                report = check_shape(w_out, cert, self.congruence_oracle())
                if not report.ok:
                    raise OracleMismatch("%s certificate failed: %s" % (op, report.reason))
                attested = len(report.attested)
        return RewriteReceipt(
            op,
            w_in,
            w_out,
            cert,
            self.verify,
            nodes_in,
            nodes_out,
            attested,
            details or {},
        )

    def _coerce_value(self, value):
        if isinstance(value, IdealElement):
            return value.value
        return self.ring.coerce(value)

    def _require_rank(self):
        if self.rs.rank < 2:
            raise ConditionViolated(
                "rank-one systems leave no roots to avoid; need rank >= 2"
            )

    def _c_like(self):
        return self.rs.label == "C" or (self.rs.label == "B" and self.rs.rank == 2)

    def _require_no_f2(self, why):
        if not self.ring.no_f2_residue():
            raise ConditionViolated(
                "%s over %s: a residue field of two elements blocks %s"
                % (self.rs, self.ring, why)
            )

    # ----- commutator expansion -----

    def expand_commutator(self, beta, gamma, p, q):
        """[x_beta(p), x_gamma(q)] as an explicit product of generators."""
        beta, gamma = tuple(beta), tuple(gamma)
        p, q = self.ring.coerce(p), self.ring.coerce(q)
        w_in = Comm(Gen(beta, p), Gen(gamma, q))
        if gamma == _neg(beta):
            raise OppositeRoots("no expansion for opposite roots %s, %s" % (beta, gamma))
        if beta == gamma:
            out = EMPTY
        else:
            factors = []
            for (i, j), c in self.sc.comm_coeffs(beta, gamma):
                if c == 0:
                    continue
                factors.append(
                    Gen(_vsum(beta, gamma, i, j), self.ring.int_(c) * p**i * q**j)
                )
            out = Prod(tuple(factors))
        return out, self._finish("expand_commutator", w_in, out, ElemShape())

    def _bare_conj(self, gen, peel):
        """x_root(w) conjugated by x_{peel.root}(r) as bare generators.

        Requires peel.root != -gen.root; equal roots commute outright.
        """
        if gen.root == peel.root:
            return [gen]
        out = [gen]
        for (i, j), c in self.sc.comm_coeffs(gen.root, peel.root):
            if c == 0:
                continue
            out.append(
                Gen(
                    _vsum(gen.root, peel.root, i, j),
                    self.ring.int_(c) * gen.arg**i * peel.arg**j,
                )
            )
        return out

    # ----- Hall-Witt -----

    def hall_witt_split(self, f, h, k):
        """[[f,h],k] as two conjugated double commutators.

        The instance of the Hall-Witt identity used here is
        [[f,h],k] = ([[k,f^-1],h^-1]^-1)^(f h) * ([[h^-1,k^-1],f]^-1)^(k h),
        unit-tested as a group identity on random words.
        """
        w_in = Comm(Comm(f, h), k)
        if not free_reduce(w_in).factors:
            out = EMPTY
        else:
            t1 = Conj(Inv(Comm(Comm(k, Inv(f)), Inv(h))), Prod((f, h)))
            t2 = Conj(Inv(Comm(Comm(Inv(h), Inv(k)), f)), Prod((k, h)))
            out = Prod((t1, t2))
        return out, self._finish("hall_witt_split", w_in, out, ElemShape())

    # ----- retraction splitting -----

    def _check_splitting_var(self, var):
        if var not in self.ring.var_names:
            raise NotSplittingIdeal(
                "%r is not a polynomial variable of %s" % (var, self.ring)
            )
        if self.ring.loc_num is not None:
            idx = self.ring.var_names.index(var)
            if any(e[idx] for e in self.ring.loc_num):
                raise NotSplittingIdeal(
                    "the localized element involves %r, so setting it to zero "
                    "is not a ring retraction" % var
                )

    def _retraction(self, var):
        return {
            n: (self.ring.zero() if n == var else self.ring.var(n))
            for n in self.ring.var_names
        }

    def _absolute_split_parts(self, w, mapping):
        """(retract word, tail factors) for the generator-wise retraction."""
        gens = flatten(w)
        retracts = [g.arg.substitute(mapping, self.ring) for g in gens]
        retract_gens = [
            Gen(g.root, r) for g, r in zip(gens, retracts) if not r.is_zero()
        ]
        tail = []
        for i, g in enumerate(gens):
            v = g.arg - retracts[i]
            if v.is_zero():
                continue
            suffix = [
                Gen(gens[m].root, retracts[m])
                for m in range(i + 1, len(gens))
                if not retracts[m].is_zero()
            ]
            piece = Gen(g.root, v)
            tail.append(Conj(piece, Prod(tuple(suffix))) if suffix else piece)
        return Prod(tuple(retract_gens)), tail

    def absolute_split(self, w, var):
        """w = retract * tail with the tail inside the level of (var).

        The retraction sends var to 0; pushing every retract-generator left
        across the rest of the word leaves each var-divisible piece
        conjugated by an ordinary elementary word.
        """
        self._check_splitting_var(var)
        mapping = self._retraction(var)
        retract, tail = self._absolute_split_parts(w, mapping)
        tail_word = Prod(tuple(tail))
        j_spec = IdealSpec.gens(self.ring, self.ring.var(var))
        out = Prod((retract, tail_word))
        receipt = self._finish("absolute_split", w, out, None, details={"var": var})
        cert = LevelShape(j_spec)
        if self.verify:
            report = check_shape(tail_word, cert, self.congruence_oracle())
            if not report.ok:
                raise OracleMismatch("absolute_split tail: %s" % report.reason)
            receipt.attested = len(report.attested)
        receipt.certificate = cert
        return retract, tail_word, receipt

    # ----- decomposition avoiding a root -----

    def _c_long_config(self, alpha):
        """(beta, gamma, delta, N11, N12, c2) with alpha = beta + 2*gamma.

        beta long, gamma and delta = beta + gamma short; the beta/gamma
        string is exactly {(1,1), (1,2)} with |N12| = 1 and the delta/gamma
        string is a single (1,1) with |c2| = 2.
        """
        rs = self.rs
        if rs.num_lengths() != 2 or not rs.is_long(alpha):
            return None
        for gamma in sorted(r for r in rs.roots if rs.is_short(r)):
            beta = _vsum(alpha, gamma, 1, -2)
            if not rs.contains(beta) or not rs.is_long(beta):
                continue
            delta = _vsum(beta, gamma)
            if not rs.contains(delta) or not rs.is_short(delta):
                continue
            bg = [(ij, c) for ij, c in self.sc.comm_coeffs(beta, gamma) if c]
            if len(bg) != 2 or bg[0][0] != (1, 1) or bg[1][0] != (1, 2):
                continue
            if abs(bg[1][1]) != 1:
                continue
            dg = [(ij, c) for ij, c in self.sc.comm_coeffs(delta, gamma) if c]
            if len(dg) != 1 or dg[0][0] != (1, 1) or abs(dg[0][1]) != 2:
                continue
            return beta, gamma, delta, bg[0][1], bg[1][1], dg[0][1]
        return None

    def _y_route_unit(self, beta, gamma, eps, big_x, r):
        """x_alpha(X*r) via [x_beta(X), x_gamma(eps*r)], tail peeled off."""
        er = eps * r
        head = [Gen(beta, -big_x), Conj(Gen(beta, big_x), Gen(gamma, er))]
        tail = []
        for (i, j), c in self.sc.comm_coeffs(beta, gamma):
            if (i, j) == (1, 1) or c == 0:
                continue
            tail.append(
                Gen(_vsum(beta, gamma, i, j), self.ring.int_(c) * big_x**i * er**j)
            )
        return head + [Gen(g.root, -g.arg) for g in reversed(tail)]

    def _y_route_square(self, config, p0, q):
        """x_alpha(p0 * q**2) from the length-two string, no unit needed."""
        beta, gamma, delta, n11, n12, _ = config
        sp = self.ring.int_(n12) * p0
        return [
            Gen(delta, self.ring.int_(-n11 * n12) * p0 * q),
            Gen(beta, -sp),
            Conj(Gen(beta, sp), Gen(gamma, q)),
        ]

    def _y_route_double(self, config, p, q):
        """x_alpha(2*p*q) as a single short-short commutator."""
        _, gamma, delta, _, _, c2 = config
        sigma = 1 if c2 > 0 else -1
        sp = self.ring.int_(sigma) * p
        return [Gen(delta, -sp), Conj(Gen(delta, sp), Gen(gamma, q))]

    def _decompose_factors(self, alpha, value, i_spec, j_spec):
        """Factor list for x_alpha(value) avoiding +-alpha, plus route info."""
        self._require_rank()
        if (self._c_like() and self.rs.rank == 2) or self.rs.label == "G":
            self._require_no_f2("the avoided-root decomposition")
        if value.is_zero():
            return [], "zero"
        ij = i_spec.product(j_spec)
        pair = find_unit_sum_decomposition(self.sc, alpha, self.ring)
        if pair is not None:
            beta, gamma, eps = pair
            fund = ij.product(j_spec)
            wit = fund.witness(value)
            factors = []
            for coeff, tag in wit.combo:
                _, t_ij, t_j = tag
                big_x = coeff * ij.element_for_tag(t_ij)
                r = j_spec.element_for_tag(t_j)
                factors += self._y_route_unit(beta, gamma, eps, big_x, r)
            return factors, "unit-pair"
        config = self._c_long_config(alpha)
        if config is None:
            raise ConditionViolated(
                "no decomposition route for root %s of %s over %s"
                % (alpha, self.rs, self.ring)
            )
        fund = ij.product(j_spec.sym_power(2))
        wit = fund.witness(value)
        factors = []
        for coeff, tag in wit.combo:
            _, t_ij, tb = tag
            p0 = coeff * ij.element_for_tag(t_ij)
            if tb[0] == "sq":
                factors += self._y_route_square(config, p0, j_spec.element_for_tag(tb[1]))
            elif tb[0] == "mx":
                g1 = j_spec.element_for_tag(tb[1])
                g2 = j_spec.element_for_tag(tb[2])
                factors += self._y_route_double(config, p0 * g1, g2)
            else:
                raise OracleMismatch("unexpected witness tag %r" % (tb,))
        return factors, "length-two-string"

    def decompose_avoiding_root(self, alpha, value, i_spec, j_spec):
        """x_alpha(value) as a word that never touches the roots +-alpha.

        value must be witnessed in I*J*J (unit-pair route) or I*J*J^(2)
        (two-length route); the output is certified Y(alpha, J, I*J).
        """
        alpha = tuple(alpha)
        if not self.rs.contains(alpha):
            raise ValueError("%s is not a root of %s" % (alpha, self.rs))
        value = self._coerce_value(value)
        try:
            factors, route = self._decompose_factors(alpha, value, i_spec, j_spec)
        except (NotInIdeal, UndecidableIdealClass) as e:
            raise BudgetExhausted(
                "the level witness cannot fund x_%s(%s): %s" % (alpha, value, e)
            )
        out = Prod(tuple(factors))
        cert = YShape(alpha, j_spec, i_spec.product(j_spec))
        receipt = self._finish(
            "decompose_avoiding_root",
            Gen(alpha, value),
            out,
            cert,
            details={"route": route},
        )
        return out, receipt

    # ----- opposite-root conjugation -----

    def _conj_y_factors(self, f, peel):
        """A Y-factor conjugated by x_{peel.root}(r), still in shape.

        Every root in f avoids +-alpha while peel.root = -alpha, so all the
        Chevalley expansions below are away from opposite pairs and the new
        arguments are multiples of the old ones.
        """
        if isinstance(f, Inv):
            return [inv_word(x) for x in reversed(self._conj_y_factors(f.word, peel))]
        if isinstance(f, Gen):
            return self._bare_conj(f, peel)
        if isinstance(f, Conj):
            base_pieces = self._bare_conj(f.base, peel)
            by_pieces = self._bare_conj(f.by, peel)
            by_word = by_pieces[0] if len(by_pieces) == 1 else Prod(tuple(by_pieces))
            return [Conj(g, by_word) for g in base_pieces]
        raise TypeError("not a Y-shaped factor: %r" % (f,))

    def push_vaserstein_conjugate(self, v, i_spec, j_spec):
        """An opposite-root conjugate of x_alpha(s), rewritten level-J.

        v is x_{-alpha}(-r) x_alpha(s) x_{-alpha}(r); s is decomposed away
        from +-alpha and each factor is conjugated through, which keeps
        bases in I*J and conjugators in J.
        """
        report = check_shape(v, VaserFormShape())
        if not report.ok:
            raise ValueError("not an opposite-root conjugate: %s" % report.reason)
        if isinstance(v, Conj):
            alpha, s, r = v.base.root, v.base.arg, v.by.arg
        else:
            a, b, c = v.factors
            alpha, s, r = b.root, b.arg, c.arg
        y_word, y_receipt = self.decompose_avoiding_root(alpha, s, i_spec, j_spec)
        if r.is_zero():
            out = y_word
        else:
            peel = Gen(_neg(alpha), r)
            factors = []
            for f in (y_word.factors if isinstance(y_word, Prod) else (y_word,)):
                factors += self._conj_y_factors(f, peel)
            out = Prod(tuple(factors))
        cert = RelConjShape(j_spec, i_spec.product(j_spec))
        receipt = self._finish(
            "push_vaserstein_conjugate",
            v,
            out,
            cert,
            details={"route": y_receipt.details["route"]},
        )
        return out, receipt

    # ----- mixed-commutator generation -----

    def _clean_unit_pair(self, alpha):
        """(beta, gamma, eps): beta + gamma = alpha, single-factor string,
        invertible leading coefficient."""
        for beta in sorted(self.rs.roots):
            gamma = _vsum(alpha, beta, 1, -1)
            if (
                not self.rs.contains(gamma)
                or beta == gamma
                or gamma == _neg(beta)
            ):
                continue
            coeffs = [(ij, c) for ij, c in self.sc.comm_coeffs(beta, gamma) if c]
            if len(coeffs) != 1 or coeffs[0][0] != (1, 1):
                continue
            c = coeffs[0][1]
            if self.ring.n_invertible(c):
                return beta, gamma, self.ring.inverse_of_int(c)
        return None

    def _c_short_config(self, alpha):
        """(beta, gamma, alpha2, N11, N12): alpha = beta + gamma with beta
        long, string {(1,1),(1,2)}, correction landing on alpha2 long."""
        rs = self.rs
        if rs.num_lengths() != 2 or not rs.is_short(alpha):
            return None
        for beta in sorted(r for r in rs.roots if rs.is_long(r)):
            gamma = _vsum(alpha, beta, 1, -1)
            if not rs.contains(gamma) or not rs.is_short(gamma):
                continue
            alpha2 = _vsum(alpha, gamma)
            if not rs.contains(alpha2) or not rs.is_long(alpha2):
                continue
            coeffs = [(ij, c) for ij, c in self.sc.comm_coeffs(beta, gamma) if c]
            if len(coeffs) != 2 or coeffs[0][0] != (1, 1) or coeffs[1][0] != (1, 2):
                continue
            if abs(coeffs[0][1]) != 1:
                continue
            return beta, gamma, alpha2, coeffs[0][1], coeffs[1][1]
        return None

    def _defect_difference(self, beta, gamma, n12, p, q, defect_combo, stats):
        """x_alpha(p * q^2), paid for with the idempotent-defect combination.

        With s = N12*a the commutators [x_beta(s*r*p), x_gamma(q)] and
        [x_beta(s*p), x_gamma(r*q)] share their (1,1) component, so the
        inverse of the first times the second is x_alpha(a*(r^2-r)*p*q^2);
        summing over the combination leaves exactly x_alpha(p*q^2).
        """
        out = []
        for a, r in defect_combo:
            s = self.ring.int_(n12) * a
            out.append(Inv(Comm(Gen(beta, s * r * p), Gen(gamma, q))))
            out.append(Comm(Gen(beta, s * p), Gen(gamma, r * q)))
            stats["defect_terms"] += 1
        return out

    def _mixed_gen_factors(self, alpha, value, i_spec, j_spec, stats, depth=0):
        if depth > 2:
            raise ConditionViolated("mixed-commutator recursion did not settle")
        if value.is_zero():
            return []
        c_like_long = self._c_like() and self.rs.is_long(alpha)
        if not c_like_long:
            pair = self._clean_unit_pair(alpha)
            if pair is not None:
                beta, gamma, eps = pair
                wit = i_spec.product(j_spec).witness(value)
                out = []
                for coeff, tag in wit.combo:
                    _, ti, tj = tag
                    p = eps * coeff * i_spec.element_for_tag(ti)
                    q = j_spec.element_for_tag(tj)
                    out.append(Comm(Gen(beta, p), Gen(gamma, q)))
                    stats["plain_terms"] += 1
                return out
        config = self._c_long_config(alpha)
        if config is not None:
            beta, gamma, delta, n11, n12, c2 = config
            sigma = 1 if c2 > 0 else -1
            # only square tags consume the defect combination; fetched on
            # first use so mixed and doubled witnesses work over any ring
            defect_combo = None
            two = IdealSpec.gens(self.ring, 2)
            fund = (
                i_spec.sym_power(2)
                .product(j_spec)
                .sum_with(two.product(i_spec).product(j_spec))
                .sum_with(i_spec.product(j_spec.sym_power(2)))
            )
            wit = fund.witness(value)
            out = []
            for coeff, tag in wit.combo:
                side, sub = tag
                if side == "l" and sub[0] == "l":
                    _, ta, tj = sub[1]
                    v = j_spec.element_for_tag(tj)
                    if ta[0] == "sq":
                        if defect_combo is None:
                            defect_combo = unit_from_idempotent_defect(self.ring)
                        u = i_spec.element_for_tag(ta[1])
                        out += self._defect_difference(
                            beta, gamma, n12, coeff * v, u, defect_combo, stats
                        )
                    else:
                        u1 = i_spec.element_for_tag(ta[1])
                        u2 = i_spec.element_for_tag(ta[2])
                        p = self.ring.int_(sigma) * coeff * u1 * v
                        out.append(Comm(Gen(delta, p), Gen(gamma, u2)))
                        stats["double_terms"] += 1
                elif side == "l":
                    _, tp, tj = sub[1]
                    _, _, ti = tp
                    u = i_spec.element_for_tag(ti)
                    v = j_spec.element_for_tag(tj)
                    p = self.ring.int_(sigma) * coeff * u
                    out.append(Comm(Gen(delta, p), Gen(gamma, v)))
                    stats["double_terms"] += 1
                else:
                    _, ti, tb = sub
                    u = i_spec.element_for_tag(ti)
                    if tb[0] == "sq":
                        if defect_combo is None:
                            defect_combo = unit_from_idempotent_defect(self.ring)
                        v = j_spec.element_for_tag(tb[1])
                        out += self._defect_difference(
                            beta, gamma, n12, coeff * u, v, defect_combo, stats
                        )
                    else:
                        v1 = j_spec.element_for_tag(tb[1])
                        v2 = j_spec.element_for_tag(tb[2])
                        p = self.ring.int_(sigma) * coeff * u * v1
                        out.append(Comm(Gen(delta, p), Gen(gamma, v2)))
                        stats["double_terms"] += 1
            return out
        config = self._c_short_config(alpha)
        if config is not None:
            beta, gamma, alpha2, n11, n12 = config
            wit = i_spec.product(j_spec).witness(value)
            out = []
            for coeff, tag in wit.combo:
                _, ti, tj = tag
                u = i_spec.element_for_tag(ti)
                v = j_spec.element_for_tag(tj)
                p = self.ring.int_(n11) * coeff * u
                out.append(Comm(Gen(beta, p), Gen(gamma, v)))
                stats["plain_terms"] += 1
                correction = self.ring.int_(n12 * n11) * coeff * u * v * v
                out += self._mixed_gen_factors(
                    alpha2, -correction, i_spec, j_spec, stats, depth + 1
                )
            return out
        raise ConditionViolated(
            "no mixed-commutator route for root %s of %s over %s"
            % (alpha, self.rs, self.ring)
        )

    def relative_generation_witness(self, alpha, value, i_spec, j_spec):
        """x_alpha(value) as a product of level-I-by-level-J commutators.

        value must be witnessed in I^(2)*J + 2*I*J + I*J^(2) (long roots of
        the doubly-laced chains consume the idempotent-defect combination)
        or plainly in I*J where a single-factor root string exists.
        """
        alpha = tuple(alpha)
        if not self.rs.contains(alpha):
            raise ValueError("%s is not a root of %s" % (alpha, self.rs))
        self._require_rank()
        value = self._coerce_value(value)
        stats = {"plain_terms": 0, "double_terms": 0, "defect_terms": 0}
        factors = self._mixed_gen_factors(alpha, value, i_spec, j_spec, stats)
        out = Prod(tuple(factors))
        cert = MixedCommShape(i_spec, j_spec)
        receipt = self._finish(
            "relative_generation_witness",
            Gen(alpha, value),
            out,
            cert,
            details=stats,
        )
        return out, receipt

    # ----- conjugation normalization -----

    def _peel_conjugator(self, byword, peel, budget, depth, stats):
        """Conjugate a level-J conjugator word by one generator.

        Flat arguments stay inside the conjugator ideal: ordinary pieces
        expand with arguments that are multiples of their own, and blocked
        pieces are re-decomposed one budget level deeper.
        """
        out = []
        pieces = byword.factors if isinstance(byword, Prod) else (byword,)
        for f in pieces:
            if isinstance(f, Gen):
                if f.root == _neg(peel.root):
                    out += self._blocked_pieces(f, peel, budget, depth, stats)
                else:
                    out += self._bare_conj(f, peel)
            elif isinstance(f, Conj):
                base_pieces = self._peel_conjugator(f.base, peel, budget, depth, stats)
                by_pieces = self._peel_conjugator(f.by, peel, budget, depth, stats)
                by_word = Prod(tuple(by_pieces))
                out += [_conj_factor(g, by_word) for g in base_pieces]
            elif isinstance(f, Inv):
                inner = self._peel_conjugator(f.word, peel, budget, depth, stats)
                out += [inv_word(x) for x in reversed(inner)]
            else:
                raise TypeError("conjugator piece %r is not peelable" % (f,))
        return out

    def _blocked_pieces(self, gen, peel, budget, depth, stats):
        """x_delta(w) ** x_{-delta}(r) through a funded decomposition."""
        level = budget.fund(depth) if budget is not None else None
        if level is None:
            if budget is not None and budget.allow_attest:
                stats["attest_falls"] += 1
                return [Conj(gen, peel)]
            raise BudgetExhausted(
                "conjugation by the opposite root of %s at depth %d has no "
                "funding level" % (gen.root, depth)
            )
        i2, j2 = level
        try:
            factors, route = self._decompose_factors(gen.root, gen.arg, i2, j2)
        except (NotInIdeal, UndecidableIdealClass) as e:
            if budget.allow_attest:
                stats["attest_falls"] += 1
                return [Conj(gen, peel)]
            raise BudgetExhausted(
                "the depth-%d level witness cannot fund x_%s(%s): %s"
                % (depth, gen.root, gen.arg, e)
            )
        budget.charge(depth, gen.root, gen.arg, route)
        stats["decompositions"] += 1
        out = []
        for f in factors:
            out += self._conj_y_factors(f, peel)
        return out

    def conjugation_normalize(self, g, level_spec, budget=None):
        """Peel the conjugator of Conj(Gen(alpha, a), c) one generator at a time.

        Peels on roots other than -alpha are plain Chevalley expansions and
        keep every argument a multiple of an existing one; a peel on -alpha
        consumes one budget level to decompose the blocked argument away
        from +-alpha first.  With no budget events the output stays level
        `level_spec`; otherwise it is certified with level-J conjugators.
        """
        if isinstance(g, Gen):
            base, peels = g, ()
        elif isinstance(g, Conj) and isinstance(g.base, Gen):
            base, peels = g.base, flatten(g.by)
        else:
            raise TypeError("conjugation_normalize needs Conj(Gen(...), word)")
        stats = {"decompositions": 0, "attest_falls": 0}
        state = [("gen", base, 0)]
        for peel in peels:
            new_state = []
            for kind, f, depth in state:
                if kind == "gen":
                    if f.root == _neg(peel.root):
                        for piece in self._blocked_pieces(f, peel, budget, depth, stats):
                            if isinstance(piece, Gen):
                                new_state.append(("gen", piece, depth + 1))
                            else:
                                new_state.append(("rel", piece, depth + 1))
                    else:
                        for piece in self._bare_conj(f, peel):
                            new_state.append(("gen", piece, depth))
                elif kind == "rel":
                    inner, by = f.base, f.by
                    if inner.root == _neg(peel.root):
                        pieces = self._blocked_pieces(inner, peel, budget, depth, stats)
                    else:
                        pieces = self._bare_conj(inner, peel)
                    by2 = Prod(tuple(self._peel_conjugator(by, peel, budget, depth, stats)))
                    for piece in pieces:
                        new_state.append(("rel", _conj_factor(piece, by2), depth))
            state = new_state
        out = Prod(tuple(f for _, f, _ in state))
        spent = stats["decompositions"] + stats["attest_falls"]
        if spent and budget is not None and budget.levels:
            i0, j0 = budget.levels[0]
            cert = RelConjShape(j0, i0.product(j0))
        elif spent:
            cert = RelConjShape(None, level_spec)
        else:
            cert = LevelShape(level_spec)
        receipt = self._finish(
            "conjugation_normalize",
            g,
            out,
            cert,
            details=dict(stats, budget=budget.trace() if budget else ()),
        )
        return out, receipt

    # ----- relative splitting -----

    def _rel_factor_list(self, w, outer=None):
        """Normalize a relative word to [(generator, conjugator-or-None)]."""
        if isinstance(w, Gen):
            return [(w, outer)]
        if isinstance(w, Inv):
            inner = self._rel_factor_list(w.word, outer)
            return [(Gen(g.root, -g.arg), by) for g, by in reversed(inner)]
        if isinstance(w, Prod):
            out = []
            for f in w.factors:
                out += self._rel_factor_list(f, outer)
            return out
        if isinstance(w, Conj):
            merged = w.by if outer is None else Prod((w.by, outer))
            return self._rel_factor_list(w.base, merged)
        if isinstance(w, Comm):
            expanded = Prod((Inv(w.left), Conj(w.left, w.right)))
            return self._rel_factor_list(expanded, outer)
        raise TypeError("not a word: %r" % (w,))

    def relative_split(self, w, i_spec, var):
        """Split a level-I word living in the congruence group of (var).

        Each argument a splits as a = a(var=0) + rest; each conjugator b
        splits as b = c * d with c over the retract.  The variable-free
        parts x(u)^c collect on the right and must evaluate to the
        identity; what remains is mixed commutators [d, g^-1] plus factors
        at level I*(var).
        """
        self._check_splitting_var(var)
        for g in i_spec.expand():
            if var in g.vars_used():
                raise NotExtendedIdeal(
                    "generator %s of %s involves %r" % (g, i_spec.describe(), var)
                )
        j_spec = IdealSpec.gens(self.ring, self.ring.var(var))
        if self.verify:
            for rep in self.reps:
                if not congruence_check(rep.evaluate_word(w, self.ring), j_spec):
                    raise CongruenceFailed(
                        "the word is not congruent to the identity mod (%s)" % var
                    )
        mapping = self._retraction(var)
        out_factors = []
        prefix = []
        for gen, byword in self._rel_factor_list(w):
            u = gen.arg.substitute(mapping, self.ring)
            v = gen.arg - u
            if byword is None:
                c_word, d_factors = EMPTY, []
            else:
                c_word, d_factors = self._absolute_split_parts(byword, mapping)
            d_word = Prod(tuple(d_factors))
            g_word = None
            if not u.is_zero():
                g_word = Gen(gen.root, u)
                if c_word.factors:
                    g_word = Conj(g_word, c_word)
            p_word = Prod(tuple(prefix))
            if g_word is not None and d_word.factors:
                piece = Comm(d_word, Inv(g_word))
                if prefix:
                    piece = Conj(piece, Inv(p_word))
                out_factors.append(piece)
            if g_word is not None:
                prefix.append(g_word)
                p_word = Prod(tuple(prefix))
            if not v.is_zero():
                piece = Gen(gen.root, v)
                if byword is not None:
                    piece = Conj(piece, byword)
                if prefix:
                    piece = _conj_factor(piece, Inv(p_word))
                out_factors.append(piece)
        if self.verify and prefix:
            discard = Prod(tuple(prefix))
            for rep in self.reps:
                if not rep.words_equal(discard, EMPTY, self.ring):
                    raise CongruenceFailed(
                        "the variable-free remainder does not evaluate to the identity"
                    )
        out = Prod(tuple(out_factors))
        cert = BarShape(i_spec, j_spec)
        receipt = self._finish("relative_split", w, out, cert, details={"var": var})
        return out, receipt

    # ----- moving the indeterminate -----

    def _hw_pieces(self, comm_f, comm_h, v):
        """[[f,h],v] split into two conjugated double commutators.

        Same instance as hall_witt_split, with each inverted core rewritten
        [a,b]^-1 = [b,a] so the commutator reads generation side first.
        """
        core1 = Comm(Inv(comm_h), Comm(v, Inv(comm_f)))
        core2 = Comm(comm_f, Comm(Inv(comm_h), Inv(v)))
        return [
            Conj(core1, Prod((comm_f, comm_h))),
            Conj(core2, Prod((v, comm_h))),
        ]

    def _comm_with_product(self, pieces, v):
        """[D_1 ... D_n, v] via [ab,c] = [a,c]^b [b,c], recursively."""
        if not pieces:
            return []
        if len(pieces) == 1:
            return self._comm_single(pieces[0], v)
        head, rest = pieces[0], pieces[1:]
        rest_word = Prod(tuple(rest))
        out = [
            _conj_factor(p, rest_word) for p in self._comm_single(head, v)
        ]
        return out + self._comm_with_product(rest, v)

    def _comm_single(self, piece, v):
        """[C^b, v] = [C, v^(b^-1)]^b for one generation commutator C^b."""
        if isinstance(piece, Conj):
            core, by = piece.base, piece.by
            v_in = Conj(v, Inv(by))
            return [_conj_factor(p, by) for p in self._comm_single_core(core, v_in)]
        return self._comm_single_core(piece, v)

    def _comm_single_core(self, core, v):
        if not isinstance(core, Comm):
            raise TypeError("expected a commutator core, got %r" % (core,))
        return self._hw_pieces(core.left, core.right, v)

    def move_indeterminate(self, w, j_spec, k_spec, i_spec=None):
        """Split a two-level word into a plain level part and mixed commutators.

        Input factors are either level factors at I*J*J^(2)*K, which route
        unchanged into the level part at I*J*K, or commutators of a level
        I*J*J^(2) word against a level-K word.  The left side of each
        commutator is re-generated as commutators [level I*J, level J] and
        Hall-Witt splitting moves the K-side inside, leaving factors whose
        sides sit at levels I*J and K*J.
        """
        if i_spec is None:
            i_spec = IdealSpec.gens(self.ring, 1)
        ij = i_spec.product(j_spec)
        kj = k_spec.product(j_spec)
        ijk = ij.product(k_spec)
        level_acc = []
        mixed_acc = []
        stats = {"level_factors": 0, "comm_factors": 0, "witness_terms": 0}
        for f in (w.factors if isinstance(w, Prod) else (w,)):
            un = f
            invert = False
            conj_by = None
            while isinstance(un, (Inv, Conj)):
                if isinstance(un, Inv):
                    invert = not invert
                    un = un.word
                else:
                    conj_by = un.by if conj_by is None else Prod((un.by, conj_by))
                    un = un.base
            if isinstance(un, Comm):
                pieces = self._split_mixed_factor(un, j_spec, k_spec, i_spec, stats)
                if invert:
                    pieces = _inv_factors(pieces)
                if conj_by is not None:
                    pieces = [_conj_factor(p, conj_by) for p in pieces]
                mixed_acc += pieces
                stats["comm_factors"] += 1
            else:
                # moving the level factor left across the mixed ones
                mixed_acc = [_conj_factor(m, f) for m in mixed_acc]
                level_acc.append(f)
                stats["level_factors"] += 1
        level_word = Prod(tuple(level_acc))
        mixed_word = Prod(tuple(mixed_acc))
        out = Prod((level_word, mixed_word))
        receipt = self._finish(
            "move_indeterminate",
            w,
            out,
            None,
            details=stats,
        )
        if self.verify:
            oracle = self.congruence_oracle()
            rep_l = check_shape(level_word, LevelShape(ijk), oracle)
            if not rep_l.ok:
                raise OracleMismatch("level part: %s" % rep_l.reason)
            rep_m = check_shape(mixed_word, MixedCommShape(ij, kj), oracle)
            if not rep_m.ok:
                raise OracleMismatch("mixed part: %s" % rep_m.reason)
            receipt.attested = len(rep_l.attested) + len(rep_m.attested)
            receipt.certificate = (LevelShape(ijk), MixedCommShape(ij, kj))
        return level_word, mixed_word, receipt

    def _split_mixed_factor(self, comm, j_spec, k_spec, i_spec, stats):
        """One [level I*J*J^(2), level K] commutator into E_{IJ,KJ} pieces."""
        left, right = comm.left, comm.right
        probe = i_spec.product(j_spec).product(j_spec.sym_power(2))
        if not _match_rel_like(left, probe).ok:
            if not _match_rel_like(right, probe).ok:
                raise ValueError(
                    "neither commutator side is a level word at %s" % probe.describe()
                )
            # commutator written K-side first; flip and invert
            pieces = self._split_mixed_factor(Comm(right, left), j_spec, k_spec, i_spec, stats)
            return _inv_factors(pieces)
        ij = i_spec.product(j_spec)
        generated = []
        for gen, byword in self._rel_factor_list(left):
            sub_stats = {"plain_terms": 0, "double_terms": 0, "defect_terms": 0}
            for piece in self._mixed_gen_factors(gen.root, gen.arg, ij, j_spec, sub_stats):
                generated.append(_conj_factor(piece, byword) if byword else piece)
            stats["witness_terms"] += sum(sub_stats.values())
        return self._comm_with_product(generated, right)

    # ----- sampled congruence probe -----

    def check_commutator_level(self, g, h, ij_spec):
        """Does [g, h] lie in the congruence group of I*J?

        g and h are words; the commutator is evaluated in every configured
        representation and compared against the identity modulo the ideal.
        """
        comm = Comm(g, h)
        for rep in self.reps:
            if not congruence_check(rep.evaluate_word(comm, self.ring), ij_spec):
                return False
        return True
