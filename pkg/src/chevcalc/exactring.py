"""Exact commutative rings for word rewriting.

The rings supported here are multivariate polynomial rings over Z or Z/m,
optionally localized at a single element s (denominators are powers of s),
optionally with affine alias variables such as simplex coordinates that
expand to a polynomial in the true variables.

Equality in a localized ring is torsion aware: a/s^j = b/s^k holds exactly
when s^T * (a*s^k - b*s^j) vanishes in the underlying polynomial ring,
where T is a precomputed annihilator stabilization bound.

The ideal layer carries witnesses.  Membership tests never guess: they
answer True or False only for generator classes where the test is complete
(single-term generator sets, principal ideals with well-behaved leading
terms) and raise UndecidableIdealClass otherwise.
"""

import math
import re

from .errors import (
    NotInIdeal,
    OracleMismatch,
    ParseError,
    SubstitutionMismatch,
    UndecidableIdealClass,
    UnsupportedRing,
)

_VAR_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")

_MAX_S_POWER_SEARCH = 64


def _xgcd(a, b):
    """Return (g, x, y) with a*x + b*y = g = gcd(a, b), g >= 0."""
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_x, x = x, old_x - q * x
        old_y, y = y, old_y - q * y
    if old_r < 0:
        old_r, old_x, old_y = -old_r, -old_x, -old_y
    return old_r, old_x, old_y


def _combo_xgcd(values):
    """Return (g, coeffs) with sum(c*v) = g = gcd(values), g >= 0."""
    g = 0
    coeffs = []
    for v in values:
        g2, x, y = _xgcd(g, v)
        coeffs = [c * x for c in coeffs]
        coeffs.append(y)
        g = g2
    return g, coeffs


def _prime_factors(n):
    """Return {p: multiplicity} for |n|, n not in (0, 1, -1)."""
    n = abs(n)
    out = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _strip_primes(c, primes):
    """Divide out of c every factor whose prime lies in `primes`.

    Returns (stripped, removed) with c = stripped * removed and
    gcd(stripped, p) = 1 for all p in primes.
    """
    if c == 0:
        return 0, 1
    removed = 1
    for p in primes:
        while c % p == 0:
            c //= p
            removed *= p
    return c, removed


def _poly_mul(a, b, mod):
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            c = out.get(e, 0) + ca * cb
            if mod:
                c %= mod
            if c:
                out[e] = c
            elif e in out:
                del out[e]
    return out


def _poly_scale(a, c, mod):
    out = {}
    for e, ca in a.items():
        v = ca * c
        if mod:
            v %= mod
        if v:
            out[e] = v
    return out


def _poly_add(a, b, mod, sign=1):
    out = dict(a)
    for e, c in b.items():
        v = out.get(e, 0) + sign * c
        if mod:
            v %= mod
        if v:
            out[e] = v
        elif e in out:
            del out[e]
    return out


def _lead_term(num):
    """Leading term under graded lex (total degree first, then exponents)."""
    e = max(num, key=lambda t: (sum(t), t))
    return e, num[e]


def _poly_divide(a, b, mod):
    """Exact division a / b, or None when no exact quotient is found.

    Complete over Z (a domain with a multiplicative leading term) and over
    Z/m when the divisor's leading coefficient is a unit.
    """
    if not b:
        return None
    if not a:
        return {}
    eb, cb = _lead_term(b)
    if mod:
        if math.gcd(cb, mod) != 1:
            return None
        cb_inv = pow(cb, -1, mod)
    rem = dict(a)
    quot = {}
    while rem:
        ea, ca = _lead_term(rem)
        eq = tuple(x - y for x, y in zip(ea, eb))
        if any(x < 0 for x in eq):
            return None
        if mod:
            cq = (ca * cb_inv) % mod
        else:
            if ca % cb:
                return None
            cq = ca // cb
        quot[eq] = cq
        rem = _poly_add(rem, _poly_mul({eq: cq}, b, mod), mod, sign=-1)
    return quot


def _format_poly(num, var_names):
    if not num:
        return "0"
    terms = []
    for e in sorted(num, key=lambda t: (sum(t), t), reverse=True):
        c = num[e]
        parts = []
        for name, k in zip(var_names, e):
            if k == 1:
                parts.append(name)
            elif k > 1:
                parts.append("%s^%d" % (name, k))
        if not parts:
            body = str(abs(c))
        else:
            body = "*".join(parts)
            if abs(c) != 1:
                body = "%d*%s" % (abs(c), body)
        terms.append(("-" if c < 0 else "+", body))
    sign, body = terms[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in terms[1:]:
        out += " %s %s" % (sign, body)
    return out


class Ring:
    """A polynomial ring over Z or Z/m with optional localization and aliases.

    Instances are immutable.  Two rings with the same parameters compare
    equal and their elements interoperate.
    """

    def __init__(self, base_mod=0, var_names=(), loc_num=None, alias=None):
        if base_mod < 0 or base_mod == 1:
            raise UnsupportedRing("base modulus must be 0 (for Z) or >= 2")
        self.base_mod = base_mod
        self.var_names = tuple(var_names)
        for name in self.var_names:
            self._check_var_name(name)
        if len(set(self.var_names)) != len(self.var_names):
            raise UnsupportedRing("duplicate variable names")
        # loc_num: monomial dict of the localization element, in true vars
        self.loc_num = None if loc_num is None else dict(loc_num)
        if self.loc_num is not None and not self.loc_num:
            raise UnsupportedRing("cannot localize at zero")
        # alias: name -> monomial dict over the true vars
        self.alias = {} if alias is None else {k: dict(v) for k, v in alias.items()}
        for name in self.alias:
            self._check_var_name(name)
            if name in self.var_names:
                raise UnsupportedRing("alias name clashes with a variable")
        self._key = (
            self.base_mod,
            self.var_names,
            None if self.loc_num is None else tuple(sorted(self.loc_num.items())),
            tuple(sorted((k, tuple(sorted(v.items()))) for k, v in self.alias.items())),
        )

    @staticmethod
    def _check_var_name(name):
        if name == "s" or not _VAR_RE.match(name):
            raise UnsupportedRing("bad variable name %r ('s' is reserved)" % (name,))

    @classmethod
    def integers(cls):
        return cls(0, ())

    @classmethod
    def integers_mod(cls, m):
        if m < 2:
            raise UnsupportedRing("modulus must be >= 2")
        return cls(m, ())

    def __eq__(self, other):
        return isinstance(other, Ring) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __str__(self):
        base = "Z" if self.base_mod == 0 else "Z/%d" % self.base_mod
        out = base
        if self.var_names:
            out += "[" + ",".join(self.var_names) + "]"
        if self.loc_num is not None:
            out += "[1/(%s)]" % _format_poly(self.loc_num, self.var_names)
        for name in sorted(self.alias):
            out += " {%s=%s}" % (name, _format_poly(self.alias[name], self.var_names))
        return out

    __repr__ = __str__

    # ----- construction of derived rings -----

    def extend(self, *names):
        """Adjoin new polynomial variables."""
        for name in names:
            if name in self.var_names or name in self.alias:
                raise UnsupportedRing("variable %r already present" % (name,))
        pad = (0,) * len(names)
        loc = None
        if self.loc_num is not None:
            loc = {e + pad: c for e, c in self.loc_num.items()}
        alias = {k: {e + pad: c for e, c in v.items()} for k, v in self.alias.items()}
        return Ring(self.base_mod, self.var_names + tuple(names), loc, alias)

    def localize_at(self, s):
        """Return the localization of this ring at s (an int or an element)."""
        if self.loc_num is not None:
            raise UnsupportedRing("already localized; build from the base ring")
        if isinstance(s, int):
            s = self.int_(s)
        if s.ring != self or s.den != 0:
            raise UnsupportedRing("localization element must be denominator free")
        if not s.num:
            raise UnsupportedRing("cannot localize at zero")
        return Ring(self.base_mod, self.var_names, dict(s.num), self.alias)

    def delocalized(self):
        """The same polynomial ring without the localization."""
        return Ring(self.base_mod, self.var_names, None, self.alias)

    def with_simplex(self, names):
        """Adjoin simplex coordinates: all of `names`, summing to 1.

        The last name becomes an alias for 1 - (sum of the others), so the
        true variables are names[:-1].
        """
        names = tuple(names)
        if len(names) < 2:
            raise UnsupportedRing("a simplex needs at least two coordinates")
        grown = self.extend(*names[:-1])
        n = len(grown.var_names)
        last = {(0,) * n: 1}
        for i in range(n - (len(names) - 1), n):
            e = [0] * n
            e[i] = 1
            last[tuple(e)] = -1
        alias = dict(grown.alias)
        alias[names[-1]] = last
        return Ring(grown.base_mod, grown.var_names, grown.loc_num, alias)

    # ----- element constructors -----

    def _reduce(self, c):
        return c % self.base_mod if self.base_mod else c

    def _make(self, num, den):
        """Normalize and wrap raw (num, den) data."""
        clean = {}
        for e, c in num.items():
            c = self._reduce(c)
            if c:
                clean[e] = c
        if not clean:
            den = 0
        elif den and self.base_mod == 0:
            # Z[vars] is a domain, so dividing out s is canonical.
            while den:
                q = _poly_divide(clean, self.loc_num, 0)
                if q is None:
                    break
                clean = q
                den -= 1
        return RingElement(self, clean, den)

    def zero(self):
        return RingElement(self, {}, 0)

    def one(self):
        return self.int_(1)

    def int_(self, n):
        c = self._reduce(n)
        if not c:
            return self.zero()
        return RingElement(self, {(0,) * len(self.var_names): c}, 0)

    def var(self, name):
        if name in self.alias:
            return self._make(dict(self.alias[name]), 0)
        try:
            i = self.var_names.index(name)
        except ValueError:
            raise UnsupportedRing("no variable %r in %s" % (name, self)) from None
        e = [0] * len(self.var_names)
        e[i] = 1
        return RingElement(self, {tuple(e): 1}, 0)

    def loc_element(self):
        """The localization element s, as an element of this ring."""
        if self.loc_num is None:
            raise UnsupportedRing("ring is not localized")
        return self._make(dict(self.loc_num), 0)

    def s_power(self, k):
        """The element 1/s^k."""
        if k < 0:
            raise ValueError("negative power of 1/s")
        if k == 0:
            return self.one()
        if self.loc_num is None:
            raise UnsupportedRing("ring is not localized")
        return self._make({(0,) * len(self.var_names): 1}, k)

    def coerce(self, x):
        if isinstance(x, RingElement):
            if x.ring != self:
                raise SubstitutionMismatch("element of %s used in %s" % (x.ring, self))
            return x
        if isinstance(x, int):
            return self.int_(x)
        raise TypeError("cannot coerce %r" % (x,))

    # ----- equality and torsion -----

    def torsion_bound(self):
        """Smallest safe T with ann(s^T) = ann(s^inf) in the polynomial ring.

        Over a Z base the polynomial ring is a domain, so T = 0.  Over Z/m
        the bound is computed from prime multiplicities and requires the
        localization element to be an integer constant.
        """
        if self.loc_num is None or self.base_mod == 0:
            return 0
        s = self._as_int_constant(self.loc_num)
        if s is None:
            raise UnsupportedRing(
                "torsion bound needs an integer localization element over Z/m"
            )
        t = 0
        for p, a in _prime_factors(self.base_mod).items():
            v = 0
            ss = abs(s)
            while ss and ss % p == 0:
                ss //= p
                v += 1
            if v:
                t = max(t, -(-a // v))
        return t

    def _as_int_constant(self, num):
        if not num:
            return 0
        if len(num) == 1:
            ((e, c),) = num.items()
            if not any(e):
                return c
        return None

    def elements_equal(self, a, b):
        a = self.coerce(a)
        b = self.coerce(b)
        return (a - b).is_zero()

    # ----- capability queries -----

    def _s_content_primes(self):
        """Primes that become invertible integers once s is inverted."""
        if self.loc_num is None:
            return set()
        content = 0
        for c in self.loc_num.values():
            content = math.gcd(content, c)
        if content in (0, 1):
            return set()
        return set(_prime_factors(content))

    def n_invertible(self, n):
        """Is the integer n a unit of this ring?"""
        if n == 0:
            return False
        if abs(n) == 1:
            return True
        if self.base_mod:
            g = math.gcd(n, self.base_mod)
            if g == 1:
                return True
            return set(_prime_factors(g)) <= self._s_content_primes()
        return set(_prime_factors(n)) <= self._s_content_primes()

    def inverse_of_int(self, n):
        """Return the element 1/n, or raise UnsupportedRing."""
        if not self.n_invertible(n):
            raise UnsupportedRing("%d is not invertible in %s" % (n, self))
        if self.base_mod == 0 and abs(n) == 1:
            return self.int_(n)
        if self.base_mod and math.gcd(n, self.base_mod) == 1:
            return self.int_(pow(n, -1, self.base_mod))
        # n is inverted through powers of s, whose content absorbs n.
        m = self.base_mod
        sk = dict(self.loc_num)
        for k in range(1, _MAX_S_POWER_SEARCH + 1):
            q = {}
            ok = True
            for e, c in sk.items():
                if m:
                    g = math.gcd(n, m)
                    if c % g:
                        ok = False
                        break
                    mg = m // g
                    q[e] = (c // g) * (pow((n // g) % mg, -1, mg) if mg > 1 else 0)
                else:
                    if c % n:
                        ok = False
                        break
                    q[e] = c // n
            if ok:
                return self._make(q, k)
            sk = _poly_mul(sk, self.loc_num, m)
        raise UnsupportedRing("no power of s absorbs %d" % n)

    def no_f2_residue(self):
        """True when no quotient of this ring by a maximal ideal is F2."""
        if self.base_mod and self.base_mod % 2:
            return True
        if self.n_invertible(2):
            return True
        if self.loc_num is None:
            return False
        # Residue fields F2 correspond to evaluations of the variables at
        # points of F2 composed with reduction mod 2; such a quotient
        # survives the localization exactly when s is nonzero at the point.
        n = len(self.var_names)
        for mask in range(1 << n):
            val = 0
            for e, c in self.loc_num.items():
                term = c % 2
                for i, ei in enumerate(e):
                    if ei and not (mask >> i) & 1:
                        term = 0
                        break
                val ^= term
            if val:
                return False
        return True

    def invert_s_smooth_term(self, c, exps=None):
        """Return 1/(c * x^exps) when c * x^exps divides a power of s."""
        n = len(self.var_names)
        exps = tuple(exps) if exps is not None else (0,) * n
        if c == 0:
            raise UnsupportedRing("cannot invert zero")
        if abs(c) == 1 and not any(exps):
            return self.int_(c)
        if self.loc_num is None:
            raise UnsupportedRing("ring is not localized")
        s_term = self._single_term(self.loc_num)
        if s_term is None:
            raise UnsupportedRing("localization element is not a single term")
        cs, es = s_term
        for k in range(1, _MAX_S_POWER_SEARCH + 1):
            if any(k * esi < xi for esi, xi in zip(es, exps)):
                continue
            csk = cs**k
            if self.base_mod:
                g = math.gcd(c, self.base_mod)
                if csk % g:
                    continue
                mg = self.base_mod // g
                q = (csk // g) * (pow((c // g) % mg, -1, mg) if mg > 1 else 0)
            else:
                if csk % c:
                    continue
                q = csk // c
            e = tuple(k * esi - xi for esi, xi in zip(es, exps))
            return self._make({e: q}, k)
        raise UnsupportedRing("term does not divide any power of s")

    @staticmethod
    def _single_term(num):
        if len(num) != 1:
            return None
        ((e, c),) = num.items()
        return c, e

    # ----- serialization -----

    def parse(self, text):
        """Parse a polynomial expression, optionally followed by /s^k."""
        text = text.strip()
        den = 0
        m = re.search(r"/\s*s(\^(\d+))?\s*\Z", text)
        if m:
            den = int(m.group(2)) if m.group(2) else 1
            text = text[: m.start()].strip()
            if self.loc_num is None:
                raise ParseError("denominator in a ring without localization")
        el = _PolyParser(self, text).parse()
        if den:
            el = self._make(dict(el.num), el.den + den)
        return el

    def to_config(self):
        cfg = {"base_mod": self.base_mod, "vars": list(self.var_names)}
        if self.loc_num is not None:
            cfg["loc"] = _format_poly(self.loc_num, self.var_names)
        if self.alias:
            cfg["alias"] = {
                k: _format_poly(v, self.var_names) for k, v in self.alias.items()
            }
        return cfg

    @classmethod
    def from_config(cls, cfg):
        ring = cls(cfg.get("base_mod", 0), tuple(cfg.get("vars", ())))
        for name, text in cfg.get("alias", {}).items():
            expansion = ring.parse(text)
            alias = dict(ring.alias)
            alias[name] = dict(expansion.num)
            ring = Ring(ring.base_mod, ring.var_names, ring.loc_num, alias)
        if "loc" in cfg:
            ring = ring.localize_at(ring.parse(cfg["loc"]))
        return ring


class _PolyParser:
    """Recursive descent parser for +, -, *, ^, parentheses, ints, vars."""

    _TOKEN = re.compile(r"\s*(\d+|[A-Za-z][A-Za-z0-9_]*|[()+\-*^])")

    def __init__(self, ring, text):
        self.ring = ring
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = self._TOKEN.match(text, pos)
            if not m:
                if text[pos:].strip() == "":
                    break
                raise ParseError("bad character at %r" % text[pos:])
            self.tokens.append(m.group(1))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def parse(self):
        el = self.expr()
        if self.peek() is not None:
            raise ParseError("trailing tokens: %r" % self.tokens[self.i :])
        return el

    def expr(self):
        sign = 1
        while self.peek() in ("+", "-"):
            if self.take() == "-":
                sign = -sign
        el = self.term() * sign
        while self.peek() in ("+", "-"):
            op = self.take()
            rhs = self.term()
            el = el + rhs if op == "+" else el - rhs
        return el

    def term(self):
        el = self.power()
        while self.peek() == "*":
            self.take()
            el = el * self.power()
        return el

    def power(self):
        el = self.atom()
        if self.peek() == "^":
            self.take()
            tok = self.take()
            if tok is None or not tok.isdigit():
                raise ParseError("exponent must be a literal integer")
            el = el ** int(tok)
        return el

    def atom(self):
        tok = self.take()
        if tok is None:
            raise ParseError("unexpected end of input")
        if tok == "(":
            el = self.expr()
            if self.take() != ")":
                raise ParseError("missing closing parenthesis")
            return el
        if tok == "-":
            return -self.atom()
        if tok.isdigit():
            return self.ring.int_(int(tok))
        if tok in ("+", "*", "^", ")"):
            raise ParseError("unexpected %r" % tok)
        return self.ring.var(tok)


class RingElement:
    """A fraction num / s^den with num a polynomial over the base."""

    __slots__ = ("ring", "num", "den")

    def __init__(self, ring, num, den):
        self.ring = ring
        self.num = num
        self.den = den

    # ----- basic predicates -----

    def is_zero(self):
        if not self.num:
            return True
        if self.ring.base_mod == 0:
            return False
        if self.ring.loc_num is None:
            return False
        t = self.ring.torsion_bound()
        if t == 0:
            return False
        work = dict(self.num)
        for _ in range(t):
            work = _poly_mul(work, self.ring.loc_num, self.ring.base_mod)
        return not work

    def __bool__(self):
        return not self.is_zero()

    def is_int_constant(self):
        """Return the integer value when this is a constant with den = 0."""
        if self.den:
            return None
        if not self.num:
            return 0
        return self.ring._as_int_constant(self.num)

    def vars_used(self):
        used = set()
        for e in self.num:
            for name, k in zip(self.ring.var_names, e):
                if k:
                    used.add(name)
        return used

    def total_degree(self):
        return max((sum(e) for e in self.num), default=0)

    # ----- arithmetic -----

    def _coerce(self, other):
        if isinstance(other, RingElement):
            if other.ring != self.ring:
                raise SubstitutionMismatch(
                    "mixing elements of %s and %s" % (self.ring, other.ring)
                )
            return other
        if isinstance(other, int):
            return self.ring.int_(other)
        return None

    def _common(self, other):
        """Bring self and other over a common denominator power."""
        if self.den == other.den:
            return self.num, other.num, self.den
        lo, hi = (self, other) if self.den < other.den else (other, self)
        num = dict(lo.num)
        for _ in range(hi.den - lo.den):
            num = _poly_mul(num, self.ring.loc_num, self.ring.base_mod)
        if lo is self:
            return num, hi.num, hi.den
        return hi.num, num, hi.den

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        a, b, den = self._common(other)
        return self.ring._make(_poly_add(a, b, self.ring.base_mod), den)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        a, b, den = self._common(other)
        return self.ring._make(_poly_add(a, b, self.ring.base_mod, sign=-1), den)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other - self

    def __neg__(self):
        return self.ring._make(_poly_scale(self.num, -1, self.ring.base_mod), self.den)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self.ring._make(
            _poly_mul(self.num, other.num, self.ring.base_mod), self.den + other.den
        )

    __rmul__ = __mul__

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers")
        out = self.ring.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def __eq__(self, other):
        if isinstance(other, int):
            other = self.ring.int_(other)
        if not isinstance(other, RingElement) or other.ring != self.ring:
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        if self.ring.base_mod == 0 or self.den == 0:
            return hash((self.ring, tuple(sorted(self.num.items())), self.den))
        return hash(self.ring)

    # ----- division and substitution -----

    def divide_exact(self, d):
        """Return q with q * d = self, or None when no exact quotient exists."""
        d = self._coerce(d)
        if d is None:
            raise TypeError("bad divisor")
        if not d.num:
            return None
        q = _poly_divide(self.num, d.num, self.ring.base_mod)
        if q is None:
            return None
        den = self.den - d.den
        if den < 0:
            for _ in range(-den):
                q = _poly_mul(q, self.ring.loc_num, self.ring.base_mod)
            den = 0
        return self.ring._make(q, den)

    def substitute(self, mapping, target):
        """Map variables through `mapping` into `target`.

        Every variable appearing in the element (and in s, when this element
        carries a denominator) must be covered.  The base change Z -> Z/m or
        Z/m -> Z/m' with m' | m is applied to coefficients.  Denominators are
        resolved by exact division, by matching the target localization, or
        by inverting an integer image of s, in that order.
        """
        if self.ring.base_mod:
            if target.base_mod == 0 or self.ring.base_mod % target.base_mod:
                raise SubstitutionMismatch(
                    "no ring map from base Z/%d into %s" % (self.ring.base_mod, target)
                )
        needed = set(self.vars_used())
        if self.den:
            for e in self.ring.loc_num:
                for name, k in zip(self.ring.var_names, e):
                    if k:
                        needed.add(name)
        for name in mapping:
            if name not in self.ring.var_names and name not in self.ring.alias:
                raise SubstitutionMismatch("mapping names unknown variable %r" % name)
        missing = needed - set(mapping)
        if missing:
            raise SubstitutionMismatch("mapping misses %s" % sorted(missing))
        images = {}
        for name, img in mapping.items():
            if name in self.ring.alias:
                continue
            images[self.ring.var_names.index(name)] = target.coerce(img)

        def eval_num(num):
            total = target.zero()
            for e, c in num.items():
                term = target.int_(c)
                for i, k in enumerate(e):
                    if k:
                        term = term * images[i] ** k
                total = total + term
            return total

        # Alias images, when supplied, must agree with the alias expansion.
        for name, img in mapping.items():
            if name not in self.ring.alias:
                continue
            expansion = self.ring.alias[name]
            for e in expansion:
                for i, k in enumerate(e):
                    if k and i not in images:
                        raise SubstitutionMismatch(
                            "alias %r given without its variables" % name
                        )
            if eval_num(expansion) != target.coerce(img):
                raise SubstitutionMismatch("alias %r image is inconsistent" % name)

        out = eval_num(self.num)
        if not self.den:
            return out
        s_img = eval_num(self.ring.loc_num)
        for _ in range(self.den):
            q = out.divide_exact(s_img)
            if q is not None:
                out = q
                continue
            if target.loc_num is not None and target.loc_element() == s_img:
                out = RingElement(target, out.num, out.den + 1)
                continue
            c = s_img.is_int_constant()
            if c is not None and target.n_invertible(c):
                out = out * target.inverse_of_int(c)
                continue
            raise SubstitutionMismatch(
                "cannot resolve denominator image %s in %s" % (s_img, target)
            )
        return target._make(dict(out.num), out.den)

    # ----- display -----

    def __str__(self):
        body = _format_poly(self.num, self.ring.var_names)
        if self.den == 0:
            return body
        if " " in body or "*" in body or "^" in body:
            body = "(%s)" % body
        return "%s/s" % body if self.den == 1 else "%s/s^%d" % (body, self.den)

    __repr__ = __str__


class IdealSpec:
    """A symbolic description of a finitely generated ideal.

    Specs form trees: explicit generators at the leaves, with product,
    power, squares (`sym_power(2)`) and sum nodes above them.  Expansion
    produces tagged generators so that membership witnesses can name the
    exact product of leaf generators each coefficient multiplies.
    """

    def __init__(self, ring, kind, parts):
        self.ring = ring
        self.kind = kind
        self.parts = parts
        self._expansion = None

    @classmethod
    def gens(cls, ring, *els):
        return cls(ring, "gens", tuple(ring.coerce(e) for e in els))

    def product(self, other):
        if other.ring != self.ring:
            raise SubstitutionMismatch("ideal product across rings")
        return IdealSpec(self.ring, "product", (self, other))

    def power(self, k):
        if not isinstance(k, int) or k < 1:
            raise ValueError("ideal power needs k >= 1")
        if k == 1:
            return self
        return IdealSpec(self.ring, "power", (self, k))

    def sym_power(self, m):
        """The ideal generated by m-th powers of elements of this ideal."""
        if m == 1:
            return self
        if m != 2:
            raise UnsupportedRing("only squares are supported for sym_power")
        return IdealSpec(self.ring, "sym_power", (self, 2))

    def sum_with(self, other):
        if other.ring != self.ring:
            raise SubstitutionMismatch("ideal sum across rings")
        return IdealSpec(self.ring, "sum", (self, other))

    # ----- expansion -----

    def expand_tagged(self):
        if self._expansion is not None:
            return self._expansion
        if self.kind == "gens":
            out = tuple((g, ("g", i)) for i, g in enumerate(self.parts))
        elif self.kind == "product":
            a, b = self.parts
            out = tuple(
                (ga * gb, ("p", ta, tb))
                for ga, ta in a.expand_tagged()
                for gb, tb in b.expand_tagged()
            )
        elif self.kind == "power":
            spec, k = self.parts
            out = spec.expand_tagged()
            for _ in range(k - 1):
                out = tuple(
                    (ga * gb, ("p", ta, tb))
                    for ga, ta in out
                    for gb, tb in spec.expand_tagged()
                )
        elif self.kind == "sym_power":
            spec, _ = self.parts
            base = spec.expand_tagged()
            sq = tuple((g * g, ("sq", t)) for g, t in base)
            mixed = tuple(
                (base[i][0] * base[j][0] * 2, ("mx", base[i][1], base[j][1]))
                for i in range(len(base))
                for j in range(i + 1, len(base))
            )
            out = sq + mixed
        elif self.kind == "sum":
            a, b = self.parts
            out = tuple((g, ("l", t)) for g, t in a.expand_tagged()) + tuple(
                (g, ("r", t)) for g, t in b.expand_tagged()
            )
        else:
            raise ValueError("unknown spec kind %r" % self.kind)
        self._expansion = out
        return out

    def expand(self):
        return tuple(g for g, _ in self.expand_tagged())

    def element_for_tag(self, tag):
        for g, t in self.expand_tagged():
            if t == tag:
                return g
        raise KeyError("tag %r not in spec" % (tag,))

    def key(self):
        if self.kind == "gens":
            return ("gens", tuple(str(g) for g in self.parts))
        if self.kind in ("product", "sum"):
            return (self.kind, self.parts[0].key(), self.parts[1].key())
        return (self.kind, self.parts[0].key(), self.parts[1])

    def describe(self):
        if self.kind == "gens":
            return "(" + ", ".join(str(g) for g in self.parts) + ")"
        if self.kind == "product":
            return "%s*%s" % (self.parts[0].describe(), self.parts[1].describe())
        if self.kind == "power":
            return "%s^%d" % (self.parts[0].describe(), self.parts[1])
        if self.kind == "sym_power":
            return "%s^(2)" % self.parts[0].describe()
        return "(%s + %s)" % (self.parts[0].describe(), self.parts[1].describe())

    __repr__ = describe

    def substitute(self, mapping, target):
        if self.kind == "gens":
            return IdealSpec(
                target,
                "gens",
                tuple(g.substitute(mapping, target) for g in self.parts),
            )
        if self.kind in ("product", "sum"):
            a = self.parts[0].substitute(mapping, target)
            b = self.parts[1].substitute(mapping, target)
            return IdealSpec(target, self.kind, (a, b))
        return IdealSpec(
            target,
            self.kind,
            (self.parts[0].substitute(mapping, target), self.parts[1]),
        )

    # ----- membership -----

    def contains(self, x):
        """Complete membership test; raises UndecidableIdealClass otherwise."""
        try:
            self.witness(x)
            return True
        except NotInIdeal:
            return False

    def witness(self, x):
        """Return an IdealElement expressing x over this spec's generators.

        Raises NotInIdeal when x is provably outside the ideal, and
        UndecidableIdealClass when the generator class has no complete test.
        """
        x = self.ring.coerce(x)
        tagged = [(g, t) for g, t in self.expand_tagged() if not g.is_zero()]
        if not tagged:
            if x.is_zero():
                return IdealElement(x, self, ())
            raise NotInIdeal("%s is not in the zero ideal" % x)
        singles = []
        for g, t in tagged:
            term = Ring._single_term(g.num)
            if term is None:
                singles = None
                break
            singles.append((term[0], term[1], g.den, t))
        if singles is not None:
            return IdealElement(x, self, self._witness_single_terms(x, singles))
        if len(tagged) == 1:
            return IdealElement(x, self, self._witness_principal(x, tagged[0]))
        raise UndecidableIdealClass(
            "no complete membership test for generators %s"
            % [str(g) for g, _ in tagged]
        )

    def _witness_single_terms(self, x, singles):
        """Membership and witness for single-term generator sets.

        Without a localization the per-monomial gcd test is complete.  With
        a localization at a single-term s, generators are saturated (the
        s-smooth part of the coefficient and the exponents in the support
        of s are free), which is again complete.  For other localization
        elements a successful unsaturated witness still proves membership,
        but a failure is inconclusive and raises.
        """
        ring = self.ring
        mod = ring.base_mod
        nvars = len(ring.var_names)
        s_term = Ring._single_term(ring.loc_num) if ring.loc_num is not None else None
        saturate = s_term is not None
        if ring.loc_num is not None and s_term is None:
            if x.den or any(gden for _, _, gden, _ in singles):
                raise UndecidableIdealClass(
                    "denominators over a multi-term localization element"
                )
        s_primes = set()
        s_exps = (0,) * nvars
        if saturate:
            s_primes = set(_prime_factors(s_term[0]))
            s_exps = s_term[1]
        gens = []
        for c, e, gden, t in singles:
            if saturate:
                c_str, removed = _strip_primes(c, s_primes)
                e_str = tuple(0 if s_exps[i] else e[i] for i in range(nvars))
            else:
                c_str, removed, e_str = c, 1, e
            excess = tuple(a - b for a, b in zip(e, e_str))
            gens.append((c_str, e_str, removed, excess, gden, t))
        m_eff = mod
        if saturate and mod:
            m_eff, _ = _strip_primes(mod, s_primes)
        combo = {}
        for xe in sorted(x.num, key=lambda t: (sum(t), t), reverse=True):
            xc = x.num[xe]
            applicable = [g for g in gens if all(a >= b for a, b in zip(xe, g[1]))]
            values = [g[0] for g in applicable]
            if mod:
                g_all, coeffs = _combo_xgcd(values + [m_eff])
                coeffs = coeffs[:-1]
            else:
                g_all, coeffs = _combo_xgcd(values)
            if g_all == 0 or xc % g_all:
                if ring.loc_num is not None and not saturate:
                    raise UndecidableIdealClass(
                        "inconclusive membership over a multi-term localization"
                    )
                raise NotInIdeal(
                    "term %s of %s is outside %s" % (xc, x, self.describe())
                )
            scale = xc // g_all
            for (c_str, e_str, removed, excess, gden, t), u in zip(applicable, coeffs):
                if not u:
                    continue
                coeff = ring._make(
                    {tuple(a - b for a, b in zip(xe, e_str)): u * scale}, 0
                )
                if removed != 1 or any(excess):
                    coeff = coeff * ring.invert_s_smooth_term(removed, excess)
                if gden:
                    coeff = coeff * ring.loc_element() ** gden
                combo[t] = combo[t] + coeff if t in combo else coeff
        if x.den:
            shift = ring.s_power(x.den)
            combo = {t: c * shift for t, c in combo.items()}
        out = tuple((c, t) for t, c in combo.items() if not c.is_zero())
        _check_combo(x, self, out)
        return out

    def _witness_principal(self, x, tagged_gen):
        """Membership and witness for a single generator.

        Complete over a Z base without localization, and over Z/m without
        localization when the leading coefficient is a unit.  With a
        localization, successive multiplications by s are tried; running
        out of attempts is inconclusive.
        """
        g, tag = tagged_gen
        ring = self.ring
        if ring.base_mod:
            _, lc = _lead_term(g.num)
            if math.gcd(lc, ring.base_mod) != 1:
                raise UndecidableIdealClass(
                    "principal test over Z/m needs a unit leading coefficient"
                )
        g_num = ring._make(dict(g.num), 0)
        work = ring._make(dict(x.num), 0)
        tries = 1 if ring.loc_num is None else 4 + x.den + g.den
        for k in range(tries):
            q = work.divide_exact(g_num)
            if q is not None:
                j = x.den + k
                if j:
                    q = q * ring.s_power(j)
                if g.den:
                    q = q * ring.loc_element() ** g.den
                combo = ((q, tag),)
                _check_combo(x, self, combo)
                return combo
            if ring.loc_num is None:
                break
            work = work * ring.loc_element()
        if ring.loc_num is None:
            raise NotInIdeal("%s has no exact quotient by %s" % (x, g))
        raise UndecidableIdealClass("principal division did not settle")


def _check_combo(x, spec, combo):
    total = spec.ring.zero()
    for coeff, tag in combo:
        total = total + coeff * spec.element_for_tag(tag)
    if total != x:
        raise OracleMismatch(
            "witness reconstruction failed for %s in %s" % (x, spec.describe())
        )


class IdealElement:
    """A ring element together with a witnessed ideal membership.

    `combo` is a tuple of (coefficient, tag) pairs; the invariant is
    value = sum(coefficient * spec.element_for_tag(tag)).
    """

    def __init__(self, value, spec, combo):
        self.value = spec.ring.coerce(value)
        self.spec = spec
        self.combo = tuple(combo)

    @classmethod
    def from_generator(cls, spec, index, scale=None):
        g, tag = spec.expand_tagged()[index]
        coeff = spec.ring.one() if scale is None else spec.ring.coerce(scale)
        return cls(coeff * g, spec, ((coeff, tag),))

    def verify(self):
        total = self.spec.ring.zero()
        for coeff, tag in self.combo:
            total = total + coeff * self.spec.element_for_tag(tag)
        return total == self.value

    def scale(self, r):
        r = self.spec.ring.coerce(r)
        return IdealElement(
            self.value * r, self.spec, tuple((c * r, t) for c, t in self.combo)
        )

    def __neg__(self):
        return self.scale(-1)

    def add(self, other):
        if other.spec.key() != self.spec.key():
            raise ValueError("adding witnesses over different ideal specs")
        return IdealElement(self.value + other.value, self.spec, self.combo + other.combo)

    def product(self, other):
        spec = self.spec.product(other.spec)
        combo = tuple(
            (ca * cb, ("p", ta, tb))
            for ca, ta in self.combo
            for cb, tb in other.combo
        )
        return IdealElement(self.value * other.value, spec, combo)

    def power(self, k):
        if k < 1:
            raise ValueError("power needs k >= 1")
        out = self
        for _ in range(k - 1):
            out = out.product(self)
        return out

    def substitute(self, mapping, target):
        spec = self.spec.substitute(mapping, target)
        return IdealElement(
            self.value.substitute(mapping, target),
            spec,
            tuple((c.substitute(mapping, target), t) for c, t in self.combo),
        )

    def __repr__(self):
        return "IdealElement(%s in %s)" % (self.value, self.spec.describe())
