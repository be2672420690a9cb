"""Command line surface for the library.

Four subcommands tie the rewriting machinery to files:

- `tables` dumps the structure-constant table of a root system;
- `verify` runs a seeded randomized relation suite and reports
  counterexamples;
- `demo` runs one constructive rewrite on an instance file and writes
  its receipt;
- `lgp` solves a patching problem file end to end and writes the glued
  word next to its receipt.

Outputs are deterministic for a fixed configuration and seed.  Receipts
are written even when a run fails; failures map to one exit code per
error family so scripted callers can branch on them.
"""

import argparse
import json
import random
import re
import sys

from . import errors
from .exactring import IdealSpec, Ring
from .gword import (
    EMPTY,
    Comm,
    Conj,
    Gen,
    LevelShape,
    Prod,
    check_shape,
    substitute_word,
    word_from_text,
    word_to_text,
)
from .lgp import LocalDatum, PatchProblem, dilate, for_dilation, patch
from .rewrite import RewriteEngine
from .rootsys import build_root_system

# one exit code per error family; 0 ok, 1 failed checks, 2 usage
EXIT_CODES = {
    errors.InvalidType: 3,
    errors.OppositeRoots: 4,
    errors.UnsupportedRing: 5,
    errors.SubstitutionMismatch: 6,
    errors.UndecidableIdealClass: 7,
    errors.NotInIdeal: 8,
    errors.NotSplittingIdeal: 9,
    errors.NotExtendedIdeal: 10,
    errors.CongruenceFailed: 11,
    errors.ConditionViolated: 12,
    errors.NoUnitCombination: 13,
    errors.BudgetExhausted: 14,
    errors.NodeBudgetExceeded: 15,
    errors.LocalizationMismatch: 16,
    errors.NotUnimodular: 17,
    errors.ParseError: 18,
    errors.OracleMismatch: 19,
}


def exit_code(exc):
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return 1


_RING_HEAD = re.compile(r"\s*Z(?:/(\d+))?\s*")


def ring_from_text(text):
    """Parse a ring descriptor like Z, Z/5[t], Z[1/2][t] or Z/3[X,Y]."""
    m = _RING_HEAD.match(text)
    if not m:
        raise errors.ParseError("ring descriptor must start with Z or Z/m: %r" % text)
    mod = int(m.group(1)) if m.group(1) else 0
    rest = text[m.end():].strip()
    names = []
    loc_texts = []
    for group in re.findall(r"\[([^\]]*)\]", rest):
        group = group.strip()
        if group.startswith("1/"):
            loc_texts.append(group[2:].strip())
        else:
            names.extend(n.strip() for n in group.split(",") if n.strip())
    if re.sub(r"\[[^\]]*\]|\s", "", rest):
        raise errors.ParseError("unrecognized ring descriptor %r" % text)
    ring = Ring(mod, tuple(names))
    for loc in loc_texts:
        ring = ring.localize_at(ring.parse(loc))
    return ring


def ideal_from_texts(ring, texts):
    return IdealSpec.gens(ring, *[ring.parse(t) for t in texts])


def root_from_text(rs, text):
    try:
        root = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise errors.ParseError("bad root %r" % text) from None
    if not rs.contains(root):
        raise errors.ParseError("%r is not a root of %s" % (root, rs))
    return root


def system_object(label):
    try:
        return build_root_system(label[0], int(label[1:]))
    except (IndexError, ValueError):
        raise errors.InvalidType("bad root system label %r" % label) from None


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise errors.ParseError("cannot read %s: %s" % (path, e)) from None
    except json.JSONDecodeError as e:
        raise errors.ParseError("%s is not valid JSON: %s" % (path, e)) from None


def write_output(path, text):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def emit_json(path, payload):
    write_output(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ----- tables -----


def cmd_tables(args):
    rs = system_object(args.system)
    eng = RewriteEngine(rs, Ring.integers())
    roots = sorted(rs.roots)
    lines = ["system %s  roots %d" % (args.system, len(roots))]
    for r in roots:
        lines.append("root %s" % (",".join(str(x) for x in r)))
    for beta in roots:
        for gamma in roots:
            if beta == gamma or gamma == tuple(-x for x in beta):
                continue
            coeffs = [
                "(%d,%d)%+d" % (i, j, c)
                for (i, j), c in eng.sc.comm_coeffs(beta, gamma)
                if c
            ]
            if coeffs:
                lines.append(
                    "pair %s %s  %s"
                    % (
                        ",".join(str(x) for x in beta),
                        ",".join(str(x) for x in gamma),
                        " ".join(coeffs),
                    )
                )
    write_output(args.out, "\n".join(lines) + "\n")
    return 0


# ----- randomized verification suites -----


def _random_element(ring, rng, gens=None):
    """Small random ring element, optionally a combination of ideal gens."""
    out = ring.zero()
    for _ in range(rng.randrange(1, 3)):
        term = ring.int_(rng.randrange(-4, 5))
        for name in ring.var_names:
            term = term * ring.var(name) ** rng.randrange(0, 2)
        if gens is not None:
            term = term * rng.choice(gens)
        out = out + term
    return out


def _random_level_word(rs, ring, spec, rng, size):
    gens = spec.expand()
    roots = sorted(rs.roots)
    factors = tuple(
        Gen(rng.choice(roots), _random_element(ring, rng, gens)) for _ in range(size)
    )
    return Prod(factors)


def _random_elem_word(rs, ring, rng, size):
    roots = sorted(rs.roots)
    factors = tuple(
        Gen(rng.choice(roots), _random_element(ring, rng)) for _ in range(size)
    )
    return Prod(factors)


def _suite_steinberg(eng, i_spec, j_spec, rng, count):
    ring = eng.ring
    roots = sorted(eng.rs.roots)
    commuting = [
        (b, g)
        for b in roots
        for g in roots
        if b != g
        and g != tuple(-x for x in b)
        and all(c == 0 for _, c in eng.sc.comm_coeffs(b, g))
    ]
    failures = []
    for _ in range(count):
        beta = rng.choice(roots)
        u, v = _random_element(ring, rng), _random_element(ring, rng)
        lhs = Prod((Gen(beta, u), Gen(beta, v)))
        rhs = Prod((Gen(beta, u + v),))
        if not all(rep.words_equal(lhs, rhs, ring) for rep in eng.reps):
            failures.append(word_to_text(lhs))
        if commuting:
            beta, gamma = rng.choice(commuting)
            w = Comm(Gen(beta, u), Gen(gamma, v))
            if not all(rep.words_equal(w, EMPTY, ring) for rep in eng.reps):
                failures.append(word_to_text(w))
    return failures


def _suite_absolute(eng, i_spec, j_spec, rng, count):
    # conjugates of level words by arbitrary elementary words keep level
    oracle = eng.congruence_oracle()
    failures = []
    for _ in range(count):
        w = _random_level_word(eng.rs, eng.ring, i_spec, rng, rng.randrange(1, 3))
        c = _random_elem_word(eng.rs, eng.ring, rng, rng.randrange(1, 3))
        probe = Conj(w, c)
        if not oracle(probe, i_spec):
            failures.append(word_to_text(probe))
    return failures


def _suite_gij(eng, i_spec, j_spec, rng, count):
    failures = []
    for _ in range(count):
        g = _random_level_word(eng.rs, eng.ring, i_spec, rng, rng.randrange(1, 3))
        h = _random_level_word(eng.rs, eng.ring, j_spec, rng, rng.randrange(1, 3))
        if not eng.check_commutator_level(g, h, i_spec.product(j_spec)):
            failures.append(word_to_text(Comm(g, h)))
    return failures


def _suite_relcomm(eng, i_spec, j_spec, rng, count):
    # congruence-level elements built as conjugates still commute into IJ
    failures = []
    for _ in range(count):
        w = _random_level_word(eng.rs, eng.ring, i_spec, rng, rng.randrange(1, 3))
        c = _random_elem_word(eng.rs, eng.ring, rng, rng.randrange(1, 3))
        h = _random_level_word(eng.rs, eng.ring, j_spec, rng, rng.randrange(1, 3))
        if not eng.check_commutator_level(Conj(w, c), h, i_spec.product(j_spec)):
            failures.append(word_to_text(Comm(Conj(w, c), h)))
    return failures


def _suite_eee(eng, i_spec, j_spec, rng, count):
    # the double commutator [[g_I, h_J], k_J] lands one level deeper
    oracle = eng.congruence_oracle()
    deep = i_spec.product(j_spec).product(j_spec)
    failures = []
    for _ in range(count):
        g = _random_level_word(eng.rs, eng.ring, i_spec, rng, 1)
        h = _random_level_word(eng.rs, eng.ring, j_spec, rng, 1)
        k = _random_level_word(eng.rs, eng.ring, j_spec, rng, 1)
        probe = Comm(Comm(g, h), k)
        if not oracle(probe, deep):
            failures.append(word_to_text(probe))
    return failures


SUITES = {
    "steinberg": _suite_steinberg,
    "absolute": _suite_absolute,
    "gij": _suite_gij,
    "relcomm": _suite_relcomm,
    "eee": _suite_eee,
}


def cmd_verify(args):
    if args.suite not in SUITES:
        raise errors.InvalidType(
            "unknown suite %r (have: %s)" % (args.suite, ", ".join(sorted(SUITES)))
        )
    rs = system_object(args.system)
    ring = ring_from_text(args.ring)
    i_spec = ideal_from_texts(ring, args.ideal or ["1"])
    j_spec = ideal_from_texts(ring, args.ideal2 or ["1"])
    eng = RewriteEngine(rs, ring)
    rng = random.Random(args.seed)
    failures = SUITES[args.suite](eng, i_spec, j_spec, rng, args.count)
    payload = {
        "suite": args.suite,
        "system": args.system,
        "ring": ring.to_config(),
        "seed": args.seed,
        "count": args.count,
        "passed": not failures,
        "counterexamples": failures,
    }
    emit_json(args.out, payload)
    return 0 if not failures else 1


# ----- lemma demos -----


def _demo_decomposition(eng, ring, inst):
    root = root_from_text(eng.rs, inst["root"])
    i_spec = ideal_from_texts(ring, inst["ideal"])
    j_spec = ideal_from_texts(ring, inst["ideal2"])
    out, rec = eng.decompose_avoiding_root(root, ring.parse(inst["value"]), i_spec, j_spec)
    return out, rec, {}


def _demo_sp_relinc(eng, ring, inst):
    root = root_from_text(eng.rs, inst["root"])
    i_spec = ideal_from_texts(ring, inst["ideal"])
    j_spec = ideal_from_texts(ring, inst["ideal2"])
    out, rec = eng.relative_generation_witness(root, ring.parse(inst["value"]), i_spec, j_spec)
    return out, rec, {}


def _demo_splitting(eng, ring, inst):
    w = word_from_text(inst["word"], ring, eng.rs)
    i_spec = ideal_from_texts(ring, inst["ideal"])
    out, rec = eng.relative_split(w, i_spec, inst["var"])
    return out, rec, {}


def _demo_moving_t(eng, ring, inst):
    w = word_from_text(inst["word"], ring, eng.rs)
    j_spec = ideal_from_texts(ring, inst["ideal"])
    k_spec = ideal_from_texts(ring, inst["ideal2"])
    level, mixed, rec = eng.move_indeterminate(w, j_spec, k_spec)
    return Prod((level, mixed)), rec, {"level": word_to_text(level), "mixed": word_to_text(mixed)}


def _demo_for_dilation(eng, ring, inst):
    w = word_from_text(inst["word"], ring, eng.rs)
    k_spec = ideal_from_texts(ring, inst["ideal"])
    out, rec = for_dilation(eng, w, k_spec, inst["var"])
    return out, rec, {}


def _demo_dilate(eng, ring, inst, minimize_l=False):
    w = word_from_text(inst["word"], ring, eng.rs)
    i_spec = ideal_from_texts(ring, inst["ideal"])
    l, out, rec = dilate(eng, w, i_spec, var=inst.get("var"), minimize_l=minimize_l)
    return out, rec, {"l": l}


DEMOS = {
    "decomposition": _demo_decomposition,
    "sp-relinc": _demo_sp_relinc,
    "splitting": _demo_splitting,
    "moving-t": _demo_moving_t,
    "for-dilation": _demo_for_dilation,
    "dilate": _demo_dilate,
}


def cmd_demo(args):
    inst = load_json(args.instance)
    lemma = inst.get("lemma")
    if lemma not in DEMOS:
        raise errors.InvalidType(
            "unknown lemma %r (have: %s)" % (lemma, ", ".join(sorted(DEMOS)))
        )
    rs = system_object(inst["system"])
    ring = ring_from_text(inst["ring"])
    eng = RewriteEngine(rs, ring, node_budget=args.budget)
    payload = {"lemma": lemma, "system": inst["system"], "ring": ring.to_config()}
    try:
        if lemma == "dilate":
            out, rec, extra = _demo_dilate(eng, ring, inst, minimize_l=args.minimize_l)
        else:
            out, rec, extra = DEMOS[lemma](eng, ring, inst)
    except KeyError as e:
        raise errors.ParseError("instance is missing field %s" % e) from None
    except errors.ChevCalcError as e:
        payload["error"] = type(e).__name__
        payload["message"] = str(e)
        payload["exit_code"] = exit_code(e)
        emit_json(args.out, payload)
        return payload["exit_code"]
    payload["word"] = word_to_text(out)
    payload["receipt"] = rec.to_dict()
    payload.update(extra)
    if not args.trace:
        payload["receipt"].pop("input", None)
        payload["receipt"].pop("output", None)
    emit_json(args.out, payload)
    return 0


# ----- local-global patching -----


def _load_patch_problem(inst):
    rs = system_object(inst["system"])
    base = ring_from_text(inst["ring"])
    ideal = ideal_from_texts(base, inst["ideal"])
    var = inst.get("var")
    data = []
    if "data" in inst:
        for d in inst["data"]:
            s = base.parse(str(d["s"]))
            loc = base.localize_at(s)
            data.append(LocalDatum(s, word_from_text(d["word"], loc, rs)))
    else:
        # a global word plus cover entries: localize to build the data
        g = word_from_text(inst["global"], base, rs)
        for s_text in inst["cover"]:
            s = base.parse(str(s_text))
            loc = base.localize_at(s)
            lifted = {n: loc.var(n) for n in base.var_names}
            data.append(LocalDatum(s, substitute_word(g, lifted, loc)))
    return rs, base, ideal, PatchProblem(rs, base, ideal, tuple(data), var)


def cmd_lgp(args):
    inst = load_json(args.problem)
    payload = {"system": inst.get("system"), "ideal": inst.get("ideal")}
    try:
        rs, base, ideal, problem = _load_patch_problem(inst)
        payload["ring"] = base.to_config()
        out, rec = patch(problem, node_budget=args.budget, minimize_l=args.minimize_l)
        text = word_to_text(out)
        # the emitted word must survive a parse round trip and re-verify
        again = word_from_text(text, base, rs)
        eng = RewriteEngine(rs, base)
        report = check_shape(again, LevelShape(ideal), eng.congruence_oracle())
        if again != out or not report.ok:
            raise errors.OracleMismatch("emitted word does not re-verify")
    except errors.ChevCalcError as e:
        payload["error"] = type(e).__name__
        payload["message"] = str(e)
        payload["exit_code"] = exit_code(e)
        emit_json(args.out, payload)
        return payload["exit_code"]
    payload["word"] = text
    payload["receipt"] = rec.to_dict()
    if not args.trace:
        payload["receipt"].pop("output", None)
    emit_json(args.out, payload)
    if args.word_out:
        write_output(args.word_out, text + "\n")
    return 0


# ----- entry point -----


def build_parser():
    p = argparse.ArgumentParser(prog="chevcalc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tables", help="structure-constant table of a root system")
    t.add_argument("--system", required=True)
    t.add_argument("--out")
    t.set_defaults(func=cmd_tables)

    v = sub.add_parser("verify", help="seeded randomized relation suite")
    v.add_argument("--suite", required=True)
    v.add_argument("--system", required=True)
    v.add_argument("--ring", required=True)
    v.add_argument("--ideal", action="append")
    v.add_argument("--ideal2", action="append")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--count", type=int, default=100)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("demo", help="run one constructive rewrite on an instance file")
    d.add_argument("--instance", required=True)
    d.add_argument("--out")
    d.add_argument("--budget", type=int, default=200000)
    d.add_argument("--trace", action="store_true")
    d.add_argument("--minimize-l", action="store_true")
    d.set_defaults(func=cmd_demo)

    g = sub.add_parser("lgp", help="solve a patching problem file")
    g.add_argument("--problem", required=True)
    g.add_argument("--out")
    g.add_argument("--word-out")
    g.add_argument("--budget", type=int, default=200000)
    g.add_argument("--trace", action="store_true")
    g.add_argument("--minimize-l", action="store_true")
    g.set_defaults(func=cmd_lgp)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except errors.ChevCalcError as e:
        sys.stderr.write("%s: %s\n" % (type(e).__name__, e))
        return exit_code(e)


if __name__ == "__main__":
    raise SystemExit(main())
