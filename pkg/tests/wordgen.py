"""Shared helpers for randomized tests."""

from chevcalc.gword import Comm, Conj, Gen, Inv, Prod


def random_ring_element(ring, rng, max_deg=2, terms=3, coeff=6):
    nvars = len(ring.var_names)
    el = ring.zero()
    for _ in range(rng.randrange(terms + 1)):
        e = tuple(rng.randrange(max_deg + 1) for _ in range(nvars))
        c = rng.randrange(-coeff, coeff + 1)
        mono = ring.int_(c)
        for name, k in zip(ring.var_names, e):
            mono = mono * ring.var(name) ** k
        el = el + mono
    return el


def random_gen(rs, ring, rng, args=None):
    root = rng.choice(rs.roots)
    arg = random_ring_element(ring, rng) if args is None else rng.choice(args)
    return Gen(root, arg)


def random_word(rs, ring, rng, depth=2, args=None):
    if depth == 0 or rng.random() < 0.3:
        return random_gen(rs, ring, rng, args)
    kind = rng.randrange(4)
    if kind == 0:
        return Inv(random_word(rs, ring, rng, depth - 1, args))
    if kind == 1:
        n = rng.randrange(3)
        return Prod(tuple(random_word(rs, ring, rng, depth - 1, args) for _ in range(n)))
    if kind == 2:
        return Conj(
            random_word(rs, ring, rng, depth - 1, args),
            random_word(rs, ring, rng, depth - 1, args),
        )
    return Comm(
        random_word(rs, ring, rng, depth - 1, args),
        random_word(rs, ring, rng, depth - 1, args),
    )
