"""Seeded random instances shared by the module tests and the acceptance suite."""
from fractions import Fraction

from ktinv.dimgrp import InductiveSystem
from ktinv.orderext import (
    Ambient,
    CochainSequence,
    orderextension_from_classes,
    split_orderextension,
)
from ktinv.zmod import FGAbelianGroup, IntMatrix, QMatrix, _ext_slots


def random_fg_group(rng, max_gens=3, max_torsion=12):
    """Random presentation of a group whose invariant factors are at most max_torsion."""
    while True:
        G = _random_presentation(rng, max_gens, max_torsion)
        if all(d <= max_torsion for d in G.invariants[0]):
            return G


def _random_presentation(rng, max_gens, max_torsion):
    n = rng.randint(1, max_gens)
    mods = [rng.choice([0, 0] + list(range(2, max_torsion + 1))) for _ in range(n)]
    D = IntMatrix.diag([m for m in mods])
    # scramble by a random unimodular change of generators
    U = IntMatrix.identity(n)
    for _ in range(3):
        i, j = rng.sample(range(n), 2) if n > 1 else (0, 0)
        if i != j:
            rows = [list(r) for r in U.rows()]
            c = rng.randint(-2, 2)
            rows[i] = [a + c * b for a, b in zip(rows[i], rows[j])]
            U = IntMatrix(rows, n)
    rels = [r for r in (D @ U).rows() if any(r)]
    return FGAbelianGroup(IntMatrix(rels, n))


def random_ambient(rng, ntraces=None):
    g0 = random_fg_group(rng)
    g1 = random_fg_group(rng)
    t = ntraces or rng.randint(1, 2)
    free = [i for i, m in enumerate(g0.moduli) if m == 0]
    cols = []
    for i in range(g0.ngens):
        if i in free:
            cols.append([Fraction(rng.randint(1, 9), rng.randint(1, 6)) for _ in range(t)])
        else:
            cols.append([Fraction(0)] * t)
    C = QMatrix.from_columns(cols, t)
    return Ambient(g0, g1, C @ g0.to_canonical)


def random_oext(rng, amb, nonsplit=None, rotate=True):
    slots = _ext_slots(amb.g1, amb.g0)
    classes = {}
    for i, j, g in slots:
        if nonsplit is False:
            break
        if rng.random() < 0.6 or nonsplit:
            vec = tuple(amb.g0.from_canonical.col(j))
            classes[i] = tuple(rng.randint(1, g - 1) * v for v in vec)
    rotations = {}
    if rotate:
        for i, a in enumerate(amb.g1.moduli):
            if a == 0:
                rotations[i] = [Fraction(rng.randint(-6, 6), rng.randint(1, 5))
                                for _ in range(amb.dmap.nrows)]
    return orderextension_from_classes(amb, classes, rotations)


def off_range_split(rng, amb):
    """Split extension whose rotation on a free generator is a generic rational."""
    rows = amb.dmap.nrows
    cols = []
    for a in amb.g1.moduli:
        if a == 0:
            cols.append([Fraction(rng.randint(1, 50), 97) for _ in range(rows)])
        else:
            cols.append([Fraction(0)] * rows)
    phi = QMatrix.from_columns(cols, rows) @ amb.g1.to_canonical
    return split_orderextension(amb, phi)


def random_system(rng, stages=8, max_rank=3):
    ranks = [rng.randint(1, max_rank) for _ in range(stages)]
    maps0 = [IntMatrix([[rng.randint(1, 3) for _ in range(a)] for _ in range(b)], a)
             for a, b in zip(ranks, ranks[1:])]
    maps1 = [IntMatrix([[rng.randint(-1, 1) for _ in range(a)] for _ in range(b)], a)
             for a, b in zip(ranks, ranks[1:])]
    unit = tuple(rng.randint(1, 3) for _ in range(ranks[0]))
    return InductiveSystem(ranks, maps0, maps1, unit)


def random_cochain(rng, system, depth, lag=1, bound=4):
    h = [IntMatrix([[rng.randint(-bound, bound) for _ in range(system.rank(n))]
                    for _ in range(system.rank(n + lag))], system.rank(n))
         for n in range(1, depth + 1)]
    return CochainSequence(system, h, lag=lag)
