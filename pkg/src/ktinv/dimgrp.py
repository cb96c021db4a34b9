"""Inductive systems of integer lattices, stage traces and the dimension map.

Stages are numbered from 1.  A system with ranks ``(k_1, ..., k_S)``
carries connecting matrices ``chi0[n]`` and ``chi1[n]`` from stage n to
stage n+1 (shape ``k_{n+1} x k_n``) for the even and odd groups, and the
coordinates ``[n, j]`` of the unit class at every stage.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import NamedTuple

from .zmod import IntMatrix, QMatrix, _as_frac, _as_int

__all__ = [
    "InductiveSystem",
    "StageVector",
    "AffElement",
    "TraceFunctional",
    "push_forward",
    "dimension_map",
    "dimension_matrix",
    "extreme_traces",
    "approx_in_range_D",
    "make_admissible_system",
    "admissible_stages",
    "default_system",
]


class InductiveSystem:
    """Finite truncation of an inductive system Z^{k_1} -> Z^{k_2} -> ..."""

    def __init__(self, ranks, maps0, maps1, unit):
        self.ranks = tuple(_as_int(k) for k in ranks)
        if not self.ranks or any(k < 1 for k in self.ranks):
            raise ValueError("ranks must be positive and nonempty")
        self.maps0 = tuple(m if isinstance(m, IntMatrix) else IntMatrix(m) for m in maps0)
        self.maps1 = tuple(m if isinstance(m, IntMatrix) else IntMatrix(m) for m in maps1)
        S = len(self.ranks)
        if len(self.maps0) != S - 1 or len(self.maps1) != S - 1:
            raise ValueError("need exactly one map of each parity between consecutive stages")
        for n, (a, b) in enumerate(zip(self.maps0, self.maps1)):
            shape = (self.ranks[n + 1], self.ranks[n])
            if a.shape != shape or b.shape != shape:
                raise ValueError(f"map from stage {n + 1} has the wrong shape")
            if any(v < 1 for r in a.rows() for v in r):
                raise ValueError(f"chi0 at stage {n + 1} must have positive entries")
        unit = [tuple(u) for u in unit] if unit and isinstance(unit[0], (list, tuple)) \
            else [tuple(unit)]
        first = tuple(_as_int(v) for v in unit[0])
        if len(first) != self.ranks[0] or any(v < 1 for v in first):
            raise ValueError("unit must be a positive vector at stage 1")
        units = [first]
        for m in self.maps0:
            units.append(m @ units[-1])
        for n, u in enumerate(unit[1:], start=1):
            if tuple(_as_int(v) for v in u) != units[n]:
                raise ValueError(f"unit at stage {n + 1} is not the image of the previous one")
        self.units = tuple(units)
        self._cache = {}

    @classmethod
    def stationary(cls, chi0, chi1, unit, stages):
        chi0, chi1 = IntMatrix(chi0), IntMatrix(chi1)
        k = chi0.nrows
        return cls([k] * stages, [chi0] * (stages - 1), [chi1] * (stages - 1), unit)

    @property
    def depth(self):
        return len(self.ranks)

    def _check(self, n):
        if not 1 <= n <= self.depth:
            raise IndexError(f"stage {n} outside 1..{self.depth}")

    def rank(self, n):
        self._check(n)
        return self.ranks[n - 1]

    def chi(self, parity, n):
        """Connecting map of the given parity from stage n to n+1."""
        self._check(n + 1)
        return (self.maps0 if parity == 0 else self.maps1)[n - 1]

    def compose(self, parity, target, source):
        """chi_{target, source}: composition from stage source to stage target."""
        self._check(source)
        self._check(target)
        if target < source:
            raise ValueError("target stage precedes source stage")
        key = (parity, target, source)
        if key not in self._cache:
            if target == source:
                out = IntMatrix.identity(self.rank(source))
            else:
                out = self.chi(parity, target - 1) @ self.compose(parity, target - 1, source)
            self._cache[key] = out
        return self._cache[key]

    def unit_at(self, n):
        self._check(n)
        return self.units[n - 1]

    def ell(self, n):
        """Largest coordinate of the unit at stage n."""
        return max(self.unit_at(n))

    def growth_ok(self, n, index=None):
        """Growth condition chi0(i,j) >= 2^(index+1) max(|chi1(i,j)|, 1)."""
        index = n if index is None else index
        a, b = self.chi(0, n), self.chi(1, n)
        scale = 2 ** (index + 1)
        return all(x >= scale * max(abs(y), 1)
                   for ra, rb in zip(a.rows(), b.rows()) for x, y in zip(ra, rb))

    def is_admissible(self):
        return all(self.growth_ok(n) for n in range(1, self.depth))

    def select(self, stages):
        """Telescoped system through the given increasing stages."""
        stages = list(stages)
        if any(b <= a for a, b in zip(stages, stages[1:])):
            raise ValueError("stages must be strictly increasing")
        maps0 = [self.compose(0, b, a) for a, b in zip(stages, stages[1:])]
        maps1 = [self.compose(1, b, a) for a, b in zip(stages, stages[1:])]
        return InductiveSystem([self.rank(s) for s in stages], maps0, maps1,
                               self.unit_at(stages[0]))

    def to_json(self):
        return {"stages": list(self.ranks),
                "maps0": [m.to_json() for m in self.maps0],
                "maps1": [m.to_json() for m in self.maps1],
                "unit": [list(u) for u in self.units]}

    @classmethod
    def from_json(cls, doc):
        return cls(doc["stages"], [IntMatrix.from_json(m) for m in doc["maps0"]],
                   [IntMatrix.from_json(m) for m in doc["maps1"]], doc["unit"])

    def __eq__(self, other):
        return (isinstance(other, InductiveSystem) and self.ranks == other.ranks
                and self.maps0 == other.maps0 and self.maps1 == other.maps1
                and self.units == other.units)

    def __hash__(self):
        return hash((self.ranks, self.maps0, self.maps1, self.units))

    def __repr__(self):
        return f"InductiveSystem(ranks={self.ranks})"


class StageVector(NamedTuple):
    stage: int
    coords: tuple


def _stage_vector(x, system):
    coords = tuple(x.coords)
    if len(coords) != system.rank(x.stage):
        raise ValueError("vector length does not match the stage rank")
    return StageVector(x.stage, coords)


def push_forward(x: StageVector, system: InductiveSystem, target_stage, parity=0):
    x = _stage_vector(x, system)
    return StageVector(target_stage, system.compose(parity, target_stage, x.stage) @ x.coords)


@dataclass(frozen=True)
class AffElement:
    """Affine function on the stage-m trace simplex, by its extreme values."""
    stage: int
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(_as_frac(v) for v in self.values))

    @classmethod
    def constant(cls, system, stage, c):
        return cls(stage, (c,) * system.rank(stage))

    def _same(self, other):
        if self.stage != other.stage or len(self.values) != len(other.values):
            raise ValueError("affine elements live at different stages")

    def __add__(self, other):
        self._same(other)
        return AffElement(self.stage, tuple(a + b for a, b in zip(self.values, other.values)))

    def __sub__(self, other):
        self._same(other)
        return AffElement(self.stage, tuple(a - b for a, b in zip(self.values, other.values)))

    def __neg__(self):
        return AffElement(self.stage, tuple(-a for a in self.values))

    def scale(self, c):
        c = _as_frac(c)
        return AffElement(self.stage, tuple(c * a for a in self.values))

    def sup_norm(self):
        return max((abs(v) for v in self.values), default=Fraction(0))

    def strictly_below(self, other):
        self._same(other)
        return all(a < b for a, b in zip(self.values, other.values))

    def push(self, system, stage):
        """Restrict to the extreme traces of a later stage."""
        if stage < self.stage:
            raise ValueError("cannot push to an earlier stage")
        vals = self.values
        for m in range(self.stage, stage):
            chi = system.chi(0, m)
            u, u2 = system.unit_at(m), system.unit_at(m + 1)
            vals = tuple(sum(Fraction(chi[i, j] * u[j], u2[i]) * vals[j]
                             for j in range(len(vals)))
                         for i in range(chi.nrows))
        return AffElement(stage, vals)

    def evaluate(self, trace: "TraceFunctional", system):
        if trace.stage != self.stage:
            raise ValueError("trace and element live at different stages")
        u = system.unit_at(self.stage)
        return sum(w * uj * v for w, uj, v in zip(trace.weights, u, self.values))


@dataclass(frozen=True)
class TraceFunctional:
    """State on the stage group: x -> sum_j weights[j] * x[j]."""
    stage: int
    weights: tuple

    @classmethod
    def create(cls, system, stage, weights):
        w = tuple(_as_frac(v) for v in weights)
        if len(w) != system.rank(stage):
            raise ValueError("weight vector has the wrong length")
        if any(v < 0 for v in w):
            raise ValueError("trace weights must be nonnegative")
        if sum(a * b for a, b in zip(w, system.unit_at(stage))) != 1:
            raise ValueError("trace does not take the value 1 on the unit")
        return cls(stage, w)

    def __call__(self, x: StageVector):
        if x.stage != self.stage:
            raise ValueError("vector and trace live at different stages")
        return sum(w * v for w, v in zip(self.weights, x.coords))


def extreme_traces(system, stage):
    u = system.unit_at(stage)
    k = len(u)
    return [TraceFunctional(stage, tuple(Fraction(1, u[j]) if i == j else Fraction(0)
                                         for i in range(k))) for j in range(k)]


def dimension_matrix(system, source_stage, eval_stage) -> QMatrix:
    """Rational matrix of D from stage ``source_stage`` evaluated at ``eval_stage``."""
    chi = system.compose(0, eval_stage, source_stage)
    u = system.unit_at(eval_stage)
    return QMatrix([[Fraction(v, u[i]) for v in chi.row(i)] for i in range(chi.nrows)],
                   chi.ncols)


def dimension_map(a: StageVector, system, eval_stage) -> AffElement:
    a = _stage_vector(a, system)
    pushed = push_forward(a, system, eval_stage, 0).coords
    u = system.unit_at(eval_stage)
    return AffElement(eval_stage, tuple(Fraction(v, w) for v, w in zip(pushed, u)))


def _solve_normal(P: QMatrix, t):
    """Least-squares solution of P x = t in exact rationals (free vars set to 0)."""
    n = P.ncols
    cols = P.columns()
    A = [[sum(a * b for a, b in zip(cols[i], cols[j])) for j in range(n)] for i in range(n)]
    b = [sum(a * v for a, v in zip(cols[i], t)) for i in range(n)]
    rows = [A[i] + [b[i]] for i in range(n)]
    pivots, r = [], 0
    for c in range(n):
        p = next((i for i in range(r, n) if rows[i][c] != 0), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(n):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    x = [Fraction(0)] * n
    for i, c in enumerate(pivots):
        x[c] = rows[i][n]
    return x


def _floor(q: Fraction):
    return q.numerator // q.denominator


def _candidates(xstar, limit=10):
    base = [_floor(v) for v in xstar]
    nearest = tuple(b + (1 if v - b > Fraction(1, 2) else 0) for b, v in zip(base, xstar))
    yield nearest
    if len(xstar) > limit:
        return
    for bits in product((0, 1), repeat=len(xstar)):
        cand = tuple(b + s for b, s in zip(base, bits))
        if cand != nearest:
            yield cand


def approx_in_range_D(target: AffElement, system, bound: AffElement, search_depth,
                      start_stage=1):
    """Find a stage vector whose dimension is within ``bound`` of ``target``.

    Stages ``start_stage, start_stage+1, ...`` are tried in order (at most
    ``search_depth`` of them, never past the evaluation stage of
    ``target``).  At each stage the exact rational least-squares preimage is
    rounded in every floor/ceil combination and each candidate is checked
    exactly.  Returns a StageVector or None.
    """
    T = target.stage
    if bound.stage != T:
        raise ValueError("bound and target must share the evaluation stage")
    if any(v <= 0 for v in bound.values):
        raise ValueError("bound must be strictly positive")
    last = min(T, start_stage + search_depth - 1)
    for m in range(start_stage, last + 1):
        P = dimension_matrix(system, m, T)
        xstar = _solve_normal(P, target.values)
        for cand in _candidates(xstar):
            err = P @ cand
            if all(abs(e - t) < b for e, t, b in zip(err, target.values, bound.values)):
                return StageVector(m, cand)
    return None


def admissible_stages(seed: InductiveSystem, depth):
    """Seed stages kept by ``make_admissible_system`` (greedy, first success)."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    stages = [1]
    for n in range(1, depth):
        s = stages[-1]
        nxt = None
        for t in range(s + 1, seed.depth + 1):
            a, b = seed.compose(0, t, s), seed.compose(1, t, s)
            scale = 2 ** (n + 1)
            if all(x >= scale * max(abs(y), 1)
                   for ra, rb in zip(a.rows(), b.rows()) for x, y in zip(ra, rb)):
                nxt = t
                break
        if nxt is None:
            raise ValueError(f"seed with {seed.depth} stages cannot reach the growth "
                             f"condition for output step {n}")
        stages.append(nxt)
    return tuple(stages)


def make_admissible_system(seed: InductiveSystem, depth):
    """Telescope ``seed`` until the growth condition holds at every step.

    Returns a system with ``depth`` stages; stage n+1 of the output is the
    first seed stage after stage n for which the composed maps satisfy
    chi0(i,j) >= 2^(n+1) max(|chi1(i,j)|, 1).
    """
    return seed.select(admissible_stages(seed, depth))


def default_system(stages=24):
    """Two-coordinate admissible system used for desk-scale runs.

    chi0 at stage n is 2^(n+1) * [[3, 2], [2, 3]] and chi1 is [[1, 1], [0, 1]],
    so every entry clears the growth threshold with room to spare.
    """
    maps0 = [IntMatrix([[3 * 2 ** (n + 1), 2 ** (n + 2)], [2 ** (n + 2), 3 * 2 ** (n + 1)]])
             for n in range(1, stages)]
    maps1 = [IntMatrix([[1, 1], [0, 1]]) for _ in range(1, stages)]
    return InductiveSystem([2] * stages, maps0, maps1, (1, 1))
