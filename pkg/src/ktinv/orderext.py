"""Extensions with rotation data and the stage-wise cocycle machinery.

An :class:`OrderExtension` is a short exact sequence
``0 -> G0 -> E -> G1 -> 0`` together with a rational matrix R on the
generators of E such that ``R @ iota == D``.  The target of R is a finite
dimensional rational space: one block of rows per real constant in
``Ambient.constants`` (the constants are assumed linearly independent over
Q), each block holding values at the extreme traces of the evaluation
stage.  Every equality involving R is therefore an exact rational identity.
"""
from __future__ import annotations

from fractions import Fraction
from typing import NamedTuple

from .dimgrp import InductiveSystem, dimension_matrix
from .zmod import (
    ExtensionPresentation,
    FGAbelianGroup,
    GroupHom,
    IntMatrix,
    QMatrix,
    ext_class,
    extension_from_classes,
    find_section,
    hom_group,
    integer_kernel,
    solve_linear,
    solve_rational,
    _as_frac,
)

__all__ = [
    "Ambient",
    "OrderExtension",
    "RangeMismatch",
    "NotFoundAtDepth",
    "IsoResult",
    "TrivialityReport",
    "CocycleSequence",
    "CochainSequence",
    "trivial_orderextension",
    "split_orderextension",
    "orderextension_from_classes",
    "baer_sum",
    "oext_inverse",
    "oext_is_isomorphic",
    "oext_is_trivial",
    "kernel_sequence",
    "solve_cocycle",
    "assemble_stage_extension",
]


class RangeMismatch(ValueError):
    """Range R differs from Range D, so the kernel sequence is not exact."""


class NotFoundAtDepth(LookupError):
    """The integer system for the cochain is inconsistent at this truncation."""

    def __init__(self, depth, message=""):
        super().__init__(message or f"no integer cochain at depth {depth}")
        self.depth = depth


class Ambient:
    """The data (G0, G1, D) shared by all orderextensions being compared.

    ``dmap`` has ``len(constants) * ntraces`` rows: row ``c * ntraces + i``
    is the coefficient of ``constants[c]`` in the value at trace i.
    """

    def __init__(self, g0, g1, dmap, constants=("1",)):
        self.g0, self.g1 = g0, g1
        self.dmap = dmap if isinstance(dmap, QMatrix) else QMatrix(dmap, g0.ngens)
        self.constants = tuple(str(c) for c in constants)
        if self.dmap.ncols != g0.ngens:
            raise ValueError("dimension map has the wrong number of columns")
        if self.dmap.nrows % len(self.constants):
            raise ValueError("dimension map rows must split evenly over the constants")
        for r in g0.presentation.rows():
            if any(self.dmap @ r):
                raise ValueError("dimension map does not vanish on the relations of G0")

    @property
    def ntraces(self):
        return self.dmap.nrows // len(self.constants)

    @classmethod
    def from_system(cls, system: InductiveSystem, stage, eval_stage=None, g1=None):
        """G0 = Z^{k_stage} with D evaluated at ``eval_stage`` (default: last)."""
        eval_stage = system.depth if eval_stage is None else eval_stage
        g0 = FGAbelianGroup.free(system.rank(stage))
        g1 = FGAbelianGroup.free(system.rank(stage)) if g1 is None else g1
        return cls(g0, g1, dimension_matrix(system, stage, eval_stage))

    def real_values(self, column):
        """Float value of a rational R-column at every trace."""
        t = self.ntraces
        consts = [float(Fraction(c)) for c in self.constants]
        return [sum(consts[c] * float(column[c * t + i]) for c in range(len(consts)))
                for i in range(t)]

    def __eq__(self, other):
        return (isinstance(other, Ambient) and self.g0 == other.g0 and self.g1 == other.g1
                and self.dmap == other.dmap and self.constants == other.constants)

    def __hash__(self):
        return hash((self.g0, self.g1, self.dmap, self.constants))

    def to_json(self):
        return {"g0": self.g0.to_json(), "g1": self.g1.to_json(),
                "dmap": self.dmap.to_json(), "constants": list(self.constants)}

    @classmethod
    def from_json(cls, doc):
        return cls(FGAbelianGroup.from_json(doc["g0"]), FGAbelianGroup.from_json(doc["g1"]),
                   QMatrix.from_json(doc["dmap"]), doc.get("constants", ["1"]))


class OrderExtension:
    """Extension (iota, E, q) of G1 by G0 with rotation matrix R."""

    def __init__(self, ext: ExtensionPresentation, rmap, ambient: Ambient, check=True):
        self.ext = ext
        self.rmap = rmap if isinstance(rmap, QMatrix) else QMatrix(rmap, ext.e.ngens)
        self.ambient = ambient
        if ext.g0 != ambient.g0 or ext.g1 != ambient.g1:
            raise ValueError("extension groups differ from the ambient groups")
        if self.rmap.shape != (ambient.dmap.nrows, ext.e.ngens):
            raise ValueError("rotation matrix has the wrong shape")
        if check:
            if self.rmap @ ext.iota.matrix != ambient.dmap:
                raise ValueError("R o iota differs from D")
            for r in ext.e.presentation.rows():
                if any(self.rmap @ r):
                    raise ValueError("R does not vanish on the relations of E")

    def simplified(self):
        """Isomorphic copy with a diagonal presentation of E."""
        E = self.ext.e
        S, to_s, from_s = E.simplified()
        mods = [E.moduli[i] for i in E.kept]
        iota = to_s @ self.ext.iota.matrix
        iota = IntMatrix([[v % d if d else v for v in row] for row, d in zip(iota.rows(), mods)],
                         iota.ncols)
        ext = ExtensionPresentation(self.ext.g0, S, self.ext.g1,
                                    GroupHom(self.ext.g0, S, iota, check=False),
                                    GroupHom(S, self.ext.g1, self.ext.q.matrix @ from_s,
                                             check=False), check=False)
        return OrderExtension(ext, self.rmap @ from_s, self.ambient)

    def to_json(self):
        return {"ambient": self.ambient.to_json(), "e": self.ext.e.to_json(),
                "iota": self.ext.iota.matrix.to_json(), "q": self.ext.q.matrix.to_json(),
                "rmap": self.rmap.to_json()}

    @classmethod
    def from_json(cls, doc):
        amb = Ambient.from_json(doc["ambient"])
        E = FGAbelianGroup.from_json(doc["e"])
        ext = ExtensionPresentation(amb.g0, E, amb.g1,
                                    GroupHom(amb.g0, E, IntMatrix.from_json(doc["iota"])),
                                    GroupHom(E, amb.g1, IntMatrix.from_json(doc["q"])))
        return cls(ext, QMatrix.from_json(doc["rmap"]), amb)

    def __repr__(self):
        return f"OrderExtension(E={self.ext.e!r})"


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def split_orderextension(ambient: Ambient, phi=None) -> OrderExtension:
    """E = G0 + G1 with R(a, b) = D a + phi b (phi = 0 gives the neutral class)."""
    g0, g1 = ambient.g0, ambient.g1
    n0, n1 = g0.ngens, g1.ngens
    phi = QMatrix.from_columns([[0] * ambient.dmap.nrows] * n1, ambient.dmap.nrows) \
        if phi is None else (phi if isinstance(phi, QMatrix) else QMatrix(phi, n1))
    E = g0.direct_sum(g1)
    iota = IntMatrix([[1 if i == j else 0 for j in range(n0)] for i in range(n0 + n1)], n0)
    q = IntMatrix([[1 if j == n0 + i else 0 for j in range(n0 + n1)] for i in range(n1)],
                  n0 + n1)
    ext = ExtensionPresentation(g0, E, g1, GroupHom(g0, E, iota, check=False),
                                GroupHom(E, g1, q, check=False), check=False)
    return OrderExtension(ext, ambient.dmap.hstack(phi), ambient)


def trivial_orderextension(ambient: Ambient) -> OrderExtension:
    return split_orderextension(ambient)


def orderextension_from_classes(ambient, classes=None, rotations=None) -> OrderExtension:
    """Orderextension with prescribed extension classes and free rotations.

    ``classes`` maps torsion canonical coordinates of G1 to vectors of G0
    (see ``zmod.extension_from_classes``); ``rotations`` maps free canonical
    coordinates of G1 to rotation columns.  R is then forced on torsion lifts.
    """
    classes = dict(classes or {})
    rotations = dict(rotations or {})
    g0, g1 = ambient.g0, ambient.g1
    ext = extension_from_classes(g1, g0, classes)
    rows = ambient.dmap.nrows
    cols = []
    for i, a in enumerate(g1.moduli):
        if a == 0:
            col = rotations.get(i, [0] * rows)
            cols.append([_as_frac(v) for v in col])
        elif i in classes:
            img = ambient.dmap @ classes[i]
            cols.append([v / a for v in img])
        else:
            cols.append([Fraction(0)] * rows)
    rcan = QMatrix.from_columns(cols, rows) if cols else QMatrix.zeros(rows, 0)
    rs = rcan @ g1.to_canonical if g1.ngens else QMatrix.zeros(rows, 0)
    return OrderExtension(ext, ambient.dmap.hstack(rs), ambient)


# ---------------------------------------------------------------------------
# group operations
# ---------------------------------------------------------------------------

def _require_same(x, y):
    if x.ambient != y.ambient:
        raise ValueError("orderextensions have different ambients")


def baer_sum(x: OrderExtension, y: OrderExtension) -> OrderExtension:
    """Sum of two orderextensions: pullback over G1, pushout over G0."""
    _require_same(x, y)
    E, F = x.ext.e, y.ext.e
    n, m = E.ngens, F.ngens
    g0, g1 = x.ambient.g0, x.ambient.g1
    EF = E.direct_sum(F)
    diff = x.ext.q.matrix.hstack(-y.ext.q.matrix)
    K, inc = GroupHom(EF, g1, diff, check=False).kernel()
    B = inc.matrix  # (n+m) x K.ngens, columns a Z-basis of the pullback lattice

    def coords(vec):
        sol = solve_linear(B, vec)
        if sol is None:
            raise ArithmeticError("vector outside the pullback lattice")
        return sol

    ia, ib = x.ext.iota.matrix, y.ext.iota.matrix
    anti = [coords(ia.col(k) + tuple(-v for v in ib.col(k))) for k in range(g0.ngens)]
    rels = K.presentation.vstack(IntMatrix(anti, K.ngens)) if anti else K.presentation
    P = FGAbelianGroup(rels)
    iota = IntMatrix.from_columns([coords(ia.col(k) + (0,) * m) for k in range(g0.ngens)],
                                  K.ngens)
    qmat = x.ext.q.matrix @ B.submatrix(rows=range(n))
    rmat = x.rmap.hstack(y.rmap) @ B
    ext = ExtensionPresentation(g0, P, g1, GroupHom(g0, P, iota, check=False),
                                GroupHom(P, g1, qmat, check=False), check=False)
    return OrderExtension(ext, rmat, x.ambient).simplified()


def oext_inverse(x: OrderExtension) -> OrderExtension:
    ext = x.ext
    inv = ExtensionPresentation(ext.g0, ext.e, ext.g1, -ext.iota, ext.q, check=False)
    return OrderExtension(inv, -x.rmap, x.ambient)


class IsoResult(NamedTuple):
    isomorphic: bool
    certificate: IntMatrix | None
    reason: str

    def __bool__(self):
        return self.isomorphic


def _commuting_map(x: OrderExtension, y: OrderExtension):
    """Integer matrix P: E -> E' with P iota = iota' and q' P = q, or None."""
    E, F = x.ext.e, y.ext.e
    g0, g1 = x.ambient.g0, x.ambient.g1
    n, m = E.ngens, F.ngens
    MF, M1 = F.presentation, g1.presentation
    rE, rF, r1 = E.presentation.nrows, MF.nrows, M1.nrows
    n0 = g0.ngens
    ia, ib = x.ext.iota.matrix, y.ext.iota.matrix
    qa, qb = x.ext.q.matrix, y.ext.q.matrix
    # unknowns: P (m*n, column-stacked), then slack lattice coefficients
    off_y = m * n
    off_w = off_y + rE * rF
    off_v = off_w + n0 * rF
    nvar = off_v + n * r1
    rows, rhs = [], []

    def p(i, j):  # index of P[i, j]
        return j * m + i

    for s, rel in enumerate(E.presentation.rows()):  # P maps relations into relations
        for i in range(m):
            row = [0] * nvar
            for j in range(n):
                row[p(i, j)] += rel[j]
            for t in range(rF):
                row[off_y + s * rF + t] = -MF[t, i]
            rows.append(row)
            rhs.append(0)
    for k in range(n0):  # P iota e_k == iota' e_k modulo relations of E'
        for i in range(m):
            row = [0] * nvar
            for j in range(n):
                row[p(i, j)] += ia[j, k]
            for t in range(rF):
                row[off_w + k * rF + t] = -MF[t, i]
            rows.append(row)
            rhs.append(ib[i, k])
    for j in range(n):  # q' P e_j == q e_j modulo relations of G1
        for u in range(g1.ngens):
            row = [0] * nvar
            for i in range(m):
                row[p(i, j)] += qb[u, i]
            for t in range(r1):
                row[off_v + j * r1 + t] = -M1[t, u]
            rows.append(row)
            rhs.append(qa[u, j])
    if not rows:
        return IntMatrix.zeros(m, n)
    sol = solve_linear(IntMatrix(rows, nvar), rhs)
    if sol is None:
        return None
    return IntMatrix([[sol[p(i, j)] for j in range(n)] for i in range(m)], n)


def _verify_iso(x, y, P):
    E, F = x.ext.e, y.ext.e
    f = GroupHom(E, F, P)
    ok = all(F.equal(a, b) for a, b in zip((P @ x.ext.iota.matrix).columns(),
                                            y.ext.iota.matrix.columns()))
    ok = ok and all(x.ambient.g1.equal(a, b) for a, b in zip(
        (y.ext.q.matrix @ P).columns(), x.ext.q.matrix.columns()))
    ok = ok and y.rmap @ P == x.rmap
    return ok and f.is_injective() and f.is_surjective()


def oext_is_isomorphic(x: OrderExtension, y: OrderExtension) -> IsoResult:
    """Decide whether some isomorphism E -> E' commutes with iota, q and R.

    Any map commuting with iota and q has the form P0 + iota' h q with h in
    Hom(G1, G0).  A first integer system finds P0; a second one solves
    R - R' P0 = D h q over a basis of Hom(G1, G0).  Both steps are exact,
    so the answer is always decided.
    """
    _require_same(x, y)
    P0 = _commuting_map(x, y)
    if P0 is None:
        return IsoResult(False, None, "underlying extensions are not equivalent")
    amb = x.ambient
    delta = x.rmap - y.rmap @ P0
    hom = hom_group(amb.g1, amb.g0)
    qa = x.ext.q.matrix
    columns = []
    for h in hom.basis:
        img = amb.dmap @ h.matrix @ qa
        columns.append([v for r in img.rows() for v in r])
    target = [v for r in delta.rows() for v in r]
    if columns:
        coeffs = solve_rational(QMatrix.from_columns(columns, len(target)), target)
    else:
        coeffs = () if not any(target) else None
    if coeffs is None:
        return IsoResult(False, None, "rotation data differ by a map outside D o Hom(G1, G0)")
    P = P0
    for c, h in zip(coeffs, hom.basis):
        if c:
            P = P + (y.ext.iota.matrix @ h.matrix @ qa).scale(c)
    if not _verify_iso(x, y, P):
        raise ArithmeticError("isomorphism certificate failed verification")
    return IsoResult(True, P, "certified")


# ---------------------------------------------------------------------------
# triviality and the kernel sequence
# ---------------------------------------------------------------------------

def _range_ok(x: OrderExtension):
    D = x.ambient.dmap
    bad = []
    for j, col in enumerate(x.rmap.columns()):
        if solve_rational(D, col) is None:
            bad.append(j)
    return bad


def _kernel_group(mat, group):
    """(K, basis matrix) with K = {x : mat x = 0} modulo the relations of group."""
    n = group.ngens
    basis = integer_kernel(mat) if mat.nrows else [group.generator(k) for k in range(n)]
    B = IntMatrix.from_columns(basis, n) if basis else IntMatrix.zeros(n, 0)
    rels = []
    for r in group.presentation.rows():
        c = solve_linear(B, r) if basis else ()
        if c is None:
            raise ArithmeticError("relation outside the kernel lattice")
        rels.append(c)
    return FGAbelianGroup(IntMatrix(rels, len(basis))), B


def kernel_sequence(x: OrderExtension) -> ExtensionPresentation:
    """0 -> ker D -> ker R -> G1 -> 0, with exactness verified."""
    bad = _range_ok(x)
    if bad:
        raise RangeMismatch(f"R of generators {bad} lies outside Range D")
    g0, g1 = x.ambient.g0, x.ambient.g1
    kd, bd = _kernel_group(x.ambient.dmap, g0)
    kr, br = _kernel_group(x.rmap, x.ext.e)
    cols = []
    for k in range(kd.ngens):
        img = x.ext.iota.matrix @ bd.col(k)
        c = solve_linear(br, img)
        if c is None:
            raise ArithmeticError("iota does not map ker D into ker R")
        cols.append(c)
    iota = IntMatrix.from_columns(cols, kr.ngens) if cols else IntMatrix.zeros(kr.ngens, 0)
    q = x.ext.q.matrix @ br
    return ExtensionPresentation(kd, kr, g1, GroupHom(kd, kr, iota), GroupHom(kr, g1, q))


class TrivialityReport(NamedTuple):
    trivial: bool
    splits: bool
    range_matches: bool
    kernel_splits: bool
    ext_class: tuple
    section: IntMatrix | None
    notes: tuple

    def __bool__(self):
        return self.trivial


def oext_is_trivial(x: OrderExtension) -> TrivialityReport:
    """Check (a) the extension splits, (b) Range R = Range D on generators,
    (c) the kernel sequence splits.  All three are exact integer problems."""
    notes = []
    cls = ext_class(x.ext)
    section = find_section(x.ext)
    splits = section is not None
    if splits == any(cls):
        raise ArithmeticError("section search and extension class disagree")
    bad = _range_ok(x)
    range_ok = not bad
    if bad:
        notes.append(f"R of generators {bad} lies outside Range D")
    kernel_split = False
    zero_section = None
    if range_ok:
        ks = kernel_sequence(x)
        ks_section = find_section(ks)
        kernel_split = ks_section is not None
        if kernel_split:
            zero_section = _kernel_group(x.rmap, x.ext.e)[1] @ ks_section
    else:
        notes.append("kernel sequence not exact")
    return TrivialityReport(splits and range_ok and kernel_split, splits, range_ok,
                            kernel_split, cls, zero_section if kernel_split else section,
                            tuple(notes))


# ---------------------------------------------------------------------------
# cocycles and cochains on inductive systems
# ---------------------------------------------------------------------------

def _imat(m):
    return m if isinstance(m, IntMatrix) and not isinstance(m, QMatrix) else IntMatrix(m)


class CochainSequence:
    """Maps h_n from stage n to stage n + lag (n = 1..len(h)).

    Parity 0 means h_n takes values in the even groups (pushed by chi0) with
    sources in the odd groups (moved by chi1); parity 1 swaps the roles.
    """

    def __init__(self, system, h, lag=1, parity=0):
        self.system, self.h, self.lag, self.parity = system, tuple(_imat(m) for m in h), lag, parity
        for n, m in enumerate(self.h, start=1):
            if m.shape != (system.rank(n + lag), system.rank(n)):
                raise ValueError(f"h_{n} has the wrong shape")

    def coboundary(self) -> "CocycleSequence":
        """psi_n = chi_{n+lag} h_n - h_{n+1} chi_n  (n = 1..len(h)-1)."""
        s, a, b = self.system, self.parity, 1 - self.parity
        psi = [s.chi(a, n + self.lag) @ self.h[n - 1] - self.h[n] @ s.chi(b, n)
               for n in range(1, len(self.h))]
        return CocycleSequence(s, psi, lag=self.lag, parity=self.parity)

    def to_json(self):
        return {"system": self.system.to_json(), "h": [m.to_json() for m in self.h],
                "lag": self.lag, "parity": self.parity}

    @classmethod
    def from_json(cls, doc):
        return cls(InductiveSystem.from_json(doc["system"]),
                   [IntMatrix.from_json(m) for m in doc["h"]], doc.get("lag", 1),
                   doc.get("parity", 0))


class CocycleSequence:
    """Maps psi_n from stage n to stage n + lag + 1 (n = 1..len(psi))."""

    def __init__(self, system, psi, lag=1, parity=0):
        self.system, self.psi, self.lag, self.parity = system, tuple(_imat(m) for m in psi), lag, parity
        for n, m in enumerate(self.psi, start=1):
            if m.shape != (system.rank(n + lag + 1), system.rank(n)):
                raise ValueError(f"psi_{n} has the wrong shape")

    def kernel_defect(self, eval_stage=None):
        """Largest |D(psi_n e_j)| at the evaluation stage (0 for ker D data)."""
        if self.parity != 0:
            raise ValueError("the dimension map only applies to even data")
        s = self.system
        T = s.depth if eval_stage is None else eval_stage
        worst = Fraction(0)
        for n, m in enumerate(self.psi, start=1):
            vals = dimension_matrix(s, n + self.lag + 1, T) @ m
            worst = max([worst] + [abs(v) for r in vals.rows() for v in r])
        return worst

    def negated(self):
        return CocycleSequence(self.system, [-m for m in self.psi], self.lag, self.parity)

    def residual(self, cochain: CochainSequence, upto=None):
        """Indices n where psi_n differs from the coboundary of the cochain."""
        cob = cochain.coboundary().psi
        upto = len(cob) if upto is None else upto
        return [n for n in range(1, upto + 1) if cob[n - 1] != self.psi[n - 1]]

    def to_json(self):
        return {"system": self.system.to_json(), "psi": [m.to_json() for m in self.psi],
                "lag": self.lag, "parity": self.parity}

    @classmethod
    def from_json(cls, doc):
        return cls(InductiveSystem.from_json(doc["system"]),
                   [IntMatrix.from_json(m) for m in doc["psi"]], doc.get("lag", 1),
                   doc.get("parity", 0))


def _back_substitute(psi, depth):
    s, lag, a, b = psi.system, psi.lag, psi.parity, 1 - psi.parity
    h = [None] * depth
    h[depth - 1] = IntMatrix.zeros(s.rank(depth + lag), s.rank(depth))
    for n in range(depth - 1, 0, -1):
        rhs = psi.psi[n - 1] + h[n] @ s.chi(b, n)
        A = s.chi(a, n + lag)
        cols = []
        for col in rhs.columns():
            x = solve_linear(A, col)
            if x is None:
                return None
            cols.append(x)
        h[n - 1] = IntMatrix.from_columns(cols, A.ncols)
    return h


def _joint_solve(psi, depth):
    s, lag, a, b = psi.system, psi.lag, psi.parity, 1 - psi.parity
    offs, total = [], 0
    for n in range(1, depth + 1):
        offs.append(total)
        total += s.rank(n + lag) * s.rank(n)

    def var(n, i, j):  # entry (i, j) of h_n, row-major
        return offs[n - 1] + i * s.rank(n) + j

    rows, rhs = [], []
    for n in range(1, depth):
        A, C = s.chi(a, n + lag), s.chi(b, n)
        target = psi.psi[n - 1]
        for i in range(target.nrows):
            for j in range(target.ncols):
                row = [0] * total
                for t in range(A.ncols):  # (A h_n)[i, j]
                    row[var(n, t, j)] += A[i, t]
                for t in range(C.nrows):  # (h_{n+1} C)[i, j]
                    row[var(n + 1, i, t)] -= C[t, j]
                rows.append(row)
                rhs.append(target[i, j])
    sol = solve_linear(IntMatrix(rows, total), rhs) if rows else (0,) * total
    if sol is None:
        return None
    return [IntMatrix([[sol[var(n, i, j)] for j in range(s.rank(n))]
                       for i in range(s.rank(n + lag))], s.rank(n))
            for n in range(1, depth + 1)]


def solve_cocycle(psi: CocycleSequence, depth) -> CochainSequence:
    """Cochain h_1..h_depth whose coboundary matches psi_1..psi_{depth-1}.

    Tries back-substitution from h_depth = 0 first and falls back to solving
    all stages as one integer system.  Raises NotFoundAtDepth when that
    system is inconsistent; a failure only speaks about this truncation.
    """
    if depth < 1:
        raise ValueError("depth must be positive")
    if depth - 1 > len(psi.psi):
        raise ValueError("not enough psi maps for this depth")
    if depth + psi.lag > psi.system.depth:
        raise ValueError("system has too few stages for this depth")
    h = _back_substitute(psi, depth) if depth > 1 else None
    if h is None:
        h = _joint_solve(psi, depth)
    if h is None:
        raise NotFoundAtDepth(depth)
    out = CochainSequence(psi.system, h, psi.lag, psi.parity)
    if psi.residual(out, depth - 1):
        raise ArithmeticError("cochain failed re-verification")
    return out


def assemble_stage_extension(psi: CocycleSequence, depth, eval_stage=None) -> OrderExtension:
    """Truncation at ``depth`` of the limit of split extensions glued by psi.

    Generators: ``a`` for G0 = Z^{k_G} (G = depth + lag) followed by lifts
    ``b_n`` of the odd stage groups for n = 1..depth.  Relations identify
    b_n e_j with iota(psi_n e_j) + b_{n+1}(chi1_n e_j).  The last lift has
    zero rotation and R on the others follows from the relations.
    """
    if psi.parity != 0:
        raise ValueError("only even-parity data carry rotation")
    if depth < 2:
        raise ValueError("depth must be at least 2")
    if depth - 1 > len(psi.psi):
        raise ValueError("not enough psi maps for this depth")
    s, lag = psi.system, psi.lag
    G = depth + lag
    T = s.depth if eval_stage is None else eval_stage
    if T < G:
        raise ValueError("evaluation stage precedes the G0 stage")
    kG = s.rank(G)
    offs, total = [], kG
    for n in range(1, depth + 1):
        offs.append(total)
        total += s.rank(n)
    rels = []
    for n in range(1, depth):
        chi1 = s.chi(1, n)
        pushed = s.compose(0, G, n + lag + 1) @ psi.psi[n - 1]
        for j in range(s.rank(n)):
            row = [0] * total
            row[offs[n - 1] + j] += 1
            for i in range(s.rank(n + 1)):
                row[offs[n] + i] -= chi1[i, j]
            for i in range(kG):
                row[i] -= pushed[i, j]
            rels.append(row)
    E = FGAbelianGroup(IntMatrix(rels, total))
    g0 = FGAbelianGroup.free(kG)
    g1 = FGAbelianGroup.free(s.rank(depth))
    D = dimension_matrix(s, G, T)
    amb = Ambient(g0, g1, D)
    iota = IntMatrix([[1 if i == j else 0 for j in range(kG)] for i in range(total)], kG)
    qcols = [[0] * s.rank(depth)] * kG
    for n in range(1, depth + 1):
        qcols += s.compose(1, depth, n).columns()
    q = IntMatrix.from_columns(qcols, s.rank(depth))
    # rotation on b_n, from the last stage backwards
    rb = {depth: QMatrix.zeros(D.nrows, s.rank(depth))}
    for n in range(depth - 1, 0, -1):
        pushed = s.compose(0, G, n + lag + 1) @ psi.psi[n - 1]
        rb[n] = rb[n + 1] @ s.chi(1, n) + D @ pushed
    rmat = D
    for n in range(1, depth + 1):
        rmat = rmat.hstack(rb[n])
    ext = ExtensionPresentation(g0, E, g1, GroupHom(g0, E, iota), GroupHom(E, g1, q))
    return OrderExtension(ext, rmat, amb)
