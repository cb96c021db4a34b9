"""Exact integer linear algebra and finitely generated abelian groups.

Everything here runs on Python integers and ``fractions.Fraction``; nothing
is ever rounded.  The central tool is the Smith normal form, from which
kernels, integer solutions, group invariants, Hom and Ext are all derived.

>>> G = FGAbelianGroup.cyclic(6)
>>> H = FGAbelianGroup.cyclic(4)
>>> hom_group(G, H).group.invariants
((2,), 0)
>>> ext_group(G, H).group.invariants
((2,), 0)
"""
from __future__ import annotations

from fractions import Fraction
from functools import cached_property
from math import gcd, lcm
from numbers import Integral, Rational
from typing import NamedTuple

__all__ = [
    "IntMatrix",
    "QMatrix",
    "SmithForm",
    "smith_normal_form",
    "smith_decomposition",
    "solve_linear",
    "solve_rational",
    "integer_kernel",
    "lattice_basis",
    "FGAbelianGroup",
    "GroupHom",
    "HomGroup",
    "ExtGroup",
    "hom_group",
    "ext_group",
    "ext_class",
    "extension_from_classes",
    "ExtensionPresentation",
    "find_section",
]


def _as_int(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, Integral):
        return int(v)
    if isinstance(v, Rational) and v.denominator == 1:
        return int(v.numerator)
    if isinstance(v, float) and v.is_integer():
        return int(v)
    if isinstance(v, str):
        return int(v)
    raise TypeError(f"not an exact integer: {v!r}")


def _as_frac(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, Integral):
        return Fraction(int(v))
    return Fraction(v)


class IntMatrix:
    """Immutable matrix with exact integer entries, stored row-major.

    Zero-row and zero-column matrices are allowed; pass ``ncols`` when the
    row list is empty.
    """

    _coerce = staticmethod(_as_int)

    def __init__(self, rows=(), ncols=None):
        if isinstance(rows, _BaseMatrixMixin):
            ncols = rows.ncols
            rows = rows._rows
        data = tuple(tuple(self._coerce(v) for v in r) for r in rows)
        if ncols is None:
            ncols = len(data[0]) if data else 0
        for r in data:
            if len(r) != ncols:
                raise ValueError("ragged matrix rows")
        self._rows = data
        self.nrows = len(data)
        self.ncols = ncols

    # -- constructors -------------------------------------------------
    @classmethod
    def identity(cls, n):
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)], n)

    @classmethod
    def zeros(cls, r, c):
        return cls([[0] * c for _ in range(r)], c)

    @classmethod
    def diag(cls, values, r=None, c=None):
        values = list(values)
        r = len(values) if r is None else r
        c = len(values) if c is None else c
        out = [[0] * c for _ in range(r)]
        for i, v in enumerate(values):
            out[i][i] = v
        return cls(out, c)

    @classmethod
    def from_columns(cls, columns, nrows):
        columns = [tuple(col) for col in columns]
        return cls([[col[i] for col in columns] for i in range(nrows)], len(columns))

    # -- access -------------------------------------------------------
    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def __getitem__(self, ij):
        i, j = ij
        return self._rows[i][j]

    def row(self, i):
        return self._rows[i]

    def col(self, j):
        return tuple(r[j] for r in self._rows)

    def rows(self):
        return self._rows

    def columns(self):
        return [self.col(j) for j in range(self.ncols)]

    def tolist(self):
        return [list(r) for r in self._rows]

    @property
    def T(self):
        return type(self)([[self._rows[i][j] for i in range(self.nrows)]
                           for j in range(self.ncols)], self.nrows)

    # -- arithmetic ---------------------------------------------------
    def _result_type(self, other):
        if isinstance(self, QMatrix) or isinstance(other, QMatrix):
            return QMatrix
        return IntMatrix

    def __matmul__(self, other):
        if isinstance(other, _BaseMatrixMixin):
            if self.ncols != other.nrows:
                raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
            cols = other.columns()
            out = [[sum(a * b for a, b in zip(r, c)) for c in cols] for r in self._rows]
            return self._result_type(other)(out, other.ncols)
        vec = tuple(other)
        if len(vec) != self.ncols:
            raise ValueError(f"shape mismatch {self.shape} @ vector of length {len(vec)}")
        return tuple(sum(a * b for a, b in zip(r, vec)) for r in self._rows)

    def __add__(self, other):
        if self.shape != other.shape:
            raise ValueError("shape mismatch in addition")
        return self._result_type(other)(
            [[a + b for a, b in zip(r, s)] for r, s in zip(self._rows, other._rows)], self.ncols)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return type(self)([[-a for a in r] for r in self._rows], self.ncols)

    def scale(self, c):
        out = [[c * a for a in r] for r in self._rows]
        if isinstance(c, Fraction) and c.denominator != 1:
            return QMatrix(out, self.ncols)
        return type(self)(out, self.ncols)

    def __eq__(self, other):
        if not isinstance(other, _BaseMatrixMixin):
            return NotImplemented
        return self.shape == other.shape and self._rows == other._rows

    def __hash__(self):
        return hash((self.shape, self._rows))

    def is_zero(self):
        return all(v == 0 for r in self._rows for v in r)

    def hstack(self, *others):
        mats = (self,) + others
        if len({m.nrows for m in mats}) > 1:
            raise ValueError("hstack needs equal row counts")
        kind = QMatrix if any(isinstance(m, QMatrix) for m in mats) else type(self)
        rows = [sum((m._rows[i] for m in mats), ()) for i in range(self.nrows)]
        return kind(rows, sum(m.ncols for m in mats))

    def vstack(self, *others):
        mats = (self,) + others
        if len({m.ncols for m in mats}) > 1:
            raise ValueError("vstack needs equal column counts")
        kind = QMatrix if any(isinstance(m, QMatrix) for m in mats) else type(self)
        return kind([r for m in mats for r in m._rows], self.ncols)

    def submatrix(self, rows=None, cols=None):
        rows = range(self.nrows) if rows is None else rows
        cols = range(self.ncols) if cols is None else cols
        cols = list(cols)
        return type(self)([[self._rows[i][j] for j in cols] for i in rows], len(cols))

    def det(self):
        """Determinant by fraction-free (Bareiss) elimination."""
        n = self.nrows
        if n != self.ncols:
            raise ValueError("det of a non-square matrix")
        if n == 0:
            return 1
        a = [list(r) for r in self._rows]
        sign, prev = 1, 1
        for k in range(n - 1):
            if a[k][k] == 0:
                swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
                if swap is None:
                    return 0
                a[k], a[swap] = a[swap], a[k]
                sign = -sign
            for i in range(k + 1, n):
                for j in range(k + 1, n):
                    num = a[i][j] * a[k][k] - a[i][k] * a[k][j]
                    a[i][j] = num // prev if isinstance(num, int) else num / prev
            prev = a[k][k]
        return sign * a[n - 1][n - 1]

    def to_json(self):
        conv = (lambda v: v) if type(self) is IntMatrix else (lambda v: str(v))
        return {"rows": self.nrows, "cols": self.ncols,
                "entries": [[conv(v) for v in r] for r in self._rows]}

    @classmethod
    def from_json(cls, doc):
        m = cls(doc["entries"], doc["cols"])
        if m.nrows != doc["rows"]:
            raise ValueError("row count does not match entries")
        return m

    def __repr__(self):
        return f"{type(self).__name__}({self.tolist()!r})"


_BaseMatrixMixin = IntMatrix


class QMatrix(IntMatrix):
    """Immutable matrix with exact rational entries."""

    _coerce = staticmethod(_as_frac)

    @classmethod
    def identity(cls, n):
        return cls(IntMatrix.identity(n))

    def common_denominator(self):
        return lcm(1, *(v.denominator for r in self._rows for v in r))

    def clear_denominators(self):
        """Return (integer matrix, d) with self = matrix / d."""
        d = self.common_denominator()
        return IntMatrix([[int(v * d) for v in r] for r in self._rows], self.ncols), d

    def is_integral(self):
        return all(v.denominator == 1 for r in self._rows for v in r)

    def to_int(self):
        if not self.is_integral():
            raise ValueError("matrix has non-integral entries")
        return IntMatrix(self._rows, self.ncols)


# ---------------------------------------------------------------------------
# Smith normal form
# ---------------------------------------------------------------------------

class SmithForm(NamedTuple):
    """``left @ A @ right == S`` with unimodular ``left`` and ``right``.

    ``left_inv`` and ``right_inv`` are the exact inverses, so that
    ``A == left_inv @ S @ right_inv``.  ``diagonal`` lists the nonzero
    invariant factors, so ``len(diagonal)`` is the rank.
    """
    S: IntMatrix
    left: IntMatrix
    left_inv: IntMatrix
    right: IntMatrix
    right_inv: IntMatrix
    diagonal: tuple


def _identity_rows(n):
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def smith_decomposition(A) -> SmithForm:
    A = A if isinstance(A, IntMatrix) and not isinstance(A, QMatrix) else IntMatrix(A)
    m, n = A.shape
    a = A.tolist()
    L, Li = _identity_rows(m), _identity_rows(m)
    R, Ri = _identity_rows(n), _identity_rows(n)

    def row_add(i, j, c):  # row_i += c * row_j
        if c == 0:
            return
        a[i] = [x + c * y for x, y in zip(a[i], a[j])]
        L[i] = [x + c * y for x, y in zip(L[i], L[j])]
        for r in Li:
            r[j] -= c * r[i]

    def row_swap(i, j):
        if i == j:
            return
        a[i], a[j] = a[j], a[i]
        L[i], L[j] = L[j], L[i]
        for r in Li:
            r[i], r[j] = r[j], r[i]

    def row_neg(i):
        a[i] = [-x for x in a[i]]
        L[i] = [-x for x in L[i]]
        for r in Li:
            r[i] = -r[i]

    def col_add(j, i, c):  # col_j += c * col_i
        if c == 0:
            return
        for r in a:
            r[j] += c * r[i]
        for r in R:
            r[j] += c * r[i]
        Ri[i] = [x - c * y for x, y in zip(Ri[i], Ri[j])]

    def col_swap(i, j):
        if i == j:
            return
        for r in a:
            r[i], r[j] = r[j], r[i]
        for r in R:
            r[i], r[j] = r[j], r[i]
        Ri[i], Ri[j] = Ri[j], Ri[i]

    t = 0
    while t < min(m, n):
        best = None
        for i in range(t, m):
            for j in range(t, n):
                v = a[i][j]
                if v and (best is None or abs(v) < best[0]):
                    best = (abs(v), i, j)
        if best is None:
            break
        row_swap(t, best[1])
        col_swap(t, best[2])
        while True:
            p = a[t][t]
            clean = True
            for i in range(t + 1, m):
                if a[i][t]:
                    row_add(i, t, -(a[i][t] // p))
                    clean = clean and a[i][t] == 0
            for j in range(t + 1, n):
                if a[t][j]:
                    col_add(j, t, -(a[t][j] // p))
                    clean = clean and a[t][j] == 0
            if not clean:
                cands = [(abs(a[i][t]), i, None) for i in range(t + 1, m) if a[i][t]]
                cands += [(abs(a[t][j]), None, j) for j in range(t + 1, n) if a[t][j]]
                _, i, j = min(cands, key=lambda c: c[0])
                if i is not None:
                    row_swap(t, i)
                else:
                    col_swap(t, j)
                continue
            bad = next((i for i in range(t + 1, m)
                        for j in range(t + 1, n) if a[i][j] % p), None)
            if bad is None:
                break
            row_add(t, bad, 1)
        if a[t][t] < 0:
            row_neg(t)
        t += 1

    diag = tuple(a[i][i] for i in range(min(m, n)) if a[i][i] != 0)
    return SmithForm(IntMatrix(a, n), IntMatrix(L, m), IntMatrix(Li, m),
                     IntMatrix(R, n), IntMatrix(Ri, n), diag)


def smith_normal_form(A):
    """Return ``(U, S, V)`` with ``A == U @ S @ V``, U and V unimodular.

    S is diagonal with nonnegative entries, each dividing the next.
    """
    sf = smith_decomposition(A)
    return sf.left_inv, sf.S, sf.right_inv


# ---------------------------------------------------------------------------
# Lattices and linear systems
# ---------------------------------------------------------------------------

def integer_kernel(A) -> list[tuple]:
    """Basis of the saturated lattice {x in Z^n : A x = 0}.

    Rational matrices are accepted (rows are scaled to integers first).
    """
    if isinstance(A, QMatrix):
        A, _ = _rows_to_int(A)
    sf = smith_decomposition(A)
    r = len(sf.diagonal)
    return [sf.right.col(j) for j in range(r, A.ncols)]


def lattice_basis(generators, dim) -> list[tuple]:
    """A Z-basis of the lattice spanned by the given integer vectors."""
    gens = [tuple(g) for g in generators]
    if not gens:
        return []
    sf = smith_decomposition(IntMatrix(gens, dim))
    return [tuple(d * v for v in sf.right_inv.row(i)) for i, d in enumerate(sf.diagonal)]


def solve_linear(A, b):
    """Integer solution x of ``A @ x == b``, or None when there is none."""
    A = A if isinstance(A, IntMatrix) else IntMatrix(A)
    b = tuple(_as_int(v) for v in b)
    if len(b) != A.nrows:
        raise ValueError("right-hand side has the wrong length")
    sf = smith_decomposition(A)
    c = sf.left @ b
    r = len(sf.diagonal)
    y = [0] * A.ncols
    for i, d in enumerate(sf.diagonal):
        if c[i] % d:
            return None
        y[i] = c[i] // d
    if any(c[i] for i in range(r, A.nrows)):
        return None
    x = sf.right @ y
    assert A @ x == b
    return x


def _rows_to_int(Q, rhs=None):
    rows, out_rhs = [], []
    for i, row in enumerate(Q.rows()):
        extra = () if rhs is None else (_as_frac(rhs[i]),)
        d = lcm(1, *(v.denominator for v in row + extra))
        rows.append([int(v * d) for v in row])
        if rhs is not None:
            out_rhs.append(int(extra[0] * d))
    return IntMatrix(rows, Q.ncols), out_rhs


def solve_rational(Q, b):
    """Integer x with ``Q @ x == b`` for a rational matrix Q, or None."""
    Q = Q if isinstance(Q, QMatrix) else QMatrix(Q)
    A, rhs = _rows_to_int(Q, b)
    return solve_linear(A, rhs)


# ---------------------------------------------------------------------------
# Finitely generated abelian groups
# ---------------------------------------------------------------------------

class FGAbelianGroup:
    """The group Z^n modulo the row span of a relation matrix.

    >>> FGAbelianGroup([[2, 4], [6, 8]]).invariants
    ((2, 4), 0)
    """

    def __init__(self, relations=(), ngens=None):
        if isinstance(relations, IntMatrix):
            rel = IntMatrix(relations)
        else:
            rel = IntMatrix(relations, ngens)
        if ngens is not None and rel.ncols != ngens:
            raise ValueError("relation width does not match generator count")
        self.presentation = rel
        self.ngens = rel.ncols

    @classmethod
    def free(cls, n):
        return cls(IntMatrix.zeros(0, n))

    @classmethod
    def cyclic(cls, m):
        return cls([[m]]) if m else cls.free(1)

    @classmethod
    def from_invariants(cls, torsion=(), free_rank=0):
        torsion = [d for d in torsion if d != 1]
        n = len(torsion) + free_rank
        return cls(IntMatrix.diag(torsion, len(torsion), n))

    @classmethod
    def trivial(cls):
        return cls.free(0)

    def direct_sum(self, other):
        top = self.presentation.hstack(IntMatrix.zeros(self.presentation.nrows, other.ngens))
        bot = IntMatrix.zeros(other.presentation.nrows, self.ngens).hstack(other.presentation)
        return FGAbelianGroup(top.vstack(bot))

    @cached_property
    def _smith(self):
        # SNF of the transpose: column span of M^T is the relation lattice
        return smith_decomposition(self.presentation.T)

    @cached_property
    def moduli(self):
        """Modulus of every canonical coordinate (0 means a free coordinate)."""
        d = list(self._smith.diagonal)
        return tuple(d + [0] * (self.ngens - len(d)))

    @property
    def to_canonical(self):
        """Unimodular matrix taking generator coordinates to canonical ones."""
        return self._smith.left

    @property
    def from_canonical(self):
        return self._smith.left_inv

    @cached_property
    def kept(self):
        """Canonical coordinates that carry information (modulus != 1)."""
        return tuple(i for i, d in enumerate(self.moduli) if d != 1)

    @cached_property
    def invariants(self):
        torsion = tuple(d for d in self.moduli if d > 1)
        free = sum(1 for d in self.moduli if d == 0)
        return torsion, free

    @property
    def normal_form(self):
        return self.invariants

    @property
    def order(self):
        torsion, free = self.invariants
        if free:
            return None
        out = 1
        for d in torsion:
            out *= d
        return out

    def is_trivial(self):
        return self.invariants == ((), 0)

    def canonical(self, x):
        """Reduced canonical coordinates of x (only the kept coordinates)."""
        y = self.to_canonical @ tuple(x)
        out = []
        for i in self.kept:
            d = self.moduli[i]
            out.append(y[i] % d if d else y[i])
        return tuple(out)

    def is_zero(self, x):
        return not any(self.canonical(x))

    def equal(self, x, y):
        return self.is_zero(tuple(a - b for a, b in zip(x, y)))

    def generator(self, k):
        return tuple(1 if i == k else 0 for i in range(self.ngens))

    def canonical_generator(self, i):
        """Generator-coordinate vector of canonical coordinate i."""
        return self.from_canonical.col(i)

    def is_isomorphic(self, other):
        return self.invariants == other.invariants

    def simplified(self):
        """Isomorphic group with diagonal presentation, plus the coordinate maps.

        Returns ``(S, to_s, from_s)`` where ``to_s`` maps generator vectors of
        self to generator vectors of S and ``from_s`` goes back.
        """
        keep = self.kept
        to_s = self.to_canonical.submatrix(rows=keep)
        from_s = self.from_canonical.submatrix(cols=keep)
        torsion = [self.moduli[i] for i in keep]
        rels = [[d if j == i else 0 for j in range(len(keep))]
                for i, d in enumerate(torsion) if d]
        return FGAbelianGroup(IntMatrix(rels, len(keep))), to_s, from_s

    def to_json(self):
        return {"presentation": self.presentation.to_json()}

    @classmethod
    def from_json(cls, doc):
        return cls(IntMatrix.from_json(doc["presentation"]))

    def __eq__(self, other):
        return isinstance(other, FGAbelianGroup) and self.presentation == other.presentation

    def __hash__(self):
        return hash(self.presentation)

    def __repr__(self):
        torsion, free = self.invariants
        parts = [f"Z/{d}" for d in torsion] + ["Z"] * free
        return "FGAbelianGroup(" + (" + ".join(parts) or "0") + ")"


def _membership_matrix(group):
    """Columns span the relation lattice of a group."""
    return group.presentation.T


class GroupHom:
    """Homomorphism given by an integer matrix on generators.

    ``matrix`` has shape ``(target.ngens, source.ngens)``; column k is the
    image of generator k.
    """

    def __init__(self, source, target, matrix, check=True):
        matrix = matrix if isinstance(matrix, IntMatrix) and not isinstance(matrix, QMatrix) \
            else IntMatrix(matrix, source.ngens)
        if matrix.shape != (target.ngens, source.ngens):
            raise ValueError(f"matrix shape {matrix.shape} does not match "
                             f"{target.ngens}x{source.ngens}")
        self.source, self.target, self.matrix = source, target, matrix
        if check:
            for rel in source.presentation.rows():
                if not target.is_zero(matrix @ rel):
                    raise ValueError("matrix does not respect the source relations")

    def __call__(self, x):
        return self.matrix @ tuple(x)

    def compose(self, inner):
        """self after inner."""
        return GroupHom(inner.source, self.target, self.matrix @ inner.matrix, check=False)

    def __add__(self, other):
        return GroupHom(self.source, self.target, self.matrix + other.matrix, check=False)

    def __neg__(self):
        return GroupHom(self.source, self.target, -self.matrix, check=False)

    def equals(self, other):
        return all(self.target.equal(self.matrix.col(k), other.matrix.col(k))
                   for k in range(self.source.ngens))

    def is_zero(self):
        return all(self.target.is_zero(self.matrix.col(k)) for k in range(self.source.ngens))

    def kernel(self):
        """Return ``(K, inclusion)`` presenting the kernel as a group."""
        G, H, F = self.source, self.target, self.matrix
        n = G.ngens
        rel_h = _membership_matrix(H)
        big = F.hstack(-rel_h) if rel_h.ncols else F
        gens = [v[:n] for v in integer_kernel(big)]
        basis = lattice_basis(gens, n)
        k = len(basis)
        bt = IntMatrix.from_columns(basis, n) if k else IntMatrix.zeros(n, 0)
        rels = []
        for r in G.presentation.rows():
            c = solve_linear(bt, r) if k else ()
            if c is None:
                raise ArithmeticError("relation not in kernel lattice")
            rels.append(c)
        K = FGAbelianGroup(IntMatrix(rels, k))
        return K, GroupHom(K, G, bt, check=False)

    def is_injective(self):
        return self.kernel()[0].is_trivial()

    def preimage(self, y):
        """Some x with self(x) == y in the target, or None."""
        H = self.target
        rel_h = _membership_matrix(H)
        big = self.matrix.hstack(rel_h) if rel_h.ncols else self.matrix
        sol = solve_linear(big, y)
        return None if sol is None else sol[:self.source.ngens]

    def is_surjective(self):
        return all(self.preimage(self.target.generator(k)) is not None
                   for k in range(self.target.ngens))

    def to_json(self):
        return {"matrix": self.matrix.to_json()}

    def __repr__(self):
        return f"GroupHom({self.source!r} -> {self.target!r}, {self.matrix.tolist()})"


# ---------------------------------------------------------------------------
# Hom and Ext
# ---------------------------------------------------------------------------

class HomGroup(NamedTuple):
    group: FGAbelianGroup
    basis: list  # GroupHom generating each cyclic summand, in order
    slots: list  # (canonical coord of source, canonical coord of target, multiplier)


def hom_group(G, H) -> HomGroup:
    """Hom(G, H) as a group, with a representative map per generator."""
    slots, orders = [], []
    for i in G.kept:
        a = G.moduli[i]
        for j in H.kept:
            b = H.moduli[j]
            if a == 0:
                c, order = 1, b
            elif b == 0:
                continue
            else:
                g = gcd(a, b)
                if g == 1:
                    continue
                c, order = b // g, g
            slots.append((i, j, c))
            orders.append(order)
    basis = []
    for i, j, c in slots:
        col = H.from_canonical.col(j)
        row = G.to_canonical.row(i)
        mat = IntMatrix([[c * x * y for y in row] for x in col], G.ngens)
        basis.append(GroupHom(G, H, mat, check=False))
    return HomGroup(_cyclic_sum(orders), basis, slots)


def hom_coordinates(hom: HomGroup, f: GroupHom):
    """Coordinates of f in the basis of ``hom``."""
    G, H = f.source, f.target
    C = H.to_canonical @ f.matrix @ G.from_canonical
    out = []
    for (i, j, c), order in zip(hom.slots, _orders(hom.group)):
        v = C[j, i]
        b = H.moduli[j]
        if b:
            v %= b
        if v % c:
            raise ArithmeticError("map is not well defined")
        v //= c
        out.append(v % order if order else v)
    return tuple(out)


def _cyclic_sum(orders):
    rels = []
    for idx, d in enumerate(orders):
        if d:
            rels.append([d if k == idx else 0 for k in range(len(orders))])
    return FGAbelianGroup(IntMatrix(rels, len(orders)))


def _orders(group):
    """Per-generator orders of a group built by _cyclic_sum (0 = infinite)."""
    out = [0] * group.ngens
    for r in group.presentation.rows():
        for k, v in enumerate(r):
            if v:
                out[k] = v
    return out


class ExtensionPresentation:
    """A short exact sequence 0 -> g0 -> e -> g1 -> 0 of f.g. abelian groups."""

    def __init__(self, g0, e, g1, iota, q, check=True):
        if not isinstance(iota, GroupHom):
            iota = GroupHom(g0, e, iota)
        if not isinstance(q, GroupHom):
            q = GroupHom(e, g1, q)
        self.g0, self.e, self.g1, self.iota, self.q = g0, e, g1, iota, q
        if check:
            problems = self.exactness_problems()
            if problems:
                raise ValueError("not a short exact sequence: " + "; ".join(problems))

    def exactness_problems(self):
        problems = []
        if not self.iota.is_injective():
            problems.append("iota is not injective")
        if not self.q.is_surjective():
            problems.append("q is not surjective")
        if not self.q.compose(self.iota).is_zero():
            problems.append("q o iota is not zero")
        K, inc = self.q.kernel()
        for k in range(K.ngens):
            if self.iota.preimage(inc.matrix.col(k)) is None:
                problems.append("kernel of q is larger than the image of iota")
                break
        return problems

    def is_exact(self):
        return not self.exactness_problems()

    def to_json(self):
        return {"g0": self.g0.to_json(), "e": self.e.to_json(), "g1": self.g1.to_json(),
                "iota": self.iota.matrix.to_json(), "q": self.q.matrix.to_json()}

    @classmethod
    def from_json(cls, doc):
        g0 = FGAbelianGroup.from_json(doc["g0"])
        e = FGAbelianGroup.from_json(doc["e"])
        g1 = FGAbelianGroup.from_json(doc["g1"])
        return cls(g0, e, g1, GroupHom(g0, e, IntMatrix.from_json(doc["iota"])),
                   GroupHom(e, g1, IntMatrix.from_json(doc["q"])))


class ExtGroup(NamedTuple):
    group: FGAbelianGroup
    representatives: list  # ExtensionPresentation per generator
    slots: list  # (torsion coord of g1, kept coord of g0, order)


def _ext_slots(G1, G0):
    slots = []
    for i in G1.kept:
        a = G1.moduli[i]
        if a == 0:
            continue
        for j in G0.kept:
            b = G0.moduli[j]
            g = a if b == 0 else gcd(a, b)
            if g > 1:
                slots.append((i, j, g))
    return slots


def extension_from_classes(G1, G0, classes) -> ExtensionPresentation:
    """Extension of G1 by G0 with prescribed lifts of the torsion generators.

    ``classes`` maps a torsion canonical coordinate i of G1 to a vector
    eps_i of G0 (generator coordinates): in the middle group, a_i times the
    canonical lift of coordinate i equals iota(eps_i).  The generators of
    the middle group are those of G0 followed by those of G1.
    """
    n0, n1 = G0.ngens, G1.ngens
    rows = [list(r) + [0] * n1 for r in G0.presentation.rows()]
    for r in G1.presentation.rows():
        y = G1.to_canonical @ r
        f = [0] * n0
        for i, eps in classes.items():
            a = G1.moduli[i]
            k = y[i] // a
            for t in range(n0):
                f[t] += k * eps[t]
        rows.append([-v for v in f] + list(r))
    E = FGAbelianGroup(IntMatrix(rows, n0 + n1))
    iota = IntMatrix([[1 if i == j else 0 for j in range(n0)] for i in range(n0 + n1)], n0)
    q = IntMatrix([[1 if j == n0 + i else 0 for j in range(n0 + n1)] for i in range(n1)],
                  n0 + n1)
    return ExtensionPresentation(G0, E, G1, GroupHom(G0, E, iota, check=False),
                                 GroupHom(E, G1, q, check=False), check=False)


def ext_group(G1, G0) -> ExtGroup:
    """Ext(G1, G0) with a representative extension per generator."""
    slots = _ext_slots(G1, G0)
    reps = []
    for i, j, _ in slots:
        reps.append(extension_from_classes(G1, G0, {i: G0.canonical_generator(j)}))
    return ExtGroup(_cyclic_sum([g for _, _, g in slots]), reps, slots)


def ext_class(ext: ExtensionPresentation):
    """Coordinates of an extension's class in the basis of ``ext_group``."""
    G1, G0 = ext.g1, ext.g0
    out = []
    for i, j, g in _ext_slots(G1, G0):
        a = G1.moduli[i]
        lift = ext.q.preimage(G1.canonical_generator(i))
        if lift is None:
            raise ValueError("q is not surjective")
        c = ext.iota.preimage(tuple(a * v for v in lift))
        if c is None:
            raise ValueError("sequence is not exact at the middle")
        out.append((G0.to_canonical @ c)[j] % g)
    return tuple(out)


def find_section(ext: ExtensionPresentation, extra=None):
    """Integer matrix S (e.ngens x g1.ngens) defining a section of q, or None.

    ``extra`` optionally adds linear constraints ``A @ vec(S) == 0`` on the
    column-stacked entries of S (used to demand zero rotation).
    """
    E, G1, Q = ext.e, ext.g1, ext.q.matrix
    nE, n1 = E.ngens, G1.ngens
    ME, M1 = E.presentation, G1.presentation
    rE, r1 = ME.nrows, M1.nrows
    # unknowns: vec(S) (nE*n1), y_r for each G1 relation (rE each), w_k (r1 each)
    nvar = nE * n1 + r1 * rE + n1 * r1
    rows, rhs = [], []
    for ri, rel in enumerate(M1.rows()):
        for t in range(nE):
            row = [0] * nvar
            for k in range(n1):
                row[k * nE + t] = rel[k]
            base = nE * n1 + ri * rE
            for s in range(rE):
                row[base + s] = -ME[s, t]
            rows.append(row)
            rhs.append(0)
    for k in range(n1):
        for u in range(n1):
            row = [0] * nvar
            for t in range(nE):
                row[k * nE + t] = Q[u, t]
            base = nE * n1 + r1 * rE + k * r1
            for s in range(r1):
                row[base + s] = -M1[s, u]
            rows.append(row)
            rhs.append(1 if u == k else 0)
    if extra is not None:
        for erow in extra:
            rows.append(list(erow) + [0] * (nvar - len(erow)))
            rhs.append(0)
    if not rows:
        return IntMatrix.zeros(nE, n1)
    sol = solve_linear(IntMatrix(rows, nvar), rhs)
    if sol is None:
        return None
    return IntMatrix.from_columns([sol[k * nE:(k + 1) * nE] for k in range(n1)], nE)
