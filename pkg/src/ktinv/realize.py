"""Realizing rotation data by stage maps, and the rotation-algebra classifier.

``realize_phi`` builds integer maps h_n between telescoped stages whose
dimension values approximate a prescribed homomorphism phi from the odd
group into affine functions, together with the gluing maps
psi_n = h_{n+1} chi1_n - chi0_{n+1} h_n.  All inequalities are checked in
exact rational arithmetic.

``classify_rotation_algebra`` decides membership of a pair of reals in
(Z + theta Z)^2 up to a tolerance, using exact lattice enumeration over
|n| <= qmax.
"""
from __future__ import annotations

import re
from fractions import Fraction
from math import isqrt, log10, ceil
from typing import NamedTuple

from .dimgrp import (
    AffElement,
    InductiveSystem,
    approx_in_range_D,
    dimension_matrix,
)
from .orderext import Ambient, CochainSequence, CocycleSequence, _kernel_group
from .zmod import (
    FGAbelianGroup,
    GroupHom,
    IntMatrix,
    QMatrix,
    hom_coordinates,
    hom_group,
    integer_kernel,
    _as_frac,
)

__all__ = [
    "PhiSpec",
    "DepthExhausted",
    "RealizationCertificate",
    "realize_phi",
    "verify_certificate",
    "telescoping_check",
    "RotationAlgebraModel",
    "Verdict",
    "classify_rotation_algebra",
    "lattice_distance",
    "parse_real",
    "rotation_algebra_ambient",
    "ker_q_resolution",
]


# ---------------------------------------------------------------------------
# phi and the certificate
# ---------------------------------------------------------------------------

class PhiSpec:
    """A homomorphism from the odd group into affine functions.

    ``last_values`` is a rational matrix with one row per extreme trace of
    the last stage T and one column per generator of the odd group at stage
    T.  Values at an earlier stage n are ``last_values @ chi1_{T,n}``.
    ``precision`` bounds the distance of each stored value to the true one.
    """

    def __init__(self, system: InductiveSystem, last_values, precision=0):
        self.system = system
        T = system.depth
        self.last_values = last_values if isinstance(last_values, QMatrix) \
            else QMatrix(last_values, system.rank(T))
        if self.last_values.shape != (system.rank(T), system.rank(T)):
            raise ValueError("phi values must be a k_T x k_T matrix")
        self.precision = _as_frac(precision)
        if self.precision < 0:
            raise ValueError("precision must be nonnegative")
        self._cache = {}

    @classmethod
    def zero(cls, system):
        k = system.rank(system.depth)
        return cls(system, QMatrix.zeros(k, k))

    @classmethod
    def from_map(cls, system, g, stage=1):
        """phi = D o g for an integer map g from the odd to the even group at ``stage``.

        The odd connecting map from ``stage`` to T must be invertible over Q.
        """
        T = system.depth
        inv = _rational_inverse(system.compose(1, T, stage))
        return cls(system, dimension_matrix(system, stage, T) @ IntMatrix(g) @ inv)

    @classmethod
    def constant(cls, system, generator, value, precision=0):
        """phi(e_generator) is the constant function ``value``; other generators map to 0."""
        k = system.rank(system.depth)
        rows = [[_as_frac(value) if j == generator else 0 for j in range(k)] for _ in range(k)]
        return cls(system, QMatrix(rows, k), precision)

    def values(self, n):
        if n not in self._cache:
            T = self.system.depth
            self._cache[n] = self.last_values @ self.system.compose(1, T, n)
        return self._cache[n]

    def column(self, n, j):
        return AffElement(self.system.depth, self.values(n).col(j))

    def to_json(self):
        return {"system": self.system.to_json(), "values": self.last_values.to_json(),
                "precision": str(self.precision)}

    @classmethod
    def from_json(cls, doc):
        return cls(InductiveSystem.from_json(doc["system"]), QMatrix.from_json(doc["values"]),
                   Fraction(doc.get("precision", "0")))


def _rational_inverse(A):
    n = A.nrows
    if A.ncols != n:
        raise ValueError("matrix must be square")
    M = [[Fraction(v) for v in A.row(i)] + [Fraction(int(i == j)) for j in range(n)]
         for i in range(n)]
    for c in range(n):
        p = next((r for r in range(c, n) if M[r][c]), None)
        if p is None:
            raise ValueError("matrix is singular")
        M[c], M[p] = M[p], M[c]
        piv = M[c][c]
        M[c] = [v / piv for v in M[c]]
        for r in range(n):
            if r != c and M[r][c]:
                f = M[r][c]
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return QMatrix([row[n:] for row in M], n)


class DepthExhausted(RuntimeError):
    def __init__(self, message, round_index, stage, slack=None):
        super().__init__(message)
        self.round_index, self.stage, self.slack = round_index, stage, slack


class RealizationCertificate(NamedTuple):
    system: InductiveSystem        # telescoped; its last stage is the evaluation stage
    stages: tuple                  # original stage of every certificate stage
    h: CochainSequence             # h_n from certificate stage n to n + 1
    psi: CocycleSequence           # psi_n = h_{n+1} chi1_n - chi0_{n+1} h_n
    depth: int
    bounds_report: dict


def _bound_col(system, stage, j, factor, T, precision=0):
    D = dimension_matrix(system, stage, T)
    return AffElement(T, tuple(factor * v - precision for v in D.col(j)))


def _ineq2(system, h_prev, h_new, s_prev, s_cur, s_next, n):
    """Coordinate slack of |h_n chi1 e_j - chi0 h_{n-1} e_j| < 2^(2-n) ell^-1 chi0 e_j."""
    lhs = h_new @ system.compose(1, s_cur, s_prev) - system.compose(0, s_next, s_cur) @ h_prev
    chi = system.compose(0, s_next, s_prev)
    factor = Fraction(1, 2 ** (n - 2) * system.ell(s_prev)) if n >= 2 else None
    slack = None
    for i in range(lhs.nrows):
        for j in range(lhs.ncols):
            s = factor * chi[i, j] - abs(lhs[i, j])
            slack = s if slack is None else min(slack, s)
    return slack, lhs


def realize_phi(phi: PhiSpec, depth, max_search=None) -> RealizationCertificate:
    """Build h_1..h_depth approximating phi along a greedily chosen subsequence.

    Round n starts at the stage s_n reached so far, looks for the first
    stage m > s_n where every generator e_j has a preimage xi_j with
    |phi chi1(e_j) - D(xi_j)| < 2^-n ell(s_n)^-1 D(e_j), and then takes the
    first stage l >= m where the coordinate inequality linking h_n to
    h_{n-1} holds.  Raises DepthExhausted when the system runs out of stages.
    """
    s = phi.system
    T = s.depth
    if not 1 <= depth <= T - 2:
        raise ValueError("depth must lie between 1 and the number of stages minus 2")
    if not s.is_admissible():
        raise ValueError("system does not satisfy the growth condition")
    sel = [1]
    hs = []
    for n in range(1, depth + 1):
        cur = sel[-1]
        factor = Fraction(1, 2 ** n * s.ell(cur))
        k = s.rank(cur)
        bounds = [_bound_col(s, cur, j, factor, T, phi.precision) for j in range(k)]
        if any(v <= 0 for b in bounds for v in b.values):
            raise DepthExhausted(f"round {n}: bound at stage {cur} is below the precision of phi",
                                 n, cur, min(min(b.values) for b in bounds))
        found = False
        best_slack = None
        last_m = T if n == depth else T - (depth - n)
        for m in range(cur + 1, last_m + 1):
            xis = []
            for j in range(k):
                xi = approx_in_range_D(phi.column(cur, j), s, bounds[j], 1, start_stage=m)
                if xi is None:
                    break
                xis.append(xi.coords)
            if len(xis) < k:
                continue
            eta = IntMatrix.from_columns(xis, s.rank(m))
            for ell in range(m, last_m + 1):
                h = s.compose(0, ell, m) @ eta
                if n >= 2:
                    slack, _ = _ineq2(s, hs[-1], h, sel[-2], cur, ell, n)
                    if slack <= 0:
                        best_slack = slack if best_slack is None else max(best_slack, slack)
                        continue
                hs.append(h)
                sel.append(ell)
                found = True
                break
            if found:
                break
        if not found:
            raise DepthExhausted(f"round {n}: no stage up to {last_m} meets the bounds",
                                 n, cur, best_slack)
    stages = tuple(sel) if sel[-1] == T else tuple(sel) + (T,)
    cs = s.select(stages)
    h = CochainSequence(cs, hs, lag=1, parity=0)
    psi = CocycleSequence(cs, [hs[n] @ cs.chi(1, n) - cs.chi(0, n + 1) @ hs[n - 1]
                               for n in range(1, depth)], lag=1, parity=0)
    cert = RealizationCertificate(cs, stages, h, psi, depth, {})
    report = verify_certificate(cert, phi)
    if not report["ok"]:
        raise ArithmeticError(f"certificate failed verification: {report}")
    return cert._replace(bounds_report=report)


def verify_certificate(cert: RealizationCertificate, phi: PhiSpec) -> dict:
    """Re-check every inequality of a certificate exactly.

    Slack values are minima over coordinates of (bound - |lhs|); an
    inequality on phi holds for the true phi when its slack exceeds the
    declared precision.
    """
    cs, st, depth = cert.system, cert.stages, cert.depth
    T = cs.depth
    hs = cert.h.h
    approx, coord, growth, psi_slack = [], [], [], []
    for n in range(1, depth + 1):
        D = dimension_matrix(cs, n, T)
        Dh = dimension_matrix(cs, n + 1, T) @ hs[n - 1]
        target = phi.values(st[n - 1])
        factor = Fraction(1, 2 ** n * cs.ell(n))
        slack = min(factor * D[i, j] - abs(target[i, j] - Dh[i, j])
                    for i in range(D.nrows) for j in range(D.ncols))
        approx.append(slack - phi.precision)
    for n in range(2, depth + 1):
        slack, _ = _ineq2(cs, hs[n - 2], hs[n - 1], n - 1, n, n + 1, n)
        coord.append(slack)
    for n in range(1, cs.depth):
        a, b = cs.chi(0, n), cs.chi(1, n)
        scale = 2 ** (n + 1)
        growth.append(min(x - scale * max(abs(y), 1)
                          for ra, rb in zip(a.rows(), b.rows()) for x, y in zip(ra, rb)))
    for n, p in enumerate(cert.psi.psi, start=1):
        chi = cs.compose(0, n + 2, n)
        factor = Fraction(1, 2 ** (n - 1) * cs.ell(n))
        psi_slack.append(min(factor * chi[i, j] - abs(p[i, j])
                             for i in range(p.nrows) for j in range(p.ncols)))
    ok = (all(v > 0 for v in approx) and all(v > 0 for v in coord)
          and all(v >= 0 for v in growth) and all(v > 0 for v in psi_slack))
    return {"ok": ok, "approximation": approx, "coordinate": coord, "growth": growth,
            "psi": psi_slack, "precision": phi.precision}


class TelescopingResult(NamedTuple):
    lhs: list        # partial sums, one AffElement per generator
    rhs: list        # closed forms
    gap: Fraction
    residual: Fraction
    bound: Fraction
    passed: bool


def telescoping_check(cert: RealizationCertificate, phi: PhiSpec, stage) -> TelescopingResult:
    """Compare sum_{k>n} D chi0 psi_k chi1_{k,n}(e_j) with its closed form
    phi chi1(e_j) - D chi0 h_{n+1} chi1_n(e_j).

    ``residual`` is the exact defect of the telescoping identity (0 unless
    the certificate is corrupted); ``gap`` is the distance between the two
    sides and is at most 2^(1-depth) plus the declared precision.
    """
    cs, depth = cert.system, cert.depth
    n = stage
    if not 1 <= n < depth:
        raise ValueError("stage must satisfy 1 <= stage < depth")
    T = cs.depth
    hs, psis = cert.h.h, cert.psi.psi

    def A(k):  # D chi0_{T,k+1} h_k chi1_{k,n}
        return dimension_matrix(cs, k + 1, T) @ hs[k - 1] @ cs.compose(1, k, n)

    k_n = cs.rank(n)
    partial = QMatrix.zeros(cs.rank(T), k_n)
    for k in range(n + 1, depth):
        partial = partial + dimension_matrix(cs, k + 2, T) @ psis[k - 1] @ cs.compose(1, k, n)
    closed = phi.values(cert.stages[n - 1]) - A(n + 1)
    residual_m = partial - (A(depth) - A(n + 1))
    residual = max((abs(v) for r in residual_m.rows() for v in r), default=Fraction(0))
    gap = max((abs(a - b) for ra, rb in zip(partial.rows(), closed.rows())
               for a, b in zip(ra, rb)), default=Fraction(0))
    bound = Fraction(1, 2 ** (depth - 1)) + phi.precision
    lhs = [AffElement(T, partial.col(j)) for j in range(k_n)]
    rhs = [AffElement(T, closed.col(j)) for j in range(k_n)]
    return TelescopingResult(lhs, rhs, gap, residual, bound, residual == 0 and gap <= bound)


# ---------------------------------------------------------------------------
# rotation algebra classifier
# ---------------------------------------------------------------------------

def _golden_conjugate(digits):
    scale = 10 ** digits
    return Fraction(isqrt(5 * scale * scale) - scale, 2 * scale), Fraction(1, scale)


class RotationAlgebraModel(NamedTuple):
    """theta as a rational surrogate with |theta - true theta| <= theta_error."""
    theta: Fraction
    theta_error: Fraction
    tol: Fraction
    qmax: int
    label: str = "theta"

    @classmethod
    def golden(cls, qmax=10 ** 6, tol="1e-9", digits=None):
        tol = Fraction(tol)
        digits = digits or _digits_needed(qmax, tol)
        theta, err = _golden_conjugate(digits)
        return cls(theta, err, tol, int(qmax), "golden")

    @classmethod
    def from_string(cls, text, qmax=10 ** 6, tol="1e-9"):
        if text.strip().lower() == "golden":
            return cls.golden(qmax, tol)
        digits = len(text.split(".")[1]) if "." in text else 0
        theta = Fraction(text)
        if not 0 < theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        return cls(theta, Fraction(1, 2 * 10 ** digits) if digits else Fraction(0),
                   Fraction(tol), int(qmax), text)

    def precision_margin(self):
        """Largest possible shift of any |r - m - n theta| with |n| <= qmax."""
        return self.qmax * self.theta_error

    def float_theta(self):
        return float(self.theta)


def _digits_needed(qmax, tol):
    # keep qmax * error at least six orders below tol
    return max(30, ceil(log10(qmax)) + ceil(-log10(float(tol))) + 8)


_EXPR = re.compile(r"^\s*([+-]?[^+\-]+?)?\s*(?:([+-])\s*([^+\-]*?)\s*\*?\s*theta)?\s*$")


def parse_real(text, model: RotationAlgebraModel):
    """Exact value of '0.5', '3/7', '3+2*theta', '-5theta' or '2-theta'."""
    text = text.strip().replace(" ", "")
    if "theta" not in text:
        return Fraction(text)
    head, _, tail = text.partition("theta")
    if tail:
        raise ValueError(f"cannot parse {text!r}")
    head = head.rstrip("*")
    split = max(head.rfind("+"), head.rfind("-"))
    const, coef = (head[:split], head[split:]) if split > 0 else ("", head)
    if coef in ("", "+"):
        c = Fraction(1)
    elif coef == "-":
        c = Fraction(-1)
    else:
        c = Fraction(coef)
    return (Fraction(const) if const else Fraction(0)) + c * model.theta


class Verdict(NamedTuple):
    verdict: str                # "Trivial", "NonTrivial" or "Undecided"
    distances: tuple            # per coordinate, best |r - m - n theta| found (Fraction)
    witnesses: tuple            # per coordinate (m, n) attaining it
    representative: tuple | None  # residues r - m - n theta for NonTrivial
    precision_margin: Fraction


def _reduce(u, v):
    """Lagrange-Gauss reduction of a 2D basis with exact entries.

    Vectors are (x, y, n, m): coordinates plus integer labels.
    """
    def norm(a):
        return a[0] * a[0] + a[1] * a[1]

    def dot(a, b):
        return a[0] * b[0] + a[1] * b[1]

    if norm(u) > norm(v):
        u, v = v, u
    while True:
        mu = dot(u, v) / norm(u)
        k = round(mu)
        if k:
            v = tuple(b - k * a for a, b in zip(u, v))
        if norm(v) >= norm(u):
            return u, v
        u, v = v, u


def _enumerate(theta, r, Q, Y, mmax):
    """All (n, m) with |n| <= Q, |m| <= mmax and |n theta + m - r| <= Y."""
    u = (Fraction(1, Q), theta / Y, 1, 0)
    v = (Fraction(0), 1 / Y, 0, 1)
    u, v = _reduce(u, v)
    # target (0, r / Y) = alpha u + beta v
    det = u[0] * v[1] - u[1] * v[0]
    ty = r / Y
    alpha = (-ty * v[0]) / det
    beta = (u[0] * ty) / det
    uu = float(u[0] * u[0] + u[1] * u[1])
    mu = float((u[0] * v[0] + u[1] * v[1]) / (u[0] * u[0] + u[1] * u[1]))
    vstar2 = float(det * det) / uu
    out = []
    rad2 = 2.0
    brange = (2.0 / vstar2) ** 0.5 + 1
    fb = float(beta)
    for b in range(int(fb - brange) - 1, int(fb + brange) + 2):
        db = b - fb
        rem = rad2 - db * db * vstar2
        if rem < -1e-9:
            continue
        arange = (max(rem, 0.0) / uu) ** 0.5 + 1
        centre = float(alpha) - mu * db
        for a in range(int(centre - arange) - 1, int(centre + arange) + 2):
            n = a * u[2] + b * v[2]
            m = a * u[3] + b * v[3]
            if abs(n) > Q or abs(m) > mmax:
                continue
            if abs(n * theta + m - r) <= Y:
                out.append((n, m))
    return out


def lattice_distance(r, theta, qmax, start):
    """Smallest |r - m - n theta| over |n|, |m| <= qmax, exactly.

    Returns ``(distance, (m, n))``.  The search box in the distance
    direction starts at ``start`` and doubles until a point is found.
    """
    r = _as_frac(r)
    Y = _as_frac(start)
    while True:
        pts = _enumerate(theta, r, qmax, Y, qmax)
        if pts:
            best = min(pts, key=lambda p: (abs(p[0] * theta + p[1] - r), abs(p[0]), p))
            n, m = best
            return abs(r - m - n * theta), (m, n)
        if Y > 2 * (abs(r) + qmax):
            raise ValueError("no lattice point inside the box")
        Y *= 2


def classify_rotation_algebra(model: RotationAlgebraModel, phi) -> Verdict:
    """Is phi = (r1, r2) in (Z + theta Z)^2, up to ``model.tol``?

    Per coordinate: distance <= tol counts as a member, distance > 2 tol as
    a non-member, anything between is Undecided.  Distances within the
    surrogate's precision margin of a threshold also count as Undecided.
    """
    tol, margin = model.tol, model.precision_margin()
    dists, wits, states = [], [], []
    for r in phi:
        d, w = lattice_distance(_as_frac(r), model.theta, model.qmax, 2 * tol)
        dists.append(d)
        wits.append(w)
        if d <= tol - margin:
            states.append("in")
        elif d > 2 * tol + margin:
            states.append("out")
        else:
            states.append("edge")
    if "out" in states:
        rep = tuple(_as_frac(r) - m - n * model.theta for r, (m, n) in zip(phi, wits))
        return Verdict("NonTrivial", tuple(dists), tuple(wits), rep, margin)
    if "edge" in states:
        return Verdict("Undecided", tuple(dists), tuple(wits), None, margin)
    return Verdict("Trivial", tuple(dists), tuple(wits), None, margin)


def rotation_algebra_ambient(model: RotationAlgebraModel) -> Ambient:
    """K0 = K1 = Z^2 with D(a, b) = a + b theta, one trace, constants (1, theta)."""
    g = FGAbelianGroup.free(2)
    return Ambient(g, g, QMatrix([[1, 0], [0, 1]]), ("1", str(model.theta)))


# ---------------------------------------------------------------------------
# Hom(G1, -) applied to ker D -> G0 -> Aff
# ---------------------------------------------------------------------------

def ker_q_resolution(ambient: Ambient) -> dict:
    """Exactness of 0 -> Hom(G1, ker D) -> Hom(G1, G0) -> Hom(G1, Aff).

    Every claim comes with witnesses: the kernel of the first map is
    computed, and each generator of the kernel of the second map is given an
    explicit preimage.  The quotient Hom(G1, Aff) / D o Hom(G1, G0) is
    described by its real dimension and the lattice generators.
    """
    g0, g1, D = ambient.g0, ambient.g1, ambient.dmap
    kd, bd = _kernel_group(D, g0)
    inc = GroupHom(kd, g0, bd)
    h_kd = hom_group(g1, kd)
    h_g0 = hom_group(g1, g0)
    # first map, in coordinates of the two Hom groups
    cols = [hom_coordinates(h_g0, inc.compose(f)) for f in h_kd.basis]
    A = IntMatrix.from_columns(cols, h_g0.group.ngens) if cols \
        else IntMatrix.zeros(h_g0.group.ngens, 0)
    alpha = GroupHom(h_kd.group, h_g0.group, A)
    injective = alpha.is_injective()
    # second map: flattened rational values of D o h for each basis element
    flat = []
    for f in h_g0.basis:
        img = D @ f.matrix
        flat.append([v for row in img.rows() for v in row])
    nflat = D.nrows * g1.ngens
    Bm = QMatrix.from_columns(flat, nflat) if flat else QMatrix.zeros(nflat, 0)
    image_in_kernel = all(not any(Bm @ c) for c in A.columns())
    kern = integer_kernel(Bm) if flat else []
    witnesses, exact_middle = [], True
    for vec in kern:
        pre = alpha.preimage(vec)
        witnesses.append({"kernel_element": list(vec),
                          "preimage": None if pre is None else list(pre)})
        if pre is None:
            exact_middle = False
    # lattice D o Hom(G1, G0) inside Hom(G1, Aff) = R^(ntraces x free rank)
    t = ambient.ntraces
    free_coords = [i for i, a in enumerate(g1.moduli) if a == 0]
    consts = ambient.constants
    lattice = []
    for f in h_g0.basis:
        img = D @ f.matrix @ g1.from_canonical
        if not any(img.col(i)[r] for i in free_coords for r in range(D.nrows)):
            continue
        gen = []
        for i in free_coords:
            col = img.col(i)
            for tr in range(t):
                gen.append({c: str(col[ci * t + tr]) for ci, c in enumerate(consts)
                            if col[ci * t + tr] != 0})
        lattice.append(gen)
    return {
        "hom_g1_kerd": list(h_kd.group.invariants[0]) + ["Z"] * h_kd.group.invariants[1],
        "hom_g1_g0": list(h_g0.group.invariants[0]) + ["Z"] * h_g0.group.invariants[1],
        "first_map_injective": injective,
        "image_in_kernel": image_in_kernel,
        "kernel_in_image": exact_middle,
        "exact": injective and image_in_kernel and exact_middle,
        "witnesses": witnesses,
        "hom_g1_aff_dim": t * len(free_coords),
        "quotient_lattice": lattice,
    }
