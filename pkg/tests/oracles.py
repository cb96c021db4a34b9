"""Independent reference computations used by the tests.

Each oracle takes a different route from the library code it checks:
determinantal divisors instead of elimination, explicit finite group
arithmetic instead of presentations, fixed-point brute force instead of
lattice reduction, plain eigenvalues instead of the Cayley transform.
"""
from fractions import Fraction
from itertools import combinations, product
from math import gcd

import numpy as np


# --- integer matrices --------------------------------------------------------

def det_fraction(rows):
    n = len(rows)
    M = [[Fraction(v) for v in r] for r in rows]
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if M[r][c] != 0), None)
        if p is None:
            return 0
        if p != c:
            M[c], M[p] = M[p], M[c]
            det = -det
        det *= M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / M[c][c]
            M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return int(det)


def minors_invariants(A):
    """Nonzero invariant factors from gcds of k x k minors."""
    rows = [list(r) for r in A]
    if not rows:
        return []
    m, n = len(rows), len(rows[0])
    divisors = [1]
    for k in range(1, min(m, n) + 1):
        g = 0
        for rs in combinations(range(m), k):
            for cs in combinations(range(n), k):
                g = gcd(g, det_fraction([[rows[i][j] for j in cs] for i in rs]))
        if g == 0:
            break
        divisors.append(g)
    return [divisors[k] // divisors[k - 1] for k in range(1, len(divisors))]


# --- finite abelian groups ---------------------------------------------------

def count_homs(relations, ngens, target_moduli):
    """Number of homomorphisms Z^ngens / <relations> -> ⊕ Z/b, by enumeration."""
    elems = list(product(*[range(b) for b in target_moduli]))
    count = 0
    for images in product(elems, repeat=ngens):
        ok = True
        for rel in relations:
            for k, b in enumerate(target_moduli):
                if sum(c * img[k] for c, img in zip(rel, images)) % b:
                    ok = False
                    break
            if not ok:
                break
        count += ok
    return count


class CocycleGroup:
    """E_c: pairs (a mod n, b mod m) with (a,b)+(a',b') carrying c when b+b' >= m.

    This is the extension of Z/m by Z/n in which m times the lift of 1 equals c.
    """

    def __init__(self, m, n, c):
        self.m, self.n, self.c = m, n, c % n

    def add(self, x, y):
        s = x[1] + y[1]
        return ((x[0] + y[0] + self.c * (s // self.m)) % self.n, s % self.m)

    def elements(self):
        return [(a, b) for a in range(self.n) for b in range(self.m)]

    def multiple(self, k, x):
        out = (0, 0)
        for _ in range(k):
            out = self.add(out, x)
        return out


def equivalent_extensions(E1, E2):
    """Search all maps fixing the subgroup and the quotient coordinate."""
    for x in range(E1.n):
        # f(a, b) = a * (1,0) + b * (x,1), computed inside E2
        def f(el):
            return E2.add((el[0], 0), E2.multiple(el[1], (x, 1)))
        if all(f(E1.add(p, q)) == E2.add(f(p), f(q))
               for p in E1.elements() for q in E1.elements()):
            return True
    return False


def ext_classes_bruteforce(m, n):
    """Partition of c in Z/n into equivalence classes of extensions E_c."""
    groups = [CocycleGroup(m, n, c) for c in range(n)]
    label = [None] * n
    nxt = 0
    for i in range(n):
        if label[i] is not None:
            continue
        label[i] = nxt
        for j in range(i + 1, n):
            if label[j] is None and equivalent_extensions(groups[i], groups[j]):
                label[j] = nxt
        nxt += 1
    return label


# --- rotation algebra --------------------------------------------------------

def nearest_distance_bruteforce(r, theta, qmax, chunk=1 << 18):
    """min over |n|, |m| <= qmax of |r - m - n theta| in 64-bit fixed point.

    Returns (distance, n).  Fixed-point error is about qmax * 2^-64.
    """
    scale = 1 << 64
    th = int(Fraction(theta) * scale) % scale
    r = Fraction(r)
    rf = int((r - (r.numerator // r.denominator)) * scale) % scale
    TH, RF = np.uint64(th), np.uint64(rf)
    best, best_n = 2.0, None
    thf, rr = float(theta), float(r)
    for lo in range(-qmax, qmax + 1, chunk):
        ns = np.arange(lo, min(lo + chunk, qmax + 1), dtype=np.int64)
        x = ns.astype(np.uint64) * TH - RF  # wraps mod 2^64
        d = np.minimum(x, (np.uint64(0) - x)).astype(np.float64) / float(scale)
        m = np.rint(rr - ns * thf)
        d[np.abs(m) > qmax] = 2.0
        k = int(np.argmin(d))
        if d[k] < best:
            best, best_n = float(d[k]), int(ns[k])
    return best, best_n


# --- unitaries ---------------------------------------------------------------

def bott_eig(u, v):
    w = v @ u @ v.conj().T @ u.conj().T
    return float(np.sum(np.angle(np.linalg.eigvals(w))) / (2 * np.pi))


def rotation_eig(frames, base_dim=None):
    frames = np.asarray(frames)
    d = frames.shape[-1] if base_dim is None else base_dim
    total = 0.0
    for a, b in zip(frames[:-1], frames[1:]):
        total += float(np.sum(np.angle(np.linalg.eigvals(b @ a.conj().T))))
    return total / (2 * np.pi * d)
