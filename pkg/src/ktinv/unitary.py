"""Sampled unitaries: Bott elements, winding pairs, rotation numbers of paths.

Eigenphases of a unitary W are computed from its Cayley transform
``H = i (I + W)^{-1} (I - W)``, which is Hermitian with eigenvalues
``tan(phase / 2)``; the phases are therefore recovered in (-pi, pi) by a
Hermitian eigensolver.  The transform is well conditioned exactly when the
spectrum of W stays away from -1, which is also what the principal
logarithm needs.

Generalized permutation ("monomial") unitaries such as the winding blocks
are also handled in a compact form where products, adjoints and
eigenphases (via cycle products) are exact and cheap.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "SpectrumNearMinusOne",
    "StepTooLarge",
    "check_unitary",
    "haar_unitary",
    "eigenphases",
    "Monomial",
    "BottValue",
    "bott",
    "bott_loop",
    "WindingBlock",
    "UnitaryLoop",
    "make_winding_pair",
    "winding_norm_check",
    "UnitaryPath",
    "rotation_number",
    "rotation_report",
    "path_product",
    "exp_path",
    "projection_loop",
    "conjugation_sandwich",
    "conjugation_tail",
    "zeta_path",
    "bott_homotopy_scan",
    "phase_deformation",
]

TWO_PI = 2 * np.pi


class SpectrumNearMinusOne(ValueError):
    def __init__(self, message, index=None, gap=None):
        super().__init__(message)
        self.index, self.gap = index, gap


class StepTooLarge(ValueError):
    def __init__(self, message, index=None, angle=None):
        super().__init__(message)
        self.index, self.angle = index, angle


def check_unitary(U, tol=1e-10):
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError("expected a square matrix")
    err = np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0]))) if U.size else 0.0
    if err > tol:
        raise ValueError(f"matrix is not unitary (defect {err:.3e} > {tol:.1e})")
    return U


def haar_unitary(n, rng):
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def _dagger(A):
    return np.conj(np.swapaxes(A, -1, -2))


def eigenphases(W, gap=None):
    """Principal eigenphases of a unitary (or a stack of unitaries).

    With ``gap`` set, raises SpectrumNearMinusOne if some eigenvalue lies
    closer than ``gap`` to -1.  Matrices whose off-diagonal part is exactly
    zero are read off directly.
    """
    W = np.asarray(W, dtype=complex)
    single = W.ndim == 2
    Ws = W[None] if single else W
    n = Ws.shape[-1]
    out = np.empty(Ws.shape[:-1])
    idx = np.arange(n)
    off = Ws.copy()
    off[:, idx, idx] = 0
    diag_mask = ~np.any(off != 0, axis=(1, 2))
    if diag_mask.any():
        out[diag_mask] = np.angle(Ws[diag_mask][:, idx, idx])
    rest = np.flatnonzero(~diag_mask)
    if rest.size:
        eye = np.eye(n)
        try:
            H = 1j * np.linalg.solve(eye + Ws[rest], eye - Ws[rest])
        except np.linalg.LinAlgError:
            H = None
        if H is None or not np.all(np.isfinite(H)):
            for k in rest:
                try:
                    Hk = 1j * np.linalg.solve(eye + Ws[k], eye - Ws[k])
                    ok = np.all(np.isfinite(Hk))
                except np.linalg.LinAlgError:
                    ok = False
                if not ok:
                    raise SpectrumNearMinusOne("eigenvalue at -1", index=int(k), gap=0.0)
            H = 1j * np.linalg.solve(eye + Ws[rest], eye - Ws[rest])
        H = 0.5 * (H + _dagger(H))
        out[rest] = 2 * np.arctan(np.linalg.eigvalsh(H))
    if gap is not None:
        dist = 2 * np.abs(np.cos(out / 2))
        low = np.min(dist, axis=1) if n else np.full(len(out), 2.0)
        bad = np.flatnonzero(low < gap)
        if bad.size:
            k = int(bad[0])
            raise SpectrumNearMinusOne(
                f"spectrum within {low[k]:.3e} of -1 (gap {gap})", index=k, gap=float(low[k]))
    return out[0] if single else out


class Monomial(NamedTuple):
    """Generalized permutation matrix: column j is coeff[..., j] * e_{perm[j]}.

    ``coeff`` may carry leading batch axes; ``perm`` is shared.
    """
    perm: np.ndarray
    coeff: np.ndarray

    @classmethod
    def from_dense(cls, A, tol=0.0):
        A = np.asarray(A, dtype=complex)
        nz = np.abs(A) > tol
        if not (np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1)):
            return None
        perm = np.argmax(nz, axis=0)
        return cls(perm, A[perm, np.arange(A.shape[1])])

    @property
    def dim(self):
        return len(self.perm)

    def dense(self):
        n = self.dim
        out = np.zeros(self.coeff.shape[:-1] + (n, n), dtype=complex)
        out[..., self.perm, np.arange(n)] = self.coeff
        return out

    def __matmul__(self, other):
        return Monomial(self.perm[other.perm], other.coeff * self.coeff[..., other.perm])

    def adjoint(self):
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.dim)
        return Monomial(inv, np.conj(self.coeff)[..., inv])

    def cycles(self):
        seen = np.zeros(self.dim, dtype=bool)
        out = []
        for start in range(self.dim):
            if seen[start]:
                continue
            cyc, j = [], start
            while not seen[j]:
                seen[j] = True
                cyc.append(j)
                j = self.perm[j]
            out.append(np.array(cyc))
        return out

    def eigenphases(self):
        """Principal eigenphases, shape ``coeff.shape``; ordered cycle by cycle."""
        parts = []
        for cyc in self.cycles():
            length = len(cyc)
            prod = np.prod(self.coeff[..., cyc], axis=-1)
            base = np.angle(prod)[..., None]
            ang = (base + TWO_PI * np.arange(length)) / length
            parts.append(ang - TWO_PI * (ang > np.pi))
        return np.concatenate(parts, axis=-1)


class BottValue(NamedTuple):
    raw: float
    rounded: int
    residual: float
    min_gap: float


def _components(*mats):
    support = np.zeros(mats[0].shape[-2:], dtype=bool)
    for m in mats:
        support |= np.any(np.asarray(m) != 0, axis=tuple(range(np.ndim(m) - 2)))
    support |= support.T
    ncomp, labels = connected_components(csr_matrix(support), directed=False)
    return [np.flatnonzero(labels == c) for c in range(ncomp)]


def _phase_total(phases):
    return np.sum(phases, axis=-1) / TWO_PI


def _min_gap(phases):
    if phases.shape[-1] == 0:
        return np.full(phases.shape[:-1], 2.0)
    return np.min(2 * np.abs(np.cos(phases / 2)), axis=-1)


def _check_gap(low, gap, offset=0):
    bad = np.flatnonzero(np.atleast_1d(low) < gap)
    if bad.size:
        k = int(bad[0])
        g = float(np.atleast_1d(low)[k])
        raise SpectrumNearMinusOne(f"spectrum within {g:.3e} of -1 at sample {k + offset} "
                                   f"(gap {gap})", index=k + offset, gap=g)


def bott(u, v, gap=0.1) -> BottValue:
    """Bott element of an almost commuting pair: (1/2 pi) sum of principal
    eigenphases of v u v* u*."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape:
        raise ValueError("u and v must have the same shape")
    mu, mv = Monomial.from_dense(u), Monomial.from_dense(v)
    if mu is not None and mv is not None:
        ph = (mv @ mu @ mv.adjoint() @ mu.adjoint()).eigenphases()
    else:
        parts = []
        for blk in _components(u, v):
            ub, vb = u[np.ix_(blk, blk)], v[np.ix_(blk, blk)]
            parts.append(eigenphases(vb @ ub @ vb.conj().T @ ub.conj().T))
        ph = np.concatenate(parts) if parts else np.zeros(0)
    low = float(_min_gap(ph))
    _check_gap(low, gap)
    raw = float(_phase_total(ph))
    r = int(round(raw))
    return BottValue(raw, r, abs(raw - r), low)


class UnitaryLoop:
    """Unitaries sampled at t_k = k / grid on the circle.

    Frames are produced on demand, either from a vectorized ``frames_fn(t)``
    returning an array of shape ``(len(t), dim, dim)`` or, for generalized
    permutation loops, from ``perm`` and ``coeff_fn(t)``.
    """

    def __init__(self, grid, dim, frames_fn=None, perm=None, coeff_fn=None, closed=True):
        if frames_fn is None and coeff_fn is None:
            raise ValueError("need frames_fn or a monomial description")
        self.grid, self.dim, self.closed = int(grid), int(dim), closed
        self._frames_fn, self._perm, self._coeff_fn = frames_fn, perm, coeff_fn

    @classmethod
    def from_frames(cls, frames, closed=True):
        frames = np.asarray(frames, dtype=complex)
        grid = len(frames) - 1 if closed else len(frames)

        def fn(t):
            k = np.rint(np.asarray(t) * grid).astype(int)
            if closed:
                k = k % grid
            return frames[k]
        return cls(grid, frames.shape[-1], frames_fn=fn, closed=closed)

    @property
    def is_monomial(self):
        return self._coeff_fn is not None

    def times(self, ks=None):
        ks = np.arange(self.grid) if ks is None else np.asarray(ks)
        return ks / self.grid

    def monomial(self, ks=None) -> Monomial:
        if not self.is_monomial:
            raise ValueError("loop has no monomial description")
        return Monomial(self._perm, self._coeff_fn(self.times(ks)))

    def frames(self, ks=None):
        if self.is_monomial:
            return self.monomial(ks).dense()
        return np.asarray(self._frames_fn(self.times(ks)), dtype=complex)

    def frame(self, k):
        return self.frames([k])[0]

    def check(self, tol=1e-10, chunk=256):
        """Unitarity of every frame and closure when flagged closed."""
        worst = 0.0
        for s in range(0, self.grid, chunk):
            F = self.frames(np.arange(s, min(s + chunk, self.grid)))
            worst = max(worst, float(np.max(np.abs(F @ _dagger(F) - np.eye(self.dim)))))
        closure = float(np.max(np.abs(self.frame(self.grid) - self.frame(0)))) \
            if self.closed else 0.0
        return worst <= tol and closure <= tol, worst, closure


class BottLoopResult(NamedTuple):
    raw: np.ndarray
    rounded: np.ndarray
    max_residual: float
    min_gap: float


def bott_loop(w, z: UnitaryLoop, gap=0.1, chunk=128) -> BottLoopResult:
    """Bott element of (w, z(t)) at every circle sample of z."""
    w = np.asarray(w, dtype=complex)
    mw = Monomial.from_dense(w)
    if mw is not None and z.is_monomial:
        mz = z.monomial()
        ph = (mz @ mw @ mz.adjoint() @ mw.adjoint()).eigenphases()
        raws, lows = _phase_total(ph), _min_gap(ph)
        _check_gap(lows, gap)
    else:
        raws, lows = [], []
        blocks = None
        for s in range(0, z.grid, chunk):
            F = z.frames(np.arange(s, min(s + chunk, z.grid)))
            if blocks is None:
                blocks = _components(w, F)
            total = np.zeros(len(F))
            low = np.full(len(F), 2.0)
            for blk in blocks:
                wb = w[np.ix_(blk, blk)]
                Fb = F[:, blk][:, :, blk]
                ph = eigenphases(Fb @ wb @ _dagger(Fb) @ wb.conj().T)
                total += _phase_total(ph)
                low = np.minimum(low, _min_gap(ph))
            _check_gap(low, gap, offset=s)
            raws.append(total)
            lows.append(low)
        raws, lows = np.concatenate(raws), np.concatenate(lows)
    rounded = np.rint(raws).astype(int)
    return BottLoopResult(raws, rounded, float(np.max(np.abs(raws - rounded))),
                          float(np.min(lows)))


@dataclass(frozen=True)
class WindingBlock:
    M: int
    N: int
    L: int = 1

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("block size must be at least 2")
        if abs(self.N) > self.M:
            raise ValueError("|N| must not exceed M")
        if self.L not in (-1, 1):
            raise ValueError("corner exponent must be +1 or -1")

    def to_json(self):
        return {"M": self.M, "N": self.N, "L": self.L}


def _blocks(blocks):
    out = [b if isinstance(b, WindingBlock) else WindingBlock(**b) for b in blocks]
    if not out:
        raise ValueError("need at least one block")
    return out


def make_winding_pair(blocks, grid=2048):
    """Diagonal w and companion loop z(t) with B(w, z(t)) = sum of N_s.

    Block s of w is diag(1, om, ..., om^(M-1)) with om = exp(-2 pi i N/M);
    block s of z(t) is the cyclic shift e_j -> e_{j+1} whose wrap-around
    entry (row 0, column M-1) is exp(2 pi i L t).
    """
    blocks = _blocks(blocks)
    diag, perm, corners, offset = [], [], [], 0
    for b in blocks:
        diag.append(np.exp(-2j * np.pi * b.N * np.arange(b.M) / b.M))
        perm.append(offset + (np.arange(b.M) + 1) % b.M)
        corners.append((offset + b.M - 1, b.L))
        offset += b.M
    w = np.diag(np.concatenate(diag))
    perm = np.concatenate(perm)
    dim = offset

    def coeff(t):
        t = np.asarray(t, dtype=float)
        c = np.ones(t.shape + (dim,), dtype=complex)
        for col, L in corners:
            c[..., col] = np.exp(2j * np.pi * L * t)
        return c
    return w, UnitaryLoop(grid, dim, perm=perm, coeff_fn=coeff)


def _opnorms(A):
    """Operator 2-norms of a stack, from pinching bounds or an SVD."""
    upper = np.sqrt(np.max(np.sum(np.abs(A), axis=-1), axis=-1)
                    * np.max(np.sum(np.abs(A), axis=-2), axis=-1))
    lower = np.max(np.sqrt(np.sum(np.abs(A) ** 2, axis=-2)), axis=-1)
    out = upper.copy()
    loose = upper - lower > 1e-12 * np.maximum(upper, 1.0)
    if loose.any():
        out[loose] = np.linalg.norm(A[loose], ord=2, axis=(-2, -1))
    return out


class NormCheck(NamedTuple):
    lhs: float
    rhs: float
    passed: bool


def winding_norm_check(blocks, grid=2048, eps=None, chunk=128) -> NormCheck:
    """max_t ||w z(t) w* - z(t)|| against 2 pi max(|N|/M) + eps."""
    blocks = _blocks(blocks)
    eps = TWO_PI * (TWO_PI / grid) if eps is None else eps
    w, z = make_winding_pair(blocks, grid)
    rhs = TWO_PI * max(abs(b.N) / b.M for b in blocks) + eps
    mw = Monomial.from_dense(w)
    if mw is not None and z.is_monomial:
        # both sides share the permutation of z; the difference is monomial
        mz = z.monomial()
        conj = mw @ mz @ mw.adjoint()
        if np.array_equal(conj.perm, mz.perm):
            lhs = float(np.max(np.abs(conj.coeff - mz.coeff)))
            return NormCheck(lhs, rhs, lhs <= rhs)
    lhs = 0.0
    offset = 0
    for b in blocks:
        sl = slice(offset, offset + b.M)
        wb = w[sl, sl]
        for s in range(0, grid, chunk):
            F = z.frames(np.arange(s, min(s + chunk, grid)))[:, sl, sl]
            diff = wb @ F @ wb.conj().T - F
            lhs = max(lhs, float(np.max(_opnorms(diff))))
        offset += b.M
    return NormCheck(lhs, rhs, lhs <= rhs)


class UnitaryPath:
    """Unitary frames at t_k = k / time_grid, k = 0..time_grid.

    ``base_dim`` is the size of the underlying matrix algebra; frames of
    size 2 * base_dim come from the 2x2 amplification and the normalized
    trace is Tr / base_dim.  ``twist`` optionally records a unitary u0
    with end = u0 start u0*.
    """

    def __init__(self, frames, base_dim=None, twist=None, tol=1e-10, step_tol=0.5):
        frames = np.asarray(frames, dtype=complex)
        if frames.ndim != 3 or frames.shape[1] != frames.shape[2] or len(frames) < 2:
            raise ValueError("frames must be a stack of at least two square matrices")
        self.frames = frames
        self.base_dim = frames.shape[-1] if base_dim is None else int(base_dim)
        d = frames.shape[-1]
        defect = float(np.max(np.abs(frames @ _dagger(frames) - np.eye(d))))
        if defect > tol:
            raise ValueError(f"frame not unitary (defect {defect:.3e})")
        steps = np.linalg.norm(frames[1:] - frames[:-1], axis=(1, 2))
        if np.max(steps) > step_tol:
            k = int(np.argmax(steps))
            raise StepTooLarge(f"frames {k} and {k + 1} differ by {steps[k]:.3e}", index=k)
        self.twist = None
        if twist is not None:
            twist = np.asarray(twist, dtype=complex)
            gap = float(np.max(np.abs(twist @ frames[0] @ twist.conj().T - frames[-1])))
            if gap > 1e-8:
                raise ValueError(f"end differs from the twisted start by {gap:.3e}")
            self.twist = twist

    @property
    def time_grid(self):
        return len(self.frames) - 1

    @property
    def start(self):
        return self.frames[0]

    @property
    def end(self):
        return self.frames[-1]

    @property
    def boundary(self):
        return {"start": self.start, "end": self.end, "twist": self.twist}

    def adjoint(self):
        tw = None if self.twist is None else self.twist
        return UnitaryPath(_dagger(self.frames), self.base_dim, tw)

    def reversed(self):
        return UnitaryPath(self.frames[::-1], self.base_dim)

    def with_twist(self, u0):
        return UnitaryPath(self.frames, self.base_dim, u0)

    def then(self, other, tol=1e-8):
        """Concatenation (the end of self must match the start of other)."""
        if other.frames.shape[1:] != self.frames.shape[1:] or other.base_dim != self.base_dim:
            raise ValueError("paths have different sizes")
        gap = float(np.max(np.abs(self.end - other.start)))
        if gap > tol:
            raise ValueError(f"paths do not meet (gap {gap:.3e})")
        return UnitaryPath(np.concatenate([self.frames, other.frames[1:]]), self.base_dim)


class RotationReport(NamedTuple):
    value: float
    max_step_angle: float
    step_bound: float


def rotation_report(path: UnitaryPath, max_step=np.pi / 2, chunk=512) -> RotationReport:
    """Discrete rotation number with the step diagnostics.

    ``step_bound`` is the largest ||F_{k+1} F_k* - I||; refining the grid
    moves the value by far less than this.
    """
    F = path.frames
    total, worst, bound = 0.0, 0.0, 0.0
    d = F.shape[-1]
    for s in range(0, len(F) - 1, chunk):
        e = min(s + chunk, len(F) - 1)
        steps = F[s + 1:e + 1] @ _dagger(F[s:e])
        try:
            ph = eigenphases(steps)
        except SpectrumNearMinusOne as exc:
            raise StepTooLarge(f"step {s + exc.index} reaches -1", index=s + exc.index) from exc
        ang = np.max(np.abs(ph), axis=-1)
        if np.max(ang) >= max_step:
            k = int(np.argmax(ang))
            raise StepTooLarge(f"step {s + k} turns by {ang[k]:.3f} rad; refine the grid",
                               index=s + k, angle=float(ang[k]))
        worst = max(worst, float(np.max(ang)))
        bound = max(bound, float(np.max(_opnorms(steps - np.eye(d)))))
        total += float(np.sum(ph))
    return RotationReport(total / (TWO_PI * path.base_dim), worst, bound)


def rotation_number(path: UnitaryPath, max_step=np.pi / 2) -> float:
    return rotation_report(path, max_step).value


def path_product(p: UnitaryPath, q: UnitaryPath) -> UnitaryPath:
    if p.frames.shape != q.frames.shape or p.base_dim != q.base_dim:
        raise ValueError("paths must share grid and size")
    return UnitaryPath(p.frames @ q.frames, p.base_dim)


def _hermitian(h):
    h = np.asarray(h, dtype=complex)
    if np.max(np.abs(h - h.conj().T)) > 1e-12:
        raise ValueError("h must be self-adjoint")
    return 0.5 * (h + h.conj().T)


def exp_path(h, grid=4096, start=None):
    """t -> exp(2 pi i t h) (times ``start`` on the right)."""
    h = _hermitian(h)
    lam, V = np.linalg.eigh(h)
    t = np.linspace(0.0, 1.0, grid + 1)
    phases = np.exp(2j * np.pi * t[:, None] * lam[None, :])
    frames = (V[None] * phases[:, None, :]) @ V.conj().T
    if start is not None:
        frames = frames @ np.asarray(start, dtype=complex)
    return UnitaryPath(frames)


def projection_loop(p, grid=4096):
    """t -> exp(2 pi i t) p + (1 - p) for an orthogonal projection p."""
    p = _hermitian(p)
    if np.max(np.abs(p @ p - p)) > 1e-10:
        raise ValueError("p must be a projection")
    t = np.linspace(0.0, 1.0, grid + 1)
    n = p.shape[0]
    frames = (np.exp(2j * np.pi * t)[:, None, None] - 1) * p[None] + np.eye(n)[None]
    return UnitaryPath(frames)


def _rotations(n, grid):
    t = np.linspace(0.0, 1.0, grid + 1)
    c, s = np.cos(np.pi * t / 2), np.sin(np.pi * t / 2)
    R = np.zeros((grid + 1, 2 * n, 2 * n))
    eye = np.eye(n)
    R[:, :n, :n] = c[:, None, None] * eye
    R[:, :n, n:] = -s[:, None, None] * eye
    R[:, n:, :n] = s[:, None, None] * eye
    R[:, n:, n:] = c[:, None, None] * eye
    return R


def _dsum(a, b):
    n, m = a.shape[0], b.shape[0]
    out = np.zeros((n + m, n + m), dtype=complex)
    out[:n, :n], out[n:, n:] = a, b
    return out


def conjugation_sandwich(u, W, grid=4096) -> UnitaryPath:
    """t -> R_t (1 + W) R_t^-1 (u + 1) R_t (1 + W*) R_t^-1 in the 2x2 amplification.

    Runs from u + 1 at t = 0 to W u W* + 1 at t = 1 with constant
    determinant, so its rotation number vanishes.
    """
    u = check_unitary(u, 1e-8)
    W = check_unitary(W, 1e-8)
    if u.shape != W.shape:
        raise ValueError("u and W must have the same size")
    n = u.shape[0]
    R = _rotations(n, grid)
    A = R @ _dsum(np.eye(n), W)[None] @ np.swapaxes(R, 1, 2)
    frames = A @ _dsum(u, np.eye(n))[None] @ _dagger(A)
    return UnitaryPath(frames, base_dim=n)


def conjugation_tail(u, v_frames) -> UnitaryPath:
    """t -> v_t u v_t* + 1 for a sampled path of unitaries v_t."""
    u = np.asarray(u, dtype=complex)
    V = np.asarray(v_frames, dtype=complex)
    n = u.shape[0]
    inner = V @ u[None] @ _dagger(V)
    frames = np.zeros((len(V), 2 * n, 2 * n), dtype=complex)
    frames[:, :n, :n] = inner
    frames[:, n:, n:] = np.eye(n)
    return UnitaryPath(frames, base_dim=n)


def zeta_path(u_n, z, h, grid=4096) -> UnitaryPath:
    """Path from z + 1 to exp(2 pi i h) u_n z u_n* + 1.

    First half: the reversed conjugation sandwich joining z + 1 with
    u_n z u_n* + 1 (no rotation).  Second half: t -> exp(2 pi i t h) u_n z u_n*
    + 1, whose rotation number is the normalized trace of h.  ``z`` is a
    unitary sample (evaluate a loop at a circle point first).
    """
    u_n = check_unitary(u_n, 1e-8)
    z = check_unitary(z, 1e-8)
    h = _hermitian(h)
    n = u_n.shape[0]
    half = max(grid // 2, 1)
    target = u_n @ z @ u_n.conj().T
    first = conjugation_sandwich(target, u_n.conj().T, half).reversed()
    second = exp_path(h, half, start=target)
    amp = np.zeros((half + 1, 2 * n, 2 * n), dtype=complex)
    amp[:, :n, :n] = second.frames
    amp[:, n:, n:] = np.eye(n)
    return first.then(UnitaryPath(amp, base_dim=n))


def bott_homotopy_scan(pairs, gap=0.1, require_constant=True):
    """Rounded Bott values along a sampled homotopy of pairs."""
    values = []
    for k, (u, v) in enumerate(pairs):
        try:
            values.append(bott(u, v, gap).rounded)
        except SpectrumNearMinusOne as exc:
            raise SpectrumNearMinusOne(f"pair {k}: {exc}", index=k, gap=exc.gap) from exc
    if require_constant and len(set(values)) > 1:
        k = next(i for i, v in enumerate(values) if v != values[0])
        raise ValueError(f"Bott value changes at pair {k}: {values[0]} -> {values[k]}")
    return values


def phase_deformation(u, v, steps, rng, turns=1.0):
    """Pairs (e^{i a} D u D*, D v D*) with D = diag(exp(i theta_j t)) for t in [0, 1].

    Conjugating both unitaries by the same diagonal unitary and rotating u by
    a scalar phase keep v u v* u* in one similarity class.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    theta = rng.uniform(-np.pi, np.pi, size=u.shape[0]) * turns
    alpha = rng.uniform(-np.pi, np.pi) * turns
    out = []
    for t in np.linspace(0.0, 1.0, steps):
        d = np.exp(1j * theta * t)
        D = np.diag(d)
        out.append((np.exp(1j * alpha * t) * D @ u @ D.conj(), D @ v @ D.conj()))
    return out
