"""Dense nonsymmetric eigensolver for small real matrices.

Householder reduction to upper Hessenberg form followed by the Francis
double-shift QR iteration with deflation; eigenvectors by inverse iteration
on the original matrix with a complex LU factorization.  Self-contained on
purpose: the system Jacobians are 6x6 and owning the solver keeps the
numeric dependency surface to plain array arithmetic.

Nonreal eigenvalues of a real matrix are produced in exact conjugate pairs
(both roots come from the same real 2x2 block).
"""

from __future__ import annotations

import numpy as np


class EigenSolverError(RuntimeError):
    """The QR iteration failed to converge or an eigenpair failed validation."""


_EPS = float(np.finfo(np.float64).eps)


def hessenberg_reduce(a: np.ndarray) -> np.ndarray:
    """Householder similarity reduction to upper Hessenberg form (copy)."""
    h = np.array(a, dtype=np.float64, copy=True)
    n = h.shape[0]
    if h.shape != (n, n):
        raise ValueError("matrix must be square")
    for k in range(n - 2):
        x = h[k + 1:, k]
        alpha = np.sqrt(np.dot(x, x))
        if alpha == 0.0:
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x.copy()
        v[0] -= alpha
        vnorm2 = np.dot(v, v)
        if vnorm2 == 0.0:
            continue
        # H = I - 2 v v^T / (v^T v), applied from both sides
        h[k + 1:, k:] -= np.outer(2.0 * v / vnorm2, v @ h[k + 1:, k:])
        h[:, k + 1:] -= np.outer(h[:, k + 1:] @ v, 2.0 * v / vnorm2)
        h[k + 2:, k] = 0.0
    return h


def _eig2x2(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]]; exact conjugates when complex."""
    tr = 0.5 * (a + d)
    det = a * d - b * c
    disc = tr * tr - det
    if disc >= 0.0:
        s = np.sqrt(disc)
        # avoid cancellation: compute the larger root first
        l1 = tr + s if tr >= 0 else tr - s
        l2 = det / l1 if l1 != 0.0 else tr - s
        return complex(l1), complex(l2)
    s = np.sqrt(-disc)
    return complex(tr, s), complex(tr, -s)


def qr_eigvals(a: np.ndarray, max_sweeps: int = 40) -> np.ndarray:
    """All eigenvalues of a real square matrix via shifted QR on Hessenberg form."""
    h = hessenberg_reduce(a)
    n = h.shape[0]
    vals = np.empty(n, dtype=np.complex128)
    nfound = 0
    hi = n - 1
    iters = 0
    while hi >= 0:
        # locate a negligible subdiagonal entry
        lo = hi
        while lo > 0:
            s = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            if s == 0.0:
                s = 1.0
            if abs(h[lo, lo - 1]) <= _EPS * s:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            vals[nfound] = h[hi, hi]
            nfound += 1
            hi -= 1
            iters = 0
            continue
        if lo == hi - 1:
            l1, l2 = _eig2x2(h[hi - 1, hi - 1], h[hi - 1, hi],
                             h[hi, hi - 1], h[hi, hi])
            vals[nfound] = l1
            vals[nfound + 1] = l2
            nfound += 2
            hi -= 2
            iters = 0
            continue

        iters += 1
        if iters > max_sweeps:
            raise EigenSolverError(
                f"QR iteration failed to converge on a block of size {hi - lo + 1}")

        # Francis double shift from the trailing 2x2 (exceptional every 10)
        if iters % 10 == 0:
            ex = abs(h[hi, hi - 1]) + abs(h[hi - 1, hi - 2])
            s_shift = 1.5 * ex
            t_shift = ex * ex
        else:
            s_shift = h[hi - 1, hi - 1] + h[hi, hi]
            t_shift = (h[hi - 1, hi - 1] * h[hi, hi]
                       - h[hi - 1, hi] * h[hi, hi - 1])

        # first column of (H - a I)(H - b I)
        x = (h[lo, lo] * h[lo, lo] + h[lo, lo + 1] * h[lo + 1, lo]
             - s_shift * h[lo, lo] + t_shift)
        y = h[lo + 1, lo] * (h[lo, lo] + h[lo + 1, lo + 1] - s_shift)
        z = h[lo + 1, lo] * h[lo + 2, lo + 1] if lo + 2 <= hi else 0.0

        for k in range(lo, hi):
            three = k < hi - 1
            if k > lo:
                x = h[k, k - 1]
                y = h[k + 1, k - 1]
                z = h[k + 2, k - 1] if three else 0.0
            scale = abs(x) + abs(y) + abs(z)
            if scale == 0.0:
                continue
            xs, ys, zs = x / scale, y / scale, z / scale
            norm = np.sqrt(xs * xs + ys * ys + zs * zs)
            if xs < 0:
                norm = -norm
            v = np.array([xs + norm, ys, zs]) if three else np.array([xs + norm, ys])
            vn2 = v @ v
            if vn2 == 0.0:
                continue
            rows = slice(k, (k + 3 if three else k + 2))
            # left: rows of the reflector over columns max(lo, k-1)..hi
            c0 = max(lo, k - 1)
            block = h[rows, c0:hi + 1]
            block -= np.outer(2.0 * v / vn2, v @ block)
            h[rows, c0:hi + 1] = block
            # right: columns of the reflector over rows lo..min(k+3, hi)
            r1 = min(k + 3, hi) + 1
            block = h[lo:r1, rows]
            block -= np.outer(block @ v, 2.0 * v / vn2)
            h[lo:r1, rows] = block
            if k > lo:
                h[k + 1:rows.stop, k - 1] = 0.0

    # deterministic order: descending real part, then descending imaginary
    order = np.lexsort((-vals.imag, -vals.real))
    return vals[order]


def lu_factor_complex(a: np.ndarray):
    """LU with partial pivoting of a complex matrix; tiny pivots are bumped.

    Returns (lu, piv, pivot_floor_used).  Bumping near-zero pivots keeps the
    factorization usable for inverse iteration on a singular shift.
    """
    lu = np.array(a, dtype=np.complex128, copy=True)
    n = lu.shape[0]
    piv = np.arange(n)
    anorm = np.max(np.sum(np.abs(lu), axis=1))
    floor = _EPS * max(anorm, 1e-300)
    bumped = False
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            piv[[k, p]] = piv[[p, k]]
        if abs(lu[k, k]) < floor:
            lu[k, k] = floor
            bumped = True
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, piv, bumped


def lu_solve_complex(lu, piv, b):
    x = np.asarray(b, dtype=np.complex128)[piv].copy()
    n = lu.shape[0]
    for k in range(n):       # forward (unit lower)
        x[k] -= lu[k, :k] @ x[:k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - lu[k, k + 1:] @ x[k + 1:]) / lu[k, k]
    return x


def lu_det(a: np.ndarray) -> complex:
    """Determinant via the complex LU (sign from the pivot permutation)."""
    lu = np.array(a, dtype=np.complex128, copy=True)
    n = lu.shape[0]
    sign = 1.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            sign = -sign
        if lu[k, k] == 0:
            return 0j
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return sign * complex(np.prod(np.diag(lu)))


def _inverse_iteration(a, lam, start, sweeps=4):
    n = a.shape[0]
    shifted = a.astype(np.complex128) - lam * np.eye(n)
    lu, piv, _ = lu_factor_complex(shifted)
    v = start / np.sqrt(np.vdot(start, start).real)
    for _ in range(sweeps):
        w = lu_solve_complex(lu, piv, v)
        nw = np.sqrt(np.vdot(w, w).real)
        if not np.isfinite(nw) or nw == 0.0:
            return None
        v = w / nw
    return v


def eig(a: np.ndarray, residual_tol: float = 1e-8):
    """Eigenvalues and (right) eigenvectors; validates ||A v - lam v||.

    Raises :class:`EigenSolverError` if any eigenpair residual exceeds
    residual_tol * ||A||_inf.  Never returns silently-bad pairs.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    vals = qr_eigvals(a)
    anorm = max(float(np.max(np.sum(np.abs(a), axis=1))), 1e-300)
    vecs = np.empty((n, n), dtype=np.complex128)
    for j, lam in enumerate(vals):
        best = None
        best_res = np.inf
        starts = [np.ones(n, dtype=np.complex128)]
        starts += [np.eye(n, dtype=np.complex128)[k] for k in range(n)]
        for start in starts:
            v = _inverse_iteration(a, lam, start)
            if v is None:
                continue
            res = np.max(np.abs(a @ v - lam * v))
            if res < best_res:
                best, best_res = v, res
            if best_res <= residual_tol * anorm:
                break
        if best is None or best_res > residual_tol * anorm:
            raise EigenSolverError(
                f"eigenvector residual {best_res:.3e} exceeds "
                f"{residual_tol:.1e} * ||A|| for eigenvalue {lam!r}")
        # fix the overall phase: largest component real positive
        k = int(np.argmax(np.abs(best)))
        best = best * (np.conj(best[k]) / abs(best[k]))
        vecs[:, j] = best
    return vals, vecs
