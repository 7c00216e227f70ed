"""Sparse/dense helpers for symmetric-definite pencils (F, M)."""
from __future__ import annotations

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EigenSolverError

DENSE_LIMIT = 400


def as_csr(a) -> sp.csr_matrix:
    if sp.issparse(a):
        return sp.csr_matrix(a, dtype=float)
    return sp.csr_matrix(np.atleast_2d(np.asarray(a, dtype=float)))


def asymmetry(a) -> float:
    """max |A - A^T| relative to max |A| (0 for the zero matrix)."""
    a = as_csr(a)
    scale = abs(a).max() if a.nnz else 0.0
    if scale == 0.0:
        return 0.0
    diff = a - a.T
    return (abs(diff).max() if diff.nnz else 0.0) / scale


def _sturm_inertia(diag, off):
    """Inertia of a symmetric tridiagonal matrix via the LDL^T recurrence."""
    diag = np.asarray(diag, dtype=float)
    eps = np.finfo(float).eps
    dl = diag.tolist()
    ol = (np.asarray(off, dtype=float) ** 2).tolist()
    floor = (eps * (np.abs(diag) + 1.0)).tolist()
    neg = zero = 0
    d = dl[0]
    for i in range(len(dl)):
        if i:
            d = dl[i] - ol[i - 1] / d
        if d == 0.0:
            zero += 1
            d = -floor[i]
        if d < 0.0:
            neg += 1
    return neg - zero, zero, len(dl) - neg


def _tridiagonal_split(a: sp.csr_matrix) -> int:
    """Largest p such that a[:p, :p] is tridiagonal."""
    coo = a.tocoo()
    wide = np.abs(coo.row - coo.col) > 1
    if not wide.any():
        return a.shape[0]
    return int(np.maximum(coo.row[wide], coo.col[wide]).min())


def inertia(a, split: int | None = None) -> tuple[int, int, int]:
    """(negative, zero, positive) eigenvalue counts of a symmetric matrix.

    Sparse matrices are handled as a tridiagonal leading block bordered by
    a few dense rows/columns (``split`` marks the border; found
    automatically when omitted): Sturm count on the block plus the dense
    Schur complement, by Haynsworth's inertia additivity.
    """
    a = as_csr(a)
    n = a.shape[0]
    if n <= DENSE_LIMIT:
        return _dense_inertia(a.toarray())
    p = _tridiagonal_split(a) if split is None else split
    if n - p > DENSE_LIMIT:
        return _dense_inertia(a.toarray())
    T = a[:p, :p]
    neg, zero, pos = _sturm_inertia(T.diagonal(), T.diagonal(1))
    if p == n:
        return neg, zero, pos
    if zero:
        raise np.linalg.LinAlgError("singular leading block in inertia computation")
    C = a[:p, p:].toarray()
    X = spla.splu(T.tocsc()).solve(C)
    S = a[p:, p:].toarray() - C.T @ X
    n2, z2, p2 = _dense_inertia(0.5 * (S + S.T))
    return neg + n2, zero + z2, pos + p2


def _dense_inertia(a):
    w = la.eigvalsh(a)
    tol = 1e-14 * max(1.0, np.abs(w).max())
    return int((w < -tol).sum()), int((abs(w) <= tol).sum()), int((w > tol).sum())


def count_below(F, M, sigma: float, split: int | None = None) -> int:
    """Number of generalized eigenvalues of (F, M) strictly below sigma."""
    A = as_csr(F) - sigma * as_csr(M)
    try:
        neg, zero, _ = inertia(A, split)
    except np.linalg.LinAlgError:
        # sigma hit an eigenvalue of the leading block; nudge it
        shift = 1e-9 * max(1.0, abs(sigma))
        neg, zero, _ = inertia(A + shift * as_csr(M), split)
    return neg


def _bracket(F, M, k, split=None):
    """(lo, hi) with no eigenvalue below lo and at least k below hi."""
    diag_ratio = F.diagonal() / M.diagonal()
    hi = float(diag_ratio.min())
    scale = max(1.0, abs(hi))
    step = scale
    while count_below(F, M, hi, split) < k:
        hi = hi + step
        step *= 4.0
    lo = hi - scale
    step = scale
    while count_below(F, M, lo, split) > 0:
        lo = lo - step
        step *= 4.0
    return lo, hi


def _bisect_eigenvalues(F, M, k, split=None, rtol=1e-13):
    """The k smallest eigenvalues by spectrum slicing (Sturm counts)."""
    lo, hi = _bracket(F, M, k, split)
    probes = {lo: 0, hi: count_below(F, M, hi, split)}
    values = []
    for j in range(1, k + 1):
        # tightest known bracket with count(a) < j <= count(b)
        a = max(x for x, c in probes.items() if c < j)
        b = min(x for x, c in probes.items() if c >= j)
        for _ in range(200):
            if b - a <= rtol * max(1.0, abs(a), abs(b)):
                break
            mid = 0.5 * (a + b)
            c = count_below(F, M, mid, split)
            probes[mid] = c
            if c < j:
                a = mid
            else:
                b = mid
        values.append(0.5 * (a + b))
    return np.array(values)


def _rayleigh_ritz(F, M, V):
    g = V.T @ (M @ V)
    h = V.T @ (F @ V)
    w, c = la.eigh(0.5 * (h + h.T), 0.5 * (g + g.T))
    return w, V @ c


def smallest_eigenpairs(F, M, k: int, maxiter: int | None = None, split: int | None = None,
                        seed: int = 0):
    """k smallest generalized eigenpairs of the symmetric-definite pencil.

    Small problems go to dense LAPACK.  Large sparse ones use bisection on
    Sturm counts for the eigenvalues and inverse iteration per cluster for
    the vectors, followed by one Rayleigh-Ritz pass; this is insensitive
    to the huge spread between bound states and the rest of the spectrum.

    Returns ascending eigenvalues and M-orthonormal eigenvectors (columns).
    """
    F = as_csr(F)
    M = as_csr(M)
    n = F.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if n <= DENSE_LIMIT:
        w, v = la.eigh(F.toarray(), M.toarray(), subset_by_index=[0, k - 1])
        return _rayleigh_ritz(F, M, v)

    lam = _bisect_eigenvalues(F, M, k, split)
    scale = max(1.0, float(np.abs(lam).max()))
    clusters = [[0]]
    for j in range(1, k):
        if lam[j] - lam[clusters[-1][-1]] <= 1e-8 * scale:
            clusters[-1].append(j)
        else:
            clusters.append([j])

    rng = np.random.default_rng(seed)
    iters = 4 if maxiter is None else maxiter
    blocks = []
    for cl in clusters:
        mu = lam[cl[0]]
        sigma = mu - 1e-10 * max(1.0, abs(mu))
        try:
            lu = spla.splu((F - sigma * M).tocsc())
        except RuntimeError:
            sigma = mu - 1e-8 * max(1.0, abs(mu))
            lu = spla.splu((F - sigma * M).tocsc())
        V = rng.standard_normal((n, len(cl) + 1))
        for _ in range(iters):
            V = lu.solve(M @ V)
            V, _ = la.qr(V, mode="economic")
        blocks.append(V)
    V = np.hstack(blocks)
    w, V = _rayleigh_ritz(F, M, V)
    w, V = w[:k], V[:, :k]
    res = relative_residuals(F, M, w, V)
    if np.any(res > 1e-9):
        raise EigenSolverError(
            f"inverse iteration stalled after {iters} steps (residual {res.max():.3e})",
            residual=float(res.max()))
    return w, V


def relative_residuals(F, M, w, v) -> np.ndarray:
    """Normwise backward errors ||F v - w M v|| / ((||F|| + |w| ||M||) ||v||)."""
    F = as_csr(F)
    M = as_csr(M)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    r = F @ v - (M @ v) * w
    nf = spla.norm(F, 1)
    nm = spla.norm(M, 1)
    scale = (nf + np.abs(w) * nm) * np.linalg.norm(v, axis=0)
    return np.linalg.norm(r, axis=0) / np.maximum(scale, np.finfo(float).tiny)
