"""
Resolvents, bottom eigenpairs and resolvent-difference norms for
(form, mass) pencils.  All inner products are the mass inner product;
resolvents are applied by factorizing F - z M, never M alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._linalg import as_csr, count_below, relative_residuals, smallest_eigenpairs
from .errors import EigenSolverError, ShiftError
from .forms import AssembledOperator

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class Shift:
    """Real resolvent point z, kept at least ``margin`` below a lower bound."""

    z: float
    margin: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.z):
            raise ValueError(f"shift must be finite, got {self.z}")
        if not self.margin > 0:
            raise ValueError(f"margin must be positive, got {self.margin}")

    def validate(self, lower_bound: float):
        if not self.z <= lower_bound - self.margin:
            raise ShiftError(
                f"shift z={self.z:g} is not below the lower bound {lower_bound:g} "
                f"by margin {self.margin:g}", z=self.z, lower_bound=lower_bound)


def _z(shift) -> float:
    return shift.z if isinstance(shift, Shift) else float(shift)


class ShiftedSolver:
    """Factorization of F - z M for one operator, reused across right-hand sides.

    With ``require_definite`` (default) z must lie strictly below the
    operator's lower bound.  Otherwise any z off the spectrum is accepted;
    ``eigenvalues_below`` then counts the spectrum below z.
    """

    def __init__(self, op: AssembledOperator, shift, require_definite: bool = True):
        z = _z(shift)
        self.op = op
        self.z = z
        F = op.form.form_matrix
        M = op.form.mass_matrix
        if require_definite and not z < op.lower_bound_estimate:
            raise ShiftError(
                f"F - z M is not positive definite at z={z:g}: operator lower bound "
                f"is {op.lower_bound_estimate:g}", z=z, lower_bound=op.lower_bound_estimate)
        self._A = (F - z * M).tocsc()
        self._M = M
        try:
            self._lu = spla.splu(self._A)
        except RuntimeError as exc:
            raise ShiftError(f"F - z M is singular at z={z:g}", z=z,
                             lower_bound=op.lower_bound_estimate) from exc
        self.eigenvalues_below = 0 if require_definite else count_below(F, M, z, op.n_interior)

    def solve(self, f):
        """u with (F - z M) u = M f, f in operator coordinates."""
        return self.solve_rhs(self._M @ f)

    def solve_rhs(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        u = self._lu.solve(rhs)
        r = rhs - self._A @ u
        scale = np.linalg.norm(rhs)
        if scale > 0 and np.linalg.norm(r) > RESIDUAL_TOL * scale:
            u = u + self._lu.solve(r)
            r = rhs - self._A @ u
            if np.linalg.norm(r) > RESIDUAL_TOL * scale:
                raise ShiftError(
                    f"resolvent solve residual {np.linalg.norm(r) / scale:.2e} exceeds "
                    f"{RESIDUAL_TOL:g} at z={self.z:g}", z=self.z,
                    lower_bound=self.op.lower_bound_estimate)
        return u

    def apply_ambient(self, f):
        """R(z) f for an ambient vector f, returned in ambient coordinates."""
        form = self.op.form
        E = form.embedding
        if E is None or form.ambient_mass is None:
            raise ValueError("operator has no ambient embedding")
        return E @ self.solve_rhs(E.T @ (form.ambient_mass @ f))


def resolvent_apply(op: AssembledOperator, shift, f, require_definite: bool = True):
    """u = (F - z M)^-1 M f in the operator's own basis."""
    f = np.asarray(f, dtype=float)
    if f.shape != (op.dim,):
        raise ValueError(f"f has shape {f.shape}, operator dimension is {op.dim}")
    return ShiftedSolver(op, shift, require_definite).solve(f)


def lowest_eigenpairs(op: AssembledOperator, k: int):
    """k smallest generalized eigenpairs, ascending, mass-orthonormal."""
    if not 1 <= k <= op.dim:
        raise ValueError(f"k must lie in [1, {op.dim}], got {k}")
    F = op.form.form_matrix
    M = op.form.mass_matrix
    w, v = smallest_eigenpairs(F, M, k, split=op.n_interior)
    res = relative_residuals(F, M, w, v)
    if np.any(res > 1e-9):
        raise EigenSolverError(f"eigenpair residual {res.max():.2e} exceeds 1e-9",
                               residual=float(res.max()))
    return [(float(w[j]), v[:, j]) for j in range(k)]


def _check_common_ambient(op1: AssembledOperator, op2: AssembledOperator):
    e1, e2 = op1.form.embedding, op2.form.embedding
    if e1 is None or e2 is None:
        raise ValueError("both operators need an ambient embedding")
    if e1.shape[0] != e2.shape[0]:
        raise ValueError("operators live in different ambient spaces")
    return op1.form.ambient_mass


def _mass_norm(M, x) -> float:
    return math.sqrt(max(float(x @ (M @ x)), 0.0))


def resolvent_diff_norm(op1: AssembledOperator, op2: AssembledOperator, shift,
                        iterations: int = 200, seed: int = 0,
                        require_definite: bool = True, solvers=None) -> float:
    """Power-iteration estimate of ||R1(z) - R2(z)|| in the ambient mass norm.

    The difference is self-adjoint in the mass inner product, so the ratio
    ||D x_k|| / ||x_k|| with x_{k+1} = D x_k is nondecreasing; the running
    maximum is returned to make that exact in floating point too.
    """
    Ma = _check_common_ambient(op1, op2)
    if solvers is None:
        solvers = (ShiftedSolver(op1, shift, require_definite),
                   ShiftedSolver(op2, shift, require_definite))
    s1, s2 = solvers
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(Ma.shape[0])
    x /= _mass_norm(Ma, x)
    best = 0.0
    for _ in range(iterations):
        y = s1.apply_ambient(x) - s2.apply_ambient(x)
        ny = _mass_norm(Ma, y)
        best = max(best, ny)
        if ny == 0.0:
            break
        x = y / ny
    return best


def ambient_resolvent(op: AssembledOperator, shift) -> np.ndarray:
    """Dense ambient matrix of R(z) = E (F - z M)^-1 E^T M_amb (small problems)."""
    z = _z(shift)
    form = op.form
    E = form.embedding.toarray()
    A = (form.form_matrix - z * form.mass_matrix).toarray()
    return E @ la.solve(A, E.T @ form.ambient_mass.toarray(), assume_a="sym")


def dense_resolvent_diff_spectrum(op1, op2, shift) -> np.ndarray:
    """Eigenvalues of R1 - R2 as a mass-self-adjoint ambient operator (dense)."""
    Ma = _check_common_ambient(op1, op2).toarray()
    D = ambient_resolvent(op1, shift) - ambient_resolvent(op2, shift)
    S = Ma @ D
    return la.eigh(0.5 * (S + S.T), Ma, eigvals_only=True)


def _bordered(op: AssembledOperator, z: float):
    n = op.n_interior
    A = (op.form.form_matrix - z * op.form.mass_matrix).tocsr()
    Aii = A[:n, :n]
    emb = op.form.embedding
    if op.dim == n:
        return Aii, emb, np.zeros((emb.shape[0], 0)), np.zeros((0, 0))
    C = A[:n, n:].toarray()
    D = A[n:, n:].toarray()
    X = spla.splu(Aii.tocsc()).solve(C)
    Z = emb[:, n:].toarray() - emb[:, :n] @ X
    S = D - C.T @ X
    return Aii, emb[:, :n], Z, 0.5 * (S + S.T)


def resolvent_diff_spectrum(op1: AssembledOperator, op2: AssembledOperator, shift) -> np.ndarray:
    """Nonzero spectrum of R1(z) - R2(z) for operators sharing the interior block.

    Extensions of one symmetric operator (and their perturbations by a
    common potential) agree on the trace-free space, so by block
    elimination R_i = E A^-1 E^T M + Z_i S_i^-1 Z_i^T M and the difference
    has rank at most the number of deficiency directions.  Returns the
    eigenvalues of the small matrix carrying that difference; every other
    eigenvalue of R1 - R2 is 0.
    """
    z = _z(shift)
    Ma = _check_common_ambient(op1, op2)
    A1, E1, Z1, S1 = _bordered(op1, z)
    A2, E2, Z2, S2 = _bordered(op2, z)
    scale = max(abs(A1).max(), 1.0)
    if A1.shape != A2.shape or (abs(A1 - A2).max() if (A1 - A2).nnz else 0.0) > 1e-12 * scale:
        raise ValueError("operators do not share the interior block")
    if E1.shape != E2.shape or (E1 != E2).nnz:
        raise ValueError("operators embed the interior basis differently")
    Zc = np.hstack([Z1, Z2])
    m1, m2 = Z1.shape[1], Z2.shape[1]
    if m1 + m2 == 0:
        return np.zeros(0)
    delta = np.zeros((m1 + m2, m1 + m2))
    if m1:
        delta[:m1, :m1] = la.inv(S1)
    if m2:
        delta[m1:, m1:] = -la.inv(S2)
    G = Zc.T @ (Ma @ Zc)
    w, U = la.eigh(0.5 * (G + G.T))
    root = (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T
    T = root @ delta @ root
    return la.eigvalsh(0.5 * (T + T.T))


def min_resolvent_diff_eigenvalue(op1, op2, shift) -> float:
    """Smallest eigenvalue of R1(z) - R2(z) (0 counts: the difference is low rank)."""
    w = resolvent_diff_spectrum(op1, op2, shift)
    return float(min(0.0, w.min())) if w.size else 0.0
