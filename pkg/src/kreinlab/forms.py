"""
Semibounded extensions as finite (form, mass) pencils.

An extension with lower bound >= eta is fixed by a nonnegative form q on
a subspace of the deficiency space N_eta.  Its form lives on

    dom(nu) = dom(nu_hat) (+) dom(q)

and for g in dom(nu_hat), h in dom(q) reads

    nu(g + h) = nu_hat(g) + q(h) + 2 eta (g, h) + eta (h, h).

Everything here is a matrix block of that formula; nothing inverts a
mass matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._linalg import as_csr, asymmetry, inertia, smallest_eigenpairs
from .errors import DecompositionError

SYM_RTOL = 1e-12
PSD_RTOL = 1e-12
DEFAULT_ETA = -1.0


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """Symmetric form matrix plus mass (Gram) matrix over a labelled basis.

    ``embedding`` (optional) holds the ambient coordinates of each basis
    vector as columns, and ``ambient_mass`` the Gram matrix of the
    ambient basis; together they let forms built over different bases be
    compared in one space.
    """

    form_matrix: sp.csr_matrix
    mass_matrix: sp.csr_matrix
    basis_labels: tuple
    eta_tag: float | None = None
    embedding: sp.csr_matrix | None = field(default=None, repr=False)
    ambient_mass: sp.csr_matrix | None = field(default=None, repr=False)

    def __post_init__(self):
        F = as_csr(self.form_matrix)
        M = as_csr(self.mass_matrix)
        object.__setattr__(self, "form_matrix", F)
        object.__setattr__(self, "mass_matrix", M)
        object.__setattr__(self, "basis_labels", tuple(self.basis_labels))
        n = F.shape[0]
        if F.shape != (n, n) or M.shape != (n, n):
            raise ValueError(f"form {F.shape} and mass {M.shape} must be square and equal")
        if len(self.basis_labels) != n:
            raise ValueError(f"{len(self.basis_labels)} labels for a basis of size {n}")
        if asymmetry(F) > SYM_RTOL:
            raise ValueError("form_matrix is not symmetric")
        if asymmetry(M) > SYM_RTOL:
            raise ValueError("mass_matrix is not symmetric")
        neg, zero, _ = inertia(M)
        if neg or zero:
            raise ValueError("mass_matrix is not positive definite")
        if self.eta_tag is not None and not self.eta_tag < 0:
            raise ValueError(f"eta_tag must be negative, got {self.eta_tag}")
        if self.embedding is not None:
            E = as_csr(self.embedding)
            if E.shape[1] != n:
                raise ValueError("embedding must have one column per basis vector")
            object.__setattr__(self, "embedding", E)
        if self.ambient_mass is not None:
            object.__setattr__(self, "ambient_mass", as_csr(self.ambient_mass))

    @property
    def dim(self) -> int:
        return self.form_matrix.shape[0]

    def value(self, x) -> float:
        """Quadratic value x^T F x."""
        x = np.asarray(x, dtype=float)
        return float(x @ (self.form_matrix @ x))

    def polarize(self, x, y) -> float:
        """Bilinear value recovered from quadratic values alone."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return 0.25 * (self.value(x + y) - self.value(x - y))

    def to_ambient(self, c):
        """Ambient coordinates of basis coefficients c."""
        if self.embedding is None:
            raise ValueError("form has no ambient embedding")
        return self.embedding @ c

    def pull_back(self, ambient_matrix) -> sp.csr_matrix:
        """Express an ambient form in this basis: E^T W E."""
        if self.embedding is None:
            raise ValueError("form has no ambient embedding")
        E = self.embedding
        W = E.T @ as_csr(ambient_matrix) @ E
        return as_csr(0.5 * (W + W.T))


def _check_psd(q, what="q_matrix"):
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if q.shape[0] != q.shape[1]:
        raise ValueError(f"{what} must be square, got {q.shape}")
    if q.size == 0:
        return q
    if not np.allclose(q, q.T, rtol=0, atol=SYM_RTOL * max(1.0, np.abs(q).max())):
        raise ValueError(f"{what} is not symmetric")
    q = 0.5 * (q + q.T)
    tol = PSD_RTOL * max(1.0, float(np.abs(np.diag(q)).max()))
    smallest = la.eigvalsh(q)[0]
    if smallest < -tol:
        raise ValueError(f"{what} is not positive semidefinite (smallest eigenvalue {smallest:.3e})")
    return q


@dataclass(frozen=True, eq=False)
class ExtensionSpec:
    """One of Friedrichs, Krein(eta) or General(eta, subspace, q).

    ``subspace`` holds coefficient vectors over the deficiency basis as
    columns; Friedrichs is the empty subspace.
    """

    variant: str
    eta: float | None = None
    subspace: np.ndarray | None = field(default=None, repr=False)
    q_matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.variant not in ("friedrichs", "krein", "general"):
            raise ValueError(f"unknown extension variant {self.variant!r}")
        if self.variant == "friedrichs":
            return
        if self.eta is None or not self.eta < 0:
            raise ValueError(f"eta must be negative, got {self.eta}")
        if self.variant == "general":
            s = np.atleast_2d(np.asarray(self.subspace, dtype=float))
            q = _check_psd(self.q_matrix)
            if s.shape[1] != q.shape[0]:
                raise ValueError(
                    f"subspace has {s.shape[1]} vectors but q_matrix is {q.shape[0]}x{q.shape[0]}")
            if s.shape[1] and np.linalg.matrix_rank(s) < s.shape[1]:
                raise ValueError("subspace vectors are linearly dependent")
            object.__setattr__(self, "subspace", s)
            object.__setattr__(self, "q_matrix", q)

    @classmethod
    def friedrichs(cls):
        return cls("friedrichs")

    @classmethod
    def krein(cls, eta=DEFAULT_ETA):
        return cls("krein", eta=eta)

    @classmethod
    def general(cls, eta, subspace, q_matrix):
        return cls("general", eta=eta, subspace=subspace, q_matrix=q_matrix)

    @property
    def tag(self) -> str:
        return self.variant

    def resolve(self, n_deficiency: int):
        """(subspace, q_matrix) with Krein expanded to the full deficiency space."""
        if self.variant == "friedrichs":
            return np.zeros((n_deficiency, 0)), np.zeros((0, 0))
        if self.variant == "krein":
            return np.eye(n_deficiency), np.zeros((n_deficiency, n_deficiency))
        if self.subspace.shape[0] != n_deficiency:
            raise ValueError(
                f"subspace vectors have length {self.subspace.shape[0]}, "
                f"deficiency basis has {n_deficiency} vectors")
        return self.subspace, self.q_matrix


@dataclass(frozen=True, eq=False)
class DeficiencyBasis:
    """Representatives of ker(A_dot* - eta) in ambient coordinates (columns)."""

    eta: float
    vectors: np.ndarray
    ambient_mass: sp.csr_matrix = field(repr=False)
    labels: tuple = ()

    def __post_init__(self):
        if not self.eta < 0:
            raise ValueError(f"eta must be negative, got {self.eta}")
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "ambient_mass", as_csr(self.ambient_mass))
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"deficiency:{j}" for j in range(v.shape[1])))

    @property
    def count(self) -> int:
        return self.vectors.shape[1]

    def gram(self) -> np.ndarray:
        """Mass Gram matrix of the deficiency vectors."""
        g = self.vectors.T @ (self.ambient_mass @ self.vectors)
        return 0.5 * (g + g.T)


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    form: QuadraticForm
    lower_bound_estimate: float
    spec: ExtensionSpec

    @property
    def dim(self) -> int:
        return self.form.dim

    @property
    def n_interior(self) -> int:
        return sum(1 for t in self.form.basis_labels if not t.startswith("deficiency"))


def lower_bound(form: QuadraticForm) -> float:
    """Smallest generalized eigenvalue of (form, mass)."""
    w, _ = smallest_eigenpairs(form.form_matrix, form.mass_matrix, 1)
    return float(w[0])


def _direction_labels(defi: DeficiencyBasis, subspace: np.ndarray) -> list:
    labels = []
    for j in range(subspace.shape[1]):
        col = subspace[:, j]
        nz = np.flatnonzero(col)
        labels.append(defi.labels[nz[0]] if len(nz) == 1 else "deficiency:span")
    return labels


def assemble_extension(friedrichs_form: QuadraticForm, deficiency: DeficiencyBasis,
                       spec: ExtensionSpec) -> AssembledOperator:
    """Form of the extension selected by ``spec`` on interior (+) dom(q) directions."""
    if spec.variant == "friedrichs":
        return AssembledOperator(friedrichs_form, lower_bound(friedrichs_form), spec)

    eta = spec.eta
    if not eta < 0:
        raise ValueError(f"eta must be negative, got {eta}")
    if deficiency.eta != eta:
        raise ValueError(f"deficiency basis built at eta={deficiency.eta}, spec asks eta={eta}")
    if friedrichs_form.embedding is None:
        raise ValueError("friedrichs_form needs an ambient embedding")
    subspace, q = spec.resolve(deficiency.count)
    E = friedrichs_form.embedding
    Ma = deficiency.ambient_mass
    if E.shape[0] != deficiency.vectors.shape[0]:
        raise ValueError("deficiency vectors and Friedrichs embedding use different ambient spaces")

    Y = deficiency.vectors @ subspace  # ambient representatives of dom(q)
    cross_mass = np.asarray(E.T @ (Ma @ Y))
    gram = Y.T @ (Ma @ Y)
    gram = 0.5 * (gram + gram.T)

    F = sp.bmat([[friedrichs_form.form_matrix, sp.csr_matrix(eta * cross_mass)],
                 [sp.csr_matrix(eta * cross_mass.T), sp.csr_matrix(q + eta * gram)]], format="csr")
    M = sp.bmat([[friedrichs_form.mass_matrix, sp.csr_matrix(cross_mass)],
                 [sp.csr_matrix(cross_mass.T), sp.csr_matrix(gram)]], format="csr")
    emb = sp.hstack([E, sp.csr_matrix(Y)], format="csr")
    labels = list(friedrichs_form.basis_labels) + _direction_labels(deficiency, subspace)
    form = QuadraticForm(F, M, labels, eta_tag=eta, embedding=emb,
                         ambient_mass=friedrichs_form.ambient_mass if friedrichs_form.ambient_mass is not None else Ma)
    return AssembledOperator(form, lower_bound(form), spec)


def perturb_form(op: AssembledOperator, potential_form, alpha: float) -> AssembledOperator:
    """Subtract alpha * potential_form from the form; mass is untouched."""
    W = as_csr(potential_form)
    if W.shape != (op.dim, op.dim):
        raise ValueError(f"potential_form is {W.shape}, operator basis has {op.dim} vectors")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if alpha == 0:
        return op
    f = op.form
    F = f.form_matrix - alpha * W
    form = QuadraticForm(F, f.mass_matrix, f.basis_labels, eta_tag=f.eta_tag,
                         embedding=f.embedding, ambient_mass=f.ambient_mass)
    return AssembledOperator(form, lower_bound(form), op.spec)


def reparameterize_form(op: AssembledOperator, friedrichs_form: QuadraticForm,
                        deficiency: DeficiencyBasis, eta_prime: float) -> ExtensionSpec:
    """Describe the same extension by a form on a subspace of N_eta'.

    Each deficiency direction v of dom(nu) splits as v = g + k with g in
    dom(nu_hat) and k in N_eta'; then q'(k, k) = nu(k, k) - eta' (k, k).
    """
    if not eta_prime < 0:
        raise ValueError(f"eta_prime must be negative, got {eta_prime}")
    if deficiency.eta != eta_prime:
        raise ValueError("deficiency basis must be built at eta_prime")
    n_int = friedrichs_form.dim
    m = op.dim - n_int
    if m == 0:
        return ExtensionSpec.friedrichs()
    emb = op.form.embedding
    if emb is None:
        raise ValueError("operator has no ambient embedding")
    E = friedrichs_form.embedding
    H = deficiency.vectors
    V = emb[:, n_int:].toarray()
    n_amb = E.shape[0]
    if n_int + deficiency.count != n_amb:
        raise DecompositionError(
            f"dom(nu_hat) (+) N_eta' has dimension {n_int + deficiency.count}, ambient space {n_amb}")

    S = sp.hstack([E, sp.csr_matrix(H)], format="csc")
    try:
        lu = spla.splu(S)
        sol = lu.solve(V)
    except RuntimeError as exc:
        raise DecompositionError("dom(nu_hat) and N_eta' are not complementary on this mesh") from exc
    if not np.all(np.isfinite(sol)):
        raise DecompositionError("decomposition produced non-finite coefficients")
    A = sol[:n_int]
    C = sol[n_int:]
    sv = np.linalg.svd(C, compute_uv=False)
    if sv.min() <= 1e-10 * max(sv.max(), 1.0):
        raise DecompositionError(
            "a deficiency direction lies numerically in dom(nu_hat); refine the mesh")

    # coordinates of k_j = v_j - g_j in the operator's basis
    K = np.vstack([-A, np.eye(m)])
    F = op.form.form_matrix
    M = op.form.mass_matrix
    q = K.T @ (F @ K) - eta_prime * (K.T @ (M @ K))
    q = 0.5 * (q + q.T)
    return ExtensionSpec.general(eta_prime, C, q)
