"""
P1 model of -d^2/dx^2 - alpha V on the punctured line, V = |x|^-beta / (4 kappa).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._linalg import DENSE_LIMIT, as_csr, inertia
from .errors import DivergentIntegralError
from .forms import DeficiencyBasis, QuadraticForm
from .mesh import Mesh, cutoff_radius
from .quadrature import element_hat_integrals

FULL = math.inf
"""Level meaning 'no cut-off': the singular potential itself."""

DEFAULT_B_GRID = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0)
FORM_BOUND_TIE_RTOL = 0.05
MIN_ELEMENTS_BELOW_CUTOFF = 5


@dataclass(frozen=True)
class SingularPotential:
    """V(x) = |x|**-beta / (4 kappa); kappa = inf is the zero potential."""

    kappa: float
    beta: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if not 1.0 <= self.beta <= 2.0:
            raise ValueError(f"beta must lie in [1, 2], got {self.beta}")

    @property
    def coefficient(self) -> float:
        return 0.0 if math.isinf(self.kappa) else 1.0 / (4.0 * self.kappa)

    @property
    def is_zero(self) -> bool:
        return self.coefficient == 0.0

    def __call__(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            return self.coefficient * x ** (-self.beta)


@dataclass(frozen=True)
class RegularizingSequence:
    """Cut-offs V_n = min(n, V); ``cap`` freezes every level at min(n, cap)."""

    base: SingularPotential
    cap: float = math.inf

    def effective_level(self, level: float) -> float:
        if not level > 0:
            raise ValueError(f"cut-off level must be positive, got {level}")
        return min(float(level), self.cap)

    def __call__(self, x, level):
        return np.minimum(self.effective_level(level), self.base(x))

    def cutoff_radius(self, level) -> float:
        if self.base.is_zero:
            return 0.0
        return cutoff_radius(self.base.kappa, self.base.beta, self.effective_level(level))


def _side_blocks(mesh: Mesh):
    """Per-element local data on one side: left/right radii and DOF slots."""
    r = mesh.radii
    K = mesh.k_per_side
    a = np.arange(K)        # radial index of left node (0 = trace)
    b = a + 1               # radial index of right node (K = Dirichlet)
    return r[a], r[b], a, b


def _assemble_local(mesh: Mesh, aa, ab, bb) -> sp.csr_matrix:
    """Scatter per-element 2x2 blocks (same on both sides) into ambient storage."""
    K = mesh.k_per_side
    _, _, a, b = _side_blocks(mesh)
    rows, cols, vals = [], [], []
    for side in (-1, 1):
        amap = mesh.side_to_ambient(side)
        keep_b = b < K
        ia = amap[a]
        ib = np.where(keep_b, amap[np.minimum(b, K - 1)], -1)
        rows += [ia]
        cols += [ia]
        vals += [aa]
        m = keep_b
        rows += [ia[m], ib[m], ib[m]]
        cols += [ib[m], ia[m], ib[m]]
        vals += [ab[m], ab[m], bb[m]]
    n = mesh.n_ambient
    out = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n, n)).tocsr()
    out.sum_duplicates()
    return out


def assemble_ambient(mesh: Mesh):
    """Stiffness and mass over all ambient DOFs (traces at 0+- included)."""
    ra, rb, _, _ = _side_blocks(mesh)
    h = rb - ra
    Kmat = _assemble_local(mesh, 1.0 / h, -1.0 / h, 1.0 / h)
    Mmat = _assemble_local(mesh, h / 3.0, h / 6.0, h / 3.0)
    return Kmat, Mmat


def selection(mesh: Mesh) -> sp.csr_matrix:
    """Ambient embedding of the trace-free DOFs (one unit column each)."""
    idx = mesh.interior_index
    n = mesh.n_ambient
    return sp.csr_matrix((np.ones(len(idx)), (idx, np.arange(len(idx)))), shape=(n, len(idx)))


def assemble_stiffness_mass(mesh: Mesh):
    """Friedrichs form (Dirichlet at 0+- and +-L) and the ambient mass matrix.

    Returns
    -------
    friedrichs : QuadraticForm
        Stiffness/mass restricted to the trace-free DOFs, embedded in the
        ambient space.
    ambient_mass : csr_matrix
    """
    Kmat, Mmat = assemble_ambient(mesh)
    idx = mesh.interior_index
    Kint = Kmat[idx][:, idx]
    Mint = Mmat[idx][:, idx]
    form = QuadraticForm(Kint, Mint, ["interior"] * len(idx),
                         embedding=selection(mesh), ambient_mass=Mmat)
    return form, Mmat


def potential_form(mesh: Mesh, seq: RegularizingSequence, level=FULL,
                   include_traces: bool = False, hardy_ok: bool = False) -> sp.csr_matrix:
    """Exact Gram matrix of min(level, V) against the P1 hats.

    With ``include_traces`` the matrix is over the ambient basis, otherwise
    over the trace-free DOFs.  ``level = FULL`` is only finite on the
    trace-free space; beta = 2 at FULL additionally needs ``hardy_ok``.
    """
    pot = seq.base
    full = math.isinf(level)
    if full and include_traces and not pot.is_zero:
        raise DivergentIntegralError(
            "the uncapped potential form diverges on functions with a trace at 0; "
            "use a cut-off level or the trace-free basis")
    if full and pot.beta >= 2.0 and not hardy_ok:
        raise ValueError("beta = 2 at FULL level needs hardy_ok=True (form bound requires kappa > 1)")
    lev = seq.effective_level(level) if not full else min(level, seq.cap)

    ra, rb, _, _ = _side_blocks(mesh)
    aa, ab, bb = element_hat_integrals(ra, rb, pot.coefficient, pot.beta, lev)
    if not include_traces:
        # the trace hat is never used; drop its (possibly infinite) entries
        aa = aa.copy()
        ab = ab.copy()
        aa[0] = 0.0
        ab[0] = 0.0
    W = _assemble_local(mesh, aa, ab, bb)
    if include_traces:
        return W
    idx = mesh.interior_index
    return W[idx][:, idx]


def deficiency_basis(mesh: Mesh, eta: float) -> DeficiencyBasis:
    """sinh profiles solving -u'' = eta u on each half-line, trace 1 at 0+-.

    h_plus(x) = sinh(s (L - x)) / sinh(s L), s = sqrt(-eta), evaluated in the
    exponentially scaled form so that large s L cannot overflow.
    """
    if not eta < 0:
        raise ValueError(f"eta must be negative, got {eta}")
    s = math.sqrt(-eta)
    L = mesh.half_length
    r = mesh.radii[:-1]
    prof = np.exp(-s * r) * (-np.expm1(-2.0 * s * (L - r))) / (-np.expm1(-2.0 * s * L))
    n = mesh.n_ambient
    H = np.zeros((n, 2))
    H[mesh.side_to_ambient(-1), 0] = prof
    H[mesh.side_to_ambient(+1), 1] = prof
    _, Mmat = assemble_ambient(mesh)
    return DeficiencyBasis(eta, H, Mmat, labels=("deficiency:-", "deficiency:+"))


@dataclass(frozen=True)
class FormBoundEstimate:
    """(V f, f) <= a (f', f') + b (f, f) on the trace-free space."""

    a: float
    b: float
    b_grid_value: float = 0.0
    table: tuple = field(default=(), repr=False)

    @property
    def alpha_max(self) -> float:
        return math.inf if self.a == 0 else 1.0 / self.a


def _largest_pencil_eig(W, B) -> float:
    """Largest mu with W x = mu B x, B positive definite."""
    W = as_csr(W)
    B = as_csr(B)
    if W.shape[0] <= DENSE_LIMIT:
        return float(la.eigh(W.toarray(), B.toarray(), eigvals_only=True)[-1])
    # W is positive definite on the trace-free space: invert the pencil and
    # look for the smallest theta with B x = theta W x
    # fixed start vector: ARPACK otherwise draws a random one and runs are not reproducible
    v0 = np.random.default_rng(0).standard_normal(W.shape[0])
    theta = spla.eigsh(B.tocsc(), k=1, M=W.tocsc(), sigma=0.0, which="LM",
                       return_eigenvectors=False, tol=0.0, v0=v0)
    return float(1.0 / theta.min())


def estimate_form_bound(mesh: Mesh, potential: SingularPotential,
                        b_grid=DEFAULT_B_GRID) -> FormBoundEstimate:
    """Relative form bound a over b_grid, preferring a small additive constant.

    For each grid value t the sharpest a with W <= a (K + t M) is the top
    eigenvalue of the pencil (W, K + t M); the additive constant reported
    is b = a t.  Among grid values whose a is within 5% of the smallest,
    the one with the smallest t wins.
    """
    if potential.is_zero:
        return FormBoundEstimate(0.0, 0.0, 0.0, tuple((t, 0.0) for t in b_grid))
    friedrichs, _ = assemble_stiffness_mass(mesh)
    W = potential_form(mesh, RegularizingSequence(potential), FULL, hardy_ok=True)
    Kint, Mint = friedrichs.form_matrix, friedrichs.mass_matrix
    table = []
    for t in b_grid:
        B = Kint + t * Mint
        neg, zero, _ = inertia(B)
        if neg or zero:
            raise ValueError(f"K + {t} M is not positive definite; b too negative")
        table.append((float(t), _largest_pencil_eig(W, B)))
    a_min = min(a for _, a in table)
    t_best, a_best = min((p for p in table if p[1] <= (1.0 + FORM_BOUND_TIE_RTOL) * a_min),
                         key=lambda p: p[0])
    return FormBoundEstimate(a_best, a_best * t_best, t_best, tuple(table))


@dataclass(frozen=True)
class AdmissibilityCurve:
    levels: np.ndarray
    values: np.ndarray
    reliable: bool
    warnings: tuple = ()


def resolution_warning(mesh: Mesh, seq: RegularizingSequence, level) -> str | None:
    """Message when fewer than 5 elements sit inside the cut-off radius."""
    if seq.base.is_zero:
        return None
    rc = seq.cutoff_radius(level)
    count = mesh.elements_below(rc)
    if count < MIN_ELEMENTS_BELOW_CUTOFF:
        return (f"level n={level:g}: cut-off radius {rc:.3e} holds {count} elements "
                f"(< {MIN_ELEMENTS_BELOW_CUTOFF}); increase grading or K_per_side")
    return None


def admissibility_curve(mesh: Mesh, seq: RegularizingSequence, h, levels) -> AdmissibilityCurve:
    """(V_n h, h) for each level, h given in ambient coordinates."""
    h = np.asarray(h, dtype=float)
    if h.shape != (mesh.n_ambient,):
        raise ValueError(f"h must have length {mesh.n_ambient}")
    levels = np.asarray(sorted(float(n) for n in levels))
    msgs = []
    worst = resolution_warning(mesh, seq, levels[-1])
    if worst:
        msgs.append(worst)
        warnings.warn(worst, stacklevel=2)
    vals = np.array([h @ (potential_form(mesh, seq, n, include_traces=True) @ h) for n in levels])
    return AdmissibilityCurve(levels, vals, reliable=not msgs, warnings=tuple(msgs))
