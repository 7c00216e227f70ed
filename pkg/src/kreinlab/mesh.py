"""
Graded P1 mesh on the punctured, truncated line [-L, 0) U (0, L].

Each half-line carries its own trace slot at the puncture, so a mesh
function may jump across 0.  Ambient degree-of-freedom order (size 2K):

    left interior (x increasing) | trace 0- | trace 0+ | right interior

Nodes at +-L are Dirichlet and carry no DOF.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Symmetric graded mesh; node k of either side sits at L*(k/K)**g."""

    half_length: float
    k_per_side: int
    grading_exponent: float
    radii: np.ndarray = field(repr=False)  # [0, r_1, ..., r_{K-1}, L]

    @property
    def n_ambient(self) -> int:
        return 2 * self.k_per_side

    @property
    def trace_minus(self) -> int:
        return self.k_per_side - 1

    @property
    def trace_plus(self) -> int:
        return self.k_per_side

    @property
    def interior_index(self) -> np.ndarray:
        """Ambient indices of the trace-free (Friedrichs) DOFs, in order."""
        idx = np.arange(self.n_ambient)
        return idx[(idx != self.trace_minus) & (idx != self.trace_plus)]

    @property
    def ambient_x(self) -> np.ndarray:
        """Coordinates of ambient DOFs; both trace slots report 0."""
        r = self.radii[:-1]
        return np.concatenate([-r[::-1], r])

    @property
    def ambient_side(self) -> np.ndarray:
        """-1 for DOFs on the left half (0- included), +1 on the right."""
        k = self.k_per_side
        return np.concatenate([-np.ones(k, dtype=int), np.ones(k, dtype=int)])

    @property
    def nodes(self) -> np.ndarray:
        """Interior nodes (no 0, no +-L), strictly increasing."""
        r = self.radii[1:-1]
        return np.concatenate([-r[::-1], r])

    @property
    def element_widths(self) -> np.ndarray:
        """Widths of the K elements of one side, starting at the puncture."""
        return np.diff(self.radii)

    @property
    def min_spacing(self) -> float:
        return float(self.element_widths.min())

    def side_to_ambient(self, side: int) -> np.ndarray:
        """Map radial index j (0 = trace, j = r_j) of one side to ambient index."""
        j = np.arange(self.k_per_side)
        if side > 0:
            return self.k_per_side + j
        return self.k_per_side - 1 - j

    def mirror_permutation(self) -> np.ndarray:
        """Ambient permutation induced by x -> -x."""
        return np.arange(self.n_ambient)[::-1].copy()

    def elements_below(self, radius: float) -> int:
        """Number of elements of one side lying entirely inside (0, radius]."""
        return int(np.searchsorted(self.radii, radius, side="right") - 1)


def build_mesh(L: float, K_per_side: int, grading_exponent: float = 3.0) -> Mesh:
    """Build the symmetric graded mesh.

    Parameters
    ----------
    L : float
        Truncation half-length; Dirichlet conditions are imposed at +-L.
    K_per_side : int
        Number of elements on each half-line.
    grading_exponent : float
        g >= 1; node k sits at ``L*(k/K)**g``.  g = 1 is uniform.
    """
    if not np.isfinite(L) or L <= 0:
        raise ValueError(f"half_length must be positive, got {L!r}")
    if int(K_per_side) != K_per_side or K_per_side < 2:
        raise ValueError(f"K_per_side must be an integer >= 2, got {K_per_side!r}")
    if not grading_exponent >= 1:
        raise ValueError(f"grading_exponent must be >= 1, got {grading_exponent!r}")
    K = int(K_per_side)
    k = np.arange(K + 1, dtype=float)
    radii = L * (k / K) ** grading_exponent
    radii[-1] = L
    if np.any(np.diff(radii) <= 0):
        raise ValueError("mesh spacing underflowed; reduce grading_exponent or K_per_side")
    radii.setflags(write=False)
    return Mesh(float(L), K, float(grading_exponent), radii)


def cutoff_radius(kappa: float, beta: float, level: float) -> float:
    """Radius below which min(n, V) saturates at n: (4 kappa n)**(-1/beta)."""
    return (4.0 * kappa * level) ** (-1.0 / beta)
