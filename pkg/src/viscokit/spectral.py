"""Spectral decomposition of symmetric 3x3 tensors with deterministic conventions.

The eigensolver is a cyclic Jacobi rotation iteration driven to machine
precision.  Output conventions (needed for reproducible tensor assembly and
for comparing runs bit-for-bit across platforms):

* eigenvalues sorted descending;
* each eigenvector scaled so its largest-magnitude component is positive,
  ties broken by the lowest component index;
* multiplicity classes from a single relative closeness test
  |x_a - x_b| <= eps_mult (x_a + x_b) on the eigenvalues x = λ², chained
  transitively (a~b and b~c merge all three).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotPositiveDefinite

#: Relative pairwise eigenvalue closeness used to declare a multiplicity.
EPS_MULT = 1e-9

#: Eigenvalues below this fraction of the largest one fail the SPD check.
SPD_FLOOR = 1e-14


def _jacobi_angle(app, aqq, apq):
    """Stable (c, s, t) for the rotation that annihilates the (p, q) entry."""
    theta = (aqq - app) / (2.0 * apq)
    if theta == 0.0:
        t = 1.0
    else:
        t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(t * t + 1.0)
    return c, t * c, t


def jacobi_eigh(a, max_sweeps=50):
    """Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with eigenvalues ``w`` (unsorted) and eigenvectors in
    the columns of ``v``.  Iterates until the off-diagonal norm stops
    decreasing below the floating-point floor.  Unrolled to scalar arithmetic:
    the rotations run inside Newton loops, where ndarray dispatch overhead on
    3x3 operands would dominate the actual work.
    """
    a00, a11, a22 = float(a[0, 0]), float(a[1, 1]), float(a[2, 2])
    a01, a02, a12 = float(a[0, 1]), float(a[0, 2]), float(a[1, 2])
    v00, v01, v02 = 1.0, 0.0, 0.0
    v10, v11, v12 = 0.0, 1.0, 0.0
    v20, v21, v22 = 0.0, 0.0, 1.0
    scale = max(abs(a00), abs(a11), abs(a22), abs(a01), abs(a02), abs(a12)) or 1.0
    prev_off = math.inf
    for _ in range(max_sweeps):
        off = math.sqrt(a01 * a01 + a02 * a02 + a12 * a12)
        if off <= 1e-15 * scale or off >= prev_off:
            break
        prev_off = off
        if a01 != 0.0:
            c, s, t = _jacobi_angle(a00, a11, a01)
            a00 -= t * a01
            a11 += t * a01
            a02, a12 = c * a02 - s * a12, s * a02 + c * a12
            a01 = 0.0
            v00, v01 = c * v00 - s * v01, s * v00 + c * v01
            v10, v11 = c * v10 - s * v11, s * v10 + c * v11
            v20, v21 = c * v20 - s * v21, s * v20 + c * v21
        if a02 != 0.0:
            c, s, t = _jacobi_angle(a00, a22, a02)
            a00 -= t * a02
            a22 += t * a02
            a01, a12 = c * a01 - s * a12, s * a01 + c * a12
            a02 = 0.0
            v00, v02 = c * v00 - s * v02, s * v00 + c * v02
            v10, v12 = c * v10 - s * v12, s * v10 + c * v12
            v20, v22 = c * v20 - s * v22, s * v20 + c * v22
        if a12 != 0.0:
            c, s, t = _jacobi_angle(a11, a22, a12)
            a11 -= t * a12
            a22 += t * a12
            a01, a02 = c * a01 - s * a02, s * a01 + c * a02
            a12 = 0.0
            v01, v02 = c * v01 - s * v02, s * v01 + c * v02
            v11, v12 = c * v11 - s * v12, s * v11 + c * v12
            v21, v22 = c * v21 - s * v22, s * v21 + c * v22
    w = np.array([a00, a11, a22])
    v = np.array([[v00, v01, v02], [v10, v11, v12], [v20, v21, v22]])
    return w, v


def classify_multiplicity(eigenvalues, eps_mult=EPS_MULT):
    """Group (sorted) eigenvalues into multiplicity classes.

    Two eigenvalues belong together when |x_a - x_b| <= eps_mult (x_a + x_b);
    the relation is chained transitively.  Returns a tuple of index tuples.
    """
    x = np.asarray(eigenvalues, dtype=float)
    groups = [[0]]
    for a in range(1, len(x)):
        prev = groups[-1][-1]
        if abs(x[prev] - x[a]) <= eps_mult * abs(x[prev] + x[a]):
            groups[-1].append(a)
        else:
            groups.append([a])
    return tuple(tuple(g) for g in groups)


@dataclass
class SpectralDecomp:
    """Spectral data of an SPD tensor C = Σ_a x_a N_a ⊗ N_a.

    Attributes
    ----------
    eigenvalues : ndarray, shape (3,)
        x_a = λ_a², descending.
    vectors : ndarray, shape (3, 3)
        Orthonormal eigenvectors in columns (sign-normalized).
    groups : tuple of tuples
        Multiplicity classes over eigenvalue indices.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    groups: tuple
    _bases: list = field(default=None, repr=False)
    _stretches: np.ndarray = field(default=None, repr=False)
    #: memo for derived per-scale-function tensors (strains, projections);
    #: a decomposition is immutable once built, so consumers key results here.
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def stretches(self):
        """Principal stretches λ_a = sqrt(x_a)."""
        if self._stretches is None:
            self._stretches = np.sqrt(self.eigenvalues)
        return self._stretches

    def basis(self, a):
        """Eigenprojector M_a = N_a ⊗ N_a."""
        if self._bases is None:
            self._bases = [np.outer(self.vectors[:, i], self.vectors[:, i])
                           for i in range(3)]
        return self._bases[a]

    def reconstruct(self):
        return self.vectors @ np.diag(self.eigenvalues) @ self.vectors.T


def decompose(c, eps_mult=EPS_MULT, spd_floor=SPD_FLOOR):
    """Spectral decomposition of an SPD tensor with deterministic conventions.

    Raises
    ------
    NotPositiveDefinite
        If any eigenvalue is <= spd_floor times the largest eigenvalue.
    """
    a = 0.5 * (c + c.T)
    w, v = jacobi_eigh(a)
    # Stable descending sort of three values (insertion network).
    order = [0, 1, 2]
    if w[order[1]] > w[order[0]]:
        order[0], order[1] = order[1], order[0]
    if w[order[2]] > w[order[1]]:
        order[1], order[2] = order[2], order[1]
        if w[order[1]] > w[order[0]]:
            order[0], order[1] = order[1], order[0]
    w = w[order]
    v = v[:, order]
    # Sign convention: largest-|component| positive; argmax takes the first
    # (lowest-index) component on exact ties.
    for k in range(3):
        c0, c1, c2 = abs(v[0, k]), abs(v[1, k]), abs(v[2, k])
        lead = 0 if (c0 >= c1 and c0 >= c2) else (1 if c1 >= c2 else 2)
        if v[lead, k] < 0.0:
            v[:, k] = -v[:, k]
    if w[0] <= 0.0 or w[2] <= spd_floor * w[0]:
        raise NotPositiveDefinite(
            f"eigenvalues {w.tolist()} fail the SPD floor {spd_floor:g} * max")
    return SpectralDecomp(eigenvalues=w, vectors=v,
                          groups=classify_multiplicity(w, eps_mult))
