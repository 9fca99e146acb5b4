"""Verification bridge between additive and multiplicative viscous kinematics.

The constitutive engine never splits the deformation gradient; its internal
variable Gamma is a Lagrangian SPD tensor in its own right.  These helpers
connect that picture to the classical multiplicative one F = F^e F^v for
testing purposes, interpreting Gamma as the viscous right Cauchy-Green tensor
C^v = F^v^T F^v of an intermediate configuration:

- the basic invariants tr(X^i), i = 1..3, of the elastic Green-Lagrange
  strain on the intermediate configuration equal those of (C - Gamma)
  Gamma^-1 / 2, a quantity built without ever constructing F^v (the two
  tensors are similar, not equal);
- the Hencky strain splits additively, ln U = ln U^e + ln U^v, exactly when
  the viscous stretch is coaxial with C; a rotated stretch breaks the split,
  showing the coaxiality hypothesis is sharp.

Nothing here is used at constitutive runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameters
from .spectral import decompose, jacobi_eigh
from .tensors import det3, inv3, norm

__all__ = [
    "MultiplicativePair",
    "invariant_triples",
    "logm_spd",
    "expm_sym",
    "hencky_split_residual",
]


@dataclass(frozen=True)
class MultiplicativePair:
    """Deformation gradient and viscous part, F = F^e F^v, both det > 0."""

    f: np.ndarray
    fv: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        fv = np.asarray(self.fv, dtype=float)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "fv", fv)
        if det3(f) <= 0.0:
            raise InvalidParameters(f"det F = {det3(f):g} must be positive")
        if det3(fv) <= 0.0:
            raise InvalidParameters(f"det Fv = {det3(fv):g} must be positive")

    @property
    def c(self) -> np.ndarray:
        """Right Cauchy-Green tensor C = F^T F."""
        return self.f.T @ self.f

    @property
    def cv(self) -> np.ndarray:
        """Viscous right Cauchy-Green tensor C^v = F^v^T F^v."""
        return self.fv.T @ self.fv

    @property
    def ce(self) -> np.ndarray:
        """Elastic tensor on the intermediate configuration, F^v^-T C F^v^-1."""
        fvi = inv3(self.fv)
        return fvi.T @ self.c @ fvi


def _triple(a: np.ndarray) -> tuple[float, float, float]:
    a2 = a @ a
    return float(np.trace(a)), float(np.trace(a2)), float(np.trace(a2 @ a))


def invariant_triples(pair: MultiplicativePair):
    """Invariants tr(X^i), i = 1..3, of the two elastic strain pictures.

    Returns ``(hat_triple, gamma_triple)`` where the first is built from the
    intermediate-configuration Green-Lagrange strain (C^e - I)/2 and the
    second from (C - Gamma) Gamma^-1 / 2 with Gamma = C^v.  The underlying
    tensors are similar, so the triples agree while the tensors need not.
    """
    e_hat = 0.5 * (pair.ce - np.eye(3))
    gamma = pair.cv
    e_gamma = 0.5 * (pair.c - gamma) @ inv3(gamma)
    return _triple(e_hat), _triple(e_gamma)


def logm_spd(a: np.ndarray) -> np.ndarray:
    """Matrix logarithm of an SPD tensor via its spectral decomposition."""
    d = decompose(a)
    vals = [math.log(x) for x in d.eigenvalues]
    return (d.vectors * vals) @ d.vectors.T


def expm_sym(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of a symmetric (possibly indefinite) tensor."""
    w, v = jacobi_eigh(0.5 * (a + a.T))
    vals = [math.exp(x) for x in w]
    return (v * vals) @ v.T


def hencky_split_residual(f: np.ndarray, lambda_v, triad: np.ndarray | None = None) -> float:
    """Defect of the additive Hencky split ln U = ln U^e + ln U^v.

    ``lambda_v`` are the three viscous principal stretches; the viscous part
    is the pure stretch F^v = sum_a lambda_v_a n_a (x) n_a over ``triad``
    columns.  With the default triad (eigenvectors of C = F^T F, i.e. the
    coaxial case) the residual vanishes to round-off; any rotated triad makes
    it finite.
    """
    f = np.asarray(f, dtype=float)
    lv = [float(x) for x in lambda_v]
    if len(lv) != 3 or any(x <= 0.0 for x in lv):
        raise InvalidParameters(f"need three positive viscous stretches, got {lambda_v!r}")
    c = f.T @ f
    if triad is None:
        triad = decompose(c).vectors
    fv = (triad * lv) @ triad.T
    pair = MultiplicativePair(f, fv)
    e_tot = 0.5 * logm_spd(c)
    e_el = 0.5 * logm_spd(pair.ce)
    e_v = 0.5 * logm_spd(pair.cv)
    return norm(e_tot - e_el - e_v)
