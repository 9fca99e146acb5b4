"""Hyperelastic building blocks: strain-family branches and volumetric laws.

An elastic branch pairs a shear-type modulus with a scale function.  Two
energy layouts are supported:

* isochoric (type-2 split): the branch acts on the unimodular part of C and
  contributes mu * |E~|^2 to the energy, giving the fictitious stress
  T~ = 2 mu E~.  Pressure enters separately through a volumetric law or a
  Lagrange multiplier.
* total (type-1): the branch acts on C itself with a deviatoric/volumetric
  split of the strain, Psi = mu |dev E|^2 + kappa/2 (tr E)^2 and
  T = 2 mu dev E + kappa tr(E) I.

Volumetric laws provide Psi(J) together with first and second derivatives and
a pressure->J inversion used by pressure-controlled drivers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameters, NoVolumetricRoot
from .spectral import SpectralDecomp
from .strains import ScaleFunction, scale_function, strain_tensor
from .tensors import I2, ddot22, dev, tr

__all__ = [
    "HillBranch",
    "VolumetricModel",
    "branch_stress_tilde",
    "branch_energy_iso",
    "branch_stress_total",
    "branch_energy_total",
]

VOLUMETRIC_KINDS = ("quadratic", "log-squared")

# J-interval on which each law is admitted (convexity of Psi holds there;
# log-squared loses convexity at J = e, so roots are only sought below it).
_J_RANGE = {
    "quadratic": (1e-6, 1e6),
    "log-squared": (1e-6, math.e * (1.0 - 1e-12)),
}


def _as_scale(strain) -> ScaleFunction:
    if isinstance(strain, ScaleFunction):
        return strain
    return scale_function(strain)


@dataclass(frozen=True)
class HillBranch:
    """Equilibrium elastic branch: modulus, scale function, optional kappa.

    ``kappa`` is only used by the total (type-1) layout; isochoric branches
    ignore it.
    """

    mu: float
    strain: ScaleFunction
    kappa: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "strain", _as_scale(self.strain))
        if not self.mu > 0.0:
            raise InvalidParameters(f"branch modulus must be positive, got {self.mu}")
        if self.kappa < 0.0:
            raise InvalidParameters(f"branch kappa must be >= 0, got {self.kappa}")


def branch_stress_tilde(decomp: SpectralDecomp, branch: HillBranch) -> np.ndarray:
    """Fictitious stress T~ = 2 mu E~ of an isochoric branch."""
    return 2.0 * branch.mu * strain_tensor(decomp, branch.strain)


def branch_energy_iso(decomp: SpectralDecomp, branch: HillBranch) -> float:
    """Isochoric branch energy mu * |E~|^2."""
    e = strain_tensor(decomp, branch.strain)
    return branch.mu * ddot22(e, e)


def branch_stress_total(decomp: SpectralDecomp, branch: HillBranch) -> np.ndarray:
    """Type-1 stress T = 2 mu dev(E) + kappa tr(E) I on the total strain."""
    e = strain_tensor(decomp, branch.strain)
    return 2.0 * branch.mu * dev(e) + branch.kappa * tr(e) * I2


def branch_energy_total(decomp: SpectralDecomp, branch: HillBranch) -> float:
    """Type-1 branch energy mu |dev E|^2 + kappa/2 (tr E)^2."""
    e = strain_tensor(decomp, branch.strain)
    de = dev(e)
    return branch.mu * ddot22(de, de) + 0.5 * branch.kappa * tr(e) ** 2


@dataclass(frozen=True)
class VolumetricModel:
    """Volumetric energy law Psi_vol(J).

    kinds:
      ``quadratic``    Psi = kappa/2 (J - 1)^2
      ``log-squared``  Psi = kappa/2 (ln J)^2
    """

    kind: str
    kappa: float

    def __post_init__(self):
        if self.kind not in VOLUMETRIC_KINDS:
            raise InvalidParameters(
                f"unknown volumetric kind {self.kind!r}; expected one of {VOLUMETRIC_KINDS}"
            )
        if not self.kappa > 0.0:
            raise InvalidParameters(f"volumetric kappa must be positive, got {self.kappa}")

    @property
    def j_range(self) -> tuple[float, float]:
        return _J_RANGE[self.kind]

    def psi(self, j: float) -> float:
        if self.kind == "quadratic":
            return 0.5 * self.kappa * (j - 1.0) ** 2
        return 0.5 * self.kappa * math.log(j) ** 2

    def dpsi(self, j: float) -> float:
        if self.kind == "quadratic":
            return self.kappa * (j - 1.0)
        return self.kappa * math.log(j) / j

    def d2psi(self, j: float) -> float:
        if self.kind == "quadratic":
            return self.kappa
        return self.kappa * (1.0 - math.log(j)) / j**2

    def j_from_pressure(self, pressure: float) -> float:
        """Solve dpsi(J) + P = 0 on the admitted J-interval.

        Safeguarded Newton (bisection fallback) to |dJ| <= 1e-12 * J.  Raises
        :class:`NoVolumetricRoot` when the pressure lies outside the range the
        law can equilibrate, e.g. P <= -kappa/e for the log-squared law.
        """
        lo, hi = self.j_range

        def g(j: float) -> float:
            return self.dpsi(j) + pressure

        glo, ghi = g(lo), g(hi)
        if glo == 0.0:
            return lo
        if ghi == 0.0:
            return hi
        if glo * ghi > 0.0:
            raise NoVolumetricRoot(
                f"dpsi(J) + P has no sign change on J in [{lo:g}, {hi:g}] "
                f"for P = {pressure:g} ({self.kind}, kappa = {self.kappa:g})"
            )

        j = min(max(1.0, lo), hi)
        for _ in range(200):
            gj = g(j)
            if gj == 0.0:
                return j
            if gj * glo < 0.0:
                hi = j
            else:
                lo, glo = j, gj
            step = -gj / self.d2psi(j)
            j_new = j + step
            if not (lo < j_new < hi):
                j_new = 0.5 * (lo + hi)
            if abs(j_new - j) <= 1e-12 * j_new:
                return j_new
            j = j_new
        return j
