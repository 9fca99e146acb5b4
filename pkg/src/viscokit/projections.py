"""Spectral projection tensors mapping generalized strains to the reference frame.

For a symmetric tensor C with spectral decomposition C = sum_a x_a N_a (x) N_a
(eigenvalues x_a = lambda_a^2) and a scale function E, the generalized strain
is E(C) = sum_a E(lambda_a) M_a with eigenprojections M_a = N_a (x) N_a.  This
module builds the rank-4 and rank-6 tensors that carry first and second
directional derivatives of E(C) with respect to C:

    Q = 2 dE/dC        (rank 4, minor and major symmetric)
    L = 2 dQ/dC        (rank 6, symmetric in its three index pairs)

so that for a symmetric increment D one has dE[D] = (1/2) Q : D and
dQ[D] = (1/2) L : D (contraction over the trailing pair).

Coefficients in the eigenvector frame:

    diagonal       d_a   = E'(lambda_a) / lambda_a
    coupling       th_ab = 2 (E_a - E_b) / (x_a - x_b)
    rank-6 diag    f_a   = E''(lambda_a)/lambda_a^2 - E'(lambda_a)/lambda_a^3
    rank-6 pair    xi_ab = (th_ab - d_b) / (2 (x_a - x_b))
    rank-6 triple  eta   = sum_a E_a / ((x_a - x_b)(x_a - x_c))

The coupling terms are divided differences and become 0/0 as eigenvalues
coalesce.  Rather than switching formulas at an ad-hoc threshold, the
coalescence grouping computed by :func:`viscokit.spectral.decompose` drives
the evaluation: within a group the limit expressions are used, evaluated at
the group's mean stretch, and across groups the sinh-stabilized divided
differences from the scale-function classes keep full relative accuracy down
to the grouping tolerance.  Limits used (derived from Taylor expansion of the
divided differences, all continuous across the grouping threshold):

    th_ab -> d(lam)          xi_ab -> f(lam) / 8        (pair a,b merged)
    eta   -> xi_ca           (pair a,b merged, c separate)
    eta   -> f(lam) / 8      (all three merged)

xi_ab is a confluent second divided difference of phi(x) = E(sqrt(x)) and the
quotient form (th_ab - d_b) / (2 (x_a - x_b)) squares the 1/gap error
amplification: the independently rounded th_ab and d_b agree only to O(gap),
so the quotient degrades like eps/gap^2 and is useless well before the
grouping tolerance kicks in.  In a buffer band of nearly equal eigenvalues
xi_ab is therefore evaluated through the subtraction-free Peano form

    xi_ab = phi[x_a, x_b, x_b] = int_0^1 (1 - t) phi''(x_b + t (x_a - x_b)) dt

with phi''(x) = (E''(lam)/lam^2 - E'(lam)/lam^3) / 4 at lam = sqrt(x), using
fixed Gauss-Legendre quadrature (the integrand is nearly constant over the
tiny interval, so eight nodes are exact to round-off).

Assembly fills the sparse coefficient array in the eigenvector frame and
rotates it back with the eigenvector matrix, which is both simpler and
cheaper than summing dyadic products of eigenprojections.
"""

from __future__ import annotations

import math

import numpy as np

from .spectral import SpectralDecomp
from .strains import ScaleFunction
from .tensors import dyad, identity4, inv3, odot, rotate4, rotate6

__all__ = [
    "proj_Q",
    "proj_Q_inv",
    "proj_L",
    "H6",
    "proj_P",
    "proj_P_tilde",
    "apply_q_coaxial",
    "q_coefficients",
    "l_coefficients",
]

# Relative eigenvalue gap below which xi_ab switches from the divided
# difference quotient to the quadrature form.  At the crossover both
# evaluations agree to ~1e-12, far inside every consumer's tolerance.
_XI_QUAD_BAND = 1e-4

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)

# Index tuples of the rank-6 structure tensor H_abc in the eigenvector frame.
# H_abc = (M_a odot M_b) (x) M_c symmetrized in the first two pairs; the eight
# unit entries below reproduce it for distinct a, b, c, and accumulating them
# (+=) also yields the correct repeated-index contractions such as H_abb.
_H_SLOTS = (
    (0, 1, 2, 0, 1, 2),
    (0, 1, 2, 0, 2, 1),
    (0, 1, 0, 2, 1, 2),
    (0, 1, 0, 2, 2, 1),
    (1, 0, 2, 0, 1, 2),
    (1, 0, 2, 0, 2, 1),
    (1, 0, 0, 2, 1, 2),
    (1, 0, 0, 2, 2, 1),
)


def _build_l_fill_maps():
    """Flat-index scatter maps for the eigenframe assembly of L.

    The assembly is a fixed sparsity pattern: 3 diagonal f slots, each xi_ab
    feeding H_abb + H_bab + H_bba, and eta feeding H_abc over all distinct
    permutations.  Tabulating (flat cell, coefficient id) pairs once lets
    :func:`proj_L` build the 3^6 array with a single ``bincount``.
    Coefficient vector layout: [f_0, f_1, f_2, xi_ab in lexicographic (a, b)
    order, eta].
    """
    flat, cid = [], []

    def add_h(coef_id: int, a: int, b: int, c: int) -> None:
        abc = (a, b, c)
        for s in _H_SLOTS:
            i, j, k, l, m, n = (abc[t] for t in s)
            flat.append(((((i * 3 + j) * 3 + k) * 3 + l) * 3 + m) * 3 + n)
            cid.append(coef_id)

    for a in range(3):
        flat.append(a * 364)  # (a, a, a, a, a, a)
        cid.append(a)
    pairs = [(a, b) for a in range(3) for b in range(3) if a != b]
    for k, (a, b) in enumerate(pairs):
        add_h(3 + k, a, b, b)
        add_h(3 + k, b, a, b)
        add_h(3 + k, b, b, a)
    for a in range(3):
        for b in range(3):
            for c in range(3):
                if a != b and b != c and a != c:
                    add_h(9, a, b, c)
    return np.array(flat), np.array(cid)


_L_FLAT, _L_CID = _build_l_fill_maps()

# Fixed sparsity of Q in the eigenvector frame: three (a,a,a,a) cells and the
# two symmetric slots (a,b,a,b), (a,b,b,a) per ordered off-diagonal pair.
_Q_PAIRS = tuple((a, b) for a in range(3) for b in range(3) if a != b)
_QA = np.array([a for a, _ in _Q_PAIRS])
_QB = np.array([b for _, b in _Q_PAIRS])
_Q_DIAG_FLAT = np.array([0, 40, 80])
_Q_OFF_FLAT = np.array(
    [[a * 27 + b * 9 + a * 3 + b, a * 27 + b * 9 + b * 3 + a] for a, b in _Q_PAIRS]
).ravel()


def _assemble_q(diag, off) -> np.ndarray:
    qh = np.zeros(81)
    qh[_Q_DIAG_FLAT] = diag
    qh[_Q_OFF_FLAT] = np.repeat(off, 2)
    return qh.reshape(3, 3, 3, 3)


def _group_mean_stretch(decomp: SpectralDecomp) -> list[float]:
    """Per-index mean stretch of the coalescence group the index belongs to."""
    lam = decomp.stretches
    mean = [0.0, 0.0, 0.0]
    for group in decomp.groups:
        m = sum(lam[a] for a in group) / len(group)
        for a in group:
            mean[a] = m
    return mean


def _group_ids(decomp: SpectralDecomp) -> list[int]:
    gid = [0, 0, 0]
    for k, group in enumerate(decomp.groups):
        for a in group:
            gid[a] = k
    return gid


def q_coefficients(decomp: SpectralDecomp, sf: ScaleFunction):
    """Eigenframe coefficients (d, theta) of Q for the given scale function.

    d is shape (3,), theta is a symmetric (3, 3) array with zeros on the
    diagonal slots that are never read.  Memoized on the decomposition.
    """
    key = ("qc", sf.spec())
    hit = decomp.cache.get(key)
    if hit is not None:
        return hit
    lam = decomp.stretches
    gid = _group_ids(decomp)
    gmean = _group_mean_stretch(decomp)

    d = np.array([sf.d1(lam[a]) / lam[a] for a in range(3)])
    theta = np.zeros((3, 3))
    for a in range(3):
        for b in range(a + 1, 3):
            if gid[a] == gid[b]:
                lm = gmean[a]
                v = sf.d1(lm) / lm
            else:
                v = 2.0 * sf.dd1(lam[a], lam[b])
            theta[a, b] = theta[b, a] = v
    decomp.cache[key] = (d, theta)
    return d, theta


def _phi_dd(sf: ScaleFunction, x: float) -> float:
    """phi''(x) for phi(x) = E(sqrt(x)), i.e. f(sqrt(x)) / 4."""
    lm = math.sqrt(x)
    return 0.25 * (sf.d2(lm) / lm**2 - sf.d1(lm) / lm**3)


def _xi_quadrature(sf: ScaleFunction, xa: float, xb: float) -> float:
    """xi_ab as int_0^1 (1-t) phi''(xb + t (xa - xb)) dt by 8-point Gauss."""
    acc = 0.0
    for s, w in zip(_GL_NODES, _GL_WEIGHTS):
        t = 0.5 * (s + 1.0)
        acc += 0.5 * w * (1.0 - t) * _phi_dd(sf, xb + t * (xa - xb))
    return acc


def _eta_quadrature(sf: ScaleFunction, x) -> float:
    """eta = phi[x0, x1, x2] as the Peano integral of phi'' over the simplex.

    Uses the Duffy substitution t = u, s = v (1 - u) to map the triangle
    {t, s >= 0, t + s <= 1} onto the unit square.  Only called when all three
    eigenvalues are nearly equal, where the integrand is constant to within
    round-off and the tensor-product Gauss rule is exact.
    """
    acc = 0.0
    for su, wu in zip(_GL_NODES, _GL_WEIGHTS):
        u = 0.5 * (su + 1.0)
        for sv, wv in zip(_GL_NODES, _GL_WEIGHTS):
            v = 0.5 * (sv + 1.0)
            xx = x[0] + u * (x[1] - x[0]) + v * (1.0 - u) * (x[2] - x[0])
            acc += 0.25 * wu * wv * (1.0 - u) * _phi_dd(sf, xx)
    return acc


def l_coefficients(decomp: SpectralDecomp, sf: ScaleFunction):
    """Eigenframe coefficients (f, xi, eta) of L for the given scale function."""
    key = ("lc", sf.spec())
    hit = decomp.cache.get(key)
    if hit is not None:
        return hit
    lam = decomp.stretches
    x = decomp.eigenvalues
    gid = _group_ids(decomp)
    gmean = _group_mean_stretch(decomp)
    d, theta = q_coefficients(decomp, sf)

    def f_of(lm: float) -> float:
        return sf.d2(lm) / lm**2 - sf.d1(lm) / lm**3

    f = np.array([f_of(lam[a]) for a in range(3)])

    xi = np.zeros((3, 3))
    for a in range(3):
        for b in range(3):
            if a == b:
                continue
            if gid[a] == gid[b]:
                xi[a, b] = f_of(gmean[a]) / 8.0
            elif abs(x[a] - x[b]) <= _XI_QUAD_BAND * (x[a] + x[b]):
                xi[a, b] = _xi_quadrature(sf, x[a], x[b])
            else:
                xi[a, b] = (theta[a, b] - d[b]) / (2.0 * (x[a] - x[b]))

    ngroups = len(decomp.groups)
    if ngroups == 3:
        close = [
            (a, b)
            for a, b in ((0, 1), (0, 2), (1, 2))
            if abs(x[a] - x[b]) <= _XI_QUAD_BAND * (x[a] + x[b])
        ]
        if len(close) >= 2:
            eta = _eta_quadrature(sf, x)
        elif len(close) == 1:
            # Newton recursion phi[p,q,r] = (phi[p,q] - phi[q,r])/(x_p - x_r)
            # with the close pair adjacent: both first divided differences are
            # individually stable and the denominator is well separated.
            p, q = close[0]
            r = 3 - p - q
            eta = (0.5 * theta[p, q] - 0.5 * theta[q, r]) / (x[p] - x[r])
        else:
            e = [sf.value(lam[a]) for a in range(3)]
            eta = 0.0
            for a in range(3):
                b, c = [i for i in range(3) if i != a]
                eta += e[a] / ((x[a] - x[b]) * (x[a] - x[c]))
    elif ngroups == 2:
        pair = max(decomp.groups, key=len)
        lone = min(decomp.groups, key=len)[0]
        eta = sum(xi[lone, a] for a in pair) / len(pair)
    else:
        eta = f_of(gmean[0]) / 8.0
    out = (f, xi, float(eta))
    decomp.cache[key] = out
    return out


def proj_Q(decomp: SpectralDecomp, sf: ScaleFunction) -> np.ndarray:
    """Rank-4 projection Q = 2 dE/dC built on a spectral decomposition."""
    key = ("Q", sf.spec())
    q = decomp.cache.get(key)
    if q is None:
        d, theta = q_coefficients(decomp, sf)
        q = rotate4(decomp.vectors, _assemble_q(d, 0.5 * theta[_QA, _QB]))
        decomp.cache[key] = q
    return q


def apply_q_coaxial(decomp: SpectralDecomp, sf: ScaleFunction, t_hat) -> np.ndarray:
    """Contraction T : Q for T = sum_a t_hat[a] M_a coaxial with the frame.

    The off-diagonal eigenframe couplings of Q act only on shear components,
    which a coaxial tensor does not have, so the contraction reduces to
    scaling the eigenvalues by Q's diagonal coefficients.  Equivalent to
    ``ddot24(T, proj_Q(decomp, sf))`` without assembling the rank-4 array.
    """
    d, _ = q_coefficients(decomp, sf)
    return (decomp.vectors * (np.asarray(t_hat) * d)) @ decomp.vectors.T


def proj_Q_inv(decomp: SpectralDecomp, sf: ScaleFunction) -> np.ndarray:
    """Inverse of :func:`proj_Q` on symmetric tensors.

    Built from the exact reciprocals of the eigenframe coefficients, so the
    contraction Q : Q_inv reproduces the symmetric identity to round-off
    regardless of eigenvalue clustering.
    """
    key = ("Qi", sf.spec())
    q = decomp.cache.get(key)
    if q is None:
        d, theta = q_coefficients(decomp, sf)
        q = rotate4(decomp.vectors, _assemble_q(1.0 / d, 0.5 / theta[_QA, _QB]))
        decomp.cache[key] = q
    return q


def proj_L(decomp: SpectralDecomp, sf: ScaleFunction) -> np.ndarray:
    """Rank-6 projection L = 2 dQ/dC built on a spectral decomposition."""
    key = ("L", sf.spec())
    l6 = decomp.cache.get(key)
    if l6 is None:
        f, xi, eta = l_coefficients(decomp, sf)
        coefs = np.array([f[0], f[1], f[2],
                          xi[0, 1], xi[0, 2], xi[1, 0], xi[1, 2], xi[2, 0], xi[2, 1],
                          eta])
        lh = np.bincount(_L_FLAT, weights=coefs[_L_CID], minlength=729).reshape((3,) * 6)
        l6 = rotate6(decomp.vectors, lh)
        decomp.cache[key] = l6
    return l6


def H6(na: np.ndarray, nb: np.ndarray, nc: np.ndarray) -> np.ndarray:
    """Rank-6 structure tensor H_abc from three unit eigenvectors."""
    vecs = (na, nb, nc)
    out = np.zeros((3,) * 6)
    for s in _H_SLOTS:
        out += np.einsum(
            "i,j,k,l,m,n->ijklmn",
            vecs[s[0]], vecs[s[1]], vecs[s[2]], vecs[s[3]], vecs[s[4]], vecs[s[5]],
        )
    return out


def proj_P(c: np.ndarray, cinv: np.ndarray | None = None) -> np.ndarray:
    """Deviatoric projection P = Isym - (1/3) C^-1 (x) C (rank 4, idempotent)."""
    if cinv is None:
        cinv = inv3(c)
    return identity4() - dyad(cinv, c) / 3.0


def proj_P_tilde(c: np.ndarray, cinv: np.ndarray | None = None) -> np.ndarray:
    """Modified projection P~ = C^-1 (.) C^-1 - (1/3) C^-1 (x) C^-1."""
    if cinv is None:
        cinv = inv3(c)
    return odot(cinv, cinv) - dyad(cinv, cinv) / 3.0
