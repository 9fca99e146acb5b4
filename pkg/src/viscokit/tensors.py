"""Dense tensor algebra on 3x3 symmetric tensors and their rank-4/6 operators.

Everything is a plain ``numpy.ndarray``: shape (3, 3) for second-order
tensors, (3, 3, 3, 3) for fourth order, (3,)*6 for sixth order.  No Voigt
compression is used internally; the 6-component packings below exist only
for linear solves (Mandel, exact under double contraction) and for CSV I/O
(plain Voigt component order, no shear factors).

Contraction conventions
-----------------------
``ddot42(A, b)``     (A : b)_ij    = A_ijkl b_kl
``ddot24(a, B)``     (a : B)_kl    = a_ij B_ijkl       (leading-pair contraction)
``ddot44(A, B)``     (A : B)_ijkl  = A_ijmn B_mnkl
``ddot26(a, L)``     (a : L)_klmn  = a_ij L_ijklmn     (leading-pair contraction)

``odot(a, b)`` is the symmetrized dyadic (a ⊙ b)_ijkl = (a_ik b_jl + a_il b_jk)/2,
so ``odot(I, I)`` is the symmetric rank-4 identity.
"""

import numpy as np

# Type aliases -- documentation only, everything is an ndarray.
Tensor2 = np.ndarray
SymTensor2 = np.ndarray
Tensor4 = np.ndarray
Tensor6 = np.ndarray

I2 = np.eye(3)

# Voigt component order used for CSV I/O (no shear doubling).
VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2))

_SQRT2 = np.sqrt(2.0)

# Precomputed gather/scatter maps so the Mandel packing runs as single fancy
# index operations (these sit inside the local Newton loop).
_VP = np.array(VOIGT_PAIRS)
_MANDEL_W = np.array([1.0, 1.0, 1.0, _SQRT2, _SQRT2, _SQRT2])
_MANDEL_WW = np.multiply.outer(_MANDEL_W, _MANDEL_W)
# Voigt slot of each (i, j) pair, e.g. _PAIR_SLOT[0, 1] == 3.
_PAIR_SLOT = np.empty((3, 3), dtype=np.intp)
for _k, (_i, _j) in enumerate(VOIGT_PAIRS):
    _PAIR_SLOT[_i, _j] = _PAIR_SLOT[_j, _i] = _k


def sym(a):
    """Symmetric part (a + a^T)/2."""
    return 0.5 * (a + a.T)


def tr(a):
    return float(np.trace(a))


def dev(a):
    """Deviatoric part a - tr(a)/3 I."""
    return a - (np.trace(a) / 3.0) * I2


def dyad(a, b):
    """Dyadic product (a ⊗ b)_ijkl = a_ij b_kl."""
    return np.multiply.outer(a, b)


def odot(a, b):
    """Symmetrized dyadic (a ⊙ b)_ijkl = (a_ik b_jl + a_il b_jk) / 2."""
    o = np.multiply.outer(a, b)
    return 0.5 * (o.transpose(0, 2, 1, 3) + o.transpose(0, 2, 3, 1))


_I4SYM = 0.5 * (np.einsum("ik,jl->ijkl", I2, I2) + np.einsum("il,jk->ijkl", I2, I2))


def identity4():
    """Symmetric fourth-order identity I_ijkl = (δik δjl + δil δjk)/2."""
    return _I4SYM.copy()


def det3(a):
    """Determinant of a 3x3 matrix by cofactor expansion."""
    return float(
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )


def inv3(a):
    """Inverse of a 3x3 matrix via the adjugate.

    Much cheaper than ``np.linalg.inv`` at this size and exact for the
    symmetric positive-definite arguments it is used on.
    """
    c00 = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    c01 = a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]
    c02 = a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]
    det = a[0, 0] * c00 + a[0, 1] * c01 + a[0, 2] * c02
    out = np.empty((3, 3))
    out[0, 0] = c00
    out[1, 0] = c01
    out[2, 0] = c02
    out[0, 1] = a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]
    out[1, 1] = a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
    out[2, 1] = a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]
    out[0, 2] = a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]
    out[1, 2] = a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]
    out[2, 2] = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    out /= det
    return out


def ddot22(a, b):
    return float(np.tensordot(a, b, axes=2))


def ddot42(A, b):
    return (A.reshape(9, 9) @ b.reshape(9)).reshape(3, 3)


def ddot24(a, B):
    return (a.reshape(9) @ B.reshape(9, 9)).reshape(3, 3)


def ddot44(A, B):
    return (A.reshape(9, 9) @ B.reshape(9, 9)).reshape(3, 3, 3, 3)


def ddot26(a, L):
    return (a.reshape(9) @ L.reshape(9, 81)).reshape(3, 3, 3, 3)


def transpose4(A):
    """Major transpose: (A^T)_ijkl = A_klij."""
    return A.transpose(2, 3, 0, 1)


def norm(a):
    """Frobenius norm of a tensor of any rank."""
    return float(np.sqrt(np.sum(a * a)))


def rotate4(V, A):
    """Rotate a rank-4 tensor given in a frame with basis columns V.

    Returns B with B_ijkl = V_ip V_jq V_kr V_ls A_pqrs.  Implemented as a
    chain of single-axis contractions: each pass consumes the leading axis
    and appends the rotated one, so four passes restore the axis order.
    """
    for _ in range(4):
        A = (A.reshape(3, 27).T @ V.T).reshape(3, 3, 3, 3)
    return A


def rotate6(V, A):
    """Rank-6 analogue of :func:`rotate4`."""
    for _ in range(6):
        A = (A.reshape(3, 243).T @ V.T).reshape((3,) * 6)
    return A


# ---------------------------------------------------------------------------
# Voigt packing (I/O only: component order 11,22,33,12,23,13, no factors)
# ---------------------------------------------------------------------------

def to_voigt6(a):
    return np.array([a[i, j] for (i, j) in VOIGT_PAIRS])


def from_voigt6(v):
    a = np.empty((3, 3))
    for k, (i, j) in enumerate(VOIGT_PAIRS):
        a[i, j] = v[k]
        a[j, i] = v[k]
    return a


# ---------------------------------------------------------------------------
# Mandel packing (internal: exact matrix representation of sym contractions)
# ---------------------------------------------------------------------------

def to_mandel6(a):
    """Pack a symmetric tensor so that dot products equal double contractions."""
    return np.array([a[0, 0], a[1, 1], a[2, 2],
                     _SQRT2 * a[0, 1], _SQRT2 * a[1, 2], _SQRT2 * a[0, 2]])


def from_mandel6(v):
    a = np.array([[v[0], v[3] / _SQRT2, v[5] / _SQRT2],
                  [v[3] / _SQRT2, v[1], v[4] / _SQRT2],
                  [v[5] / _SQRT2, v[4] / _SQRT2, v[2]]])
    return a


def to_mandel66(A):
    """Pack a minor-symmetric rank-4 tensor as a 6x6 Mandel matrix."""
    return _MANDEL_WW * A[_VP[:, 0, None], _VP[:, 1, None], _VP[None, :, 0], _VP[None, :, 1]]


def from_mandel66(M):
    B = M / _MANDEL_WW
    return B[_PAIR_SLOT[:, :, None, None], _PAIR_SLOT[None, None, :, :]]
