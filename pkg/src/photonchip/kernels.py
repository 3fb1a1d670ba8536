"""Exact matrix functions: hafnian, permanent, row/column repetition and the
dense factorizations used by the encoders.

The hafnian and permanent are exponential-time by nature.  Two routes are kept
for each: a literal reference (sum over perfect matchings / permutations) and a
fast route (multiset dynamic program / Ryser with Gray code) that is what the
rest of the package calls.  The test-suite checks one against the other.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterator, Optional, Sequence

import numba
import numpy as np

from .errors import ValidationError

SYMMETRY_TOL = 1e-10
MAX_DIM = 20


def _as_matrix(A, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise ValidationError(f"{name} must be two-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries")
    return A


def _as_square(A, name: str = "matrix") -> np.ndarray:
    A = _as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {A.shape}")
    return A


def _check_symmetric(A: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    if A.size and np.max(np.abs(A - A.T)) > tol:
        raise ValidationError(
            f"matrix is not symmetric (max |A - A^T| = {np.max(np.abs(A - A.T)):.3e} > {tol:g})"
        )
    return 0.5 * (A + A.T)


# ---------------------------------------------------------------------------
# hafnian
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _haf_multiset(A, reps):
    # Hafnian of A with row/col k repeated reps[k] times.  Dynamic program over
    # sub-multisets: the first remaining copy of index i is matched to one of
    # the remaining copies of some index j >= i.
    d = reps.shape[0]
    strides = np.empty(d, np.int64)
    size = 1
    for k in range(d):
        strides[k] = size
        size *= reps[k] + 1
    table = np.zeros(size, np.complex128)
    table[0] = 1.0
    v = np.zeros(d, np.int64)
    total = 0
    for idx in range(1, size):
        k = 0
        while v[k] == reps[k]:
            total -= v[k]
            v[k] = 0
            k += 1
        v[k] += 1
        total += 1
        if total % 2 == 1:
            continue
        i = 0
        while v[i] == 0:
            i += 1
        base = idx - strides[i]
        acc = 0j
        if v[i] >= 2:
            acc += (v[i] - 1) * A[i, i] * table[base - strides[i]]
        for j in range(i + 1, d):
            if v[j] > 0:
                acc += v[j] * A[i, j] * table[base - strides[j]]
        table[idx] = acc
    return table[size - 1]


def hafnian_repeated(A: np.ndarray, reps: Sequence[int]) -> complex:
    """Hafnian of ``A`` with row and column ``k`` repeated ``reps[k]`` times.

    Equivalent to ``hafnian(repeat_rows_cols(A, reps))`` but never materialises
    the repeated matrix; cost scales as ``prod(reps + 1)`` rather than with the
    number of perfect matchings.  No validation is done here.
    """
    reps = np.asarray(reps, dtype=np.int64)
    keep = reps > 0
    if not np.any(keep):
        return 1.0 + 0.0j
    if int(reps.sum()) % 2:
        return 0.0 + 0.0j
    sub = np.ascontiguousarray(np.asarray(A, dtype=np.complex128)[np.ix_(keep, keep)])
    return complex(_haf_multiset(sub, np.ascontiguousarray(reps[keep])))


def _perfect_matchings(items: list) -> Iterator[list]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for k, partner in enumerate(rest):
        remaining = rest[:k] + rest[k + 1 :]
        for m in _perfect_matchings(remaining):
            yield [(first, partner)] + m


def hafnian_brute(A) -> complex:
    """Hafnian by explicit enumeration of all perfect matchings.

    Reference implementation; (n-1)!! terms, so only usable up to n ~ 12.
    """
    A = _check_symmetric(_as_square(A))
    n = A.shape[0]
    if n % 2:
        return 0j
    total = 0j
    for m in _perfect_matchings(list(range(n))):
        prod = 1 + 0j
        for i, j in m:
            prod *= A[i, j]
        total += prod
    return complex(total)


def hafnian(A) -> complex:
    """Hafnian of an even-dimensional symmetric matrix.

    Sum over perfect matchings of the products of matched entries.  The empty
    matrix has hafnian 1 and odd dimensions give 0 (no perfect matching).

    Raises
    ------
    ValidationError
        If ``A`` is not square, not symmetric to 1e-10, or larger than 20x20.
    """
    A = _check_symmetric(_as_square(A, "hafnian argument"))
    n = A.shape[0]
    if n > MAX_DIM:
        raise ValidationError(f"hafnian dimension {n} exceeds the supported maximum {MAX_DIM}")
    if n == 0:
        return 1.0 + 0.0j
    if n % 2:
        return 0.0 + 0.0j
    return complex(_haf_multiset(np.ascontiguousarray(A), np.ones(n, dtype=np.int64)))


# ---------------------------------------------------------------------------
# permanent
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _ryser_gray(M):
    n = M.shape[0]
    rowsum = np.zeros(n, np.complex128)
    total = 0j
    gray = 0
    for k in range(1, 1 << n):
        # column flipped between consecutive Gray codes
        j = 0
        while not (k >> j) & 1:
            j += 1
        gray ^= 1 << j
        if (gray >> j) & 1:
            for i in range(n):
                rowsum[i] += M[i, j]
        else:
            for i in range(n):
                rowsum[i] -= M[i, j]
        prod = 1.0 + 0j
        for i in range(n):
            prod *= rowsum[i]
        # parity of the subset size
        bits = 0
        g = gray
        while g:
            bits += g & 1
            g >>= 1
        if bits % 2:
            total -= prod
        else:
            total += prod
    if n % 2:
        return -total
    return total


def permanent(M) -> complex:
    """Permanent of a square matrix (Ryser inclusion-exclusion, Gray-code order)."""
    M = _as_square(M, "permanent argument")
    n = M.shape[0]
    if n > MAX_DIM:
        raise ValidationError(f"permanent dimension {n} exceeds the supported maximum {MAX_DIM}")
    if n == 0:
        return 1.0 + 0.0j
    return complex(_ryser_gray(np.ascontiguousarray(M)))


def permanent_brute(M) -> complex:
    """Permanent as the literal sum over all n! permutations (reference)."""
    M = _as_square(M)
    n = M.shape[0]
    rows = np.arange(n)
    return complex(sum(np.prod(M[rows, list(p)]) for p in itertools.permutations(range(n))))


# ---------------------------------------------------------------------------
# repetition and the block identity
# ---------------------------------------------------------------------------


def _pattern(s, length: int, name: str) -> np.ndarray:
    s = np.asarray(s)
    if s.ndim != 1 or len(s) != length:
        raise ValidationError(f"{name} must have length {length}, got {len(s)}")
    if np.any(s < 0) or np.any(s != np.round(s)):
        raise ValidationError(f"{name} must contain non-negative integers")
    return s.astype(np.int64)


def repeat_rows_cols(A, s, t=None) -> np.ndarray:
    """Repeat rows/columns of ``A`` according to photon-number patterns.

    With one pattern, row *and* column ``i`` are repeated ``s[i]`` times
    together (removed when ``s[i] == 0``).  With two patterns, rows follow
    ``s`` and columns follow ``t`` independently, giving a
    ``sum(s) x sum(t)`` matrix.
    """
    A = _as_matrix(A)
    s = _pattern(s, A.shape[0], "row pattern")
    rows = np.repeat(np.arange(A.shape[0]), s)
    if t is None:
        if A.shape[0] != A.shape[1]:
            raise ValidationError("symmetric repetition needs a square matrix")
        cols = rows
    else:
        t = _pattern(t, A.shape[1], "column pattern")
        cols = np.repeat(np.arange(A.shape[1]), t)
    return A[np.ix_(rows, cols)]


def bipartite_block(C) -> np.ndarray:
    """``[[0, C], [C^T, 0]]`` for a square ``C``."""
    C = _as_square(C)
    n = C.shape[0]
    Z = np.zeros((n, n), dtype=complex)
    return np.block([[Z, C], [C.T, Z]])


def block_hafnian_equals_permanent(C) -> tuple[complex, complex]:
    """Return ``(Haf([[0, C], [C^T, 0]]), Per(C))``; the two agree identically."""
    C = _as_square(C)
    if C.shape[0] > 8:
        raise ValidationError("block identity check limited to dimension <= 8")
    return hafnian(bipartite_block(C)), permanent(C)


# ---------------------------------------------------------------------------
# unitaries and factorizations
# ---------------------------------------------------------------------------


def is_unitary(U, tol: float = 1e-12) -> bool:
    U = _as_square(U)
    return bool(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) <= tol)


def nearest_unitary(U) -> np.ndarray:
    """Unitary factor of the polar decomposition (closest unitary in Frobenius norm)."""
    U = _as_square(U)
    W, _, Vh = np.linalg.svd(U)
    return W @ Vh


def _fix_signs(V: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    # make the first non-negligible entry of every column positive
    signs = np.ones(V.shape[1])
    for k in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, k]) > tol)
        if nz.size and V[nz[0], k] < 0:
            signs[k] = -1.0
    return signs


def symmetric_eigendecomposition(A) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition ``A = V diag(lam) V^T`` of a real symmetric matrix.

    Eigenvalues come out by descending magnitude (ties broken by descending
    signed value) and each eigenvector has its first nonzero entry positive,
    so repeated calls give identical output.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("eigendecomposition needs a square matrix")
    if A.size and np.max(np.abs(A - A.T)) > SYMMETRY_TOL:
        raise ValidationError("eigendecomposition needs a symmetric matrix")
    lam, V = np.linalg.eigh(0.5 * (A + A.T))
    order = np.lexsort((-lam, -np.abs(lam)))
    lam, V = lam[order], V[:, order]
    V = V * _fix_signs(V)
    return lam, V


def singular_value_decomposition(J) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD in the form ``J = U_L @ diag(sigma) @ U_R`` (``U_R`` not transposed).

    Singular values descend; columns of ``U_L`` have their first nonzero entry
    positive, with the matching rows of ``U_R`` flipped alongside.
    """
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or not np.all(np.isfinite(J)):
        raise ValidationError("SVD needs a finite two-dimensional matrix")
    UL, sigma, UR = np.linalg.svd(J)
    signs = _fix_signs(UL)
    UL = UL * signs
    k = len(sigma)
    UR = UR.copy()
    UR[:k] *= signs[:k, None]
    return UL, sigma, UR


def multinomial_factorial(s: Sequence[int]) -> float:
    return float(np.prod([math.factorial(int(k)) for k in s]))
