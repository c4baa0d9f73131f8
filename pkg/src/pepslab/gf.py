"""Linear algebra over the prime field F_p on integer numpy arrays."""

from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    k = 3
    while k * k <= p:
        if p % k == 0:
            return False
        k += 2
    return True


def inv_mod(a: int, p: int) -> int:
    return pow(int(a) % p, -1, p)


def row_reduce(M: np.ndarray, p: int, cols: Optional[List[int]] = None
               ) -> Tuple[np.ndarray, List[int]]:
    """Reduced row echelon form of ``M`` modulo ``p``.

    Args:
        M: integer matrix.
        p: prime modulus.
        cols: columns to pivot on, in order (default: all).

    Returns:
        (R, pivots): the reduced matrix and the pivot column of each of the
        first ``len(pivots)`` rows.
    """
    R = np.array(M, dtype=np.int64) % p
    nrows = R.shape[0]
    # when pivoting on a leading block of columns left to right, entries left
    # of the pivot column are already zero in the pivot row
    ordered = cols is None or list(cols) == list(range(len(cols)))
    cols = range(R.shape[1]) if cols is None else cols
    pivots = []
    r = 0
    for c in cols:
        if r == nrows:
            break
        nz = np.nonzero(R[r:, c])[0]
        if nz.size == 0:
            continue
        k = r + nz[0]
        if k != r:
            R[[r, k]] = R[[k, r]]
        lo = c if ordered else 0
        R[r, lo:] = (R[r, lo:] * inv_mod(R[r, c], p)) % p
        f = R[:, c].copy()
        f[r] = 0
        rows = np.nonzero(f)[0]
        if rows.size:
            R[rows, lo:] = (R[rows, lo:] - np.outer(f[rows], R[r, lo:])) % p
        pivots.append(c)
        r += 1
    return R, pivots


def rank_mod_p(M: np.ndarray, p: int) -> int:
    M = np.asarray(M)
    if M.size == 0:
        return 0
    return len(row_reduce(M, p)[1])


def nullspace_mod_p(M: np.ndarray, p: int) -> np.ndarray:
    """Basis (rows) of {v : M v = 0 mod p}."""
    M = np.asarray(M, dtype=np.int64)
    n = M.shape[1]
    R, piv = row_reduce(M, p)
    free = [c for c in range(n) if c not in piv]
    basis = np.zeros((len(free), n), dtype=np.int64)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for r, c in enumerate(piv):
            basis[i, c] = (-R[r, f]) % p
    return basis


def solve_left(A: np.ndarray, b: np.ndarray, p: int) -> Optional[np.ndarray]:
    """Coefficients ``a`` with ``a @ A = b (mod p)``, or None if b is not in the row span."""
    A = np.asarray(A, dtype=np.int64) % p
    b = np.asarray(b, dtype=np.int64) % p
    k = A.shape[0]
    aug = np.concatenate([A.T, b[:, None]], axis=1)
    R, piv = row_reduce(aug, p, cols=list(range(k)))
    # consistency: rows without a pivot must have zero right-hand side
    if np.any(R[len(piv):, k] % p):
        return None
    sol = np.zeros(k, dtype=np.int64)
    for r, c in enumerate(piv):
        sol[c] = R[r, k]
    if np.any((sol @ A - b) % p):
        return None
    return sol
