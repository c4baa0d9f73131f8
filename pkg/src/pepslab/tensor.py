"""Dense complex tensor arithmetic shared by every engine in the package.

Tensors are plain ``numpy.ndarray`` objects of dtype ``complex128`` in C
(row-major) order.  The helpers here add the validation, determinism and
truncation conventions that the contraction engines rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

SeedLike = Union[int, Sequence[int]]

#: Maps up to this dimension are diagonalised densely.
DENSE_EIG_LIMIT = 256


class TensorError(ValueError):
    """Invalid shape, axis pairing or non-finite data."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its tolerance.

    Attributes:
        residual: best residual reached before giving up.
        history: optional per-iteration diagnostics.
    """

    def __init__(self, message: str, residual: float = np.inf, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = history if history is not None else []


class DegenerateEigenvalueError(RuntimeError):
    """The dominant eigenvalue is not separated from the next one."""


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Counter-based Philox generator for a seed or a tuple of seed words.

    ``make_rng((seed, x, y))`` derives an independent stream per lattice
    site, so a site tensor depends only on ``(seed, x, y)`` and never on the
    order in which a lattice is built.
    """
    words = [int(seed)] if np.isscalar(seed) else [int(w) for w in seed]
    if any(w < 0 for w in words):
        raise ValueError(f"seed words must be non-negative, got {words}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard complex normal entries: Re, Im ~ N(0, 1/2), so E|z|^2 = 1."""
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def gaussian_tensor(shape: Sequence[int], seed: SeedLike) -> np.ndarray:
    """I.i.d. standard complex Gaussian tensor drawn from the stream ``seed``.

    Raises:
        TensorError: if any extent is smaller than one.
    """
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape):
        raise TensorError(f"invalid shape {shape}: extents must be >= 1")
    return complex_normal(make_rng(seed), shape)


def check_finite(t: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(t)):
        raise TensorError(f"{what} contains NaN or Inf")
    return t


def contract(a: np.ndarray, axes_a: Sequence[int], b: np.ndarray,
             axes_b: Sequence[int]) -> np.ndarray:
    """Sum over paired axes of ``a`` and ``b``.

    The surviving axes of ``a`` come first, then those of ``b``, each in
    their original order.
    """
    axes_a = [int(i) % a.ndim for i in axes_a] if a.ndim else []
    axes_b = [int(i) % b.ndim for i in axes_b] if b.ndim else []
    if len(axes_a) != len(axes_b):
        raise TensorError("axis lists must have equal length")
    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise TensorError("axis lists must be duplicate-free")
    for i, j in zip(axes_a, axes_b):
        if a.shape[i] != b.shape[j]:
            raise TensorError(
                f"extent mismatch: a axis {i} has {a.shape[i]}, "
                f"b axis {j} has {b.shape[j]}")
    out = np.tensordot(a, b, axes=(axes_a, axes_b))
    return check_finite(np.asarray(out), "contraction result")


@dataclass(frozen=True)
class SvdResult:
    """Truncated singular value decomposition ``M ~ U diag(s) Vh``."""

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors_conj: np.ndarray
    discarded_weight: float

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors_conj


def _svd(m: np.ndarray):
    try:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def svd_truncate(matrix: np.ndarray, chi: Optional[int] = None) -> SvdResult:
    """Keep the ``chi`` largest singular triplets of a matrix.

    ``chi=None`` keeps everything.  ``discarded_weight`` is the 2-norm of the
    dropped singular values.  Equal singular values keep LAPACK's order, i.e.
    the lower index survives.
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise TensorError(f"svd_truncate needs a matrix, got shape {matrix.shape}")
    if chi is not None and chi < 1:
        raise ValueError("chi must be >= 1")
    check_finite(matrix, "matrix")
    u, s, vh = _svd(matrix)
    order = np.argsort(-s, kind="stable")
    u, s, vh = u[:, order], s[order], vh[order, :]
    keep = len(s) if chi is None else min(chi, len(s))
    discarded = float(np.sqrt(np.sum(s[keep:] ** 2)))
    return SvdResult(u[:, :keep], s[:keep], vh[:keep, :], discarded)


@dataclass
class EigenPair:
    """One eigenpair of a linear map; ``left_vector`` is optional."""

    value: complex
    right_vector: np.ndarray
    left_vector: Optional[np.ndarray] = None
    residual: float = 0.0


def _fix_phase(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def _dense_matrix(apply: Callable, dim: int) -> np.ndarray:
    cols = [np.asarray(apply(e), dtype=complex) for e in np.eye(dim, dtype=complex)]
    return np.array(cols).T


def _eig_candidates(apply, dim, k, tol, max_iter, seed, v0):
    """Return (values, vectors) of the k largest-magnitude eigenvalues."""
    if dim <= DENSE_EIG_LIMIT:
        w, v = np.linalg.eig(_dense_matrix(apply, dim))
    else:
        op = spla.LinearOperator((dim, dim), matvec=apply, dtype=complex)
        if v0 is None:
            v0 = complex_normal(make_rng(seed), (dim,))
        ncv = min(dim, max(2 * k + 1, 40))
        try:
            w, v = spla.eigs(op, k=k, which="LM", tol=tol * 0.1, maxiter=max_iter,
                             v0=v0, ncv=ncv)
        except spla.ArpackNoConvergence as exc:
            if len(exc.eigenvalues) < k:
                raise ConvergenceError(
                    f"eigensolver did not converge in {max_iter} restarts") from exc
            w, v = exc.eigenvalues, exc.eigenvectors
    order = np.argsort(-np.abs(w), kind="stable")
    return w[order][:k], v[:, order][:, :k]


def dominant_eigenpairs(apply: Callable[[np.ndarray], np.ndarray], dim: int,
                        count: int = 1, tol: float = 1e-10, max_iter: int = 1000,
                        seed: SeedLike = 0, v0: Optional[np.ndarray] = None,
                        apply_adjoint: Optional[Callable] = None,
                        check_gap: bool = True) -> list:
    """Largest-magnitude eigenpairs of a matrix-free linear map.

    Small maps (``dim <= DENSE_EIG_LIMIT``) are built densely and solved with
    LAPACK; larger ones use restarted Arnoldi (ARPACK) started from ``v0`` or
    a seeded random vector.  If ``apply_adjoint`` is given, left eigenvectors
    are computed as well and normalised so that ``<l_i|r_i> = 1``.

    Args:
        apply: callable returning ``A @ v`` for a 1d complex vector.
        dim: dimension of the map.
        count: 1 or 2.
        tol: residual tolerance, relative to ``max(1, |lambda_1|)``.
        max_iter: maximum number of Arnoldi restarts.
        seed: seed of the random start vector.
        v0: optional start vector (warm start).
        apply_adjoint: optional callable returning ``A^dagger @ v``.
        check_gap: raise if ``count == 1`` and the top two moduli coincide.

    Returns:
        ``count`` EigenPair objects sorted by decreasing ``|value|``.

    Raises:
        DegenerateEigenvalueError: dominant eigenvalue not separated.
        ConvergenceError: a residual above tolerance.
    """
    if count not in (1, 2):
        raise ValueError("count must be 1 or 2")
    if tol <= 0:
        raise ValueError("tol must be positive")
    k = min(2, dim)
    w, v = _eig_candidates(apply, dim, k, tol, max_iter, seed, v0)
    if count == 1 and check_gap and len(w) > 1:
        if abs(w[0]) - abs(w[1]) < 1e-12 * abs(w[0]):
            raise DegenerateEigenvalueError(
                f"|lambda_1| = {abs(w[0]):.6g} is degenerate with |lambda_2|")
    scale = max(1.0, abs(w[0]))
    pairs = []
    for i in range(min(count, len(w))):
        vec = _fix_phase(v[:, i])
        res = float(np.linalg.norm(apply(vec) - w[i] * vec))
        if res > tol * scale:
            raise ConvergenceError(
                f"eigenpair {i} residual {res:.3g} above tolerance {tol:.3g}", res)
        pairs.append(EigenPair(complex(w[i]), vec, None, res))
    if apply_adjoint is not None:
        wl, vl = _eig_candidates(apply_adjoint, dim, k, tol, max_iter, seed, None)
        for pair in pairs:
            j = int(np.argmin(np.abs(wl - np.conj(pair.value))))
            left = vl[:, j]
            overlap = np.vdot(left, pair.right_vector)
            if abs(overlap) < 1e-14:
                raise ConvergenceError("left and right eigenvectors are orthogonal")
            pair.left_vector = left / np.conj(overlap)
    return pairs
