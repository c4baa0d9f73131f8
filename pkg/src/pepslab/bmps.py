"""Boundary MPS contraction of infinite (translation-invariant) PEPS networks.

A uniform boundary MPS is a single tensor ``B`` with axes
``(left, phys, right)``; ``B[:, a, :]`` is the matrix ``B^a`` and the state is
``... B^{a_1} B^{a_2} ...``.  The physical index runs over doubled PEPS
bonds (dimension D^2).

Transfer maps act on ``chi x chi`` matrices:

* left action  ``l -> sum_a A^{a T} l C^a``  (``_left``),
* right action ``r -> sum_a A^a r C^{a T}``  (``_right``),

with ``A = conj(B)``, ``C = B`` for the left norm environment and
``A = B``, ``C = conj(B)`` for the right one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from .peps import DoubleTensor
from .tensor import (ConvergenceError, DegenerateEigenvalueError, TensorError,
                     dominant_eigenpairs)

log = logging.getLogger(__name__)

UNIFORM = "uniform"
FINITE = "finite"

#: Eigenvalues of a gauge environment below this fraction of the largest one
#: are treated as zero (strict mode raises instead).
GAUGE_CUTOFF = 1e-12
#: Singular values of MP below this fraction of the largest are numerical zeros.
SCHMIDT_ZERO = 1e-14
#: Residual tolerance for environment eigenvectors.
EIG_TOL = 1e-11
#: Gauge tolerance used while the fixed-point iteration is far from converged.
LOOSE_EIG_TOL = 1e-5


class GaugeError(RuntimeError):
    """The environment needed for a canonical gauge is singular."""


@dataclass
class BoundaryMps:
    """Boundary MPS in uniform (one tensor) or finite (one tensor per column) mode."""

    tensors: List[np.ndarray]
    mode: str = UNIFORM
    schmidt: Optional[np.ndarray] = None
    log_norm: float = 0.0

    def __post_init__(self):
        if self.mode not in (UNIFORM, FINITE):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == UNIFORM and len(self.tensors) != 1:
            raise ValueError("a uniform boundary MPS has exactly one tensor")
        for t in self.tensors:
            if t.ndim != 3:
                raise TensorError(f"bMPS tensors need 3 axes, got {t.shape}")
        if self.schmidt is not None:
            s = np.asarray(self.schmidt)
            if abs(np.sum(s ** 2) - 1.0) > 1e-10 or np.any(np.diff(s) > 1e-14):
                raise ValueError("schmidt values must be normalised and non-increasing")

    @property
    def tensor(self) -> np.ndarray:
        if self.mode != UNIFORM:
            raise AttributeError("finite boundary MPS has no single tensor")
        return self.tensors[0]

    @property
    def chi(self) -> int:
        return max(max(t.shape[0], t.shape[2]) for t in self.tensors)

    @property
    def phys_dim(self) -> int:
        return self.tensors[0].shape[1]


@dataclass
class GaugePair:
    """Left/right gauges with ``M^dag M = L`` and ``P P^dag = R``.

    ``M_inv`` and ``P_inv`` are (pseudo-)inverses; ``eigenvalue`` is the
    dominant eigenvalue of the self-transfer map before normalisation.
    """

    M: np.ndarray
    P: np.ndarray
    M_inv: np.ndarray
    P_inv: np.ndarray
    conditioning: Tuple[float, float]
    eigenvalue: float
    left_env: np.ndarray = field(repr=False, default=None)
    right_env: np.ndarray = field(repr=False, default=None)


@dataclass
class FixedPointResult:
    bmps: BoundaryMps
    iterations: int
    fidelity_history: List[complex]
    schmidt: np.ndarray
    spectrum_history: List[float] = field(default_factory=list)
    entropy_history: List[float] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Transfer-map kernels
# ---------------------------------------------------------------------------

def _left(l: np.ndarray, A: np.ndarray, C: np.ndarray) -> np.ndarray:
    """sum_{a,b,i} A[a,i,c] l[a,b] C[b,i,d]."""
    ca, p, cc = A.shape
    cb, _, cd = C.shape
    x = (l @ C.reshape(cb, p * cd)).reshape(ca * p, cd)
    return A.reshape(ca * p, cc).T @ x


def _right(r: np.ndarray, A: np.ndarray, C: np.ndarray) -> np.ndarray:
    """sum_{c,d,i} A[a,i,c] r[c,d] C[b,i,d]."""
    ca, p, cc = A.shape
    cb, _, cd = C.shape
    x = (A.reshape(ca * p, cc) @ r).reshape(ca, p * cd)
    return x @ C.reshape(cb, p * cd).T


def _left_absorbed(l: np.ndarray, B: np.ndarray, E: np.ndarray) -> np.ndarray:
    """``_left(l, conj(B'), B')`` for ``B' = _absorb(B, E)`` without forming B'.

    Costs O(chi^3 D^6 + chi^2 D^10) instead of O(chi^3 D^8).
    """
    ca, _, cb = B.shape
    DL, _, DR, _ = E.shape
    x = np.tensordot(l.reshape(ca, DL, ca, DL), B.conj(), axes=(0, 0))   # L,a2,L2,u,b
    x = np.tensordot(x, E.conj(), axes=([0, 3], [0, 1]))                 # a2,L2,b,R,d
    x = np.tensordot(x, E, axes=([1, 4], [0, 3]))                        # a2,b,R,v,R2
    x = np.tensordot(x, B, axes=([0, 3], [0, 1]))                        # b,R,R2,b2
    return x.transpose(0, 1, 3, 2).reshape(cb * DR, cb * DR)


def _right_absorbed(r: np.ndarray, B: np.ndarray, E: np.ndarray) -> np.ndarray:
    """``_right(r, B', conj(B'))`` for ``B' = _absorb(B, E)`` without forming B'."""
    ca, _, cb = B.shape
    DL, _, DR, _ = E.shape
    x = np.tensordot(B, r.reshape(cb, DR, cb, DR), axes=(2, 0))          # a,u,R,b2,R2
    x = np.tensordot(x, E, axes=([1, 2], [1, 2]))                        # a,b2,R2,L,d
    x = np.tensordot(x, E.conj(), axes=([2, 4], [2, 3]))                 # a,b2,L,L2,v
    x = np.tensordot(x, B.conj(), axes=([1, 4], [2, 1]))                 # a,L,L2,a2
    return x.transpose(0, 1, 3, 2).reshape(ca * DL, ca * DL)


def _power_refine(apply, v0, tol, steps=45):
    """Power iteration from a warm start; returns (value, vector) or None."""
    x = v0 / np.linalg.norm(v0)
    for _ in range(steps):
        y = apply(x)
        lam = np.vdot(x, y)
        if abs(lam) == 0.0:
            return None
        if np.linalg.norm(y - lam * x) <= tol * abs(lam):
            return lam, x
        x = y / np.linalg.norm(y)
    return None


def _environment(A, C, side, v0=None, tol=EIG_TOL, check_gap=True, factors=None):
    """Dominant eigenmatrix of a left or right transfer action.

    With ``factors = (B, E)`` the self-transfer map of ``_absorb(B, E)`` is
    applied in factored form; ``A`` and ``C`` then only fix the shape.
    """
    chi_a = A.shape[0] if side == "left" else A.shape[2]
    chi_c = C.shape[0] if side == "left" else C.shape[2]
    shape = (chi_a, chi_c)
    if factors is not None:
        fk = _left_absorbed if side == "left" else _right_absorbed

        def kern(v, A, C):
            return fk(v, *factors)
    else:
        kern = _left if side == "left" else _right

    def apply(v):
        return kern(v.reshape(shape), A, C).reshape(-1)

    dim = chi_a * chi_c
    if v0 is None or v0.size != dim:
        # the identity is a good start for positive (norm) transfer maps
        v0 = np.eye(chi_a, chi_c, dtype=complex)
    hit = _power_refine(apply, v0.reshape(-1), tol)
    if hit is not None:
        return hit[0], hit[1].reshape(shape)
    pair = dominant_eigenpairs(apply, dim, 1, tol, seed=0,
                               v0=v0.reshape(-1).astype(complex),
                               check_gap=check_gap)[0]
    return pair.value, pair.right_vector.reshape(shape)


def transfer_spectrum(bmps: BoundaryMps, count: int = 2) -> np.ndarray:
    """Largest-magnitude eigenvalues of the self-transfer map, descending."""
    B = bmps.tensor
    chi = B.shape[0]

    def apply(v):
        return _left(v.reshape(chi, chi), B.conj(), B).reshape(-1)

    pairs = dominant_eigenpairs(apply, chi * chi, count, EIG_TOL, check_gap=False)
    return np.array([p.value for p in pairs])


# ---------------------------------------------------------------------------
# Construction and row application
# ---------------------------------------------------------------------------

def init_boundary(dt: DoubleTensor) -> BoundaryMps:
    """Top boundary: the doubled tensor with its up leg fixed to index 0."""
    B = dt.tensor[:, 0, :, :].transpose(0, 2, 1)
    return BoundaryMps([np.ascontiguousarray(B)], UNIFORM)


def _absorb(B: np.ndarray, E: np.ndarray) -> np.ndarray:
    cl, p, cr = B.shape
    out = np.einsum("aub,lurd->aldbr", B, E, optimize=True)
    return out.reshape(cl * E.shape[0], E.shape[3], cr * E.shape[2])


def apply_row(bmps: BoundaryMps, dt) -> BoundaryMps:
    """Multiply a row of doubled tensors onto the boundary (no truncation).

    Args:
        bmps: boundary MPS; its physical legs meet the up legs of the row.
        dt: a DoubleTensor (uniform, or reused on every column) or a list of
            DoubleTensors, one per column, for finite chains.
    """
    dts = dt if isinstance(dt, (list, tuple)) else [dt] * len(bmps.tensors)
    if len(dts) != len(bmps.tensors):
        raise TensorError("row length differs from boundary length")
    out = []
    for B, d in zip(bmps.tensors, dts):
        E = d.tensor
        if E.shape[1] != B.shape[1]:
            raise TensorError(
                f"boundary physical extent {B.shape[1]} != row up extent {E.shape[1]}")
        out.append(_absorb(B, E))
    return BoundaryMps(out, bmps.mode, None, bmps.log_norm)


# ---------------------------------------------------------------------------
# Gauges and truncation
# ---------------------------------------------------------------------------

def _hermitian_root(X: np.ndarray, strict: bool, what: str):
    """Hermitian square root of a (Hermitised, PSD-projected) eigenmatrix."""
    tr = np.trace(X)
    if abs(tr) == 0.0:
        raise GaugeError(f"{what} environment has zero trace")
    X = X * (abs(tr) / tr)
    X = 0.5 * (X + X.conj().T)
    w, U = np.linalg.eigh(X)
    wmax = np.max(np.abs(w))
    if wmax == 0.0:
        raise GaugeError(f"{what} environment vanishes")
    if w[-1] < 0:
        w, X = -w[::-1], -X
        U = U[:, ::-1]
    small = w < GAUGE_CUTOFF * w.max()
    if strict and np.any(small):
        raise GaugeError(
            f"{what} environment is ill-conditioned: eigenvalue {w.min():.3g} "
            f"below {GAUGE_CUTOFF:g} x max {w.max():.3g}")
    w = np.where(small, 0.0, w)
    root = np.sqrt(w)
    inv = np.where(small, 0.0, 1.0 / np.where(small, 1.0, root))
    R = (U * root) @ U.conj().T
    R_inv = (U * inv) @ U.conj().T
    kept = root[~small]
    cond = float(kept.max() / kept.min()) if kept.size else np.inf
    return R, R_inv, cond


def find_gauges(bmps: BoundaryMps, tol: float = EIG_TOL, strict: bool = True,
                warm: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                factors=None) -> GaugePair:
    """Gauges bringing a uniform bMPS into left and right canonical form.

    The dominant left eigenmatrix ``L`` of ``sum_a B^a^dag L B^a`` and right
    eigenmatrix ``R`` of ``sum_a B^a R B^a^dag`` are Hermitised, projected to
    their positive part and factorised as ``L = M^dag M``, ``R = P P^dag``
    with Hermitian square roots.  Then ``M B M^-1 / sqrt(lambda)`` is left
    canonical and ``P^-1 B P / sqrt(lambda)`` right canonical.

    Args:
        bmps: uniform boundary MPS.
        tol: eigen-residual tolerance.
        strict: raise GaugeError on near-singular environments; otherwise
            project them onto their support and use pseudo-inverses.
        warm: optional (L, R) start matrices from a previous call.
        factors: optional (B0, E) with ``bmps.tensor == _absorb(B0, E)``;
            enables the cheaper factored transfer map.
    """
    B = bmps.tensor
    wl = wr = None
    if warm is not None:
        wl, wr = warm
    lam_l, L = _environment(B.conj(), B, "left", wl, tol, factors=factors)
    lam_r, R = _environment(B, B.conj(), "right", wr, tol, factors=factors)
    if abs(lam_l - lam_r) > 1e-8 * max(1.0, abs(lam_l)):
        log.debug("left/right dominant eigenvalues differ: %s vs %s", lam_l, lam_r)
    M, M_inv, cm = _hermitian_root(L, strict, "left")
    P, P_inv, cp = _hermitian_root(R, strict, "right")
    return GaugePair(M, P, M_inv, P_inv, (cm, cp), float(abs(lam_l)), L, R)


def canonical_residuals(bmps: BoundaryMps, g: GaugePair) -> Tuple[float, float]:
    """Max-entry deviation of the gauged tensors from the canonical identities."""
    B = bmps.tensor / np.sqrt(g.eigenvalue)
    Bl = np.einsum("ab,bic,cd->aid", g.M, B, g.M_inv)
    Br = np.einsum("ab,bic,cd->aid", g.P_inv, B, g.P)
    chi = B.shape[0]
    eye = np.eye(chi)
    left = _left(eye, Bl.conj(), Bl)
    right = _right(eye, Br, Br.conj())
    return float(np.max(np.abs(left - eye))), float(np.max(np.abs(right - eye)))


def _fix_bond_phases(B: np.ndarray) -> np.ndarray:
    """Remove the diagonal phase freedom B -> Phi^* B Phi of a Schmidt gauge.

    Row 0 of the bond is used as reference: for every column j a fixed
    linear combination of ``B[0, :, j]`` is made real positive.  This keeps
    successive iterates in the same gauge so that environments can be
    warm-started.
    """
    weights = 1.0 + np.arange(B.shape[1])
    ref = weights @ B[0]
    ph = np.ones(B.shape[2], dtype=complex)
    nz = np.abs(ref) > 0
    ph[nz] = np.abs(ref[nz]) / ref[nz]
    ph = ph / ph[0]
    return ph.conj()[:, None, None] * B * ph[None, None, :]


@dataclass
class TruncationResult:
    bmps: BoundaryMps
    schmidt: np.ndarray
    discarded_weight: float
    full_schmidt: np.ndarray
    gauges: GaugePair = field(repr=False, default=None)


def truncate(bmps: BoundaryMps, chi: int, tol: float = EIG_TOL,
             warm: Optional[Tuple[np.ndarray, np.ndarray]] = None,
             factors=None) -> TruncationResult:
    """Truncate a uniform bMPS to bond dimension ``chi`` in the Schmidt basis.

    Finds the gauges M, P, takes the SVD ``M P = U S V^dag`` and returns
    ``B(chi) = S'^1/2 V'^dag P^-1 B M^-1 U' S'^1/2`` built from the ``chi``
    largest singular values, with ``B`` normalised to unit transfer
    eigenvalue.  Numerically vanishing singular values (below 1e-14 of the
    largest) are always dropped.

    Returns:
        TruncationResult with the truncated bMPS, the normalised retained
        Schmidt spectrum, the discarded weight sqrt(sum of dropped sigma^2)
        (relative to the full normalised spectrum) and the full spectrum.
    """
    if chi < 1:
        raise ValueError("chi must be >= 1")
    g = find_gauges(bmps, tol, strict=False, warm=warm, factors=factors)
    B = bmps.tensor / np.sqrt(g.eigenvalue)
    u, s, vh = scipy.linalg.svd(g.M @ g.P, full_matrices=False, lapack_driver="gesdd")
    order = np.argsort(-s, kind="stable")
    u, s, vh = u[:, order], s[order], vh[order, :]
    norm = np.sqrt(np.sum(s ** 2))
    s_full = s / norm
    nz = int(np.sum(s_full > SCHMIDT_ZERO * s_full[0]))
    keep = min(chi, nz)
    u, vh = u[:, :keep], vh[:keep, :]
    sk = s_full[:keep]
    discarded = float(np.sqrt(max(0.0, np.sum(s_full[keep:] ** 2))))
    root = np.sqrt(sk)
    left = (root[:, None] * vh) @ g.P_inv
    right = g.M_inv @ (u * root)
    Bn = _fix_bond_phases(np.einsum("ab,bic,cd->aid", left, B, right, optimize=True))
    schmidt = sk / np.linalg.norm(sk)
    out = BoundaryMps([np.ascontiguousarray(Bn)], UNIFORM, schmidt)
    return TruncationResult(out, schmidt, discarded, s_full, g)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def normalise(bmps: BoundaryMps) -> BoundaryMps:
    """Rescale so that the self-transfer map has dominant eigenvalue 1."""
    B = bmps.tensor
    lam, _ = _environment(B.conj(), B, "left")
    return BoundaryMps([B / np.sqrt(abs(lam))], UNIFORM, bmps.schmidt)


def fidelity_per_site(b1: BoundaryMps, b2: BoundaryMps, normalize: bool = True) -> complex:
    """Dominant eigenvalue of the mixed transfer map sum_a B1^a (x) conj(B2^a).

    With ``normalize`` both states are first rescaled to unit norm per site.
    """
    if b1.phys_dim != b2.phys_dim:
        raise TensorError("physical extents differ")
    B1, B2 = b1.tensor, b2.tensor
    if normalize:
        B1 = normalise(b1).tensor
        B2 = normalise(b2).tensor
    lam, _ = _environment(B1, B2.conj(), "left")
    return complex(lam)


def correlation_length(bmps: BoundaryMps) -> float:
    """xi = -1 / log|lambda_2 / lambda_1| of the self-transfer map.

    Returns 0 for chi = 1 or lambda_2 = 0.
    """
    B = bmps.tensor
    if B.shape[0] == 1:
        return 0.0
    lam = transfer_spectrum(bmps, 2)
    if len(lam) < 2 or abs(lam[1]) == 0.0:
        return 0.0
    ratio = abs(lam[1]) / abs(lam[0])
    if ratio >= 1.0 - 1e-12:
        raise DegenerateEigenvalueError("|lambda_2| equals |lambda_1|")
    return float(-1.0 / np.log(ratio))


def correlation_length_from_spectrum(lam1: complex, lam2: complex) -> float:
    if abs(lam2) == 0.0:
        return 0.0
    ratio = abs(lam2) / abs(lam1)
    if ratio >= 1.0 - 1e-12:
        raise DegenerateEigenvalueError("|lambda_2| equals |lambda_1|")
    return float(-1.0 / np.log(ratio))


def renyi_entropy(schmidt, n: float) -> float:
    """Renyi entropy (natural log) of the distribution sigma_i^2.

    ``n = 1`` gives the von Neumann entropy and ``n = 0`` the log of the
    number of nonzero Schmidt values.
    """
    if n < 0:
        raise ValueError("Renyi order must be non-negative")
    p = np.asarray(schmidt, dtype=float) ** 2
    p = p[p > 0]
    p = p / p.sum()
    if n == 0:
        return float(np.log(len(p)))
    if n == 1:
        return float(-np.sum(p * np.log(p)))
    if np.isinf(n):
        return float(-np.log(p.max()))
    return float(np.log(np.sum(p ** n)) / (1.0 - n))


def _spectrum_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max-entry distance between two squared Schmidt spectra (zero padded)."""
    k = max(len(a), len(b))
    pa = np.zeros(k)
    pb = np.zeros(k)
    pa[:len(a)] = np.sort(a)[::-1] ** 2
    pb[:len(b)] = np.sort(b)[::-1] ** 2
    return float(np.max(np.abs(pa - pb)))


# ---------------------------------------------------------------------------
# Fixed point iteration
# ---------------------------------------------------------------------------

def _grow_and_truncate(b: BoundaryMps, dt: DoubleTensor, chi: int, warm,
                       tol: float = EIG_TOL) -> TruncationResult:
    """Absorb one row and truncate, using the factored transfer map when cheaper."""
    c, D2 = b.tensor.shape[0], dt.D2
    factors = (b.tensor, dt.tensor) if D2 / c + 1.0 / D2 < 0.8 else None
    return truncate(apply_row(b, dt), chi, tol, warm=warm, factors=factors)


def fixed_point(dt: DoubleTensor, chi: int, fidelity_tol: float = 1e-10,
                spectrum_tol: float = 1e-8, max_iter: int = 2000,
                initial: Optional[BoundaryMps] = None,
                min_iter: int = 2) -> FixedPointResult:
    """Iterate row application and truncation until the boundary converges.

    Starting from ``init_boundary(dt)`` (or ``initial``), rows are absorbed
    exactly while the bond dimension stays within ``chi``; afterwards each
    step absorbs a row and truncates back to ``chi``.  Convergence requires
    both ``|1 - |F_s(B(y), B(y+1))|| < fidelity_tol`` and a max-entry change of
    the squared Schmidt spectrum below ``spectrum_tol``.

    Raises:
        ConvergenceError: ``max_iter`` steps without convergence; the
            exception carries the fidelity history.
    """
    if chi < 1:
        raise ValueError("chi must be >= 1")
    b = initial if initial is not None else init_boundary(dt)
    if initial is None:
        # exact growth phase: no truncation is needed yet
        while dt.D2 > 1 and b.tensor.shape[0] * dt.D2 <= chi:
            b = apply_row(b, dt)
    res = truncate(b, chi, tol=LOOSE_EIG_TOL)
    b, prev_s = res.bmps, res.schmidt
    lam, env = _environment(b.tensor.conj(), b.tensor, "left")
    B_prev = b.tensor / np.sqrt(abs(lam))
    warm = mixed = None
    fids, dists, ents = [], [], [renyi_entropy(prev_s, 1)]
    change = 1.0
    for it in range(1, max_iter + 1):
        # gauges only need to be accurate on the scale of the current change
        tol = min(LOOSE_EIG_TOL, max(EIG_TOL, 1e-2 * change))
        res = _grow_and_truncate(b, dt, chi, warm, tol)
        warm = (res.gauges.left_env, res.gauges.right_env)
        b = res.bmps
        B = b.tensor
        lam, env = _environment(B.conj(), B, "left", env)
        B = B / np.sqrt(abs(lam))
        f, mixed = _environment(B_prev, B.conj(), "left", mixed)
        dist = _spectrum_distance(prev_s, res.schmidt)
        fids.append(complex(f))
        dists.append(dist)
        ents.append(renyi_entropy(res.schmidt, 1))
        B_prev, prev_s = B, res.schmidt
        change = max(abs(1.0 - abs(f)), dist)
        if it >= min_iter and tol <= EIG_TOL and abs(1.0 - abs(f)) < fidelity_tol and dist < spectrum_tol:
            out = BoundaryMps([B], UNIFORM, res.schmidt)
            return FixedPointResult(out, it, fids, res.schmidt, dists, ents)
    raise ConvergenceError(
        f"boundary MPS not converged after {max_iter} iterations "
        f"(last |1-|F_s|| = {abs(1 - abs(fids[-1])):.3g}, spectrum change {dists[-1]:.3g})",
        abs(1 - abs(fids[-1])), fids)


def entropy_evolution(dt: DoubleTensor, chi: int, rows: int) -> List[float]:
    """Von Neumann entropy of the truncated uniform boundary after each row.

    Entry ``y - 1`` is the Schmidt entropy after ``y`` rows (the first row
    being the initial boundary).  Works for overlap networks as well.
    """
    b = init_boundary(dt)
    res = truncate(b, chi)
    out = [renyi_entropy(res.schmidt, 1)]
    b = res.bmps
    warm = None
    for _ in range(rows - 1):
        res = _grow_and_truncate(b, dt, chi, warm)
        warm = (res.gauges.left_env, res.gauges.right_env)
        b = res.bmps
        out.append(renyi_entropy(res.schmidt, 1))
    return out


# ---------------------------------------------------------------------------
# Reduced density matrices of an infinite PEPS
# ---------------------------------------------------------------------------

def _column_apply_right(r, top, E, bot):
    """r'[b,l,e] = sum top[b,u,c] E[l,u,r,d] bot[e,d,f] r[c,r,f]."""
    x = np.tensordot(top, r, axes=(2, 0))            # b,u,r,f
    x = np.tensordot(x, E, axes=([1, 2], [1, 2]))     # b,f,l,d
    x = np.tensordot(x, bot, axes=([1, 3], [2, 1]))   # b,l,e
    return x


def _column_apply_left(l, top, E, bot):
    """l'[c,r,f] = sum l[b,l,e] top[b,u,c] E[l,u,r,d] bot[e,d,f]."""
    x = np.tensordot(l, top, axes=(0, 0))            # l,e,u,c
    x = np.tensordot(x, E, axes=([0, 2], [0, 1]))     # e,c,r,d
    x = np.tensordot(x, bot, axes=([0, 3], [0, 1]))   # c,r,f
    return x


def column_environments(top: BoundaryMps, bot: BoundaryMps, dt: DoubleTensor):
    """Dominant left/right eigenvectors of the column transfer map.

    The column map sandwiches one doubled tensor between the top and bottom
    boundary tensors.  Returns (lambda, left, right) with left and right as
    3-index tensors (chi_top, D^2, chi_bot).
    """
    T, Bb, E = top.tensor, bot.tensor, dt.tensor
    shape = (T.shape[0], E.shape[0], Bb.shape[0])
    dim = int(np.prod(shape))

    def ar(v):
        return _column_apply_right(v.reshape(shape), T, E, Bb).reshape(-1)

    def al(v):
        return _column_apply_left(v.reshape(shape), T, E, Bb).reshape(-1)

    pr = dominant_eigenpairs(ar, dim, 1, EIG_TOL)[0]
    pl = dominant_eigenpairs(al, dim, 1, EIG_TOL)[0]
    return pr.value, pl.right_vector.reshape(shape), pr.right_vector.reshape(shape)


def reduced_density_matrix(fp_top: FixedPointResult, fp_bottom: FixedPointResult,
                           dt: DoubleTensor, open_dt: np.ndarray,
                           sites: int = 1) -> np.ndarray:
    """Single-site or two-site (horizontal) reduced density matrix.

    Args:
        fp_top: fixed point of the network seen from above.
        fp_bottom: fixed point of the vertically reflected network.
        dt: doubled tensor of the norm network.
        open_dt: doubled tensor with open physical legs, axes
            (s, s', l, u, r, d), e.g. from ``peps.open_double_tensor``.
        sites: 1 or 2 contiguous sites in a row.

    Returns:
        Hermitian, unit-trace density matrix (Hermitised explicitly).
    """
    if sites not in (1, 2):
        raise ValueError("only 1 or 2 contiguous sites are supported")
    top, bot = fp_top.bmps, fp_bottom.bmps
    lam, lvec, rvec = column_environments(top, bot, dt)
    T, Bb = top.tensor, bot.tensor
    d = open_dt.shape[0]
    # column with open physical legs: (b,l,e) -> (s,s',c,r,f)
    x = np.tensordot(lvec, T, axes=(0, 0))                        # l,e,u,c
    x = np.tensordot(x, open_dt, axes=([0, 2], [2, 3]))             # e,c,s,t,r,d
    x = np.tensordot(x, Bb, axes=([0, 5], [0, 1]))                  # c,s,t,r,f
    x = x.transpose(1, 2, 0, 3, 4)                                  # s,t,c,r,f
    if sites == 1:
        rho = np.tensordot(x, rvec, axes=([2, 3, 4], [0, 1, 2]))
    else:
        y = np.tensordot(x, T, axes=(2, 0))                         # s,t,r,f,u,c
        y = np.tensordot(y, open_dt, axes=([2, 4], [2, 3]))         # s,t,f,c,S,Tt,r,d
        y = np.tensordot(y, Bb, axes=([2, 7], [0, 1]))              # s,t,c,S,Tt,r,f
        y = np.tensordot(y, rvec, axes=([2, 5, 6], [0, 1, 2]))      # s,t,S,Tt
        rho = y.transpose(0, 2, 1, 3).reshape(d * d, d * d)
    tr = np.trace(rho)
    if abs(tr) == 0.0 or not np.isfinite(tr):
        raise ConvergenceError("environment contraction has vanishing norm")
    if tr.real <= 0 and abs(tr.imag) < 1e-8 * abs(tr):
        raise ConvergenceError("environment contraction has non-positive norm")
    rho = rho / tr
    return 0.5 * (rho + rho.conj().T)


def delta_rho(rho_chi: np.ndarray, rho_ref: np.ndarray) -> float:
    """Largest absolute eigenvalue of the Hermitian difference."""
    a, b = np.asarray(rho_chi), np.asarray(rho_ref)
    if a.shape != b.shape:
        raise TensorError(f"density matrices differ in shape: {a.shape} vs {b.shape}")
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return float(np.max(np.abs(np.linalg.eigvalsh(diff))))
