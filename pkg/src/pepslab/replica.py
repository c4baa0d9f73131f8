"""Replica permutation magnet for random PEPS norm networks.

Spins live in S_{2Q}, Q = n m, on an ``Lx x Ly`` lattice.  Row ``y = 0`` is
the boundary row whose dangling legs carry the trace (``g0``) or partial
trace (``gA``) boundary permutations.  Replicas are ordered
``1, 1bar, 2, 2bar, ...``, stored as indices ``0, 1, 2, 3, ...``.

The energy is

    H[g] = -J sum_<rr'> C(g_r, g_r') - h sum_r C(e, g_r) - J sum_{x} C(b_x, g_{x,0})

with ``J = log D``, ``h = log d`` and ``b_x`` the boundary permutation on
column ``x``.  ``C(g, h)`` counts the cycles of ``g^-1 h``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, lgamma, log
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from . import symgroup as sg

ENUMERATION_BUDGET = 10 ** 8
VARIANT_A = "A"
VARIANT_0 = "0"

_TRANSFER_GROUP_LIMIT = 720
_TRANSFER_STATE_LIMIT = 2 * 10 ** 6
_FOURIER_RANK_LIMIT = 2500
_BRUTE_FAST_LIMIT = 2 * 10 ** 6


class TooLargeError(ValueError):
    """The requested exact computation exceeds the work budget."""

    def __init__(self, message: str, count: int):
        super().__init__(message)
        self.count = count


# --- permutations -----------------------------------------------------------

def cycle_count(g, h) -> int:
    """C(g, h): number of cycles of ``g^-1 h``, fixed points included."""
    g, h = np.asarray(g), np.asarray(h)
    if g.shape != h.shape:
        raise ValueError("permutations of different sizes")
    return sg.cycles_of(sg.compose(sg.inverse(g), h))


def ket(k: int) -> int:
    """Index of replica ``k`` (1-based) in the ordering 1, 1bar, 2, 2bar, ..."""
    return 2 * (k - 1)


def bra(k: int) -> int:
    return 2 * (k - 1) + 1


def boundary_perms(n: int, m: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Identity ``e``, trace pairing ``g0`` and partial-trace pairing ``gA``.

    ``g0 = (1 1bar)(2 2bar)...(Q Qbar)``; ``gA`` pairs ket ``k`` with bra
    ``k + 1`` cyclically inside each of the ``m`` groups of ``n`` replicas.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    Q = n * m
    e = np.arange(2 * Q)
    g0 = e.copy()
    gA = e.copy()
    for k in range(1, Q + 1):
        g0[ket(k)], g0[bra(k)] = bra(k), ket(k)
    for grp in range(m):
        for i in range(n):
            k = grp * n + i + 1
            k_next = grp * n + (i + 1) % n + 1
            gA[ket(k)] = bra(k_next)
            gA[bra(k_next)] = ket(k)
    return e, g0, gA


# --- parameters ---------------------------------------------------------------

@dataclass(frozen=True)
class ReplicaParams:
    """Couplings, replica numbers and lattice of the permutation magnet.

    Args:
        n: Renyi index.
        m: number of outer replicas.
        D: bond dimension (may be a non-integer float, only ``log D`` enters).
        d: physical dimension.
        Lx, Ly: lattice size; row 0 carries the boundary fields.
        region: boundary-row columns forming subsystem A.
        periodic_x: add the wrap-around bond in every row.
        bulk_field: include the ``h`` field toward ``e`` (False models
            overlaps and amplitudes rather than norms).
    """

    n: int
    m: int
    D: float
    d: float
    Lx: int
    Ly: int
    region: Tuple[int, ...] = ()
    periodic_x: bool = False
    bulk_field: bool = True

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if self.D < 1 or self.d < 1:
            raise ValueError("D and d must be at least 1")
        if self.Lx < 1 or self.Ly < 1:
            raise ValueError("lattice must have at least one site")
        object.__setattr__(self, "region", tuple(sorted(set(int(x) for x in self.region))))
        if any(not 0 <= x < self.Lx for x in self.region):
            raise ValueError("region columns out of range")

    @property
    def Q(self) -> int:
        return self.n * self.m

    @property
    def J(self) -> float:
        return log(self.D)

    @property
    def h(self) -> float:
        return log(self.d) if self.bulk_field else 0.0

    @property
    def n_sites(self) -> int:
        return self.Lx * self.Ly

    def site(self, x: int, y: int) -> int:
        return y * self.Lx + x

    def bonds(self) -> List[Tuple[int, int]]:
        out = []
        for y in range(self.Ly):
            for x in range(self.Lx):
                if x + 1 < self.Lx:
                    out.append((self.site(x, y), self.site(x + 1, y)))
                elif self.periodic_x:
                    out.append((self.site(x, y), self.site(0, y)))
                if y + 1 < self.Ly:
                    out.append((self.site(x, y), self.site(x, y + 1)))
        return out

    def boundary_perm_of(self, x: int, variant: str) -> np.ndarray:
        _, g0, gA = boundary_perms(self.n, self.m)
        if variant == VARIANT_A and x in self.region:
            return gA
        if variant not in (VARIANT_A, VARIANT_0):
            raise ValueError(f"unknown variant {variant!r}")
        return g0

    def configuration_count(self) -> int:
        return factorial(2 * self.Q) ** self.n_sites


# --- energy -----------------------------------------------------------------

def energy(config: Dict[Tuple[int, int], np.ndarray], params: ReplicaParams,
           variant: str = VARIANT_0) -> float:
    """H[g] for a configuration mapping ``(x, y)`` to a permutation."""
    P = params
    e = np.arange(2 * P.Q)
    spins = {}
    for y in range(P.Ly):
        for x in range(P.Lx):
            if (x, y) not in config:
                raise ValueError(f"configuration misses site {(x, y)}")
            g = np.asarray(config[(x, y)])
            if g.shape != (2 * P.Q,) or sorted(g.tolist()) != list(range(2 * P.Q)):
                raise ValueError(f"site {(x, y)} does not hold a permutation of 2Q elements")
            spins[P.site(x, y)] = g
    H = 0.0
    for r, s in P.bonds():
        H -= P.J * cycle_count(spins[r], spins[s])
    for r, g in spins.items():
        H -= P.h * cycle_count(e, g)
    for x in range(P.Lx):
        H -= P.J * cycle_count(P.boundary_perm_of(x, variant), spins[P.site(x, 0)])
    return H


def uniform_config(params: ReplicaParams, g=None) -> Dict[Tuple[int, int], np.ndarray]:
    g = np.arange(2 * params.Q) if g is None else np.asarray(g)
    return {(x, y): g.copy() for y in range(params.Ly) for x in range(params.Lx)}


# --- site weights -------------------------------------------------------------

def _log_site_weights(params: ReplicaParams, variant: str, G: np.ndarray) -> List[np.ndarray]:
    """log of the single-site Boltzmann factor for every group element, per site."""
    P = params
    c_e = sg.cycle_counts(G)
    out = []
    cache = {}
    for y in range(P.Ly):
        for x in range(P.Lx):
            lw = P.h * c_e.astype(float)
            if y == 0:
                b = P.boundary_perm_of(x, variant)
                key = tuple(b)
                if key not in cache:
                    cache[key] = sg.cycle_counts(sg.compose(sg.inverse(b)[None, :], G))
                lw = lw + P.J * cache[key]
            out.append(lw)
    return out


@dataclass
class PartitionResult:
    """log Z with the engine used and, when available, a ground state."""

    log_z: float
    engine: str
    min_energy: Optional[float] = None
    ground_states: Optional[List[Dict[Tuple[int, int], np.ndarray]]] = None


# --- engines ----------------------------------------------------------------

def _brute(params: ReplicaParams, variant: str, chunk: int = 200_000) -> PartitionResult:
    P = params
    G = sg.all_permutations(2 * P.Q)
    ng = len(G)
    N = P.n_sites
    lw = np.stack(_log_site_weights(P, variant, G))
    inv = sg.inverse(G)
    bonds = P.bonds()
    total = ng ** N
    chunks = []
    best = np.inf
    best_idx: List[np.ndarray] = []
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk))
        idx = np.stack(np.unravel_index(flat, (ng,) * N), axis=1) if N > 0 else flat[:, None]
        logw = np.zeros(len(flat))
        for r in range(N):
            logw += lw[r, idx[:, r]]
        for r, s in bonds:
            c = sg.cycle_counts(sg.compose(inv[idx[:, r]], G[idx[:, s]]))
            logw += P.J * c
        chunks.append(logsumexp(logw))
        en = -logw
        m = en.min()
        tol = 1e-9 * max(1.0, abs(m))
        if m < best - tol:
            best = m
            best_idx = [idx[en <= m + tol]]
        elif abs(m - best) <= tol:
            best_idx.append(idx[en <= best + tol])
    gs = []
    for block in best_idx:
        for row in block:
            gs.append({(r % P.Lx, r // P.Lx): G[row[r]].copy() for r in range(N)})
    return PartitionResult(float(logsumexp(chunks)), "brute", float(best), gs)


def _log_kernel(params: ReplicaParams, G: np.ndarray) -> np.ndarray:
    inv = sg.inverse(G)
    c = sg.cycle_counts(sg.compose(inv[:, None, :], G[None, :, :]))
    return params.J * c.astype(float)


def _transfer(params: ReplicaParams, variant: str) -> PartitionResult:
    """Row-by-row transfer over configurations of a full row (max-rescaled)."""
    P = params
    G = sg.all_permutations(2 * P.Q)
    logK = _log_kernel(P, G)
    kmax = logK.max()
    K = np.exp(logK - kmax)
    lw = _log_site_weights(P, variant, G)
    Lx = P.Lx
    log_scale = 0.0
    psi = None
    for y in range(P.Ly):
        if psi is not None:
            for x in range(Lx):
                psi = np.moveaxis(np.tensordot(psi, K, axes=(x, 0)), -1, x)
                log_scale += kmax
        row = np.zeros((len(G),) * Lx)
        for x in range(Lx):
            shape = [1] * Lx
            shape[x] = len(G)
            row = row + lw[P.site(x, y)].reshape(shape)
        for x in range(Lx):
            if x + 1 == Lx and not P.periodic_x:
                continue
            x2 = (x + 1) % Lx
            shape = [1] * Lx
            shape[x] = shape[x2] = len(G)
            if x2 == x:
                row = row + np.diag(logK).reshape(shape)
            else:
                row = row + (logK if x < x2 else logK.T).reshape(shape)
        rmax = row.max()
        w = np.exp(row - rmax)
        psi = w if psi is None else psi * w
        log_scale += rmax
        norm = psi.max()
        psi = psi / norm
        log_scale += log(norm)
    return PartitionResult(float(log_scale + log(psi.sum())), "transfer")


def _graph_walk(params: ReplicaParams) -> Optional[Tuple[List[int], bool]]:
    """Site order of a path or cycle graph, or None for other graphs."""
    N = params.n_sites
    bonds = params.bonds()
    if N == 1:
        return ([0], False) if not bonds else None
    adj = {r: [] for r in range(N)}
    for r, s in bonds:
        if r == s:
            return None
        adj[r].append(s)
        adj[s].append(r)
    if any(len(v) > 2 for v in adj.values()) or len(set(map(frozenset, bonds))) != len(bonds):
        return None
    ends = [r for r, v in adj.items() if len(v) == 1]
    start = ends[0] if ends else 0
    order = [start]
    prev = None
    while len(order) < N:
        nxt = [s for s in adj[order[-1]] if s != prev]
        if not nxt:
            return None
        prev = order[-1]
        order.append(nxt[0])
    closed = not ends
    return order, closed


_IRREP_CACHE: Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray]] = {}


def _fourier_basis(n_letters: int, D: int):
    """Stacked irrep matrix elements R (rank x |G|) and the GL(D) weights."""
    key = (n_letters, D)
    if key not in _IRREP_CACHE:
        rows, lam = [], []
        for shape in sg.partitions(n_letters, max_parts=D):
            t = sg.irrep_table(shape)
            k = t.dim
            rows.append(t.matrices.reshape(len(t.matrices), k * k).T)
            lam.append(np.full(k * k, float(sg.gl_dimension(shape, D))))
        _IRREP_CACHE[key] = (np.concatenate(rows), np.concatenate(lam))
    return _IRREP_CACHE[key]


def fourier_rank(params: ReplicaParams) -> Optional[int]:
    D = params.D
    if abs(D - round(D)) > 0 or D < 1:
        return None
    D = int(round(D))
    return sum(sg.irrep_dimension(s) ** 2 for s in sg.partitions(2 * params.Q, max_parts=D))


def _fourier(params: ReplicaParams, variant: str) -> PartitionResult:
    """Exact sum on a path or cycle via the irreducible-representation split.

    The bond kernel ``D^C(g^-1 h) = sum_lam s_lam(1^D) tr(rho_lam(g)^T rho_lam(h))``
    only involves irreps with at most D rows, so it factors through a
    low-rank matrix of representation matrix elements.
    """
    P = params
    walk = _graph_walk(P)
    if walk is None:
        raise TooLargeError("irrep engine needs a path or cycle lattice", P.configuration_count())
    order, closed = walk
    G = sg.all_permutations(2 * P.Q)
    lw = _log_site_weights(P, variant, G)
    R, lam = _fourier_basis(2 * P.Q, int(round(P.D)))
    log_scale = 0.0
    scaled = []
    for r in order:
        mx = lw[r].max()
        scaled.append(np.exp(lw[r] - mx))
        log_scale += mx
    if len(order) == 1:
        return PartitionResult(float(log_scale + log(scaled[0].sum())), "irrep")
    if closed:
        acc = None
        site_mats = {}
        for w in scaled:
            key = w.tobytes()
            if key not in site_mats:
                site_mats[key] = lam[:, None] * ((R * w) @ R.T)
            M = site_mats[key]
            acc = M.copy() if acc is None else acc @ M
            s = np.abs(acc).max()
            acc /= s
            log_scale += log(s)
        return PartitionResult(float(log_scale + log(np.trace(acc))), "irrep")
    v = R @ scaled[0]
    for w in scaled[1:-1]:
        v = ((R * w) @ (R.T @ (lam * v)))
        s = np.abs(v).max()
        v /= s
        log_scale += log(s)
    val = (lam * v) @ (R @ scaled[-1])
    return PartitionResult(float(log_scale + log(val)), "irrep")


def choose_engine(params: ReplicaParams) -> Tuple[str, int]:
    """Cheapest exact engine and its work estimate (configurations or states)."""
    P = params
    ng = factorial(2 * P.Q)
    total = P.configuration_count()
    if total <= _BRUTE_FAST_LIMIT:
        return "brute", total
    if ng <= _TRANSFER_GROUP_LIMIT and ng ** P.Lx <= _TRANSFER_STATE_LIMIT:
        return "transfer", ng ** P.Lx * P.Ly
    rank = fourier_rank(P)
    if rank is not None and rank <= _FOURIER_RANK_LIMIT and _graph_walk(P) is not None:
        return "irrep", rank * rank * P.n_sites
    if total <= ENUMERATION_BUDGET:
        return "brute", total
    return "none", total


def exact_partition(params: ReplicaParams, variant: str = VARIANT_0,
                    engine: str = "auto") -> PartitionResult:
    """Exact log Z of the replica magnet.

    Args:
        params: model and lattice.
        variant: ``"A"`` (gA on the region) or ``"0"`` (g0 everywhere).
        engine: ``"brute"`` (enumeration, also returns all ground states),
            ``"transfer"`` (row transfer, |S_2Q| <= 720), ``"irrep"`` (path or
            cycle lattices, integer D) or ``"auto"``.

    Raises:
        TooLargeError: no engine fits the budget; the message names the
            number of configurations.
    """
    if engine == "auto":
        engine, _ = choose_engine(params)
    if engine == "brute":
        total = params.configuration_count()
        if total > ENUMERATION_BUDGET:
            raise TooLargeError(f"{total} configurations exceed the enumeration budget "
                                f"of {ENUMERATION_BUDGET}", total)
        return _brute(params, variant)
    if engine == "transfer":
        return _transfer(params, variant)
    if engine == "irrep":
        if fourier_rank(params) is None:
            raise ValueError("irrep engine needs an integer bond dimension")
        return _fourier(params, variant)
    total = params.configuration_count()
    raise TooLargeError(f"no exact engine handles {total} configurations", total)


def replica_entropy_exact(params: ReplicaParams, engine: str = "auto") -> float:
    """(F_A - F_0) / (m (n - 1)) at the given integer m (integer-replica surrogate)."""
    if params.n < 2:
        raise ValueError("the Renyi index must be at least 2")
    za = exact_partition(params, VARIANT_A, engine).log_z
    z0 = exact_partition(params, VARIANT_0, engine).log_z
    return -(za - z0) / (params.m * (params.n - 1))


# --- closed-form large-D predictions -------------------------------------------

@dataclass
class Prediction:
    """Min-cut barrier, area-law coefficient and typical correlation length."""

    ell_star: float
    y: np.ndarray
    S_of_y: np.ndarray
    S_max: float
    area_coeff: float
    xi_typ: float
    ell_star_defined: bool = True


def predictions(D: float, d: float, y_values: Sequence[float], n: int = 2, m: int = 1) -> Prediction:
    """Large-D predictions in nats; ``S(y) = min(2 y log D, 2 ell* log D)``.

    The replica numbers do not enter at this order; they are accepted for
    symmetry with the exact routines.
    """
    if D < 2 or d < 1:
        raise ValueError("need D >= 2 and d >= 1")
    y = np.asarray(y_values, dtype=float)
    J = log(D)
    if d == 1:
        ell = np.inf
        S = 2 * y * J
        return Prediction(ell, y, S, np.inf, D ** -2.0, 1.0 / log(D ** 4), False)
    h = log(d)
    ell = J / h
    S = np.minimum(2 * y * J, 2 * ell * J)
    return Prediction(ell, y, S, 2 * J * J / h, D ** -2.0 * d ** -2.0, 1.0 / log(d * D ** 4))


def single_flip_energy(params: ReplicaParams, site: Tuple[int, int], g,
                       variant: str = VARIANT_0, background=None) -> float:
    """Energy change when one site of a uniform background is set to ``g``."""
    base = uniform_config(params, background)
    flipped = dict(base)
    flipped[site] = np.asarray(g)
    return energy(flipped, params, variant) - energy(base, params, variant)


def log_gamma_ratio(K: int, k: int) -> float:
    """log Gamma(K + k) - log Gamma(K)."""
    return lgamma(K + k) - lgamma(K)
