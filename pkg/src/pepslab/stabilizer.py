"""Pure stabilizer states of prime-dimensional qudits.

A generalized Pauli on N qudits is ``w^c X^x Z^z`` with ``X|k> = |k+1>`` and
``Z|k> = e^{2 pi i k / p}|k>``.  Phases are stored as integer exponents of
``w = e^{2 pi i / q}`` where ``q = p`` for odd p and ``q = 4`` for qubits, so
Hermitian qubit Paulis such as ``Y = i X Z`` stay representable.  The factor
``f = q / p`` converts a symplectic commutation exponent into phase units.

Contraction of stabilizer tensors is carried out by forced Bell projections
onto ``X_i X_j = 1`` and ``Z_i Z_j^{-1} = 1`` followed by removal of the
measured qudits, which are then in a product state with the rest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import gf
from .tensor import SeedLike, make_rng


class StabilizerError(ValueError):
    """Invalid tableau, qudit index or field."""


class _ZeroState:
    """The null vector produced when a forced projection annihilates the state."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ZERO"

    def __bool__(self):
        return False


ZERO = _ZeroState()


def phase_modulus(p: int) -> int:
    return 4 if p == 2 else p


def _check_prime(p: int):
    if not gf.is_prime(int(p)):
        raise StabilizerError(f"qudit dimension must be prime, got {p}")


@dataclass(frozen=True)
class QuditPauli:
    """A single generalized Pauli ``w^phase X^x Z^z``."""

    p: int
    x: np.ndarray
    z: np.ndarray
    phase: int = 0

    def __post_init__(self):
        _check_prime(self.p)
        x = np.asarray(self.x, dtype=np.int64) % self.p
        z = np.asarray(self.z, dtype=np.int64) % self.p
        if x.shape != z.shape or x.ndim != 1:
            raise StabilizerError("x and z must be vectors of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "phase", int(self.phase) % phase_modulus(self.p))

    @property
    def n(self) -> int:
        return self.x.size

    def symplectic(self, other: "QuditPauli") -> int:
        """Exponent s with ``P Q = w_p^s Q P``."""
        return int((self.z @ other.x - self.x @ other.z) % self.p)

    def matrix(self) -> np.ndarray:
        return pauli_matrix(self.p, self.x, self.z, self.phase)

    @classmethod
    def single(cls, p: int, n: int, kind: str, qudit: int, power: int = 1) -> "QuditPauli":
        x = np.zeros(n, dtype=np.int64)
        z = np.zeros(n, dtype=np.int64)
        (x if kind == "X" else z)[qudit] = power
        return cls(p, x, z, 0)


def pauli_matrix(p: int, x, z, phase: int = 0) -> np.ndarray:
    """Dense matrix of ``w^phase X^x Z^z`` (small systems only)."""
    q = phase_modulus(p)
    X = np.roll(np.eye(p), 1, axis=0)
    Z = np.diag(np.exp(2j * np.pi * np.arange(p) / p))
    m = np.ones((1, 1), dtype=complex)
    for xi, zi in zip(x, z):
        m = np.kron(m, np.linalg.matrix_power(X, int(xi)) @ np.linalg.matrix_power(Z, int(zi)))
    return np.exp(2j * np.pi * phase / q) * m


class StabilizerTableau:
    """Generators of a stabilizer group as ``x``, ``z`` (K x N) and phases (K,)."""

    def __init__(self, p: int, x, z, phases, validate: bool = True):
        _check_prime(p)
        self.p = int(p)
        self.q = phase_modulus(self.p)
        self.f = self.q // self.p
        self.x = np.asarray(x, dtype=np.int64) % self.p
        self.z = np.asarray(z, dtype=np.int64) % self.p
        self.phases = np.asarray(phases, dtype=np.int64) % self.q
        if self.x.ndim != 2 or self.x.shape != self.z.shape:
            raise StabilizerError("x and z must be K x N matrices of equal shape")
        if self.phases.shape != (self.x.shape[0],):
            raise StabilizerError("one phase per generator is required")
        if validate:
            self.validate()

    @property
    def n_qudits(self) -> int:
        return self.x.shape[1]

    @property
    def n_generators(self) -> int:
        return self.x.shape[0]

    def copy(self) -> "StabilizerTableau":
        out = object.__new__(StabilizerTableau)
        out.p, out.q, out.f = self.p, self.q, self.f
        out.x, out.z, out.phases = self.x.copy(), self.z.copy(), self.phases.copy()
        return out

    def generator(self, k: int) -> QuditPauli:
        return QuditPauli(self.p, self.x[k], self.z[k], int(self.phases[k]))

    def symplectic_gram(self) -> np.ndarray:
        return (self.z @ self.x.T - self.x @ self.z.T) % self.p

    def validate(self):
        """Check commutation, independence and, for qubits, Hermiticity."""
        if np.any(self.symplectic_gram()):
            raise StabilizerError("generators do not commute")
        full = np.concatenate([self.x, self.z], axis=1)
        if gf.rank_mod_p(full, self.p) != self.n_generators:
            raise StabilizerError("generators are not independent")
        if self.p == 2:
            xz = np.sum(self.x * self.z, axis=1)
            if np.any((self.phases - xz) % 2):
                raise StabilizerError("qubit generator is not Hermitian")

    def __repr__(self):
        return f"StabilizerTableau(p={self.p}, N={self.n_qudits}, K={self.n_generators})"

    # --- group arithmetic -------------------------------------------------

    def _power_of_row(self, k: int, a: np.ndarray):
        """x, z, phase of ``g_k^a`` for an array of exponents ``a``."""
        a = np.asarray(a, dtype=np.int64) % self.p
        xk, zk = self.x[k], self.z[k]
        xa = (a[:, None] * xk[None, :]) % self.p
        za = (a[:, None] * zk[None, :]) % self.p
        zx = int(zk @ xk) % self.p
        ca = a * self.phases[k] + self.f * zx * (a * (a - 1) // 2)
        return xa, za, ca % self.q

    def multiply_rows(self, targets, k: int, a):
        """In place ``g_i <- g_i g_k^a_i`` for every ``i`` in ``targets``."""
        targets = np.asarray(targets, dtype=np.int64)
        if targets.size == 0:
            return
        xa, za, ca = self._power_of_row(k, a)
        zi = self.z[targets]
        cross = np.einsum("ij,ij->i", zi, xa)
        self.phases[targets] = (self.phases[targets] + ca + self.f * cross) % self.q
        self.x[targets] = (self.x[targets] + xa) % self.p
        self.z[targets] = (self.z[targets] + za) % self.p

    def group_element(self, coeffs) -> QuditPauli:
        """Ordered product ``g_0^a_0 g_1^a_1 ...``."""
        x = np.zeros(self.n_qudits, dtype=np.int64)
        z = np.zeros(self.n_qudits, dtype=np.int64)
        c = 0
        for k, a in enumerate(np.asarray(coeffs, dtype=np.int64) % self.p):
            if a == 0:
                continue
            xa, za, ca = self._power_of_row(k, np.array([a]))
            c = c + int(ca[0]) + self.f * int(z @ xa[0])
            x = (x + xa[0]) % self.p
            z = (z + za[0]) % self.p
        return QuditPauli(self.p, x, z, c)

    # --- dense oracle -----------------------------------------------------

    def to_dense(self) -> np.ndarray:
        """Normalised state vector (defined up to a global phase)."""
        N = self.n_qudits
        if self.p ** N > 4096:
            raise StabilizerError("dense conversion limited to 4096 amplitudes")
        dim = self.p ** N
        proj = np.eye(dim, dtype=complex)
        for k in range(self.n_generators):
            g = self.generator(k).matrix()
            acc = np.zeros_like(proj)
            gk = np.eye(dim, dtype=complex)
            for _ in range(self.p):
                acc += gk
                gk = gk @ g
            proj = proj @ (acc / self.p)
        col = np.argmax(np.linalg.norm(proj, axis=0))
        v = proj[:, col]
        v = v / np.linalg.norm(v)
        i0 = np.argmax(np.abs(v) > 1e-9)
        return v * np.exp(-1j * np.angle(v[i0]))


def tensor_product(*tabs: StabilizerTableau) -> StabilizerTableau:
    p = tabs[0].p
    if any(t.p != p for t in tabs):
        raise StabilizerError("tableaux live over different fields")
    K = sum(t.n_generators for t in tabs)
    N = sum(t.n_qudits for t in tabs)
    x = np.zeros((K, N), dtype=np.int64)
    z = np.zeros((K, N), dtype=np.int64)
    r = c = 0
    for t in tabs:
        x[r:r + t.n_generators, c:c + t.n_qudits] = t.x
        z[r:r + t.n_generators, c:c + t.n_qudits] = t.z
        r += t.n_generators
        c += t.n_qudits
    return StabilizerTableau(p, x, z, np.concatenate([t.phases for t in tabs]), False)


def computational_zero(N: int, p: int) -> StabilizerTableau:
    """``|0...0>``, stabilized by every ``Z_i``."""
    return StabilizerTableau(p, np.zeros((N, N)), np.eye(N), np.zeros(N))


def bell_pair(p: int) -> StabilizerTableau:
    """``sum_k |k k>``, stabilized by ``X X`` and ``Z Z^-1``."""
    return StabilizerTableau(p, [[1, 1], [0, 0]], [[0, 0], [1, p - 1]], [0, 0])


def conjugate(t: StabilizerTableau) -> StabilizerTableau:
    """Tableau of the complex-conjugated state.

    ``conj(w^c X^x Z^z) = w^-c X^x Z^-z``.
    """
    return StabilizerTableau(t.p, t.x.copy(), (-t.z) % t.p, (-t.phases) % t.q, False)


# --- sampling --------------------------------------------------------------

def _symplectic_form(u: np.ndarray, v: np.ndarray, n: int, p: int):
    """``u_z . v_x - u_x . v_z`` for row stacks ``u`` (a x 2n) and ``v``."""
    return (u[..., n:] @ v[..., :n].T - u[..., :n] @ v[..., n:].T) % p


def random_stabilizer_state(N: int, p: int, seed: SeedLike) -> StabilizerTableau:
    """Uniformly random pure stabilizer state on ``N`` qudits of dimension ``p``.

    Generators are drawn one by one.  With ``S`` the span of those already
    drawn, its symplectic complement splits as ``S + H`` with ``H`` a
    nondegenerate subspace, and the next generator is ``s + h`` with ``s``
    uniform in ``S`` and ``h`` uniform and nonzero in ``H``.  ``H`` is then
    replaced by the symplectic complement of ``span(h, h')`` inside it, where
    ``h'`` is any partner with ``<h, h'> = 1``.
    """
    _check_prime(p)
    if N < 1:
        raise StabilizerError("need at least one qudit")
    rng = make_rng(seed)
    n2 = 2 * N
    H = np.eye(n2, dtype=np.int64)
    S = np.zeros((0, n2), dtype=np.int64)
    for _ in range(N):
        while True:
            coeff = rng.integers(0, p, size=H.shape[0])
            h = (coeff @ H) % p
            if np.any(h):
                break
        s = (rng.integers(0, p, size=S.shape[0]) @ S) % p if S.shape[0] else np.zeros(n2, np.int64)
        S = np.vstack([S, (s + h) % p])
        if H.shape[0] == 2:
            break
        overlaps = _symplectic_form(h[None, :], H, N, p)[0]
        j = int(np.nonzero(overlaps)[0][0])
        hp = (H[j] * gf.inv_mod(overlaps[j], p)) % p  # <h, hp> = 1
        w_h = _symplectic_form(H, h[None, :], N, p)[:, 0]
        w_hp = _symplectic_form(H, hp[None, :], N, p)[:, 0]
        proj = (H + np.outer(w_h, hp) - np.outer(w_hp, h)) % p
        # H[j] is proportional to h' and h involves some other H[l]; both
        # project to zero or to a combination of the rest, so drop them
        l = int(next(i for i in np.nonzero(coeff)[0] if i != j))
        keep = np.ones(H.shape[0], dtype=bool)
        keep[[j, l]] = False
        H = proj[keep]
    x, z = S[:, :N], S[:, N:]
    q = phase_modulus(p)
    if p == 2:
        phases = np.sum(x * z, axis=1) % 2 + 2 * rng.integers(0, 2, size=N)
    else:
        phases = rng.integers(0, q, size=N)
    return StabilizerTableau(p, x, z, phases)


# --- measurement and contraction ------------------------------------------

def measure(t: StabilizerTableau, pauli: QuditPauli) -> Union[StabilizerTableau, _ZeroState]:
    """Project onto the +1 eigenspace of ``pauli`` (forced outcome).

    Returns ZERO when the state is an eigenvector with another eigenvalue.
    """
    if pauli.p != t.p or pauli.n != t.n_qudits:
        raise StabilizerError("Pauli does not act on this tableau")
    if t.p == 2 and (pauli.phase - int(pauli.x @ pauli.z)) % 2:
        raise StabilizerError("measured qubit Pauli must be Hermitian")
    p = t.p
    s = (t.z @ pauli.x - t.x @ pauli.z) % p
    nz = np.nonzero(s)[0]
    if nz.size == 0:
        full = np.concatenate([t.x, t.z], axis=1)
        coeffs = gf.solve_left(full, np.concatenate([pauli.x, pauli.z]), p)
        if coeffs is None:
            raise StabilizerError("commuting Pauli outside the group: tableau is not pure")
        g = t.group_element(coeffs)
        return t if (g.phase - pauli.phase) % t.q == 0 else ZERO
    out = t.copy()
    k = int(nz[0])
    others = nz[1:]
    a = (-s[others] * gf.inv_mod(s[k], p)) % p
    out.multiply_rows(others, k, a)
    out.x[k] = pauli.x
    out.z[k] = pauli.z
    out.phases[k] = pauli.phase
    return out


def forced_bell_project(t: StabilizerTableau, i: int, j: int):
    """Project qudits ``i`` and ``j`` onto ``sum_k |k k>``, or return ZERO."""
    N = t.n_qudits
    if i == j or not (0 <= i < N and 0 <= j < N):
        raise StabilizerError(f"invalid qudit pair ({i}, {j})")
    x = np.zeros(N, np.int64)
    z = np.zeros(N, np.int64)
    x[i] = x[j] = 1
    res = measure(t, QuditPauli(t.p, x, z, 0))
    if res is ZERO:
        return ZERO
    x[:] = 0
    z[i], z[j] = 1, t.p - 1
    return measure(res, QuditPauli(t.p, x, z, 0))


def project_zero(t: StabilizerTableau, i: int):
    """Project qudit ``i`` onto ``|0>``, or return ZERO."""
    return measure(t, QuditPauli.single(t.p, t.n_qudits, "Z", i))


def discard_qudits(t: StabilizerTableau, qudits: Sequence[int]) -> StabilizerTableau:
    """Drop qudits that are in a pure product state with the rest.

    Generators are row reduced on the dropped columns with phase tracking;
    the rows without a pivot there stabilize the remaining qudits.
    """
    qudits = sorted(set(int(q) for q in qudits))
    if not qudits:
        return t
    N = t.n_qudits
    if qudits[0] < 0 or qudits[-1] >= N:
        raise StabilizerError("qudit index out of range")
    p = t.p
    out = t.copy()
    K = out.n_generators
    used = np.zeros(K, dtype=bool)
    for q in qudits:
        for mat in ("x", "z"):
            col = getattr(out, mat)[:, q]
            cand = np.nonzero((col != 0) & ~used)[0]
            if cand.size == 0:
                continue
            k = int(cand[0])
            used[k] = True
            col = getattr(out, mat)[:, q]
            others = np.nonzero(col)[0]
            others = others[others != k]
            a = (-col[others] * gf.inv_mod(col[k], p)) % p
            out.multiply_rows(others, k, a)
    if used.sum() != len(qudits):
        raise StabilizerError("discarded qudits are entangled with the rest")
    keep_cols = np.setdiff1d(np.arange(N), qudits)
    rows = ~used
    return StabilizerTableau(p, out.x[rows][:, keep_cols], out.z[rows][:, keep_cols],
                             out.phases[rows], False)


def contract_pairs(t: StabilizerTableau, pairs: Iterable[Tuple[int, int]]):
    """Contract index pairs of one tableau and remove the measured qudits."""
    pairs = list(pairs)
    flat = [q for pr in pairs for q in pr]
    if len(set(flat)) != len(flat):
        raise StabilizerError("pairs must reference distinct qudits")
    for i, j in pairs:
        t = forced_bell_project(t, i, j)
        if t is ZERO:
            return ZERO
    return discard_qudits(t, flat)


def contract_bond(a: StabilizerTableau, b: StabilizerTableau, pairs):
    """Contract qudits of ``a`` with qudits of ``b``; remaining qudits keep order (a then b)."""
    off = a.n_qudits
    return contract_pairs(tensor_product(a, b), [(i, off + j) for i, j in pairs])


def entanglement_entropy(t: StabilizerTableau, region: Sequence[int]) -> float:
    """Entropy of ``region`` in units of ``log p`` (identical for all Renyi orders)."""
    region = np.asarray(sorted(set(int(r) for r in region)), dtype=np.int64)
    if region.size and (region[0] < 0 or region[-1] >= t.n_qudits):
        raise StabilizerError("region out of range")
    if region.size == 0 or region.size == t.n_qudits:
        return 0.0
    if t.n_generators != t.n_qudits:
        raise StabilizerError("entropy requires a pure tableau")
    sub = np.concatenate([t.x[:, region], t.z[:, region]], axis=1)
    return float(gf.rank_mod_p(sub, t.p) - region.size)
