"""Row-by-row boundary MPS contraction of finite, open PEPS networks.

Rows are lists of doubled site tensors with axes ``(left, up, right, down)``
whose lattice-edge legs have been sliced to extent 1.  The boundary is a
finite chain of ``(left, phys, right)`` tensors whose physical legs meet the
down legs of the last absorbed row.  After every row the chain is brought
into canonical form and truncated bond by bond, keeping the ``chi`` largest
singular values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg

from .bmps import FINITE, BoundaryMps, renyi_entropy
from .peps import PepsLattice, open_double_tensor
from .tensor import TensorError, svd_truncate


def _edge_slice(a: np.ndarray, x: int, y: int, Lx: int, Ly: int, axis0: int = 0):
    """Slice open-boundary legs (left, up, right, down) of a doubled tensor."""
    idx = [slice(None)] * a.ndim
    if x == 0:
        idx[axis0 + 0] = slice(0, 1)
    if y == 0:
        idx[axis0 + 1] = slice(0, 1)
    if x == Lx - 1:
        idx[axis0 + 2] = slice(0, 1)
    if y == Ly - 1:
        idx[axis0 + 3] = slice(0, 1)
    return a[tuple(idx)]


def _doubled(T, T_other=None) -> np.ndarray:
    D = T.shape[1]
    b = T if T_other is None else T_other
    e = np.einsum("sabcd,sABCD->aAbBcCdD", T, b.conj(), optimize=True)
    return e.reshape(D * D, D * D, D * D, D * D)


def lattice_rows(lattice: PepsLattice, other: Optional[PepsLattice] = None,
                 keep_bottom: bool = True) -> List[List[np.ndarray]]:
    """Doubled rows of a norm (or overlap) network with sliced edge legs.

    The bottom row keeps its down legs open when ``keep_bottom`` (they are
    closed later by projecting onto index 0).
    """
    if lattice.periodic:
        raise ValueError("finite boundary contraction supports open lattices only")
    Lx, Ly = lattice.Lx, lattice.Ly
    rows = []
    for y in range(Ly):
        row = []
        for x in range(Lx):
            T = lattice.tensors[(x, y)].tensor
            T2 = None if other is None else other.tensors[(x, y)].tensor
            e = _doubled(T, T2)
            e = _edge_slice(e, x, y, Lx, Ly + (1 if keep_bottom else 0))
            row.append(e)
        rows.append(row)
    return rows


@dataclass
class ChainState:
    """Finite boundary chain with its accumulated log scale factor."""

    tensors: List[np.ndarray]
    log_scale: complex = 0.0
    entropies: List[float] = field(default_factory=list)
    spectra: List[np.ndarray] = field(default_factory=list)
    discarded: List[float] = field(default_factory=list)

    def as_bmps(self) -> BoundaryMps:
        return BoundaryMps(list(self.tensors), FINITE, None, float(np.real(self.log_scale)))


def _absorb_row(chain: List[np.ndarray], row: Sequence[np.ndarray]) -> List[np.ndarray]:
    out = []
    for B, E in zip(chain, row):
        cl, p, cr = B.shape
        if E.shape[1] != p:
            raise TensorError(f"boundary leg {p} does not match row up leg {E.shape[1]}")
        t = np.einsum("aub,lurd->aldbr", B, E, optimize=True)
        out.append(t.reshape(cl * E.shape[0], E.shape[3], cr * E.shape[2]))
    return out


def _right_canonicalise(chain: List[np.ndarray]):
    """QR sweep from the right; returns the chain and the pulled-out norm."""
    chain = list(chain)
    for i in range(len(chain) - 1, 0, -1):
        cl, p, cr = chain[i].shape
        q, r = scipy.linalg.qr(chain[i].reshape(cl, p * cr).T, mode="economic")
        chain[i] = q.T.reshape(-1, p, cr)
        chain[i - 1] = np.tensordot(chain[i - 1], r.T, axes=(2, 0))
    norm = np.linalg.norm(chain[0])
    if norm == 0.0:
        raise TensorError("boundary state vanished")
    chain[0] = chain[0] / norm
    return chain, norm


def _truncating_sweep(chain: List[np.ndarray], chi: Optional[int]):
    """Left-to-right SVD sweep on a right-canonical chain with unit norm."""
    chain = list(chain)
    discarded = 0.0
    for i in range(len(chain) - 1):
        cl, p, cr = chain[i].shape
        res = svd_truncate(chain[i].reshape(cl * p, cr), chi)
        s = res.singular_values
        keep = s > 1e-14 * s[0]
        u, s, vh = res.left_vectors[:, keep], s[keep], res.right_vectors_conj[keep]
        discarded += res.discarded_weight ** 2
        norm = np.linalg.norm(s)
        chain[i] = u.reshape(cl, p, -1)
        chain[i + 1] = np.tensordot((s / norm)[:, None] * vh, chain[i + 1], axes=(1, 0))
    return chain, float(np.sqrt(discarded))


def schmidt_values(chain: List[np.ndarray], cut: int) -> np.ndarray:
    """Normalised Schmidt values across the bond after ``cut`` sites."""
    if not 0 < cut < len(chain):
        raise ValueError(f"cut must lie in 1..{len(chain) - 1}")
    chain, _ = _right_canonicalise(chain)
    # move the orthogonality centre to site cut - 1
    for i in range(cut - 1):
        cl, p, cr = chain[i].shape
        q, r = scipy.linalg.qr(chain[i].reshape(cl * p, cr), mode="economic")
        chain[i] = q.reshape(cl, p, -1)
        chain[i + 1] = np.tensordot(r, chain[i + 1], axes=(1, 0))
    c = chain[cut - 1]
    s = scipy.linalg.svd(c.reshape(-1, c.shape[2]), compute_uv=False)
    s = s[s > 1e-14 * s[0]]
    return s / np.linalg.norm(s)


def contract_rows(rows: Sequence[Sequence[np.ndarray]], chi: Optional[int],
                  cut: Optional[int] = None) -> ChainState:
    """Contract rows into a boundary chain, truncating after every row.

    Args:
        rows: doubled rows, top first; the first row's up legs have extent 1.
        chi: maximal bond dimension (None: exact).
        cut: if given, record the Schmidt spectrum and von Neumann entropy
            across the bond after ``cut`` columns after every row.
    """
    first = rows[0]
    if any(E.shape[1] != 1 for E in first):
        raise TensorError("the first row must have its up legs sliced to extent 1")
    chain = [E[:, 0, :, :].transpose(0, 2, 1) for E in first]
    state = ChainState(chain)
    for k in range(len(rows)):
        if k > 0:
            chain = _absorb_row(chain, rows[k])
        chain, norm = _right_canonicalise(chain)
        state.log_scale += np.log(norm)
        chain, disc = _truncating_sweep(chain, chi)
        state.discarded.append(disc)
        if cut is not None and len(chain) > 1:
            s = schmidt_values(chain, cut)
            state.spectra.append(s)
            state.entropies.append(renyi_entropy(s, 1))
        elif cut is not None:
            state.spectra.append(np.ones(1))
            state.entropies.append(0.0)
    state.tensors = chain
    return state


def _close_bottom(chain: List[np.ndarray]) -> complex:
    """Project all physical legs on index 0 and contract the chain."""
    v = np.ones(1, dtype=complex)
    for B in chain:
        v = v @ B[:, 0, :]
    return complex(v[0])


def finite_norm(lattice: PepsLattice, chi: Optional[int] = None,
                other: Optional[PepsLattice] = None) -> complex:
    """<other|lattice> (default: the norm) by boundary MPS contraction."""
    log_val = finite_log_norm(lattice, chi, other)
    return complex(np.exp(log_val))


def finite_log_norm(lattice: PepsLattice, chi: Optional[int] = None,
                    other: Optional[PepsLattice] = None) -> complex:
    """Complex logarithm of the network value, robust to overflow."""
    state = contract_rows(lattice_rows(lattice, other), chi)
    val = _close_bottom(state.tensors)
    if val == 0:
        return complex(-np.inf)
    return complex(state.log_scale + np.log(val))


def finite_entropy_profile(lattice: PepsLattice, chi: Optional[int],
                           cut_position: Optional[int] = None,
                           other: Optional[PepsLattice] = None) -> List[float]:
    """Mid-cut von Neumann entropy of the boundary after each row.

    Args:
        lattice: open finite PEPS (ket layer).
        chi: boundary bond dimension (None: exact).
        cut_position: number of columns left of the cut (default Lx // 2).
        other: optional bra lattice, giving the overlap network.
    """
    cut = lattice.Lx // 2 if cut_position is None else cut_position
    if lattice.Lx > 1 and not 0 < cut < lattice.Lx:
        raise ValueError("cut_position must lie strictly inside the row")
    state = contract_rows(lattice_rows(lattice, other), chi, cut if lattice.Lx > 1 else None)
    if lattice.Lx == 1:
        return [0.0] * lattice.Ly
    return state.entropies


def _reflect_rows(rows):
    """Rows seen from below: reversed order with up and down legs swapped."""
    return [[E.transpose(0, 3, 2, 1) for E in row] for row in reversed(rows)]


def finite_reduced_density_matrix(lattice: PepsLattice, site, chi: Optional[int] = None):
    """Single-site reduced density matrix from top and bottom boundary chains."""
    if lattice.periodic:
        raise ValueError("finite boundary contraction supports open lattices only")
    x0, y0 = site
    Lx, Ly = lattice.Lx, lattice.Ly
    rows = lattice_rows(lattice, keep_bottom=False)
    if y0 > 0:
        top = contract_rows(rows[:y0], chi).tensors
    else:
        top = [np.ones((1, 1, 1))] * Lx
    if y0 < Ly - 1:
        bot = contract_rows(_reflect_rows(rows[y0 + 1:]), chi).tensors
    else:
        bot = [np.ones((1, 1, 1))] * Lx
    d = lattice.d
    env = np.ones((1, 1, 1), dtype=complex)
    rho = None
    for x in range(Lx):
        T = lattice.tensors[(x, y0)].tensor
        if x == x0:
            E = open_double_tensor(T)
            E = _edge_slice(E, x, y0, Lx, Ly, axis0=2)
            if rho is None:
                # env[t,m,b] top[t,u,T] E[s,s',m,u,M,d] bot[b,d,B]
                z = np.tensordot(env, top[x], axes=(0, 0))             # m,b,u,T
                z = np.tensordot(z, E, axes=([0, 2], [2, 3]))           # b,T,s,s',M,d
                z = np.tensordot(z, bot[x], axes=([0, 5], [0, 1]))      # T,s,s',M,B
                rho = z.transpose(1, 2, 0, 3, 4)
            continue
        E = _edge_slice(_doubled(T), x, y0, Lx, Ly)
        if rho is None:
            z = np.tensordot(env, top[x], axes=(0, 0))
            z = np.tensordot(z, E, axes=([0, 2], [0, 1]))
            env = np.tensordot(z, bot[x], axes=([0, 3], [0, 1]))
        else:
            z = np.tensordot(rho, top[x], axes=(2, 0))                  # s,s',M,B,u,T
            z = np.tensordot(z, E, axes=([2, 4], [0, 1]))               # s,s',B,T,r,d
            rho = np.tensordot(z, bot[x], axes=([2, 5], [0, 1]))        # s,s',T,r,B
    rho = rho.reshape(d, d)
    tr = np.trace(rho)
    if abs(tr) == 0.0:
        raise TensorError("network norm vanished")
    rho = rho / tr
    return 0.5 * (rho + rho.conj().T)
