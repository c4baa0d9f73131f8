"""Random PEPS ensembles, doubled (ket-bra) tensors and dense contractions.

Index conventions used throughout the package:

* a site tensor has axes ``(s, left, up, right, down)``;
* a doubled bond index combines a ket index ``k`` and a bra index ``b`` as
  ``k * D + b``;
* open lattice edges are closed by fixing the dangling bond index to 0, so a
  finite network only ever sees the ``[..., 0, ...]`` slice of edge legs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .tensor import TensorError, check_finite, gaussian_tensor

OPEN = "open"
PERIODIC = "periodic"

# Stream tag for perturbation noise, kept apart from site streams.
_NOISE_TAG = 0x6E6F6973


@dataclass(frozen=True)
class PepsTensor:
    """Site tensor with axes (s, left, up, right, down)."""

    tensor: np.ndarray

    def __post_init__(self):
        t = self.tensor
        if t.ndim != 5 or len(set(t.shape[1:])) != 1:
            raise TensorError(f"PEPS tensor must have shape [d,D,D,D,D], got {t.shape}")
        check_finite(t, "PEPS tensor")

    @property
    def d(self) -> int:
        return self.tensor.shape[0]

    @property
    def D(self) -> int:
        return self.tensor.shape[1]


@dataclass
class PepsLattice:
    """Finite Lx x Ly PEPS; ``tensors[(x, y)]`` with y counted from the top row."""

    Lx: int
    Ly: int
    tensors: Dict[Tuple[int, int], PepsTensor]
    boundary: str = OPEN
    seed: Optional[int] = None
    ensemble: str = "disordered"

    def __post_init__(self):
        if self.boundary not in (OPEN, PERIODIC):
            raise ValueError(f"boundary must be '{OPEN}' or '{PERIODIC}'")
        missing = [(x, y) for x in range(self.Lx) for y in range(self.Ly)
                   if (x, y) not in self.tensors]
        if missing:
            raise ValueError(f"lattice sites without a tensor: {missing}")
        dims = {(t.d, t.D) for t in self.tensors.values()}
        if len(dims) != 1:
            raise TensorError(f"all site tensors must share (d, D); got {dims}")

    @property
    def d(self) -> int:
        return next(iter(self.tensors.values())).d

    @property
    def D(self) -> int:
        return next(iter(self.tensors.values())).D

    @property
    def periodic(self) -> bool:
        return self.boundary == PERIODIC

    def manifest(self) -> dict:
        """JSON-able description; tensors are regenerated from the seed."""
        if self.seed is None:
            raise ValueError("only seeded lattices can be serialised")
        return {"ensemble": self.ensemble, "seed": self.seed, "D": self.D,
                "d": self.d, "Lx": self.Lx, "Ly": self.Ly, "boundary": self.boundary}

    def to_json(self) -> str:
        return json.dumps(self.manifest(), sort_keys=True)


def lattice_from_manifest(manifest) -> PepsLattice:
    if isinstance(manifest, str):
        manifest = json.loads(manifest)
    m = manifest
    if m["ensemble"] == "clean":
        t = sample_clean(m["D"], m["d"], m["seed"])
        return clean_lattice(t, m["Lx"], m["Ly"], m["boundary"], seed=m["seed"])
    if m["ensemble"] == "disordered":
        return sample_disordered(m["Lx"], m["Ly"], m["D"], m["d"], m["seed"],
                                 m["boundary"])
    raise ValueError(f"unknown ensemble {m['ensemble']!r}")


def sample_clean(D: int, d: int, seed: int) -> PepsTensor:
    """One Gaussian site tensor, to be reused on every site."""
    return PepsTensor(gaussian_tensor((d, D, D, D, D), (seed,)))


def clean_lattice(T: PepsTensor, Lx: int, Ly: int, boundary: str = OPEN,
                  seed: Optional[int] = None) -> PepsLattice:
    tensors = {(x, y): T for x in range(Lx) for y in range(Ly)}
    return PepsLattice(Lx, Ly, tensors, boundary, seed, "clean")


def site_tensor(D: int, d: int, seed: int, x: int, y: int) -> PepsTensor:
    """Disordered-ensemble tensor of site (x, y); depends only on (seed, x, y)."""
    return PepsTensor(gaussian_tensor((d, D, D, D, D), (seed, x, y)))


def sample_disordered(Lx: int, Ly: int, D: int, d: int, seed: int,
                      boundary: str = OPEN) -> PepsLattice:
    if Lx < 1 or Ly < 1:
        raise ValueError("lattice extents must be >= 1")
    tensors = {(x, y): site_tensor(D, d, seed, x, y)
               for y in range(Ly) for x in range(Lx)}
    return PepsLattice(Lx, Ly, tensors, boundary, seed, "disordered")


def perturb(T: PepsTensor, eta: float, seed: int) -> PepsTensor:
    """Return ``(1 - eta) T + eta G`` with fresh standard Gaussian noise G."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if eta == 0.0:
        return PepsTensor(T.tensor.copy())
    noise = gaussian_tensor(T.tensor.shape, (seed, _NOISE_TAG))
    return PepsTensor((1.0 - eta) * T.tensor + eta * noise)


def perturb_lattice(lattice: PepsLattice, eta: float, seed: int) -> PepsLattice:
    """Perturb every site with its own noise stream (seed, x, y)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    tensors = {}
    for (x, y), t in lattice.tensors.items():
        if eta == 0.0:
            tensors[(x, y)] = t
        else:
            noise = gaussian_tensor(t.tensor.shape, (seed, _NOISE_TAG, x, y))
            tensors[(x, y)] = PepsTensor((1.0 - eta) * t.tensor + eta * noise)
    return PepsLattice(lattice.Lx, lattice.Ly, tensors, lattice.boundary,
                       lattice.seed, lattice.ensemble)


@dataclass(frozen=True)
class DoubleTensor:
    """Site tensor of a ket-bra network with doubled legs (left, up, right, down).

    ``positive`` is true when the bra tensor equals the ket tensor and no
    operator is inserted, i.e. the tensor belongs to a norm network.
    """

    tensor: np.ndarray
    positive: bool = False

    def __post_init__(self):
        t = self.tensor
        if t.ndim != 4 or len(set(t.shape)) != 1:
            raise TensorError(f"double tensor must have shape [D2]*4, got {t.shape}")

    @property
    def D2(self) -> int:
        return self.tensor.shape[0]

    def reflected(self) -> "DoubleTensor":
        """Swap up and down legs (used to build bottom environments)."""
        return DoubleTensor(self.tensor.transpose(0, 3, 2, 1), self.positive)


def _as_array(T) -> np.ndarray:
    return T.tensor if isinstance(T, PepsTensor) else np.asarray(T)


def double_tensor(T, T_other=None, op: Optional[np.ndarray] = None) -> DoubleTensor:
    """Contract ``conj(T_other) . op . T`` over the physical leg.

    The ket index of every doubled leg comes from ``T`` and the bra index from
    ``T_other`` (defaults to ``T``).
    """
    a = _as_array(T)
    b = a if T_other is None else _as_array(T_other)
    if a.shape != b.shape:
        raise TensorError(f"ket/bra tensors differ in shape: {a.shape} vs {b.shape}")
    d, D = a.shape[0], a.shape[1]
    if op is None:
        ket = a
    else:
        op = np.asarray(op)
        if op.shape != (d, d):
            raise TensorError(f"operator must be {d}x{d}, got {op.shape}")
        ket = np.tensordot(op, a, axes=(1, 0))
    e = np.einsum("sabcd,sABCD->aAbBcCdD", ket, b.conj(), optimize=True)
    positive = T_other is None or T_other is T or np.array_equal(a, b)
    positive = positive and op is None
    return DoubleTensor(e.reshape(D * D, D * D, D * D, D * D), bool(positive))


def open_double_tensor(T, T_other=None) -> np.ndarray:
    """Doubled tensor with physical legs left open: axes (s, s', l, u, r, d).

    Entry ``[s, s']`` is the doubled tensor of ``|s><s'|``, so sandwiching it
    in a norm network yields the reduced density matrix element rho_{s s'}.
    """
    a = _as_array(T)
    b = a if T_other is None else _as_array(T_other)
    d, D = a.shape[0], a.shape[1]
    e = np.einsum("sabcd,tABCD->staAbBcCdD", a, b.conj(), optimize=True)
    return e.reshape(d, d, D * D, D * D, D * D, D * D)


def doubled_hermiticity_residual(dt: DoubleTensor) -> float:
    """Max |E - conj(E with ket and bra swapped on every leg)|."""
    D2 = dt.D2
    D = int(round(np.sqrt(D2)))
    e = dt.tensor.reshape((D, D) * 4)
    swapped = e.transpose(1, 0, 3, 2, 5, 4, 7, 6).conj()
    return float(np.max(np.abs(e - swapped)))


def ket_bra_matrix(dt: DoubleTensor) -> np.ndarray:
    """View a doubled tensor as a matrix from the four bra legs to the ket legs."""
    D = int(round(np.sqrt(dt.D2)))
    e = dt.tensor.reshape((D, D) * 4)
    return e.transpose(0, 2, 4, 6, 1, 3, 5, 7).reshape(D ** 4, D ** 4)


# --------------------------------------------------------------------------
# Dense contractions (oracles for small lattices)
# --------------------------------------------------------------------------

def _labelled_einsum(a, la, b, lb):
    """Contract two batched labelled tensors over their shared labels."""
    letters = {}
    for lab in list(la) + list(lb):
        if lab not in letters:
            letters[lab] = chr(ord("a") + len(letters)) if len(letters) < 26 \
                else chr(ord("A") + len(letters) - 26)
    if len(letters) > 52:
        raise TensorError("too many open legs for a dense contraction")
    out = [lab for lab in la if lab not in lb] + [lab for lab in lb if lab not in la]
    spec = "...{},...{}->...{}".format("".join(letters[x] for x in la),
                                       "".join(letters[x] for x in lb),
                                       "".join(letters[x] for x in out))
    return np.einsum(spec, a, b, optimize=True), out


def ket_amplitudes(grid, periodic: bool = False, open_down: bool = False,
                   rows: Optional[int] = None):
    """Contract the ket layer of a finite PEPS into a dense amplitude tensor.

    Args:
        grid: ``grid[y][x]`` site tensors of shape ``(..., d, D, D, D, D)``;
            leading axes are treated as a batch.
        periodic: connect the right leg of the last column to the first.
        open_down: leave the down legs of the last contracted row open.
        rows: contract only the first ``rows`` rows (default: all).

    Returns:
        Array of shape ``(..., d, ..., d[, D, ..., D])``: one physical axis
        per contracted site in row-major order, then the open down legs.
    """
    Ly = len(grid) if rows is None else rows
    Lx = len(grid[0])
    arr, labels = None, []
    for y in range(Ly):
        for x in range(Lx):
            t = np.asarray(grid[y][x])
            t = t[..., :, :, :, :, :]
            lab = [("p", x, y)]
            idx = [slice(None)]
            # left leg
            if x == 0 and not periodic:
                idx.append(0)
            else:
                idx.append(slice(None))
                lab.append(("h", (x - 1) % Lx, y))
            # up leg
            if y == 0:
                idx.append(0)
            else:
                idx.append(slice(None))
                lab.append(("v", x, y - 1))
            # right leg
            if x == Lx - 1 and not periodic:
                idx.append(0)
            else:
                idx.append(slice(None))
                lab.append(("h", x, y))
            # down leg
            if y == Ly - 1 and not open_down:
                idx.append(0)
            else:
                idx.append(slice(None))
                lab.append(("v", x, y))
            t = t[(Ellipsis,) + tuple(idx)]
            if arr is None:
                arr, labels = t, lab
            else:
                arr, labels = _labelled_einsum(arr, labels, t, lab)
    phys = [("p", x, y) for y in range(Ly) for x in range(Lx)]
    tail = [("v", x, Ly - 1) for x in range(Lx)] if open_down else []
    order = [labels.index(lab) for lab in phys + tail]
    nb = arr.ndim - len(labels)
    return arr.transpose(list(range(nb)) + [nb + i for i in order])


def lattice_grid(lattice: PepsLattice):
    return [[lattice.tensors[(x, y)].tensor for x in range(lattice.Lx)]
            for y in range(lattice.Ly)]


def dense_state(lattice: PepsLattice) -> np.ndarray:
    """Full state vector of a finite PEPS (row-major site order)."""
    amp = ket_amplitudes(lattice_grid(lattice), lattice.periodic)
    return amp.reshape(-1)


def dense_norm(lattice: PepsLattice) -> float:
    psi = dense_state(lattice)
    return float(np.vdot(psi, psi).real)


def dense_boundary_vector(lattice: PepsLattice, rows: Optional[int] = None,
                          other: Optional[PepsLattice] = None) -> np.ndarray:
    """Boundary state of the (overlap) norm network after ``rows`` rows.

    Returns the tensor with one doubled leg (ket * D + bra) per column, built
    from the ket lattice and the bra lattice ``other`` (default: same).
    """
    Lx = lattice.Lx
    rows = lattice.Ly if rows is None else rows
    ket = ket_amplitudes(lattice_grid(lattice), lattice.periodic, True, rows)
    bra = ket if other is None else ket_amplitudes(lattice_grid(other),
                                                   other.periodic, True, rows)
    D = lattice.D
    nphys = Lx * rows
    k = ket.reshape(-1, D ** Lx)
    b = bra.reshape(-1, D ** Lx)
    psi = k.T @ b.conj()
    psi = psi.reshape((D,) * Lx + (D,) * Lx)
    perm = [i for x in range(Lx) for i in (x, Lx + x)]
    del nphys
    return psi.transpose(perm).reshape((D * D,) * Lx)


def dense_reduced_density_matrix(lattice: PepsLattice, sites) -> np.ndarray:
    """Normalised reduced density matrix on the given sites (dense oracle)."""
    amp = ket_amplitudes(lattice_grid(lattice), lattice.periodic)
    Lx = lattice.Lx
    axes = [y * Lx + x for (x, y) in sites]
    rest = [i for i in range(amp.ndim) if i not in axes]
    m = amp.transpose(axes + rest).reshape(lattice.d ** len(axes), -1)
    rho = m @ m.conj().T
    return rho / np.trace(rho).real
