"""Exact row-by-row contraction of random stabilizer PEPS norm networks.

Each site holds a random stabilizer state on ``k_d`` physical and
``4 k_D`` virtual qudits, ordered (phys, left, up, right, down).  The
doubled tensor is that state times its conjugate with the physical qudits
contracted; its legs carry ``2 k_D`` qudits (ket block, then bra block).
Rows are periodic in x; the up legs of the first row are closed with
``|0>``.  After every row the boundary is a pure stabilizer state whose
entanglement is read off by finite-field ranks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .stabilizer import (ZERO, StabilizerTableau, conjugate, contract_pairs,
                         discard_qudits, entanglement_entropy, project_zero,
                         random_stabilizer_state, tensor_product)
from . import gf
from .tensor import SeedLike

CLEAN = "clean"
DISORDERED = "disordered"

_RESAMPLE_TAG = 0x5245


@dataclass(frozen=True)
class StabilizerPepsSpec:
    """Parameters of a stabilizer PEPS: ``D = p^k_D`` and ``d = p^k_d``."""

    p: int
    k_D: int
    k_d: int
    Lx: int
    Ly: int
    ensemble: str = DISORDERED
    seed: int = 0

    def __post_init__(self):
        if not gf.is_prime(self.p):
            raise ValueError(f"p must be prime, got {self.p}")
        if self.k_D < 0 or self.k_d < 0:
            raise ValueError("k_D and k_d must be non-negative")
        if self.Lx < 2 or self.Ly < 1:
            raise ValueError("need Lx >= 2 and Ly >= 1")
        if self.ensemble not in (CLEAN, DISORDERED):
            raise ValueError(f"unknown ensemble {self.ensemble!r}")

    @property
    def ell_star(self) -> float:
        return self.k_D / self.k_d if self.k_d else np.inf


@dataclass
class LayerProfile:
    """Entropy of the boundary state after each row, in units of log p."""

    spec: StabilizerPepsSpec
    region: Tuple[int, ...]
    entropies: List[float]
    resamples: int = 0
    n_cuts: int = 2
    extra: Dict = field(default_factory=dict)


def doubled_site(T: StabilizerTableau, k_d: int) -> StabilizerTableau:
    """Contract the physical qudits of ``T`` with those of its conjugate.

    Returns a tableau on ``8 k_D`` qudits ordered as the four doubled legs
    (left, up, right, down), each ``k_D`` ket qudits then ``k_D`` bra qudits,
    or ZERO.
    """
    n = T.n_qudits
    k_D = (n - k_d) // 4
    both = tensor_product(T, conjugate(T))
    res = contract_pairs(both, [(i, n + i) for i in range(k_d)])
    if res is ZERO:
        return ZERO
    # remaining order: ket (l,u,r,d) then bra (l,u,r,d)
    order = []
    for leg in range(4):
        order += [leg * k_D + k for k in range(k_D)]
        order += [4 * k_D + leg * k_D + k for k in range(k_D)]
    return StabilizerTableau(res.p, res.x[:, order], res.z[:, order], res.phases, False)


class _Labelled:
    """A tableau whose qudits carry hashable labels."""

    def __init__(self, tab: Optional[StabilizerTableau], labels: List):
        self.tab = tab
        self.labels = labels

    def index(self):
        return {lab: i for i, lab in enumerate(self.labels)}

    def append(self, tab: StabilizerTableau, labels):
        self.tab = tab if self.tab is None else tensor_product(self.tab, tab)
        self.labels = self.labels + list(labels)

    def contract(self, pairs):
        idx = self.index()
        ij = [(idx[a], idx[b]) for a, b in pairs]
        res = contract_pairs(self.tab, ij)
        if res is ZERO:
            return False
        gone = {q for pr in ij for q in pr}
        self.tab = res
        self.labels = [lab for i, lab in enumerate(self.labels) if i not in gone]
        return True

    def close_zero(self, labels):
        idx = self.index()
        qs = [idx[a] for a in labels]
        t = self.tab
        for q in qs:
            t = project_zero(t, q)
            if t is ZERO:
                return False
        self.tab = discard_qudits(t, qs)
        gone = set(qs)
        self.labels = [lab for i, lab in enumerate(self.labels) if i not in gone]
        return True


def _site_seed(base: Tuple[int, ...], spec: StabilizerPepsSpec, x: int, y: int):
    return base if spec.ensemble == CLEAN else base + (x, y)


def _attempt_profile(spec: StabilizerPepsSpec, base: Tuple[int, ...],
                     region: Sequence[int]) -> Optional[List[float]]:
    p, k_D, k_d, L = spec.p, spec.k_D, spec.k_d, spec.Lx
    w = 2 * k_D
    n_site = 4 * k_D + k_d
    cache = {}

    def site(x, y):
        key = _site_seed(base, spec, x, y)
        if key not in cache:
            cache[key] = doubled_site(random_stabilizer_state(n_site, p, key), k_d)
        return cache[key]

    legs = ("l", "u", "r", "d")
    state = _Labelled(None, [])
    out = []
    for y in range(spec.Ly):
        for x in range(L):
            t = site(x, y)
            if t is ZERO:
                return None
            state.append(t, [(legs[g], x, k) for g in range(4) for k in range(w)])
            ups = [("u", x, k) for k in range(w)]
            if y == 0:
                ok = state.close_zero(ups)
            else:
                ok = state.contract(list(zip([("b", x, k) for k in range(w)], ups)))
            if ok and x > 0:
                ok = state.contract([(("r", x - 1, k), ("l", x, k)) for k in range(w)])
            if ok and x == L - 1:
                ok = state.contract([(("r", x, k), ("l", 0, k)) for k in range(w)])
            if not ok:
                return None
        state.labels = [("b", lab[1], lab[2]) if lab[0] == "d" else lab for lab in state.labels]
        idx = state.index()
        qs = [idx[("b", x, k)] for x in region for k in range(w)]
        out.append(entanglement_entropy(state.tab, qs))
    return out


def layer_profile(spec: StabilizerPepsSpec, region: Optional[Sequence[int]] = None,
                  max_resamples: int = 50) -> LayerProfile:
    """Entropy of the boundary state's columns ``region`` after each row.

    Args:
        spec: lattice, field and ensemble.
        region: columns forming subsystem A (default: the first Lx // 2).
        max_resamples: how many fresh draws to allow when a contraction
            annihilates the state.

    Returns:
        LayerProfile with entropies in units of log p and the number of
        resamples used.  ``n_cuts`` is the number of boundary points of A
        on the ring.
    """
    region = tuple(range(spec.Lx // 2)) if region is None else tuple(sorted(set(region)))
    if any(not 0 <= x < spec.Lx for x in region):
        raise ValueError("region columns out of range")
    inside = np.zeros(spec.Lx, dtype=bool)
    inside[list(region)] = True
    n_cuts = int(np.sum(inside != np.roll(inside, 1)))
    if spec.k_D == 0:
        return LayerProfile(spec, region, [0.0] * spec.Ly, 0, n_cuts)
    for attempt in range(max_resamples + 1):
        base = (spec.seed,) if attempt == 0 else (spec.seed, _RESAMPLE_TAG, attempt)
        ent = _attempt_profile(spec, base, region)
        if ent is not None:
            return LayerProfile(spec, region, ent, attempt, n_cuts)
    raise RuntimeError(f"every draw annihilated the network after {max_resamples} resamples")
