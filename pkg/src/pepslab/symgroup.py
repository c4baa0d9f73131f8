"""Permutations of replicas and irreducible representations of S_n.

Permutations are integer arrays ``g`` with ``g[x]`` the image of ``x``;
composition is ``(g o h)(x) = g(h(x))``, i.e. ``compose(g, h) = g[h]``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Dict, List, Tuple

import numpy as np


def compose(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``g o h`` for single permutations or broadcastable stacks of them."""
    return np.take_along_axis(np.asarray(g), np.asarray(h), axis=-1)


def inverse(g: np.ndarray) -> np.ndarray:
    return np.argsort(np.asarray(g), axis=-1)


def cycle_counts(perms: np.ndarray) -> np.ndarray:
    """Number of cycles (fixed points included) of each permutation in a stack."""
    perms = np.asarray(perms)
    n = perms.shape[-1]
    x = np.broadcast_to(np.arange(n), perms.shape)
    lowest = x.copy()
    y = perms.copy()
    for _ in range(n):
        lowest = np.minimum(lowest, y)
        y = np.take_along_axis(perms, y, axis=-1)
    return np.sum(lowest == x, axis=-1)


def cycles_of(g: np.ndarray) -> int:
    return int(cycle_counts(np.asarray(g)[None])[0])


@lru_cache(maxsize=None)
def all_permutations(n: int) -> np.ndarray:
    """All of S_n in lexicographic order, shape (n!, n)."""
    arr = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    arr.setflags(write=False)
    return arr


def permutation_index(perms: np.ndarray) -> np.ndarray:
    """Lexicographic rank of each permutation (inverse of ``all_permutations``)."""
    perms = np.atleast_2d(np.asarray(perms))
    n = perms.shape[1]
    rank = np.zeros(perms.shape[0], dtype=np.int64)
    for i in range(n):
        smaller = np.sum(perms[:, i + 1:] < perms[:, i:i + 1], axis=1)
        rank += smaller * factorial(n - 1 - i)
    return rank


# --- partitions and Young tableaux ----------------------------------------

def partitions(n: int, max_parts: int = None) -> List[Tuple[int, ...]]:
    """Partitions of n in reverse lexicographic order, optionally with bounded length."""
    out = []

    def rec(rem, cap, acc):
        if rem == 0:
            out.append(tuple(acc))
            return
        if max_parts is not None and len(acc) == max_parts:
            return
        for k in range(min(rem, cap), 0, -1):
            rec(rem - k, k, acc + [k])

    rec(n, n, [])
    return out


def standard_tableaux(shape: Tuple[int, ...]) -> List[Dict[int, Tuple[int, int]]]:
    """Standard Young tableaux as maps ``letter -> (row, col)``."""
    n = sum(shape)
    out = []

    def rec(filled, k, pos):
        if k == n:
            out.append(dict(pos))
            return
        for r in range(len(shape)):
            c = filled[r]
            if c < shape[r] and (r == 0 or filled[r - 1] > c):
                filled[r] += 1
                pos[k] = (r, c)
                rec(filled, k + 1, pos)
                filled[r] -= 1
                del pos[k]

    rec([0] * len(shape), 0, {})
    return out


def hook_lengths(shape) -> List[int]:
    conj = [sum(1 for r in shape if r > c) for c in range(shape[0])] if shape else []
    return [shape[r] - c + conj[c] - r - 1 for r in range(len(shape)) for c in range(shape[r])]


def irrep_dimension(shape) -> int:
    n = sum(shape)
    return factorial(n) // int(np.prod(hook_lengths(shape)))


def gl_dimension(shape, D: int) -> int:
    """Dimension of the GL(D) irrep of highest weight ``shape``, s_shape(1^D)."""
    num = 1
    for r in range(len(shape)):
        for c in range(shape[r]):
            num *= D + c - r
    return num // int(np.prod(hook_lengths(shape)))


def young_generators(shape) -> List[np.ndarray]:
    """Young's orthogonal form of the adjacent transpositions ``(k, k+1)``."""
    tabs = standard_tableaux(shape)
    index = {tuple(sorted(t.items())): i for i, t in enumerate(tabs)}
    n = sum(shape)
    dim = len(tabs)
    gens = []
    for k in range(n - 1):
        m = np.zeros((dim, dim))
        for i, t in enumerate(tabs):
            (r1, c1), (r2, c2) = t[k], t[k + 1]
            axial = (c2 - r2) - (c1 - r1)
            m[i, i] = 1.0 / axial
            if abs(axial) > 1:
                swapped = dict(t)
                swapped[k], swapped[k + 1] = t[k + 1], t[k]
                j = index[tuple(sorted(swapped.items()))]
                m[j, i] = np.sqrt(1.0 - 1.0 / axial ** 2)
        gens.append(m)
    return gens


@dataclass
class IrrepTable:
    """Matrices of one irrep for every element of S_n (lexicographic order)."""

    shape: Tuple[int, ...]
    matrices: np.ndarray  # (n!, dim, dim)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]


def irrep_table(shape) -> IrrepTable:
    """All representation matrices of ``shape`` by breadth-first search.

    Right multiplication by the adjacent transposition ``s_k`` swaps entries
    ``k`` and ``k + 1`` of the permutation array, and the representation
    matrix is multiplied on the right by the Young generator.
    """
    shape = tuple(shape)
    n = sum(shape)
    gens = young_generators(shape)
    dim = irrep_dimension(shape)
    G = all_permutations(n)
    mats = np.zeros((len(G), dim, dim))
    done = np.zeros(len(G), dtype=bool)
    mats[0] = np.eye(dim)
    done[0] = True
    frontier = np.array([0])
    while frontier.size:
        new = []
        for k in range(n - 1):
            child = G[frontier].copy()
            child[:, [k, k + 1]] = child[:, [k + 1, k]]
            idx = permutation_index(child)
            fresh = ~done[idx]
            if not np.any(fresh):
                continue
            idx_f, par = idx[fresh], frontier[fresh]
            idx_f, first = np.unique(idx_f, return_index=True)
            mats[idx_f] = mats[par[first]] @ gens[k]
            done[idx_f] = True
            new.append(idx_f)
        frontier = np.unique(np.concatenate(new)) if new else np.array([], dtype=np.int64)
    return IrrepTable(shape, mats)
