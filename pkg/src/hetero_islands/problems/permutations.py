"""Permutation helpers shared by the tour and packing adapters."""

from typing import Optional

import numpy as np

from ..core import Permutation, Rng


def random_permutation(n: int, rng: Rng) -> Permutation:
    return Permutation(rng.np.permutation(n))


def identity_permutation(n: int) -> Permutation:
    return Permutation(np.arange(n, dtype=np.int64))


def lex_successor(order: np.ndarray) -> Optional[np.ndarray]:
    """Next permutation in lexicographic order, or None after the last one."""
    arr = order.tolist()
    n = len(arr)
    i = n - 2
    while i >= 0 and arr[i] >= arr[i + 1]:
        i -= 1
    if i < 0:
        return None
    j = n - 1
    while arr[j] <= arr[i]:
        j -= 1
    arr[i], arr[j] = arr[j], arr[i]
    arr[i + 1 :] = reversed(arr[i + 1 :])
    return np.asarray(arr, dtype=np.int64)


def sorted_pairs_ternary(p1: Permutation, p2: Permutation, p3: Permutation) -> Permutation:
    """Combine three permutations: v = p1 - p2 + p3 componentwise, then sort
    the (value, index) pairs by value; the index sequence is the result.
    Ties keep index order (stable sort)."""
    v = p1.order - p2.order + p3.order
    return Permutation(np.argsort(v, kind="stable"))


def sorted_pairs_ternary_rows(m1: np.ndarray, m2: np.ndarray, m3: np.ndarray) -> np.ndarray:
    """Row-wise version of :func:`sorted_pairs_ternary` for stacked parents."""
    return np.argsort(m1 - m2 + m3, axis=1, kind="stable")
