"""Array-backed sum tree for O(log n) categorical sampling and updates."""

from __future__ import annotations

import numpy as np

__all__ = ["SumTree"]


class SumTree:
    """Binary indexed sum tree over n non-negative leaf weights.

    The leaf array is padded to the next power of two; internal node j
    stores the sum of its children 2j and 2j+1, so the root (index 1) is
    the total mass. Updates refresh the root-to-leaf path by recomputing
    each node from its children, which keeps every internal node exactly
    the sum of its subtree up to float addition order.
    """

    def __init__(self, weights) -> None:
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-d vector")
        if not np.all(np.isfinite(w)) or w.min() < 0.0:
            raise ValueError("weights must be finite and non-negative")
        self.n = w.size
        self.capacity = 1
        while self.capacity < self.n:
            self.capacity *= 2
        self._tree = np.zeros(2 * self.capacity)
        self._tree[self.capacity : self.capacity + self.n] = w
        self.rebuild()

    @property
    def total(self) -> float:
        return float(self._tree[1])

    def leaf(self, i: int) -> float:
        self._check_index(i)
        return float(self._tree[self.capacity + i])

    def leaves(self) -> np.ndarray:
        return self._tree[self.capacity : self.capacity + self.n].copy()

    def update(self, i: int, weight: float) -> None:
        """Set leaf i to ``weight`` and refresh the path to the root."""
        self._check_index(i)
        if not np.isfinite(weight) or weight < 0.0:
            raise ValueError(f"leaf weight must be finite and >= 0, got {weight}")
        j = self.capacity + i
        self._tree[j] = weight
        j //= 2
        while j >= 1:
            self._tree[j] = self._tree[2 * j] + self._tree[2 * j + 1]
            j //= 2

    def rebuild(self) -> None:
        """Recompute every internal node from the leaves, level by level."""
        lo = self.capacity
        while lo > 1:
            level = self._tree[lo : 2 * lo]
            lo //= 2
            self._tree[lo : 2 * lo] = level[0::2] + level[1::2]

    def sample(self, u: float) -> int:
        """Map u in [0, 1) to the unique leaf i with
        prefix(i-1) <= u * total < prefix(i)."""
        if not (0.0 <= u < 1.0):
            raise ValueError(f"u must lie in [0, 1), got {u}")
        total = self._tree[1]
        if not (total > 0.0):
            raise ValueError("cannot sample from a tree with zero total mass")
        target = u * total
        if target >= total:  # guard the u -> 1 rounding edge
            target = np.nextafter(total, 0.0)
        j = 1
        while j < self.capacity:
            left = self._tree[2 * j]
            if target < left:
                j = 2 * j
            else:
                target -= left
                j = 2 * j + 1
        i = j - self.capacity
        if i >= self.n:  # float edge: landed in zero padding
            i = self.n - 1
        return i

    def _check_index(self, i: int) -> None:
        if not (0 <= i < self.n):
            raise IndexError(f"leaf index {i} out of range for n={self.n}")
