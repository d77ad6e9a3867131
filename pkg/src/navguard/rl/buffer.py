"""Fixed-capacity FIFO replay buffer with uniform sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Transition:
    """(s, a, a_e, r, s', done) with observations already featurized."""
    s: np.ndarray
    a: np.ndarray
    a_e: np.ndarray
    r: float
    s2: np.ndarray
    done: bool
    img: np.ndarray | None = None
    img2: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class Batch:
    s: np.ndarray
    a: np.ndarray
    a_e: np.ndarray
    r: np.ndarray  # (N, 1)
    s2: np.ndarray
    done: np.ndarray  # (N, 1), 1.0 for terminal
    img: np.ndarray | None = None
    img2: np.ndarray | None = None

    def __len__(self) -> int:
        return self.s.shape[0]


class ReplayBuffer:
    def __init__(self, capacity: int, vec_dim: int, action_dim: int = 2, image_side: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.s = np.zeros((capacity, vec_dim), np.float32)
        self.s2 = np.zeros((capacity, vec_dim), np.float32)
        self.a = np.zeros((capacity, action_dim), np.float32)
        self.a_e = np.zeros((capacity, action_dim), np.float32)
        self.r = np.zeros((capacity, 1), np.float32)
        self.done = np.zeros((capacity, 1), np.float32)
        # costmaps hold a handful of grey levels; half precision keeps memory in check
        self.img = np.zeros((capacity, image_side, image_side), np.float16) if image_side else None
        self.img2 = np.zeros_like(self.img) if image_side else None
        self.size = 0
        self.head = 0

    def __len__(self) -> int:
        return self.size

    def add(self, t: Transition) -> None:
        i = self.head
        self.s[i] = t.s
        self.s2[i] = t.s2
        self.a[i] = t.a
        self.a_e[i] = t.a_e
        self.r[i] = t.r
        self.done[i] = float(t.done)
        if self.img is not None:
            self.img[i] = t.img
            self.img2[i] = t.img2
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, self.size, size=n)

    def gather(self, idx: np.ndarray) -> Batch:
        img = self.img[idx].astype(np.float32) if self.img is not None else None
        img2 = self.img2[idx].astype(np.float32) if self.img2 is not None else None
        return Batch(self.s[idx], self.a[idx], self.a_e[idx], self.r[idx], self.s2[idx],
                     self.done[idx], img, img2)

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        return self.gather(self.sample_indices(n, rng))
