"""Counter-based, splittable random streams.

An ``Rng`` is identified by a root seed plus a path of integer/str keys.
Children are derived by extending the path, never by drawing from the parent,
so the stream a component sees does not depend on how many numbers anyone
else consumed. Backed by numpy's Philox bit generator.
"""
import hashlib

import numpy as np


def _key(k):
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError(f"rng keys must be non-negative, got {k}")
        return int(k)
    # stable across processes, unlike hash()
    return int.from_bytes(hashlib.blake2b(str(k).encode(), digest_size=8).digest(), "little")


class Rng:
    def __init__(self, seed, *path):
        if seed < 0 or seed >= 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.path = tuple(_key(k) for k in path)
        self._ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.gen = np.random.Generator(np.random.Philox(self._ss))

    def child(self, *keys):
        return Rng(self.seed, *self.path, *keys)

    def derive_seed(self):
        """A single uint64 summarising this stream (used to tag generated samples)."""
        return int(self._ss.generate_state(1, np.uint64)[0])

    # thin pass-throughs used across the package
    def random(self, size=None):
        return self.gen.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def permutation(self, n):
        return self.gen.permutation(n)

    def choice(self, a, size=None, replace=True):
        return self.gen.choice(a, size=size, replace=replace)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={self.path})"
