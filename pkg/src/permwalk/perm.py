"""Permutations of the integer interval [-n, n].

Vertices are exposed in ``[-n, n]`` coordinates; internally vertex ``v`` lives at
array index ``v + n``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .rng import RngSeed


@dataclass(frozen=True, eq=False)
class Permutation:
    """A bijection of [-n, n]; ``image[i] = sigma(i - n)``."""

    n: int
    image: tuple[int, ...]

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        image = tuple(int(v) for v in self.image)
        if sorted(image) != list(range(-self.n, self.n + 1)):
            raise ValueError(f"image is not a bijection of [-{self.n}, {self.n}]")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "image", image)

    @property
    def size(self) -> int:
        return 2 * self.n + 1

    @property
    def index_array(self) -> np.ndarray:
        """sigma in 0-based index form: ``arr[i] = sigma(i - n) + n``."""
        return np.asarray(self.image, dtype=np.int64) + self.n

    @classmethod
    def from_index_array(cls, n: int, arr) -> "Permutation":
        return cls(n, tuple(int(v) - n for v in arr))

    def __call__(self, x: int) -> int:
        return apply(self, x)

    def __eq__(self, other):
        if not isinstance(other, Permutation):
            return NotImplemented
        return self.n == other.n and self.image == other.image

    def __hash__(self):
        return hash((self.n, self.image))

    def __repr__(self):
        return f"Permutation(n={self.n}, image={list(self.image)})"

    def to_dict(self) -> dict:
        return {"n": self.n, "image": list(self.image)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Permutation":
        if not isinstance(data, dict) or set(data) != {"n", "image"}:
            raise ValueError('expected an object with exactly the keys "n" and "image"')
        n, image = data["n"], data["image"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise ValueError("n must be an integer")
        if not isinstance(image, list) or any(isinstance(v, bool) or not isinstance(v, int) for v in image):
            raise ValueError("image must be a list of integers")
        if len(image) != 2 * n + 1:
            raise ValueError(f"image must have {2 * n + 1} entries, got {len(image)}")
        return cls(n, tuple(image))

    @classmethod
    def from_json(cls, text: str) -> "Permutation":
        return cls.from_dict(json.loads(text))


def identity(n: int) -> Permutation:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    return Permutation(n, tuple(range(-n, n + 1)))


def apply(sigma: Permutation, x: int) -> int:
    if not -sigma.n <= x <= sigma.n:
        raise ValueError(f"{x} is outside [-{sigma.n}, {sigma.n}]")
    return sigma.image[x + sigma.n]


def inverse(sigma: Permutation) -> Permutation:
    n = sigma.n
    inv = [0] * sigma.size
    for i, v in enumerate(sigma.image):
        inv[v + n] = i - n
    return Permutation(n, tuple(inv))


def compose(sigma: Permutation, tau: Permutation) -> Permutation:
    """``sigma o tau``: x -> sigma(tau(x))."""
    if sigma.n != tau.n:
        raise ValueError("permutations act on different intervals")
    return Permutation(sigma.n, tuple(sigma.image[t + sigma.n] for t in tau.image))


def fisher_yates(items: list, rng: np.random.Generator) -> list:
    """Shuffle a copy of ``items`` uniformly.

    Swap offsets are drawn in one vectorised call; ``integers`` with an array
    upper bound is unbiased per entry.
    """
    out = list(items)
    m = len(out)
    if m < 2:
        return out
    highs = np.arange(m - 1, 0, -1)
    js = rng.integers(0, highs + 1).tolist()
    for i, j in zip(highs.tolist(), js):
        out[i], out[j] = out[j], out[i]
    return out


def sample_uniform(n: int, seed: RngSeed) -> Permutation:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    image = fisher_yates(list(range(-n, n + 1)), seed.generator())
    return Permutation(n, tuple(image))


def all_permutations(n: int) -> Iterator[Permutation]:
    """Every permutation of [-n, n] in lexicographic order of the image."""
    for image in itertools.permutations(range(-n, n + 1)):
        yield Permutation(n, image)


def shift_fixed_points(sigma: Permutation) -> int:
    """Number of x in [-n, n-1] with sigma(x+1) = x (self-loops of the walk)."""
    n = sigma.n
    img = sigma.image
    return sum(1 for x in range(-n, n) if img[x + 1 + n] == x)
