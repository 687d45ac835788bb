"""Boolean-OR test outcomes and bounded bit-flip noise."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .design import TestMatrix, pack_bits


class ErrorMode(str, enum.Enum):
    EXACTLY_V = "exact"
    UP_TO_V = "upto"


@dataclass(frozen=True, eq=False)
class Syndrome:
    """Length-m outcome vector plus the rows that were corrupted."""

    bits: np.ndarray
    flips: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool).copy()
        if bits.ndim != 1:
            raise ValueError("syndrome must be a vector")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "flips", frozenset(int(r) for r in self.flips))
        if any(r < 0 or r >= bits.size for r in self.flips):
            raise ValueError("flip rows out of range")

    @property
    def m(self) -> int:
        return self.bits.size

    @property
    def packed(self) -> np.ndarray:
        return pack_bits(self.bits.reshape(1, -1))[0]

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @classmethod
    def from_string(cls, text: str) -> "Syndrome":
        if set(text) - {"0", "1"}:
            raise ValueError(f"syndrome string must be 0/1, got {text!r}")
        return cls(np.array([c == "1" for c in text], dtype=bool))

    def __eq__(self, other):
        if not isinstance(other, Syndrome):
            return NotImplemented
        return np.array_equal(self.bits, other.bits) and self.flips == other.flips

    def __hash__(self):
        return hash((self.bits.tobytes(), self.flips))


def syndrome(matrix: TestMatrix, defectives: Iterable[int]) -> Syndrome:
    """Row i is positive iff some defective column has a 1 there."""
    members = np.fromiter(defectives, dtype=np.int64)
    if members.size and (members.min() < 0 or members.max() >= matrix.n):
        raise ValueError("defective index out of range")
    mask = np.zeros(matrix.n, dtype=bool)
    mask[members] = True
    packed_mask = pack_bits(mask.reshape(1, -1))[0]
    bits = (matrix.rows & packed_mask).any(axis=1)
    return Syndrome(bits)


def inject_errors(
    s: Syndrome,
    v: int,
    mode: ErrorMode | str = ErrorMode.EXACTLY_V,
    rng: np.random.Generator | None = None,
) -> Syndrome:
    """Flip ``v`` (or a uniform count in ``[0, v]``) distinct random rows."""
    mode = ErrorMode(mode)
    if v < 0 or v > s.m:
        raise ValueError(f"need 0 <= v <= m, got v={v}, m={s.m}")
    if v == 0:
        return s
    if rng is None:
        raise ValueError("a seeded generator is required when v > 0")
    count = v if mode is ErrorMode.EXACTLY_V else int(rng.integers(0, v + 1))
    rows = rng.choice(s.m, size=count, replace=False)
    bits = s.bits.copy()
    bits[rows] ^= True
    return Syndrome(bits, s.flips.symmetric_difference(int(r) for r in rows))
