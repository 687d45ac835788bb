"""Decoders: support inclusion, thresholded support, and brute-force ML.

Zero-column policy: an all-zero column can never be observed, so when the
syndrome is the zero vector such columns are left out of the estimate
(otherwise the empty set and the set of zero columns would tie).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .channel import Syndrome
from .design import BudgetExceededError, TestMatrix

DEFAULT_ML_BUDGET = 10**7


class DecodeStatus(str, enum.Enum):
    UNIQUE = "unique"
    AMBIGUOUS = "ambiguous"
    NO_CONSISTENT_SET = "no-consistent-set"


@dataclass(frozen=True)
class DecodeResult:
    recovered: frozenset
    status: DecodeStatus = DecodeStatus.UNIQUE


def _outcomes(matrix: TestMatrix, y) -> np.ndarray:
    bits = y.bits if isinstance(y, Syndrome) else np.asarray(y, dtype=bool)
    if bits.shape != (matrix.m,):
        raise ValueError(f"syndrome length {bits.shape} does not match m={matrix.m}")
    return bits


def _misses(matrix: TestMatrix, bits: np.ndarray) -> np.ndarray:
    """Per column, the number of its rows where the outcome is negative."""
    packed = Syndrome(bits).packed
    return np.bitwise_count(matrix.cols & ~packed).sum(axis=1)


def _finish(matrix: TestMatrix, bits: np.ndarray, keep: np.ndarray) -> DecodeResult:
    if not bits.any():
        keep = keep & (matrix.column_weights > 0)
    return DecodeResult(frozenset(np.flatnonzero(keep).tolist()))


def decode_support(matrix: TestMatrix, y) -> DecodeResult:
    """Columns whose support lies inside the positive tests."""
    bits = _outcomes(matrix, y)
    return _finish(matrix, bits, _misses(matrix, bits) == 0)


def decode_threshold(matrix: TestMatrix, y, v: int) -> DecodeResult:
    """Columns with at most ``v`` ones in negative tests."""
    if v < 0:
        raise ValueError("v must be nonnegative")
    bits = _outcomes(matrix, y)
    return _finish(matrix, bits, _misses(matrix, bits) <= v)


def decode_ml(
    matrix: TestMatrix, y, d_max: int, budget: int = DEFAULT_ML_BUDGET
) -> DecodeResult:
    """Noiseless maximum likelihood by enumeration.

    With noiseless outcomes the likelihood is 1 for OR-consistent sets and 0
    otherwise. Only columns whose support lies inside the positive tests can
    belong to a consistent set, so enumeration runs over those. Among
    consistent sets of size <= ``d_max`` the inclusion-minimal ones are the
    candidates; more than one is reported as ambiguous.
    """
    bits = _outcomes(matrix, y)
    if not 0 <= d_max <= matrix.n:
        raise ValueError(f"need 0 <= d_max <= n, got {d_max}")
    target = int.from_bytes(Syndrome(bits).packed.tobytes(), "little")
    masks = matrix.column_masks
    cand = [i for i, x in enumerate(masks) if x & ~target == 0 and x]
    top = min(d_max, len(cand))
    cost = sum(math.comb(len(cand), k) for k in range(top + 1))
    if cost > budget:
        raise BudgetExceededError(f"{cost} subsets exceed ML budget {budget}")

    minimal: list[frozenset] = []
    for k in range(top + 1):
        for subset in combinations(cand, k):
            cover = 0
            for i in subset:
                cover |= masks[i]
            if cover != target:
                continue
            s = frozenset(subset)
            if not any(prev <= s for prev in minimal):
                minimal.append(s)
    if not minimal:
        return DecodeResult(frozenset(), DecodeStatus.NO_CONSISTENT_SET)
    if len(minimal) > 1:
        return DecodeResult(frozenset(), DecodeStatus.AMBIGUOUS)
    return DecodeResult(minimal[0], DecodeStatus.UNIQUE)
