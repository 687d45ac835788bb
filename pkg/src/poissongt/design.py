"""Nonadaptive test matrices: constructions, disjunctness checks, file I/O.

A :class:`TestMatrix` keeps two bit-packed views of the same ``m x n`` 0/1
matrix, both as little-endian ``uint64`` words with bit ``k`` of word ``w``
holding index ``64 * w + k``:

* ``rows``  -- shape ``(m, ceil(n / 64))``, one packed row per test;
* ``cols``  -- shape ``(n, ceil(m / 64))``, one packed column per subject.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from pathlib import Path

import numpy as np

from .dist import RegimeSpec, TruncatedPoissonModel, select_delta

DEFAULT_CHECK_BUDGET = 10**8
CHENGDU_Q = 3


class BudgetExceededError(RuntimeError):
    """Brute-force enumeration would exceed the configured budget."""


def pack_bits(dense: np.ndarray) -> np.ndarray:
    """Pack a 2-D 0/1 array along its last axis into uint64 words."""
    dense = np.asarray(dense, dtype=bool)
    r, c = dense.shape
    words = max(1, -(-c // 64))
    padded = np.zeros((r, words * 64), dtype=bool)
    padded[:, :c] = dense
    as_bytes = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(as_bytes).view("<u8").reshape(r, words)


def unpack_bits(packed: np.ndarray, length: int) -> np.ndarray:
    packed = np.ascontiguousarray(packed, dtype="<u8")
    as_bytes = packed.view(np.uint8).reshape(packed.shape[0], -1)
    return np.unpackbits(as_bytes, axis=1, bitorder="little")[:, :length].astype(bool)


def pack_vector(bits) -> np.ndarray:
    return pack_bits(np.asarray(bits, dtype=bool).reshape(1, -1))[0]


@dataclass(frozen=True)
class MatrixMeta:
    method: str
    p: float | None = None
    delta: int | None = None
    seed: int | None = None
    extra: dict = field(default_factory=dict, compare=False)


class TestMatrix:
    """Immutable binary pooling design (tests x subjects)."""

    __test__ = False  # not a pytest class

    def __init__(self, rows: np.ndarray, n: int, meta: MatrixMeta | None = None, *, _dense=None):
        if _dense is not None:
            _dense.setflags(write=False)
            self.__dict__["_dense"] = _dense
        rows = np.ascontiguousarray(rows, dtype=np.uint64)
        if rows.ndim != 2 or rows.shape[1] != max(1, -(-n // 64)):
            raise ValueError(f"packed rows of shape {rows.shape} do not fit n={n}")
        if n % 64 and rows.size and np.any(rows[:, -1] >> np.uint64(n % 64)):
            raise ValueError("padding bits beyond column n are set")
        rows.setflags(write=False)
        self.rows = rows
        self.m = rows.shape[0]
        self.n = int(n)
        if self.m < 1 or self.n < 1:
            raise ValueError("matrix needs at least one row and one column")
        meta = meta or MatrixMeta("explicit")
        zero = np.flatnonzero(self.column_weights == 0)
        if zero.size:
            meta.extra.setdefault("zero_columns", zero.tolist())
        self.meta = meta

    @classmethod
    def from_dense(cls, dense, meta: MatrixMeta | None = None) -> "TestMatrix":
        dense = np.asarray(dense)
        if dense.ndim != 2:
            raise ValueError("dense matrix must be 2-D")
        if dense.dtype != bool:
            if not ((dense == 0) | (dense == 1)).all():
                raise ValueError("entries must be 0 or 1")
            dense = dense.astype(bool)
        else:
            dense = dense.copy()
        return cls(pack_bits(dense), dense.shape[1], meta, _dense=dense)

    @classmethod
    def identity(cls, n: int, copies: int = 1) -> "TestMatrix":
        """Individual testing; ``copies`` stacks the identity vertically."""
        dense = np.tile(np.eye(n, dtype=bool), (copies, 1))
        return cls.from_dense(dense, MatrixMeta("identity", delta=n - 1))

    @cached_property
    def _dense(self) -> np.ndarray:
        dense = unpack_bits(self.rows, self.n)
        dense.setflags(write=False)
        return dense

    def dense(self) -> np.ndarray:
        """Read-only boolean view, shape (m, n)."""
        return self._dense

    @cached_property
    def cols(self) -> np.ndarray:
        packed = pack_bits(self.dense().T)
        packed.setflags(write=False)
        return packed

    @cached_property
    def column_weights(self) -> np.ndarray:
        return self.dense().sum(axis=0)

    @cached_property
    def column_masks(self) -> list[int]:
        """Each column's support as a Python int (bit r = row r)."""
        return [
            int.from_bytes(col.tobytes(), "little") for col in self.cols
        ]

    def __eq__(self, other):
        if not isinstance(other, TestMatrix):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.rows, other.rows)

    def __hash__(self):
        return hash((self.n, self.rows.tobytes()))

    def __repr__(self):
        return f"TestMatrix(m={self.m}, n={self.n}, method={self.meta.method!r})"


@dataclass(frozen=True)
class Method1Params:
    p: float
    m: int
    delta: int

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError(f"p must be in (0, 1), got {self.p}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")


def bernoulli_matrix(m: int, n: int, p: float, seed: int, delta: int | None = None) -> TestMatrix:
    """i.i.d. Bernoulli(p) entries, reproducible from ``seed``."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    if not 0 < p < 1:
        raise ValueError(f"p must be in (0, 1), got {p}")
    rng = np.random.default_rng(seed)
    dense = rng.random((m, n)) < p
    return TestMatrix(pack_bits(dense), n, MatrixMeta("bernoulli", p=p, delta=delta, seed=seed), _dense=dense)


def method1_m(delta: int, n: int, v: int = 0) -> float:
    """Unrounded test count for the Bernoulli design (noiseless when v=0)."""
    k = delta + 1
    if v == 0:
        return math.e * k * k * math.log(n)
    return 2 * math.e * k * k * math.log(n) + 4 * math.e * v * k


def method1_params(model: TruncatedPoissonModel, regime: RegimeSpec, v: int = 0) -> Method1Params:
    if model.n < 2:
        raise ValueError("method I needs n >= 2")
    if v < 0:
        raise ValueError("v must be nonnegative")
    delta = select_delta(model, regime)
    return Method1Params(p=1.0 / (delta + 1), m=math.ceil(method1_m(delta, model.n, v)), delta=delta)


def chengdu_rows(delta: int, n: int, p_success: float) -> int:
    """Number of q-ary rows t before the indicator expansion."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    if not 0 < p_success < 1:
        raise ValueError(f"p_success must be in (0, 1), got {p_success}")
    t = delta / math.log2(CHENGDU_Q) * (math.log2(n) + math.log2(1 / (1 - p_success)))
    return max(1, math.ceil(t))


def chengdu_matrix(
    delta: int, n: int, p_success: float, seed: int, t: int | None = None
) -> TestMatrix:
    """Ternary random design expanded to binary indicator rows.

    A ``t x n`` matrix with uniform entries in ``{0, 1, 2}`` is drawn; q-ary
    row ``r`` becomes the three binary rows ``3r + s`` marking the columns
    whose symbol is ``s``. Every column therefore has weight exactly ``t``.
    Passing ``t`` overrides the row count derived from ``(delta, n, p_success)``.
    """
    if t is None:
        t = chengdu_rows(delta, n, p_success)
    elif t < 1:
        raise ValueError("t must be >= 1")
    rng = np.random.default_rng(seed)
    symbols = rng.integers(0, CHENGDU_Q, size=(t, n))
    dense = symbols[:, None, :] == np.arange(CHENGDU_Q)[None, :, None]
    dense = dense.reshape(CHENGDU_Q * t, n)
    meta = MatrixMeta(
        "chengdu", delta=delta, seed=seed, extra={"q": CHENGDU_Q, "t": t, "p_success": p_success}
    )
    return TestMatrix(pack_bits(dense), n, meta)


def _private_row_counts(masks: list[int], delta: int, need: int, budget: int):
    """True iff every column keeps >= ``need`` rows outside any delta others."""
    n = len(masks)
    if delta < 0 or delta + 1 > n:
        raise ValueError(f"need 0 <= delta <= n - 1, got delta={delta}, n={n}")
    checks = n * math.comb(n - 1, delta)
    if checks > budget:
        raise BudgetExceededError(f"{checks} column-set checks exceed budget {budget}")
    for i, xi in enumerate(masks):
        if xi.bit_count() < need:
            return False
        others = masks[:i] + masks[i + 1:]
        for group in combinations(others, delta):
            cover = 0
            for x in group:
                cover |= x
            if (xi & ~cover).bit_count() < need:
                return False
    return True


def is_disjunct(matrix: TestMatrix, delta: int, budget: int = DEFAULT_CHECK_BUDGET) -> bool:
    """Exhaustive Delta-disjunctness check."""
    return _private_row_counts(matrix.column_masks, delta, 1, budget)


def is_error_tolerant_disjunct(
    matrix: TestMatrix, delta: int, v: int, budget: int = DEFAULT_CHECK_BUDGET
) -> bool:
    """Delta-disjunct with at least 2v+1 private rows per column."""
    if v < 0:
        raise ValueError("v must be nonnegative")
    return _private_row_counts(matrix.column_masks, delta, 2 * v + 1, budget)


# -- serialization ---------------------------------------------------------

BINARY_MAGIC = b"PGTM"
BINARY_VERSION = 1


def write_text(matrix: TestMatrix, path) -> None:
    """Header ``m n method seed`` then one 0/1 line per row."""
    seed = "none" if matrix.meta.seed is None else str(matrix.meta.seed)
    lines = [f"{matrix.m} {matrix.n} {matrix.meta.method} {seed}"]
    for row in matrix.dense():
        lines.append("".join("1" if b else "0" for b in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_text(path) -> TestMatrix:
    text = Path(path).read_text(encoding="utf-8").split()
    if len(text) < 4:
        raise ValueError(f"{path}: truncated header")
    m, n, method, seed = int(text[0]), int(text[1]), text[2], text[3]
    body = text[4:]
    if len(body) != m or any(len(line) != n or set(line) - {"0", "1"} for line in body):
        raise ValueError(f"{path}: expected {m} lines of {n} characters in {{0,1}}")
    dense = np.array([[c == "1" for c in line] for line in body], dtype=bool)
    meta = MatrixMeta(method, seed=None if seed == "none" else int(seed))
    return TestMatrix(pack_bits(dense), n, meta)


def write_binary(matrix: TestMatrix, path) -> None:
    """Magic, version, m, n, seed, method tag, then packed rows (u64 LE)."""
    method = matrix.meta.method.encode("utf-8")
    seed = -1 if matrix.meta.seed is None else matrix.meta.seed
    header = struct.pack("<4sIQQqH", BINARY_MAGIC, BINARY_VERSION, matrix.m, matrix.n, seed, len(method))
    Path(path).write_bytes(header + method + matrix.rows.astype("<u8").tobytes())


def read_binary(path) -> TestMatrix:
    blob = Path(path).read_bytes()
    head = struct.calcsize("<4sIQQqH")
    magic, version, m, n, seed, mlen = struct.unpack_from("<4sIQQqH", blob)
    if magic != BINARY_MAGIC or version != BINARY_VERSION:
        raise ValueError(f"{path}: not a packed test matrix")
    method = blob[head:head + mlen].decode("utf-8")
    words = max(1, -(-n // 64))
    payload = blob[head + mlen:]
    if len(payload) != m * words * 8:
        raise ValueError(f"{path}: payload size {len(payload)} != {m * words * 8}")
    rows = np.frombuffer(payload, dtype="<u8").reshape(m, words).astype(np.uint64)
    return TestMatrix(rows, n, MatrixMeta(method, seed=None if seed < 0 else seed))


def read_matrix(path) -> TestMatrix:
    """Load either format, sniffing the binary magic."""
    with open(path, "rb") as fh:
        if fh.read(4) == BINARY_MAGIC:
            return read_binary(path)
    return read_text(path)
