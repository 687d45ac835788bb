"""Right-truncated Poisson model for the number of defectives.

All internal logarithms are natural. The model caches its log-pmf table and
cumulative table on first use; both are length ``n + 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy.special import gammaln, logsumexp


class RegimeWarning(UserWarning):
    """Parameters fall outside the sparse regime the bounds assume."""


class RegimeError(ValueError):
    """A regime quantity (iterated logarithm) is undefined at the given n."""


@dataclass(frozen=True)
class UnboundedLambda:
    """Regime where lambda grows without bound; Delta uses a (1+eps) power."""

    epsilon: float = 0.1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    def __str__(self):
        return f"unbounded:{self.epsilon:g}"


@dataclass(frozen=True)
class BoundedLambda:
    """Regime where lambda stays bounded; Delta is inflated by a K-fold log."""

    K: int = 2

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 2:
            raise ValueError(f"K must be an integer >= 2, got {self.K}")

    def beta(self, n: int) -> float:
        return iterated_log(n, self.K)

    def __str__(self):
        return f"bounded:{self.K}"


RegimeSpec = Union[UnboundedLambda, BoundedLambda]


def parse_regime(text: str) -> RegimeSpec:
    """Parse ``unbounded:EPS`` or ``bounded:K``."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "unbounded":
            return UnboundedLambda(float(arg) if arg else 0.1)
        if kind == "bounded":
            return BoundedLambda(int(arg) if arg else 2)
    except ValueError as exc:
        raise ValueError(f"bad regime {text!r}: {exc}") from None
    raise ValueError(f"bad regime {text!r}: expected unbounded:EPS or bounded:K")


def iterated_log(n: float, k: int) -> float:
    """``log(log(...log(n)))`` applied ``k`` times; must stay positive."""
    x = float(n)
    for step in range(k):
        if x <= 0:
            raise RegimeError(f"{k}-fold log of {n} undefined (step {step} hit {x:g})")
        x = math.log(x)
    if x <= 0:
        raise RegimeError(f"{k}-fold log of {n} is {x:g}, need > 0")
    return x


@dataclass(frozen=True)
class TruncatedPoissonModel:
    """Poisson(lam) conditioned on the count being at most ``n``.

    >>> m = TruncatedPoissonModel(2.0, 2)
    >>> round(m.pmf(2), 12)
    0.4
    """

    lam: float
    n: int

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be positive and finite, got {self.lam}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @cached_property
    def _log_terms(self) -> np.ndarray:
        # untruncated Poisson log-pmf on 0..n
        d = np.arange(self.n + 1, dtype=float)
        return d * math.log(self.lam) - self.lam - gammaln(d + 1)

    @cached_property
    def log_normalizer(self) -> float:
        """log c(n) = -log P(Poisson(lam) <= n)."""
        return -float(logsumexp(self._log_terms))

    @property
    def normalizer(self) -> float:
        return math.exp(self.log_normalizer)

    @cached_property
    def log_pmf_table(self) -> np.ndarray:
        table = self._log_terms + self.log_normalizer
        table.setflags(write=False)
        return table

    @cached_property
    def pmf_table(self) -> np.ndarray:
        table = np.exp(self.log_pmf_table)
        table.setflags(write=False)
        return table

    @cached_property
    def _cdf(self) -> np.ndarray:
        cdf = np.cumsum(self.pmf_table)
        cdf /= cdf[-1]
        return cdf

    @cached_property
    def _upper_tail(self) -> np.ndarray:
        # summed from the top so small tails keep full relative precision
        tail = np.cumsum(self.pmf_table[::-1])[::-1]
        tail.setflags(write=False)
        return tail

    def pmf(self, d: int) -> float:
        if d < 0 or d > self.n:
            return 0.0
        return float(self.pmf_table[d])

    def log_pmf(self, d: int) -> float:
        if d < 0 or d > self.n:
            return -math.inf
        return float(self.log_pmf_table[d])

    def mean(self) -> float:
        """Expected count, lam * (1 - P(D = n))."""
        return self.lam * (1.0 - self.pmf(self.n))

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Inverse-CDF draw(s) from the cached cumulative table."""
        u = rng.random(size)
        idx = np.searchsorted(self._cdf, u, side="right")
        idx = np.minimum(idx, self.n)
        return int(idx) if size is None else idx

    def tail_exact(self, delta: int) -> float:
        """P(D > delta)."""
        if delta < 0:
            return 1.0
        if delta >= self.n:
            return 0.0
        return float(self._upper_tail[delta + 1])

    def check_sparse(self, stacklevel: int = 3) -> list[str]:
        """Notes (and warnings) when lambda is not small relative to n."""
        return sparsity_notes(self.lam, self.n, stacklevel=stacklevel + 1)


def sparsity_notes(lam: float, n: int, stacklevel: int = 2) -> list[str]:
    notes = []
    if lam >= n:
        notes.append(f"lambda={lam:g} >= n={n}: lambda=o(n) violated")
    elif lam >= n / 2:
        notes.append(f"lambda={lam:g} >= n/2: lambda=o(n) implausible")
    for note in notes:
        warnings.warn(note, RegimeWarning, stacklevel=stacklevel)
    return notes


def select_delta(model: TruncatedPoissonModel, regime: RegimeSpec) -> int:
    """Cut-off Delta with P(D > Delta) -> 0, clamped to [0, n]."""
    if isinstance(regime, UnboundedLambda):
        raw = math.ceil(model.lam ** (1 + regime.epsilon)) - 1
    elif isinstance(regime, BoundedLambda):
        raw = math.ceil(regime.beta(model.n) * model.lam) - 1
    else:
        raise TypeError(f"unknown regime {regime!r}")
    return min(max(raw, 0), model.n)


def chernoff_tail_bound(lam: float, a: float) -> float:
    """Upper bound on P(Poisson(lam) >= lam + a) for a >= 0."""
    if a < 0:
        raise ValueError(f"a must be nonnegative, got {a}")
    if a == 0:
        return 1.0
    t = lam + a
    return math.exp(-t * math.log(t / lam) + a)


def lecam_gap_bound(p_list: Sequence[float]) -> float:
    """2 * sum(p_i^2): distance bound between a Bernoulli sum and Poisson."""
    p = np.asarray(p_list, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    return 2.0 * math.fsum(p * p)
