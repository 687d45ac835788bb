"""Finite-n evaluators for the lower and upper bounds on the number of tests.

Exponents and mutual information are in nats. The ML union bound is
evaluated in bits: both the exponent and the combinatorial term are
converted so that ``2 ** -(m * E - rho * L)`` is consistent.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.special import entr, gammaln

from .design import method1_m
from .dist import (
    BoundedLambda,
    RegimeError,
    RegimeSpec,
    TruncatedPoissonModel,
    iterated_log,
    select_delta,
    sparsity_notes,
)

LN2 = math.log(2)
LOG2E = math.log2(math.e)
SEMIADAPTIVE_CONSTANT = math.e / LOG2E
UNITS = ("tests", "bits", "nats", "probability")
HUFFMAN_MAX_N = 20
DEFAULT_RHO_GRID = np.round(np.arange(1, 101) * 0.01, 2)


@dataclass(frozen=True)
class BoundReport:
    name: str
    value: float
    unit: str
    assumptions: tuple[str, ...] = ()

    def __post_init__(self):
        if self.unit not in UNITS:
            raise ValueError(f"unknown unit {self.unit!r}")
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError(f"bound {self.name} has invalid value {self.value}")


@dataclass(frozen=True)
class ExponentPoint:
    rho: float
    i: int
    d: int
    p: float
    value: float


def log2_comb(n, k):
    """log2 of the binomial coefficient via log-gamma (array friendly)."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    out = (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)) / LN2
    return float(out) if out.ndim == 0 else out


# -- nonadaptive lower bound ---------------------------------------------

def fano_lower_bound(lam: float, n: int, epsilon: float) -> tuple[BoundReport, BoundReport]:
    """Asymptotic ``(1-eps) lam log2 n`` and finite ``log2 C(n, ceil((1-eps) lam))``."""
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    core = (1 - epsilon) * lam
    if not 0 < core <= n / 2:
        raise ValueError(f"need 0 < (1-eps)*lambda <= n/2, got {core:g} with n={n}")
    notes = tuple(sparsity_notes(lam, n))
    asym = BoundReport("fano_asymptotic", core * math.log2(n), "tests", notes)
    finite = BoundReport("fano_finite", log2_comb(n, math.ceil(core)), "tests", notes)
    return asym, finite


def fano_error_floor(m: int, n: int, d: int) -> float:
    """Error probability floor 1 - (m+1)/log2 C(n, d) given D = d, clipped at 0."""
    bits = log2_comb(n, d)
    if bits <= 0:
        return 0.0
    return max(0.0, 1.0 - (m + 1) / bits)


# -- constructive upper bounds -------------------------------------------

def constructive_upper_bounds(
    model: TruncatedPoissonModel,
    regime: RegimeSpec,
    v: int = 0,
    *,
    alpha: float = 0.3,
    tau: float = 1.0,
    gamma: float = 0.1,
    beta_k: int = 2,
) -> list[BoundReport]:
    """Test counts of every applicable nonadaptive construction at this n.

    ``alpha`` and ``beta_k`` enter only the ML count in the unbounded regime,
    ``gamma`` only in the bounded regime; ``tau`` scales the ML correction in both.
    """
    n, lam = model.n, model.lam
    if n < 2:
        raise ValueError("constructive bounds need n >= 2")
    delta = select_delta(model, regime)
    k = delta + 1
    notes = (f"regime={regime}", f"delta={delta}", *sparsity_notes(lam, n))
    bounded = isinstance(regime, BoundedLambda)
    tag = "bounded" if bounded else "unbounded"

    reports = [
        BoundReport(f"method1_{tag}", math.ceil(method1_m(delta, n)), "tests", notes),
        BoundReport(
            f"method1_noisy_{tag}",
            math.ceil(2 * math.e * k * k * math.log(n) + 4 * math.e * v * k),
            "tests",
            notes + (f"v={v}",),
        ),
        BoundReport(
            f"method2_{tag}", math.ceil(3 / math.log2(3) * k * math.log2(n)), "tests", notes
        ),
    ]

    try:
        if bounded:
            beta = regime.beta(n)
            h = beta * lam
            m_ml = 2 * h ** (1 + gamma) * (math.log(n) + tau * beta**2 * math.log(h) ** 2)
            ml_notes = notes + (f"gamma={gamma:g}", f"tau={tau:g}")
        else:
            beta = iterated_log(n, beta_k)
            log_lam = max(math.log(lam), 0.0)
            m_ml = 2 * lam ** (1 + alpha) * (math.log(n) + tau * beta * log_lam**3)
            ml_notes = notes + (f"alpha={alpha:g}", f"tau={tau:g}", f"beta=log^({beta_k}) n")
        reports.append(BoundReport(f"ml_{tag}", math.ceil(m_ml), "tests", ml_notes))
    except RegimeError:
        pass
    return reports


# -- adaptive / semi-adaptive --------------------------------------------

def source_entropy(model: TruncatedPoissonModel) -> BoundReport:
    """Entropy in bits of the defective indicator vector."""
    d = np.arange(model.n + 1)
    logp = model.log_pmf_table
    log_pw = logp / LN2 - log2_comb(model.n, d)
    w = model.pmf_table
    live = w > 0
    return BoundReport("source_entropy", float(-np.sum(w[live] * log_pw[live])), "bits")


def huffman_expected_length(model: TruncatedPoissonModel) -> BoundReport:
    """Expected length of an optimal prefix code over all 2^n outcomes."""
    n = model.n
    if n > HUFFMAN_MAX_N:
        raise ValueError(f"Huffman over 2^{n} symbols refused (n <= {HUFFMAN_MAX_N})")
    d = np.arange(n + 1)
    pw = np.exp(model.log_pmf_table - log2_comb(n, d) * LN2)
    counts = np.array([math.comb(n, int(k)) for k in d])
    order = np.argsort(pw, kind="stable")
    leaves = np.repeat(pw[order], counts[order]).tolist()
    return BoundReport("huffman_expected_length", _huffman_cost(leaves), "bits")


def _huffman_cost(sorted_probs: list[float]) -> float:
    """Sum of merged weights (= expected codeword length), two-queue method."""
    if len(sorted_probs) == 1:
        return 0.0
    leaves = deque(sorted_probs)
    merged: deque[float] = deque()
    total = 0.0

    def pop():
        if not merged or (leaves and leaves[0] <= merged[0]):
            return leaves.popleft()
        return merged.popleft()

    while len(leaves) + len(merged) > 1:
        w = pop() + pop()
        total += w
        merged.append(w)
    return total


def adaptive_lower_bound(lam: float, n: int) -> BoundReport:
    if not 0 < lam < n:
        raise ValueError(f"need 0 < lambda < n, got {lam} with n={n}")
    value = lam * math.log2(n / lam) - LOG2E * lam**4 / n**2
    return BoundReport("adaptive_lower", max(value, 0.0), "tests", tuple(sparsity_notes(lam, n)))


def semiadaptive_upper_bound(lambda_bar: float, n: int) -> BoundReport:
    if not 0 < lambda_bar < n:
        raise ValueError(f"need 0 < lambda_bar < n, got {lambda_bar} with n={n}")
    value = SEMIADAPTIVE_CONSTANT * lambda_bar * math.log2(n / lambda_bar)
    return BoundReport("semiadaptive_upper", value, "tests", tuple(sparsity_notes(lambda_bar, n)))


# -- error exponent machinery --------------------------------------------

def _check_point(rho, i, d, p):
    if not 0 <= rho <= 1:
        raise ValueError(f"rho must be in [0, 1], got {rho}")
    if not 1 <= i <= d:
        raise ValueError(f"need 1 <= i <= d, got i={i}, d={d}")
    if not 0 < p < 1:
        raise ValueError(f"p must be in (0, 1), got {p}")


def _exponent(rho, i, d, p):
    # Only (y=0, t2=0) and (y=1, t2=0) depend on rho; t2 != 0 forces y=1 and
    # contributes its own probability 1 - (1-p)^(d-i).
    rho = np.asarray(rho, dtype=float)
    i = np.asarray(i, dtype=float)
    log_keep = np.log1p(-p)
    q = np.exp((d - i) * log_keep)
    a = np.exp(i * log_keep)
    b = -np.expm1(i * log_keep)
    excess = a ** (1 + rho) + b ** (1 + rho) - 1
    return -np.log1p(q * excess)


def error_exponent(rho: float, i: int, d: int, p: float) -> ExponentPoint:
    """Random-coding exponent E_o(rho, i, d) of one Bernoulli(p) test, in nats."""
    _check_point(rho, i, d, p)
    value = 0.0 if rho == 0 else max(float(_exponent(rho, i, d, p)), 0.0)
    return ExponentPoint(rho, i, d, p, value)


def mutual_info_t1(i: int, d: int, p: float) -> float:
    """(1-p)^(d-i) * h((1-p)^i) in nats: slope of E_o at rho = 0."""
    _check_point(0.0, i, d, p)
    log_keep = math.log1p(-p)
    a = math.exp(i * log_keep)
    b = -math.expm1(i * log_keep)
    return math.exp((d - i) * log_keep) * float(entr(a) + entr(b))


def exponent_lower_bound(rho: float, i: int, d: int, p: float) -> float:
    """rho (1-p)^d i p (1 - rho/2 ln^2(ip)), without its vanishing correction."""
    return rho * (1 - p) ** d * i * p * (1 - rho / 2 * math.log(i * p) ** 2)


def ml_error_bound(m: int, rho: float, i: int, d: int, n: int, p: float) -> float:
    """Bound on P(some size-d set differing in i items is as likely as the truth)."""
    _check_point(rho, i, d, p)
    if i > n - d:
        raise ValueError(f"need i <= n - d, got i={i}, n-d={n - d}")
    e_bits = error_exponent(rho, i, d, p).value / LN2
    comb_bits = log2_comb(n - d, i) + log2_comb(d, i)
    expo = m * e_bits - rho * comb_bits
    return min(1.0, 2.0 ** (-expo)) if expo > -1024 else 1.0


def ml_pe1(model: TruncatedPoissonModel, m: int, p: float, delta: int, rho_grid=None) -> float:
    """Union-bound error mass over 1 <= d <= delta with rho optimized per (i, d)."""
    rho = np.asarray(DEFAULT_RHO_GRID if rho_grid is None else rho_grid, dtype=float)
    n = model.n
    per_d = []
    for d in range(1, min(delta, n) + 1):
        i = np.arange(1, min(d, n - d) + 1)
        if i.size == 0:
            continue
        e = _exponent(rho[None, :], i[:, None], d, p)
        comb_bits = log2_comb(n - d, i) + log2_comb(d, i)
        expo = m * e / LN2 - rho[None, :] * comb_bits[:, None]
        best = np.clip(expo.max(axis=1), 0.0, None)
        per_d.append(model.pmf(d) * np.sum(np.exp2(-best)))
    return float(np.sum(per_d)) if per_d else 0.0


def ml_pe2(model: TruncatedPoissonModel, delta: int) -> float:
    """Mass beyond the cut-off, each count d weighted by its d error events."""
    d = np.arange(delta + 1, model.n + 1)
    return float(np.sum(d * model.pmf_table[delta + 1:]))


def nonadaptive_ml_total_bound(
    model: TruncatedPoissonModel, m: int, p: float, regime: RegimeSpec, rho_grid=None
) -> BoundReport:
    """P_e1 + P_e2 for an i.i.d. Bernoulli(p) design under ML decoding."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 < p < 1:
        raise ValueError(f"p must be in (0, 1), got {p}")
    delta = select_delta(model, regime)
    pe1 = ml_pe1(model, m, p, delta, rho_grid)
    pe2 = ml_pe2(model, delta)
    notes = (f"delta={delta}", f"pe1={pe1!r}", f"pe2={pe2!r}", *sparsity_notes(model.lam, model.n))
    return BoundReport("ml_total", pe1 + pe2, "probability", notes)
