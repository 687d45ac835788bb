"""Multi-stage pooling with shrinking group sizes and zero identification error."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class StagePlan:
    s: int
    k: tuple[int, ...]
    n: int
    lambda_bar: float

    @property
    def s0(self) -> float:
        return math.log(self.n / self.lambda_bar)


@dataclass(frozen=True)
class StageRecord:
    pool_size: int
    groups: int
    tests: int
    positive_groups: int


@dataclass
class StageTrace:
    stages: list[StageRecord] = field(default_factory=list)
    recovered: frozenset = frozenset()

    @property
    def total_tests(self) -> int:
        return sum(st.tests for st in self.stages)

    def to_dict(self) -> dict:
        return {
            "stages": [asdict(st) for st in self.stages],
            "total_tests": self.total_tests,
            "recovered": sorted(self.recovered),
        }


def stage_plan(n: int, lambda_bar: float) -> StagePlan:
    """Stage count ceil(ln(n/lb)) and group sizes ceil((n/lb)^((s0-i)/s0))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < lambda_bar < n:
        raise ValueError(f"need 0 < lambda_bar < n, got {lambda_bar} with n={n}")
    ratio = n / lambda_bar
    s0 = math.log(ratio)
    s = max(1, math.ceil(s0))
    k = tuple(math.ceil(ratio ** ((s0 - i) / s0)) for i in range(1, s))
    return StagePlan(s=s, k=k, n=n, lambda_bar=lambda_bar)


def run_stages(plan: StagePlan, defectives, rng: np.random.Generator) -> StageTrace:
    """Execute the plan against a ground-truth defective set."""
    truth = np.zeros(plan.n, dtype=bool)
    members = list(defectives)
    if members and (min(members) < 0 or max(members) >= plan.n):
        raise ValueError("defective index out of range")
    truth[members] = True

    trace = StageTrace()
    pool = np.arange(plan.n)
    for size in plan.k:
        shuffled = rng.permutation(pool)
        groups = [shuffled[j:j + size] for j in range(0, shuffled.size, size)]
        positive = [g for g in groups if truth[g].any()]
        trace.stages.append(StageRecord(pool.size, len(groups), len(groups), len(positive)))
        pool = np.concatenate(positive) if positive else np.empty(0, dtype=np.int64)

    hits = pool[truth[pool]]
    trace.stages.append(StageRecord(pool.size, pool.size, pool.size, hits.size))
    trace.recovered = frozenset(hits.tolist())
    return trace


def per_realization_test_bound(plan: StagePlan, d: int) -> int:
    """Worst-case test count when exactly ``d`` subjects are defective."""
    if not 0 <= d <= plan.n:
        raise ValueError(f"need 0 <= d <= n, got {d}")
    if plan.s == 1:
        return plan.n
    # survivors of a stage with group size k lie in at most d groups, so at most min(n, d*k)
    k = plan.k
    total = -(-plan.n // k[0])
    for prev, cur in zip(k, k[1:]):
        total += -(-min(plan.n, d * prev) // cur)
    return total + min(plan.n, d * k[-1])
