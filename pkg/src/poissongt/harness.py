"""Monte Carlo engine: seeded trials, aggregate error rates, CSV sweeps.

Every trial draws its randomness from ``SeedSequence([seed, stream, trial])``
so results do not depend on execution order or worker count. ``stream`` is
the row index inside a sweep (0 for a single run).
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .bounds import adaptive_lower_bound, constructive_upper_bounds, fano_lower_bound, semiadaptive_upper_bound
from .channel import ErrorMode, inject_errors, syndrome
from .decode import decode_support, decode_threshold
from .design import CHENGDU_Q, TestMatrix, bernoulli_matrix, chengdu_matrix, chengdu_rows, method1_params
from .dist import RegimeSpec, TruncatedPoissonModel, UnboundedLambda, parse_regime, select_delta
from .semiadaptive import per_realization_test_bound, run_stages, stage_plan

CSV_COLUMNS = (
    "scheme", "lambda", "n", "m", "trials", "error_rate", "ci_lo", "ci_hi",
    "mean_tests", "fano_lb", "adaptive_lb", "semiadaptive_ub", "seed",
)
FANO_EPSILON = 0.1


class Scheme(str, enum.Enum):
    METHOD1 = "method1"
    METHOD1_NOISY = "method1-noisy"
    METHOD2 = "method2"
    INDIVIDUAL = "individual"
    SEMIADAPTIVE = "semiadaptive"


NONADAPTIVE = (Scheme.METHOD1, Scheme.METHOD1_NOISY, Scheme.METHOD2, Scheme.INDIVIDUAL)


@dataclass(frozen=True)
class ExperimentConfig:
    lam: float
    n: int
    scheme: Scheme
    trials: int
    seed: int
    regime: RegimeSpec = field(default_factory=UnboundedLambda)
    v: int = 0
    m_override: int | None = None
    error_mode: ErrorMode = ErrorMode.EXACTLY_V
    fixed_matrix: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "error_mode", ErrorMode(self.error_mode))
        if isinstance(self.regime, str):
            object.__setattr__(self, "regime", parse_regime(self.regime))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.v < 0:
            raise ValueError("v must be >= 0")
        if self.m_override is not None and self.m_override < 1:
            raise ValueError("m_override must be >= 1")

    @property
    def model(self) -> TruncatedPoissonModel:
        return TruncatedPoissonModel(self.lam, self.n)

    def echo(self) -> dict:
        out = asdict(self)
        out.update(scheme=self.scheme.value, error_mode=self.error_mode.value, regime=str(self.regime))
        return out


@dataclass(frozen=True)
class TrialReport:
    trial_id: int
    d_true: int
    recovered_ok: bool
    tests_used: int
    decode_status: str
    flips: tuple[int, ...] = ()
    detail: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class AggregateReport:
    config: ExperimentConfig
    m: int | None
    trials: int
    errors: int
    error_rate: float
    error_ci: tuple[float, float]
    mean_tests: float
    tests_ci: tuple[float, float]
    bounds: dict
    reports: tuple[TrialReport, ...] = field(default=(), repr=False, compare=False)

    def csv_row(self) -> dict:
        c = self.config
        return {
            "scheme": c.scheme.value,
            "lambda": _fmt(c.lam),
            "n": c.n,
            "m": "" if self.m is None else self.m,
            "trials": self.trials,
            "error_rate": _fmt(self.error_rate),
            "ci_lo": _fmt(self.error_ci[0]),
            "ci_hi": _fmt(self.error_ci[1]),
            "mean_tests": _fmt(self.mean_tests),
            "fano_lb": _fmt(self.bounds.get("fano_lb")),
            "adaptive_lb": _fmt(self.bounds.get("adaptive_lb")),
            "semiadaptive_ub": _fmt(self.bounds.get("semiadaptive_ub")),
            "seed": c.seed,
        }


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def trial_seed(seed: int, stream: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, stream, trial])


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def wilson_interval(errors: int, trials: int) -> tuple[float, float]:
    ci = binomtest(errors, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def nominal_m(config: ExperimentConfig) -> int:
    """Test count the construction uses when no override is given."""
    model = config.model
    if config.scheme is Scheme.INDIVIDUAL:
        return config.n
    if config.scheme is Scheme.METHOD2:
        reports = constructive_upper_bounds(model, config.regime)
        return int(next(r.value for r in reports if r.name.startswith("method2")))
    v = config.v if config.scheme is Scheme.METHOD1_NOISY else 0
    return method1_params(model, config.regime, v).m


def design_m(config: ExperimentConfig) -> int:
    """Rows of the matrix each trial actually builds."""
    if config.scheme is Scheme.INDIVIDUAL:
        return config.n
    if config.scheme is Scheme.METHOD2:
        if config.m_override is not None:
            return CHENGDU_Q * max(1, -(-config.m_override // CHENGDU_Q))
        delta = max(1, select_delta(config.model, config.regime))
        return CHENGDU_Q * chengdu_rows(delta, config.n, 1 - 1 / math.log(config.n))
    return config.m_override or nominal_m(config)


def _build_matrix(config: ExperimentConfig, seed: int) -> TestMatrix:
    model = config.model
    if config.scheme is Scheme.INDIVIDUAL:
        return TestMatrix.identity(config.n)
    if config.scheme is Scheme.METHOD2:
        delta = max(1, select_delta(model, config.regime))
        p_success = 1 - 1 / math.log(config.n)
        t = None if config.m_override is None else max(1, -(-config.m_override // CHENGDU_Q))
        return chengdu_matrix(delta, config.n, p_success, seed, t=t)
    v = config.v if config.scheme is Scheme.METHOD1_NOISY else 0
    params = method1_params(model, config.regime, v)
    m = config.m_override or params.m
    return bernoulli_matrix(m, config.n, params.p, seed, delta=params.delta)


def _nonadaptive_trial(config: ExperimentConfig, stream: int, trial: int, matrix=None) -> TrialReport:
    mat_ss, d_ss, noise_ss = trial_seed(config.seed, stream, trial).spawn(3)
    if matrix is None:
        matrix = _build_matrix(config, _int_seed(mat_ss))
    rng = np.random.default_rng(d_ss)
    d = config.model.sample(rng)
    truth = frozenset(rng.choice(config.n, size=d, replace=False).tolist())
    y = syndrome(matrix, truth)
    if config.scheme is Scheme.METHOD1_NOISY:
        y = inject_errors(y, min(config.v, matrix.m), config.error_mode, np.random.default_rng(noise_ss))
        result = decode_threshold(matrix, y, config.v)
    else:
        result = decode_support(matrix, y)
    return TrialReport(
        trial_id=trial,
        d_true=d,
        recovered_ok=result.recovered == truth,
        tests_used=matrix.m,
        decode_status=result.status.value,
        flips=tuple(sorted(y.flips)),
        detail={"syndrome": y.to_string(), "defectives": sorted(truth), "recovered": sorted(result.recovered)},
    )


def _semiadaptive_trial(config: ExperimentConfig, stream: int, trial: int, plan) -> TrialReport:
    rng = np.random.default_rng(trial_seed(config.seed, stream, trial))
    d = config.model.sample(rng)
    truth = frozenset(rng.choice(config.n, size=d, replace=False).tolist())
    trace = run_stages(plan, truth, rng)
    detail = trace.to_dict()
    detail["bound"] = per_realization_test_bound(plan, d)
    return TrialReport(
        trial_id=trial,
        d_true=d,
        recovered_ok=trace.recovered == truth,
        tests_used=trace.total_tests,
        decode_status="unique",
        detail=detail,
    )


def _run_chunk(args):
    config, stream, trials, extra = args
    if config.scheme is Scheme.SEMIADAPTIVE:
        return [_semiadaptive_trial(config, stream, t, extra) for t in trials]
    return [_nonadaptive_trial(config, stream, t, extra) for t in trials]


def _execute(config: ExperimentConfig, stream: int, extra, workers: int) -> list[TrialReport]:
    ids = list(range(config.trials))
    if workers <= 1:
        return _run_chunk((config, stream, ids, extra))
    chunks = [ids[w::workers] for w in range(workers)]
    with ProcessPoolExecutor(workers) as pool:
        parts = list(pool.map(_run_chunk, [(config, stream, c, extra) for c in chunks]))
    merged = [r for part in parts for r in part]
    return sorted(merged, key=lambda r: r.trial_id)


def _reference_bounds(config: ExperimentConfig) -> dict:
    out = {}
    lam, n = config.lam, config.n
    try:
        out["fano_lb"] = fano_lower_bound(lam, n, FANO_EPSILON)[1].value
    except ValueError:
        out["fano_lb"] = None
    lam_bar = config.model.mean()
    try:
        out["adaptive_lb"] = adaptive_lower_bound(lam, n).value
        out["semiadaptive_ub"] = semiadaptive_upper_bound(lam_bar, n).value
    except ValueError:
        out.setdefault("adaptive_lb", None)
        out["semiadaptive_ub"] = None
    return out


def _aggregate(config, m, reports) -> AggregateReport:
    trials = len(reports)
    errors = sum(not r.recovered_ok for r in reports)
    tests = np.array([r.tests_used for r in reports], dtype=float)
    mean = float(tests.mean())
    half = 1.96 * float(tests.std(ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
    return AggregateReport(
        config=config,
        m=m,
        trials=trials,
        errors=errors,
        error_rate=errors / trials,
        error_ci=wilson_interval(errors, trials),
        mean_tests=mean,
        tests_ci=(mean - half, mean + half),
        bounds=_reference_bounds(config),
        reports=tuple(reports),
    )


def run_nonadaptive(config: ExperimentConfig, *, stream: int = 0, workers: int = 1) -> AggregateReport:
    """Fresh design per trial (or one shared design with ``fixed_matrix``)."""
    if config.scheme not in NONADAPTIVE:
        raise ValueError(f"scheme {config.scheme.value} is not nonadaptive")
    shared = None
    if config.fixed_matrix or config.scheme is Scheme.INDIVIDUAL:
        shared = _build_matrix(config, _int_seed(np.random.SeedSequence([config.seed, stream])))
    m = shared.m if shared is not None else design_m(config)
    reports = _execute(config, stream, shared, workers)
    return _aggregate(config, m, reports)


def run_semiadaptive(config: ExperimentConfig, *, stream: int = 0, workers: int = 1) -> AggregateReport:
    if config.scheme is not Scheme.SEMIADAPTIVE:
        raise ValueError("run_semiadaptive needs scheme=semiadaptive")
    plan = stage_plan(config.n, config.model.mean())
    reports = _execute(config, stream, plan, workers)
    agg = _aggregate(config, None, reports)
    if agg.errors:
        raise RuntimeError(f"semi-adaptive run misidentified {agg.errors} trials")
    return agg


def run(config: ExperimentConfig, *, stream: int = 0, workers: int = 1) -> AggregateReport:
    if config.scheme is Scheme.SEMIADAPTIVE:
        return run_semiadaptive(config, stream=stream, workers=workers)
    return run_nonadaptive(config, stream=stream, workers=workers)


def write_csv(reports, fh) -> None:
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for agg in reports:
        writer.writerow(agg.csv_row())


def write_trace(reports, fh) -> None:
    for agg in reports:
        for r in agg.reports:
            fh.write(r.to_json() + "\n")


def sweep(configs, output_path, *, trace_path=None, workers: int = 1) -> list[AggregateReport]:
    """Run each config (row index = seed stream) and write one CSV row per config."""
    configs = list(configs)
    if not configs:
        raise ValueError("sweep needs at least one config")
    results = [run(c, stream=row, workers=workers) for row, c in enumerate(configs)]
    buf = io.StringIO()
    write_csv(results, buf)
    try:
        Path(output_path).write_text(buf.getvalue(), encoding="utf-8")
        if trace_path is not None:
            with open(trace_path, "w", encoding="utf-8") as fh:
                write_trace(results, fh)
    except OSError as exc:
        raise OSError(f"cannot write sweep output {exc.filename}: {exc.strerror}") from exc
    return results


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    if "lambda" in data:
        data["lam"] = data.pop("lambda")
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**data)


def with_m(config: ExperimentConfig, m: int | None) -> ExperimentConfig:
    return replace(config, m_override=m)
