import heapq
import itertools
import math

import mpmath
import numpy as np
import pytest

from poissongt.bounds import (
    BoundReport,
    _exponent,
    adaptive_lower_bound,
    constructive_upper_bounds,
    error_exponent,
    fano_error_floor,
    fano_lower_bound,
    huffman_expected_length,
    exponent_lower_bound,
    log2_comb,
    ml_error_bound,
    ml_pe2,
    mutual_info_t1,
    nonadaptive_ml_total_bound,
    semiadaptive_upper_bound,
    source_entropy,
)
from poissongt.dist import BoundedLambda, TruncatedPoissonModel, UnboundedLambda, select_delta


def outcome_probs(model):
    """Probability of every indicator vector, listed explicitly."""
    n = model.n
    return [model.pmf(sum(w)) / math.comb(n, sum(w)) for w in itertools.product((0, 1), repeat=n)]


def heap_huffman(probs):
    """Textbook heap Huffman; returns the expected codeword length."""
    if len(probs) == 1:
        return 0.0
    heap = [(p, i, 0.0) for i, p in enumerate(probs)]
    heapq.heapify(heap)
    counter = len(probs)
    while len(heap) > 1:
        p1, _, c1 = heapq.heappop(heap)
        p2, _, c2 = heapq.heappop(heap)
        heapq.heappush(heap, (p1 + p2, counter, c1 + c2 + p1 + p2))
        counter += 1
    return heap[0][2]


def enumerated_exponent(rho, i, d, p):
    """E_o straight from its definition: T1 in {0,1}^i, T2 in {0,1}^(d-i), Y = OR."""
    total = []
    for t2 in itertools.product((0, 1), repeat=d - i):
        p2 = math.prod(p if b else 1 - p for b in t2)
        for y in (0, 1):
            inner = []
            for t1 in itertools.product((0, 1), repeat=i):
                p1 = math.prod(p if b else 1 - p for b in t1)
                like = 1.0 if int(any(t1) or any(t2)) == y else 0.0
                inner.append(p1 * like ** (1 / (1 + rho)))
            total.append(p2 * math.fsum(inner) ** (1 + rho))
    return -math.log(math.fsum(total))


def test_bound_report_validation():
    with pytest.raises(ValueError):
        BoundReport("x", -1.0, "tests")
    with pytest.raises(ValueError):
        BoundReport("x", float("inf"), "tests")
    with pytest.raises(ValueError):
        BoundReport("x", 1.0, "furlongs")


def test_log2_comb():
    assert log2_comb(1024, 3) == pytest.approx(math.log2(math.comb(1024, 3)), rel=1e-13)
    assert log2_comb(10, 0) == pytest.approx(0.0, abs=1e-12)


def test_fano_examples():
    asym, finite = fano_lower_bound(4, 1024, 0.25)
    assert asym.value == pytest.approx(30.0)
    assert finite.value == pytest.approx(27.41, abs=0.01)
    assert finite.value == pytest.approx(math.log2(math.comb(1024, 3)), rel=1e-12)
    assert fano_lower_bound(4, 1024, 1 - 1e-9)[0].value < 1e-6


@pytest.mark.parametrize("lam,n", [(2, 100), (5, 1000), (20, 10**4), (3.3, 50)])
def test_fano_finite_below_asymptotic_when_ordered(lam, n):
    eps = 0.1
    core = (1 - eps) * lam
    asym, finite = fano_lower_bound(lam, n, eps)
    k = math.ceil(core)
    # C(n, k) <= (n e / k)^k makes this sufficient for the ordering
    if k * math.log2(n * math.e / k) <= core * math.log2(n):
        assert finite.value <= asym.value


def test_fano_ordering_needs_the_e_factor():
    # without the e the condition holds here but the ordering does not
    core = 0.9 * 2
    assert 2 * math.log2(100 / core) <= core * math.log2(100)
    asym, finite = fano_lower_bound(2, 100, 0.1)
    assert finite.value > asym.value


def test_fano_domain():
    for args in [(4, 1024, 0.0), (4, 1024, 1.0), (600, 1000, 0.1)]:
        with pytest.raises(ValueError):
            fano_lower_bound(*args)


def test_fano_error_floor():
    assert fano_error_floor(9, 1024, 1) == pytest.approx(0.0)
    assert fano_error_floor(0, 1024, 3) == pytest.approx(1 - 1 / math.log2(math.comb(1024, 3)))


def test_method2_example():
    reports = constructive_upper_bounds(TruncatedPoissonModel(5, 10**4), UnboundedLambda(0.2))
    by_name = {r.name: r for r in reports}
    raw = 3 / math.log2(3) * 7 * math.log2(10**4)
    assert raw == pytest.approx(176.06, abs=0.01)
    assert by_name["method2_unbounded"].value == math.ceil(raw) == 177
    assert "delta=6" in by_name["method2_unbounded"].assumptions


def test_noisy_at_zero_errors_is_twice_noiseless():
    model = TruncatedPoissonModel(3, 500)
    reports = {r.name: r.value for r in constructive_upper_bounds(model, UnboundedLambda(0.1), v=0)}
    delta = select_delta(model, UnboundedLambda(0.1))
    raw = math.e * (delta + 1) ** 2 * math.log(500)
    assert reports["method1_unbounded"] == math.ceil(raw)
    assert reports["method1_noisy_unbounded"] == math.ceil(2 * raw)


def test_bounded_regime_scaling():
    n = 10**6
    for lam in (3, 6, 12):
        model = TruncatedPoissonModel(lam, n)
        beta = math.log(math.log(n))
        bounded = {r.name: r.value for r in constructive_upper_bounds(model, BoundedLambda(2))}
        k = math.ceil(beta * lam)
        assert bounded["method1_bounded"] == math.ceil(math.e * k * k * math.log(n))
        assert "ml_bounded" in bounded


def test_constructive_requires_two_subjects():
    with pytest.raises(ValueError):
        constructive_upper_bounds(TruncatedPoissonModel(0.5, 1), UnboundedLambda())


@pytest.mark.parametrize("lam,n,expected", [(1, 1, 1.0), (1, 2, 1.9219)])
def test_entropy_examples(lam, n, expected):
    assert source_entropy(TruncatedPoissonModel(lam, n)).value == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize("n", range(1, 13))
@pytest.mark.parametrize("lam", [0.5, 2.0, 7.0])
def test_entropy_matches_enumeration(lam, n):
    model = TruncatedPoissonModel(lam, n)
    probs = outcome_probs(model)
    brute = -math.fsum(p * math.log2(p) for p in probs if p > 0)
    assert abs(source_entropy(model).value - brute) <= 1e-9


@pytest.mark.parametrize("lam,n,expected", [(1, 1, 1.0), (1, 2, 2.0)])
def test_huffman_examples(lam, n, expected):
    assert huffman_expected_length(TruncatedPoissonModel(lam, n)).value == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("n", range(1, 11))
@pytest.mark.parametrize("lam", [0.5, 1.0, 3.0])
def test_huffman_matches_heap_oracle(lam, n):
    model = TruncatedPoissonModel(lam, n)
    got = huffman_expected_length(model).value
    assert got == pytest.approx(heap_huffman(outcome_probs(model)), abs=1e-9)
    h = source_entropy(model).value
    assert h - 1e-12 <= got < h + 1


def test_huffman_size_guard():
    with pytest.raises(ValueError):
        huffman_expected_length(TruncatedPoissonModel(1, 21))


def test_adaptive_and_semiadaptive_examples():
    assert adaptive_lower_bound(10, 1000).value == pytest.approx(66.424, abs=1e-3)
    assert semiadaptive_upper_bound(10, 1000).value == pytest.approx(125.2, abs=0.05)
    ratio = semiadaptive_upper_bound(10, 1000).value / (10 * math.log2(100))
    assert ratio == pytest.approx(math.e / math.log2(math.e))
    assert ratio == pytest.approx(1.884, abs=1e-3)
    assert adaptive_lower_bound(1e-9, 1000).value == pytest.approx(0.0, abs=1e-6)


def test_semiadaptive_dense_regime_warns():
    from poissongt.dist import RegimeWarning

    with pytest.warns(RegimeWarning):
        report = semiadaptive_upper_bound(500, 1000)
    assert report.assumptions


EXP_GRID = [
    (i, d, p, rho)
    for d in range(1, 7)
    for i in range(1, d + 1)
    for p in (0.1, 0.3, 0.5)
    for rho in (0.0, 0.25, 0.5, 1.0)
]


def test_exponent_zero_at_rho_zero():
    for i, d, p, _ in EXP_GRID:
        assert error_exponent(0.0, i, d, p).value == 0.0


def test_exponent_matches_enumeration():
    for i, d, p, rho in EXP_GRID:
        assert abs(error_exponent(rho, i, d, p).value - enumerated_exponent(rho, i, d, p)) <= 1e-12
    assert abs(error_exponent(0.5, 2, 3, 0.3).value - enumerated_exponent(0.5, 2, 3, 0.3)) <= 1e-12


def test_exponent_enumeration_up_to_ten():
    for d in (8, 10):
        for i in (1, d // 2, d):
            assert error_exponent(0.7, i, d, 0.2).value == pytest.approx(
                enumerated_exponent(0.7, i, d, 0.2), abs=1e-12
            )


@pytest.mark.parametrize("i,d,p", [(1, 1, 0.5), (1, 2, 0.5), (2, 3, 0.3), (3, 6, 0.1), (5, 5, 0.05)])
def test_exponent_slope_is_mutual_information(i, d, p):
    h = 1e-4
    f = lambda r: float(_exponent(r, i, d, p))  # noqa: E731
    slope = (f(h) - f(-h)) / (2 * h)
    assert abs(slope - mutual_info_t1(i, d, p)) <= 1e-6


def test_mutual_info_examples():
    assert mutual_info_t1(1, 1, 0.5) == pytest.approx(math.log(2))
    assert mutual_info_t1(1, 2, 0.5) == pytest.approx(0.5 * math.log(2))
    assert mutual_info_t1(1, 3, 1e-12) == pytest.approx(0.0, abs=1e-9)


def test_exponent_monotone_and_concave():
    grid = np.linspace(0, 1, 20)
    for d in range(1, 7):
        for i in range(1, d + 1):
            for p in (0.05, 0.1, 0.3, 0.5, 0.8):
                vals = np.array([error_exponent(r, i, d, p).value for r in grid])
                assert (np.diff(vals) >= -1e-15).all()
                assert (np.diff(vals, 2) <= 1e-15).all()


def test_exponent_lower_bound_on_small_ip_grid():
    checked = 0
    for d in range(1, 30):
        for i in range(1, d + 1):
            for p in (0.0005, 0.001, 0.002, 0.005):
                if p * d > 0.05:
                    continue
                for rho in (0.05, 0.1, 0.25, 0.5, 1.0):
                    lower = exponent_lower_bound(rho, i, d, p)
                    if lower <= 0:
                        continue
                    checked += 1
                    assert lower <= 1.05 * error_exponent(rho, i, d, p).value
    assert checked > 0


def test_exponent_domain():
    for args in [(1.5, 1, 2, 0.3), (0.5, 0, 2, 0.3), (0.5, 3, 2, 0.3), (0.5, 1, 2, 1.0)]:
        with pytest.raises(ValueError):
            error_exponent(*args)


def mp_ml_bound(m, rho, i, d, n, p):
    with mpmath.workdps(50):
        p = mpmath.mpf(p)
        rho = mpmath.mpf(rho)
        q = (1 - p) ** (d - i)
        a = (1 - p) ** i
        e0 = -mpmath.log(1 + q * (a ** (1 + rho) + (1 - a) ** (1 + rho) - 1))
        comb = mpmath.log(mpmath.binomial(n - d, i) * mpmath.binomial(d, i), 2)
        expo = m * e0 / mpmath.log(2) - rho * comb
        return float(min(mpmath.mpf(1), mpmath.power(2, -expo)))


def test_ml_bound_against_high_precision():
    got = ml_error_bound(500, 0.1, 1, 2, 50, 1 / 3)
    ref = mp_ml_bound(500, 0.1, 1, 2, 50, mpmath.mpf(1) / 3)
    assert 0 < got < 1
    assert got == pytest.approx(ref, rel=1e-9)


def test_ml_bound_limits():
    assert ml_error_bound(500, 0.0, 1, 2, 50, 0.3) == 1.0
    assert ml_error_bound(10**6, 0.5, 1, 2, 50, 0.3) == 0.0
    with pytest.raises(ValueError):
        ml_error_bound(10, 0.5, 3, 5, 7, 0.3)


def test_ml_total_bound_monotone_and_limit():
    model = TruncatedPoissonModel(3, 200)
    regime = UnboundedLambda(0.1)
    delta = select_delta(model, regime)
    p = 1 / (delta + 1)
    values = [nonadaptive_ml_total_bound(model, m, p, regime).value for m in (20, 50, 100, 200, 400, 800)]
    assert all(a >= b - 1e-15 for a, b in zip(values, values[1:]))
    huge = nonadaptive_ml_total_bound(model, 10**7, p, regime)
    assert huge.value == pytest.approx(ml_pe2(model, delta), rel=1e-12)


def test_ml_total_bound_pilot_threshold():
    model = TruncatedPoissonModel(20, 10**4)
    regime = UnboundedLambda(0.2)
    gamma = 1.3 / 1.2 - 1
    ml = next(r for r in constructive_upper_bounds(model, regime, gamma=gamma) if r.name.startswith("ml"))
    delta = select_delta(model, regime)
    report = nonadaptive_ml_total_bound(model, int(ml.value), 1 / (delta + 1), regime)
    assert report.value < 0.5
