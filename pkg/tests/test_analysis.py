import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats

from obicsim.analysis import (
    AMBIGUOUS,
    DegenerateVariance,
    EmptyWindow,
    NoPulseDetected,
    classify_pattern,
    detect_pulse_window,
    estimate_distinguisher,
    in_pulse_mean,
    pulse_statistics,
    traces_to_distinguish,
    vote_accuracy,
    welch_t,
)
from obicsim.photo import ObicParams
from obicsim.traces import Trace, synthesize_campaign

TEMPLATES = {"01": 0.81, "11": 0.75}


def _trace(currents):
    c = np.asarray(currents, dtype=float)
    return Trace(11.0 * np.arange(len(c)), c)


def _step(level, start=6, end=15, n=25, noise=None):
    c = np.zeros(n)
    c[start:end + 1] = level
    if noise is not None:
        c = c + noise
    return _trace(c)


# --- pulse window ----------------------------------------------------------


def test_detect_examples():
    rng = np.random.default_rng(0)
    assert detect_pulse_window(_trace(rng.uniform(-0.1, 0.1, 25)), 0.3) is None
    assert detect_pulse_window(_step(0.75), 0.3) == (6, 15)
    assert detect_pulse_window(_trace(np.full(25, 1.0)), 0.3) == (0, 24)
    with pytest.raises(ValueError):
        detect_pulse_window(_step(0.75), 0.0)


def test_detect_longest_then_earliest():
    c = np.zeros(25)
    c[2:4] = 1
    c[10:15] = 1
    assert detect_pulse_window(_trace(c), 0.5) == (10, 14)
    c = np.zeros(25)
    c[2:5] = 1
    c[10:13] = 1
    assert detect_pulse_window(_trace(c), 0.5) == (2, 4)


def test_detect_is_strict():
    assert detect_pulse_window(_trace([0.3, 0.3, 0.3]), 0.3) is None


# --- in-pulse mean ---------------------------------------------------------


def test_in_pulse_mean_examples():
    assert in_pulse_mean(_step(0.81), (6, 15)) == pytest.approx(0.81, abs=1e-15)
    t = _trace([0.1, 0.2, 0.7])
    assert in_pulse_mean(t, (2, 2)) == 0.7
    for w in ((3, 2), (-1, 2), (0, 3)):
        with pytest.raises(EmptyWindow):
            in_pulse_mean(t, w)


def test_campaign_mean_of_means(make_scenario):
    s = make_scenario("11")
    ts = synthesize_campaign(s, 1000, seed=3)
    means = [pulse_statistics(tr, s.expected_total, s.spot)[1] for tr in ts.traces]
    assert np.mean(means) == pytest.approx(0.75, abs=0.01)


# --- Welch -----------------------------------------------------------------


def _welch_by_hand(a, b):
    na, nb = len(a), len(b)
    ma, mb = sum(a) / na, sum(b) / nb
    va = sum((x - ma) ** 2 for x in a) / (na - 1)
    vb = sum((x - mb) ** 2 for x in b) / (nb - 1)
    return (ma - mb) / math.sqrt(va / na + vb / nb)


def test_welch_examples():
    with pytest.raises(DegenerateVariance):
        welch_t([0.8, 0.8, 0.8], [0.8, 0.8])
    assert welch_t([1, 2, 3], [1, 2, 3]) == 0.0
    a, b = [0.80, 0.82, 0.81], [0.74, 0.76, 0.75]
    # means 0.81 and 0.75, variances 1e-4 each: t = 0.06 / sqrt(2e-4 / 3)
    assert welch_t(a, b) == pytest.approx(0.06 / math.sqrt(2e-4 / 3), rel=1e-9)
    assert welch_t(a, b) == pytest.approx(_welch_by_hand(a, b), rel=1e-12)
    with pytest.raises(ValueError):
        welch_t([1.0], [1.0, 2.0])


_samples = st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=30)


@given(_samples, _samples)
def test_welch_against_scipy_and_antisymmetric(a, b):
    assume(np.ptp(a) > 1e-3 and np.ptp(b) > 1e-3)
    t = welch_t(a, b)
    assert t == pytest.approx(stats.ttest_ind(a, b, equal_var=False).statistic, rel=1e-7, abs=1e-9)
    assert welch_t(b, a) == -t


# --- classification --------------------------------------------------------


def test_classify_examples():
    r = classify_pattern(_step(0.80), TEMPLATES)
    assert r.decided == "01"
    assert r.window == (6, 15)
    assert r.score == pytest.approx(0.01)
    assert 0 < r.confidence < 1
    assert classify_pattern(_step(0.78), TEMPLATES).decided == AMBIGUOUS


def test_classify_noise_free_scenario(make_scenario):
    s = make_scenario("11", amplitude=0.0)
    tr = synthesize_campaign(s, 1, seed=0).traces[0]
    r = classify_pattern(tr, TEMPLATES, noise_amplitude=0.0)
    assert r.decided == "11"
    assert r.confidence == 1.0


def test_classify_errors():
    with pytest.raises(NoPulseDetected):
        classify_pattern(_trace(np.zeros(25)), TEMPLATES)
    with pytest.raises(ValueError):
        classify_pattern(_step(0.8), {"01": 0.81})


def test_classify_explicit_threshold():
    r = classify_pattern(_step(0.76), TEMPLATES, threshold=0.4)
    assert (r.decided, r.window) == ("11", (6, 15))


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0.6, 1.0),
    st.floats(-5, 5),
    st.lists(st.floats(-0.1, 0.1), min_size=25, max_size=25),
)
def test_common_mode_invariance(level, c, noise):
    tr = _step(level, noise=np.array(noise))
    base = classify_pattern(tr, TEMPLATES)
    assume(abs(abs(base.mean - 0.81) - abs(base.mean - 0.75)) > 1e-9)
    shifted = classify_pattern(_trace(tr.currents + c), {k: v + c for k, v in TEMPLATES.items()})
    assert shifted.decided == base.decided


# --- majority vote ---------------------------------------------------------


def _exact_vote(p, n):
    k = np.arange(n + 1)
    pmf = stats.binom.pmf(k, n, p)
    return pmf[2 * k > n].sum() + 0.5 * pmf[2 * k == n].sum()


@pytest.mark.parametrize("p", [0.55, 0.7, 0.94])
def test_vote_accuracy_matches_binomial(p):
    acc = vote_accuracy(p, 15, 40_000, np.random.default_rng(1))
    exact = np.array([_exact_vote(p, n) for n in range(1, 16)])
    assert np.max(np.abs(acc - exact)) < 0.01


def test_vote_accuracy_monotone_in_p():
    a = vote_accuracy(0.6, 20, 5000, np.random.default_rng(2))
    b = vote_accuracy(0.7, 20, 5000, np.random.default_rng(2))
    assert np.all(b >= a)


# --- traces to distinguish -------------------------------------------------

FAST = {"n_resamples": 10_000, "pool": 1500}


def _scaled(make_scenario, pattern, k, amplitude):
    s = make_scenario(pattern, amplitude=amplitude)
    p = s.params
    return s.with_(params=ObicParams(p.p_th, p.p_k, p.i_sat * k, p.kappa))


def test_zero_noise_needs_one(make_scenario):
    a, b = make_scenario("01", amplitude=0.0), make_scenario("11", amplitude=0.0)
    assert traces_to_distinguish(a, b, 0.95, 10, **FAST) == 1


def test_huge_noise_exceeds_cap(make_scenario):
    a, b = make_scenario("01", amplitude=1e6), make_scenario("11", amplitude=1e6)
    assert traces_to_distinguish(a, b, 0.95, 10, **FAST) is None


def test_identical_patterns_indistinguishable(make_scenario):
    a = make_scenario("01")
    est = estimate_distinguisher(a, a, 0.95, 20, **FAST)
    assert est.n is None
    assert est.single_trace_accuracy == pytest.approx(0.5, abs=1e-12)


def test_monotone_in_noise(make_scenario):
    ns = []
    for amp in (0.02, 0.1, 0.2, 0.4):
        a, b = make_scenario("01", amplitude=amp), make_scenario("11", amplitude=amp)
        ns.append(traces_to_distinguish(a, b, 0.95, 200, **FAST))
    assert ns[0] == 1
    assert ns == sorted(ns)
    assert ns[-1] > ns[1]


def test_monotone_in_gap(make_scenario):
    ns = []
    for k in (0.5, 1.0, 2.0, 4.0):
        a, b = _scaled(make_scenario, "01", k, 0.1), _scaled(make_scenario, "11", k, 0.1)
        ns.append(traces_to_distinguish(a, b, 0.95, 200, **FAST))
    assert ns == sorted(ns, reverse=True)
    assert ns[0] > ns[-1]


def test_distinguisher_arguments(make_scenario):
    a, b = make_scenario("01"), make_scenario("11")
    with pytest.raises(ValueError):
        traces_to_distinguish(a, b, 0.5, 10)
    with pytest.raises(ValueError):
        traces_to_distinguish(a, b, 0.95, 0)


def test_pipeline_ordering_over_seeds(make_scenario):
    """mean('01') - mean('11') > 0 for 3-trace campaigns at 7 %, over 1000 seeds."""
    a, b = make_scenario("01"), make_scenario("11")
    wins = 0
    for seed in range(1000):
        ma = np.mean([pulse_statistics(t, b.expected_total, a.spot)[1] for t in synthesize_campaign(a, 3, seed=seed).traces])
        mb = np.mean([pulse_statistics(t, b.expected_total, b.spot)[1] for t in synthesize_campaign(b, 3, seed=seed + 10_000).traces])
        wins += ma > mb
    assert wins >= 999


def test_pulse_statistics_fallback(make_scenario):
    s = make_scenario("01", power=0.0)
    tr = synthesize_campaign(s, 1, seed=0).traces[0]
    window, mean = pulse_statistics(tr, 0.0, s.spot)
    assert window is None
    assert abs(mean) <= 0.1
