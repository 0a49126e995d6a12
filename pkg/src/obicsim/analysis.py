"""Pulse detection, pattern classification and distinguisher statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .traces import Scenario, Trace, synthesize_campaign

AMBIGUOUS = "Ambiguous"
TIE_TOL = 1e-12  # µA


class AnalysisError(ValueError):
    pass


class EmptyWindow(AnalysisError):
    pass


class DegenerateVariance(AnalysisError):
    pass


class NoPulseDetected(AnalysisError):
    pass


def detect_pulse_window(trace: Trace, threshold: float) -> tuple[int, int] | None:
    """Longest run of samples strictly above ``threshold`` as inclusive indices.

    The earliest run wins ties; None when no sample exceeds the threshold.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    above = np.asarray(trace.currents) > threshold
    best = None
    start = None
    for i, a in enumerate(np.append(above, False)):
        if a and start is None:
            start = i
        elif not a and start is not None:
            if best is None or (i - 1 - start) > (best[1] - best[0]):
                best = (start, i - 1)
            start = None
    return best


def in_pulse_mean(trace: Trace, window: tuple[int, int]) -> float:
    start, end = window
    if start < 0 or end < start or end >= len(trace.currents):
        raise EmptyWindow(f"window {window} is empty or outside the trace")
    return float(np.mean(trace.currents[start : end + 1]))


def welch_t(a: Sequence[float], b: Sequence[float]) -> float:
    """Welch's unequal-variance t statistic for mean(a) - mean(b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each set needs at least two values")
    # constant sets test on the range; the variance of repeated decimals is
    # round-off, not zero
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        raise DegenerateVariance("both sets have zero variance")
    se2 = a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b)
    return float((a.mean() - b.mean()) / math.sqrt(se2))


@dataclass(frozen=True)
class ClassificationResult:
    decided: str
    score: float
    confidence: float
    mean: float
    window: tuple[int, int]

    @property
    def ambiguous(self) -> bool:
        return self.decided == AMBIGUOUS


def classify_pattern(
    trace: Trace,
    templates: Mapping[str, float],
    noise_amplitude: float = 0.1,
    threshold: float | None = None,
    window: tuple[int, int] | None = None,
) -> ClassificationResult:
    """Nearest-template decision on the in-pulse mean.

    Unless given, the window is detected at the midpoint between the trace's
    median (the laser-off baseline, as the pulse covers under half the
    samples) and the smallest template, so a common offset on trace and
    templates leaves the decision unchanged.  ``confidence`` is
    gap / (gap + noise_amplitude), with gap the distance margin between the two
    nearest templates; it is a bounded heuristic, not a probability.
    """
    if len(templates) < 2:
        raise ValueError("need at least two templates")
    if window is None:
        if threshold is None:
            base = float(np.median(trace.currents))
            window = _detect_relative(trace, base, 0.5 * (min(templates.values()) - base))
        else:
            window = detect_pulse_window(trace, threshold)
        if window is None:
            raise NoPulseDetected("no sample above the detection threshold")
    mean = in_pulse_mean(trace, window)
    dist = sorted((abs(mean - v), k) for k, v in templates.items())
    (d1, k1), (d2, _) = dist[0], dist[1]
    gap = d2 - d1
    if gap <= TIE_TOL:
        return ClassificationResult(AMBIGUOUS, d1, 0.0, mean, window)
    conf = gap / (gap + noise_amplitude)
    return ClassificationResult(k1, d1, conf, mean, window)


def _detect_relative(trace: Trace, base: float, height: float) -> tuple[int, int] | None:
    if not height > 0:
        return None
    shifted = Trace(trace.times, np.asarray(trace.currents) - base)
    return detect_pulse_window(shifted, height)


def vote_accuracy(
    p_single: float, cap: int, n_resamples: int, rng: np.random.Generator, chunk: int = 2000
) -> np.ndarray:
    """Monte-Carlo majority-vote accuracy for N = 1..cap independent votes.

    Each vote is right with probability ``p_single``; a tied vote counts as a
    coin flip (expected 1/2).  Uses one uniform stream so the curve is
    monotone in ``p_single`` for a fixed generator state.
    """
    n = np.arange(1, cap + 1)
    acc = np.zeros(cap)
    done = 0
    while done < n_resamples:
        m = min(chunk, n_resamples - done)
        u = rng.random((m, cap))
        right = np.cumsum(u < p_single, axis=1)
        acc += (2 * right > n).sum(axis=0) + 0.5 * (2 * right == n).sum(axis=0)
        done += m
    return acc / n_resamples


@dataclass(frozen=True)
class DistinguisherEstimate:
    n: int | None
    single_trace_accuracy: float
    accuracy_by_n: np.ndarray
    templates: tuple[float, float]


def estimate_distinguisher(
    sA: Scenario,
    sB: Scenario,
    target_accuracy: float = 0.95,
    cap: int = 100,
    n_resamples: int = 10_000,
    pool: int = 5_000,
    seed: int = 0,
) -> DistinguisherEstimate:
    """Traces needed for a majority vote to tell scenario A from B.

    Simulates ``pool`` traces of each scenario, classifies each against the
    two noise-free in-pulse levels, then resamples majority votes.
    """
    if not 0.5 < target_accuracy < 1:
        raise ValueError("target accuracy must lie in (0.5, 1)")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    lvl_a, lvl_b = sA.expected_total, sB.expected_total
    templates = {"A": lvl_a, "B": lvl_b}
    noise = max(sA.noise.amplitude, sB.noise.amplitude)
    score = 0.0
    seeds = np.random.SeedSequence(seed).generate_state(3, np.uint64)
    for label, s, cs in (("A", sA, seeds[0]), ("B", sB, seeds[1])):
        for tr in synthesize_campaign(s, pool, seed=int(cs)).traces:
            try:
                res = classify_pattern(tr, templates, noise)
            except NoPulseDetected:
                score += 0.5
                continue
            score += 1.0 if res.decided == label else 0.5 if res.ambiguous else 0.0
    p = score / (2 * pool)
    acc = vote_accuracy(p, cap, n_resamples, np.random.default_rng(int(seeds[2])))
    hits = np.nonzero(acc >= target_accuracy)[0]
    n = int(hits[0]) + 1 if len(hits) else None
    return DistinguisherEstimate(n, p, acc, (lvl_a, lvl_b))


def traces_to_distinguish(
    sA: Scenario,
    sB: Scenario,
    target_accuracy: float = 0.95,
    cap: int = 100,
    **kw,
) -> int | None:
    return estimate_distinguisher(sA, sB, target_accuracy, cap, **kw).n


def pulse_statistics(trace: Trace, expected_level: float, spot) -> tuple[tuple[int, int] | None, float]:
    """Detected window and in-pulse mean for one trace.

    Detection looks for a rise of half the expected in-pulse level above the
    baseline (median); without a detectable pulse, or with nothing expected,
    the mean is taken over the samples inside the nominal laser window.
    """
    from .traces import pulse_mask

    base = float(np.median(trace.currents))
    window = _detect_relative(trace, base, 0.5 * expected_level)
    if window is not None:
        return window, in_pulse_mean(trace, window)
    mask = pulse_mask(np.asarray(trace.times), spot)
    return None, float(np.mean(trace.currents[mask])) if mask.any() else 0.0
