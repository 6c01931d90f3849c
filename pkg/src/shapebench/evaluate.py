"""Evaluation protocol: bin test items by input IoU, score methods per bin,
and mark every method not significantly worse than the per-bin best.

Noisy shapes are grouped into half-open input-IoU bins (the last bin is
closed at its upper edge), each bin is capped by seeded downsampling, and a
method's per-bin score is the mean IoU of its outputs against the clean
shapes. Significance uses a one-sided paired Student t-test whose CDF is
computed from the regularized incomplete beta function.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import BinaryShape, iou
from .seeds import derive_seed

DEFAULT_BIN_EDGES = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
DEFAULT_BIN_CAP = 1000
DEFAULT_ALPHA = 0.05

MethodFn = Callable[["EvalRecord"], BinaryShape]


@dataclass
class EvalRecord:
    """One test item: the clean truth, its noisy version, and method scores."""

    item_id: str
    truth: BinaryShape
    noisy: BinaryShape
    input_iou: float
    noise_kind: str
    output_iou: dict[str, float] = field(default_factory=dict)
    failed: set[str] = field(default_factory=set)

    @classmethod
    def from_shapes(cls, item_id: str, truth: BinaryShape, noisy: BinaryShape,
                    noise_kind: str) -> "EvalRecord":
        return cls(item_id=item_id, truth=truth, noisy=noisy,
                   input_iou=iou(truth, noisy), noise_kind=noise_kind)


@dataclass
class EvalBin:
    """Records whose input IoU falls in [lo, hi), capped by seeded sampling."""

    lo: float
    hi: float
    records: list[EvalRecord]
    cap: int = DEFAULT_BIN_CAP
    sample_seed: int = 0

    @property
    def label(self) -> str:
        return f"{self.lo:g}-{self.hi:g}"


@dataclass(frozen=True)
class SignificanceResult:
    t_stat: float
    df: int
    p_value: float
    significant: bool


def bin_by_input_iou(records: Sequence[EvalRecord],
                     edges: Sequence[float] = DEFAULT_BIN_EDGES,
                     cap: int = DEFAULT_BIN_CAP,
                     seed: int = 0) -> list[EvalBin]:
    """Partition records into input-IoU bins and downsample bins above the cap.

    Bins are half-open [lo, hi) except the final bin, which is closed at its
    upper edge. Records outside [edges[0], edges[-1]] are discarded. Bins
    holding more than ``cap`` records keep a uniform sample without
    replacement drawn from a per-bin seed, so the selection is reproducible.
    """
    e = [float(v) for v in edges]
    if len(e) < 2 or any(b <= a for a, b in zip(e, e[1:])):
        raise ValueError("edges must be strictly increasing with at least two values")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    bins = [
        EvalBin(lo=lo, hi=hi, records=[], cap=cap, sample_seed=derive_seed(seed, i))
        for i, (lo, hi) in enumerate(zip(e, e[1:]))
    ]
    for rec in records:
        v = rec.input_iou
        if v < e[0] or v > e[-1]:
            continue
        idx = min(bisect_right(e, v) - 1, len(bins) - 1)
        bins[idx].records.append(rec)
    for b in bins:
        if len(b.records) > cap:
            rng = np.random.Generator(np.random.PCG64(b.sample_seed))
            keep = np.sort(rng.choice(len(b.records), size=cap, replace=False))
            b.records = [b.records[j] for j in keep]
    return bins


def as_record_fn(fn: Callable[[BinaryShape], BinaryShape]) -> MethodFn:
    """Adapt a shape -> shape denoiser to the per-record interface."""
    return lambda rec: fn(rec.noisy)


def evaluate_method(name: str, method_fn: MethodFn,
                    bins: Sequence[EvalBin]) -> list[float]:
    """Score a method on every bin; returns the per-bin mean output IoU.

    Per-record scores are stored on the records for significance testing. A
    record on which the method raises scores 0 and is flagged, never dropped.
    Empty bins yield NaN.
    """
    if not bins:
        raise ValueError("no bins to evaluate")
    means = []
    for b in bins:
        vals = []
        for rec in b.records:
            try:
                score = iou(method_fn(rec), rec.truth)
            except Exception:
                score = 0.0
                rec.failed.add(name)
            rec.output_iou[name] = score
            vals.append(score)
        means.append(float(np.mean(vals)) if vals else float("nan"))
    return means


def bin_scores(b: EvalBin, method_names: Sequence[str]) -> dict[str, list[float]]:
    """Per-method per-record IoUs of one bin, aligned by record order."""
    return {name: [rec.output_iou[name] for rec in b.records] for name in method_names}


def _beta_continued_fraction(a: float, b: float, x: float,
                             max_iter: int = 300, eps: float = 1e-15) -> float:
    # Modified Lentz evaluation of the incomplete beta continued fraction.
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via the continued fraction, accurate to ~1e-14."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(ln_front) * _beta_continued_fraction(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: int) -> float:
    """CDF of Student's t distribution with ``df`` degrees of freedom."""
    if df < 1:
        raise ValueError("df must be >= 1")
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return 1.0 - tail if t >= 0 else tail


def paired_one_sided_t_test(candidate: Sequence[float], best: Sequence[float],
                            alpha: float = DEFAULT_ALPHA) -> SignificanceResult:
    """One-sided paired t-test of whether ``best`` beats ``candidate``.

    With differences d = best - candidate, the statistic is
    mean(d) / (sd(d) / sqrt(n)) using the sample standard deviation, and the
    p-value is the upper tail at n - 1 degrees of freedom. ``significant``
    means the candidate is significantly worse than the best. Zero-variance
    differences degenerate to p = 0 (mean > 0), p = 0.5 (mean = 0, the t = 0
    limit), or p = 1 (mean < 0).
    """
    x = np.asarray(candidate, dtype=np.float64)
    y = np.asarray(best, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("candidate and best must be equal-length 1-D sequences")
    n = x.size
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    d = y - x
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0:
        if mean > 0:
            return SignificanceResult(math.inf, df, 0.0, 0.0 < alpha)
        if mean < 0:
            return SignificanceResult(-math.inf, df, 1.0, False)
        return SignificanceResult(0.0, df, 0.5, 0.5 < alpha)
    t = mean / (sd / math.sqrt(n))
    p = 1.0 - student_t_cdf(t, df)
    return SignificanceResult(float(t), df, float(p), bool(p < alpha))


def mark_best(scores: Mapping[str, Sequence[float]],
              alpha: float = DEFAULT_ALPHA) -> set[str]:
    """Names of all methods not significantly worse than the best mean.

    The best method is the argmax of the mean score (ties resolve to the
    lexicographically first name; tied methods bold each other through the
    zero-difference test). With a single record per method no difference can
    be significant, so every method is kept.
    """
    if not scores:
        raise ValueError("mark_best needs at least one method")
    names = sorted(scores)
    lengths = {len(scores[nm]) for nm in names}
    if len(lengths) != 1:
        raise ValueError("all methods must share the same record set")
    n = lengths.pop()
    if n == 0:
        raise ValueError("cannot mark best on an empty record set")
    means = {nm: float(np.mean(scores[nm])) for nm in names}
    best_mean = max(means.values())
    best = next(nm for nm in names if means[nm] == best_mean)
    bold = {best}
    for nm in names:
        if nm == best:
            continue
        if n < 2 or not paired_one_sided_t_test(scores[nm], scores[best], alpha).significant:
            bold.add(nm)
    return bold
