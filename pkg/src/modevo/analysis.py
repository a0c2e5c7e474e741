"""Comparison of experiment arms: Wilcoxon tests, progression series and reports."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .descriptors import NAMES as DESCRIPTOR_NAMES
from .evolution import RunArchive

EXACT_MAX_N = 25
MIN_N = 5
ALPHA = 0.05
REPORT_METRICS = ("fitness", *DESCRIPTOR_NAMES)
LABELS = {
    "fitness": "Fitness",
    "branching": "Branching",
    "coverage": "Coverage",
    "rel_joints": "Relative number of joints",
    "rel_limbs": "Relative number of limbs",
    "rel_limb_length": "Relative length of limbs",
    "proportion": "Proportion",
    "absolute_size": "Absolute size",
    "symmetry": "Symmetry",
}


class InsufficientSample(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n: int
    method: str


def signed_ranks(differences: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Midranks of |d| for the non-zero differences, and their signs."""
    d = np.asarray(differences, dtype=float)
    d = d[d != 0]
    return stats.rankdata(np.abs(d)), np.sign(d)


def _exact_two_sided(ranks: np.ndarray, w_plus: float) -> float:
    """Two-sided p of W+ under the null, by counting all 2^n sign assignments.

    Midranks are half-integers at worst, so doubled ranks are integers and the
    distribution is a subset-sum count over them.
    """
    doubled = np.rint(2 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in doubled:
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    w = int(round(2 * w_plus))
    denom = 2 ** len(doubled)
    lower = sum(counts[: w + 1])
    upper = sum(counts[w:])
    return min(1.0, 2 * min(lower, upper) / denom)


def wilcoxon_signed_rank(xs: Sequence[float], ys: Sequence[float], min_n: int = MIN_N) -> TestResult:
    """Paired two-sided Wilcoxon signed-rank test; W is the positive rank sum.

    Exact for n <= 25 non-zero differences, normal approximation (with tie
    correction, no continuity correction) above. All-zero differences give p = 1.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("samples must be 1-D and of equal length")
    ranks, signs = signed_ranks(xs - ys)
    n = len(ranks)
    if n == 0:
        return TestResult(0.0, 1.0, 0, "exact")
    if n < min_n:
        raise InsufficientSample(f"{n} non-zero differences, need at least {min_n}")
    w_plus = float(ranks[signs > 0].sum())
    if n <= EXACT_MAX_N:
        return TestResult(w_plus, _exact_two_sided(ranks, w_plus), n, "exact")
    mean = n * (n + 1) / 4
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48
    if var <= 0:
        return TestResult(w_plus, 1.0, n, "normal-approximation")
    z = (w_plus - mean) / math.sqrt(var)
    return TestResult(w_plus, min(1.0, math.erfc(abs(z) / math.sqrt(2))), n, "normal-approximation")


def rank_sum_test(xs: Sequence[float], ys: Sequence[float]) -> TestResult:
    """Unpaired alternative (Mann-Whitney U, two-sided)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.array_equal(np.sort(xs), np.sort(ys)):
        return TestResult(float(len(xs) * len(ys)) / 2, 1.0, len(xs) + len(ys), "rank-sum")
    res = stats.mannwhitneyu(xs, ys, alternative="two-sided")
    return TestResult(float(res.statistic), float(res.pvalue), len(xs) + len(ys), "rank-sum")


# -- arm summaries ----------------------------------------------------------

def run_means(archives: Sequence[RunArchive], metric: str, generation: int = -1) -> np.ndarray:
    return np.array([a.generations[generation].metric(metric).mean() for a in archives])


@dataclass(frozen=True)
class ComparisonRow:
    metric: str
    p_value: float
    statistic: float
    n: int
    method: str

    @property
    def significant(self) -> bool:
        return not math.isnan(self.p_value) and self.p_value < ALPHA


def compare_final_generation(arm_a: Sequence[RunArchive], arm_b: Sequence[RunArchive],
                             paired: bool = True) -> list[ComparisonRow]:
    """One test per metric (fitness + eight descriptors) on per-run final means.

    Paired mode pairs runs by index. Metrics with fewer than five non-zero
    differences are reported with p = nan.
    """
    if not arm_a or not arm_b:
        raise ValueError("both arms need at least one run")
    if paired and len(arm_a) != len(arm_b):
        raise ValueError(f"arm sizes differ ({len(arm_a)} vs {len(arm_b)}); pairing needs equal runs")
    rows = []
    for metric in REPORT_METRICS:
        a, b = run_means(arm_a, metric), run_means(arm_b, metric)
        try:
            res = wilcoxon_signed_rank(a, b) if paired else rank_sum_test(a, b)
        except InsufficientSample as exc:
            rows.append(ComparisonRow(metric, math.nan, math.nan, len(a), f"insufficient: {exc}"))
            continue
        rows.append(ComparisonRow(metric, res.p_value, res.statistic, res.n, res.method))
    return rows


@dataclass(frozen=True)
class SeriesPoint:
    generation: int
    mean: float
    q1: float
    median: float
    q3: float


def progression_series(archives: Sequence[RunArchive], metric: str) -> list[SeriesPoint]:
    """Cross-run mean and quartile envelope of each run's population mean, per generation."""
    if not archives:
        raise ValueError("no archives")
    lengths = {len(a.generations) for a in archives}
    if len(lengths) != 1:
        raise ValueError(f"archives are misaligned (generation counts {sorted(lengths)})")
    out = []
    for g in range(lengths.pop()):
        values = run_means(archives, metric, g)
        q1, med, q3 = np.percentile(values, [25, 50, 75])
        out.append(SeriesPoint(g, float(values.mean()), float(q1), float(med), float(q3)))
    return out


# -- report formats ---------------------------------------------------------

def _fmt_p(p: float) -> str:
    return "n/a" if math.isnan(p) else f"{p:.4g}"


def report_text(rows: Sequence[ComparisonRow], title: str = "A vs. B") -> str:
    width = max(len(LABELS[r.metric]) for r in rows)
    lines = [f"{'':<{width}}  {title}", f"{'':<{width}}  p"]
    for r in rows:
        mark = f"**{_fmt_p(r.p_value)}**" if r.significant else _fmt_p(r.p_value)
        lines.append(f"{LABELS[r.metric]:<{width}}  {mark}")
    lines.append(f"(** marks p < {ALPHA})")
    return "\n".join(lines) + "\n"


def report_csv(rows: Sequence[ComparisonRow]) -> str:
    buf = io.StringIO()
    buf.write("metric,p_value,statistic,n,method,significant\n")
    for r in rows:
        buf.write(f"{r.metric},{r.p_value!r},{r.statistic!r},{r.n},{r.method},{int(r.significant)}\n")
    return buf.getvalue()


def series_csv(series: Sequence[SeriesPoint]) -> str:
    lines = ["generation,mean,q1,median,q3"]
    lines += [f"{p.generation},{p.mean!r},{p.q1!r},{p.median!r},{p.q3!r}" for p in series]
    return "\n".join(lines) + "\n"


def boxplot_csv(arms: dict[str, Sequence[RunArchive]]) -> str:
    """Per-run final-generation means for every metric and arm (long format)."""
    lines = ["arm,run,metric,value"]
    for arm, archives in arms.items():
        for metric in REPORT_METRICS:
            for run, value in enumerate(run_means(archives, metric)):
                lines.append(f"{arm},{run},{metric},{float(value)!r}")
    return "\n".join(lines) + "\n"
