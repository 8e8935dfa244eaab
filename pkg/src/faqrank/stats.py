"""Paired significance tests between per-query metric values.

Both tests compare a candidate system against a baseline on the same
query set. The t test computes its two-sided p-value from the Student t
distribution through the regularized incomplete beta function (continued
fraction, no external stats dependency); the Wilcoxon signed-rank test
uses the exact null distribution up to a configurable sample size and the
tie-corrected normal approximation above it.

Markers follow the convention: beta for p < 0.01, alpha for p < 0.05.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from faqrank.errors import ConfigError, DataError
from faqrank.eval import MetricReport

MARKER_NONE = "none"
MARKER_ALPHA = "alpha"
MARKER_BETA = "beta"

EXACT_WILCOXON_CUTOFF = 25


@dataclass(frozen=True)
class PairedSample:
    """Per-query values of a baseline and a candidate over identical queries."""

    baseline: dict[str, float]
    candidate: dict[str, float]

    def __post_init__(self):
        if set(self.baseline) != set(self.candidate):
            raise DataError("paired sample requires identical query-id sets")
        if len(self.baseline) < 2:
            raise DataError("paired sample needs at least 2 queries")

    def differences(self) -> list[float]:
        return [self.candidate[qid] - self.baseline[qid] for qid in sorted(self.baseline)]


@dataclass(frozen=True)
class SignificanceResult:
    test: str
    statistic: float
    p_value: float
    n_effective: int
    marker: str
    degenerate: bool = False


def mark_significance(p: float) -> str:
    """beta for p < 0.01, alpha for 0.01 <= p < 0.05, none otherwise."""
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p-value must lie in [0, 1], got {p}")
    if p < 0.01:
        return MARKER_BETA
    if p < 0.05:
        return MARKER_ALPHA
    return MARKER_NONE


# --- regularized incomplete beta / Student t ---------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
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
        if abs(delta - 1.0) < 1e-15:
            return h
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ConfigError("incomplete beta requires a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ConfigError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: int) -> float:
    """P(|T_df| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)."""
    if df < 1:
        raise ConfigError(f"degrees of freedom must be >= 1, got {df}")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def student_t_cdf(t: float, df: int) -> float:
    """Cumulative distribution of the Student t."""
    p_two = student_t_two_sided_p(t, df)
    return 1.0 - p_two / 2.0 if t >= 0 else p_two / 2.0


# --- the paired tests ---------------------------------------------------------


def paired_t_test(sample: PairedSample) -> SignificanceResult:
    """Two-sided paired t test on candidate - baseline differences.

    Conventions for degenerate inputs: all differences zero gives t = 0,
    p = 1; zero spread around a nonzero mean gives p = 0 with the
    degenerate flag set.
    """
    diffs = sample.differences()
    n = len(diffs)
    mean = math.fsum(diffs) / n
    var = math.fsum((d - mean) ** 2 for d in diffs) / (n - 1)
    sd = math.sqrt(var)
    if sd == 0.0:
        if mean == 0.0:
            return SignificanceResult("paired_t", 0.0, 1.0, n, MARKER_NONE)
        statistic = math.copysign(math.inf, mean)
        return SignificanceResult("paired_t", statistic, 0.0, n, MARKER_BETA, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    p = student_t_two_sided_p(t, n - 1)
    return SignificanceResult("paired_t", t, p, n, mark_significance(p))


def _rank_with_ties(values: list[float]) -> list[float]:
    """Ascending ranks, mean rank assigned within tied groups."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j + 2) / 2.0  # ranks are 1-based
        for pos in range(i, j + 1):
            ranks[order[pos]] = mean_rank
        i = j + 1
    return ranks


def _exact_wilcoxon_p(doubled_ranks: list[int], doubled_w: int) -> float:
    """Exact two-sided p over all 2^n sign assignments.

    Counts sign patterns by the distribution of the one-sided rank sum
    (dynamic program over doubled ranks, which are integers even under
    mean-rank ties), then doubles the lower-tail mass.
    """
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled_ranks:
        nxt = counts.copy()
        for s in range(r, total + 1):
            nxt[s] += counts[s - r]
        counts = nxt
    patterns = 2 ** len(doubled_ranks)
    lower = sum(counts[: doubled_w + 1])
    return min(1.0, 2.0 * lower / patterns)


def _normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def wilcoxon_signed_rank(
    sample: PairedSample, exact_cutoff: int = EXACT_WILCOXON_CUTOFF
) -> SignificanceResult:
    """Two-sided Wilcoxon signed-rank test, zero differences dropped.

    W is the smaller of the positive/negative rank sums. Exact p by
    enumeration of sign assignments up to ``exact_cutoff`` nonzero
    differences; beyond that, the normal approximation with tie-corrected
    variance and continuity correction.
    """
    diffs = [d for d in sample.differences() if d != 0.0]
    if not diffs:
        raise DataError("no nonzero differences")
    n = len(diffs)
    ranks = _rank_with_ties([abs(d) for d in diffs])
    w_plus = math.fsum(r for d, r in zip(diffs, ranks) if d > 0)
    w_minus = math.fsum(r for d, r in zip(diffs, ranks) if d < 0)
    w = min(w_plus, w_minus)

    if n <= exact_cutoff:
        doubled = [round(2 * r) for r in ranks]
        p = _exact_wilcoxon_p(doubled, round(2 * w))
    else:
        tie_term = 0.0
        seen: dict[float, int] = {}
        for d in diffs:
            seen[abs(d)] = seen.get(abs(d), 0) + 1
        for t in seen.values():
            tie_term += t ** 3 - t
        var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
        sigma = math.sqrt(var)
        z = (w - n * (n + 1) / 4.0 + 0.5) / sigma
        p = min(1.0, 2.0 * _normal_cdf(z))
    return SignificanceResult("wilcoxon", w, p, n, mark_significance(p))


# --- significance tables -------------------------------------------------------


def significance_table(
    baseline: MetricReport, candidates: list[MetricReport]
) -> dict:
    """Run both paired tests for every candidate system and metric.

    A candidate identical to the baseline leaves the Wilcoxon test without
    nonzero differences; that metric's entry records the condition instead
    of a result.
    """
    table: dict = {
        "baseline": baseline.tag,
        "metrics": list(baseline.aggregate),
        "systems": {},
    }
    for report in candidates:
        if report.tag == baseline.tag:
            continue
        system: dict = {}
        for metric in baseline.aggregate:
            if metric not in report.per_query:
                raise DataError(f"report '{report.tag}' lacks metric '{metric}'")
            base_values = baseline.per_query[metric]
            cand_values = report.per_query[metric]
            if set(base_values) != set(cand_values):
                raise DataError(
                    f"reports '{baseline.tag}' and '{report.tag}' cover different queries for '{metric}'"
                )
            sample = PairedSample(baseline=base_values, candidate=cand_values)
            t_res = paired_t_test(sample)
            entry = {
                "mean": report.aggregate[metric],
                "baseline_mean": baseline.aggregate[metric],
                "tests": {"paired_t": _result_dict(t_res)},
            }
            try:
                w_res = wilcoxon_signed_rank(sample)
                entry["tests"]["wilcoxon"] = _result_dict(w_res)
            except DataError as exc:
                entry["tests"]["wilcoxon"] = {"error": str(exc)}
            system[metric] = entry
        table["systems"][report.tag] = system
    return table


def _result_dict(result: SignificanceResult) -> dict:
    return {
        "statistic": result.statistic,
        "p_value": result.p_value,
        "n_effective": result.n_effective,
        "marker": result.marker,
        "degenerate": result.degenerate,
    }


_MARKER_GLYPH = {MARKER_ALPHA: "α", MARKER_BETA: "β", MARKER_NONE: "-"}


def render_significance_table(table: dict, baseline: MetricReport | None = None) -> str:
    """Aligned plain-text table with per-test significance superscripts.

    Cell format is ``mean^t/w`` where t and w are the paired-t and
    Wilcoxon markers (alpha, beta, or - for not significant).
    """
    metrics = table["metrics"]
    rows: list[list[str]] = []
    if baseline is not None:
        rows.append([baseline.tag] + [f"{baseline.aggregate[m]:.4f}" for m in metrics])
    for tag, system in table["systems"].items():
        cells = [tag]
        for metric in metrics:
            entry = system[metric]
            t_marker = entry["tests"]["paired_t"]["marker"]
            w_test = entry["tests"]["wilcoxon"]
            w_marker = w_test["marker"] if "marker" in w_test else MARKER_NONE
            sup = f"^{_MARKER_GLYPH[t_marker]}/{_MARKER_GLYPH[w_marker]}"
            if t_marker == MARKER_NONE and w_marker == MARKER_NONE:
                sup = ""
            cells.append(f"{entry['mean']:.4f}{sup}")
        rows.append(cells)
    header = ["system"] + metrics
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i]) for i in range(len(header))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    lines.append("")
    lines.append(
        f"baseline: {table['baseline']}; superscripts paired-t/wilcoxon; "
        "α: p<0.05, β: p<0.01"
    )
    return "\n".join(lines) + "\n"
