"""Fisher's exact test on 2x2 tables, two-sample t-tests and Cohen's d."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.stats import t as t_dist

# relative slack when deciding whether a table is "as extreme" as the observed one
TIE_TOLERANCE = 1e-7

TTEST_VARIANTS = ("pooled", "welch")


@dataclass(frozen=True)
class ContingencyTable:
    """Correct/incorrect counts for original (a, b) and mutant (c, d) instances."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for name in "abcd":
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"count {name}={v!r} must be a non-negative integer")
            object.__setattr__(self, name, int(v))
        if self.a + self.b < 1 or self.c + self.d < 1:
            raise ValueError("each row of the table needs at least one instance")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    def swap_rows(self) -> "ContingencyTable":
        return ContingencyTable(self.c, self.d, self.a, self.b)

    def swap_columns(self) -> "ContingencyTable":
        return ContingencyTable(self.b, self.a, self.d, self.c)


@dataclass(frozen=True)
class TestResult:
    p_value: float
    statistic: float | None = None
    effect_size: float | None = None

    __test__ = False  # keep pytest from collecting this as a test class


class _LogFactorials:
    """Grow-only table of log(k!) for k = 0..n, shared across threads."""

    def __init__(self, initial: int = 1024):
        self._lock = threading.Lock()
        self._table = special.gammaln(np.arange(initial + 1, dtype=float) + 1.0)

    def upto(self, n: int) -> np.ndarray:
        table = self._table
        if n < table.size:
            return table
        with self._lock:
            if n >= self._table.size:
                size = max(n + 1, 2 * self._table.size)
                self._table = special.gammaln(np.arange(size, dtype=float) + 1.0)
            return self._table


_logfac = _LogFactorials()


def _log_binom(lf: np.ndarray, n, k):
    return lf[n] - lf[k] - lf[n - k]


def _support(t: ContingencyTable) -> tuple[int, int, int, int, int]:
    row1, row2, col1 = t.a + t.b, t.c + t.d, t.a + t.c
    return row1, row2, col1, max(0, col1 - row2), min(row1, col1)


def hypergeom_point_prob(t: ContingencyTable) -> float:
    """Probability of the observed table given its margins.

    ``C(a+b, a) * C(c+d, c) / C(a+b+c+d, a+c)``, evaluated in log space.
    """
    lf = _logfac.upto(t.n)
    logp = _log_binom(lf, t.a + t.b, t.a) + _log_binom(lf, t.c + t.d, t.c) - _log_binom(lf, t.n, t.a + t.c)
    return min(1.0, math.exp(logp))


def _support_probs(t: ContingencyTable) -> tuple[np.ndarray, np.ndarray]:
    row1, row2, col1, lo, hi = _support(t)
    lf = _logfac.upto(t.n)
    x = np.arange(lo, hi + 1)
    logp = _log_binom(lf, row1, x) + _log_binom(lf, row2, col1 - x) - _log_binom(lf, t.n, col1)
    return x, np.exp(logp)


def fisher_exact(t: ContingencyTable, alternative: str = "two-sided") -> TestResult:
    """Fisher's exact test for a 2x2 table.

    The two-sided p-value sums the point probabilities of every table with the
    same margins that is no more probable than the observed one.
    ``alternative="greater"`` gives the one-sided p-value for the original
    being correct more often than the mutant (tables with top-left >= a).
    """
    x, probs = _support_probs(t)
    if alternative == "two-sided":
        p_obs = probs[t.a - x[0]]
        p = probs[probs <= p_obs * (1.0 + TIE_TOLERANCE)].sum()
    elif alternative == "greater":
        p = probs[x >= t.a].sum()
    elif alternative == "less":
        p = probs[x <= t.a].sum()
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return TestResult(p_value=float(min(1.0, p)))


def _sample(x) -> tuple[int, float, float]:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("each sample needs at least two values")
    mean = float(x.mean())
    # exact zero for constant samples; the two-pass formula leaves rounding residue
    var = 0.0 if x.max() == x.min() else float(x.var(ddof=1))
    return x.size, mean, var


def _signed_inf(diff: float) -> float:
    return math.copysign(math.inf, diff)


def cohens_d(x, y) -> float:
    """Standardized mean difference ``(mean(x) - mean(y)) / s_pooled``.

    Zero pooled variance gives 0 for equal means and a signed infinity otherwise.
    """
    n1, m1, v1 = _sample(x)
    n2, m2, v2 = _sample(y)
    diff = m1 - m2
    sp = math.sqrt(((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2))
    if sp == 0.0:
        return 0.0 if diff == 0.0 else _signed_inf(diff)
    return diff / sp


def two_sample_ttest(x, y, variant: str = "pooled") -> TestResult:
    """Two-sided two-sample t-test; ``statistic`` is positive when mean(x) > mean(y).

    ``effect_size`` carries Cohen's d for the same pair. Samples with zero
    variance on both sides and different means are perfectly separated and
    get p = 0 with an infinite statistic.
    """
    n1, m1, v1 = _sample(x)
    n2, m2, v2 = _sample(y)
    diff = m1 - m2
    if variant == "pooled":
        df = n1 + n2 - 2
        sp2 = ((n1 - 1) * v1 + (n2 - 1) * v2) / df
        se = math.sqrt(sp2 * (1.0 / n1 + 1.0 / n2))
    elif variant == "welch":
        q1, q2 = v1 / n1, v2 / n2
        se = math.sqrt(q1 + q2)
        df = (q1 + q2) ** 2 / (q1**2 / (n1 - 1) + q2**2 / (n2 - 1)) if se > 0 else math.nan
    else:
        raise ValueError(f"unknown t-test variant {variant!r}")

    d = cohens_d(x, y)
    if se == 0.0:
        if diff == 0.0:
            return TestResult(p_value=1.0, statistic=0.0, effect_size=d)
        return TestResult(p_value=0.0, statistic=_signed_inf(diff), effect_size=d)
    stat = diff / se
    p = 2.0 * float(t_dist.sf(abs(stat), df))
    return TestResult(p_value=min(1.0, p), statistic=stat, effect_size=d)
