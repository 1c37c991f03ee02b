"""Paired Wilcoxon signed-rank test and the pairwise comparison table."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

EXACT_LIMIT = 25
ALPHA = 0.05

BETTER = "≻"
WORSE = "≺"
EQUIVALENT = "≡"


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: Fraction  # min(W+, W-)
    w_plus: Fraction
    w_minus: Fraction
    n: int  # non-zero differences
    p_value: float
    significant: bool
    direction: str  # "a", "b" (sample with the lower values) or "equivalent"
    exact: bool


def signed_ranks(a: Sequence, b: Sequence) -> list[Fraction]:
    """Signed mid-ranks of the non-zero paired differences a - b."""
    diffs = [Fraction(x) - Fraction(y) for x, y in zip(a, b)]
    diffs = [d for d in diffs if d != 0]
    order = sorted(range(len(diffs)), key=lambda i: abs(diffs[i]))
    ranks = [Fraction(0)] * len(diffs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and abs(diffs[order[j + 1]]) == abs(diffs[order[i]]):
            j += 1
        mid = Fraction(i + 1 + j + 1, 2)
        for q in range(i, j + 1):
            ranks[order[q]] = mid
        i = j + 1
    return [r if d > 0 else -r for r, d in zip(ranks, diffs)]


def exact_p_value(ranks: Sequence[Fraction]) -> Fraction:
    """Two-sided p from the exact null distribution of W+ (mid-ranks allowed)."""
    doubled = [int(abs(r) * 2) for r in ranks]
    total = sum(doubled)
    w_plus = sum(int(r * 2) for r in ranks if r > 0)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    n_all = 2 ** len(ranks)
    lower = sum(counts[:w_plus + 1])
    upper = sum(counts[w_plus:])
    return min(Fraction(1), Fraction(2 * min(lower, upper), n_all))


def normal_p_value(ranks: Sequence[Fraction]) -> float:
    n = len(ranks)
    w_plus = float(sum(r for r in ranks if r > 0))
    mean = n * (n + 1) / 4
    # tie correction: variance is a quarter of the sum of squared ranks
    var = float(sum(r * r for r in ranks)) / 4
    if var == 0:
        return 1.0
    z = (abs(w_plus - mean) - 0.5) / math.sqrt(var)
    return min(1.0, math.erfc(max(z, 0.0) / math.sqrt(2)))


def wilcoxon_signed_rank(a: Sequence, b: Sequence, alpha: float = ALPHA) -> WilcoxonResult:
    if len(a) != len(b):
        raise ValueError("samples must be paired (equal lengths)")
    if len(a) < 6:
        raise ValueError("need at least 6 pairs")
    ranks = signed_ranks(a, b)
    w_plus = sum((r for r in ranks if r > 0), Fraction(0))
    w_minus = -sum((r for r in ranks if r < 0), Fraction(0))
    n = len(ranks)
    if n == 0:
        return WilcoxonResult(Fraction(0), w_plus, w_minus, 0, 1.0, False, "equivalent", True)
    exact = n <= EXACT_LIMIT
    p = float(exact_p_value(ranks)) if exact else normal_p_value(ranks)
    significant = p < alpha
    if not significant:
        direction = "equivalent"
    else:
        direction = "a" if w_plus < w_minus else "b"
    return WilcoxonResult(min(w_plus, w_minus), w_plus, w_minus, n, p, significant, direction, exact)


def comparison_table(samples: Mapping[str, Sequence], alpha: float = ALPHA) -> list[list[str]]:
    """Pairwise table; a cell is ≻ when the row has significantly lower values than the column."""
    names = list(samples)
    table = [[""] + names]
    for r in names:
        row = [r]
        for c in names:
            if r == c:
                row.append("-")
                continue
            res = wilcoxon_signed_rank(samples[r], samples[c], alpha)
            row.append(BETTER if res.direction == "a" else WORSE if res.direction == "b" else EQUIVALENT)
        table.append(row)
    return table


def format_table(table: list[list[str]]) -> str:
    width = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, width)).rstrip()
                     for row in table) + "\n"
