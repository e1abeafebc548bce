"""Brute-force reference implementations used as test oracles."""
import math
from fractions import Fraction


def prefix_sums(xs):
    out, running = [], 0
    for x in xs:
        running += x
        out.append(running)
    return out


def percentile_linear(values, q):
    """Linear interpolation between order statistics, exact in rationals."""
    xs = sorted(Fraction(v) for v in values)
    h = Fraction(len(xs) - 1) * Fraction(q) / 100
    lo = math.floor(h)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


def median(values):
    xs = sorted(values)
    n = len(xs)
    mid = n // 2
    return Fraction(xs[mid]) if n % 2 else Fraction(xs[mid - 1] + xs[mid], 2)


def pearson(xs, ys):
    """Definitional PCC with compensated sums taken in reverse order."""
    n = len(xs)
    mx = math.fsum(reversed(xs)) / n
    my = math.fsum(reversed(ys)) / n
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(reversed(xs), reversed(ys)))
    sxx = math.fsum((x - mx) ** 2 for x in reversed(xs))
    syy = math.fsum((y - my) ** 2 for y in reversed(ys))
    return sxy / math.sqrt(sxx) / math.sqrt(syy)
