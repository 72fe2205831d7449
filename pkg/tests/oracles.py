"""Independent reference implementations used to check the library."""
import math
from itertools import product

import numpy as np


def simpson_by_enumeration(parent_size: int, sub_size: int) -> float:
    """Fraction of ordered draw pairs (with replacement) that disagree on membership."""
    inside = [i < sub_size for i in range(parent_size)]
    disagree = sum(inside[i] != inside[j] for i, j in product(range(parent_size), repeat=2))
    return disagree / parent_size ** 2


def abc_cut_brute_force(values) -> int:
    """Number of A items: scan every cut, keep the first closest to (0, 1)."""
    s = sorted(values, reverse=True)
    n, total = len(s), sum(s)
    best, best_d, cum = 0, math.inf, 0.0
    for i in range(1, n + 1):
        cum += s[i - 1]
        d = math.hypot(i / n, 1.0 - cum / total)
        if d < best_d:
            best, best_d = i, d
    return best


def gaussian_pdf(x, mu, sigma):
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def gaussian_crossovers(mu1, s1, p1, mu2, s2, p2) -> list[float]:
    """Real roots of p1 N(x; mu1, s1) = p2 N(x; mu2, s2), ascending."""
    a = 1 / (2 * s2 ** 2) - 1 / (2 * s1 ** 2)
    b = mu1 / s1 ** 2 - mu2 / s2 ** 2
    c = (mu2 ** 2 / (2 * s2 ** 2) - mu1 ** 2 / (2 * s1 ** 2)
         + math.log((p1 * s2) / (p2 * s1)))
    if abs(a) < 1e-12:
        return [] if b == 0 else [-c / b]
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    r = math.sqrt(disc)
    return sorted([(-b - r) / (2 * a), (-b + r) / (2 * a)])
