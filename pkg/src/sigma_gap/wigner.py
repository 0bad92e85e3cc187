"""Wigner 3j symbols from the Racah sum in exact rational arithmetic."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

from .halfint import HalfInt


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol ``(j1 j2 j3; m1 m2 m3)`` with Condon-Shortley phases.

    Arguments may be anything :class:`HalfInt` accepts. The Racah sum is
    evaluated with integer factorials, the square of the result is formed as
    an exact fraction, and only the final square root is taken in floating
    point. Symbols that violate a selection rule are exactly ``0.0``.
    """
    args = tuple(HalfInt(x).twice for x in (j1, j2, j3, m1, m2, m3))
    return _wigner3j_twice(*args)


@lru_cache(maxsize=65536)
def _wigner3j_twice(tj1, tj2, tj3, tm1, tm2, tm3) -> float:
    if tm1 + tm2 + tm3 != 0:
        return 0.0
    if min(tj1, tj2, tj3) < 0:
        return 0.0
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tm3) > tj3:
        return 0.0
    # j and m must share parity
    if (tj1 - tm1) % 2 or (tj2 - tm2) % 2 or (tj3 - tm3) % 2:
        return 0.0
    if tj3 > tj1 + tj2 or tj3 < abs(tj1 - tj2):
        return 0.0
    if (tj1 + tj2 + tj3) % 2:
        return 0.0

    # all combinations below are integers once the checks above pass
    a = (tj1 + tj2 - tj3) // 2
    b = (tj1 - tj2 + tj3) // 2
    c = (-tj1 + tj2 + tj3) // 2
    big = (tj1 + tj2 + tj3) // 2 + 1
    j1pm1, j1mm1 = (tj1 + tm1) // 2, (tj1 - tm1) // 2
    j2pm2, j2mm2 = (tj2 + tm2) // 2, (tj2 - tm2) // 2
    j3pm3, j3mm3 = (tj3 + tm3) // 2, (tj3 - tm3) // 2

    # bounds of the summation index
    t1 = (tj2 - tj3 - tm1) // 2  # (j3 - j2 + m1 + k) >= 0
    t2 = (tj1 - tj3 + tm2) // 2  # (j3 - j1 - m2 + k) >= 0
    kmin = max(0, t1, t2)
    kmax = min(a, j1mm1, j2pm2)
    if kmin > kmax:
        return 0.0

    fact = math.factorial
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        denom = (
            fact(k)
            * fact(k - t1)
            * fact(k - t2)
            * fact(a - k)
            * fact(j1mm1 - k)
            * fact(j2pm2 - k)
        )
        total += Fraction(-1 if k % 2 else 1, denom)
    if total == 0:
        return 0.0

    prefactor = Fraction(
        fact(a) * fact(b) * fact(c)
        * fact(j1pm1) * fact(j1mm1) * fact(j2pm2) * fact(j2mm2) * fact(j3pm3) * fact(j3mm3),
        fact(big),
    )
    square = total * total * prefactor
    value = math.sqrt(square)
    # overall phase (-1)^(j1 - j2 - m3)
    phase_exp = (tj1 - tj2 - tm3) // 2
    sign = -1.0 if (phase_exp % 2) ^ (total < 0) else 1.0
    return sign * value
