"""Exact half-integer arithmetic for angular-momentum quantum numbers."""

from __future__ import annotations

import functools
from fractions import Fraction
from numbers import Rational


@functools.total_ordering
class HalfInt:
    """A number of the form k/2 stored as the integer ``twice = k``.

    Construct from an int, a Fraction, a string like ``"3/2"``, or a float
    that is an exact multiple of 1/2.

    >>> HalfInt("3/2") + HalfInt(1)
    HalfInt('5/2')
    """

    __slots__ = ("twice",)

    def __init__(self, value=0):
        if isinstance(value, HalfInt):
            twice = value.twice
        elif isinstance(value, bool):
            raise TypeError("bool is not a half-integer")
        elif isinstance(value, int):
            twice = 2 * value
        elif isinstance(value, str):
            twice = _twice_from_fraction(Fraction(value.strip()))
        elif isinstance(value, Rational):
            twice = _twice_from_fraction(Fraction(value))
        elif isinstance(value, float):
            if not (2 * value).is_integer():
                raise ValueError(f"{value!r} is not a multiple of 1/2")
            twice = int(2 * value)
        else:
            raise TypeError(f"cannot build HalfInt from {type(value).__name__}")
        object.__setattr__(self, "twice", int(twice))

    @classmethod
    def from_twice(cls, twice: int) -> HalfInt:
        out = cls.__new__(cls)
        object.__setattr__(out, "twice", int(twice))
        return out

    def __setattr__(self, name, value):
        raise AttributeError("HalfInt is immutable")

    @property
    def is_integer(self) -> bool:
        return self.twice % 2 == 0

    def as_fraction(self) -> Fraction:
        return Fraction(self.twice, 2)

    def __float__(self) -> float:
        return self.twice / 2

    def __int__(self) -> int:
        if not self.is_integer:
            raise ValueError(f"{self} is not an integer")
        return self.twice // 2

    def __index__(self) -> int:
        return int(self)

    def __hash__(self):
        return hash(self.as_fraction())

    def __repr__(self):
        return f"HalfInt('{self}')"

    def __str__(self):
        return str(self.twice // 2) if self.is_integer else f"{self.twice}/2"

    def __eq__(self, other):
        try:
            other = _coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.twice == other.twice

    def __lt__(self, other):
        try:
            other = _coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.twice < other.twice

    def __add__(self, other):
        return HalfInt.from_twice(self.twice + _coerce(other).twice)

    __radd__ = __add__

    def __sub__(self, other):
        return HalfInt.from_twice(self.twice - _coerce(other).twice)

    def __rsub__(self, other):
        return HalfInt.from_twice(_coerce(other).twice - self.twice)

    def __neg__(self):
        return HalfInt.from_twice(-self.twice)

    def __abs__(self):
        return HalfInt.from_twice(abs(self.twice))


def _twice_from_fraction(value: Fraction) -> int:
    twice = 2 * value
    if twice.denominator != 1:
        raise ValueError(f"{value} is not a multiple of 1/2")
    return int(twice)


def _coerce(value) -> HalfInt:
    return value if isinstance(value, HalfInt) else HalfInt(value)


HALF = HalfInt.from_twice(1)
