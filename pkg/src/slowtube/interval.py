"""Outward-rounded interval arithmetic over machine doubles.

Every operation computes with round-to-nearest floats and then widens each
endpoint outward by one representable step (two for library transcendentals,
whose rounding is not guaranteed correct to 0.5 ulp).  The result therefore
always contains the exact real-number image of the inputs.  No global
floating-point rounding mode is ever touched, so values are safe to share
across threads and processes.
"""

from __future__ import annotations

import math

__all__ = [
    "Interval",
    "IVector",
    "IMatrix",
    "DivisionByZeroInterval",
    "DomainError",
    "hull",
    "intersect",
    "subset_interior",
]

_INF = math.inf

# Rigorous enclosure of pi: math.pi rounds below the true value.
PI_LO = math.pi
PI_HI = math.nextafter(math.pi, _INF)
TWO_PI_LO = 2.0 * PI_LO
TWO_PI_HI = 2.0 * PI_HI
HALF_PI_LO = 0.5 * PI_LO
HALF_PI_HI = 0.5 * PI_HI


class DivisionByZeroInterval(ZeroDivisionError):
    """Divisor interval contains zero."""


class DomainError(ValueError):
    """Argument interval leaves the domain of the requested function."""


def _down(x: float) -> float:
    return math.nextafter(x, -_INF)


def _up(x: float) -> float:
    return math.nextafter(x, _INF)


def _down2(x: float) -> float:
    return math.nextafter(math.nextafter(x, -_INF), -_INF)


def _up2(x: float) -> float:
    return math.nextafter(math.nextafter(x, _INF), _INF)


class Interval:
    """Closed interval [lo, hi] of finite doubles, lo <= hi."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float):
        lo = float(lo)
        hi = float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"interval bounds must be finite, got [{lo}, {hi}]")
        if lo > hi:
            raise ValueError(f"interval bounds out of order: [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    def __reduce__(self):
        return (Interval, (self.lo, self.hi))

    @staticmethod
    def point(x: float) -> "Interval":
        """Thin interval [x, x]."""
        return Interval(x, x)

    # -- queries ----------------------------------------------------------

    @property
    def mid(self) -> float:
        m = 0.5 * (self.lo + self.hi)
        if not math.isfinite(m):
            m = 0.5 * self.lo + 0.5 * self.hi
        return m

    @property
    def rad(self) -> float:
        return 0.5 * (self.hi - self.lo)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def contains_zero(self) -> bool:
        return self.lo <= 0.0 <= self.hi

    @property
    def abs_hi(self) -> float:
        """Upper bound of |x| over the interval."""
        return max(abs(self.lo), abs(self.hi))

    @property
    def abs_lo(self) -> float:
        """Lower bound of |x| over the interval (0 if it straddles 0)."""
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __eq__(self, other):
        return (
            isinstance(other, Interval)
            and self.lo == other.lo
            and self.hi == other.hi
        )

    def __hash__(self):
        return hash((self.lo, self.hi))

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        if type(other) is not Interval:
            other = _coerce(other)
        # adding a thin zero is exact
        if other.lo == 0.0 and other.hi == 0.0:
            return self
        if self.lo == 0.0 and self.hi == 0.0:
            return other
        return Interval(_down(self.lo + other.lo), _up(self.hi + other.hi))

    __radd__ = __add__

    def __sub__(self, other):
        if type(other) is not Interval:
            other = _coerce(other)
        return Interval(_down(self.lo - other.hi), _up(self.hi - other.lo))

    def __rsub__(self, other):
        return _coerce(other).__sub__(self)

    def __mul__(self, other):
        if type(other) is not Interval:
            other = _coerce(other)
        # multiplying by a thin zero is exact
        if (self.lo == 0.0 and self.hi == 0.0) or (
            other.lo == 0.0 and other.hi == 0.0
        ):
            return _ZERO_IV
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        p1 = a * c
        p2 = a * d
        p3 = b * c
        p4 = b * d
        return Interval(_down(min(p1, p2, p3, p4)), _up(max(p1, p2, p3, p4)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other.lo <= 0.0 <= other.hi:
            raise DivisionByZeroInterval(
                f"divisor {other!r} contains zero"
            )
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        q1 = a / c
        q2 = a / d
        q3 = b / c
        q4 = b / d
        return Interval(_down(min(q1, q2, q3, q4)), _up(max(q1, q2, q3, q4)))

    def __rtruediv__(self, other):
        return _coerce(other).__truediv__(self)

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    # -- elementary functions ----------------------------------------------

    def sqrt(self) -> "Interval":
        if self.lo < 0.0:
            raise DomainError(f"sqrt of interval with negative part: {self!r}")
        if self.hi == 0.0:
            return Interval(0.0, 0.0)
        lo = max(0.0, _down(math.sqrt(self.lo)))
        hi = _up(math.sqrt(self.hi))
        return Interval(lo, hi)

    def exp(self) -> "Interval":
        try:
            lo = max(0.0, _down2(math.exp(self.lo)))
            hi = _up2(math.exp(self.hi))
        except OverflowError:
            raise DomainError(f"exp overflows double range on {self!r}")
        if not math.isfinite(hi):
            raise DomainError(f"exp overflows double range on {self!r}")
        return Interval(lo, hi)

    def pow_int(self, k: int) -> "Interval":
        if k < 0 or k != int(k):
            raise DomainError(f"pow_int exponent must be a nonnegative integer, got {k}")
        k = int(k)
        if k == 0:
            return Interval(1.0, 1.0)
        if k == 1:
            return self
        a, b = self.lo, self.hi
        if k % 2 == 1:
            return Interval(_down2(a**k), _up2(b**k))
        if a >= 0.0:
            return Interval(max(0.0, _down2(a**k)), _up2(b**k))
        if b <= 0.0:
            return Interval(max(0.0, _down2(b**k)), _up2(a**k))
        return Interval(0.0, _up2(max(-a, b) ** k))

    def cos(self) -> "Interval":
        if self.width >= TWO_PI_HI:
            return Interval(-1.0, 1.0)
        vals = (math.cos(self.lo), math.cos(self.hi))
        hi = 1.0 if _grid_hit(self, 0.0, 0.0) else min(1.0, _up2(max(vals)))
        lo = -1.0 if _grid_hit(self, PI_LO, PI_HI) else max(-1.0, _down2(min(vals)))
        return Interval(lo, hi)

    def sin(self) -> "Interval":
        if self.width >= TWO_PI_HI:
            return Interval(-1.0, 1.0)
        vals = (math.sin(self.lo), math.sin(self.hi))
        hi = 1.0 if _grid_hit(self, HALF_PI_LO, HALF_PI_HI) else min(1.0, _up2(max(vals)))
        lo = -1.0 if _grid_hit(self, -HALF_PI_HI, -HALF_PI_LO) else max(-1.0, _down2(min(vals)))
        return Interval(lo, hi)


def _coerce(x) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, (int, float)):
        return Interval(float(x), float(x))
    return NotImplemented


_ZERO_IV = Interval(0.0, 0.0)


def _grid_hit(iv: Interval, off_lo: float, off_hi: float) -> bool:
    """Conservatively decide whether the point grid offset + 2*pi*k meets [iv].

    [off_lo, off_hi] encloses the exact offset.  Uses the rigorous pi
    enclosure; may over-report near grid points, which only widens
    trigonometric results and never breaks containment.
    """
    shifted = iv - Interval(off_lo, off_hi)
    q = shifted / Interval(TWO_PI_LO, TWO_PI_HI)
    return math.floor(q.hi) >= math.ceil(q.lo)


def _dot(row, col) -> Interval:
    """Outward-rounded dot product without intermediate Interval objects.

    Matches the semantics of chained interval add/mul: one outward step per
    product endpoint and per accumulation endpoint.
    """
    lo = 0.0
    hi = 0.0
    nxt = math.nextafter
    for a, b in zip(row, col):
        al, ah, bl, bh = a.lo, a.hi, b.lo, b.hi
        if (al == 0.0 and ah == 0.0) or (bl == 0.0 and bh == 0.0):
            continue
        p1 = al * bl
        p2 = al * bh
        p3 = ah * bl
        p4 = ah * bh
        plo = nxt(min(p1, p2, p3, p4), -_INF)
        phi = nxt(max(p1, p2, p3, p4), _INF)
        if lo == 0.0 and hi == 0.0:
            lo, hi = plo, phi
        else:
            lo = nxt(lo + plo, -_INF)
            hi = nxt(hi + phi, _INF)
    return Interval(lo, hi)


# -- set operations ---------------------------------------------------------


def hull(a: Interval, b: Interval) -> Interval:
    """Smallest interval containing both arguments."""
    return Interval(min(a.lo, b.lo), max(a.hi, b.hi))


def intersect(a: Interval, b: Interval):
    """Intersection, or None when the intervals are disjoint."""
    lo = max(a.lo, b.lo)
    hi = min(a.hi, b.hi)
    if lo > hi:
        return None
    return Interval(lo, hi)


def subset_interior(a: Interval, b: Interval) -> bool:
    """True iff a lies in the strict interior of b."""
    return b.lo < a.lo and a.hi < b.hi


# -- containers --------------------------------------------------------------


class IVector:
    """Immutable vector of intervals."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        entries = tuple(entries)
        if not entries:
            raise ValueError("IVector must have positive dimension")
        for e in entries:
            if not isinstance(e, Interval):
                raise TypeError(f"IVector entries must be Interval, got {type(e)}")
        object.__setattr__(self, "entries", entries)

    def __setattr__(self, name, value):
        raise AttributeError("IVector is immutable")

    def __reduce__(self):
        return (IVector, (self.entries,))

    @staticmethod
    def from_point(xs) -> "IVector":
        return IVector([Interval.point(float(x)) for x in xs])

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i) -> Interval:
        return self.entries[i]

    def __add__(self, other):
        if len(other) != len(self):
            raise ValueError("dimension mismatch")
        return IVector([a + b for a, b in zip(self.entries, other.entries)])

    def __sub__(self, other):
        if len(other) != len(self):
            raise ValueError("dimension mismatch")
        return IVector([a - b for a, b in zip(self.entries, other.entries)])

    def __neg__(self):
        return IVector([-a for a in self.entries])

    def scale(self, c) -> "IVector":
        ci = _coerce(c)
        return IVector([ci * a for a in self.entries])

    def mids(self):
        return [e.mid for e in self.entries]

    def __repr__(self):
        return f"IVector({list(self.entries)!r})"


class IMatrix:
    """Immutable row-major matrix of intervals."""

    __slots__ = ("rows",)

    def __init__(self, rows):
        rows = tuple(tuple(r) for r in rows)
        if not rows or not rows[0]:
            raise ValueError("IMatrix must have positive dimensions")
        ncols = len(rows[0])
        for r in rows:
            if len(r) != ncols:
                raise ValueError("ragged IMatrix rows")
            for e in r:
                if not isinstance(e, Interval):
                    raise TypeError(f"IMatrix entries must be Interval, got {type(e)}")
        object.__setattr__(self, "rows", rows)

    def __setattr__(self, name, value):
        raise AttributeError("IMatrix is immutable")

    def __reduce__(self):
        return (IMatrix, (self.rows,))

    @staticmethod
    def from_point(grid) -> "IMatrix":
        return IMatrix([[Interval.point(float(x)) for x in row] for row in grid])

    @staticmethod
    def identity(n: int) -> "IMatrix":
        one = Interval(1.0, 1.0)
        zero = Interval(0.0, 0.0)
        return IMatrix([[one if i == j else zero for j in range(n)] for i in range(n)])

    @staticmethod
    def zeros(nrows: int, ncols: int) -> "IMatrix":
        zero = Interval(0.0, 0.0)
        return IMatrix([[zero] * ncols for _ in range(nrows)])

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def ncols(self) -> int:
        return len(self.rows[0])

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def __getitem__(self, ij) -> Interval:
        i, j = ij
        return self.rows[i][j]

    def row(self, i):
        return self.rows[i]

    def transpose(self) -> "IMatrix":
        return IMatrix(list(zip(*self.rows)))

    def __add__(self, other):
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return IMatrix(
            [
                [a + b for a, b in zip(ra, rb)]
                for ra, rb in zip(self.rows, other.rows)
            ]
        )

    def __sub__(self, other):
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return IMatrix(
            [
                [a - b for a, b in zip(ra, rb)]
                for ra, rb in zip(self.rows, other.rows)
            ]
        )

    def __neg__(self):
        return IMatrix([[-a for a in r] for r in self.rows])

    def scale(self, c) -> "IMatrix":
        ci = _coerce(c)
        return IMatrix([[ci * a for a in r] for r in self.rows])

    def matvec(self, v: IVector) -> IVector:
        if self.ncols != len(v):
            raise ValueError("dimension mismatch")
        return IVector([_dot(r, v.entries) for r in self.rows])

    def matmul(self, other: "IMatrix") -> "IMatrix":
        if self.ncols != other.nrows:
            raise ValueError("dimension mismatch")
        bt = list(zip(*other.rows))
        return IMatrix([[_dot(r, col) for col in bt] for r in self.rows])

    def mids(self):
        return [[e.mid for e in r] for r in self.rows]

    def max_width(self) -> float:
        return max(e.width for r in self.rows for e in r)

    def __repr__(self):
        return f"IMatrix({[list(r) for r in self.rows]!r})"
