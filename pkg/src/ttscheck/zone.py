"""Difference-bound matrices over firing-time variables, with strict bounds.

A `Dbm` constrains variables th_1..th_n (one per enabled transition) plus the
constant 0 at index 0: entry (i, j) is an upper bound on th_i - th_j.  Bounds
are exact rationals tagged strict/non-strict; `None` stands for +infinity.
Canonical form is the all-pairs-shortest-path closure, which is a normal form:
two constraint sets have the same solutions iff their canonical matrices are
identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .expr import format_rational
from .model import TimeInterval

# A bound is (value, strict) or None for +infinity.
Bound = Optional[tuple]

LE_ZERO: Bound = (Fraction(0), False)
LT_ZERO: Bound = (Fraction(0), True)


def bound_le(a: Bound, b: Bound) -> bool:
    """True iff constraint `a` is at least as tight as `b`."""
    if b is None:
        return True
    if a is None:
        return False
    if a[0] != b[0]:
        return a[0] < b[0]
    return a[1] or not b[1]


def bound_min(a: Bound, b: Bound) -> Bound:
    return a if bound_le(a, b) else b


def bound_add(a: Bound, b: Bound) -> Bound:
    if a is None or b is None:
        return None
    return (a[0] + b[0], a[1] or b[1])


def bound_neg_lower(value: Fraction, strict: bool) -> Bound:
    """Encode `th >= value` (strict per flag) as an upper bound on 0 - th."""
    return (-value, strict)


def format_bound(b: Bound) -> str:
    if b is None:
        return "inf"
    op = "<" if b[1] else "<="
    return f"{op}{format_rational(b[0])}"


@dataclass(frozen=True)
class Dbm:
    """Canonical difference-bound matrix; index 0 is the constant zero."""

    names: tuple  # variable names for indices 1..n, kept sorted
    m: tuple  # tuple of row tuples of bounds

    @property
    def size(self) -> int:
        return len(self.names) + 1

    def index(self, name: str) -> int:
        return self.names.index(name) + 1

    def bounds_of(self, name: str) -> tuple:
        """Return (lower bound, upper bound) of a variable as Bound pairs.

        The lower bound is returned as the raw (0 - th) entry: value -c with
        strictness s encodes th >= c (strict if s).
        """
        i = self.index(name)
        return self.m[0][i], self.m[i][0]

    def entry(self, a: str, b: str) -> Bound:
        i = 0 if a == "0" else self.index(a)
        j = 0 if b == "0" else self.index(b)
        return self.m[i][j]

    def dump(self) -> str:
        """Matrix of `<v` / `<=v` / `inf` entries, used by golden tests."""
        labels = ("0",) + self.names
        rows = []
        for i, row in enumerate(self.m):
            cells = "  ".join(format_bound(b) for b in row)
            rows.append(f"{labels[i]}: {cells}")
        return "\n".join(rows)


def _rows(d: Dbm) -> list:
    return [list(row) for row in d.m]


def _freeze(names: tuple, rows: list) -> Dbm:
    return Dbm(names, tuple(tuple(row) for row in rows))


def trivial() -> Dbm:
    """The zone with no variables (valid deadlock domain)."""
    return Dbm((), ((LE_ZERO,),))


def canonicalize(d: Dbm) -> Optional[Dbm]:
    """Shortest-path closure; None when the constraints are inconsistent."""
    n = d.size
    rows = _rows(d)
    for i in range(n):
        rows[i][i] = bound_min(rows[i][i], LE_ZERO)
    for k in range(n):
        rk = rows[k]
        for i in range(n):
            rik = rows[i][k]
            if rik is None:
                continue
            ri = rows[i]
            for j in range(n):
                via = bound_add(rik, rk[j])
                if via is not None and not bound_le(ri[j], via):
                    ri[j] = via
    for i in range(n):
        dii = rows[i][i]
        if dii is not None and (dii[0] < 0 or (dii[0] == 0 and dii[1])):
            return None
    return _freeze(d.names, rows)


def from_constraints(names: tuple, constraints: dict) -> Optional[Dbm]:
    """Build and canonicalize a zone from {(i, j): Bound} raw constraints."""
    size = len(names) + 1
    rows = [[None if i != j else LE_ZERO for j in range(size)] for i in range(size)]
    for (i, j), b in constraints.items():
        rows[i][j] = bound_min(rows[i][j], b)
    return canonicalize(_freeze(tuple(names), rows))


def constrain(d: Dbm, i: int, j: int, b: Bound) -> Optional[Dbm]:
    """Intersect a canonical zone with th_i - th_j <= b and re-canonicalize."""
    if bound_le(d.m[i][j], b):
        return d
    rows = _rows(d)
    rows[i][j] = b
    return canonicalize(_freeze(d.names, rows))


def constrain_many(d: Dbm, items) -> Optional[Dbm]:
    rows = _rows(d)
    changed = False
    for (i, j, b) in items:
        if not bound_le(rows[i][j], b):
            rows[i][j] = b
            changed = True
    if not changed:
        return d
    return canonicalize(_freeze(d.names, rows))


def project_out(d: Dbm, name: str) -> Dbm:
    """Drop a variable from a canonical zone; exact by canonicity."""
    idx = d.index(name)
    keep = [k for k in range(d.size) if k != idx]
    rows = [[d.m[a][b] for b in keep] for a in keep]
    names = tuple(n for n in d.names if n != name)
    return _freeze(names, rows)


def interval_bounds(interval: TimeInterval) -> tuple:
    """Static interval as (upper Bound on th, upper Bound on -th)."""
    up: Bound
    if interval.upper.is_infinite:
        up = None
    else:
        up = (interval.upper.value, interval.upper.strict)
    lo: Bound = (-interval.lower.value, interval.lower.strict)
    return up, lo


def add_variable(d: Dbm, name: str, interval: TimeInterval) -> Optional[Dbm]:
    """Insert a fresh variable constrained to its static interval only."""
    if name in d.names:
        raise ValueError(f"variable {name!r} already present")
    names = tuple(sorted(d.names + (name,)))
    pos = names.index(name) + 1
    up, lo = interval_bounds(interval)
    size = len(names) + 1

    def old_index(k: int) -> Optional[int]:
        if k == 0:
            return 0
        n = names[k - 1]
        if n == name:
            return None
        return d.index(n)

    rows = []
    for a in range(size):
        oa = old_index(a)
        row = []
        for b in range(size):
            ob = old_index(b)
            if oa is None and ob is None:
                row.append(LE_ZERO)
            elif oa is None:
                row.append(up if ob == 0 else None)
            elif ob is None:
                row.append(lo if oa == 0 else None)
            else:
                row.append(d.m[oa][ob])
        rows.append(row)
    assert rows[pos][pos] == LE_ZERO
    return canonicalize(_freeze(names, rows))


def zones_equal(d1: Dbm, d2: Dbm) -> bool:
    """Entrywise equality of canonical forms; same solution set."""
    if d1.names != d2.names:
        raise ValueError("zone comparison over different variable sets")
    return d1.m == d2.m


def satisfies(d: Dbm, point: dict) -> bool:
    """Check a concrete rational valuation against all matrix constraints."""
    vals = [Fraction(0)] + [Fraction(point[n]) for n in d.names]
    for i in range(d.size):
        for j in range(d.size):
            b = d.m[i][j]
            if b is None:
                continue
            diff = vals[i] - vals[j]
            if diff > b[0] or (diff == b[0] and b[1]):
                return False
    return True
