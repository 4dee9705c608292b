"""Two executable trace-level semantics for every pattern, cross-checked.

`fott_holds` implements the first-order decomposition reading of each pattern
directly; `mtl_holds` evaluates the pattern's MTL form with a pointwise
finite-trace semantics.  Both are three-valued: `INCONCLUSIVE` marks prefixes
too short to decide.  Untimed modalities get the weak reading (the prefix is
judged as if it were the complete behavior); a timed window that is still
open at the end of the prefix is inconclusive, unless the trace ended in a
deadlock, in which case no further event can arrive and the window closes
decisively.

Conventions shared by both semantics (sequence rendering of dense time):
  - positions are the trace's events plus a virtual start position at time 0;
  - event atoms are false at the start position; state atoms read the state
    reigning at a position (post-state of the event, or the recorded initial
    state; an absent initial state makes state atoms false there);
  - untimed until/weak-until quantify over witnesses j >= i with the left
    side holding on [i, j);
  - timed modalities quantify strictly in the future: witnesses j > i with
    the left side on (i, j), so an event never witnesses a window anchored
    on itself;
  - a timed `always` over a state predicate holds iff the predicate is true
    in every state reigning at some instant of the window, with the window's
    right endpoint excluded: a state change exactly at the endpoint does not
    interrupt the window.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .expr import EvalContext, eval_expr
from .model import Event, EventPredicate, TimeInterval, eval_predicate
from .patterns import (
    AbsentAfterInterval,
    AbsentBeforeDuration,
    AfterScope,
    AndPattern,
    BeforeScope,
    GlobalScope,
    ImpliesPattern,
    LeadstoFirstWithin,
    MAlways,
    MAnd,
    MAtom,
    MEventually,
    MImplies,
    MNot,
    MOr,
    MTrue,
    MUntil,
    MWeakUntil,
    MtlFormula,
    Pattern,
    PresentAfterWithin,
    PresentFirstBeforeWithin,
    PresentLasting,
    to_mtl,
)
from .traces import TimedTrace, duration


class Verdict(enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class TraceVerdict:
    value: Verdict
    witness: Optional[str] = None

    @property
    def decisive(self) -> bool:
        return self.value is not Verdict.INCONCLUSIVE


def _holds(witness: Optional[str] = None) -> TraceVerdict:
    return TraceVerdict(Verdict.HOLDS, witness)


def _fails(witness: Optional[str] = None) -> TraceVerdict:
    return TraceVerdict(Verdict.FAILS, witness)


def _inconclusive(witness: Optional[str] = None) -> TraceVerdict:
    return TraceVerdict(Verdict.INCONCLUSIVE, witness)


# ---------------------------------------------------------------------------
# Timeline view shared by both semantics

class Timeline:
    """Events with absolute times plus the reigning-state sequence."""

    def __init__(self, trace: TimedTrace):
        self.trace = trace
        self.events: list = trace.event_times()  # (time, Event)
        self.total: Fraction = duration(trace)
        self.deadlocked: bool = trace.deadlocked
        self.initial = trace.initial

    def state_at(self, pos: int):
        """State reigning at position `pos` (-1 = start); None if unknown."""
        if pos >= 0:
            e = self.events[pos][1]
            return e.marking, e.store
        return self.initial

    def time_at(self, pos: int) -> Fraction:
        return self.events[pos][0] if pos >= 0 else Fraction(0)

    def event_pred(self, p: EventPredicate, pos: int) -> bool:
        if pos < 0:
            return False
        return eval_predicate(p, self.events[pos][1])

    def state_pred(self, p: EventPredicate, pos: int) -> bool:
        st = self.state_at(pos)
        if st is None:
            return False
        return bool(eval_expr(p, EvalContext(st[0], st[1])))


def _window_still_open(interval: TimeInterval, elapsed: Fraction) -> bool:
    """Can a future event at delay >= elapsed still land inside the window?"""
    up = interval.upper
    if up.is_infinite:
        return True
    if elapsed < up.value:
        return True
    return elapsed == up.value and not up.strict


# ---------------------------------------------------------------------------
# FOTT semantics, pattern by pattern

def fott_holds(p: Pattern, s: TimedTrace) -> TraceVerdict:
    """Decomposition semantics of a validated pattern on a normalized trace."""
    tl = Timeline(s)
    return _fott(p, tl)


def _first_match(tl: Timeline, pred: EventPredicate, start: int = 0,
                 stop: Optional[int] = None) -> Optional[int]:
    stop = len(tl.events) if stop is None else stop
    for i in range(start, stop):
        if tl.event_pred(pred, i):
            return i
    return None


def _fott(p: Pattern, tl: Timeline) -> TraceVerdict:
    if isinstance(p, PresentAfterWithin):
        return _fott_present_after(p, tl)
    if isinstance(p, PresentFirstBeforeWithin):
        return _fott_present_first_before(p, tl)
    if isinstance(p, PresentLasting):
        return _fott_lasting(p, tl)
    if isinstance(p, AbsentAfterInterval):
        return _fott_absent_after(p, tl)
    if isinstance(p, AbsentBeforeDuration):
        return _fott_absent_before(p, tl)
    if isinstance(p, LeadstoFirstWithin):
        return _fott_leadsto(p, tl)
    if isinstance(p, AndPattern):
        return _and3(_fott(p.left, tl), _fott(p.right, tl))
    if isinstance(p, ImpliesPattern):
        return _implies3(_fott(p.left, tl), _fott(p.right, tl))
    raise AssertionError


def _and3(l: TraceVerdict, r: TraceVerdict) -> TraceVerdict:
    if Verdict.FAILS in (l.value, r.value):
        w = l.witness if l.value is Verdict.FAILS else r.witness
        return _fails(w)
    if Verdict.INCONCLUSIVE in (l.value, r.value):
        return _inconclusive()
    return _holds()


def _implies3(l: TraceVerdict, r: TraceVerdict) -> TraceVerdict:
    if l.value is Verdict.FAILS or r.value is Verdict.HOLDS:
        return _holds()
    if l.value is Verdict.HOLDS and r.value is Verdict.FAILS:
        return _fails(r.witness)
    return _inconclusive()


def _fott_present_after(p: PresentAfterWithin, tl: Timeline) -> TraceVerdict:
    ib = _first_match(tl, p.b)
    if ib is None:
        return _holds("no trigger occurrence")
    tb = tl.time_at(ib)
    for j in range(ib + 1, len(tl.events)):
        if tl.event_pred(p.a, j) and p.interval.contains(tl.time_at(j) - tb):
            return _holds(f"witness at {tl.time_at(j) - tb} after trigger")
    if tl.deadlocked:
        return _fails("no witness before deadlock")
    if _window_still_open(p.interval, tl.total - tb):
        return _inconclusive("window still open at end of prefix")
    return _fails("window elapsed without witness")


def _fott_present_first_before(p: PresentFirstBeforeWithin, tl: Timeline) -> TraceVerdict:
    ib = _first_match(tl, p.b)
    if ib is None:
        return _holds("no trigger occurrence")
    ia = _first_match(tl, p.a, 0, ib)
    if ia is None:
        return _fails("trigger with no prior occurrence")
    delta = tl.time_at(ib) - tl.time_at(ia)
    if p.interval.contains(delta):
        return _holds(f"first occurrence {delta} before trigger")
    return _fails(f"separation {delta} outside window")


def _fott_lasting(p: PresentLasting, tl: Timeline) -> TraceVerdict:
    first = None  # first position (start or event) whose state satisfies A
    positions = [-1] + list(range(len(tl.events)))
    for pos in positions:
        if tl.state_pred(p.a, pos):
            first = pos
            break
    if first is None:
        return _fails("condition never holds") if tl.deadlocked \
            else _inconclusive("condition not yet observed")
    t0 = tl.time_at(first)
    for pos in range(max(first, -1) + 1, len(tl.events)):
        if not tl.state_pred(p.a, pos):
            stretch = tl.time_at(pos) - t0
            if stretch >= p.d:
                return _holds(f"held for {stretch}")
            return _fails(f"interrupted after {stretch}")
    stretch = tl.total - t0
    if stretch >= p.d or tl.deadlocked:
        return _holds(f"held for {stretch}{' (deadlock)' if tl.deadlocked else ''}")
    return _inconclusive("still holding at end of prefix")


def _fott_absent_after(p: AbsentAfterInterval, tl: Timeline) -> TraceVerdict:
    ib = _first_match(tl, p.b)
    if ib is None:
        return _holds("no trigger occurrence")
    tb = tl.time_at(ib)
    for j in range(ib + 1, len(tl.events)):
        if tl.event_pred(p.a, j) and p.interval.contains(tl.time_at(j) - tb):
            return _fails(f"occurrence at {tl.time_at(j) - tb} after trigger")
    if tl.deadlocked:
        return _holds("window empty before deadlock")
    if _window_still_open(p.interval, tl.total - tb):
        return _inconclusive("window still open at end of prefix")
    return _holds("window elapsed without occurrence")


def _fott_absent_before(p: AbsentBeforeDuration, tl: Timeline) -> TraceVerdict:
    ib = _first_match(tl, p.b)
    if ib is None:
        return _holds("no trigger occurrence")
    tb = tl.time_at(ib)
    for j in range(ib):
        if tl.event_pred(p.a, j) and tb - tl.time_at(j) <= p.d:
            return _fails(f"occurrence {tb - tl.time_at(j)} before trigger")
    return _holds("no occurrence close before trigger")


def _fott_leadsto(p: LeadstoFirstWithin, tl: Timeline) -> TraceVerdict:
    scope = p.scope
    n = len(tl.events)
    if isinstance(scope, GlobalScope):
        lo, hi, b_stop = 0, n, None
    elif isinstance(scope, BeforeScope):
        ir = _first_match(tl, scope.r)
        if ir is None:
            return _holds("scope trigger never occurs")
        lo, hi, b_stop = 0, ir, ir
    elif isinstance(scope, AfterScope):
        ir = _first_match(tl, scope.r)
        if ir is None:
            return _holds("scope trigger never occurs")
        lo, hi, b_stop = ir + 1, n, None
    else:
        raise AssertionError("unsupported scope must be rejected in validation")

    saw_open = False
    for i in range(lo, hi):
        if not tl.event_pred(p.a, i):
            continue
        jb = _first_match(tl, p.b, i + 1, b_stop)
        if jb is not None:
            delta = tl.time_at(jb) - tl.time_at(i)
            if not p.interval.contains(delta):
                return _fails(f"first response after {delta}")
            continue
        if b_stop is not None:
            return _fails("no response inside scope")
        if tl.deadlocked:
            return _fails("no response before deadlock")
        if _window_still_open(p.interval, tl.total - tl.time_at(i)):
            saw_open = True
            continue
        return _fails("response window elapsed")
    return _inconclusive("response window still open") if saw_open else _holds()


# ---------------------------------------------------------------------------
# MTL finite-trace semantics (three-valued Kleene logic; None = unknown)

def mtl_holds(f: MtlFormula, s: TimedTrace) -> TraceVerdict:
    tl = Timeline(s)
    v = _meval(f, tl, -1)
    if v is True:
        return _holds()
    if v is False:
        return _fails()
    return _inconclusive()


def _not3(v):
    return None if v is None else (not v)


def _and3v(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def _or3v(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def _contains_state_atom(f: MtlFormula) -> bool:
    if isinstance(f, MAtom):
        return f.state
    if isinstance(f, MNot):
        return _contains_state_atom(f.f)
    if isinstance(f, (MAnd, MOr, MImplies, MUntil, MWeakUntil)):
        return _contains_state_atom(f.left) or _contains_state_atom(f.right)
    if isinstance(f, (MAlways, MEventually)):
        return _contains_state_atom(f.f)
    return False


def _meval(f: MtlFormula, tl: Timeline, i: int):
    if isinstance(f, MTrue):
        return True
    if isinstance(f, MAtom):
        if f.state:
            return tl.state_pred(f.pred, i)
        return tl.event_pred(f.pred, i)
    if isinstance(f, MNot):
        return _not3(_meval(f.f, tl, i))
    if isinstance(f, MAnd):
        return _and3v(_meval(f.left, tl, i), _meval(f.right, tl, i))
    if isinstance(f, MOr):
        return _or3v(_meval(f.left, tl, i), _meval(f.right, tl, i))
    if isinstance(f, MImplies):
        return _or3v(_not3(_meval(f.left, tl, i)), _meval(f.right, tl, i))
    if isinstance(f, MUntil):
        return _meval_until(f, tl, i)
    if isinstance(f, MWeakUntil):
        u = _meval_until(MUntil(f.left, f.right), tl, i)
        if u is True:
            return True
        g = _meval_always_untimed(f.left, tl, i)
        return _or3v(u, g)
    if isinstance(f, MAlways):
        if f.interval is None:
            return _meval_always_untimed(f.f, tl, i, strict=f.strict)
        if _contains_state_atom(f.f):
            return _meval_always_state(f, tl, i)
        return _meval_always_timed(f, tl, i)
    if isinstance(f, MEventually):
        return _meval_eventually(f, tl, i)
    raise AssertionError


def _meval_until(f: MUntil, tl: Timeline, i: int):
    timed = f.interval is not None
    n = len(tl.events)
    lhs = True  # running three-valued conjunction of left side at seen positions
    saw_unknown = False
    start = i + 1 if timed else i
    for j in range(start, n):
        if timed:
            delta = tl.time_at(j) - tl.time_at(i)
            if not _window_still_open(f.interval, delta):
                break
            in_window = f.interval.contains(delta)
        else:
            in_window = True
        if in_window:
            combined = _and3v(_meval(f.right, tl, j), lhs)
            if combined is True:
                return True
            if combined is None:
                saw_unknown = True
        lhs = _and3v(lhs, _meval(f.left, tl, j))
        if lhs is False:
            break  # no witness at or beyond the next position is possible
    if saw_unknown:
        return None
    if lhs is False:
        return False
    if not timed:
        return False  # weak reading: the prefix is the whole behavior
    if tl.deadlocked:
        return False
    if not _window_still_open(f.interval, tl.total - tl.time_at(i)):
        return False
    return None


def _meval_always_untimed(g: MtlFormula, tl: Timeline, i: int, strict: bool = False):
    saw_unknown = False
    for j in range(i + 1 if strict else i, len(tl.events)):
        v = _meval(g, tl, j)
        if v is False:
            return False
        if v is None:
            saw_unknown = True
    return None if saw_unknown else True


def _meval_always_timed(f: MAlways, tl: Timeline, i: int):
    saw_unknown = False
    t0 = tl.time_at(i)
    for j in range(i + 1, len(tl.events)):
        delta = tl.time_at(j) - t0
        if not _window_still_open(f.interval, delta):
            break
        if f.interval.contains(delta):
            v = _meval(f.f, tl, j)
            if v is False:
                return False
            if v is None:
                saw_unknown = True
    if saw_unknown:
        return None
    if tl.deadlocked:
        return True
    if _window_still_open(f.interval, tl.total - t0):
        return None
    return True


def _meval_always_state(f: MAlways, tl: Timeline, i: int):
    """Timed always over a state predicate: every reigning state in the
    window satisfies it; changes exactly at the right endpoint do not count.
    Only windows anchored at the current instant are supported."""
    iv = f.interval
    assert iv.lower.value == 0 and not iv.lower.strict, "state window must start now"
    assert not iv.upper.is_infinite, "state window must be bounded"
    d = iv.upper.value
    t0 = tl.time_at(i)
    v0 = _meval(f.f, tl, i)
    if v0 is False:
        return False
    saw_unknown = v0 is None
    for j in range(max(i, -1) + 1, len(tl.events)):
        if tl.time_at(j) - t0 >= d:
            break
        v = _meval(f.f, tl, j)
        if v is False:
            return False
        if v is None:
            saw_unknown = True
    if saw_unknown:
        return None
    if tl.total - t0 >= d or tl.deadlocked:
        return True
    return None


def _meval_eventually(f: MEventually, tl: Timeline, i: int):
    timed = f.interval is not None
    saw_unknown = False
    t0 = tl.time_at(i)
    for j in range(i + 1 if timed else max(i, -1), len(tl.events)):
        if timed:
            delta = tl.time_at(j) - t0
            if not _window_still_open(f.interval, delta):
                break
            if not f.interval.contains(delta):
                continue
        v = _meval(f.f, tl, j)
        if v is True:
            return True
        if v is None:
            saw_unknown = True
    if saw_unknown:
        return None
    if not timed or tl.deadlocked:
        return False
    if not _window_still_open(f.interval, tl.total - t0):
        return False
    return None


# ---------------------------------------------------------------------------
# Cross-check

@dataclass(frozen=True)
class CrossReport:
    pattern: str
    fott: TraceVerdict
    mtl: TraceVerdict

    @property
    def disagree(self) -> bool:
        return (self.fott.decisive and self.mtl.decisive
                and self.fott.value is not self.mtl.value)


def cross_check(p: Pattern, s: TimedTrace) -> CrossReport:
    """Confront the two semantics on one trace; they must agree whenever
    neither is inconclusive."""
    from .patterns import format_pattern

    return CrossReport(format_pattern(p), fott_holds(p, s), mtl_holds(to_mtl(p), s))
