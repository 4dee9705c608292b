"""State-class graph: the finite dense-time abstraction of a model.

A state class is a discrete state (marking + store) plus a firing domain over
the currently enabled transitions: a canonical DBM constraining how much
longer each of them may stay enabled before firing.  Successor computation is
the standard strongest-postcondition on firing domains; priorities contribute
strict ordering constraints to firability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import zone
from .model import (
    ExplorationError,
    Marking,
    Store,
    TtsModel,
    enabled,
    fire,
    newly_enabled,
)
from .zone import Dbm


@dataclass(frozen=True)
class StateClass:
    marking: Marking
    store: Store
    domain: Dbm

    def key(self) -> tuple:
        return (
            tuple(sorted((p, n) for p, n in self.marking.items() if n)),
            tuple(sorted(self.store.items())),
            self.domain.names,
            self.domain.m,
        )


class CapacityExceeded(ExplorationError):
    pass


class ClassBudgetExceeded(ExplorationError):
    pass


@dataclass
class ClassGraph:
    model: TtsModel
    nodes: list = field(default_factory=list)  # StateClass, index = node id
    edges: list = field(default_factory=list)  # (source id, transition name, target id)
    initial: int = 0
    succ: dict = field(default_factory=dict)  # id -> list[(transition, id)]

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def deadlocks(self) -> set:
        return {i for i in range(len(self.nodes)) if not self.succ.get(i)}


def initial_class(model: TtsModel) -> StateClass:
    marking = model.initial_marking()
    store = model.initial_store()
    d = zone.trivial()
    for name in sorted(enabled(model, marking, store)):
        d = zone.add_variable(d, name, model.transitions[name].timing)
        assert d is not None, "static intervals are nonempty"
    return StateClass(marking, store, d)


def _firability_constraints(model: TtsModel, c: StateClass, t: str):
    """Constraints placing t's firing time first, priorities strict."""
    ti = c.domain.index(t)
    higher = set(model.higher_than(t))
    for u in c.domain.names:
        if u == t:
            continue
        strict = u in higher
        yield (ti, c.domain.index(u), (Fraction(0), strict))


def fire_window(model: TtsModel, c: StateClass, t: str) -> Optional[Dbm]:
    """Domain restricted to runs where t fires next; None if t cannot be first."""
    if t not in c.domain.names:
        return None
    return zone.constrain_many(c.domain, _firability_constraints(model, c, t))


def firable(model: TtsModel, c: StateClass) -> set:
    """Transitions that can fire first from this class, priorities included."""
    out = set()
    for t in c.domain.names:
        if fire_window(model, c, t) is not None:
            out.add(t)
    return out


def successor(model: TtsModel, c: StateClass, t: str) -> StateClass:
    """Fire t from a class: constrain, shift persistent clocks, add fresh ones."""
    fired = fire_window(model, c, t)
    if fired is None:
        raise ExplorationError(f"transition {t!r} not firable from this class")
    try:
        new_marking, new_store, _ = fire(model, c.marking, c.store, t)
    except ExplorationError as exc:
        if "capacity" in str(exc):
            raise CapacityExceeded(str(exc)) from exc
        raise
    fresh = newly_enabled(model, c.marking, c.store, t, new_marking, new_store)
    now_enabled = enabled(model, new_marking, new_store)
    persistent = sorted(now_enabled - fresh)

    # Re-read every persistent clock relative to t's firing instant: the entry
    # for th'_u = th_u - th_t against 0 is the old entry against th_t.
    ti = fired.index(t)
    names = tuple(persistent)
    size = len(names) + 1

    def old(k: int) -> int:
        return ti if k == 0 else fired.index(names[k - 1])

    rows = [[fired.m[old(a)][old(b)] for b in range(size)] for a in range(size)]
    d = zone.Dbm(names, tuple(tuple(r) for r in rows))
    for name in sorted(fresh & now_enabled):
        d = zone.add_variable(d, name, model.transitions[name].timing)
        if d is None:
            raise AssertionError("adding a fresh interval cannot empty the domain")
    d = zone.canonicalize(d)
    if d is None:
        raise AssertionError("successor domain of a firable transition is nonempty")
    return StateClass(new_marking, new_store, d)


def build_graph(model: TtsModel, max_classes: int = 1_000_000) -> ClassGraph:
    """Breadth-first closure of `successor` over `firable`, deduplicated.

    Node ids follow discovery order, which is deterministic: the frontier is
    explored first-in-first-out and transitions in model declaration order.
    """
    from collections import deque

    g = ClassGraph(model)
    init = initial_class(model)
    index: dict = {init.key(): 0}
    g.nodes.append(init)
    queue = deque([0])
    order = list(model.transitions)
    while queue:
        src = queue.popleft()
        c = g.nodes[src]
        fir = firable(model, c)
        for t in order:
            if t not in fir:
                continue
            nxt = successor(model, c, t)
            k = nxt.key()
            tgt = index.get(k)
            if tgt is None:
                if len(g.nodes) >= max_classes:
                    raise ClassBudgetExceeded(
                        f"class budget {max_classes} exceeded while exploring")
                tgt = len(g.nodes)
                index[k] = tgt
                g.nodes.append(nxt)
                queue.append(tgt)
            g.edges.append((src, t, tgt))
            g.succ.setdefault(src, []).append((t, tgt))
    return g


# ---------------------------------------------------------------------------
# Exports

def _fmt_state(c: StateClass) -> str:
    m = ",".join(f"{p}={n}" for p, n in sorted(c.marking.items()) if n)
    s = ",".join(f"{k}={str(v).lower() if isinstance(v, bool) else v}"
                 for k, v in sorted(c.store.items()))
    return f"m:{{{m}}} s:{{{s}}}"


def export_ksg(g: ClassGraph) -> str:
    lines = [f"# ksg nodes={g.node_count} edges={g.edge_count} initial={g.initial}"]
    for i, c in enumerate(g.nodes):
        lines.append(f"node {i} {_fmt_state(c)}")
    for (a, t, b) in g.edges:
        lines.append(f"edge {a} {t} {b}")
    return "\n".join(lines) + "\n"


def export_dot(g: ClassGraph) -> str:
    lines = ["digraph classes {", '  node [shape=box,fontname="monospace"];']
    for i, c in enumerate(g.nodes):
        label = _fmt_state(c).replace('"', "'")
        lines.append(f'  n{i} [label="{i}\\n{label}"];')
    for (a, t, b) in g.edges:
        lines.append(f'  n{a} -> n{b} [label="{t}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
