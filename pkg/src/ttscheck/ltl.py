"""LTL checking over the class graph, with counterexample extraction.

Atoms are either event predicates (read off an edge together with its target
state) or state predicates (read off the edge's source class).  Maximal
finite paths are extended by stuttering a deadlock self-loop, so every path
induces an infinite word.  Formulas of shape `always <propositional>` are
checked by plain reachability; everything else goes through a tableau
translation of the negation to a Buchi automaton, a product with the graph
and a nested depth-first search for an accepting lasso.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Union

from . import zone
from .classgraph import ClassGraph, StateClass
from .expr import EvalContext, Expr, eval_expr, format_expr
from .model import Event, TtsModel, enabled, eval_predicate, fire, newly_enabled
from .traces import Duration, TimedTrace


# ---------------------------------------------------------------------------
# Formula AST

@dataclass(frozen=True)
class TT:
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class FF:
    def __str__(self):
        return "false"


@dataclass(frozen=True)
class EventAtom:
    pred: Expr

    def __str__(self):
        return f"ev({format_expr(self.pred)})"


@dataclass(frozen=True)
class StateAtom:
    expr: Expr

    def __str__(self):
        return f"st({format_expr(self.expr)})"


@dataclass(frozen=True)
class LNot:
    f: "LtlFormula"

    def __str__(self):
        return f"!({self.f})"


@dataclass(frozen=True)
class LAnd:
    left: "LtlFormula"
    right: "LtlFormula"

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class LOr:
    left: "LtlFormula"
    right: "LtlFormula"

    def __str__(self):
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class LImplies:
    left: "LtlFormula"
    right: "LtlFormula"

    def __str__(self):
        return f"({self.left} => {self.right})"


@dataclass(frozen=True)
class LNext:
    f: "LtlFormula"

    def __str__(self):
        return f"X({self.f})"


@dataclass(frozen=True)
class LUntil:
    left: "LtlFormula"
    right: "LtlFormula"

    def __str__(self):
        return f"({self.left} U {self.right})"


@dataclass(frozen=True)
class LRelease:
    left: "LtlFormula"
    right: "LtlFormula"

    def __str__(self):
        return f"({self.left} R {self.right})"


@dataclass(frozen=True)
class LAlways:
    f: "LtlFormula"

    def __str__(self):
        return f"[]({self.f})"


@dataclass(frozen=True)
class LEventually:
    f: "LtlFormula"

    def __str__(self):
        return f"<>({self.f})"


@dataclass(frozen=True)
class LWeakUntil:
    left: "LtlFormula"
    right: "LtlFormula"

    def __str__(self):
        return f"({self.left} W {self.right})"


LtlFormula = Union[TT, FF, EventAtom, StateAtom, LNot, LAnd, LOr, LImplies,
                   LNext, LUntil, LRelease, LAlways, LEventually, LWeakUntil]

Atom = Union[EventAtom, StateAtom]


def nnf(f: LtlFormula, neg: bool = False) -> LtlFormula:
    """Negation normal form over the core TT/FF/atom/and/or/X/U/R."""
    if isinstance(f, TT):
        return FF() if neg else TT()
    if isinstance(f, FF):
        return TT() if neg else FF()
    if isinstance(f, (EventAtom, StateAtom)):
        return LNot(f) if neg else f
    if isinstance(f, LNot):
        return nnf(f.f, not neg)
    if isinstance(f, LAnd):
        cls = LOr if neg else LAnd
        return cls(nnf(f.left, neg), nnf(f.right, neg))
    if isinstance(f, LOr):
        cls = LAnd if neg else LOr
        return cls(nnf(f.left, neg), nnf(f.right, neg))
    if isinstance(f, LImplies):
        return nnf(LOr(LNot(f.left), f.right), neg)
    if isinstance(f, LNext):
        return LNext(nnf(f.f, neg))
    if isinstance(f, LAlways):
        return nnf(LRelease(FF(), f.f), neg)
    if isinstance(f, LEventually):
        return nnf(LUntil(TT(), f.f), neg)
    if isinstance(f, LWeakUntil):
        # l W r == r R (r | l)
        return nnf(LRelease(f.right, LOr(f.right, f.left)), neg)
    if isinstance(f, LUntil):
        cls = LRelease if neg else LUntil
        return cls(nnf(f.left, neg), nnf(f.right, neg))
    if isinstance(f, LRelease):
        cls = LUntil if neg else LRelease
        return cls(nnf(f.left, neg), nnf(f.right, neg))
    raise AssertionError(f"unhandled formula {f!r}")


def formula_atoms(f: LtlFormula) -> set:
    if isinstance(f, (EventAtom, StateAtom)):
        return {f}
    if isinstance(f, LNot):
        return formula_atoms(f.f)
    if isinstance(f, (LAnd, LOr, LImplies, LUntil, LRelease, LWeakUntil)):
        return formula_atoms(f.left) | formula_atoms(f.right)
    if isinstance(f, (LNext, LAlways, LEventually)):
        return formula_atoms(f.f)
    return set()


def is_propositional(f: LtlFormula) -> bool:
    if isinstance(f, (TT, FF, EventAtom, StateAtom)):
        return True
    if isinstance(f, LNot):
        return is_propositional(f.f)
    if isinstance(f, (LAnd, LOr, LImplies)):
        return is_propositional(f.left) and is_propositional(f.right)
    return False


def eval_propositional(f: LtlFormula, assignment: dict) -> bool:
    if isinstance(f, TT):
        return True
    if isinstance(f, FF):
        return False
    if isinstance(f, (EventAtom, StateAtom)):
        return assignment[f]
    if isinstance(f, LNot):
        return not eval_propositional(f.f, assignment)
    if isinstance(f, LAnd):
        return eval_propositional(f.left, assignment) and \
            eval_propositional(f.right, assignment)
    if isinstance(f, LOr):
        return eval_propositional(f.left, assignment) or \
            eval_propositional(f.right, assignment)
    if isinstance(f, LImplies):
        return (not eval_propositional(f.left, assignment)) or \
            eval_propositional(f.right, assignment)
    raise AssertionError("not propositional")


# ---------------------------------------------------------------------------
# Letters: atom assignments read off a graph step

STUTTER = None  # edge label of the virtual deadlock self-loop


def letter(atoms, src: StateClass, label: Optional[str], dst: StateClass) -> dict:
    out = {}
    for a in atoms:
        if isinstance(a, EventAtom):
            if label is None:
                out[a] = False
            else:
                out[a] = eval_predicate(a.pred, Event(label, dst.marking, dst.store))
        else:
            out[a] = bool(eval_expr(a.expr, EvalContext(src.marking, src.store)))
    return out


def graph_steps(g: ClassGraph, node: int):
    """Outgoing steps of a node, stutter-extended at deadlocks."""
    succ = g.succ.get(node)
    if succ:
        for (t, dst) in succ:
            yield (t, dst)
    else:
        yield (STUTTER, node)


# ---------------------------------------------------------------------------
# Tableau construction: formula -> Buchi automaton

@dataclass
class BuchiAutomaton:
    """States are maximal consistent subsets of the closure, degeneralized."""

    atoms: tuple
    states: list  # per state: dict atom -> bool (required letter)
    initial: list
    succ: list  # list[list[int]]
    accepting: list  # bool per state

    @property
    def state_count(self) -> int:
        return len(self.states)


def _closure(f: LtlFormula, acc: set) -> None:
    acc.add(f)
    if isinstance(f, (LAnd, LOr, LUntil, LRelease)):
        _closure(f.left, acc)
        _closure(f.right, acc)
    elif isinstance(f, (LNext, LNot)):
        _closure(f.f, acc)


def ltl_to_buchi(f: LtlFormula) -> BuchiAutomaton:
    """Self-consistent tableau over the closure of the NNF formula."""
    g = nnf(f)
    cl: set = set()
    _closure(g, cl)
    atoms = tuple(sorted(formula_atoms(g), key=str))
    temporals = tuple(sorted((x for x in cl if isinstance(x, (LNext, LUntil, LRelease))),
                             key=str))
    choices = atoms + temporals

    def truth(formula, chosen: dict):
        if isinstance(formula, TT):
            return True
        if isinstance(formula, FF):
            return False
        if isinstance(formula, (EventAtom, StateAtom)):
            return chosen[formula]
        if isinstance(formula, LNot):
            return not truth(formula.f, chosen)
        if isinstance(formula, LAnd):
            return truth(formula.left, chosen) and truth(formula.right, chosen)
        if isinstance(formula, LOr):
            return truth(formula.left, chosen) or truth(formula.right, chosen)
        return chosen[formula]  # X / U / R decided directly

    # enumerate candidate states: an assignment to atoms and temporal formulas
    raw_states: list = []
    for bits in itertools.product((False, True), repeat=len(choices)):
        chosen = dict(zip(choices, bits))
        # local expansion constraints restrict untils/releases
        ok = True
        for t in temporals:
            if isinstance(t, LUntil):
                lv, rv = truth(t.left, chosen), truth(t.right, chosen)
                if chosen[t] and not (rv or lv):
                    ok = False
                    break
                if not chosen[t] and rv:
                    ok = False
                    break
            elif isinstance(t, LRelease):
                rv = truth(t.right, chosen)
                if chosen[t] and not rv:
                    ok = False
                    break
        if ok:
            raw_states.append(chosen)

    def step_ok(s: dict, t: dict) -> bool:
        for x in temporals:
            if isinstance(x, LNext):
                if s[x] != truth(x.f, t):
                    return False
            elif isinstance(x, LUntil):
                want = truth(x.right, s) or (truth(x.left, s) and t[x])
                if s[x] != want:
                    return False
            elif isinstance(x, LRelease):
                want = truth(x.right, s) and (truth(x.left, s) or t[x])
                if s[x] != want:
                    return False
        return True

    untils = [x for x in temporals if isinstance(x, LUntil)]
    k = len(untils)

    # degeneralized product with a cyclic acceptance counter
    base_succ: dict = {}
    for i, s in enumerate(raw_states):
        base_succ[i] = [j for j, t in enumerate(raw_states) if step_ok(s, t)]

    def sat_acc(i: int, a: int) -> bool:
        u = untils[a]
        return (not raw_states[i][u]) or truth(u.right, raw_states[i])

    states: list = []
    index: dict = {}
    succ: list = []
    accepting: list = []

    def intern(i: int, cnt: int) -> int:
        key = (i, cnt)
        if key in index:
            return index[key]
        idx = len(states)
        index[key] = idx
        states.append({a: raw_states[i][a] for a in atoms})
        succ.append([])
        accepting.append(False)
        return idx

    initial = []
    pendingq = []
    for i, s in enumerate(raw_states):
        if truth(g, s):
            initial.append(intern(i, 0))
            pendingq.append((i, 0))
    seen = set(pendingq)
    while pendingq:
        (i, cnt) = pendingq.pop()
        idx = index[(i, cnt)]
        if k == 0:
            accepting[idx] = True
            nxt_cnt = 0
        else:
            accepting[idx] = cnt == 0 and sat_acc(i, 0)
            nxt_cnt = (cnt + 1) % k if sat_acc(i, cnt) else cnt
        for j in base_succ[i]:
            key = (j, nxt_cnt)
            tgt = intern(j, nxt_cnt)
            succ[idx].append(tgt)
            if key not in seen:
                seen.add(key)
                pendingq.append(key)
    return BuchiAutomaton(atoms, states, initial, succ, accepting)


# ---------------------------------------------------------------------------
# Direct evaluation on ultimately periodic words (independent of the tableau)

def eval_on_lasso(f: LtlFormula, stem: list, cycle: list) -> bool:
    """Truth of `f` on the infinite word stem . cycle^w of atom assignments."""
    assert cycle, "lasso needs a nonempty cycle"
    g = nnf(f)
    word = stem + cycle
    n = len(word)
    loop = len(stem)  # successor of the last position

    def nxt(i: int) -> int:
        return i + 1 if i + 1 < n else loop

    memo: dict = {}

    def values(formula) -> list:
        if formula in memo:
            return memo[formula]
        if isinstance(formula, TT):
            v = [True] * n
        elif isinstance(formula, FF):
            v = [False] * n
        elif isinstance(formula, (EventAtom, StateAtom)):
            v = [word[i].get(formula, False) for i in range(n)]
        elif isinstance(formula, LNot):
            v = [not x for x in values(formula.f)]
        elif isinstance(formula, LAnd):
            l, r = values(formula.left), values(formula.right)
            v = [a and b for a, b in zip(l, r)]
        elif isinstance(formula, LOr):
            l, r = values(formula.left), values(formula.right)
            v = [a or b for a, b in zip(l, r)]
        elif isinstance(formula, LNext):
            sub = values(formula.f)
            v = [sub[nxt(i)] for i in range(n)]
        elif isinstance(formula, LUntil):
            l, r = values(formula.left), values(formula.right)
            v = [False] * n  # least fixpoint
            changed = True
            while changed:
                changed = False
                for i in range(n - 1, -1, -1):
                    w = r[i] or (l[i] and v[nxt(i)])
                    if w != v[i]:
                        v[i] = w
                        changed = True
        elif isinstance(formula, LRelease):
            l, r = values(formula.left), values(formula.right)
            v = [True] * n  # greatest fixpoint
            changed = True
            while changed:
                changed = False
                for i in range(n - 1, -1, -1):
                    w = r[i] and (l[i] or v[nxt(i)])
                    if w != v[i]:
                        v[i] = w
                        changed = True
        else:
            raise AssertionError(f"unhandled formula {formula!r}")
        memo[formula] = v
        return v

    return values(g)[0]


def buchi_accepts(ba: BuchiAutomaton, stem: list, cycle: list) -> bool:
    """Membership of an ultimately periodic word in the automaton language."""
    assert cycle
    word = stem + cycle
    n = len(word)
    loop = len(stem)

    def compatible(state_idx: int, a: dict) -> bool:
        req = ba.states[state_idx]
        return all(a.get(atom, False) == v for atom, v in req.items())

    # product of the lasso word with the automaton; nested DFS over it
    def word_next(i: int) -> int:
        return i + 1 if i + 1 < n else loop

    succ: dict = {}

    def product_succ(node):
        if node in succ:
            return succ[node]
        (i, q) = node
        out = []
        if compatible(q, word[i]):
            out = [(word_next(i), r) for r in ba.succ[q]]
        succ[node] = out
        return out

    initial = [(0, q) for q in ba.initial]
    return _nested_dfs(initial, product_succ, lambda node: ba.accepting[node[1]]) is not None


# ---------------------------------------------------------------------------
# Emptiness: iterative nested DFS returning an accepting lasso

def _nested_dfs(initial, successors: Callable, is_accepting: Callable):
    """Return (stem_nodes, cycle_nodes) of an accepting lasso, or None.

    `stem_nodes` runs from an initial node to an accepting seed;
    `cycle_nodes` runs from that seed back to itself (first == last == seed).
    Iterative blue/red scheme: the red search, started at the seed's
    postorder, looks for a way back to the seed or onto the blue stack.
    """
    visited: set = set()
    red: set = set()
    parent: dict = {}

    def red_search(seed, blue_set):
        stack = [(seed, iter(successors(seed)))]
        local_parent: dict = {}
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if nxt == seed or nxt in blue_set:
                    path = [nxt, node]
                    cur = node
                    while cur != seed:
                        cur = local_parent[cur]
                        path.append(cur)
                    path.reverse()  # seed -> ... -> node -> hit
                    return path
                if nxt not in red:
                    red.add(nxt)
                    local_parent[nxt] = node
                    stack.append((nxt, iter(successors(nxt))))
                    advanced = True
                    break
            if not advanced:
                stack.pop()
        return None

    for init in initial:
        if init in visited:
            continue
        visited.add(init)
        stack = [(init, iter(successors(init)))]
        blue_order = [init]
        blue_set = {init}
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if nxt not in visited:
                    visited.add(nxt)
                    parent[nxt] = node
                    stack.append((nxt, iter(successors(nxt))))
                    blue_order.append(nxt)
                    blue_set.add(nxt)
                    advanced = True
                    break
            if advanced:
                continue
            if is_accepting(node):
                hit_path = red_search(node, blue_set)
                if hit_path is not None:
                    hit = hit_path[-1]
                    if hit == node:
                        cycle = hit_path  # seed -> ... -> seed directly
                    else:
                        # continue along the blue stack from the hit to seed
                        pos = blue_order.index(hit)
                        cycle = hit_path + blue_order[pos + 1:]
                    stem = [node]
                    cur = node
                    while cur in parent:
                        cur = parent[cur]
                        stem.append(cur)
                    stem.reverse()
                    return stem, cycle
            stack.pop()
            blue_order.pop()
            blue_set.discard(node)
    return None


# ---------------------------------------------------------------------------
# Checking

@dataclass(frozen=True)
class Counterexample:
    """A violating run: stem then cycle (empty cycle = finite safety prefix)."""

    stem: tuple  # tuple of (src, label, dst) graph steps
    cycle: tuple


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    counterexample: Optional[Counterexample] = None
    states_explored: int = 0
    used_fast_path: bool = False

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


def _fast_path_target(f: LtlFormula) -> Optional[LtlFormula]:
    """Body of an `always <propositional>` formula, if f has that shape."""
    if isinstance(f, LAlways) and is_propositional(f.f):
        return f.f
    return None


def check(g: ClassGraph, f: LtlFormula, use_fast_path: bool = True) -> CheckResult:
    """Automata-theoretic check that every run of the graph satisfies f."""
    if use_fast_path:
        if isinstance(f, LAnd):
            left = check(g, f.left, use_fast_path)
            if not left.passed:
                return left
            right = check(g, f.right, use_fast_path)
            if not right.passed:
                return right
            return CheckResult(True, None,
                               left.states_explored + right.states_explored,
                               left.used_fast_path and right.used_fast_path)
        body = _fast_path_target(f)
        if body is not None:
            return _check_safety(g, body)
    return _check_buchi(g, f)


def _check_safety(g: ClassGraph, body: LtlFormula) -> CheckResult:
    """Reachability scan for a step violating a propositional invariant."""
    from collections import deque

    atoms = tuple(sorted(formula_atoms(body), key=str))
    parent: dict = {}
    seen = {g.initial}
    queue = deque([g.initial])
    explored = 0
    while queue:
        node = queue.popleft()
        explored += 1
        for (label, dst) in graph_steps(g, node):
            a = letter(atoms, g.nodes[node], label, g.nodes[dst])
            if not eval_propositional(body, a):
                steps = [(node, label, dst)]
                cur = node
                while cur in parent:
                    prev, lbl = parent[cur]
                    steps.append((prev, lbl, cur))
                    cur = prev
                steps.reverse()
                return CheckResult(False, Counterexample(tuple(steps), ()),
                                   explored, True)
            if label is not STUTTER and dst not in seen:
                seen.add(dst)
                parent[dst] = (node, label)
                queue.append(dst)
    return CheckResult(True, None, explored, True)


def _check_buchi(g: ClassGraph, f: LtlFormula) -> CheckResult:
    ba = ltl_to_buchi(LNot(f))
    atoms = ba.atoms

    letter_cache: dict = {}

    def step_letter(node: int, label, dst: int) -> dict:
        key = (node, label, dst)
        if key not in letter_cache:
            letter_cache[key] = letter(atoms, g.nodes[node], label, g.nodes[dst])
        return letter_cache[key]

    def compatible(q: int, a: dict) -> bool:
        return all(a[atom] == v for atom, v in ba.states[q].items())

    succ_cache: dict = {}

    def successors(prod):
        if prod in succ_cache:
            return succ_cache[prod]
        (node, q) = prod
        out = []
        for (label, dst) in graph_steps(g, node):
            a = step_letter(node, label, dst)
            if compatible(q, a):
                for r in ba.succ[q]:
                    out.append((dst, r))
        succ_cache[prod] = out
        return out

    initial = [(g.initial, q) for q in ba.initial]
    hit = _nested_dfs(initial, successors, lambda prod: ba.accepting[prod[1]])
    if hit is None:
        return CheckResult(True, None, len(succ_cache), False)
    stem_nodes, cycle_nodes = hit

    def project(seq) -> list:
        """Product node sequence -> graph steps (src, label, dst)."""
        steps = []
        for (na, nb) in zip(seq, seq[1:]):
            (ga, qa), (gb, qb) = na, nb
            for (label, dst) in graph_steps(g, ga):
                if dst == gb and qb in ba.succ[qa] \
                        and compatible(qa, step_letter(ga, label, dst)):
                    steps.append((ga, label, gb))
                    break
            else:
                raise AssertionError("lasso step lost during projection")
        return steps

    return CheckResult(False,
                       Counterexample(tuple(project(stem_nodes)),
                                      tuple(project(cycle_nodes))),
                       len(succ_cache), False)


# ---------------------------------------------------------------------------
# Witness extraction: concrete delays for a violating run

def _steps_to_transitions(steps) -> list:
    return [label for (_, label, _) in steps]


def witness_to_trace(g: ClassGraph, model: TtsModel, cx: Counterexample,
                     unroll: int = 1) -> TimedTrace:
    """Solve the stem (plus cycle unrollings) for concrete rational delays.

    Firing times are constrained by each transition's static interval from
    its enabling instant, by every concurrently enabled transition's pending
    deadline, and strictly by higher-priority competitors; the system is a
    difference-bound problem solved exactly, fixing each firing time to the
    midpoint of its remaining feasible window (its endpoint when punctual).
    A stutter step ends the run and marks the trace deadlocked.
    """
    labels = _steps_to_transitions(cx.stem)
    for _ in range(unroll):
        labels += _steps_to_transitions(cx.cycle)
    deadlocked = False
    firing: list = []
    for lbl in labels:
        if lbl is STUTTER:
            deadlocked = True
            break
        firing.append(lbl)

    times = solve_schedule(model, firing)
    marking = model.initial_marking()
    store = model.initial_store()
    items: list = []
    now = Fraction(0)
    for (t, tau) in zip(firing, times):
        items.append(Duration(tau - now))
        marking, store, event = fire(model, marking, store, t)
        items.append(event)
        now = tau
    return TimedTrace.of(items, (model.initial_marking(), model.initial_store()),
                         deadlocked)


def _schedule_constraints(model: TtsModel, firing: list) -> list:
    """Difference constraints (i, j, bound): T_i - T_j <= bound, T_0 = 0."""
    marking = model.initial_marking()
    store = model.initial_store()
    enable_step: dict = {n: 0 for n in enabled(model, marking, store)}
    strict_after: dict = {}  # preempted transition -> step it must strictly follow
    cons: list = []
    for step, t in enumerate(firing, start=1):
        e = enable_step.get(t)
        if e is None:
            raise ValueError(f"transition {t!r} not enabled at step {step}")
        iv = model.transitions[t].timing
        lo, up = iv.lower, iv.upper
        cons.append((e, step, (-lo.value, lo.strict)))  # T_step - T_e >= lo
        if not up.is_infinite:
            cons.append((step, e, (up.value, up.strict)))
        if t in strict_after:
            cons.append((strict_after.pop(t), step, (Fraction(0), True)))
        higher = set(model.higher_than(t))
        for (u, eu) in enable_step.items():
            uiv = model.transitions[u].timing
            if not uiv.upper.is_infinite:
                strict = uiv.upper.strict or (u in higher)
                cons.append((step, eu, (uiv.upper.value, strict)))
            # unbounded competitors never force anything
        cons.append((step - 1, step, (Fraction(0), False)))  # time monotone
        prev_m, prev_s = marking, store
        marking, store, _ = fire(model, marking, store, t)
        fresh = newly_enabled(model, prev_m, prev_s, t, marking, store)
        now_enabled = enabled(model, marking, store)
        # a preempted higher-priority competitor must fire strictly later,
        # as long as it stays continuously enabled
        for h in higher:
            if h in now_enabled and h not in fresh:
                strict_after[h] = step
        enable_step = {u: (step if u in fresh else enable_step[u])
                       for u in now_enabled}
        strict_after = {u: s for u, s in strict_after.items()
                        if u in now_enabled and u not in fresh}
    return cons


def solve_schedule(model: TtsModel, firing: list) -> list:
    """Exact firing times realizing a feasible firing sequence of the model."""
    cons = _schedule_constraints(model, firing)
    k = len(firing)
    names = tuple(f"s{i:04d}" for i in range(1, k + 1))
    d = zone.trivial()
    for n in names:
        d = zone.add_variable(d, n, _free_interval())
    constraints = []
    for (i, j, b) in cons:
        ii = 0 if i == 0 else d.index(names[i - 1])
        jj = 0 if j == 0 else d.index(names[j - 1])
        constraints.append((ii, jj, b))
    d = zone.constrain_many(d, constraints)
    if d is None:
        raise ValueError("firing sequence admits no schedule; graph edge invalid")
    times: list = []
    for i in range(1, k + 1):
        lo_b, up_b = d.bounds_of(names[i - 1])
        lo = -lo_b[0]
        if up_b is None:
            val = lo + 1 if lo_b[1] else lo
        elif up_b[0] == lo:
            val = lo
        else:
            val = (lo + up_b[0]) / 2
        idx = d.index(names[i - 1])
        d = zone.constrain_many(d, [(idx, 0, (val, False)), (0, idx, (-val, False))])
        assert d is not None, "midpoint stays feasible"
        times.append(val)
    return times


def _free_interval():
    from .model import DEFAULT_INTERVAL

    return DEFAULT_INTERVAL


def cycle_time_lower_bound(model: TtsModel, cx: Counterexample) -> Optional[Fraction]:
    """Minimal time one unrolling of a lasso's cycle can take.

    Zero-duration cycles satisfy eventualities only on non-divergent runs;
    reporting the bound lets a reviewer spot such artifacts (they are not
    filtered out).
    """
    labels = _steps_to_transitions(cx.stem) + 2 * _steps_to_transitions(cx.cycle)
    if any(lbl is STUTTER for lbl in labels) or not cx.cycle:
        return None
    marking = model.initial_marking()
    store = model.initial_store()
    enable_step: dict = {n: 0 for n in enabled(model, marking, store)}
    k = len(labels)
    names = tuple(f"s{i:04d}" for i in range(1, k + 1))
    d = zone.trivial()
    for n in names:
        d = zone.add_variable(d, n, _free_interval())
    cons = _schedule_constraints(model, labels)
    items = []
    for (i, j, b) in cons:
        ii = 0 if i == 0 else d.index(names[i - 1])
        jj = 0 if j == 0 else d.index(names[j - 1])
        items.append((ii, jj, b))
    d = zone.constrain_many(d, items)
    if d is None:
        return None
    first = len(cx.stem)  # step index entering the first cycle copy
    second = first + len(cx.cycle)
    ii = 0 if first == 0 else d.index(names[first - 1])
    jj = d.index(names[second - 1])
    bound = d.m[ii][jj]  # upper bound on T_first - T_second = -(cycle time)
    if bound is None:
        return Fraction(0)
    return max(Fraction(0), -bound[0])


def find_decisive_extension(g: ClassGraph, model: TtsModel, cx: Counterexample,
                            decide: Callable, max_depth: int = 14,
                            max_paths: int = 4000) -> Optional[TimedTrace]:
    """Breadth-first search over run extensions until `decide` accepts one.

    `decide` receives each candidate trace; used to lengthen a violating run
    until a trace-level oracle can confirm the violation on the finite prefix.
    """
    from collections import deque

    base = list(cx.stem) + list(cx.cycle)

    def mk_trace(steps) -> Optional[TimedTrace]:
        try:
            return witness_to_trace(g, model, Counterexample(tuple(steps), ()), 0)
        except ValueError:
            return None

    t0 = mk_trace(base)
    if t0 is not None and decide(t0):
        return t0
    queue = deque([base])
    tried = 0
    while queue and tried < max_paths:
        steps = queue.popleft()
        if len(steps) - len(base) >= max_depth:
            continue
        last = steps[-1][2] if steps else g.initial
        for (label, dst) in graph_steps(g, last):
            cand = steps + [(last, label, dst)]
            tried += 1
            tr = mk_trace(cand)
            if tr is not None and decide(tr):
                return tr
            if label is not STUTTER:
                queue.append(cand)
    return None
