"""Timed Büchi automata for a flat fragment of the timed logic.

Supported fragment: Boolean combinations (negations pushed inward by
duality) of blocks ``G[I] psi``, ``F[I] psi``, ``psi1 U[I] psi2`` with
propositional bodies, plus purely propositional blocks.  Each timed block
owns one clock; since all blocks are anchored at the start of the word, no
clock is ever reset and every clock tracks global time.

Each block automaton is deterministic and complete, with trap locations for
settled verdicts.  The exported automaton is the synchronous product of the
blocks; a product location is Büchi-accepting when the Boolean combination
evaluates to true on the per-block verdicts (co-safety blocks: reached their
DONE trap; safety blocks: not in their REJECT trap).  Along any infinite
word with diverging time the verdict vector is eventually constant, so
"accepting location visited infinitely often" coincides with the formula's
verdict.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Optional, Tuple

from .errors import InvalidParam, UnsupportedFragment
from .mitl import (
    And,
    Always,
    Atom,
    Eventually,
    Interval,
    Next,
    Not,
    Or,
    TimedWord,
    Until,
    eval_propositional,
    is_propositional,
    to_string,
)


@dataclass(frozen=True)
class Guard:
    """Atomic clock constraint ``clock op k``."""

    clock: str
    op: str  # one of < <= > >=
    bound: Fraction

    def holds(self, value: Fraction) -> bool:
        if self.op == "<":
            return value < self.bound
        if self.op == "<=":
            return value <= self.bound
        if self.op == ">":
            return value > self.bound
        if self.op == ">=":
            return value >= self.bound
        raise InvalidParam(f"unknown guard operator {self.op!r}")


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    label: Optional[object]  # propositional formula; None means "any letter"
    guards: Tuple[Guard, ...] = ()
    resets: frozenset = frozenset()

    def enabled(self, letter: frozenset, valuation: dict) -> bool:
        if self.label is not None and not eval_propositional(self.label, letter):
            return False
        return all(g.holds(valuation[g.clock]) for g in self.guards)


@dataclass(frozen=True)
class TimedAutomaton:
    locations: Tuple[str, ...]
    initial: str
    accepting: frozenset
    clocks: Tuple[str, ...]
    edges: Tuple[Edge, ...]
    cmax: Fraction = Fraction(0)
    _by_source: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        by_src = {}
        for e in self.edges:
            by_src.setdefault(e.source, []).append(e)
        object.__setattr__(self, "_by_source", by_src)

    def edges_from(self, location: str):
        return self._by_source.get(location, ())

    def successors(self, location: str, letter: frozenset, valuation: dict):
        return [e for e in self.edges_from(location) if e.enabled(letter, valuation)]


# ---------------------------------------------------------------------------
# block construction
# ---------------------------------------------------------------------------

_TRUE_GUARD: Tuple[Guard, ...] = ()


@dataclass
class _Block:
    kind: str                    # "cosafe" or "safe"
    locations: Tuple[str, ...]
    initial: str
    edges: list                  # (src, dst, label-or-None, guards)
    verdict: dict                # location -> bool (current verdict)
    clock: Optional[str]
    constants: list              # rational guard constants


def _negate(f):
    return f.child if isinstance(f, Not) else Not(f)


def _interval_guards(clock: str, iv: Interval) -> Tuple[Guard, ...]:
    guards = []
    if iv.lo > 0:
        guards.append(Guard(clock, ">=", iv.lo))
    if iv.hi is not None:
        guards.append(Guard(clock, "<=", iv.hi))
    return tuple(guards)


def _below_guard(clock: str, iv: Interval) -> Tuple[Guard, ...]:
    return (Guard(clock, "<", iv.lo),)


def _above_guard(clock: str, iv: Interval) -> Tuple[Guard, ...]:
    return (Guard(clock, ">", iv.hi),)


def _block_constants(iv: Interval) -> list:
    out = [iv.lo]
    if iv.hi is not None:
        out.append(iv.hi)
    return out


def _prop_block(idx: int, psi) -> _Block:
    init, true, rej = "init", "true", "reject"
    edges = [
        (init, true, psi, _TRUE_GUARD),
        (init, rej, _negate(psi), _TRUE_GUARD),
        (true, true, None, _TRUE_GUARD),
        (rej, rej, None, _TRUE_GUARD),
    ]
    return _Block("cosafe", (init, true, rej), init, edges,
                  {init: False, true: True, rej: False}, None, [])


def _eventually_block(idx: int, psi, iv: Interval) -> _Block:
    clock = f"c{idx}"
    wait, done = "wait", "done"
    edges = [
        (wait, done, psi, _interval_guards(clock, iv)),
        (wait, wait, _negate(psi), _TRUE_GUARD),
        (done, done, None, _TRUE_GUARD),
    ]
    if iv.lo > 0:
        edges.append((wait, wait, psi, _below_guard(clock, iv)))
    if iv.hi is not None:
        edges.append((wait, wait, psi, _above_guard(clock, iv)))
    return _Block("cosafe", (wait, done), wait, edges,
                  {wait: False, done: True}, clock, _block_constants(iv))


def _always_block(idx: int, psi, iv: Interval) -> _Block:
    clock = f"c{idx}"
    active, safe, rej = "active", "safe", "reject"
    edges = [
        (active, active, psi, _interval_guards(clock, iv)),
        (active, rej, _negate(psi), _interval_guards(clock, iv)),
        (rej, rej, None, _TRUE_GUARD),
    ]
    locations = [active, rej]
    if iv.lo > 0:
        edges.append((active, active, None, _below_guard(clock, iv)))
    if iv.hi is not None:
        locations.append(safe)
        edges.append((active, safe, None, _above_guard(clock, iv)))
        edges.append((safe, safe, None, _TRUE_GUARD))
    verdict = {active: True, rej: False}
    if iv.hi is not None:
        verdict[safe] = True
    return _Block("safe", tuple(locations), active, edges, verdict, clock,
                  _block_constants(iv))


def _until_block(idx: int, psi1, psi2, iv: Interval) -> _Block:
    clock = f"c{idx}"
    wait, done, rej = "wait", "done", "reject"
    in_window = _interval_guards(clock, iv)
    edges = [
        (wait, done, psi2, in_window),
        (wait, wait, And(psi1, _negate(psi2)), in_window),
        (wait, rej, And(_negate(psi1), _negate(psi2)), in_window),
        (done, done, None, _TRUE_GUARD),
        (rej, rej, None, _TRUE_GUARD),
    ]
    if iv.lo > 0:
        edges.append((wait, wait, psi1, _below_guard(clock, iv)))
        edges.append((wait, rej, _negate(psi1), _below_guard(clock, iv)))
    if iv.hi is not None:
        edges.append((wait, rej, None, _above_guard(clock, iv)))
    return _Block("cosafe", (wait, done, rej), wait, edges,
                  {wait: False, done: True, rej: False}, clock,
                  _block_constants(iv))


# ---------------------------------------------------------------------------
# fragment normalisation
# ---------------------------------------------------------------------------

def _normalise(f, negated: bool):
    """Push negation inward by duality; reject what the fragment lacks."""
    if isinstance(f, Not):
        return _normalise(f.child, not negated)
    if isinstance(f, Atom):
        return Not(f) if negated else f
    if isinstance(f, And):
        l = _normalise(f.left, negated)
        r = _normalise(f.right, negated)
        return Or(l, r) if negated else And(l, r)
    if isinstance(f, Or):
        l = _normalise(f.left, negated)
        r = _normalise(f.right, negated)
        return And(l, r) if negated else Or(l, r)
    if isinstance(f, Eventually):
        child = _normalise(f.child, negated)
        return Always(child, f.interval) if negated else Eventually(child, f.interval)
    if isinstance(f, Always):
        child = _normalise(f.child, negated)
        return Eventually(child, f.interval) if negated else Always(child, f.interval)
    if isinstance(f, Until):
        if negated:
            raise UnsupportedFragment(
                f"negated until is outside the fragment: {to_string(f)}", f
            )
        return Until(_normalise(f.left, False), _normalise(f.right, False), f.interval)
    if isinstance(f, Next):
        raise UnsupportedFragment(
            f"the next operator is outside the fragment: {to_string(f)}", f
        )
    raise InvalidParam(f"not a formula node: {f!r}")


def _collect_blocks(f, blocks: list):
    """Split a normalised formula into a monotone And/Or tree over blocks.

    Returns a nested structure: ("and", a, b), ("or", a, b), or ("block", i).
    """
    if isinstance(f, (And, Or)) and not is_propositional(f):
        op = "and" if isinstance(f, And) else "or"
        return (op, _collect_blocks(f.left, blocks), _collect_blocks(f.right, blocks))
    idx = len(blocks)
    if is_propositional(f):
        blocks.append(_prop_block(idx, f))
    elif isinstance(f, Eventually) and is_propositional(f.child):
        blocks.append(_eventually_block(idx, f.child, f.interval))
    elif isinstance(f, Always) and is_propositional(f.child):
        blocks.append(_always_block(idx, f.child, f.interval))
    elif isinstance(f, Until) and is_propositional(f.left) and is_propositional(f.right):
        blocks.append(_until_block(idx, f.left, f.right, f.interval))
    else:
        raise UnsupportedFragment(
            f"nested timed operators are outside the fragment: {to_string(f)}", f
        )
    return ("block", idx)


def _eval_tree(tree, verdicts) -> bool:
    tag = tree[0]
    if tag == "block":
        return verdicts[tree[1]]
    if tag == "and":
        return _eval_tree(tree[1], verdicts) and _eval_tree(tree[2], verdicts)
    if tag == "or":
        return _eval_tree(tree[1], verdicts) or _eval_tree(tree[2], verdicts)
    raise InvalidParam(f"bad tree node {tag!r}")


def _and_labels(labels):
    labels = [l for l in labels if l is not None]
    if not labels:
        return None
    out = labels[0]
    for l in labels[1:]:
        out = And(out, l)
    return out


def build_tba(formula) -> TimedAutomaton:
    """Translate a flat-fragment formula into a timed Büchi automaton."""
    norm = _normalise(formula, False)
    blocks: list = []
    tree = _collect_blocks(norm, blocks)

    clocks = tuple(b.clock for b in blocks if b.clock is not None)
    constants = [c for b in blocks for c in b.constants]
    cmax = max(constants, default=Fraction(0))

    def name(vec) -> str:
        return "|".join(f"{i}:{loc}" for i, loc in enumerate(vec))

    init_vec = tuple(b.initial for b in blocks)
    locations = []
    accepting = set()
    edges = []
    seen = {init_vec}
    frontier = [init_vec]
    while frontier:
        vec = frontier.pop()
        locations.append(name(vec))
        verdicts = [b.verdict[loc] for b, loc in zip(blocks, vec)]
        if _eval_tree(tree, verdicts):
            accepting.add(name(vec))
        per_block = [
            [e for e in b.edges if e[0] == loc] for b, loc in zip(blocks, vec)
        ]
        for combo in itertools.product(*per_block):
            dst = tuple(e[1] for e in combo)
            label = _and_labels([e[2] for e in combo])
            guards = tuple(g for e in combo for g in e[3])
            edges.append(Edge(name(vec), name(dst), label, guards))
            if dst not in seen:
                seen.add(dst)
                frontier.append(dst)

    return TimedAutomaton(
        locations=tuple(sorted(locations)),
        initial=name(init_vec),
        accepting=frozenset(accepting),
        clocks=clocks,
        edges=tuple(edges),
        cmax=cmax,
    )


# ---------------------------------------------------------------------------
# acceptance of (stutter-extended) finite timed words
# ---------------------------------------------------------------------------

def _fraction_gcd(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(gcd(a.numerator * b.denominator, b.numerator * a.denominator),
                    a.denominator * b.denominator)


def stutter_loop_weight(tba: TimedAutomaton, final_time: Fraction) -> Fraction:
    """Delay for the virtual stutter self-loop appended after a finite word.

    The held letter exists at *every* time after the final stamp; a discrete
    self-loop samples it at multiples of the returned weight.  Taking half
    the gcd of the distances from the final stamp to every guard constant
    still ahead guarantees the sampled times hit each constant exactly and
    each open region between consecutive constants at least once, so the
    discrete run decides acceptance exactly as the dense extension would.
    """
    constants = sorted({g.bound for e in tba.edges for g in e.guards})
    diffs = [c - final_time for c in constants if c > final_time]
    if not diffs:
        return Fraction(1)
    g = diffs[0]
    for d in diffs[1:]:
        g = _fraction_gcd(g, d)
    return g / 2


def accepts_word(tba: TimedAutomaton, word: TimedWord, saturation_slack=1) -> bool:
    """Büchi acceptance of the stutter-extended word.

    Implemented by viewing the word as a linear weighted transition system
    (with a stutter self-loop on its last state) and searching the product
    with the automaton for an accepting lasso.
    """
    from .abstraction import Wts, WtsTransition
    from .errors import Unrealizable
    from .synthesis import find_accepting_run

    states = tuple(f"w{i}" for i in range(len(word)))
    labels = {s: word.letters[i] for i, s in enumerate(states)}
    transitions = {}
    for i in range(len(word) - 1):
        weight = word.times[i + 1] - word.times[i]
        transitions[(states[i], states[i + 1])] = WtsTransition(weight, None)
    loop_w = stutter_loop_weight(tba, word.times[-1])
    transitions[(states[-1], states[-1])] = WtsTransition(loop_w, None)
    wts = Wts(states=states, initial=states[0], labels=labels, transitions=transitions)
    try:
        find_accepting_run(wts, tba, states[0], saturation_slack=saturation_slack)
        return True
    except Unrealizable:
        return False
