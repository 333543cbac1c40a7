"""MITL front end: abstract syntax, parser, printer, and satisfaction monitor.

All timing data in this layer is exact: interval endpoints, word stamps and
clock values are ``fractions.Fraction``.  The monitor implements full MITL
(any nesting) over point-based timed words and is the verification oracle
the automaton construction is cross-checked against.

Finite words are evaluated under a stuttering extension: the final letter is
held at every time strictly after the final stamp.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

from .errors import InvalidParam, MitlSyntaxError


# ---------------------------------------------------------------------------
# intervals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """Time interval with rational endpoints; ``hi is None`` means +inf.

    The concrete syntax only produces closed endpoints; the open/closed
    flags exist so programmatic constructions can be precise.
    """

    lo: Fraction
    hi: Optional[Fraction]
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lo", Fraction(self.lo))
        if self.hi is not None:
            object.__setattr__(self, "hi", Fraction(self.hi))
        if self.lo < 0:
            raise InvalidParam("interval lower endpoint must be >= 0")
        if self.hi is not None:
            if self.hi < self.lo or (
                self.hi == self.lo and not (self.lo_closed and self.hi_closed)
            ):
                raise InvalidParam("interval is empty")

    def contains(self, v: Fraction) -> bool:
        if v < self.lo or (v == self.lo and not self.lo_closed):
            return False
        if self.hi is not None:
            if v > self.hi or (v == self.hi and not self.hi_closed):
                return False
        return True

    def intersects_after(self, d: Fraction) -> bool:
        """Whether the interval contains some time strictly greater than ``d``."""
        if self.hi is None:
            return True
        if self.hi > d:
            return True
        return False

    def has_positive_point(self) -> bool:
        return self.intersects_after(Fraction(0))

    def contains_zero(self) -> bool:
        return self.contains(Fraction(0))

    def __str__(self) -> str:
        hi = "inf" if self.hi is None else str(self.hi)
        return f"[{self.lo},{hi}]"


UNBOUNDED = Interval(Fraction(0), None)


# ---------------------------------------------------------------------------
# abstract syntax
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Next:
    child: "Formula"
    interval: Interval


@dataclass(frozen=True)
class Eventually:
    child: "Formula"
    interval: Interval


@dataclass(frozen=True)
class Always:
    child: "Formula"
    interval: Interval


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"
    interval: Interval


Formula = object  # union of the node classes above

TEMPORAL_UNARY = {"X": Next, "F": Eventually, "G": Always}


def atoms_of(f) -> frozenset:
    if isinstance(f, Atom):
        return frozenset({f.name})
    if isinstance(f, Not):
        return atoms_of(f.child)
    if isinstance(f, (And, Or, Until)):
        return atoms_of(f.left) | atoms_of(f.right)
    if isinstance(f, (Next, Eventually, Always)):
        return atoms_of(f.child)
    raise InvalidParam(f"not a formula node: {f!r}")


def is_propositional(f) -> bool:
    if isinstance(f, Atom):
        return True
    if isinstance(f, Not):
        return is_propositional(f.child)
    if isinstance(f, (And, Or)):
        return is_propositional(f.left) and is_propositional(f.right)
    return False


def eval_propositional(f, letter: frozenset) -> bool:
    if isinstance(f, Atom):
        return f.name in letter
    if isinstance(f, Not):
        return not eval_propositional(f.child, letter)
    if isinstance(f, And):
        return eval_propositional(f.left, letter) and eval_propositional(f.right, letter)
    if isinstance(f, Or):
        return eval_propositional(f.left, letter) or eval_propositional(f.right, letter)
    raise InvalidParam(f"not a propositional formula: {f!r}")


# ---------------------------------------------------------------------------
# concrete syntax
# ---------------------------------------------------------------------------

_RESERVED = {"X", "F", "G", "U", "inf"}


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens = []
        self._scan()
        self.index = 0

    def _scan(self):
        text = self.text
        i = 0
        while i < len(text):
            c = text[i]
            if c.isspace():
                i += 1
                continue
            if c in "!&|()[],":
                self.tokens.append((c, c, i))
                i += 1
                continue
            if c.isdigit():
                j = i
                while j < len(text) and text[j].isdigit():
                    j += 1
                if j < len(text) and text[j] == ".":
                    j += 1
                    while j < len(text) and text[j].isdigit():
                        j += 1
                # optional exact-rational suffix: p/q
                if j < len(text) and text[j] == "/" and "." not in text[i:j]:
                    k = j + 1
                    while k < len(text) and text[k].isdigit():
                        k += 1
                    if k > j + 1:
                        j = k
                self.tokens.append(("number", text[i:j], i))
                i = j
                continue
            if c.isalpha() or c == "_":
                j = i
                while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                word = text[i:j]
                kind = word if word in _RESERVED else "ident"
                self.tokens.append((kind, word, i))
                i = j
                continue
            raise MitlSyntaxError(f"unexpected character {c!r}", i)
        self.tokens.append(("eof", "", len(text)))

    def peek(self):
        return self.tokens[self.index]

    def next(self):
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect(self, kind):
        tok = self.next()
        if tok[0] != kind:
            raise MitlSyntaxError(f"expected {kind!r}, found {tok[1]!r}", tok[2])
        return tok


def _parse_number(tok) -> Fraction:
    return Fraction(tok[1])


class _Parser:
    """Recursive descent over: unary > U > & > |  (U right-associative)."""

    def __init__(self, text: str):
        self.tz = _Tokenizer(text)

    def parse(self):
        f = self._or()
        tok = self.tz.peek()
        if tok[0] != "eof":
            raise MitlSyntaxError(f"unexpected trailing input {tok[1]!r}", tok[2])
        return f

    def _or(self):
        f = self._and()
        while self.tz.peek()[0] == "|":
            self.tz.next()
            f = Or(f, self._and())
        return f

    def _and(self):
        f = self._until()
        while self.tz.peek()[0] == "&":
            self.tz.next()
            f = And(f, self._until())
        return f

    def _until(self):
        f = self._unary()
        if self.tz.peek()[0] == "U":
            self.tz.next()
            interval = self._interval()
            return Until(f, self._until(), interval)
        return f

    def _unary(self):
        tok = self.tz.peek()
        if tok[0] == "!":
            self.tz.next()
            return Not(self._unary())
        if tok[0] in TEMPORAL_UNARY:
            self.tz.next()
            interval = self._interval()
            return TEMPORAL_UNARY[tok[0]](self._unary(), interval)
        if tok[0] == "(":
            self.tz.next()
            f = self._or()
            self.tz.expect(")")
            return f
        if tok[0] == "ident":
            self.tz.next()
            return Atom(tok[1])
        raise MitlSyntaxError(f"expected a formula, found {tok[1]!r}", tok[2])

    def _interval(self) -> Interval:
        self.tz.expect("[")
        lo = _parse_number(self.tz.expect("number"))
        self.tz.expect(",")
        tok = self.tz.next()
        if tok[0] == "inf":
            hi = None
        elif tok[0] == "number":
            hi = _parse_number(tok)
        else:
            raise MitlSyntaxError(f"expected a number or 'inf', found {tok[1]!r}", tok[2])
        self.tz.expect("]")
        try:
            return Interval(lo, hi)
        except InvalidParam as exc:
            raise MitlSyntaxError(str(exc), tok[2]) from exc


def parse(text: str):
    """Parse formula text into an AST; raises MitlSyntaxError with position."""
    return _Parser(text).parse()


def _frac_str(v: Fraction) -> str:
    return str(v)


def to_string(f) -> str:
    """Canonical fully parenthesised rendering; round-trips through parse."""
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Not):
        return "!" + _wrap(f.child)
    if isinstance(f, And):
        return f"({to_string(f.left)} & {to_string(f.right)})"
    if isinstance(f, Or):
        return f"({to_string(f.left)} | {to_string(f.right)})"
    if isinstance(f, Until):
        iv = _interval_str(f.interval)
        return f"({_wrap(f.left)} U{iv} {_wrap(f.right)})"
    for sym, cls in TEMPORAL_UNARY.items():
        if isinstance(f, cls):
            return f"{sym}{_interval_str(f.interval)}{_wrap(f.child)}"
    raise InvalidParam(f"not a formula node: {f!r}")


def _wrap(f) -> str:
    s = to_string(f)
    return s if s.startswith("(") or isinstance(f, Atom) else f"({s})"


def _interval_str(iv: Interval) -> str:
    hi = "inf" if iv.hi is None else _frac_str(iv.hi)
    return f"[{_frac_str(iv.lo)},{hi}]"


# ---------------------------------------------------------------------------
# timed words
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimedWord:
    """Finite sequence of (proposition set, rational stamp) pairs."""

    letters: Tuple[frozenset, ...]
    times: Tuple[Fraction, ...]

    def __post_init__(self):
        letters = tuple(frozenset(s) for s in self.letters)
        times = tuple(Fraction(t) for t in self.times)
        if len(letters) != len(times) or not letters:
            raise InvalidParam("word needs equally many letters and stamps, >= 1")
        if times[0] != 0:
            raise InvalidParam("first stamp must be 0")
        for a, b in zip(times, times[1:]):
            if b <= a:
                raise InvalidParam("stamps must be strictly increasing")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return len(self.letters)


# ---------------------------------------------------------------------------
# monitor
# ---------------------------------------------------------------------------

def monitor(f, w: TimedWord) -> bool:
    """Point-based satisfaction of ``f`` by ``w`` at its first position.

    Semantics: temporal operators quantify over the word's positions; a
    finite word is extended by stuttering, i.e. virtual positions carrying
    the final letter at every time strictly after the final stamp.
    """
    return _Monitor(w).sat(f, 0)


class _Monitor:
    def __init__(self, w: TimedWord):
        self.w = w
        self.last = len(w) - 1
        self.cache = {}

    def sat(self, f, l: int) -> bool:
        key = (id(f), l)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        out = self._sat(f, l)
        self.cache[key] = out
        return out

    def _sat(self, f, l: int) -> bool:
        w = self.w
        if isinstance(f, Atom):
            return f.name in w.letters[l]
        if isinstance(f, Not):
            return not self.sat(f.child, l)
        if isinstance(f, And):
            return self.sat(f.left, l) and self.sat(f.right, l)
        if isinstance(f, Or):
            return self.sat(f.left, l) or self.sat(f.right, l)
        if isinstance(f, Next):
            if l < self.last:
                return f.interval.contains(w.times[l + 1] - w.times[l]) and self.sat(
                    f.child, l + 1
                )
            return f.interval.has_positive_point() and self.sat_stutter(f.child)
        d = self.w.times[self.last] - self.w.times[l]  # offset of the last stamp
        if isinstance(f, Eventually):
            for lp in range(l, self.last + 1):
                if f.interval.contains(w.times[lp] - w.times[l]) and self.sat(f.child, lp):
                    return True
            return f.interval.intersects_after(d) and self.sat_stutter(f.child)
        if isinstance(f, Always):
            for lp in range(l, self.last + 1):
                if f.interval.contains(w.times[lp] - w.times[l]) and not self.sat(
                    f.child, lp
                ):
                    return False
            if f.interval.intersects_after(d) and not self.sat_stutter(f.child):
                return False
            return True
        if isinstance(f, Until):
            for lp in range(l, self.last + 1):
                if f.interval.contains(w.times[lp] - w.times[l]) and self.sat(f.right, lp):
                    if all(self.sat(f.left, lpp) for lpp in range(l, lp)):
                        return True
            # stutter witness: strictly after the last stamp, so every
            # concrete position from l on, and the held letter, must satisfy
            # the left operand
            if not f.interval.intersects_after(d):
                return False
            if not (self.sat_stutter(f.right) and self.sat_stutter(f.left)):
                return False
            return all(self.sat(f.left, lpp) for lpp in range(l, self.last + 1))
        raise InvalidParam(f"not a formula node: {f!r}")

    def sat_stutter(self, f) -> bool:
        """Satisfaction at any stutter position (constant held letter)."""
        key = (id(f), -1)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        out = self._sat_stutter(f)
        self.cache[key] = out
        return out

    def _sat_stutter(self, f) -> bool:
        letter = self.w.letters[self.last]
        if isinstance(f, Atom):
            return f.name in letter
        if isinstance(f, Not):
            return not self.sat_stutter(f.child)
        if isinstance(f, And):
            return self.sat_stutter(f.left) and self.sat_stutter(f.right)
        if isinstance(f, Or):
            return self.sat_stutter(f.left) or self.sat_stutter(f.right)
        if isinstance(f, Next):
            return f.interval.has_positive_point() and self.sat_stutter(f.child)
        if isinstance(f, (Eventually, Always)):
            return self.sat_stutter(f.child)
        if isinstance(f, Until):
            if not self.sat_stutter(f.right):
                return False
            return f.interval.contains_zero() or self.sat_stutter(f.left)
        raise InvalidParam(f"not a formula node: {f!r}")
