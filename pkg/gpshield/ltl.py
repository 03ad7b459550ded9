"""
Safe LTL formulas, their co-safe negation and violation automata.

Text syntax (loosest binding first)::

    a -> f          implication, left side an atom or negated atom
    f | f           disjunction
    f & f           conjunction
    f U<=k f        bounded until
    !a  X f  G f  G<=k f  F<=k f  (f)  true  false

The DFA of a co-safe formula is built by formula progression over letters of
``2^AP``; states are syntactically normalized residual formulas, ``true`` is
the accepting sink and ``false`` the rejecting sink.
"""

import logging
import re
from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_MAX_STATES = 1_000_000


class LtlSyntaxError(ValueError):
    """Malformed formula text; ``position`` is the 0-based character offset."""

    def __init__(self, message: str, position: int = 0, text: str = ""):
        self.position = position
        self.text = text
        if text:
            message = "{message} at position {p}:\n  {text}\n  {pad}^".format(
                message=message, p=position, text=text, pad=" " * position
            )
        super().__init__(message)


class UnsafeFormulaError(LtlSyntaxError):
    """Syntactically valid formula outside the safe fragment."""


class Formula:
    """Base class of formula nodes."""

    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And((self, other))

    def __or__(self, other: "Formula") -> "Formula":
        return Or((self, other))


@dataclass(frozen=True)
class Const(Formula):
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class Atom(Formula):
    name: str
    negated: bool = False

    def __str__(self) -> str:
        return ("!" if self.negated else "") + self.name


@dataclass(frozen=True)
class And(Formula):
    args: Tuple[Formula, ...]

    def __str__(self) -> str:
        return "(" + " & ".join(str(a) for a in self.args) + ")"


@dataclass(frozen=True)
class Or(Formula):
    args: Tuple[Formula, ...]

    def __str__(self) -> str:
        return "(" + " | ".join(str(a) for a in self.args) + ")"


@dataclass(frozen=True)
class Next(Formula):
    arg: Formula

    def __str__(self) -> str:
        return "X " + str(self.arg)


@dataclass(frozen=True)
class Globally(Formula):
    arg: Formula

    def __str__(self) -> str:
        return "G " + str(self.arg)


@dataclass(frozen=True)
class Eventually(Formula):
    arg: Formula

    def __str__(self) -> str:
        return "F " + str(self.arg)


@dataclass(frozen=True)
class BoundedGlobally(Formula):
    arg: Formula
    bound: int

    def __str__(self) -> str:
        return "G<={k} {a}".format(k=self.bound, a=self.arg)


@dataclass(frozen=True)
class BoundedEventually(Formula):
    arg: Formula
    bound: int

    def __str__(self) -> str:
        return "F<={k} {a}".format(k=self.bound, a=self.arg)


@dataclass(frozen=True)
class BoundedUntil(Formula):
    left: Formula
    right: Formula
    bound: int

    def __str__(self) -> str:
        return "({l} U<={k} {r})".format(l=self.left, k=self.bound, r=self.right)


@dataclass(frozen=True)
class BoundedRelease(Formula):
    left: Formula
    right: Formula
    bound: int

    def __str__(self) -> str:
        return "({l} R<={k} {r})".format(l=self.left, k=self.bound, r=self.right)


BOUNDED = (BoundedGlobally, BoundedEventually, BoundedUntil, BoundedRelease)

# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<bounded>[GFU])\s*<=\s*(?P<bound>\d+)"
    r"|(?P<arrow>->)"
    r"|(?P<op>&&|\|\||[!&|()])"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r")"
)
_KEYWORDS = {"X", "G", "F", "U", "R", "true", "false"}


class _Parser:
    def __init__(self, text: str, ap: Optional[Sequence[str]]):
        self.text = text
        self.ap = None if ap is None else set(ap)
        self.tokens = self._tokenize(text)
        self.index = 0

    def _tokenize(self, text: str) -> List[Tuple[str, str, int]]:
        tokens = []
        position = 0
        stripped = text.rstrip()
        while position < len(stripped):
            match = _TOKEN.match(stripped, position)
            if match is None or match.end() == position:
                start = position + len(stripped[position:]) - len(
                    stripped[position:].lstrip()
                )
                raise LtlSyntaxError("Unexpected character", start, text)
            start = match.end() - len(match.group(0).lstrip())
            if match.group("bounded"):
                kind = match.group("bounded") + "<="
                tokens.append((kind, match.group("bound"), start))
            elif match.group("arrow"):
                tokens.append(("->", "->", start))
            elif match.group("op"):
                op = {"&&": "&", "||": "|"}.get(match.group("op"), match.group("op"))
                tokens.append((op, op, start))
            else:
                ident = match.group("ident")
                kind = ident if ident in _KEYWORDS else "atom"
                tokens.append((kind, ident, start))
            position = match.end()
        tokens.append(("end", "", len(stripped)))
        return tokens

    @property
    def current(self) -> Tuple[str, str, int]:
        return self.tokens[self.index]

    def advance(self) -> Tuple[str, str, int]:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, kind: str) -> Tuple[str, str, int]:
        token = self.current
        if token[0] != kind:
            found = "end of input" if token[0] == "end" else "'{v}'".format(v=token[1])
            raise LtlSyntaxError(
                "Expected '{k}' but found {f}".format(k=kind, f=found),
                token[2],
                self.text,
            )
        return self.advance()

    def parse(self) -> Formula:
        if self.current[0] == "end":
            raise LtlSyntaxError("Empty formula", 0, self.text)
        formula = self.implication()
        if self.current[0] != "end":
            raise LtlSyntaxError(
                "Unexpected '{v}'".format(v=self.current[1]), self.current[2], self.text
            )
        return formula

    def implication(self) -> Formula:
        start = self.current[2]
        left = self.disjunction()
        if self.current[0] != "->":
            return left
        self.advance()
        if not isinstance(left, (Atom, Const)):
            raise LtlSyntaxError(
                "The left side of '->' must be an atomic proposition", start, self.text
            )
        right = self.implication()
        return Or((negate(left), right))

    def disjunction(self) -> Formula:
        args = [self.conjunction()]
        while self.current[0] == "|":
            self.advance()
            args.append(self.conjunction())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conjunction(self) -> Formula:
        args = [self.until()]
        while self.current[0] == "&":
            self.advance()
            args.append(self.until())
        return args[0] if len(args) == 1 else And(tuple(args))

    def until(self) -> Formula:
        left = self.unary()
        kind, value, position = self.current
        if kind == "U<=":
            self.advance()
            bound = self._bound(value, position)
            return BoundedUntil(left, self.until(), bound)
        if kind in ("U", "R"):
            raise UnsafeFormulaError(
                "Unbounded '{k}' is not syntactically safe; use U<=k".format(k=kind),
                position,
                self.text,
            )
        return left

    def _bound(self, value: str, position: int) -> int:
        bound = int(value)
        if bound < 1:
            raise LtlSyntaxError("Temporal bounds must be >= 1", position, self.text)
        return bound

    def unary(self) -> Formula:
        kind, value, position = self.current
        if kind == "!":
            self.advance()
            operand = self.unary()
            if not isinstance(operand, (Atom, Const)):
                raise LtlSyntaxError(
                    "Negation is only allowed on atomic propositions",
                    position,
                    self.text,
                )
            return negate(operand)
        if kind == "X":
            self.advance()
            return Next(self.unary())
        if kind == "G":
            self.advance()
            return Globally(self.unary())
        if kind == "G<=":
            self.advance()
            return BoundedGlobally(self.unary(), self._bound(value, position))
        if kind == "F<=":
            self.advance()
            return BoundedEventually(self.unary(), self._bound(value, position))
        if kind == "F":
            raise UnsafeFormulaError(
                "Unbounded 'F' is not syntactically safe; use F<=k", position, self.text
            )
        return self.primary()

    def primary(self) -> Formula:
        kind, value, position = self.current
        if kind == "(":
            self.advance()
            formula = self.implication()
            self.expect(")")
            return formula
        if kind in ("true", "false"):
            self.advance()
            return TRUE if kind == "true" else FALSE
        if kind == "atom":
            self.advance()
            if self.ap is not None and value not in self.ap:
                raise LtlSyntaxError(
                    "Unknown atomic proposition '{v}' (declared: {ap})".format(
                        v=value, ap=sorted(self.ap)
                    ),
                    position,
                    self.text,
                )
            return Atom(value)
        found = "end of input" if kind == "end" else "'{v}'".format(v=value)
        raise LtlSyntaxError(
            "Expected a formula but found {f}".format(f=found), position, self.text
        )


def parse(text: str, ap: Optional[Sequence[str]] = None) -> Formula:
    """
    Parse a safe LTL formula.

    Parameters
    ----------
    text : str
        Formula text.
    ap : Sequence[str], optional
        Declared atomic propositions; atoms outside it are rejected.

    Returns
    -------
    Formula
        The syntax tree.

    Raises
    ------
    LtlSyntaxError
        Malformed text.
    UnsafeFormulaError
        Unbounded ``F``/``U`` or another construct outside the safe fragment.
    """
    if not text or not text.strip():
        raise LtlSyntaxError("Empty formula")
    return _Parser(text, ap).parse()


# ---------------------------------------------------------------------------
# rewriting


def negate(formula: Formula) -> Formula:
    """Negation pushed to the atoms (negation normal form)."""
    if isinstance(formula, Const):
        return FALSE if formula.value else TRUE
    if isinstance(formula, Atom):
        return Atom(formula.name, not formula.negated)
    if isinstance(formula, And):
        return Or(tuple(negate(a) for a in formula.args))
    if isinstance(formula, Or):
        return And(tuple(negate(a) for a in formula.args))
    if isinstance(formula, Next):
        return Next(negate(formula.arg))
    if isinstance(formula, Globally):
        return Eventually(negate(formula.arg))
    if isinstance(formula, Eventually):
        return Globally(negate(formula.arg))
    if isinstance(formula, BoundedGlobally):
        return BoundedEventually(negate(formula.arg), formula.bound)
    if isinstance(formula, BoundedEventually):
        return BoundedGlobally(negate(formula.arg), formula.bound)
    if isinstance(formula, BoundedUntil):
        return BoundedRelease(
            negate(formula.left), negate(formula.right), formula.bound
        )
    if isinstance(formula, BoundedRelease):
        return BoundedUntil(negate(formula.left), negate(formula.right), formula.bound)
    raise TypeError("Unknown formula node {f!r}".format(f=formula))


def is_safe(formula: Formula) -> bool:
    """Whether the formula lies in the safe fragment (no unbounded F or U)."""
    if isinstance(formula, (Const, Atom)):
        return True
    if isinstance(formula, Eventually):
        return False
    return all(is_safe(child) for child in children(formula))


def children(formula: Formula) -> Tuple[Formula, ...]:
    if isinstance(formula, (And, Or)):
        return formula.args
    if isinstance(
        formula, (Next, Globally, Eventually, BoundedGlobally, BoundedEventually)
    ):
        return (formula.arg,)
    if isinstance(formula, (BoundedUntil, BoundedRelease)):
        return (formula.left, formula.right)
    return ()


def negate_to_cosafe(formula: Formula) -> Formula:
    """
    Negation of a safe formula in negation normal form (a co-safe formula).

    Raises
    ------
    UnsafeFormulaError
        The input is not safe.
    """
    if not is_safe(formula):
        raise UnsafeFormulaError(
            "Only safe formulas can be negated to co-safe form, got {f}".format(
                f=formula
            )
        )
    return negate(formula)


def _unroll(formula: Formula) -> Formula:
    """One step of the bounded operator recurrences."""
    k = formula.bound
    if isinstance(formula, BoundedGlobally):
        if k == 0:
            return formula.arg
        return And((formula.arg, Next(BoundedGlobally(formula.arg, k - 1))))
    if isinstance(formula, BoundedEventually):
        if k == 0:
            return formula.arg
        return Or((formula.arg, Next(BoundedEventually(formula.arg, k - 1))))
    if isinstance(formula, BoundedUntil):
        if k == 0:
            return formula.right
        rest = Next(BoundedUntil(formula.left, formula.right, k - 1))
        return Or((formula.right, And((formula.left, rest))))
    if k == 0:
        return formula.right
    rest = Next(BoundedRelease(formula.left, formula.right, k - 1))
    return And((formula.right, Or((formula.left, rest))))


def expand_bounded(formula: Formula) -> Formula:
    """Rewrite every bounded operator into nested next, and, or."""
    if isinstance(formula, BOUNDED):
        return expand_bounded(_unroll(formula))
    if isinstance(formula, And):
        return And(tuple(expand_bounded(a) for a in formula.args))
    if isinstance(formula, Or):
        return Or(tuple(expand_bounded(a) for a in formula.args))
    if isinstance(formula, Next):
        return Next(expand_bounded(formula.arg))
    if isinstance(formula, Globally):
        return Globally(expand_bounded(formula.arg))
    if isinstance(formula, Eventually):
        return Eventually(expand_bounded(formula.arg))
    return formula


def temporal_depth(formula: Formula) -> int:
    """Number of positions a formula inspects beyond the first (G counts 1)."""
    if isinstance(formula, (Const, Atom)):
        return 0
    extra = 0
    if isinstance(formula, (Next, Globally, Eventually)):
        extra = 1
    elif isinstance(formula, BOUNDED):
        extra = formula.bound
    return extra + max(temporal_depth(c) for c in children(formula))


def normalize(formula: Formula) -> Formula:
    """
    Syntactic normal form of the top-level boolean structure: flattened,
    constant-folded, deduplicated and sorted ``&``/``|``; ``p & !p`` folds to
    false.
    """
    if not isinstance(formula, (And, Or)):
        return formula
    kind = type(formula)
    absorbing = FALSE if kind is And else TRUE
    neutral = TRUE if kind is And else FALSE
    args = set()
    stack = list(formula.args)
    while stack:
        arg = normalize(stack.pop())
        if type(arg) is kind:
            stack.extend(arg.args)
        elif arg == absorbing:
            return absorbing
        elif arg != neutral:
            args.add(arg)
    if kind is And:
        for arg in args:
            if isinstance(arg, Atom) and Atom(arg.name, not arg.negated) in args:
                return FALSE
    if not args:
        return neutral
    if len(args) == 1:
        return args.pop()
    return kind(tuple(sorted(args, key=str)))


def progress(formula: Formula, letter: FrozenSet[str]) -> Formula:
    """
    Residual obligation for the rest of the trace after reading *letter*.
    """
    if isinstance(formula, Const):
        return formula
    if isinstance(formula, Atom):
        return TRUE if (formula.name in letter) != formula.negated else FALSE
    if isinstance(formula, And):
        return normalize(And(tuple(progress(a, letter) for a in formula.args)))
    if isinstance(formula, Or):
        return normalize(Or(tuple(progress(a, letter) for a in formula.args)))
    if isinstance(formula, Next):
        return normalize(formula.arg)
    if isinstance(formula, Eventually):
        return normalize(Or((progress(formula.arg, letter), formula)))
    if isinstance(formula, Globally):
        return normalize(And((progress(formula.arg, letter), formula)))
    if isinstance(formula, BOUNDED):
        return progress(_unroll(formula), letter)
    raise TypeError("Unknown formula node {f!r}".format(f=formula))


# ---------------------------------------------------------------------------
# finite trace semantics

Trace = Sequence[Iterable[str]]


def _evaluate(
    formula: Formula, trace: List[FrozenSet[str]], i: int, strong: bool
) -> bool:
    if isinstance(formula, Const):
        return formula.value
    if i >= len(trace):
        return not strong
    if isinstance(formula, Atom):
        return (formula.name in trace[i]) != formula.negated
    if isinstance(formula, And):
        return all(_evaluate(a, trace, i, strong) for a in formula.args)
    if isinstance(formula, Or):
        return any(_evaluate(a, trace, i, strong) for a in formula.args)
    if isinstance(formula, Next):
        return _evaluate(formula.arg, trace, i + 1, strong)
    if isinstance(formula, Globally):
        # positions past the end take the default value
        positions = range(i, len(trace))
        inside = all(_evaluate(formula.arg, trace, j, strong) for j in positions)
        return inside and not strong
    if isinstance(formula, Eventually):
        positions = range(i, len(trace))
        inside = any(_evaluate(formula.arg, trace, j, strong) for j in positions)
        return inside or not strong
    k = formula.bound
    if isinstance(formula, BoundedGlobally):
        return all(_evaluate(formula.arg, trace, i + j, strong) for j in range(k + 1))
    if isinstance(formula, BoundedEventually):
        return any(_evaluate(formula.arg, trace, i + j, strong) for j in range(k + 1))
    if isinstance(formula, BoundedUntil):
        return any(
            _evaluate(formula.right, trace, i + j, strong)
            and all(_evaluate(formula.left, trace, i + l, strong) for l in range(j))
            for j in range(k + 1)
        )
    if isinstance(formula, BoundedRelease):
        return all(
            _evaluate(formula.right, trace, i + j, strong)
            or any(_evaluate(formula.left, trace, i + l, strong) for l in range(j))
            for j in range(k + 1)
        )
    raise TypeError("Unknown formula node {f!r}".format(f=formula))


def evaluate_strong(formula: Formula, trace: Trace) -> bool:
    """
    Truth on a finite trace when every position past its end falsifies all
    non-constant formulas (the prefix alone must witness satisfaction).
    """
    return _evaluate(formula, [frozenset(s) for s in trace], 0, True)


def evaluate_weak(formula: Formula, trace: Trace) -> bool:
    """
    Truth on a finite trace when positions past its end satisfy everything
    (the prefix must not witness a violation).
    """
    return _evaluate(formula, [frozenset(s) for s in trace], 0, False)


# ---------------------------------------------------------------------------
# automata


@dataclass(frozen=True, eq=False)
class Dfa:
    """
    Deterministic automaton over letters of ``2^AP``.

    A letter is an integer bit mask; bit ``i`` is set when ``ap[i]`` holds.
    """

    ap: Tuple[str, ...]
    transitions: np.ndarray
    initial: int
    accepting: np.ndarray
    formulas: Tuple[str, ...]

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_letters(self) -> int:
        return self.transitions.shape[1]

    @property
    def rejecting(self) -> np.ndarray:
        """States from which acceptance is impossible (the ``false`` residual)."""
        return np.array([f == str(FALSE) for f in self.formulas], dtype=bool)

    def letter(self, labels: Iterable[str]) -> int:
        """Letter of a label set; labels outside the AP are ignored."""
        labels = set(labels)
        return sum(1 << i for i, name in enumerate(self.ap) if name in labels)

    def letter_set(self, letter: int) -> FrozenSet[str]:
        return frozenset(name for i, name in enumerate(self.ap) if letter >> i & 1)

    def step(self, state: int, letter: Union[int, Iterable[str]]) -> int:
        if not isinstance(letter, (int, np.integer)):
            letter = self.letter(letter)
        return int(self.transitions[state, letter])

    def run(self, trace: Sequence[Union[int, Iterable[str]]]) -> List[int]:
        """States visited while reading *trace*, initial state first."""
        states = [self.initial]
        for letter in trace:
            states.append(self.step(states[-1], letter))
        return states

    def accepts(self, trace: Sequence[Union[int, Iterable[str]]]) -> bool:
        """Whether the run on *trace* visits an accepting state."""
        return bool(np.any(self.accepting[self.run(trace)]))

    def to_text(self) -> str:
        """Adjacency listing, one line per (state, letter)."""
        lines = [
            "ap: {ap}".format(ap=" ".join(self.ap)),
            "initial: {z}".format(z=self.initial),
            "accepting: {z}".format(
                z=" ".join(str(z) for z in np.flatnonzero(self.accepting))
            ),
        ]
        for z, formula in enumerate(self.formulas):
            lines.append("state {z}: {f}".format(z=z, f=formula))
            for letter in range(self.n_letters):
                label = "{" + ",".join(sorted(self.letter_set(letter))) + "}"
                lines.append(
                    "  {z} --{label}--> {t}".format(
                        z=z, label=label, t=self.transitions[z, letter]
                    )
                )
        return "\n".join(lines) + "\n"


def step(dfa: Dfa, state: int, letter) -> int:
    """Successor of *state* under *letter*."""
    return dfa.step(state, letter)


def accepts(dfa: Dfa, trace) -> bool:
    """Whether *dfa* accepts a finite trace (its run visits an accepting state)."""
    return dfa.accepts(trace)


def to_dfa(
    formula: Formula, ap: Sequence[str], max_states: int = DEFAULT_MAX_STATES
) -> Dfa:
    """
    Build the DFA of a co-safe formula by progression.

    States are the distinct normalized residuals reachable from the formula.
    The count includes the accepting ``true`` sink and, whenever some prefix
    can no longer be completed to a violation, the rejecting ``false`` sink.
    For ``X b | X X b`` this gives 5 states: the start, ``b | X b``, ``b``,
    ``true`` and ``false``.

    Parameters
    ----------
    formula : Formula
        Co-safe formula in negation normal form.
    ap : Sequence[str]
        Atomic propositions defining the alphabet, in bit order.
    max_states : int, optional
        State budget, by default 10^6.

    Returns
    -------
    Dfa
        Automaton whose accepting sink is the ``true`` residual.

    Raises
    ------
    RuntimeError
        The state budget is exceeded.
    """
    ap = tuple(ap)
    if len(set(ap)) != len(ap):
        raise ValueError("Duplicate atomic propositions in {ap}.".format(ap=ap))
    letters = [
        frozenset(name for i, name in enumerate(ap) if letter >> i & 1)
        for letter in range(2 ** len(ap))
    ]
    start = normalize(formula)
    index: Dict[Formula, int] = {start: 0}
    states: List[Formula] = [start]
    rows: List[List[int]] = []
    queue = deque([start])
    while queue:
        current = queue.popleft()
        if isinstance(current, Const):
            rows.append([index[current]] * len(letters))
            continue
        row = []
        for letter in letters:
            successor = progress(current, letter)
            if successor not in index:
                if len(states) >= max_states:
                    message = (
                        "DFA construction exceeded the budget of {n} states; the "
                        "formula is too large for expansion-based "
                        "construction.".format(n=max_states)
                    )
                    raise RuntimeError(message)
                index[successor] = len(states)
                states.append(successor)
                queue.append(successor)
            row.append(index[successor])
        rows.append(row)
    transitions = np.array(rows, dtype=np.intp).reshape(len(states), len(letters))
    accepting = np.array([s == TRUE for s in states], dtype=bool)
    logger.debug("DFA with %d states over %d letters", len(states), len(letters))
    return Dfa(
        ap=ap,
        transitions=transitions,
        initial=0,
        accepting=accepting,
        formulas=tuple(str(s) for s in states),
    )


def compile_safety(
    text: str, ap: Sequence[str], max_states: int = DEFAULT_MAX_STATES
) -> Tuple[Formula, Formula, Dfa]:
    """
    Parse a safe formula and build the DFA of its violations.

    Returns
    -------
    Tuple[Formula, Formula, Dfa]
        The safe formula, its expanded co-safe negation and the DFA.
    """
    safe = parse(text, ap)
    cosafe = expand_bounded(negate_to_cosafe(safe))
    dfa = to_dfa(cosafe, ap, max_states)
    logger.info(
        "Compiled '%s' into a DFA with %d states (%d accepting)",
        text,
        dfa.n_states,
        int(dfa.accepting.sum()),
    )
    return safe, cosafe, dfa
