"""Lambda terms with strategy-annotated applications and explicit substitutions.

The surface syntax is plain lambda calculus::

    term := var | "\\" var "." term | term term | "(" term ")"

Applications are annotated with the evaluation strategy chosen at parse time
(uniform over the whole term).  Explicit substitutions ``t [x <- u]`` never
appear in input; they are produced by the evaluators and shown in rendered
output.

The module also provides the one-hole contexts ("paths") the small-step
evaluator uses to keep its place: a state is a stack of frames plus the
subterm in focus, and ``plug`` folds the stack back into a closed-over term.
"""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterator, Union


class Strategy(enum.Enum):
    NEED = "need"
    CBV_LR = "cbv-lr"
    CBV_RL = "cbv-rl"

    @classmethod
    def from_name(cls, name: str) -> "Strategy":
        for s in cls:
            if s.value == name:
                return s
        raise ValueError(
            f"unknown strategy {name!r} (expected one of: "
            + ", ".join(s.value for s in cls)
            + ")"
        )

    @property
    def is_value_strategy(self) -> bool:
        return self is not Strategy.NEED


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Abs:
    binder: str
    body: "Term"


@dataclass(frozen=True)
class App:
    strategy: Strategy
    fun: "Term"
    arg: "Term"


@dataclass(frozen=True)
class ESub:
    """Explicit substitution: body with binder delayed-bound to bound."""

    body: "Term"
    binder: str
    bound: "Term"


Term = Union[Var, Abs, App, ESub]


def is_value(t: Term) -> bool:
    return isinstance(t, Abs)


def size(t: Term) -> int:
    match t:
        case Var():
            return 1
        case Abs(_, body):
            return 1 + size(body)
        case App(_, fun, arg):
            return 1 + size(fun) + size(arg)
        case ESub(body, _, bound):
            return 1 + size(body) + size(bound)
    raise TypeError(t)


def subterms(t: Term) -> Iterator[Term]:
    yield t
    match t:
        case Abs(_, body):
            yield from subterms(body)
        case App(_, fun, arg):
            yield from subterms(fun)
            yield from subterms(arg)
        case ESub(body, _, bound):
            yield from subterms(body)
            yield from subterms(bound)


def free_vars(t: Term) -> Counter:
    """Multiset of free variable occurrences."""
    match t:
        case Var(name):
            return Counter({name: 1})
        case Abs(binder, body):
            inner = free_vars(body)
            inner.pop(binder, None)
            return inner
        case App(_, fun, arg):
            return free_vars(fun) + free_vars(arg)
        case ESub(body, binder, bound):
            inner = free_vars(body)
            inner.pop(binder, None)
            return inner + free_vars(bound)
    raise TypeError(t)


def binders(t: Term) -> list[str]:
    out = []
    for s in subterms(t):
        if isinstance(s, Abs):
            out.append(s.binder)
        elif isinstance(s, ESub):
            out.append(s.binder)
    return out


def all_names(t: Term) -> set:
    names = set(free_vars(t))
    names.update(binders(t))
    return names


def alpha_eq(s: Term, t: Term) -> bool:
    """Alpha-equivalence; strategy annotations must agree too."""

    def go(s, t, senv, tenv):
        match s, t:
            case Var(a), Var(b):
                return senv.get(a, ("free", a)) == tenv.get(b, ("free", b))
            case Abs(x, sb), Abs(y, tb):
                lvl = len(senv)
                return go(sb, tb, {**senv, x: lvl}, {**tenv, y: lvl})
            case App(st, sf, sa), App(tt, tf, ta):
                return st is tt and go(sf, tf, senv, tenv) and go(sa, ta, senv, tenv)
            case ESub(sb, x, su), ESub(tb, y, tu):
                if not go(su, tu, senv, tenv):
                    return False
                lvl = len(senv)
                return go(sb, tb, {**senv, x: lvl}, {**tenv, y: lvl})
            case _:
                return False

    return go(s, t, {}, {})


_BASE_RE = re.compile(r"^(.*?)(\d*)$")


class NameSupply:
    """Fresh-name generator with a single monotone counter.

    Never hands out a name in ``used``; hands out ``base``+counter otherwise.
    """

    def __init__(self, used=()):
        self.used = set(used)
        self.counter = 0

    def reserve(self, name: str) -> None:
        self.used.add(name)

    def fresh(self, base: str = "x") -> str:
        base = _BASE_RE.match(base).group(1) or "x"
        while True:
            self.counter += 1
            cand = f"{base}{self.counter}"
            if cand not in self.used:
                self.used.add(cand)
                return cand


def fresh_copy(t: Term, supply: NameSupply) -> Term:
    """Copy of t with every binder renamed to a fresh name.

    Keeps the global binder-uniqueness invariant when the evaluator
    duplicates a value into a variable position.
    """

    def go(t, env):
        match t:
            case Var(name):
                return Var(env.get(name, name))
            case Abs(binder, body):
                b2 = supply.fresh(binder)
                return Abs(b2, go(body, {**env, binder: b2}))
            case App(strategy, fun, arg):
                return App(strategy, go(fun, env), go(arg, env))
            case ESub(body, binder, bound):
                bound2 = go(bound, env)
                b2 = supply.fresh(binder)
                return ESub(go(body, {**env, binder: b2}), b2, bound2)
        raise TypeError(t)

    return go(t, {})


# --------------------------------------------------------------------------
# parsing


class ParseError(Exception):
    def __init__(self, msg, line, col):
        super().__init__(f"parse error at {line}:{col}: {msg}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(r"\\|\.|\(|\)|[A-Za-z_][A-Za-z0-9_']*|\S")


def _tokenize(src: str):
    for lineno, line in enumerate(src.splitlines() or [""], start=1):
        line = line.split("#", 1)[0]
        for m in _TOKEN_RE.finditer(line):
            yield m.group(0), lineno, m.start() + 1
    yield None, lineno if src.splitlines() else 1, len(src) + 1


class _Parser:
    def __init__(self, src: str, strategy: Strategy):
        self.toks = list(_tokenize(src))
        self.pos = 0
        self.strategy = strategy

    def peek(self):
        return self.toks[self.pos][0]

    def next(self):
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def fail(self, msg):
        _, line, col = self.toks[self.pos]
        raise ParseError(msg, line, col)

    def parse_term(self) -> Term:
        t = self.parse_atom_seq()
        return t

    def parse_atom_seq(self) -> Term:
        atoms = []
        while True:
            tok = self.peek()
            if tok == "\\":
                # A lambda swallows the rest of the sequence as its body.
                atoms.append(self.parse_lambda())
                break
            if tok is None or tok in (")", "."):
                break
            atoms.append(self.parse_atom())
        if not atoms:
            self.fail("expected a term")
        t = atoms[0]
        for a in atoms[1:]:
            t = App(self.strategy, t, a)
        return t

    def parse_lambda(self) -> Term:
        self.next()  # backslash
        tok, line, col = self.next()
        if tok is None or not tok[0].isalpha() and tok[0] != "_":
            raise ParseError("expected a variable after '\\'", line, col)
        binder = tok
        dot, line, col = self.next()
        if dot != ".":
            raise ParseError("expected '.' after lambda binder", line, col)
        return Abs(binder, self.parse_atom_seq())

    def parse_atom(self) -> Term:
        tok = self.peek()
        if tok == "(":
            self.next()
            t = self.parse_atom_seq()
            tok2, line, col = self.next()
            if tok2 != ")":
                raise ParseError("expected ')'", line, col)
            return t
        if tok is not None and (tok[0].isalpha() or tok[0] == "_"):
            return Var(self.next()[0])
        self.fail(f"unexpected {tok!r}")


def parse(src: str, strategy: Strategy = Strategy.NEED) -> Term:
    p = _Parser(src, strategy)
    t = p.parse_term()
    if p.peek() is not None:
        p.fail(f"trailing input {p.peek()!r}")
    return _uniquify(t)


def _uniquify(t: Term) -> Term:
    """Rename binders so every binder in the term is distinct (and distinct
    from every free variable).  Downstream machinery relies on this."""
    supply = NameSupply(all_names(t))
    seen = set(free_vars(t))

    def go(t, env):
        match t:
            case Var(name):
                return Var(env.get(name, name))
            case Abs(binder, body):
                if binder in seen:
                    b2 = supply.fresh(binder)
                else:
                    b2 = binder
                seen.add(b2)
                return Abs(b2, go(body, {**env, binder: b2}))
            case App(strategy, fun, arg):
                return App(strategy, go(fun, env), go(arg, env))
            case ESub(body, binder, bound):
                bound2 = go(bound, env)
                if binder in seen:
                    b2 = supply.fresh(binder)
                else:
                    b2 = binder
                seen.add(b2)
                return ESub(go(body, {**env, binder: b2}), b2, bound2)
        raise TypeError(t)

    return go(t, {})


# --------------------------------------------------------------------------
# rendering


def render(t: Term) -> str:
    def atom(t):
        match t:
            case Var(name):
                return name
            case _:
                return "(" + full(t) + ")"

    def appl(t):
        # application chain: left operand may itself be an application
        match t:
            case App(_, fun, arg):
                return appl(fun) + " " + atom(arg)
            case ESub():
                return atom(t)
            case _:
                return atom(t)

    def full(t):
        match t:
            case Abs(binder, body):
                return "\\" + binder + ". " + full(body)
            case App():
                return appl(t)
            case ESub(body, binder, bound):
                return appl(body) + " [" + binder + " <- " + full(bound) + "]"
            case Var(name):
                return name

    return full(t)


# --------------------------------------------------------------------------
# one-hole contexts as frame stacks (root-first)


@dataclass(frozen=True)
class AppFun:
    """Hole in function position, argument untouched: <hole> t."""

    strategy: Strategy
    arg: Term


@dataclass(frozen=True)
class AppArgWithAnswer:
    """Hole in argument position, function already an answer: a <hole>."""

    strategy: Strategy
    fun_answer: Term


@dataclass(frozen=True)
class AppArg:
    """Hole in argument position, function untouched: t <hole>."""

    strategy: Strategy
    fun: Term


@dataclass(frozen=True)
class ESubBody:
    """Hole in the body of an explicit substitution: <hole> [x <- u]."""

    binder: str
    bound: Term


@dataclass(frozen=True)
class ESubBound:
    """Hole in the bound term, entered from a particular occurrence of the
    binder in the body.

    ``occurrence`` is the path from the body root to that occurrence; plugging
    Var(binder) into it recovers the body.  Remembering the occurrence (rather
    than the flattened body) lets the evaluator return the focus to the exact
    variable position it descended from.
    """

    binder: str
    occurrence: "Path"


Frame = Union[AppFun, AppArgWithAnswer, AppArg, ESubBody, ESubBound]
Path = tuple  # tuple[Frame, ...], root-first


def fill_frame(frame: Frame, t: Term) -> Term:
    match frame:
        case AppFun(strategy, arg):
            return App(strategy, t, arg)
        case AppArgWithAnswer(strategy, fun_answer):
            return App(strategy, fun_answer, t)
        case AppArg(strategy, fun):
            return App(strategy, fun, t)
        case ESubBody(binder, bound):
            return ESub(t, binder, bound)
        case ESubBound(binder, occurrence):
            return ESub(plug(occurrence, Var(binder)), binder, t)
    raise TypeError(frame)


def plug(path: Path, t: Term) -> Term:
    for frame in reversed(path):
        t = fill_frame(frame, t)
    return t


def binders_in_scope(path: Path) -> list[str]:
    """Binders whose scope covers the hole, outermost first.

    Only substitution-body frames introduce scope; a hole in the bound
    position of ``t [x <- <hole>]`` is outside x's scope.
    """
    return [f.binder for f in path if isinstance(f, ESubBody)]


_HOLE = Var("\x00hole")  # unparseable, cannot clash with a user name


def free_vars_path(path: Path) -> Counter:
    """Free variable occurrences contributed by the context itself."""
    fv = free_vars(plug(path, _HOLE))
    fv.pop(_HOLE.name, None)
    return fv
