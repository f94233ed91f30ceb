"""Reference small-step evaluator over focused terms.

A state is a zipper (path, focus): the focus is the subterm under evaluation
and the path records how to rebuild the whole program around it.  Transitions
either move the focus (labelled ``eps``), fire a beta step introducing an
explicit substitution (``beta``), or copy a value out of a substitution into
the variable occurrence that demanded it (``sigma``).

Answers are values wrapped in substitution frames.  Evaluation never goes
under a lambda, and substitution bodies are evaluated at most once per demand
chain; under call-by-need a substitution's bound term is evaluated in place
the first time the bound variable is demanded.

Rule inventory (labels in parentheses):

==== =================== =====================================================
 #    name                fires when
==== =================== =====================================================
 1    enter-fun-need      focus is a call-by-need application (eps)
 2    beta-need           value in function position of a need application (beta)
 3    enter-fun-lv        focus is a left-to-right value application (eps)
 4    to-arg-lv           value in function position: move to argument (eps)
 5    beta-lv             value in argument position, function done (beta)
 6    enter-arg-rv        focus is a right-to-left value application (eps)
 7    to-fun-rv           value in argument position: move to function (eps)
 8    beta-rv             value in function position, argument done (beta)
 9    lookup              focus is a variable: move to its bound term (eps)
 10   subst               value in bound position: copy it to the occurrence
                          that demanded it, sharing stays behind (sigma)
==== =================== =====================================================

The rules keep two invariants the graph machinery leans on: the focus is
always a pure term (no explicit substitutions inside it), and every binder in
the state is globally unique.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .terms import (
    Abs,
    App,
    AppArg,
    AppArgWithAnswer,
    AppFun,
    ESub,
    ESubBody,
    ESubBound,
    NameSupply,
    Path,
    Strategy,
    Term,
    Var,
    all_names,
    fresh_copy,
    plug,
)

BETA, SIGMA, EPS = "beta", "sigma", "eps"

RULES = {
    1: ("enter-fun-need", EPS),
    2: ("beta-need", BETA),
    3: ("enter-fun-lv", EPS),
    4: ("to-arg-lv", EPS),
    5: ("beta-lv", BETA),
    6: ("enter-arg-rv", EPS),
    7: ("to-fun-rv", EPS),
    8: ("beta-rv", BETA),
    9: ("lookup", EPS),
    10: ("subst", SIGMA),
}


def split_answer(t: Term):
    """Peel the substitution spine: returns (frames, core) with
    plug(frames, core) == t.  t is an answer iff core is a lambda."""
    frames = []
    while isinstance(t, ESub):
        frames.append(ESubBody(t.binder, t.bound))
        t = t.body
    return tuple(frames), t


def is_answer(t: Term) -> bool:
    return isinstance(split_answer(t)[1], Abs)


class Stuck(Exception):
    pass


@dataclass
class Step:
    rule: int
    name: str
    label: str


@dataclass
class Evaluator:
    """Stepwise evaluator; state is exposed so drivers can align against it."""

    path: Path
    focus: Term
    supply: NameSupply
    steps_taken: int = 0

    @classmethod
    def inject(cls, t: Term) -> "Evaluator":
        return cls(path=(), focus=t, supply=NameSupply(all_names(t)))

    def whole(self) -> Term:
        return plug(self.path, self.focus)

    def at_answer(self) -> bool:
        return isinstance(self.focus, Abs) and all(
            isinstance(f, ESubBody) for f in self.path
        )

    def answer(self) -> Term:
        assert self.at_answer()
        return self.whole()

    def _active_frame_index(self) -> Optional[int]:
        """Index of the innermost frame that is not a substitution body,
        or None when every frame is one (the state is an answer)."""
        for j in range(len(self.path) - 1, -1, -1):
            if not isinstance(self.path[j], ESubBody):
                return j
        return None

    def step(self) -> Optional[Step]:
        """Perform one transition; None when the state is an answer."""
        f = self.focus
        match f:
            case App(Strategy.NEED, fun, arg):
                self.path += (AppFun(Strategy.NEED, arg),)
                self.focus = fun
                return self._did(1)
            case App(Strategy.CBV_LR, fun, arg):
                self.path += (AppFun(Strategy.CBV_LR, arg),)
                self.focus = fun
                return self._did(3)
            case App(Strategy.CBV_RL, fun, arg):
                self.path += (AppArg(Strategy.CBV_RL, fun),)
                self.focus = arg
                return self._did(6)
            case Var(x):
                return self._lookup(x)
            case Abs():
                return self._value_at_frame()
            case ESub():
                raise Stuck("explicit substitution in focus (invariant breach)")
        raise TypeError(f)

    def _lookup(self, x: str) -> Step:
        for i in range(len(self.path) - 1, -1, -1):
            frame = self.path[i]
            if isinstance(frame, ESubBody) and frame.binder == x:
                occurrence = self.path[i + 1 :]
                spine, core = split_answer(frame.bound)
                self.path = self.path[:i] + (ESubBound(x, occurrence),) + spine
                self.focus = core
                return self._did(9)
        raise Stuck(f"free variable {x} in demand position")

    def _value_at_frame(self) -> Optional[Step]:
        j = self._active_frame_index()
        if j is None:
            return None  # answer reached
        frame = self.path[j]
        before, answer_frames = self.path[:j], self.path[j + 1 :]
        v = self.focus
        match frame:
            case AppFun(Strategy.NEED, arg):
                self.path = before + answer_frames + (ESubBody(v.binder, arg),)
                self.focus = v.body
                return self._did(2)
            case AppFun(Strategy.CBV_LR, arg):
                fun_answer = plug(answer_frames, v)
                self.path = before + (AppArgWithAnswer(Strategy.CBV_LR, fun_answer),)
                self.focus = arg
                return self._did(4)
            case AppArgWithAnswer(Strategy.CBV_LR, fun_answer):
                fun_frames, lam = split_answer(fun_answer)
                if not isinstance(lam, Abs):
                    raise Stuck("application of a non-function")
                arg_answer = plug(answer_frames, v)
                self.path = before + fun_frames + (ESubBody(lam.binder, arg_answer),)
                self.focus = lam.body
                return self._did(5)
            case AppArg(Strategy.CBV_RL, fun):
                arg_answer = plug(answer_frames, v)
                self.path = before + (AppFun(Strategy.CBV_RL, arg_answer),)
                self.focus = fun
                return self._did(7)
            case AppFun(Strategy.CBV_RL, arg_answer):
                self.path = before + answer_frames + (ESubBody(v.binder, arg_answer),)
                self.focus = v.body
                return self._did(8)
            case ESubBound(x, occurrence):
                self.path = (
                    before + answer_frames + (ESubBody(x, v),) + occurrence
                )
                self.focus = fresh_copy(v, self.supply)
                return self._did(10)
        raise Stuck(f"value against unexpected frame {frame!r}")

    def _did(self, rule: int) -> Step:
        self.steps_taken += 1
        name, label = RULES[rule]
        return Step(rule, name, label)


def substitute(t: Term, x: str, u: Term) -> Term:
    """Plain substitution; safe because states keep binders globally unique,
    so no binder in t can capture a free variable of u."""
    match t:
        case Var(name):
            return u if name == x else t
        case Abs(binder, body):
            return t if binder == x else Abs(binder, substitute(body, x, u))
        case App(strategy, fun, arg):
            return App(strategy, substitute(fun, x, u), substitute(arg, x, u))
        case ESub(body, binder, bound):
            bound2 = substitute(bound, x, u)
            body2 = body if binder == x else substitute(body, x, u)
            return ESub(body2, binder, bound2)
    raise TypeError(t)


def unfold(t: Term) -> Term:
    """Flatten explicit substitutions away (no evaluation)."""
    match t:
        case ESub(body, binder, bound):
            return substitute(unfold(body), binder, unfold(bound))
        case Abs(binder, body):
            return Abs(binder, unfold(body))
        case App(strategy, fun, arg):
            return App(strategy, unfold(fun), unfold(arg))
        case Var():
            return t
    raise TypeError(t)


@dataclass
class EvalReport:
    outcome: str  # "answer" | "fuel" | "stuck"
    answer: Optional[Term]
    counts: Counter = field(default_factory=Counter)
    steps: list = field(default_factory=list)
    detail: str = ""

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def evaluate(t: Term, fuel: int = 10**6, keep_steps: bool = False) -> EvalReport:
    ev = Evaluator.inject(t)
    report = EvalReport(outcome="answer", answer=None)
    for _ in range(fuel):
        try:
            step = ev.step()
        except Stuck as e:
            report.outcome = "stuck"
            report.detail = str(e)
            return report
        if step is None:
            report.answer = ev.answer()
            return report
        report.counts[step.label] += 1
        if keep_steps:
            report.steps.append(step)
    report.outcome = "fuel"
    report.detail = f"no answer within {fuel} steps"
    return report
