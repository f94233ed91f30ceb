"""Seeded generation of closed lambda terms for differential testing.

The generator is deliberately abstraction-heavy: most draws normalise in a
few dozen evaluator steps under every strategy, so large corpora can be
pushed through machine/evaluator comparisons on a small time budget.
Screening against the small-step evaluator filters the rare diverger out;
divergence handling itself is exercised by dedicated fuel tests, not here.
"""

from __future__ import annotations

import random
from typing import List, Optional

from .smallstep import evaluate
from .terms import Abs, App, Strategy, Term, Var, free_vars, parse, render, size


def random_closed(rng: random.Random, depth: int = 5, scope: tuple = ()) -> Term:
    """Draw one random closed term.

    The root may be an application of closed subterms, so a corpus has
    real executions (and the occasional diverger), not just values.
    """
    r = rng.random()
    if depth <= 0:
        if scope and rng.random() < 0.8:
            return Var(rng.choice(scope))
        return Abs("u", Var("u"))
    if scope and r < 0.3:
        return Var(rng.choice(scope))
    # Under a binder, applications are kept rare: they are what allows a
    # bound variable to replicate itself, and a corpus dominated by
    # divergers would burn its whole differential-testing budget on fuel.
    abs_cut = 0.75 if scope else 0.5
    if r < abs_cut:
        binder = f"v{rng.randrange(10 ** 6)}"
        return Abs(binder, random_closed(rng, depth - 1, scope + (binder,)))
    return App(
        Strategy.NEED,
        random_closed(rng, depth - 1, scope),
        random_closed(rng, depth - 1, scope),
    )


def reannotate(t: Term, strategy: Strategy) -> Term:
    """The same term with every application set to the given strategy."""
    return parse(render(t), strategy)


def generate(
    count: int,
    seed: int,
    depth: int = 5,
    max_size: int = 400,
    halt_fuel: Optional[int] = 800,
) -> List[Term]:
    """A deterministic corpus of closed terms.

    With ``halt_fuel`` set, candidates are screened by running the
    small-step evaluator under all three strategies and keeping only terms
    that reach an answer within the budget.
    """
    rng = random.Random(seed)
    out: List[Term] = []
    while len(out) < count:
        t = random_closed(rng, depth)
        if size(t) > max_size or free_vars(t):
            continue
        if halt_fuel is not None:
            reports = (
                evaluate(reannotate(t, s), fuel=halt_fuel) for s in Strategy
            )
            if any(r.outcome != "answer" for r in reports):
                continue
        out.append(t)
    return out
