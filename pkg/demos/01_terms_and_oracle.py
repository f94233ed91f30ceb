#!/usr/bin/env python3
"""Terms, strategy annotations, and the reference evaluator.

The term language is the pure lambda calculus plus explicit substitution
frames `t [x <- u]` that evaluation leaves behind.  Every application
node carries the strategy it was parsed under — call-by-need, or
call-by-value in either operand order — and the small-step evaluator
consults that annotation to decide whether an argument is forced before
or after the function call.

Run:  python3 demos/01_terms_and_oracle.py
"""

from tokenmachine import Strategy, evaluate, parse, render
from tokenmachine.smallstep import split_answer


def banner(title: str) -> None:
    print()
    print(f"== {title} " + "=" * max(0, 66 - len(title)))


# A term whose argument is expensive: (\z. z z) (\w. w) takes extra work
# to reach a value, and call-by-need never asks for it.
SRC = "(\\x. \\y. y) ((\\z. z z) (\\w. w))"

banner("one source text, three annotated readings")
print(f"source: {SRC}")
for strategy in Strategy:
    t = parse(SRC, strategy)
    print(f"  parsed under {strategy.value:7s} -> {render(t)}  "
          f"(top application annotated {t.strategy.value})")
print("the rendering is identical; the strategy lives on each application")
print("node and only changes which reductions fire, not the syntax.")

banner("evaluating under each strategy")
for strategy in Strategy:
    rep = evaluate(parse(SRC, strategy))
    counts = dict(sorted(rep.counts.items()))
    print(f"  {strategy.value:7s}: outcome={rep.outcome}  counts={counts}  "
          f"total={rep.total}")
    print(f"           answer: {render(rep.answer)}")
print("call-by-need does one beta and leaves the argument untouched in a")
print("frame; both call-by-value orders pay two extra betas to turn the")
print("argument into a value before the outer call.")

banner("answers split into frames plus a core value")
rep = evaluate(parse(SRC, Strategy.NEED))
frames, core = split_answer(rep.answer)
print(f"  answer : {render(rep.answer)}")
print(f"  core   : {render(core)}")
for fr in frames:
    print(f"  frame  : {fr.binder} <- {render(fr.bound)}")

banner("divergence is reported as fuel exhaustion, not an error")
omega = "(\\x. x x) (\\x. x x)"
rep = evaluate(parse(omega, Strategy.NEED), fuel=500)
print(f"  {omega} under need: outcome={rep.outcome} ({rep.detail})")

skip = f"(\\x. \\y. y) ({omega})"
for strategy in Strategy:
    rep = evaluate(parse(skip, strategy), fuel=500)
    print(f"  (\\x. \\y. y) omega under {strategy.value:7s}: outcome={rep.outcome}")
print("need discards the diverging argument unevaluated; call-by-value")
print("insists on a value first and spins until the fuel runs out.")
