#!/usr/bin/env python3
"""Running the evaluator and the machine in lockstep.

`cosimulate` drives both semantics over the same term and checks that
every evaluator step is matched by a short block of machine transitions
with the right labels, that rewrite counts line up, and (optionally,
every `deep_every` oracle steps) that the machine's graph still reads
back to the evaluator's current focus.  It is the workhorse behind the
package's equivalence tests, so this demo also shows it *failing*: a
deliberately corrupted machine run is caught, not waved through.

Run:  python3 demos/04_cosimulation.py
"""

from tokenmachine import Strategy, cosimulate, parse, render


def banner(title: str) -> None:
    print()
    print(f"== {title} " + "=" * max(0, 66 - len(title)))


SRC = "(\\x. \\y. y x) ((\\z. z) (\\w. w))"
t = parse(SRC, Strategy.NEED)

banner("a clean lockstep run")
r = cosimulate(t, deep_every=2)
print(f"  term: {SRC}")
print(f"  ok={r.ok}  oracle steps={r.oracle_steps}  machine steps={r.machine_steps}")
print(f"  machine counts: {dict(sorted(r.counts.items()))}")
print(f"  oracle counts : {dict(sorted(r.oracle_counts.items()))}")
print(f"  deep graph-vs-term checks passed: {r.deep_checks}")
print(f"  shared answer: {render(r.answer)}")
print(f"  bound: {r.machine_steps} <= 4*{r.oracle_steps}+1 = {4 * r.oracle_steps + 1}")

banner("the checker catches an out-of-place transition")
rc = cosimulate(t, corrupt_at=2)
print("  corrupting the graph after machine transition 2 ...")
print(f"  ok={rc.ok}")
for v in rc.violations:
    print(f"  violation: {v}")

banner("... and a run that wedges the token")
rc = cosimulate(t, corrupt_at=6)
print("  corrupting the graph after machine transition 6 ...")
print(f"  ok={rc.ok}")
for v in rc.violations:
    print(f"  violation: {v}")

banner("divergence on both sides is reported, not mistaken for a bug")
omega = parse("(\\x. x x) (\\x. x x)", Strategy.NEED)
ro = cosimulate(omega, fuel=400)
print(f"  omega with fuel=400: ok={ro.ok}  violations={ro.violations}")
print(f"  machine transitions spent: {ro.machine_steps}")
print("  the only complaint is the evaluator's fuel — the machine matched")
print("  every oracle step until then, which is exactly what a diverging")
print("  term should look like.")
