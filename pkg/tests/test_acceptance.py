"""End-to-end acceptance checks for the whole workbench.

Each test verifies one numbered claim about the system at desk scale and
prints a single visible PASS/FAIL line (bypassing capture) so a plain
``pytest tests/test_acceptance.py`` run yields a one-line verdict per
criterion:

  1. rewriting machine and reference evaluator agree on termination,
     final graph, and read-back answer over a seeded random corpus;
  2. machine beta-transitions equal evaluator beta-steps exactly;
  3. lockstep weak simulation: at most 3 passes per evaluator step, one
     trailing pass after the answer, machine steps <= 4*oracle + 1;
  4. every box occurring during execution is a sub-graph of the initial
     graph, up to isomorphism, and box sizes never grow;
  5. cost ratios on the exponential and iterated-application families
     stay level in k (fitted slope non-positive within tolerance);
  6. space: read-only machines never touch the graph, the rewriting
     machine's graph stays within (sigma+1) copies of the initial one,
     jumping tokens blow up exponentially on the eta-depth family while
     signature tokens stay linear in step count;
  7. structural invariants hold after every machine transition, and
     exactly one transition is applicable in every non-final state;
  8. the translation satisfies its decomposition equation, one-sharing-
     node-per-binder census, and free-variable accounting on random
     context/term pairs.
"""

import random
import time
from types import SimpleNamespace

import pytest

from tokenmachine.baselines import JumpMachine, SignatureMachine
from tokenmachine.bench import bench_rows, eta_depth, ratio_checks
from tokenmachine.corpus import generate, random_closed, reannotate
from tokenmachine.graph import box_subgraph, isomorphic, structural_hash
from tokenmachine.machine import Machine, applicable, cosimulate
from tokenmachine.smallstep import evaluate
from tokenmachine.terms import (
    App,
    AppArg,
    AppArgWithAnswer,
    AppFun,
    ESub,
    ESubBody,
    ESubBound,
    Abs,
    Counter,
    Strategy,
    Var,
    alpha_eq,
    binders_in_scope,
    free_vars,
    free_vars_path,
    parse,
    plug,
    subterms,
)
from tokenmachine.translate import (
    canonical_answer,
    compose,
    readback,
    translate_ectx,
    translate_term,
)

CORPUS_SEED = 2026
CORPUS_SIZE = 1000
ORACLE_FUEL = 10**5
OMEGA = r"(\x. x x) (\x. x x)"


def _verdict(capsys, num: int, ok: bool, text: str) -> None:
    with capsys.disabled():
        print(f"[criterion {num}] {'PASS' if ok else 'FAIL'} {text}")
    assert ok, f"criterion {num}: {text}"


@pytest.fixture(scope="module")
def corpus():
    return generate(CORPUS_SIZE, seed=CORPUS_SEED, max_size=50, halt_fuel=800)


@pytest.fixture(scope="module")
def sweep(corpus):
    """One full run of every corpus term under every strategy.

    Collects, per run: evaluator outcome/counters, machine report numbers,
    graph-isomorphism and readback verdicts, and a lockstep co-simulation.
    The terms are pre-screened to halt, so the one direction of the
    termination claim this cannot cover (divergence agreement) is checked
    separately on the canonical divergent term.
    """
    started = time.perf_counter()
    records = []
    for strat in Strategy:
        for i, raw in enumerate(corpus):
            t = reannotate(raw, strat)
            ev = evaluate(t, fuel=ORACLE_FUEL)
            tg = translate_term(t)
            g0_size = tg.g.size()
            m = Machine(tg.g)
            rep = m.run(fuel=10**6)
            iso_ok = ev.outcome == "answer" and isomorphic(
                m.g, translate_term(ev.answer).g
            )
            rb_ok = ev.outcome == "answer" and alpha_eq(
                readback(m.g), canonical_answer(ev.answer)
            )
            co = cosimulate(t, fuel=ORACLE_FUEL)
            records.append(
                SimpleNamespace(
                    strategy=strat.value,
                    index=i,
                    ev_outcome=ev.outcome,
                    ev_total=ev.total,
                    ev_beta=ev.counts["beta"],
                    m_outcome=rep.outcome,
                    m_steps=rep.steps,
                    m_beta=rep.counts["beta"],
                    m_sigma=rep.counts["sigma"],
                    m_max_graph=rep.max_graph_size,
                    g0_size=g0_size,
                    iso_ok=iso_ok,
                    rb_ok=rb_ok,
                    co_ok=co.ok,
                    co_oracle_steps=co.oracle_steps,
                    co_machine_steps=co.machine_steps,
                )
            )
    elapsed = time.perf_counter() - started
    divergence_ok = all(
        cosimulate(parse(OMEGA, strat), fuel=1500).violations
        == ["evaluator ran out of fuel"]
        for strat in Strategy
    )
    return SimpleNamespace(
        records=records, elapsed=elapsed, divergence_ok=divergence_ok
    )


# -- 1: oracle equivalence -------------------------------------------------


def test_criterion_1_oracle_equivalence(sweep, capsys):
    bad = [
        r
        for r in sweep.records
        if not (
            r.ev_outcome == "answer"
            and r.m_outcome == "final"
            and r.iso_ok
            and r.rb_ok
        )
    ]
    ok = not bad and sweep.divergence_ok and sweep.elapsed < 120
    _verdict(
        capsys,
        1,
        ok,
        f"termination/graph/readback agreement on {len(sweep.records)} runs "
        f"({len(bad)} failures), divergence agreement "
        f"{'held' if sweep.divergence_ok else 'VIOLATED'}, "
        f"{sweep.elapsed:.1f}s < 120s",
    )


# -- 2: exact beta count ---------------------------------------------------


def test_criterion_2_exact_beta_count(sweep, capsys):
    bad = [r for r in sweep.records if r.m_beta != r.ev_beta]
    _verdict(
        capsys,
        2,
        not bad,
        f"machine beta == evaluator beta on "
        f"{len(sweep.records) - len(bad)}/{len(sweep.records)} runs, "
        "exact equality",
    )


# -- 3: weak simulation bound ----------------------------------------------


def test_criterion_3_weak_simulation_bound(sweep, capsys):
    lockstep_bad = [r for r in sweep.records if not r.co_ok]
    bound_bad = [
        r
        for r in sweep.records
        if r.co_machine_steps > 4 * r.co_oracle_steps + 1
        or r.m_steps > 4 * r.ev_total + 1
    ]
    ok = not lockstep_bad and not bound_bad
    _verdict(
        capsys,
        3,
        ok,
        f"lockstep (<=3 passes per evaluator step, one trailing pass) on "
        f"{len(sweep.records) - len(lockstep_bad)}/{len(sweep.records)} runs; "
        f"machine steps <= 4*oracle+1 on all but {len(bound_bad)}",
    )


# -- 4: boxes stay sub-graphs of the initial graph -------------------------


def test_criterion_4_boxes_subgraphs_of_initial(corpus, capsys):
    checked = rewrites = violations = 0
    size_ok = True
    for strat in Strategy:
        for raw in corpus[:30]:
            t = reannotate(raw, strat)
            g0 = translate_term(t).g
            initial = [box_subgraph(g0, b) for b in g0.boxes]
            init_max = max(
                (len(bx.members) for bx in g0.boxes.values()), default=0
            )
            m = Machine(translate_term(t).g)
            state = {"rewrites": 0, "violations": 0, "size_ok": True}

            def after(rec):
                nonlocal checked
                if rec.kind == "pass":
                    return
                state["rewrites"] += 1
                for bang in m.g.boxes:
                    sub = box_subgraph(m.g, bang)
                    checked += 1
                    if not any(isomorphic(sub, ib) for ib in initial):
                        state["violations"] += 1
                if initial and max(
                    len(bx.members) for bx in m.g.boxes.values()
                ) > init_max:
                    state["size_ok"] = False

            rep = m.run(fuel=10**6, on_step=after)
            if rep.outcome != "final":
                violations += 1
            rewrites += state["rewrites"]
            violations += state["violations"]
            size_ok = size_ok and state["size_ok"]
    ok = violations == 0 and size_ok
    _verdict(
        capsys,
        4,
        ok,
        f"{checked} box snapshots across {rewrites} rewrites all isomorphic "
        f"to an initial box ({violations} violations); max box size "
        f"{'never grew' if size_ok else 'GREW'}",
    )


# -- 5: bounded cost ratios on the benchmark families ----------------------


def test_criterion_5_cost_ratio_fits(capsys):
    rows = bench_rows(["church-exp", "iterated-app"], range(1, 11))
    checks = ratio_checks(rows)
    bad = [c for c in checks if not c.ok]
    _verdict(
        capsys,
        5,
        bool(checks) and not bad,
        f"{len(checks) - len(bad)}/{len(checks)} cost-ratio fits have "
        "non-positive slope within 5% of the ratio mean (families "
        "church-exp, iterated-app; k=1..10)",
    )


# -- 6: space behaviour of the three machines ------------------------------


def test_criterion_6_space_table(sweep, corpus, capsys):
    growth_bad = [
        r
        for r in sweep.records
        if r.m_max_graph > (r.m_sigma + 1) * r.g0_size
    ]

    touched = 0
    sig_linear_bad = 0
    nonfinal = 0
    runs = 0
    for raw in corpus:
        t = reannotate(raw, Strategy.NEED)
        g = translate_term(t).g
        before = structural_hash(g)
        for machine_cls in (JumpMachine, SignatureMachine):
            rep = machine_cls(g).run(fuel=10**6)
            runs += 1
            if rep.outcome != "final":
                nonfinal += 1
            if structural_hash(g) != before:
                touched += 1
            if machine_cls is SignatureMachine:
                if rep.max_token_cells > 4 + rep.steps:
                    sig_linear_bad += 1

    jump_cells = []
    exp_ok = True
    for k in range(1, 9):
        g = translate_term(eta_depth(k, Strategy.NEED)).g
        before = structural_hash(g)
        jr = JumpMachine(g).run(fuel=10**6)
        sr = SignatureMachine(g).run(fuel=10**6)
        runs += 2
        if jr.outcome != "final" or sr.outcome != "final":
            nonfinal += 1
        if structural_hash(g) != before:
            touched += 1
        jump_cells.append(jr.max_token_cells)
        if jr.max_token_cells < 2**k - 1:
            exp_ok = False
        if sr.max_token_cells > 4 + sr.steps:
            sig_linear_bad += 1

    ok = (
        not growth_bad
        and touched == 0
        and nonfinal == 0
        and exp_ok
        and sig_linear_bad == 0
    )
    _verdict(
        capsys,
        6,
        ok,
        f"read-only machines finished {runs - nonfinal}/{runs} runs with "
        f"the graph untouched ({touched} mutations); "
        "rewriting-machine graph growth within "
        f"(sigma+1)*|G0| on all but {len(growth_bad)} runs; jumping token "
        f"cells >= 2^k-1 on eta-depth k=1..8 (k=8: {jump_cells[-1]} >= 255: "
        f"{'yes' if exp_ok else 'NO'}); signature token grew at most one "
        f"cell per step ({sig_linear_bad} violations)",
    )


# -- 7: per-transition structural invariants and determinism ---------------


def _graph_snapshot(g):
    nodes = tuple(
        sorted(
            (nid, node.kind, tuple(sorted(node.ports.items())))
            for nid, node in g.nodes.items()
        )
    )
    links = tuple(sorted((lid, link.src, link.dst) for lid, link in g.links.items()))
    boxes = tuple(
        sorted(
            (bang, tuple(sorted(bx.members)), tuple(bx.doors))
            for bang, bx in g.boxes.items()
        )
    )
    return nodes, links, boxes


def _link_link_edges(g):
    return [
        lid
        for lid, link in g.links.items()
        for end in (link.src, link.dst)
        if end is not None and end[0] != "node"
    ]


def test_criterion_7_invariants_and_determinism(corpus, capsys):
    transitions = 0
    problems = []
    for strat in Strategy:
        for i, raw in enumerate(corpus[:40]):
            t = reannotate(raw, strat)
            m = Machine(translate_term(t).g)
            for _ in range(10**6):
                options = applicable(m)
                if m.at_final():
                    if options:
                        problems.append(f"{strat.value}/{i}: final yet {options}")
                    break
                if len(options) != 1:
                    problems.append(
                        f"{strat.value}/{i}@{m.steps}: {len(options)} applicable"
                    )
                    break
                before = _graph_snapshot(m.g)
                comp_before = list(m.comp)
                rec = m.step()
                transitions += 1
                m.g.check()
                bad_links = _link_link_edges(m.g)
                if bad_links:
                    problems.append(f"{strat.value}/{i}: link-link {bad_links}")
                if rec.kind == "pass":
                    if _graph_snapshot(m.g) != before:
                        problems.append(
                            f"{strat.value}/{i}@{m.steps}: pass mutated graph"
                        )
                elif m.comp != comp_before:
                    problems.append(
                        f"{strat.value}/{i}@{m.steps}: rewrite touched "
                        "computation stack"
                    )
            else:
                problems.append(f"{strat.value}/{i}: ran out of fuel")
    _verdict(
        capsys,
        7,
        not problems,
        f"{transitions} transitions validated (graph well-formed, no "
        f"link-link edges, passes pure, rewrites stack-stable, exactly one "
        f"applicable transition); {len(problems)} violations"
        + (f", first: {problems[0]}" if problems else ""),
    )


# -- 8: translation properties ---------------------------------------------


def _random_strategy(rng):
    return rng.choice(list(Strategy))


def _random_path(rng, supply, allow_opened=False, depth=0):
    frames = []
    for _ in range(rng.randint(1, 4)):
        draw = rng.random()
        if draw < 0.30:
            frames.append(AppFun(_random_strategy(rng), random_closed(rng, depth=2)))
        elif draw < 0.55:
            frames.append(AppArg(_random_strategy(rng), random_closed(rng, depth=2)))
        elif allow_opened and draw < 0.70:
            frames.append(
                AppArgWithAnswer(_random_strategy(rng), random_closed(rng, depth=2))
            )
        elif draw < 0.90 or depth > 0:
            binder = f"ctx{next(supply)}"
            frames.append(ESubBody(binder, random_closed(rng, depth=2)))
        else:
            binder = f"ctx{next(supply)}"
            inner = _random_path(rng, supply, allow_opened=False, depth=depth + 1)
            frames.append(ESubBound(binder, inner))
    return tuple(frames)


def _random_plug(rng, path):
    t = random_closed(rng, depth=3)
    in_scope = binders_in_scope(path)
    if in_scope and rng.random() < 0.5:
        t = App(_random_strategy(rng), t, Var(rng.choice(in_scope)))
    return t


def test_criterion_8_translation_properties(corpus, capsys):
    rng = random.Random(8128)
    supply = iter(range(10**6))

    decomposition_bad = 0
    for _ in range(500):
        path = _random_path(rng, supply)
        t = _random_plug(rng, path)
        composed = compose(translate_ectx(path), translate_term(t))
        direct = translate_term(plug(path, t))
        if composed.g.validate() or not isomorphic(composed.g, direct.g):
            decomposition_bad += 1

    census_bad = 0
    for raw in corpus:
        g = translate_term(raw).g
        cons = sum(1 for n in g.nodes.values() if n.kind == "con")
        binders = sum(
            1 for s in subterms(raw) if isinstance(s, (Abs, ESub))
        )
        if cons != binders:
            census_bad += 1
    for raw in corpus[:100]:
        answer = evaluate(reannotate(raw, Strategy.NEED), fuel=ORACLE_FUEL).answer
        g = translate_term(answer).g
        cons = sum(1 for n in g.nodes.values() if n.kind == "con")
        binders = sum(
            1 for s in subterms(answer) if isinstance(s, (Abs, ESub))
        )
        if cons != binders:
            census_bad += 1

    fv_bad = 0
    for _ in range(1000):
        path = _random_path(rng, supply, allow_opened=True)
        t = _random_plug(rng, path)
        scoped = set(binders_in_scope(path))
        expected = free_vars_path(path) + Counter(
            {x: c for x, c in free_vars(t).items() if x not in scoped}
        )
        if free_vars(plug(path, t)) != expected:
            fv_bad += 1

    ok = decomposition_bad == 0 and census_bad == 0 and fv_bad == 0
    _verdict(
        capsys,
        8,
        ok,
        f"decomposition holds on 500 context/term pairs "
        f"({decomposition_bad} failures); one con per binder on "
        f"{len(corpus)} corpus + 100 answer translations "
        f"({census_bad} failures); free-variable accounting on 1000 pairs "
        f"({fv_bad} failures)",
    )
