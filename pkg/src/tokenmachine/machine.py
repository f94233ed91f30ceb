"""Token-guided graph rewriting: the interleaved machine.

A single token walks the graph produced by :mod:`tokenmachine.translate`.
Passes move the token without touching the graph; when the token raises a
rewrite flag, the next step performs graph surgery at the token position
(beta contraction, box opening, or box copying) and the walk resumes.  The
strategy annotation stored on each application node decides which way the
token turns, so one pass table covers call-by-need and both call-by-value
orders.

The module also provides :func:`cosimulate`, which runs the machine in
lockstep with the small-step evaluator from :mod:`tokenmachine.smallstep`
and checks that every evaluator step is matched by a short, predictable
burst of machine transitions whose net effect is the translated state.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .graph import Graph, isomorphic
from .smallstep import BETA, EPS, SIGMA, Evaluator
from .terms import Strategy, Term
from .translate import compose, translate_ectx, translate_term

# Stack symbols.  The computation stack holds applications waiting for a
# function, argument-first markers, and the "function ready" mark left by a
# bounced lambda; the box stack holds value markers, box-opening obligations
# from dereliction nodes, and references to the sharing-node input the token
# travelled through.
AT = "@"
STAR = "*"
DONE = "!"
FUNMARK = "fn"
DIA = "<>"

UP = "up"
DOWN = "down"

FLAG_NONE = "-"
FLAG_LAM = "lam"
FLAG_BOX = "box"


@dataclass(frozen=True)
class LinkRef:
    """Box-stack entry remembering which sharing-node input was crossed."""

    link: str


class NoRedexMatch(Exception):
    """The token reached a configuration with no applicable transition."""


@dataclass
class StepRecord:
    """One machine transition, as seen by traces and the cosimulator."""

    index: int
    kind: str  # "pass" | "beta" | "open" | "copy"
    node: str  # node kind the token interacted with ("" for rewrites)
    label: str  # beta | sigma | eps
    weight: int
    pos: str
    direction: str
    flag: str
    s_depth: int
    b_depth: int
    graph_size: int
    graph_delta: int = 0


@dataclass
class MachineReport:
    outcome: str  # "final" | "fuel" | "stuck"
    counts: Counter
    steps: int
    weighted_cost: int
    max_graph_size: int
    max_token_cells: int
    detail: str = ""

    @property
    def total(self) -> int:
        return self.steps


class Machine:
    """The rewriting token machine over a strategy-annotated graph.

    The machine owns (and mutates) the graph it is given.  ``corrupt_at``
    injects a deliberate stack fault before the given transition index; it
    exists so the harness can demonstrate that lockstep checking catches a
    misbehaving machine.
    """

    def __init__(self, graph: Graph, corrupt_at: Optional[int] = None):
        self.g = graph
        if graph.root is None:
            raise ValueError("machine needs a rooted graph")
        self.pos: str = graph.root
        self.direction = UP
        self.flag = FLAG_NONE
        self.comp: list = []
        self.box: list = [STAR]
        self.steps = 0
        self.counts: Counter = Counter()
        self.weighted_cost = 0
        self.max_graph_size = graph.size()
        self.max_token_cells = self.token_cells()
        self.corrupt_at = corrupt_at

    # -- token accounting --------------------------------------------------

    def token_cells(self) -> int:
        """Token size in cells: direction plus both stacks (with bottoms)."""
        return 1 + (1 + len(self.comp)) + (1 + len(self.box))

    def token_bits(self) -> int:
        """Crude bit count: link references need log2(#links) bits, marks 2."""
        link_count = max(2, len(self.g.links))
        link_bits = max(1, (link_count - 1).bit_length())
        bits = 2  # direction + flag
        for item in self.comp:
            bits += 2
        for item in self.box:
            bits += link_bits if isinstance(item, LinkRef) else 2
        return bits

    # -- state predicates --------------------------------------------------

    def at_final(self) -> bool:
        return (
            self.direction == DOWN
            and self.pos == self.g.root
            and self.flag == FLAG_NONE
            and not self.comp
            and self.box == [DONE]
        )

    # -- single transition -------------------------------------------------

    def step(self) -> Optional[StepRecord]:
        if self.at_final():
            return None
        if self.corrupt_at is not None and self.steps == self.corrupt_at:
            self.comp.append(STAR)
            self.corrupt_at = None
        size_before = self.g.size()
        if self.flag == FLAG_LAM:
            rec = self._beta()
        elif self.flag == FLAG_BOX:
            top = self.box[-1] if self.box else None
            if top == DIA:
                rec = self._open()
            elif isinstance(top, LinkRef):
                rec = self._copy()
            else:
                raise NoRedexMatch(f"box flag with box stack top {top!r}")
        else:
            rec = self._pass()
        rec.graph_size = self.g.size()
        rec.graph_delta = rec.graph_size - size_before
        self.steps += 1
        rec.index = self.steps
        self.counts[rec.label] += 1
        if rec.kind == "open":
            self.counts["epsR"] += 1
        self.weighted_cost += rec.weight
        self.max_graph_size = max(self.max_graph_size, self.g.size())
        self.max_token_cells = max(self.max_token_cells, self.token_cells())
        return rec

    # -- pass transitions --------------------------------------------------

    def _record(self, kind: str, node: str, label: str, weight: int) -> StepRecord:
        return StepRecord(
            index=0,
            kind=kind,
            node=node,
            label=label,
            weight=weight,
            pos=self.pos,
            direction=self.direction,
            flag=self.flag,
            s_depth=len(self.comp),
            b_depth=len(self.box),
            graph_size=self.g.size(),
        )

    def _pass(self) -> StepRecord:
        link = self.g.links[self.pos]
        end = link.dst if self.direction == UP else link.src
        if end is None or end[0] != "node":
            raise NoRedexMatch(
                f"token moving {self.direction} along {self.pos} hit no node"
            )
        _, nid, port = end
        node = self.g.nodes[nid]
        if self.direction == UP:
            self._pass_up(node, port)
        else:
            self._pass_down(node, port)
        return self._record("pass", node.kind, EPS, 1)

    def _pass_up(self, node, port: str) -> None:
        kind = node.kind
        if kind == "app" and port == "root":
            strategy = node.meta.get("strategy")
            if strategy == Strategy.NEED.value:
                self.comp.append(AT)
                self.pos = node.ports["fun"]
            elif strategy == Strategy.CBV_LR.value:
                self.comp.append(STAR)
                self.pos = node.ports["fun"]
            elif strategy == Strategy.CBV_RL.value:
                self.box.append(STAR)
                self.pos = node.ports["arg"]
            else:
                raise NoRedexMatch(f"application without strategy: {node.id}")
        elif kind == "der" and port == "in":
            self.box.append(DIA)
            self.pos = node.ports["out"]
        elif kind == "con" and port.startswith("in"):
            self.box.append(LinkRef(self.pos))
            self.pos = node.ports["out"]
        elif kind == "bang" and port == "root":
            top = self.box[-1] if self.box else None
            if top == STAR:
                self.box[-1] = DONE
                self.direction = DOWN
            elif top == DIA or isinstance(top, LinkRef):
                self.flag = FLAG_BOX
                self.pos = node.ports["inside"]
            else:
                raise NoRedexMatch(f"box root with box stack top {top!r}")
        elif kind == "lam" and port == "root":
            top = self.comp[-1] if self.comp else None
            if top == AT:
                self.comp.pop()
                self.flag = FLAG_LAM
                self.pos = node.ports["body"]
            elif top == STAR:
                self.comp[-1] = FUNMARK
                self.direction = DOWN
            else:
                raise NoRedexMatch(f"lambda root with comp stack top {top!r}")
        else:
            raise NoRedexMatch(f"no upward transition at {kind}.{port}")

    def _pass_down(self, node, port: str) -> None:
        kind = node.kind
        if kind == "app" and port == "fun":
            top = self.comp[-1] if self.comp else None
            if top == FUNMARK:
                self.comp.pop()
                self.box.append(STAR)
                self.pos = node.ports["arg"]
                self.direction = UP
            else:
                raise NoRedexMatch(
                    f"descending to application function port with comp top {top!r}"
                )
        elif kind == "app" and port == "arg":
            top = self.box[-1] if self.box else None
            if top == DONE:
                self.box.pop()
                self.comp.append(AT)
                self.pos = node.ports["fun"]
                self.direction = UP
            else:
                raise NoRedexMatch(
                    f"descending to application argument port with box top {top!r}"
                )
        else:
            raise NoRedexMatch(f"no downward transition at {kind}.{port}")

    # -- rewrites ----------------------------------------------------------

    def _beta(self) -> StepRecord:
        g = self.g
        d = g.links[self.pos]
        if d.src is None or d.src[0] != "node":
            raise NoRedexMatch("beta flag at a link with no source node")
        _, lam_id, sport = d.src
        lam = g.nodes[lam_id]
        if lam.kind != "lam" or sport != "body":
            raise NoRedexMatch(f"beta flag at {lam.kind}.{sport}, not a body")
        root_link = g.links[lam.ports["root"]]
        if root_link.src is None or root_link.src[0] != "node":
            raise NoRedexMatch("beta: lambda root not fed by a node")
        _, app_id, aport = root_link.src
        app = g.nodes[app_id]
        if app.kind != "app" or aport != "fun":
            raise NoRedexMatch(
                f"beta: lambda fed by {app.kind}.{aport}, not an application"
            )
        e_r = g.links[app.ports["root"]]
        r_u = g.links[app.ports["arg"]]
        p = g.links[lam.ports["param"]]
        body_target = d.dst
        arg_target = r_u.dst
        g.delete_link(d.id)
        g.delete_link(r_u.id)
        g.delete_link(root_link.id)
        g.set_dst(e_r.id, body_target)
        g.set_dst(p.id, arg_target)
        g.delete_node(app_id)
        g.delete_node(lam_id)
        self.pos = e_r.id
        self.direction = UP
        self.flag = FLAG_NONE
        return self._record("beta", "", BETA, 1)

    def _open(self) -> StepRecord:
        g = self.g
        r_in = g.links[self.pos]
        if r_in.src is None or r_in.src[0] != "node":
            raise NoRedexMatch("open: token not inside a box")
        _, bang_id, sport = r_in.src
        if g.nodes[bang_id].kind != "bang" or sport != "inside":
            raise NoRedexMatch("open: token position is not a box interior root")
        if bang_id not in g.boxes:
            raise NoRedexMatch("open: box has no registry entry")
        pb = g.links[g.nodes[bang_id].ports["root"]]
        if pb.src is None or pb.src[0] != "node":
            raise NoRedexMatch("open: box root fed by nothing")
        _, der_id, dport = pb.src
        der = g.nodes[der_id]
        if der.kind != "der" or dport != "out":
            raise NoRedexMatch(
                f"open: box fed by {der.kind}.{dport}, not a dereliction"
            )
        entry_link = g.links[der.ports["in"]]
        doors = len(g.boxes[bang_id].doors)
        entry = g.open_box(bang_id)
        target = g.links[entry].dst
        g.delete_link(entry)
        g.set_dst(entry_link.id, target)
        g.delete_node(der_id)
        self.box.pop()  # the dereliction marker
        self.pos = entry_link.id
        self.direction = UP
        self.flag = FLAG_NONE
        return self._record("open", "", EPS, doors)

    def _copy(self) -> StepRecord:
        g = self.g
        r_in = g.links[self.pos]
        if r_in.src is None or r_in.src[0] != "node":
            raise NoRedexMatch("copy: token not inside a box")
        _, bang_id, sport = r_in.src
        if g.nodes[bang_id].kind != "bang" or sport != "inside":
            raise NoRedexMatch("copy: token position is not a box interior root")
        if bang_id not in g.boxes:
            raise NoRedexMatch("copy: box has no registry entry")
        pb = g.links[g.nodes[bang_id].ports["root"]]
        if pb.src is None or pb.src[0] != "node":
            raise NoRedexMatch("copy: box root fed by nothing")
        _, con_id, cport = pb.src
        if g.nodes[con_id].kind != "con" or cport != "out":
            raise NoRedexMatch("copy: box not behind a sharing node")
        ref = self.box[-1]
        e = g.links[ref.link]
        if e.dst is None or e.dst[:2] != ("node", con_id):
            raise NoRedexMatch(
                "copy: remembered input does not belong to the sharing node"
            )
        weight = len(g.boxes[bang_id].members)
        door_targets = []
        for door in g.boxes[bang_id].doors:
            ext = g.links[g.nodes[door].ports["outside"]]
            door_targets.append((door, ext.dst))
        new_bang, nmap, _ = g.copy_box(bang_id)
        g.set_dst(e.id, ("node", new_bang, "root"))
        for door, tgt in door_targets:
            if tgt is None or tgt[0] != "node":
                raise NoRedexMatch("copy: box door wired to nothing")
            _, tgt_id, _ = tgt
            if g.nodes[tgt_id].kind != "con":
                raise NoRedexMatch(
                    f"copy: box door feeds a {g.nodes[tgt_id].kind}, "
                    "expected a sharing node"
                )
            port = g.con_add_input(tgt_id)
            g.wire(("node", nmap[door], "outside"), ("node", tgt_id, port))
        self.box.pop()
        self.pos = e.id
        self.direction = UP
        self.flag = FLAG_NONE
        return self._record("copy", "", SIGMA, weight)

    # -- driver ------------------------------------------------------------

    def run(
        self,
        fuel: int = 10**7,
        on_step: Optional[Callable[[StepRecord], None]] = None,
    ) -> MachineReport:
        detail = ""
        outcome = "fuel"
        for _ in range(fuel):
            try:
                rec = self.step()
            except NoRedexMatch as exc:
                outcome = "stuck"
                detail = str(exc)
                break
            if rec is None:
                outcome = "final"
                break
            if on_step is not None:
                on_step(rec)
        return MachineReport(
            outcome=outcome,
            counts=Counter(self.counts),
            steps=self.steps,
            weighted_cost=self.weighted_cost,
            max_graph_size=self.max_graph_size,
            max_token_cells=self.max_token_cells,
            detail=detail,
        )


def run_term(t: Term, fuel: int = 10**7) -> tuple[Machine, MachineReport]:
    """Translate ``t``, run the machine on it, and return both."""
    machine = Machine(translate_term(t).g)
    return machine, machine.run(fuel)


def applicable(m: Machine) -> list:
    """Names of every transition whose guard matches the current state.

    Enumerated independently of the step dispatcher so determinism —
    exactly one applicable transition per non-final state — is checkable
    rather than assumed.
    """
    if m.at_final():
        return []
    out = []
    s_top = m.comp[-1] if m.comp else None
    b_top = m.box[-1] if m.box else None
    if m.flag == FLAG_LAM:
        d = m.g.links[m.pos]
        if d.src is not None and d.src[0] == "node":
            lam = m.g.nodes[d.src[1]]
            if lam.kind == "lam" and d.src[2] == "body":
                entry = m.g.links[lam.ports["root"]].src
                if (
                    entry is not None
                    and entry[0] == "node"
                    and m.g.nodes[entry[1]].kind == "app"
                    and entry[2] == "fun"
                ):
                    out.append("rewrite-beta")
        return out
    if m.flag == FLAG_BOX:
        r_in = m.g.links[m.pos]
        if r_in.src is not None and r_in.src[0] == "node":
            bang = m.g.nodes[r_in.src[1]]
            if (
                bang.kind == "bang"
                and r_in.src[2] == "inside"
                and r_in.src[1] in m.g.boxes
            ):
                feed = m.g.links[bang.ports["root"]].src
                if feed is not None and feed[0] == "node":
                    feeder = m.g.nodes[feed[1]]
                    if b_top == DIA and feeder.kind == "der" and feed[2] == "out":
                        out.append("rewrite-open")
                    if (
                        isinstance(b_top, LinkRef)
                        and feeder.kind == "con"
                        and feed[2] == "out"
                    ):
                        e = m.g.links.get(b_top.link)
                        if e is not None and e.dst is not None and e.dst[:2] == (
                            "node",
                            feed[1],
                        ):
                            out.append("rewrite-copy")
        return out
    link = m.g.links[m.pos]
    end = link.dst if m.direction == UP else link.src
    if end is None or end[0] != "node":
        return out
    _, nid, port = end
    kind = m.g.nodes[nid].kind
    strategy = m.g.nodes[nid].meta.get("strategy")
    guards = [
        ("pass-app-need", UP, "app", port == "root" and strategy == "need"),
        ("pass-app-lv", UP, "app", port == "root" and strategy == "cbv-lr"),
        ("pass-app-rv", UP, "app", port == "root" and strategy == "cbv-rl"),
        ("pass-der", UP, "der", port == "in"),
        ("pass-con", UP, "con", port.startswith("in")),
        ("pass-bang-bounce", UP, "bang", port == "root" and b_top == STAR),
        (
            "pass-bang-enter",
            UP,
            "bang",
            port == "root" and (b_top == DIA or isinstance(b_top, LinkRef)),
        ),
        ("pass-lam-call", UP, "lam", port == "root" and s_top == AT),
        ("pass-lam-bounce", UP, "lam", port == "root" and s_top == STAR),
        ("pass-app-fun-down", DOWN, "app", port == "fun" and s_top == FUNMARK),
        ("pass-app-arg-down", DOWN, "app", port == "arg" and b_top == DONE),
    ]
    for name, direction, node_kind, guard in guards:
        if m.direction == direction and kind == node_kind and guard:
            out.append(name)
    return out


# --------------------------------------------------------------------------
# lockstep comparison against the small-step evaluator
# --------------------------------------------------------------------------

# For each evaluator rule, the machine performs a fixed burst of transitions.
# Entries are (kind, node-kind) with ``None`` matching any node annotation.
_PASS = "pass"
EXPECTED_BLOCKS: dict[int, tuple[tuple[str, Optional[str]], ...]] = {
    1: ((_PASS, "app"), (_PASS, "der")),
    3: ((_PASS, "app"), (_PASS, "der")),
    6: ((_PASS, "app"),),
    9: ((_PASS, "con"),),
    2: ((_PASS, "bang"), ("open", None), (_PASS, "lam"), ("beta", None)),
    8: ((_PASS, "bang"), ("open", None), (_PASS, "lam"), ("beta", None)),
    5: ((_PASS, "bang"), (_PASS, "app"), (_PASS, "lam"), ("beta", None)),
    4: ((_PASS, "bang"), ("open", None), (_PASS, "lam"), (_PASS, "app")),
    7: ((_PASS, "bang"), (_PASS, "app"), (_PASS, "der")),
    10: ((_PASS, "bang"), ("copy", None)),
}
FINAL_BLOCK: tuple[tuple[str, Optional[str]], ...] = ((_PASS, "bang"),)


@dataclass
class CosimReport:
    ok: bool
    oracle_steps: int
    machine_steps: int
    counts: Counter
    oracle_counts: Counter
    deep_checks: int
    violations: list = field(default_factory=list)
    answer: Optional[Term] = None  # oracle answer, when it reached one
    machine_graph: Optional[Graph] = None

    def first_violation(self) -> str:
        return self.violations[0] if self.violations else ""


def _take_block(
    machine: Machine,
    expected: Iterable[tuple[str, Optional[str]]],
    context: str,
    violations: list,
) -> bool:
    for kind, node in expected:
        try:
            rec = machine.step()
        except NoRedexMatch as exc:
            violations.append(f"{context}: machine stuck: {exc}")
            return False
        if rec is None:
            violations.append(f"{context}: machine finished mid-block")
            return False
        if rec.kind != kind or (node is not None and rec.node != node):
            violations.append(
                f"{context}: expected {kind}/{node}, got {rec.kind}/{rec.node}"
                f" at transition {rec.index}"
            )
            return False
    return True


def cosimulate(
    t: Term,
    fuel: int = 10**6,
    deep_every: int = 0,
    rng: Optional[random.Random] = None,
    corrupt_at: Optional[int] = None,
    max_violations: int = 5,
) -> CosimReport:
    """Run evaluator and machine in lockstep over the same term.

    Checks, per evaluator step, that the machine performs exactly the burst
    of transitions the step calls for (at most three position moves and one
    rewrite), and optionally — every ``deep_every`` evaluator steps — that
    translating the evaluator state yields a graph isomorphic to the live
    machine graph, with the token parked on the image of the window root.
    """
    ev = Evaluator.inject(t)
    machine = Machine(translate_term(t).g, corrupt_at=corrupt_at)
    violations: list = []
    oracle_counts: Counter = Counter()
    deep_checks = 0

    def deep_check(context: str) -> None:
        nonlocal deep_checks
        ctx = translate_ectx(ev.path)
        win = translate_term(ev.focus)
        composed = compose(ctx, win)
        if isomorphic(
            composed.g, machine.g, seeds=[(composed.plug_root, machine.pos)]
        ):
            deep_checks += 1
        else:
            violations.append(f"{context}: state translation mismatch")

    if deep_every:
        deep_check("initial state")

    finished = False
    for i in range(fuel):
        step = ev.step()
        if step is None:
            finished = True
            break
        oracle_counts[step.label] += 1
        context = f"evaluator step {i + 1} ({step.name})"
        if not _take_block(machine, EXPECTED_BLOCKS[step.rule], context, violations):
            break  # machine desynchronised; no point continuing
        if deep_every and (i + 1) % deep_every == 0:
            deep_check(context)
            if len(violations) >= max_violations:
                break
    else:
        violations.append("evaluator ran out of fuel")

    if not violations:
        if _take_block(machine, FINAL_BLOCK, "final answer", violations):
            try:
                end = machine.step()
            except NoRedexMatch as exc:
                violations.append(f"final answer: machine stuck: {exc}")
            else:
                if end is not None:
                    violations.append("machine kept running after the answer burst")
        if not violations:
            expected_graph = translate_term(ev.whole()).g
            if not isomorphic(expected_graph, machine.g):
                violations.append("final graph differs from translated answer")

    return CosimReport(
        ok=not violations,
        oracle_steps=ev.steps_taken,
        machine_steps=machine.steps,
        counts=Counter(machine.counts),
        oracle_counts=oracle_counts,
        deep_checks=deep_checks,
        violations=violations,
        answer=ev.whole() if finished else None,
        machine_graph=machine.g,
    )
