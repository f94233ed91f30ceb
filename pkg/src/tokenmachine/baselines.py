"""Pass-only baseline token machines.

Both machines walk the translated graph of a term *without ever rewriting
it*; all sharing bookkeeping lives in the token.  They implement weak
call-by-name evaluation and ignore the strategy annotations on
application nodes, which makes them the space/time baselines the rewriting
machine is compared against.

``JumpMachine`` keeps environments of closures and teleports from a bound
lambda back to its application site: fast, but closure environments pile
up and (measured as copies) can grow exponentially in the nesting depth.

``SignatureMachine`` never jumps: it re-routes through the graph using
exponential signatures — onions of ``Cons`` layers recording which
sharing-node input was crossed — so its token grows by at most one cell
per transition, at the price of re-walking shared subgraphs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .graph import Graph

AT = "@"
LOOKUP = "A"

UP = "up"
DOWN = "down"


class BaselineStuck(Exception):
    """The baseline token reached a configuration with no transition."""


@dataclass
class BaselineReport:
    outcome: str  # "final" | "fuel" | "stuck"
    steps: int
    final_pos: Optional[str]
    max_token_cells: int
    max_token_cells_shared: int
    detail: str = ""


def final_value_code(g: Graph, report: BaselineReport) -> str:
    """The code skeleton of the value the token halted on.

    Translated lambdas carry a rendering of their source (binders
    positional, free names masked), so the weak-head value a baseline run
    finds can be compared against other machines without reading the graph
    back."""
    if report.final_pos is None:
        raise ValueError(f"run did not finish: {report.outcome}")
    spec = g.links[report.final_pos].dst
    node = g.nodes[spec[1]]
    if node.kind == "bang":
        node = g.nodes[g.links[node.ports["inside"]].dst[1]]
    if node.kind != "lam":
        raise ValueError(f"token halted on a {node.kind}, not a value")
    return node.meta["code"]


class _Walker:
    """Shared plumbing: position handling and the run loop."""

    def __init__(self, g: Graph):
        self.g = g
        if g.root is None:
            raise ValueError("baseline machines need a rooted graph")
        self.pos = g.root
        self.direction = UP
        self.steps = 0
        self.max_token_cells = 0
        self.max_token_cells_shared = 0

    def _end(self):
        link = self.g.links[self.pos]
        end = link.dst if self.direction == UP else link.src
        if end is None or end[0] != "node":
            raise BaselineStuck(
                f"token moving {self.direction} along {self.pos} hit no node"
            )
        _, nid, port = end
        return self.g.nodes[nid], port

    def _measure(self):
        copies, shared = self.token_cells()
        self.max_token_cells = max(self.max_token_cells, copies)
        self.max_token_cells_shared = max(self.max_token_cells_shared, shared)

    def run(self, fuel: int = 10**7, on_step=None) -> BaselineReport:
        outcome = "fuel"
        detail = ""
        self._measure()
        for _ in range(fuel):
            if self.at_success():
                outcome = "final"
                break
            try:
                self.step()
            except BaselineStuck as exc:
                outcome = "stuck"
                detail = str(exc)
                break
            self.steps += 1
            self._measure()
            if on_step is not None:
                on_step()
        else:
            detail = f"no value within {fuel} transitions"
        return BaselineReport(
            outcome=outcome,
            steps=self.steps,
            final_pos=self.pos if outcome == "final" else None,
            max_token_cells=self.max_token_cells,
            max_token_cells_shared=self.max_token_cells_shared,
            detail=detail,
        )

    # subclasses
    def at_success(self) -> bool:  # pragma: no cover - overridden
        raise NotImplementedError

    def step(self) -> None:  # pragma: no cover - overridden
        raise NotImplementedError

    def token_cells(self) -> tuple:  # pragma: no cover - overridden
        raise NotImplementedError


# --------------------------------------------------------------------------
# jumping machine
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Closure:
    """An argument-site address paired with the environment to restart in."""

    link: str
    env: tuple  # tuple of Closures


def closure_cells(c: Closure, memo: Optional[dict] = None) -> int:
    """Size of a closure counted as if environments were copied."""
    if memo is None:
        memo = {}
    key = id(c)
    if key not in memo:
        memo[key] = 1 + sum(closure_cells(e, memo) for e in c.env)
    return memo[key]


class JumpMachine(_Walker):
    """Call-by-name with environments and jumps; the graph never changes."""

    def __init__(self, g: Graph):
        super().__init__(g)
        self.comp: list = []  # AT and LOOKUP marks
        self.box: list = []  # pending argument Closures
        self.env: tuple = ()  # Closure environment (snapshot-shared)

    def token_cells(self):
        # direction + one bottom marker per stack, then per-element cells
        memo: dict = {}
        copies = 4 + len(self.comp)
        for c in self.box:
            copies += closure_cells(c, memo)
        for c in self.env:
            copies += closure_cells(c, memo)
        seen = set()

        def visit(c: Closure):
            if id(c) in seen:
                return
            seen.add(id(c))
            for e in c.env:
                visit(e)

        for c in list(self.box) + list(self.env):
            visit(c)
        shared = 4 + len(self.comp) + len(seen)
        return copies, shared

    def at_success(self) -> bool:
        if self.direction != UP or self.comp or self.box:
            return False
        link = self.g.links[self.pos]
        if link.dst is None or link.dst[0] != "node":
            return False
        node = self.g.nodes[link.dst[1]]
        return node.kind == "bang" and link.dst[2] == "root"

    def step(self) -> None:
        node, port = self._end()
        kind = node.kind
        if self.direction == UP:
            if kind == "app" and port == "root":
                self.comp.append(AT)
                self.pos = node.ports["fun"]
            elif kind == "der" and port == "in":
                self.box.append(Closure(self.pos, self.env))
                self.pos = node.ports["out"]
            elif kind == "bang" and port == "root":
                self.pos = node.ports["inside"]
            elif kind == "lam" and port == "root":
                if self.comp and self.comp[-1] == AT:
                    self.comp.pop()
                    if not self.box:
                        raise BaselineStuck("lambda entered without an argument")
                    self.env = self.env + (self.box.pop(),)
                    self.pos = node.ports["body"]
                else:
                    raise BaselineStuck("lambda root reached without a pending call")
            elif kind == "con" and port.startswith("in"):
                self.pos = node.ports["out"]
            elif kind == "lam" and port == "param":
                self.comp.append(LOOKUP)
                self.pos = node.ports["root"]
                self.direction = DOWN
            elif kind == "whynot" and port == "inside":
                if not self.env:
                    raise BaselineStuck("door crossed with an empty environment")
                self.env = self.env[:-1]
                self.pos = node.ports["outside"]
            else:
                raise BaselineStuck(f"no upward jump-machine move at {kind}.{port}")
        else:
            if kind == "bang" and port == "inside":
                # jump: restart at the recorded application site
                if not self.env:
                    raise BaselineStuck("jump with an empty environment")
                target = self.env[-1]
                self.env = target.env
                self.pos = target.link
            elif kind == "app" and port == "fun":
                if self.comp and self.comp[-1] == LOOKUP:
                    self.comp.pop()
                    self.pos = node.ports["arg"]
                    self.direction = UP
                else:
                    raise BaselineStuck("descended to an application without a lookup")
            else:
                raise BaselineStuck(f"no downward jump-machine move at {kind}.{port}")


# --------------------------------------------------------------------------
# signature machine
# --------------------------------------------------------------------------


STAR = "*"


@dataclass(frozen=True)
class Cons:
    """Routing layer: the lookup crossed this sharing-node input."""

    link: str
    rest: "Signature"


Signature = Union[str, Cons]


def signature_cells(s: Signature) -> int:
    n = 1
    while isinstance(s, Cons):
        n += 1
        s = s.rest
    return n


def _plant(s: Signature, link: str) -> Signature:
    """Add a routing layer at the seed end, beneath every existing layer."""
    above = []
    while isinstance(s, Cons):
        above.append(s.link)
        s = s.rest
    out: Signature = Cons(link, s)
    for layer in reversed(above):
        out = Cons(layer, out)
    return out


def _strip(s: Signature, wanted) -> Optional[tuple]:
    """Remove the outermost layer naming one of ``wanted``.

    Returns ``(link, remainder)``, or ``None`` when no layer matches.
    Layers planted for sharing nodes elsewhere on the route stay put."""
    above = []
    while isinstance(s, Cons):
        if s.link in wanted:
            rest = s.rest
            for layer in reversed(above):
                rest = Cons(layer, rest)
            return s.link, rest
        above.append(s.link)
        s = s.rest
    return None


class SignatureMachine(_Walker):
    """Call-by-name with exponential signatures and no jumps.

    The level stack holds one signature per box the token is currently
    inside; routing layers for the sharing nodes of a box are planted on
    and stripped from that box's signature, so a lookup retraces exactly
    the graph path its demand arrived by.  Box boundaries obey a single
    discipline in both directions: every crossing that leaves a box
    suspends its level signature on the box stack, and every crossing
    that enters one resumes the most recently suspended signature (or
    seeds a fresh one).  Because crossings nest bracket-wise along demand
    paths, the suspended signature always belongs to the box being
    re-entered — even when that entry is through a different boundary
    than the exit that suspended it.
    """

    def __init__(self, g: Graph):
        super().__init__(g)
        self.comp: list = []  # AT / LOOKUP marks
        self.box: list = []  # suspended level signatures
        self.lvl: list = []  # one signature per enclosing box

    def token_cells(self):
        # direction + one bottom marker per stack, then per-element cells
        cells = 4 + len(self.comp)
        cells += sum(signature_cells(s) for s in self.box)
        cells += sum(signature_cells(s) for s in self.lvl)
        return cells, cells  # signatures are plain onions; no sharing story

    def at_success(self) -> bool:
        # residual suspended signatures may sit on the box stack when the
        # value is reached through re-entered boxes; an empty mark stack is
        # the real "no pending work" condition
        if self.direction != UP or self.comp:
            return False
        link = self.g.links[self.pos]
        if link.dst is None or link.dst[0] != "node":
            return False
        node = self.g.nodes[link.dst[1]]
        port = link.dst[2]
        return (node.kind == "bang" and port == "root") or (
            node.kind == "lam" and port == "root"
        )

    def _enter(self) -> None:
        self.lvl.append(self.box.pop() if self.box else STAR)

    def _leave(self) -> None:
        if not self.lvl:
            raise BaselineStuck("box left with an empty level stack")
        self.box.append(self.lvl.pop())

    def step(self) -> None:
        node, port = self._end()
        kind = node.kind
        if self.direction == UP:
            if kind == "app" and port == "root":
                self.comp.append(AT)
                self.pos = node.ports["fun"]
            elif kind == "der" and port == "in":
                self.pos = node.ports["out"]
            elif kind == "bang" and port == "root":
                self._enter()
                self.pos = node.ports["inside"]
            elif kind == "lam" and port == "root":
                if not self.comp:
                    raise BaselineStuck("lambda root reached without a pending call")
                mark = self.comp.pop()
                if mark == AT:
                    self.pos = node.ports["body"]
                else:
                    self.pos = node.ports["param"]
                    self.direction = DOWN
            elif kind == "con" and port.startswith("in"):
                if not self.lvl:
                    raise BaselineStuck("sharing node crossed outside any box")
                self.lvl[-1] = _plant(self.lvl[-1], self.pos)
                self.pos = node.ports["out"]
            elif kind == "lam" and port == "param":
                self.comp.append(LOOKUP)
                self.pos = node.ports["root"]
                self.direction = DOWN
            elif kind == "whynot" and port == "inside":
                self._leave()
                self.pos = node.ports["outside"]
            else:
                raise BaselineStuck(
                    f"no upward signature-machine move at {kind}.{port}"
                )
        else:
            if kind == "bang" and port == "inside":
                self._leave()
                self.pos = node.ports["root"]
            elif kind == "der" and port == "out":
                self.pos = node.ports["in"]
            elif kind == "whynot" and port == "outside":
                self._enter()
                self.pos = node.ports["inside"]
            elif kind == "con" and port == "out":
                inputs = {
                    link
                    for pname, link in node.ports.items()
                    if pname.startswith("in")
                }
                found = _strip(self.lvl[-1], inputs) if self.lvl else None
                if found is None:
                    raise BaselineStuck("sharing node unwound without a route layer")
                link, rest = found
                self.lvl[-1] = rest
                self.pos = link
            elif kind == "lam" and port == "body":
                # leaving a lambda through its body: the application that
                # entered it will pass the token on below
                self.comp.append(AT)
                self.pos = node.ports["root"]
            elif kind == "app" and port == "fun":
                if not self.comp:
                    raise BaselineStuck("descended to an application with no mark")
                mark = self.comp.pop()
                if mark == LOOKUP:
                    self.pos = node.ports["arg"]
                    self.direction = UP
                else:
                    self.pos = node.ports["root"]
            elif kind == "app" and port == "arg":
                self.comp.append(LOOKUP)
                self.pos = node.ports["fun"]
                self.direction = UP
            else:
                raise BaselineStuck(
                    f"no downward signature-machine move at {kind}.{port}"
                )
