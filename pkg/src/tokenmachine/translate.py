"""Terms and evaluation contexts as graphs, and the way back.

The translation follows the sharing discipline of the small-step evaluator:

- a value becomes a box: a bang guarding the lambda, with one whynot door per
  free-variable occurrence of the body (the box is what gets copied);
- an application wires its function side through a der node, which is the
  hook that lets the machine remember where a box was demanded from and
  splice the opened content back in place;
- a binder (lambda parameter or substitution) becomes a con node collecting
  every occurrence wire of the bound variable; its output feeds the shared
  value (lambda param port, or the bound term's root).

Evaluation contexts translate the same way except at the frames that record
completed work: a function answer awaiting its argument is translated opened
(no box, no der on its wire), exactly the shape the machine produces after it
has opened the function's box.  This difference is observable: translating
E<t> as a term does not generally match composing the context translation
with the term translation.

``readback`` inverts the translation on answer-shaped graphs, producing a
term whose substitution frames are ordered canonically (demand order, then
dependency order for unreferenced frames); graphs only remember frame order
up to independence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .graph import Box, Graph
from .smallstep import split_answer
from .terms import (
    Abs,
    App,
    AppArg,
    AppArgWithAnswer,
    AppFun,
    ESub,
    ESubBody,
    ESubBound,
    Strategy,
    Term,
    Var,
)


@dataclass
class TermGraph:
    g: Graph
    root: str
    occurrences: dict  # free name -> [link ids], traversal order


@dataclass
class CtxGraph:
    g: Graph
    entry: Optional[str]  # root-side link, None when the hole is the root
    attach: Optional[tuple]  # port spec the plug's root must attach to
    hole_scope: dict  # binder name -> con node id, binders visible at the hole
    occurrences: dict  # free name -> [link ids] escaping the context


@dataclass
class Composed:
    g: Graph
    root: str
    plug_root: str  # link where the plugged content starts
    occurrences: dict
    node_map: dict  # plug graph node ids -> composed ids
    link_map: dict


def _merge(*outs):
    merged = {}
    for o in outs:
        for name, links in o.items():
            merged.setdefault(name, []).extend(links)
    return merged


class Translator:
    def __init__(self, g: Optional[Graph] = None):
        self.g = g if g is not None else Graph()

    # -- terms ------------------------------------------------------------

    def term(self, t: Term, src: Optional[tuple]):
        """Build t's graph; its root link gets the given src attachment.
        Returns (root link, occurrences)."""
        g = self.g
        match t:
            case Var(x):
                lid = g.new_link()
                if src is not None:
                    g.set_src(lid, src)
                return lid, {x: [lid]}
            case Abs(x, body):
                mark = set(g.nodes)
                bang = g.new_node("bang")
                root = g.new_link()
                if src is not None:
                    g.set_src(root, src)
                g.set_dst(root, ("node", bang, "root"))
                lam = g.new_node("lam", code=_masked_render(t))
                g.wire(("node", bang, "inside"), ("node", lam, "root"))
                con = g.new_node("con")
                _, outs = self.term(body, ("node", lam, "body"))
                for occ in outs.pop(x, []):
                    g.set_dst(occ, ("node", con, g.con_add_input(con)))
                g.wire(("node", con, "out"), ("node", lam, "param"))
                doors, boxed_outs = [], {}
                for name, occs in outs.items():
                    for occ in occs:
                        door = g.new_node("whynot")
                        g.set_dst(occ, ("node", door, "inside"))
                        out = g.wire(("node", door, "outside"), None)
                        boxed_outs.setdefault(name, []).append(out)
                        doors.append(door)
                g.boxes[bang] = Box(set(g.nodes) - mark, doors)
                return root, boxed_outs
            case App(strategy, fun, arg):
                a = g.new_node("app", strategy=strategy.value)
                root = g.new_link()
                if src is not None:
                    g.set_src(root, src)
                g.set_dst(root, ("node", a, "root"))
                der = g.new_node("der")
                g.wire(("node", a, "fun"), ("node", der, "in"))
                _, f_outs = self.term(fun, ("node", der, "out"))
                _, a_outs = self.term(arg, ("node", a, "arg"))
                return root, _merge(f_outs, a_outs)
            case ESub(body, x, bound):
                root, b_outs = self.term(body, src)
                con = g.new_node("con")
                for occ in b_outs.pop(x, []):
                    g.set_dst(occ, ("node", con, g.con_add_input(con)))
                _, u_outs = self.term(bound, ("node", con, "out"))
                return root, _merge(b_outs, u_outs)
        raise TypeError(t)

    def open_answer(self, t: Term, src: Optional[tuple]):
        """An answer whose value is translated without its box: the shape of
        a function that has already been opened for application."""
        g = self.g
        match t:
            case ESub(body, x, bound):
                root, b_outs = self.open_answer(body, src)
                con = g.new_node("con")
                for occ in b_outs.pop(x, []):
                    g.set_dst(occ, ("node", con, g.con_add_input(con)))
                _, u_outs = self.term(bound, ("node", con, "out"))
                return root, _merge(b_outs, u_outs)
            case Abs(x, body):
                lam = g.new_node("lam", code=_masked_render(t))
                root = g.new_link()
                if src is not None:
                    g.set_src(root, src)
                g.set_dst(root, ("node", lam, "root"))
                con = g.new_node("con")
                _, outs = self.term(body, ("node", lam, "body"))
                for occ in outs.pop(x, []):
                    g.set_dst(occ, ("node", con, g.con_add_input(con)))
                g.wire(("node", con, "out"), ("node", lam, "param"))
                return root, outs
        raise TypeError(f"not an answer shape: {t!r}")

    def route(self, outs: dict, scope: dict):
        """Wire occurrence links into in-scope binder cons; return escapees."""
        g = self.g
        escaped = {}
        for name, links in outs.items():
            if name in scope:
                con = scope[name]
                for lid in links:
                    g.set_dst(lid, ("node", con, g.con_add_input(con)))
            else:
                escaped.setdefault(name, []).extend(links)
        return escaped

    # -- evaluation contexts ----------------------------------------------

    def ectx(self, frames: tuple, scope: dict, src: Optional[tuple]):
        """Build a context's graph.  Returns (entry link or None, attach spec
        or None, hole scope, escaped occurrences)."""
        g = self.g
        if not frames:
            return None, src, dict(scope), {}
        frame, rest = frames[0], frames[1:]
        match frame:
            case AppFun(strategy, arg):
                a = g.new_node("app", strategy=strategy.value)
                root = g.new_link()
                if src is not None:
                    g.set_src(root, src)
                g.set_dst(root, ("node", a, "root"))
                der = g.new_node("der")
                g.wire(("node", a, "fun"), ("node", der, "in"))
                _, t_outs = self.term(arg, ("node", a, "arg"))
                escaped = self.route(t_outs, scope)
                entry, attach, hole_scope, r_outs = self.ectx(
                    rest, scope, ("node", der, "out")
                )
                return root, attach, hole_scope, _merge(escaped, r_outs)
            case AppArgWithAnswer(strategy, fun_answer):
                a = g.new_node("app", strategy=strategy.value)
                root = g.new_link()
                if src is not None:
                    g.set_src(root, src)
                g.set_dst(root, ("node", a, "root"))
                _, f_outs = self.open_answer(fun_answer, ("node", a, "fun"))
                escaped = self.route(f_outs, scope)
                entry, attach, hole_scope, r_outs = self.ectx(
                    rest, scope, ("node", a, "arg")
                )
                return root, attach, hole_scope, _merge(escaped, r_outs)
            case AppArg(strategy, fun):
                a = g.new_node("app", strategy=strategy.value)
                root = g.new_link()
                if src is not None:
                    g.set_src(root, src)
                g.set_dst(root, ("node", a, "root"))
                der = g.new_node("der")
                g.wire(("node", a, "fun"), ("node", der, "in"))
                _, f_outs = self.term(fun, ("node", der, "out"))
                escaped = self.route(f_outs, scope)
                entry, attach, hole_scope, r_outs = self.ectx(
                    rest, scope, ("node", a, "arg")
                )
                return root, attach, hole_scope, _merge(escaped, r_outs)
            case ESubBody(x, bound):
                con = g.new_node("con")
                _, u_outs = self.term(bound, ("node", con, "out"))
                escaped = self.route(u_outs, scope)
                inner_scope = {**scope, x: con}
                entry, attach, hole_scope, r_outs = self.ectx(
                    rest, inner_scope, src
                )
                return entry, attach, hole_scope, _merge(escaped, r_outs)
            case ESubBound(x, occurrence):
                con = g.new_node("con")
                occ_scope = {**scope, x: con}
                occ_entry, occ_attach, _, occ_outs = self.ectx(
                    occurrence, occ_scope, src
                )
                # the demanded occurrence itself
                o = self.g.new_link()
                if occ_attach is not None:
                    g.set_src(o, occ_attach)
                g.set_dst(o, ("node", con, g.con_add_input(con)))
                entry = occ_entry if occ_entry is not None else o
                r_entry, attach, hole_scope, r_outs = self.ectx(
                    rest, scope, ("node", con, "out")
                )
                return entry, attach, hole_scope, _merge(occ_outs, r_outs)
        raise TypeError(frame)


def translate_term(t: Term) -> TermGraph:
    tr = Translator()
    root, outs = tr.term(t, None)
    tr.g.root = root
    tr.g.outputs = {
        f"{name}${i}": lid
        for name, links in outs.items()
        for i, lid in enumerate(links)
    }
    return TermGraph(tr.g, root, outs)


def translate_ectx(frames: tuple, hole_names=()) -> CtxGraph:
    """Translate an evaluation context.  hole_names documents which free
    names are expected to emerge from the plug (checked at composition)."""
    tr = Translator()
    entry, attach, hole_scope, outs = tr.ectx(tuple(frames), {}, None)
    g = tr.g
    g.root = entry  # None for pure-frame contexts whose hole is the root
    g.outputs = {
        f"{name}${i}": lid
        for name, links in outs.items()
        for i, lid in enumerate(links)
    }
    unknown = [n for n in hole_names if n not in hole_scope]
    ctx = CtxGraph(g, entry, attach, hole_scope, outs)
    ctx.unbound_hole_names = tuple(unknown)
    return ctx


def translate_actx(frames: tuple) -> CtxGraph:
    assert all(isinstance(f, ESubBody) for f in frames)
    return translate_ectx(frames)


def compose(ctx: CtxGraph, plug: Union[TermGraph, "CtxGraph"]) -> Composed:
    """Plug a term graph into a context graph (fresh composed graph)."""
    assert isinstance(plug, TermGraph), "term plugs only"
    g = Graph()
    c_nmap, c_lmap = _absorb(g, ctx.g)
    p_nmap, p_lmap = _absorb(g, plug.g)

    plug_root = p_lmap[plug.root]
    if ctx.attach is not None:
        _, nid, port = ctx.attach
        g.set_src(plug_root, ("node", c_nmap[nid], port))
    if ctx.entry is not None:
        g.root = c_lmap[ctx.entry]
    else:
        g.root = plug_root

    scope = {name: c_nmap[con] for name, con in ctx.hole_scope.items()}
    tr = Translator(g)
    plug_outs = {
        name: [p_lmap[l] for l in links]
        for name, links in plug.occurrences.items()
    }
    escaped = tr.route(plug_outs, scope)
    ctx_outs = {
        name: [c_lmap[l] for l in links]
        for name, links in ctx.occurrences.items()
    }
    outs = _merge(ctx_outs, escaped)
    g.outputs = {
        f"{name}${i}": lid
        for name, links in outs.items()
        for i, lid in enumerate(links)
    }
    return Composed(g, g.root, plug_root, outs, p_nmap, p_lmap)


def _absorb(g: Graph, other: Graph):
    nmap, lmap = {}, {}
    for nid, node in other.nodes.items():
        new = g._fresh("n")
        g.nodes[new] = type(node)(new, node.kind, {}, dict(node.meta))
        nmap[nid] = new
    for lid in other.links:
        new = g._fresh("l")
        g.links[new] = type(other.links[lid])(new)
        lmap[lid] = new
    for lid, link in other.links.items():
        for end in ("src", "dst"):
            spec = getattr(link, end)
            if spec is None:
                continue
            if spec[0] == "node":
                g.attach(lmap[lid], end, ("node", nmap[spec[1]], spec[2]))
            else:
                g.attach(lmap[lid], end, ("link", lmap[spec[1]]))
    for bang, box in other.boxes.items():
        g.boxes[nmap[bang]] = Box(
            {nmap[m] for m in box.members}, [nmap[d] for d in box.doors]
        )
    return nmap, lmap


# --------------------------------------------------------------------------
# readback


class ReadbackError(Exception):
    pass


def readback(g: Graph) -> Term:
    """Read an answer term off an answer-shaped graph.

    The graph root must lead to a box (the result value); every con is a
    binder: cons feeding a lam param are lambda binders, the rest are
    substitution frames whose bound term hangs off their output.
    """
    names = {}
    frame_cons = []
    for nid in sorted(g.nodes, key=_idnum):
        node = g.nodes[nid]
        if node.kind != "con":
            continue
        names[nid] = f"x{len(names) + 1}"
        out = node.ports.get("out")
        dst = g.links[out].dst if out is not None else None
        if dst is not None and dst[0] == "node" and dst[2] == "param":
            continue  # lambda binder
        frame_cons.append(nid)

    def read_link(lid: str) -> Term:
        link = g.links[lid]
        if link.dst is None:
            raise ReadbackError(f"dangling wire {lid}")
        return read_at(link.dst)

    def read_at(spec) -> Term:
        _, nid, port = spec
        node = g.nodes[nid]
        match node.kind, port:
            case "bang", "root":
                return read_at(g.links[node.ports["inside"]].dst)
            case "lam", "root":
                binder_con = g.node_at(
                    g.links[node.ports["param"]].src
                )
                binder = names[binder_con.id]
                return Abs(binder, read_link(node.ports["body"]))
            case "app", "root":
                der_spec = g.links[node.ports["fun"]].dst
                der = g.node_at(der_spec)
                if der is None or der.kind != "der":
                    raise ReadbackError("application without a der entry")
                fun = read_link(der.ports["out"])
                arg = read_link(node.ports["arg"])
                return App(Strategy(node.meta["strategy"]), fun, arg)
            case "con", _ if port.startswith("in"):
                return Var(names[nid])
            case "whynot", "inside":
                return read_at(g.links[node.ports["outside"]].dst)
            case _:
                raise ReadbackError(f"unreadable position {node.kind}.{port}")

    if g.root is None:
        raise ReadbackError("graph has no root")
    value = read_link(g.root)
    frames = []
    for nid in frame_cons:
        bound = read_link(g.nodes[nid].ports["out"])
        frames.append((names[nid], bound))
    return assemble_answer(value, frames)


def _idnum(nid):
    return int(nid[1:])


def assemble_answer(value: Term, frames) -> Term:
    """Wrap value in substitution frames, canonically ordered.

    A frame whose bound term references another frame's binder must sit
    inside that frame; within that constraint, frames demanded (reachable)
    from the value are laid out in demand order, and the rest are ordered by
    a name-free structural key: a masked render of the bound term, sharpened
    by colour refinement over the frame-reference digraph so that frames are
    distinguished by what they reference and what references them, never by
    the accident of their binder names.  The layout is then a function of
    the graph structure alone, so two corresponding graphs canonicalize
    identically."""
    by_name = dict(frames)
    # demand order: breadth-first through the value, then demanded bounds
    demand_pos = {}
    queue = [value]
    while queue:
        t = queue.pop(0)
        for name in _occurrence_order(t):
            if name in by_name and name not in demand_pos:
                demand_pos[name] = len(demand_pos)
                queue.append(by_name[name])
    out_refs = {
        n: [m for m in _occurrence_order(b) if m in by_name and m != n]
        for n, b in by_name.items()
    }
    # frame n referencing frame m forces n inside (before) m
    referencers = {n: set() for n in by_name}
    for n, ms in out_refs.items():
        for m in ms:
            referencers[m].add(n)
    mask_env = {n: f"@{p}" for n, p in demand_pos.items()}

    colour = {
        n: (
            (0, demand_pos[n], "")
            if n in demand_pos
            else (1, 0, _masked_render(by_name[n], dict(mask_env)))
        )
        for n in by_name
    }
    for _ in range(len(by_name)):
        rank = {c: i for i, c in enumerate(sorted(set(colour.values())))}
        refined = {
            n: (
                rank[colour[n]],
                tuple(rank[colour[m]] for m in out_refs[n]),
                tuple(sorted(rank[colour[m]] for m in referencers[n])),
            )
            for n in by_name
        }
        if len(set(refined.values())) == len(set(colour.values())):
            break
        colour = refined

    def prio(n):
        # frames the refinement cannot separate are mutually interchangeable,
        # so the final name tiebreak never affects the result up to alpha
        return (colour[n], n)

    placed, placed_set = [], set()
    while len(placed) < len(by_name):
        avail = [
            n
            for n in by_name
            if n not in placed_set and referencers[n] <= placed_set
        ]
        if not avail:  # reference cycle; cannot arise from real runs
            avail = [n for n in by_name if n not in placed_set]
        avail.sort(key=prio)
        placed.append(avail[0])
        placed_set.add(avail[0])

    t = value  # first placed = innermost
    for name in placed:
        t = ESub(t, name, by_name[name])
    return t


def _occurrence_order(t: Term):
    match t:
        case Var(x):
            yield x
        case Abs(_, body):
            yield from _occurrence_order(body)
        case App(_, fun, arg):
            yield from _occurrence_order(fun)
            yield from _occurrence_order(arg)
        case ESub(body, _, bound):
            yield from _occurrence_order(body)
            yield from _occurrence_order(bound)


def _masked_render(t: Term, env=None) -> str:
    env = env or {}
    match t:
        case Var(x):
            return env.get(x, "F")
        case Abs(b, body):
            e = {**env, b: f"b{len(env)}"}
            return f"(L {_masked_render(body, e)})"
        case App(s, f, a):
            return f"({s.value} {_masked_render(f, env)} {_masked_render(a, env)})"
        case ESub(body, b, bound):
            e = {**env, b: f"b{len(env)}"}
            return f"(S {_masked_render(body, e)} {_masked_render(bound, env)})"


def canonical_answer(t: Term) -> Term:
    """Rebuild a term-level answer with the same canonical layout readback
    produces, so both sides of a comparison agree on frame placement.

    Bound terms may themselves be answers (an evaluated argument keeps its
    own frames), but the graph translation hangs every frame off one shared
    pool, so readback returns a single flat spine.  Hoisting a bound term's
    frames past its own binder is the usual structural congruence
    t[x<-u[y<-w]] = t[x<-u][y<-w]; it is capture-free here because frame
    binders are globally fresh."""
    flat: list[tuple[str, Term]] = []

    def strip(u: Term) -> Term:
        frames, core = split_answer(u)
        for f in frames:
            flat.append((f.binder, strip(f.bound)))
        return core

    core = strip(t)
    if len({name for name, _ in flat}) != len(flat):
        raise ValueError("duplicate frame binder; cannot flatten spine")
    return assemble_answer(core, flat)
