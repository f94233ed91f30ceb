"""Graphs of proper nodes wired through link nodes.

Every edge has a link on at least one end; a link has at most one in-edge and
at most one out-edge, so links behave like wires with identity.  The token
machines sit *on links*, and rewrites splice links, which is why links are
first-class here rather than plain edges.

Edges are directed root-to-leaf: moving "up" (from the program root toward
the leaves) follows edge direction, moving "down" goes against it.  Node
kinds and their ports:

====== ======================== =========================================
kind    ports (in/out)           role
====== ======================== =========================================
lam     root in, param in,       abstraction; body is the principal port,
        body out                 param receives the binder's sharing wire
app     root in, fun out,        application, tagged with its strategy
        arg out
bang    root in, inside out      principal door of a box (a shared value)
whynot  inside in, outside out   auxiliary door of a box (a free variable
                                 of the boxed value)
der     in in, out out           entry point that remembers where a box
                                 was demanded from, so opening it can
                                 splice the result back in place
con     in0.. in, out out        sharing: many demands for one value;
                                 arity changes over time, input names are
                                 never renumbered
====== ======================== =========================================

Boxes are extensional: a registry maps each bang to the set of member nodes
(bang and doors included) plus the ordered door list.  Two boxes are either
disjoint or nested.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

NODE_KINDS = ("lam", "app", "bang", "whynot", "der", "con")

# port polarity: "in" ports receive an edge, "out" ports emit one
_POLARITY = {
    ("lam", "root"): "in",
    ("lam", "param"): "in",
    ("lam", "body"): "out",
    ("app", "root"): "in",
    ("app", "fun"): "out",
    ("app", "arg"): "out",
    ("bang", "root"): "in",
    ("bang", "inside"): "out",
    ("whynot", "inside"): "in",
    ("whynot", "outside"): "out",
    ("der", "in"): "in",
    ("der", "out"): "out",
    ("con", "out"): "out",
}


def port_polarity(kind: str, port: str) -> str:
    if kind == "con" and port.startswith("in"):
        return "in"
    try:
        return _POLARITY[(kind, port)]
    except KeyError:
        raise ValueError(f"no port {port!r} on a {kind} node") from None


@dataclass
class Node:
    id: str
    kind: str
    ports: dict = field(default_factory=dict)  # port name -> link id
    meta: dict = field(default_factory=dict)  # strategy for app, next_in for con


@dataclass
class Link:
    id: str
    src: Optional[tuple] = None  # ("node", nid, port) | ("link", lid) | None
    dst: Optional[tuple] = None


@dataclass
class Box:
    members: set  # node ids, bang and doors included
    doors: list  # whynot ids, ordered


@dataclass
class Violation:
    code: str
    detail: str


class Graph:
    def __init__(self):
        self.nodes: dict = {}
        self.links: dict = {}
        self.boxes: dict = {}  # bang id -> Box
        self.root: Optional[str] = None
        self.outputs: dict = {}  # free variable name -> dangling link id
        self._next = 0

    # -- construction -----------------------------------------------------

    def _fresh(self, prefix):
        self._next += 1
        return f"{prefix}{self._next}"

    def new_node(self, kind: str, **meta) -> str:
        assert kind in NODE_KINDS, kind
        nid = self._fresh("n")
        self.nodes[nid] = Node(nid, kind, {}, dict(meta))
        return nid

    def new_link(self) -> str:
        lid = self._fresh("l")
        self.links[lid] = Link(lid)
        return lid

    def attach(self, lid: str, end: str, spec: tuple) -> None:
        """Attach one end ('src' or 'dst') of a link; keeps node caches."""
        link = self.links[lid]
        old = getattr(link, end)
        if old is not None and old[0] == "node":
            _, nid, port = old
            if nid in self.nodes and self.nodes[nid].ports.get(port) == lid:
                del self.nodes[nid].ports[port]
        setattr(link, end, spec)
        if spec is not None and spec[0] == "node":
            _, nid, port = spec
            want = "out" if end == "src" else "in"
            assert port_polarity(self.nodes[nid].kind, port) == want, (
                f"{self.nodes[nid].kind}.{port} used as {want}"
            )
            self.nodes[nid].ports[port] = lid

    def set_src(self, lid, spec):
        self.attach(lid, "src", spec)

    def set_dst(self, lid, spec):
        self.attach(lid, "dst", spec)

    def wire(self, src: Optional[tuple], dst: Optional[tuple]) -> str:
        lid = self.new_link()
        if src is not None:
            self.set_src(lid, src)
        if dst is not None:
            self.set_dst(lid, dst)
        return lid

    def delete_link(self, lid):
        link = self.links.pop(lid)
        for spec in (link.src, link.dst):
            if spec is not None and spec[0] == "node":
                _, nid, port = spec
                if nid in self.nodes and self.nodes[nid].ports.get(port) == lid:
                    del self.nodes[nid].ports[port]

    def delete_node(self, nid):
        # caller is responsible for the incident links
        del self.nodes[nid]

    def con_add_input(self, nid: str) -> str:
        node = self.nodes[nid]
        assert node.kind == "con"
        i = node.meta.get("next_in", 0)
        node.meta["next_in"] = i + 1
        return f"in{i}"

    def con_inputs(self, nid: str) -> list:
        node = self.nodes[nid]
        return sorted(
            (p for p in node.ports if p.startswith("in")),
            key=lambda p: int(p[2:]),
        )

    # -- queries ----------------------------------------------------------

    def node_at(self, spec) -> Optional[Node]:
        if spec is None or spec[0] != "node":
            return None
        return self.nodes[spec[1]]

    def enclosing_boxes(self, nid: str) -> list:
        """Bangs of all boxes containing the node, innermost first."""
        out = [b for b, box in self.boxes.items() if nid in box.members]
        out.sort(key=lambda b: len(self.boxes[b].members))
        return out

    def box_internal_links(self, bang_id: str) -> list:
        members = self.boxes[bang_id].members

        def inside(spec):
            return spec is not None and spec[0] == "node" and spec[1] in members

        return [
            lid
            for lid, link in self.links.items()
            if inside(link.src) and inside(link.dst)
        ]

    def size(self) -> int:
        return len(self.nodes) + len(self.links)

    def metrics(self) -> dict:
        return {
            "nodes": len(self.nodes),
            "links": len(self.links),
            "boxes": len(self.boxes),
            "conInputs": sum(
                len(self.con_inputs(n))
                for n, node in self.nodes.items()
                if node.kind == "con"
            ),
            "size": self.size(),
        }

    # -- validation -------------------------------------------------------

    def validate(self) -> list:
        bad = []

        def flag(code, detail):
            bad.append(Violation(code, detail))

        for lid, link in self.links.items():
            for end, want in (("src", "out"), ("dst", "in")):
                spec = getattr(link, end)
                if spec is None:
                    continue
                if spec[0] == "link":
                    flag("link-link", f"{lid}.{end} -> {spec[1]}")
                    continue
                _, nid, port = spec
                if nid not in self.nodes:
                    flag("dangling-port", f"{lid}.{end} -> missing node {nid}")
                    continue
                node = self.nodes[nid]
                try:
                    pol = port_polarity(node.kind, port)
                except ValueError:
                    flag("bad-port", f"{lid}.{end} -> {node.kind}.{port}")
                    continue
                if pol != want:
                    flag("polarity", f"{lid}.{end} -> {node.kind}.{port}")
                if node.ports.get(port) != lid:
                    flag("cache-mismatch", f"{lid}.{end} vs {nid}.{port}")

        for nid, node in self.nodes.items():
            wanted = set(node.ports)
            for port, lid in node.ports.items():
                if lid not in self.links:
                    flag("cache-mismatch", f"{nid}.{port} -> missing link {lid}")
                    continue
                link = self.links[lid]
                spec = ("node", nid, port)
                if link.src != spec and link.dst != spec:
                    flag("cache-mismatch", f"{nid}.{port} -> {lid}")
            required = {
                "lam": {"root", "param", "body"},
                "app": {"root", "fun", "arg"},
                "bang": {"root", "inside"},
                "whynot": {"inside", "outside"},
                "der": {"in", "out"},
            }.get(node.kind)
            if node.kind == "con":
                if "out" not in wanted:
                    flag("dangling-port", f"{nid} (con) has no output")
            elif required is not None and wanted != required:
                flag(
                    "dangling-port",
                    f"{nid} ({node.kind}) ports {sorted(wanted)}",
                )

        for bang_id, box in self.boxes.items():
            if bang_id not in self.nodes or self.nodes[bang_id].kind != "bang":
                flag("bad-box", f"registry for non-bang {bang_id}")
                continue
            if bang_id not in box.members:
                flag("bad-box", f"{bang_id} not a member of its own box")
            for d in box.doors:
                if d not in box.members:
                    flag("bad-door", f"door {d} outside box {bang_id}")
                if d not in self.nodes or self.nodes[d].kind != "whynot":
                    flag("bad-door", f"door {d} of {bang_id} is not a whynot")
            for m in box.members:
                if m not in self.nodes:
                    flag("bad-box", f"{bang_id} member {m} missing")
            doors = set(box.doors)
            for lid, link in self.links.items():
                ends = [link.src, link.dst]
                in_box = [
                    e is not None and e[0] == "node" and e[1] in box.members
                    for e in ends
                ]
                if in_box[0] != in_box[1]:
                    # boundary link: legal only at the bang root or a door exit
                    e = ends[0] if in_box[0] else ends[1]
                    _, nid, port = e
                    ok = (nid == bang_id and port == "root") or (
                        nid in doors and port == "outside"
                    )
                    if not ok:
                        flag("box-leak", f"{lid} crosses {bang_id} at {nid}.{port}")

        ids = list(self.boxes)
        for i, a in enumerate(ids):
            for b in ids[i + 1 :]:
                ma, mb = self.boxes[a].members, self.boxes[b].members
                if ma & mb and not (ma <= mb or mb <= ma):
                    flag("box-overlap", f"{a} vs {b}")

        if self.root is not None and self.root not in self.links:
            flag("dangling-port", f"root link {self.root} missing")
        for name, lid in self.outputs.items():
            if lid not in self.links:
                flag("dangling-port", f"output {name} -> missing link {lid}")

        return bad

    def check(self):
        bad = self.validate()
        assert not bad, "; ".join(f"{v.code}: {v.detail}" for v in bad)

    # -- link collapsing --------------------------------------------------

    def collapse_links(self) -> dict:
        """Remove link-to-link edges by merging; returns absorbed->survivor."""
        alias = {}

        def resolve(lid):
            while lid in alias:
                lid = alias[lid]
            return lid

        changed = True
        while changed:
            changed = False
            for lid in list(self.links):
                if lid not in self.links:
                    continue
                link = self.links[lid]
                if link.dst is not None and link.dst[0] == "link":
                    other = self.links[link.dst[1]]
                    assert other.src == ("link", lid)
                    # lid absorbs other
                    self.set_dst(lid, None)
                    link.dst = other.dst
                    if other.dst is not None and other.dst[0] == "node":
                        _, nid, port = other.dst
                        self.nodes[nid].ports[port] = lid
                    other.src = None
                    other.dst = None
                    del self.links[other.id]
                    alias[other.id] = lid
                    changed = True

        if self.root is not None:
            self.root = resolve(self.root)
        self.outputs = {k: resolve(v) for k, v in self.outputs.items()}
        return {k: resolve(k) for k in alias}

    # -- box surgery ------------------------------------------------------

    def copy_box(self, bang_id: str):
        """Duplicate a box's nodes and internal links.

        Returns (new_bang, node_map, link_map).  The caller must supply the
        copy's root link and fresh exterior links for the copied doors; until
        then the copy's boundary ports dangle.
        """
        box = self.boxes[bang_id]
        nmap = {}
        for nid in box.members:
            node = self.nodes[nid]
            meta = dict(node.meta)
            new = self._fresh("n")
            self.nodes[new] = Node(new, node.kind, {}, meta)
            nmap[nid] = new
        lmap = {}
        for lid in self.box_internal_links(bang_id):
            link = self.links[lid]
            new = self._fresh("l")
            _, sn, sp = link.src
            _, dn, dp = link.dst
            self.links[new] = Link(new)
            self.set_src(new, ("node", nmap[sn], sp))
            self.set_dst(new, ("node", nmap[dn], dp))
            lmap[lid] = new
        # registries: the copied box and any nested boxes
        for inner, inner_box in list(self.boxes.items()):
            if inner in nmap and inner_box.members <= box.members:
                self.boxes[nmap[inner]] = Box(
                    {nmap[m] for m in inner_box.members},
                    [nmap[d] for d in inner_box.doors],
                )
        return nmap[bang_id], nmap, lmap

    def open_box(self, bang_id: str):
        """Remove a box's bang and doors, splicing wires through.

        Exterior links survive (so references held elsewhere stay valid);
        interior sides are deleted.  The registry entry is dropped; nested
        boxes are untouched.  Returns the link that now leads into the old
        box contents (the surviving root-side link).
        """
        box = self.boxes.pop(bang_id)
        bang = self.nodes[bang_id]
        root_link = self.links[bang.ports["root"]]
        inner = self.links[bang.ports["inside"]]
        target = inner.dst
        self.delete_link(inner.id)
        self.set_dst(root_link.id, target)
        self.delete_node(bang_id)
        box.members.discard(bang_id)
        for d in box.doors:
            door = self.nodes[d]
            outer = self.links[door.ports["outside"]]
            interior = self.links[door.ports["inside"]]
            source = interior.src
            self.delete_link(interior.id)
            self.set_src(outer.id, source)
            self.delete_node(d)
            box.members.discard(d)
        return root_link.id


def box_subgraph(g: Graph, bang_id: str) -> Graph:
    """A box (with a fresh root link) as a standalone graph, for comparing
    boxes across graphs."""
    out = Graph()
    box = g.boxes[bang_id]
    nmap = {}
    for nid in box.members:
        node = g.nodes[nid]
        nmap[nid] = out._fresh("n")
        out.nodes[nmap[nid]] = Node(nmap[nid], node.kind, {}, dict(node.meta))
    for lid in g.box_internal_links(bang_id):
        link = g.links[lid]
        _, sn, sp = link.src
        _, dn, dp = link.dst
        out.wire(("node", nmap[sn], sp), ("node", nmap[dn], dp))
    # boundary: root plus one dangling wire per door, named by position
    out.root = out.wire(None, ("node", nmap[bang_id], "root"))
    for i, d in enumerate(box.doors):
        out.outputs[f"door{i}"] = out.wire(
            ("node", nmap[d], "outside"), None
        )
    for inner, inner_box in g.boxes.items():
        if inner in nmap and inner_box.members <= box.members:
            out.boxes[nmap[inner]] = Box(
                {nmap[m] for m in inner_box.members},
                [nmap[d] for d in inner_box.doors],
            )
    return out


# --------------------------------------------------------------------------
# isomorphism


def isomorphic(g1: Graph, g2: Graph, seeds=()) -> bool:
    """Structure-preserving bijection test.

    Anchored at the root links, the outputs (matched by name) and any extra
    seed link pairs.  Port names must agree except con inputs, which match up
    to permutation.  Box registries (member sets, door order) must correspond.
    """
    if len(g1.nodes) != len(g2.nodes) or len(g1.links) != len(g2.links):
        return False
    if len(g1.boxes) != len(g2.boxes):
        return False
    if set(g1.outputs) != set(g2.outputs):
        return False

    nmap, lmap = {}, {}
    nrev, lrev = {}, {}
    conpairs = {}  # n1 -> {port1: port2}

    def pair_links(a, b):
        if a is None and b is None:
            return True
        if a is None or b is None:
            return False
        if a in lmap or b in lrev:
            return lmap.get(a) == b
        lmap[a] = b
        lrev[b] = a
        la, lb = g1.links[a], g2.links[b]
        return pair_ends(la.src, lb.src) and pair_ends(la.dst, lb.dst)

    def pair_ends(sa, sb):
        if sa is None and sb is None:
            return True
        if sa is None or sb is None:
            return False
        if sa[0] != sb[0]:
            return False
        if sa[0] == "link":  # collapsed graphs should not have these
            return pair_links(sa[1], sb[1])
        _, na, pa = sa
        _, nb, pb = sb
        ka = g1.nodes[na].kind
        if ka == "con" and pa.startswith("in"):
            if not (g2.nodes[nb].kind == "con" and pb.startswith("in")):
                return False
            if not pair_nodes(na, nb):
                return False
            seen = conpairs.setdefault(na, {})
            if pa in seen:
                return seen[pa] == pb
            if pb in seen.values():
                return False
            seen[pa] = pb
            return True
        if pa != pb:
            return False
        return pair_nodes(na, nb)

    def pair_nodes(na, nb):
        if na in nmap or nb in nrev:
            return nmap.get(na) == nb
        a, b = g1.nodes[na], g2.nodes[nb]
        if a.kind != b.kind:
            return False
        if a.meta.get("strategy") != b.meta.get("strategy"):
            return False
        nmap[na] = nb
        nrev[nb] = na
        if a.kind == "con":
            ins_a, ins_b = g1.con_inputs(na), g2.con_inputs(nb)
            if len(ins_a) != len(ins_b):
                return False
            return pair_links(a.ports.get("out"), b.ports.get("out"))
        for port in a.ports:
            if not pair_links(a.ports.get(port), b.ports.get(port)):
                return False
        return set(a.ports) == set(b.ports)

    if not pair_links(g1.root, g2.root):
        return False
    for name in g1.outputs:
        if not pair_links(g1.outputs[name], g2.outputs[name]):
            return False
    for a, b in seeds:
        if not pair_links(a, b):
            return False

    # disconnected remainders (e.g. unused shared values): try anchorings
    def extend():
        left = [n for n in g1.nodes if n not in nmap]
        if not left:
            return all(l in lmap for l in g1.links) and _boxes_ok()
        na = min(left)
        a = g1.nodes[na]
        cands = [
            nb
            for nb in g2.nodes
            if nb not in nrev and g2.nodes[nb].kind == a.kind
        ]
        state = (dict(nmap), dict(lmap), dict(nrev), dict(lrev),
                 {k: dict(v) for k, v in conpairs.items()})
        for nb in cands:
            if pair_nodes(na, nb) and _close_links() and extend():
                return True
            nmap.clear(); nmap.update(state[0])
            lmap.clear(); lmap.update(state[1])
            nrev.clear(); nrev.update(state[2])
            lrev.clear(); lrev.update(state[3])
            conpairs.clear()
            conpairs.update({k: dict(v) for k, v in state[4].items()})
        return False

    def _close_links():
        # propagate links incident to newly mapped nodes until stable
        changed = True
        while changed:
            changed = False
            for lid, link in g1.links.items():
                if lid in lmap:
                    continue
                for spec in (link.src, link.dst):
                    if spec is not None and spec[0] == "node" and spec[1] in nmap:
                        n2 = nmap[spec[1]]
                        _, _, port = spec
                        if g1.nodes[spec[1]].kind == "con" and port.startswith("in"):
                            continue  # picked up from the other side
                        other = g2.nodes[n2].ports.get(port)
                        if other is None or not pair_links(lid, other):
                            return False
                        changed = True
                        break
        return True

    def _boxes_ok():
        for bang, box in g1.boxes.items():
            img = nmap.get(bang)
            if img is None or img not in g2.boxes:
                return False
            other = g2.boxes[img]
            if {nmap[m] for m in box.members} != other.members:
                return False
            if [nmap[d] for d in box.doors] != other.doors:
                return False
        return True

    if not _close_links():
        return False
    return extend()


# --------------------------------------------------------------------------
# fingerprints and rendering


def structural_hash(g: Graph, rounds: int = 4) -> str:
    labels = {}
    for nid, node in g.nodes.items():
        extra = node.meta.get("strategy", "")
        labels[nid] = f"N:{node.kind}:{extra}"
    for lid in g.links:
        tag = "root" if lid == g.root else ""
        out = [k for k, v in g.outputs.items() if v == lid]
        labels[lid] = f"L:{tag}:{','.join(sorted(out))}"

    def end_label(spec, role):
        if spec is None:
            return f"{role}:~"
        if spec[0] == "link":
            return f"{role}:link:{labels[spec[1]]}"
        _, nid, port = spec
        if g.nodes[nid].kind == "con" and port.startswith("in"):
            port = "in*"
        return f"{role}:{port}:{labels[nid]}"

    for _ in range(rounds):
        new = {}
        for lid, link in g.links.items():
            sig = (labels[lid], end_label(link.src, "s"), end_label(link.dst, "d"))
            new[lid] = hashlib.sha256("|".join(sig).encode()).hexdigest()[:12]
        for nid, node in g.nodes.items():
            parts = [labels[nid]]
            for port in sorted(node.ports):
                p = "in*" if node.kind == "con" and port.startswith("in") else port
                parts.append(f"{p}={new.get(node.ports[port], labels[node.ports[port]])}")
            if node.kind == "con":
                # input order is not canonical; sort the input wire labels
                ins = sorted(
                    new.get(node.ports[p], "") for p in g.con_inputs(nid)
                )
                parts = [labels[nid], f"ins={','.join(ins)}",
                         f"out={new.get(node.ports.get('out'), '')}"]
            new[nid] = hashlib.sha256("|".join(parts).encode()).hexdigest()[:12]
        labels = new

    digest = hashlib.sha256()
    for lab in sorted(labels.values()):
        digest.update(lab.encode())
    for bang, box in g.boxes.items():
        digest.update(f"box:{len(box.members)}:{len(box.doors)}".encode())
    return digest.hexdigest()[:16]


def to_dot(g: Graph, token_link: Optional[str] = None) -> str:
    out = ["digraph G {", "  rankdir=TB;", "  node [fontsize=10];"]

    shapes = {
        "lam": ("box", "lam"),
        "app": ("box", "@"),
        "bang": ("circle", "!"),
        "whynot": ("circle", "?"),
        "der": ("circle", "D"),
        "con": ("invtriangle", "C"),
    }

    # nested clusters for boxes
    order = sorted(g.boxes, key=lambda b: -len(g.boxes[b].members))

    def owner(nid):
        best = None
        for b in order:
            if nid in g.boxes[b].members:
                if best is None or len(g.boxes[b].members) < len(g.boxes[best].members):
                    best = b
        return best

    def node_line(nid):
        node = g.nodes[nid]
        shape, label = shapes[node.kind]
        if node.kind == "app":
            label = f"@{node.meta.get('strategy','')}"
        if node.kind == "con":
            label = f"C{len(g.con_inputs(nid))}"
        return f'  "{nid}" [shape={shape}, label="{label}"];'

    children = {b: [] for b in g.boxes}
    toplevel_nodes = []
    for nid in g.nodes:
        b = owner(nid)
        if b is None:
            toplevel_nodes.append(nid)
        else:
            children[b].append(nid)

    def emit_box(b, depth):
        pad = "  " * depth
        out.append(f'{pad}subgraph "cluster_{b}" {{')
        out.append(f'{pad}  style=dashed;')
        for nid in children[b]:
            out.append(pad + node_line(nid))
        for inner in order:
            if inner != b and _direct_parent(inner) == b:
                emit_box(inner, depth + 1)
        out.append(pad + "}")

    def _direct_parent(b):
        members = g.boxes[b].members
        best = None
        for other in order:
            if other == b:
                continue
            om = g.boxes[other].members
            if members < om and (best is None or om < g.boxes[best].members):
                best = other
        return best

    for nid in toplevel_nodes:
        out.append(node_line(nid))
    for b in order:
        if _direct_parent(b) is None:
            emit_box(b, 1)

    for lid, link in g.links.items():
        color = "red" if lid == token_link else "gray40"
        extra = ", color=red, penwidth=2" if lid == token_link else ""
        out.append(
            f'  "{lid}" [shape=point, width=0.05, label="", color={color}];'
        )

        def endname(spec):
            return None if spec is None else spec[1]

        if link.src is not None:
            out.append(f'  "{endname(link.src)}" -> "{lid}" [arrowsize=0.5{extra}];')
        if link.dst is not None:
            out.append(f'  "{lid}" -> "{endname(link.dst)}" [arrowsize=0.5{extra}];')
    out.append("}")
    return "\n".join(out)
