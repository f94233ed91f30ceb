import pytest

from tokenmachine.graph import (
    Box,
    Graph,
    isomorphic,
    structural_hash,
    to_dot,
)


def identity_box():
    """Hand-built shared value for \\x. x: a box holding lam + its sharing."""
    g = Graph()
    bang = g.new_node("bang")
    lam = g.new_node("lam")
    con = g.new_node("con")
    root = g.wire(None, ("node", bang, "root"))
    g.wire(("node", bang, "inside"), ("node", lam, "root"))
    body = g.wire(("node", lam, "body"), ("node", con, g.con_add_input(con)))
    g.wire(("node", con, "out"), ("node", lam, "param"))
    g.root = root
    g.boxes[bang] = Box({bang, lam, con}, [])
    return g, bang, body


def test_validate_clean_graph():
    g, _, _ = identity_box()
    assert g.validate() == []


def test_validate_catches_cache_mismatch():
    g, bang, _ = identity_box()
    # corrupt a cache entry behind the API's back
    g.nodes[bang].ports["root"] = "l999"
    codes = {v.code for v in g.validate()}
    assert "cache-mismatch" in codes


def test_validate_catches_polarity_breach():
    g, _, _ = identity_box()
    with pytest.raises(AssertionError):
        lam = next(n for n, node in g.nodes.items() if node.kind == "lam")
        g.wire(("node", lam, "root"), None)  # root is an input, not output


def test_validate_catches_box_leak():
    g, bang, _ = identity_box()
    outside = g.new_node("der")
    lam = next(n for n, node in g.nodes.items() if node.kind == "lam")
    # an edge from inside the box to a non-member through no door
    g.links[g.nodes[lam].ports["body"]]  # (body is internal; add a fresh leak)
    g.wire(("node", outside, "out"), None)
    bad = g.wire(None, ("node", outside, "in"))
    g.set_src(bad, ("node", bang, "inside"))  # steal the inside wire
    codes = {v.code for v in g.validate()}
    assert "box-leak" in codes or "cache-mismatch" in codes or "dangling-port" in codes


def test_validate_box_registry():
    g, bang, _ = identity_box()
    g.boxes[bang].members.discard(bang)
    codes = {v.code for v in g.validate()}
    assert "bad-box" in codes


def test_copy_box_duplicates_structure():
    g, bang, _ = identity_box()
    before = g.metrics()
    new_bang, nmap, lmap = g.copy_box(bang)
    root2 = g.wire(None, ("node", new_bang, "root"))
    assert g.validate() == []
    after = g.metrics()
    assert after["nodes"] == 2 * before["nodes"]
    assert after["boxes"] == 2
    # the two boxes are separate structures
    assert not (g.boxes[bang].members & g.boxes[new_bang].members)
    # and each looks like the original
    h = Graph()
    h_g, _, _ = identity_box()
    assert isomorphic(g_sub(g, bang), g_sub(h_g, next(iter(h_g.boxes))))


def g_sub(g, bang):
    """Extract a box (plus its root link) as a standalone graph."""
    out = Graph()
    box = g.boxes[bang]
    nmap = {}
    for nid in box.members:
        node = g.nodes[nid]
        new = out.new_node(node.kind, **node.meta)
        nmap[nid] = new
    for lid in g.box_internal_links(bang):
        link = g.links[lid]
        _, sn, sp = link.src
        _, dn, dp = link.dst
        out.wire(("node", nmap[sn], sp), ("node", nmap[dn], dp))
    root = out.wire(None, ("node", nmap[bang], "root"))
    out.root = root
    out.boxes[nmap[bang]] = Box(
        {nmap[m] for m in box.members}, [nmap[d] for d in box.doors]
    )
    return out


def test_open_box_splices_wires():
    g, bang, _ = identity_box()
    entry = g.open_box(bang)
    assert g.validate() == []
    assert g.boxes == {}
    # the root link now feeds the lam directly
    lam = next(n for n, node in g.nodes.items() if node.kind == "lam")
    assert g.links[entry].dst == ("node", lam, "root")
    assert entry == g.root


def test_isomorphic_respects_kind_and_wiring():
    a, _, _ = identity_box()
    b, _, _ = identity_box()
    assert isomorphic(a, b)
    # same skeleton but the con has a second (dangling) input wire
    c, c_bang, _ = identity_box()
    con = next(n for n, node in c.nodes.items() if node.kind == "con")
    c.wire(None, ("node", con, c.con_add_input(con)))
    assert not isomorphic(a, c)

    # and a graph with a different node kind in place of the con
    d = Graph()
    bang = d.new_node("bang")
    lam = d.new_node("lam")
    der = d.new_node("der")
    root = d.wire(None, ("node", bang, "root"))
    d.wire(("node", bang, "inside"), ("node", lam, "root"))
    d.wire(("node", lam, "body"), ("node", der, "in"))
    d.wire(("node", der, "out"), ("node", lam, "param"))
    d.root = root
    d.boxes[bang] = Box({bang, lam, der}, [])
    assert not isomorphic(a, d)


def test_isomorphic_con_inputs_up_to_permutation():
    def two_input_con(order):
        g = Graph()
        lam = g.new_node("lam")
        a = g.new_node("app", strategy="need")
        con = g.new_node("con")
        root = g.wire(None, ("node", lam, "root"))
        body = g.wire(("node", lam, "body"), ("node", a, "root"))
        ins = [g.con_add_input(con), g.con_add_input(con)]
        f, s = ("fun", "arg") if order else ("arg", "fun")
        g.wire(("node", a, f), ("node", con, ins[0]))
        g.wire(("node", a, s), ("node", con, ins[1]))
        g.wire(("node", con, "out"), ("node", lam, "param"))
        g.root = root
        return g

    assert isomorphic(two_input_con(True), two_input_con(False))


def test_isomorphic_distinguished_ports_strict():
    def app_graph(swap):
        g = Graph()
        a = g.new_node("app", strategy="need")
        lam = g.new_node("lam")
        con1 = g.new_node("con")
        root = g.wire(None, ("node", a, "root"))
        f, s = ("fun", "arg") if not swap else ("arg", "fun")
        g.wire(("node", a, f), ("node", lam, "root"))
        out = g.wire(("node", a, s), None)
        g.wire(("node", lam, "body"), ("node", con1, g.con_add_input(con1)))
        g.wire(("node", con1, "out"), ("node", lam, "param"))
        g.root = root
        g.outputs["w"] = out
        return g

    assert isomorphic(app_graph(False), app_graph(False))
    assert not isomorphic(app_graph(False), app_graph(True))


def test_isomorphic_handles_disconnected_parts():
    def with_garbage(n_extra):
        g, _, _ = identity_box()
        for _ in range(n_extra):
            con = g.new_node("con")
            other = g.new_node("der")
            g.wire(("node", con, "out"), ("node", other, "in"))
            g.wire(("node", other, "out"), None)
        return g

    assert isomorphic(with_garbage(2), with_garbage(2))
    assert not isomorphic(with_garbage(1), with_garbage(2))


def test_structural_hash_tracks_isomorphism():
    a, _, _ = identity_box()
    b, _, _ = identity_box()
    assert structural_hash(a) == structural_hash(b)
    b.open_box(next(iter(b.boxes)))
    assert structural_hash(a) != structural_hash(b)


def test_collapse_links():
    g = Graph()
    lam = g.new_node("lam")
    con = g.new_node("con")
    a = g.wire(None, ("node", lam, "root"))
    b = g.wire(("node", lam, "body"), None)
    c = g.wire(None, ("node", con, g.con_add_input(con)))
    g.wire(("node", con, "out"), ("node", lam, "param"))
    # chain body -> c through a link-link edge
    g.set_dst(b, ("link", c))
    g.set_src(c, ("link", b))
    g.root = a
    alias = g.collapse_links()
    assert alias == {c: b}
    assert g.validate() == []
    assert g.links[b].dst == ("node", con, "in0")


def test_to_dot_mentions_every_node():
    g, _, _ = identity_box()
    dot = to_dot(g, token_link=g.root)
    for nid in g.nodes:
        assert nid in dot
    assert "cluster" in dot and "red" in dot
