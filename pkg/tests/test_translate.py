import pytest

from tokenmachine.graph import isomorphic
from tokenmachine.smallstep import evaluate
from tokenmachine.terms import (
    Abs,
    App,
    AppArgWithAnswer,
    AppFun,
    ESub,
    ESubBody,
    ESubBound,
    Strategy,
    Var,
    alpha_eq,
    parse,
    plug,
)
from tokenmachine.translate import (
    canonical_answer,
    compose,
    readback,
    translate_actx,
    translate_ectx,
    translate_term,
)


def T(src, strategy=Strategy.NEED):
    return translate_term(parse(src, strategy))


def test_identity_shape():
    tg = T(r"\x. x")
    g = tg.g
    assert g.validate() == []
    kinds = sorted(n.kind for n in g.nodes.values())
    assert kinds == ["bang", "con", "lam"]
    assert len(g.links) == 4
    assert len(g.boxes) == 1
    (box,) = g.boxes.values()
    assert len(box.members) == 3 and box.doors == []
    assert tg.occurrences == {}


def test_application_shape():
    tg = T(r"(\x. x) (\y. y)")
    g = tg.g
    assert g.validate() == []
    kinds = sorted(n.kind for n in g.nodes.values())
    assert kinds == ["app", "bang", "bang", "con", "con", "der", "lam", "lam"]
    assert len(g.boxes) == 2
    # the function wire runs through the der
    app = next(n for n in g.nodes.values() if n.kind == "app")
    der_spec = g.links[app.ports["fun"]].dst
    assert g.node_at(der_spec).kind == "der"
    # and the der output reaches a box root
    der = g.node_at(der_spec)
    assert g.node_at(g.links[der.ports["out"]].dst).kind == "bang"
    # argument goes straight to its box, no der
    assert g.node_at(g.links[app.ports["arg"]].dst).kind == "bang"


def test_free_variable_becomes_door_and_output():
    tg = T(r"\x. x y")
    g = tg.g
    assert g.validate() == []
    assert list(tg.occurrences) == ["y"]
    assert len(tg.occurrences["y"]) == 1
    (box,) = g.boxes.values()
    assert len(box.doors) == 1
    # the exterior wire of the door is the recorded output
    door = g.nodes[box.doors[0]]
    assert door.ports["outside"] == tg.occurrences["y"][0]


def test_each_occurrence_gets_its_own_door():
    tg = T(r"\x. y (x y)")
    (box,) = tg.g.boxes.values()
    assert len(box.doors) == 2
    assert len(tg.occurrences["y"]) == 2


def test_binder_multiplicity_matches_con_arity():
    tg = T(r"\x. x (x (x (\z. z)))")
    g = tg.g
    cons = [n for n in g.nodes.values() if n.kind == "con"]
    arities = sorted(len(g.con_inputs(c.id)) for c in cons)
    # binder x used 3 times, inner z once
    assert arities == [1, 3]


def test_unused_binder_keeps_empty_con():
    tg = T(r"\x. \y. y")
    g = tg.g
    cons = [n for n in g.nodes.values() if n.kind == "con"]
    arities = sorted(len(g.con_inputs(c.id)) for c in cons)
    assert arities == [0, 1]
    assert g.validate() == []


def test_boxes_nest():
    tg = T(r"\x. \y. x")
    g = tg.g
    boxes = sorted(g.boxes.values(), key=lambda b: len(b.members))
    assert len(boxes) == 2
    assert boxes[0].members < boxes[1].members
    assert len(boxes[0].doors) == 1  # x escapes the inner box
    assert len(boxes[1].doors) == 0


def test_esub_translation():
    body = App(Strategy.NEED, Var("x"), Var("x"))
    t = ESub(body, "x", Abs("a", Var("a")))
    tg = translate_term(t)
    g = tg.g
    assert g.validate() == []
    # the sharing con has both occurrences and feeds the value box
    con = next(
        n
        for n in g.nodes.values()
        if n.kind == "con" and len(g.con_inputs(n.id)) == 2
    )
    assert g.node_at(g.links[con.ports["out"]].dst).kind == "bang"


# ---------------------------------------------------------------------------
# decomposition: context translation composed with a plug


def test_answer_context_composes_to_term_translation():
    v = parse(r"\w. w")
    frames = (
        ESubBody("z", parse(r"\b. b")),
        ESubBody("x", App(Strategy.NEED, Var("z"), Var("z"))),
    )
    whole = plug(frames, v)
    ctx = translate_actx(frames)
    composed = compose(ctx, translate_term(v))
    assert composed.g.validate() == []
    direct = translate_term(whole)
    assert isomorphic(composed.g, direct.g)


def test_app_fun_context_composes_to_term_translation():
    # hole in function position: <hole> a, plugged with \q. b q
    ctxpath = (AppFun(Strategy.NEED, Var("a")),)
    plugterm = Abs("q", App(Strategy.NEED, Var("b"), Var("q")))
    composed = compose(translate_ectx(ctxpath), translate_term(plugterm))
    assert composed.g.validate() == []
    direct = translate_term(plug(ctxpath, plugterm))
    assert isomorphic(composed.g, direct.g)
    # free names from both sides thread out
    assert set(composed.occurrences) == {"a", "b"}


def test_bound_position_context_composes_to_term_translation():
    # x demanded from (x x): hole is the bound term
    occ = (AppFun(Strategy.NEED, Var("x")),)
    ctxpath = (ESubBound("x", occ),)
    v = parse(r"\a. a")
    composed = compose(translate_ectx(ctxpath), translate_term(v))
    assert composed.g.validate() == []
    direct = translate_term(
        ESub(App(Strategy.NEED, Var("x"), Var("x")), "x", v)
    )
    assert isomorphic(composed.g, direct.g)


def test_scope_respected_through_frames():
    # [x <- u] frame binds occurrences coming out of the plug
    ctxpath = (ESubBody("x", parse(r"\u. u")),)
    plugterm = App(Strategy.NEED, Var("x"), Var("y"))
    composed = compose(translate_ectx(ctxpath), translate_term(plugterm))
    assert composed.g.validate() == []
    assert set(composed.occurrences) == {"y"}
    direct = translate_term(ESub(plugterm, "x", parse(r"\u. u")))
    assert isomorphic(composed.g, direct.g)


def test_opened_function_context_differs_from_term_translation():
    # an answer in function position is translated opened; plugging the
    # argument hole does NOT reproduce the plain term translation
    ctxpath = (AppArgWithAnswer(Strategy.CBV_LR, parse(r"\a. a")),)
    plugterm = parse(r"\b. b")
    composed = compose(translate_ectx(ctxpath), translate_term(plugterm))
    assert composed.g.validate() == []
    direct = translate_term(
        App(Strategy.CBV_LR, parse(r"\a. a"), parse(r"\b. b"))
    )
    assert not isomorphic(composed.g, direct.g)
    # the opened function has no box and no der: one box total (argument)
    assert len(composed.g.boxes) == 1
    assert len(direct.g.boxes) == 2


def test_empty_context_is_the_plug():
    composed = compose(translate_ectx(()), translate_term(parse(r"\x. x")))
    assert composed.g.validate() == []
    assert isomorphic(composed.g, translate_term(parse(r"\x. x")).g)
    assert composed.root == composed.plug_root


# ---------------------------------------------------------------------------
# readback


def _answer_of(src, strategy=Strategy.NEED):
    r = evaluate(parse(src, strategy))
    assert r.outcome == "answer"
    return r.answer


@pytest.mark.parametrize(
    "src",
    [
        r"(\x. x) (\y. y)",
        r"(\x. x x) (\y. y)",
        r"(\x. \z. z x) (\y. y)",
        r"(\f. f (f (\w. w))) (\q. q)",
    ],
)
def test_readback_inverts_translation_on_answers(src):
    ans = _answer_of(src)
    tg = translate_term(ans)
    back = readback(tg.g)
    assert alpha_eq(canonical_answer(back), canonical_answer(ans))


def test_readback_handles_dead_frames():
    # \z. z with an unused sharing frame attached
    t = ESub(Abs("w", Var("w")), "x", parse(r"(\a. a) (\b. b)"))
    back = readback(translate_term(t).g)
    assert alpha_eq(canonical_answer(back), canonical_answer(t))


def test_canonical_answer_permutation_invariance():
    v = Abs("w", App(Strategy.NEED, Var("x"), Var("y")))
    A = parse(r"\a. a")
    B = parse(r"\b. b b")
    t1 = ESub(ESub(v, "x", A), "y", B)
    t2 = ESub(ESub(v, "y", B), "x", A)
    assert alpha_eq(canonical_answer(t1), canonical_answer(t2))


def test_canonical_answer_respects_dependencies():
    # y's bound term uses x, so y must stay inside x's frame
    v = Abs("w", Var("y"))
    t = ESub(ESub(v, "y", App(Strategy.NEED, Var("x"), Var("x"))), "x", parse(r"\a. a"))
    c = canonical_answer(t)
    assert alpha_eq(c, t)
