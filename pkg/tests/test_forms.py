"""The UI model: components as stored sentences, designer ops as parses."""

import json

import pytest

from panta import forms
from panta.errors import (CategoryMismatch, ContextCycle, DeadSymbol,
                          InvalidParentKind)
from panta.fonal import parse_into, tokenize, utterance_of
from panta.store import apply_delta


def the(v, word):
    hits = v.named(word)
    assert hits, f"no symbol named {word!r}"
    return min(hits)


def parsed(image, v, text):
    b = image.begin(v)
    utt = parse_into(tokenize(text), b)
    return utt, apply_delta(v, b.build())


def same_delta(d1, d2):
    return (d1.added_symbols == d2.added_symbols
            and d1.removed_symbols == d2.removed_symbols
            and d1.added_pairs == d2.added_pairs
            and d1.removed_pairs == d2.removed_pairs
            and dict(d1.name_changes) == dict(d2.name_changes)
            and dict(d1.state_changes) == dict(d2.state_changes))


# ── vocabulary comes from the image ───────────────────────────────────────────

def test_component_kinds(v):
    assert set(forms.component_kinds(v)) == {
        "Form", "Panel", "TabSheet", "Tree", "ListView",
        "Editor", "Button", "Label"}


def test_container_kinds(v):
    assert set(forms.container_kinds(v)) == {"Form", "Panel", "TabSheet"}


def test_event_kinds(v):
    assert len(forms.event_kinds(v)) == 12


def test_client_server_split(v):
    client = forms.client_events(v)
    server = forms.server_events(v)
    assert client == {"OnSelChange", "OnClick", "OnDbClick"}
    assert not client & server
    assert len(client | server) == 12


EVENT_SORTS = {
    "OnGetSet": "np", "OnGetChildren": "np", "OnGetParents": "np",
    "OnCommit": "np",
    "OnSetChanged": "exp", "OnSelChange": "exp", "OnGetState": "exp",
    "OnSelUpdate": "exp", "OnClick": "exp", "OnDbClick": "exp",
    "OnGetName": "proc", "OnGetColumnName": "proc",
}


@pytest.mark.parametrize("event,sort", sorted(EVENT_SORTS.items()))
def test_handler_sorts(v, event, sort):
    assert forms.handler_sort(v, forms.event_kinds(v)[event]) == sort


def test_new_kind_is_a_parse_away(fresh_image):
    image = fresh_image
    v = image.snapshot()
    _, v2 = parsed(image, v, "Component Gauge.")
    assert "Gauge" in forms.component_kinds(v2)
    ch = forms.define_component(image, v2, "Gauge", "GSpeed",
                                parent=the(v2, "FBrowse"))
    v3 = apply_delta(v2, ch.delta)
    assert forms.component_kind(v3, ch.symbol) == "Gauge"


# ── reading stored components ─────────────────────────────────────────────────

def test_component_kind(v):
    assert forms.component_kind(v, the(v, "FBrowse")) == "Form"
    assert forms.component_kind(v, the(v, "TProject")) == "Tree"
    assert forms.component_kind(v, the(v, "Patients")) is None


def test_child_components(v):
    names = [v.name_of(c)
             for c in forms.child_components(v, the(v, "FBrowse"))]
    assert names == ["LSubjects", "LMembers"]


def test_component_forms(v):
    assert [v.name_of(f) for f in forms.component_forms(v)] == [
        "FProject", "FForm", "FDesign", "FBrowse"]


def test_properties(v):
    assert forms.properties_of(v, the(v, "FBrowse")) == {"Caption": "Browse"}
    assert forms.properties_of(v, the(v, "LSubjects")) == {}


def test_event_bindings(v):
    bound = forms.event_bindings(v, the(v, "LSubjects"))
    assert set(bound) == {"OnGetSet"}
    assert v.name_of(bound["OnGetSet"]) == "QSubjects"


def test_feeds(v):
    ls, lm = the(v, "LSubjects"), the(v, "LMembers")
    assert forms.feeds_targets(v, ls) == [lm]
    assert forms.feeds_source(v, lm) == ls
    assert forms.feeds_source(v, ls) is None


def test_home_book(v):
    assert v.name_of(forms.home_book(v, the(v, "FBrowse"))) == "Demo"
    assert v.name_of(forms.home_book(v, the(v, "FDesign"))) == "Workbench"


# ── render specs ──────────────────────────────────────────────────────────────

def test_render_spec_shape(v):
    spec = forms.render_spec(the(v, "FBrowse"), v)
    assert spec.kind == "Form" and spec.name == "FBrowse"
    assert spec.properties == {"Caption": "Browse"}
    kids = {c.name: c for c in spec.children}
    assert set(kids) == {"LSubjects", "LMembers"}
    assert kids["LSubjects"].events["OnGetSet"]["label"] == "QSubjects"
    assert kids["LSubjects"].feeds == (kids["LMembers"].symbol,)


def test_spec_json_canonical(v):
    text = forms.form_spec_json(the(v, "FBrowse"), v)
    assert ": " not in text and ", " not in text
    data = json.loads(text)
    assert list(data) == sorted(data)
    assert data["name"] == "FBrowse"
    assert forms.form_spec_json(the(v, "FBrowse"), v) == text


def test_every_seed_form_renders(v):
    for f in forms.component_forms(v):
        spec = forms.render_spec(f, v)
        assert spec.symbol == f
        json.loads(forms.form_spec_json(f, v))


def test_render_dead_form(fresh_image):
    image = fresh_image
    v = image.snapshot()
    ch = forms.remove_component(image, v, the(v, "FDesign"))
    v2 = apply_delta(v, ch.delta)
    with pytest.raises(DeadSymbol):
        forms.render_spec(ch.symbol, v2)


# ── defining components ───────────────────────────────────────────────────────

def test_define_component(fresh_image):
    image = fresh_image
    v = image.snapshot()
    ch = forms.define_component(image, v, "Button", "BGo",
                                parent=the(v, "FBrowse"),
                                props={"Caption": "Go", "Left": 4,
                                       "Visible": True})
    v2 = apply_delta(v, ch.delta)
    assert v2.name_of(ch.symbol) == "BGo"
    assert forms.component_kind(v2, ch.symbol) == "Button"
    assert ch.symbol in forms.child_components(v2, the(v, "FBrowse"))
    assert forms.properties_of(v2, ch.symbol) == {
        "Caption": "Go", "Left": 4, "Visible": True}
    assert v2.name_of(forms.home_book(v2, ch.symbol)) == "Demo"


def test_define_source_is_the_equivalent_text(fresh_image):
    image = fresh_image
    v = image.snapshot()
    ch = forms.define_component(image, v, "Label", "LHint",
                                parent=the(v, "FBrowse"))
    assert ch.source.splitlines() == [
        "Label LHint.",
        "Form: FBrowse Contains Label: LHint.",
    ]


def test_define_rejects_non_container_parent(v, fresh_image):
    with pytest.raises(InvalidParentKind):
        forms.define_component(fresh_image, v, "Label", "LX",
                               parent=the(v, "EParse"))


def test_define_rejects_unknown_kind(v, fresh_image):
    with pytest.raises(CategoryMismatch):
        forms.define_component(fresh_image, v, "Widget", "WX")


def test_define_rejects_dead_parent(fresh_image):
    image = fresh_image
    v = image.snapshot()
    ch = forms.remove_component(image, v, the(v, "FDesign"))
    v2 = apply_delta(v, ch.delta)
    with pytest.raises(DeadSymbol):
        forms.define_component(image, v2, "Label", "LX", parent=ch.symbol)


# ── designer text equals hand-typed text ──────────────────────────────────────

def test_define_delta_matches_hand_parse(fresh_image):
    image = fresh_image
    v = image.snapshot()
    mark = image.allocate_id()
    ch = forms.define_component(image, v, "Button", "BGo",
                                parent=the(v, "FBrowse"),
                                props={"Caption": "Go"})

    twin = type(image).resume(v, next_id=mark + 1)
    b = twin.begin(v)
    from panta.fonal.storage import append_member
    book = the(v, "Demo")
    for line in ch.source.splitlines():
        utt = parse_into(tokenize(line), b)
        append_member(b, book, utt.symbol)
    assert same_delta(b.build(), ch.delta)


def test_set_property_delta_matches_hand_parse(fresh_image):
    image = fresh_image
    v = image.snapshot()
    fb = the(v, "FBrowse")
    old_u = utterance_of(v, min(
        vp.symbol for vp, verb, _ in forms._has_sentences(v, fb)
        if verb.lower() == "has"))
    mark = image.allocate_id()
    ch = forms.set_property(image, v, fb, "Caption", "People")

    twin = type(image).resume(v, next_id=mark + 1)
    b = twin.begin(v)
    from panta.fonal.storage import append_member, delete_into
    delete_into(b, old_u)
    utt = parse_into(tokenize("Form: FBrowse Has Caption: 'People'."), b)
    append_member(b, the(v, "Demo"), utt.symbol)
    assert same_delta(b.build(), ch.delta)


# ── properties ────────────────────────────────────────────────────────────────

def test_set_property_replaces(fresh_image):
    image = fresh_image
    v = image.snapshot()
    fb = the(v, "FBrowse")
    ch = forms.set_property(image, v, fb, "Caption", "People")
    v2 = apply_delta(v, ch.delta)
    assert forms.properties_of(v2, fb) == {"Caption": "People"}


def test_set_property_adds_when_new(fresh_image):
    image = fresh_image
    v = image.snapshot()
    fb = the(v, "FBrowse")
    ch = forms.set_property(image, v, fb, "Width", 640)
    assert "// delete" not in ch.source
    v2 = apply_delta(v, ch.delta)
    assert forms.properties_of(v2, fb) == {"Caption": "Browse", "Width": 640}


@pytest.mark.parametrize("value", ["Go", 17, True, False, 0])
def test_property_value_round_trip(fresh_image, value):
    image = fresh_image
    v = image.snapshot()
    fb = the(v, "FBrowse")
    ch = forms.set_property(image, v, fb, "Caption", value)
    v2 = apply_delta(v, ch.delta)
    assert forms.properties_of(v2, fb)["Caption"] == value


def test_set_property_rejects_unknown(v, fresh_image):
    with pytest.raises(CategoryMismatch):
        forms.set_property(fresh_image, v, the(v, "FBrowse"), "Color", "red")


# ── event bindings ────────────────────────────────────────────────────────────

def test_bind_np_event(fresh_image):
    image = fresh_image
    v = image.snapshot()
    tp = the(v, "TProject")
    ch = forms.bind_event(image, v, tp, "OnGetChildren", the(v, "QBooks"))
    v2 = apply_delta(v, ch.delta)
    bound = forms.event_bindings(v2, tp)
    assert v2.name_of(bound["OnGetChildren"]) == "QBooks"


def test_bind_proc_event(fresh_image):
    image = fresh_image
    v = image.snapshot()
    tp = the(v, "TProject")
    ch = forms.bind_event(image, v, tp, "OnGetName", the(v, "MyProc"))
    assert "Procedure: MyProc" in ch.source
    v2 = apply_delta(v, ch.delta)
    assert v2.name_of(forms.event_bindings(v2, tp)["OnGetName"]) == "MyProc"


def test_bind_exp_event_takes_operators(fresh_image):
    image = fresh_image
    v = image.snapshot()
    utt, v2 = parsed(image, v, "'QBoth' {All Form} Union {All Tree}.")
    tp = the(v2, "TProject")
    ch = forms.bind_event(image, v2, tp, "OnClick", utt.symbol)
    v3 = apply_delta(v2, ch.delta)
    assert forms.event_bindings(v3, tp)["OnClick"] == utt.symbol


def test_np_event_rejects_operator_expression(fresh_image):
    image = fresh_image
    v = image.snapshot()
    utt, v2 = parsed(image, v, "'QBoth' {All Form} Union {All Tree}.")
    with pytest.raises(CategoryMismatch):
        forms.bind_event(image, v2, the(v2, "TProject"), "OnGetSet",
                         utt.symbol)


def test_np_event_rejects_procedure(v, fresh_image):
    with pytest.raises(CategoryMismatch):
        forms.bind_event(fresh_image, v, the(v, "TProject"), "OnGetSet",
                         the(v, "MyProc"))


def test_proc_event_rejects_expression(v, fresh_image):
    with pytest.raises(CategoryMismatch):
        forms.bind_event(fresh_image, v, the(v, "TProject"), "OnGetName",
                         the(v, "QBooks"))


def test_bind_rejects_unlabeled_handler(fresh_image):
    image = fresh_image
    v = image.snapshot()
    utt, v2 = parsed(image, v, "{All Form}.")
    with pytest.raises(CategoryMismatch):
        forms.bind_event(image, v2, the(v2, "TProject"), "OnGetSet",
                         utt.symbol)


def test_bind_rejects_unknown_event(v, fresh_image):
    with pytest.raises(CategoryMismatch):
        forms.bind_event(fresh_image, v, the(v, "TProject"), "OnWiggle",
                         the(v, "QBooks"))


def test_rebind_replaces(fresh_image):
    image = fresh_image
    v = image.snapshot()
    ls = the(v, "LSubjects")
    ch = forms.bind_event(image, v, ls, "OnGetSet", the(v, "QBooks"))
    assert "// delete" in ch.source
    v2 = apply_delta(v, ch.delta)
    bound = forms.event_bindings(v2, ls)
    assert set(bound) == {"OnGetSet"}
    assert v2.name_of(bound["OnGetSet"]) == "QBooks"


# ── context wiring ────────────────────────────────────────────────────────────

def test_set_context(fresh_image):
    image = fresh_image
    v = image.snapshot()
    tp, lf = the(v, "TProject"), the(v, "LForms")
    ch = forms.set_context(image, v, tp, lf)
    v2 = apply_delta(v, ch.delta)
    assert forms.feeds_source(v2, lf) == tp
    assert lf in forms.feeds_targets(v2, tp)


def test_context_cycle_direct(v, fresh_image):
    with pytest.raises(ContextCycle):
        forms.set_context(fresh_image, v, the(v, "LMembers"),
                          the(v, "LSubjects"))


def test_context_cycle_self(v, fresh_image):
    with pytest.raises(ContextCycle):
        forms.set_context(fresh_image, v, the(v, "LSubjects"),
                          the(v, "LSubjects"))


def test_context_cycle_long_chain(fresh_image):
    image = fresh_image
    v = image.snapshot()
    lm, tp = the(v, "LMembers"), the(v, "TProject")
    v = apply_delta(v, forms.set_context(image, v, lm, tp).delta)
    with pytest.raises(ContextCycle):
        forms.set_context(image, v, tp, the(v, "LSubjects"))


def test_recontext_replaces(fresh_image):
    image = fresh_image
    v = image.snapshot()
    lm, tp = the(v, "LMembers"), the(v, "TProject")
    ch = forms.set_context(image, v, tp, lm)
    v2 = apply_delta(v, ch.delta)
    assert forms.feeds_source(v2, lm) == tp
    assert forms.feeds_targets(v2, the(v2, "LSubjects")) == []


# ── removal cascades ──────────────────────────────────────────────────────────

def test_remove_cascades(fresh_image):
    image = fresh_image
    v = image.snapshot()
    ch = forms.remove_component(image, v, the(v, "FDesign"))
    v2 = apply_delta(v, ch.delta)
    for name in ("FDesign", "TDesign", "LDForms"):
        assert not v2.named(name)
    assert [v2.name_of(f) for f in forms.component_forms(v2)] == [
        "FProject", "FForm", "FBrowse"]


def test_remove_rewrites_declarations(fresh_image):
    image = fresh_image
    v = image.snapshot()
    v2 = apply_delta(v, forms.remove_component(image, v,
                                               the(v, "FDesign")).delta)
    from panta.store import IN, RelationKind
    trees = v2.neighbors(the(v2, "Tree"), RelationKind.CLASSIFICATION, IN)
    assert sorted(v2.name_of(t) for t in trees) == ["TForm", "TProject"]


def test_remove_leaves_other_forms_alone(fresh_image):
    image = fresh_image
    v = image.snapshot()
    before = forms.form_spec_json(the(v, "FBrowse"), v)
    v2 = apply_delta(v, forms.remove_component(image, v,
                                               the(v, "FDesign")).delta)
    assert forms.form_spec_json(the(v2, "FBrowse"), v2) == before


def test_remove_single_leaf(fresh_image):
    image = fresh_image
    v = image.snapshot()
    lm = the(v, "LMembers")
    v2 = apply_delta(v, forms.remove_component(image, v, lm).delta)
    assert not v2.named("LMembers")
    assert [v2.name_of(c)
            for c in forms.child_components(v2, the(v2, "FBrowse"))] == [
        "LSubjects"]
    assert forms.feeds_targets(v2, the(v2, "LSubjects")) == []


def test_remove_keeps_handler_utterances(fresh_image):
    image = fresh_image
    v = image.snapshot()
    v2 = apply_delta(v, forms.remove_component(image, v,
                                               the(v, "FDesign")).delta)
    assert v2.named("QForms")
    assert v2.named("QFormParts")


def test_referenced_component_survives_declassified(fresh_image):
    image = fresh_image
    v = image.snapshot()
    _, v2 = parsed(image, v, "'QPin' {All Symbol With Tree: TDesign}.")
    td = the(v2, "TDesign")
    v3 = apply_delta(v2, forms.remove_component(image, v2, td).delta)
    assert v3.live(td)
    assert forms.component_kind(v3, td) is None
    assert td not in forms.child_components(v3, the(v3, "FDesign"))


def test_remove_and_rebuild_isomorphic(fresh_image):
    image = fresh_image
    v = image.snapshot()
    fd = the(v, "FDesign")
    book = forms.home_book(v, fd)

    def masked(spec_json):
        data = json.loads(spec_json)

        def scrub(d):
            d.pop("symbol")
            for e in d["events"].values():
                e.pop("handler")
            d["feeds"] = len(d["feeds"])
            for c in d["children"]:
                scrub(c)
            return d
        return scrub(data)

    before = masked(forms.form_spec_json(fd, v))
    v = apply_delta(v, forms.remove_component(image, v, fd).delta)

    ch = forms.define_component(image, v, "Form", "FDesign",
                                props={"Caption": "Form Designer"},
                                book=book)
    v = apply_delta(v, ch.delta)
    fd2 = ch.symbol
    for kind, name in (("ListView", "LDForms"), ("Tree", "TDesign")):
        ch = forms.define_component(image, v, kind, name, parent=fd2)
        v = apply_delta(v, ch.delta)
    v = apply_delta(v, forms.bind_event(
        image, v, the(v, "LDForms"), "OnGetSet", the(v, "QForms")).delta)
    v = apply_delta(v, forms.bind_event(
        image, v, the(v, "TDesign"), "OnGetSet", the(v, "QFormParts")).delta)
    v = apply_delta(v, forms.set_context(
        image, v, the(v, "LDForms"), the(v, "TDesign")).delta)

    assert masked(forms.form_spec_json(fd2, v)) == before


def test_remove_dead_component(fresh_image):
    image = fresh_image
    v = image.snapshot()
    ch = forms.remove_component(image, v, the(v, "FDesign"))
    v2 = apply_delta(v, ch.delta)
    with pytest.raises(DeadSymbol):
        forms.remove_component(image, v2, ch.symbol)
