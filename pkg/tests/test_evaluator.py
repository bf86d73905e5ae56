"""Query and procedure evaluation over the seeded image."""

import pytest

from panta import fonal
from panta.errors import (ArityMismatch, EvalError, ExecutionError,
                          MissingContext, TypeMismatch, UnresolvedVariable)
from panta.evaluator import (Binding, Evaluator, ExecutionPath, eval_ep,
                             eval_np)
from panta.fonal import load_utterance, node_category
from panta.fonal import syntax as syn
from panta.store import apply_delta

import oracles


def the(v, word):
    hits = v.named(word)
    assert hits, f"nothing named {word!r}"
    return min(hits)


def names(v, syms):
    return {v.name_of(s) for s in syms}


def parsed(image, v, text):
    utt, delta = fonal.parse(fonal.tokenize(text), image, base=v)
    return utt, apply_delta(v, delta)


def query(image, v, text, this=None):
    utt, v2 = parsed(image, v, text)
    result = Evaluator(v2, Binding(this=this)).eval_ep(utt.root)
    return result, v2


# ── noun phrases ──────────────────────────────────────────────────────────────

def test_all_books(seed_image, v):
    result, _ = query(seed_image, v, "{All Book}.")
    assert names(v, result) == {"Language", "Interface", "Workbench", "Demo"}


def test_adjective_filters(seed_image, v):
    result, _ = query(seed_image, v, "{All Ill Patients}.")
    assert names(v, result) == {"Patient1", "Patient2"}
    result, _ = query(seed_image, v, "{All Healthy Patients}.")
    assert names(v, result) == {"Patient3"}


def test_noun_is_transitive(seed_image, v):
    result, _ = query(seed_image, v, "{All Subject}.")
    assert {"Patients", "Trials", "Patient1", "Trial2"} <= names(v, result)


def test_set_difference(seed_image, v):
    result, _ = query(seed_image, v,
                      "{All Operators} Minus {Operator: Minus}.")
    assert names(v, result) == {"Union", "Intersect"}


def test_partitive_takes_lowest(seed_image, v):
    result, _ = query(seed_image, v, "{1 Of The Subjects}.")
    assert result == frozenset({min(the(v, s) for s in
                                    ("Patients", "Trials", "Patient1",
                                     "Patient2", "Patient3", "Trial1",
                                     "Trial2"))})


def test_first_picks_lowest(seed_image, v):
    result, _ = query(seed_image, v, "{The First Form}.")
    assert names(v, result) == {"FProject"}


def test_default_substitutes_when_empty(seed_image, v):
    # no Label instance exists, so the default phrase takes over
    result, _ = query(seed_image, v,
                      "{A Default: {The First Form} Label}.")
    assert names(v, result) == {"FProject"}


def test_this_outside_domain_is_empty(seed_image, v):
    result, _ = query(seed_image, v, "{This Book}.",
                      this=the(v, "FProject"))
    assert result == frozenset()


def test_universal_noun(seed_image, v):
    result, _ = query(seed_image, v, "{All Symbol In {Form: FProject}}.")
    assert names(v, result) == {"TProject", "EParse", "BParse"}


def test_with_navigation(seed_image, v):
    result, _ = query(seed_image, v, "{All Form With Editor: EParse}.")
    assert names(v, result) == {"FProject"}
    result, _ = query(seed_image, v, "{All Form With Tree: TForm}.")
    assert names(v, result) == {"FForm"}


def test_of_reads_property_values(seed_image, v):
    result, _ = query(seed_image, v, "{All Caption Of {Form: FBrowse}}.")
    assert names(v, result) == {"Browse"}


def test_to_finds_referring_leaves(seed_image, fresh_image):
    image = fresh_image
    v = image.snapshot()
    for text in ("Category EvTag.", "EvTag EvX."):
        utt, delta = fonal.parse(fonal.tokenize(text), image, base=v)
        v = image.advance(delta)
    result, v2 = query(image, v, "{All Subj To {EvTag: EvX}}.")
    # the defining item leaf plus the query's own instance leaf
    assert len(result) == 2
    assert all(node_category(v2, s) == syn.SUBJ for s in result)


# ── stored queries with context ───────────────────────────────────────────────

def test_stored_query_books(seed_image, v):
    utt = load_utterance(v, the(v, "QBooks"))
    assert names(v, Evaluator(v).eval_ep(utt.root)) == \
        {"Language", "Interface", "Workbench", "Demo"}


def test_stored_query_by_subject(seed_image, v):
    utt = load_utterance(v, the(v, "QBySubject"))
    ev = Evaluator(v, Binding(this=the(v, "Patients")))
    assert names(v, ev.eval_ep(utt.root)) == \
        {"Patient1", "Patient2", "Patient3"}
    ev = Evaluator(v, Binding(this=the(v, "Trials")))
    assert names(v, ev.eval_ep(utt.root)) == {"Trial1", "Trial2"}


def test_stored_query_needs_context(seed_image, v):
    utt = load_utterance(v, the(v, "QBySubject"))
    with pytest.raises(MissingContext):
        Evaluator(v).eval_ep(utt.root)


def test_stored_query_book_parts(seed_image, v):
    from panta.bootstrap import book_named, book_utterances
    demo = book_named(v, "Demo")
    utt = load_utterance(v, the(v, "QBookParts"))
    ev = Evaluator(v, Binding(this=demo))
    assert ev.eval_ep(utt.root) == frozenset(book_utterances(v, demo))


def test_stored_query_form_parts(seed_image, v):
    utt = load_utterance(v, the(v, "QFormParts"))
    ev = Evaluator(v, Binding(this=the(v, "FBrowse")))
    assert names(v, ev.eval_ep(utt.root)) == {"LSubjects", "LMembers"}


# ── expressions ───────────────────────────────────────────────────────────────

def test_union_and_intersect(seed_image, v):
    result, _ = query(seed_image, v, "{All Form} Union {All Tree}.")
    assert names(v, result) == {"FProject", "FForm", "FDesign", "FBrowse",
                                "TProject", "TForm", "TDesign"}
    result, _ = query(seed_image, v,
                      "{All Form} Intersect {All Tree}.")
    assert result == frozenset()


def test_left_associative_chain(seed_image, v):
    result, _ = query(
        seed_image, v,
        "{All Form} Union {All Tree} Intersect {All Symbol In "
        "{Form: FForm}}.")
    # (Form ∪ Tree) ∩ members(FForm) — not Form ∪ (Tree ∩ members)
    assert names(v, result) == {"TForm"}


def test_assignment_binds_and_returns(seed_image, v):
    utt, v2 = parsed(seed_image, v, "N = 2.")
    ev = Evaluator(v2)
    assert ev.eval_ep(utt.root) == 2
    assert ev.binding.lookup(utt.root.children[0].referent) == 2


def test_unbound_variable(seed_image, v):
    _, v2 = parsed(seed_image, v, "M = {All Book}.")
    utt, v3 = parsed(seed_image, v2, "{All Book} Union M.")
    with pytest.raises(UnresolvedVariable):
        Evaluator(v3).eval_ep(utt.root)


def test_union_with_number_is_a_type_error(seed_image, v):
    utt, v2 = parsed(seed_image, v, "{All Book} Union 2.")
    with pytest.raises(TypeMismatch):
        Evaluator(v2).eval_ep(utt.root)


# ── procedures ────────────────────────────────────────────────────────────────

def test_stored_procedure_returns(seed_image, v):
    assert Evaluator(v).call_procedure(the(v, "MyProc"), []) == 2


def test_parameters_and_arity(seed_image, v):
    utt, v2 = parsed(seed_image, v,
                     "'EvKeep'(X) {Return X Intersect {All Form};}")
    forms = frozenset({the(v2, "FProject"), the(v2, "Patients")})
    result = Evaluator(v2).call_procedure(utt.symbol, [forms])
    assert names(v2, result) == {"FProject"}
    with pytest.raises(ArityMismatch):
        Evaluator(v2).call_procedure(utt.symbol, [])


def test_return_skips_later_instructions(seed_image, v):
    utt, v2 = parsed(seed_image, v,
                     "'EvCut'() {Return 2; Z = {All Book};}")
    ev = Evaluator(v2)
    assert ev.call_procedure(utt.symbol, []) == 2
    assert not ev.binding.bound(the(v2, "Z"))


def test_procedure_without_return_yields_nothing(seed_image, v):
    utt, v2 = parsed(seed_image, v, "'EvNada'() {Q = 2;}")
    assert Evaluator(v2).call_procedure(utt.symbol, []) is None


def test_direct_recursion_hits_depth_cap(seed_image, v):
    utt, v2 = parsed(seed_image, v, "'EvLoop'() {Return 'EvLoop'();}")
    with pytest.raises(ExecutionError):
        Evaluator(v2).call_procedure(utt.symbol, [])


def test_call_as_operand(seed_image, v):
    _, v2 = parsed(seed_image, v, "'EvTwo'() {Return {All Tree};}")
    utt, v3 = parsed(seed_image, v2, "{All Form} Union 'EvTwo'().")
    result = Evaluator(v3).eval_ep(utt.root)
    assert {"FProject", "TProject", "TForm", "TDesign"} <= names(v3, result)


def test_this_travels_into_calls(seed_image, v):
    _, v2 = parsed(seed_image, v,
                   "'EvHere'() {Return {All Symbol By This Subject};}")
    utt, v3 = parsed(seed_image, v2, "Q2 = 'EvHere'().")
    ev = Evaluator(v3, Binding(this=the(v3, "Trials")))
    assert names(v3, ev.eval_ep(utt.root)) == {"Trial1", "Trial2"}


# ── execution path and yield points ───────────────────────────────────────────

def test_path_discipline(seed_image, v):
    snapshots = []
    ev = Evaluator(v, yield_hook=lambda e: snapshots.append(
        tuple(entry.kind for entry in e.path.entries)))
    ev.call_procedure(the(v, "MyProc"), [])
    assert snapshots == [
        ("MainEntry", "Procedure"),
        ("MainEntry", "Procedure", "InstructionList"),
        ("MainEntry", "Procedure", "InstructionList"),
    ]
    assert ev.path.at_main()


def test_path_symbols_cover_the_procedure(seed_image, v):
    p = the(v, "MyProc")
    seen = []
    ev = Evaluator(v, yield_hook=lambda e: seen.append(e.path.symbols()))
    ev.call_procedure(p, [])
    assert all(p in s for s in seen)
    assert len(seen[-1]) == 2  # procedure and its instruction list


def test_path_unwinds_after_errors(seed_image, v):
    utt, v2 = parsed(seed_image, v, "'EvBoom'() {Return 'EvBoom'();}")
    ev = Evaluator(v2)
    with pytest.raises(ExecutionError):
        ev.call_procedure(utt.symbol, [])
    assert ev.path.at_main()


# ── events ────────────────────────────────────────────────────────────────────

def test_event_with_expression_handler(seed_image, v):
    result = Evaluator(v).eval_event(None, the(v, "QBooks"))
    assert names(v, result) == {"Language", "Interface", "Workbench", "Demo"}


def test_event_with_procedure_handler(seed_image, v):
    assert Evaluator(v).eval_event(None, the(v, "MyProc")) == 2


def test_event_rejects_sentences(seed_image, v):
    with pytest.raises(ExecutionError):
        Evaluator(v).eval_event(None, the(v, "SenS1"))


# ── free functions ────────────────────────────────────────────────────────────

def test_free_entry_points(seed_image, v):
    utt, v2 = parsed(seed_image, v, "{All Book}.")
    ep = utt.root.children[0]
    np = ep.children[0]
    assert eval_ep(ep, v2) == eval_np(np, v2)
    assert len(eval_np(np, v2)) == 4


# ── agreement with the brute-force oracle ─────────────────────────────────────

ORACLE_CASES = [
    ("{All Book}.", None),
    ("{All Subject}.", None),
    ("{All Ill Patients}.", None),
    ("{All Healthy Patients}.", None),
    ("{All Ill And Healthy Patients}.", None),
    ("{All Operators} Minus {Operator: Minus}.", None),
    ("{All Form} Union {All Tree} Intersect {All Symbol In "
     "{Form: FForm}}.", None),
    ("{1 Of The Subjects}.", None),
    ("{2 Of All Symbol In {Form: FProject}}.", None),
    ("{The First Form}.", None),
    ("{A Default: {The First Form} Label}.", None),
    ("{All Symbol From {Book: Demo}}.", None),
    ("{All Symbol In {Form: FProject}}.", None),
    ("{All Form With Editor: EParse}.", None),
    ("{All Caption Of {Form: FBrowse}}.", None),
    ("{All Patients By {Subject: Patients}}.", None),
    ("{All Symbol By This Subject}.", "Patients"),
    ("{All Symbol From This Symbol}.", "Demo"),
    ("{This Book}.", "Demo"),
]


@pytest.mark.parametrize("text,this_name", ORACLE_CASES)
def test_matches_oracle(seed_image, v, text, this_name):
    utt, v2 = parsed(seed_image, v, text)
    this = None if this_name is None else the(v2, this_name)
    got = Evaluator(v2, Binding(this=this)).eval_ep(utt.root)
    want = oracles.oracle_ep(v2, utt.root, this)
    assert isinstance(got, frozenset)
    assert got == want
