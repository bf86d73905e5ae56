"""The user interface as stored knowledge.

A form is a symbol classified under a component kind; containment is
membership; properties, event bindings and context links are ordinary
stored sentences ("Form: FBrowse Has Caption: 'Browse'."). Because of
that, every designer operation here works by writing the equivalent
source text and parsing it — moving a component with the mouse and typing
the sentence produce the same delta by construction.

Which words are component kinds, which are containers, and which handler
category an event accepts are all read from the image, never hard-coded:
declaring a new kind is a parse away.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Union

from .bootstrap import book_of
from .errors import (CategoryMismatch, ContextCycle, DeadSymbol,
                     InvalidParentKind)
from .fonal import (load_node, load_utterance, node_category, ordered_members,
                    parse_into, tokenize, utterance_category, utterance_of)
from .fonal import syntax as syn
from .fonal.storage import append_member, delete_into, head_referent
from .store import (IN, OUT, Image, ImageVersion, NetDelta, RelationKind)

C = RelationKind.CLASSIFICATION
A = RelationKind.ATTRIBUTION
S = RelationKind.SEQUENCE

PropertyValue = Union[str, int, bool]


@dataclass(frozen=True)
class ComponentSpec:
    """One component with everything a client needs to draw and drive it."""

    symbol: int
    kind: str
    name: str
    properties: dict = field(default_factory=dict)
    events: dict = field(default_factory=dict)
    feeds: tuple = ()
    children: tuple = ()

    def as_dict(self) -> dict:
        return {
            "symbol": self.symbol,
            "kind": self.kind,
            "name": self.name,
            "properties": dict(self.properties),
            "events": {k: dict(h) for k, h in self.events.items()},
            "feeds": list(self.feeds),
            "children": [c.as_dict() for c in self.children],
        }


@dataclass(frozen=True)
class DesignerChange:
    """A designer action: the delta plus the source text it came from."""

    delta: NetDelta
    symbol: Optional[int]
    source: str


# ── reading the schema from the image ─────────────────────────────────────────

def _class_named(v: ImageVersion, word: str) -> Optional[int]:
    hits = v.named(word)
    return min(hits) if hits else None


def _instances(v: ImageVersion, class_word: str) -> frozenset[int]:
    cls = _class_named(v, class_word)
    if cls is None:
        return frozenset()
    return frozenset(v.neighbors(cls, C, IN))


def component_kinds(v: ImageVersion) -> dict[str, int]:
    return {v.name_of(k): k for k in _instances(v, "Component")}


def container_kinds(v: ImageVersion) -> dict[str, int]:
    return {v.name_of(k): k for k in _instances(v, "Container")}


def event_kinds(v: ImageVersion) -> dict[str, int]:
    return {v.name_of(e): e for e in _instances(v, "Event")}


def client_events(v: ImageVersion) -> frozenset[str]:
    return frozenset(v.name_of(e) for e in _instances(v, "ClientEvent"))


def server_events(v: ImageVersion) -> frozenset[str]:
    return frozenset(v.name_of(e) for e in _instances(v, "ServerEvent"))


def handler_sort(v: ImageVersion, event_sym: int) -> Optional[str]:
    """Which handler shape an event executes: a set query ("np"), a free
    expression ("exp") or a procedure ("proc")."""
    for sort, class_word in (("np", "NPEvent"), ("exp", "EXPEvent"),
                             ("proc", "ProcEvent")):
        if event_sym in _instances(v, class_word):
            return sort
    return None


def component_kind(v: ImageVersion, c: int) -> Optional[str]:
    if not v.live(c):
        return None
    kinds = component_kinds(v)
    for cls in v.neighbors(c, C, OUT):
        name = v.name_of(cls)
        if name in kinds:
            return name
    return None


def is_container(v: ImageVersion, c: int) -> bool:
    return component_kind(v, c) in container_kinds(v)


def child_components(v: ImageVersion, c: int) -> list[int]:
    return [m for m in ordered_members(v, c)
            if component_kind(v, m) is not None]


def component_forms(v: ImageVersion) -> list[int]:
    """Every live Form, in symbol order."""
    form_cls = component_kinds(v).get("Form")
    if form_cls is None:
        return []
    return sorted(v.neighbors(form_cls, C, IN))


# ── reading one component's stored sentences ──────────────────────────────────

def _has_sentences(v: ImageVersion, c: int):
    """(vp node, verb name, object node) for every sentence c heads."""
    for vp_sym in sorted(v.neighbors(c, A, OUT)):
        if node_category(v, vp_sym) != syn.VP:
            continue
        vp = load_node(v, vp_sym)
        if vp is None or not vp.children:
            continue
        verb = next((n for n in vp.children if n.category == syn.V), None)
        if verb is None or verb.referent is None or not v.live(verb.referent):
            continue
        yield vp, (v.name_of(verb.referent) or ""), vp.children[-1]


def _value_of(name: str) -> PropertyValue:
    if name == "True":
        return True
    if name == "False":
        return False
    try:
        return int(name)
    except ValueError:
        return name


def _literal(value: PropertyValue) -> str:
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, int):
        return str(value)
    return f"'{value}'"


def properties_of(v: ImageVersion, c: int) -> dict[str, PropertyValue]:
    props = _instances(v, "Property")
    out: dict[str, PropertyValue] = {}
    for _vp, verb, obj in _has_sentences(v, c):
        if verb.lower() != "has" or obj.category != syn.PNP:
            continue
        prop = obj.children[0].referent
        value = head_referent(obj)
        if prop in props and value is not None and v.live(value):
            out[v.name_of(prop)] = _value_of(v.name_of(value) or "")
    return out


def event_bindings(v: ImageVersion, c: int) -> dict[str, int]:
    events = event_kinds(v)
    verbs = {sym: name for name, sym in events.items()}
    out: dict[str, int] = {}
    for _vp, verb_name, obj in _has_sentences(v, c):
        event = next((sym for sym, name in verbs.items()
                      if name.lower() == verb_name.lower()), None)
        if event is None:
            continue
        handler = head_referent(obj)
        if handler is not None and v.live(handler):
            out[v.name_of(event)] = handler
    return out


def feeds_targets(v: ImageVersion, c: int) -> list[int]:
    out = []
    for _vp, verb, obj in _has_sentences(v, c):
        if verb.lower() != "feeds":
            continue
        target = head_referent(obj)
        if target is not None and v.live(target):
            out.append(target)
    return sorted(out)


def feeds_source(v: ImageVersion, c: int) -> Optional[int]:
    """The component whose selection is this one's context, if any."""
    for leaf in sorted(v.neighbors(c, A, IN)):
        if node_category(v, leaf) != syn.SUBJ:
            continue
        u = utterance_of(v, leaf)
        if u is None or utterance_category(v, u) != syn.SENTENCE:
            continue
        utt = load_utterance(v, u)
        subject, vp = utt.root.children
        verb = next((n for n in vp.children if n.category == syn.V), None)
        if verb is None or not v.live(verb.referent):
            continue
        if (v.name_of(verb.referent) or "").lower() != "feeds":
            continue
        if head_referent(vp.children[-1]) == c:
            src = head_referent(subject)
            if src is not None and src != c:
                return src
    return None


# ── designer operations ───────────────────────────────────────────────────────

def _parse_all(image: Image, v: ImageVersion, texts: list[str],
               book: Optional[int]):
    b = image.begin(v)
    last = None
    for text in texts:
        last = parse_into(tokenize(text), b)
        if book is not None and b.live(book):
            append_member(b, book, last.symbol)
    return b, last


def home_book(v: ImageVersion, c: int) -> Optional[int]:
    """The book holding the component's defining utterance."""
    for leaf in sorted(v.neighbors(c, A, IN)):
        u = utterance_of(v, leaf)
        if u is not None and utterance_category(v, u) == syn.GRAMMAR:
            return book_of(v, u)
    return None


def define_component(image: Image, v: ImageVersion, kind: str, name: str,
                     parent: Optional[int] = None,
                     props: Optional[dict] = None,
                     book: Optional[int] = None) -> DesignerChange:
    kinds = component_kinds(v)
    if kind not in kinds:
        raise CategoryMismatch(f"{kind!r} is not a component kind")
    texts = [f"{kind} {name}."]
    if parent is not None:
        if not v.live(parent):
            raise DeadSymbol(parent)
        pkind = component_kind(v, parent)
        if pkind not in container_kinds(v):
            raise InvalidParentKind(
                f"{pkind or 'that symbol'} cannot contain components")
        texts.append(f"{pkind}: {v.name_of(parent)} "
                     f"Contains {kind}: {name}.")
        if book is None:
            book = home_book(v, parent)
    for prop, value in (props or {}).items():
        texts.append(f"{kind}: {name} Has {prop}: {_literal(value)}.")
    b, _ = _parse_all(image, v, texts, book)
    delta = b.build()
    symbol = next(s for s in delta.added_symbols
                  if any(n == name for t, n in delta.name_changes if t == s))
    return DesignerChange(delta, symbol, "\n".join(texts))


def remove_component(image: Image, v: ImageVersion, c: int) -> DesignerChange:
    """Remove a component and its whole subtree: every sentence about any
    of them goes, and their declarations lose exactly those items."""
    if not v.live(c):
        raise DeadSymbol(c)
    comps = [c]
    for m in comps:
        comps.extend(x for x in child_components(v, m) if x not in comps)
    doomed = set(comps)

    sentences: set[int] = set()
    declarations: dict[int, set[int]] = {}
    for d in doomed:
        for leaf in v.neighbors(d, A, IN):
            u = utterance_of(v, leaf)
            if u is None:
                continue
            cat = utterance_category(v, u)
            if cat == syn.SENTENCE:
                sentences.add(u)
            elif cat == syn.GRAMMAR:
                declarations.setdefault(u, set()).add(d)
        for vp_sym in v.neighbors(d, A, OUT):
            u = utterance_of(v, vp_sym)
            if u is not None and utterance_category(v, u) == syn.SENTENCE:
                sentences.add(u)

    b = image.begin(v)
    lines = []
    for u in sorted(sentences):
        lines.append(f"// delete: {_describe(v, u)}")
        delete_into(b, u)
    for u in sorted(declarations):
        utt = load_utterance(v, u)
        cat_word = v.name_of(utt.root.children[0].referent)
        keep = [v.name_of(item.referent) for item in utt.root.children[1:]
                if item.referent not in declarations[u]]
        book = book_of(v, u)
        lines.append(f"// delete: {_describe(v, u)}")
        delete_into(b, u)
        if keep and cat_word:
            text = f"{cat_word} {', '.join(keep)}."
            lines.append(text)
            utt2 = parse_into(tokenize(text), b)
            if book is not None and b.live(book):
                append_member(b, book, utt2.symbol)
    return DesignerChange(b.build(), c, "\n".join(lines))


def _describe(v: ImageVersion, u: int) -> str:
    from .fonal import phrase_utterance
    try:
        return phrase_utterance(load_utterance(v, u), v)
    except Exception:
        return f"#{u}"


def set_property(image: Image, v: ImageVersion, c: int, prop: str,
                 value: PropertyValue) -> DesignerChange:
    kind = component_kind(v, c)
    if kind is None:
        raise DeadSymbol(c)
    prop_syms = {v.name_of(p): p for p in _instances(v, "Property")}
    if prop not in prop_syms:
        raise CategoryMismatch(f"{prop!r} is not a property")
    b = image.begin(v)
    lines = []
    for vp, verb, obj in _has_sentences(v, c):
        if verb.lower() == "has" and obj.category == syn.PNP \
                and obj.children[0].referent == prop_syms[prop]:
            u = utterance_of(v, vp.symbol)
            if u is not None:
                lines.append(f"// delete: {_describe(v, u)}")
                delete_into(b, u)
    text = f"{kind}: {v.name_of(c)} Has {prop}: {_literal(value)}."
    lines.append(text)
    utt = parse_into(tokenize(text), b)
    book = home_book(v, c)
    if book is not None and b.live(book):
        append_member(b, book, utt.symbol)
    return DesignerChange(b.build(), c, "\n".join(lines))


def bind_event(image: Image, v: ImageVersion, c: int, kind: str,
               handler: int) -> DesignerChange:
    """Bind a handler utterance to one of the component's events; a prior
    binding for the same event is replaced in the same delta."""
    ckind = component_kind(v, c)
    if ckind is None:
        raise DeadSymbol(c)
    events = event_kinds(v)
    if kind not in events:
        raise CategoryMismatch(f"{kind!r} is not an event")
    sort = handler_sort(v, events[kind])
    utt = load_utterance(v, handler)
    label = v.name_of(handler)
    if label is None:
        raise CategoryMismatch("an event handler needs a label")
    if sort == "proc":
        if utt.category != syn.PROCEDURE:
            raise CategoryMismatch(f"{kind} runs a procedure, "
                                   f"not a {utt.category}")
        class_word = "Procedure"
    else:
        if utt.category != syn.EXPRESSION:
            raise CategoryMismatch(f"{kind} runs an expression, "
                                   f"not a {utt.category}")
        if sort == "np" and not _is_plain_query(utt):
            raise CategoryMismatch(f"{kind} takes a plain set query")
        class_word = "Expression"

    b = image.begin(v)
    lines = []
    bound = event_bindings(v, c)
    if kind in bound:
        for vp, verb, _obj in _has_sentences(v, c):
            if verb.lower() == kind.lower():
                u = utterance_of(v, vp.symbol)
                if u is not None:
                    lines.append(f"// delete: {_describe(v, u)}")
                    delete_into(b, u)
    text = f"{ckind}: {v.name_of(c)} {kind} {class_word}: {label}."
    lines.append(text)
    utt2 = parse_into(tokenize(text), b)
    book = home_book(v, c)
    if book is not None and b.live(book):
        append_member(b, book, utt2.symbol)
    return DesignerChange(b.build(), c, "\n".join(lines))


def _is_plain_query(utt) -> bool:
    """True when the stored expression is a bare set query: one EP that is
    a single noun-phrase operand (no assignment, no operators)."""
    if len(utt.root.children) != 1:
        return False
    ep = utt.root.children[0]
    return ep.category == syn.EP and len(ep.children) == 1 \
        and ep.children[0].category in (syn.NP, syn.PNP, syn.DP)


def set_context(image: Image, v: ImageVersion, source: int,
                target: int) -> DesignerChange:
    """Declare that target's queries run with "this" = source's selection."""
    skind = component_kind(v, source)
    tkind = component_kind(v, target)
    if skind is None:
        raise DeadSymbol(source)
    if tkind is None:
        raise DeadSymbol(target)
    reachable = {source}
    frontier = [source]
    while frontier:
        cur = frontier.pop()
        nxt = feeds_source(v, cur)
        if nxt is not None and nxt not in reachable:
            reachable.add(nxt)
            frontier.append(nxt)
    if target in reachable:
        raise ContextCycle(f"{v.name_of(target)} already feeds "
                           f"{v.name_of(source)}")

    b = image.begin(v)
    lines = []
    old = feeds_source(v, target)
    if old is not None:
        for vp, verb, obj in _has_sentences(v, old):
            if verb.lower() == "feeds" and head_referent(obj) == target:
                u = utterance_of(v, vp.symbol)
                if u is not None:
                    lines.append(f"// delete: {_describe(v, u)}")
                    delete_into(b, u)
    text = (f"{skind}: {v.name_of(source)} Feeds "
            f"{tkind}: {v.name_of(target)}.")
    lines.append(text)
    utt = parse_into(tokenize(text), b)
    book = home_book(v, source)
    if book is not None and b.live(book):
        append_member(b, book, utt.symbol)
    return DesignerChange(b.build(), target, "\n".join(lines))


# ── render specs ──────────────────────────────────────────────────────────────

def render_spec(form: int, v: ImageVersion) -> ComponentSpec:
    if not v.live(form):
        raise DeadSymbol(form)
    return _spec_of(v, form, seen=set())


def _spec_of(v: ImageVersion, c: int, seen: set[int]) -> ComponentSpec:
    kind = component_kind(v, c)
    events = {}
    for name, handler in sorted(event_bindings(v, c).items()):
        events[name] = {"handler": handler, "label": v.name_of(handler)}
    children = []
    if c not in seen:
        seen.add(c)
        for child in child_components(v, c):
            children.append(_spec_of(v, child, seen))
    return ComponentSpec(
        symbol=c,
        kind=kind or "Symbol",
        name=v.name_of(c) or f"#{c}",
        properties=properties_of(v, c),
        events=events,
        feeds=tuple(feeds_targets(v, c)),
        children=tuple(children),
    )


def form_spec_json(form: int, v: ImageVersion) -> str:
    """The canonical serialized form: stable key order, no whitespace."""
    return json.dumps(render_spec(form, v).as_dict(),
                      sort_keys=True, separators=(",", ":"))
