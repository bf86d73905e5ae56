"""Storing syntax trees in the image and reading them back.

Encoding, uniform for syntax trees, book membership and component trees:
  - every node is a symbol, classified under an anchor symbol that names its
    category ("NP", "Subj", "Call", ...; utterance roots under "Grammar",
    "Sentence", "Procedure" or "Expression")
  - ordered children hang off their parent by a Sequence pair parent->child
    per child, plus a sibling chain child_i->child_{i+1}
  - a leaf's referent hangs off the leaf by one Attribution pair
  - the root carries one Attribution pair per symbol the parse created, so
    deletion knows what it may reclaim

Membership is recoverable without knowing the parent: z in S-out(x) is a
child of x unless some third symbol holds Sequence pairs to both z and x
(then z is x's sibling, or the next utterance in the book chain).
"""

from __future__ import annotations

from typing import Optional

from ..errors import DuplicateName, NotAnUtterance
from ..store import IN, OUT, DeltaBuilder, Pair, RelationKind
from . import syntax as syn
from .grammar import recognize
from .syntax import SyntaxNode, Utterance

C = RelationKind.CLASSIFICATION
A = RelationKind.ATTRIBUTION
S = RelationKind.SEQUENCE

# node category -> anchor symbol name; leaf anchors whose natural name would
# collide with a word-class symbol (Vq, Number, Variable, Operator) get a
# "-Word" suffixed name instead
ANCHOR_OF = {
    syn.NP: "NP", syn.VP: "VP", syn.AP: "AP", syn.DEFP: "DEFP",
    syn.DP: "DP", syn.PP: "PP", syn.QP: "QP", syn.PNP: "PNP",
    syn.EXP: "EXP", syn.EP: "EP", syn.IL: "IL", syn.CALL: "Call",
    syn.SUBJ: "Subj", syn.V: "V", syn.VQ: "VqWord", syn.ADJ: "Adj",
    syn.PREP: "Prep", syn.NUMBER: "NumberWord",
    syn.VARIABLE: "VariableWord", syn.OPERATOR: "OperatorWord",
}
CATEGORY_OF_ANCHOR = {v: k for k, v in ANCHOR_OF.items()}
NODE_ANCHOR_NAMES = frozenset(ANCHOR_OF.values())
# categories whose nodes carry a referent by an Attribution pair
REFERENT_CATEGORIES = syn.LEAF_CATEGORIES | {syn.QP, syn.CALL}

STRUCTURAL_VERB_CONTAINS = "contains"


def ensure_anchor(builder: DeltaBuilder, name: str) -> int:
    hits = builder.named(name)
    if hits:
        return min(hits)
    return builder.create_symbol(name)


def find_anchor(view, name: str) -> Optional[int]:
    hits = view.named(name)
    return min(hits) if hits else None


def utterance_category(view, sym: int) -> Optional[str]:
    if not view.live(sym):
        return None
    for cls in view.neighbors(sym, C, OUT):
        name = view.name_of(cls)
        if name in syn.UTTERANCE_CATEGORIES:
            return name
    return None


def node_category(view, sym: int) -> Optional[str]:
    for cls in view.neighbors(sym, C, OUT):
        name = view.name_of(cls)
        if name in CATEGORY_OF_ANCHOR:
            return CATEGORY_OF_ANCHOR[name]
    return None


def is_utterance(view, sym: int) -> bool:
    return utterance_category(view, sym) is not None


# ── ordered membership ────────────────────────────────────────────────────────

def members(view, x: int) -> frozenset[int]:
    """The children of x in the Sequence encoding (unordered)."""
    out = view.neighbors(x, S, OUT)
    kept = set()
    for z in out:
        sibling = False
        for p in view.neighbors(z, S, IN):
            if p != x and x in view.neighbors(p, S, OUT):
                sibling = True
                break
        if not sibling:
            kept.add(z)
    return frozenset(kept)


def ordered_members(view, x: int) -> list[int]:
    mem = members(view, x)
    if not mem:
        return []
    # chain heads: members no other member points to
    heads = sorted(z for z in mem
                   if not (view.neighbors(z, S, IN) & mem))
    out: list[int] = []
    seen: set[int] = set()
    for head in heads:
        cur: Optional[int] = head
        while cur is not None and cur not in seen:
            out.append(cur)
            seen.add(cur)
            nxt = sorted(view.neighbors(cur, S, OUT) & mem)
            cur = nxt[0] if nxt else None
    for z in sorted(mem - seen):  # stray members: deterministic fallback
        out.append(z)
    return out


def append_member(builder: DeltaBuilder, parent: int, child: int) -> None:
    mem = ordered_members(builder, parent)
    if mem and mem[-1] != child and child not in mem:
        builder.connect(mem[-1], child, S)
    builder.connect(parent, child, S)


def insert_member(builder: DeltaBuilder, parent: int, child: int,
                  index: int) -> None:
    mem = [m for m in ordered_members(builder, parent) if m != child]
    index = max(0, min(index, len(mem)))
    prev = mem[index - 1] if index > 0 else None
    nxt = mem[index] if index < len(mem) else None
    if prev is not None and nxt is not None:
        builder.disconnect(prev, nxt, S)
    if prev is not None:
        builder.connect(prev, child, S)
    if nxt is not None:
        builder.connect(child, nxt, S)
    builder.connect(parent, child, S)


def remove_member(builder: DeltaBuilder, parent: int, child: int) -> None:
    """Unhook child from parent's member list, repairing the sibling chain."""
    mem = ordered_members(builder, parent)
    if child not in mem:
        builder.disconnect(parent, child, S)
        return
    i = mem.index(child)
    prev = mem[i - 1] if i > 0 else None
    nxt = mem[i + 1] if i + 1 < len(mem) else None
    if prev is not None:
        builder.disconnect(prev, child, S)
    if nxt is not None:
        builder.disconnect(child, nxt, S)
    if prev is not None and nxt is not None:
        builder.connect(prev, nxt, S)
    builder.disconnect(parent, child, S)


# ── storing ───────────────────────────────────────────────────────────────────

def head_referent(np: SyntaxNode) -> Optional[int]:
    """The symbol a noun phrase is about: its head noun, or the instance of
    a PNP, or the head of the phrase a DP quantifies over."""
    if np.category == syn.PNP:
        return np.children[1].referent if len(np.children) > 1 else None
    if np.category == syn.DP:
        return head_referent(np.children[1]) if len(np.children) > 1 else None
    if np.category == syn.NP:
        for c in np.children:
            if c.category == syn.SUBJ:
                return c.referent
    return None


def store_utterance(builder: DeltaBuilder, utt: Utterance,
                    created_refs: tuple[int, ...] = ()) -> int:
    anchor = ensure_anchor(builder, utt.category)
    if utt.label is not None:
        if recognize(utt.label, builder, anchor, case_sensitive=True):
            raise DuplicateName(utt.label)
    root_sym = builder.create_symbol(utt.label)
    builder.connect(root_sym, anchor, C)
    utt.root.symbol = root_sym
    utt.symbol = root_sym
    for node in utt.root.walk():
        if node.referent == syn.SELF_REFERENT:  # a recursive call
            node.referent = root_sym
    _store_children(builder, utt.root)
    _store_facts(builder, utt)
    for r in created_refs:
        if builder.live(r):
            builder.connect(root_sym, r, A)
    return root_sym


def _store_children(builder: DeltaBuilder, node: SyntaxNode) -> None:
    prev = None
    for child in node.children:
        sym = builder.create_symbol()
        child.symbol = sym
        builder.connect(sym, ensure_anchor(builder, ANCHOR_OF[child.category]), C)
        builder.connect(node.symbol, sym, S)
        if prev is not None:
            builder.connect(prev, sym, S)
        prev = sym
        if child.referent is not None and child.category in REFERENT_CATEGORIES:
            builder.connect(sym, child.referent, A)
        _store_children(builder, child)


def _store_facts(builder: DeltaBuilder, utt: Utterance) -> None:
    root = utt.root
    if utt.category == syn.GRAMMAR:
        cat_ref = root.children[0].referent
        for item in root.children[1:]:
            builder.connect(item.referent, cat_ref, C)
    elif utt.category == syn.SENTENCE:
        subject, vp = root.children
        head = head_referent(subject)
        if head is not None:
            builder.connect(head, vp.symbol, A)
        verb = next(c for c in vp.children if c.category == syn.V)
        vname = builder.name_of(verb.referent) or ""
        if vname.lower() == STRUCTURAL_VERB_CONTAINS:
            child_ref = head_referent(vp.children[-1])
            if head is not None and child_ref is not None:
                append_member(builder, head, child_ref)


# ── loading ───────────────────────────────────────────────────────────────────

def load_utterance(view, u_sym: int) -> Utterance:
    if not view.live(u_sym):
        raise NotAnUtterance(u_sym)
    ucat = utterance_category(view, u_sym)
    if ucat is None:
        raise NotAnUtterance(u_sym)
    root = SyntaxNode(syn.ROOT_OF[ucat], symbol=u_sym)
    _load_children(view, root)
    return Utterance(ucat, root, symbol=u_sym, label=view.name_of(u_sym))


def load_node(view, sym: int) -> Optional[SyntaxNode]:
    """Load the stored subtree rooted at any syntax node symbol (not
    necessarily an utterance root); None if sym is no syntax node."""
    cat = node_category(view, sym)
    if cat is None:
        return None
    node = SyntaxNode(cat, symbol=sym)
    if cat in REFERENT_CATEGORIES:
        refs = view.neighbors(sym, A, OUT)
        if refs:
            node.referent = min(refs)
            node.lexeme = view.name_of(node.referent)
    _load_children(view, node)
    return node


def _load_children(view, node: SyntaxNode) -> None:
    for sym in ordered_members(view, node.symbol):
        cat = node_category(view, sym)
        if cat is None:
            continue  # not a syntax node (book chain, component members)
        child = SyntaxNode(cat, symbol=sym)
        if cat in REFERENT_CATEGORIES:
            refs = view.neighbors(sym, A, OUT)
            if refs:
                child.referent = min(refs)
                child.lexeme = view.name_of(child.referent)
        node.children.append(child)
        _load_children(view, child)


# ── deletion ──────────────────────────────────────────────────────────────────

def _no_alloc() -> int:
    raise AssertionError("deletion never allocates symbols")


def delete_into(b: DeltaBuilder, u_sym: int) -> None:
    """Stage the removal of a stored utterance into an open builder: its
    tree, its facts unless asserted elsewhere, and the symbols it created
    that nothing else uses. Reads go through the builder, so several
    deletions (or a deletion plus new utterances) can share one delta."""
    utt = load_utterance(b, u_sym)
    root = utt.root

    if utt.category == syn.SENTENCE:
        subject, vp = root.children
        verb = next((c for c in vp.children if c.category == syn.V), None)
        if verb is not None:
            vname = b.name_of(verb.referent) or "" if b.live(verb.referent) else ""
            if vname.lower() == STRUCTURAL_VERB_CONTAINS:
                parent_ref = head_referent(subject)
                child_ref = head_referent(vp.children[-1])
                if parent_ref is not None and child_ref is not None \
                        and b.live(parent_ref) and b.live(child_ref):
                    remove_member(b, parent_ref, child_ref)
    elif utt.category == syn.GRAMMAR:
        cat_ref = root.children[0].referent
        for item in root.children[1:]:
            r = item.referent
            if r is None or not b.live(r) or not b.live(cat_ref):
                continue
            # an utterance root's classification under its own category
            # anchor belongs to its storage, not to this grammar fact
            if utterance_category(b, r) == b.name_of(cat_ref):
                continue
            if not _asserted_elsewhere(b, u_sym, r, cat_ref):
                b.disconnect(r, cat_ref, C)

    # unhook from the book chain before the root vanishes
    for p in b.neighbors(u_sym, S, IN):
        if _is_book(b, p):
            remove_member(b, p, u_sym)

    provenance = b.neighbors(u_sym, A, OUT)
    for node in root.walk():
        if node.symbol is not None and b.live(node.symbol):
            b.remove_symbol_and_pairs(node.symbol)

    for r in sorted(provenance):
        if not b.live(r):
            continue
        referenced = (
            any(b.neighbors(r, k, IN) for k in RelationKind)
            or b.neighbors(r, A, OUT)
            or b.neighbors(r, S, OUT)
        )  # the symbol's own classification does not keep it alive
        if not referenced:
            b.remove_symbol_and_pairs(r)


def delete_utterance(u_sym: int, v) -> "NetDelta":
    """The delta that removes one stored utterance from a version."""
    b = DeltaBuilder(v, _no_alloc)
    delete_into(b, u_sym)
    return b.build()


def utterance_of(view, sym: int) -> Optional[int]:
    """The stored utterance a tree node belongs to, None for other symbols.
    Climbs incoming Sequence pairs; a sibling edge detours through the
    sibling, whose own parent chain reaches the same root."""
    cur = sym
    seen: set[int] = set()
    while cur is not None and cur not in seen:
        seen.add(cur)
        if is_utterance(view, cur):
            return cur
        if node_category(view, cur) is None:
            return None
        parents = sorted(p for p in view.neighbors(cur, S, IN)
                         if node_category(view, p) is not None
                         or is_utterance(view, p))
        cur = parents[0] if parents else None
    return None


def _is_book(view, sym: int) -> bool:
    for cls in view.neighbors(sym, C, OUT):
        if (view.name_of(cls) or "").lower() == "book":
            return True
    return False


def _asserted_elsewhere(v, u_sym: int, item: int, cat: int) -> bool:
    for anchor in v.named(syn.GRAMMAR):
        for u2 in v.neighbors(anchor, C, IN):
            if u2 == u_sym:
                continue
            try:
                other = load_utterance(v, u2)
            except NotAnUtterance:
                continue
            if other.category != syn.GRAMMAR or not other.root.children:
                continue
            if other.root.children[0].referent != cat:
                continue
            if any(c.referent == item for c in other.root.children[1:]):
                return True
    return False
