"""Phrasing: stored knowledge back to canonical text.

The canonical form uses the stored names of referents (so a plural noun
phrases as its singular), single spaces, ", " in lists, braces around every
set operand, and no trailing period. parse(phrase(u)) stores a tree
isomorphic to u's, and phrase is idempotent over that round trip.
"""

from __future__ import annotations

import re

from ..errors import NotAnUtterance
from . import syntax as syn
from .storage import load_utterance
from .syntax import SyntaxNode, Utterance


# names that read back as one word or number token; anything else re-quotes
_BARE = re.compile(r"(?:[A-Za-z_][A-Za-z0-9_]*|[0-9]+(?:\.[0-9]+)?)\Z")


def phrase(u_sym: int, v) -> str:
    return phrase_utterance(load_utterance(v, u_sym), v)


def phrase_utterance(utt: Utterance, v) -> str:
    r = _Renderer(v)
    root = utt.root
    if utt.category == syn.PROCEDURE:
        return r.procedure(root, utt.label)
    body = r.render(root)
    if utt.label is not None and utt.category in (syn.SENTENCE, syn.EXPRESSION):
        return f"'{utt.label}' {body}"
    return body


class _Renderer:
    def __init__(self, v):
        self.v = v

    def name(self, sym) -> str:
        if sym is not None and self.v.live(sym):
            n = self.v.name_of(sym)
            if n is not None:
                return n if _BARE.match(n) else f"'{n}'"
        return f"#{sym}"

    def render(self, n: SyntaxNode) -> str:
        return getattr(self, "_" + n.category.replace("-", "_"))(n)

    # leaves

    def _leaf(self, n: SyntaxNode) -> str:
        return self.name(n.referent)

    _subj = _v = _vq = _adj = _prep = _number = _variable = _operator = _leaf
    _QP = _leaf

    # phrases

    def _G(self, n: SyntaxNode) -> str:
        cat = self.name(n.children[0].referent)
        items = ", ".join(self.name(c.referent) for c in n.children[1:])
        return f"{cat} {items}"

    def _S(self, n: SyntaxNode) -> str:
        return " ".join(self.render(c) for c in n.children)

    def _NP(self, n: SyntaxNode) -> str:
        return " ".join(self.render(c) for c in n.children)

    def _AP(self, n: SyntaxNode) -> str:
        return " ".join(self.render(c) for c in n.children)

    def _DEFP(self, n: SyntaxNode) -> str:
        return "Default: {" + self.render(n.children[0]) + "}"

    def _DP(self, n: SyntaxNode) -> str:
        return self.render(n.children[0]) + " Of " + self.render(n.children[1])

    def _PP(self, n: SyntaxNode) -> str:
        return " ".join(self.render(c) for c in n.children)

    def _PNP(self, n: SyntaxNode) -> str:
        cls, inst = n.children
        return f"{self.name(cls.referent)}: {self.name(inst.referent)}"

    def _VP(self, n: SyntaxNode) -> str:
        return " ".join(self.render(c) for c in n.children)

    def _EXP(self, n: SyntaxNode) -> str:
        cats = [c.category for c in n.children]
        if cats[0] == syn.VARIABLE:
            return self.render(n.children[0]) + " = " + self.render(n.children[1])
        if cats[0] == syn.OPERATOR:
            return self.render(n.children[0]) + " " + self.render(n.children[1])
        return self.render(n.children[0])

    def _EP(self, n: SyntaxNode) -> str:
        bits = []
        for c in n.children:
            if c.category in (syn.NP, syn.PNP, syn.DP):
                bits.append("{" + self.render(c) + "}")
            else:
                bits.append(self.render(c))
        return " ".join(bits)

    def _IL(self, n: SyntaxNode) -> str:
        return " ".join(self.render(c) + ";" for c in n.children)

    def _procedure_call(self, n: SyntaxNode) -> str:
        args = ", ".join(self.render(c) for c in n.children)
        return f"'{self.name(n.referent)}'({args})"

    def procedure(self, root: SyntaxNode, label) -> str:
        params = [c for c in root.children if c.category == syn.VARIABLE]
        il = root.children[-1]
        head = f"'{label}'(" + ", ".join(self.render(p) for p in params) + ")"
        body = self.render(il)
        return f"{head} {{{body}}}" if body else f"{head} {{}}"
