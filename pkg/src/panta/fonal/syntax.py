"""Syntax trees: node categories, arity rules and the structural validator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

# utterance categories
GRAMMAR = "Grammar"
SENTENCE = "Sentence"
PROCEDURE = "Procedure"
EXPRESSION = "Expression"
UTTERANCE_CATEGORIES = (GRAMMAR, SENTENCE, PROCEDURE, EXPRESSION)

# phrase-level node categories
G = "G"
S = "S"
P = "P"
NP = "NP"
VP = "VP"
AP = "AP"
DEFP = "DEFP"
DP = "DP"
PP = "PP"
QP = "QP"
PNP = "PNP"
EXP = "EXP"
EP = "EP"
IL = "IL"
CALL = "procedure-call"

# leaf categories (word occurrences carrying a referent)
SUBJ = "subj"
V = "v"
VQ = "vq"
ADJ = "adj"
PREP = "prep"
NUMBER = "number"
VARIABLE = "variable"
OPERATOR = "operator"

LEAF_CATEGORIES = frozenset({SUBJ, V, VQ, ADJ, PREP, NUMBER, VARIABLE, OPERATOR})
PHRASE_CATEGORIES = frozenset({G, S, P, NP, VP, AP, DEFP, DP, PP, QP, PNP,
                               EXP, EP, IL, CALL})

ROOT_OF = {GRAMMAR: G, SENTENCE: S, PROCEDURE: P, EXPRESSION: EXP}
CATEGORY_OF_ROOT = {v: k for k, v in ROOT_OF.items()}

# referent placeholder for a procedure calling itself; the store rewrites it
# to the utterance's own root symbol
SELF_REFERENT = -1


@dataclass
class SyntaxNode:
    category: str
    children: list["SyntaxNode"] = field(default_factory=list)
    lexeme: Optional[str] = None
    referent: Optional[int] = None
    symbol: Optional[int] = None  # assigned when the tree is stored

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def __repr__(self):
        bits = [self.category]
        if self.lexeme is not None:
            bits.append(repr(self.lexeme))
        if self.referent is not None:
            bits.append(f"#{self.referent}")
        head = " ".join(bits)
        if self.children:
            return f"({head} {' '.join(repr(c) for c in self.children)})"
        return f"({head})"


@dataclass
class Utterance:
    category: str
    root: SyntaxNode
    source_span: tuple[int, int] = (0, 0)
    symbol: Optional[int] = None
    label: Optional[str] = None  # quoted proper name, if the utterance has one


class TreeShapeError(ValueError):
    pass


def _expect(cond: bool, node: SyntaxNode, msg: str) -> None:
    if not cond:
        raise TreeShapeError(f"{node.category}: {msg} in {node!r}")


def _cats(node: SyntaxNode) -> list[str]:
    return [c.category for c in node.children]


def validate_tree(root: SyntaxNode) -> None:
    """Raise TreeShapeError unless the tree obeys the category/arity rules.

    Accepts exactly what the parser can produce; used as the structural
    oracle in tests.
    """
    for node in root.walk():
        cats = _cats(node)
        if node.category in LEAF_CATEGORIES:
            _expect(not node.children, node, "leaves have no children")
            _expect(node.referent is not None, node, "leaf needs a referent")
            continue
        if node.category == G:
            _expect(len(cats) >= 2 and set(cats) == {SUBJ}, node,
                    "G is a category item followed by one or more items")
        elif node.category == S:
            _expect(len(cats) == 2 and cats[0] in (NP, PNP, DP)
                    and cats[1] == VP, node, "S is subject followed by VP")
        elif node.category == P:
            _expect(cats[-1:] == [IL] and set(cats[:-1]) <= {VARIABLE}, node,
                    "P is parameters followed by IL")
        elif node.category == NP:
            rest = list(cats)
            for opt in (QP, AP, DEFP):
                if rest and rest[0] == opt:
                    rest.pop(0)
            _expect(bool(rest) and rest[0] == SUBJ, node,
                    "NP needs a head noun after QP/AP/DEFP")
            rest.pop(0)
            _expect(rest in ([], [PP]), node, "only a PP may follow the noun")
        elif node.category == AP:
            _expect(len(cats) >= 1 and set(cats) <= {ADJ, OPERATOR}, node,
                    "AP is adjectives, optionally joined by And")
            _expect(cats[0] == ADJ and cats[-1] == ADJ, node,
                    "AP starts and ends with an adjective")
        elif node.category == DEFP:
            _expect(cats in ([NP], [PNP], [DP]), node,
                    "DEFP wraps one noun phrase")
        elif node.category == DP:
            _expect(len(cats) == 2 and cats[0] == QP
                    and cats[1] in (NP, PNP, DP), node,
                    "DP is a quantifier over a noun phrase")
        elif node.category == PP:
            _expect(len(cats) == 2 and cats[0] == PREP
                    and cats[1] in (NP, PNP, DP), node,
                    "PP is a preposition and a noun phrase")
        elif node.category == QP:
            _expect(not cats, node, "QP is a single quantifier or number")
            _expect(node.referent is not None, node, "QP needs a referent")
        elif node.category == PNP:
            _expect(cats == [SUBJ, SUBJ], node, "PNP is class and instance")
        elif node.category == VP:
            _expect(cats in ([V, NP], [V, PNP], [V, DP],
                             [VQ, V, NP], [VQ, V, PNP], [VQ, V, DP]), node,
                    "VP is optional vq, verb, object")
        elif node.category == EXP:
            ok = (cats in ([EP], [VARIABLE, EP], [OPERATOR, EP]))
            _expect(ok, node, "EXP is an EP, an assignment, or Return EP")
        elif node.category == EP:
            _expect(len(cats) % 2 == 1, node, "EP alternates operands and operators")
            for i, c in enumerate(cats):
                if i % 2 == 0:
                    _expect(c in (NP, PNP, DP, NUMBER, VARIABLE, CALL),
                            node, "even positions are operands")
                else:
                    _expect(c == OPERATOR, node, "odd positions are operators")
        elif node.category == IL:
            _expect(set(cats) <= {EXP, CALL, IL}, node,
                    "IL holds instructions")
        elif node.category == CALL:
            _expect(set(cats) <= {EP}, node, "call arguments are EPs")
            _expect(node.referent is not None, node,
                    "call needs a procedure referent")
        else:
            raise TreeShapeError(f"unknown category {node.category!r}")
