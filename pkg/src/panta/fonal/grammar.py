"""Word recognition against the image.

The parser owns no keyword table. Every word class (quantors, verbs,
prepositions, operators, markers, ...) is the set of symbols classified,
directly or transitively, under a class symbol of that name. Teaching the
language a new verb is a Grammar utterance, not a code change.
"""

from __future__ import annotations

from typing import Optional

from ..store import RelationKind

C = RelationKind.CLASSIFICATION

# class symbols the recognizer consults, all seeded by the grammar book
QUANTOR_CLASS = "Quantor"
VQ_CLASS = "Vq"
VERB_CLASS = "Verb"
ADJECTIVE_CLASS = "Adjective"
PREPOSITION_CLASS = "Preposition"
OPERATOR_CLASS = "Operator"
MARKER_CLASS = "Marker"
NUMBER_CLASS = "Number"
VARIABLE_CLASS = "Variable"


def recognize(word: str, view, class_hint: Optional[int] = None,
              case_sensitive: bool = False) -> frozenset[int]:
    """Symbols addressed by a word: name matches (case-insensitively unless
    told otherwise), optionally narrowed to a class and its subclasses."""
    syms = view.named(word)
    if case_sensitive:
        syms = frozenset(s for s in syms if view.name_of(s) == word)
    if class_hint is not None:
        allowed = set(view.transitive_in(class_hint, C))
        allowed.add(class_hint)
        syms = frozenset(s for s in syms if s in allowed)
    return syms


class Lexicon:
    """Word-class queries over one view (an ImageVersion or a DeltaBuilder)."""

    def __init__(self, view):
        self.view = view

    def _class_members(self, class_name: str) -> frozenset[int]:
        members: set[int] = set()
        for root in self.view.named(class_name):
            members |= self.view.transitive_in(root, C)
        return frozenset(members)

    def _in_class(self, word: str, class_name: str) -> Optional[int]:
        hits = self.view.named(word) & self._class_members(class_name)
        return min(hits) if hits else None

    def quantor(self, word: str) -> Optional[int]:
        return self._in_class(word, QUANTOR_CLASS)

    def vq(self, word: str) -> Optional[int]:
        return self._in_class(word, VQ_CLASS)

    def verb(self, word: str) -> Optional[int]:
        return self._in_class(word, VERB_CLASS)

    def adjective(self, word: str) -> Optional[int]:
        return self._in_class(word, ADJECTIVE_CLASS)

    def preposition(self, word: str) -> Optional[int]:
        return self._in_class(word, PREPOSITION_CLASS)

    def set_operator(self, word: str) -> Optional[int]:
        return self._in_class(word, OPERATOR_CLASS)

    def marker(self, word: str) -> Optional[int]:
        return self._in_class(word, MARKER_CLASS)

    def marker_named(self, word: str, canonical: str) -> Optional[int]:
        """The marker symbol for `word` if its stored name is `canonical`."""
        m = self.marker(word)
        if m is not None and (self.view.name_of(m) or "").lower() == canonical.lower():
            return m
        return None

    def noun(self, word: str) -> Optional[int]:
        """Resolve a noun: exact name first, then the bare singular of a
        trailing-s plural. Ambiguity resolves to the lowest id."""
        hits = self.view.named(word)
        if not hits and len(word) > 1 and word.lower().endswith("s"):
            hits = self.view.named(word[:-1])
        return min(hits) if hits else None

    def proper(self, name: str, class_hint: Optional[int] = None) -> Optional[int]:
        hits = recognize(name, self.view, class_hint, case_sensitive=True)
        return min(hits) if hits else None
