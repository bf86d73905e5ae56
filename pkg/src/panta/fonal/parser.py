"""Recursive-descent parser: tokens to an utterance tree plus its store delta.

Dispatch between the four utterance categories is deterministic:
  - a quoted name followed by "(" opens a procedure
  - a leading "{" or number opens an expression, as does word "=" ...
  - a word utterance containing a verb (or verb qualifier) is a sentence
  - a word followed by a comma-separated name list and "." is a grammar
    utterance, unless the word is structural (quantor, preposition, ...)

Resolution runs against the builder overlay, so an utterance sees symbols
created earlier in the same source text.
"""

from __future__ import annotations

from typing import Optional

from ..errors import SyntaxError_, UnknownWord
from ..store import DeltaBuilder, NetDelta, RelationKind, apply_delta
from . import syntax as syn
from .grammar import Lexicon, NUMBER_CLASS, VARIABLE_CLASS, recognize
from .storage import ensure_anchor, store_utterance
from .syntax import SyntaxNode, Utterance
from .tokens import Token, TokenKind, tokenize

K = TokenKind
C = RelationKind.CLASSIFICATION

_STRUCTURAL = ("quantor", "vq", "preposition", "set_operator", "marker")


class Parser:
    def __init__(self, tokens: list[Token], builder: DeltaBuilder):
        self.tokens = tokens
        self.b = builder
        self.lex = Lexicon(builder)
        self.pos = 0
        self.created: list[int] = []
        self._proc_label: Optional[str] = None  # set while a body parses

    # ── token plumbing ───────────────────────────────────────────────────────

    def peek(self, k: int = 0) -> Optional[Token]:
        i = self.pos + k
        return self.tokens[i] if i < len(self.tokens) else None

    def advance(self) -> Token:
        t = self.peek()
        if t is None:
            self.fail("unexpected end of utterance")
        self.pos += 1
        return t

    def expect(self, kind: K, what: str) -> Token:
        t = self.peek()
        if t is None or t.kind is not kind:
            self.fail(f"expected {what}", expected=(what,))
        return self.advance()

    def fail(self, message: str, expected: tuple = ()) -> None:
        t = self.peek()
        offset = t.offset if t is not None else (
            self.tokens[-1].offset + len(self.tokens[-1].raw) if self.tokens else 0)
        raise SyntaxError_(message, offset, expected)

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def _word(self, k: int = 0) -> Optional[str]:
        t = self.peek(k)
        return t.text if t is not None and t.kind is K.WORD else None

    # ── referent creation ────────────────────────────────────────────────────

    def _class_symbol(self, class_name: str) -> int:
        return ensure_anchor(self.b, class_name)

    def _get_or_create(self, name: str, class_name: str,
                       case_sensitive: bool = False) -> int:
        cls = self._class_symbol(class_name)
        hits = recognize(name, self.b, cls, case_sensitive)
        if hits:
            return min(hits)
        sym = self.b.create_symbol(name)
        self.b.connect(sym, cls, C)
        self.created.append(sym)
        return sym

    def number_symbol(self, text: str) -> int:
        return self._get_or_create(text, NUMBER_CLASS)

    def variable_symbol(self, word: str) -> int:
        return self._get_or_create(word, VARIABLE_CLASS)

    # ── dispatch ─────────────────────────────────────────────────────────────

    def parse_utterance(self) -> Utterance:
        if not self.tokens:
            self.fail("empty utterance")
        t0 = self.peek()
        start = t0.offset
        if t0.kind is K.PROPER_NAME:
            nxt = self.peek(1)
            if nxt is not None and nxt.kind is K.OPEN_PAREN:
                utt = self.parse_procedure()
            else:
                label = self.advance().text
                if self._expression_follows():
                    utt = self.parse_expression(label=label)
                else:
                    utt = self.parse_sentence(label=label)
        elif t0.kind in (K.OPEN_BRACE, K.NUMBER):
            utt = self.parse_expression()
        elif t0.kind is K.WORD:
            nxt = self.peek(1)
            if nxt is not None and nxt.kind is K.OPERATOR:
                utt = self.parse_expression()
            elif self._grammar_shape():
                # checked before the verb scan: a grammar-shaped utterance
                # (word, name list, period) is never a well-formed sentence,
                # but its names may well resolve as verbs ("Verb Has.")
                utt = self.parse_grammar()
            elif self._verb_ahead():
                utt = self.parse_sentence()
            else:
                utt = self.parse_sentence()
        else:
            self.fail("expected an utterance",
                      expected=syn.UTTERANCE_CATEGORIES)
        if not self.at_end() and self.peek().kind is K.PERIOD:
            self.advance()
        if not self.at_end():
            self.fail("expected end of utterance")
        last = self.tokens[self.pos - 1]
        utt.source_span = (start, last.offset + len(last.raw))
        return utt

    def _expression_follows(self) -> bool:
        t = self.peek()
        if t is None:
            return False
        if t.kind in (K.OPEN_BRACE, K.NUMBER):
            return True
        nxt = self.peek(1)
        return (t.kind is K.WORD and nxt is not None
                and nxt.kind is K.OPERATOR)

    def _verb_ahead(self) -> bool:
        depth = 0
        for t in self.tokens[self.pos:]:
            if t.kind in (K.OPEN_BRACE, K.OPEN_PAREN):
                depth += 1
            elif t.kind in (K.CLOSE_BRACE, K.CLOSE_PAREN):
                depth -= 1
            elif depth == 0 and t.kind is K.WORD:
                if self.lex.verb(t.text) is not None \
                        or self.lex.vq(t.text) is not None:
                    return True
        return False

    def _grammar_shape(self) -> bool:
        word = self._word()
        if word is None or self._is_structural(word):
            return False
        i = self.pos + 1
        t = self.tokens[i] if i < len(self.tokens) else None
        if t is None or t.kind not in (K.WORD, K.PROPER_NAME):
            return False
        i += 1
        while i < len(self.tokens) and self.tokens[i].kind is K.COMMA:
            i += 1
            if i >= len(self.tokens) \
                    or self.tokens[i].kind not in (K.WORD, K.PROPER_NAME):
                return False
            i += 1
        return i >= len(self.tokens) or self.tokens[i].kind is K.PERIOD

    def _is_structural(self, word: str) -> bool:
        return any(getattr(self.lex, probe)(word) is not None
                   for probe in _STRUCTURAL)

    # ── grammar utterances ───────────────────────────────────────────────────

    def parse_grammar(self) -> Utterance:
        cat_tok = self.expect(K.WORD, "a category word")
        hits = recognize(cat_tok.text, self.b)
        if hits:
            cat_sym = min(hits)
        else:
            cat_sym = self.b.create_symbol(cat_tok.text)
            self.created.append(cat_sym)
        children = [SyntaxNode(syn.SUBJ, lexeme=cat_tok.text, referent=cat_sym)]
        while True:
            t = self.peek()
            if t is None or t.kind not in (K.WORD, K.PROPER_NAME):
                self.fail("expected a name to classify")
            self.advance()
            cs = t.kind is K.PROPER_NAME
            in_cat = recognize(t.text, self.b, cat_sym, cs)
            if in_cat:
                sym = min(in_cat)
            else:
                anywhere = recognize(t.text, self.b, None, cs)
                if anywhere:
                    sym = min(anywhere)
                else:
                    sym = self.b.create_symbol(t.text)
                    self.created.append(sym)
            children.append(SyntaxNode(syn.SUBJ, lexeme=t.text, referent=sym))
            if self.peek() is not None and self.peek().kind is K.COMMA:
                self.advance()
                continue
            break
        root = SyntaxNode(syn.G, children)
        return Utterance(syn.GRAMMAR, root)

    # ── sentences ────────────────────────────────────────────────────────────

    def parse_sentence(self, label: Optional[str] = None) -> Utterance:
        subject = self.parse_np(allow_create=False)
        vp = self.parse_vp()
        root = SyntaxNode(syn.S, [subject, vp])
        return Utterance(syn.SENTENCE, root, label=label)

    def parse_vp(self) -> SyntaxNode:
        children = []
        word = self._word()
        if word is not None:
            vq = self.lex.vq(word)
            if vq is not None:
                self.advance()
                children.append(SyntaxNode(syn.VQ, lexeme=word, referent=vq))
                word = self._word()
        if word is None:
            self.fail("expected a verb", expected=("VP",))
        verb = self.lex.verb(word)
        if verb is None:
            raise UnknownWord(word, self.peek().offset)
        self.advance()
        children.append(SyntaxNode(syn.V, lexeme=word, referent=verb))
        children.append(self.parse_np(allow_create=True))
        return SyntaxNode(syn.VP, children)

    # ── noun phrases ─────────────────────────────────────────────────────────

    def parse_np(self, allow_create: bool) -> SyntaxNode:
        t = self.peek()
        if t is None:
            self.fail("expected a noun phrase", expected=("NP",))
        if t.kind is K.OPEN_BRACE:
            self.advance()
            inner = self.parse_np(allow_create)
            self.expect(K.CLOSE_BRACE, "'}'")
            return inner
        if t.kind is K.WORD and self._colon_follows() \
                and self.lex.marker_named(t.text, "default") is None:
            return self.parse_pnp(allow_create)

        qp = self._parse_qp()
        if qp is not None:
            of_word = self._word()
            if of_word is not None:
                prep = self.lex.preposition(of_word)
                if prep is not None \
                        and (self.b.name_of(prep) or "").lower() == "of":
                    self.advance()
                    inner = self.parse_np(allow_create=False)
                    return SyntaxNode(syn.DP, [qp, inner])

        ap = self._parse_ap()
        defp = self._parse_defp()
        noun = self._parse_noun(required=qp is None and ap is None
                                and defp is None)
        children = [n for n in (qp, ap, defp) if n is not None]
        children.append(noun)
        pp = self._parse_pp()
        if pp is not None:
            children.append(pp)
        return SyntaxNode(syn.NP, children)

    def _colon_follows(self) -> bool:
        nxt = self.peek(1)
        return nxt is not None and nxt.kind is K.COLON

    def _parse_qp(self) -> Optional[SyntaxNode]:
        t = self.peek()
        if t is None:
            return None
        if t.kind is K.NUMBER:
            self.advance()
            return SyntaxNode(syn.QP, lexeme=t.text,
                              referent=self.number_symbol(t.text))
        if t.kind is K.WORD:
            q = self.lex.quantor(t.text)
            if q is not None:
                self.advance()
                return SyntaxNode(syn.QP, lexeme=t.text, referent=q)
        return None

    def _parse_ap(self) -> Optional[SyntaxNode]:
        children = []
        while True:
            word = self._word()
            if word is None:
                break
            nxt = self.peek(1)
            if nxt is None or nxt.kind not in (K.WORD, K.PROPER_NAME):
                break
            adj = self.lex.adjective(word)
            if adj is not None:
                self.advance()
                children.append(SyntaxNode(syn.ADJ, lexeme=word, referent=adj))
                continue
            marker = self.lex.marker_named(word, "and")
            if marker is not None and children \
                    and self._word(1) is not None \
                    and self.lex.adjective(self._word(1)) is not None:
                self.advance()
                children.append(SyntaxNode(syn.OPERATOR, lexeme=word,
                                           referent=marker))
                continue
            break
        return SyntaxNode(syn.AP, children) if children else None

    def _parse_defp(self) -> Optional[SyntaxNode]:
        word = self._word()
        if word is None or not self._colon_follows():
            return None
        marker = self.lex.marker_named(word, "default")
        if marker is None:
            return None
        self.advance()
        self.advance()  # the colon
        self.expect(K.OPEN_BRACE, "'{'")
        inner = self.parse_np(allow_create=False)
        self.expect(K.CLOSE_BRACE, "'}'")
        return SyntaxNode(syn.DEFP, [inner])

    def _parse_noun(self, required: bool = True) -> SyntaxNode:
        t = self.peek()
        if t is not None and t.kind is K.WORD:
            sym = self.lex.noun(t.text)
            if sym is None:
                raise UnknownWord(t.text, t.offset)
            self.advance()
            return SyntaxNode(syn.SUBJ, lexeme=t.text, referent=sym)
        if t is not None and t.kind is K.PROPER_NAME:
            sym = self.lex.proper(t.text)
            if sym is None:
                raise UnknownWord(t.text, t.offset)
            self.advance()
            return SyntaxNode(syn.SUBJ, lexeme=t.text, referent=sym)
        self.fail("expected a noun", expected=("NP",))

    def _parse_pp(self) -> Optional[SyntaxNode]:
        word = self._word()
        if word is None:
            return None
        prep = self.lex.preposition(word)
        if prep is None:
            return None
        self.advance()
        obj = self.parse_np(allow_create=False)
        return SyntaxNode(syn.PP,
                          [SyntaxNode(syn.PREP, lexeme=word, referent=prep),
                           obj])

    def parse_pnp(self, allow_create: bool) -> SyntaxNode:
        class_tok = self.expect(K.WORD, "a class word")
        class_sym = self.lex.noun(class_tok.text)
        if class_sym is None:
            raise UnknownWord(class_tok.text, class_tok.offset)
        self.expect(K.COLON, "':'")
        t = self.peek()
        if t is None or t.kind not in (K.WORD, K.PROPER_NAME, K.NUMBER):
            self.fail("expected an instance name", expected=("PNP",))
        self.advance()
        cs = t.kind is K.PROPER_NAME
        hits = recognize(t.text, self.b, class_sym, cs)
        if hits:
            sym = min(hits)
        elif allow_create:
            sym = self.b.create_symbol(t.text)
            self.b.connect(sym, class_sym, C)
            self.created.append(sym)
        else:
            raise UnknownWord(t.text, t.offset)
        return SyntaxNode(syn.PNP, [
            SyntaxNode(syn.SUBJ, lexeme=class_tok.text, referent=class_sym),
            SyntaxNode(syn.SUBJ, lexeme=t.text, referent=sym),
        ])

    # ── expressions ──────────────────────────────────────────────────────────

    def parse_expression(self, label: Optional[str] = None) -> Utterance:
        root = self._parse_exp()
        return Utterance(syn.EXPRESSION, root, label=label)

    def _parse_exp(self) -> SyntaxNode:
        t = self.peek()
        if t is not None and t.kind is K.WORD:
            nxt = self.peek(1)
            if nxt is not None and nxt.kind is K.OPERATOR:
                var = self.variable_symbol(t.text)
                self.advance()
                self.advance()
                return SyntaxNode(syn.EXP, [
                    SyntaxNode(syn.VARIABLE, lexeme=t.text, referent=var),
                    self.parse_ep(),
                ])
        return SyntaxNode(syn.EXP, [self.parse_ep()])

    def parse_ep(self) -> SyntaxNode:
        children = [self._parse_operand()]
        while True:
            word = self._word()
            if word is None:
                break
            op = self.lex.set_operator(word)
            if op is None:
                break
            self.advance()
            children.append(SyntaxNode(syn.OPERATOR, lexeme=word, referent=op))
            children.append(self._parse_operand())
        return SyntaxNode(syn.EP, children)

    def _parse_operand(self) -> SyntaxNode:
        t = self.peek()
        if t is None:
            self.fail("expected an operand", expected=("EP",))
        if t.kind is K.OPEN_BRACE:
            self.advance()
            inner = self.parse_np(allow_create=False)
            self.expect(K.CLOSE_BRACE, "'}'")
            return inner
        if t.kind is K.NUMBER:
            nxt_word = self._word(1)
            if nxt_word is not None:
                prep = self.lex.preposition(nxt_word)
                if prep is not None \
                        and (self.b.name_of(prep) or "").lower() == "of":
                    return self.parse_np(allow_create=False)  # "1 Of The X"
            self.advance()
            return SyntaxNode(syn.NUMBER, lexeme=t.text,
                              referent=self.number_symbol(t.text))
        nxt = self.peek(1)
        if nxt is not None and nxt.kind is K.OPEN_PAREN \
                and t.kind in (K.PROPER_NAME, K.WORD):
            return self.parse_call()
        if t.kind is K.WORD and self._colon_follows():
            return self.parse_pnp(allow_create=False)
        if t.kind is K.WORD:
            self.advance()
            return SyntaxNode(syn.VARIABLE, lexeme=t.text,
                              referent=self.variable_symbol(t.text))
        self.fail("expected an operand", expected=("EP",))

    # ── procedures ───────────────────────────────────────────────────────────

    def parse_call(self) -> SyntaxNode:
        t = self.advance()
        proc_anchor = ensure_anchor(self.b, syn.PROCEDURE)
        hits = recognize(t.text, self.b, proc_anchor,
                         case_sensitive=t.kind is K.PROPER_NAME)
        if hits:
            referent = min(hits)
        elif self._proc_label is not None and t.text == self._proc_label:
            referent = syn.SELF_REFERENT  # recursion: the callee is being parsed
        else:
            raise UnknownWord(t.text, t.offset)
        node = SyntaxNode(syn.CALL, lexeme=t.text, referent=referent)
        self.expect(K.OPEN_PAREN, "'('")
        if self.peek() is not None and self.peek().kind is not K.CLOSE_PAREN:
            while True:
                node.children.append(self.parse_ep())
                if self.peek() is not None and self.peek().kind is K.COMMA:
                    self.advance()
                    continue
                break
        self.expect(K.CLOSE_PAREN, "')'")
        return node

    def parse_procedure(self) -> Utterance:
        name = self.expect(K.PROPER_NAME, "a procedure name")
        self._proc_label = name.text
        self.expect(K.OPEN_PAREN, "'('")
        params = []
        if self.peek() is not None and self.peek().kind is K.WORD:
            while True:
                p = self.expect(K.WORD, "a parameter")
                params.append(SyntaxNode(syn.VARIABLE, lexeme=p.text,
                                         referent=self.variable_symbol(p.text)))
                if self.peek() is not None and self.peek().kind is K.COMMA:
                    self.advance()
                    continue
                break
        self.expect(K.CLOSE_PAREN, "')'")
        self.expect(K.OPEN_BRACE, "'{'")
        il = SyntaxNode(syn.IL)
        while self.peek() is not None and self.peek().kind is not K.CLOSE_BRACE:
            il.children.append(self._parse_instruction())
            self.expect(K.SEMICOLON, "';'")
        self.expect(K.CLOSE_BRACE, "'}'")
        self._proc_label = None
        root = SyntaxNode(syn.P, params + [il])
        return Utterance(syn.PROCEDURE, root, label=name.text)

    def _parse_instruction(self) -> SyntaxNode:
        t = self.peek()
        if t is not None and t.kind is K.WORD:
            ret = self.lex.marker_named(t.text, "return")
            if ret is not None:
                self.advance()
                return SyntaxNode(syn.EXP, [
                    SyntaxNode(syn.OPERATOR, lexeme=t.text, referent=ret),
                    self.parse_ep(),
                ])
        nxt = self.peek(1)
        if t is not None and t.kind in (K.PROPER_NAME, K.WORD) \
                and nxt is not None and nxt.kind is K.OPEN_PAREN:
            return self.parse_call()
        return self._parse_exp()


# ── public entry points ───────────────────────────────────────────────────────

def parse_into(tokens: list[Token], builder: DeltaBuilder) -> Utterance:
    """Parse one utterance and stage its storage into the builder."""
    p = Parser(tokens, builder)
    utt = p.parse_utterance()
    syn.validate_tree(utt.root)
    store_utterance(builder, utt, tuple(p.created))
    return utt


def parse(tokens: list[Token], image, base=None) -> tuple[Utterance, NetDelta]:
    builder = image.begin(base)
    utt = parse_into(tokens, builder)
    return utt, builder.build()


def split_utterances(tokens: list[Token]) -> list[list[Token]]:
    """Split a token stream at top-level "." and at line breaks outside
    braces and parentheses."""
    groups: list[list[Token]] = []
    cur: list[Token] = []
    depth = 0
    for i, t in enumerate(tokens):
        cur.append(t)
        if t.kind in (K.OPEN_BRACE, K.OPEN_PAREN):
            depth += 1
        elif t.kind in (K.CLOSE_BRACE, K.CLOSE_PAREN):
            depth = max(0, depth - 1)
        if depth == 0:
            nxt = tokens[i + 1] if i + 1 < len(tokens) else None
            if t.kind is K.PERIOD or nxt is None or "\n" in nxt.ws:
                groups.append(cur)
                cur = []
    if cur:
        groups.append(cur)
    return groups


def parse_source(text: str, image, base=None) -> list[tuple[Utterance, NetDelta]]:
    """Parse a whole source text; all utterances parse or none are returned."""
    v = base if base is not None else image.snapshot()
    out: list[tuple[Utterance, NetDelta]] = []
    for group in split_utterances(tokenize(text)):
        builder = image.begin(v)
        utt = parse_into(group, builder)
        delta = builder.build()
        out.append((utt, delta))
        v = apply_delta(v, delta)
    return out
