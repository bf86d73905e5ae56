"""Executing stored knowledge: noun-phrase queries and procedures.

Queries are pure reads of one image version. A noun names a set (the
transitive classification closure under its symbol), adjectives intersect,
prepositional phrases filter by graph navigation, and set operators combine.
Procedures run instruction lists with lexically scoped variables while
maintaining the execution path — the stack of symbols the run is currently
inside, which the commit engine inspects to decide who must crawl back.

Word meaning stays in the image: quantors, adjectives and prepositions act
by the name of the symbol the leaf refers to, so renaming "This" or "First"
changes the language, not this module.
"""

from __future__ import annotations

import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .errors import (ArityMismatch, EvalError, ExecutionError, MissingContext,
                     TypeMismatch, UnresolvedNoun, UnresolvedVariable)
from .fonal import head_referent, load_node, load_utterance
from .fonal import syntax as syn
from .fonal.storage import members
from .store import IN, OUT, ImageVersion, RelationKind

C = RelationKind.CLASSIFICATION
A = RelationKind.ATTRIBUTION
S = RelationKind.SEQUENCE

# a value is a symbol set, an integer, a text, or Nothing
Value = Union[frozenset, int, str, None]
NOTHING: Value = None

MAX_DEPTH = 256

# one language-level call spends several interpreter frames; keep the
# evaluator's depth cap reachable instead of tripping the interpreter's
sys.setrecursionlimit(max(sys.getrecursionlimit(), 20 * MAX_DEPTH + 1000))

# execution-path entry kinds, bottom to top of a typical stack
MAIN_ENTRY = "MainEntry"
CLIENT = "Client"
FORM = "Form"
COMPONENT = "Component"
EVENT = "Event"
PROCEDURE = "Procedure"
INSTRUCTION_LIST = "InstructionList"


@dataclass(frozen=True)
class PathEntry:
    kind: str
    symbol: Optional[int]


class ExecutionPath:
    """The stack of executables a run is inside; pushed on entry, popped on
    exit. The bottom entry is always the main entree point."""

    def __init__(self):
        self._stack: list[PathEntry] = [PathEntry(MAIN_ENTRY, None)]

    @property
    def entries(self) -> tuple[PathEntry, ...]:
        return tuple(self._stack)

    def symbols(self) -> frozenset[int]:
        return frozenset(e.symbol for e in self._stack if e.symbol is not None)

    def push(self, kind: str, symbol: Optional[int]) -> None:
        self._stack.append(PathEntry(kind, symbol))

    def pop(self) -> PathEntry:
        if len(self._stack) == 1:
            raise AssertionError("cannot pop the main entry")
        return self._stack.pop()

    def at_main(self) -> bool:
        return len(self._stack) == 1

    def reset(self) -> None:
        del self._stack[1:]

    @contextmanager
    def entered(self, kind: str, symbol: Optional[int]):
        self.push(kind, symbol)
        try:
            yield
        finally:
            self.pop()

    def __repr__(self):
        return " > ".join(
            f"{e.kind}{'' if e.symbol is None else f'#{e.symbol}'}"
            for e in self._stack)


@dataclass
class Binding:
    """Variable environment. Frames chain lexically: an inner instruction
    list shadows the outer one. The context selection travels as "this"."""

    this: Optional[int] = None
    parent: Optional["Binding"] = None
    _vars: dict = field(default_factory=dict)

    def child(self) -> "Binding":
        return Binding(this=self.this, parent=self)

    def assign(self, var_sym: int, value: Value) -> None:
        self._vars[var_sym] = value

    def lookup(self, var_sym: int) -> Value:
        frame: Optional[Binding] = self
        while frame is not None:
            if var_sym in frame._vars:
                return frame._vars[var_sym]
            frame = frame.parent
        raise UnresolvedVariable(f"variable #{var_sym} is unbound")

    def bound(self, var_sym: int) -> bool:
        frame: Optional[Binding] = self
        while frame is not None:
            if var_sym in frame._vars:
                return True
            frame = frame.parent
        return False


class _Return(Exception):
    def __init__(self, value: Value):
        self.value = value


class Evaluator:
    """One evaluation context: an image version, a binding, a path.

    `yield_hook` runs at every yield point (instruction boundaries and
    procedure entry); the commit engine uses it to fence evaluations over
    commits, refresh `v` to the newest version, or raise CrawlBack.
    """

    def __init__(self, v: ImageVersion, binding: Optional[Binding] = None,
                 path: Optional[ExecutionPath] = None,
                 yield_hook: Optional[Callable[["Evaluator"], None]] = None,
                 max_depth: int = MAX_DEPTH):
        self.v = v
        self.binding = binding if binding is not None else Binding()
        self.path = path if path is not None else ExecutionPath()
        self.yield_hook = yield_hook
        self.max_depth = max_depth
        self._depth = 0

    # ── plumbing ─────────────────────────────────────────────────────────────

    def _yield(self) -> None:
        if self.yield_hook is not None:
            self.yield_hook(self)

    def _name(self, sym: Optional[int]) -> str:
        if sym is None or not self.v.live(sym):
            return ""
        return (self.v.name_of(sym) or "").lower()

    def _require(self, sym: Optional[int], what: str) -> int:
        if sym is None or not self.v.live(sym):
            raise UnresolvedNoun(f"{what} names no live symbol (#{sym})")
        return sym

    # ── noun phrases ─────────────────────────────────────────────────────────

    def eval_np(self, node, binding: Optional[Binding] = None) -> frozenset:
        b = binding if binding is not None else self.binding
        if node.category == syn.PNP:
            inst = self._require(node.children[1].referent, "instance")
            return frozenset({inst})
        if node.category == syn.DP:
            qp, inner = node.children
            base = self.eval_np(inner, b)
            n = self._count_of(qp)
            if n is None:
                return base
            return frozenset(sorted(base)[:max(0, n)])
        if node.category != syn.NP:
            raise EvalError(f"not a noun phrase: {node.category}")

        qp = ap = defp = pp = None
        noun = None
        for c in node.children:
            if c.category == syn.QP:
                qp = c
            elif c.category == syn.AP:
                ap = c
            elif c.category == syn.DEFP:
                defp = c
            elif c.category == syn.PP:
                pp = c
            elif c.category == syn.SUBJ:
                noun = c
        base = self._noun_set(noun, qp, b)
        take_first = False
        if ap is not None:
            for adj in ap.children:
                if adj.category != syn.ADJ:
                    continue  # the joining "And" narrows nothing
                if self._name(adj.referent) == "first":
                    take_first = True
                else:
                    r = self._require(adj.referent, "adjective")
                    base &= self.v.transitive_in(r, C)
        if pp is not None:
            base = self._pp_filter(base, pp, b)
        if not base and defp is not None:
            base = self.eval_np(defp.children[0], b)
        if take_first:
            base = frozenset({min(base)}) if base else frozenset()
        n = self._count_of(qp) if qp is not None else None
        if n is not None:
            base = frozenset(sorted(base)[:max(0, n)])
        return base

    def _noun_set(self, noun, qp, b: Binding) -> frozenset:
        r = self._require(noun.referent, "noun")
        domain = self._domain(r)
        if qp is not None and self._name(qp.referent) == "this":
            if b.this is None:
                raise MissingContext("no context selection for This")
            return frozenset({b.this}) & domain
        return domain

    def _is_symbol_noun(self, r: int) -> bool:
        return self._name(r) == "symbol"

    def _domain(self, r: int) -> frozenset:
        # the universal noun ranges over every live symbol
        if self._is_symbol_noun(r):
            return self.v.symbols
        return self.v.transitive_in(r, C)

    def _count_of(self, qp) -> Optional[int]:
        """The truncation count a QP carries, None for plain quantors."""
        name = self.v.name_of(qp.referent) if qp.referent is not None else None
        if name is None:
            return None
        try:
            return int(name)
        except ValueError:
            return None

    # ── prepositional navigation ─────────────────────────────────────────────

    def _pp_filter(self, base: frozenset, pp, b: Binding) -> frozenset:
        prep, obj = pp.children
        word = self._name(prep.referent)
        targets = self.eval_np(obj, b)
        if word == "with":      # x structurally carries y (any depth)
            return frozenset(x for x in base
                             if targets & self._reach_out(x))
        if word == "of":        # x is a stored property value of y
            values = set()
            for y in targets:
                values |= self._attribute_objects(y)
            return base & values
        if word == "by":        # x directly classified under y
            hits = set()
            for y in targets:
                hits |= self.v.neighbors(y, C, IN)
            return base & hits
        if word == "in":        # x a member of y, any depth
            hits = set()
            for y in targets:
                hits |= self._member_closure(y)
            return base & hits
        if word == "from":      # x a direct member of y
            hits = set()
            for y in targets:
                hits |= members(self.v, y)
            return base & hits
        if word == "to":        # x refers to y by attribution
            return frozenset(x for x in base
                             if targets & self.v.neighbors(x, A, OUT))
        raise EvalError(f"preposition {word!r} has no navigation")

    def _reach_out(self, x: int) -> frozenset:
        """Everything x structurally carries: members plus attribute targets,
        any depth. Raw sequence edges would also walk sibling chains — and
        through them the rest of the book — so membership it is."""
        seen: set[int] = set()
        frontier = [x]
        while frontier:
            cur = frontier.pop()
            for nxt in members(self.v, cur) | self.v.neighbors(cur, A, OUT):
                if nxt != x and nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return frozenset(seen)

    def _member_closure(self, y: int) -> frozenset:
        seen: set[int] = set()
        frontier = [y]
        while frontier:
            cur = frontier.pop()
            for nxt in members(self.v, cur):
                if nxt != y and nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return frozenset(seen)

    def _attribute_objects(self, y: int) -> frozenset:
        """Head referents of the objects of y's attribute sentences."""
        out = set()
        for vp_sym in self.v.neighbors(y, A, OUT):
            vp = load_node(self.v, vp_sym)
            if vp is None or vp.category != syn.VP or not vp.children:
                continue
            obj = vp.children[-1]
            if obj.category in (syn.NP, syn.PNP, syn.DP):
                ref = head_referent(obj)
                if ref is not None and self.v.live(ref):
                    out.add(ref)
        return frozenset(out)

    # ── expressions ──────────────────────────────────────────────────────────

    def eval_exp(self, node, binding: Optional[Binding] = None) -> Value:
        b = binding if binding is not None else self.binding
        cats = [c.category for c in node.children]
        if cats == [syn.EP]:
            return self.eval_ep(node.children[0], b)
        if cats == [syn.VARIABLE, syn.EP]:
            value = self.eval_ep(node.children[1], b)
            b.assign(node.children[0].referent, value)
            return value
        if cats == [syn.OPERATOR, syn.EP]:  # Return
            raise _Return(self.eval_ep(node.children[1], b))
        raise EvalError("malformed expression")

    def eval_ep(self, node, binding: Optional[Binding] = None) -> Value:
        b = binding if binding is not None else self.binding
        if node.category == syn.EXP:
            return self.eval_exp(node, b)
        acc = self._operand(node.children[0], b)
        i = 1
        while i < len(node.children):
            op = node.children[i]
            rhs = self._operand(node.children[i + 1], b)
            acc = self._apply(self._name(op.referent), acc, rhs)
            i += 2
        return acc

    def _operand(self, node, b: Binding) -> Value:
        if node.category in (syn.NP, syn.PNP, syn.DP):
            return self.eval_np(node, b)
        if node.category == syn.NUMBER:
            name = self.v.name_of(node.referent) or node.lexeme or ""
            try:
                return int(name)
            except ValueError:
                raise TypeMismatch(f"{name!r} is not an integer")
        if node.category == syn.VARIABLE:
            return b.lookup(node.referent)
        if node.category == syn.CALL:
            args = [self.eval_ep(c, b) for c in node.children]
            return self.call_procedure(node.referent, args)
        raise EvalError(f"not an operand: {node.category}")

    def _apply(self, op: str, left: Value, right: Value) -> Value:
        if not isinstance(left, frozenset) or not isinstance(right, frozenset):
            raise TypeMismatch(f"{op.capitalize()} needs symbol sets")
        if op == "union":
            return left | right
        if op == "minus":
            return left - right
        if op == "intersect":
            return left & right
        raise EvalError(f"operator {op!r} has no set meaning")

    # ── procedures and events ────────────────────────────────────────────────

    def call_procedure(self, p_sym: int, args: list) -> Value:
        utt = load_utterance(self.v, p_sym)
        if utt.category != syn.PROCEDURE:
            raise ExecutionError(f"#{p_sym} is not a procedure")
        params = [c for c in utt.root.children if c.category == syn.VARIABLE]
        il = utt.root.children[-1]
        if len(params) != len(args):
            raise ArityMismatch(
                f"{utt.label or p_sym}: {len(params)} parameters, "
                f"{len(args)} arguments")
        if self._depth >= self.max_depth:
            raise ExecutionError("recursion depth exceeded")
        frame = Binding(this=self.binding.this)
        for p, a in zip(params, args):
            frame.assign(p.referent, a)
        self._depth += 1
        try:
            with self.path.entered(PROCEDURE, p_sym):
                self._yield()
                try:
                    return self._run_il(il, frame)
                except _Return as r:
                    return r.value
        finally:
            self._depth -= 1

    def _run_il(self, il, binding: Binding) -> Value:
        """Run one instruction list; Return propagates to the procedure."""
        with self.path.entered(INSTRUCTION_LIST, il.symbol):
            for inst in il.children:
                self._yield()
                if inst.category == syn.IL:
                    self._run_il(inst, binding.child())
                elif inst.category == syn.CALL:
                    self._operand(inst, binding)
                else:
                    self.eval_exp(inst, binding)
        return NOTHING

    def eval_event(self, event_sym: Optional[int], handler: int) -> Value:
        """Run a bound handler under an Event path entry. The handler is a
        stored Expression (queries, free expressions) or Procedure."""
        with self.path.entered(EVENT, event_sym):
            self._yield()
            utt = load_utterance(self.v, handler)
            if utt.category == syn.PROCEDURE:
                return self.call_procedure(handler, [])
            if utt.category == syn.EXPRESSION:
                try:
                    return self.eval_exp(utt.root)
                except _Return as r:
                    return r.value
            raise ExecutionError(
                f"#{handler} ({utt.category}) cannot handle events")


# ── convenience entry points ──────────────────────────────────────────────────

def eval_np(np, v: ImageVersion, binding: Optional[Binding] = None) -> frozenset:
    return Evaluator(v, binding).eval_np(np)


def eval_ep(ep, v: ImageVersion, binding: Optional[Binding] = None) -> Value:
    return Evaluator(v, binding).eval_ep(ep)
