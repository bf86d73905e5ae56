"""Serialized image updates with suspension and crawl-back.

All writes flow through one engine. Commits apply strictly in arrival
order; while one applies, every evaluating session halts at its next yield
point. After the new version exists, each session whose execution path
touches an affected symbol gets its crawl-back flag set, then everyone
resumes: unflagged sessions continue against the new version, flagged ones
unwind to the main entree point and retry their action once.

The guard refuses deltas that would break the system's ability to describe
or repair itself: removals inside the language's self-definition closure,
renames of its words, and removal of the last form opening a declared
function.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

from .errors import CrawlBack, GuardViolation
from .evaluator import Binding, Evaluator, ExecutionPath
from .fonal import head_referent, load_node, node_category
from .fonal import syntax as syn
from .store import (IN, OUT, Image, ImageVersion, NetDelta, RelationKind,
                    apply_delta)

C = RelationKind.CLASSIFICATION
A = RelationKind.ATTRIBUTION
S = RelationKind.SEQUENCE

# commit origins
PARSED_UTTERANCE = "ParsedUtterance"
DELETED_UTTERANCE = "DeletedUtterance"
DESIGNER_ACTION = "DesignerAction"

# resume decisions
CONTINUE = "Continue"
CRAWL_BACK = "CrawlBack"
ABORT_INFORM = "AbortInform"


@dataclass(frozen=True)
class CommitRequest:
    session: Optional[str]
    delta: NetDelta
    origin: str = PARSED_UTTERANCE


class CommitOutcome(NamedTuple):
    version: "ImageVersion"
    flagged: frozenset
    affected: frozenset


@dataclass
class SessionHandle:
    """The engine's view of one evaluating session: its live execution path
    plus the crawl-back bookkeeping. The flag is set only under the engine
    lock by a committing thread; the owning session clears it once it has
    unwound to the main entree point."""

    id: str
    path: ExecutionPath
    flag: bool = False
    retried: bool = False
    origin_form: Optional[int] = None


def check_path(path: ExecutionPath, affected: frozenset[int]) -> bool:
    """Does the path use any changed information?"""
    return bool(path.symbols() & affected)


def affected(delta: NetDelta, v: ImageVersion) -> frozenset[int]:
    """Symbols an update touches: everything the delta names, endpoints of
    its pairs, widened by every stored commit-watch query evaluated with
    each touched symbol as context."""
    base = set(delta.touched_symbols())
    queries = _commit_queries(v)
    if queries:
        for s in set(base):
            if not v.live(s):
                continue
            ev = Evaluator(v, Binding(this=s))
            for handler in queries:
                try:
                    result = ev.eval_event(None, handler)
                except Exception:
                    continue  # a broken watch query must not block commits
                if isinstance(result, frozenset):
                    base |= result
    return frozenset(base)


def _commit_queries(v: ImageVersion) -> list[int]:
    """Handlers bound through the OnCommit verb anywhere in the image."""
    out = []
    for verb in v.named("OnCommit"):
        for leaf in v.neighbors(verb, A, IN):
            if node_category(v, leaf) != syn.V:
                continue
            for parent in v.neighbors(leaf, S, IN):
                if node_category(v, parent) != syn.VP:
                    continue
                vp = load_node(v, parent)
                if vp is None or not vp.children:
                    continue
                obj = vp.children[-1]
                if obj.category in (syn.NP, syn.PNP, syn.DP):
                    ref = head_referent(obj)
                    if ref is not None and v.live(ref):
                        out.append(ref)
    return out


# ── the self-definition guard ─────────────────────────────────────────────────

def self_definition_closure(v: ImageVersion) -> frozenset[int]:
    """Everything reachable from the root of the language's own book, over
    every pair kind: its utterances, their trees, and every word, class and
    anchor they lean on. Removing any of it would leave the parser unable
    to read the next utterance."""
    from .bootstrap import book_named
    root = book_named(v, "Language")
    if root is None:
        return frozenset()
    seen = {root}
    frontier = [root]
    while frontier:
        cur = frontier.pop()
        for kind in (C, A, S):
            for nxt in v.neighbors(cur, kind, OUT):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
    return frozenset(seen)


def _functions_with_entrees(v: ImageVersion) -> dict[int, set[int]]:
    """Declared functions mapped to the forms that open them."""
    out: dict[int, set[int]] = {}
    fn_classes = v.named("Function")
    for fn_class in fn_classes:
        for fn in v.transitive_in(fn_class, C) - {fn_class}:
            out.setdefault(fn, set())
    for verb in v.named("Opens"):
        for leaf in v.neighbors(verb, A, IN):
            if node_category(v, leaf) != syn.V:
                continue
            for parent in v.neighbors(leaf, S, IN):
                if node_category(v, parent) != syn.VP:
                    continue
                vp = load_node(v, parent)
                if vp is None or not vp.children:
                    continue
                fn = head_referent(vp.children[-1])
                if fn is None or fn not in out:
                    continue
                for form in v.neighbors(parent, A, IN):
                    out[fn].add(form)
    return out


def guard_check(delta: NetDelta, v: ImageVersion) -> None:
    """Refuse updates that erase the drawing hands."""
    closure = self_definition_closure(v)

    hits = delta.removed_symbols & closure
    if hits:
        raise GuardViolation("self-definition", frozenset(hits))
    hits = {s for s, _ in delta.name_changes if s in closure}
    if hits:
        raise GuardViolation("self-definition", frozenset(hits))
    hits = {p for p in delta.removed_pairs
            if p.src in closure and p.dst in closure}
    if hits:
        raise GuardViolation(
            "self-definition",
            frozenset(itertools.chain.from_iterable(
                (p.src, p.dst) for p in hits)))

    before = _functions_with_entrees(v)
    if any(before.values()):
        after = apply_delta(v, delta)
        surviving = _functions_with_entrees(after)
        for fn, forms in before.items():
            live_forms = {f for f in forms if v.live(f)}
            if not live_forms:
                continue  # never had an entree; nothing to protect
            if fn not in surviving or not {f for f in surviving[fn]
                                           if after.live(f)}:
                raise GuardViolation("single-entree",
                                     frozenset({fn} | live_forms))


# ── the engine ────────────────────────────────────────────────────────────────

class CommitEngine:
    """Owns the image and the only cross-session mutable state: the commit
    queue, the epoch fence, and per-session crawl-back flags."""

    def __init__(self, image: Image, log_path: Optional[Path] = None):
        self._image = image
        self._log_path = Path(log_path) if log_path is not None else None
        self._lock = threading.Lock()
        self._resume = threading.Condition(self._lock)
        self._committing = False
        self._next_ticket = 0
        self._serving = 0
        self._epoch = 0
        self._sessions: dict[str, SessionHandle] = {}

    # sessions ──────────────────────────────────────────────────────────────

    def register(self, session_id: str,
                 path: Optional[ExecutionPath] = None) -> SessionHandle:
        handle = SessionHandle(session_id, path or ExecutionPath())
        with self._lock:
            self._sessions[session_id] = handle
        return handle

    def unregister(self, session_id: str) -> None:
        with self._lock:
            self._sessions.pop(session_id, None)

    def version(self) -> ImageVersion:
        return self._image.snapshot()

    @property
    def epoch(self) -> int:
        with self._lock:
            return self._epoch

    # the yield-point fence ─────────────────────────────────────────────────

    def fence(self, handle: SessionHandle) -> None:
        """Called by a session at every yield point: wait out any applying
        commit, then either continue against the new version or crawl back."""
        with self._lock:
            while self._committing:
                self._resume.wait()
            if handle.flag:
                raise CrawlBack(
                    f"session {handle.id} uses changed information")

    def yield_hook(self, handle: SessionHandle):
        """An evaluator hook wiring this session to the fence; also refreshes
        the evaluator to the version current at the yield point."""
        def hook(ev: Evaluator) -> None:
            self.fence(handle)
            ev.v = self.version()
        return hook

    # resumption ────────────────────────────────────────────────────────────

    def resume_policy(self, handle: SessionHandle) -> str:
        if not handle.flag:
            return CONTINUE
        if handle.origin_form is not None \
                and not self.version().live(handle.origin_form):
            return ABORT_INFORM
        if handle.retried:
            return ABORT_INFORM
        return CRAWL_BACK

    # committing ────────────────────────────────────────────────────────────

    def commit(self, req: CommitRequest) -> "CommitOutcome":
        with self._lock:
            ticket = self._next_ticket
            self._next_ticket += 1
            while self._serving != ticket:
                self._resume.wait()
            self._committing = True
        flagged: set[str] = set()
        try:
            v = self._image.snapshot()
            guard_check(req.delta, v)
            aff = affected(req.delta, v)
            new_v = self._image.advance(req.delta)
            with self._lock:
                for handle in self._sessions.values():
                    if handle.id == req.session:
                        continue
                    if check_path(handle.path, aff):
                        handle.flag = True
                        flagged.add(handle.id)
        finally:
            with self._lock:
                self._committing = False
                self._serving += 1
                self._epoch += 1
                self._resume.notify_all()
        self._log(new_v, req, flagged)
        return CommitOutcome(new_v, frozenset(flagged), aff)

    def _log(self, new_v: ImageVersion, req: CommitRequest,
             flagged: set[str]) -> None:
        if self._log_path is None:
            return
        d = req.delta
        line = (f"version={new_v.version} origin={req.origin} "
                f"symbols+{len(d.added_symbols)} "
                f"symbols-{len(d.removed_symbols)} "
                f"pairs+{len(d.added_pairs)} "
                f"pairs-{len(d.removed_pairs)} "
                f"flagged={','.join(sorted(flagged)) or '-'}\n")
        with open(self._log_path, "a", encoding="utf-8") as fh:
            fh.write(line)
