"""The universal database: symbols, relation-tagged pairs, names, states.

An image is a linear sequence of immutable versions. A version is a set of
symbol ids plus a set of ordered, relation-tagged pairs over them, with two
characteristic maps: a partial naming map and a perfect/imperfect state map.
All mutation is expressed as a NetDelta built against a version; applying a
delta yields the next version. The store does no scheduling of its own —
serialization of writers belongs to the commit engine.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional

from .errors import DeadSymbol, DuplicateName, StoreViolation


class RelationKind(Enum):
    """The three relation kinds of the network.

    CLASSIFICATION links an instance to its class, ATTRIBUTION links a
    subject to a fact node (or a syntax node to its referent), SEQUENCE is
    the ordered structural link used for word order, instruction lists and
    component trees.
    """

    CLASSIFICATION = "C"
    ATTRIBUTION = "A"
    SEQUENCE = "S"


class SymbolState(Enum):
    IMPERFECT = "imperfect"
    PERFECT = "perfect"


class Pair(NamedTuple):
    src: int
    dst: int
    kind: RelationKind


OUT = "out"
IN = "in"

_EMPTY: frozenset = frozenset()


@dataclass(frozen=True, eq=False)
class NetDelta:
    """A reversible difference between two adjacent image versions.

    name_changes maps symbol -> new name (None clears); state_changes maps
    symbol -> new state. Added and removed sets must be disjoint.
    """

    added_symbols: frozenset[int] = _EMPTY
    removed_symbols: frozenset[int] = _EMPTY
    added_pairs: frozenset[Pair] = _EMPTY
    removed_pairs: frozenset[Pair] = _EMPTY
    name_changes: tuple[tuple[int, Optional[str]], ...] = ()
    state_changes: tuple[tuple[int, SymbolState], ...] = ()

    def __post_init__(self):
        if self.added_symbols & self.removed_symbols:
            raise StoreViolation("delta adds and removes the same symbol")
        if self.added_pairs & self.removed_pairs:
            raise StoreViolation("delta adds and removes the same pair")

    @property
    def is_empty(self) -> bool:
        return not (self.added_symbols or self.removed_symbols
                    or self.added_pairs or self.removed_pairs
                    or self.name_changes or self.state_changes)

    def touched_symbols(self) -> frozenset[int]:
        """Every symbol the delta adds, removes, re-links, renames or restates."""
        out = set(self.added_symbols) | set(self.removed_symbols)
        for p in self.added_pairs | self.removed_pairs:
            out.add(p.src)
            out.add(p.dst)
        out.update(s for s, _ in self.name_changes)
        out.update(s for s, _ in self.state_changes)
        return frozenset(out)


class ImageVersion:
    """One immutable version of the image. Safe to share across threads."""

    __slots__ = ("version", "symbols", "pairs", "names", "states",
                 "_adj", "_by_name", "_lock")

    def __init__(self, version: int, symbols: frozenset[int],
                 pairs: frozenset[Pair], names: dict[int, str],
                 states: dict[int, SymbolState]):
        self.version = version
        self.symbols = symbols
        self.pairs = pairs
        self.names = names      # treated as immutable after construction
        self.states = states    # one entry per live symbol
        self._adj = None
        self._by_name = None
        self._lock = threading.Lock()

    # ── reads ────────────────────────────────────────────────────────────────

    def live(self, s: int) -> bool:
        return s in self.symbols

    def require_live(self, s: int) -> None:
        if s not in self.symbols:
            raise DeadSymbol(s)

    def name_of(self, s: int) -> Optional[str]:
        self.require_live(s)
        return self.names.get(s)

    def state_of(self, s: int) -> SymbolState:
        self.require_live(s)
        return self.states.get(s, SymbolState.IMPERFECT)

    def _index(self):
        with self._lock:
            if self._adj is None:
                adj: dict[tuple[int, RelationKind, str], set[int]] = {}
                by_name: dict[str, set[int]] = {}
                for p in self.pairs:
                    adj.setdefault((p.src, p.kind, OUT), set()).add(p.dst)
                    adj.setdefault((p.dst, p.kind, IN), set()).add(p.src)
                for s, n in self.names.items():
                    by_name.setdefault(n.lower(), set()).add(s)
                self._adj = adj
                self._by_name = by_name
        return self._adj, self._by_name

    def neighbors(self, s: int, kind: RelationKind, direction: str = OUT) -> frozenset[int]:
        self.require_live(s)
        adj, _ = self._index()
        return frozenset(adj.get((s, kind, direction), _EMPTY))

    def named(self, word: str) -> frozenset[int]:
        """All live symbols whose name equals the word, case-insensitively."""
        _, by_name = self._index()
        return frozenset(by_name.get(word.lower(), _EMPTY))

    def transitive_in(self, root: int, kind: RelationKind) -> frozenset[int]:
        """All symbols with a path of `kind` pairs leading to `root` (root excluded
        unless it sits on a cycle)."""
        adj, _ = self._index()
        seen: set[int] = set()
        frontier = [root]
        while frontier:
            nxt = []
            for s in frontier:
                for q in adj.get((s, kind, IN), _EMPTY):
                    if q not in seen:
                        seen.add(q)
                        nxt.append(q)
            frontier = nxt
        return frozenset(seen)

    def transitive_out(self, root: int, kind: RelationKind) -> frozenset[int]:
        adj, _ = self._index()
        seen: set[int] = set()
        frontier = [root]
        while frontier:
            nxt = []
            for s in frontier:
                for q in adj.get((s, kind, OUT), _EMPTY):
                    if q not in seen:
                        seen.add(q)
                        nxt.append(q)
            frontier = nxt
        return frozenset(seen)

    def scope_of(self, s: int) -> frozenset[int]:
        """The naming scope of a symbol: its classification parents."""
        adj, _ = self._index()
        return frozenset(adj.get((s, RelationKind.CLASSIFICATION, OUT), _EMPTY))

    def same_content(self, other: "ImageVersion") -> bool:
        """Content equality, ids included; version numbers are not compared."""
        return (self.symbols == other.symbols and self.pairs == other.pairs
                and self.names == other.names and self.states == other.states)

    def __repr__(self):
        return (f"<ImageVersion v{self.version}: {len(self.symbols)} symbols, "
                f"{len(self.pairs)} pairs>")


@dataclass(frozen=True)
class ImageStats:
    symbol_count: int
    pair_count: int
    avg_degree: Fraction

    def as_dict(self) -> dict:
        return {
            "symbol_count": self.symbol_count,
            "pair_count": self.pair_count,
            "avg_degree": float(self.avg_degree),
            "avg_degree_exact": f"{self.avg_degree.numerator}/{self.avg_degree.denominator}",
        }


def stats(v: ImageVersion) -> ImageStats:
    n, m = len(v.symbols), len(v.pairs)
    avg = Fraction(m, n) if n else Fraction(0)
    return ImageStats(n, m, avg)


# ── delta application ─────────────────────────────────────────────────────────

def apply_delta(v: ImageVersion, delta: NetDelta) -> ImageVersion:
    """Pure: the version that results from applying `delta` to `v`.

    Does not validate; see validate_delta. Fresh symbols default to the
    imperfect state.
    """
    symbols = (v.symbols - delta.removed_symbols) | delta.added_symbols
    pairs = (v.pairs - delta.removed_pairs) | delta.added_pairs
    names = {s: n for s, n in v.names.items() if s not in delta.removed_symbols}
    for s, n in delta.name_changes:
        if n is None:
            names.pop(s, None)
        else:
            names[s] = n
    states = {s: st for s, st in v.states.items() if s not in delta.removed_symbols}
    for s in delta.added_symbols:
        states[s] = SymbolState.IMPERFECT
    for s, st in delta.state_changes:
        states[s] = st
    return ImageVersion(v.version + 1, symbols, pairs, names, states)


def validate_delta(v: ImageVersion, delta: NetDelta) -> None:
    """Raise StoreViolation unless `delta` keeps every store invariant on `v`."""
    for s in delta.removed_symbols:
        if s not in v.symbols:
            raise StoreViolation(f"removing symbol #{s} that is not live")
    for p in delta.added_pairs:
        for endpoint in (p.src, p.dst):
            live_after = ((endpoint in v.symbols or endpoint in delta.added_symbols)
                          and endpoint not in delta.removed_symbols)
            if not live_after:
                raise StoreViolation(f"pair {p} references dead symbol #{endpoint}")
    # removing a symbol must take every incident pair with it
    if delta.removed_symbols:
        surviving = (v.pairs - delta.removed_pairs) | delta.added_pairs
        for p in surviving:
            if p.src in delta.removed_symbols or p.dst in delta.removed_symbols:
                raise StoreViolation(
                    f"symbol removal leaves dangling pair {p}; the delta must "
                    f"remove all incident pairs")
    for s, _ in delta.name_changes:
        if not ((s in v.symbols or s in delta.added_symbols)
                and s not in delta.removed_symbols):
            raise StoreViolation(f"name change for dead symbol #{s}")
    for s, _ in delta.state_changes:
        if not ((s in v.symbols or s in delta.added_symbols)
                and s not in delta.removed_symbols):
            raise StoreViolation(f"state change for dead symbol #{s}")
    _validate_name_scopes(apply_delta(v, delta))


def _validate_name_scopes(after: ImageVersion) -> None:
    """Names must be unique among siblings (symbols sharing a classification
    parent); unclassified symbols share one root scope."""
    groups: dict[str, list[int]] = {}
    for s, n in after.names.items():
        groups.setdefault(n.lower(), []).append(s)
    for name, syms in groups.items():
        if len(syms) < 2:
            continue
        scopes = {s: after.scope_of(s) for s in syms}
        for i, a in enumerate(syms):
            for b in syms[i + 1:]:
                sa, sb = scopes[a], scopes[b]
                if (sa & sb) or (not sa and not sb):
                    raise StoreViolation(
                        f"name {name!r} bound to siblings #{a} and #{b}")


def invert_delta(delta: NetDelta, base: ImageVersion) -> NetDelta:
    """The delta that undoes `delta` when applied to apply_delta(base, delta)."""
    name_changes = []
    for s, _ in delta.name_changes:
        if s in delta.added_symbols:
            continue  # symbol disappears with the revert
        name_changes.append((s, base.names.get(s)))
    state_changes = []
    for s, _ in delta.state_changes:
        if s in delta.added_symbols:
            continue
        state_changes.append((s, base.states.get(s, SymbolState.IMPERFECT)))
    for s in delta.removed_symbols:
        # re-adding a symbol restores its name and state
        if base.names.get(s) is not None:
            name_changes.append((s, base.names[s]))
        st = base.states.get(s, SymbolState.IMPERFECT)
        if st is not SymbolState.IMPERFECT:
            state_changes.append((s, st))
    return NetDelta(
        added_symbols=delta.removed_symbols,
        removed_symbols=delta.added_symbols,
        added_pairs=delta.removed_pairs,
        removed_pairs=delta.added_pairs,
        name_changes=tuple(name_changes),
        state_changes=tuple(state_changes),
    )


# ── working delta ─────────────────────────────────────────────────────────────

class DeltaBuilder:
    """A mutable overlay over a base version; build() yields the NetDelta.

    Readers (the parser, the ui model) work against a builder so that
    symbols created earlier in the same utterance resolve immediately.
    """

    def __init__(self, base: ImageVersion, alloc):
        self._base = base
        self._alloc = alloc  # callable -> fresh symbol id
        self._added: set[int] = set()
        self._removed: set[int] = set()
        self._added_pairs: set[Pair] = set()
        self._removed_pairs: set[Pair] = set()
        self._names: dict[int, Optional[str]] = {}
        self._states: dict[int, SymbolState] = {}

    @property
    def base(self) -> ImageVersion:
        return self._base

    # ── overlay reads ────────────────────────────────────────────────────────

    def live(self, s: int) -> bool:
        if s in self._removed:
            return False
        return s in self._added or self._base.live(s)

    def require_live(self, s: int) -> None:
        if not self.live(s):
            raise DeadSymbol(s)

    def name_of(self, s: int) -> Optional[str]:
        self.require_live(s)
        if s in self._names:
            return self._names[s]
        return self._base.names.get(s)

    def state_of(self, s: int) -> SymbolState:
        self.require_live(s)
        if s in self._states:
            return self._states[s]
        return self._base.states.get(s, SymbolState.IMPERFECT)

    def has_pair(self, p: Pair) -> bool:
        if p in self._removed_pairs:
            return False
        return p in self._added_pairs or p in self._base.pairs

    def neighbors(self, s: int, kind: RelationKind, direction: str = OUT) -> frozenset[int]:
        self.require_live(s)
        if self._base.live(s):
            out = set(self._base.neighbors(s, kind, direction))
        else:
            out = set()
        for p in self._added_pairs:
            if p.kind is kind:
                if direction == OUT and p.src == s:
                    out.add(p.dst)
                elif direction == IN and p.dst == s:
                    out.add(p.src)
        for p in self._removed_pairs:
            if p.kind is kind:
                if direction == OUT and p.src == s:
                    out.discard(p.dst)
                elif direction == IN and p.dst == s:
                    out.discard(p.src)
        out -= self._removed
        return frozenset(out)

    def named(self, word: str) -> frozenset[int]:
        lower = word.lower()
        out = set(self._base.named(word))
        for s, n in self._names.items():
            if n is not None and n.lower() == lower and self.live(s):
                out.add(s)
            else:
                out.discard(s)
        out -= self._removed
        return frozenset(out)

    def scope_of(self, s: int) -> frozenset[int]:
        return self.neighbors(s, RelationKind.CLASSIFICATION, OUT)

    def transitive_in(self, root: int, kind: RelationKind) -> frozenset[int]:
        seen: set[int] = set()
        frontier = [root]
        while frontier:
            nxt = []
            for s in frontier:
                for q in self.neighbors(s, kind, IN):
                    if q not in seen:
                        seen.add(q)
                        nxt.append(q)
            frontier = nxt
        return frozenset(seen)

    # ── mutations ────────────────────────────────────────────────────────────

    def create_symbol(self, name: Optional[str] = None) -> int:
        if name is not None:
            if not name:
                raise DuplicateName("(empty)")
            self._check_scope_free(name, scope=frozenset())
        s = self._alloc()
        self._added.add(s)
        if name is not None:
            self._names[s] = name
        return s

    def connect(self, a: int, b: int, kind: RelationKind) -> Pair:
        self.require_live(a)
        self.require_live(b)
        p = Pair(a, b, kind)
        self._removed_pairs.discard(p)
        if p not in self._base.pairs:
            self._added_pairs.add(p)
        return p

    def disconnect(self, a: int, b: int, kind: RelationKind) -> None:
        p = Pair(a, b, kind)
        self._added_pairs.discard(p)
        if p in self._base.pairs:
            self._removed_pairs.add(p)

    def set_name(self, s: int, name: Optional[str]) -> None:
        self.require_live(s)
        if name is not None:
            self._check_scope_free(name, scope=self.scope_of(s), except_for=s)
        if s in self._added and name is None:
            self._names.pop(s, None)
        else:
            self._names[s] = name

    def set_state(self, s: int, state: SymbolState) -> None:
        self.require_live(s)
        self._states[s] = state

    def remove_symbol(self, s: int) -> None:
        self.require_live(s)
        if s in self._added:
            self._added.discard(s)
            self._names.pop(s, None)
            self._states.pop(s, None)
            self._added_pairs = {p for p in self._added_pairs
                                 if p.src != s and p.dst != s}
        else:
            self._removed.add(s)
            self._names.pop(s, None)
            self._states.pop(s, None)

    def remove_symbol_and_pairs(self, s: int) -> None:
        """Remove a symbol together with every incident pair."""
        self.require_live(s)
        for kind in RelationKind:
            for q in self.neighbors(s, kind, OUT):
                self.disconnect(s, q, kind)
            for q in self.neighbors(s, kind, IN):
                self.disconnect(q, s, kind)
        self.remove_symbol(s)

    def _check_scope_free(self, name: str, scope: frozenset[int],
                          except_for: Optional[int] = None) -> None:
        for other in self.named(name):
            if other == except_for:
                continue
            other_scope = self.scope_of(other)
            if (scope & other_scope) or (not scope and not other_scope):
                raise DuplicateName(name)

    def build(self) -> NetDelta:
        return NetDelta(
            added_symbols=frozenset(self._added),
            removed_symbols=frozenset(self._removed),
            added_pairs=frozenset(self._added_pairs),
            removed_pairs=frozenset(self._removed_pairs),
            name_changes=tuple(sorted(self._names.items(),
                                      key=lambda kv: kv[0])),
            state_changes=tuple(sorted(self._states.items(),
                                       key=lambda kv: (kv[0], kv[1].value))),
        )


class Image:
    """Owner of the id allocator and the committed version chain.

    Many readers hold snapshots; exactly one writer at a time advances the
    chain (the commit engine enforces that rule, the store just checks the
    invariants).
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._next_id = 1
        self._current = ImageVersion(0, frozenset(), frozenset(), {}, {})
        self._tombstones: set[int] = set()

    @classmethod
    def resume(cls, v: ImageVersion, next_id: Optional[int] = None) -> "Image":
        """An image continuing from an existing version. Id allocation starts
        past every live symbol; pass next_id when the true high-water mark is
        known (a version whose history tombstoned higher ids)."""
        img = cls()
        img._current = v
        img._next_id = next_id if next_id is not None else (
            max(v.symbols) + 1 if v.symbols else 1)
        return img

    def allocate_id(self) -> int:
        with self._lock:
            s = self._next_id
            self._next_id += 1
            return s

    def snapshot(self) -> ImageVersion:
        with self._lock:
            return self._current

    def begin(self, base: Optional[ImageVersion] = None) -> DeltaBuilder:
        return DeltaBuilder(base or self.snapshot(), self.allocate_id)

    def advance(self, delta: NetDelta) -> ImageVersion:
        """Validate and apply; callers (the commit engine) serialize access."""
        with self._lock:
            validate_delta(self._current, delta)
            for s in delta.added_symbols:
                if s in self._tombstones or s in self._current.symbols:
                    raise StoreViolation(f"symbol id #{s} reused")
            nxt = apply_delta(self._current, delta)
            self._tombstones.update(delta.removed_symbols)
            self._current = nxt
            return nxt

    def overlay(self, base: ImageVersion, deltas: Iterable[NetDelta]) -> ImageVersion:
        """Uncommitted view: base with a run of deltas applied in order."""
        v = base
        for d in deltas:
            v = apply_delta(v, d)
        return v
