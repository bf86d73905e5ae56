"""Seed loading, fixed-point checking and source regeneration.

The knowledge that ships with the kernel is a handful of .fon book files.
Loading replays them utterance by utterance into a fresh image; a grammar
utterance that classifies under "Book" opens a book, and every utterance
from then on (the opener included) is chained into the open book with
Sequence pairs. Once the language book is in, the parser answers to the
image alone, so reloading what `rebuild` writes must reproduce the same
knowledge — the fixed point that `panta check` verifies.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from .errors import BootstrapParseError, FonalError
from .fonal import (append_member, is_utterance, ordered_members, parse_into,
                    phrase, split_utterances, tokenize)
from .fonal import syntax as syn
from .fonal.storage import load_utterance
from .fonal.syntax import SyntaxNode, Utterance
from .store import IN, Image, ImageVersion, NetDelta, RelationKind, apply_delta

C = RelationKind.CLASSIFICATION
S = RelationKind.SEQUENCE

SEED_DIR = Path(__file__).parent / "seed"


def seed_files(src_dir: Optional[Path] = None) -> list[Path]:
    d = Path(src_dir) if src_dir is not None else SEED_DIR
    return sorted(d.glob("*.fon"))


# ── loading ───────────────────────────────────────────────────────────────────

def _book_opened(view, utt: Utterance) -> Optional[int]:
    """The book a grammar utterance opens, if it classifies under "Book"."""
    if utt.category != syn.GRAMMAR or not utt.root.children:
        return None
    cat = utt.root.children[0].referent
    if cat is None or (view.name_of(cat) or "").lower() != "book":
        return None
    return utt.root.children[1].referent


def load_source(image: Image, text: str,
                book: Optional[int] = None) -> list[Utterance]:
    """Parse a source text and commit it, one version per utterance.

    All-or-nothing: every utterance is parsed against the staged overlay
    before anything is committed, so a failing line leaves the image as it
    was. Returns the utterances in source order, symbols assigned.
    """
    v = image.snapshot()
    staged: list[tuple[Utterance, NetDelta]] = []
    current = book
    for group in split_utterances(tokenize(text)):
        b = image.begin(v)
        utt = parse_into(group, b)
        opened = _book_opened(b, utt)
        if opened is not None:
            current = opened
        if current is not None:
            append_member(b, current, utt.symbol)
        delta = b.build()
        staged.append((utt, delta))
        v = apply_delta(v, delta)
    for _, delta in staged:
        image.advance(delta)
    return [utt for utt, _ in staged]


def load_seed(src_dir: Optional[Path] = None) -> Image:
    """A fresh image holding the whole seed corpus."""
    image = Image()
    for path in seed_files(src_dir):
        try:
            load_source(image, path.read_text(encoding="utf-8"))
        except FonalError as e:
            raise BootstrapParseError(path.name, e.offset, str(e)) from e
    return image


# ── books ─────────────────────────────────────────────────────────────────────

def book_class(v: ImageVersion) -> Optional[int]:
    hits = v.named("Book")
    return min(hits) if hits else None


def books(v: ImageVersion) -> list[int]:
    """All book symbols, in creation (= load) order."""
    cls = book_class(v)
    return sorted(v.neighbors(cls, C, IN)) if cls is not None else []


def book_named(v: ImageVersion, name: str) -> Optional[int]:
    cls = book_class(v)
    if cls is None:
        return None
    hits = v.named(name) & v.neighbors(cls, C, IN)
    return min(hits) if hits else None


def book_utterances(v: ImageVersion, book: int) -> list[int]:
    return [u for u in ordered_members(v, book) if is_utterance(v, u)]


def book_of(v: ImageVersion, u_sym: int) -> Optional[int]:
    cls = book_class(v)
    if cls is None:
        return None
    owners = v.neighbors(u_sym, S, IN) & v.neighbors(cls, C, IN)
    return min(owners) if owners else None


# ── the fixed point ───────────────────────────────────────────────────────────

def utterance_signature(v: ImageVersion, u_sym: int) -> tuple:
    """Identity of a stored utterance up to symbol ids: categories, labels
    and referent names, exactly what survives a phrase/parse round trip."""
    utt = load_utterance(v, u_sym)
    return (utt.category, utt.label, _node_signature(v, utt.root))


def _node_signature(v: ImageVersion, node: SyntaxNode) -> tuple:
    ref = v.name_of(node.referent) if node.referent is not None else None
    return (node.category, ref,
            tuple(_node_signature(v, c) for c in node.children))


def check_fixed_point(v: ImageVersion) -> list[str]:
    """Phrase every book, load the text into a fresh image, and compare
    utterance by utterance. Returns mismatch reports; empty means the image
    is a fixed point of phrase-then-parse."""
    problems: list[str] = []
    image2 = Image()
    for book in books(v):
        bname = v.name_of(book) or f"#{book}"
        originals = book_utterances(v, book)
        text = "\n".join(phrase(u, v) for u in originals)
        try:
            load_source(image2, text)
        except Exception as e:  # report, keep checking the other books
            problems.append(f"{bname}: reload failed: {e}")
            continue
        v2 = image2.snapshot()
        book2 = book_named(v2, bname)
        if book2 is None:
            problems.append(f"{bname}: book did not reappear on reload")
            continue
        reloaded = book_utterances(v2, book2)
        if len(originals) != len(reloaded):
            problems.append(f"{bname}: {len(originals)} utterances reloaded "
                            f"as {len(reloaded)}")
        for i, (a, b) in enumerate(zip(originals, reloaded)):
            if utterance_signature(v, a) != utterance_signature(v2, b):
                problems.append(
                    f"{bname}[{i}]: {phrase(a, v)!r} reloaded as "
                    f"{phrase(b, v2)!r}")
    return problems


# ── regeneration ──────────────────────────────────────────────────────────────

def rebuild(v: ImageVersion, out_dir: Path) -> list[Path]:
    """Write every book back out as canonical .fon source, one utterance per
    line, numbered in load order. Loading the result reproduces the image."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for i, book in enumerate(books(v)):
        name = (v.name_of(book) or f"book{book}").lower()
        path = out / f"{i * 10:02d}_{name}.fon"
        lines = [phrase(u, v) for u in book_utterances(v, book)]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    return written
