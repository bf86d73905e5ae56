"""Image reports: delimited tables plus rendered figures.

`write_report` drops, into one directory, a set of CSV tables anyone can
load into a spreadsheet and the matching charts as PNG files: how symbols
connect (degree distribution), what the image is made of (pair kinds,
largest classes) and how knowledge spreads over books.
"""

from __future__ import annotations

import csv
from collections import Counter
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bootstrap import book_utterances, books
from .store import IN, OUT, ImageVersion, RelationKind, stats

C = RelationKind.CLASSIFICATION
A = RelationKind.ATTRIBUTION
S = RelationKind.SEQUENCE

KIND_LABELS = {C: "classification", A: "attribution", S: "sequence"}


def degree_counts(v: ImageVersion) -> Counter:
    """degree → how many symbols have it (in-degree + out-degree)."""
    per_symbol = Counter()
    for p in v.pairs:
        per_symbol[p.src] += 1
        per_symbol[p.dst] += 1
    hist = Counter(per_symbol[s] for s in v.symbols)
    return hist


def pair_kind_counts(v: ImageVersion) -> dict[str, int]:
    c = Counter(p.kind for p in v.pairs)
    return {KIND_LABELS[k]: c.get(k, 0) for k in (C, A, S)}


def class_sizes(v: ImageVersion, top: int = 12) -> list[tuple[str, int]]:
    """The largest classes by direct instance count, named ones only."""
    sizes = Counter()
    for p in v.pairs:
        if p.kind is C:
            sizes[p.dst] += 1
    named = [(v.name_of(s), n) for s, n in sizes.items()
             if v.name_of(s) is not None]
    named.sort(key=lambda kv: (-kv[1], kv[0]))
    return named[:top]


def book_sizes(v: ImageVersion) -> list[tuple[str, int]]:
    return [(v.name_of(b) or f"#{b}", len(book_utterances(v, b)))
            for b in books(v)]


def write_report(v: ImageVersion, out_dir: Path) -> list[Path]:
    """All tables and figures for one image; returns the files written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    st = stats(v)
    summary = out_dir / "summary.csv"
    with summary.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value"])
        w.writerow(["version", v.version])
        w.writerow(["symbols", st.symbol_count])
        w.writerow(["pairs", st.pair_count])
        w.writerow(["avg_degree", float(st.avg_degree)])
        w.writerow(["avg_degree_exact",
                    f"{st.avg_degree.numerator}/{st.avg_degree.denominator}"])
        for label, n in pair_kind_counts(v).items():
            w.writerow([f"pairs_{label}", n])
    written.append(summary)

    hist = degree_counts(v)
    degrees = out_dir / "degrees.csv"
    with degrees.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["degree", "symbols"])
        for d in sorted(hist):
            w.writerow([d, hist[d]])
    written.append(degrees)

    books_csv = out_dir / "books.csv"
    with books_csv.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["book", "utterances"])
        for name, n in book_sizes(v):
            w.writerow([name, n])
    written.append(books_csv)

    classes_csv = out_dir / "classes.csv"
    with classes_csv.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "direct_instances"])
        for name, n in class_sizes(v):
            w.writerow([name, n])
    written.append(classes_csv)

    written.append(_degree_figure(hist, st, out_dir / "degree_distribution.png"))
    written.append(_kinds_figure(pair_kind_counts(v), out_dir / "pair_kinds.png"))
    written.append(_books_figure(book_sizes(v), out_dir / "book_sizes.png"))
    return written


def _degree_figure(hist: Counter, st, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = sorted(hist)
    ax.bar(xs, [hist[x] for x in xs], color="#35618f")
    ax.axvline(float(st.avg_degree), color="#c0392b", linestyle="--",
               label=f"average {float(st.avg_degree):.2f}")
    ax.set_xlabel("degree (pairs touching the symbol)")
    ax.set_ylabel("symbols")
    ax.set_title("Symbol connectivity")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _kinds_figure(kinds: dict[str, int], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    labels = list(kinds)
    ax.bar(labels, [kinds[k] for k in labels],
           color=["#35618f", "#2e8b57", "#b8860b"])
    ax.set_ylabel("pairs")
    ax.set_title("Pairs by relation kind")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _books_figure(sizes: list[tuple[str, int]], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    names = [n for n, _ in sizes]
    ax.barh(names, [c for _, c in sizes], color="#35618f")
    ax.invert_yaxis()
    ax.set_xlabel("stored utterances")
    ax.set_title("Knowledge by book")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
