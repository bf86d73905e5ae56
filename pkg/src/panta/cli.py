"""The panta command line: boot, verify, serve and inspect images."""

from __future__ import annotations

import json
import sys
import threading
from pathlib import Path

import click

from . import report as report_mod
from .bootstrap import (book_named, book_utterances, books, check_fixed_point,
                        load_seed, load_source, rebuild)
from .errors import BootstrapParseError, FonalError, PantaError
from .fonal import load_utterance, phrase_utterance
from .server import Kernel, serve_tcp, serve_ws
from .store import stats

SEED_HELP = "Seed corpus directory (default: the packaged seed)."


def _load(seed: str | None):
    try:
        return load_seed(Path(seed) if seed else None)
    except BootstrapParseError as e:
        raise click.ClickException(f"seed failed to load: {e}")


@click.group()
def main():
    """A runtime-scalable application kernel.

    The running application — logic, data and user interface — is a
    versioned semantic network rewritten through language while clients
    stay connected.
    """


@main.command()
@click.option("--seed", envvar="PANTA_SEED", default=None, help=SEED_HELP)
def check(seed):
    """Verify the image's grammar defines itself (phrase, reparse,
    compare)."""
    image = _load(seed)
    v = image.snapshot()
    mismatches = check_fixed_point(v)
    if mismatches:
        for line in mismatches:
            click.echo(f"mismatch: {line}", err=True)
        raise click.ClickException(
            f"self-definition broken: {len(mismatches)} mismatch(es)")
    st = stats(v)
    click.echo(f"fixed point holds: grammar phrases and reparses to an "
               f"isomorphic image ({st.symbol_count} symbols, "
               f"{st.pair_count} pairs)")


@main.command()
@click.option("--seed", envvar="PANTA_SEED", default=None, help=SEED_HELP)
@click.option("--listen", default="127.0.0.1:7420", show_default=True,
              help="host:port for the framed TCP protocol.")
@click.option("--ws", "ws_port", type=int, default=None,
              help="Also serve the web-socket gateway on this port.")
@click.option("--log", "log_path", type=click.Path(dir_okay=False),
              default=None, help="Append commit log lines to this file.")
@click.option("--start-form", default=None,
              help="Form pushed on login (default: first form with an "
                   "entree).")
def serve(seed, listen, ws_port, log_path, start_form):
    """Serve the image to connected clients."""
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise click.ClickException(f"--listen wants host:port, got {listen!r}")
    kernel = Kernel(_load(seed), log_path=log_path, start_form=start_form)
    server = serve_tcp(kernel, host, int(port))
    click.echo(f"serving on {server.server_address[0]}:"
               f"{server.server_address[1]}")
    if ws_port is not None:
        gateway = serve_ws(kernel, host, ws_port)
        threading.Thread(target=gateway.serve_forever, daemon=True).start()
        click.echo(f"web-socket gateway on {host}:{ws_port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        click.echo("shutting down")
    finally:
        server.server_close()


@main.command()
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", envvar="PANTA_SEED", default=None, help=SEED_HELP)
@click.option("--book", default=None,
              help="Book receiving the utterances (default: follows Book "
                   "declarations, else the last book).")
def parse(source, seed, book):
    """Parse a source file into the image and report what changed."""
    image = _load(seed)
    v0 = image.snapshot()
    target = None
    if book is not None:
        target = book_named(v0, book)
        if target is None:
            raise click.ClickException(f"no book named {book!r}")
    if target is None:
        all_books = books(v0)
        target = all_books[-1] if all_books else None
    try:
        utts = load_source(image, Path(source).read_text(encoding="utf-8"),
                           book=target)
    except FonalError as e:
        raise click.ClickException(f"{source}: {e}")
    v1 = image.snapshot()
    click.echo(f"parsed {len(utts)} utterance(s): "
               f"+{len(v1.symbols - v0.symbols)} symbols, "
               f"+{len(v1.pairs - v0.pairs)} pairs "
               f"(version {v0.version} -> {v1.version})")
    click.echo(json.dumps(stats(v1).as_dict(), sort_keys=True))


@main.command()
@click.option("--seed", envvar="PANTA_SEED", default=None, help=SEED_HELP)
@click.option("--book", default=None, help="Only this book.")
def phrase(seed, book):
    """Render the stored knowledge back to language."""
    v = _load(seed).snapshot()
    selected = books(v)
    if book is not None:
        b = book_named(v, book)
        if b is None:
            raise click.ClickException(f"no book named {book!r}")
        selected = [b]
    for b in selected:
        click.echo(f"// {v.name_of(b)}")
        for u in book_utterances(v, b):
            try:
                click.echo(phrase_utterance(load_utterance(v, u), v))
            except PantaError as e:
                click.echo(f"// unphraseable #{u}: {e}", err=True)


@main.command(name="rebuild")
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--seed", envvar="PANTA_SEED", default=None, help=SEED_HELP)
def rebuild_cmd(out_dir, seed):
    """Write the image back out as a seed corpus that reproduces it."""
    v = _load(seed).snapshot()
    try:
        written = rebuild(v, Path(out_dir))
    except OSError as e:
        raise click.ClickException(str(e))
    for path in written:
        click.echo(str(path))


@main.command(name="stats")
@click.option("--seed", envvar="PANTA_SEED", default=None, help=SEED_HELP)
def stats_cmd(seed):
    """One JSON object of image statistics on stdout."""
    v = _load(seed).snapshot()
    payload = stats(v).as_dict()
    payload["version"] = v.version
    payload["books"] = {v.name_of(b) or f"#{b}": len(book_utterances(v, b))
                        for b in books(v)}
    click.echo(json.dumps(payload, sort_keys=True))


@main.command()
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--seed", envvar="PANTA_SEED", default=None, help=SEED_HELP)
def report(out_dir, seed):
    """Write CSV tables and PNG charts describing the image."""
    v = _load(seed).snapshot()
    try:
        written = report_mod.write_report(v, Path(out_dir))
    except OSError as e:
        raise click.ClickException(str(e))
    for path in written:
        click.echo(str(path))


@main.command()
@click.option("--seed", envvar="PANTA_SEED", default=None, help=SEED_HELP)
def repl(seed):
    """Parse utterances interactively against a local image.

    Commands: :stats, :phrase SYMBOL, :delete SYMBOL, :quit.
    """
    image = _load(seed)
    click.echo("type utterances; :quit leaves")
    while True:
        try:
            line = input("panta> ").strip()
        except EOFError:
            break
        if not line:
            continue
        if line in (":quit", ":q"):
            break
        if line == ":stats":
            click.echo(json.dumps(stats(image.snapshot()).as_dict(),
                                  sort_keys=True))
            continue
        if line.startswith(":phrase"):
            _repl_phrase(image, line)
            continue
        if line.startswith(":delete"):
            _repl_delete(image, line)
            continue
        try:
            utts = load_source(image, line)
            for utt in utts:
                click.echo(f"#{utt.symbol} {utt.category}")
        except PantaError as e:
            click.echo(f"error: {e}", err=True)


def _repl_sym(line: str) -> int | None:
    parts = line.split()
    if len(parts) != 2 or not parts[1].lstrip("#").isdigit():
        click.echo("usage: :phrase SYMBOL / :delete SYMBOL", err=True)
        return None
    return int(parts[1].lstrip("#"))


def _repl_phrase(image, line: str) -> None:
    sym = _repl_sym(line)
    if sym is None:
        return
    v = image.snapshot()
    try:
        click.echo(phrase_utterance(load_utterance(v, sym), v))
    except PantaError as e:
        click.echo(f"error: {e}", err=True)


def _repl_delete(image, line: str) -> None:
    sym = _repl_sym(line)
    if sym is None:
        return
    from .fonal import delete_into
    v = image.snapshot()
    try:
        b = image.begin(v)
        delete_into(b, sym)
        image.advance(b.build())
        click.echo(f"deleted #{sym}")
    except PantaError as e:
        click.echo(f"error: {e}", err=True)


if __name__ == "__main__":
    main()
