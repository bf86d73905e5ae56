"""Sessions, dispatch, and pushes: the client-server layer.

The kernel owns the committed image (through the commit engine) and the
set of logged-in sessions. A session is one client: its own execution
path, its selections, and an outbox its connection drains. Clients hold
no image logic — everything they know arrived as a ServerMessage.

All writes funnel through the engine's single-writer queue. After every
commit the kernel re-evaluates, for each session, each open component
whose set may have changed, and pushes whole updated sets plus re-rendered
form specs. A client connected before a commit therefore converges to the
committed state without sending a single message.
"""

from __future__ import annotations

import itertools
import json
import queue
import socketserver
import threading
from dataclasses import dataclass, field
from typing import Optional

from . import forms, protocol
from .bootstrap import book_named, books
from .commit import (CRAWL_BACK, DELETED_UTTERANCE, DESIGNER_ACTION,
                     PARSED_UTTERANCE, CommitEngine, CommitOutcome,
                     CommitRequest, SessionHandle)
from .errors import (AuthFailed, CrawlBack, FonalError, GuardViolation,
                     MalformedMessage, PantaError, StoreError)
from .evaluator import (CLIENT, COMPONENT, FORM, Binding, Evaluator)
from .fonal import (delete_into, is_utterance, load_utterance, parse_into,
                    split_utterances, tokenize)
from .fonal import syntax as syn
from .fonal.storage import append_member
from .store import Image, ImageVersion, OUT, RelationKind

C = RelationKind.CLASSIFICATION

ABORT_TEXT = "the action can not be performed"


@dataclass
class Session:
    """One logged-in client and everything the kernel tracks for it."""

    id: str
    user: str
    handle: SessionHandle
    outbox: "queue.Queue" = field(default_factory=queue.Queue)
    lock: threading.RLock = field(default_factory=threading.RLock)
    client_view: set = field(default_factory=set)
    selections: dict = field(default_factory=dict)   # component → symbol
    open_forms: dict = field(default_factory=dict)   # form → spec symbols
    open_components: dict = field(default_factory=dict)  # component → form
    last_sets: dict = field(default_factory=dict)    # component → frozenset
    closed: bool = False


class Kernel:
    """The served application: one image, one engine, many sessions."""

    def __init__(self, image: Image, log_path=None,
                 start_form: Optional[str] = None):
        self._image = image
        self.engine = CommitEngine(image, log_path)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._seq = itertools.count(1)
        self._start_form_name = start_form

    # ── sessions ─────────────────────────────────────────────────────────────

    def version(self) -> ImageVersion:
        return self.engine.version()

    def open_session(self, user: str) -> Session:
        if not isinstance(user, str) or not user.strip():
            raise AuthFailed("a non-empty user name is required")
        sid = f"{user.strip()}#{next(self._seq)}"
        session = Session(sid, user.strip(), self.engine.register(sid))
        with self._lock:
            self._sessions[sid] = session
        v = self.version()
        start = self.start_form(v)
        if start is not None:
            with session.lock:
                for msg in self._open_form(session, start, v):
                    session.outbox.put(msg)
        return session

    def close_session(self, session: Session) -> None:
        with self._lock:
            self._sessions.pop(session.id, None)
        self.engine.unregister(session.id)
        session.closed = True

    def sessions(self) -> list[Session]:
        with self._lock:
            return list(self._sessions.values())

    def start_form(self, v: ImageVersion) -> Optional[int]:
        """The form pushed on login: by name if configured, else the first
        declared form that opens a function, else the first form."""
        if self._start_form_name:
            hits = v.named(self._start_form_name)
            return min(hits) if hits else None
        all_forms = forms.component_forms(v)
        with_entree = [f for f in all_forms if self._opens_function(v, f)]
        candidates = with_entree or all_forms
        return candidates[0] if candidates else None

    def _opens_function(self, v: ImageVersion, form: int) -> bool:
        return any(verb.lower() == "opens"
                   for _vp, verb, _obj in forms._has_sentences(v, form))

    # ── dispatch ─────────────────────────────────────────────────────────────

    def dispatch(self, session: Session, msg) -> list:
        if session.closed:
            return [protocol.Error("protocol", "session is closed")]
        if isinstance(msg, protocol.Login):
            return [protocol.Error("protocol", "already logged in")]
        if isinstance(msg, protocol.Logout):
            self.close_session(session)
            return []
        if isinstance(msg, protocol.Select):
            return self._on_select(session, msg)
        if isinstance(msg, protocol.Click):
            return self._on_click(session, msg.component, "OnClick")
        if isinstance(msg, protocol.DbClick):
            return self._on_click(session, msg.component, "OnDbClick")
        if isinstance(msg, protocol.OpenForm):
            with session.lock:
                return self._open_form(session, msg.form, self.version())
        if isinstance(msg, protocol.ParseText):
            return self._on_parse(session, msg.text)
        if isinstance(msg, protocol.DeleteUtterance):
            return self._on_delete(session, msg.symbol)
        if isinstance(msg, protocol.DesignerOp):
            return self._on_designer(session, msg.op, msg.args)
        return [protocol.Error("protocol",
                               f"unhandled message {type(msg).__name__}")]

    # selection ───────────────────────────────────────────────────────────────

    def _on_select(self, session: Session, msg: protocol.Select) -> list:
        v = self.version()
        comp, sym = msg.component, msg.symbol
        if forms.component_kind(v, comp) is None:
            return [protocol.Error("unknown-component", f"#{comp}")]
        if not v.live(sym):
            return [protocol.Error("unknown-symbol", f"#{sym}")]
        with session.lock:
            session.selections[comp] = sym
            replies = [protocol.SelectionEcho(component=comp, symbol=sym)]
            handler = forms.event_bindings(v, comp).get("OnSelChange")
            if handler is not None:
                form = session.open_components.get(comp)
                status, value = self._run_event(
                    session, form, comp, "OnSelChange", handler, sym, v)
                if status == "aborted":
                    replies.append(protocol.ActionAborted(reason=value))
                elif status == "error":
                    replies.append(protocol.Error("eval", str(value)))
            replies.extend(self._chain_targets(session, comp, v, set()))
            self._note_pushed(session, replies, v)
        return replies

    def _chain_targets(self, session: Session, comp: int, v: ImageVersion,
                       seen: set) -> list:
        """Re-evaluate open context targets of comp; a target whose new set
        drops its selection loses it, and the chain continues below it."""
        out = []
        for target in forms.feeds_targets(v, comp):
            if target in seen or target not in session.open_components:
                continue
            seen.add(target)
            update = self._component_update(session, target, v)
            if update is not None:
                out.append(update)
                if session.selections.get(target) not in update.symbols:
                    session.selections.pop(target, None)
                    out.extend(self._chain_targets(session, target, v, seen))
        return out

    # clicks ──────────────────────────────────────────────────────────────────

    def _on_click(self, session: Session, comp: int, event: str) -> list:
        v = self.version()
        if forms.component_kind(v, comp) is None:
            return [protocol.Error("unknown-component", f"#{comp}")]
        handler = forms.event_bindings(v, comp).get(event)
        if handler is None:
            return []
        with session.lock:
            form = session.open_components.get(comp)
            ctx = session.selections.get(comp)
            status, value = self._run_event(session, form, comp, event,
                                            handler, ctx, v)
        if status == "aborted":
            return [protocol.ActionAborted(reason=value)]
        if status == "error":
            return [protocol.Error("eval", str(value))]
        return []

    def _run_event(self, session: Session, form: Optional[int], comp: int,
                   event: str, handler: int, ctx: Optional[int],
                   v: ImageVersion):
        """Evaluate a bound handler on the session's execution context,
        fenced at yield points; one crawl-back retry from the main entry."""
        handle = session.handle
        event_sym = forms.event_kinds(v).get(event)
        handle.origin_form = form
        try:
            while True:
                ev = Evaluator(self.engine.version(), Binding(this=ctx),
                               path=handle.path,
                               yield_hook=self.engine.yield_hook(handle))
                try:
                    with handle.path.entered(CLIENT, None), \
                         handle.path.entered(FORM, form), \
                         handle.path.entered(COMPONENT, comp):
                        value = ev.eval_event(event_sym, handler)
                    handle.flag = False
                    return ("ok", value)
                except CrawlBack:
                    policy = self.engine.resume_policy(handle)
                    handle.flag = False
                    if policy == CRAWL_BACK:
                        handle.retried = True
                        continue
                    return ("aborted", ABORT_TEXT)
                except PantaError as e:
                    if handle.retried:
                        return ("aborted", ABORT_TEXT)
                    return ("error", e)
        finally:
            handle.origin_form = None
            handle.retried = False

    # parsing and deleting ────────────────────────────────────────────────────

    def _on_parse(self, session: Session, text: str) -> list:
        v = self.version()
        b = self._image.begin(v)
        book = self._default_book(v)
        try:
            for group in split_utterances(tokenize(text)):
                utt = parse_into(group, b)
                opened = _book_opened_by(b, utt)
                if opened is not None:
                    book = opened
                elif book is not None:
                    append_member(b, book, utt.symbol)
        except FonalError as e:
            return [protocol.Error("syntax", str(e))]
        return self._commit_and_push(session, b.build(), PARSED_UTTERANCE)

    def _on_delete(self, session: Session, symbol: int) -> list:
        v = self.version()
        if not is_utterance(v, symbol):
            return [protocol.Error("not-an-utterance", f"#{symbol}")]
        b = self._image.begin(v)
        delete_into(b, symbol)
        return self._commit_and_push(session, b.build(), DELETED_UTTERANCE)

    def _default_book(self, v: ImageVersion) -> Optional[int]:
        all_books = books(v)
        return all_books[-1] if all_books else None

    # designer ops ────────────────────────────────────────────────────────────

    # wire argument name → keyword of the forms function, per op
    _DESIGNER_OPS = {
        "define": (forms.define_component,
                   {"kind": "kind", "name": "name", "parent": "parent",
                    "props": "props", "book": "book"},
                   ("kind", "name")),
        "remove": (forms.remove_component, {"component": "c"},
                   ("component",)),
        "set_property": (forms.set_property,
                         {"component": "c", "property": "prop",
                          "value": "value"},
                         ("component", "property", "value")),
        "bind_event": (forms.bind_event,
                       {"component": "c", "event": "kind",
                        "handler": "handler"},
                       ("component", "event", "handler")),
        "set_context": (forms.set_context,
                        {"source": "source", "target": "target"},
                        ("source", "target")),
    }

    def _on_designer(self, session: Session, op: str, args: dict) -> list:
        entry = self._DESIGNER_OPS.get(op)
        if entry is None:
            return [protocol.Error("designer", f"unknown op {op!r}")]
        fn, names, required = entry
        missing = [n for n in required if n not in args]
        if missing:
            return [protocol.Error(
                "designer", f"{op} is missing {', '.join(missing)}")]
        v = self.version()
        kwargs = {param: args[wire] for wire, param in names.items()
                  if wire in args}
        try:
            change = fn(self._image, v, **kwargs)
        except GuardViolation as e:
            return [protocol.ActionAborted(reason=str(e))]
        except PantaError as e:
            return [protocol.Error("designer", str(e))]
        return self._commit_and_push(session, change.delta, DESIGNER_ACTION)

    # committing ──────────────────────────────────────────────────────────────

    def _commit_and_push(self, session: Session, delta, origin: str) -> list:
        try:
            outcome = self.engine.commit(
                CommitRequest(session.id, delta, origin))
        except GuardViolation as e:
            return [protocol.ActionAborted(reason=str(e))]
        except (StoreError, PantaError) as e:
            return [protocol.Error("commit", str(e))]
        return self.push_updates(outcome, reply_to=session)

    def push_updates(self, outcome: CommitOutcome,
                     reply_to: Optional[Session] = None) -> list:
        """Fan a committed change out to every session; the committer's own
        messages are returned instead of queued."""
        v = outcome.version
        expanded = set(outcome.affected)
        for a in outcome.affected:
            if v.live(a):
                expanded |= self._class_ancestors(v, a)
        replies: list = []
        for session in self.sessions():
            with session.lock:
                msgs = self._session_updates(session, v, expanded)
            if reply_to is not None and session.id == reply_to.id:
                replies = msgs
            else:
                for m in msgs:
                    session.outbox.put(m)
        return replies

    def _class_ancestors(self, v: ImageVersion, s: int) -> set:
        seen, frontier = set(), [s]
        while frontier:
            cur = frontier.pop()
            for nxt in v.neighbors(cur, C, OUT):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen

    def _session_updates(self, session: Session, v: ImageVersion,
                         expanded: set) -> list:
        msgs: list = []
        session.selections = {c: s for c, s in session.selections.items()
                              if v.live(c) and v.live(s)}
        for form in list(session.open_forms):
            if not v.live(form):
                self._drop_form(session, form)
                continue
            if expanded & session.open_forms[form]:
                msgs.extend(self._render_form(session, form, v))
        for comp, form in list(session.open_components.items()):
            if not v.live(comp):
                session.open_components.pop(comp, None)
                session.last_sets.pop(comp, None)
                continue
            if self._needs_reeval(session, comp, expanded, v):
                update = self._component_update(session, comp, v)
                if update is not None:
                    msgs.append(update)
        msgs.append(protocol.CommitNotice(version=v.version))
        self._note_pushed(session, msgs, v)
        return msgs

    def _needs_reeval(self, session: Session, comp: int, expanded: set,
                      v: ImageVersion) -> bool:
        prev = session.last_sets.get(comp, frozenset())
        if expanded & prev:
            return True
        sel = session.selections.get(comp)
        if sel is not None and sel in expanded:
            return True
        refs = {comp} | self._handler_refs(v, comp)
        return bool(expanded & refs)

    def _handler_refs(self, v: ImageVersion, comp: int) -> set:
        """The domain anchors a component's set query depends on: its
        nouns, proper referents and adjectives. Structural vocabulary
        (quantors, prepositions) is shared by every query and would make
        every commit look relevant."""
        handler = forms.event_bindings(v, comp).get("OnGetSet")
        if handler is None:
            return set()
        refs = {handler}
        try:
            utt = load_utterance(v, handler)
        except PantaError:
            return refs

        def walk(node):
            if node.referent is not None and node.referent > 0 \
                    and node.category in (syn.SUBJ, syn.ADJ):
                refs.add(node.referent)
            for child in node.children:
                walk(child)
        walk(utt.root)
        return refs

    # opening and rendering forms ─────────────────────────────────────────────

    def _open_form(self, session: Session, form: int, v: ImageVersion) -> list:
        if forms.component_kind(v, form) != "Form":
            return [protocol.Error("unknown-form", f"#{form}")]
        msgs = self._render_form(session, form, v)
        for comp in list(session.open_components):
            if session.open_components[comp] == form:
                update = self._component_update(session, comp, v)
                if update is not None:
                    msgs.append(update)
        self._note_pushed(session, msgs, v)
        return msgs

    def _render_form(self, session: Session, form: int,
                     v: ImageVersion) -> list:
        spec = forms.render_spec(form, v)
        spec_dict = spec.as_dict()
        symbols = self._spec_symbols(spec_dict)
        session.open_forms[form] = symbols
        present = set()

        def register(d):
            present.add(d["symbol"])
            session.open_components[d["symbol"]] = form
            for child in d["children"]:
                register(child)
        register(spec_dict)
        for comp in list(session.open_components):
            if session.open_components[comp] == form and comp not in present:
                session.open_components.pop(comp)
                session.last_sets.pop(comp, None)
        return [protocol.FormSpecPush(form=form, spec=spec_dict)]

    def _drop_form(self, session: Session, form: int) -> None:
        session.open_forms.pop(form, None)
        for comp in [c for c, f in session.open_components.items()
                     if f == form]:
            session.open_components.pop(comp, None)
            session.last_sets.pop(comp, None)

    def _spec_symbols(self, spec_dict: dict) -> frozenset:
        syms = set()

        def walk(d):
            syms.add(d["symbol"])
            for e in d["events"].values():
                syms.add(e["handler"])
            syms.update(d["feeds"])
            for child in d["children"]:
                walk(child)
        walk(spec_dict)
        return frozenset(syms)

    def _component_update(self, session: Session, comp: int,
                          v: ImageVersion) -> Optional[protocol.SetUpdate]:
        """The component's freshly evaluated set, context applied."""
        handler = forms.event_bindings(v, comp).get("OnGetSet")
        if handler is None:
            return None
        source = forms.feeds_source(v, comp)
        ctx = session.selections.get(source) if source is not None else None
        try:
            value = Evaluator(v, Binding(this=ctx)).eval_event(None, handler)
            syms = value if isinstance(value, frozenset) else frozenset()
        except PantaError:
            syms = frozenset()
        syms = frozenset(s for s in syms if v.live(s))
        session.last_sets[comp] = syms
        ordered = tuple(sorted(syms))
        return protocol.SetUpdate(
            component=comp,
            symbols=ordered,
            names=tuple(v.name_of(s) for s in ordered),
            states=tuple(v.state_of(s).value for s in ordered),
        )

    def _note_pushed(self, session: Session, msgs: list,
                     v: ImageVersion) -> None:
        """Track what the client has seen; its view never outgrows the
        image (client images nest inside the server image)."""
        pushed = set()
        for m in msgs:
            if isinstance(m, protocol.SetUpdate):
                pushed.update(m.symbols)
                pushed.add(m.component)
            elif isinstance(m, protocol.FormSpecPush):
                pushed |= self._spec_symbols(m.spec)
        assert pushed <= v.symbols, "pushed symbols must be live"
        session.client_view |= pushed
        session.client_view &= v.symbols
        assert session.client_view <= v.symbols


def _book_opened_by(view, utt) -> Optional[int]:
    from .fonal import syntax as syn
    if utt.category != syn.GRAMMAR or not utt.root.children:
        return None
    cat = utt.root.children[0].referent
    if cat is None or (view.name_of(cat) or "").lower() != "book":
        return None
    return utt.root.children[1].referent


# ── transports ────────────────────────────────────────────────────────────────

_CLOSE = object()


class KernelServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, kernel: Kernel):
        super().__init__(address, _Connection)
        self.kernel = kernel


class _Connection(socketserver.BaseRequestHandler):
    """One TCP client: login handshake, then a reader loop dispatching
    messages while a writer thread drains the session outbox."""

    def handle(self):
        sock = self.request
        kernel: Kernel = self.server.kernel
        session = None
        writer = None
        try:
            session = self._login(kernel, sock)
            if session is None:
                return
            writer = threading.Thread(
                target=self._drain, args=(session, sock), daemon=True)
            writer.start()
            while True:
                try:
                    obj = protocol.read_frame(sock)
                except MalformedMessage as e:
                    session.outbox.put(protocol.Error("malformed", str(e)))
                    break
                except OSError:
                    break
                if obj is None:
                    break
                try:
                    msg = protocol.client_from_wire(obj)
                except MalformedMessage as e:
                    session.outbox.put(protocol.Error("malformed", str(e)))
                    continue
                if isinstance(msg, protocol.Logout):
                    break
                try:
                    replies = kernel.dispatch(session, msg)
                except PantaError as e:
                    replies = [protocol.Error("internal", str(e))]
                for reply in replies:
                    session.outbox.put(reply)
        finally:
            if session is not None:
                kernel.close_session(session)
                session.outbox.put(_CLOSE)
                if writer is not None:
                    writer.join(timeout=2)

    def _login(self, kernel: Kernel, sock) -> Optional[Session]:
        try:
            obj = protocol.read_frame(sock)
            if obj is None:
                return None
            msg = protocol.client_from_wire(obj)
        except MalformedMessage as e:
            self._safe_send(sock, protocol.Error("malformed", str(e)))
            return None
        if not isinstance(msg, protocol.Login):
            self._safe_send(sock, protocol.Error("protocol", "log in first"))
            return None
        try:
            return kernel.open_session(msg.user)
        except AuthFailed as e:
            self._safe_send(sock, protocol.Error("auth", str(e)))
            return None

    @staticmethod
    def _safe_send(sock, msg) -> None:
        try:
            protocol.write_frame(sock, msg)
        except OSError:
            pass

    @staticmethod
    def _drain(session: Session, sock) -> None:
        while True:
            msg = session.outbox.get()
            if msg is _CLOSE:
                return
            try:
                protocol.write_frame(sock, msg)
            except OSError:
                return


def serve_tcp(kernel: Kernel, host: str = "127.0.0.1",
              port: int = 0) -> KernelServer:
    """A ready ThreadingTCPServer; the caller runs serve_forever()."""
    return KernelServer((host, port), kernel)


def serve_ws(kernel: Kernel, host: str = "127.0.0.1", port: int = 8765):
    """The same sessions over web-sockets: one JSON object per ws message,
    no length prefix (the socket has its own framing)."""
    from websockets.sync.server import serve

    def handler(ws):
        session = None
        writer = None
        try:
            session = _ws_login(kernel, ws)
            if session is None:
                return
            writer = threading.Thread(
                target=_ws_drain, args=(session, ws), daemon=True)
            writer.start()
            while True:
                try:
                    raw = ws.recv()
                except Exception:
                    break
                try:
                    msg = protocol.client_from_wire(json.loads(raw))
                except (MalformedMessage, ValueError) as e:
                    session.outbox.put(protocol.Error("malformed", str(e)))
                    continue
                if isinstance(msg, protocol.Logout):
                    break
                try:
                    replies = kernel.dispatch(session, msg)
                except PantaError as e:
                    replies = [protocol.Error("internal", str(e))]
                for reply in replies:
                    session.outbox.put(reply)
        finally:
            if session is not None:
                kernel.close_session(session)
                session.outbox.put(_CLOSE)
                if writer is not None:
                    writer.join(timeout=2)

    return serve(handler, host, port)


def _ws_login(kernel: Kernel, ws) -> Optional[Session]:
    try:
        msg = protocol.client_from_wire(json.loads(ws.recv()))
    except Exception as e:
        _ws_safe_send(ws, protocol.Error("malformed", str(e)))
        return None
    if not isinstance(msg, protocol.Login):
        _ws_safe_send(ws, protocol.Error("protocol", "log in first"))
        return None
    try:
        return kernel.open_session(msg.user)
    except AuthFailed as e:
        _ws_safe_send(ws, protocol.Error("auth", str(e)))
        return None


def _ws_drain(session: Session, ws) -> None:
    while True:
        msg = session.outbox.get()
        if msg is _CLOSE:
            return
        try:
            ws.send(json.dumps(protocol.to_wire(msg), sort_keys=True,
                               separators=(",", ":")))
        except Exception:
            return


def _ws_safe_send(ws, msg) -> None:
    try:
        ws.send(json.dumps(protocol.to_wire(msg), sort_keys=True,
                           separators=(",", ":")))
    except Exception:
        pass
