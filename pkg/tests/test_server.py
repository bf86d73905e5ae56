"""The client-server layer: sessions, dispatch, pushes, and transports."""

import json
import socket
import threading
import time

import pytest

from panta import protocol as proto
from panta.bootstrap import book_named, book_utterances, load_seed
from panta.errors import AuthFailed
from panta.server import Kernel, serve_tcp


def the(v, word):
    hits = v.named(word)
    assert hits, f"no symbol named {word!r}"
    return min(hits)


def drain(session):
    out = []
    while not session.outbox.empty():
        out.append(session.outbox.get())
    return out


def only(msgs, cls):
    return [m for m in msgs if isinstance(m, cls)]


@pytest.fixture()
def kernel():
    return Kernel(load_seed())


@pytest.fixture()
def browse_kernel():
    """Sessions land on the browse form directly; its sets never include
    books, keeping push expectations small."""
    return Kernel(load_seed(), start_form="FBrowse")


# ── sessions ──────────────────────────────────────────────────────────────────

def test_login_pushes_start_form(kernel):
    s = kernel.open_session("alice")
    msgs = drain(s)
    push = only(msgs, proto.FormSpecPush)[0]
    v = kernel.version()
    assert push.spec["name"] == "FProject"
    sets = only(msgs, proto.SetUpdate)
    assert sets and sets[0].names == ("Language", "Interface",
                                      "Workbench", "Demo")


def test_two_sessions_are_independent(kernel):
    a = kernel.open_session("alice")
    b = kernel.open_session("bob")
    assert a.id != b.id
    v = kernel.version()
    kernel.dispatch(a, proto.Select(component=the(v, "TProject"),
                                    symbol=the(v, "Demo")))
    assert the(v, "TProject") in a.selections
    assert b.selections == {}


def test_empty_login_rejected(kernel):
    with pytest.raises(AuthFailed):
        kernel.open_session("")
    with pytest.raises(AuthFailed):
        kernel.open_session("   ")


def test_dispatch_after_close(kernel):
    s = kernel.open_session("alice")
    kernel.dispatch(s, proto.Logout())
    replies = kernel.dispatch(s, proto.Click(component=1))
    assert only(replies, proto.Error)


def test_second_login_is_an_error(kernel):
    s = kernel.open_session("alice")
    replies = kernel.dispatch(s, proto.Login(user="alice"))
    assert only(replies, proto.Error)


# ── opening forms ─────────────────────────────────────────────────────────────

def test_open_form_pushes_spec_and_sets(kernel):
    s = kernel.open_session("alice")
    drain(s)
    v = kernel.version()
    msgs = kernel.dispatch(s, proto.OpenForm(form=the(v, "FBrowse")))
    push = only(msgs, proto.FormSpecPush)[0]
    assert [c["name"] for c in push.spec["children"]] == [
        "LSubjects", "LMembers"]
    sets = {m.component: m for m in only(msgs, proto.SetUpdate)}
    subjects = sets[the(v, "LSubjects")]
    assert "Patients" in subjects.names and "Trials" in subjects.names
    assert sets[the(v, "LMembers")].symbols == ()


def test_open_form_rejects_non_form(kernel):
    s = kernel.open_session("alice")
    drain(s)
    v = kernel.version()
    for bad in (999999, the(v, "LSubjects"), the(v, "Patients")):
        replies = kernel.dispatch(s, proto.OpenForm(form=bad))
        assert only(replies, proto.Error)


# ── selection and context chaining ────────────────────────────────────────────

def test_select_echo_and_chain(browse_kernel):
    kernel = browse_kernel
    s = kernel.open_session("alice")
    drain(s)
    v = kernel.version()
    msgs = kernel.dispatch(s, proto.Select(component=the(v, "LSubjects"),
                                           symbol=the(v, "Patients")))
    assert only(msgs, proto.SelectionEcho)[0].symbol == the(v, "Patients")
    members = only(msgs, proto.SetUpdate)[0]
    assert members.component == the(v, "LMembers")
    assert set(members.names) == {"Patient1", "Patient2", "Patient3"}


def test_select_other_subject_changes_chain(browse_kernel):
    kernel = browse_kernel
    s = kernel.open_session("alice")
    drain(s)
    v = kernel.version()
    kernel.dispatch(s, proto.Select(component=the(v, "LSubjects"),
                                    symbol=the(v, "Patients")))
    msgs = kernel.dispatch(s, proto.Select(component=the(v, "LSubjects"),
                                           symbol=the(v, "Trials")))
    members = only(msgs, proto.SetUpdate)[0]
    assert set(members.names) == {"Trial1", "Trial2"}


def test_select_unknown_component(kernel):
    s = kernel.open_session("alice")
    drain(s)
    replies = kernel.dispatch(s, proto.Select(component=424242, symbol=1))
    assert only(replies, proto.Error)[0].code == "unknown-component"


def test_select_dead_symbol(kernel):
    s = kernel.open_session("alice")
    drain(s)
    v = kernel.version()
    replies = kernel.dispatch(
        s, proto.Select(component=the(v, "LSubjects"), symbol=10 ** 9))
    assert only(replies, proto.Error)[0].code == "unknown-symbol"


def test_stale_downstream_selection_dropped(browse_kernel):
    kernel = browse_kernel
    s = kernel.open_session("alice")
    drain(s)
    v = kernel.version()
    ls, lm = the(v, "LSubjects"), the(v, "LMembers")
    kernel.dispatch(s, proto.Select(component=ls, symbol=the(v, "Patients")))
    kernel.dispatch(s, proto.Select(component=lm, symbol=the(v, "Patient1")))
    assert s.selections[lm] == the(v, "Patient1")
    kernel.dispatch(s, proto.Select(component=ls, symbol=the(v, "Trials")))
    assert lm not in s.selections


def test_selection_isolation_between_sessions(browse_kernel):
    kernel = browse_kernel
    a = kernel.open_session("alice")
    b = kernel.open_session("bob")
    drain(a), drain(b)
    v = kernel.version()
    kernel.dispatch(a, proto.Select(component=the(v, "LSubjects"),
                                    symbol=the(v, "Patients")))
    drain(a)
    kernel.dispatch(b, proto.Select(component=the(v, "LSubjects"),
                                    symbol=the(v, "Trials")))
    assert drain(a) == []     # selections are not commits; nothing crosses
    assert a.selections[the(v, "LSubjects")] == the(v, "Patients")


# ── clicks ────────────────────────────────────────────────────────────────────

def test_click_without_handler_is_noop(kernel):
    s = kernel.open_session("alice")
    drain(s)
    v = kernel.version()
    assert kernel.dispatch(s, proto.Click(component=the(v, "TProject"))) == []


def test_click_runs_bound_expression(browse_kernel):
    kernel = browse_kernel
    s = kernel.open_session("alice")
    drain(s)
    v = kernel.version()
    kernel.dispatch(s, proto.ParseText(
        text="'EClick' X = 'MyProc'(). "
             "ListView: LSubjects OnClick Expression: EClick."))
    drain(s)
    v = kernel.version()
    replies = kernel.dispatch(s, proto.Click(component=the(v, "LSubjects")))
    assert replies == []
    assert s.handle.path.at_main()
    assert not s.handle.flag and not s.handle.retried


def test_click_flagged_session_retries_once(browse_kernel):
    kernel = browse_kernel
    s = kernel.open_session("alice")
    drain(s)
    kernel.dispatch(s, proto.ParseText(
        text="'EClick' X = 'MyProc'(). "
             "ListView: LSubjects OnClick Expression: EClick."))
    drain(s)
    v = kernel.version()
    s.handle.flag = True
    replies = kernel.dispatch(s, proto.Click(component=the(v, "LSubjects")))
    assert replies == []
    assert not s.handle.flag and not s.handle.retried
    assert s.handle.path.at_main()


def test_click_flagged_after_retry_aborts(browse_kernel):
    kernel = browse_kernel
    s = kernel.open_session("alice")
    drain(s)
    kernel.dispatch(s, proto.ParseText(
        text="'EClick' X = 'MyProc'(). "
             "ListView: LSubjects OnClick Expression: EClick."))
    drain(s)
    v = kernel.version()
    s.handle.flag = True
    s.handle.retried = True
    replies = kernel.dispatch(s, proto.Click(component=the(v, "LSubjects")))
    aborted = only(replies, proto.ActionAborted)
    assert aborted and "performed" in aborted[0].reason
    assert s.handle.path.at_main()


def test_click_deleted_handler_is_reported(browse_kernel):
    kernel = browse_kernel
    s = kernel.open_session("alice")
    b = kernel.open_session("bob")
    drain(s)
    kernel.dispatch(s, proto.ParseText(
        text="'EClick' X = 'MyProc'(). "
             "ListView: LSubjects OnClick Expression: EClick."))
    drain(s)
    v = kernel.version()
    proc = the(v, "MyProc")
    kernel.dispatch(b, proto.DeleteUtterance(symbol=proc))
    drain(s)
    v = kernel.version()
    assert not v.named("MyProc")
    replies = kernel.dispatch(s, proto.Click(component=the(v, "LSubjects")))
    assert only(replies, proto.Error) or only(replies, proto.ActionAborted)
    assert s.handle.path.at_main()


def test_concurrent_delete_during_click(browse_kernel):
    """A racing deletion either loses (click completes) or wins (crawl-back
    handles it); never a crash, never a stuck path."""
    kernel = browse_kernel
    s = kernel.open_session("alice")
    b = kernel.open_session("bob")
    drain(s)
    kernel.dispatch(s, proto.ParseText(
        text="'EClick' X = 'MyProc'(). "
             "ListView: LSubjects OnClick Expression: EClick."))
    drain(s)
    v = kernel.version()
    ls = the(v, "LSubjects")
    proc = the(v, "MyProc")
    out = {}

    def clicker():
        out["replies"] = kernel.dispatch(s, proto.Click(component=ls))

    t = threading.Thread(target=clicker)
    t.start()
    kernel.dispatch(b, proto.DeleteUtterance(symbol=proc))
    t.join(timeout=10)
    assert not t.is_alive()
    for m in out["replies"]:
        assert isinstance(m, (proto.ActionAborted, proto.Error))
    assert s.handle.path.at_main()
    assert not s.handle.flag


# ── parse and delete ──────────────────────────────────────────────────────────

def test_parse_text_commits_and_notifies(browse_kernel):
    kernel = browse_kernel
    s = kernel.open_session("alice")
    drain(s)
    v0 = kernel.version()
    replies = kernel.dispatch(s, proto.ParseText(text="Patients Pat9."))
    notice = only(replies, proto.CommitNotice)
    assert notice and notice[0].version == v0.version + 1
    subjects = [m for m in only(replies, proto.SetUpdate)
                if "Pat9" in m.names]
    assert subjects
    v = kernel.version()
    book = book_named(v, "Demo")
    texts = book_utterances(v, book)
    assert any(v.live(u) for u in texts)


def test_parse_syntax_error(kernel):
    s = kernel.open_session("alice")
    drain(s)
    replies = kernel.dispatch(s, proto.ParseText(text="All the king's men"))
    err = only(replies, proto.Error)
    assert err and err[0].code == "syntax"
    assert kernel.version().version == load_seed().snapshot().version


def test_delete_utterance_round_trip(browse_kernel):
    kernel = browse_kernel
    s = kernel.open_session("alice")
    drain(s)
    kernel.dispatch(s, proto.ParseText(text="Patients Pat9."))
    v = kernel.version()
    book = book_named(v, "Demo")
    target = book_utterances(v, book)[-1]
    replies = kernel.dispatch(s, proto.DeleteUtterance(symbol=target))
    assert only(replies, proto.CommitNotice)
    v2 = kernel.version()
    assert not v2.named("Pat9")
    sets = [m for m in only(replies, proto.SetUpdate)]
    assert all("Pat9" not in m.names for m in sets)


def test_delete_non_utterance(kernel):
    s = kernel.open_session("alice")
    drain(s)
    v = kernel.version()
    replies = kernel.dispatch(
        s, proto.DeleteUtterance(symbol=the(v, "Patients")))
    assert only(replies, proto.Error)[0].code == "not-an-utterance"


def test_delete_protected_grammar_aborts(kernel):
    s = kernel.open_session("alice")
    drain(s)
    v = kernel.version()
    lang = book_named(v, "Language")
    target = book_utterances(v, lang)[1]
    replies = kernel.dispatch(s, proto.DeleteUtterance(symbol=target))
    assert only(replies, proto.ActionAborted)
    assert kernel.version().version == v.version


# ── designer ops over the wire ────────────────────────────────────────────────

def test_designer_define_pushes_form(browse_kernel):
    kernel = browse_kernel
    a = kernel.open_session("alice")
    b = kernel.open_session("bob")
    drain(a), drain(b)
    v = kernel.version()
    replies = kernel.dispatch(b, proto.DesignerOp(op="define", args={
        "kind": "Button", "name": "BGo", "parent": the(v, "FBrowse"),
        "props": {"Caption": "Go"}}))
    assert only(replies, proto.CommitNotice)
    pushes = only(drain(a), proto.FormSpecPush)
    assert pushes
    names = [c["name"] for c in pushes[0].spec["children"]]
    assert "BGo" in names


def test_designer_remove_cascades_to_peers(browse_kernel):
    kernel = browse_kernel
    a = kernel.open_session("alice")
    b = kernel.open_session("bob")
    drain(a), drain(b)
    v = kernel.version()
    replies = kernel.dispatch(b, proto.DesignerOp(
        op="remove", args={"component": the(v, "LMembers")}))
    assert only(replies, proto.CommitNotice)
    pushes = only(drain(a), proto.FormSpecPush)
    assert pushes
    names = [c["name"] for c in pushes[-1].spec["children"]]
    assert names == ["LSubjects"]


def test_designer_set_property(browse_kernel):
    kernel = browse_kernel
    a = kernel.open_session("alice")
    b = kernel.open_session("bob")
    drain(a), drain(b)
    v = kernel.version()
    kernel.dispatch(b, proto.DesignerOp(op="set_property", args={
        "component": the(v, "FBrowse"), "property": "Caption",
        "value": "People"}))
    pushes = only(drain(a), proto.FormSpecPush)
    assert pushes[-1].spec["properties"]["Caption"] == "People"


def test_designer_bind_event_and_set_context(browse_kernel):
    kernel = browse_kernel
    s = kernel.open_session("alice")
    drain(s)
    v = kernel.version()
    replies = kernel.dispatch(s, proto.DesignerOp(op="bind_event", args={
        "component": the(v, "LMembers"), "event": "OnDbClick",
        "handler": the(v, "QSubjects")}))
    assert only(replies, proto.CommitNotice)
    replies = kernel.dispatch(s, proto.DesignerOp(op="set_context", args={
        "source": the(v, "LMembers"), "target": the(v, "LSubjects")}))
    assert only(replies, proto.Error)   # would close a context cycle


def test_designer_remove_last_entree_aborts(kernel):
    s = kernel.open_session("alice")
    drain(s)
    v = kernel.version()
    replies = kernel.dispatch(s, proto.DesignerOp(
        op="remove", args={"component": the(v, "FProject")}))
    assert only(replies, proto.ActionAborted)
    assert kernel.version().live(the(v, "FProject"))


def test_designer_unknown_op_and_missing_args(kernel):
    s = kernel.open_session("alice")
    drain(s)
    assert only(kernel.dispatch(
        s, proto.DesignerOp(op="explode", args={})), proto.Error)
    assert only(kernel.dispatch(
        s, proto.DesignerOp(op="define", args={"kind": "Button"})),
        proto.Error)


# ── pushes ────────────────────────────────────────────────────────────────────

def test_unrelated_commit_is_notice_only(browse_kernel):
    kernel = browse_kernel
    a = kernel.open_session("alice")
    b = kernel.open_session("bob")
    drain(a), drain(b)
    replies = kernel.dispatch(b, proto.ParseText(
        text="'QTemp' {All Operator}."))
    assert only(replies, proto.CommitNotice)
    passive = drain(a)
    assert [type(m).__name__ for m in passive] == ["CommitNotice"]


def test_rename_of_selected_symbol_refreshes(browse_kernel):
    kernel = browse_kernel
    a = kernel.open_session("alice")
    b = kernel.open_session("bob")
    drain(a), drain(b)
    v = kernel.version()
    ls = the(v, "LSubjects")
    kernel.dispatch(a, proto.Select(component=ls, symbol=the(v, "Patients")))
    drain(a)
    kernel.dispatch(b, proto.ParseText(text="Ill Patient3."))
    passive = drain(a)
    assert only(passive, proto.CommitNotice)
    updates = [m for m in only(passive, proto.SetUpdate)
               if m.component == ls]
    assert updates


def test_client_view_nests_in_image(browse_kernel):
    kernel = browse_kernel
    a = kernel.open_session("alice")
    b = kernel.open_session("bob")
    drain(a)
    v = kernel.version()
    lm = the(v, "LMembers")
    kernel.dispatch(a, proto.Select(component=the(v, "LSubjects"),
                                    symbol=the(v, "Patients")))
    kernel.dispatch(b, proto.ParseText(text="Patients Pat9."))
    kernel.dispatch(b, proto.DesignerOp(op="remove", args={"component": lm}))
    drain(a)
    v = kernel.version()
    assert a.client_view and a.client_view <= v.symbols
    assert lm not in v.symbols


def test_logins_during_commits_are_linearized(kernel):
    stop = threading.Event()
    errors = []

    def committer():
        s = kernel.open_session("writer")
        n = 0
        while not stop.is_set() and n < 30:
            n += 1
            replies = kernel.dispatch(
                s, proto.ParseText(text=f"Patients Churn{n}."))
            if not only(replies, proto.CommitNotice):
                errors.append(replies)

    t = threading.Thread(target=committer)
    t.start()
    try:
        for i in range(10):
            s = kernel.open_session(f"user{i}")
            msgs = drain(s)
            push = only(msgs, proto.FormSpecPush)
            assert push, "login must push the start form"
            assert push[0].spec["name"] == "FProject"
    finally:
        stop.set()
        t.join(timeout=30)
    assert not t.is_alive()
    assert not errors


# ── TCP transport ─────────────────────────────────────────────────────────────

class WireClient:
    def __init__(self, port, user="alice"):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=10)
        self.sock.settimeout(10)
        proto.write_frame(self.sock, proto.Login(user=user))

    def send(self, msg):
        proto.write_frame(self.sock, msg)

    def recv(self):
        obj = proto.read_frame(self.sock)
        return None if obj is None else proto.server_from_wire(obj)

    def recv_until(self, cls, limit=50):
        seen = []
        for _ in range(limit):
            msg = self.recv()
            if msg is None:
                break
            seen.append(msg)
            if isinstance(msg, cls):
                return seen
        raise AssertionError(f"no {cls.__name__} in {seen!r}")

    def close(self):
        try:
            self.send(proto.Logout())
        except OSError:
            pass
        self.sock.close()


@pytest.fixture()
def tcp_server():
    kernel = Kernel(load_seed(), start_form="FBrowse")
    server = serve_tcp(kernel, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield kernel, server.server_address[1]
    server.shutdown()
    server.server_close()


def test_tcp_login_and_push(tcp_server):
    kernel, port = tcp_server
    client = WireClient(port)
    try:
        seen = client.recv_until(proto.SetUpdate)
        assert isinstance(seen[0], proto.FormSpecPush)
        assert seen[0].spec["name"] == "FBrowse"
    finally:
        client.close()


def test_tcp_commit_propagates(tcp_server):
    kernel, port = tcp_server
    passive = WireClient(port, "alice")
    active = WireClient(port, "bob")
    try:
        passive.recv_until(proto.SetUpdate)
        active.recv_until(proto.SetUpdate)
        active.send(proto.ParseText(text="Patients Pat9."))
        active.recv_until(proto.CommitNotice)
        seen = passive.recv_until(proto.CommitNotice)
        names = [n for m in seen if isinstance(m, proto.SetUpdate)
                 for n in m.names]
        assert "Pat9" in names
    finally:
        passive.close()
        active.close()


def test_tcp_rejects_bad_login(tcp_server):
    _, port = tcp_server
    sock = socket.create_connection(("127.0.0.1", port), timeout=10)
    sock.settimeout(10)
    try:
        proto.write_frame(sock, proto.Login(user="  "))
        obj = proto.read_frame(sock)
        msg = proto.server_from_wire(obj)
        assert isinstance(msg, proto.Error) and msg.code == "auth"
    finally:
        sock.close()


def test_tcp_requires_login_first(tcp_server):
    _, port = tcp_server
    sock = socket.create_connection(("127.0.0.1", port), timeout=10)
    sock.settimeout(10)
    try:
        proto.write_frame(sock, proto.Click(component=1))
        msg = proto.server_from_wire(proto.read_frame(sock))
        assert isinstance(msg, proto.Error)
    finally:
        sock.close()


def test_tcp_malformed_message_mid_stream(tcp_server):
    kernel, port = tcp_server
    client = WireClient(port)
    try:
        client.recv_until(proto.SetUpdate)
        payload = json.dumps({"v": 1, "type": "Click"}).encode()
        import struct
        client.sock.sendall(struct.pack(">I", len(payload)) + payload)
        seen = client.recv_until(proto.Error)
        assert seen[-1].code == "malformed"
        client.send(proto.ParseText(text="Patients PatX."))
        client.recv_until(proto.CommitNotice)
    finally:
        client.close()


# ── web-socket gateway ────────────────────────────────────────────────────────

def test_ws_gateway_round_trip():
    websockets = pytest.importorskip("websockets")
    from websockets.sync.client import connect
    from panta.server import serve_ws

    kernel = Kernel(load_seed(), start_form="FBrowse")
    server = serve_ws(kernel, port=0)
    port = server.socket.getsockname()[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        with connect(f"ws://127.0.0.1:{port}") as ws:
            ws.send(json.dumps({"v": 1, "type": "Login", "user": "alice"}))
            first = json.loads(ws.recv(timeout=10))
            assert first["type"] == "FormSpecPush"
            assert first["spec"]["name"] == "FBrowse"
            ws.send(json.dumps({"v": 1, "type": "ParseText",
                                "text": "Patients Pat9."}))
            for _ in range(20):
                msg = json.loads(ws.recv(timeout=10))
                if msg["type"] == "CommitNotice":
                    break
            else:
                raise AssertionError("no CommitNotice over ws")
    finally:
        server.shutdown()
        thread.join(timeout=5)
