"""The wire protocol between kernel and clients.

A frame is a 4-byte big-endian payload length followed by that many bytes
of UTF-8 JSON. Every message is a JSON object carrying "v": 1 and a
"type" tag; symbol ids travel as plain integers. The same JSON objects
ride unframed over the web-socket gateway, which has its own framing.

Decoding is a total function: anything malformed raises MalformedMessage,
never a stray KeyError or UnicodeDecodeError.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, fields
from typing import Iterator, Optional, Union

from .errors import MalformedMessage

VERSION = 1
_LEN = struct.Struct(">I")
MAX_FRAME = 64 * 1024 * 1024


# ── client → server ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Login:
    user: str


@dataclass(frozen=True)
class Logout:
    pass


@dataclass(frozen=True)
class Select:
    component: int
    symbol: int


@dataclass(frozen=True)
class Click:
    component: int


@dataclass(frozen=True)
class DbClick:
    component: int


@dataclass(frozen=True)
class ParseText:
    text: str


@dataclass(frozen=True)
class DeleteUtterance:
    symbol: int


@dataclass(frozen=True)
class DesignerOp:
    op: str
    args: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OpenForm:
    form: int


ClientMessage = Union[Login, Logout, Select, Click, DbClick, ParseText,
                      DeleteUtterance, DesignerOp, OpenForm]


# ── server → client ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class FormSpecPush:
    form: int
    spec: dict


@dataclass(frozen=True)
class SetUpdate:
    component: int
    symbols: tuple
    names: tuple
    states: tuple

    def __post_init__(self):
        assert len(self.symbols) == len(self.names) == len(self.states)


@dataclass(frozen=True)
class SelectionEcho:
    component: int
    symbol: int


@dataclass(frozen=True)
class ActionAborted:
    reason: str


@dataclass(frozen=True)
class CommitNotice:
    version: int


@dataclass(frozen=True)
class Error:
    code: str
    text: str


ServerMessage = Union[FormSpecPush, SetUpdate, SelectionEcho, ActionAborted,
                      CommitNotice, Error]

_CLIENT_TYPES = {cls.__name__: cls for cls in
                 (Login, Logout, Select, Click, DbClick, ParseText,
                  DeleteUtterance, DesignerOp, OpenForm)}
_SERVER_TYPES = {cls.__name__: cls for cls in
                 (FormSpecPush, SetUpdate, SelectionEcho, ActionAborted,
                  CommitNotice, Error)}

_FIELD_CHECKS = {int: "an integer", str: "a string", dict: "an object"}


def to_wire(msg) -> dict:
    """The JSON object for a message, lists for tuples."""
    obj = {"v": VERSION, "type": type(msg).__name__}
    for f in fields(msg):
        value = getattr(msg, f.name)
        obj[f.name] = list(value) if isinstance(value, tuple) else value
    return obj


def _from_wire(obj, types):
    if not isinstance(obj, dict):
        raise MalformedMessage("message is not an object")
    if obj.get("v") != VERSION:
        raise MalformedMessage(f"unsupported protocol version {obj.get('v')!r}")
    tag = obj.get("type")
    cls = types.get(tag)
    if cls is None:
        raise MalformedMessage(f"unknown message type {tag!r}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in obj:
            raise MalformedMessage(f"{tag} is missing {f.name!r}")
        value = obj[f.name]
        want = f.type if isinstance(f.type, type) else None
        expect = {"int": int, "str": str, "dict": dict}.get(str(f.type), want)
        if expect in _FIELD_CHECKS:
            # bool is an int subclass but never a valid id or count
            if not isinstance(value, expect) or isinstance(value, bool):
                raise MalformedMessage(
                    f"{tag}.{f.name} must be {_FIELD_CHECKS[expect]}")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[f.name] = value
    return cls(**kwargs)


def client_from_wire(obj) -> ClientMessage:
    return _from_wire(obj, _CLIENT_TYPES)


def server_from_wire(obj) -> ServerMessage:
    return _from_wire(obj, _SERVER_TYPES)


# ── framing ───────────────────────────────────────────────────────────────────

def encode_payload(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False).encode("utf-8")


def decode_payload(raw: bytes) -> dict:
    try:
        obj = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedMessage(f"bad payload: {e}") from None
    if not isinstance(obj, dict):
        raise MalformedMessage("payload is not an object")
    return obj


def encode_frame(msg) -> bytes:
    payload = encode_payload(to_wire(msg))
    return _LEN.pack(len(payload)) + payload


def decode(raw: bytes) -> ClientMessage:
    """One complete frame to one client message; total."""
    if len(raw) < _LEN.size:
        raise MalformedMessage("truncated length prefix")
    (length,) = _LEN.unpack_from(raw)
    if length > MAX_FRAME:
        raise MalformedMessage(f"frame of {length} bytes exceeds limit")
    body = raw[_LEN.size:]
    if len(body) != length:
        raise MalformedMessage(
            f"frame announces {length} bytes, carries {len(body)}")
    return client_from_wire(decode_payload(body))


class FrameBuffer:
    """Reassembles frames from an arbitrary byte stream."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> Iterator[dict]:
        self._buf.extend(data)
        while True:
            if len(self._buf) < _LEN.size:
                return
            (length,) = _LEN.unpack_from(self._buf)
            if length > MAX_FRAME:
                raise MalformedMessage(f"frame of {length} bytes exceeds limit")
            end = _LEN.size + length
            if len(self._buf) < end:
                return
            payload = bytes(self._buf[_LEN.size:end])
            del self._buf[:end]
            yield decode_payload(payload)

    @property
    def pending(self) -> int:
        return len(self._buf)


def read_frame(sock) -> Optional[dict]:
    """One frame from a blocking socket, None on orderly close."""
    header = _read_exact(sock, _LEN.size)
    if header is None:
        return None
    (length,) = _LEN.unpack(header)
    if length > MAX_FRAME:
        raise MalformedMessage(f"frame of {length} bytes exceeds limit")
    body = _read_exact(sock, length) if length else b""
    if body is None:
        raise MalformedMessage("connection closed mid-frame")
    return decode_payload(body)


def write_frame(sock, msg) -> None:
    sock.sendall(encode_frame(msg))


def _read_exact(sock, n: int) -> Optional[bytes]:
    chunks = bytearray()
    while len(chunks) < n:
        piece = sock.recv(n - len(chunks))
        if not piece:
            if chunks:
                raise MalformedMessage("connection closed mid-frame")
            return None
        chunks.extend(piece)
    return bytes(chunks)
