"""Binary framing and message codecs for the sensor <-> service channel.

Frame layout: magic 0x42 0x4D, version 0x01, type byte, u32 big-endian
payload length, payload.  Ciphertexts travel as fixed-width compressed
points; user ids as length-prefixed UTF-8 (<= 255 bytes).  The channel is
deliberately plain: every sensitive payload is a ciphertext by construction.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Tuple

from . import ec_elgamal as eg
from .ec_elgamal import Ciphertext, GroupParams, PartialCiphertext
from .protocol import CompareSet, SecureTemplate

__all__ = [
    "Frame",
    "FrameError",
    "MSG_ENROLL_REQ", "MSG_ENROLL_ACK", "MSG_VERIFY_CLAIM", "MSG_TEMPLATE",
    "MSG_SCORE", "MSG_RESULTSET", "MSG_UNKNOWN_USER", "MSG_MALFORMED",
    "MSG_LOCKED",
    "pack_frame", "read_frame", "parse_frame",
    "encode_user_id", "decode_user_id",
    "template_to_bytes", "template_from_bytes",
    "compare_set_to_bytes", "compare_set_from_bytes",
]

MAGIC = b"\x42\x4d"
VERSION = 0x01
_HEADER = struct.Struct(">2sBBI")

MSG_ENROLL_REQ = 0x01
MSG_ENROLL_ACK = 0x02
MSG_VERIFY_CLAIM = 0x03
MSG_TEMPLATE = 0x04
MSG_SCORE = 0x05
MSG_RESULTSET = 0x06
MSG_UNKNOWN_USER = 0x07
MSG_MALFORMED = 0x08
MSG_LOCKED = 0x09

_KNOWN_TYPES = frozenset({
    MSG_ENROLL_REQ, MSG_ENROLL_ACK, MSG_VERIFY_CLAIM, MSG_TEMPLATE,
    MSG_SCORE, MSG_RESULTSET, MSG_UNKNOWN_USER, MSG_MALFORMED, MSG_LOCKED,
})


class FrameError(ValueError):
    """Framing violation; the session is closed after replying MALFORMED."""


@dataclass(frozen=True)
class Frame:
    msg_type: int
    payload: bytes


def pack_frame(msg_type: int, payload: bytes = b"") -> bytes:
    if msg_type not in _KNOWN_TYPES:
        raise FrameError(f"unknown message type {msg_type:#x}")
    return _HEADER.pack(MAGIC, VERSION, msg_type, len(payload)) + payload


def parse_frame(data: bytes) -> Frame:
    if len(data) < _HEADER.size:
        raise FrameError("short frame header")
    magic, version, msg_type, length = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FrameError("bad magic")
    if version != VERSION:
        raise FrameError(f"unsupported version {version}")
    if msg_type not in _KNOWN_TYPES:
        raise FrameError(f"unknown message type {msg_type:#x}")
    payload = data[_HEADER.size:]
    if len(payload) != length:
        raise FrameError(f"length field {length} != payload size {len(payload)}")
    return Frame(msg_type=msg_type, payload=payload)


def read_frame(sock_file) -> Frame:
    """Read one frame from a file-like object (socket makefile)."""
    header = sock_file.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise FrameError("connection closed mid-header" if header else "connection closed")
    magic, version, msg_type, length = _HEADER.unpack(header)
    if magic != MAGIC:
        raise FrameError("bad magic")
    if version != VERSION:
        raise FrameError(f"unsupported version {version}")
    if msg_type not in _KNOWN_TYPES:
        raise FrameError(f"unknown message type {msg_type:#x}")
    if length > 64 * 1024 * 1024:
        raise FrameError("frame too large")
    payload = sock_file.read(length)
    if len(payload) != length:
        raise FrameError("connection closed mid-payload")
    return Frame(msg_type=msg_type, payload=payload)


def encode_user_id(user_id: str) -> bytes:
    raw = user_id.encode("utf-8")
    if not raw or len(raw) > 255:
        raise FrameError("user id must be 1..255 bytes of UTF-8")
    return bytes([len(raw)]) + raw


def decode_user_id(data: bytes) -> Tuple[str, bytes]:
    """Returns (user_id, remaining bytes)."""
    if not data:
        raise FrameError("missing user id")
    n = data[0]
    if n == 0 or len(data) < 1 + n:
        raise FrameError("truncated user id")
    return data[1:1 + n].decode("utf-8"), data[1 + n:]


def template_to_bytes(tpl: SecureTemplate, params: GroupParams) -> bytes:
    out = [encode_user_id(tpl.user_id), struct.pack(">HB", tpl.k, tpl.b)]
    for row in tpl.rows:
        for ct in row:
            out.append(eg.ciphertext_to_bytes(ct, params))
    return b"".join(out)


def template_from_bytes(data: bytes, params: GroupParams) -> SecureTemplate:
    user_id, rest = decode_user_id(data)
    if len(rest) < 3:
        raise FrameError("truncated template header")
    k, b = struct.unpack(">HB", rest[:3])
    rest = rest[3:]
    width = 1 << b
    ct_size = 2 * (params.spec.coord_size + 1)
    if len(rest) != k * width * ct_size:
        raise FrameError("template body size mismatch")
    rows = []
    off = 0
    for _ in range(k):
        row = []
        for _ in range(width):
            row.append(eg.ciphertext_from_bytes(rest[off:off + ct_size], params))
            off += ct_size
        rows.append(tuple(row))
    return SecureTemplate(user_id=user_id, k=k, b=b, rows=tuple(rows))


def compare_set_to_bytes(cset: CompareSet, params: GroupParams) -> bytes:
    out = [struct.pack(">H", len(cset.elements))]
    for pct in cset.elements:
        out.append(eg.point_to_bytes(pct.c1, params))
        out.append(eg.point_to_bytes(pct.c2, params))
    return b"".join(out)


def compare_set_from_bytes(data: bytes, params: GroupParams) -> CompareSet:
    if len(data) < 2:
        raise FrameError("truncated compare set")
    (count,) = struct.unpack(">H", data[:2])
    n = params.spec.coord_size + 1
    body = data[2:]
    if len(body) != count * 2 * n:
        raise FrameError("compare set size mismatch")
    elements = []
    off = 0
    for _ in range(count):
        c1 = eg.point_from_bytes(body[off:off + n], params)
        c2 = eg.point_from_bytes(body[off + n:off + 2 * n], params)
        elements.append(PartialCiphertext(c1=c1, c2=c2))
        off += 2 * n
    return CompareSet(elements=tuple(elements))


def score_to_bytes(ct: Ciphertext, params: GroupParams) -> bytes:
    return eg.ciphertext_to_bytes(ct, params)


def score_from_bytes(data: bytes, params: GroupParams) -> Ciphertext:
    try:
        return eg.ciphertext_from_bytes(data, params)
    except ValueError as exc:
        raise FrameError(str(exc)) from exc
