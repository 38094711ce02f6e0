"""Framed protocol messages.

Frame layout: 4-byte big-endian length of what follows, 1-byte tag,
1-byte version, body. Bodies use the codec encodings; decoding validates
every embedded group element and needs the CRS for the universe shape.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Any

from . import codec
from .bilinear import DecodeError
from .protocol import Crs

WIRE_VERSION = 1
MAX_FRAME = 1 << 24


class Tag(enum.IntEnum):
    ISSUE_REQ = 1
    ISSUE_RESP = 2
    ISSUE_REJECT = 3
    TRANSFER_REQ = 4
    TRANSFER_RESP = 5
    TRANSFER_REJECT = 6


class Reason(enum.IntEnum):
    PROOF_INVALID = 1
    QUOTA = 2
    OUT_OF_ORDER = 3
    MALFORMED = 4
    DENIED = 5

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")


class WireError(ValueError):
    code = "wire-error"


class FramingError(WireError):
    code = "framing-error"


class UnknownTagError(WireError):
    code = "unknown-tag"


class ElementValidationError(WireError):
    code = "element-validation"


@dataclass(frozen=True)
class ProtocolMessage:
    tag: Tag
    body: Any  # phase object, or a Reason for the reject tags
    version: int = WIRE_VERSION


_WRITERS = {
    Tag.ISSUE_REQ: codec.write_issue_request,
    Tag.ISSUE_RESP: codec.write_issue_response,
    Tag.TRANSFER_REQ: codec.write_transfer_request,
    Tag.TRANSFER_RESP: codec.write_transfer_response,
}

_READERS = {
    Tag.ISSUE_REQ: codec.read_issue_request,
    Tag.ISSUE_RESP: codec.read_issue_response,
    Tag.TRANSFER_REQ: codec.read_transfer_request,
    Tag.TRANSFER_RESP: codec.read_transfer_response,
}


def encode(crs: Crs, msg: ProtocolMessage) -> bytes:
    w = codec.Writer(crs.group)
    if msg.tag in (Tag.ISSUE_REJECT, Tag.TRANSFER_REJECT):
        w.u8(int(msg.body))
    else:
        _WRITERS[msg.tag](w, msg.body)
    payload = bytes([int(msg.tag), msg.version]) + w.bytes()
    return struct.pack(">I", len(payload)) + payload


def decode(crs: Crs, data: bytes) -> ProtocolMessage:
    if len(data) < 6:
        raise FramingError(f"frame of {len(data)} bytes is shorter than the header")
    (length,) = struct.unpack(">I", data[:4])
    if length != len(data) - 4:
        raise FramingError(f"length prefix says {length}, frame carries {len(data) - 4}")
    try:
        tag = Tag(data[4])
    except ValueError:
        raise UnknownTagError(f"unknown tag {data[4]}") from None
    version = data[5]
    if version != WIRE_VERSION:
        raise FramingError(f"unsupported wire version {version}")
    r = codec.Reader(data[6:], crs.group)
    try:
        if tag in (Tag.ISSUE_REJECT, Tag.TRANSFER_REJECT):
            try:
                body = Reason(r.u8())
            except ValueError:
                raise FramingError("unknown reject reason") from None
        else:
            body = _READERS[tag](r, crs)
        r.done()
    except codec.ArtifactError as exc:
        raise FramingError(str(exc)) from None
    except DecodeError as exc:
        if exc.code == "malformed-length":
            raise FramingError(str(exc)) from None
        raise ElementValidationError(f"{exc.code}: {exc}") from None
    return ProtocolMessage(tag, body, version)


def read_frame(stream) -> bytes | None:
    """Read one frame from a binary stream; None on clean EOF."""
    head = _read_exact(stream, 4)
    if head is None:
        return None
    (length,) = struct.unpack(">I", head)
    if length > MAX_FRAME:
        raise FramingError(f"frame of {length} bytes exceeds the limit")
    body = _read_exact(stream, length)
    if body is None:
        raise FramingError("connection closed mid-frame")
    return head + body


def _read_exact(stream, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            if buf:
                raise FramingError("connection closed mid-frame")
            return None
        buf += chunk
    return buf
