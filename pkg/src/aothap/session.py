"""Sender and receiver session state machines plus transports.

Quota and approval are procedural: the protocol gives the sender no
cryptographic handle on who is asking, so a sender session is one
connection and its counter is the only state it keeps.
"""

from __future__ import annotations

import hashlib
import logging
import secrets
import socket
import socketserver
import threading
from dataclasses import dataclass, field
from typing import Callable

from . import protocol as P
from .attributes import AttributeList
from .wire import (
    FramingError,
    ProtocolMessage,
    Reason,
    Tag,
    WireError,
    decode,
    encode,
    read_frame,
)

log = logging.getLogger(__name__)

# approve(kind, session) -> bool, kind is "issue" or "transfer"
ApprovalHook = Callable[[str, "SenderSession"], bool]


class SessionError(RuntimeError):
    code = "protocol-state"


class SenderSession:
    def __init__(self, crs: P.Crs, keys: P.SenderKeys, quota: int, approve: ApprovalHook | None = None,
                 rng=None):
        if quota < 0:
            raise ValueError("quota must be non-negative")
        self.crs = crs
        self.keys = keys
        self.quota = quota
        self.approve = approve
        self.rng = rng if rng is not None else secrets.SystemRandom()
        self.transfers = 0
        self.issued = False
        self._lock = threading.Lock()

    def _reject(self, tag: Tag, reason: Reason) -> ProtocolMessage:
        log.debug("reject %s: %s", tag.name, reason.label)
        return ProtocolMessage(tag, reason)

    def handle(self, msg: ProtocolMessage) -> ProtocolMessage:
        with self._lock:
            if msg.tag is Tag.ISSUE_REQ:
                return self._issue(msg.body)
            if msg.tag is Tag.TRANSFER_REQ:
                return self._transfer(msg.body)
            # a receiver never sends responses or rejects
            return self._reject(Tag.TRANSFER_REJECT, Reason.OUT_OF_ORDER)

    def _issue(self, req: P.IssueRequest) -> ProtocolMessage:
        if self.issued or self.transfers:
            return self._reject(Tag.ISSUE_REJECT, Reason.OUT_OF_ORDER)
        if self.approve is not None and not self.approve("issue", self):
            return self._reject(Tag.ISSUE_REJECT, Reason.DENIED)
        resp = P.issue_respond(self.crs, self.keys.sk, req, self.rng)
        if resp is None:
            return self._reject(Tag.ISSUE_REJECT, Reason.PROOF_INVALID)
        self.issued = True
        return ProtocolMessage(Tag.ISSUE_RESP, resp)

    def _transfer(self, req: P.TransferRequest) -> ProtocolMessage:
        if self.transfers >= self.quota:
            return self._reject(Tag.TRANSFER_REJECT, Reason.QUOTA)
        if self.approve is not None and not self.approve("transfer", self):
            return self._reject(Tag.TRANSFER_REJECT, Reason.DENIED)
        resp = P.transfer_respond(self.crs, self.keys.pk, self.keys.sk, req, self.rng)
        if resp is None:
            return self._reject(Tag.TRANSFER_REJECT, Reason.PROOF_INVALID)
        self.transfers += 1
        return ProtocolMessage(Tag.TRANSFER_RESP, resp)

    def step(self, frame: bytes) -> bytes:
        """Bytes in, bytes out. Undecodable input gets a MALFORMED reject."""
        try:
            msg = decode(self.crs, frame)
        except WireError as exc:
            tag = Tag.ISSUE_REJECT if len(frame) > 4 and frame[4] == Tag.ISSUE_REQ else Tag.TRANSFER_REJECT
            log.debug("undecodable request: %s", exc)
            return encode(self.crs, self._reject(tag, Reason.MALFORMED))
        return encode(self.crs, self.handle(msg))


def sender_step(session: SenderSession, frame: bytes) -> bytes:
    return session.step(frame)


# -- transports --------------------------------------------------------------------


@dataclass
class Transcript:
    frames: list[tuple[str, bytes]] = field(default_factory=list)

    def record(self, direction: str, data: bytes) -> None:
        self.frames.append((direction, data))

    def digest(self) -> bytes:
        h = hashlib.sha256()
        for direction, data in self.frames:
            h.update(direction.encode() + len(data).to_bytes(4, "big") + data)
        return h.digest()


class LoopbackTransport:
    def __init__(self, sender: SenderSession):
        self.sender = sender
        self.transcript = Transcript()

    def exchange(self, frame: bytes) -> bytes:
        self.transcript.record("->", frame)
        reply = self.sender.step(frame)
        self.transcript.record("<-", reply)
        return reply

    def close(self) -> None:
        pass


class SocketTransport:
    def __init__(self, host: str, port: int, timeout: float | None = 60.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.stream = self.sock.makefile("rwb")
        self.transcript = Transcript()

    def exchange(self, frame: bytes) -> bytes:
        self.transcript.record("->", frame)
        self.stream.write(frame)
        self.stream.flush()
        reply = read_frame(self.stream)
        if reply is None:
            raise FramingError("server closed the connection")
        self.transcript.record("<-", reply)
        return reply

    def close(self) -> None:
        self.stream.close()
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        session = self.server.make_session()
        while True:
            try:
                frame = read_frame(self.rfile)
            except FramingError as exc:
                log.debug("dropping connection: %s", exc)
                return
            if frame is None:
                return
            self.wfile.write(session.step(frame))
            self.wfile.flush()


class SenderServer(socketserver.ThreadingTCPServer):
    """One SenderSession per TCP connection."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, make_session: Callable[[], SenderSession]):
        self.make_session = make_session
        super().__init__(address, _Handler)


# -- receiver ----------------------------------------------------------------------


@dataclass(frozen=True)
class Outcome:
    ok: bool
    value: object = None
    reason: str | None = None


class ReceiverSession:
    def __init__(self, crs: P.Crs, pk: P.SenderPublicKey, psi, cdb, rng=None, verify: bool = True):
        if verify:
            reason = P.check_db(crs, pk, psi, cdb)
            if reason is not None:
                raise SessionError(f"database rejected: {reason}")
        self.crs = crs
        self.pk = pk
        self.cdb = list(cdb)
        self.rng = rng if rng is not None else secrets.SystemRandom()
        self.ask: P.AttributeSecretKey | None = None
        self.recovered: list[tuple[int, object]] = []


def _exchange(session: ReceiverSession, transport, msg: ProtocolMessage) -> ProtocolMessage:
    return decode(session.crs, transport.exchange(encode(session.crs, msg)))


def receiver_run_issue(session: ReceiverSession, transport, attrs: AttributeList) -> Outcome:
    req, secret = P.issue_request(session.crs, attrs, session.rng)
    reply = _exchange(session, transport, ProtocolMessage(Tag.ISSUE_REQ, req))
    if reply.tag is Tag.ISSUE_REJECT:
        return Outcome(False, reason=reply.body.label)
    if reply.tag is not Tag.ISSUE_RESP:
        return Outcome(False, reason="out-of-order")
    try:
        session.ask = P.issue_finalize(session.crs, session.pk, secret, reply.body)
    except P.KeyCheckError as exc:
        return Outcome(False, reason=f"{exc.code}:{exc.attribute}")
    return Outcome(True, session.ask)


def receiver_run_transfer(session: ReceiverSession, transport, index: int) -> Outcome:
    if session.ask is None:
        raise SessionError("transfer needs a finalized attribute key")
    if not 0 <= index < len(session.cdb):
        raise IndexError(f"record index {index} out of range")
    record = session.cdb[index]
    req, secret = P.transfer_request(session.crs, session.pk, record, index, session.rng)
    reply = _exchange(session, transport, ProtocolMessage(Tag.TRANSFER_REQ, req))
    if reply.tag is Tag.TRANSFER_REJECT:
        return Outcome(False, reason=reply.body.label)
    if reply.tag is not Tag.TRANSFER_RESP:
        return Outcome(False, reason="out-of-order")
    m = P.transfer_finalize(session.crs, session.pk, session.ask, record, secret, reply.body)
    if m is None:
        return Outcome(False, reason="response-proof-invalid")
    session.recovered.append((index, m))
    return Outcome(True, m)
