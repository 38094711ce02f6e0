"""Binary encodings for proofs, protocol objects and artifact files.

Artifacts start with a 4-byte magic and a version byte. ``crs.bin`` carries
the backend and the attribute universe, so every other file can be decoded
once the CRS is known.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

from .attributes import AttributeList, parse_universe
from .bilinear import G1, G2, GT, BilinearGroup, DecodeError, MalformedLengthError, bilinear_setup
from .groth_sahai import EquationProof, GsCrs, GsTrapdoor, Mode, PPEProof, Shape
from .protocol import (
    AttributeSecretKey,
    CiphertextRecord,
    Crs,
    CrsTrapdoors,
    IssueRequest,
    IssueResponse,
    IssueSecret,
    SenderPublicKey,
    SenderSecretKey,
    TransferRequest,
    TransferResponse,
    TransferSecret,
)

VERSION = 1
MAGIC_CRS = b"AOTC"
MAGIC_PUB = b"AOTP"
MAGIC_SK = b"AOTS"
MAGIC_ASK = b"AOTK"
MAGIC_ISSUE_SECRET = b"AOTI"
MAGIC_TRANSFER_SECRET = b"AOTX"

_BACKEND_REAL, _BACKEND_MOCK = 0, 1


class ArtifactError(DecodeError):
    code = "decode-failed"


class Writer:
    def __init__(self, group: BilinearGroup | None = None):
        self.group = group
        self.buf = bytearray()

    def raw(self, data: bytes) -> "Writer":
        self.buf += data
        return self

    def u8(self, v: int) -> "Writer":
        return self.raw(struct.pack(">B", v))

    def u16(self, v: int) -> "Writer":
        return self.raw(struct.pack(">H", v))

    def u32(self, v: int) -> "Writer":
        return self.raw(struct.pack(">I", v))

    def u64(self, v: int) -> "Writer":
        return self.raw(struct.pack(">Q", v))

    def blob(self, data: bytes) -> "Writer":
        return self.u32(len(data)).raw(data)

    def scalar(self, v: int) -> "Writer":
        return self.raw(int(v % self.group.order).to_bytes(_scalar_len(self.group), "big"))

    def elem(self, e) -> "Writer":
        return self.raw(self.group.serialize(e))

    def elems(self, es) -> "Writer":
        for e in es:
            self.elem(e)
        return self

    def bytes(self) -> bytes:
        return bytes(self.buf)


class Reader:
    def __init__(self, data: bytes, group: BilinearGroup | None = None):
        self.data = memoryview(bytes(data))
        self.pos = 0
        self.group = group

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise MalformedLengthError(f"need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        out = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def blob(self, limit: int = 1 << 26) -> bytes:
        n = self.u32()
        if n > limit:
            raise MalformedLengthError(f"blob of {n} bytes exceeds limit")
        return self.take(n)

    def scalar(self) -> int:
        v = int.from_bytes(self.take(_scalar_len(self.group)), "big")
        if v >= self.group.order:
            raise ArtifactError("scalar out of range")
        return v

    def elem(self, kind: str):
        return self.group.deserialize(kind, self.take(self.group.element_size(kind)))

    def elems(self, kind: str, n: int) -> tuple:
        return tuple(self.elem(kind) for _ in range(n))

    def vec3(self, kind: str) -> tuple:
        return self.elems(kind, 3)

    def done(self) -> None:
        if self.pos != len(self.data):
            raise MalformedLengthError(f"{len(self.data) - self.pos} trailing bytes")


def _scalar_len(group: BilinearGroup) -> int:
    return (group.order.bit_length() + 7) // 8


def _header(w: Writer, magic: bytes) -> Writer:
    return w.raw(magic).u8(VERSION)


def _check_header(r: Reader, magic: bytes) -> None:
    got = r.take(4)
    if got != magic:
        raise ArtifactError(f"bad magic {got!r}, expected {magic!r}")
    ver = r.u8()
    if ver != VERSION:
        raise ArtifactError(f"unsupported version {ver}")


# -- proofs ------------------------------------------------------------------------


def write_proof(w: Writer, proof: PPEProof) -> None:
    w.u8(len(proof.c)).u8(len(proof.d)).u8(len(proof.parts))
    for vec in proof.c + proof.d:
        w.elems(vec)
    for part in proof.parts:
        if part.p is not None and part.p_prime is not None:
            shape = Shape.GENERAL
        elif part.p is not None:
            shape = Shape.LINEAR_G1
        else:
            shape = Shape.LINEAR_G2
        w.u8(int(shape))
        for vecs in (part.p, part.p_prime):
            if vecs is not None:
                for vec in vecs:
                    w.elems(vec)


def read_proof(r: Reader) -> PPEProof:
    n_x, n_y, n_eq = r.u8(), r.u8(), r.u8()
    c = tuple(r.vec3(G1) for _ in range(n_x))
    d = tuple(r.vec3(G2) for _ in range(n_y))
    parts = []
    for _ in range(n_eq):
        tag = r.u8()
        try:
            shape = Shape(tag)
        except ValueError:
            raise ArtifactError(f"unknown proof shape tag {tag}") from None
        p = pp = None
        if shape in (Shape.GENERAL, Shape.LINEAR_G1):
            p = tuple(r.vec3(G2) for _ in range(3))
        if shape in (Shape.GENERAL, Shape.LINEAR_G2):
            pp = tuple(r.vec3(G1) for _ in range(3))
        parts.append(EquationProof(p, pp))
    return PPEProof(c, d, tuple(parts))


def proof_to_bytes(group: BilinearGroup, proof: PPEProof) -> bytes:
    w = Writer(group)
    write_proof(w, proof)
    return w.bytes()


def proof_from_bytes(group: BilinearGroup, data: bytes) -> PPEProof:
    r = Reader(data, group)
    proof = read_proof(r)
    r.done()
    return proof


# -- protocol objects --------------------------------------------------------------


def write_issue_request(w: Writer, req: IssueRequest) -> None:
    w.elems(req.R)
    write_proof(w, req.phi)


def read_issue_request(r: Reader, crs: Crs) -> IssueRequest:
    R = r.elems(G2, crs.universe.n)
    return IssueRequest(R, read_proof(r))


def write_issue_response(w: Writer, resp: IssueResponse) -> None:
    w.elem(resp.d0).elems(resp.d1p).elems(resp.d2).elems(resp.d3)


def read_issue_response(r: Reader, crs: Crs) -> IssueResponse:
    n = crs.universe.n
    return IssueResponse(r.elem(G2), r.elems(G2, n), r.elems(G2, n), r.elems(G2, n))


def write_transfer_request(w: Writer, req: TransferRequest) -> None:
    w.elem(req.req)
    write_proof(w, req.pi)
    w.elems(req.com_hv)
    write_proof(w, req.bind)


def read_transfer_request(r: Reader, crs: Crs) -> TransferRequest:
    req = r.elem(G1)
    pi = read_proof(r)
    com_hv = r.vec3(G2)
    return TransferRequest(req, pi, com_hv, read_proof(r))


def write_transfer_response(w: Writer, resp: TransferResponse) -> None:
    w.elem(resp.res)
    write_proof(w, resp.delta)


def read_transfer_response(r: Reader, crs: Crs) -> TransferResponse:
    res = r.elem(GT)
    return TransferResponse(res, read_proof(r))


def write_record(w: Writer, rec: CiphertextRecord) -> None:
    w.elem(rec.c1).elem(rec.c2).elem(rec.c3).elems(rec.c4)
    for row in rec.c5:
        w.elems(row)


def read_record(r: Reader, crs: Crs) -> CiphertextRecord:
    c1, c2, c3 = r.elem(G2), r.elem(G1), r.elem(GT)
    c4 = r.elems(G1, crs.universe.n)
    c5 = tuple(r.elems(G1, k) for k in crs.universe.sizes)
    return CiphertextRecord(c1, c2, c3, c4, c5)


def _write_choice(w: Writer, attrs: AttributeList) -> None:
    for t in attrs.choice:
        w.u16(t)


def _read_choice(r: Reader, crs: Crs) -> AttributeList:
    try:
        return AttributeList(crs.universe.sizes, tuple(r.u16() for _ in crs.universe.sizes))
    except ValueError as exc:
        raise ArtifactError(str(exc)) from None


# -- artifacts ---------------------------------------------------------------------


_REFUSED = (CrsTrapdoors, GsTrapdoor)


def _refuse(obj) -> None:
    if isinstance(obj, _REFUSED) or getattr(obj, "test_only", False):
        raise TypeError(f"{type(obj).__name__} is test-only and cannot be written to an artifact")


def _write_gs(w: Writer, gs: GsCrs) -> None:
    w.u8(0 if gs.mode is Mode.SOUND else 1)
    for vec in gs.u:
        w.elems(vec)
    for vec in gs.v:
        w.elems(vec)


def _read_gs(r: Reader, group: BilinearGroup) -> GsCrs:
    tag = r.u8()
    if tag not in (0, 1):
        raise ArtifactError(f"unknown CRS mode {tag}")
    u = tuple(r.vec3(G1) for _ in range(3))
    v = tuple(r.vec3(G2) for _ in range(3))
    return GsCrs(group, u, v, Mode.SOUND if tag == 0 else Mode.WI)


def dump_crs(crs: Crs) -> bytes:
    _refuse(crs)
    if not isinstance(crs, Crs):
        raise TypeError("dump_crs takes a Crs")
    g = crs.group
    w = _header(Writer(g), MAGIC_CRS)
    if g.backend == "real":
        w.u8(_BACKEND_REAL)
    else:
        w.u8(_BACKEND_MOCK).u64(g.order)
    w.blob(json.dumps(crs.universe.to_json(), sort_keys=True, separators=(",", ":")).encode())
    _write_gs(w, crs.gs_s)
    _write_gs(w, crs.gs_r)
    for row in crs.A:
        w.elems(row)
    for row in crs.B:
        w.elems(row)
    return w.bytes()


def load_crs(data: bytes) -> Crs:
    r = Reader(data)
    _check_header(r, MAGIC_CRS)
    backend = r.u8()
    try:
        if backend == _BACKEND_REAL:
            group = bilinear_setup("standard-128bit")
        elif backend == _BACKEND_MOCK:
            group = bilinear_setup(f"mock({r.u64()})")
        else:
            raise ArtifactError(f"unknown backend tag {backend}")
        universe = parse_universe(r.blob(1 << 20).decode())
    except (ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, DecodeError):
            raise
        raise ArtifactError(f"bad CRS header: {exc}") from None
    r.group = group
    gs_s = _read_gs(r, group)
    gs_r = _read_gs(r, group)
    A = tuple(r.elems(G1, k) for k in universe.sizes)
    B = tuple(r.elems(G2, k) for k in universe.sizes)
    r.done()
    return Crs(group, universe, gs_s, gs_r, A, B)


def dump_public(crs: Crs, pk: SenderPublicKey, psi: PPEProof, cdb, blobs=None) -> bytes:
    """pub.bin: pk, psi, cDB and optional sealed byte payloads (one per record)."""
    w = _header(Writer(crs.group), MAGIC_PUB)
    w.elem(pk.B).elem(pk.y).elem(pk.Y).elem(pk.H).elems(pk.com_h).elem(pk.B2)
    write_proof(w, psi)
    w.u32(len(cdb))
    for rec in cdb:
        write_record(w, rec)
    blobs = list(blobs) if blobs is not None else [b""] * len(cdb)
    if len(blobs) != len(cdb):
        raise ValueError("one payload blob per record")
    for b in blobs:
        w.blob(b)
    return w.bytes()


def load_public(crs: Crs, data: bytes):
    """Returns ``(pk, psi, cdb, blobs)``."""
    r = Reader(data, crs.group)
    _check_header(r, MAGIC_PUB)
    pk = SenderPublicKey(r.elem(G1), r.elem(G1), r.elem(GT), r.elem(GT), r.vec3(G2), r.elem(G2))
    psi = read_proof(r)
    n = r.u32()
    # every record holds at least 3 elements; reject absurd counts before allocating
    if n == 0 or n > len(data):
        raise ArtifactError(f"implausible record count {n}")
    cdb = [read_record(r, crs) for _ in range(n)]
    blobs = [r.blob() for _ in range(n)]
    r.done()
    return pk, psi, cdb, blobs


def dump_secret_key(crs: Crs, sk: SenderSecretKey) -> bytes:
    _refuse(sk)
    w = _header(Writer(crs.group), MAGIC_SK)
    for v in (sk.x, sk.alpha, sk.beta, sk.gamma, sk.w):
        w.scalar(v)
    return w.bytes()


def load_secret_key(crs: Crs, data: bytes) -> SenderSecretKey:
    r = Reader(data, crs.group)
    _check_header(r, MAGIC_SK)
    vals = [r.scalar() for _ in range(5)]
    r.done()
    if any(v == 0 for v in vals[1:]):
        raise ArtifactError("secret key has a zero exponent")
    return SenderSecretKey.from_scalars(crs.group, *vals)


def dump_ask(crs: Crs, ask: AttributeSecretKey) -> bytes:
    w = _header(Writer(crs.group), MAGIC_ASK)
    _write_choice(w, ask.attrs)
    w.elem(ask.d0).elems(ask.d1).elems(ask.d2).elems(ask.d3)
    return w.bytes()


def load_ask(crs: Crs, data: bytes) -> AttributeSecretKey:
    r = Reader(data, crs.group)
    _check_header(r, MAGIC_ASK)
    attrs = _read_choice(r, crs)
    n = crs.universe.n
    ask = AttributeSecretKey(attrs, r.elem(G2), r.elems(G2, n), r.elems(G2, n), r.elems(G2, n))
    r.done()
    return ask


def dump_issue_secret(crs: Crs, sec: IssueSecret) -> bytes:
    w = _header(Writer(crs.group), MAGIC_ISSUE_SECRET)
    _write_choice(w, sec.attrs)
    for z in sec.z:
        w.scalar(z)
    return w.bytes()


def load_issue_secret(crs: Crs, data: bytes) -> IssueSecret:
    r = Reader(data, crs.group)
    _check_header(r, MAGIC_ISSUE_SECRET)
    attrs = _read_choice(r, crs)
    z = tuple(r.scalar() for _ in attrs.choice)
    r.done()
    return IssueSecret(attrs, z)


def dump_transfer_secret(crs: Crs, sec: TransferSecret) -> bytes:
    w = _header(Writer(crs.group), MAGIC_TRANSFER_SECRET)
    w.u32(sec.index).scalar(sec.v).elem(sec.pri)
    return w.bytes()


def load_transfer_secret(crs: Crs, data: bytes) -> TransferSecret:
    r = Reader(data, crs.group)
    _check_header(r, MAGIC_TRANSFER_SECRET)
    sec = TransferSecret(r.u32(), r.scalar(), r.elem(GT))
    r.done()
    return sec


def read_file(path) -> bytes:
    return Path(path).read_bytes()


def write_file(path, data: bytes) -> None:
    Path(path).write_bytes(data)
