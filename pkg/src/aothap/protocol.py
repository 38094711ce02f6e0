"""Protocol phases: CRS setup, database encryption, key issue and transfer.

Every function is a pure function of its inputs and the ``rng`` handle it is
given (``random.Random`` for reproducible runs, ``secrets.SystemRandom`` by
default). Attribute and value indices are 0-based.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass
from typing import Sequence

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .attributes import AccessPolicy, AttributeList, AttributeUniverse, UniverseMismatchError
from .bilinear import G1, G2, GT, BilinearGroup, Element
from .groth_sahai import (
    PPE,
    Commitment,
    GsCrs,
    GsError,
    GsTrapdoor,
    Mode,
    PPEProof,
    Vec3,
    commit_g2,
    commitment_pow,
    gs_crs_gen,
    prove_ppe,
    verify_ppe,
)


class ProtocolError(ValueError):
    code = "protocol-error"


class KeyCheckError(ProtocolError):
    code = "key-check-failed"

    def __init__(self, attribute: int):
        super().__init__(f"attribute key check failed at attribute {attribute}")
        self.attribute = attribute


def _rng(rng):
    return rng if rng is not None else secrets.SystemRandom()


# -- CRS -----------------------------------------------------------------------


@dataclass(frozen=True)
class Crs:
    group: BilinearGroup
    universe: AttributeUniverse
    gs_s: GsCrs  # sender-side proofs (psi, delta)
    gs_r: GsCrs  # receiver-side proofs (phi, pi) and Com'(h)
    A: tuple[tuple[Element, ...], ...]  # A[l][t] = g1^a_lt
    B: tuple[tuple[Element, ...], ...]  # B[l][t] = g2^a_lt

    def element_count(self) -> int:
        return 2 * self.universe.m + len(self.gs_s.elements()) + len(self.gs_r.elements())


@dataclass(frozen=True)
class CrsTrapdoors:
    """Test-only: the CRS exponents and both GS trapdoors."""

    a: tuple[tuple[int, ...], ...]
    gs_s: GsTrapdoor
    gs_r: GsTrapdoor


def crs_setup(group: BilinearGroup, universe: AttributeUniverse, rng=None, *,
              emit_trapdoors: bool = False, gs_s_mode: Mode = Mode.SOUND,
              gs_r_mode: Mode = Mode.SOUND):
    rng = _rng(rng)
    gs_s, td_s = gs_crs_gen(group, gs_s_mode, rng)
    gs_r, td_r = gs_crs_gen(group, gs_r_mode, rng)
    a = tuple(tuple(group.random_scalar(rng) for _ in range(k)) for k in universe.sizes)
    A = tuple(tuple(group.g1**e for e in row) for row in a)
    B = tuple(tuple(group.g2**e for e in row) for row in a)
    crs = Crs(group, universe, gs_s, gs_r, A, B)
    return crs, (CrsTrapdoors(a, td_s, td_r) if emit_trapdoors else None)


def check_crs(crs: Crs) -> bool:
    """Public check that every A[l][t] and B[l][t] share one exponent."""
    g = crs.group
    for rowA, rowB in zip(crs.A, crs.B):
        for a, b in zip(rowA, rowB):
            if g.multi_pair([(a, g.g2), (g.g1.inverse(), b)]) != g.identity(GT):
                return False
    return True


# -- sender keys -------------------------------------------------------------------


@dataclass(frozen=True)
class SenderPublicKey:
    B: Element  # g1^beta
    y: Element  # g1^x
    Y: Element  # e(g1, g2^w)
    H: Element  # e(B, h)
    com_h: Vec3  # Com'(h) under GS_R
    B2: Element  # g2^beta, lets anyone check c2 against c4


@dataclass(frozen=True)
class SenderSecretKey:
    x: int
    alpha: int
    beta: int
    gamma: int
    w: int
    h: Element
    B_gamma: Element
    g1_w: Element
    g1_alpha: Element
    g2_w: Element
    g2_alpha: Element

    @classmethod
    def from_scalars(cls, group: BilinearGroup, x, alpha, beta, gamma, w) -> "SenderSecretKey":
        g1, g2 = group.g1, group.g2
        return cls(x, alpha, beta, gamma, w, g2**gamma, g1 ** (beta * gamma), g1**w, g1**alpha,
                   g2**w, g2**alpha)


@dataclass(frozen=True)
class SenderKeys:
    pk: SenderPublicKey
    sk: SenderSecretKey
    psi: PPEProof


def keygen(crs: Crs, rng=None, com_h_randomness=None) -> tuple[SenderPublicKey, SenderSecretKey]:
    g = crs.group
    rng = _rng(rng)
    x = g.random_scalar(rng)
    alpha, beta, gamma, w = (g.random_scalar(rng, nonzero=True) for _ in range(4))
    sk = SenderSecretKey.from_scalars(g, x, alpha, beta, gamma, w)
    B = g.g1**beta
    com_h = commit_g2(crs.gs_r, sk.h, rng, com_h_randomness)
    pk = SenderPublicKey(B, g.g1**x, g.pair(g.g1, sk.g2_w), g.pair(B, sk.h), com_h.vec, g.g2**beta)
    return pk, sk


def psi_statement(crs: Crs, pk: SenderPublicKey) -> list[PPE]:
    """Witnesses x = (B^gamma, g1^w, g1^alpha), y = (g2^w, h, g2^alpha, g')."""
    g = crs.group
    one, inv_g1 = g.identity(GT), g.g1.inverse()
    return [
        PPE.build([(inv_g1, {}, None, {0: 1}), (None, {1: 1}, None, {3: 1})], one, 3, 4),
        PPE.build([(pk.B.inverse(), {}, None, {1: 1}), (None, {0: 1}, None, {3: 1})], one, 3, 4),
        PPE.build([(inv_g1, {}, None, {2: 1}), (None, {2: 1}, None, {3: 1})], one, 3, 4),
        PPE.build([(g.g1, {}, None, {3: 1})], g.gt, 3, 4),
    ]


def prove_keys(crs: Crs, pk: SenderPublicKey, sk: SenderSecretKey, rng=None) -> PPEProof:
    xs = [sk.B_gamma, sk.g1_w, sk.g1_alpha]
    ys = [sk.g2_w, sk.h, sk.g2_alpha, crs.group.g2]
    return prove_ppe(crs.gs_s, psi_statement(crs, pk), xs, ys, _rng(rng))


# -- database ----------------------------------------------------------------------


@dataclass(frozen=True)
class CiphertextRecord:
    c1: Element  # G2, BB signature on r
    c2: Element  # G1, B^r
    c3: Element  # GT, masked payload
    c4: tuple[Element, ...]  # G1 per attribute
    c5: tuple[tuple[Element, ...], ...]  # G1 per attribute value

    def element_count(self) -> int:
        return 3 + len(self.c4) + sum(len(row) for row in self.c5)


def encrypt_record(crs: Crs, pk: SenderPublicKey, sk: SenderSecretKey, payload: Element,
                   policy: AccessPolicy, rng=None) -> CiphertextRecord:
    g = crs.group
    p = g.order
    rng = _rng(rng)
    if policy.sizes != crs.universe.sizes:
        raise UniverseMismatchError("policy does not match the CRS universe")
    shares = [g.random_scalar(rng) for _ in policy.sizes]
    # the BB signature needs x + r != 0; redraw the last share until it holds
    while (sk.x + sum(shares)) % p == 0:
        shares[-1] = g.random_scalar(rng)
    r = sum(shares) % p
    c1 = g.g2 ** g.inv(sk.x + r)
    c2 = pk.B**r
    c3 = payload * pk.Y**r * g.pair(c2, sk.h)
    c4 = tuple(g.g1**s for s in shares)
    c5 = []
    for l, s in enumerate(shares):
        row = []
        for t, A in enumerate(crs.A[l]):
            if t in policy.allowed[l]:
                row.append(A ** (sk.alpha * s))
            else:
                row.append(g.g1 ** g.random_scalar(rng))
        c5.append(tuple(row))
    return CiphertextRecord(c1, c2, c3, c4, tuple(c5))


def encrypt_records(crs, pk, sk, records, rng=None) -> list[CiphertextRecord]:
    rng = _rng(rng)
    return [encrypt_record(crs, pk, sk, m, w, rng) for m, w in records]


def db_setup(crs: Crs, records: Sequence[tuple[Element, AccessPolicy]], rng=None):
    """Returns ``(SenderKeys, cDB)``."""
    if not records:
        raise ProtocolError("database needs at least one record")
    rng = _rng(rng)
    pk, sk = keygen(crs, rng)
    cdb = encrypt_records(crs, pk, sk, records, rng)
    psi = prove_keys(crs, pk, sk, rng)
    return SenderKeys(pk, sk, psi), cdb


def record_well_formed(crs: Crs, record: CiphertextRecord) -> bool:
    return len(record.c4) == crs.universe.n and tuple(len(r) for r in record.c5) == crs.universe.sizes


def check_record(crs: Crs, pk: SenderPublicKey, record: CiphertextRecord) -> bool:
    """BB check e(prod c4 * y, c1) = e(g1, g2), plus e(c2, g2) = e(prod c4, g2^beta)."""
    g = crs.group
    if not record_well_formed(crs, record):
        return False
    prod = g.identity(G1)
    for c in record.c4:
        prod = prod * c
    one = g.identity(GT)
    if g.multi_pair([(pk.y * prod, record.c1), (g.g1.inverse(), g.g2)]) != one:
        return False
    return g.multi_pair([(record.c2, g.g2), (prod.inverse(), pk.B2)]) == one


def check_public_key(crs: Crs, pk: SenderPublicKey) -> bool:
    g = crs.group
    return g.multi_pair([(pk.B, g.g2), (g.g1.inverse(), pk.B2)]).is_identity()


def _safe_verify(gs: GsCrs, eqs, proof) -> bool:
    try:
        return verify_ppe(gs, eqs, proof)
    except GsError:
        return False


def check_db(crs: Crs, pk: SenderPublicKey, psi: PPEProof, cdb: Sequence[CiphertextRecord]) -> str | None:
    """None when the database verifies, otherwise a reason code."""
    if not cdb:
        return "record-check-failed"
    if not _safe_verify(crs.gs_s, psi_statement(crs, pk), psi):
        return "proof-invalid"
    if not check_public_key(crs, pk):
        return "record-check-failed"
    for rec in cdb:
        if not check_record(crs, pk, rec):
            return "record-check-failed"
    return None


def verify_db(crs, pk, psi, cdb) -> bool:
    return check_db(crs, pk, psi, cdb) is None


# -- issue -------------------------------------------------------------------------


@dataclass(frozen=True)
class IssueRequest:
    R: tuple[Element, ...]
    phi: PPEProof


@dataclass(frozen=True)
class IssueSecret:
    attrs: AttributeList
    z: tuple[int, ...]


@dataclass(frozen=True)
class IssueResponse:
    d0: Element
    d1p: tuple[Element, ...]
    d2: tuple[Element, ...]
    d3: tuple[Element, ...]


@dataclass(frozen=True)
class AttributeSecretKey:
    attrs: AttributeList
    d0: Element
    d1: tuple[Element, ...]
    d2: tuple[Element, ...]
    d3: tuple[Element, ...]


def phi_statement(crs: Crs, R: Sequence[Element]) -> PPE:
    """e(prod A * prod T, g2) = e(g1, prod R), witnesses (A_1..A_n, T_1..T_n)."""
    g = crs.group
    n = crs.universe.n
    prod_r = g.identity(G2)
    for r in R:
        prod_r = prod_r * r
    return PPE.build([(None, {i: 1 for i in range(2 * n)}, g.g2, {})], g.pair(g.g1, prod_r), 2 * n, 0)


def issue_request(crs: Crs, attrs: AttributeList, rng=None, z=None) -> tuple[IssueRequest, IssueSecret]:
    g = crs.group
    rng = _rng(rng)
    if attrs.sizes != crs.universe.sizes:
        raise UniverseMismatchError("attribute list does not match the CRS universe")
    z = tuple(z) if z is not None else tuple(g.random_scalar(rng) for _ in attrs.choice)
    chosen_A = [crs.A[l][t] for l, t in enumerate(attrs.choice)]
    R = tuple(crs.B[l][t] * g.g2**zl for (l, t), zl in zip(enumerate(attrs.choice), z))
    T = [g.g1**zl for zl in z]
    phi = prove_ppe(crs.gs_r, phi_statement(crs, R), chosen_A + T, [], rng)
    return IssueRequest(R, phi), IssueSecret(attrs, z)


def verify_issue_request(crs: Crs, req: IssueRequest) -> bool:
    if len(req.R) != crs.universe.n:
        return False
    return _safe_verify(crs.gs_r, phi_statement(crs, req.R), req.phi)


def issue_respond(crs: Crs, sk: SenderSecretKey, req: IssueRequest, rng=None) -> IssueResponse | None:
    """ASK' for a verified request, or None when the proof fails."""
    if not verify_issue_request(crs, req):
        return None
    g = crs.group
    p = g.order
    rng = _rng(rng)
    s = g.random_scalar(rng)
    lam = [g.random_scalar(rng) for _ in req.R]
    d0 = g.g2 ** ((sk.w + s) * g.inv(sk.beta) % p)
    g2s = g.g2**s
    d1p = tuple(g2s * r**lm for r, lm in zip(req.R, lam))
    d2 = tuple(g.g2**lm for lm in lam)
    inv_alpha = g.inv(sk.alpha)
    d3 = tuple(g.g2 ** (lm * inv_alpha % p) for lm in lam)
    return IssueResponse(d0, d1p, d2, d3)


def issue_finalize(crs: Crs, pk: SenderPublicKey, secret: IssueSecret, resp: IssueResponse) -> AttributeSecretKey:
    g = crs.group
    n = crs.universe.n
    if not (len(resp.d1p) == len(resp.d2) == len(resp.d3) == n):
        raise KeyCheckError(0)
    d1 = tuple(d1p * d2 ** (-zl) for d1p, d2, zl in zip(resp.d1p, resp.d2, secret.z))
    want = pk.Y.inverse()
    inv_B = pk.B.inverse()
    for l, t in enumerate(secret.attrs.choice):
        # e(g1, d1) * Y / e(B, d0) = e(A, d2)
        lhs = g.multi_pair([(g.g1, d1[l]), (inv_B, resp.d0), (crs.A[l][t].inverse(), resp.d2[l])])
        if lhs != want:
            raise KeyCheckError(l)
    return AttributeSecretKey(secret.attrs, resp.d0, d1, resp.d2, resp.d3)


# -- transfer ----------------------------------------------------------------------


@dataclass(frozen=True)
class TransferRequest:
    req: Element  # G1
    pi: PPEProof
    com_hv: Vec3  # Com'(h)^v
    bind: PPEProof  # ties com_hv to the v in req


@dataclass(frozen=True)
class TransferSecret:
    index: int
    v: int
    pri: Element  # H^v


@dataclass(frozen=True)
class TransferResponse:
    res: Element  # e(Req, h)
    delta: PPEProof


def pi_statement(crs: Crs, pk: SenderPublicKey, req: Element) -> list[PPE]:
    """Witnesses x = (prod c4, c2), y = (c1, g2^v)."""
    g = crs.group
    return [
        PPE.build([(pk.y, {}, None, {0: 1}), (None, {0: 1}, None, {0: 1})], g.gt, 2, 2),
        PPE.build([(None, {1: 1}, g.g2, {}), (pk.B, {}, None, {1: 1})], g.pair(req, g.g2), 2, 2),
    ]


def delta_statement(crs: Crs, pk: SenderPublicKey, req: Element) -> list[PPE]:
    """Witnesses x = (Req^gamma, B^gamma), y = (h, g')."""
    g = crs.group
    one = g.identity(GT)
    return [
        PPE.build([(req.inverse(), {}, None, {0: 1}), (None, {0: 1}, None, {1: 1})], one, 2, 2),
        PPE.build([(pk.B.inverse(), {}, None, {0: 1}), (None, {1: 1}, None, {1: 1})], one, 2, 2),
        PPE.build([(g.g1, {}, None, {1: 1})], g.gt, 2, 2),
    ]


def bind_statement(crs: Crs, pk: SenderPublicKey, com_hv: Vec3) -> list[PPE]:
    """Witnesses x = (g1^v,), y = (g2^v,): ComHv is Com'(h)^v for the v inside Req."""
    g = crs.group
    eqs = [PPE.build([(None, {0: 1}, ch, {})], g.pair(g.g1, cv), 1, 1) for ch, cv in zip(pk.com_h, com_hv)]
    eqs.append(PPE.build([(None, {0: 1}, g.g2, {}), (g.g1.inverse(), {}, None, {0: 1})], g.identity(GT), 1, 1))
    return eqs


def transfer_request(crs: Crs, pk: SenderPublicKey, record: CiphertextRecord, index: int, rng=None,
                     v=None) -> tuple[TransferRequest, TransferSecret]:
    g = crs.group
    rng = _rng(rng)
    v = v if v is not None else g.random_scalar(rng)
    req = record.c2 * pk.B**v
    pri = pk.H**v
    com_hv = commitment_pow(Commitment(G2, pk.com_h), v).vec
    prod_c4 = g.identity(G1)
    for c in record.c4:
        prod_c4 = prod_c4 * c
    g2v = g.g2**v
    com_v = commit_g2(crs.gs_r, g2v, rng)
    pi = prove_ppe(crs.gs_r, pi_statement(crs, pk, req), [prod_c4, record.c2], [record.c1, g2v], rng,
                   d_given={1: com_v})
    bind = prove_ppe(crs.gs_r, bind_statement(crs, pk, com_hv), [g.g1**v], [g2v], rng, d_given={0: com_v})
    return TransferRequest(req, pi, com_hv, bind), TransferSecret(index, v, pri)


def verify_transfer_request(crs: Crs, pk: SenderPublicKey, req: TransferRequest) -> bool:
    if not _safe_verify(crs.gs_r, pi_statement(crs, pk, req.req), req.pi):
        return False
    # the binding proof must reuse pi's commitment to g2^v
    if len(req.bind.d) != 1 or req.bind.d[0] != req.pi.d[1]:
        return False
    return _safe_verify(crs.gs_r, bind_statement(crs, pk, req.com_hv), req.bind)


def transfer_respond(crs: Crs, pk: SenderPublicKey, sk: SenderSecretKey, req: TransferRequest,
                     rng=None) -> TransferResponse | None:
    """(Res, delta) for a verified request, None (the null string) otherwise."""
    if not verify_transfer_request(crs, pk, req):
        return None
    g = crs.group
    res = g.pair(req.req, sk.h)
    xs = [req.req**sk.gamma, sk.B_gamma]
    ys = [sk.h, g.g2]
    delta = prove_ppe(crs.gs_s, delta_statement(crs, pk, req.req), xs, ys, _rng(rng))
    return TransferResponse(res, delta)


def transfer_finalize(crs: Crs, pk: SenderPublicKey, ask: AttributeSecretKey, record: CiphertextRecord,
                      secret: TransferSecret, resp: TransferResponse) -> Element | None:
    """Decrypt; None when delta fails. A non-satisfying key yields an unrelated GT element."""
    g = crs.group
    if ask.attrs.sizes != crs.universe.sizes:
        raise UniverseMismatchError("key was issued for another universe")
    req = record.c2 * pk.B**secret.v
    if not _safe_verify(crs.gs_s, delta_statement(crs, pk, req), resp.delta):
        return None
    pairs = [(c4, d1) for c4, d1 in zip(record.c4, ask.d1)]
    pairs.append((record.c2.inverse(), ask.d0))
    for l, t in enumerate(ask.attrs.choice):
        pairs.append((record.c5[l][t].inverse(), ask.d3[l]))
    return record.c3 * g.multi_pair(pairs) * secret.pri / resp.res


# -- byte payloads -----------------------------------------------------------------


def random_payload(group: BilinearGroup, rng=None) -> Element:
    return group.gt ** group.random_scalar(_rng(rng), nonzero=True)


def payload_key(m: Element) -> bytes:
    return hashlib.sha256(b"aothap-payload-v1" + m.to_bytes()).digest()


def seal_payload(m: Element, data: bytes, rng=None) -> bytes:
    nonce = _rng(rng).randbytes(12)
    return nonce + AESGCM(payload_key(m)).encrypt(nonce, data, None)


def unseal_payload(m: Element, blob: bytes) -> bytes | None:
    if len(blob) < 12 + 16:
        return None
    try:
        return AESGCM(payload_key(m)).decrypt(blob[:12], blob[12:], None)
    except InvalidTag:
        return None
