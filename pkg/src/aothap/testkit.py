"""Test-only oracles: operation counters, trapdoor extraction, simulation and mutators.

Nothing here belongs in a production flow. The sender view extracted from a
key proof is marked ``test_only`` and the artifact writers refuse it.
"""

from __future__ import annotations

import dataclasses
import random
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Iterator, TypeVar

from . import bilinear
from . import protocol as P
from .attributes import AccessPolicy, AttributeList
from .bilinear import G1, G2, Element
from .groth_sahai import PPEProof, extract_commitment, simulate_proof

T = TypeVar("T")


class CountingError(RuntimeError):
    pass


class ForeignWitnessError(ValueError):
    """An extracted witness matches no CRS constant."""

    def __init__(self, attribute: int, element: Element):
        super().__init__(f"attribute {attribute}: extracted witness is not a CRS constant")
        self.attribute = attribute
        self.element = element


@dataclass
class OpCounters:
    label: str
    pairings: int = 0
    exp_g1: int = 0
    exp_g2: int = 0
    exp_gt: int = 0

    def add_pairings(self, n: int) -> None:
        self.pairings += n

    def add_exp(self, kind: str) -> None:
        if kind == G1:
            self.exp_g1 += 1
        elif kind == G2:
            self.exp_g2 += 1
        else:
            self.exp_gt += 1

    @property
    def exponentiations(self) -> int:
        return self.exp_g1 + self.exp_g2 + self.exp_gt


_active_labels: ContextVar[tuple] = ContextVar("aothap_count_labels", default=())


def counted(label: str, thunk: Callable[[], T]) -> tuple[T, OpCounters]:
    """Run ``thunk`` with a fresh counter attached; enclosing counters keep counting too."""
    labels = _active_labels.get()
    if label in labels:
        raise CountingError(f"counter scope {label!r} is already active")
    ctr = OpCounters(label)
    tok_l = _active_labels.set(labels + (label,))
    tok_c = bilinear._counters.set(bilinear._counters.get() + (ctr,))
    try:
        result = thunk()
    finally:
        bilinear._counters.reset(tok_c)
        _active_labels.reset(tok_l)
    return result, ctr


# -- extraction --------------------------------------------------------------------


def extract_attribute_list(crs: P.Crs, td: P.CrsTrapdoors, req: P.IssueRequest) -> AttributeList:
    choice = []
    for l, com in enumerate(req.phi.c[: crs.universe.n]):
        a = extract_commitment(td.gs_r, com)
        try:
            choice.append(crs.A[l].index(a))
        except ValueError:
            raise ForeignWitnessError(l, a) from None
    return AttributeList(crs.universe.sizes, tuple(choice))


def extract_transfer_index(crs: P.Crs, td: P.CrsTrapdoors, cdb, req: P.TransferRequest) -> int | None:
    """Index of the record whose (c1, prod c4, c2) the request commits to; None means a forged signature."""
    g = crs.group
    wit1 = extract_commitment(td.gs_r, req.pi.d[0])
    wit2 = extract_commitment(td.gs_r, req.pi.c[0])
    wit4 = extract_commitment(td.gs_r, req.pi.c[1])
    for i, rec in enumerate(cdb):
        prod = g.identity(G1)
        for c in rec.c4:
            prod = prod * c
        if rec.c1 == wit1 and rec.c2 == wit4 and prod == wit2:
            return i
    return None


@dataclass(frozen=True)
class SenderView:
    h: Element
    g2_w: Element
    g2_alpha: Element
    test_only = True


def extract_sender_view(crs: P.Crs, td: P.CrsTrapdoors, psi: PPEProof) -> SenderView:
    """Open g2^w, h and g2^alpha from the key proof (needs the GS_S extraction trapdoor)."""
    d = psi.d
    return SenderView(
        h=extract_commitment(td.gs_s, d[1]),
        g2_w=extract_commitment(td.gs_s, d[0]),
        g2_alpha=extract_commitment(td.gs_s, d[2]),
    )


def policy_slots(crs: P.Crs, td: P.CrsTrapdoors, view: SenderView, record: P.CiphertextRecord) -> list[set[int]]:
    """Per attribute, the value indices whose c5 entry passes the allowed-value test."""
    g = crs.group
    slots = []
    for l, (row, c4) in enumerate(zip(record.c5, record.c4)):
        want = g.pair(c4, view.g2_alpha)
        slot = set()
        for t, c5 in enumerate(row):
            a = td.a[l][t]
            if a == 0:
                hit = c5.is_identity()
            else:
                hit = g.pair(c5 ** g.inv(a), g.g2) == want
            if hit:
                slot.add(t)
        slots.append(slot)
    return slots


def extract_record(crs: P.Crs, td: P.CrsTrapdoors, view: SenderView, record: P.CiphertextRecord):
    """Recover ``(payload, policy)`` from a record."""
    g = crs.group
    prod = g.identity(G1)
    for c in record.c4:
        prod = prod * c
    payload = record.c3 / g.multi_pair([(prod, view.g2_w), (record.c2, view.h)])
    allowed = tuple(frozenset(s) for s in policy_slots(crs, td, view, record))
    return payload, AccessPolicy(crs.universe.sizes, allowed)


# -- simulation --------------------------------------------------------------------


def simulate_psi(crs: P.Crs, td: P.CrsTrapdoors, pk: P.SenderPublicKey, rng=None) -> PPEProof:
    return simulate_proof(crs.gs_s, td.gs_s, P.psi_statement(crs, pk), rng)


def simulate_delta(crs: P.Crs, td: P.CrsTrapdoors, pk: P.SenderPublicKey, req: Element, rng=None) -> PPEProof:
    return simulate_proof(crs.gs_s, td.gs_s, P.delta_statement(crs, pk, req), rng)


def simulate_response(crs: P.Crs, td: P.CrsTrapdoors, pk: P.SenderPublicKey, req: P.TransferRequest,
                      res: Element, rng=None) -> P.TransferResponse:
    """A response built without the secret key: caller-chosen Res plus a simulated delta."""
    return P.TransferResponse(res, simulate_delta(crs, td, pk, req.req, rng))


# -- mutators ----------------------------------------------------------------------


def _proof_slots(proof: PPEProof) -> list[tuple]:
    slots = []
    for name, vecs in (("c", proof.c), ("d", proof.d)):
        for i, vec in enumerate(vecs):
            for k in range(3):
                slots.append((name, None, i, k))
    for q, part in enumerate(proof.parts):
        for name in ("p", "p_prime"):
            vecs = getattr(part, name)
            if vecs is not None:
                for j in range(3):
                    for k in range(3):
                        slots.append((name, q, j, k))
    return slots


def _replace(vecs, i, k, value):
    vec = list(vecs[i])
    vec[k] = value
    out = list(vecs)
    out[i] = tuple(vec)
    return tuple(out)


def mutate_proof(proof: PPEProof, rng: random.Random) -> PPEProof:
    """Replace one uniformly chosen element by a different random element of its group."""
    name, q, i, k = rng.choice(_proof_slots(proof))
    if q is None:
        vecs = getattr(proof, name)
    else:
        vecs = getattr(proof.parts[q], name)
    old = vecs[i][k]
    new = old
    while new == old:
        new = old.group.random(old.kind, rng)
    if q is None:
        return dataclasses.replace(proof, **{name: _replace(vecs, i, k, new)})
    parts = list(proof.parts)
    parts[q] = dataclasses.replace(parts[q], **{name: _replace(vecs, i, k, new)})
    return dataclasses.replace(proof, parts=tuple(parts))


def mutate_record(record: P.CiphertextRecord, rng: random.Random) -> P.CiphertextRecord:
    """Replace c1, c2 or one c4 entry with a random element."""
    field = rng.choice(["c1", "c2", "c4"])
    if field == "c4":
        l = rng.randrange(len(record.c4))
        c4 = list(record.c4)
        c4[l] = _fresh(c4[l], rng)
        return dataclasses.replace(record, c4=tuple(c4))
    return dataclasses.replace(record, **{field: _fresh(getattr(record, field), rng)})


def _fresh(old: Element, rng) -> Element:
    new = old
    while new == old:
        new = old.group.random(old.kind, rng)
    return new


def mutate_bytes(data: bytes, rng: random.Random) -> bytes:
    """Flip, truncate, extend or splice, picked at random."""
    op = rng.randrange(4)
    buf = bytearray(data)
    if op == 0 and buf:
        pos = rng.randrange(len(buf))
        buf[pos] ^= 1 << rng.randrange(8)
    elif op == 1 and len(buf) > 1:
        del buf[rng.randrange(1, len(buf)):]
    elif op == 2:
        buf += bytes(rng.randrange(256) for _ in range(rng.randrange(1, 16)))
    else:
        pos = rng.randrange(len(buf) + 1)
        buf[pos:pos + 8] = bytes(rng.randrange(256) for _ in range(8))
    return bytes(buf)


def iter_mutated_requests(frames: list[bytes], rng: random.Random, count: int) -> Iterator[bytes]:
    for _ in range(count):
        yield mutate_bytes(rng.choice(frames), rng)


__all__ = [
    "CountingError",
    "ForeignWitnessError",
    "OpCounters",
    "SenderView",
    "counted",
    "extract_attribute_list",
    "extract_record",
    "extract_sender_view",
    "extract_transfer_index",
    "mutate_bytes",
    "mutate_proof",
    "mutate_record",
    "policy_slots",
    "simulate_delta",
    "simulate_psi",
    "simulate_response",
]
