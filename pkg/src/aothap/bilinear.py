"""Asymmetric bilinear groups.

Two backends share one element interface (multiplicative notation:
``*`` is the group law, ``**`` raises to an integer exponent):

* ``standard-128bit``: BLS12-381 through RELIC (petrelic bindings). G1/G2
  use the ZCash compressed point format, GT the uncompressed Fp12 tower
  encoding (12 base-field elements, big-endian).
* ``mock(p)``: G1 = G2 = GT = (Z_p, +) with generator 1 and
  e(x, y) = x*y mod p. Discrete logs are free, which is the point: every
  algebraic identity in the protocol can be checked by hand. Never use it
  for anything but tests.
"""

from __future__ import annotations

import re
import secrets
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Iterable

from petrelic.bn import Bn
from petrelic.multiplicative.pairing import (
    G1 as _RG1,
    G2 as _RG2,
    GT as _RGT,
    G1Element as _RG1Element,
    G2Element as _RG2Element,
    GTElement as _RGTElement,
)

G1 = "G1"
G2 = "G2"
GT = "GT"
KINDS = (G1, G2, GT)

STANDARD_PROFILE = "standard-128bit"
DEFAULT_MOCK_PRIME = 2**61 - 1

# BLS12-381 base field modulus.
FIELD_P = int(
    "1a0111ea397fe69a4b1ba7b6434bacd764774b84f38512bf6730d2a0f6b0f6241e"
    "abfffeb153ffffb9feffffffffaaab",
    16,
)
_HALF_P = (FIELD_P - 1) // 2


class DecodeError(ValueError):
    code = "decode-failed"


class MalformedLengthError(DecodeError):
    code = "malformed-length"


class InvalidEncodingError(DecodeError):
    code = "invalid-encoding"


class NonCanonicalEncodingError(DecodeError):
    code = "non-canonical"


class OffCurveError(DecodeError):
    code = "off-curve"


class SubgroupError(DecodeError):
    code = "not-in-subgroup"


# Instrumentation hook. Each active counter is an object with
# ``add_pairings(n)`` and ``add_exp(kind)``; see testkit.counted.
_counters: ContextVar[tuple] = ContextVar("aothap_counters", default=())


def _note_pairings(n: int) -> None:
    for c in _counters.get():
        c.add_pairings(n)


def _note_exp(kind: str) -> None:
    for c in _counters.get():
        c.add_exp(kind)


class Element:
    """Common operator surface; subclasses provide ``_mul``, ``_pow``, ``_inv``."""

    __slots__ = ("group", "kind", "raw")

    def __init__(self, group: "BilinearGroup", kind: str, raw):
        self.group = group
        self.kind = kind
        self.raw = raw

    def _check(self, other: "Element") -> None:
        if not isinstance(other, Element) or other.kind != self.kind or other.group != self.group:
            raise TypeError(f"cannot combine {self.kind} element with {other!r}")

    def __mul__(self, other: "Element") -> "Element":
        self._check(other)
        return type(self)(self.group, self.kind, self._mul(other.raw))

    def __truediv__(self, other: "Element") -> "Element":
        return self * other.inverse()

    def __pow__(self, k: int) -> "Element":
        _note_exp(self.kind)
        return type(self)(self.group, self.kind, self._pow(int(k) % self.group.order))

    def inverse(self) -> "Element":
        return type(self)(self.group, self.kind, self._inv())

    def is_identity(self) -> bool:
        return self == self.group.identity(self.kind)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Element)
            and other.kind == self.kind
            and other.group == self.group
            and self.raw == other.raw
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.raw))

    def to_bytes(self) -> bytes:
        return self.group.serialize(self)

    def __repr__(self) -> str:
        return f"{self.kind}({self.to_bytes().hex()[:16]}...)"


class MockElement(Element):
    __slots__ = ()

    def _mul(self, other):
        return (self.raw + other) % self.group.order

    def _pow(self, k):
        return self.raw * k % self.group.order

    def _inv(self):
        return -self.raw % self.group.order

    def __repr__(self) -> str:
        return f"{self.kind}<{self.raw}>"


class RelicElement(Element):
    __slots__ = ()

    def _mul(self, other):
        return self.raw * other

    def _pow(self, k):
        return self.raw ** k

    def _inv(self):
        return self.raw.inverse()


@dataclass(frozen=True, eq=False)
class BilinearGroup:
    """Public pairing context ``(p, G1, G2, GT, e, g1, g2)``."""

    order: int
    backend: str  # "real" | "mock"
    g1: Element = field(init=False, repr=False)
    g2: Element = field(init=False, repr=False)
    gt: Element = field(init=False, repr=False)

    def __post_init__(self):
        if self.backend == "mock":
            mk = lambda kind, v: MockElement(self, kind, v)  # noqa: E731
            g1, g2, gt = mk(G1, 1), mk(G2, 1), mk(GT, 1)
            ids = {k: mk(k, 0) for k in KINDS}
        else:
            mk = lambda kind, v: RelicElement(self, kind, v)  # noqa: E731
            g1, g2 = mk(G1, _RG1.generator()), mk(G2, _RG2.generator())
            gt = mk(GT, g1.raw.pair(g2.raw))
            ids = {
                G1: mk(G1, _RG1.neutral_element()),
                G2: mk(G2, _RG2.neutral_element()),
                GT: mk(GT, _RGT.neutral_element()),
            }
        object.__setattr__(self, "g1", g1)
        object.__setattr__(self, "g2", g2)
        object.__setattr__(self, "gt", gt)
        object.__setattr__(self, "_identities", ids)

    # equality by parameters so that two setups of the same profile interoperate
    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BilinearGroup)
            and self.backend == other.backend
            and self.order == other.order
        )

    def __hash__(self) -> int:
        return hash((self.backend, self.order))

    @property
    def profile(self) -> str:
        return STANDARD_PROFILE if self.backend == "real" else f"mock({self.order})"

    def generator(self, kind: str) -> Element:
        return {G1: self.g1, G2: self.g2, GT: self.gt}[kind]

    def identity(self, kind: str) -> Element:
        return self._identities[kind]

    # scalars are plain ints in [0, p)
    def random_scalar(self, rng=None, nonzero: bool = False) -> int:
        rng = rng or secrets.SystemRandom()
        if nonzero:
            return rng.randrange(1, self.order)
        return rng.randrange(self.order)

    def random(self, kind: str, rng=None) -> Element:
        return self.generator(kind) ** self.random_scalar(rng)

    def inv(self, x: int) -> int:
        x %= self.order
        if x == 0:
            raise ZeroDivisionError("zero has no inverse mod p")
        return pow(x, -1, self.order)

    def pair(self, a: Element, b: Element) -> Element:
        if a.kind != G1 or b.kind != G2:
            raise TypeError("pair expects (G1, G2)")
        _note_pairings(1)
        return self._pair_raw(a, b)

    def _pair_raw(self, a: Element, b: Element) -> Element:
        if self.backend == "mock":
            return MockElement(self, GT, a.raw * b.raw % self.order)
        return RelicElement(self, GT, a.raw.pair(b.raw))

    def multi_pair(self, pairs: Iterable[tuple[Element, Element]]) -> Element:
        """Product of pairings; counted as one pairing per input pair."""
        pairs = list(pairs)
        if not pairs:
            raise ValueError("multi_pair needs at least one pair")
        _note_pairings(len(pairs))
        # merge terms sharing a G2 operand: prod e(a_i, b) = e(prod a_i, b)
        merged: dict[Element, Element] = {}
        for a, b in pairs:
            if a.kind != G1 or b.kind != G2:
                raise TypeError("multi_pair expects (G1, G2) pairs")
            merged[b] = merged[b] * a if b in merged else a
        acc = None
        for b, a in merged.items():
            if a.is_identity() or b.is_identity():
                continue
            val = self._pair_raw(a, b)
            acc = val if acc is None else acc * val
        return acc if acc is not None else self.identity(GT)

    # -- encodings ---------------------------------------------------------

    def element_size(self, kind: str) -> int:
        if self.backend == "mock":
            return 8
        return {G1: 48, G2: 96, GT: 576}[kind]

    def serialize(self, elem: Element) -> bytes:
        if elem.group != self:
            raise TypeError("element belongs to another group")
        if self.backend == "mock":
            return elem.raw.to_bytes(8, "little")
        if elem.kind == G1:
            return _g1_to_bytes(elem.raw)
        if elem.kind == G2:
            return _g2_to_bytes(elem.raw)
        return elem.raw.to_binary(False)

    def deserialize(self, kind: str, data: bytes) -> Element:
        data = bytes(data)
        if len(data) != self.element_size(kind):
            raise MalformedLengthError(
                f"{kind} encoding must be {self.element_size(kind)} bytes, got {len(data)}"
            )
        if self.backend == "mock":
            v = int.from_bytes(data, "little")
            if v >= self.order:
                raise NonCanonicalEncodingError(f"mock value {v} >= p")
            return MockElement(self, kind, v)
        if kind == G1:
            raw = _g1_from_bytes(data)
        elif kind == G2:
            raw = _g2_from_bytes(data)
        elif kind == GT:
            raw = _gt_from_bytes(data)
        else:
            raise ValueError(f"unknown group {kind!r}")
        return RelicElement(self, kind, raw)


def bilinear_setup(profile: str = STANDARD_PROFILE) -> BilinearGroup:
    """Build a group from a profile name: ``standard-128bit`` or ``mock(<prime>)``."""
    if profile in (STANDARD_PROFILE, "real", "bls12-381"):
        return BilinearGroup(order=int(str(_RG1.order())), backend="real")
    m = re.fullmatch(r"mock(?:\((\d+)\)|:(\d+))?", profile.strip())
    if m is None:
        raise ValueError(f"unknown security profile {profile!r}")
    digits = m.group(1) or m.group(2)
    return mock_group(int(digits) if digits else DEFAULT_MOCK_PRIME)


def mock_group(p: int) -> BilinearGroup:
    if p < 3 or not Bn.from_num(p).is_prime():
        raise ValueError(f"mock group order must be an odd prime, got {p}")
    if p >= 2**64:
        raise ValueError("mock group order must fit the 8-byte encoding")
    return BilinearGroup(order=p, backend="mock")


# -- BLS12-381 point codecs --------------------------------------------------


def _fp2_mul(a, b):
    return ((a[0] * b[0] - a[1] * b[1]) % FIELD_P, (a[0] * b[1] + a[1] * b[0]) % FIELD_P)


def _is_square_fp(v: int) -> bool:
    return v == 0 or pow(v, _HALF_P, FIELD_P) == 1


def _g1_to_bytes(raw) -> bytes:
    if raw.is_neutral_element():
        return b"\xc0" + bytes(47)
    u = raw.to_binary(False)
    y = int.from_bytes(u[49:97], "big")
    flags = 0x80 | (0x20 if y > _HALF_P else 0)
    return bytes([u[1] | flags]) + u[2:49]


def _g2_to_bytes(raw) -> bytes:
    if raw.is_neutral_element():
        return b"\xc0" + bytes(95)
    u = raw.to_binary(False)
    x0, x1 = u[1:49], u[49:97]
    y0, y1 = int.from_bytes(u[97:145], "big"), int.from_bytes(u[145:193], "big")
    sign = y1 > _HALF_P if y1 else y0 > _HALF_P
    flags = 0x80 | (0x20 if sign else 0)
    return bytes([x1[0] | flags]) + x1[1:] + x0


def _split_flags(data: bytes):
    head = data[0]
    if not head & 0x80:
        raise InvalidEncodingError("compression flag not set")
    infinity, sign = bool(head & 0x40), bool(head & 0x20)
    body = bytes([head & 0x1F]) + data[1:]
    if infinity:
        if sign or any(body):
            raise NonCanonicalEncodingError("point at infinity must be 0xc0 || 0...")
        return None, False
    return body, sign


def _g1_from_bytes(data: bytes):
    body, sign = _split_flags(data)
    if body is None:
        return _RG1.neutral_element()
    x = int.from_bytes(body, "big")
    if x >= FIELD_P:
        raise NonCanonicalEncodingError("x coordinate not reduced")
    if not _is_square_fp((x * x * x + 4) % FIELD_P):
        raise OffCurveError("no G1 point with this x coordinate")
    pt = _RG1Element.from_binary(b"\x02" + body)
    y = int.from_bytes(pt.to_binary(False)[49:97], "big")
    if (y > _HALF_P) != sign:
        pt = pt.inverse()
    if not pt.is_valid():
        raise SubgroupError("G1 point outside the prime-order subgroup")
    return pt


def _g2_from_bytes(data: bytes):
    body, sign = _split_flags(data)
    if body is None:
        return _RG2.neutral_element()
    x1, x0 = int.from_bytes(body[:48], "big"), int.from_bytes(body[48:], "big")
    if x1 >= FIELD_P or x0 >= FIELD_P:
        raise NonCanonicalEncodingError("x coordinate not reduced")
    x = (x0, x1)
    rhs = _fp2_mul(_fp2_mul(x, x), x)
    rhs = ((rhs[0] + 4) % FIELD_P, (rhs[1] + 4) % FIELD_P)
    # a in Fp2 is a square iff its norm is a square in Fp
    if not _is_square_fp((rhs[0] ** 2 + rhs[1] ** 2) % FIELD_P):
        raise OffCurveError("no G2 point with this x coordinate")
    pt = _RG2Element.from_binary(b"\x02" + x0.to_bytes(48, "big") + x1.to_bytes(48, "big"))
    u = pt.to_binary(False)
    y0, y1 = int.from_bytes(u[97:145], "big"), int.from_bytes(u[145:193], "big")
    if (y1 > _HALF_P if y1 else y0 > _HALF_P) != sign:
        pt = pt.inverse()
    if not pt.is_valid():
        raise SubgroupError("G2 point outside the prime-order subgroup")
    return pt


def _gt_from_bytes(data: bytes):
    for i in range(0, 576, 48):
        if int.from_bytes(data[i : i + 48], "big") >= FIELD_P:
            raise NonCanonicalEncodingError("GT coefficient not reduced")
    elem = _RGTElement.from_binary(data)
    if not elem.is_valid():
        raise SubgroupError("not an element of the order-p subgroup of Fp12*")
    return elem
