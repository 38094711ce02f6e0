import random

import pytest
from hypothesis import given, settings, strategies as st

from aothap.bilinear import (
    G1,
    G2,
    GT,
    InvalidEncodingError,
    MalformedLengthError,
    NonCanonicalEncodingError,
    OffCurveError,
    DecodeError,
    bilinear_setup,
)

# Standard compressed generators of BLS12-381 (ZCash serialization).
G1_GEN_HEX = (
    "97f1d3a73197d7942695638c4fa9ac0fc3688c4f9774b905a14e3a3f171bac586c55e83ff97a1aeffb3af00adb22c6bb"
)
G2_GEN_HEX = (
    "93e02b6052719f607dacd3a088274f65596bd0d09920b61ab5da61bbdc7f5049334cf11213945d57e5ac7d055d042b7e"
    "024aa2b2f08f0a91260805272dc51051c6e47ad4fa403b02b4510b647ae3d1770bac0326a805bbefd48056c8c121bdb8"
)


def test_mock101_shape(mock101):
    assert mock101.order == 101
    assert mock101.g1.raw == 1 and mock101.g2.raw == 1


def test_mock_pair_is_product(mock101):
    g = mock101
    assert g.pair(g.g1**5, g.g2**7).raw == 35
    assert g.pair(g.g1**8, g.g2**38).raw == 1


def test_mock_multi_pair(mock101):
    g = mock101
    assert g.multi_pair([(g.g1**3, g.g2**4), (g.g1**5, g.g2**6)]).raw == 42


def test_multi_pair_matches_product(group):
    rng = random.Random(3)
    pairs = [(group.random(G1, rng), group.random(G2, rng)) for _ in range(4)]
    pairs.append((pairs[0][0], pairs[1][1]))  # shared G2 operand exercises the merge path
    want = group.identity(GT)
    for a, b in pairs:
        want = want * group.pair(a, b)
    assert group.multi_pair(pairs) == want


def test_multi_pair_cancellation(group):
    a = 12345
    assert group.multi_pair([(group.g1**a, group.g2), (group.g1, group.g2 ** (-a))]).is_identity()


def test_multi_pair_rejects_empty(group):
    with pytest.raises(ValueError):
        group.multi_pair([])


def test_generator_pairing_nontrivial(real):
    assert not real.pair(real.g1, real.g2).is_identity()
    assert real.pair(real.identity(G1), real.g2).is_identity()


def test_bilinearity_small_exponents(group):
    assert group.pair(group.g1**2, group.g2**3) == group.pair(group.g1, group.g2) ** 6


@settings(max_examples=100, deadline=None)
@given(a=st.integers(0, 2**255), b=st.integers(0, 2**255), x=st.integers(1, 2**64), y=st.integers(1, 2**64))
def test_bilinearity_property(a, b, x, y):
    g = bilinear_setup("standard-128bit")
    X, Y = g.g1**x, g.g2**y
    assert g.pair(X**a, Y**b) == g.pair(X, Y) ** (a * b)


@given(st.integers(1, 100), st.integers(1, 100), st.integers(1, 100))
def test_scalar_field_axioms(a, b, c):
    g = bilinear_setup("mock(101)")
    p = g.order
    assert (a * (b + c)) % p == (a * b + a * c) % p
    assert ((a * b) * c) % p == (a * (b * c)) % p
    assert a * g.inv(a) % p == 1


def test_order_annihilates(group):
    for kind in (G1, G2, GT):
        e = group.generator(kind)
        assert (e ** group.order).is_identity()


def test_standard_generator_encodings(real):
    assert real.g1.to_bytes().hex() == G1_GEN_HEX
    assert real.g2.to_bytes().hex() == G2_GEN_HEX


def test_identity_encoding(real):
    assert real.identity(G1).to_bytes() == bytes([0xC0]) + bytes(47)
    assert real.identity(G2).to_bytes() == bytes([0xC0]) + bytes(95)


@pytest.mark.parametrize("kind", [G1, G2, GT])
def test_round_trip(group, kind):
    rng = random.Random(kind)
    for _ in range(5):
        e = group.random(kind, rng)
        assert group.deserialize(kind, group.serialize(e)) == e
    ident = group.identity(kind)
    assert group.deserialize(kind, ident.to_bytes()) == ident


@pytest.mark.parametrize("kind", [G1, G2, GT])
def test_truncated_is_malformed_length(group, kind):
    data = group.random(kind, random.Random(1)).to_bytes()
    with pytest.raises(MalformedLengthError) as ei:
        group.deserialize(kind, data[:-1])
    assert ei.value.code == "malformed-length"


@pytest.mark.parametrize("kind", [G1, G2])
def test_all_zero_is_invalid_encoding(real, kind):
    with pytest.raises(InvalidEncodingError) as ei:
        real.deserialize(kind, bytes(real.element_size(kind)))
    assert ei.value.code == "invalid-encoding"


def test_x_not_reduced_is_non_canonical(real):
    data = bytearray(b"\xff" * 48)
    data[0] = 0x9F  # compressed flag, no infinity flag, x >= p
    with pytest.raises(NonCanonicalEncodingError):
        real.deserialize(G1, bytes(data))


def test_off_curve_point(real):
    # x = 0 is not on y^2 = x^3 + 4 since 4 is a square; scan for a non-residue instead
    for x in range(1, 50):
        data = bytes([0x80]) + bytes(46) + bytes([x])
        try:
            real.deserialize(G1, data)
        except OffCurveError as exc:
            assert exc.code == "off-curve"
            return
        except DecodeError:
            continue
    pytest.fail("no off-curve x found in range")


def test_decode_errors_are_distinct():
    codes = {c.code for c in (MalformedLengthError, InvalidEncodingError, NonCanonicalEncodingError, OffCurveError)}
    assert len(codes) == 4


def test_mock_encoding_is_8_byte_little_endian(mock101):
    assert (mock101.g1**5).to_bytes() == bytes([5, 0, 0, 0, 0, 0, 0, 0])
    with pytest.raises(NonCanonicalEncodingError):
        mock101.deserialize(G1, (101).to_bytes(8, "little"))


def test_profiles():
    assert bilinear_setup("mock(101)") == bilinear_setup("mock:101")
    with pytest.raises(ValueError):
        bilinear_setup("mock(100)")
    with pytest.raises(ValueError):
        bilinear_setup("weird-profile")
