import random

import pytest

from aothap import protocol as P
from aothap.attributes import AccessPolicy, AttributeList, AttributeUniverse
from aothap.bilinear import G1, GT
from aothap.groth_sahai import Mode, prove_ppe, verify_ppe
from aothap.testkit import (
    CountingError,
    ForeignWitnessError,
    counted,
    extract_attribute_list,
    extract_record,
    extract_sender_view,
    extract_transfer_index,
    policy_slots,
    simulate_delta,
    simulate_psi,
    simulate_response,
)

from conftest import issue_key, make_instance, random_list


def test_extract_attribute_list(group):
    inst = make_instance(group, (2, 3, 4), 1, seed=50)
    rng = random.Random(50)
    for _ in range(10):
        attrs = random_list(inst["universe"], rng)
        req, _ = P.issue_request(inst["crs"], attrs, rng)
        assert extract_attribute_list(inst["crs"], inst["td"], req) == attrs


def test_extract_single_attribute(mock):
    inst = make_instance(mock, (3,), 1, seed=51)
    for t in range(3):
        req, _ = P.issue_request(inst["crs"], AttributeList((3,), (t,)), inst["rng"])
        assert extract_attribute_list(inst["crs"], inst["td"], req).choice == (t,)


def test_foreign_witness_reported(group):
    inst = make_instance(group, (2, 2), 1, seed=52)
    crs, rng = inst["crs"], inst["rng"]
    req, sec = P.issue_request(crs, AttributeList((2, 2), (0, 1)), rng)
    # shift A_1 off the CRS and compensate in T_1; the product equation still holds
    d = group.g1 ** 12345
    xs = [crs.A[0][0], crs.A[1][1] * d, group.g1 ** sec.z[0], group.g1 ** sec.z[1] / d]
    eq = P.phi_statement(crs, req.R)
    forged = P.IssueRequest(req.R, prove_ppe(crs.gs_r, eq, xs, [], rng))
    assert P.verify_issue_request(crs, forged)
    with pytest.raises(ForeignWitnessError) as ei:
        extract_attribute_list(crs, inst["td"], forged)
    assert ei.value.attribute == 1


def test_extract_transfer_index_sweep(mock):
    inst = make_instance(mock, (2, 2), 8, seed=53)
    crs, pk, rng = inst["crs"], inst["keys"].pk, inst["rng"]
    got = []
    for i, rec in enumerate(inst["cdb"]):
        req, _ = P.transfer_request(crs, pk, rec, i, rng)
        got.append(extract_transfer_index(crs, inst["td"], inst["cdb"], req))
    assert got == list(range(8))


def test_extract_transfer_index_never_none(mock):
    inst = make_instance(mock, (2,), 4, seed=54)
    crs, pk, rng = inst["crs"], inst["keys"].pk, inst["rng"]
    for _ in range(200):
        i = rng.randrange(4)
        req, _ = P.transfer_request(crs, pk, inst["cdb"][i], i, rng)
        assert extract_transfer_index(crs, inst["td"], inst["cdb"], req) == i


def test_extract_transfer_index_unknown_record(mock):
    inst = make_instance(mock, (2,), 2, seed=55)
    req, _ = P.transfer_request(inst["crs"], inst["keys"].pk, inst["cdb"][0], 0, inst["rng"])
    assert extract_transfer_index(inst["crs"], inst["td"], inst["cdb"][1:], req) is None


def test_extract_record_round_trip(group):
    inst = make_instance(group, (2, 3), 6, seed=56)
    view = extract_sender_view(inst["crs"], inst["td"], inst["keys"].psi)
    for rec, m, w in zip(inst["cdb"], inst["payloads"], inst["policies"]):
        assert extract_record(inst["crs"], inst["td"], view, rec) == (m, w)


def test_extract_record_full_policy(mock):
    full = AccessPolicy.allow_all((2, 3))
    inst = make_instance(mock, (2, 3), 1, seed=57, policies=[full])
    view = extract_sender_view(inst["crs"], inst["td"], inst["keys"].psi)
    assert extract_record(inst["crs"], inst["td"], view, inst["cdb"][0])[1] == full


def test_policy_test_has_no_false_positives(mock):
    inst = make_instance(mock, (2, 2), 1, seed=58, policies=[AccessPolicy.of((2, 2), [{0}, {1}])])
    crs, td, rng = inst["crs"], inst["td"], random.Random(58)
    view = extract_sender_view(crs, td, inst["keys"].psi)
    rec = inst["cdb"][0]
    hits = 0
    for _ in range(10_000):
        c5 = tuple(tuple(crs.group.random(G1, rng) for _ in row) for row in rec.c5)
        slots = policy_slots(crs, td, view, P.CiphertextRecord(rec.c1, rec.c2, rec.c3, rec.c4, c5))
        hits += sum(len(s) for s in slots)
    assert hits == 0


def test_simulated_proofs_verify(group):
    inst = make_instance(group, (2,), 1, seed=59, gs_s_mode=Mode.WI)
    crs, td, pk, rng = inst["crs"], inst["td"], inst["keys"].pk, inst["rng"]
    assert verify_ppe(crs.gs_s, P.psi_statement(crs, pk), simulate_psi(crs, td, pk, rng))
    req, _ = P.transfer_request(crs, pk, inst["cdb"][0], 0, rng)
    assert verify_ppe(crs.gs_s, P.delta_statement(crs, pk, req.req), simulate_delta(crs, td, pk, req.req, rng))
    fake = simulate_response(crs, td, pk, req, group.random(GT, rng), rng)
    assert verify_ppe(crs.gs_s, P.delta_statement(crs, pk, req.req), fake.delta)


def test_counted_rejects_nested_same_label(mock):
    with pytest.raises(CountingError):
        counted("x", lambda: counted("x", lambda: None))


def test_counted_nested_scopes_both_count(mock):
    def inner():
        mock.pair(mock.g1, mock.g2)
        return mock.g1 ** 3

    (_, inner_ctr), outer = counted("outer", lambda: counted("inner", inner))
    assert inner_ctr.pairings == outer.pairings == 1
    assert inner_ctr.exp_g1 == outer.exp_g1 == 1


@pytest.mark.parametrize("n_records", [4, 16, 64])
def test_encryption_core_is_n_plus_2(mock, n_records):
    u = AttributeUniverse.from_sizes((2, 3))
    crs, _ = P.crs_setup(mock, u, random.Random(n_records))
    rng = random.Random(1)
    recs = [(P.random_payload(mock, rng), AccessPolicy.allow_all(u.sizes)) for _ in range(n_records)]

    def core():
        pk, sk = P.keygen(crs, rng)
        return P.encrypt_records(crs, pk, sk, recs, rng)

    _, ctr = counted("encrypt", core)
    assert ctr.pairings == n_records + 2


def test_counts_are_deterministic(mock):
    def run():
        inst = make_instance(mock, (2, 2), 2, seed=60)
        ask = issue_key(inst, AttributeList((2, 2), (0, 0)))
        return ask

    _, a = counted("a", run)
    _, b = counted("b", run)
    assert (a.pairings, a.exponentiations) == (b.pairings, b.exponentiations)
