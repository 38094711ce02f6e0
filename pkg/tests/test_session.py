import dataclasses
import random
import threading

import pytest
from hypothesis import given, settings, strategies as st

from aothap import protocol as P
from aothap.attributes import AccessPolicy, AttributeList
from aothap.session import (
    LoopbackTransport,
    ReceiverSession,
    SenderServer,
    SenderSession,
    SessionError,
    SocketTransport,
    receiver_run_issue,
    receiver_run_transfer,
    sender_step,
)
from aothap.wire import ProtocolMessage, Reason, Tag, decode, encode

from conftest import make_instance


@pytest.fixture(scope="module")
def inst():
    from aothap.bilinear import bilinear_setup

    g = bilinear_setup("mock")
    return make_instance(g, (2, 2), 4, seed=40, policies=[AccessPolicy.allow_all((2, 2))] * 4)


def receiver(inst, seed):
    k = inst["keys"]
    return ReceiverSession(inst["crs"], k.pk, k.psi, inst["cdb"], rng=random.Random(seed))


def test_loopback_happy_path(inst):
    sender = SenderSession(inst["crs"], inst["keys"], quota=2, rng=random.Random(1))
    rs = receiver(inst, 2)
    t = LoopbackTransport(sender)
    assert receiver_run_issue(rs, t, AttributeList((2, 2), (0, 1))).ok
    out = receiver_run_transfer(rs, t, 3)
    assert out.ok and out.value == inst["payloads"][3]
    assert rs.recovered == [(3, inst["payloads"][3])]


def test_quota_third_transfer_rejected(inst):
    sender = SenderSession(inst["crs"], inst["keys"], quota=2, rng=random.Random(1))
    rs = receiver(inst, 3)
    t = LoopbackTransport(sender)
    receiver_run_issue(rs, t, AttributeList((2, 2), (0, 0)))
    assert receiver_run_transfer(rs, t, 0).ok
    assert receiver_run_transfer(rs, t, 1).ok
    third = receiver_run_transfer(rs, t, 2)
    assert not third.ok and third.reason == "quota"
    assert sender.transfers == 2


def test_approval_hook_deny(inst):
    calls = []

    def hook(phase, session):
        calls.append(phase)
        return phase != "transfer"

    sender = SenderSession(inst["crs"], inst["keys"], quota=5, approve=hook, rng=random.Random(1))
    rs = receiver(inst, 4)
    t = LoopbackTransport(sender)
    assert receiver_run_issue(rs, t, AttributeList((2, 2), (1, 1))).ok
    out = receiver_run_transfer(rs, t, 0)
    assert not out.ok and out.reason == "denied"
    assert calls == ["issue", "transfer"] and sender.transfers == 0


def test_issue_denied(inst):
    sender = SenderSession(inst["crs"], inst["keys"], quota=1, approve=lambda *_: False)
    out = receiver_run_issue(receiver(inst, 5), LoopbackTransport(sender), AttributeList((2, 2), (0, 0)))
    assert not out.ok and out.reason == "denied"


def test_out_of_order_messages(inst):
    crs, keys, rng = inst["crs"], inst["keys"], random.Random(6)
    sender = SenderSession(crs, keys, quota=3, rng=rng)
    req, _ = P.issue_request(crs, AttributeList((2, 2), (0, 0)), rng)
    assert sender.handle(ProtocolMessage(Tag.ISSUE_REQ, req)).tag is Tag.ISSUE_RESP
    again = sender.handle(ProtocolMessage(Tag.ISSUE_REQ, req))
    assert again.tag is Tag.ISSUE_REJECT and again.body is Reason.OUT_OF_ORDER
    stray = sender.handle(ProtocolMessage(Tag.TRANSFER_REJECT, Reason.QUOTA))
    assert stray.body is Reason.OUT_OF_ORDER


def test_issue_after_transfer_is_out_of_order(inst):
    crs, keys, rng = inst["crs"], inst["keys"], random.Random(7)
    sender = SenderSession(crs, keys, quota=3, rng=rng)
    treq, _ = P.transfer_request(crs, keys.pk, inst["cdb"][0], 0, rng)
    assert sender.handle(ProtocolMessage(Tag.TRANSFER_REQ, treq)).tag is Tag.TRANSFER_RESP
    ireq, _ = P.issue_request(crs, AttributeList((2, 2), (0, 0)), rng)
    assert sender.handle(ProtocolMessage(Tag.ISSUE_REQ, ireq)).body is Reason.OUT_OF_ORDER


def test_transfer_without_ask_refused(inst):
    sender = SenderSession(inst["crs"], inst["keys"], quota=1)
    with pytest.raises(SessionError):
        receiver_run_transfer(receiver(inst, 8), LoopbackTransport(sender), 0)


def test_receiver_rejects_tampered_db(inst):
    k = inst["keys"]
    cdb = list(inst["cdb"])
    cdb[1] = dataclasses.replace(cdb[1], c1=cdb[0].c1)
    with pytest.raises(SessionError):
        ReceiverSession(inst["crs"], k.pk, k.psi, cdb)


def test_malformed_frame_gets_malformed_reject(inst):
    crs = inst["crs"]
    sender = SenderSession(crs, inst["keys"], quota=1)
    reply = decode(crs, sender_step(sender, b"\x00\x00\x00\x02\x04\x01"))
    assert reply.tag is Tag.TRANSFER_REJECT and reply.body is Reason.MALFORMED


def test_invalid_proof_gets_proof_invalid(inst):
    from aothap.testkit import mutate_proof

    crs, keys, rng = inst["crs"], inst["keys"], random.Random(9)
    sender = SenderSession(crs, keys, quota=1, rng=rng)
    treq, _ = P.transfer_request(crs, keys.pk, inst["cdb"][0], 0, rng)
    bad = dataclasses.replace(treq, pi=mutate_proof(treq.pi, rng))
    reply = sender.handle(ProtocolMessage(Tag.TRANSFER_REQ, bad))
    assert reply.body is Reason.PROOF_INVALID and sender.transfers == 0


def test_altered_com_hv_rejected(inst):
    crs, keys, rng = inst["crs"], inst["keys"], random.Random(10)
    sender = SenderSession(crs, keys, quota=3, rng=rng)
    treq, _ = P.transfer_request(crs, keys.pk, inst["cdb"][0], 0, rng)
    for k in range(3):
        com = list(treq.com_hv)
        com[k] = com[k] * crs.group.g2
        bad = dataclasses.replace(treq, com_hv=tuple(com))
        assert sender.handle(ProtocolMessage(Tag.TRANSFER_REQ, bad)).body is Reason.PROOF_INVALID


def test_binding_proof_must_share_commitment(inst):
    crs, keys, rng = inst["crs"], inst["keys"], random.Random(14)
    a, _ = P.transfer_request(crs, keys.pk, inst["cdb"][0], 0, rng, v=5)
    b, _ = P.transfer_request(crs, keys.pk, inst["cdb"][0], 0, rng, v=5)
    # same v, but b's binding proof commits to g2^v with different randomness
    assert not P.verify_transfer_request(crs, keys.pk, dataclasses.replace(a, bind=b.bind))
    assert P.verify_transfer_request(crs, keys.pk, a)


def _run(transport, inst, seed, indices):
    rs = receiver(inst, seed)
    receiver_run_issue(rs, transport, AttributeList((2, 2), (1, 0)))
    return [receiver_run_transfer(rs, transport, i) for i in indices]


def test_socket_and_loopback_transcripts_match(inst):
    crs, keys = inst["crs"], inst["keys"]
    loop = LoopbackTransport(SenderSession(crs, keys, quota=2, rng=random.Random(11)))
    outs_loop = _run(loop, inst, 12, [1, 2, 3])

    server = SenderServer(("127.0.0.1", 0), lambda: SenderSession(crs, keys, quota=2, rng=random.Random(11)))
    th = threading.Thread(target=server.serve_forever, daemon=True)
    th.start()
    try:
        with SocketTransport(*server.server_address) as sock:
            outs_sock = _run(sock, inst, 12, [1, 2, 3])
    finally:
        server.shutdown()
        server.server_close()
    assert sock.transcript.frames == loop.transcript.frames
    assert sock.transcript.digest() == loop.transcript.digest()
    assert [o.ok for o in outs_sock] == [True, True, False]
    assert outs_loop == outs_sock


@settings(max_examples=10, deadline=None)
@given(quota=st.integers(0, 3), attempts=st.lists(st.integers(0, 3), min_size=1, max_size=4))
def test_concurrent_sessions_respect_quota(inst, quota, attempts):
    crs, keys = inst["crs"], inst["keys"]
    rng = random.Random(13)
    frames = [encode(crs, ProtocolMessage(Tag.TRANSFER_REQ, P.transfer_request(crs, keys.pk, inst["cdb"][i], i, rng)[0]))
              for i in range(4)]
    sessions = [SenderSession(crs, keys, quota=quota, rng=random.Random(s)) for s in range(len(attempts))]
    successes = [0] * len(sessions)
    lock = threading.Lock()

    def hammer(s_idx, n):
        for j in range(n + quota):
            reply = decode(crs, sessions[s_idx].step(frames[j % 4]))
            if reply.tag is Tag.TRANSFER_RESP:
                with lock:
                    successes[s_idx] += 1

    threads = []
    for s_idx, n in enumerate(attempts):
        # two threads per session interleave on the same counter
        threads += [threading.Thread(target=hammer, args=(s_idx, n)) for _ in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(s <= quota for s in successes)
    assert all(s.transfers == c for s, c in zip(sessions, successes))
