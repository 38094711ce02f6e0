"""Command line front end.

Every subcommand reads and writes flat artifact files. Requests and
responses are stored as wire frames, so a file produced by
``issue-request`` is exactly what ``client`` would send. Failures print a
single JSON line on stderr and exit non-zero.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import random
import secrets
import sys
from pathlib import Path

from . import codec
from . import protocol as P
from .attributes import AccessPolicy, AttributeList, AttributeUniverse, parse_list, parse_policy, parse_universe
from .bilinear import DEFAULT_MOCK_PRIME, DecodeError, bilinear_setup
from .session import (
    ReceiverSession,
    SenderServer,
    SenderSession,
    SocketTransport,
    receiver_run_issue,
    receiver_run_transfer,
)
from .testkit import counted
from .wire import ProtocolMessage, Tag, decode, encode

log = logging.getLogger("aothap")


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _rng(args, salt: str = ""):
    if args.seed is None:
        return secrets.SystemRandom()
    return random.Random(f"{args.seed}:{salt}")


def _group_from_env():
    backend = os.environ.get("AOTHAP_BACKEND", "real").strip().lower()
    if backend == "real":
        return bilinear_setup("standard-128bit")
    if backend == "mock":
        p = os.environ.get("AOTHAP_MOCK_PRIME", str(DEFAULT_MOCK_PRIME))
        return bilinear_setup(f"mock({p})")
    raise CliError("bad-backend", f"AOTHAP_BACKEND must be real or mock, got {backend!r}")


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CliError("bad-json", f"{path}: {exc}") from None


def _load_crs(path):
    return codec.load_crs(codec.read_file(path))


def _load_pub(crs, path):
    return codec.load_public(crs, codec.read_file(path))


def _read_message(crs, path, tag: Tag):
    msg = decode(crs, codec.read_file(path))
    if msg.tag is not tag:
        if msg.tag in (Tag.ISSUE_REJECT, Tag.TRANSFER_REJECT):
            raise CliError("rejected", f"sender rejected the request: {msg.body.label}")
        raise CliError("unexpected-message", f"expected {tag.name}, found {msg.tag.name}")
    return msg.body


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


# -- subcommands -------------------------------------------------------------------


def cmd_crs_setup(args):
    group = _group_from_env()
    universe = parse_universe(_read_json(args.universe))
    crs, _ = P.crs_setup(group, universe, _rng(args, "crs"))
    codec.write_file(args.out, codec.dump_crs(crs))
    _emit({"crs": str(args.out), "backend": group.profile, "m": universe.m,
           "elements": crs.element_count()})


def _parse_db(universe, doc):
    rows = doc.get("records") if isinstance(doc, dict) else None
    if not isinstance(rows, list) or not rows:
        raise CliError("bad-db", 'database document needs a non-empty "records" list')
    out = []
    for i, row in enumerate(rows):
        if "data_hex" in row:
            data = bytes.fromhex(row["data_hex"])
        else:
            data = str(row.get("data", "")).encode()
        allow = row.get("allow", "*")
        policy = AccessPolicy.allow_all(universe.sizes) if allow == "*" else parse_policy(universe, {"allow": allow})
        out.append((data, policy))
    return out


def cmd_db_setup(args):
    crs = _load_crs(args.crs)
    rows = _parse_db(crs.universe, _read_json(args.db))
    rng = _rng(args, "db")
    payloads = [P.random_payload(crs.group, rng) for _ in rows]
    keys, cdb = P.db_setup(crs, [(m, w) for m, (_, w) in zip(payloads, rows)], rng)
    blobs = [P.seal_payload(m, data, rng) for m, (data, _) in zip(payloads, rows)]
    codec.write_file(args.pub, codec.dump_public(crs, keys.pk, keys.psi, cdb, blobs))
    codec.write_file(args.sk, codec.dump_secret_key(crs, keys.sk))
    _emit({"pub": str(args.pub), "sk": str(args.sk), "records": len(cdb)})


def cmd_verify_db(args):
    crs = _load_crs(args.crs)
    pk, psi, cdb, _ = _load_pub(crs, args.pub)
    reason = P.check_db(crs, pk, psi, cdb)
    if reason is not None:
        raise CliError(reason, "database failed verification")
    if not P.check_crs(crs):
        raise CliError("crs-check-failed", "CRS attribute constants are inconsistent")
    _emit({"verified": True, "records": len(cdb)})


def cmd_issue_request(args):
    crs = _load_crs(args.crs)
    attrs = parse_list(crs.universe, _read_json(args.attrs))
    req, secret = P.issue_request(crs, attrs, _rng(args, "issue-request"))
    codec.write_file(args.out, encode(crs, ProtocolMessage(Tag.ISSUE_REQ, req)))
    codec.write_file(args.secret, codec.dump_issue_secret(crs, secret))
    _emit({"request": str(args.out), "secret": str(args.secret)})


def _sender_keys(crs, args):
    pk, psi, _, _ = _load_pub(crs, args.pub)
    sk = codec.load_secret_key(crs, codec.read_file(args.sk))
    return P.SenderKeys(pk, sk, psi)


def cmd_issue_respond(args):
    crs = _load_crs(args.crs)
    session = SenderSession(crs, _sender_keys(crs, args), quota=0, rng=_rng(args, "issue-respond"))
    reply = session.step(codec.read_file(args.request))
    codec.write_file(args.out, reply)
    msg = decode(crs, reply)
    if msg.tag is Tag.ISSUE_REJECT:
        raise CliError(msg.body.label, "issue request rejected")
    _emit({"response": str(args.out)})


def cmd_issue_finalize(args):
    crs = _load_crs(args.crs)
    pk, _, _, _ = _load_pub(crs, args.pub)
    secret = codec.load_issue_secret(crs, codec.read_file(args.secret))
    resp = _read_message(crs, args.response, Tag.ISSUE_RESP)
    ask = P.issue_finalize(crs, pk, secret, resp)
    codec.write_file(args.out, codec.dump_ask(crs, ask))
    _emit({"ask": str(args.out)})


def cmd_transfer_request(args):
    crs = _load_crs(args.crs)
    pk, _, cdb, _ = _load_pub(crs, args.pub)
    if not 0 <= args.index < len(cdb):
        raise CliError("bad-index", f"index {args.index} outside 0..{len(cdb) - 1}")
    req, secret = P.transfer_request(crs, pk, cdb[args.index], args.index, _rng(args, "transfer-request"))
    codec.write_file(args.out, encode(crs, ProtocolMessage(Tag.TRANSFER_REQ, req)))
    codec.write_file(args.secret, codec.dump_transfer_secret(crs, secret))
    _emit({"request": str(args.out), "secret": str(args.secret)})


def cmd_transfer_respond(args):
    crs = _load_crs(args.crs)
    session = SenderSession(crs, _sender_keys(crs, args), quota=1, rng=_rng(args, "transfer-respond"))
    reply = session.step(codec.read_file(args.request))
    codec.write_file(args.out, reply)
    msg = decode(crs, reply)
    if msg.tag is Tag.TRANSFER_REJECT:
        raise CliError(msg.body.label, "transfer request rejected")
    _emit({"response": str(args.out)})


def _report_payload(m, blob: bytes, index: int, out):
    status = {"index": index}
    if blob:
        data = P.unseal_payload(m, blob)
        status["recovered"] = data is not None
        if data is not None and out:
            Path(out).write_bytes(data)
        elif data is not None:
            status["data"] = data.decode(errors="replace")
    else:
        status["recovered"] = None
        status["gt"] = m.to_bytes().hex()
    _emit(status)


def cmd_transfer_finalize(args):
    crs = _load_crs(args.crs)
    pk, _, cdb, blobs = _load_pub(crs, args.pub)
    ask = codec.load_ask(crs, codec.read_file(args.ask))
    secret = codec.load_transfer_secret(crs, codec.read_file(args.secret))
    if not 0 <= secret.index < len(cdb):
        raise CliError("bad-index", "transfer secret names a record outside the database")
    resp = _read_message(crs, args.response, Tag.TRANSFER_RESP)
    m = P.transfer_finalize(crs, pk, ask, cdb[secret.index], secret, resp)
    if m is None:
        raise CliError("response-proof-invalid", "sender's response proof does not verify")
    _report_payload(m, blobs[secret.index], secret.index, args.out)


def cmd_serve(args):
    crs = _load_crs(args.crs)
    keys = _sender_keys(crs, args)
    counter = iter(range(1 << 62))

    def make_session():
        return SenderSession(crs, keys, args.quota, rng=_rng(args, f"session-{next(counter)}"))

    server = SenderServer((args.host, args.port), make_session)
    if args.max_sessions is not None:
        # server_close joins handler threads, so bounded runs finish their sessions
        server.daemon_threads = False
    host, port = server.server_address[:2]
    print(json.dumps({"listening": f"{host}:{port}"}), flush=True)
    try:
        if args.max_sessions is None:
            server.serve_forever()
        else:
            for _ in range(args.max_sessions):
                server.handle_request()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def cmd_client(args):
    crs = _load_crs(args.crs)
    pk, psi, cdb, blobs = _load_pub(crs, args.pub)
    attrs = parse_list(crs.universe, _read_json(args.attrs))
    session = ReceiverSession(crs, pk, psi, cdb, rng=_rng(args, "client"))
    with SocketTransport(args.host, args.port) as transport:
        try:
            out = receiver_run_issue(session, transport, attrs)
            if not out.ok:
                raise CliError(out.reason, "issue failed")
            for index in args.index:
                res = receiver_run_transfer(session, transport, index)
                if not res.ok:
                    _emit({"index": index, "rejected": res.reason})
                    continue
                target = Path(args.out_dir) / f"record-{index}.bin" if args.out_dir else None
                _report_payload(res.value, blobs[index], index, target)
        finally:
            if args.transcript:
                _write_transcript(args.transcript, transport.transcript)


def _write_transcript(path, transcript):
    buf = bytearray()
    for direction, frame in transcript.frames:
        buf += (b">" if direction == "->" else b"<") + frame
    Path(path).write_bytes(bytes(buf))


# -- bench -------------------------------------------------------------------------


BENCH_FIELDS = ["phase", "label", "pairings", "exp_g1", "exp_g2", "exp_gt", "bytes"]


def bench_rows(group, universe, db_size: int, transfers: int, rng) -> list[dict]:
    """Run one instrumented protocol instance; one row per phase step."""
    rows = []

    def row(phase, label, ctr, nbytes):
        rows.append({"phase": phase, "label": label, "pairings": ctr.pairings, "exp_g1": ctr.exp_g1,
                     "exp_g2": ctr.exp_g2, "exp_gt": ctr.exp_gt, "bytes": nbytes})

    (crs, _), c = counted("crs-setup", lambda: P.crs_setup(group, universe, rng))
    row("setup", "crs", c, len(codec.dump_crs(crs)))
    policies = [AccessPolicy.allow_all(universe.sizes) for _ in range(db_size)]
    payloads = [P.random_payload(group, rng) for _ in range(db_size)]
    (pk, sk), c_key = counted("keygen", lambda: P.keygen(crs, rng))
    cdb, c_enc = counted("encrypt", lambda: P.encrypt_records(crs, pk, sk, list(zip(payloads, policies)), rng))
    psi, c_psi = counted("psi", lambda: P.prove_keys(crs, pk, sk, rng))
    pub_len = len(codec.dump_public(crs, pk, psi, cdb))
    row("db-setup", "keygen", c_key, 0)
    row("db-setup", "encrypt", c_enc, pub_len)
    row("db-setup", "psi", c_psi, len(codec.proof_to_bytes(group, psi)))
    _, c = counted("verify-db", lambda: P.verify_db(crs, pk, psi, cdb))
    row("db-setup", "verify", c, 0)

    attrs = AttributeList(universe.sizes, tuple(0 for _ in universe.sizes))
    (req, sec), c = counted("issue-request", lambda: P.issue_request(crs, attrs, rng))
    row("issue", "request", c, len(encode(crs, ProtocolMessage(Tag.ISSUE_REQ, req))))
    resp, c = counted("issue-respond", lambda: P.issue_respond(crs, sk, req, rng))
    row("issue", "respond", c, len(encode(crs, ProtocolMessage(Tag.ISSUE_RESP, resp))))
    ask, c = counted("issue-finalize", lambda: P.issue_finalize(crs, pk, sec, resp))
    row("issue", "finalize", c, 0)

    for j in range(transfers):
        index = j % db_size
        (treq, tsec), c = counted("transfer-request", lambda: P.transfer_request(crs, pk, cdb[index], index, rng))
        row("transfer", f"request-{j}", c, len(encode(crs, ProtocolMessage(Tag.TRANSFER_REQ, treq))))
        tresp, c = counted("transfer-respond", lambda: P.transfer_respond(crs, pk, sk, treq, rng))
        row("transfer", f"respond-{j}", c, len(encode(crs, ProtocolMessage(Tag.TRANSFER_RESP, tresp))))
        m, c = counted("transfer-finalize", lambda: P.transfer_finalize(crs, pk, ask, cdb[index], tsec, tresp))
        if m != payloads[index]:
            raise CliError("bench-mismatch", f"transfer {j} did not recover the payload")
        row("transfer", f"finalize-{j}", c, 0)
    return rows


def cmd_bench(args):
    group = _group_from_env()
    if args.universe:
        universe = parse_universe(_read_json(args.universe))
    else:
        universe = AttributeUniverse.from_sizes([int(s) for s in args.sizes.split(",")])
    rows = bench_rows(group, universe, args.db_size, args.transfers, _rng(args, "bench"))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.csv:
        Path(args.csv).write_text(buf.getvalue())
    widths = [max(len(f), *(len(str(r[f])) for r in rows)) for f in BENCH_FIELDS]
    print("  ".join(f.ljust(w) for f, w in zip(BENCH_FIELDS, widths)))
    for r in rows:
        print("  ".join(str(r[f]).ljust(w) for f, w in zip(BENCH_FIELDS, widths)))


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aothap", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=None, help="seed all randomness (reproducible runs)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("crs-setup", help="generate crs.bin for a universe")
    p.add_argument("--universe", required=True)
    p.add_argument("--out", default="crs.bin")
    p.set_defaults(func=cmd_crs_setup)

    p = sub.add_parser("db-setup", help="encrypt a database under per-record policies")
    p.add_argument("--crs", default="crs.bin")
    p.add_argument("--db", required=True, help='JSON {"records":[{"data":..., "allow":[[...], ...]}]}')
    p.add_argument("--pub", default="pub.bin")
    p.add_argument("--sk", default="sk.bin")
    p.set_defaults(func=cmd_db_setup)

    p = sub.add_parser("verify-db", help="public check of pub.bin")
    p.add_argument("--crs", default="crs.bin")
    p.add_argument("--pub", default="pub.bin")
    p.set_defaults(func=cmd_verify_db)

    p = sub.add_parser("issue-request")
    p.add_argument("--crs", default="crs.bin")
    p.add_argument("--attrs", required=True, help='JSON {"choose":[...]}')
    p.add_argument("--out", default="issue-req.msg")
    p.add_argument("--secret", default="issue.sec")
    p.set_defaults(func=cmd_issue_request)

    p = sub.add_parser("issue-respond")
    p.add_argument("--crs", default="crs.bin")
    p.add_argument("--pub", default="pub.bin")
    p.add_argument("--sk", default="sk.bin")
    p.add_argument("--request", default="issue-req.msg")
    p.add_argument("--out", default="issue-resp.msg")
    p.set_defaults(func=cmd_issue_respond)

    p = sub.add_parser("issue-finalize")
    p.add_argument("--crs", default="crs.bin")
    p.add_argument("--pub", default="pub.bin")
    p.add_argument("--secret", default="issue.sec")
    p.add_argument("--response", default="issue-resp.msg")
    p.add_argument("--out", default="ask.bin")
    p.set_defaults(func=cmd_issue_finalize)

    p = sub.add_parser("transfer-request")
    p.add_argument("--crs", default="crs.bin")
    p.add_argument("--pub", default="pub.bin")
    p.add_argument("--index", type=int, required=True, help="0-based record index")
    p.add_argument("--out", default="transfer-req.msg")
    p.add_argument("--secret", default="transfer.sec")
    p.set_defaults(func=cmd_transfer_request)

    p = sub.add_parser("transfer-respond")
    p.add_argument("--crs", default="crs.bin")
    p.add_argument("--pub", default="pub.bin")
    p.add_argument("--sk", default="sk.bin")
    p.add_argument("--request", default="transfer-req.msg")
    p.add_argument("--out", default="transfer-resp.msg")
    p.set_defaults(func=cmd_transfer_respond)

    p = sub.add_parser("transfer-finalize")
    p.add_argument("--crs", default="crs.bin")
    p.add_argument("--pub", default="pub.bin")
    p.add_argument("--ask", default="ask.bin")
    p.add_argument("--secret", default="transfer.sec")
    p.add_argument("--response", default="transfer-resp.msg")
    p.add_argument("--out", default=None, help="write the recovered payload here")
    p.set_defaults(func=cmd_transfer_finalize)

    p = sub.add_parser("serve", help="run the sender over TCP")
    p.add_argument("--crs", default="crs.bin")
    p.add_argument("--pub", default="pub.bin")
    p.add_argument("--sk", default="sk.bin")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7420)
    p.add_argument("--quota", type=int, required=True, help="transfers allowed per session")
    p.add_argument("--max-sessions", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("client", help="issue a key and run transfers against a server")
    p.add_argument("--crs", default="crs.bin")
    p.add_argument("--pub", default="pub.bin")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7420)
    p.add_argument("--attrs", required=True)
    p.add_argument("--index", type=int, nargs="+", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--transcript", default=None, help="write the raw frame transcript here")
    p.set_defaults(func=cmd_client)

    p = sub.add_parser("bench", help="operation counts per phase")
    p.add_argument("--universe", default=None)
    p.add_argument("--sizes", default="2,2", help="attribute sizes when no --universe is given")
    p.add_argument("--db-size", type=int, default=16)
    p.add_argument("--transfers", type=int, default=4)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CliError as exc:
        return _fail(exc.code, str(exc))
    except DecodeError as exc:
        return _fail("decode-failed", f"{exc.code}: {exc}")
    except (OSError, ValueError, P.ProtocolError) as exc:
        return _fail(getattr(exc, "code", type(exc).__name__), str(exc))
    return 0


def _fail(code: str, message: str) -> int:
    print(json.dumps({"error": code, "message": message}), file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
