import random

import pytest

from aothap.attributes import AccessPolicy, AttributeList, AttributeUniverse
from aothap.bilinear import bilinear_setup
from aothap import protocol as P

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def real():
    return bilinear_setup("standard-128bit")


@pytest.fixture(scope="session")
def mock():
    return bilinear_setup("mock")


@pytest.fixture(scope="session")
def mock101():
    return bilinear_setup("mock(101)")


@pytest.fixture(params=["mock", "real"])
def group(request):
    return bilinear_setup("mock" if request.param == "mock" else "standard-128bit")


def make_instance(group, sizes, n_records, seed=0, policies=None, **crs_kw):
    """CRS + database with random payloads; returns a dict for tests to pick from."""
    rng = random.Random(seed)
    universe = AttributeUniverse.from_sizes(sizes)
    crs, td = P.crs_setup(group, universe, rng, emit_trapdoors=True, **crs_kw)
    if policies is None:
        policies = [random_policy(universe, rng) for _ in range(n_records)]
    payloads = [P.random_payload(group, rng) for _ in policies]
    keys, cdb = P.db_setup(crs, list(zip(payloads, policies)), rng)
    return dict(crs=crs, td=td, keys=keys, cdb=cdb, payloads=payloads, policies=policies,
                universe=universe, rng=rng)


def random_policy(universe, rng):
    allowed = []
    for k in universe.sizes:
        slot = {t for t in range(k) if rng.random() < 0.6}
        allowed.append(slot or {rng.randrange(k)})
    return AccessPolicy.of(universe.sizes, allowed)


def random_list(universe, rng):
    return AttributeList(universe.sizes, tuple(rng.randrange(k) for k in universe.sizes))


def issue_key(inst, attrs):
    crs, keys, rng = inst["crs"], inst["keys"], inst["rng"]
    req, sec = P.issue_request(crs, attrs, rng)
    resp = P.issue_respond(crs, keys.sk, req, rng)
    return P.issue_finalize(crs, keys.pk, sec, resp)


def transfer(inst, ask, index):
    crs, keys, rng = inst["crs"], inst["keys"], inst["rng"]
    rec = inst["cdb"][index]
    req, sec = P.transfer_request(crs, keys.pk, rec, index, rng)
    resp = P.transfer_respond(crs, keys.pk, keys.sk, req, rng)
    return P.transfer_finalize(crs, keys.pk, ask, rec, sec, resp)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
