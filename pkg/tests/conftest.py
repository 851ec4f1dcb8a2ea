import numpy as np
import pytest

from pingpong_qkd.attack import AttackParams

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by a test")
    config.addinivalue_line("markers", "acceptance: exit-criteria suite")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, text = marker.args
    key = (number, text)
    failed = rep.failed
    prev = _criteria.get(key, "PASS")
    if rep.when == "call" or failed:
        _criteria[key] = "FAIL" if failed or prev == "FAIL" else "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (number, text), status in sorted(_criteria.items()):
        terminalreporter.write_line(f"[{status}] criterion {number}: {text}")


def random_row(rng, min_eta=0.0):
    """One (p_v, p_0, p_1) row, rejection-sampled on the non-vacuum weight."""
    while True:
        row = rng.dirichlet([1.0, 1.0, 1.0])
        if row[1] + row[2] >= min_eta:
            # force exact unit sum so row checks see no drift
            row[0] = 1.0 - row[1] - row[2]
            if row[0] >= 0:
                return row


def random_attack(rng, min_eta=0.0) -> AttackParams:
    r0, r1 = random_row(rng, min_eta), random_row(rng, min_eta)
    return AttackParams(r0[0], r0[1], r0[2], r1[0], r1[1], r1[2])


def random_density(rng, dim, rank=None):
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
