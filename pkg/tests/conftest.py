import numpy as np
import pytest

from bosonclt.fock import build_pure_state
from bosonclt.gaussian import thermal_state


@pytest.fixture
def rho_ex():
    """``(|0> + |3>)/sqrt(2)`` at cutoff 3."""
    return build_pure_state({0: 1.0, 3: 1.0}, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def thermal(nu, cutoff=60):
    return thermal_state(nu, cutoff)


def random_hermitian(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + g.conj().T) / 2


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, when any were collected."""
    verdicts, details = {}, {}
    for outcome in ("passed", "failed", "xfailed", "xpassed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", []))
            if "criterion" not in props or (rep.when != "call" and outcome == "passed"):
                continue
            k = props["criterion"]
            ok = outcome == "passed"
            verdicts[k] = verdicts.get(k, True) and ok
            if "detail" in props:
                details.setdefault(k, []).append(props["detail"])
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(verdicts):
        word = "PASS" if verdicts[k] else "FAIL"
        terminalreporter.write_line(f"{word} criterion {k}: " + "; ".join(details.get(k, [])))
