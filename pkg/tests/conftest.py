import re

import pytest

from isoha.codec import _pure

try:
    from isoha.codec import _speedups

    KERNELS = [_pure, _speedups]
except ImportError:  # extension not built; pure fallback only
    KERNELS = [_pure]


@pytest.fixture(params=KERNELS, ids=lambda mod: mod.BACKEND)
def kernel(request):
    """Codec kernel module; parametrizes a test over every built backend."""
    return request.param


CRITERIA = {
    1: "bitmap codec agrees with the per-bit oracle",
    2: "randomized messages roundtrip byte-exact",
    3: "active-passive relay is byte-exact over 10k messages",
    4: "round-robin baseline corrupts tagged frames",
    5: "cpu threshold trips failover inside 4 s",
    6: "echo loss trips failover inside poll x fall + 1 s",
    7: "report arithmetic reproduces the frozen figures",
    8: "stress curve keeps its shape at desk scale",
    9: "debounce matches the reference fold",
    10: "demo scenarios all pass",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One verdict line per acceptance criterion at the end of the run."""
    outcomes = {}
    for outcome in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(outcome, ()):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            if outcome != "error" and getattr(report, "when", "call") != "call":
                continue
            match = re.search(r"test_criterion_(\d+)", nodeid)
            if match:
                outcomes[int(match.group(1))] = outcome
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    verdicts = {"passed": "PASS", "failed": "FAIL", "error": "FAIL", "skipped": "SKIPPED"}
    for number, label in sorted(CRITERIA.items()):
        verdict = verdicts.get(outcomes.get(number), "NOT RUN")
        terminalreporter.write_line(f"criterion {number:2d} {verdict:<7} {label}")
