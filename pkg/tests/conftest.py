import re
import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).resolve().parent))

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion that ran."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            m = _CRITERION.search(rep.nodeid)
            if m:
                tag = "PASS" if outcome == "passed" else "FAIL"
                lines.append((int(m.group(1)), f"{tag} criterion {int(m.group(1))}: {m.group(2).replace('_', ' ')}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
