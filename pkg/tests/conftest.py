"""Shared pytest plumbing.

The acceptance suite (tests/test_acceptance.py) is the release gate:
after the run, one line per criterion is printed so the outcome can be
scanned without reading tracebacks. Each acceptance test's docstring
first line names the criterion it checks.
"""

import numpy as np
import pytest

ACCEPTANCE_FILE = "test_acceptance.py"

_details = {}


def record_detail(nodeid_suffix, text):
    """Attach a measurement (tolerances hit, counts) to a criterion line."""
    _details[nodeid_suffix] = text


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def _criterion_name(item):
    doc = item.function.__doc__ or item.name
    return doc.strip().splitlines()[0]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for category, flag in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(category, []):
            nodeid = getattr(rep, "nodeid", "")
            if ACCEPTANCE_FILE not in nodeid or rep.when not in (None, "call", "setup"):
                continue
            item = _ITEMS.get(nodeid)
            name = _criterion_name(item) if item else nodeid
            detail = _details.get(nodeid.split("::")[-1], "")
            suffix = f" ({detail})" if detail and flag == "PASS" else ""
            lines.append((name, f"[{flag}] {name}{suffix}"))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)


_ITEMS = {}


def pytest_collection_modifyitems(items):
    for item in items:
        if ACCEPTANCE_FILE in item.nodeid:
            _ITEMS[item.nodeid] = item
