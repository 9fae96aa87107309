"""Acceptance criteria, each at its stated tolerance.

Every criterion prints one summary line; the individual checks behind it are
echoed too, and the whole table is repeated at the end of the pytest run.
"""

import os
import time

import pytest

from bnlslab.suites import CRITERIA

import conftest

WORKERS = max(1, min(4, os.cpu_count() or 1))


@pytest.mark.parametrize("key", sorted(CRITERIA, key=int))
def test_criterion(key, capsys):
    fn = CRITERIA[key]
    t0 = time.perf_counter()
    checks = fn(workers=WORKERS) if key in ("6", "11") else fn()
    elapsed = time.perf_counter() - t0
    ok = bool(checks) and all(c.passed for c in checks)
    head = f"{'PASS' if ok else 'FAIL'} criterion {key} ({len(checks)} checks, {elapsed:.1f}s)"
    lines = [head] + ["    " + c.line() for c in checks]
    conftest.ACCEPTANCE_LINES.extend(lines)
    with capsys.disabled():
        print("\n" + "\n".join(lines))
    failed = [c.line() for c in checks if not c.passed]
    assert not failed, "\n".join(failed)
