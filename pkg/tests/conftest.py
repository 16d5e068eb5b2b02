from collections import defaultdict

import pytest

from mtmm_audit.defs import bundled_malik_dataset

_criteria: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)


def record_criterion(number: int, check: str, passed: bool, detail: str = "") -> None:
    """Log one sub-check of an acceptance criterion for the end-of-run summary."""
    _criteria[number].append((check, bool(passed), detail))


@pytest.fixture(scope="session")
def malik():
    return bundled_malik_dataset()


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        checks = _criteria[number]
        ok = all(passed for _, passed, _ in checks)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}")
        for check, passed, detail in checks:
            tail = f"  ({detail})" if detail else ""
            terminalreporter.write_line(f"    {'ok  ' if passed else 'FAIL'} {check}{tail}")
