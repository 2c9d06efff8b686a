from __future__ import annotations

from collections import OrderedDict

import pytest

_LINES: "OrderedDict[int, list]" = OrderedDict()


@pytest.fixture
def record():
    """``record(n, ok, detail)`` logs one acceptance outcome for criterion ``n``."""

    def _record(n: int, ok: bool, detail: str) -> bool:
        _LINES.setdefault(n, []).append((bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_LINES):
        parts = _LINES[n]
        ok = all(p[0] for p in parts)
        shown = [d for good, d in parts if not good] if not ok else [parts[0][1]] if len(parts) == 1 else \
            [f"{len(parts)} checks passed"]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: " + "; ".join(shown))
