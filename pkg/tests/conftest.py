import pytest

from votedyn.model import SiteParams

REFERENCE_STORIES = [  # (S, r, final votes)
    (5, 0.51, 2229),
    (5, 0.44, 1921),
    (40, 0.32, 1297),
    (40, 0.28, 1039),
    (160, 0.19, 740),
    (100, 0.13, 458),
]

_acceptance_lines = []


@pytest.fixture
def site():
    return SiteParams()


@pytest.fixture
def report():
    """Record one pass/fail line for the acceptance summary."""
    def record(label: str, ok: bool, detail: str = ""):
        _acceptance_lines.append(f"[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else ""))
        return ok
    return record


@pytest.fixture(scope="session")
def synthetic_200():
    from votedyn.montecarlo import generate_synthetic_dataset
    return generate_synthetic_dataset(200, seed=3)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
