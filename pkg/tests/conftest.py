import numpy as np
import pytest

from fairlens.data import Dataset, SensitiveAttribute

ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def record(number: int, title: str, status: str, detail: str = "") -> None:
    """Store one acceptance verdict; printed in the terminal summary."""
    ACCEPTANCE[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, status, detail = ACCEPTANCE[number]
        line = f"AC{number:<2} {status:<4} {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


def make_dataset(n, value_counts, seed=0, n_features=3, privileged=None):
    rng = np.random.default_rng(seed)
    sens = np.column_stack([rng.integers(0, k, size=n) for k in value_counts])
    privileged = privileged or [0] * len(value_counts)
    specs = tuple(
        SensitiveAttribute(f"a{i}", tuple(str(v) for v in range(k)), str(privileged[i]))
        for i, k in enumerate(value_counts)
    )
    X = rng.random((n, n_features))
    y = rng.integers(0, 2, size=n)
    return Dataset(X, sens, y, specs)


@pytest.fixture
def small_ds():
    return make_dataset(120, (3, 2), seed=7)
