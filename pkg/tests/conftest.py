import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hyperderm.cohort import CohortConfig, build_cohort, nevus_panel_config  # noqa: E402

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def cohort_manifest(tmp_path_factory):
    """Full 160-record cohort, rendered once per session."""
    return build_cohort(tmp_path_factory.mktemp("cohort"), CohortConfig())


@pytest.fixture(scope="session")
def panel_manifest(tmp_path_factory):
    return build_cohort(tmp_path_factory.mktemp("panel"), nevus_panel_config(rows=16, cols=16, frames=4))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
