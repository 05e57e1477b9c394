import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from noballnet.synth import SynthConfig, generate_synthetic  # noqa: E402

ACCEPTANCE_RESULTS: dict[str, str] = {}


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """40 images, 20 per class, default scene geometry."""
    out = tmp_path_factory.mktemp("small")
    return generate_synthetic(SynthConfig(seed=7), 20, out)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[0])):
        terminalreporter.write_line(f"{ACCEPTANCE_RESULTS[name]}  {name}")
