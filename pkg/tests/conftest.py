import numpy as np
import pytest

from hotopo import analytic, make_demo_mesh, project

# the seeded mesh standing in for the unpublished simulation mesh
DEMO = dict(nx=14, ny=14, jitter=0.2, seed=0, tri=True)


@pytest.fixture(scope="session")
def demo_mesh():
    return make_demo_mesh(DEMO["nx"], DEMO["ny"], jitter=DEMO["jitter"], seed=DEMO["seed"], tri=DEMO["tri"])


@pytest.fixture(scope="session")
def paper_field(demo_mesh):
    return project(analytic("paper2d"), demo_mesh, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report(request):
    """Record one pass/fail line for an acceptance criterion."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", {})

    def record(n: int, ok: bool, detail: str) -> None:
        lines[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(lines[n])

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
