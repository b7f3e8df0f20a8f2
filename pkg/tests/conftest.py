import sys

import pytest

from finagent import fixtures
from finagent.llm import load_templates
from finagent.search import HashEmbedder, index_catalog

sys.path.insert(0, str(__import__("pathlib").Path(__file__).parent))


@pytest.fixture(scope="session")
def catalog():
    return fixtures.build_catalog()


@pytest.fixture(scope="session")
def embedder():
    return HashEmbedder(dim=64)


@pytest.fixture(scope="session")
def index(catalog, embedder):
    return index_catalog(catalog, embedder)


@pytest.fixture(scope="session")
def templates():
    return load_templates()


@pytest.fixture()
def python_runtime():
    return (sys.executable, "{script}")


@pytest.fixture(scope="session")
def golden_trajectory(catalog, index, embedder):
    from finagent.llm import ScriptedBackend
    from finagent.orchestrator import Orchestrator, OrchestratorConfig, VirtualClock

    backend = ScriptedBackend(fixtures.golden_transcript_records(sdk=False))
    orchestrator = Orchestrator(
        catalog=catalog,
        index=index,
        backend=backend,
        config=OrchestratorConfig(runtime=(sys.executable, "{script}")),
        embedder=embedder,
        clock=VirtualClock(),
    )
    trajectory = orchestrator.run(fixtures.golden_query())
    assert trajectory.status.finished
    return trajectory
