import pytest

from meetup.datasets import synthetic_city, write_dataset
from meetup.road_graph import load_dimacs
from meetup.shortest_path import distance_weights

from instances import square_graph, square_query


@pytest.fixture
def sq():
    return square_graph()


@pytest.fixture
def q_sq():
    return square_query()


@pytest.fixture(scope="session")
def dc_files(tmp_path_factory):
    # The benchmark-sized network goes through DIMACS files like real data would.
    out = tmp_path_factory.mktemp("dc")
    return write_dataset(synthetic_city(), out, "dc")


@pytest.fixture(scope="session")
def dc_graph(dc_files):
    return load_dimacs(dc_files["gr"], dc_files["co"])


@pytest.fixture(scope="session")
def dc_weights(dc_graph):
    return distance_weights(dc_graph)


def pytest_terminal_summary(terminalreporter):
    from verdicts import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
