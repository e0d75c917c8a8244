import socket

import pytest

from genwar.scenario import load_scenario


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """Tests never reach a live model endpoint."""

    def refuse(*args, **kwargs):
        raise OSError("network access is disabled in tests")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)
    monkeypatch.delenv("GENWAR_API_KEY", raising=False)
    monkeypatch.delenv("GENWAR_API_BASE", raising=False)


@pytest.fixture(scope="session")
def default_scenario():
    return load_scenario("default")


@pytest.fixture
def initial_state(default_scenario):
    return default_scenario.initial_state(seed=7)


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in results:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
