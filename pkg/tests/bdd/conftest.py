"""
Fixtures shared by the BDD scenarios.

Scenarios drive the Typer app in-process and record what the last command
printed and returned in ``cli_output``.
"""

import pytest
from typer.testing import CliRunner


@pytest.fixture
def cli_runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def cli_output() -> dict:
    """Stdout and exit code of the last command a scenario ran."""
    return {"stdout": "", "return_code": 0}
