"""
Pytest configuration and fixtures for transfair tests.

This module provides common fixtures and configuration for all tests.
"""

from pathlib import Path

import numpy as np
import pytest
from loguru import logger

from transfair.cli.app import setup_logging
from transfair.config import TrainConfig, load_config
from transfair.dataset import cold_start_split, leave_one_out, make_planted_dataset
from transfair.settings import LoggingConfig

# Overrides that shrink every stage to a few seconds on the planted dataset.
TINY_OVERRIDES = [
    "dataset.synthetic=true",
    "dataset.synthetic_users=200",
    "dataset.synthetic_items=120",
    "scorer.dim=8",
    "step1.max_epochs=2",
    "step1.batch_size=256",
    "step1.disc_steps=2",
    "step1.disc_hidden=8",
    "step1.disc_layers=2",
    "step1.eval_negatives=20",
    "step2.max_rounds=20",
    "step2.min_rounds=5",
    "step2.window=5",
    "step2.batch_size=32",
    "step2.hidden=8",
    "step2.disc_hidden=8",
    "step2.disc_layers=2",
    "step2.max_epochs=2",
    "step2.rec_batch_size=64",
    "step2.eval_negatives=20",
    "evaluation.n_negatives=20",
    "attacker.hidden=8",
    "attacker.layers=2",
    "attacker.max_epochs=3",
]


@pytest.fixture(scope="session", autouse=True)
def configure_test_logging():
    """Configure logging for test runs."""
    logs_dir = Path("logs")
    logs_dir.mkdir(exist_ok=True)

    log_file = logs_dir / "test-transfair.log"
    if log_file.exists():
        log_file.unlink()

    test_config = LoggingConfig(
        level="DEBUG",
        format="pretty",
        file=log_file,
        pytest_mode=True,
        trace_enabled=True,
    )

    setup_logging(test_config)

    logger.info("=" * 50)
    logger.info("Starting transfair test session")
    logger.info("=" * 50)

    yield

    logger.info("=" * 50)
    logger.info("transfair test session completed")
    logger.info("=" * 50)


@pytest.fixture
def log_capture():
    """Capture log messages for testing."""
    captured_logs = []

    def capture_handler(record):
        captured_logs.append(record)

    handler_id = logger.add(capture_handler, level="TRACE")

    yield captured_logs

    logger.remove(handler_id)


def pytest_runtest_setup(item):
    """Log test execution start."""
    logger.info(f"🧪 Running test: {item.nodeid}")


def pytest_runtest_teardown(item, nextitem):
    """Log test execution completion."""
    logger.info(f"✅ Completed test: {item.nodeid}")


def pytest_runtest_logreport(report):
    """Log test results."""
    if report.when == "call":
        if report.passed:
            logger.info(f"✅ PASSED: {report.nodeid}")
        elif report.failed:
            logger.error(f"❌ FAILED: {report.nodeid}")
        elif report.skipped:
            logger.warning(f"⏭️ SKIPPED: {report.nodeid}")


@pytest.fixture
def tiny_overrides() -> list[str]:
    return list(TINY_OVERRIDES)


@pytest.fixture
def tiny_config(tmp_path: Path):
    """Factory for a fast synthetic ``TrainConfig`` writing into ``tmp_path``."""

    def build(mode: str = "tfr_unsupervised", *extra: str, seed: int = 0, out: Path | None = None) -> TrainConfig:
        flags = {"mode": mode, "seed": seed, "output_dir": out or tmp_path / f"{mode}-{seed}"}
        return load_config(None, [*TINY_OVERRIDES, *extra], flags)

    return build


@pytest.fixture(scope="session")
def planted():
    """Planted-attribute dataset shared by the training tests."""
    return make_planted_dataset(200, 120, seed=3)


@pytest.fixture(scope="session")
def planted_split(planted):
    return leave_one_out(cold_start_split(planted, 0.2, 5, seed=3), seed=3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
