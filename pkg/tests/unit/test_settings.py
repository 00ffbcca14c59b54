"""
Unit tests for settings module.

This module tests the logging and presentation settings.
"""

from transfair.settings import LoggingConfig, Settings


class TestLoggingConfig:
    """Test cases for LoggingConfig."""

    def test_default_logging_config(self):
        """Test default logging configuration."""
        config = LoggingConfig()
        assert config.level == "INFO"
        assert config.format == "pretty"
        # In pytest mode, file is automatically set to logs/test-transfair.log
        if config.pytest_mode:
            assert str(config.file) == "logs/test-transfair.log"
        else:
            assert config.file is None

    def test_custom_logging_config(self):
        """Test custom logging configuration."""
        config = LoggingConfig(level="DEBUG", format="json", file="/tmp/test.log")
        assert config.level == "DEBUG"
        assert config.format == "json"
        assert str(config.file) == "/tmp/test.log"

    def test_trace_level_enables_trace(self):
        """TRACE level switches trace logging on."""
        config = LoggingConfig(level="trace")
        assert config.trace_enabled is True


class TestSettings:
    """Test cases for Settings."""

    def test_default_settings(self, monkeypatch):
        """Test default settings."""
        for name in ("LOG_LEVEL", "LOGGING__LEVEL", "LOG_FORMAT", "LOGGING__FORMAT"):
            monkeypatch.delenv(name, raising=False)
        settings = Settings()
        assert settings.color_output is True
        assert settings.verbose is False
        assert settings.report_precision == 4
        assert settings.logging.level == "INFO"

    def test_standard_variables_win_over_legacy(self, monkeypatch):
        """LOG_LEVEL takes precedence over LOGGING__LEVEL."""
        monkeypatch.setenv("LOGGING__LEVEL", "WARNING")
        monkeypatch.setenv("LOG_LEVEL", "DEBUG")
        settings = Settings()
        assert settings.log_level == "DEBUG"
        assert settings.logging.level == "DEBUG"

    def test_legacy_variable_still_read(self, monkeypatch):
        """Legacy nested names configure logging when the standard ones are absent."""
        monkeypatch.delenv("LOG_LEVEL", raising=False)
        monkeypatch.setenv("LOGGING__LEVEL", "ERROR")
        monkeypatch.setenv("LOG_FORMAT", "json")
        settings = Settings()
        assert settings.logging.level == "ERROR"
        assert settings.logging.format == "json"

    def test_log_file_variable(self, monkeypatch, tmp_path):
        """LOG_FILE routes the file sink."""
        target = tmp_path / "run.log"
        monkeypatch.setenv("LOG_FILE", str(target))
        settings = Settings()
        assert settings.logging.file == target
