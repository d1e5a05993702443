"""Tests for the CLI logging setup."""

import logging

from imprecise_copula.logging_utils import StageFormatter, setup_logging


def test_stage_field_appended():
    formatter = StageFormatter("%(message)s")
    record = logging.LogRecord("imprecise_copula.x", logging.INFO, __file__, 1, "done", (), None)
    assert formatter.format(record) == "done"
    record.stage = "propagation"
    assert formatter.format(record) == "done [stage=propagation]"


def test_setup_is_idempotent(tmp_path):
    log_file = tmp_path / "run.log"
    setup_logging("DEBUG", log_file)
    logger = setup_logging("INFO", log_file)
    assert len(logger.handlers) == 2
    assert logger.level == logging.INFO
    logger.info("hello", extra={"stage": "report"})
    for handler in logger.handlers:
        handler.flush()
    assert "hello [stage=report]" in log_file.read_text(encoding="utf-8")
    setup_logging("WARNING")
