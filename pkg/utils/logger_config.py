"""
Logging setup shared by the delayshare library and command line.

Library modules only ask for loggers under the 'delayshare.' hierarchy. The
command line picks the console level, and a results directory adds a file
handler for the lifetime of a study.
"""

import logging
from typing import Optional

PACKAGE_LOGGER = 'delayshare'
FILE_FORMAT = '%(asctime)s | %(name)s | %(levelname)s | %(message)s'
CONSOLE_FORMAT = '%(levelname)s | %(name)s | %(message)s'


class DelayShareLogger:
    """Class-level logging state for the delayshare package."""

    _configured = False
    _log_file: Optional[str] = None
    _console_level = logging.INFO
    _file_level = logging.INFO

    @classmethod
    def configure(cls,
                  log_file: Optional[str] = None,
                  console_level: int = logging.INFO,
                  file_level: int = logging.INFO,
                  force_reconfigure: bool = False) -> None:
        """
        Install the package handlers.

        Args:
            log_file: Study log to append to; console only when None
            console_level: Level of the stderr handler
            file_level: Level of the study log
            force_reconfigure: Replace handlers installed by an earlier call
        """
        if cls._configured and not force_reconfigure:
            return

        cls._log_file = log_file
        cls._console_level = console_level
        cls._file_level = file_level

        # Records stay out of the root logger
        package_logger = logging.getLogger(PACKAGE_LOGGER)
        for handler in package_logger.handlers[:]:
            package_logger.removeHandler(handler)
            handler.close()
        package_logger.propagate = False

        if log_file is not None:
            try:
                study_handler = logging.FileHandler(log_file, encoding='utf-8')
            except OSError as e:
                print(f"Warning: study log {log_file} unavailable, console only: {e}")
                cls._log_file = None
            else:
                study_handler.setLevel(file_level)
                study_handler.setFormatter(logging.Formatter(FILE_FORMAT))
                package_logger.addHandler(study_handler)

        stderr_handler = logging.StreamHandler()
        stderr_handler.setLevel(console_level)
        stderr_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
        package_logger.addHandler(stderr_handler)

        levels = [console_level]
        if cls._log_file is not None:
            levels.append(file_level)
        package_logger.setLevel(min(levels))
        cls._configured = True

        logging.getLogger(f'{PACKAGE_LOGGER}.config').debug(
            f"Logging configured: study log {cls._log_file}, "
            f"console {logging.getLevelName(console_level)}, "
            f"file {logging.getLevelName(file_level)}"
        )

    @classmethod
    def get_logger(cls, name: str) -> logging.Logger:
        """Logger for a module, placed under the 'delayshare.' hierarchy."""
        if not cls._configured:
            cls.configure()
        if not name.startswith(f'{PACKAGE_LOGGER}.'):
            name = f'{PACKAGE_LOGGER}.{name}'
        return logging.getLogger(name)

    @classmethod
    def get_console_level(cls) -> int:
        return cls._console_level

    @classmethod
    def get_log_file(cls) -> Optional[str]:
        return cls._log_file


def get_logger(name: str) -> logging.Logger:
    """
    Module logger.

    Example:
        from utils.logger_config import get_logger
        logger = get_logger(__name__)
        logger.info("Sampling 1000 permutations")
    """
    return DelayShareLogger.get_logger(name)


def configure_logging(**kwargs) -> None:
    """
    Shortcut for DelayShareLogger.configure().

    Example:
        configure_logging(log_file='study_log.log', console_level=logging.DEBUG)
    """
    DelayShareLogger.configure(**kwargs)


DelayShareLogger.configure()
