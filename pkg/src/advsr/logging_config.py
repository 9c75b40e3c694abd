"""
Logging configuration for advsr.
Category loggers with console output and, once a log directory is configured,
rotating per-category log files (plain or structured JSON).
"""
import json
import logging
import os
from datetime import datetime
from logging.handlers import RotatingFileHandler
from typing import Dict, Optional


class JsonFormatter(logging.Formatter):
    """JSON formatter for structured logging"""

    def format(self, record: logging.LogRecord) -> str:
        log_entry = {
            'timestamp': datetime.fromtimestamp(record.created).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno
        }

        if record.exc_info:
            log_entry['exception'] = self.formatException(record.exc_info)

        if hasattr(record, 'extra_data'):
            log_entry.update(record.extra_data)

        return json.dumps(log_entry, ensure_ascii=False, default=str)


class DetailedFormatter(logging.Formatter):
    """Detailed human-readable formatter"""

    def __init__(self):
        super().__init__(
            fmt='%(asctime)s | %(levelname)-8s | %(name)-20s | %(funcName)-20s:%(lineno)-4d | %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )


class SimpleFormatter(logging.Formatter):
    """Simple formatter for console output"""

    def __init__(self):
        super().__init__(
            fmt='%(asctime)s | %(levelname)-8s | %(name)s | %(message)s',
            datefmt='%H:%M:%S'
        )


# category -> (console level, file level, json file output)
CATEGORIES = {
    'startup': (logging.INFO, logging.DEBUG, False),
    'data': (logging.INFO, logging.DEBUG, False),
    'training': (logging.INFO, logging.DEBUG, False),
    'attack': (logging.INFO, logging.DEBUG, False),
    'defense': (logging.INFO, logging.DEBUG, False),
    'harness': (logging.INFO, logging.DEBUG, True),
    'errors': (logging.ERROR, logging.WARNING, True),
    'performance': (logging.CRITICAL + 1, logging.INFO, True),  # file only
}


class LoggingManager:
    """Central logging management class"""

    def __init__(self, base_dir: Optional[str] = None, console_level: Optional[int] = None):
        self.base_dir = base_dir
        self.console_level = console_level
        self.loggers: Dict[str, logging.Logger] = {}

    def _ensure_log_directory(self):
        """Create the log directory if it doesn't exist"""
        os.makedirs(self.base_dir, exist_ok=True)

    def _create_file_handler(self, filename: str, level: int = logging.INFO,
                             use_json: bool = False, max_bytes: int = 10 * 1024 * 1024,
                             backup_count: int = 5) -> RotatingFileHandler:
        """Create a rotating file handler"""
        handler = RotatingFileHandler(
            filename=os.path.join(self.base_dir, filename),
            maxBytes=max_bytes,
            backupCount=backup_count,
            encoding='utf-8'
        )
        handler.setLevel(level)
        handler.setFormatter(JsonFormatter() if use_json else DetailedFormatter())
        return handler

    def _create_console_handler(self, level: int) -> logging.StreamHandler:
        handler = logging.StreamHandler()
        handler.setLevel(level)
        handler.setFormatter(SimpleFormatter())
        return handler

    def _attach_handlers(self, category: str, logger: logging.Logger):
        console_level, file_level, use_json = CATEGORIES.get(
            category, (logging.INFO, logging.DEBUG, False))
        if self.console_level is not None and console_level <= logging.CRITICAL:
            console_level = max(console_level, self.console_level)

        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()

        if console_level <= logging.CRITICAL:
            logger.addHandler(self._create_console_handler(console_level))
        if self.base_dir:
            self._ensure_log_directory()
            logger.addHandler(self._create_file_handler(
                f"{category}.log", level=file_level, use_json=use_json))

    def get_logger(self, category: str) -> logging.Logger:
        """Get or create the logger for a category"""
        if category in self.loggers:
            return self.loggers[category]

        logger = logging.getLogger(f"advsr.{category}")
        logger.setLevel(logging.DEBUG)  # handlers filter
        self._attach_handlers(category, logger)
        logger.propagate = False

        self.loggers[category] = logger
        return logger

    def configure(self, base_dir: Optional[str] = None, console_level: Optional[int] = None):
        """Point all category loggers at a log directory and console level"""
        self.base_dir = base_dir
        self.console_level = console_level
        for category in CATEGORIES:
            self.get_logger(category)
        for category, logger in self.loggers.items():
            self._attach_handlers(category, logger)

    def log_startup_info(self, command: str):
        startup_logger = self.get_logger('startup')
        startup_logger.info("=" * 60)
        startup_logger.info(f"advsr {command} starting")
        startup_logger.info("=" * 60)
        startup_logger.info(f"Log directory: {self.base_dir or '(console only)'}")
        startup_logger.info(f"Startup time: {datetime.now().isoformat()}")


log_manager = LoggingManager(base_dir=os.getenv('ADVSR_LOG_DIR'))


def get_startup_logger() -> logging.Logger:
    return log_manager.get_logger('startup')


def get_data_logger() -> logging.Logger:
    """Get the dataset / audio I/O logger"""
    return log_manager.get_logger('data')


def get_training_logger() -> logging.Logger:
    return log_manager.get_logger('training')


def get_attack_logger() -> logging.Logger:
    return log_manager.get_logger('attack')


def get_defense_logger() -> logging.Logger:
    """Get the defense (transforms / adaptive wrappers) logger"""
    return log_manager.get_logger('defense')


def get_harness_logger() -> logging.Logger:
    return log_manager.get_logger('harness')


def get_error_logger() -> logging.Logger:
    return log_manager.get_logger('errors')


def get_performance_logger() -> logging.Logger:
    """Get the performance logger (file only)"""
    return log_manager.get_logger('performance')


def log_performance(message: str, **fields):
    """Record a structured timing/count record"""
    get_performance_logger().info(message, extra={'extra_data': fields})


def log_error_with_context(logger: logging.Logger, message: str, **context):
    """Log an error to the given logger and, with context, to the error logger"""
    try:
        extra_data = {'original_logger': logger.name, **context}
        get_error_logger().error(message, extra={'extra_data': extra_data})
        logger.error(message)
    except Exception as e:
        print(f"Logging error: {e}")
        logger.error(message)
