import logging
import sys
from colorama import init, Fore, Style
from pathlib import Path

# Initialize colorama for cross-platform colored output
init()

APP_LOGGER = "zakotfs"

DEFAULT_LOGGING = {
    'level': 'INFO',
    'console': True,
    'file': None,
    'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
}


class ColoredFormatter(logging.Formatter):
    """Custom formatter with colored output for console"""

    COLORS = {
        'DEBUG': Fore.CYAN,
        'INFO': Fore.GREEN,
        'WARNING': Fore.YELLOW,
        'ERROR': Fore.RED,
        'CRITICAL': Fore.RED + Style.BRIGHT
    }

    def format(self, record):
        # Color a copy so the file handler keeps the plain levelname
        record = logging.makeLogRecord(record.__dict__)
        if record.levelname in self.COLORS:
            record.levelname = f"{self.COLORS[record.levelname]}{record.levelname}{Style.RESET_ALL}"

        return super().format(record)


def get_logger(component: str) -> logging.Logger:
    """Child logger of the application logger, e.g. zakotfs.channel"""
    return logging.getLogger(f"{APP_LOGGER}.{component}")


def setup_logger(name, config):
    """Setup logger with console and file handlers"""

    settings = dict(DEFAULT_LOGGING)
    settings.update(config.get('logging') or {})
    level = getattr(logging, str(settings['level']).upper(), logging.INFO)

    # Create logger
    logger = logging.getLogger(name)
    logger.setLevel(level)

    # Clear existing handlers
    logger.handlers.clear()

    # Console handler with colors
    if settings['console']:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(level)

        console_formatter = ColoredFormatter(
            f"{Fore.BLUE}%(asctime)s{Style.RESET_ALL} - %(name)s - %(levelname)s - %(message)s"
        )
        console_handler.setFormatter(console_formatter)
        logger.addHandler(console_handler)

    # File handler
    if settings['file']:
        log_file = Path(settings['file'])
        log_file.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(level)

        file_formatter = logging.Formatter(settings['format'])
        file_handler.setFormatter(file_formatter)
        logger.addHandler(file_handler)

    return logger
