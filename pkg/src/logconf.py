import logging
import sys

from colorama import init, Fore, Style

from src.config import config


class RootLogger:
    """Простой логгер поверх корневого регистра (режим DEBUG)"""

    def __init__(self):
        logging.basicConfig(
            level=self.convert_level(config.log_level),
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            handlers=[
                logging.StreamHandler(sys.stderr)
            ]
        )
        self.root_logger = logging.getLogger()

    def setup_logger(self, name: str, level: str | int = config.log_level):
        """Возвращает именованный логгер с нужным уровнем"""
        logger = logging.getLogger(name)
        logger.setLevel(self.convert_level(level))
        return logger

    @staticmethod
    def convert_level(level: str | int):
        if isinstance(level, str):
            level = level.upper()  # dEbUG -> DEBUG
        return logging.getLevelName(level)


class CustomLogger:
    """ Цветной логгер для запусков из терминала """

    init()      # colorama: кроссплатформенные цвета

    class ColorFormatter(logging.Formatter):
        """Подсвечивает только уровень, имя компонента центрируется"""
        LEVEL_COLORS = {
            "DEBUG": Fore.CYAN,
            "INFO": Fore.GREEN,
            "WARNING": Fore.YELLOW,
            "ERROR": Fore.RED,
            "CRITICAL": Fore.RED + Style.BRIGHT,
        }

        # По самому длинному уровню, "CRITICAL"
        LEVEL_WIDTH = 8
        NAME_WIDTH = 14

        def format(self, record):
            original_levelname, original_name = record.levelname, record.name

            name = original_name
            if len(name) > self.NAME_WIDTH:
                name = name[: self.NAME_WIDTH - 3] + "..."

            record.levelname = (
                self.LEVEL_COLORS.get(original_levelname, "")
                + original_levelname.ljust(self.LEVEL_WIDTH)
                + Style.RESET_ALL
            )
            record.name = name.center(self.NAME_WIDTH)
            try:
                return super().format(record)
            finally:
                record.levelname, record.name = original_levelname, original_name

    def setup_logger(self, name=None, level: str | int = config.log_level):
        """Логгер с цветным уровнем; пишет в stderr, stdout остаётся под отчёты"""
        logger = logging.getLogger(name)
        logger.setLevel(self.convert_level(level))
        logger.handlers.clear()
        logger.propagate = False

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(self.convert_level(level))
        console_handler.setFormatter(self.ColorFormatter(
            fmt="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        ))
        logger.addHandler(console_handler)

        return logger

    @staticmethod
    def convert_level(level):
        if isinstance(level, str):
            level = level.upper()
        return logging.getLevelName(level)


opt_logger = RootLogger() if config.debug else CustomLogger()
