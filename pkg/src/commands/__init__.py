import argparse
from dataclasses import dataclass, field
from functools import wraps
from typing import Callable

from src.config import config


@dataclass(frozen=True)
class Command:
    name: str
    help: str
    handler: Callable[[argparse.Namespace], list[str]]
    arguments: tuple = field(default_factory=tuple)


# Словарь зарегистрированных подкоманд по имени
commands: dict[str, Command] = {}

# Флаги, общие для всех подкоманд
COMMON_ARGUMENTS = (
    (('--config',), dict(default=None, help='JSON file with parameter values; flags override it')),
    (('--seed',), dict(type=int, default=None, help=f'master seed (default {config.seed})')),
    (('--out',), dict(default=None, help=f'output directory (default {config.paths.out_dir}/<command>)')),
    (('--mode',), dict(choices=('neutral', 'strict'), default=None, help='treatment of English words')),
)


def register_command(name: str, help: str, arguments: tuple = ()):
    """
    Регистрирует обработчик подкоманды.
    Обработчик получает разобранные аргументы и возвращает имена записанных файлов
    """
    def decorator(fn):
        @wraps(fn)
        def wrapper(args: argparse.Namespace) -> list[str]:
            return fn(args)

        commands[name] = Command(name=name, help=help, handler=wrapper, arguments=tuple(arguments))
        return wrapper

    return decorator


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='tlpo', description='Token-level policy optimization against language confusion')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for command in commands.values():
        sub = subparsers.add_parser(command.name, help=command.help, description=command.help)
        own = {flag for flags, _ in command.arguments for flag in flags}
        common = tuple(arg for arg in COMMON_ARGUMENTS if not own.intersection(arg[0]))
        for flags, options in common + command.arguments:
            sub.add_argument(*flags, **options)
        sub.set_defaults(handler=command.handler)
    return parser


from src.commands import corpus, evaluation, training  # noqa: E402,F401
