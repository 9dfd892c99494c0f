import sys
from typing import Optional, Sequence

from src.commands import build_parser
from src.exc import TLPOError
from src.logconf import opt_logger as log

logger = log.setup_logger('main')


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Коды выхода: 0 - все артефакты записаны, 2 - ошибка флагов или конфига,
    3 - входные данные, 4 - превышен лимит численных инцидентов
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        outputs = args.handler(args)
    except TLPOError as e:
        logger.error(f'{args.command} failed: {e}')
        return e.exit_code

    logger.info(f'{args.command} wrote {len(outputs)} files')
    return 0


if __name__ == "__main__":
    sys.exit(main())
