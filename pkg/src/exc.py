class TLPOError(Exception):
    """Базовая ошибка пакета"""
    exit_code = 1


class ConfigurationError(TLPOError):
    exit_code = 2


class DomainError(TLPOError, ValueError):
    """Значение вне области определения (вероятность вне (0, 1], неизвестный токен)"""
    exit_code = 3


class InputFileError(TLPOError):
    exit_code = 3

    def __init__(self, path, reason: str = 'file not found'):
        self.path = str(path)
        super().__init__(f'{self.path}: {reason}')


class CorpusFormatError(InputFileError):
    def __init__(self, path, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(path, f'line {line_no}: {reason}')


class CheckpointVersionError(InputFileError):
    pass


class UndefinedMetricError(TLPOError):
    exit_code = 3


class DegenerateCandidateError(TLPOError):
    """Меньше двух кандидатов с положительной вероятностью"""


class UpdateRejectedError(TLPOError):
    pass


class IncidentLimitExceeded(TLPOError):
    exit_code = 4
