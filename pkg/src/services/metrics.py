from typing import Sequence

from src.exc import DomainError, UndefinedMetricError
from src.logconf import opt_logger as log
from src.models import ConfusionReport, MetricResult, ResponseDetail

logger = log.setup_logger('metrics')


def compute_metrics(reports: Sequence[ConfusionReport]) -> MetricResult:
    """
    WPR = |W_pass| / |W_total| по всем словам всех ответов,
    RPR = доля ответов без единого смешанного слова.
    Исключённые слова не входят ни в числитель, ни в знаменатель
    """
    if not reports:
        raise UndefinedMetricError('no responses to evaluate')
    modes = {r.mode for r in reports}
    if len(modes) > 1:
        raise DomainError(f'reports mix evaluation modes: {sorted(m.value for m in modes)}')

    details, words_pass, words_total, responses_pass = [], 0, 0, 0
    for index, report in enumerate(reports):
        n_pass, n_confused = report.n_pass, report.n_confused
        passed = n_confused == 0
        details.append(ResponseDetail(
            index=index,
            n_pass=n_pass,
            n_confused=n_confused,
            n_excluded=report.n_excluded,
            passed=passed,
            empty=n_pass + n_confused == 0,
        ))
        words_pass += n_pass
        words_total += n_pass + n_confused
        responses_pass += passed

    if words_total == 0:
        raise UndefinedMetricError(f'{len(reports)} responses contain no countable words')

    empty = [d.index for d in details if d.empty]
    if empty:
        logger.debug(f'{len(empty)} responses had no countable words and count as pass')

    return MetricResult(
        mode=modes.pop(),
        wpr=words_pass / words_total,
        rpr=responses_pass / len(reports),
        words_pass=words_pass,
        words_total=words_total,
        responses_pass=responses_pass,
        responses_total=len(reports),
        empty_responses=empty,
        responses=details,
    )


def summary_table(results: dict[str, MetricResult]) -> str:
    """ Текстовая таблица для людей; машинный отчёт пишется отдельно """
    header = f"{'run':<16} {'mode':<8} {'WPR':>8} {'RPR':>8} {'words':>12} {'responses':>12}"
    lines = [header, '-' * len(header)]
    for label, result in results.items():
        lines.append(
            f'{label:<16} {result.mode.value:<8} {result.wpr:>8.4f} {result.rpr:>8.4f} '
            f'{result.words_pass:>5}/{result.words_total:<6} {result.responses_pass:>5}/{result.responses_total:<6}'
        )
    return '\n'.join(lines) + '\n'
