import hashlib
import json
from pathlib import Path
from typing import Iterable, Optional

from pydantic import BaseModel, ValidationError

from src.config import config
from src.exc import CheckpointVersionError, CorpusFormatError, InputFileError
from src.logconf import opt_logger as log
from src.models import (
    Incident, MetricResult, Mode, PromptRecord, RunManifest, RunningStats, ScriptRules, StepRecord,
)
from src.services.policy import PolicyTable

logger = log.setup_logger('storage')


def _prompt_line(prompt: PromptRecord) -> str:
    return json.dumps(
        {'id': prompt.id, 'text': prompt.text, 'lang': prompt.lang.value},
        ensure_ascii=False, separators=(',', ':'),
    )


def canonical_json(payload) -> str:
    """ Детерминированная запись: сортированные ключи, без отметок времени """
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + '\n'


# = КЛАСС ДЛЯ РАБОТЫ С ФАЙЛАМИ ЗАПУСКА =
class StorageService:
    def __init__(self):
        self.format = config.storage.checkpoint_format
        self.version = config.storage.checkpoint_version

    @staticmethod
    def _existing(path) -> Path:
        path = Path(path)
        if not path.is_file():
            raise InputFileError(path)
        return path

    @staticmethod
    def _write(path, text: str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding='utf-8')
        return path

    # = ПРОМПТЫ =
    def save_prompts(self, path, prompts: Iterable[PromptRecord]) -> Path:
        """ Одна JSON-запись на строку: id, text, lang """
        lines = [_prompt_line(p) for p in prompts]
        path = self._write(path, ''.join(line + '\n' for line in lines))
        logger.debug(f'Saved {len(lines)} prompts to {path.name}')
        return path

    def load_prompts(self, path) -> list[PromptRecord]:
        path = self._existing(path)
        prompts = []
        with path.open(encoding='utf-8') as f:
            for line_no, line in enumerate(f, start=1):
                try:
                    prompts.append(PromptRecord.model_validate(json.loads(line)))
                except (json.JSONDecodeError, ValidationError, TypeError) as e:
                    logger.error(f'Malformed prompt record in {path.name} at line {line_no}')
                    raise CorpusFormatError(path, line_no, str(e).splitlines()[0]) from e
        return prompts

    @staticmethod
    def records_digest(prompts: Iterable[PromptRecord]) -> str:
        """ sha256 файла, который save_prompts запишет для этих записей """
        digest = hashlib.sha256()
        for prompt in prompts:
            digest.update((_prompt_line(prompt) + '\n').encode('utf-8'))
        return digest.hexdigest()

    @staticmethod
    def file_digest(path) -> str:
        digest = hashlib.sha256()
        with Path(path).open('rb') as f:
            for block in iter(lambda: f.read(1 << 16), b''):
                digest.update(block)
        return digest.hexdigest()

    # = ЧЕКПОИНТЫ =
    def save_checkpoint(self, path, kind: str, body: dict) -> Path:
        """ Строка 1 - заголовок с версией формата, строка 2 - тело """
        header = {'format': self.format, 'version': self.version, 'kind': kind}
        text = (json.dumps(header, sort_keys=True) + '\n'
                + json.dumps(body, ensure_ascii=False, sort_keys=True, separators=(',', ':')) + '\n')
        return self._write(path, text)

    def load_checkpoint(self, path, kind: str) -> dict:
        path = self._existing(path)
        with path.open(encoding='utf-8') as f:
            header_line, body_line = f.readline(), f.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as e:
            raise CheckpointVersionError(path, 'missing checkpoint header') from e
        if not isinstance(header, dict) or header.get('format') != self.format:
            raise CheckpointVersionError(path, f'not a {self.format} file')
        if header.get('version') != self.version:
            raise CheckpointVersionError(
                path, f'checkpoint version {header.get("version")} is not supported (expected {self.version})')
        if header.get('kind') != kind:
            raise CheckpointVersionError(path, f'expected a {kind} checkpoint, found {header.get("kind")}')
        try:
            body = json.loads(body_line)
        except json.JSONDecodeError as e:
            raise CheckpointVersionError(path, 'checkpoint body is truncated') from e
        if not isinstance(body, dict):
            raise CheckpointVersionError(path, f'checkpoint body must be an object, got {type(body).__name__}')
        return body

    def save_policy(self, path, policy: PolicyTable) -> Path:
        path = self.save_checkpoint(path, 'policy', policy.to_record())
        logger.info(f'Policy checkpoint saved to {path.name}')
        return path

    def load_policy(self, path) -> PolicyTable:
        record = self.load_checkpoint(path, 'policy')
        try:
            return PolicyTable.from_record(record)
        except (ValidationError, KeyError, TypeError, ValueError) as e:
            raise CheckpointVersionError(path, f'invalid policy checkpoint: {e}') from e

    def save_state(self, path, state) -> Path:
        """ Всё, что нужно для продолжения запуска с того же шага """
        body = {
            'theta': state.theta.to_record(),
            'ref': state.ref.to_record(),
            'step': state.step,
            'cursor': state.cursor,
            'stats': state.stats.model_dump(mode='json'),
            'incidents': [i.model_dump(mode='json') for i in state.incidents],
            'records': [r.model_dump(mode='json') for r in state.records],
            'contexts': [list(window) for window in state.contexts],
            'baseline': state.baseline.model_dump(mode='json') if state.baseline else None,
        }
        path = self.save_checkpoint(path, 'train-state', body)
        logger.info(f'Training state at step {state.step} saved to {path.name}')
        return path

    def load_state(self, path):
        from src.services.trainer import TrainState

        body = self.load_checkpoint(path, 'train-state')
        try:
            return TrainState(
                theta=PolicyTable.from_record(body['theta']),
                ref=PolicyTable.from_record(body['ref']).snapshot(),
                step=body['step'],
                cursor=body['cursor'],
                stats=RunningStats.model_validate(body['stats']),
                incidents=[Incident.model_validate(i) for i in body['incidents']],
                records=[StepRecord.model_validate(r) for r in body['records']],
                contexts={tuple(window): None for window in body['contexts']},
                baseline=MetricResult.model_validate(body['baseline']) if body['baseline'] else None,
            )
        except (ValidationError, KeyError, TypeError, ValueError) as e:
            raise CheckpointVersionError(path, f'invalid training state: {e}') from e

    # = ОТЧЁТЫ =
    def write_report(self, out_dir, name: str, report: BaseModel | dict, table: Optional[str] = None) -> list[str]:
        """ name.json (машинный) и, если есть таблица, name.txt (для людей) """
        payload = report.model_dump(mode='json') if isinstance(report, BaseModel) else report
        written = [self._write(Path(out_dir) / f'{name}.json', canonical_json(payload)).name]
        if table is not None:
            written.append(self._write(Path(out_dir) / f'{name}.txt', table).name)
        return written

    def read_report(self, path) -> dict:
        path = self._existing(path)
        try:
            return json.loads(path.read_text(encoding='utf-8'))
        except json.JSONDecodeError as e:
            raise InputFileError(path, f'not a JSON report: {e}') from e

    def digest_inputs(self, **paths) -> dict:
        return {
            name: {'file': Path(path).name, 'sha256': self.file_digest(self._existing(path))}
            for name, path in sorted(paths.items()) if path is not None
        }

    def write_manifest(self, out_dir, manifest: RunManifest) -> Path:
        """ run_id - первые 12 символов sha1 канонической записи без самого run_id """
        payload = manifest.model_dump(mode='json', exclude={'run_id'})
        run_id = hashlib.sha1(json.dumps(payload, sort_keys=True, ensure_ascii=False).encode('utf-8')).hexdigest()[:12]
        manifest = manifest.model_copy(update={'run_id': run_id})
        path = self._write(Path(out_dir) / config.storage.manifest_file, canonical_json(manifest.model_dump(mode='json')))
        logger.info(f'Run {run_id} manifest written to {path}')
        return path

    # = ПРАВИЛА ДЕТЕКТОРА =
    def load_rules(self, path) -> tuple[ScriptRules, Optional[Mode]]:
        """ JSON: {"target": "ko", "mode": "neutral", "extra_patterns": [...]} """
        data = self.read_report(path)
        try:
            rules = ScriptRules.for_target(data['target'], data.get('extra_patterns', ()))
            mode = Mode(data['mode']) if data.get('mode') else None
        except (KeyError, ValueError, ValidationError) as e:
            raise InputFileError(path, f'invalid detector rules: {e}') from e
        return rules, mode


storage_service = StorageService()
