# services/logging_service.py
"""
Application logging setup and the JSONL protocol trace.

Trace events are kept apart from regular logging: they are the reproducible
record of a run and feed the trace digest used by golden-file checks.
"""
import hashlib
import json
import logging
import os
from typing import Dict, List, Any, Optional

from config import LOG_LEVEL, LOG_FILE

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)


def configure_logging(level: Optional[str] = None, filename: Optional[str] = None):
    """Configure the root logger once for CLI use"""
    level_name = (level or LOG_LEVEL).upper()
    numeric = getattr(logging, level_name, logging.WARNING)
    kwargs = {'level': numeric, 'format': LOG_FORMAT}
    target = filename or LOG_FILE
    if target:
        kwargs['filename'] = target
    logging.basicConfig(**kwargs)


class TraceLog:
    """Collects trace events as canonical JSON lines and maintains a running SHA-256 digest"""

    def __init__(self, keep_lines: bool = True):
        self.keep_lines = keep_lines
        self.lines: List[str] = []
        self.count = 0
        self._hash = hashlib.sha256()
        self._sealed = None

    def emit(self, event: Dict[str, Any]):
        if self._sealed is not None:
            raise RuntimeError("trace was restored digest-only and cannot be extended")
        line = json.dumps(event, sort_keys=True, separators=(',', ':'))
        self._hash.update(line.encode('utf-8'))
        self._hash.update(b'\n')
        self.count += 1
        if self.keep_lines:
            self.lines.append(line)

    def link(self, time: int, src: int, dst: int, instance: str, kind: str, digest: Optional[str]):
        self.emit({
            "time": time,
            "src": src,
            "dst": dst,
            "instance": instance,
            "kind": kind,
            "digest": digest,
        })

    def node(self, time: int, node: int, event: str, round: Optional[int] = None,
             digest: Optional[str] = None, diameter: Optional[float] = None, **extra):
        entry = {
            "time": time,
            "node": node,
            "event": event,
            "round": round,
            "payload_digest": digest,
            "diameter": diameter,
        }
        entry.update(extra)
        self.emit(entry)

    @property
    def digest(self) -> str:
        if self._sealed is not None:
            return self._sealed
        return self._hash.hexdigest()

    def write(self, path: str):
        """Write the collected lines; a digest-only trace has nothing to write"""
        if not self.keep_lines:
            logger.warning(f"Trace for {path} was collected digest-only; nothing written")
            return
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            for line in self.lines:
                f.write(line)
                f.write('\n')
        logger.info(f"Trace written to {path} ({self.count} events)")

    def __getstate__(self):
        state = dict(self.__dict__)
        state['_hash'] = None
        state['_frozen'] = self.digest
        return state

    def __setstate__(self, state):
        frozen = state.pop('_frozen')
        self.__dict__.update(state)
        self._hash = hashlib.sha256()
        if self.keep_lines and len(self.lines) == self.count:
            for line in self.lines:
                self._hash.update(line.encode('utf-8'))
                self._hash.update(b'\n')
        else:
            # digest-only traces come back sealed
            self._sealed = frozen
