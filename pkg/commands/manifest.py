"""
Run manifests: a JSON record written next to every command output.
Holds the argv needed to reproduce the run, including any generated seed.
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from config import __version__
from utils.errors import FormatError

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = '.manifest.json'


def manifest_path(output) -> Path:
    """'<output>.manifest.json' next to an output file."""
    output = Path(output)
    return output.with_name(output.name + MANIFEST_SUFFIX)


@dataclass
class RunManifest:
    """
    Args:
        subcommand: str - Command that produced the outputs
        parameters: dict - Every resolved parameter (presets expanded)
        inputs: list - Input paths
        outputs: list - Output paths
        seed: int - Root seed, when the command is random
        argv: list - Command line that reproduces the run
        tool_version: str
        duration_seconds: float - Wall-clock time of the run
        extra: dict - Command-specific results (iteration counts, fitted values)
    """

    subcommand: str
    parameters: Dict[str, Any]
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    seed: Optional[int] = None
    argv: List[str] = field(default_factory=list)
    tool_version: str = __version__
    duration_seconds: float = 0.0
    extra: Dict[str, Any] = field(default_factory=dict)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=str) + '\n', encoding='utf-8')
        logger.info(f"✓ Wrote manifest {path}")
        return path

    @classmethod
    def load(cls, path) -> 'RunManifest':
        path = Path(path)
        try:
            payload = json.loads(path.read_text(encoding='utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"manifest is not valid JSON: {exc}", path=str(path))
        if not isinstance(payload, dict) or 'subcommand' not in payload or 'argv' not in payload:
            raise FormatError("manifest lacks 'subcommand' or 'argv'", path=str(path))
        known = {name for name in cls.__dataclass_fields__}
        return cls(**{key: value for key, value in payload.items() if key in known})


class RunTimer:
    """Measures a command's wall-clock duration for its manifest."""

    def __init__(self):
        self.started = time.perf_counter()

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.started
