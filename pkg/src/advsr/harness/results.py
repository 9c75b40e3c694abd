"""
Result rows and their CSV / JSON artifacts.

CSV output holds only values that are a function of config and seed, so
re-runs produce byte-identical files; runtimes live in the JSON summary.
"""
import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Type

from pydantic import BaseModel, ConfigDict

from advsr.logging_config import get_harness_logger

logger = get_harness_logger()


class ResultRow(BaseModel):
    """One (defense, attack) cell"""
    model_config = ConfigDict(extra="forbid")

    defense: str
    attack: str
    adaptive: bool = False
    a_b: float = math.nan
    a_a: float = math.nan
    a_a_std: float = 0.0
    asr: float = math.nan
    r1: float = math.nan
    l2: float = math.nan
    snr: float = math.nan
    trials: int = 1
    examples: int = 0
    seed: int = 0
    error: str = ''
    runtime_s: float = 0.0


class SweepRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    transform: str
    param: str
    value: float
    a_b: float = math.nan
    a_a: float = math.nan
    r1: float = math.nan
    optimal: bool = False
    error: str = ''
    runtime_s: float = 0.0


class GapRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    transform: str
    gap: float = math.nan
    error: str = ''


def _cell(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def columns_of(row_type: Type[BaseModel]) -> List[str]:
    return [name for name in row_type.model_fields if name != 'runtime_s']


def write_csv(rows: Sequence[BaseModel], path: Path, row_type: Type[BaseModel]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = columns_of(row_type)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(getattr(row, c)) for c in columns])
    logger.info(f"Wrote {len(rows)} rows to {path}")


def write_summary(path: Path, command: str, rows: Sequence[BaseModel],
                  extra: Optional[Dict[str, Any]] = None) -> None:
    """JSON summary: every row (runtimes included) plus command-level fields"""
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        'command': command,
        'rows': [json.loads(row.model_dump_json()) for row in rows],
        'errors': sum(1 for row in rows if getattr(row, 'error', '')),
        **(extra or {}),
    }
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(doc, f, indent=2, sort_keys=True, default=str)
        f.write('\n')


def write_trace(path: Path, trace: Sequence[float]) -> None:
    """Loss trace as (iteration, loss) rows"""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['iteration', 'loss'])
        for i, value in enumerate(trace):
            writer.writerow([i, repr(float(value))])
