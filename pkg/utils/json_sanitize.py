"""
Sanitize Python structures for strict JSON serialization.

Reports carry numpy scalars, enums, dataclasses and infinite budgets; strict JSON
parsers reject NaN/Infinity, so non-finite floats become null.
"""

from __future__ import annotations

import dataclasses
import math
import re
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

# Control characters (ASCII 0x00-0x1F) that are invalid in JSON string values
# when not escaped. \n and \t are kept.
_CONTROL_CHAR_RE = re.compile(r"[\x00-\x08\x0b\x0c\x0e-\x1f]")


def _sanitize_string(s: str) -> str:
    s = s.replace("\r\n", "\n").replace("\r", "\n")
    return _CONTROL_CHAR_RE.sub(" ", s)


def sanitize_for_json(obj: Any) -> Any:
    """
    Recursively convert obj into plain JSON-safe values.

    - inf and nan become None.
    - numpy scalars and arrays become Python numbers and lists.
    - Enums become their values; dataclasses and pydantic models become dicts.
    - Returns a copy; does not mutate the original.
    """
    if obj is None or isinstance(obj, bool):
        return obj
    if isinstance(obj, Enum):
        return sanitize_for_json(obj.value)
    if isinstance(obj, np.generic):
        return sanitize_for_json(obj.item())
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, int):
        return obj
    if isinstance(obj, str):
        return _sanitize_string(obj)
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return sanitize_for_json(obj.tolist())
    if isinstance(obj, BaseModel):
        return sanitize_for_json(obj.model_dump(mode="json"))
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return sanitize_for_json({f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)})
    if isinstance(obj, dict):
        return {str(sanitize_for_json(k)): sanitize_for_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj, key=str) if isinstance(obj, (set, frozenset)) else obj
        return [sanitize_for_json(item) for item in items]
    return obj
