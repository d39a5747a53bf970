"""CSV and JSON writers. Output bytes depend only on the data passed in."""

import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Union

import numpy as np
import pandas as pd

PathLike = Union[str, Path]


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(value, Mapping):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(item) for item in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(data: Any, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_csv(rows: Union[pd.DataFrame, Iterable[Dict[str, Any]]], path: PathLike, columns: List[str] = None) -> Path:
    """RFC-4180 CSV with a header row and CRLF line endings."""
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=columns)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\r\n")
    return path


def write_waveform(t: np.ndarray, values: np.ndarray, path: PathLike, value_name: str = "value") -> Path:
    return write_csv(pd.DataFrame({"t_s": t, value_name: values}), path)


def write_trace(trace, path: PathLike) -> Path:
    """Two-column voltage trace; the header names the V_total used for normalization."""
    return write_waveform(trace.t, trace.volts, path, value_name=f"volts_vtotal_{trace.v_total:.6g}")
