import json
import math
import os
import sys
from typing import Any, Dict, Iterable, List, Optional, TextIO

import numpy as np
import pandas as pd

from errors import InvalidArgumentError

SWEEP_SCHEMA = "sweep-v1"


def _plain(value: Any) -> Any:
    """Make numpy scalars/arrays and non-finite floats JSON friendly."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def dump_json(data: Dict[str, Any], stream: Optional[TextIO] = None):
    json.dump(_plain(data), stream or sys.stdout, indent=4)
    (stream or sys.stdout).write("\n")


def write_json(data: Dict[str, Any], path: str):
    with open(path, "w") as f:
        dump_json(data, f)


def read_json(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise InvalidArgumentError(f"file not found: {path}")
    try:
        with open(path, "r") as f:
            content = f.read()
        return json.loads(content) if content else {}
    except json.JSONDecodeError as e:
        raise InvalidArgumentError(f"{path} is not valid JSON: {e}")


def load_golden(path: str) -> Dict[str, Dict[str, float]]:
    """Reference values: {"values": {name: {"value": x, "tolerance": t}}}."""
    data = read_json(path)
    values = data.get("values")
    if not isinstance(values, dict):
        raise InvalidArgumentError(f"{path} has no 'values' table")
    for name, entry in values.items():
        if "value" not in entry:
            raise InvalidArgumentError(f"golden entry '{name}' has no value")
        entry.setdefault("tolerance", 1e-10)
    return values


class CsvRowWriter:
    """Streams rows to CSV, schema line first, header once."""

    def __init__(self, stream: TextIO, columns: List[str]):
        self.stream = stream
        self.columns = columns
        self.stream.write(f"# schema: {SWEEP_SCHEMA}\n")
        self._header = True

    def write(self, rows: Iterable[Dict[str, Any]]):
        frame = pd.DataFrame(list(rows), columns=self.columns)
        frame.to_csv(self.stream, header=self._header, index=False, float_format="%.17g")
        self._header = False
        self.stream.flush()


def read_sweep_csv(path: str) -> pd.DataFrame:
    with open(path, "r") as f:
        first = f.readline().strip()
    if first != f"# schema: {SWEEP_SCHEMA}":
        raise InvalidArgumentError(f"{path} does not start with the {SWEEP_SCHEMA} schema line")
    return pd.read_csv(path, comment="#")
