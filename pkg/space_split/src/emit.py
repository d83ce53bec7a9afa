"""
Result files: a table plus the resolved config that produced it.

CSV files start with ``#`` header lines::

    # config: {"delta_s": 0.01, ...}
    # generated: 2026-10-18T12:00:00+00:00

followed by the table. JSON files hold the same under the keys
``config``, ``generated``, ``columns`` and ``rows``; missing values are
written as null.
"""

import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

CONFIG_PREFIX = "# config: "
GENERATED_PREFIX = "# generated: "
FLOAT_FORMAT = "%.17g"


def _plain(value):
    """JSON-ready scalar; NaN and infinities become null."""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _as_frame(results, columns=None):
    if isinstance(results, pd.DataFrame):
        frame = results
    else:
        frame = pd.DataFrame(list(results), columns=columns)
    if columns is not None:
        frame = frame.reindex(columns=list(columns))
    return frame


def render(results, fmt, config, columns=None, timestamp=True):
    """Build the file text for ``results`` (a DataFrame or an iterable of row dicts)."""
    frame = _as_frame(results, columns)
    generated = datetime.now(timezone.utc).isoformat(timespec="seconds") if timestamp else None
    config_json = json.dumps(config, sort_keys=True)

    if fmt == "csv":
        buffer = io.StringIO()
        buffer.write(f"{CONFIG_PREFIX}{config_json}\n")
        if generated:
            buffer.write(f"{GENERATED_PREFIX}{generated}\n")
        frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return buffer.getvalue()
    if fmt == "json":
        document = {
            "config": config,
            "generated": generated,
            "columns": [str(c) for c in frame.columns],
            "rows": [[_plain(v) for v in row] for row in frame.itertuples(index=False, name=None)],
        }
        return json.dumps(document, indent=2) + "\n"
    raise ValueError(f"Unknown format '{fmt}'. Available: ['csv', 'json']")


def emit(results, path, fmt, config, columns=None, timestamp=True):
    """
    Write results to ``path`` (``-`` for stdout).

    Column order is the DataFrame's (or ``columns``); floats keep 17
    significant digits so a re-read gives back the same doubles.

    Returns:
        str: the path written.
    """
    text = render(results, fmt, config, columns, timestamp)
    if str(path) == "-":
        sys.stdout.write(text)
        return "-"
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return str(path)


def read_artifact(path):
    """
    Parse a CSV or JSON result file.

    Returns:
        tuple: (config dict, DataFrame).
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        document = json.loads(text)
        frame = pd.DataFrame(document["rows"], columns=document["columns"])
        # A column of nulls only comes back as object
        empty = [c for c in frame.columns if frame[c].isna().all()]
        return document["config"], frame.astype({c: float for c in empty})

    config = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        if line.startswith(CONFIG_PREFIX):
            config = json.loads(line[len(CONFIG_PREFIX):])
    frame = pd.read_csv(io.StringIO(text), comment="#")
    return config, frame
