"""
Deterministic report writers: ``summary.json`` and plot-ready CSV curves.

Floats are written with 12 significant digits and non-finite values as ``null`` so that the same
scenario always produces byte-identical files.
"""

import csv
import json
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from qlab.errors import NumericalError

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 12
SUMMARY_FILE = "summary.json"
ERROR_FILE = "error.json"


def format_float(value: float) -> str:
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def normalize(value: Any) -> Any:
    """
    JSON-ready copy of ``value`` with floats rounded to 12 significant digits.
    """
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return None
        return float(format_float(value))
    if isinstance(value, Mapping):
        return {str(k): normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [normalize(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


@lru_cache(maxsize=1)
def summary_schema() -> dict[str, Any]:
    text = resources.files("qlab").joinpath("schemas", "summary.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_summary(summary: Mapping[str, Any]) -> None:
    """
    :raises NumericalError: When the summary does not match the shipped schema.
    """
    try:
        jsonschema.validate(instance=summary, schema=summary_schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise NumericalError(f"summary does not match its schema at '{path}': {exc.message}", payload={"path": path})


def dumps(document: Mapping[str, Any]) -> str:
    return json.dumps(normalize(document), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_summary(output_dir: Path, summary: Mapping[str, Any]) -> Path:
    normalized = normalize(summary)
    validate_summary(normalized)
    path = Path(output_dir) / SUMMARY_FILE
    path.write_text(dumps(normalized), encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def write_json(path: Path, document: Mapping[str, Any]) -> Path:
    Path(path).write_text(dumps(document), encoding="utf-8")
    return Path(path)


def write_error(output_dir: Path, error: Mapping[str, Any]) -> Path:
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    return write_json(output_dir / ERROR_FILE, error)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_float(float(value)) if math.isfinite(value) else ""
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """
    :param path: Destination file.
    :type path: Path

    :param header: Column names.
    :type header: Sequence[str]

    :param rows: Row values; floats use 12 significant digits, missing values are empty cells.
    :type rows: Iterable[Sequence[Any]]

    :return: The path written.
    :rtype: Path
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.info("Wrote %s", path)
    return path


def write_columns(path: Path, columns: Mapping[str, Sequence[Any]]) -> Path:
    return write_csv(path, list(columns), zip(*columns.values()))
