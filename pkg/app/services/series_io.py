"""
Lectura/escritura de series y de ficheros de resultados.

- Entrada: CSV de dos columnas (tick entero o marca ISO sobre la rejilla de 3 minutos,
  log-precio). La cabecera es opcional.
- Salida: CSV con 17 cifras significativas (ida y vuelta exacta) y JSON con claves
  ordenadas.
"""

from __future__ import annotations

import json
import math
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import pandas as pd
import pytz

from app.errors import GapDetected, NonFiniteValue, NonMonotonicTime, ParseError
from app.services.series_core import RegularSeries, SeriesKind
from app.utils import MINUTES_PER_TICK, get_logger

FLOAT_FORMAT = "%.17g"
GRID_ORIGIN = datetime(1970, 1, 1, tzinfo=pytz.utc)
SERIES_COLUMNS = ("tick", "log_price")
TABLE_COLUMNS = ("name", "mean", "stdDev", "p-value")


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _looks_like_header(first: str, second: str) -> bool:
    if _is_float(second) or _is_float(first):
        return False
    try:
        datetime.fromisoformat(first.strip())
    except ValueError:
        return True
    return False


def _timestamp_to_tick(text: str, tz: pytz.BaseTzInfo, row: int) -> int:
    try:
        stamp = datetime.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"Fila {row}, columna 1: '{text}' no es un tick ni una marca ISO", row=row, column=1) from None
    if stamp.tzinfo is None:
        stamp = tz.localize(stamp)
    seconds = (stamp - GRID_ORIGIN).total_seconds()
    minutes, rest = divmod(seconds, 60)
    if rest or minutes % MINUTES_PER_TICK:
        raise ParseError(
            f"Fila {row}, columna 1: {text} no cae en la rejilla de {MINUTES_PER_TICK} minutos",
            row=row,
            column=1,
        )
    return int(minutes // MINUTES_PER_TICK)


def _parse_ticks(column: pd.Series, first_row: int, timezone: str) -> np.ndarray:
    stripped = column.str.strip()
    if stripped.str.fullmatch(r"[+-]?\d+").all():
        return stripped.astype(np.int64).to_numpy()
    tz = pytz.timezone(timezone)
    return np.array(
        [_timestamp_to_tick(text, tz, first_row + i) for i, text in enumerate(stripped)],
        dtype=np.int64,
    )


def _parse_values(column: pd.Series, first_row: int) -> np.ndarray:
    try:
        values = column.str.strip().astype(np.float64).to_numpy()
    except ValueError:
        for i, text in enumerate(column):
            if not _is_float(text):
                raise ParseError(
                    f"Fila {first_row + i}, columna 2: '{text}' no es un número",
                    row=first_row + i,
                    column=2,
                ) from None
        raise
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        row = first_row + int(bad[0])
        raise NonFiniteValue(f"Fila {row}: valor no finito", row=row, column=2)
    return values


def load_series_csv(path, timezone: str = "UTC") -> RegularSeries:
    """Carga un CSV de log-precios sobre ticks consecutivos."""
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"No existe el fichero {path}", path=str(path))
    try:
        frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise ParseError(f"{path} está vacío", path=str(path)) from None
    except pd.errors.ParserError as exc:
        raise ParseError(f"{path}: CSV mal formado ({exc})", path=str(path)) from None
    if frame.shape[1] != 2:
        raise ParseError(f"{path}: se esperaban 2 columnas, hay {frame.shape[1]}", path=str(path))

    first_row = 1
    if _looks_like_header(str(frame.iat[0, 0]), str(frame.iat[0, 1])):
        frame = frame.iloc[1:]
        first_row = 2
    if frame.empty:
        raise ParseError(f"{path} no contiene filas de datos", path=str(path))

    ticks = _parse_ticks(frame.iloc[:, 0], first_row, timezone)
    values = _parse_values(frame.iloc[:, 1], first_row)

    steps = np.diff(ticks)
    backwards = np.flatnonzero(steps <= 0)
    if backwards.size:
        i = int(backwards[0]) + 1
        raise NonMonotonicTime(
            f"Fila {first_row + i}: tick {ticks[i]} no posterior a {ticks[i - 1]}",
            row=first_row + i,
            tick=int(ticks[i]),
        )
    gaps = np.flatnonzero(steps > 1)
    if gaps.size:
        i = int(gaps[0])
        missing = int(ticks[i]) + 1
        raise GapDetected(f"Falta el tick {missing}", tick=missing, row=first_row + i + 1)

    series = RegularSeries(int(ticks[0]), values, SeriesKind.LOG_PRICE)
    get_logger().info(
        "Serie cargada de %s: %s filas, ticks [%s, %s]",
        path,
        len(series),
        series.start_index,
        series.end_index,
    )
    return series


def save_series_csv(series: RegularSeries, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({
        SERIES_COLUMNS[0]: np.arange(series.start_index, series.end_index + 1, dtype=np.int64),
        SERIES_COLUMNS[1]: series.values,
    })
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_curve(path, columns: Mapping[str, Iterable]) -> Path:
    """Columnas (x, y, ...) para cualquier herramienta de gráficos."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({name: list(values) for name, values in columns.items()}).to_csv(
        path,
        index=False,
        float_format=FLOAT_FORMAT,
        lineterminator="\n",
    )
    return path


def write_table(path, rows: Iterable[tuple[str, float, float, float]]) -> Path:
    """Tabla de ensemble: una fila por proceso con columnas name, mean, stdDev, p-value."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(TABLE_COLUMNS))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"No serializable: {type(value).__name__}")


def _finite_or_none(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite_or_none(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_or_none(v) for v in value]
    return value


def write_summary_json(path, payload: Mapping) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_finite_or_none(dict(payload)), sort_keys=True, indent=2, default=_json_default)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def load_ensemble_samples(path) -> dict[str, dict[str, np.ndarray]]:
    """Muestras por proceso y estadístico de un `summary.json` de `ensemble`."""
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"No existe el fichero {path}", path=str(path))
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        ensembles = {
            row["process"]: {
                stat: np.asarray(summary["samples"], dtype=np.float64)
                for stat, summary in row["statistics"].items()
            }
            for row in payload["ensembles"]
        }
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"{path}: no es un resumen de ensemble ({exc})", path=str(path)) from None
    if not ensembles:
        raise ParseError(f"{path} no contiene ensembles", path=str(path))
    return ensembles
