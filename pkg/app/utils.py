import logging

from flask import current_app, has_app_context

# Rejilla base: 1 tick = 3 minutos de tiempo de negocio.
MINUTES_PER_TICK = 3

_FALLBACK_LOGGER = logging.getLogger("tri")


def ticks(*, minutes: int = 0, hours: int = 0, days: int = 0) -> int:
    total_minutes = minutes + 60 * hours + 24 * 60 * days
    if total_minutes % MINUTES_PER_TICK:
        raise ValueError(f"{total_minutes} minutos no es múltiplo de {MINUTES_PER_TICK}")
    return total_minutes // MINUTES_PER_TICK


TICKS_PER_HOUR = ticks(hours=1)
TICKS_PER_DAY = ticks(days=1)
# Año de 365 días: el tiempo de negocio desestacionalizado no tiene huecos de fin de semana.
TICKS_PER_YEAR = ticks(days=365)


def get_logger() -> logging.Logger:
    """Logger de la aplicación si hay contexto Flask; si no, el logger del paquete."""
    if has_app_context():
        return current_app.logger
    return _FALLBACK_LOGGER


def ticks_to_label(count: int) -> str:
    """Etiqueta legible de una duración: 512 ticks -> '1d1h36', 8 ticks -> '24min'."""
    minutes = int(count) * MINUTES_PER_TICK
    days, rest = divmod(minutes, 24 * 60)
    hours, mins = divmod(rest, 60)
    if not days and not hours:
        return f"{mins}min"
    label = f"{days}d" if days else ""
    if hours or mins:
        label += f"{hours}h"
        if mins:
            label += f"{mins:02d}"
    return label


def parse_float_list(value: str | None) -> list[float]:
    raw = (value or "").strip()
    if not raw:
        return []
    return [float(part) for part in raw.split(",") if part.strip()]


def parse_int_list(value: str | None) -> list[int]:
    raw = (value or "").strip()
    if not raw:
        return []
    return [int(part) for part in raw.split(",") if part.strip()]


def parse_matrix(value: str | None) -> list[list[float]]:
    """Filas separadas por ';' y columnas por ','."""
    raw = (value or "").strip()
    if not raw:
        return []
    return [parse_float_list(row) for row in raw.split(";") if row.strip()]
