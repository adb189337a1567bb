"""Carga y utilidades de configuración del proyecto.

Los valores de proceso (workers, semilla maestra, formato de salida, logs) se leen
del entorno; un `.env` en la raíz del proyecto se carga siempre con override para
que los cambios locales tengan efecto aunque existan variables ya exportadas.
"""

import logging
import os
from logging.handlers import RotatingFileHandler
from pathlib import Path

from dotenv import load_dotenv

ROOT_PATH = Path(__file__).resolve().parent
load_dotenv(ROOT_PATH / ".env", override=True)

VERSION = "1.0.0"


def get_int_env(key: str, default: int) -> int:
    """Obtiene una variable de entorno como entero, manejando valores vacíos o inválidos."""
    val = os.getenv(key)
    if not val:
        return default
    try:
        return int(val)
    except ValueError:
        return default


def default_worker_count() -> int:
    """Workers por defecto: todos los núcleos menos uno (mínimo 1), salvo TRI_WORKERS."""
    fallback = max(1, (os.cpu_count() or 2) - 1)
    return max(1, get_int_env("TRI_WORKERS", fallback))


def _resolve_log_level(raw: str | None) -> str:
    log_level = (raw or "").strip().upper()
    if not log_level or log_level not in logging._nameToLevel:
        return "INFO"
    return log_level


class BaseConfig:
    TRI_WORKERS = default_worker_count()
    TRI_MASTER_SEED = get_int_env("TRI_MASTER_SEED", 20070101)
    TRI_OUTPUT_FORMAT = (os.getenv("TRI_OUTPUT_FORMAT") or "csv").strip().lower()
    TRI_INPUT_TIMEZONE = os.getenv("TRI_INPUT_TIMEZONE") or "UTC"
    # Escala de escritorio por defecto para `ensemble` sin fichero de configuración.
    TRI_DEFAULT_RUNS = get_int_env("TRI_DEFAULT_RUNS", 200)
    TRI_DEFAULT_TICKS = get_int_env("TRI_DEFAULT_TICKS", 2_018_400)

    LOG_FILE = os.getenv("LOG_FILE", str(ROOT_PATH / "logs" / "tri.log"))
    LOG_LEVEL = os.getenv("LOG_LEVEL") or "INFO"

    @staticmethod
    def init_app(app):
        log_level = _resolve_log_level(app.config.get("LOG_LEVEL"))
        app.logger.setLevel(log_level)

        log_file = app.config.get("LOG_FILE")
        if not log_file:
            return
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handler = RotatingFileHandler(
            log_path,
            maxBytes=10 * 1024 * 1024,
            backupCount=5,
        )
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s [%(name)s] %(message)s"))
        handler.setLevel(log_level)
        app.logger.addHandler(handler)


class DevelopmentConfig(BaseConfig):
    DEBUG = True


class ProductionConfig(BaseConfig):
    DEBUG = False


class TestingConfig(BaseConfig):
    TESTING = True
    LOG_FILE = ""
    TRI_WORKERS = 1
    TRI_OUTPUT_FORMAT = "csv"


config_by_name = {
    "development": DevelopmentConfig,
    "production": ProductionConfig,
    "testing": TestingConfig,
}
