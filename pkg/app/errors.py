"""Errores del dominio.

Cada error lleva un `code` estable (el nombre de la clase) y se serializa con
`to_dict()` para los informes de error de los comandos.
"""

from __future__ import annotations

from typing import Any


class TriError(Exception):
    """Base de todos los errores de análisis y simulación."""

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = {k: v for k, v in context.items() if v is not None}

    @property
    def code(self) -> str:
        return type(self).__name__

    def chain(self) -> list[str]:
        """Nombres de la jerarquía, del más específico a TriError (exclusive)."""
        names = []
        for klass in type(self).__mro__:
            if klass is TriError:
                break
            names.append(klass.__name__)
        return names

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "error": self.code,
            "error_chain": self.chain(),
            "message": self.message,
        }
        if self.context:
            payload["context"] = {k: _jsonable(v) for k, v in self.context.items()}
        return payload

    def __reduce__(self):
        # Los errores viajan entre procesos del pool con su contexto intacto.
        return (_restore_error, (type(self), self.args, self.__dict__))


def _restore_error(cls, args, state):
    err = Exception.__new__(cls)
    err.args = args
    err.__dict__.update(state)
    return err


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, TriError):
        return value.to_dict()
    return str(value)


# --- series_core ---

class SeriesTooShort(TriError):
    pass


class InvalidDuration(TriError):
    pass


class ZeroVariance(TriError):
    pass


class LengthMismatch(TriError):
    pass


# --- tri_statistics ---

class TooFewSamples(TriError):
    pass


class DegenerateSamples(ZeroVariance):
    """Todas las muestras son iguales: no hay escala para la rejilla."""


class NoNodesInRange(TriError):
    pass


class IncompleteSurface(TriError):
    pass


# --- process_zoo / mc_harness ---

class InvalidParameter(TriError):
    pass


class EmptySample(TriError):
    pass


class EnsembleRunError(TriError):
    def __init__(self, run_index: int, cause: TriError, statistic: str | None = None):
        super().__init__(
            f"Run {run_index} falló ({statistic or 'simulación'}): {cause.message}",
            run_index=run_index,
            statistic=statistic,
            cause=cause,
        )
        self.run_index = run_index
        self.statistic = statistic
        self.cause = cause

    def chain(self) -> list[str]:
        return super().chain() + self.cause.chain()


class StatisticError(TriError):
    def __init__(self, statistic: str, cause: TriError):
        super().__init__(f"{statistic}: {cause.message}", statistic=statistic, cause=cause)
        self.statistic = statistic
        self.cause = cause

    def chain(self) -> list[str]:
        return super().chain() + self.cause.chain()


# --- cli_io ---

class GapDetected(TriError):
    pass


class NonMonotonicTime(TriError):
    pass


class ParseError(TriError):
    pass


class NonFiniteValue(TriError):
    pass


class ConfigError(TriError):
    pass
