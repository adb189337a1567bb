"""
Series regulares sobre la rejilla de ticks, retornos y estimadores de volatilidad.

- Un tick son 3 minutos de tiempo de negocio; todas las duraciones son enteros de ticks.
- La volatilidad histórica usa sólo el pasado de t; la realizada sólo el futuro.
- Las muestras no definidas al principio/final simplemente no existen en la salida
  (se desplaza `start_index`), nunca se rellenan.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from app.errors import InvalidDuration, LengthMismatch, SeriesTooShort, ZeroVariance
from app.utils import TICKS_PER_YEAR

DEFAULT_VOL_RATIO = 24
FLAT_TOLERANCE = 1e-10


class SeriesKind(str, Enum):
    LOG_PRICE = "log_price"
    RETURN = "return"
    VOLATILITY = "volatility"


@dataclass(frozen=True, eq=False)
class RegularSeries:
    start_index: int
    values: np.ndarray = field(repr=False)
    kind: SeriesKind = SeriesKind.LOG_PRICE

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("Una serie necesita al menos un valor")
        if not np.all(np.isfinite(values)):
            raise ValueError("La serie contiene valores no finitos")
        if self.kind is SeriesKind.VOLATILITY and np.any(values < 0):
            raise ValueError("Una volatilidad no puede ser negativa")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", SeriesKind(self.kind))

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def end_index(self) -> int:
        """Último tick con muestra (inclusive)."""
        return self.start_index + len(self) - 1

    def window(self, first: int, last: int) -> np.ndarray:
        """Valores en los ticks [first, last], ambos inclusive."""
        if first < self.start_index or last > self.end_index or last < first:
            raise SeriesTooShort(
                f"Ventana [{first}, {last}] fuera de la serie [{self.start_index}, {self.end_index}]",
                first=first,
                last=last,
            )
        return self.values[first - self.start_index:last - self.start_index + 1]

    def equals(self, other: "RegularSeries") -> bool:
        return (
            self.start_index == other.start_index
            and self.kind is other.kind
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class VolSpec:
    horizon: int
    granularity: int

    def __post_init__(self):
        if self.granularity < 1:
            raise InvalidDuration("La granularidad debe ser al menos 1 tick", granularity=self.granularity)
        if self.granularity > self.horizon:
            raise InvalidDuration(
                f"Granularidad {self.granularity} mayor que el horizonte {self.horizon}",
                horizon=self.horizon,
                granularity=self.granularity,
            )

    @classmethod
    def coupled(cls, horizon: int, ratio: int = DEFAULT_VOL_RATIO) -> "VolSpec":
        """Acoplamiento por defecto δt_r = δt_σ / 24 (mínimo 1 tick)."""
        return cls(horizon=horizon, granularity=max(1, horizon // ratio))

    @property
    def term_count(self) -> int:
        return self.horizon - self.granularity + 1


def _require_kind(series: RegularSeries, kind: SeriesKind) -> None:
    if series.kind is not kind:
        raise ValueError(f"Se esperaba una serie {kind.value}, recibida {series.kind.value}")


def returns(prices: RegularSeries, dt_r: int) -> RegularSeries:
    """r[δt_r](t) = x(t) − x(t − δt_r), definida desde start + δt_r."""
    _require_kind(prices, SeriesKind.LOG_PRICE)
    if dt_r < 1:
        raise InvalidDuration("δt_r debe ser al menos 1 tick", dt_r=dt_r)
    if len(prices) <= dt_r:
        raise SeriesTooShort(
            f"Serie de {len(prices)} ticks demasiado corta para retornos a {dt_r} ticks",
            length=len(prices),
            dt_r=dt_r,
        )
    x = prices.values
    return RegularSeries(prices.start_index + dt_r, x[dt_r:] - x[:-dt_r], SeriesKind.RETURN)


def sliding_sum(values: np.ndarray, n: int) -> np.ndarray:
    """Sumas de todas las ventanas de n muestras consecutivas.

    Cada ventana es el sufijo de un bloque de n muestras más el prefijo del bloque
    siguiente, ambos acumulados dentro de su bloque: el redondeo depende sólo de la
    magnitud de la propia ventana y no de lo que haya antes en la serie.
    """
    v = np.asarray(values, dtype=np.float64)
    count = v.size - n + 1
    if n < 1 or count < 1:
        raise SeriesTooShort(f"{v.size} muestras no llenan una ventana de {n}", length=v.size, window=n)
    blocks = -(-v.size // n)
    padded = np.zeros(blocks * n)
    padded[:v.size] = v
    padded = padded.reshape(blocks, n)
    prefix = np.cumsum(padded, axis=1).ravel()
    suffix = np.cumsum(padded[:, ::-1], axis=1)[:, ::-1].ravel()
    starts = np.arange(count)
    out = suffix[:count].copy()
    straddle = starts % n != 0
    out[straddle] += prefix[starts[straddle] + n - 1]
    return out


def _window_variance(prices: RegularSeries, spec: VolSpec) -> np.ndarray:
    if len(prices) < spec.horizon + 1:
        raise SeriesTooShort(
            f"La serie ({len(prices)} ticks) no cubre el horizonte {spec.horizon} + 1",
            length=len(prices),
            horizon=spec.horizon,
        )
    r = returns(prices, spec.granularity).values
    window_sums = sliding_sum(r * r, spec.term_count)
    return (TICKS_PER_YEAR / spec.granularity) * window_sums / spec.term_count


def historical_vol(prices: RegularSeries, spec: VolSpec) -> RegularSeries:
    """σ_h anualizada; la muestra en t usa los retornos de (t − δt_σ, t]."""
    _require_kind(prices, SeriesKind.LOG_PRICE)
    variance = _window_variance(prices, spec)
    return RegularSeries(prices.start_index + spec.horizon, np.sqrt(variance), SeriesKind.VOLATILITY)


def realized_vol(prices: RegularSeries, spec: VolSpec) -> RegularSeries:
    """σ_r(t) = σ_h(t + δt_σ): mismo vector, desplazado δt_σ ticks hacia atrás."""
    hist = historical_vol(prices, spec)
    return RegularSeries(hist.start_index - spec.horizon, hist.values, SeriesKind.VOLATILITY)


def reverse(series: RegularSeries) -> RegularSeries:
    """x(t_s + ΔT) -> x(t_e − ΔT); se conserva start_index."""
    return RegularSeries(series.start_index, series.values[::-1].copy(), series.kind)


def mirror_tick(series: RegularSeries, tick: int) -> int:
    """Tick imagen bajo inversión temporal: first + last − t."""
    return series.start_index + series.end_index - tick


def _is_flat(centered_ss: float, x: np.ndarray) -> bool:
    # Constante salvo redondeo: desviación típica <= FLAT_TOLERANCE·max|x|.
    scale = float(np.max(np.abs(x)))
    return centered_ss <= (FLAT_TOLERANCE * scale) ** 2 * x.size


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Correlación lineal producto-momento (dos pasadas, centrado explícito)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"Longitudes distintas: {x.size} y {y.size}", left=x.size, right=y.size)
    if x.size < 2:
        raise SeriesTooShort("Se necesitan al menos 2 muestras para una correlación", length=x.size)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if _is_flat(sxx, x) or _is_flat(syy, y):
        raise ZeroVariance("Correlación indefinida: una de las muestras es constante")
    rho = float(np.dot(dx, dy)) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, rho)))
