"""
Estadísticos de asimetría bajo inversión temporal.

Tres familias, todas pares en los retornos y construidas para anularse en una serie
invariante bajo t -> -t:

1. Densidad del incremento de volatilidad Δσ = σ_r − σ_h y su asimetría
   a_p(Δσ) = p(Δσ) − p(−Δσ), integrada en A_p por el lado de las bajadas.
2. Superficie de correlación histórica/realizada ρ_σ(δt_σ, δt_σ') y su
   antisimetrización a_σ, integrada en A_σ,tot y A_σ,cut.
3. Superficie de granularidad ρ_gr(δt_r, δt_r') a horizonte fijo, a_gr y A_gr,cut.

Más la asimetría de la densidad de retornos (impar en los retornos).

Las integrales se discretizan como medias uniformes sobre los nodos/celdas; las
ventanas de correlación son las máximas de cada par, lo que mantiene exacta la
conjugación por inversión (la superficie de la serie invertida es la traspuesta).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import trapezoid

from app.errors import (
    DegenerateSamples,
    IncompleteSurface,
    InvalidDuration,
    InvalidParameter,
    NoNodesInRange,
    SeriesTooShort,
    TooFewSamples,
    ZeroVariance,
)
from app.services.series_core import (
    RegularSeries,
    VolSpec,
    historical_vol,
    pearson,
    realized_vol,
    returns,
)
from app.utils import TICKS_PER_DAY

DEFAULT_NODE_COUNT = 41
DEFAULT_PDF_BOUND = 0.06
MIN_SAMPLES_PER_NODE = 10
RETURN_BOUND_QUANTILE = 0.95


# ---------------------------------------------------------------------------
# Densidad sobre rejilla simétrica no uniforme
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Density:
    grid: np.ndarray
    node_density: np.ndarray
    sample_count: int

    @property
    def center(self) -> int:
        return self.grid.size // 2

    def integral(self) -> float:
        return float(trapezoid(self.node_density, self.grid))


@dataclass(frozen=True, eq=False)
class AsymmetryCurve:
    positive_nodes: np.ndarray
    values: np.ndarray


def _half_grid(abs_samples: np.ndarray, node_count: int) -> np.ndarray:
    """Nodos positivos en los cuantiles centrales (k − ½)/m de |x|, k = 1..m.

    El último nodo queda por debajo del máximo: la cola que lo rebasa se acumula
    en él en vez de fijar la rejilla en un único valor extremo.
    """
    half = (node_count - 1) // 2
    levels = (np.arange(1, half + 1) - 0.5) / half
    nodes = np.unique(np.quantile(abs_samples, levels))
    return nodes[nodes > 0.0]


def estimate_density(samples, node_count: int = DEFAULT_NODE_COUNT) -> Density:
    """
    Densidad por binning lineal sobre una rejilla espejo de cuantiles de |x|.

    Cada muestra reparte su peso entre los dos nodos que la rodean. El binning se
    hace sobre |x| en la media rejilla positiva y el signo sólo elige el lado, así
    que negar las muestras refleja la densidad bit a bit.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if node_count < 3 or node_count % 2 == 0:
        raise InvalidParameter("node_count debe ser impar y >= 3", node_count=node_count)
    if x.size < node_count * MIN_SAMPLES_PER_NODE:
        raise TooFewSamples(
            f"{x.size} muestras; se necesitan al menos {node_count * MIN_SAMPLES_PER_NODE}",
            samples=x.size,
            node_count=node_count,
        )
    if np.ptp(x) == 0.0:
        raise DegenerateSamples("Todas las muestras son iguales", value=float(x[0]))

    magnitude = np.abs(x)
    positive = _half_grid(magnitude, node_count)
    if positive.size == 0:
        raise DegenerateSamples("No hay muestras con |x| > 0")
    half = np.concatenate(([0.0], positive))
    m = positive.size

    clamped = np.minimum(magnitude, half[-1])
    idx = np.searchsorted(half, clamped, side="right") - 1
    idx = np.clip(idx, 0, m - 1)
    frac = (clamped - half[idx]) / (half[idx + 1] - half[idx])
    frac = np.clip(frac, 0.0, 1.0)

    # Nodo k de la media rejilla -> m + k (positivo) o m − k (negativo).
    sign = np.where(x < 0.0, -1, 1)
    lower = m + sign * idx
    upper = m + sign * (idx + 1)
    size = 2 * m + 1
    weight = np.bincount(lower, weights=1.0 - frac, minlength=size)
    weight += np.bincount(upper, weights=frac, minlength=size)

    grid = np.concatenate((-positive[::-1], half))
    widths = np.empty(size)
    widths[1:-1] = (grid[2:] - grid[:-2]) / 2.0
    widths[0] = (grid[1] - grid[0]) / 2.0
    widths[-1] = (grid[-1] - grid[-2]) / 2.0
    density = weight / (x.size * widths)
    return Density(grid=grid, node_density=density, sample_count=int(x.size))


def density_asymmetry(density: Density) -> AsymmetryCurve:
    """a(g) = p(g) − p(−g) en los nodos positivos (la rejilla es espejo exacto)."""
    c = density.center
    p = density.node_density
    return AsymmetryCurve(
        positive_nodes=density.grid[c + 1:].copy(),
        values=p[c + 1:] - p[c - 1::-1],
    )


def _positive_side_mean(curve: AsymmetryCurve, bound: float) -> float:
    mask = (curve.positive_nodes > 0.0) & (curve.positive_nodes < bound)
    if not np.any(mask):
        raise NoNodesInRange(f"Ningún nodo de la rejilla en (0, {bound})", bound=bound)
    return float(np.mean(curve.values[mask]))


def integrated_pdf_asymmetry(curve: AsymmetryCurve, bound: float = DEFAULT_PDF_BOUND) -> float:
    """
    A_p: media de a_p sobre los nodos espejo en (−bound, 0).

    a_p es impar (a_p(−g) = −a_p(g)), así que A_p es la media de p(−g) − p(g) en
    (0, bound): positiva cuando dominan las bajadas pequeñas de volatilidad, la
    relajación lenta que sigue a una subida brusca.
    """
    return -_positive_side_mean(curve, bound)


def vol_increments(prices: RegularSeries, spec: VolSpec) -> np.ndarray:
    """Δσ(t) = σ_r(t) − σ_h(t) en los ticks donde ambas existen."""
    if len(prices) < 2 * spec.horizon + 1:
        raise SeriesTooShort(
            f"Se necesitan {2 * spec.horizon + 1} ticks para Δσ a horizonte {spec.horizon}",
            length=len(prices),
            horizon=spec.horizon,
        )
    hist = historical_vol(prices, spec)
    real = realized_vol(prices, spec)
    first = hist.start_index
    last = real.end_index
    return real.window(first, last) - hist.window(first, last)


def pdf_asymmetry_curve(
    prices: RegularSeries,
    spec: VolSpec,
    node_count: int = DEFAULT_NODE_COUNT,
) -> tuple[Density, AsymmetryCurve]:
    density = estimate_density(vol_increments(prices, spec), node_count)
    return density, density_asymmetry(density)


def pdf_asymmetry(
    prices: RegularSeries,
    spec: VolSpec,
    node_count: int = DEFAULT_NODE_COUNT,
    bound: float = DEFAULT_PDF_BOUND,
) -> float:
    _density, curve = pdf_asymmetry_curve(prices, spec, node_count)
    return integrated_pdf_asymmetry(curve, bound)


# ---------------------------------------------------------------------------
# Superficies de correlación
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HorizonGrid:
    horizons: tuple[int, ...]

    def __post_init__(self):
        hs = tuple(int(h) for h in self.horizons)
        if len(hs) < 2:
            raise InvalidParameter("Una rejilla de horizontes necesita al menos 2 puntos")
        if any(h < 1 for h in hs) or any(b <= a for a, b in zip(hs, hs[1:])):
            raise InvalidParameter("Los horizontes deben ser positivos y estrictamente crecientes", horizons=str(hs))
        object.__setattr__(self, "horizons", hs)

    @classmethod
    def geometric(cls, base: int = 24, ratio: int = 2, count: int = 11) -> "HorizonGrid":
        return cls(tuple(base * ratio ** k for k in range(count)))

    @classmethod
    def powers_of_two(cls, count: int = 9) -> "HorizonGrid":
        return cls.geometric(base=1, ratio=2, count=count)

    def __len__(self) -> int:
        return len(self.horizons)

    def mirror(self, k: int) -> int:
        return len(self.horizons) - 1 - k

    def cut_pairs(self) -> list[tuple[int, int]]:
        """Pares (k, K−1−k) con el horizonte de la fila mayor que el de la columna."""
        return [
            (k, self.mirror(k))
            for k in range(len(self.horizons))
            if self.horizons[k] > self.horizons[self.mirror(k)]
        ]


DEFAULT_SIGMA_GRID = HorizonGrid.geometric(base=24, ratio=2, count=11)
DEFAULT_GRAIN_HORIZON = 512
DEFAULT_GRAIN_GRID = HorizonGrid.powers_of_two(9)


class SurfaceKind(str, Enum):
    HIST_REAL = "hist_real"
    GRAINING = "graining"


@dataclass(frozen=True, eq=False)
class CorrelationSurface:
    grid: HorizonGrid
    rho: np.ndarray
    asym: np.ndarray = field(init=False)
    kind: SurfaceKind = SurfaceKind.HIST_REAL
    horizon: int | None = None

    def __post_init__(self):
        rho = np.array(self.rho, dtype=np.float64)
        rho.setflags(write=False)
        # a − b = −(b − a) exactamente en IEEE: la antisimetría no depende del redondeo.
        asym = rho - rho.T
        asym.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "asym", asym)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.rho)

    def cut_curve(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Corte espejo: (horizonte de la columna, horizonte de la fila, a[k][K−1−k])."""
        hs = np.asarray(self.grid.horizons)
        rows = np.arange(len(hs))
        cols = rows[::-1]
        return hs[cols], hs[rows], self.asym[rows, cols]


def _pair_rho(hist: RegularSeries, real: RegularSeries) -> float:
    first = max(hist.start_index, real.start_index)
    last = min(hist.end_index, real.end_index)
    if last - first + 1 < 2:
        raise SeriesTooShort("Ventana común insuficiente para el par", first=first, last=last)
    try:
        return pearson(hist.window(first, last), real.window(first, last))
    except ZeroVariance:
        return float("nan")


def _require_length(prices: RegularSeries, needed: int) -> None:
    if len(prices) < needed:
        raise SeriesTooShort(
            f"La serie ({len(prices)} ticks) necesita al menos {needed} ticks para la superficie",
            length=len(prices),
            needed=needed,
        )


def hist_real_corr_surface(
    prices: RegularSeries,
    grid: HorizonGrid = DEFAULT_SIGMA_GRID,
) -> CorrelationSurface:
    """ρ[i][j] = ρ(σ_h[h_i, h_i/24], σ_r[h_j, h_j/24]) sobre la ventana máxima del par."""
    hs = grid.horizons
    if hs[0] < 24:
        raise InvalidDuration("Todo horizonte de ρ_σ debe ser >= 24 ticks", horizon=hs[0])
    _require_length(prices, 2 * hs[-1] + 2)
    specs = [VolSpec.coupled(h) for h in hs]
    hist = [historical_vol(prices, s) for s in specs]
    real = [realized_vol(prices, s) for s in specs]
    size = len(hs)
    rho = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            rho[i, j] = _pair_rho(hist[i], real[j])
    return CorrelationSurface(grid=grid, rho=rho, kind=SurfaceKind.HIST_REAL)


def graining_corr_surface(
    prices: RegularSeries,
    horizon: int = DEFAULT_GRAIN_HORIZON,
    grain_grid: HorizonGrid = DEFAULT_GRAIN_GRID,
) -> CorrelationSurface:
    """ρ[i][j] = ρ(σ_h[δt_σ, g_i], σ_r[δt_σ, g_j]) a horizonte fijo δt_σ."""
    grains = grain_grid.horizons
    if grains[-1] > horizon:
        raise InvalidDuration(
            f"Granularidad {grains[-1]} mayor que el horizonte {horizon}",
            horizon=horizon,
            granularity=grains[-1],
        )
    _require_length(prices, 2 * horizon + 2)
    specs = [VolSpec(horizon=horizon, granularity=g) for g in grains]
    hist = [historical_vol(prices, s) for s in specs]
    real = [realized_vol(prices, s) for s in specs]
    size = len(grains)
    rho = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            rho[i, j] = _pair_rho(hist[i], real[j])
    return CorrelationSurface(grid=grain_grid, rho=rho, kind=SurfaceKind.GRAINING, horizon=horizon)


def _region_mean(surface: CorrelationSurface, rows: np.ndarray, cols: np.ndarray) -> float:
    values = surface.asym[rows, cols]
    if values.size == 0:
        raise IncompleteSurface("Región de integración vacía")
    if np.any(np.isnan(values)):
        missing = int(np.isnan(values).sum())
        raise IncompleteSurface(
            f"{missing} celdas sin correlación (varianza nula) en la región integrada",
            missing=missing,
        )
    return float(np.mean(values))


def _tot_region(size: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(size, k=1)


def _cut_region(grid: HorizonGrid) -> tuple[np.ndarray, np.ndarray]:
    pairs = grid.cut_pairs()
    rows = np.array([k for k, _ in pairs], dtype=int)
    cols = np.array([m for _, m in pairs], dtype=int)
    return rows, cols


def integrated_corr_asymmetry(surface: CorrelationSurface, mode: str = "cut") -> float:
    """A_σ,tot (media de a_σ en i<j) o A_σ,cut (media a lo largo del corte espejo)."""
    if mode == "tot":
        rows, cols = _tot_region(len(surface.grid))
    elif mode == "cut":
        rows, cols = _cut_region(surface.grid)
    else:
        raise InvalidParameter(f"Modo de integración desconocido: {mode}", mode=mode)
    return _region_mean(surface, rows, cols)


def integrated_graining_asymmetry(surface: CorrelationSurface, mode: str = "cut") -> float:
    """A_gr,cut: media de a_gr[n][K−1−n] con grano histórico mayor que el realizado."""
    if surface.kind is not SurfaceKind.GRAINING:
        raise InvalidParameter("Se esperaba una superficie de granularidad", kind=surface.kind.value)
    return integrated_corr_asymmetry(surface, mode)


# ---------------------------------------------------------------------------
# Asimetría de la densidad de retornos
# ---------------------------------------------------------------------------

def return_density_asymmetry(
    prices: RegularSeries,
    dt_r: int = TICKS_PER_DAY,
    node_count: int = DEFAULT_NODE_COUNT,
) -> float:
    """Media de p(r) − p(−r) sobre nodos positivos bajo el percentil 95 de |r| estandarizado."""
    r = returns(prices, dt_r).values
    if r.size < node_count * MIN_SAMPLES_PER_NODE:
        raise TooFewSamples(
            f"{r.size} retornos a {dt_r} ticks; se necesitan {node_count * MIN_SAMPLES_PER_NODE}",
            samples=r.size,
            dt_r=dt_r,
        )
    scale = float(np.std(r))
    if scale == 0.0:
        raise ZeroVariance("Los retornos tienen varianza nula", dt_r=dt_r)
    standardized = r / scale
    curve = density_asymmetry(estimate_density(standardized, node_count))
    bound = float(np.quantile(np.abs(standardized), RETURN_BOUND_QUANTILE))
    return _positive_side_mean(curve, bound)
