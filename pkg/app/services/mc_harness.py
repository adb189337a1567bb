"""
Protocolo Monte Carlo: N trayectorias independientes, estadísticos por trayectoria,
distribuciones empíricas y p-valores (fracción de muestras <= 0).

- La semilla de cada run se deriva de (semilla maestra, índice); nunca se reutiliza
  un mismo flujo entre runs, así el resultado no depende del reparto entre workers.
- Las muestras se guardan por índice de run y sólo después se agregan.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace

import numpy as np

from app.errors import (
    EmptySample,
    EnsembleRunError,
    InvalidParameter,
    SeriesTooShort,
    StatisticError,
    TriError,
)
from app.services.process_zoo import ProcessSpec, SimConfig, simulate, spec_to_dict
from app.services.series_core import RegularSeries, VolSpec
from app.services.tri_statistics import (
    DEFAULT_GRAIN_GRID,
    DEFAULT_GRAIN_HORIZON,
    DEFAULT_NODE_COUNT,
    DEFAULT_PDF_BOUND,
    DEFAULT_SIGMA_GRID,
    MIN_SAMPLES_PER_NODE,
    HorizonGrid,
    graining_corr_surface,
    hist_real_corr_surface,
    integrated_corr_asymmetry,
    integrated_graining_asymmetry,
    pdf_asymmetry,
    return_density_asymmetry,
)
from app.utils import TICKS_PER_DAY, TICKS_PER_HOUR, get_logger

STATISTIC_IDS = ("A_p", "A_sigma_tot", "A_sigma_cut", "A_gr_cut", "return_asym")
DEFAULT_RUNS = 200


@dataclass(frozen=True)
class StatRequest:
    statistics: tuple[str, ...] = STATISTIC_IDS
    a_p_horizon: int = TICKS_PER_DAY
    a_p_granularity: int = TICKS_PER_HOUR
    node_count: int = DEFAULT_NODE_COUNT
    pdf_bound: float = DEFAULT_PDF_BOUND
    sigma_grid: HorizonGrid = DEFAULT_SIGMA_GRID
    grain_horizon: int = DEFAULT_GRAIN_HORIZON
    grain_grid: HorizonGrid = DEFAULT_GRAIN_GRID
    return_dt: int = TICKS_PER_DAY

    def __post_init__(self):
        stats = tuple(dict.fromkeys(self.statistics))
        if not stats:
            raise InvalidParameter("Hay que pedir al menos un estadístico")
        unknown = [s for s in stats if s not in STATISTIC_IDS]
        if unknown:
            raise InvalidParameter(
                f"Estadísticos desconocidos: {', '.join(unknown)}. Disponibles: {', '.join(STATISTIC_IDS)}",
            )
        object.__setattr__(self, "statistics", tuple(s for s in STATISTIC_IDS if s in stats))
        if self.pdf_bound <= 0:
            raise InvalidParameter("pdf_bound debe ser > 0", pdf_bound=self.pdf_bound)
        if self.return_dt < 1:
            raise InvalidParameter("return_dt debe ser >= 1", return_dt=self.return_dt)
        # Valida horizonte/granularidad de A_p al construir.
        self.a_p_spec

    @property
    def a_p_spec(self) -> VolSpec:
        return VolSpec(self.a_p_horizon, self.a_p_granularity)

    def required_ticks(self) -> int:
        """Longitud mínima de serie con la que todos los estadísticos pedidos son calculables."""
        needs = []
        min_samples = self.node_count * MIN_SAMPLES_PER_NODE
        if "A_p" in self.statistics:
            needs.append(2 * self.a_p_horizon + min_samples)
        if {"A_sigma_tot", "A_sigma_cut"} & set(self.statistics):
            needs.append(2 * self.sigma_grid.horizons[-1] + 2)
        if "A_gr_cut" in self.statistics:
            needs.append(2 * self.grain_horizon + 2)
        if "return_asym" in self.statistics:
            needs.append(self.return_dt + min_samples)
        return max(needs)

    def to_dict(self) -> dict:
        return {
            "statistics": list(self.statistics),
            "a_p_horizon": self.a_p_horizon,
            "a_p_granularity": self.a_p_granularity,
            "node_count": self.node_count,
            "pdf_bound": self.pdf_bound,
            "sigma_grid": list(self.sigma_grid.horizons),
            "grain_horizon": self.grain_horizon,
            "grain_grid": list(self.grain_grid.horizons),
            "return_dt": self.return_dt,
        }


def evaluate_statistics(prices: RegularSeries, req: StatRequest) -> dict[str, float]:
    """Calcula cada estadístico pedido; los fallos se etiquetan con el nombre del estadístico."""
    values: dict[str, float] = {}
    sigma_surface = None
    for stat in req.statistics:
        try:
            if stat == "A_p":
                values[stat] = pdf_asymmetry(prices, req.a_p_spec, req.node_count, req.pdf_bound)
            elif stat in ("A_sigma_tot", "A_sigma_cut"):
                if sigma_surface is None:
                    sigma_surface = hist_real_corr_surface(prices, req.sigma_grid)
                mode = "tot" if stat == "A_sigma_tot" else "cut"
                values[stat] = integrated_corr_asymmetry(sigma_surface, mode)
            elif stat == "A_gr_cut":
                surface = graining_corr_surface(prices, req.grain_horizon, req.grain_grid)
                values[stat] = integrated_graining_asymmetry(surface, "cut")
            elif stat == "return_asym":
                values[stat] = return_density_asymmetry(prices, req.return_dt, req.node_count)
        except TriError as exc:
            raise StatisticError(stat, exc) from exc
    return values


# ---------------------------------------------------------------------------
# Resúmenes
# ---------------------------------------------------------------------------

def _as_samples(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptySample("Muestra vacía")
    return arr


def p_value(samples) -> float:
    """Fracción de muestras <= 0 (los ceros exactos cuentan)."""
    arr = _as_samples(samples)
    return float(np.count_nonzero(arr <= 0.0)) / arr.size


def empirical_percentile(observed: float, null_samples) -> float:
    """Fracción de la muestra nula estrictamente por debajo del valor observado."""
    arr = _as_samples(null_samples)
    return float(np.count_nonzero(arr < observed)) / arr.size


def sample_histogram(samples, bins: int = 20) -> tuple[np.ndarray, np.ndarray]:
    arr = _as_samples(samples)
    if bins < 1:
        raise InvalidParameter("bins debe ser >= 1", bins=bins)
    counts, edges = np.histogram(arr, bins=bins)
    return edges, counts


@dataclass(frozen=True, eq=False)
class StatSummary:
    statistic: str
    samples: np.ndarray = field(repr=False)
    mean: float
    std_dev: float
    p_value: float

    @classmethod
    def from_samples(cls, statistic: str, samples) -> "StatSummary":
        arr = _as_samples(samples)
        std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
        return cls(statistic, arr, float(np.mean(arr)), std, p_value(arr))

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_dev": self.std_dev,
            "p_value": self.p_value,
            "samples": [float(v) for v in self.samples],
        }


@dataclass(frozen=True, eq=False)
class EnsembleSummary:
    process: str
    label: str
    spec: dict
    run_count: int
    master_seed: int
    n_ticks: int
    burn_in: int
    request: dict
    statistics: dict[str, StatSummary]

    def to_dict(self) -> dict:
        return {
            "process": self.process,
            "label": self.label,
            "spec": self.spec,
            "run_count": self.run_count,
            "master_seed": self.master_seed,
            "n_ticks": self.n_ticks,
            "burn_in": self.burn_in,
            "request": self.request,
            "statistics": {k: v.to_dict() for k, v in self.statistics.items()},
        }


# ---------------------------------------------------------------------------
# Ejecución
# ---------------------------------------------------------------------------

def sub_seed(master_seed: int, run_index: int) -> int:
    """Semilla del run: hash fijo de (semilla maestra, índice)."""
    state = np.random.SeedSequence([int(master_seed), int(run_index)]).generate_state(1, np.uint64)
    return int(state[0])


def _run_one(spec: ProcessSpec, cfg: SimConfig, req: StatRequest, run_index: int, seed: int):
    prices = simulate(spec, replace(cfg, seed=seed))
    return run_index, evaluate_statistics(prices, req)


def _wrap(run_index: int, exc: TriError) -> EnsembleRunError:
    statistic = exc.statistic if isinstance(exc, StatisticError) else None
    cause = exc.cause if isinstance(exc, StatisticError) else exc
    return EnsembleRunError(run_index, cause, statistic)


def run_ensemble(
    spec: ProcessSpec,
    cfg: SimConfig,
    req: StatRequest,
    n_runs: int = DEFAULT_RUNS,
    *,
    workers: int = 1,
    process_name: str | None = None,
    fixed_run_seed: int | None = None,
) -> EnsembleSummary:
    """Genera `n_runs` trayectorias y resume cada estadístico pedido.

    `fixed_run_seed` fuerza la misma semilla en todos los runs (sólo para pruebas).
    """
    if n_runs < 2:
        raise InvalidParameter("Un ensemble necesita al menos 2 runs", n_runs=n_runs)
    needed = req.required_ticks()
    if cfg.n_ticks < needed:
        raise SeriesTooShort(
            f"n_ticks={cfg.n_ticks} insuficiente: los estadísticos pedidos necesitan {needed}",
            n_ticks=cfg.n_ticks,
            needed=needed,
        )

    logger = get_logger()
    name = process_name or spec.kind
    seeds = [fixed_run_seed if fixed_run_seed is not None else sub_seed(cfg.seed, i) for i in range(n_runs)]
    results: list[dict[str, float] | None] = [None] * n_runs
    logger.info("Ensemble %s: %s runs x %s ticks, %s workers", name, n_runs, cfg.n_ticks, workers)

    if workers <= 1:
        for i, seed in enumerate(seeds):
            try:
                _idx, values = _run_one(spec, cfg, req, i, seed)
            except TriError as exc:
                raise _wrap(i, exc) from exc
            results[i] = values
            logger.info("Run %s/%s de %s completado (%s)", i + 1, n_runs, name, ", ".join(values))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_run_one, spec, cfg, req, i, seed): i for i, seed in enumerate(seeds)}
            done = 0
            for future in as_completed(futures):
                i = futures[future]
                try:
                    _idx, values = future.result()
                except TriError as exc:
                    for pending in futures:
                        pending.cancel()
                    raise _wrap(i, exc) from exc
                results[i] = values
                done += 1
                logger.info("Run %s (%s/%s) de %s completado (%s)", i, done, n_runs, name, ", ".join(values))

    stats = {
        stat: StatSummary.from_samples(stat, [run[stat] for run in results])
        for stat in req.statistics
    }
    return EnsembleSummary(
        process=name,
        label=spec.label,
        spec=spec_to_dict(spec),
        run_count=n_runs,
        master_seed=cfg.seed,
        n_ticks=cfg.n_ticks,
        burn_in=cfg.resolved_burn_in(spec),
        request=req.to_dict(),
        statistics=stats,
    )


def run_ensembles(
    specs: dict[str, ProcessSpec],
    cfg: SimConfig,
    req: StatRequest,
    n_runs: int = DEFAULT_RUNS,
    *,
    workers: int = 1,
) -> list[EnsembleSummary]:
    """Una fila de tabla por proceso, en el orden recibido."""
    return [
        run_ensemble(spec, cfg, req, n_runs, workers=workers, process_name=name)
        for name, spec in specs.items()
    ]
