"""
Trabajos de línea de comandos: análisis de una serie empírica, simulación de una
trayectoria y ensembles Monte Carlo.

- Los ficheros de configuración son texto plano `CLAVE=valor` leído con
  `dotenv_values`. Cada clave está declarada en `CONFIG_KEYS`; una clave
  desconocida es un error.
- Prioridad: flag de CLI > fichero de configuración > entorno > valor por defecto.
- Las salidas se escriben en un directorio temporal y sólo se mueven al destino si
  el trabajo termina bien; si falla se deja `error.json` con la cadena de errores.
"""

from __future__ import annotations

import os
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping

from dotenv import dotenv_values

from app.errors import ConfigError, InvalidParameter, StatisticError, TriError
from app.services.mc_harness import (
    DEFAULT_RUNS,
    STATISTIC_IDS,
    StatRequest,
    empirical_percentile,
    evaluate_statistics,
    run_ensembles,
    sample_histogram,
)
from app.services.process_zoo import (
    DEFAULT_N_TICKS,
    PROCESS_NAMES,
    Garch11,
    ProcessSpec,
    SimConfig,
    default_spec,
    simulate,
    spec_to_dict,
)
from app.services.series_core import VolSpec, historical_vol, realized_vol, reverse
from app.services.series_io import (
    load_ensemble_samples,
    load_series_csv,
    save_series_csv,
    write_curve,
    write_summary_json,
    write_table,
)
from app.services.tri_statistics import (
    HorizonGrid,
    graining_corr_surface,
    hist_real_corr_surface,
    integrated_corr_asymmetry,
    integrated_graining_asymmetry,
    integrated_pdf_asymmetry,
    pdf_asymmetry_curve,
    return_density_asymmetry,
)
from app.utils import get_logger, parse_float_list, parse_int_list, parse_matrix, ticks_to_label

COMMANDS = ("analyze", "simulate", "ensemble")
OUTPUT_FORMATS = ("csv", "json")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

DEFAULT_HISTOGRAM_BINS = 20


# ---------------------------------------------------------------------------
# Esquema del fichero de configuración
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfigKey:
    parser: Callable[[str], Any]
    doc: str
    # "job" para ajustes del trabajo; si no, el `kind` de la familia de procesos.
    target: str = "job"
    field: str | None = None


def _names(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(",") if part.strip())


def _floats(value: str) -> tuple[float, ...]:
    return tuple(parse_float_list(value))


def _matrix(value: str) -> tuple[tuple[float, ...], ...]:
    return tuple(tuple(row) for row in parse_matrix(value))


def _choice(options: tuple[str, ...]) -> Callable[[str], str]:
    def parse(value: str) -> str:
        cleaned = value.strip().lower()
        if cleaned not in options:
            raise ValueError(f"'{value}' no es uno de {', '.join(options)}")
        return cleaned
    return parse


CONFIG_KEYS: dict[str, ConfigKey] = {
    # Trabajo
    "PROCESSES": ConfigKey(_names, "Procesos a simular (lista separada por comas o 'all')"),
    "STATISTICS": ConfigKey(_names, f"Estadísticos: {', '.join(STATISTIC_IDS)}"),
    "RUNS": ConfigKey(int, "Número de runs del ensemble"),
    "N_TICKS": ConfigKey(int, "Longitud de cada trayectoria simulada (ticks)"),
    "BURN_IN": ConfigKey(int, "Ticks descartados al inicio (por defecto 4x la memoria del proceso)"),
    "MASTER_SEED": ConfigKey(int, "Semilla maestra"),
    "WORKERS": ConfigKey(int, "Procesos en paralelo para el ensemble"),
    "OUTPUT_FORMAT": ConfigKey(_choice(OUTPUT_FORMATS), "csv (tablas + JSON) o json (sólo JSON)"),
    "INPUT_TIMEZONE": ConfigKey(str, "Zona horaria de las marcas ISO sin zona del CSV"),
    "HISTOGRAM_BINS": ConfigKey(int, "Bins del histograma de A_sigma_cut"),
    "NULL_SUMMARY": ConfigKey(str, "summary.json de un ensemble: analyze sitúa cada estadístico en sus muestras"),
    # Estadísticos
    "A_P_HORIZON": ConfigKey(int, "δt_σ de A_p (ticks)"),
    "A_P_GRANULARITY": ConfigKey(int, "δt_r de A_p (ticks)"),
    "NODE_COUNT": ConfigKey(int, "Nodos de la rejilla de densidad (impar)"),
    "PDF_BOUND": ConfigKey(float, "Cota superior de integración de A_p"),
    "SIGMA_GRID": ConfigKey(lambda v: HorizonGrid(tuple(parse_int_list(v))), "Horizontes de ρ_σ (ticks)"),
    "GRAIN_HORIZON": ConfigKey(int, "δt_σ fijo de la superficie de granularidad"),
    "GRAIN_GRID": ConfigKey(lambda v: HorizonGrid(tuple(parse_int_list(v))), "Granularidades de ρ_gr (ticks)"),
    "RETURN_DT": ConfigKey(int, "Horizonte de los retornos de return_asym (ticks)"),
    # Procesos
    "GRW_SIGMA": ConfigKey(float, "Volatilidad anual del paseo gaussiano", "gaussian_rw", "sigma_annual"),
    "GARCH_OMEGA": ConfigKey(float, "ω por tick", "garch11", "omega"),
    "GARCH_ALPHA": ConfigKey(float, "α", "garch11", "alpha"),
    "GARCH_BETA": ConfigKey(float, "β", "garch11", "beta"),
    "GARCH_TARGET_VOL": ConfigKey(float, "Volatilidad anual estacionaria (fija ω si no se da)", "garch11", "target_vol"),
    "ARCH_COMPONENTS": ConfigKey(int, "Componentes K del ARCH multiescala", "multiscale_arch", "component_count"),
    "ARCH_TAU_1": ConfigKey(float, "τ_1 (ticks)", "multiscale_arch", "tau_1"),
    "ARCH_RATIO": ConfigKey(float, "Razón geométrica de los τ_k", "multiscale_arch", "ratio"),
    "ARCH_COUPLING": ConfigKey(float, "c en δt_r,k = max(1, round(τ_k / c))", "multiscale_arch", "coupling"),
    "ARCH_WEIGHTS": ConfigKey(_floats, "Pesos w_k (por defecto el perfil de la variante)", "multiscale_arch", "weights"),
    "ARCH_WEIGHT_INF": ConfigKey(float, "Peso del término afín", "multiscale_arch", "weight_inf"),
    "ARCH_MEAN_VOL": ConfigKey(float, "Volatilidad anual media", "multiscale_arch", "mean_vol_annual"),
    "SV_MEAN_LOG_VOL": ConfigKey(float, "Nivel medio de ln σ", "exp_ou_sv", "mean_log_vol"),
    "SV_TAUS": ConfigKey(_floats, "Tiempos de reversión (ticks)", "exp_ou_sv", "taus"),
    "SV_AMPLITUDES": ConfigKey(_floats, "Amplitudes del ruido por tick", "exp_ou_sv", "amplitudes"),
    "HESTON_KAPPAS": ConfigKey(_floats, "κ (1/año)", "heston", "kappas"),
    "HESTON_THETAS": ConfigKey(_floats, "θ (varianza anual)", "heston", "thetas"),
    "HESTON_XIS": ConfigKey(_floats, "ξ", "heston", "xis"),
    "REGIME_VOLS": ConfigKey(_floats, "Volatilidad anual por estado", "regime_switching", "state_vols"),
    "REGIME_MATRIX": ConfigKey(_matrix, "Matriz de transición por tick (filas ';')", "regime_switching", "transition_matrix"),
}


def load_job_config(path) -> dict[str, Any]:
    """Lee y valida un fichero `CLAVE=valor`; devuelve los valores ya convertidos."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"No existe el fichero de configuración {path}", path=str(path))
    raw = dotenv_values(path)
    parsed: dict[str, Any] = {}
    for key, value in raw.items():
        spec = CONFIG_KEYS.get(key)
        if spec is None:
            raise ConfigError(f"Clave desconocida en {path.name}: {key}", key=key)
        if value is None or not value.strip():
            raise ConfigError(f"La clave {key} no tiene valor", key=key)
        try:
            parsed[key] = spec.parser(value)
        except (ValueError, TriError) as exc:
            raise ConfigError(f"Valor inválido para {key}: {exc}", key=key, value=value) from exc
    return parsed


# ---------------------------------------------------------------------------
# Configuración resuelta
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalysisConfig:
    command: str
    out: Path
    input_path: Path | None = None
    processes: tuple[str, ...] = ()
    process_overrides: dict[str, dict[str, Any]] = field(default_factory=dict)
    request: StatRequest = field(default_factory=StatRequest)
    n_runs: int = DEFAULT_RUNS
    n_ticks: int = DEFAULT_N_TICKS
    burn_in: int | None = None
    master_seed: int = 0
    workers: int = 1
    output_format: str = "csv"
    timezone: str = "UTC"
    histogram_bins: int = DEFAULT_HISTOGRAM_BINS
    null_summary: Path | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"Comando desconocido: {self.command}")
        if (self.input_path is None) == (not self.processes):
            raise ConfigError("Cada trabajo necesita exactamente una serie de entrada o procesos a simular")
        if self.command == "analyze" and self.input_path is None:
            raise ConfigError("analyze necesita --input")
        if self.command != "analyze" and self.input_path is not None:
            raise ConfigError(f"{self.command} simula procesos; no acepta serie de entrada")
        if self.command == "simulate" and len(self.processes) != 1:
            raise ConfigError("simulate genera un único proceso")
        unknown = [p for p in self.processes if p not in PROCESS_NAMES]
        if unknown:
            raise ConfigError(
                f"Procesos desconocidos: {', '.join(unknown)}. Disponibles: {', '.join(PROCESS_NAMES)}",
            )
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"Formato de salida desconocido: {self.output_format}")
        if self.null_summary is not None and self.command != "analyze":
            raise ConfigError("NULL_SUMMARY sólo se usa con analyze")
        if self.workers < 1:
            raise ConfigError("workers debe ser >= 1", workers=self.workers)

    def spec_for(self, name: str) -> ProcessSpec:
        return build_spec(name, self.process_overrides)

    def sim_config(self) -> SimConfig:
        return SimConfig(n_ticks=self.n_ticks, burn_in=self.burn_in, seed=self.master_seed)

    def echo(self) -> dict[str, Any]:
        """Configuración resuelta sin ajustes de ejecución (destino, workers)."""
        payload: dict[str, Any] = {
            "command": self.command,
            "master_seed": self.master_seed,
            "output_format": self.output_format,
            "request": self.request.to_dict(),
        }
        if self.input_path is not None:
            payload["input"] = self.input_path.name
            payload["timezone"] = self.timezone
            if self.null_summary is not None:
                payload["null_summary"] = self.null_summary.name
        else:
            cfg = self.sim_config()
            specs = {name: self.spec_for(name) for name in self.processes}
            payload["processes"] = {name: spec_to_dict(spec) for name, spec in specs.items()}
            payload["n_ticks"] = self.n_ticks
            payload["burn_in"] = {name: cfg.resolved_burn_in(spec) for name, spec in specs.items()}
            if self.command == "ensemble":
                payload["n_runs"] = self.n_runs
                payload["histogram_bins"] = self.histogram_bins
        return payload


def build_spec(name: str, overrides: Mapping[str, Mapping[str, Any]] | None = None) -> ProcessSpec:
    """Especificación por defecto del proceso con las claves de su familia aplicadas."""
    spec = default_spec(name)
    fields = dict((overrides or {}).get(spec.kind, {}))
    target_vol = fields.pop("target_vol", None)
    if isinstance(spec, Garch11) and target_vol is not None and "omega" not in fields:
        alpha = fields.get("alpha", spec.alpha)
        beta = fields.get("beta", spec.beta)
        if alpha + beta >= 1:
            raise InvalidParameter(f"alpha + beta = {alpha + beta} >= 1: proceso no estacionario")
        fields["omega"] = Garch11.from_target_vol(alpha, beta, target_vol).omega
    return replace(spec, **fields) if fields else spec


def _expand_processes(names) -> tuple[str, ...]:
    names = tuple(names or ())
    if "all" in names:
        return PROCESS_NAMES
    return tuple(dict.fromkeys(names))


def build_config(
    command: str,
    app_config: Mapping[str, Any],
    config_path=None,
    **cli: Any,
) -> AnalysisConfig:
    """Resuelve la configuración: CLI > fichero > entorno (app.config) > defecto.

    Claves de `cli`: input, out, processes, statistics, runs, seed, workers, n_ticks,
    output_format, null_summary.
    """
    file_values = load_job_config(config_path) if config_path else {}
    cli = {k: v for k, v in cli.items() if v not in (None, ())}

    def pick(cli_key: str | None, file_key: str, env_key: str | None, default: Any) -> Any:
        if cli_key and cli_key in cli:
            return cli[cli_key]
        if file_key in file_values:
            return file_values[file_key]
        if env_key and app_config.get(env_key) is not None:
            return app_config[env_key]
        return default

    request_fields = {
        "statistics": "STATISTICS",
        "a_p_horizon": "A_P_HORIZON",
        "a_p_granularity": "A_P_GRANULARITY",
        "node_count": "NODE_COUNT",
        "pdf_bound": "PDF_BOUND",
        "sigma_grid": "SIGMA_GRID",
        "grain_horizon": "GRAIN_HORIZON",
        "grain_grid": "GRAIN_GRID",
        "return_dt": "RETURN_DT",
    }
    request_values = {f: file_values[k] for f, k in request_fields.items() if k in file_values}
    if "statistics" in cli:
        request_values["statistics"] = tuple(cli["statistics"])
    try:
        request = StatRequest(**request_values)
    except TriError as exc:
        raise ConfigError(f"Petición de estadísticos inválida: {exc.message}") from exc

    overrides: dict[str, dict[str, Any]] = {}
    for key, value in file_values.items():
        spec = CONFIG_KEYS[key]
        if spec.target != "job":
            overrides.setdefault(spec.target, {})[spec.field] = value

    input_path = cli.get("input")
    null_summary = pick("null_summary", "NULL_SUMMARY", None, None)
    processes = _expand_processes(pick("processes", "PROCESSES", None, ()))
    if command == "ensemble" and not processes and input_path is None:
        raise ConfigError("ensemble necesita --process o PROCESSES en la configuración")
    out = cli.get("out")
    if out is None:
        raise ConfigError("Falta el destino (--out)")

    return AnalysisConfig(
        command=command,
        out=Path(out),
        input_path=Path(input_path) if input_path else None,
        processes=processes,
        process_overrides=overrides,
        request=request,
        n_runs=int(pick("runs", "RUNS", "TRI_DEFAULT_RUNS", DEFAULT_RUNS)),
        n_ticks=int(pick("n_ticks", "N_TICKS", "TRI_DEFAULT_TICKS", DEFAULT_N_TICKS)),
        burn_in=pick(None, "BURN_IN", None, None),
        master_seed=int(pick("seed", "MASTER_SEED", "TRI_MASTER_SEED", 0)),
        workers=int(pick("workers", "WORKERS", "TRI_WORKERS", 1)),
        output_format=str(pick("output_format", "OUTPUT_FORMAT", "TRI_OUTPUT_FORMAT", "csv")).lower(),
        timezone=str(pick(None, "INPUT_TIMEZONE", "TRI_INPUT_TIMEZONE", "UTC")),
        histogram_bins=int(pick(None, "HISTOGRAM_BINS", None, DEFAULT_HISTOGRAM_BINS)),
        null_summary=Path(null_summary) if null_summary else None,
    )


# ---------------------------------------------------------------------------
# Ejecución
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JobResult:
    ok: bool
    exit_code: int
    message: str
    artifacts: tuple[Path, ...] = ()
    error: dict[str, Any] | None = None


@contextmanager
def _statistic(name: str):
    try:
        yield
    except StatisticError:
        raise
    except TriError as exc:
        raise StatisticError(name, exc) from exc


def _analyze(config: AnalysisConfig, stage: Path) -> list[Path]:
    logger = get_logger()
    series = load_series_csv(config.input_path, config.timezone)
    req = config.request
    stats: dict[str, float] = {}
    files: list[Path] = []
    sigma_surface = None

    for stat in req.statistics:
        with _statistic(stat):
            if stat == "A_p":
                density, curve = pdf_asymmetry_curve(series, req.a_p_spec, req.node_count)
                stats[stat] = integrated_pdf_asymmetry(curve, req.pdf_bound)
                files.append(write_curve(
                    stage / "dsigma_density.csv",
                    {"dsigma": density.grid, "density": density.node_density},
                ))
                files.append(write_curve(
                    stage / "dsigma_asymmetry.csv",
                    {"dsigma": curve.positive_nodes, "a_p": curve.values},
                ))
            elif stat in ("A_sigma_tot", "A_sigma_cut"):
                if sigma_surface is None:
                    sigma_surface = hist_real_corr_surface(series, req.sigma_grid)
                    real_h, hist_h, values = sigma_surface.cut_curve()
                    files.append(write_curve(stage / "sigma_cut.csv", {
                        "realized_horizon": real_h,
                        "historical_horizon": hist_h,
                        "label": [ticks_to_label(h) for h in real_h],
                        "a_sigma": values,
                    }))
                mode = "tot" if stat == "A_sigma_tot" else "cut"
                stats[stat] = integrated_corr_asymmetry(sigma_surface, mode)
            elif stat == "A_gr_cut":
                surface = graining_corr_surface(series, req.grain_horizon, req.grain_grid)
                real_g, hist_g, values = surface.cut_curve()
                files.append(write_curve(stage / "graining_cut.csv", {
                    "realized_granularity": real_g,
                    "historical_granularity": hist_g,
                    "label": [ticks_to_label(g) for g in real_g],
                    "a_gr": values,
                }))
                stats[stat] = integrated_graining_asymmetry(surface, "cut")
            elif stat == "return_asym":
                stats[stat] = return_density_asymmetry(series, req.return_dt, req.node_count)
        logger.info("%s = %.6g", stat, stats[stat])

    payload = {
        "config": config.echo(),
        "series": {
            "rows": len(series),
            "start_index": series.start_index,
            "end_index": series.end_index,
        },
        "statistics": stats,
    }
    percentiles = _null_percentiles(config.null_summary, stats) if config.null_summary else {}
    if percentiles:
        payload["percentiles"] = percentiles
    files.append(write_summary_json(stage / "statistics.json", payload))
    if config.output_format == "csv":
        files.append(write_curve(stage / "statistics.csv", {
            "statistic": list(stats),
            "value": list(stats.values()),
        }))
        if percentiles:
            rows = [(process, stat, stats[stat], pct) for process, row in percentiles.items() for stat, pct in row.items()]
            files.append(write_curve(stage / "percentiles.csv", {
                "process": [r[0] for r in rows],
                "statistic": [r[1] for r in rows],
                "observed": [r[2] for r in rows],
                "percentile": [r[3] for r in rows],
            }))
    return files


def _null_percentiles(path: Path, stats: Mapping[str, float]) -> dict[str, dict[str, float]]:
    """Percentil empírico de cada estadístico observado en cada ensemble del resumen."""
    percentiles: dict[str, dict[str, float]] = {}
    for process, samples in load_ensemble_samples(path).items():
        row = {stat: empirical_percentile(value, samples[stat]) for stat, value in stats.items() if stat in samples}
        if row:
            percentiles[process] = row
    if not percentiles:
        raise ConfigError(
            f"{path.name} no comparte estadísticos con el análisis ({', '.join(stats)})",
            path=str(path),
        )
    get_logger().info("Percentiles frente a %s ensembles de %s", len(percentiles), path.name)
    return percentiles


def _ensemble(config: AnalysisConfig, stage: Path) -> list[Path]:
    specs = {name: config.spec_for(name) for name in config.processes}
    summaries = run_ensembles(
        specs,
        config.sim_config(),
        config.request,
        config.n_runs,
        workers=config.workers,
    )
    files = [write_summary_json(stage / "summary.json", {
        "config": config.echo(),
        "ensembles": [summary.to_dict() for summary in summaries],
    })]
    if config.output_format == "csv":
        for stat in config.request.statistics:
            rows = [
                (s.label, s.statistics[stat].mean, s.statistics[stat].std_dev, s.statistics[stat].p_value)
                for s in summaries
            ]
            files.append(write_table(stage / f"table_{stat}.csv", rows))
    if "A_sigma_cut" in config.request.statistics:
        columns: dict[str, list] = {"process": [], "bin_left": [], "bin_right": [], "count": []}
        for s in summaries:
            edges, counts = sample_histogram(s.statistics["A_sigma_cut"].samples, config.histogram_bins)
            columns["process"] += [s.process] * counts.size
            columns["bin_left"] += edges[:-1].tolist()
            columns["bin_right"] += edges[1:].tolist()
            columns["count"] += counts.tolist()
        files.append(write_curve(stage / "A_sigma_cut_histogram.csv", columns))
    return files


def _simulate(config: AnalysisConfig, stage: Path) -> list[Path]:
    name = config.processes[0]
    series = simulate(config.spec_for(name), config.sim_config())
    get_logger().info("Simulado %s: %s ticks, semilla %s", name, len(series), config.master_seed)
    return [save_series_csv(series, stage / config.out.name)]


_RUNNERS = {"analyze": _analyze, "ensemble": _ensemble, "simulate": _simulate}


def _error_report_path(config: AnalysisConfig) -> Path:
    if config.command == "simulate":
        return config.out.with_name(config.out.name + ".error.json")
    return config.out / "error.json"


def run_job(config: AnalysisConfig) -> JobResult:
    logger = get_logger()
    target_dir = config.out.parent if config.command == "simulate" else config.out
    target_dir.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".tri-stage-", dir=target_dir))
    report = _error_report_path(config)
    logger.info("Inicio de %s -> %s", config.command, config.out)

    try:
        staged = _RUNNERS[config.command](config, stage)
    except TriError as exc:
        shutil.rmtree(stage, ignore_errors=True)
        exit_code = EXIT_CONFIG if isinstance(exc, ConfigError) else EXIT_FAILED
        error = {"command": config.command, **exc.to_dict()}
        write_summary_json(report, error)
        logger.error("%s falló: %s (%s)", config.command, exc.message, " > ".join(exc.chain()))
        return JobResult(False, exit_code, f"{config.command} falló: {exc.message}", (report,), error)
    except Exception:
        shutil.rmtree(stage, ignore_errors=True)
        raise

    artifacts = []
    for path in staged:
        final = target_dir / path.name
        os.replace(path, final)
        artifacts.append(final)
    shutil.rmtree(stage, ignore_errors=True)
    if report.exists():
        report.unlink()
    logger.info("%s completado: %s ficheros", config.command, len(artifacts))
    return JobResult(True, EXIT_OK, f"{config.command} completado", tuple(artifacts))


def execute(command: str, app_config: Mapping[str, Any], config_path=None, **cli: Any) -> JobResult:
    """Resuelve la configuración y ejecuta; los errores de configuración no dejan ficheros."""
    try:
        config = build_config(command, app_config, config_path, **cli)
    except TriError as exc:
        error = {"command": command, **exc.to_dict()}
        get_logger().error("Configuración inválida para %s: %s", command, exc.message)
        return JobResult(False, EXIT_CONFIG, f"Configuración inválida: {exc.message}", (), error)
    return run_job(config)


SELFTEST_TICKS = 4096
SELFTEST_TOLERANCE = 1e-10


def run_selftest(seed: int = 0) -> list[tuple[str, bool, str]]:
    """Comprobaciones exactas sobre una trayectoria GARCH corta.

    Devuelve (nombre, ok, detalle) por comprobación: identidad de desplazamiento
    σ_r(t) = σ_h(t + δt_σ) y antisimetría de cada estadístico bajo inversión temporal.
    """
    prices = simulate(
        Garch11.from_target_vol(0.05, 0.9),
        SimConfig(n_ticks=SELFTEST_TICKS, burn_in=200, seed=seed),
    )
    checks: list[tuple[str, bool, str]] = []

    spec = VolSpec(96, 4)
    hist = historical_vol(prices, spec)
    real = realized_vol(prices, spec)
    first = max(real.start_index, hist.start_index - spec.horizon)
    last = min(real.end_index, hist.end_index - spec.horizon)
    shifted = hist.window(first + spec.horizon, last + spec.horizon)
    same = bool((real.window(first, last) == shifted).all())
    checks.append(("shift_identity", same, f"{last - first + 1} ticks comparados"))

    req = StatRequest(
        a_p_horizon=96,
        a_p_granularity=4,
        pdf_bound=1.0,
        sigma_grid=HorizonGrid.geometric(base=24, ratio=2, count=5),
        grain_horizon=64,
        grain_grid=HorizonGrid.powers_of_two(5),
        return_dt=20,
    )
    forward = evaluate_statistics(prices, req)
    backward = evaluate_statistics(reverse(prices), req)
    for stat in req.statistics:
        residual = abs(forward[stat] + backward[stat])
        checks.append((f"reversal_{stat}", residual <= SELFTEST_TOLERANCE, f"|S(x) + S(x̃)| = {residual:.3g}"))
    return checks
