import click
from flask import Flask

from config import VERSION


def _finish(result) -> None:
    if result.ok:
        print(f"OK: {result.message}")
        for path in result.artifacts:
            print(f" - {path}")
        return
    print(f"ERROR: {result.message}")
    if result.error:
        print(f"Cadena: {' > '.join(result.error.get('error_chain', []))}")
    for path in result.artifacts:
        print(f"Informe: {path}")
    raise SystemExit(result.exit_code)


def _statistics_option(value: str | None):
    if not value:
        return None
    return tuple(part.strip() for part in value.split(",") if part.strip())


def register_commands(app: Flask):
    @app.cli.command("analyze")
    @click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False), help="CSV (tick, log-precio).")
    @click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Fichero CLAVE=valor.")
    @click.option("--out", required=True, type=click.Path(file_okay=False), help="Directorio de salida.")
    @click.option("--statistics", help="Lista separada por comas (por defecto todos).")
    @click.option("--format", "output_format", type=click.Choice(["csv", "json"]), help="Formato de salida.")
    @click.option("--null", "null_summary", type=click.Path(dir_okay=False), help="summary.json de un ensemble de referencia.")
    def analyze(input_path, config_path, out, statistics, output_format, null_summary):
        """Compute the reversal-asymmetry statistics and curves of an empirical series."""
        from app.services.job_service import execute

        result = execute(
            "analyze",
            app.config,
            config_path,
            input=input_path,
            out=out,
            statistics=_statistics_option(statistics),
            output_format=output_format,
            null_summary=null_summary,
        )
        _finish(result)

    @app.cli.command("simulate")
    @click.option("--process", "process_name", required=True, help="Nombre del proceso (gaussian_rw, garch11, ...).")
    @click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Fichero CLAVE=valor.")
    @click.option("--seed", type=int, help="Semilla de la trayectoria.")
    @click.option("--ticks", "n_ticks", type=int, help="Longitud de la serie en ticks.")
    @click.option("--out", required=True, type=click.Path(dir_okay=False), help="CSV de salida.")
    def simulate(process_name, config_path, seed, n_ticks, out):
        """Simulate one log-price path and write it as CSV."""
        from app.services.job_service import execute

        result = execute(
            "simulate",
            app.config,
            config_path,
            processes=(process_name,),
            seed=seed,
            n_ticks=n_ticks,
            out=out,
        )
        _finish(result)

    @app.cli.command("ensemble")
    @click.option("--process", "processes", multiple=True, help="Proceso a simular; repetible o 'all'.")
    @click.option("--runs", type=int, help="Número de trayectorias por proceso.")
    @click.option("--ticks", "n_ticks", type=int, help="Longitud de cada trayectoria en ticks.")
    @click.option("--seed", type=int, help="Semilla maestra.")
    @click.option("--workers", type=int, help="Procesos en paralelo (por defecto TRI_WORKERS).")
    @click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Fichero CLAVE=valor.")
    @click.option("--out", required=True, type=click.Path(file_okay=False), help="Directorio de salida.")
    @click.option("--statistics", help="Lista separada por comas (por defecto todos).")
    @click.option("--format", "output_format", type=click.Choice(["csv", "json"]), help="Formato de salida.")
    def ensemble(processes, runs, n_ticks, seed, workers, config_path, out, statistics, output_format):
        """Run Monte Carlo ensembles and write table-shaped summaries."""
        from app.services.job_service import execute

        result = execute(
            "ensemble",
            app.config,
            config_path,
            processes=tuple(processes),
            runs=runs,
            n_ticks=n_ticks,
            seed=seed,
            workers=workers,
            out=out,
            statistics=_statistics_option(statistics),
            output_format=output_format,
        )
        _finish(result)

    @app.cli.command("version")
    def version():
        """Print the package version."""
        print(VERSION)

    @app.cli.command("selftest")
    @click.option("--seed", type=int, default=0, show_default=True)
    def selftest(seed: int):
        """Check the exact reversal and shift identities on a short simulated path."""
        from app.services.job_service import run_selftest

        failed = 0
        for name, ok, detail in run_selftest(seed):
            print(f"{'OK' if ok else 'FAIL'}: {name} ({detail})")
            failed += 0 if ok else 1
        if failed:
            raise SystemExit(f"ERROR: {failed} comprobaciones fallidas")
        print("Selftest superado")
