"""
Simuladores de procesos de precio a 1 tick (3 minutos de tiempo de negocio).

Familias: paseo aleatorio gaussiano, GARCH(1,1), ARCH multiescala (afín, con
retornos agregados), volatilidad estocástica exponencial (OU sobre ln σ, con
cascada de varias escalas), Heston (y su cascada) y cambio de régimen markoviano.

Reproducibilidad:
- Toda la aleatoriedad sale de `SeedSequence(cfg.seed)`: el primer hijo es el flujo
  de residuos ε, el segundo el de la volatilidad (un nieto por componente).
- En los procesos sin realimentación (SV, Heston, régimen) la trayectoria de
  volatilidad se reconstruye sólo con el flujo de volatilidad (`volatility_path`).
- Se descartan `burn_in` ticks antes de emitir la serie.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import ClassVar

import numpy as np
from numba import njit
from scipy.signal import lfilter

from app.errors import InvalidParameter
from app.services.series_core import RegularSeries, SeriesKind
from app.utils import TICKS_PER_YEAR, ticks

DEFAULT_N_TICKS = 2_018_400  # 11.5 años
BURN_IN_FACTOR = 4
DT_YEAR = 1.0 / TICKS_PER_YEAR

# Permanencias medias del régimen por defecto.
_CALM_STAY = ticks(days=5)
_EXCITED_STAY = ticks(days=1)
_SHOCK_STAY = ticks(hours=12)


# ---------------------------------------------------------------------------
# Especificaciones
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianRW:
    kind: ClassVar[str] = "gaussian_rw"
    sigma_annual: float = 0.1
    label: str = "Gaussian RW"

    def __post_init__(self):
        if not math.isfinite(self.sigma_annual) or self.sigma_annual < 0:
            raise InvalidParameter("sigma_annual debe ser >= 0", sigma_annual=self.sigma_annual)

    def memory_ticks(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Garch11:
    kind: ClassVar[str] = "garch11"
    omega: float = 0.01 / TICKS_PER_YEAR * (1 - 0.999)
    alpha: float = 0.03
    beta: float = 0.969
    label: str = "GARCH(1,1)"

    def __post_init__(self):
        if self.omega <= 0 or self.alpha < 0 or self.beta < 0:
            raise InvalidParameter("GARCH(1,1) requiere omega > 0, alpha >= 0, beta >= 0")
        if self.alpha + self.beta >= 1:
            raise InvalidParameter(
                f"alpha + beta = {self.alpha + self.beta} >= 1: proceso no estacionario",
                alpha=self.alpha,
                beta=self.beta,
            )

    @classmethod
    def from_target_vol(cls, alpha: float, beta: float, vol_annual: float = 0.1, **kwargs) -> "Garch11":
        omega = vol_annual ** 2 / TICKS_PER_YEAR * (1 - alpha - beta)
        return cls(omega=omega, alpha=alpha, beta=beta, **kwargs)

    @property
    def stationary_variance(self) -> float:
        return self.omega / (1 - self.alpha - self.beta)

    def memory_ticks(self) -> float:
        return 1.0 / (1 - self.alpha - self.beta)


@dataclass(frozen=True)
class MultiscaleArch:
    kind: ClassVar[str] = "multiscale_arch"
    variant: str = "lm_affine"
    component_count: int = 10
    tau_1: float = 8.0
    ratio: float = 2.0
    coupling: float = 24.0
    weights: tuple[float, ...] | None = None
    weight_inf: float = 0.1
    mean_vol_annual: float = 0.1
    label: str = "LM-Aff-Agg-ARCH"

    def __post_init__(self):
        if self.variant not in ("lm_affine", "mkt_affine"):
            raise InvalidParameter(f"Variante ARCH desconocida: {self.variant}", variant=self.variant)
        if self.component_count < 1 or self.tau_1 < 1 or self.ratio < 1 or self.coupling < 1:
            raise InvalidParameter("ARCH multiescala requiere K >= 1, tau_1 >= 1, ratio >= 1, c >= 1")
        if not 0 <= self.weight_inf <= 1 or self.mean_vol_annual <= 0:
            raise InvalidParameter("weight_inf en [0, 1] y mean_vol_annual > 0")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
            if len(self.weights) != self.component_count:
                raise InvalidParameter(
                    f"{len(self.weights)} pesos para {self.component_count} componentes",
                )
            if any(w < 0 for w in self.weights) or sum(self.weights) + self.weight_inf > 1 + 1e-12:
                raise InvalidParameter("Los pesos deben ser >= 0 y sumar <= 1 con el término afín")

    @property
    def taus(self) -> np.ndarray:
        return self.tau_1 * self.ratio ** np.arange(self.component_count)

    @property
    def return_lags(self) -> np.ndarray:
        """δt_r,k = max(1, round(τ_k / c)) ticks."""
        return np.maximum(1, np.rint(self.taus / self.coupling)).astype(np.int64)

    def component_weights(self) -> np.ndarray:
        if self.weights is not None:
            return np.asarray(self.weights, dtype=np.float64)
        taus = self.taus
        if self.variant == "lm_affine":
            raw = 1.0 - np.log(taus) / np.log(taus[-1] * math.e)
        else:
            raw = np.ones_like(taus)
        return (1.0 - self.weight_inf) * raw / raw.sum()

    def memory_ticks(self) -> float:
        return float(self.taus[-1])


@dataclass(frozen=True)
class ExpOuSv:
    kind: ClassVar[str] = "exp_ou_sv"
    mean_log_vol: float = math.log(0.1)
    taus: tuple[float, ...] = (2400.0,)
    amplitudes: tuple[float, ...] = (0.3 * math.sqrt(1 - math.exp(-2 / 2400.0)),)
    label: str = "exp stoch.vol."

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        if not self.taus or len(self.taus) != len(self.amplitudes):
            raise InvalidParameter("Se necesita un tiempo de reversión por amplitud")
        if any(t < 1 for t in self.taus):
            raise InvalidParameter("Los tiempos de reversión deben ser >= 1 tick")
        if not all(math.isfinite(a) for a in self.amplitudes) or not math.isfinite(self.mean_log_vol):
            raise InvalidParameter("Amplitudes y nivel medio deben ser finitos")

    @property
    def component_count(self) -> int:
        return len(self.taus)

    @property
    def ar_coefficients(self) -> np.ndarray:
        return np.exp(-1.0 / np.asarray(self.taus))

    def stationary_variances(self) -> np.ndarray:
        a = self.ar_coefficients
        return np.asarray(self.amplitudes) ** 2 / (1 - a * a)

    def memory_ticks(self) -> float:
        return max(self.taus)


@dataclass(frozen=True)
class Heston:
    kind: ClassVar[str] = "heston"
    kappas: tuple[float, ...] = (52.0,)
    thetas: tuple[float, ...] = (0.01,)
    xis: tuple[float, ...] = (0.8,)
    label: str = "Heston"

    def __post_init__(self):
        for name in ("kappas", "thetas", "xis"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not self.kappas or not len(self.kappas) == len(self.thetas) == len(self.xis):
            raise InvalidParameter("kappas, thetas y xis deben tener la misma longitud")
        if any(k <= 0 for k in self.kappas) or any(t <= 0 for t in self.thetas) or any(x < 0 for x in self.xis):
            raise InvalidParameter("Heston requiere kappa > 0, theta > 0, xi >= 0")

    @property
    def component_count(self) -> int:
        return len(self.kappas)

    def memory_ticks(self) -> float:
        return TICKS_PER_YEAR / min(self.kappas)


@dataclass(frozen=True)
class RegimeSwitching:
    kind: ClassVar[str] = "regime_switching"
    state_vols: tuple[float, ...] = (0.05, 0.10, 0.25)
    # Ciclo calma -> sacudida -> agitado -> calma: la subida es un salto directo, la
    # bajada pasa siempre por el estado intermedio.
    transition_matrix: tuple[tuple[float, ...], ...] = (
        (1 - 1 / _CALM_STAY, 0.0, 1 / _CALM_STAY),
        (1 / _EXCITED_STAY, 1 - 1 / _EXCITED_STAY, 0.0),
        (0.0, 1 / _SHOCK_STAY, 1 - 1 / _SHOCK_STAY),
    )
    label: str = "Regime Switching"
    stationary: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vols = tuple(float(v) for v in self.state_vols)
        matrix = tuple(tuple(float(p) for p in row) for row in self.transition_matrix)
        object.__setattr__(self, "state_vols", vols)
        object.__setattr__(self, "transition_matrix", matrix)
        if not vols or any(v <= 0 for v in vols):
            raise InvalidParameter("Las volatilidades de estado deben ser > 0")
        P = np.asarray(matrix, dtype=np.float64)
        if P.shape != (len(vols), len(vols)):
            raise InvalidParameter(f"Matriz {P.shape} para {len(vols)} estados")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise InvalidParameter("Las filas de la matriz de transición deben ser vectores de probabilidad")
        pi = stationary_distribution(P)
        if np.any(pi < 1e-12):
            raise InvalidParameter(
                "Hay estados inalcanzables en régimen estacionario",
                states=str(np.flatnonzero(pi < 1e-12).tolist()),
            )
        object.__setattr__(self, "stationary", pi)

    @property
    def component_count(self) -> int:
        return len(self.state_vols)

    def memory_ticks(self) -> float:
        stay = np.diag(np.asarray(self.transition_matrix))
        leave = np.maximum(1.0 - stay, 1e-12)
        return float(np.max(1.0 / leave))


ProcessSpec = GaussianRW | Garch11 | MultiscaleArch | ExpOuSv | Heston | RegimeSwitching


def stationary_distribution(matrix) -> np.ndarray:
    """π con π P = π, Σπ = 1 (mínimos cuadrados sobre el sistema aumentado)."""
    P = np.asarray(matrix, dtype=np.float64)
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def spec_to_dict(spec: ProcessSpec) -> dict:
    payload = {"kind": spec.kind}
    for key, value in asdict(spec).items():
        if key == "stationary":
            continue
        payload[key] = value
    return payload


# ---------------------------------------------------------------------------
# Catálogo por nombre (filas de las tablas)
# ---------------------------------------------------------------------------

def _exp_lm_sv() -> ExpOuSv:
    taus = (20.0, 80.0, 320.0, 1280.0, 5120.0)
    amps = tuple(0.15 * math.sqrt(1 - math.exp(-2 / t)) for t in taus)
    return ExpOuSv(mean_log_vol=math.log(0.1), taus=taus, amplitudes=amps, label="exp LM stoch.vol.")


def _lm_heston() -> Heston:
    kappas = (3650.0, 365.0, 36.5)
    thetas = (0.01 / 3,) * 3
    xis = tuple(0.8 * math.sqrt(2 * k * t) for k, t in zip(kappas, thetas))
    return Heston(kappas=kappas, thetas=thetas, xis=xis, label="LM Heston")


PROCESS_FACTORIES = {
    "gaussian_rw": GaussianRW,
    "garch11": Garch11,
    "lm_arch": MultiscaleArch,
    "mkt_arch": lambda: MultiscaleArch(
        variant="mkt_affine",
        component_count=5,
        tau_1=20.0,
        ratio=4.0,
        label="Mkt-Aff-Agg-ARCH",
    ),
    "exp_sv": ExpOuSv,
    "exp_lm_sv": _exp_lm_sv,
    "heston": Heston,
    "lm_heston": _lm_heston,
    "regime_switching": RegimeSwitching,
}

PROCESS_NAMES = tuple(PROCESS_FACTORIES)


def default_spec(name: str) -> ProcessSpec:
    try:
        return PROCESS_FACTORIES[name]()
    except KeyError:
        raise InvalidParameter(
            f"Proceso desconocido: {name}. Disponibles: {', '.join(PROCESS_NAMES)}",
            process=name,
        ) from None


# ---------------------------------------------------------------------------
# Configuración de simulación y flujos aleatorios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    n_ticks: int = DEFAULT_N_TICKS
    burn_in: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_ticks < 2:
            raise InvalidParameter("n_ticks debe ser >= 2", n_ticks=self.n_ticks)
        if self.burn_in is not None and self.burn_in < 0:
            raise InvalidParameter("burn_in debe ser >= 0", burn_in=self.burn_in)

    def resolved_burn_in(self, spec: ProcessSpec) -> int:
        if self.burn_in is not None:
            return int(self.burn_in)
        return int(math.ceil(BURN_IN_FACTOR * spec.memory_ticks()))

    def total_ticks(self, spec: ProcessSpec) -> int:
        return self.n_ticks + self.resolved_burn_in(spec)


def _streams(cfg: SimConfig, components: int) -> tuple[np.random.Generator, list[np.random.Generator]]:
    eps_seq, vol_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    vol_rngs = [np.random.default_rng(s) for s in vol_seq.spawn(max(1, components))]
    return np.random.default_rng(eps_seq), vol_rngs


def _to_series(r: np.ndarray, burn_in: int) -> RegularSeries:
    x = np.cumsum(r)
    return RegularSeries(0, x[burn_in:], SeriesKind.LOG_PRICE)


# ---------------------------------------------------------------------------
# Núcleos secuenciales
# ---------------------------------------------------------------------------

@njit(cache=True)
def _garch_kernel(eps, omega, alpha, beta):
    n = eps.size
    r = np.empty(n)
    var = omega / (1.0 - alpha - beta)
    for t in range(n):
        r[t] = math.sqrt(var) * eps[t]
        var = omega + alpha * r[t] * r[t] + beta * var
    return r


@njit(cache=True)
def _multiscale_kernel(eps, taus, lags, weights, weight_inf, base_var):
    n = eps.size
    k_count = taus.size
    mu = np.exp(-1.0 / taus)
    comp = np.full(k_count, base_var)
    x = np.zeros(n + 1)
    r = np.empty(n)
    for t in range(n):
        var = weight_inf * base_var
        for k in range(k_count):
            var += weights[k] * comp[k]
        r[t] = math.sqrt(var) * eps[t]
        x[t + 1] = x[t] + r[t]
        for k in range(k_count):
            lag = lags[k]
            j = t + 1 - lag
            if j < 0:
                j = 0
            agg = x[t + 1] - x[j]
            comp[k] = mu[k] * comp[k] + (1.0 - mu[k]) * agg * agg / lag
    return r


@njit(cache=True)
def _cir_kernel(eta, kappa, theta, xi, dt, v0):
    n = eta.size
    out = np.empty(n)
    v = v0
    for t in range(n):
        vp = v if v > 0.0 else 0.0
        v = v + kappa * (theta - vp) * dt + xi * math.sqrt(vp * dt) * eta[t]
        out[t] = v if v > 0.0 else 0.0
    return out


@njit(cache=True)
def _markov_kernel(uniforms, cumulative, first_state):
    n = uniforms.size
    k_count = cumulative.shape[1]
    states = np.empty(n, dtype=np.int64)
    s = first_state
    states[0] = s
    for t in range(1, n):
        u = uniforms[t]
        nxt = k_count - 1
        for j in range(k_count):
            if u < cumulative[s, j]:
                nxt = j
                break
        s = nxt
        states[t] = s
    return states


# ---------------------------------------------------------------------------
# Trayectorias de volatilidad (sin realimentación)
# ---------------------------------------------------------------------------

def exp_ou_components(spec: ExpOuSv, total: int, vol_rngs: list[np.random.Generator]) -> np.ndarray:
    """y_k(t) = a_k·y_k(t−1) + k_k·η_k(t), arrancando de la distribución estacionaria."""
    a = spec.ar_coefficients
    sd = np.sqrt(spec.stationary_variances())
    comps = np.empty((spec.component_count, total))
    for k, rng in enumerate(vol_rngs[:spec.component_count]):
        y_prev = sd[k] * rng.standard_normal()
        eta = rng.standard_normal(total)
        comps[k], _ = lfilter([spec.amplitudes[k]], [1.0, -a[k]], eta, zi=[a[k] * y_prev])
    return comps


def heston_variances(spec: Heston, total: int, vol_rngs: list[np.random.Generator]) -> np.ndarray:
    """v_k⁺(t) por Euler con truncamiento completo, Δ = 1 tick en años."""
    out = np.empty((spec.component_count, total))
    for k, rng in enumerate(vol_rngs[:spec.component_count]):
        eta = rng.standard_normal(total)
        out[k] = _cir_kernel(eta, spec.kappas[k], spec.thetas[k], spec.xis[k], DT_YEAR, spec.thetas[k])
    return out


def markov_states(spec: RegimeSwitching, total: int, rng: np.random.Generator) -> np.ndarray:
    P = np.asarray(spec.transition_matrix, dtype=np.float64)
    cumulative = np.cumsum(P, axis=1)
    cumulative[:, -1] = 1.0
    start_cdf = np.cumsum(spec.stationary)
    start_cdf[-1] = 1.0
    first = int(np.searchsorted(start_cdf, rng.random(), side="right"))
    first = min(first, len(spec.state_vols) - 1)
    uniforms = rng.random(total)
    return _markov_kernel(uniforms, cumulative, first)


def _tick_vol_path(spec: ProcessSpec, total: int, vol_rngs: list[np.random.Generator]) -> np.ndarray:
    """σ por tick (no anualizada) de un proceso sin realimentación."""
    if isinstance(spec, ExpOuSv):
        log_vol = spec.mean_log_vol + exp_ou_components(spec, total, vol_rngs).sum(axis=0)
        return np.exp(log_vol) * math.sqrt(DT_YEAR)
    if isinstance(spec, Heston):
        return np.sqrt(heston_variances(spec, total, vol_rngs).sum(axis=0) * DT_YEAR)
    if isinstance(spec, RegimeSwitching):
        states = markov_states(spec, total, vol_rngs[0])
        return np.asarray(spec.state_vols)[states] * math.sqrt(DT_YEAR)
    raise InvalidParameter(f"{spec.kind} tiene realimentación: su volatilidad depende de ε")


def volatility_path(spec: ProcessSpec, cfg: SimConfig) -> np.ndarray:
    """σ anualizada tras el burn-in, usando sólo el flujo de volatilidad."""
    total = cfg.total_ticks(spec)
    _eps_rng, vol_rngs = _streams(cfg, getattr(spec, "component_count", 1))
    burn = cfg.resolved_burn_in(spec)
    return _tick_vol_path(spec, total, vol_rngs)[burn:] / math.sqrt(DT_YEAR)


def regime_states(spec: RegimeSwitching, cfg: SimConfig) -> np.ndarray:
    total = cfg.total_ticks(spec)
    _eps_rng, vol_rngs = _streams(cfg, spec.component_count)
    return markov_states(spec, total, vol_rngs[0])[cfg.resolved_burn_in(spec):]


# ---------------------------------------------------------------------------
# Simuladores
# ---------------------------------------------------------------------------

def sim_gaussian_rw(spec: GaussianRW, cfg: SimConfig) -> RegularSeries:
    total = cfg.total_ticks(spec)
    eps_rng, _ = _streams(cfg, 1)
    s = spec.sigma_annual * math.sqrt(DT_YEAR)
    return _to_series(s * eps_rng.standard_normal(total), cfg.resolved_burn_in(spec))


def sim_garch11(spec: Garch11, cfg: SimConfig) -> RegularSeries:
    total = cfg.total_ticks(spec)
    eps_rng, _ = _streams(cfg, 1)
    r = _garch_kernel(eps_rng.standard_normal(total), spec.omega, spec.alpha, spec.beta)
    return _to_series(r, cfg.resolved_burn_in(spec))


def sim_multiscale_arch(spec: MultiscaleArch, cfg: SimConfig) -> RegularSeries:
    total = cfg.total_ticks(spec)
    eps_rng, _ = _streams(cfg, 1)
    base_var = spec.mean_vol_annual ** 2 * DT_YEAR
    r = _multiscale_kernel(
        eps_rng.standard_normal(total),
        spec.taus.astype(np.float64),
        spec.return_lags,
        spec.component_weights(),
        spec.weight_inf,
        base_var,
    )
    return _to_series(r, cfg.resolved_burn_in(spec))


def _sim_without_feedback(spec: ProcessSpec, cfg: SimConfig) -> RegularSeries:
    total = cfg.total_ticks(spec)
    eps_rng, vol_rngs = _streams(cfg, spec.component_count)
    sigma = _tick_vol_path(spec, total, vol_rngs)
    return _to_series(sigma * eps_rng.standard_normal(total), cfg.resolved_burn_in(spec))


def sim_exp_ou_sv(spec: ExpOuSv, cfg: SimConfig) -> RegularSeries:
    return _sim_without_feedback(spec, cfg)


def sim_heston(spec: Heston, cfg: SimConfig) -> RegularSeries:
    return _sim_without_feedback(spec, cfg)


def sim_regime_switching(spec: RegimeSwitching, cfg: SimConfig) -> RegularSeries:
    return _sim_without_feedback(spec, cfg)


_SIMULATORS = {
    GaussianRW: sim_gaussian_rw,
    Garch11: sim_garch11,
    MultiscaleArch: sim_multiscale_arch,
    ExpOuSv: sim_exp_ou_sv,
    Heston: sim_heston,
    RegimeSwitching: sim_regime_switching,
}


def simulate(spec: ProcessSpec, cfg: SimConfig) -> RegularSeries:
    try:
        simulator = _SIMULATORS[type(spec)]
    except KeyError:
        raise InvalidParameter(f"Especificación de proceso no soportada: {type(spec).__name__}") from None
    return simulator(spec, cfg)
