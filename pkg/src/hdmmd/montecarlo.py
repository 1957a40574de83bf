"""Replicate engine: empirical size, power curves and normality diagnostics.

Every grid point draws ``replicates`` independent ``(X, Y)`` pairs.  Replicate
``r`` of grid point ``g`` uses the streams ``(seed, g, r, 0)`` for ``X`` and
``(seed, g, r, 1)`` for ``Y``; all kernels of a replicate share the same data
and the same pooled Gram matrix (common random numbers), which sharpens
kernel comparisons.  Replicates run on a thread pool but each writes to its
own slot, so results do not depend on the worker count or scheduling.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from . import _backend, datagen, theory
from .errors import ConfigError, HdMmdError, TooFewValues
from .kernels import BandwidthMode, BandwidthPolicy, KernelSpec, parse_bandwidth, parse_kernel
from .mmd import PooledGram
from .normal import normal_cdf, normal_quantile

__all__ = [
    "DEFAULT_SEED",
    "ExperimentConfig",
    "ExperimentResult",
    "GridSummary",
    "KernelChoice",
    "Mode",
    "ReplicateRecord",
    "ks_distance",
    "normal_cdf",
    "normal_quantile",
    "run_experiment",
]

DEFAULT_SEED = 20240601
MIN_REPLICATES = 100
CI_LEVEL = 0.99


class Mode(Enum):
    NULL_CALIBRATION = "null_calibration"
    POWER_CURVE = "power_curve"
    KERNEL_IMPACT = "kernel_impact"


class TheoryRegime(Enum):
    NONE = "none"
    LOCAL = "local"
    HIGHER_ORDER = "higher_order"


@dataclass(frozen=True)
class KernelChoice:
    """A kernel profile plus the policy that sets its bandwidth."""

    kernel: str
    bandwidth: BandwidthPolicy

    def __post_init__(self):
        parse_kernel(self.kernel)  # validate early
        if isinstance(self.bandwidth, str):
            object.__setattr__(self, "bandwidth", parse_bandwidth(self.bandwidth))

    @property
    def label(self) -> str:
        return f"{self.kernel}@{self.bandwidth.label}"

    def spec(self, gamma: float) -> KernelSpec:
        return parse_kernel(self.kernel, gamma)

    def static_bandwidth(self, p: int):
        """Bandwidth when it does not depend on the data, else ``None``."""
        if self.bandwidth.mode is BandwidthMode.MEDIAN:
            return None
        return self.bandwidth.resolve(p)


@dataclass(frozen=True)
class GridPoint:
    n: int
    m: int
    p: int

    def __post_init__(self):
        for name in ("n", "m", "p"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}", "grid")
        if self.n < 4 or self.m < 4:
            raise ConfigError("each sample needs at least 4 rows", "grid")


def dimension_grid(p: int, exponents, m_equal: bool = True):
    """Grid ``n = m = round(p ** d)`` at fixed ``p``."""
    out = []
    for d in exponents:
        n = int(round(p ** float(d)))
        out.append(GridPoint(n, n if m_equal else n, int(p)))
    return out


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a Monte Carlo study.

    ``theory`` selects the prediction attached to each grid point: ``local``
    (zeroth plus second-order mean terms over the leading variance),
    ``higher_order`` (Monte Carlo population MMD) or ``none``.
    """

    model_x: datagen.ModelSpec
    model_y: datagen.ModelSpec
    kernels: list
    grid: list
    alphas: list = field(default_factory=lambda: [0.05])
    replicates: int = 1000
    seed: int = DEFAULT_SEED
    mode: Mode = Mode.NULL_CALIBRATION
    theory: TheoryRegime = TheoryRegime.NONE
    mmd_reps: int = 100_000
    full_variance: bool = False

    def __post_init__(self):
        try:
            self.mode = Mode(self.mode)
        except ValueError:
            raise ConfigError(f"unknown mode {self.mode!r}", "mode") from None
        try:
            self.theory = TheoryRegime(self.theory)
        except ValueError:
            raise ConfigError(f"unknown theory regime {self.theory!r}", "theory") from None
        if not isinstance(self.replicates, (int, np.integer)) or self.replicates < MIN_REPLICATES:
            raise ConfigError(f"replicates must be an integer >= {MIN_REPLICATES}", "replicates")
        if not self.grid:
            raise ConfigError("grid must be non-empty", "grid")
        self.grid = [g if isinstance(g, GridPoint) else GridPoint(*g) for g in self.grid]
        if not self.kernels:
            raise ConfigError("at least one kernel is required", "kernels")
        self.kernels = [
            k if isinstance(k, KernelChoice) else KernelChoice(*k) for k in self.kernels
        ]
        labels = [k.label for k in self.kernels]
        if len(set(labels)) != len(labels):
            raise ConfigError("duplicate kernel entries", "kernels")
        self.alphas = sorted(float(a) for a in self.alphas)
        if not self.alphas or not all(0.0 < a < 1.0 for a in self.alphas):
            raise ConfigError("alphas must lie in (0, 1)", "alphas")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer", "seed")
        if self.mmd_reps < 1000:
            raise ConfigError("mmd_reps must be at least 1000", "mmd_reps")

    # serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "model_x": self.model_x.to_dict(),
            "model_y": self.model_y.to_dict(),
            "kernels": [
                {"kernel": k.kernel, "bandwidth": k.bandwidth.label} for k in self.kernels
            ],
            "grid": [[g.n, g.m, g.p] for g in self.grid],
            "alphas": list(self.alphas),
            "replicates": self.replicates,
            "seed": self.seed,
            "theory": self.theory.value,
            "mmd_reps": self.mmd_reps,
            "full_variance": self.full_variance,
        }

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object", "config")
        allowed = {
            "mode", "model_x", "model_y", "kernel", "bandwidth", "kernels", "grid",
            "alphas", "replicates", "seed", "theory", "mmd_reps", "full_variance",
        }
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", "config")
        for key in ("model_x", "model_y", "grid"):
            if key not in d:
                raise ConfigError("required", key)
        grid = _parse_grid(d["grid"])
        models = {}
        for key in ("model_x", "model_y"):
            md = d[key]
            if not isinstance(md, dict):
                raise ConfigError("must be an object", key)
            md = dict(md)
            md.setdefault("p", grid[0].p)
            try:
                models[key] = datagen.ModelSpec.from_dict(md)
            except ConfigError as e:
                raise ConfigError(str(e), f"{key}.{e.field or ''}".rstrip(".")) from None
        if "kernels" in d:
            if "kernel" in d:
                raise ConfigError("give either 'kernel' or 'kernels'", "kernels")
            entries = d["kernels"]
            if not isinstance(entries, list):
                raise ConfigError("must be a list", "kernels")
            kernels = []
            for e in entries:
                if isinstance(e, str):
                    e = {"kernel": e}
                kernels.append(KernelChoice(e.get("kernel", ""), e.get("bandwidth", d.get("bandwidth", "scaled:2"))))
        else:
            kernels = [KernelChoice(d.get("kernel", "gaussian"), d.get("bandwidth", "scaled:2"))]
        seed = d.get("seed", DEFAULT_SEED)
        return cls(
            model_x=models["model_x"],
            model_y=models["model_y"],
            kernels=kernels,
            grid=grid,
            alphas=d.get("alphas", [0.05]),
            replicates=d.get("replicates", 1000),
            seed=seed,
            mode=d.get("mode", "null_calibration"),
            theory=d.get("theory", "none"),
            mmd_reps=d.get("mmd_reps", 100_000),
            full_variance=bool(d.get("full_variance", False)),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e}", "config") from None
        return cls.from_dict(d)


def _parse_grid(g):
    if isinstance(g, dict):
        if "p" not in g or "d" not in g:
            raise ConfigError("dimension grid needs 'p' and 'd'", "grid")
        ps = g["p"] if isinstance(g["p"], list) else [g["p"]]
        out = []
        for p in ps:
            out.extend(dimension_grid(int(p), g["d"]))
        return out
    if not isinstance(g, list) or not g:
        raise ConfigError("grid must be a non-empty list of [n, m, p]", "grid")
    out = []
    for row in g:
        if not isinstance(row, (list, tuple)) or len(row) != 3:
            raise ConfigError("each grid entry must be [n, m, p]", "grid")
        out.append(GridPoint(*(int(v) for v in row)))
    return out


# --------------------------------------------------------------------------
# records and summaries


@dataclass
class ReplicateRecord:
    grid_index: int
    replicate_index: int
    kernel: str
    bandwidth: float
    statistic: float
    var_hat: float
    z_score: float
    reject: tuple
    failed: bool = False
    error: str = ""


@dataclass
class GridSummary:
    grid_index: int
    n: int
    m: int
    p: int
    kernel: str
    replicates: int
    failed: int
    rejection_rate: dict
    ci99: dict
    ks_distance: float | None
    z_mean: float
    z_var: float
    stat_mean: float
    stat_se: float
    z_quantiles: dict
    theoretical_power: dict | None = None
    theoretical_band: dict | None = None
    theory_detail: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    summaries: list
    records: list
    backend: str

    def summary(self, grid_index: int, kernel: str | None = None) -> GridSummary:
        for s in self.summaries:
            if s.grid_index == grid_index and (kernel is None or s.kernel == kernel):
                return s
        raise KeyError((grid_index, kernel))

    def z_scores(self, grid_index: int, kernel: str) -> np.ndarray:
        return np.array([
            r.z_score for r in self.records
            if r.grid_index == grid_index and r.kernel == kernel and not r.failed
        ])

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "backend": self.backend,
            "summaries": [s.to_dict() for s in self.summaries],
        }


# --------------------------------------------------------------------------
# diagnostics


def ks_distance(z_scores) -> float:
    """Kolmogorov distance ``sup |F_n - Phi|`` between the ECDF and N(0, 1).

    Raises
    ------
    TooFewValues
        With fewer than 100 values.
    """
    z = np.sort(np.asarray(z_scores, dtype=np.float64).ravel())
    N = z.size
    if N < 100:
        raise TooFewValues(f"need at least 100 values, got {N}")
    F = normal_cdf(z)
    i = np.arange(1, N + 1)
    return float(max(np.max(i / N - F), np.max(F - (i - 1) / N)))


def clopper_pearson(k: int, n: int, level: float = CI_LEVEL):
    """Exact binomial confidence interval for ``k`` successes in ``n``."""
    if n == 0:
        return (0.0, 1.0)
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return (lo, hi)


# --------------------------------------------------------------------------
# engine


def _run_replicate(cfg, gi, gp, rep, samplers, static_gammas):
    sx, sy = samplers
    X = sx(gp.n, datagen.derive_rng(cfg.seed, gi, rep, 0))
    Y = sy(gp.m, datagen.derive_rng(cfg.seed, gi, rep, 1))
    out = []
    pg = PooledGram(X, Y, nthreads=1)
    for choice, gamma in zip(cfg.kernels, static_gammas):
        try:
            if gamma is None:
                gamma = choice.bandwidth.resolve(X, Y)
            res = pg.test(choice.spec(gamma), cfg.alphas[0])
            z = res.z_score
            rejects = tuple(bool(z > normal_quantile(1.0 - a)) for a in cfg.alphas)
            out.append(ReplicateRecord(gi, rep, choice.label, float(gamma), res.mmd_stat,
                                       res.var_hat, z, rejects))
        except (HdMmdError, ArithmeticError) as e:
            out.append(ReplicateRecord(gi, rep, choice.label, float(gamma or math.nan),
                                       math.nan, math.nan, math.nan,
                                       tuple(False for _ in cfg.alphas), True,
                                       f"{type(e).__name__}: {e}"))
    return out


def _theory_for(cfg, gp, choice, gamma, mmd_cache):
    if cfg.theory is TheoryRegime.NONE or gamma is None:
        return None, None, None
    mx = cfg.model_x.with_dim(gp.p)
    my = cfg.model_y.with_dim(gp.p)
    kernel = choice.spec(gamma)
    ti = theory.TheoryInput.from_models(mx, my)
    kwargs = {}
    if cfg.theory is TheoryRegime.HIGHER_ORDER:
        key = (gp.p, choice.label)
        if key not in mmd_cache:
            mmd_cache[key] = theory.population_mmd_monte_carlo(
                mx, my, kernel, cfg.mmd_reps, datagen.derive_rng(cfg.seed, 10**6 + gp.p, 7)
            )
        est, se = mmd_cache[key]
        kwargs = dict(regime=theory.Regime.HIGHER_ORDER_S2, mmd_pop=est, mmd_se=se)
    powers, bands, detail = {}, {}, None
    for a in cfg.alphas:
        pred = theory.predict_power(ti, kernel, gp.n, gp.m, a,
                                    full_variance=cfg.full_variance, **kwargs)
        powers[str(a)] = pred.predicted_power
        bands[str(a)] = list(pred.power_band)
        detail = {
            "delta0": pred.delta0,
            "t1": pred.t1,
            "var_delta1": pred.var_delta1,
            "signal": pred.signal,
            "signal_se": pred.signal_se,
            "regime": pred.regime.value,
        }
    return powers, bands, detail


def _summarize(cfg, gi, gp, choice, recs, theory_out):
    ok = [r for r in recs if not r.failed]
    n_ok = len(ok)
    z = np.array([r.z_score for r in ok])
    stat = np.array([r.statistic for r in ok])
    rates, cis = {}, {}
    for j, a in enumerate(cfg.alphas):
        k = sum(r.reject[j] for r in ok)
        rates[str(a)] = k / n_ok if n_ok else math.nan
        cis[str(a)] = list(clopper_pearson(k, n_ok))
    finite = z[np.isfinite(z)]
    ks = ks_distance(finite) if finite.size >= 100 else None
    qs = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
    zq = {str(q): float(np.quantile(finite, q)) for q in qs} if finite.size else {}
    powers, bands, detail = theory_out
    return GridSummary(
        grid_index=gi, n=gp.n, m=gp.m, p=gp.p, kernel=choice.label,
        replicates=n_ok, failed=len(recs) - n_ok,
        rejection_rate=rates, ci99=cis, ks_distance=ks,
        z_mean=float(finite.mean()) if finite.size else math.nan,
        z_var=float(finite.var(ddof=1)) if finite.size > 1 else math.nan,
        stat_mean=float(stat.mean()) if n_ok else math.nan,
        stat_se=float(stat.std(ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else math.nan,
        z_quantiles=zq,
        theoretical_power=powers, theoretical_band=bands, theory_detail=detail,
    )


def run_experiment(config: ExperimentConfig, threads: int | None = None,
                   progress=None) -> ExperimentResult:
    """Run every grid point; deterministic given the config and its seed.

    ``threads`` defaults to ``HD_MMD_THREADS`` or the CPU count.  Replicate
    failures (e.g. a zero variance estimate) are recorded, excluded from the
    rate denominators and counted in ``failed``.
    """
    workers = _backend.default_threads() if threads is None else max(1, int(threads))
    summaries, records = [], []
    mmd_cache = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for gi, gp in enumerate(config.grid):
            mx = config.model_x.with_dim(gp.p)
            my = config.model_y.with_dim(gp.p)
            samplers = (datagen.Sampler(mx), datagen.Sampler(my))
            gammas = [k.static_bandwidth(gp.p) for k in config.kernels]
            slots = list(pool.map(
                lambda rep: _run_replicate(config, gi, gp, rep, samplers, gammas),
                range(config.replicates),
            ))
            for ki, choice in enumerate(config.kernels):
                recs = [slot[ki] for slot in slots]
                th = _theory_for(config, gp, choice, gammas[ki], mmd_cache)
                summaries.append(_summarize(config, gi, gp, choice, recs, th))
                records.extend(recs)
            if progress is not None:
                progress(gi, gp)
    return ExperimentResult(config, summaries, records, _backend.BACKEND)
