"""Named verification experiments, configuration and reports.

Every experiment is a function of an :class:`ExperimentConfig`; random inputs
are derived from ``cfg.seed`` through keyed substreams so a report is a pure
function of its configuration.  Timing is recorded separately from the report
so that report files are bit-identical across runs.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import stats as sps
from scipy.special import logsumexp

from . import determinantal as det
from .expfun import ExpPoly
from .lpp import flat_lpp_bruteforce, flat_lpp_field, gen_environment, p2p_symmetric_lpp, triangle_cells
from .matrices import HermitianPathConfig, sample_loe, sample_sym_lue, sup_lambda_max
from .polymer import brownian_partition_trajectory, integrated_partition, loggamma_partition_field, zero_temp_scan
from .reflected import (PathBundle, XArrayModel, finite_diff_divergence, sample_path_bundle,
                        triangular_sup_trajectory, wall_trajectory, x_array_simulate, z_slopes)
from .rng import child_seed, substream
from .stats import chi2_ordered_pairs, energy_distance, ks_one_sample, ks_two_sample

OUTPUT_ENV = "FLATLPP_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid or unknown experiment configuration."""


class ExperimentError(RuntimeError):
    """A computation inside an experiment failed."""


# ---------------------------------------------------------------------------
# configuration and report
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    experiment: str
    n: int | None = None
    drifts: tuple | None = None
    N_samples: int | None = None
    T: float | None = None
    dt: float | None = None
    beta_list: tuple | None = None
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    output_dir: str | None = None

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "experiment" not in data:
            raise ConfigError("config needs an 'experiment' name")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_mapping(data)

    def resolved(self) -> "ExperimentConfig":
        """Validate and fill unset fields from the experiment defaults."""
        if self.experiment not in REGISTRY:
            raise ConfigError(f"unknown experiment {self.experiment!r}; registered: {', '.join(REGISTRY)}")
        d = REGISTRY[self.experiment].defaults
        out = ExperimentConfig(
            experiment=self.experiment,
            n=self.n if self.n is not None else d.get("n"),
            drifts=tuple(self.drifts) if self.drifts is not None else d.get("drifts"),
            N_samples=self.N_samples if self.N_samples is not None else d.get("N_samples"),
            T=self.T if self.T is not None else d.get("T"),
            dt=self.dt if self.dt is not None else d.get("dt"),
            beta_list=tuple(self.beta_list) if self.beta_list is not None else d.get("beta_list"),
            seed=int(self.seed),
            tolerances=dict(self.tolerances),
            output_dir=self.output_dir,
        )
        for name in ("n", "N_samples", "T", "dt"):
            v = getattr(out, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if out.drifts is not None:
            if any(not float(a) > 0 for a in out.drifts):
                raise ConfigError("drifts must be positive")
            out.drifts = tuple(float(a) for a in out.drifts)
            if out.n is not None and d.get("n_follows_drifts", True):
                out.n = len(out.drifts)
        if out.beta_list is not None and any(not b > 0 for b in out.beta_list):
            raise ConfigError("beta_list entries must be positive")
        if out.seed < 0:
            raise ConfigError("seed must be non-negative")
        checks = REGISTRY[self.experiment].checks
        bad = set(out.tolerances) - set(checks)
        if bad:
            raise ConfigError(f"unknown tolerance keys {sorted(bad)}; available: {sorted(checks)}")
        for k, v in out.tolerances.items():
            if not float(v) > 0:
                raise ConfigError(f"tolerance {k} must be positive")
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("output_dir")
        for k in ("drifts", "beta_list"):
            if d[k] is not None:
                d[k] = [float(v) if math.isfinite(v) else "inf" for v in d[k]]
        return d


@dataclass
class Check:
    name: str
    value: float
    op: str
    tol: float
    passed: bool


@dataclass
class Report:
    experiment: str
    criterion: int | None
    config: dict
    metrics: dict
    checks: list
    passed: bool
    seed: int
    wall_clock: float = 0.0
    series: dict = field(default_factory=dict, repr=False)

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "experiment": self.experiment,
            "criterion": self.criterion,
            "config": self.config,
            "metrics": {k: _jsonable(v) for k, v in sorted(self.metrics.items())},
            "checks": [asdict(c) | {"value": _jsonable(c.value)} for c in self.checks],
            "passed": self.passed,
            "seed": self.seed,
        }
        if timing:
            d["wall_clock"] = self.wall_clock
        return d

    def summary_line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        crit = f"criterion {self.criterion:>2}" if self.criterion else "extra"
        parts = ", ".join(f"{c.name}={_fmt(c.value)}{c.op}{_fmt(c.tol)}" for c in self.checks)
        return f"{tag} [{crit}] {self.experiment}: {parts}"


def _fmt(v) -> str:
    return f"{v:.3g}" if isinstance(v, float) else str(v)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


class _Context:
    def __init__(self, cfg: ExperimentConfig, spec: "Experiment"):
        self.cfg = cfg
        self.spec = spec
        self.metrics: dict = {}
        self.checks: list = []
        self.series: dict = {}

    def seed(self, *key) -> int:
        return child_seed(self.cfg.seed, self.spec.name, *key)

    def metric(self, name: str, value):
        self.metrics[name] = float(value) if isinstance(value, (float, np.floating, int, np.integer)) else value

    def check(self, name: str, value: float, op: str = "<"):
        tol = float(self.cfg.tolerances.get(name, self.spec.checks[name]))
        value = float(value)
        passed = bool(value < tol) if op == "<" else bool(value > tol)
        self.metrics[name] = value
        self.checks.append(Check(name, value, op, tol, passed))

    def keep(self, name: str, **arrays):
        self.series[name] = {k: np.asarray(v) for k, v in arrays.items()}


@dataclass(frozen=True)
class Experiment:
    name: str
    criterion: int | None
    summary: str
    runner: Callable
    checks: dict
    defaults: dict


REGISTRY: dict = {}


def register(name: str, criterion: int | None, summary: str, checks: dict, **defaults):
    def deco(fn):
        REGISTRY[name] = Experiment(name, criterion, summary, fn, dict(checks), defaults)
        return fn
    return deco


def run_experiment(cfg: ExperimentConfig) -> Report:
    """Run a registered experiment; deterministic given the config."""
    cfg = cfg.resolved()
    spec = REGISTRY[cfg.experiment]
    ctx = _Context(cfg, spec)
    t0 = time.perf_counter()
    try:
        spec.runner(ctx)
    except (ConfigError, ExperimentError):
        raise
    except Exception as exc:
        raise ExperimentError(f"experiment {cfg.experiment!r} failed: {type(exc).__name__}: {exc}") from exc
    elapsed = time.perf_counter() - t0
    passed = all(c.passed for c in ctx.checks)
    return Report(cfg.experiment, spec.criterion, cfg.to_dict(), ctx.metrics, ctx.checks, passed,
                  cfg.seed, elapsed, ctx.series)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, "flatlpp-out")


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_json(report: Report) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def report_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["experiment", "metric", "value", "op", "tolerance", "passed"])
    checks = {c.name: c for c in report.checks}
    for k in sorted(report.metrics):
        c = checks.get(k)
        w.writerow([report.experiment, k, repr(_jsonable(report.metrics[k])),
                    c.op if c else "", repr(c.tol) if c else "", c.passed if c else ""])
    return buf.getvalue()


def emit_report(report: Report, fmt: str = "json", output_dir: str | None = None) -> str:
    """Write ``report.json`` or ``report.csv`` atomically; returns the path.

    Wall-clock time goes to a separate ``timing.json`` so the report itself
    only depends on the configuration.
    """
    out = output_dir or default_output_dir()
    if fmt == "json":
        path, text = os.path.join(out, "report.json"), report_json(report)
    elif fmt == "csv":
        path, text = os.path.join(out, "report.csv"), report_csv(report)
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    _atomic_write(path, text)
    _atomic_write(os.path.join(out, "timing.json"),
                  json.dumps({"experiment": report.experiment, "wall_clock": report.wall_clock}) + "\n")
    return path


def emit_plot(spec: dict, path: str) -> str:
    """Render an ECDF overlay or a histogram with a density curve to SVG.

    ``spec = {"kind": "ecdf", "series": {label: values}, "title": ...}`` or
    ``{"kind": "hist", "data": values, "curve": (x, y), "title": ...}``.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kind = spec.get("kind")
    if kind == "ecdf":
        series = spec.get("series") or {}
        if not series or any(np.asarray(v).size == 0 for v in series.values()):
            raise ConfigError("ecdf plot needs non-empty series")
    elif kind == "hist":
        if np.asarray(spec.get("data", [])).size == 0:
            raise ConfigError("histogram plot needs data")
    else:
        raise ConfigError(f"unknown plot kind {kind!r}")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if kind == "ecdf":
        for label, v in series.items():
            x = np.sort(np.asarray(v, float).ravel())
            ax.step(x, np.arange(1, x.size + 1) / x.size, where="post", label=label)
        ax.set_ylabel("ECDF")
    else:
        ax.hist(np.asarray(spec["data"], float).ravel(), bins=spec.get("bins", 60), density=True, alpha=0.5,
                label=spec.get("label", "sample"))
        if spec.get("curve") is not None:
            cx, cy = spec["curve"]
            ax.plot(cx, cy, label=spec.get("curve_label", "density"))
        ax.set_ylabel("density")
    ax.set_title(spec.get("title", ""))
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def emit_plots(report: Report, output_dir: str | None = None) -> list:
    out = os.path.join(output_dir or default_output_dir(), "plots")
    paths = []
    for name, arrays in sorted(report.series.items()):
        spec = {"kind": "ecdf", "series": arrays, "title": f"{report.experiment}: {name}"}
        paths.append(emit_plot(spec, os.path.join(out, f"{report.experiment}_{name}.svg")))
    return paths


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _lpp_top(alpha, N, seed):
    return flat_lpp_field(gen_environment(alpha, "exponential", seed=seed, size=N)).at(1, 1)


def _drift_cases(ctx, default_cases):
    return [ctx.cfg.drifts] if ctx.cfg.drifts is not None else default_cases


def _tag(alpha) -> str:
    return "a" + "_".join(f"{a:g}" for a in alpha)


# ---------------------------------------------------------------------------
# the twelve acceptance experiments
# ---------------------------------------------------------------------------

@register("exp_sup", 1, "n=1 wall system at large T vs Exp(2 alpha)",
          {"ks_D": 0.02}, n=1, drifts=(1.0,), N_samples=10_000, T=30.0, dt=1e-2)
def _exp_sup(ctx):
    c = ctx.cfg
    (a,) = c.drifts[:1]
    paths = sample_path_bundle((a,), c.T, c.dt, seed=ctx.seed("paths"), replicas=c.N_samples)
    y = wall_trajectory(paths, "bridge", record=False)[:, 0]
    D, p = ks_one_sample(y, lambda x: 1 - np.exp(-2 * a * x))
    ctx.metric("ks_p", p)
    ctx.check("ks_D", D)
    ctx.keep("terminal", wall=y, exponential=substream(ctx.seed("ref"), "exp").exponential(1 / (2 * a), y.size))


@register("wall_vs_lpp", 2, "wall system terminal vector vs flat LPP row (marginals and joint)",
          {"max_marginal_ks_D": 0.02, "min_energy_p": 0.01},
          n=3, N_samples=20_000, T=30.0, dt=1e-2)
def _wall_vs_lpp(ctx):
    c = ctx.cfg
    cases = _drift_cases(ctx, [(1.0, 1.0), (1.0, 1.0, 1.0), (0.7, 1.0), (0.7, 1.0, 1.6)])
    worst_D, worst_p = 0.0, 1.0
    for alpha in cases:
        n = len(alpha)
        tag = _tag(alpha)
        paths = sample_path_bundle(alpha, c.T, c.dt, seed=ctx.seed("paths", tag), replicas=c.N_samples)
        Y = wall_trajectory(paths, "bridge", record=False)
        G = flat_lpp_field(gen_environment(alpha, "exponential", seed=ctx.seed("lpp", tag),
                                           size=10 * c.N_samples)).top_row()
        for k in range(n):
            D, _ = ks_two_sample(Y[:, k], G[:, k])
            ctx.metric(f"{tag}_Y{k + 1}_ks_D", D)
            worst_D = max(worst_D, D)
        m = min(5000, c.N_samples)
        stat, p = energy_distance(Y[:m], G[:m], permutations=199, seed=ctx.seed("perm", tag))
        ctx.metric(f"{tag}_energy_stat", stat)
        ctx.metric(f"{tag}_energy_p", p)
        worst_p = min(worst_p, p)
        ctx.keep(f"{tag}_top", wall=Y[:, -1], lpp=G[:, -1])
    ctx.check("max_marginal_ks_D", worst_D)
    ctx.check("min_energy_p", worst_p, ">")


@register("sup_lambda_max", 3, "sup of the top eigenvalue of H(t) - tD vs flat LPP G(1,1)",
          {"ks_D": 0.025}, n=2, drifts=(0.7, 1.6), N_samples=10_000, T=30.0, dt=1e-3)
def _sup_lambda(ctx):
    c = ctx.cfg
    cfg = HermitianPathConfig(len(c.drifts), c.T, c.dt, c.drifts, seed=ctx.seed("gue"),
                              replicas=c.N_samples, scheme="bridge")
    s = sup_lambda_max(cfg)
    D, p = ks_one_sample(s, lambda x: det.eval_cdf_top(c.drifts, np.maximum(x, 0)))
    ctx.metric("ks_p", p)
    ctx.check("ks_D", D)
    ctx.keep("sup", matrix=s, lpp=_lpp_top(c.drifts, s.size, ctx.seed("lpp")))


@register("polymer_integral", 4, "integrated Brownian partition function vs log-gamma; Dufresne",
          {"ks_D": 0.02, "dufresne_ks_D": 0.02},
          n=2, drifts=(0.8, 1.3), N_samples=10_000, T=400.0, dt=1e-2)
def _polymer_integral(ctx):
    c = ctx.cfg
    alpha = c.drifts
    # Z_n is driven by B_i with drift alpha_{n-i+1}
    paths = sample_path_bundle(alpha[::-1], c.T, c.dt, seed=ctx.seed("paths"), replicas=c.N_samples)
    ip = integrated_partition(paths, T=5.0, tail_tol=1e-4)
    zeta = np.exp(loggamma_partition_field(
        gen_environment(alpha, "inverse_gamma", seed=ctx.seed("field"), size=10 * c.N_samples)).at(1, 1))
    D, _ = ks_two_sample(ip.value, 2 * zeta)
    ctx.metric("max_horizon", float(ip.horizon.max()))
    ctx.check("ks_D", D)
    mu = alpha[0]
    pd = sample_path_bundle((mu,), c.T, c.dt, seed=ctx.seed("dufresne"), replicas=c.N_samples)
    v = 2 * integrated_partition(pd, T=5.0, tail_tol=1e-4, beta=2.0).value
    D2, _ = ks_one_sample(v, sps.invgamma(mu).cdf)
    ctx.check("dufresne_ks_D", D2)
    ctx.keep("integral", brownian=ip.value, loggamma=2 * zeta[: ip.value.size])


@register("density_normalization", 5, "exact total mass of the invariant densities",
          {"max_discrepancy": 1e-10}, n=3)
def _density_normalization(ctx):
    nmax = ctx.cfg.n
    worst = 0.0
    for n in range(1, nmax + 1):
        e = abs(float(det.pi_bar_normalization(n)) - 1)
        ctx.metric(f"pi_bar_n{n}", e)
        worst = max(worst, e)
    cases = _drift_cases(ctx, [(0.7,), (0.7, 1.6), (0.7, 1.0, 1.6), (0.4, 1.1, 2.5)])
    gen = substream(ctx.seed("drifts"), "random")
    cases = list(cases) + [tuple(np.round(gen.uniform(0.3, 2.5, k), 3)) for k in range(2, nmax + 1)]
    for alpha in cases:
        if len(alpha) > nmax or len(set(alpha)) < len(alpha):
            continue
        e = abs(float(det.pi_distinct_normalization(alpha)) - 1)
        e2 = abs(float(det.exp_det_normalization(alpha)) - 1)
        ctx.metric(f"pi_{_tag(alpha)}", e)
        ctx.metric(f"exp_det_{_tag(alpha)}", e2)
        worst = max(worst, e, e2)
    ctx.metric("pi_quadrature_a0.7_1.6", abs(det.quad_w2plus(lambda p: det.eval_pi((0.7, 1.6), p), L=20.0) - 1))
    ctx.check("max_discrepancy", worst)


def _operator_residuals(gen) -> float:
    worst = 0.0
    x = np.linspace(0.0, 6.0, 25)
    for _ in range(20):
        rates = -gen.uniform(0.5, 3.0, 3)
        coef = gen.normal(size=3)
        pw = gen.integers(0, 3, 3)
        f = ExpPoly([(float(cc), int(k), float(r)) for cc, k, r in zip(coef, pw, rates)])
        a, a2 = (float(v) for v in gen.uniform(-0.4, 0.4, 2))
        b = float(gen.uniform(-1.0, 1.0))
        fo = f.as_one_sided()
        res = [
            f.J(a).D(a)(x) + f(x),  # D^a J^a f = -f
            fo.I(b).D(b)(x) - fo(x),  # D^b I^b f = f
            f.J(a).J(a2)(x) - f.J(a2).J(a)(x),
            fo.I(b)(x) - fo.convolve(ExpPoly.exp(b, one_sided=True))(x),
        ]
        scale = 1 + np.max(np.abs(f(x)))
        worst = max(worst, max(float(np.max(np.abs(r))) for r in res) / scale)
    return worst


@register("kernel_identities", 6, "exact chain kernels, operator identities and Andreief variants",
          {"q1_vs_product": 1e-10, "q1q1_vs_q2": 1e-9, "operator_identities": 1e-12, "andreief": 1e-10})
def _kernel_identities(ctx):
    gen = substream(ctx.seed("points"), "kernel")
    worst = 0.0
    for rates in [(0.7, 1.6), (1.0, 1.0), (0.5, 1.2, 2.0), (1.0, 1.0, 1.0)]:
        n = len(rates)
        for _ in range(40):
            x = np.sort(gen.uniform(-1, 2, n))
            y = np.sort(gen.uniform(-1, 4, n))
            q, p = det.eval_Q_m(rates, 1, x, y), det.eval_onestep_product(rates, x, y)
            worst = max(worst, abs(q - p) / max(1.0, abs(p)))
    ctx.check("q1_vs_product", worst)
    worst = 0.0
    for rates in [(0.7, 1.6), (1.0, 1.0)]:
        for _ in range(6):
            x = np.sort(gen.uniform(-0.5, 1.0, 2))
            y = x + np.sort(gen.uniform(0.2, 2.5, 2))
            y = np.sort(y)
            conv, q2 = det.chain_convolution_check(rates, x, y)
            worst = max(worst, abs(conv - q2))
    ctx.check("q1q1_vs_q2", worst)
    ctx.check("operator_identities", _operator_residuals(gen))
    one = lambda k, r: ExpPoly.monomial(k, 1, one_sided=True).times_exp(r)
    whole = lambda r: ExpPoly.exp(r)
    worst = 0.0
    for n in (1, 2, 3):
        f = [one(i, -Fraction(1 + i, 2)) for i in range(n)]
        g = [whole(-Fraction(2 + j, 1)) for j in range(n)]
        f0 = [one(i + 1, -Fraction(1 + i, 2)) for i in range(n)]
        rates = [Fraction(1, 3), Fraction(1, 2), Fraction(3, 4)][:n]
        for variant, ff in (("plain", f), ("derivative", f), ("inhomogeneous", f0)):
            r = det.andreief_check(ff, g, n, variant=variant, rates=rates if variant == "inhomogeneous" else None)
            ctx.metric(f"andreief_{variant}_n{n}", abs(float(r)))
            worst = max(worst, abs(float(r)))
    ctx.check("andreief", worst)


@register("rt_stationarity", 7, "stationarity of r_t by quadrature; n=1 oracle agreement",
          {"stationarity_rel_err": 1e-4, "oracle_abs_err": 1e-10})
def _rt_stationarity(ctx):
    gen = substream(ctx.seed("points"), "rt")
    worst = 0.0
    for alpha in _drift_cases(ctx, [(0.7, 1.6), (1.0, 1.0)]):
        if len(alpha) != 2:
            raise ConfigError("stationarity quadrature is implemented for n = 2")
        for t in (0.5, 1.0):
            for _ in range(3):
                y = np.sort(gen.uniform(0.05, 3.0, 2))
                worst = max(worst, det.stationarity_residual(alpha, t, y))
    ctx.check("stationarity_rel_err", worst)
    worst = 0.0
    for _ in range(30):
        a = float(gen.uniform(0.1, 2.0))
        t = float(gen.uniform(0.1, 3.0))
        x, y = gen.uniform(0.0, 3.0, 2)
        r = det.eval_r_t((a,), t, [x], [y])
        worst = max(worst, abs(r - det.reflected_density_oracle(a, t, x, y)),
                    abs(r - det.reflected_density_closed(a, t, x, y)))
    ctx.check("oracle_abs_err", worst)


@register("cdf_consistency", 8, "Wronskian vs Toda CDF; CDF vs empirical G(1,1)",
          {"wronskian_vs_toda": 1e-8, "ecdf_sup_diff": 0.01}, n=4, N_samples=100_000)
def _cdf_consistency(ctx):
    c = ctx.cfg
    grid = np.concatenate([np.linspace(0.05, 2.0, 40), np.linspace(2.0, 15.0, 40)[1:]])
    worst = 0.0
    for n in range(1, c.n + 1):
        w = det.eval_cdf_top((1.0,) * n, grid)
        t = det.eval_cdf_toda(n, grid)
        d = float(np.max(np.abs(w - t)))
        ctx.metric(f"wronskian_vs_toda_n{n}", d)
        worst = max(worst, d)
    ctx.check("wronskian_vs_toda", worst)
    worst = 0.0
    for alpha in _drift_cases(ctx, [(1.0, 1.0, 1.0), (0.7, 1.0, 1.6)]):
        g = _lpp_top(alpha, c.N_samples, ctx.seed("lpp", _tag(alpha)))
        D, _ = ks_one_sample(g, lambda x: det.eval_cdf_top(alpha, x))
        ctx.metric(f"ecdf_{_tag(alpha)}", D)
        worst = max(worst, D)
    ctx.check("ecdf_sup_diff", worst)


@register("matrix_bridges", 9, "LOE and perturbed symmetric LUE vs flat LPP",
          {"loe_ks_D": 0.025, "lue_chi2_p": 0.01, "lue_max_ks_D": 0.025}, N_samples=100_000)
def _matrix_bridges(ctx):
    N = ctx.cfg.N_samples
    loe = sample_loe(3, seed=ctx.seed("loe"), size=N)[:, -1]
    g = 4 * _lpp_top((1.0, 1.0, 1.0), N, ctx.seed("lpp"))
    D, _ = ks_two_sample(loe, g)
    ctx.check("loe_ks_D", D)
    ctx.keep("loe", loe=loe, lpp4=g)
    alpha2 = (0.7, 1.6)
    ev = sample_sym_lue(alpha2, seed=ctx.seed("lue2"), size=N)
    stat, p = chi2_ordered_pairs(ev, lambda pts: det.eval_exp_det_density_batch(alpha2, pts))
    ctx.metric("lue_chi2_stat", stat)
    ctx.check("lue_chi2_p", p, ">")
    alpha3 = (0.7, 1.0, 1.6)
    xm = sample_sym_lue(alpha3, seed=ctx.seed("lue3"), size=N)[:, -1]
    D, _ = ks_one_sample(xm, lambda x: det.eval_cdf_top(alpha3, np.maximum(x, 0) / 2))
    ctx.check("lue_max_ks_D", D)


@register("x_array_stationarity", 10, "X-array after burn-in vs log-gamma field; stationarity preserved",
          {"burnin_ks_D": 0.025, "preservation_ks_D": 0.02},
          n=2, drifts=(0.8, 1.3), N_samples=10_000, T=50.0, dt=1e-2)
def _x_array(ctx):
    c = ctx.cfg
    alpha = c.drifts
    cells = triangle_cells(len(alpha))
    xi = loggamma_partition_field(gen_environment(alpha, "inverse_gamma", seed=ctx.seed("ref"), size=10 * c.N_samples))
    res = x_array_simulate(alpha, c.T, c.dt, seed=ctx.seed("burnin"), replicas=c.N_samples)
    worst = 0.0
    for (i, j) in cells:
        D, _ = ks_two_sample(res.cell(i, j)[:, -1], xi.at(i, j))
        ctx.metric(f"burnin_{i}{j}_ks_D", D)
        worst = max(worst, D)
    ctx.metric("taming_fraction", res.taming_fraction)
    ctx.check("burnin_ks_D", worst)
    ctx.keep("x11", xarray=res.cell(1, 1)[:, -1], loggamma=xi.at(1, 1))
    init = loggamma_partition_field(gen_environment(alpha, "inverse_gamma", seed=ctx.seed("init"), size=c.N_samples)).xi
    run = x_array_simulate(alpha, 5.0, c.dt, seed=ctx.seed("preserve"), init=init, replicas=c.N_samples)
    worst = 0.0
    for (i, j) in cells:
        D, _ = ks_two_sample(run.cell(i, j)[:, 0], run.cell(i, j)[:, -1])
        worst = max(worst, D)
    ctx.check("preservation_ks_D", worst)


@register("drift_potential", 11, "gradient decomposition and orthogonality at random states",
          {"sum_plus_grad": 1e-10, "orthogonality": 1e-10, "analytic_divergence": 1e-10,
           "fd_divergence": 1e-6, "symbolic_divergence_nonzero": 0.5},
          n=3, drifts=(0.7, 1.0, 1.6), N_samples=100)
def _drift_potential(ctx):
    c = ctx.cfg
    alpha = c.drifts
    n = len(alpha)
    states = loggamma_partition_field(
        gen_environment(alpha, "inverse_gamma", seed=ctx.seed("states"), size=c.N_samples)).xi
    regions = [None]
    if n >= 2:
        # the line plus everything below the first row
        regions.append({(i, j) for (i, j) in triangle_cells(n) if i >= 2 or i + j == n + 1})
    w = {"sum_plus_grad": 0.0, "orthogonality": 0.0, "analytic_divergence": 0.0, "fd_divergence": 0.0}
    sym = 0.0
    for S in regions:
        model = XArrayModel(alpha, S)
        e = model.evaluate(states)
        w["sum_plus_grad"] = max(w["sum_plus_grad"], float(np.max(np.abs(e["b"] + e["a"] + e["gradV"]))))
        w["orthogonality"] = max(w["orthogonality"], float(np.max(np.abs(np.sum(e["d"] * e["gradV"], axis=-1)))))
        w["analytic_divergence"] = max(w["analytic_divergence"], float(np.max(np.abs(model.divergence(states)))))
        w["fd_divergence"] = max(w["fd_divergence"], float(np.max(np.abs(finite_diff_divergence(model, states)))))
        sym = max(sym, 0.0 if model.symbolic_divergence() == 0 else 1.0)
    for k, v in w.items():
        ctx.check(k, v)
    ctx.check("symbolic_divergence_nonzero", sym)


@register("slopes_symmetry_beta", 12, "LLN slopes of the Z-array; symmetrization identity; beta scan",
          {"max_slope_error": 0.05, "symmetrization_rel_err": 1e-12, "gap_increase": 1e-9,
           "gap_not_decreasing": 0.5},
          drifts=(0.7, 1.0, 1.6), N_samples=100, T=200.0, dt=1e-2,
          beta_list=(0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0))
def _slopes(ctx):
    c = ctx.cfg
    alpha = c.drifts
    paths = sample_path_bundle(alpha, c.T, c.dt, seed=ctx.seed("paths"), replicas=c.N_samples)
    Z, _ = triangular_sup_trajectory(paths, "grid")
    worst = 0.0
    for key, slope in z_slopes(alpha).items():
        err = abs(float(np.mean(Z[key])) / c.T - slope)
        ctx.metric(f"slope_{key[0]}{key[1]}_err", err)
        worst = max(worst, err)
    ctx.check("max_slope_error", worst)
    worst = 0.0
    for n in (1, 2, 3):
        a = tuple(np.round(substream(ctx.seed("sym"), n).uniform(0.3, 2.0, n), 3))
        env = gen_environment(a, "exponential", seed=ctx.seed("sym-env", n), size=500)
        p2p = p2p_symmetric_lpp(env, check=False)
        flat = flat_lpp_field(env).at(1, 1)
        worst = max(worst, float(np.max(np.abs(p2p - 2 * flat) / np.abs(2 * flat))))
        for k in range(3):
            bf = flat_lpp_bruteforce(env.weights[k], n)
            worst = max(worst, abs(bf - flat[k]) / abs(bf))
    ctx.check("symmetrization_rel_err", worst)
    scan_paths = sample_path_bundle(alpha[:2], 1.0, 1e-3, seed=ctx.seed("scan"), replicas=200)
    vals, ref = zero_temp_scan(scan_paths, c.beta_list)
    gaps = np.stack([ref - v for v in vals])
    ctx.metric("mean_gap_first", float(gaps[0].mean()))
    ctx.metric("mean_gap_last", float(gaps[-1].mean()))
    ctx.check("gap_increase", max(0.0, float(np.max(np.diff(gaps, axis=0)))))
    ctx.check("gap_not_decreasing", float(not np.all(np.diff(gaps.mean(axis=1)) < 0)))


# ---------------------------------------------------------------------------
# further experiments (not part of the acceptance list)
# ---------------------------------------------------------------------------

@register("time_reversal", None, "Y_n(t) vs int_0^t Z_n with reversed drifts",
          {"ks_D": 0.02}, drifts=(0.8, 1.3), N_samples=10_000, T=10.0, dt=1e-2)
def _time_reversal(ctx):
    c = ctx.cfg
    alpha = c.drifts
    py = sample_path_bundle(alpha, c.T, c.dt, seed=ctx.seed("y"), replicas=c.N_samples)
    Y = np.exp(brownian_partition_trajectory(py)["logY"][:, -1])
    pz = sample_path_bundle(alpha[::-1], c.T, c.dt, seed=ctx.seed("z"), replicas=c.N_samples)
    ip = np.exp(_integrate_z_to(pz))
    D, _ = ks_two_sample(Y, ip)
    ctx.check("ks_D", D)
    ctx.keep("terminal", Y=Y, integral=ip)


def _integrate_z_to(paths: PathBundle):
    """``log int_0^T Z_n`` on the bundle's full horizon."""
    traj = brownian_partition_trajectory(paths, record=True)["logZ"][..., -1]
    h = paths.dt
    lw = np.full(traj.shape[-1], math.log(h))
    lw[0] = lw[-1] = math.log(h / 2)
    with np.errstate(invalid="ignore"):
        return logsumexp(traj + lw, axis=-1)


@register("chain_density", None, "two-step pushing chain vs the Q_2 kernel (chi-square)",
          {"chi2_p": 0.01}, drifts=(0.7, 1.6), N_samples=100_000)
def _chain_density(ctx):
    from .lpp import particle_chain_run

    c = ctx.cfg
    rates = c.drifts
    if len(rates) != 2:
        raise ConfigError("chain_density uses two particles")
    pos = particle_chain_run(rates, 2, (0.0, 0.0), seed=ctx.seed("chain"), size=c.N_samples)[:, -1, :]
    stat, p = chi2_ordered_pairs(pos, lambda pts: _q2_batch(rates, pts))
    ctx.metric("chi2_stat", stat)
    ctx.check("chi2_p", p, ">")
    ctx.keep("positions", first=pos[:, 0], second=pos[:, 1])


def _q2_batch(rates, pts):
    flat = pts.reshape(-1, 2)
    vals = np.array([det.eval_Q_m(rates, 2, (0.0, 0.0), y) for y in flat])
    return vals.reshape(pts.shape[:-1])


def list_experiments() -> list:
    return sorted(REGISTRY.values(), key=lambda e: (e.criterion is None, e.criterion or 0, e.name))
