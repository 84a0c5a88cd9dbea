"""Experiment harness: synthetic data, estimator benchmarking with slope
fits, verification drivers, and deterministic result persistence.

Every task writes CSV results plus a ``manifest.json`` carrying the config
hash; anything timing-related goes to side files so result files are
byte-reproducible for a given seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .deconv import DeconvConfig, DeconvEstimate, deconvolve, w1_risk
from .dpm import DPMPrior, geweke_test, posterior_mean_mixing, run_chain
from .errors import ConfigError, TooFewPoints
from .grids import GridFunction1D, GridSpec, cumulative_cdf
from .kernels import KernelSpec
from .lowerbound import (
    PerturbedFamilySpec,
    default_amplitude,
    member_grid_density,
    single_flip_chi2,
    verify_family,
)
from .measures import EmpiricalMeasure
from .mixtures import GaussianMixture1D
from .noise import NoiseModel, sample_noise
from .wasserstein import w1_cdf

# -- deterministic seed derivation --------------------------------------------

_MASK = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *indices: int) -> int:
    """Stable per-run seed: extending a ladder never reshuffles old runs."""
    s = _splitmix64(master & _MASK)
    for ix in indices:
        s = _splitmix64(s ^ _splitmix64((ix + 1) & _MASK))
    return s


# -- truth specifications ------------------------------------------------------


@dataclass(frozen=True)
class TruthSpec:
    """Named sampleable truth, or a sample file fallback."""

    name: str | None = "gaussian"
    params: dict = field(default_factory=dict)
    sample_file: str | None = None

    @classmethod
    def from_json(cls, obj: dict) -> "TruthSpec":
        if "sample_file" in obj:
            return cls(name=None, sample_file=obj["sample_file"])
        name = obj.get("name", "gaussian")
        params = {k: v for k, v in obj.items() if k != "name"}
        if name not in ("gaussian", "gaussian-mixture", "laplace-tailed",
                        "lowerbound-family"):
            raise ConfigError(f"unknown truth spec {name!r}")
        return cls(name=name, params=params)

    @property
    def named(self) -> bool:
        return self.name is not None

    def _mixture(self) -> GaussianMixture1D:
        if self.name == "gaussian":
            return GaussianMixture1D.single(self.params.get("mean", 0.0),
                                            self.params.get("sd", 1.0))
        return GaussianMixture1D(tuple(self.params["weights"]),
                                 tuple(self.params["means"]),
                                 tuple(self.params["sds"]))

    def _family(self) -> PerturbedFamilySpec:
        p = self.params
        amp = p.get("amplitude")
        if amp is None:
            amp = default_amplitude(p.get("r", 1.25), p.get("alpha", 1.0),
                                    p.get("buckets", 8))
        return PerturbedFamilySpec(p.get("r", 1.25), p.get("alpha", 1.0), amp,
                                   p.get("buckets", 8),
                                   tuple(p.get("theta", ())))

    def sample(self, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
        if not self.named:
            data = _read_matrix_csv(self.sample_file)
            if data.shape[0] < n:
                raise ConfigError("sample file has fewer rows than requested n")
            return data[:n, :d]
        if self.name in ("gaussian", "gaussian-mixture"):
            mix = self._mixture()
            return np.column_stack([mix.sample(n, rng) for _ in range(d)])
        if self.name == "laplace-tailed":
            s = self.params.get("scale", 1.0)
            return rng.laplace(0.0, s, size=(n, d))
        # lowerbound-family member, sampled by inverse CDF on a fine grid
        grid = GridSpec(-80.0, 160.0 / 32768, 32768).template()
        dens = member_grid_density(self._family(), grid)
        cdf = cumulative_cdf(dens)
        vals = np.real(cdf.values) / float(np.real(cdf.values[-1]))
        u = rng.uniform(size=(n, d))
        return np.interp(u, vals, cdf.x)

    def cdf_grid(self, grid: GridFunction1D) -> GridFunction1D:
        """Exact (or fine-grid) CDF for named one-dimensional truths."""
        if not self.named:
            raise ConfigError("sample-file truths have no analytic CDF")
        if self.name in ("gaussian", "gaussian-mixture"):
            return self._mixture().cdf_grid(grid)
        if self.name == "laplace-tailed":
            s = self.params.get("scale", 1.0)
            x = grid.x
            vals = np.where(x < 0, 0.5 * np.exp(x / s), 1 - 0.5 * np.exp(-x / s))
            return grid.with_values(vals, "cdf")
        dens = member_grid_density(self._family(), grid)
        cdf = cumulative_cdf(dens)
        return cdf.with_values(np.real(cdf.values) / float(np.real(cdf.values[-1])), "cdf")

    def pdf_grid(self, grid: GridFunction1D) -> GridFunction1D:
        if not self.named:
            raise ConfigError("sample-file truths have no analytic density")
        if self.name in ("gaussian", "gaussian-mixture"):
            return self._mixture().pdf_grid(grid)
        if self.name == "laplace-tailed":
            s = self.params.get("scale", 1.0)
            return grid.with_values(np.exp(-np.abs(grid.x) / s) / (2 * s), "density")
        return member_grid_density(self._family(), grid)


# -- experiment configuration --------------------------------------------------

_TASKS = ("simulate", "estimate", "benchmark-rate", "posterior",
          "verify-inversion", "verify-approx", "lowerbound-family")


@dataclass
class ExperimentConfig:
    task: str
    truth: TruthSpec = field(default_factory=TruthSpec)
    noise: NoiseModel = field(default_factory=lambda: NoiseModel("laplace"))
    dimension: int = 1
    n: int = 1000
    n_ladder: tuple[int, ...] = ()
    replications: int = 1
    seed: int = 0
    output_dir: str = "out"
    estimator: str = "kernel"
    deconv: DeconvConfig = field(default_factory=DeconvConfig)
    prior: DPMPrior = field(default_factory=DPMPrior)
    mcmc: dict = field(default_factory=lambda: {"iters": 600, "burnin": 200, "thin": 2})
    workers: int = 1
    data: str | None = None
    h_ladder: tuple[float, ...] = (0.2, 0.1, 0.05)
    pairs: int = 20
    sigma_ladder: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)
    m: int = 3
    bias_h_ladder: tuple[float, ...] = (0.1, 0.05, 0.025)
    bn_ladder: tuple[int, ...] = (4, 8, 16)
    family: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in _TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        lad = tuple(self.n_ladder)
        if lad and any(b <= a for a, b in zip(lad, lad[1:])):
            raise ConfigError("n_ladder must be strictly increasing")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.estimator not in ("kernel", "dpm"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")

    @classmethod
    def from_json(cls, obj: dict | str) -> "ExperimentConfig":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            dc = obj.get("estimator_config", {})
            grid = dc.get("grid", {})
            gspec = GridSpec(grid.get("origin", -20.0), grid.get("step", 40.0 / 4096),
                             grid.get("length", 4096))
            deconv = DeconvConfig(
                bandwidth=dc.get("bandwidth", "auto"),
                grid=gspec,
                dimension=obj.get("d", 1),
                kernel=KernelSpec(dc.get("kernel", "tau_flat_top"),
                                  dc.get("kernel_order", 2)),
                direction_net_resolution=dc.get("direction_net_resolution", 0.05),
            )
            return cls(
                task=obj["task"],
                truth=TruthSpec.from_json(obj.get("truth", {"name": "gaussian"})),
                noise=NoiseModel.from_json(obj.get("noise", {"kind": "laplace"})),
                dimension=obj.get("d", 1),
                n=obj.get("n", 1000),
                n_ladder=tuple(obj.get("n_ladder", ())),
                replications=obj.get("replications", 1),
                seed=obj.get("seed", 0),
                output_dir=obj.get("output_dir", "out"),
                estimator=obj.get("estimator", "kernel"),
                deconv=deconv,
                prior=DPMPrior.from_json(obj.get("prior", {})),
                mcmc=obj.get("mcmc", {"iters": 600, "burnin": 200, "thin": 2}),
                workers=obj.get("workers", 1),
                data=obj.get("data"),
                h_ladder=tuple(obj.get("h_ladder", (0.2, 0.1, 0.05))),
                pairs=obj.get("pairs", 20),
                sigma_ladder=tuple(obj.get("sigma_ladder", (0.4, 0.2, 0.1, 0.05))),
                m=obj.get("m", 3),
                bias_h_ladder=tuple(obj.get("bias_h_ladder", (0.1, 0.05, 0.025))),
                bn_ladder=tuple(obj.get("bn_ladder", (4, 8, 16))),
                family=obj.get("family", {}),
                raw=obj,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def config_hash(cfg: ExperimentConfig) -> str:
    body = cfg.raw if cfg.raw else {"task": cfg.task, "seed": cfg.seed}
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def write_manifest(out: Path, cfg: ExperimentConfig, outputs: list[str],
                   extra: dict | None = None) -> None:
    manifest = {
        "task": cfg.task,
        "config_hash": config_hash(cfg),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "outputs": sorted(outputs),
        "columns": {"results.csv": RESULT_COLUMNS},
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))


# -- CSV helpers ---------------------------------------------------------------


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:] if rows and not _is_number(rows[0][0]) else rows
    return np.array([[float(v) for v in r] for r in body])


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- simulate ------------------------------------------------------------------


def simulate(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Write paired X.csv / Y.csv samples; Y = X + noise row-wise."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = cfg.dimension
    rng = np.random.default_rng(derive_seed(cfg.seed, 0))
    x = cfg.truth.sample(cfg.n, d, rng)
    eps = sample_noise(cfg.noise, cfg.n, d, rng)
    y = x + eps
    _write_rows(out / "X.csv", [f"x{j+1}" for j in range(d)],
                [[float(v) for v in row] for row in x])
    _write_rows(out / "Y.csv", [f"y{j+1}" for j in range(d)],
                [[float(v) for v in row] for row in y])
    write_manifest(out, cfg, ["X.csv", "Y.csv"])
    return {"x_file": str(out / "X.csv"), "y_file": str(out / "Y.csv"), "n": cfg.n}


# -- single estimator runs -------------------------------------------------------


def _risk_pair(cfg: ExperimentConfig, est_cdf: GridFunction1D,
               x_sample: np.ndarray) -> tuple[float, float]:
    """(named-truth risk when available, empirical-sample risk)."""
    from .deconv import _step_cdf_on_grid

    emp = _step_cdf_on_grid(EmpiricalMeasure.from_samples(x_sample[:, 0]), est_cdf)
    emp_risk = w1_cdf(est_cdf, emp, warn_tails=False)
    if cfg.truth.named:
        truth_cdf = cfg.truth.cdf_grid(est_cdf)
        return w1_cdf(est_cdf, truth_cdf, warn_tails=False), emp_risk
    return emp_risk, emp_risk


def run_single(cfg: ExperimentConfig, n: int, seed: int) -> dict:
    """One estimator run; returns the result row as a dict."""
    rng = np.random.default_rng(seed)
    x = cfg.truth.sample(n, cfg.dimension, rng)
    y = x + sample_noise(cfg.noise, n, cfg.dimension, rng)
    t0 = time.perf_counter()
    if cfg.estimator == "kernel":
        est = deconvolve(y if cfg.dimension > 1 else y[:, 0], cfg.noise, cfg.deconv)
        if cfg.dimension == 1:
            risk, emp_risk = _risk_pair(cfg, est.projected_cdf, x)
            if cfg.truth.named:
                pdf = cfg.truth.pdf_grid(est.raw_density)
                l1 = float(np.trapezoid(
                    np.abs(np.real(est.raw_density.values) - np.real(pdf.values)),
                    dx=pdf.step))
            else:
                l1 = math.nan
        else:
            risk = w1_risk(est, EmpiricalMeasure.from_samples(x))
            emp_risk = risk
            l1 = math.nan
    else:
        chain = run_chain(y[:, 0], cfg.prior, seed=seed, **cfg.mcmc)
        grid = cfg.deconv.grid.template()
        post = posterior_mean_mixing(chain, grid)
        risk, emp_risk = _risk_pair(cfg, post["cdf"], x)
        if cfg.truth.named:
            pdf = cfg.truth.pdf_grid(grid)
            l1 = float(np.trapezoid(
                np.abs(np.real(post["density"].values) - np.real(pdf.values)),
                dx=pdf.step))
        else:
            l1 = math.nan
    ms = (time.perf_counter() - t0) * 1000.0
    return {"w1_risk": float(risk), "w1_risk_empirical": float(emp_risk),
            "l1_density_risk": float(l1), "runtime_ms": ms}


RESULT_COLUMNS = ["n", "rep", "seed", "w1_risk", "w1_risk_empirical", "l1_density_risk"]


def _benchmark_job(payload: tuple) -> tuple[int, int, int, dict]:
    cfg_json, n, i_n, rep = payload
    cfg = ExperimentConfig.from_json(cfg_json)
    seed = derive_seed(cfg.seed, i_n, rep)
    return i_n, rep, seed, run_single(cfg, n, seed)


def fit_slope(points) -> dict:
    """OLS of log risk on log n; ``points`` is a sequence of (n, risk)."""
    pts = [(float(n), float(r)) for n, r in points]
    ns = sorted({p[0] for p in pts})
    if len(ns) < 3:
        raise TooFewPoints("need at least 3 distinct n values")
    logn = np.log([p[0] for p in pts])
    logr = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(logn, logr, 1)
    resid = logr - (slope * logn + intercept)
    ss_tot = float(np.sum((logr - logr.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


def benchmark_rate(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Run the estimator over the n-ladder and fit the log-log risk slope."""
    if len(cfg.n_ladder) < 1:
        raise ConfigError("benchmark-rate requires a nonempty n_ladder")
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg.raw, n, i_n, rep)
            for i_n, n in enumerate(cfg.n_ladder)
            for rep in range(cfg.replications)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_benchmark_job, jobs))
    else:
        results = [_benchmark_job(j) for j in jobs]
    results.sort(key=lambda r: (r[0], r[1]))
    rows, runtimes = [], []
    for i_n, rep, seed, res in results:
        n = cfg.n_ladder[i_n]
        rows.append([n, rep, seed, res["w1_risk"], res["w1_risk_empirical"],
                     res["l1_density_risk"]])
        runtimes.append([n, rep, res["runtime_ms"]])
    _write_rows(out / "results.csv", RESULT_COLUMNS, rows)
    _write_rows(out / "runtimes.csv", ["n", "rep", "runtime_ms"], runtimes)

    medians = []
    for n in cfg.n_ladder:
        risks = [r[3] for r in rows if r[0] == n]
        medians.append(float(np.median(risks)))
    fit = fit_slope(list(zip(cfg.n_ladder, medians))) if len(cfg.n_ladder) >= 3 else None
    beta = cfg.noise.beta
    reference = -1.0 / (2.0 * beta * cfg.dimension + 1.0)
    summary = {
        "n_ladder": list(cfg.n_ladder),
        "medians": medians,
        "fitted": fit,
        "reference_slope": reference,
        "estimator": cfg.estimator,
        "results_sha256": file_sha256(out / "results.csv"),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    outputs = ["results.csv", "runtimes.csv", "summary.json"]
    if fit is not None:
        from .plots import rate_plot

        rate_plot(out / "rate.svg", list(cfg.n_ladder), medians,
                  fit["slope"], fit["intercept"], reference)
        outputs.append("rate.svg")
    write_manifest(out, cfg, outputs)
    return summary


# -- estimate ------------------------------------------------------------------


def estimate(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Deconvolve a sample file and persist density/CDF grids plus
    diagnostics."""
    if not cfg.data:
        raise ConfigError("estimate requires a 'data' CSV path")
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    y = _read_matrix_csv(cfg.data)
    t0 = time.perf_counter()
    est = deconvolve(y if cfg.dimension > 1 else y[:, 0], cfg.noise, cfg.deconv)
    ms = (time.perf_counter() - t0) * 1000.0
    outputs = []
    diagnostics = {"bandwidth": est.bandwidth, **est.diagnostics, "runtime_ms": ms}
    if cfg.dimension == 1:
        est.raw_density.write_csv(out / "density.csv")
        est.projected_cdf.write_csv(out / "cdf.csv")
        outputs += ["density.csv", "cdf.csv"]
        from .plots import density_plot

        density_plot(out / "estimate.svg",
                     [est.raw_density, est.projected_cdf],
                     ["raw density", "projected cdf"])
        outputs.append("estimate.svg")
    else:
        est.measure.write_csv(out / "measure.csv")
        outputs.append("measure.csv")
    (out / "diagnostics.json").write_text(json.dumps(diagnostics, indent=2))
    outputs.append("diagnostics.json")
    write_manifest(out, cfg, outputs)
    return diagnostics


# -- posterior -----------------------------------------------------------------


def posterior(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Run the mixture chain and persist traces, thinned states, summary."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.data:
        y = _read_matrix_csv(cfg.data)[:, 0]
        x = None
    else:
        rng = np.random.default_rng(derive_seed(cfg.seed, 0))
        x = cfg.truth.sample(cfg.n, 1, rng)
        y = (x + sample_noise(cfg.noise, cfg.n, 1, rng))[:, 0]
    chain = run_chain(y, cfg.prior, seed=cfg.seed, **cfg.mcmc)
    rows = [[i, float(chain.traces["loglik"][i]), float(chain.traces["sigma"][i]),
             int(chain.traces["n_clusters"][i])]
            for i in range(len(chain.traces["loglik"]))]
    _write_rows(out / "traces.csv", ["iter", "loglik", "sigma", "n_clusters"], rows)
    with open(out / "states.ndjson", "w") as fh:
        for st in chain.states:
            ids, locs, counts = st.location_array()
            fh.write(json.dumps({
                "sigma": st.sigma,
                "locations": [float(v) for v in locs],
                "weights": [float(c) / len(y) for c in counts],
            }) + "\n")
    grid = cfg.deconv.grid.template()
    post = posterior_mean_mixing(chain, grid)
    summary = {
        "n": int(len(y)),
        "kept_states": len(chain.states),
        "acceptance": chain.acceptance,
        "mean_clusters": float(np.mean(chain.traces["n_clusters"])),
    }
    if cfg.truth.named and not cfg.data:
        truth_cdf = cfg.truth.cdf_grid(grid)
        summary["w1_posterior_mean"] = w1_cdf(post["cdf"], truth_cdf, warn_tails=False)
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    from .plots import density_plot, trace_plot

    trace_plot(out / "traces.svg", chain.traces)
    overlays = [post["density"]]
    labels = ["posterior mean mixing"]
    if cfg.truth.named:
        overlays.append(cfg.truth.pdf_grid(grid))
        labels.append("truth")
    density_plot(out / "posterior.svg", overlays, labels)
    write_manifest(out, cfg, ["traces.csv", "states.ndjson", "summary.json",
                              "traces.svg", "posterior.svg"])
    return summary


# -- verify: inversion bound ----------------------------------------------------


def _random_mixture(rng: np.random.Generator) -> GaussianMixture1D:
    k = int(rng.integers(1, 4))
    w = rng.dirichlet(np.ones(k))
    means = rng.uniform(-2.0, 2.0, size=k)
    sds = rng.uniform(0.4, 1.2, size=k)
    return GaussianMixture1D(tuple(w), tuple(means), tuple(sds))


def verify_inversion(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Ratio-stability check of the inversion bound over random pairs."""
    from .approx import inversion_rhs_1d

    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.deconv.grid.template()
    hs = sorted(cfg.h_ladder, reverse=True)
    rows = []
    ratios = {h: [] for h in hs}
    rng = np.random.default_rng(derive_seed(cfg.seed, 42))
    for pair_ix in range(cfg.pairs):
        mix_a = _random_mixture(rng)
        mix_b = _random_mixture(rng)
        fa = mix_a.pdf_grid(grid)
        fb = mix_b.pdf_grid(grid)
        for h in hs:
            row = inversion_rhs_1d(fa, fb, cfg.noise, h)
            rows.append([pair_ix, h, row.lhs, row.bias_term, row.w1_y_term,
                         row.t_term, row.rhs, row.ratio])
            ratios[h].append(row.ratio)
    _write_rows(out / "rows.csv",
                ["pair", "h", "lhs", "bias_term", "w1_y_term", "t_term", "rhs", "ratio"],
                rows)
    max_ratios = {h: float(np.max(v)) for h, v in ratios.items()}
    finite = all(np.isfinite(v).all() for v in ratios.values())
    stable = max_ratios[hs[-1]] <= 2.0 * max_ratios[hs[0]]
    verdict = {
        "h_ladder": hs,
        "ratio_bounds": max_ratios,
        "finite": bool(finite),
        "pass": bool(finite and stable),
    }
    (out / "verdict.json").write_text(json.dumps(verdict, indent=2))
    from .plots import ladder_plot

    ladder_plot(out / "inversion.svg", hs,
                {"max ratio": [max_ratios[h] for h in hs]},
                "bandwidth h", "lhs / rhs", loglog=True)
    write_manifest(out, cfg, ["rows.csv", "verdict.json", "inversion.svg"])
    return verdict


# -- verify: approximation scaling ----------------------------------------------


def verify_approx(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Scaling checks of the series approximation and the CDF bias."""
    from .approx import approx_error_L2, cdf_bias_norm, h_m_b_sigma

    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = GridSpec(-40.0, 80.0 / 8192, 8192).template()
    f0 = GaussianMixture1D.single(0.0, 1.0).pdf_grid(grid)
    sigmas = sorted(cfg.sigma_ladder, reverse=True)
    rows = []
    errors, mass_errs = [], []
    for s in sigmas:
        err = approx_error_L2(f0, cfg.m, s)
        mass = abs(h_m_b_sigma(f0, cfg.m, 0.5, s).integral() - 1.0)
        rows.append([s, err, mass])
        errors.append(err)
        mass_errs.append(mass)
    _write_rows(out / "approx_rows.csv", ["sigma", "error_l2_sq", "mass_error"], rows)
    slope = float(np.polyfit(np.log(sigmas), np.log(errors), 1)[0])
    mass_ratios = [mass_errs[i] / mass_errs[i + 1]
                   for i in range(len(sigmas) - 1)
                   if abs(sigmas[i] / 2 - sigmas[i + 1]) < 1e-12]

    mix = GaussianMixture1D((0.5, 0.5), (-1.0, 1.0), (0.3, 0.3))
    bias_rows = []
    for h in sorted(cfg.bias_h_ladder, reverse=True):
        bias_rows.append([h, cdf_bias_norm(mix, KernelSpec("flat_top"), h,
                                           alpha=2.0, explore=True)])
    _write_rows(out / "bias_rows.csv", ["h", "cdf_bias_l1"], bias_rows)
    bias_slope = float(np.polyfit(np.log([r[0] for r in bias_rows]),
                                  np.log([r[1] for r in bias_rows]), 1)[0])
    verdict = {
        "sigma_ladder": sigmas,
        "slope_estimates": {"error_slope": slope, "bias_slope": bias_slope},
        "mass_ratios": mass_ratios,
        "pass": bool(slope >= 7.0 and all(r >= 8.0 for r in mass_ratios)
                     and bias_slope >= 2.7),
    }
    (out / "verdict.json").write_text(json.dumps(verdict, indent=2))
    from .plots import ladder_plot

    ladder_plot(out / "approx.svg", sigmas,
                {"squared error": errors, "mass error": mass_errs},
                "sigma", "error", loglog=True)
    write_manifest(out, cfg, ["approx_rows.csv", "bias_rows.csv", "verdict.json",
                              "approx.svg"])
    return verdict


# -- lower-bound family ----------------------------------------------------------


def lowerbound_family(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Generate family members, verify them, and check chi-square scaling."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = cfg.family
    r = p.get("r", 1.25)
    alpha = p.get("alpha", 1.0)
    amp = p.get("amplitude") or default_amplitude(r, alpha, max(cfg.bn_ladder))
    grid = GridSpec(-80.0, 160.0 / 16384, 16384).template()
    rng = np.random.default_rng(derive_seed(cfg.seed, 7))
    reports = {}
    outputs = []
    for bn in cfg.bn_ladder:
        theta = tuple(int(v) for v in rng.integers(0, 2, size=bn))
        spec = PerturbedFamilySpec(r, alpha, amp, bn, theta)
        dens = member_grid_density(spec, grid)
        name = f"member_b{bn}.csv"
        dens.write_csv(out / name)
        outputs.append(name)
        rep = verify_family(spec, grid)
        reports[str(bn)] = {
            "theta": list(theta),
            "is_density": rep.is_density,
            "total_mass": rep.total_mass,
            "min_value": rep.min_value,
            "m1_bound": rep.m1_bound,
            "sobolev_norm": rep.sobolev_norm,
            "tail_exponent": rep.tail_exponent,
            "pass": rep.passed,
        }
    chi2 = [single_flip_chi2(PerturbedFamilySpec(r, alpha, amp, bn, (0,) * bn),
                             cfg.noise, grid) for bn in cfg.bn_ladder]
    slope = float(np.polyfit(np.log(cfg.bn_ladder), np.log(chi2), 1)[0])
    target = -(2.0 * (alpha + cfg.noise.beta) + 1.0)
    _write_rows(out / "chi2.csv", ["buckets", "chi2"],
                [[bn, v] for bn, v in zip(cfg.bn_ladder, chi2)])
    outputs.append("chi2.csv")
    verdict = {
        "amplitude": amp,
        "members": reports,
        "chi2_slope": slope,
        "chi2_slope_target": target,
        "pass": bool(all(rep["pass"] for rep in reports.values())
                     and abs(slope - target) <= 0.5),
    }
    (out / "report.json").write_text(json.dumps(verdict, indent=2))
    outputs.append("report.json")
    from .plots import density_plot

    base = grid.with_values(
        member_grid_density(PerturbedFamilySpec(r, alpha, amp, cfg.bn_ladder[0],
                                                (0,) * cfg.bn_ladder[0]), grid).values,
        "density")
    worst = member_grid_density(
        PerturbedFamilySpec(r, alpha, amp, max(cfg.bn_ladder),
                            (1,) * max(cfg.bn_ladder)), grid)
    density_plot(out / "family.svg", [base, worst], ["base", "perturbed"])
    outputs.append("family.svg")
    write_manifest(out, cfg, outputs)
    return verdict


# -- task dispatch ----------------------------------------------------------------

TASK_RUNNERS = {
    "simulate": simulate,
    "estimate": estimate,
    "benchmark-rate": benchmark_rate,
    "posterior": posterior,
    "verify-inversion": verify_inversion,
    "verify-approx": verify_approx,
    "lowerbound-family": lowerbound_family,
}


def run_task(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    return TASK_RUNNERS[cfg.task](cfg, out_dir)
