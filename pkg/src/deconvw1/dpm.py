"""Gibbs sampler for Dirichlet-process mixtures of normals observed through
standard Laplace noise.

Model: Y_i = X_i + eps_i with eps_i standard Laplace, X_i ~ N(mu_{c_i},
sigma^2), cluster locations mu_j drawn from an exponential-power base
density, partitions from the Chinese restaurant process, and sigma from a
spliced inverse-gamma / Weibull prior.  The Laplace noise is handled by the
exact normal scale-mixture augmentation eps = sqrt(2 W) Z with W ~ Exp(1),
which makes every signal update conjugate and keeps sweeps O(n).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfcx, gammaln, ndtr

from .errors import EmptyChain
from .grids import GridFunction1D, cumulative_cdf

_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class DPMPrior:
    """Hyperparameters of the mixture prior.

    ``iota``/``b0`` select the exponential-power base density
    h0(u) proportional to exp(-b0 |u|^iota), iota in {1, 2}.  The sigma
    prior is inverse-gamma IG(1, zeta) on (0, 1] spliced continuously with
    a Weibull(scale zeta, shape nu) on (1, infinity).
    """

    dp_mass: float = 1.0
    iota: int = 2
    b0: float = 0.5
    zeta: float = 1.0
    nu: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.dp_mass <= 0 or self.b0 <= 0 or self.zeta <= 0 or self.nu <= 0:
            raise ValueError("all prior parameters must be positive")
        if self.iota not in (1, 2):
            raise ValueError("iota must be 1 or 2")

    # -- base measure --------------------------------------------------------

    @property
    def base_sd(self) -> float:
        """Standard deviation of the Gaussian base (iota=2 only)."""
        return math.sqrt(1.0 / (2.0 * self.b0))

    def log_h0(self, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        if self.iota == 2:
            s = self.base_sd
            return -0.5 * (mu / s) ** 2 - math.log(s * _SQRT2PI)
        return -self.b0 * np.abs(mu) + math.log(self.b0 / 2.0)

    def sample_base(self, rng: np.random.Generator, size=None):
        if self.iota == 2:
            return rng.normal(0.0, self.base_sd, size=size)
        return rng.laplace(0.0, 1.0 / self.b0, size=size)

    # -- sigma prior ---------------------------------------------------------

    def log_pi_sigma(self, sigma: float) -> float:
        """Unnormalized log density of the spliced sigma prior."""
        if sigma <= 0:
            return -math.inf
        z, nu = self.zeta, self.nu
        if sigma <= 1.0:
            return -2.0 * math.log(sigma) - z / sigma
        # continuity constant: IG(1, zeta) density over Weibull density at 1
        log_ig1 = -z
        log_w1 = math.log(nu / z) - (nu - 1.0) * math.log(z) - (1.0 / z) ** nu
        log_kappa = log_ig1 - log_w1
        return (log_kappa + math.log(nu / z) + (nu - 1.0) * (math.log(sigma) - math.log(z))
                - (sigma / z) ** nu)

    def _sigma_cdf_table(self) -> tuple[np.ndarray, np.ndarray]:
        s = np.concatenate([np.linspace(1e-4, 1.0, 4096, endpoint=False),
                            np.linspace(1.0, 30.0, 4096)])
        logpdf = np.array([self.log_pi_sigma(v) for v in s])
        pdf = np.exp(logpdf - logpdf.max())
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(s))])
        return s, cdf / cdf[-1]

    def sample_sigma(self, rng: np.random.Generator) -> float:
        s, cdf = self._cached_table()
        return float(np.interp(rng.uniform(), cdf, s))

    def sigma_median(self) -> float:
        s, cdf = self._cached_table()
        return float(np.interp(0.5, cdf, s))

    def _cached_table(self):
        table = getattr(self, "_table", None)
        if table is None:
            table = self._sigma_cdf_table()
            object.__setattr__(self, "_table", table)
        return table

    # -- JSON wire format ----------------------------------------------------

    def to_json(self) -> dict:
        return {"dp_mass": self.dp_mass, "iota": self.iota, "b0": self.b0,
                "zeta": self.zeta, "nu": self.nu, "seed": self.seed}

    @classmethod
    def from_json(cls, obj: dict | str) -> "DPMPrior":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(dp_mass=float(obj.get("dp_mass", 1.0)), iota=int(obj.get("iota", 2)),
                   b0=float(obj.get("b0", 0.5)), zeta=float(obj.get("zeta", 1.0)),
                   nu=float(obj.get("nu", 2.0)), seed=int(obj.get("seed", 0)))


@dataclass
class DPMState:
    """Full latent state of the Gibbs chain."""

    assignments: np.ndarray
    cluster_locations: dict[int, float]
    sigma: float
    latent_x: np.ndarray
    latent_w: np.ndarray
    loglik: float = math.nan

    def copy(self) -> "DPMState":
        return DPMState(self.assignments.copy(), dict(self.cluster_locations),
                        self.sigma, self.latent_x.copy(), self.latent_w.copy(),
                        self.loglik)

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_locations)

    def location_array(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(ids, locations, counts) in id order."""
        ids = np.array(sorted(self.cluster_locations), dtype=int)
        locs = np.array([self.cluster_locations[j] for j in ids])
        counts = np.bincount(
            np.searchsorted(ids, self.assignments), minlength=len(ids))
        return ids, locs, counts


def laplace_gauss_density(x, sigma: float) -> np.ndarray:
    """Closed form of (standard Laplace * normal(0, sigma^2)) at ``x``.

    Evaluated through scaled complementary error functions so both the
    sigma -> 0 and |x| -> inf regimes stay stable; sigma = 0 returns the
    Laplace density itself.
    """
    x = np.abs(np.asarray(x, dtype=float))
    if sigma == 0.0:
        out = 0.5 * np.exp(-x)
        return out
    zp = (x + sigma * sigma) / (sigma * math.sqrt(2.0))
    gauss = np.exp(-0.5 * (x / sigma) ** 2)
    a = 0.5 * erfcx(zp) * gauss
    b = np.where(
        x >= sigma * sigma,
        np.exp(0.5 * sigma * sigma - x) * ndtr((x - sigma * sigma) / sigma),
        0.5 * erfcx(np.abs(x - sigma * sigma) / (sigma * math.sqrt(2.0))) * gauss,
    )
    return 0.5 * (a + b)


def _log_crp(counts: np.ndarray, alpha: float, n: int) -> float:
    k = len(counts)
    return (k * math.log(alpha) + float(np.sum(gammaln(counts)))
            + gammaln(alpha) - gammaln(alpha + n))


def complete_loglik(state: DPMState, Y: np.ndarray, prior: DPMPrior) -> float:
    """Joint log density of (Y, X, partition, locations, sigma).

    The Laplace noise enters through its exact density, so the value is
    invariant to the scale-mixture augmentation and to cluster relabeling.
    """
    ids, locs, counts = state.location_array()
    pos = np.searchsorted(ids, state.assignments)
    mu = locs[pos]
    n = len(Y)
    ll = float(np.sum(-np.abs(Y - state.latent_x) - math.log(2.0)))
    ll += float(np.sum(-0.5 * ((state.latent_x - mu) / state.sigma) ** 2
                       - math.log(state.sigma * _SQRT2PI)))
    ll += float(np.sum(prior.log_h0(locs)))
    ll += prior.log_pi_sigma(state.sigma)
    ll += _log_crp(counts, prior.dp_mass, n)
    return ll


def init_state(Y, prior: DPMPrior, seed, coarse: bool = False) -> DPMState:
    """Deterministic-given-seed initial state.

    ``coarse=True`` bins the data into about sqrt(n) clusters instead of
    one cluster per observation.
    """
    Y = np.asarray(Y, dtype=float).ravel()
    n = Y.size
    if n < 1:
        raise ValueError("need at least one observation")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    if coarse and n > 4:
        k = max(1, int(round(math.sqrt(n))))
        edges = np.quantile(Y, np.linspace(0, 1, k + 1))
        assignments = np.clip(np.searchsorted(edges, Y, side="right") - 1, 0, k - 1)
        # relabel compactly and centre each cluster on its mean
        uniq, assignments = np.unique(assignments, return_inverse=True)
        locations = {j: float(Y[assignments == j].mean()) for j in range(len(uniq))}
    else:
        assignments = np.arange(n)
        locations = {i: float(Y[i]) for i in range(n)}
    del rng  # reserved for future randomized initializers; keeps the seed contract
    state = DPMState(
        assignments=assignments,
        cluster_locations=locations,
        sigma=prior.sigma_median(),
        latent_x=Y.copy(),
        latent_w=np.ones(n),
        loglik=math.nan,
    )
    state.loglik = complete_loglik(state, Y, prior)
    return state


# -- Gibbs sub-steps ---------------------------------------------------------


def _update_w(state: DPMState, Y: np.ndarray, rng: np.random.Generator) -> None:
    """W_i | rest: generalized inverse Gaussian via the Wald distribution.

    p(w | u) is proportional to w^(-1/2) exp(-u^2/(4w) - w); 1/W follows an
    inverse Gaussian with mean 2/|u| and shape 2.  At u = 0 the density
    degenerates to Gamma(1/2, 1).
    """
    u = np.abs(Y - state.latent_x)
    w = np.empty_like(u)
    tiny = u < 1e-12
    if np.any(~tiny):
        v = rng.wald(2.0 / u[~tiny], 2.0)
        w[~tiny] = 1.0 / v
    if np.any(tiny):
        w[tiny] = rng.gamma(0.5, 1.0, size=int(tiny.sum()))
    state.latent_w = np.clip(w, 1e-300, None)


def _update_x(state: DPMState, Y: np.ndarray, rng: np.random.Generator) -> None:
    """X_i | rest: conjugate normal with observation variance 2 W_i."""
    ids, locs, _ = state.location_array()
    mu = locs[np.searchsorted(ids, state.assignments)]
    prec = 1.0 / (2.0 * state.latent_w) + 1.0 / state.sigma**2
    mean = (Y / (2.0 * state.latent_w) + mu / state.sigma**2) / prec
    state.latent_x = mean + rng.normal(size=len(Y)) / np.sqrt(prec)


def _update_assignments(state: DPMState, prior: DPMPrior,
                        rng: np.random.Generator, n_aux: int = 3) -> None:
    """Auxiliary-cluster Chinese-restaurant update of the partition."""
    x = state.latent_x
    sigma = state.sigma
    alpha = prior.dp_mass
    locs = dict(state.cluster_locations)
    assign = state.assignments
    counts: dict[int, int] = {}
    for c in assign:
        counts[int(c)] = counts.get(int(c), 0) + 1
    next_id = max(locs) + 1 if locs else 0
    log_alpha_m = math.log(alpha / n_aux)
    for i in range(len(x)):
        ci = int(assign[i])
        counts[ci] -= 1
        singleton_mu = None
        if counts[ci] == 0:
            singleton_mu = locs.pop(ci)
            del counts[ci]
        ids = np.fromiter(locs.keys(), dtype=int, count=len(locs))
        mus = np.fromiter(locs.values(), dtype=float, count=len(locs))
        cts = np.array([counts[j] for j in ids], dtype=float)
        aux_mus = prior.sample_base(rng, size=n_aux)
        if singleton_mu is not None:
            aux_mus[0] = singleton_mu
        all_mu = np.concatenate([mus, aux_mus])
        logw = -0.5 * ((x[i] - all_mu) / sigma) ** 2
        logw[: len(ids)] += np.log(cts)
        logw[len(ids):] += log_alpha_m
        logw -= logw.max()
        w = np.exp(logw)
        pick = int(rng.choice(len(all_mu), p=w / w.sum()))
        if pick < len(ids):
            cj = int(ids[pick])
        else:
            cj = next_id
            next_id += 1
            locs[cj] = float(all_mu[pick])
            counts[cj] = 0
        assign[i] = cj
        counts[cj] += 1
    state.cluster_locations = locs
    state.assignments = assign


def _update_locations(state: DPMState, prior: DPMPrior, rng: np.random.Generator) -> None:
    """mu_j | rest: conjugate normal when iota=2, slice sampling when iota=1."""
    ids, locs, counts = state.location_array()
    pos = np.searchsorted(ids, state.assignments)
    sums = np.bincount(pos, weights=state.latent_x, minlength=len(ids))
    sigma2 = state.sigma**2
    if prior.iota == 2:
        prior_var = prior.base_sd**2
        var = 1.0 / (counts / sigma2 + 1.0 / prior_var)
        mean = (sums / sigma2) * var
        new = mean + rng.normal(size=len(ids)) * np.sqrt(var)
    else:
        new = np.empty(len(ids))
        for k, j in enumerate(ids):
            xbar = sums[k] / counts[k]

            def logf(mu, _n=counts[k], _xbar=xbar):
                return -prior.b0 * abs(mu) - 0.5 * _n * (mu - _xbar) ** 2 / sigma2

            new[k] = _slice_sample(logf, locs[k], 3.0 * state.sigma / math.sqrt(counts[k]), rng)
    state.cluster_locations = {int(j): float(v) for j, v in zip(ids, new)}


def _slice_sample(logf, x0: float, width: float, rng: np.random.Generator,
                  max_steps: int = 64) -> float:
    """One univariate slice-sampling transition (stepping out + shrinkage)."""
    logy = logf(x0) - rng.exponential()
    lo = x0 - width * rng.uniform()
    hi = lo + width
    for _ in range(max_steps):
        if logf(lo) < logy:
            break
        lo -= width
    for _ in range(max_steps):
        if logf(hi) < logy:
            break
        hi += width
    for _ in range(max_steps):
        x1 = rng.uniform(lo, hi)
        if logf(x1) >= logy:
            return x1
        if x1 < x0:
            lo = x1
        else:
            hi = x1
    return x0


def _update_sigma(state: DPMState, prior: DPMPrior, rng: np.random.Generator,
                  step: float = 0.3) -> bool:
    """sigma | rest: random-walk Metropolis on log sigma."""
    ids, locs, _ = state.location_array()
    mu = locs[np.searchsorted(ids, state.assignments)]
    resid2 = float(np.sum((state.latent_x - mu) ** 2))
    n = len(state.latent_x)

    def logpost(sig: float) -> float:
        return (prior.log_pi_sigma(sig) - n * math.log(sig)
                - 0.5 * resid2 / sig**2)

    cur = math.log(state.sigma)
    prop = cur + step * rng.normal()
    # include the log-scale Jacobian on both sides
    log_acc = (logpost(math.exp(prop)) + prop) - (logpost(state.sigma) + cur)
    if math.log(rng.uniform()) < log_acc:
        state.sigma = math.exp(prop)
        return True
    return False


def gibbs_sweep(state: DPMState, Y, prior: DPMPrior, seed,
                sigma_step: float = 0.3) -> tuple[DPMState, bool]:
    """One full Gibbs sweep; returns the new state and the sigma-step flag.

    ``seed`` may be an integer or a Generator; the input state is not
    mutated.
    """
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    Y = np.asarray(Y, dtype=float).ravel()
    new = state.copy()
    _update_w(new, Y, rng)
    _update_x(new, Y, rng)
    _update_assignments(new, prior, rng)
    _update_locations(new, prior, rng)
    accepted = _update_sigma(new, prior, rng, step=sigma_step)
    new.loglik = complete_loglik(new, Y, prior)
    return new, accepted


@dataclass
class ChainSummary:
    """Kept states plus per-iteration traces and acceptance rates."""

    states: list[DPMState]
    traces: dict[str, np.ndarray]
    acceptance: dict[str, float]
    n: int
    prior: DPMPrior


def run_chain(Y, prior: DPMPrior, iters: int, burnin: int = 0, thin: int = 1,
              seed=0, coarse_init: bool = True) -> ChainSummary:
    """Run the Gibbs chain; deterministic given the seed."""
    if not iters > burnin >= 0:
        raise ValueError("need iters > burnin >= 0")
    if thin < 1:
        raise ValueError("thin must be at least 1")
    Y = np.asarray(Y, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    state = init_state(Y, prior, rng, coarse=coarse_init)
    kept: list[DPMState] = []
    loglik = np.empty(iters)
    sigma = np.empty(iters)
    kclust = np.empty(iters, dtype=int)
    accepted = 0
    for it in range(iters):
        state, acc = gibbs_sweep(state, Y, prior, rng)
        accepted += acc
        loglik[it] = state.loglik
        sigma[it] = state.sigma
        kclust[it] = state.n_clusters
        if it >= burnin and (it - burnin) % thin == 0:
            kept.append(state.copy())
    return ChainSummary(
        states=kept,
        traces={"loglik": loglik, "sigma": sigma, "n_clusters": kclust},
        acceptance={"sigma": accepted / iters},
        n=Y.size,
        prior=prior,
    )


def _state_mixture(state: DPMState) -> tuple[np.ndarray, np.ndarray]:
    """Cluster locations and empirical weights of one state."""
    ids, locs, counts = state.location_array()
    return locs, counts / counts.sum()


def posterior_mean_mixing(chain: ChainSummary, grid: GridFunction1D) -> dict:
    """Posterior mean of the mixing density and its CDF on a grid."""
    if not chain.states:
        raise EmptyChain("no kept states")
    x = grid.x
    dens = np.zeros_like(x)
    for state in chain.states:
        locs, w = _state_mixture(state)
        z = (x[:, None] - locs[None, :]) / state.sigma
        dens += (np.exp(-0.5 * z**2) / (state.sigma * _SQRT2PI)) @ w
    dens /= len(chain.states)
    density = grid.with_values(dens, "density")
    return {"density": density, "cdf": cumulative_cdf(density)}


def posterior_predictive_density(chain: ChainSummary, grid: GridFunction1D) -> GridFunction1D:
    """Posterior mean of the observation density (noise convolved in)."""
    if not chain.states:
        raise EmptyChain("no kept states")
    x = grid.x
    dens = np.zeros_like(x)
    for state in chain.states:
        locs, w = _state_mixture(state)
        dens += laplace_gauss_density(x[:, None] - locs[None, :], state.sigma) @ w
    dens /= len(chain.states)
    return grid.with_values(dens, "density")


# -- joint-distribution correctness check ------------------------------------


def prior_joint_draw(prior: DPMPrior, n: int, rng: np.random.Generator) -> tuple[DPMState, np.ndarray]:
    """One exact draw of (latent state, data) from the augmented joint."""
    sigma = prior.sample_sigma(rng)
    assignments = np.empty(n, dtype=int)
    locations: dict[int, float] = {}
    counts: list[int] = []
    for i in range(n):
        probs = np.array(counts + [prior.dp_mass], dtype=float)
        pick = int(rng.choice(len(probs), p=probs / probs.sum()))
        if pick == len(counts):
            locations[pick] = float(prior.sample_base(rng))
            counts.append(0)
        counts[pick] += 1
        assignments[i] = pick
    mu = np.array([locations[c] for c in assignments])
    x = mu + sigma * rng.normal(size=n)
    w = rng.exponential(size=n)
    y = x + np.sqrt(2.0 * w) * rng.normal(size=n)
    state = DPMState(assignments, locations, sigma, x, w)
    return state, y


_GEWEKE_STATS = ("sigma", "n_clusters", "mean_x", "mean_w", "mean_abs_y")


def _geweke_stats(state: DPMState, y: np.ndarray) -> tuple[float, ...]:
    return (state.sigma, float(state.n_clusters), float(state.latent_x.mean()),
            float(state.latent_w.mean()), float(np.abs(y).mean()))


@dataclass
class GewekeReport:
    z_scores: dict[str, float]
    marginal_means: dict[str, float]
    successive_means: dict[str, float]
    sweeps: int
    ok: bool

    @property
    def passed(self) -> bool:
        return self.ok


def geweke_test(prior: DPMPrior, n: int = 20, sweeps: int = 10_000,
                seed=0, z_limit: float = 4.0) -> GewekeReport:
    """Joint-distribution test of the sweep against the prior simulator.

    The marginal-conditional side draws (state, data) from the augmented
    joint directly; the successive-conditional side alternates Gibbs sweeps
    with data redraws Y | X, W.  Matching means across the two simulators
    (within ``z_limit`` combined standard errors, chain side by batch
    means) is evidence every full conditional targets the right law.
    """
    rng = np.random.default_rng(seed)
    mc = np.array([_geweke_stats(*prior_joint_draw(prior, n, rng)) for _ in range(sweeps)])
    state, y = prior_joint_draw(prior, n, rng)
    sc = np.empty_like(mc)
    for it in range(sweeps):
        state, _ = gibbs_sweep(state, y, prior, rng)
        y = state.latent_x + np.sqrt(2.0 * state.latent_w) * rng.normal(size=n)
        sc[it] = _geweke_stats(state, y)
    z_scores, mmeans, smeans = {}, {}, {}
    n_batches = 50
    batches = np.array_split(sc, n_batches)
    for k, name in enumerate(_GEWEKE_STATS):
        m1 = mc[:, k].mean()
        se1 = mc[:, k].std(ddof=1) / math.sqrt(len(mc))
        bmeans = np.array([b[:, k].mean() for b in batches])
        m2 = sc[:, k].mean()
        se2 = bmeans.std(ddof=1) / math.sqrt(n_batches)
        z_scores[name] = float((m1 - m2) / math.hypot(se1, se2))
        mmeans[name] = float(m1)
        smeans[name] = float(m2)
    ok = all(abs(z) <= z_limit for z in z_scores.values())
    return GewekeReport(z_scores, mmeans, smeans, sweeps, ok)
