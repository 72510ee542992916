"""Taxonomic (nested) Gibbs-type priors: simulation, likelihood and fitting.

A taxonomy is modeled level by level: the first level is a single Gibbs
process, and every observed taxon at level l-1 spawns an independent Gibbs
process over its children.  The likelihood therefore factorizes into branch
terms, so Dirichlet-process branches are fit independently, while the
Aldous-Pitman level shares a hierarchical Gamma(a, b) prior whose
hyperparameters get a Metropolis update.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.special as sps

from . import apinfer, gibbs
from .datamodel import TaxonNode, TaxonomicDataset
from .dpinfer import CoarsenedPosterior, StirlingGammaSpec, sg_posterior_sample
from .draws import PosteriorDraws
from .errors import DomainError

__all__ = [
    "LevelModel",
    "DPLevelPrior",
    "APLevelPrior",
    "TaxonomicModelSpec",
    "MCMCSettings",
    "BranchSufficientStats",
    "BranchSummary",
    "TaxonomicFit",
    "nested_urn_sample",
    "log_taxonomic_likelihood",
    "fit_taxonomic",
    "branch_summaries",
    "branch_stats",
]

Diversity = Union[float, Sequence[float], Mapping[str, float]]


@dataclass(frozen=True)
class LevelModel:
    """A level with fully specified diversities (for simulation and likelihoods).

    diversity may be a constant, a sequence cycled over branches in discovery
    order (simulation), or a mapping keyed by parent label (likelihoods).
    For the dm family `diversity` is the taxon bound H and sigma defaults to -1.
    """

    family: str
    diversity: Diversity
    sigma: Optional[float] = None
    rho: float = 1.0

    def __post_init__(self):
        if self.family not in ("dm", "dp", "ap"):
            raise DomainError(f"unknown family {self.family!r}")
        if self.family == "dm" and self.sigma is None:
            object.__setattr__(self, "sigma", -1.0)

    def model_for(self, value: float) -> gibbs.GibbsModel:
        if self.family == "dm":
            return gibbs.DirichletMultinomial(sigma=self.sigma, H=int(value))
        if self.family == "dp":
            return gibbs.DirichletProcess(alpha=value)
        return gibbs.AldousPitman(gamma=value)

    def value_for_branch(self, index: int = 0, label: Optional[str] = None) -> float:
        d = self.diversity
        if isinstance(d, Mapping):
            if label is None or label not in d:
                raise DomainError(f"no diversity value for branch {label!r}")
            return float(d[label])
        if isinstance(d, (int, float)):
            return float(d)
        seq = list(d)
        return float(seq[index % len(seq)])


def nested_urn_sample(levels: Sequence[LevelModel], n_steps: int,
                      rng_seed: int) -> TaxonomicDataset:
    """Simulate n_steps label tuples from the nested predictive scheme.

    A new taxon discovered at some level forces fresh children at every
    deeper level, which happens automatically because a new parent starts an
    empty urn whose first draw is surely new.
    """
    if n_steps < 1:
        raise DomainError("n_steps must be >= 1")
    if len(levels) < 1:
        raise DomainError("at least one level is required")
    rng = np.random.default_rng(rng_seed)
    L = len(levels)
    urns: List[Dict[str, gibbs._Urn]] = [dict() for _ in range(L)]
    discovered: List[int] = [0] * L  # per-level branch counter (for cycling values)
    labels: List[Dict[Tuple[str, int], str]] = [dict() for _ in range(L)]
    counters = [0] * L
    dataset = TaxonomicDataset(levels=L, top={})

    def branch_urn(level: int, parent_key: str) -> gibbs._Urn:
        urn = urns[level].get(parent_key)
        if urn is None:
            value = levels[level].value_for_branch(discovered[level])
            discovered[level] += 1
            urn = gibbs._Urn(levels[level].model_for(value), rng)
            urns[level][parent_key] = urn
        return urn

    for _ in range(n_steps):
        parent_key = ""
        node_map = dataset.top
        for level in range(L):
            child = branch_urn(level, parent_key).step()
            key = (parent_key, child)
            if key not in labels[level]:
                counters[level] += 1
                labels[level][key] = f"l{level + 1}_{counters[level]:05d}"
            lab = labels[level][key]
            node = node_map.setdefault(lab, TaxonNode(label=lab))
            node.count += 1
            node_map = node.children
            parent_key = f"{parent_key}/{child}"
    dataset.validate()
    return dataset


@dataclass(frozen=True)
class BranchSufficientStats:
    """Children statistics of one observed parent node."""

    label: str
    n: int
    k: int
    child_abundances: Tuple[int, ...]


def branch_stats(data: TaxonomicDataset, level: int) -> List[BranchSufficientStats]:
    """Per-parent sufficient statistics for the given level (2-based), sorted by label."""
    out = []
    for parent in data.parents_at_level(level):
        counts = tuple(sorted((c.count for c in parent.children.values()), reverse=True))
        out.append(BranchSufficientStats(label=parent.label, n=parent.count,
                                         k=len(counts), child_abundances=counts))
    return sorted(out, key=lambda b: b.label)


def log_taxonomic_likelihood(levels: Sequence[LevelModel],
                             data: TaxonomicDataset) -> float:
    """Factorized log likelihood: one tempered log V term per observed branch."""
    if len(levels) != data.levels:
        raise DomainError(f"spec has {len(levels)} levels, data has {data.levels}")
    lvl1 = levels[0]
    k1 = len(data.top)
    model1 = lvl1.model_for(lvl1.value_for_branch(0, label=""))
    total = lvl1.rho * gibbs.log_V(model1, data.n, k1)
    for level in range(2, data.levels + 1):
        lm = levels[level - 1]
        for idx, stats in enumerate(branch_stats(data, level)):
            value = lm.value_for_branch(idx, label=stats.label)
            total += lm.rho * gibbs.log_V(lm.model_for(value), stats.n, stats.k)
    return float(total)


@dataclass(frozen=True)
class DPLevelPrior:
    """Dirichlet-process level with independent Stirling-gamma branch priors."""

    sg: StirlingGammaSpec
    rho: float = 1.0


@dataclass(frozen=True)
class APLevelPrior:
    """Aldous-Pitman level with a hierarchical Gamma(a, b) prior on diversities.

    (log a, log b) gets a bivariate Gaussian hyperprior and a random-walk
    Metropolis update, scale-adapted toward 0.3 acceptance during burn-in.
    """

    hyper_mu: Tuple[float, float] = (0.0, 0.0)
    hyper_sd: float = 10.0
    rho: float = 1.0
    coarsen_mode: str = "joint"


LevelPrior = Union[DPLevelPrior, APLevelPrior]


@dataclass(frozen=True)
class TaxonomicModelSpec:
    levels: Tuple[LevelPrior, ...]

    def __post_init__(self):
        if len(self.levels) < 2:
            raise DomainError("a taxonomic model needs at least 2 levels")
        if not isinstance(self.levels[0], DPLevelPrior):
            raise DomainError("level 1 must be a Dirichlet process with an SG prior")

    @classmethod
    def default_three_level(cls, rho_species: float = 0.25) -> "TaxonomicModelSpec":
        """Family/genus/species defaults: SG(0.3, 0.1, 100) on DP levels,
        Normal((0,0), 10^2 I) hyperprior on the species-level AP diversities."""
        sg = StirlingGammaSpec(a=0.3, b=0.1, n_ref=100)
        return cls(levels=(DPLevelPrior(sg=sg),
                           DPLevelPrior(sg=sg),
                           APLevelPrior(rho=rho_species)))


@dataclass(frozen=True)
class MCMCSettings:
    iters: int = 10_000
    burn_in: int = 1_000
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iters:
            raise DomainError("need 0 <= burn_in < iters")


@dataclass
class TaxonomicFit:
    spec: TaxonomicModelSpec
    mcmc: MCMCSettings
    level1: PosteriorDraws
    branches: List[Dict[str, PosteriorDraws]]  # levels 2..L
    stats: List[Dict[str, BranchSufficientStats]]
    prior_only: List[set]
    hyper: Dict[int, Dict[str, object]]  # level -> {"a_gamma", "b_gamma", "acceptance"}


def _branch_seed(seed: int, level: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}:{level}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _fit_dp_branch(prior: DPLevelPrior, stats: BranchSufficientStats, n_draws: int,
                   seed: int, level: int) -> PosteriorDraws:
    post = CoarsenedPosterior(prior=prior.sg, n=stats.n, k=stats.k, rho=prior.rho)
    return sg_posterior_sample(post, n_draws, _branch_seed(seed, level, stats.label))


def _fit_ap_level(prior: APLevelPrior, stats: List[BranchSufficientStats],
                  mcmc: MCMCSettings, level: int) -> Tuple[Dict[str, PosteriorDraws],
                                                           Dict[str, object], set]:
    rng = np.random.default_rng(_branch_seed(mcmc.seed, level, "__hyper__"))
    rho = prior.rho
    labels = [s.label for s in stats]
    n_arr = np.array([s.n for s in stats], dtype=float)
    k_arr = np.array([s.k for s in stats], dtype=float)
    informative = n_arr >= 2  # the augmented likelihood needs two observations
    mu = np.asarray(prior.hyper_mu, dtype=float)
    sd2 = prior.hyper_sd ** 2

    n_keep = mcmc.iters - mcmc.burn_in
    gam = np.ones(len(stats))
    u = np.where(informative, np.sqrt(np.maximum(2 * n_arr - k_arr - 2, 1.0)), 1.0)
    la, lb = float(mu[0]), float(mu[1])

    def hyper_logpost(la_: float, lb_: float, gam_: np.ndarray) -> float:
        a_, b_ = math.exp(la_), math.exp(lb_)
        like = (len(gam_) * (a_ * lb_ - sps.gammaln(a_))
                + (a_ - 1.0) * np.log(gam_).sum() - b_ * gam_.sum())
        return float(like - ((la_ - mu[0]) ** 2 + (lb_ - mu[1]) ** 2) / (2.0 * sd2))

    gamma_out = np.empty((n_keep, len(stats)))
    a_out = np.empty(n_keep)
    b_out = np.empty(n_keep)
    scale = 0.5
    accepted_after_burn = 0
    shape_base = rho * (k_arr - 1.0)
    m_u = np.array([apinfer._u_conditional_power(int(s.n), int(s.k), rho,
                                                 prior.coarsen_mode)
                    if s.n >= 2 else 0.0 for s in stats])
    for it in range(mcmc.iters):
        a_cur, b_cur = math.exp(la), math.exp(lb)
        # (gamma | -) is conjugate branch by branch
        shape = a_cur + np.where(informative, shape_base, 0.0)
        rate = b_cur + np.where(informative, rho * u / math.sqrt(2.0), 0.0)
        gam = rng.gamma(shape) / rate
        # (U | -) per informative branch
        for j in np.nonzero(informative)[0]:
            u[j] = apinfer.sample_modified_half_normal(
                rng, m_u[j], 0.5 * rho, rho * gam[j] / math.sqrt(2.0))
        # Metropolis on (log a, log b)
        la_p = la + scale * rng.standard_normal()
        lb_p = lb + scale * rng.standard_normal()
        delta = hyper_logpost(la_p, lb_p, gam) - hyper_logpost(la, lb, gam)
        accept = math.log(rng.random()) < delta
        if accept:
            la, lb = la_p, lb_p
        if it < mcmc.burn_in:
            scale *= math.exp((float(accept) - 0.3) / (1.0 + it) ** 0.6)
        else:
            accepted_after_burn += int(accept)
            keep = it - mcmc.burn_in
            gamma_out[keep] = gam
            a_out[keep] = math.exp(la)
            b_out[keep] = math.exp(lb)

    branch_draws = {
        lab: PosteriorDraws(name="gamma", values=gamma_out[:, j], rho=rho,
                            seed=mcmc.seed)
        for j, lab in enumerate(labels)
    }
    hyper = {"a_gamma": a_out, "b_gamma": b_out,
             "acceptance": accepted_after_burn / max(n_keep, 1)}
    return branch_draws, hyper, {lab for lab, inf in zip(labels, informative) if not inf}


def fit_taxonomic(spec: TaxonomicModelSpec, data: TaxonomicDataset,
                  mcmc: MCMCSettings) -> TaxonomicFit:
    """Posterior sampling for every observed branch diversity.

    Dirichlet-process branches are mutually independent coarsened SG
    posteriors (fit in parallel when mcmc.threads > 1, one deterministic seed
    per branch label); each Aldous-Pitman level runs the blocked data-augmented
    Gibbs sampler with the Metropolis hyperparameter step.
    """
    if len(spec.levels) != data.levels:
        raise DomainError(f"spec has {len(spec.levels)} levels, data has {data.levels}")
    n_keep = mcmc.iters - mcmc.burn_in
    lvl1 = spec.levels[0]
    post1 = CoarsenedPosterior(prior=lvl1.sg, n=data.n, k=len(data.top), rho=lvl1.rho)
    level1 = sg_posterior_sample(post1, n_keep, _branch_seed(mcmc.seed, 1, ""))

    branches: List[Dict[str, PosteriorDraws]] = []
    all_stats: List[Dict[str, BranchSufficientStats]] = []
    prior_only: List[set] = []
    hyper: Dict[int, Dict[str, object]] = {}
    for level in range(2, data.levels + 1):
        prior = spec.levels[level - 1]
        stats = branch_stats(data, level)
        all_stats.append({s.label: s for s in stats})
        if isinstance(prior, DPLevelPrior):
            def one(s: BranchSufficientStats) -> Tuple[str, PosteriorDraws]:
                return s.label, _fit_dp_branch(prior, s, n_keep, mcmc.seed, level)

            if mcmc.threads > 1:
                with ThreadPoolExecutor(max_workers=mcmc.threads) as pool:
                    level_draws = dict(pool.map(one, stats))
            else:
                level_draws = dict(map(one, stats))
            branches.append(level_draws)
            prior_only.append({s.label for s in stats if s.n <= 1})
        else:
            level_draws, level_hyper, level_prior_only = _fit_ap_level(
                prior, stats, mcmc, level)
            branches.append(level_draws)
            hyper[level] = level_hyper
            prior_only.append(level_prior_only)
    return TaxonomicFit(spec=spec, mcmc=mcmc, level1=level1, branches=branches,
                        stats=all_stats, prior_only=prior_only, hyper=hyper)


@dataclass(frozen=True)
class BranchSummary:
    level: int
    label: str
    mean: float
    q01: float
    q99: float
    n_branch: int
    k_branch: int
    prior_only: bool


def branch_summaries(fit: TaxonomicFit) -> List[BranchSummary]:
    """Per-branch posterior mean and 98% interval, ranked within each level."""
    out: List[BranchSummary] = []
    for i, level_draws in enumerate(fit.branches):
        level = i + 2
        rows = []
        for label, draws in level_draws.items():
            stats = fit.stats[i][label]
            q01, q99 = np.quantile(draws.values, [0.01, 0.99])
            rows.append(BranchSummary(level=level, label=label,
                                      mean=float(draws.values.mean()),
                                      q01=float(q01), q99=float(q99),
                                      n_branch=stats.n, k_branch=stats.k,
                                      prior_only=label in fit.prior_only[i]))
        rows.sort(key=lambda r: (-r.mean, r.label))
        out.extend(rows)
    return out
