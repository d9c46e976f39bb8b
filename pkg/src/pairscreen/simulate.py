"""Seeded data generators and the replicated experiment driver.

One replicate draws a covariate matrix (independent columns or an AR(1)
dependence with rho = 0.5) and a ground truth: per-variable main effects
``beta1[j]`` drawn from {0, b} with probability 1/2, and for each pair of
active mains an interaction coefficient drawn from {0, b} with probability
3/4 of b (hierarchical rule: an interaction requires both mains active).

Responses follow the pairwise construction of the reference experiments:

* the screening stage tests each variable against a response generated
  from the main-effects model ``theta = beta0 + sum_j beta1[j] x_j``;
* each tested pair (j, k) gets its own response drawn from
  ``theta_jk = beta0 + beta1[j] x_j + beta1[k] x_k + beta3[jk] x_j x_k``,
  plus, in the misspecified variant, a foreign main effect
  ``beta4[jk] x_l`` and a foreign product ``beta5[jk] x_u x_v`` with
  l, u, v drawn outside {j, k} and beta4, beta5 from {0, b}.

Randomness comes from Philox (counter-based, 64-bit) streams keyed by
``(seed, substream)``; normal variates use NumPy's ziggurat sampler.
Replicate r of a run with base seed s uses seed s + r, and every pair
response has its own substream, which makes results independent of worker
scheduling and of the order in which pairs are evaluated.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateVariance, PairscreenError, Separation, SingularDesign
from .glm import build_stage2_design, family_from_name, fit_glm, wald_statistic
from .metrics import ReplicateMetrics, empirical_fdp, empirical_power, mean_and_se
from .pipeline import INTERACTION_INDEX, Dataset, alpha_from_rate, fdr_cutoff, stage1_screen

__all__ = [
    "SimConfig",
    "SimTruth",
    "ReplicateRow",
    "AggregateRow",
    "gen_design",
    "gen_truth",
    "gen_response",
    "gen_pair_response",
    "run_replicates",
    "aggregate_rows",
]

_SEED_MASK = (1 << 64) - 1
_STREAM_TRUTH = 0
_STREAM_DESIGN = 1
_STREAM_RESPONSE = 2
_STREAM_PAIR_BASE = 1 << 32  # pair (j, k) uses substream base + j*p + k

_LOGIT_CLAMP = 35.0  # |theta| beyond this saturates the sigmoid numerically


@dataclass(frozen=True)
class SimConfig:
    """One experiment cell; seeds fully determine every generated array."""

    n: int
    p: int
    family: str  # "gaussian" or "logistic"
    b: float
    seed: int
    misspecified: bool = False
    cov_kind: str = "identity"  # or "ar1"
    rho: float = 0.5
    beta0: float | None = None  # default: -1 gaussian, -2 logistic
    noise_sd: float = 1.0
    main_prob: float = 0.5
    interaction_prob: float = 0.75
    active_limit: int | None = None  # optional cap on the main-effect candidate pool

    def __post_init__(self):
        if self.n < 5 or self.p < 2:
            raise ValueError(f"need n >= 5 and p >= 2, got n={self.n}, p={self.p}")
        if self.b < 0:
            raise ValueError(f"b must be >= 0, got {self.b}")
        if self.cov_kind not in ("identity", "ar1"):
            raise ValueError(f"cov_kind must be 'identity' or 'ar1', got {self.cov_kind!r}")
        if self.misspecified and self.p < 3:
            raise ValueError("misspecified runs need p >= 3 (foreign variables l, u, v)")
        family_from_name(self.family)  # raises on unknown names
        if not 0.0 <= self.main_prob <= 1.0 or not 0.0 <= self.interaction_prob <= 1.0:
            raise ValueError("main_prob and interaction_prob must be in [0, 1]")

    @property
    def intercept(self) -> float:
        if self.beta0 is not None:
            return self.beta0
        return -2.0 if family_from_name(self.family).name == "bernoulli_logit" else -1.0

    @property
    def candidate_pool(self) -> int:
        if self.active_limit is None:
            return self.p
        return min(self.active_limit, self.p)


@dataclass(frozen=True)
class SimTruth:
    """Ground-truth coefficients and H1 bookkeeping for one replicate.

    ``beta3`` maps every pair of active mains to its drawn coefficient;
    pairs absent from the map have a zero interaction.  ``extras`` is
    populated for every pair in the misspecified variant.
    """

    beta1: np.ndarray  # entries in {0, b}
    beta3: dict[tuple[int, int], float]
    extras: dict[tuple[int, int], tuple[int, int, int, float, float]]
    h1_pairs: frozenset[tuple[int, int]]
    candidates: tuple[int, ...]


def _stream(seed: int, tag: int) -> np.random.Generator:
    key = np.array([seed & _SEED_MASK, tag & _SEED_MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def gen_design(config: SimConfig) -> np.ndarray:
    """n x p draws: i.i.d. N(0, I) columns, or the exact AR(1) recursion
    X_1 = Z_1, X_j = rho X_{j-1} + sqrt(1 - rho^2) Z_j (unit variances,
    corr(X_j, X_k) = rho^|j-k|)."""
    rng = _stream(config.seed, _STREAM_DESIGN)
    z = rng.standard_normal((config.n, config.p))
    if config.cov_kind == "identity":
        return z
    x = np.empty_like(z)
    x[:, 0] = z[:, 0]
    scale = math.sqrt(1.0 - config.rho**2)
    for j in range(1, config.p):
        x[:, j] = config.rho * x[:, j - 1] + scale * z[:, j]
    return x


def gen_truth(config: SimConfig) -> SimTruth:
    """Draw main effects ({0, b} with probability main_prob over the
    candidate pool), hierarchical interactions among pairs of active mains
    (b with probability interaction_prob), and misspecification extras."""
    rng = _stream(config.seed, _STREAM_TRUTH)
    p, b = config.p, config.b
    pool = config.candidate_pool
    if pool < p:
        candidates = tuple(sorted(int(i) for i in rng.permutation(p)[:pool]))
    else:
        candidates = tuple(range(p))
    active_flags = rng.random(len(candidates)) < config.main_prob

    beta1 = np.zeros(p)
    actives = []
    for j, flag in zip(candidates, active_flags):
        if flag:
            beta1[j] = b
            actives.append(j)

    beta3: dict[tuple[int, int], float] = {}
    for a, j in enumerate(actives):
        draws = rng.random(len(actives) - a - 1) < config.interaction_prob
        for k, hit in zip(actives[a + 1 :], draws):
            beta3[(j, k)] = b if hit else 0.0

    h1 = frozenset(pair for pair, coef in beta3.items() if coef != 0.0)

    extras: dict[tuple[int, int], tuple[int, int, int, float, float]] = {}
    if config.misspecified:
        for j in range(p - 1):
            luv = rng.integers(0, p - 2, size=3 * (p - 1 - j))
            coef_draws = rng.random(2 * (p - 1 - j)) < 0.5
            for idx, k in enumerate(range(j + 1, p)):
                picks = []
                for raw in luv[3 * idx : 3 * idx + 3]:
                    v = int(raw)
                    # shift past j and k to land outside the tested pair
                    if v >= j:
                        v += 1
                    if v >= k:
                        v += 1
                    picks.append(v)
                b4 = b if coef_draws[2 * idx] else 0.0
                b5 = b if coef_draws[2 * idx + 1] else 0.0
                extras[(j, k)] = (picks[0], picks[1], picks[2], b4, b5)

    return SimTruth(
        beta1=beta1,
        beta3=beta3,
        extras=extras,
        h1_pairs=h1,
        candidates=candidates,
    )


def _draw_response(theta: np.ndarray, config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    if family_from_name(config.family).name == "gaussian_identity":
        return theta + config.noise_sd * rng.standard_normal(theta.size)
    clipped = np.clip(theta, -_LOGIT_CLAMP, _LOGIT_CLAMP)
    prob = 1.0 / (1.0 + np.exp(-clipped))
    return (rng.random(theta.size) < prob).astype(float)


def gen_response(design: np.ndarray, truth: SimTruth, config: SimConfig) -> np.ndarray:
    """Screening-stage response from the main-effects model
    theta = beta0 + X @ beta1 (gaussian noise or Bernoulli draw)."""
    rng = _stream(config.seed, _STREAM_RESPONSE)
    theta = config.intercept + design @ truth.beta1
    return _draw_response(theta, config, rng)


def pair_predictor(design: np.ndarray, truth: SimTruth, config: SimConfig, j: int, k: int):
    """theta_jk for one tested pair, including misspecification extras."""
    if not j < k:
        raise ValueError(f"pair must satisfy j < k, got ({j}, {k})")
    theta = (
        config.intercept
        + truth.beta1[j] * design[:, j]
        + truth.beta1[k] * design[:, k]
        + truth.beta3.get((j, k), 0.0) * design[:, j] * design[:, k]
    )
    extra = truth.extras.get((j, k))
    if extra is not None:
        l, u, v, b4, b5 = extra
        if b4 != 0.0:
            theta = theta + b4 * design[:, l]
        if b5 != 0.0:
            theta = theta + b5 * design[:, u] * design[:, v]
    return theta


def gen_pair_response(
    design: np.ndarray, truth: SimTruth, config: SimConfig, j: int, k: int
) -> np.ndarray:
    """Response for the pair (j, k) from its own substream; identical for
    any evaluation order or worker schedule."""
    rng = _stream(config.seed, _STREAM_PAIR_BASE + j * config.p + k)
    return _draw_response(pair_predictor(design, truth, config, j, k), config, rng)


@dataclass(frozen=True)
class ReplicateRow:
    """One (alpha1, replicate) outcome; ``error`` is set when the run failed."""

    alpha1: float
    rep: int
    seed: int
    metrics: ReplicateMetrics | None
    error: str | None = None


@dataclass(frozen=True)
class AggregateRow:
    """Mean/SE summary over the successful replicates of one alpha1 cell."""

    alpha1: float
    reps: int
    failed: int
    fdp_mean: float
    fdp_se: float
    power_mean: float | None
    power_se: float | None
    power_reps: int
    omega_mean: float
    p1_mean: float
    t_hat_mean: float
    rejections_mean: float


def _pair_stat(design, y, family, j, k):
    try:
        fit = fit_glm(build_stage2_design(design[:, j], design[:, k]), y, family)
        if not fit.converged:
            return None
        return wald_statistic(fit, INTERACTION_INDEX).value
    except (SingularDesign, Separation, DegenerateVariance):
        return None


def _run_one_replicate(config: SimConfig, alpha1_list, eta: float, rep: int) -> list[ReplicateRow]:
    cfg = replace(config, seed=config.seed + rep)
    family = family_from_name(cfg.family)
    truth = gen_truth(cfg)
    design = gen_design(cfg)
    y_screen = gen_response(design, truth, cfg)

    rows: list[ReplicateRow] = []
    try:
        screen = stage1_screen(Dataset(x=design, y=y_screen, family=family), 0.0)
    except PairscreenError as exc:
        return [
            ReplicateRow(alpha1=a1, rep=rep, seed=cfg.seed, metrics=None, error=exc.code)
            for a1 in alpha1_list
        ]

    # Pair statistics are alpha1-independent; evaluate once over the widest
    # surviving set (smallest alpha1) and subset per alpha1 afterwards.
    stat_cache: dict[tuple[int, int], float | None] = {}
    for alpha1 in sorted(alpha1_list):
        alpha = alpha_from_rate(alpha1, cfg.p)
        passing = [j for j in screen.passing if abs(screen.t_stats[j]) >= alpha]
        for a, j in enumerate(passing):
            for k in passing[a + 1 :]:
                if (j, k) not in stat_cache:
                    y_jk = gen_pair_response(design, truth, cfg, j, k)
                    stat_cache[(j, k)] = _pair_stat(design, y_jk, family, j, k)

    for alpha1 in alpha1_list:
        alpha = alpha_from_rate(alpha1, cfg.p)
        passing = [j for j in screen.passing if abs(screen.t_stats[j]) >= alpha]
        p1 = len(passing)
        m_tested = p1 * (p1 - 1) // 2
        tested = [
            (j, k, stat_cache[(j, k)]) for a, j in enumerate(passing) for k in passing[a + 1 :]
        ]
        stats = [abs(t) for _, _, t in tested if t is not None]
        t_hat = fdr_cutoff(stats, m_tested, cfg.p, eta)
        rejected = [(j, k) for j, k, t in tested if t is not None and abs(t) >= t_hat]
        power = empirical_power(rejected, truth.h1_pairs) if truth.h1_pairs else None
        metrics = ReplicateMetrics(
            fdp=empirical_fdp(rejected, truth.h1_pairs),
            power=power,
            omega=(2 * cfg.p + p1 * (p1 - 1)) / (cfg.p * (cfg.p - 1)),
            p1=p1,
            t_hat=t_hat,
            rejections=len(rejected),
        )
        rows.append(ReplicateRow(alpha1=alpha1, rep=rep, seed=cfg.seed, metrics=metrics))
    return rows


_SIM_STATE: dict = {}


def _init_sim_pool(config, alpha1_list, eta):
    _SIM_STATE["args"] = (config, tuple(alpha1_list), eta)


def _sim_worker(rep: int) -> list[ReplicateRow]:
    config, alpha1_list, eta = _SIM_STATE["args"]
    return _run_one_replicate(config, alpha1_list, eta, rep)


def run_replicates(
    config: SimConfig,
    alpha1_list,
    eta: float,
    reps: int,
    workers: int = 1,
) -> list[ReplicateRow]:
    """Run ``reps`` seeded replicates, analyzing each at every alpha1.

    Replicate r uses seed config.seed + r, so output is identical for any
    worker count.  alpha1 = 0 in the list is the BH baseline.  Rows come
    back ordered by (rep, alpha1 position).
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    alpha1_list = list(alpha1_list)
    if not alpha1_list:
        raise ValueError("alpha1_list must be nonempty")
    if workers > 1 and reps > 1:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(
            processes=min(workers, reps),
            initializer=_init_sim_pool,
            initargs=(config, alpha1_list, eta),
        ) as pool:
            per_rep = pool.map(_sim_worker, range(reps))
    else:
        per_rep = [_run_one_replicate(config, alpha1_list, eta, rep) for rep in range(reps)]
    return [row for rep_rows in per_rep for row in rep_rows]


def aggregate_rows(rows: list[ReplicateRow]) -> list[AggregateRow]:
    """Summarize per-alpha1 means and Monte-Carlo SEs.

    Replicates whose analysis failed are excluded and counted; replicates
    with empty H1 contribute to everything except the power mean.
    """
    by_alpha: dict[float, list[ReplicateRow]] = {}
    order: list[float] = []
    for row in rows:
        if row.alpha1 not in by_alpha:
            by_alpha[row.alpha1] = []
            order.append(row.alpha1)
        by_alpha[row.alpha1].append(row)

    out = []
    for alpha1 in order:
        cell = by_alpha[alpha1]
        good = [r.metrics for r in cell if r.metrics is not None]
        failed = len(cell) - len(good)
        if not good:
            raise PairscreenError(f"all replicates failed for alpha1={alpha1}")
        fdp_mean, fdp_se = mean_and_se([m.fdp for m in good])
        powers = [m.power for m in good if m.power is not None]
        power_mean, power_se = mean_and_se(powers) if powers else (None, None)
        out.append(
            AggregateRow(
                alpha1=alpha1,
                reps=len(good),
                failed=failed,
                fdp_mean=fdp_mean,
                fdp_se=fdp_se,
                power_mean=power_mean,
                power_se=power_se,
                power_reps=len(powers),
                omega_mean=mean_and_se([m.omega for m in good])[0],
                p1_mean=mean_and_se([m.p1 for m in good])[0],
                t_hat_mean=mean_and_se([m.t_hat for m in good])[0],
                rejections_mean=mean_and_se([m.rejections for m in good])[0],
            )
        )
    return out
