"""Two-stage interaction testing with a data-dependent FDR cutoff.

Stage 1 screens variables by marginal Wald statistics at a threshold
``alpha = sqrt(alpha1 * log p)``.  Stage 2 fits the four-parameter working
model for every pair of surviving variables and computes the interaction
Wald statistic.  The rejection cutoff ``t_hat`` is the infimum of

    { 0 <= t <= sqrt(2 log p) :  G(t) * M / max(R(t), 1) <= eta }

where ``M`` counts pairs that passed stage 1, ``R(t)`` counts pair
statistics with ``|T| >= t`` and ``G`` is the two-sided normal tail.  With
``alpha1 = 0`` every variable passes stage 1 and the procedure reduces to
the classical BH cutoff applied to all p(p-1)/2 pairs.

Boundary conventions:

* Rejection uses ``|T| >= t_hat`` by default, matching the FDP definition;
  ``strict=True`` switches to ``>``.
* ``M`` includes pairs whose stage-2 fit failed; they stay in the cutoff
  denominator but can never be rejected.
* A variable whose stage-1 fit fails never passes screening.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .errors import AllFitsFailed, DegenerateVariance, Separation, SingularDesign
from .glm import (
    Family,
    build_stage1_design,
    build_stage2_design,
    fit_glm,
    wald_statistic,
)
from .metrics import efficiency_omega
from .normal import gauss_tail_inverse, gauss_two_sided_tail

__all__ = [
    "Dataset",
    "ScreenResult",
    "PairTestResult",
    "FdrReport",
    "alpha_from_rate",
    "stage1_screen",
    "stage2_tests",
    "fdr_cutoff",
    "run_two_stage",
    "theoretical_cstar",
]

INTERACTION_INDEX = 3  # column of x_j * x_k in the stage-2 design


@dataclass(frozen=True)
class Dataset:
    """One analysis problem: covariates, response, family, optional adjusters."""

    x: np.ndarray
    y: np.ndarray
    family: Family
    adjust: np.ndarray | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.ndim != 2:
            raise ValueError("x must be an n x p matrix")
        n, p = x.shape
        if n < 5 or p < 2:
            raise ValueError(f"need n >= 5 and p >= 2, got n={n}, p={p}")
        if y.shape != (n,):
            raise ValueError(f"y must have length {n}")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("x and y must be finite")
        self.family.validate_response(y)
        if self.adjust is not None:
            adj = np.asarray(self.adjust, dtype=float)
            if adj.ndim == 1:
                adj = adj[:, None]
            if adj.shape[0] != n or not np.isfinite(adj).all():
                raise ValueError("adjust must be a finite n x q matrix")
            object.__setattr__(self, "adjust", adj)
        if self.labels is not None and len(self.labels) != p:
            raise ValueError("labels must match the number of columns")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def label(self, j: int) -> str:
        return self.labels[j] if self.labels is not None else f"x{j + 1}"


@dataclass(frozen=True)
class ScreenResult:
    """Marginal Wald statistics and the surviving index set."""

    t_stats: np.ndarray  # NaN where the fit failed
    alpha: float
    passing: tuple[int, ...]
    failed: dict[int, str] = field(default_factory=dict)


@dataclass(frozen=True)
class PairTestResult:
    """Interaction statistics (j, k, T_jk) with j < k, plus skipped pairs."""

    pairs: tuple[tuple[int, int, float], ...]
    skipped: tuple[tuple[int, int, str], ...]


@dataclass(frozen=True)
class FdrReport:
    """Outcome of one full two-stage run."""

    t_hat: float
    eta: float
    alpha: float
    alpha1: float
    m_tested: int  # pairs passing stage 1, including skipped stage-2 fits
    p1: int
    p: int
    n: int
    omega: float
    rejected: tuple[tuple[int, int, float], ...]
    pairs: tuple[tuple[int, int, float], ...]
    skipped: tuple[tuple[int, int, str], ...]
    stage1_failed: dict[int, str]
    strict: bool

    @property
    def skipped_count(self) -> int:
        return len(self.skipped)

    @property
    def rejections(self) -> int:
        return len(self.rejected)


def alpha_from_rate(alpha1: float, p: int) -> float:
    """Stage-1 threshold alpha = sqrt(alpha1 * log p) (natural log)."""
    if alpha1 < 0:
        raise ValueError(f"alpha1 must be >= 0, got {alpha1}")
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    return math.sqrt(alpha1 * math.log(p))


def _marginal_stat(data: Dataset, j: int, adjust_in_stage1: bool) -> float:
    if adjust_in_stage1 and data.adjust is not None:
        design = _stage1_with_adjust(data.x[:, j], data.adjust)
    else:
        design = build_stage1_design(data.x[:, j])
    fit = fit_glm(design, data.y, data.family)
    if not fit.converged:
        raise _NotConvergedMarker()
    return wald_statistic(fit, 1).value


class _NotConvergedMarker(Exception):
    pass


def _stage1_with_adjust(x_col: np.ndarray, adjust: np.ndarray):
    from .glm import DesignMatrix

    cols = [np.ones(x_col.size), x_col] + [adjust[:, q] for q in range(adjust.shape[1])]
    labels = ["intercept", "x"] + [f"adjust{q + 1}" for q in range(adjust.shape[1])]
    return DesignMatrix(np.column_stack(cols), tuple(labels))


def stage1_screen(data: Dataset, alpha: float, adjust_in_stage1: bool = False) -> ScreenResult:
    """Fit the marginal model per column; pass indices with |T_j| >= alpha.

    Failed fits are recorded with a status code and never pass.  Raises
    AllFitsFailed when no column could be fitted.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    p = data.p
    t_stats = np.full(p, np.nan)
    failed: dict[int, str] = {}
    for j in range(p):
        try:
            t_stats[j] = _marginal_stat(data, j, adjust_in_stage1)
        except (SingularDesign, Separation, DegenerateVariance) as exc:
            failed[j] = exc.code
        except _NotConvergedMarker:
            failed[j] = "NOT_CONVERGED"
    if len(failed) == p:
        raise AllFitsFailed("every stage-1 marginal fit failed")
    passing = tuple(j for j in range(p) if j not in failed and abs(t_stats[j]) >= alpha)
    return ScreenResult(t_stats=t_stats, alpha=float(alpha), passing=passing, failed=failed)


def _test_one_pair(x, y, family, adjust, j, k):
    try:
        design = build_stage2_design(x[:, j], x[:, k], adjust)
        fit = fit_glm(design, y, family)
        if not fit.converged:
            return (j, k, None, "NOT_CONVERGED")
        stat = wald_statistic(fit, INTERACTION_INDEX).value
        return (j, k, stat, None)
    except (SingularDesign, Separation, DegenerateVariance) as exc:
        return (j, k, None, exc.code)


_POOL_STATE: dict = {}


def _init_pair_pool(x, y, family_name, adjust):
    from .glm import family_from_name

    _POOL_STATE["x"] = x
    _POOL_STATE["y"] = y
    _POOL_STATE["family"] = family_from_name(family_name)
    _POOL_STATE["adjust"] = adjust


def _pair_chunk(chunk):
    x = _POOL_STATE["x"]
    y = _POOL_STATE["y"]
    family = _POOL_STATE["family"]
    adjust = _POOL_STATE["adjust"]
    return [_test_one_pair(x, y, family, adjust, j, k) for j, k in chunk]


def stage2_tests(data: Dataset, screen: ScreenResult, workers: int = 1) -> PairTestResult:
    """Interaction Wald statistics for every pair of passing variables.

    Pairs are enumerated lexicographically (j < k) and the result is
    identical for any worker count; per-pair fit failures land in
    ``skipped`` with a status code.
    """
    idx = screen.passing
    pair_list = [(j, k) for a, j in enumerate(idx) for k in idx[a + 1 :]]
    if not pair_list:
        return PairTestResult(pairs=(), skipped=())

    if workers > 1 and len(pair_list) > workers:
        chunk_size = max(1, len(pair_list) // (workers * 4))
        chunks = [pair_list[i : i + chunk_size] for i in range(0, len(pair_list), chunk_size)]
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(
            processes=workers,
            initializer=_init_pair_pool,
            initargs=(data.x, data.y, data.family.name, data.adjust),
        ) as pool:
            results = [r for chunk_out in pool.map(_pair_chunk, chunks) for r in chunk_out]
    else:
        results = [
            _test_one_pair(data.x, data.y, data.family, data.adjust, j, k) for j, k in pair_list
        ]

    pairs = tuple((j, k, stat) for j, k, stat, reason in results if reason is None)
    skipped = tuple((j, k, reason) for j, k, _, reason in results if reason is not None)
    return PairTestResult(pairs=pairs, skipped=skipped)


def fdr_cutoff(pair_stats, m_tested: int, p: int, eta: float) -> float:
    """Exact infimum of the cutoff condition over t in [0, sqrt(2 log p)].

    ``R(t)`` is piecewise constant between order statistics of the absolute
    pair statistics, so each interval is solved in closed form through the
    tail inverse; the first feasible interval yields the infimum.  Returns
    sqrt(2 log p) when the condition is nowhere satisfied (including the
    M = 0 case, which has empty-rejection semantics).
    """
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    stats = np.abs(np.asarray(list(pair_stats), dtype=float))
    if m_tested < stats.size:
        raise ValueError(f"m_tested={m_tested} smaller than the number of statistics {stats.size}")
    t_max = math.sqrt(2.0 * math.log(p))
    if m_tested == 0:
        return t_max
    # t = 0 candidate: G(0) = 1 and R(0) counts every statistic.
    if m_tested <= eta * max(stats.size, 1):
        return 0.0
    interior = np.unique(stats)
    interior = interior[(interior > 0.0) & (interior < t_max)]
    lowers = np.concatenate(([0.0], interior))
    uppers = np.concatenate((interior, [t_max]))
    sorted_stats = np.sort(stats)
    for lo, hi in zip(lowers, uppers):
        r = stats.size - int(np.searchsorted(sorted_stats, lo, side="right"))  # |T| > lo
        q = eta * max(r, 1) / m_tested
        if q >= 1.0:
            return float(lo)
        if gauss_two_sided_tail(hi) <= q:
            t_star = gauss_tail_inverse(q)
            return float(max(lo, min(t_star, hi)))
    return t_max


def run_two_stage(
    data: Dataset,
    alpha1: float,
    eta: float,
    strict_cutoff: bool = False,
    adjust_in_stage1: bool = False,
    workers: int = 1,
) -> FdrReport:
    """Full procedure: screen, pairwise tests, cutoff, rejections.

    ``alpha1 = 0`` is the BH special case (every fitted variable passes).
    """
    alpha = alpha_from_rate(alpha1, data.p)
    screen = stage1_screen(data, alpha, adjust_in_stage1=adjust_in_stage1)
    pair_res = stage2_tests(data, screen, workers=workers)
    p1 = len(screen.passing)
    m_tested = p1 * (p1 - 1) // 2
    stats = [abs(t) for _, _, t in pair_res.pairs]
    t_hat = fdr_cutoff(stats, m_tested, data.p, eta)
    if strict_cutoff:
        rejected = tuple(rec for rec in pair_res.pairs if abs(rec[2]) > t_hat)
    else:
        rejected = tuple(rec for rec in pair_res.pairs if abs(rec[2]) >= t_hat)
    return FdrReport(
        t_hat=t_hat,
        eta=float(eta),
        alpha=alpha,
        alpha1=float(alpha1),
        m_tested=m_tested,
        p1=p1,
        p=data.p,
        n=data.n,
        omega=efficiency_omega(data.p, p1),
        rejected=rejected,
        pairs=pair_res.pairs,
        skipped=pair_res.skipped,
        stage1_failed=dict(screen.failed),
        strict=bool(strict_cutoff),
    )


def theoretical_cstar(eta: float, a1: int, m_tested: int, p: int) -> float:
    """Power-analysis threshold G^-1(eta * a1 / M) / sqrt(log p)."""
    if a1 <= 0:
        raise ValueError(f"a1 must be positive, got {a1}")
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    q = eta * a1 / m_tested
    if not 0.0 < q <= 1.0:
        raise ValueError(f"eta * a1 / M must be in (0, 1], got {q}")
    return gauss_tail_inverse(q) / math.sqrt(math.log(p))
