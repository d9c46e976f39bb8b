"""Small-dimension working GLMs with robust sandwich covariance.

Fits the one- and two-variable working models by maximum likelihood under a
canonical link, computes the misspecification-robust sandwich covariance
A^-1 B A^-1 (A the averaged Hessian, B the averaged squared score), and
turns a designated coefficient into a sqrt(n)-scaled Wald statistic.

Only the two families used by the testing procedure are provided:
gaussian with identity link and Bernoulli with logit link.  The gaussian
dispersion never needs to be estimated because the B matrix uses raw
squared residuals, so it cancels from every Wald statistic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVariance, Separation, SingularDesign

__all__ = [
    "Family",
    "GAUSSIAN",
    "LOGISTIC",
    "family_from_name",
    "DesignMatrix",
    "GlmFit",
    "WaldStat",
    "build_stage1_design",
    "build_stage2_design",
    "fit_glm",
    "sandwich_covariance",
    "wald_statistic",
]

_RANK_TOL = 1e-10  # singular-value ratio below which a design is singular
_SEPARATION_BOUND = 30.0  # |beta| beyond this means fitted probs are 0/1
# The convergence contract is a score norm <= 1e-8; iteration targets two
# more digits so Wald statistics stay stable under covariate rescaling.
_SCORE_CONTRACT = 1e-8
_SCORE_TARGET = 1e-10
_MAX_ITER = 100
_MAX_HALVINGS = 30


class Family:
    """Canonical-link exponential-family pieces b, b', b''."""

    name: str = ""

    @staticmethod
    def cumulant(theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def mean(theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def variance_from_mean(mu: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @classmethod
    def variance(cls, theta: np.ndarray) -> np.ndarray:
        return cls.variance_from_mean(cls.mean(theta))

    def validate_response(self, y: np.ndarray) -> None:
        pass

    def __repr__(self) -> str:  # pragma: no cover
        return f"Family({self.name})"


class _GaussianIdentity(Family):
    name = "gaussian_identity"

    @staticmethod
    def cumulant(theta):
        return 0.5 * theta * theta

    @staticmethod
    def mean(theta):
        return theta

    @staticmethod
    def variance_from_mean(mu):
        return np.ones_like(mu)


class _BernoulliLogit(Family):
    name = "bernoulli_logit"

    @staticmethod
    def cumulant(theta):
        # log(1 + e^theta), overflow-safe
        return np.logaddexp(0.0, theta)

    @staticmethod
    def mean(theta):
        # sigmoid(x) = (1 + tanh(x/2)) / 2: saturates cleanly at both ends
        return 0.5 * (1.0 + np.tanh(0.5 * theta))

    @staticmethod
    def variance_from_mean(mu):
        return mu * (1.0 - mu)

    def validate_response(self, y):
        if not np.isin(y, (0.0, 1.0)).all():
            raise ValueError("bernoulli_logit requires responses in {0, 1}")


GAUSSIAN: Family = _GaussianIdentity()
LOGISTIC: Family = _BernoulliLogit()

_FAMILIES = {
    "gaussian_identity": GAUSSIAN,
    "gaussian": GAUSSIAN,
    "bernoulli_logit": LOGISTIC,
    "logistic": LOGISTIC,
}


def family_from_name(name: str) -> Family:
    try:
        return _FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; expected gaussian or logistic") from None


@dataclass(frozen=True)
class DesignMatrix:
    """Dense n x d design with column labels; first column is the intercept
    when built by the stage builders."""

    values: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[1] < 1 or v.shape[0] < 1:
            raise ValueError(f"design must be a nonempty n x d matrix, got shape {v.shape}")
        if len(self.labels) != v.shape[1]:
            raise ValueError("label count must match column count")
        if not np.isfinite(v).all():
            raise ValueError("design entries must be finite")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class GlmFit:
    """Fitted working model: coefficients, sandwich covariance, diagnostics.

    ``model_cov`` is the unit-dispersion model-based covariance A^-1; the
    ratio sandwich/model diagonal is scale free and exposes numerically
    perfect fits (zero-residual B matrices).
    """

    beta_hat: np.ndarray
    sandwich_cov: np.ndarray
    model_cov: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float
    n: int


@dataclass(frozen=True)
class WaldStat:
    """sqrt(n)-scaled Wald statistic for one coefficient."""

    value: float
    coef_index: int
    se: float  # sqrt of the sandwich diagonal entry


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} entries must be finite")
    return arr


def build_stage1_design(x_col) -> DesignMatrix:
    """Design (1, x) for the marginal main-effect model."""
    x = _as_vector(x_col, "x_col")
    if x.size < 2:
        raise ValueError("stage-1 design needs at least 2 observations")
    values = np.column_stack((np.ones(x.size), x))
    return DesignMatrix(values, ("intercept", "x"))


def build_stage2_design(x_j, x_k, adjust=None) -> DesignMatrix:
    """Design (1, x_j, x_k, x_j*x_k, adjust...); interaction is column 3."""
    xj = _as_vector(x_j, "x_j")
    xk = _as_vector(x_k, "x_k")
    if xj.size != xk.size:
        raise ValueError(f"length mismatch: {xj.size} vs {xk.size}")
    cols = [np.ones(xj.size), xj, xk, xj * xk]
    labels = ["intercept", "x_j", "x_k", "x_j:x_k"]
    if adjust is not None:
        adj = np.asarray(adjust, dtype=float)
        if adj.ndim == 1:
            adj = adj[:, None]
        if adj.shape[0] != xj.size:
            raise ValueError(f"adjust rows {adj.shape[0]} do not match n={xj.size}")
        if not np.isfinite(adj).all():
            raise ValueError("adjust entries must be finite")
        for q in range(adj.shape[1]):
            cols.append(adj[:, q])
            labels.append(f"adjust{q + 1}")
    return DesignMatrix(np.column_stack(cols), tuple(labels))


def _check_rank(values: np.ndarray) -> None:
    sv = np.linalg.svd(values, compute_uv=False)
    if sv[0] <= 0.0 or sv[-1] / sv[0] < _RANK_TOL:
        raise SingularDesign(
            f"rank-deficient design (singular-value ratio {sv[-1] / max(sv[0], 1e-300):.2e})"
        )


def _chol_solve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve mat @ x = rhs via Cholesky; SingularDesign if not PD."""
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise SingularDesign("Cholesky factorization failed") from None
    return np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))


def _working_loglik(family: Family, theta: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(y * theta - family.cumulant(theta)))


def fit_glm(design: DesignMatrix, y, family: Family) -> GlmFit:
    """Maximize the working log-likelihood sum(y*theta - b(theta)) over beta.

    Gaussian-identity fits are the closed-form normal-equations solution;
    logistic fits use Newton-Raphson with step-halving from beta = 0.  The
    returned fit carries the sandwich covariance.

    Raises SingularDesign for rank-deficient designs and Separation when a
    logistic iterate leaves the |beta| <= 30 box or the converged fit
    classifies every observation to within 1e-6 (the score criterion fires
    around |theta| ~ 19 on separated unit-scale data, before the box
    bound, and the Wald statistic is equally meaningless there).
    """
    X = design.values
    yv = _as_vector(y, "y")
    n, d = X.shape
    if yv.size != n:
        raise ValueError(f"response length {yv.size} does not match n={n}")
    if n <= d:
        raise ValueError(f"need n > d, got n={n}, d={d}")
    family.validate_response(yv)
    _check_rank(X)

    if family is GAUSSIAN or isinstance(family, _GaussianIdentity):
        gram = X.T @ X
        beta = _chol_solve(gram, X.T @ yv)
        score = X.T @ (yv - X @ beta) / n
        fit_iters, converged = 0, True
    else:
        beta = np.zeros(d)
        theta = X @ beta
        mu = family.mean(theta)
        ll = _working_loglik(family, theta, yv)
        score = X.T @ (yv - mu) / n
        fit_iters = 0
        while np.max(np.abs(score)) > _SCORE_TARGET and fit_iters < _MAX_ITER:
            w = family.variance_from_mean(mu)
            hess = (X.T * w) @ X / n
            step = _chol_solve(hess, score)
            # Halve until the working log-likelihood does not decrease
            # (allowing float-noise-level wiggle so steps near the optimum,
            # where ll changes fall below machine precision, still land).
            noise = 1e-12 * (1.0 + abs(ll))
            scale = 1.0
            for _ in range(_MAX_HALVINGS):
                cand = beta + scale * step
                cand_ll = _working_loglik(family, X @ cand, yv)
                if cand_ll >= ll - noise:
                    break
                scale *= 0.5
            beta = beta + scale * step
            if np.max(np.abs(beta)) > _SEPARATION_BOUND:
                raise Separation(
                    f"|beta| exceeded {_SEPARATION_BOUND} during iteration "
                    "(fitted probabilities numerically 0/1)"
                )
            theta = X @ beta
            mu = family.mean(theta)
            ll = _working_loglik(family, theta, yv)
            score = X.T @ (yv - mu) / n
            fit_iters += 1
        converged = bool(np.max(np.abs(score)) <= _SCORE_CONTRACT)
        if converged and np.max(np.abs(yv - mu)) < 1e-6:
            raise Separation("fit classifies every observation to within 1e-6")

    cov, model_cov = _sandwich_and_model_cov(X, yv, family, beta)
    return GlmFit(
        beta_hat=beta,
        sandwich_cov=cov,
        model_cov=model_cov,
        converged=converged,
        iterations=fit_iters,
        grad_norm=float(np.max(np.abs(score))),
        n=n,
    )


def _sandwich_and_model_cov(X, yv, family, beta):
    n = X.shape[0]
    theta = X @ beta
    w = family.variance(theta)
    resid = yv - family.mean(theta)
    a_mat = (X.T * w) @ X / n
    b_mat = (X.T * resid**2) @ X / n
    try:
        chol = np.linalg.cholesky(a_mat)
    except np.linalg.LinAlgError:
        raise SingularDesign("averaged Hessian is not positive definite") from None
    a_inv = np.linalg.solve(chol.T, np.linalg.solve(chol, np.eye(X.shape[1])))
    cov = a_inv @ b_mat @ a_inv
    return (cov + cov.T) / 2.0, (a_inv + a_inv.T) / 2.0


def sandwich_covariance(design: DesignMatrix, y, family: Family, beta_hat) -> np.ndarray:
    """A^-1 B A^-1 with A = mean(b''(theta) x x^T), B = mean((y-b'(theta))^2 x x^T)."""
    X = design.values
    yv = _as_vector(y, "y")
    beta = _as_vector(beta_hat, "beta_hat")
    cov, _ = _sandwich_and_model_cov(X, yv, family, beta)
    return cov


def wald_statistic(fit: GlmFit, coef_index: int, n: int | None = None) -> WaldStat:
    """T = sqrt(n) * beta[idx] / sqrt(sandwich[idx, idx]).

    Raises DegenerateVariance when the diagonal entry is <= 0, non-finite,
    or vanishingly small relative to the model-based diagonal, which is the
    floating-point signature of a zero-residual (perfect) fit.
    """
    d = fit.beta_hat.size
    if not 0 <= coef_index < d:
        raise ValueError(f"coef_index {coef_index} out of range for d={d}")
    if n is None:
        n = fit.n
    var = float(fit.sandwich_cov[coef_index, coef_index])
    if not np.isfinite(var) or var <= 0.0:
        raise DegenerateVariance(f"sandwich diagonal entry {var!r} at index {coef_index}")
    if var < 1e-24 * float(fit.model_cov[coef_index, coef_index]):
        raise DegenerateVariance(
            f"sandwich diagonal at index {coef_index} is numerically zero (perfect fit)"
        )
    se = var**0.5
    value = float(np.sqrt(n) * fit.beta_hat[coef_index] / se)
    if not np.isfinite(value):
        raise DegenerateVariance(f"non-finite Wald statistic at index {coef_index}")
    return WaldStat(value=value, coef_index=coef_index, se=se)
