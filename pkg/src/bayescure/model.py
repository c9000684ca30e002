"""Core cure rate model: parameter/data containers and closed-form survival quantities.

The population survival function is

    S_P(y; theta, x) = (1 + gamma * vt * c**(gamma*vt) * F(y)**lam) ** (-1/gamma),

with vt = exp(beta' x) the covariate-linked rate, F a Weibull CDF with
parameters (alpha1, alpha2), lam > 0 a power on F, gamma a real shape that
selects the sub-model family, and c = e**(1/e).  The cure rate is the
y -> infinity limit p0 = (1 + gamma * vt * c**(gamma*vt)) ** (-1/gamma).

All evaluation is done in log space through log1p; where gamma*u is tiny the
series continuation -(u - gamma*u**2/2) of log S_P is used so that values and
gradients stay accurate and continuous through the gamma -> 0 promotion-time
limit.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "C_CONST",
    "GAMMA_EPS",
    "InfeasibleParamsError",
    "DegenerateCureError",
    "ModelParams",
    "Dataset",
    "LatentState",
    "weibull_cdf",
    "weibull_pdf",
    "link_theta",
    "pop_survival",
    "pop_density",
    "cure_prob",
    "susceptible_parts",
]

# c = e**(1/e); log(c) = 1/e.
C_CONST = float(np.exp(np.exp(-1.0)))

# |gamma| below which random initial values are redrawn (limit-branch territory).
GAMMA_EPS = 1e-6

# |gamma| below which the point is outside the prior support.
GAMMA_SUPPORT_EPS = 1e-12

# |gamma*u| below which the series continuation of log1p(gamma*u)/gamma is used.
_SERIES_EPS = 1e-8


class InfeasibleParamsError(ValueError):
    """Parameter point makes the survival/cure expression undefined at the query."""


class DegenerateCureError(ValueError):
    """Cure mass is numerically 1: the susceptible distribution is undefined."""


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Model parameter point (gamma, lam, alpha1, alpha2, beta0..betak)."""

    gamma: float
    lam: float
    alpha1: float
    alpha2: float
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))

    def validate(self):
        if not (self.lam > 0 and self.alpha1 > 0 and self.alpha2 > 0):
            raise ValueError("lam, alpha1, alpha2 must all be positive")
        if self.gamma == 0.0:
            raise ValueError("gamma must be nonzero (the gamma->0 limit is a dedicated branch)")
        if self.beta.ndim != 1 or self.beta.size < 1:
            raise ValueError("beta must be a 1-d vector of length k+1")
        return self

    @property
    def k(self) -> int:
        """Number of covariates (beta holds k+1 coefficients incl. intercept)."""
        return self.beta.size - 1

    @property
    def dim(self) -> int:
        return 4 + self.beta.size

    def as_vector(self) -> np.ndarray:
        """Flatten to the canonical ordering (gamma, lam, alpha1, alpha2, beta...)."""
        return np.concatenate(([self.gamma, self.lam, self.alpha1, self.alpha2], self.beta))

    @classmethod
    def from_vector(cls, v) -> "ModelParams":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]), v[4:].copy())


@dataclass(frozen=True, eq=False)
class Dataset:
    """Right-censored observations: times y, event indicators delta, covariates x.

    ``x`` excludes the intercept column, which is implicit.  Delta is 1 for an
    observed event and 0 for a censoring time.
    """

    y: np.ndarray
    delta: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        delta = np.asarray(self.delta)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(len(y), -1)
        if y.ndim != 1 or delta.shape != y.shape:
            raise ValueError("y and delta must be 1-d arrays of equal length")
        if x.shape[0] != y.size:
            raise ValueError("x must have one row per observation")
        if y.size and not np.all(y > 0):
            raise ValueError("all observed times must be positive")
        if not np.all((delta == 0) | (delta == 1)):
            raise ValueError("delta entries must be 0 or 1")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "delta", delta.astype(np.int8))
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def k(self) -> int:
        return self.x.shape[1]

    @property
    def event_index(self) -> np.ndarray:
        """Indices with delta = 1."""
        return np.flatnonzero(self.delta == 1)

    @property
    def censored_index(self) -> np.ndarray:
        """Indices with delta = 0."""
        return np.flatnonzero(self.delta == 0)


@dataclass(frozen=True, eq=False)
class LatentState:
    """Binary susceptibility indicators (1 = susceptible, 0 = cured)."""

    ind: np.ndarray

    def __post_init__(self):
        ind = np.asarray(self.ind)
        if not np.all((ind == 0) | (ind == 1)):
            raise ValueError("indicators must be 0 or 1")
        object.__setattr__(self, "ind", ind.astype(np.int8))

    def check_consistent(self, data: Dataset) -> "LatentState":
        """Observed events force susceptibility."""
        if self.ind.size != data.n:
            raise ValueError("latent vector length must match the dataset")
        if np.any(self.ind[data.delta == 1] == 0):
            raise ValueError("subjects with observed events must be susceptible")
        return self


# ---------------------------------------------------------------------------
# Weibull promotion-time distribution
# ---------------------------------------------------------------------------

def weibull_cdf(y, alpha1, alpha2):
    """CDF 1 - exp(-(alpha1*y)**alpha2) of the Weibull promotion-time law."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or alpha1 <= 0 or alpha2 <= 0:
        raise ValueError("weibull_cdf requires y > 0, alpha1 > 0, alpha2 > 0")
    out = -np.expm1(-((alpha1 * y) ** alpha2))
    return float(out) if out.ndim == 0 else out


def weibull_pdf(y, alpha1, alpha2):
    """Density alpha2*alpha1*(alpha1*y)**(alpha2-1) * exp(-(alpha1*y)**alpha2)."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or alpha1 <= 0 or alpha2 <= 0:
        raise ValueError("weibull_pdf requires y > 0, alpha1 > 0, alpha2 > 0")
    z = (alpha1 * y) ** alpha2
    out = alpha2 * alpha1 * (alpha1 * y) ** (alpha2 - 1.0) * np.exp(-z)
    return float(out) if out.ndim == 0 else out


def log_weibull_cdf(y, alpha1, alpha2):
    """log F(y), accurate in both tails of z = (alpha1*y)**alpha2."""
    z = (alpha1 * np.asarray(y, dtype=float)) ** alpha2
    small = z < 0.693
    with np.errstate(divide="ignore"):
        out = np.where(
            small,
            np.log(-np.expm1(-np.minimum(z, 0.7))),
            np.log1p(-np.exp(-np.maximum(z, 0.69))),
        )
    return out


def log_weibull_pdf(y, alpha1, alpha2):
    y = np.asarray(y, dtype=float)
    z = (alpha1 * y) ** alpha2
    return np.log(alpha2) + np.log(alpha1) + (alpha2 - 1.0) * np.log(alpha1 * y) - z


# ---------------------------------------------------------------------------
# Covariate link
# ---------------------------------------------------------------------------

def link_theta(beta, x_row):
    """Exponential link exp(beta0 + beta1*x1 + ... + betak*xk) for one subject.

    The intercept is implicit: ``x_row`` holds the k covariate values and
    ``beta`` has length k+1.  The linear predictor is formed in log space and
    exponentiated once; an overflowing value signals an infeasible point to
    callers.
    """
    beta = np.asarray(beta, dtype=float)
    x_row = np.asarray(x_row, dtype=float)
    if beta.size != x_row.size + 1:
        raise ValueError("beta must have one more entry than x_row (implicit intercept)")
    lp = beta[0] + float(np.dot(beta[1:], x_row))
    return float(np.exp(lp))


# ---------------------------------------------------------------------------
# Log-space evaluation core
# ---------------------------------------------------------------------------

def phi_parts(u, gamma, need_grad=False):
    """Evaluate phi = log1p(gamma*u)/gamma elementwise, u >= 0.

    log S_P = -phi(u) with u the mass vt * c**(gamma*vt) * F**lam, and
    log p0 = -phi(v) with v = vt * c**(gamma*vt).  Where |gamma*u| < 1e-8 the
    series u - gamma*u**2/2 is used; both branches agree there to below one
    ulp, so the evaluation is continuous and exact through gamma -> 0.

    Returns (phi, feasible) or (phi, q, phi_g, feasible) with
    q = d(phi)/d(log u) and phi_g = d(phi)/d(gamma); ``feasible`` is a single
    bool, False when some base 1 + gamma*u is negative (phi is NaN there).
    A base of exactly 0 is feasible and yields phi = +inf (zero survival
    mass), which can only occur for gamma < 0.  Callers silence the numpy
    divide/invalid warnings for the infeasible lanes.
    """
    t = gamma * u
    feasible = bool((t >= -1.0).all())
    phi = np.log1p(t)
    phi /= gamma
    series = np.abs(t) < _SERIES_EPS
    fix = series.any()
    if fix:
        us = u[series]
        phi[series] = us * (1.0 - 0.5 * t[series])
    if not need_grad:
        return phi, feasible
    q = u / (1.0 + t)
    phi_g = (q - phi) / gamma
    if fix:
        phi_g[series] = -0.5 * us * us
        q[series] = us * (1.0 - t[series])
    return phi, q, phi_g, feasible


def _log_theta_mass(vt, gamma, log_vt=None):
    """log(vt * c**(gamma*vt)) = log vt + gamma*vt/e."""
    if log_vt is None:
        log_vt = np.log(vt)
    return log_vt + gamma * vt / np.e


def _restore_shape(out, template):
    return float(out[0]) if np.ndim(template) == 0 else out.reshape(np.shape(template))


def pop_survival(y, x_row, params: ModelParams):
    """Population survival S_P(y; params, x_row).

    Raises
    ------
    InfeasibleParamsError
        When the base 1 + gamma*vt*c**(gamma*vt)*F(y)**lam is negative at the
        query point (possible for gamma < 0), or the linked rate overflows.
    """
    vt = link_theta(params.beta, x_row)
    if not np.isfinite(vt):
        raise InfeasibleParamsError("linked rate overflowed")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logF = log_weibull_cdf(y, params.alpha1, params.alpha2)
        logu = _log_theta_mass(vt, params.gamma) + params.lam * logF
        phi, feasible = phi_parts(np.atleast_1d(np.exp(logu)), params.gamma)
    if not feasible:
        raise InfeasibleParamsError("survival base is negative at the query point")
    return _restore_shape(np.exp(-phi), y)


def cure_prob(x_row, params: ModelParams):
    """Cure rate p0(x_row; params), the y -> infinity limit of pop_survival."""
    vt = link_theta(params.beta, x_row)
    if not np.isfinite(vt):
        raise InfeasibleParamsError("linked rate overflowed")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logv = _log_theta_mass(vt, params.gamma)
        phi, feasible = phi_parts(np.atleast_1d(np.exp(logv)), params.gamma)
    if not feasible:
        raise InfeasibleParamsError("cure rate base is negative")
    return float(np.exp(-phi[0]))


def pop_density(y, x_row, params: ModelParams):
    """Population density f_P = -dS_P/dy, assembled in log space.

    f_P = lam * vt * c**(gamma*vt) * F**(lam-1) * f * (1 + gamma*u)**(-1/gamma - 1)
    where the trailing power equals exp(-(1 + gamma) * phi(u)).
    """
    vt = link_theta(params.beta, x_row)
    if not np.isfinite(vt):
        raise InfeasibleParamsError("linked rate overflowed")
    gamma, lam = params.gamma, params.lam
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logF = log_weibull_cdf(y, params.alpha1, params.alpha2)
        logf = log_weibull_pdf(y, params.alpha1, params.alpha2)
        lv = _log_theta_mass(vt, gamma)
        phi, feasible = phi_parts(np.atleast_1d(np.exp(lv + lam * logF)), gamma)
        if not feasible:
            raise InfeasibleParamsError("survival base is negative at the query point")
        # At gamma = -1 the trailing power is identically 1, even where phi = inf.
        tail = -(1.0 + gamma) * phi if gamma != -1.0 else 0.0
        out = np.exp(np.log(lam) + np.atleast_1d(lv + (lam - 1.0) * logF + logf) + tail)
    return _restore_shape(out, y)


def susceptible_parts(y, x_row, params: ModelParams):
    """Proper survival and density of susceptibles: ((S_P - p0)/(1 - p0), f_P/(1 - p0))."""
    p0 = cure_prob(x_row, params)
    if p0 >= 1.0:
        raise DegenerateCureError("cure mass is numerically 1")
    sp = pop_survival(y, x_row, params)
    fp = pop_density(y, x_row, params)
    su = (sp - p0) / (1.0 - p0)
    fu = fp / (1.0 - p0)
    return su, fu
