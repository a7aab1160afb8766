"""Model definition: latent AR(1) sentiment states with weight-scaled noise.

Per category j the latent path follows

    x_1j ~ N(mu_j, sigma_eta_j^2)
    x_tj ~ N((1 - theta_j) * mu_j + theta_j * x_{t-1,j}, sigma_eta_j^2)

and observed weekly scores are

    y_tj ~ N(x_tj, sigma_j^2 / n_tj)      (heteroscedastic)
    y_tj ~ N(x_tj, sigma_j^2)             (homoscedastic variant)

Sampling runs on unconstrained coordinates: theta_aux (logit persistence),
mu_u (logit of (mu+1)/2, since mu carries a uniform prior on [-1, 1]),
log_sigma_eta and log_sigma. Hierarchical hyperpriors tie the per-category
values of theta_aux, log_sigma_eta and log_sigma together; the mean level
has no hierarchy. Pooling variants force some families to a single shared
value across categories.
"""

from dataclasses import dataclass, field
import math

import numpy as np

VARIANTS = ("hierarchical", "pooled", "partial-sigma", "homoscedastic")

# Parameter families in sampler order. mu is handled through mu_u = logit((mu+1)/2).
FAMILIES = ("theta_aux", "mu_u", "log_sigma_eta", "log_sigma")

# Families with a hierarchical (location, scale) hyper pair.
HIER_FAMILIES = ("theta_aux", "log_sigma_eta", "log_sigma")

# Hyperparameter vector layout: location then log-scale per hierarchical family.
HYPER_NAMES = (
    "mu_theta",
    "log_sigma_theta",
    "mu_log_sigma_eta",
    "log_sigma_log_sigma_eta",
    "mu_log_sigma",
    "log_sigma_log_sigma",
)

LOG_2PI = 1.8378770664093453


def logistic(x):
    # exp form on each side avoids overflow for large |x|
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def logit(p):
    p = np.asarray(p, dtype=float)
    out = np.log(p) - np.log1p(-p)
    if out.ndim == 0:
        return float(out)
    return out


def mu_from_u(u):
    """Map unconstrained mu_u to the mean level mu in (-1, 1)."""
    return 2.0 * logistic(u) - 1.0


def u_from_mu(mu):
    return logit((np.asarray(mu, dtype=float) + 1.0) / 2.0)


def _softplus(x):
    if x > 30.0:
        return x
    return math.log1p(math.exp(x))


def log_normal_pdf(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * (LOG_2PI + z * z) - math.log(sd)


@dataclass(frozen=True)
class Hyperpriors:
    """Fixed top-level priors. Scale entries are lognormal, parameterized as
    (location of the log, variance of the log)."""

    theta_loc_mean: float = 0.0
    theta_loc_sd: float = 1.0
    theta_scale_logloc: float = math.log(0.7)
    theta_scale_logvar: float = 0.35**2

    log_sigma_loc_mean: float = math.log(0.15)
    log_sigma_loc_sd: float = 1.0
    log_sigma_scale_logloc: float = math.log(0.5)
    log_sigma_scale_logvar: float = 0.35**2

    log_sigma_eta_loc_mean: float = math.log(0.05)
    log_sigma_eta_loc_sd: float = 1.0
    log_sigma_eta_scale_logloc: float = math.log(0.5)
    log_sigma_eta_scale_logvar: float = 0.35**2

    def loc_mean(self, family: str) -> float:
        return {
            "theta_aux": self.theta_loc_mean,
            "log_sigma": self.log_sigma_loc_mean,
            "log_sigma_eta": self.log_sigma_eta_loc_mean,
        }[family]

    def loc_sd(self, family: str) -> float:
        return {
            "theta_aux": self.theta_loc_sd,
            "log_sigma": self.log_sigma_loc_sd,
            "log_sigma_eta": self.log_sigma_eta_loc_sd,
        }[family]

    def scale_logloc(self, family: str) -> float:
        return {
            "theta_aux": self.theta_scale_logloc,
            "log_sigma": self.log_sigma_scale_logloc,
            "log_sigma_eta": self.log_sigma_eta_scale_logloc,
        }[family]

    def scale_logsd(self, family: str) -> float:
        var = {
            "theta_aux": self.theta_scale_logvar,
            "log_sigma": self.log_sigma_scale_logvar,
            "log_sigma_eta": self.log_sigma_eta_scale_logvar,
        }[family]
        return math.sqrt(var)


@dataclass(frozen=True)
class ModelSpec:
    """Variant plus hyperpriors; answers which families are shared across
    categories and whether observation noise is weight-scaled."""

    variant: str = "hierarchical"
    hyperpriors: Hyperpriors = field(default_factory=Hyperpriors)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    @property
    def heteroscedastic(self) -> bool:
        return self.variant != "homoscedastic"

    def shared(self, family: str) -> bool:
        if self.variant == "pooled":
            return True
        if self.variant == "partial-sigma":
            return family in ("theta_aux", "log_sigma_eta")
        return False


@dataclass
class ParamState:
    """One point in parameter space: per-category vectors (shared families
    hold a constant vector) plus the hypers in HYPER_NAMES order."""

    theta_aux: np.ndarray
    mu_u: np.ndarray
    log_sigma_eta: np.ndarray
    log_sigma: np.ndarray
    hypers: np.ndarray

    def copy(self) -> "ParamState":
        return ParamState(
            self.theta_aux.copy(),
            self.mu_u.copy(),
            self.log_sigma_eta.copy(),
            self.log_sigma.copy(),
            self.hypers.copy(),
        )

    def family(self, name: str) -> np.ndarray:
        return getattr(self, name)

    @property
    def theta(self) -> np.ndarray:
        return logistic(self.theta_aux)

    @property
    def mu(self) -> np.ndarray:
        return mu_from_u(self.mu_u)

    @property
    def sigma_eta(self) -> np.ndarray:
        return np.exp(self.log_sigma_eta)

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    def hyper(self, name: str) -> float:
        return float(self.hypers[HYPER_NAMES.index(name)])

    def set_hyper(self, name: str, value: float) -> None:
        self.hypers[HYPER_NAMES.index(name)] = value


_FAMILY_HYPER = {
    "theta_aux": ("mu_theta", "log_sigma_theta"),
    "log_sigma_eta": ("mu_log_sigma_eta", "log_sigma_log_sigma_eta"),
    "log_sigma": ("mu_log_sigma", "log_sigma_log_sigma"),
}


def family_hyper_names(family: str):
    return _FAMILY_HYPER[family]


def initial_state(spec: ModelSpec, n_categories: int) -> ParamState:
    """Deterministic start: hypers at their prior locations, per-category
    values at the family location."""

    hp = spec.hyperpriors
    hypers = np.array(
        [
            hp.theta_loc_mean,
            hp.theta_scale_logloc,
            hp.log_sigma_eta_loc_mean,
            hp.log_sigma_eta_scale_logloc,
            hp.log_sigma_loc_mean,
            hp.log_sigma_scale_logloc,
        ]
    )
    J = n_categories
    return ParamState(
        theta_aux=np.full(J, hp.theta_loc_mean),
        mu_u=np.zeros(J),
        log_sigma_eta=np.full(J, hp.log_sigma_eta_loc_mean),
        log_sigma=np.full(J, hp.log_sigma_loc_mean),
        hypers=hypers,
    )


def log_prior_category(spec: ModelSpec, state: ParamState, family: str, j: int) -> float:
    """Log prior density of category j's value in one family, given the
    current hypers. mu_u carries the flat-mu prior expressed on the u scale."""

    value = float(state.family(family)[j])
    if family == "mu_u":
        # uniform mu on (-1, 1) => density 1/2 on mu; |d mu / d u| = 2 l(u)(1-l(u))
        return -_softplus(value) - _softplus(-value)
    loc_name, logscale_name = _FAMILY_HYPER[family]
    loc = state.hyper(loc_name)
    sd = math.exp(state.hyper(logscale_name))
    return log_normal_pdf(value, loc, sd)


def log_hyper_prior(spec: ModelSpec, state: ParamState) -> float:
    """Log density of the hypers under the fixed top-level priors."""

    hp = spec.hyperpriors
    total = 0.0
    for family in HIER_FAMILIES:
        loc_name, logscale_name = _FAMILY_HYPER[family]
        loc = state.hyper(loc_name)
        logscale = state.hyper(logscale_name)
        total += log_normal_pdf(loc, hp.loc_mean(family), hp.loc_sd(family))
        total += log_normal_pdf(logscale, hp.scale_logloc(family), hp.scale_logsd(family))
    return total


def log_prior(spec: ModelSpec, state: ParamState) -> float:
    """Full log prior: hypers plus category values, shared families counted
    once."""

    J = state.theta_aux.shape[0]
    total = log_hyper_prior(spec, state)
    for family in FAMILIES:
        count = 1 if spec.shared(family) else J
        for j in range(count):
            total += log_prior_category(spec, state, family, j)
    return total


def log_transition(spec: ModelSpec, state: ParamState, x: np.ndarray) -> float:
    """Log density of latent paths x (T, J) under the state equation."""

    theta = state.theta
    mu = state.mu
    se = state.sigma_eta
    terms = []
    for j in range(x.shape[1]):
        terms.append(log_normal_pdf(x[0, j], mu[j], se[j]))
        means = (1.0 - theta[j]) * mu[j] + theta[j] * x[:-1, j]
        z = (x[1:, j] - means) / se[j]
        terms.append(float(np.sum(-0.5 * (LOG_2PI + z * z) - math.log(se[j]))))
    return math.fsum(terms)


def log_observation(
    spec: ModelSpec,
    state: ParamState,
    x: np.ndarray,
    y: np.ndarray,
    n: np.ndarray,
) -> float:
    """Log density of observed cells given latent paths; NaN in y marks a
    missing cell."""

    sig = state.sigma
    terms = []
    for j in range(x.shape[1]):
        obs = ~np.isnan(y[:, j])
        if not obs.any():
            continue
        if spec.heteroscedastic:
            sd = sig[j] / np.sqrt(n[obs, j])
        else:
            sd = np.full(int(obs.sum()), sig[j])
        z = (y[obs, j] - x[obs, j]) / sd
        terms.append(float(np.sum(-0.5 * (LOG_2PI + z * z) - np.log(sd))))
    return math.fsum(terms)


def log_joint(
    spec: ModelSpec,
    state: ParamState,
    x: np.ndarray,
    y: np.ndarray,
    n: np.ndarray,
) -> float:
    J = state.theta_aux.shape[0]
    if x.ndim != 2 or x.shape[1] != J:
        raise ValueError(f"x must be (T, {J}), got {x.shape}")
    if y.shape != x.shape or n.shape != x.shape:
        raise ValueError("y and n must match x in shape")
    return (
        log_prior(spec, state)
        + log_transition(spec, state, x)
        + log_observation(spec, state, x, y, n)
    )
