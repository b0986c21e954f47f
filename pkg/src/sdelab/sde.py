"""The seven linear SDE families: coefficients, kernels, priors, contraction.

Every family has drift b(t, x) = b(t) * (x - mu) with a scalar factor b(t)
(mu = 0 except for the mean-reverting pair), so the transition kernel of
X_t | X_0 is Gaussian with a scalar mean factor f(t) and a per-coordinate
conditional standard deviation s(t), both in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigurationError, DomainError

# Hard guard against silently overflowing priors of the contractive
# families, whose variance grows exponentially in T.
MAX_PRIOR_VARIANCE = 1e12


class SDEKind(str, Enum):
    OU = "ou"
    VE = "ve"
    VP = "vp"
    SUBVP = "subvp"
    COU = "cou"
    CVP = "cvp"
    CSUBVP = "csubvp"


CONTRACTIVE_KINDS = {SDEKind.COU, SDEKind.CVP, SDEKind.CSUBVP}
_THETA_KINDS = {SDEKind.OU, SDEKind.COU}
_BETA_KINDS = {SDEKind.VP, SDEKind.SUBVP, SDEKind.CVP, SDEKind.CSUBVP}


@dataclass(frozen=True)
class DiffusionSpec:
    """One SDE family with its parameters, horizon T and dimension."""

    kind: SDEKind
    T: float = 10.0
    dim: int = 1
    theta: float | None = None
    sigma: float | None = None
    mu: np.ndarray | None = None
    sigma_min: float | None = None
    sigma_max: float | None = None
    beta_min: float | None = None
    beta_max: float | None = None

    def __post_init__(self):
        kind = SDEKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.T <= 0:
            raise ConfigurationError("horizon T must be positive")
        if self.dim < 1:
            raise ConfigurationError("dim must be a positive integer")
        if kind in _THETA_KINDS:
            if self.theta is None or self.sigma is None:
                raise ConfigurationError(f"{kind.value} needs theta and sigma")
            if self.theta <= 0 or self.sigma <= 0:
                raise ConfigurationError("theta and sigma must be positive")
            mu = np.zeros(self.dim) if self.mu is None else np.asarray(self.mu, float)
            if mu.shape != (self.dim,):
                raise ConfigurationError("mu must be a length-dim vector")
            object.__setattr__(self, "mu", mu)
        elif kind is SDEKind.VE:
            if self.sigma_min is None or self.sigma_max is None:
                raise ConfigurationError("ve needs sigma_min and sigma_max")
            if not 0 < self.sigma_min < self.sigma_max:
                raise ConfigurationError("need 0 < sigma_min < sigma_max")
            object.__setattr__(self, "mu", np.zeros(self.dim))
        else:
            if self.beta_min is None or self.beta_max is None:
                raise ConfigurationError(f"{kind.value} needs beta_min and beta_max")
            if not 0 < self.beta_min < self.beta_max:
                raise ConfigurationError("need 0 < beta_min < beta_max")
            object.__setattr__(self, "mu", np.zeros(self.dim))

    @property
    def t_eps(self) -> float:
        """Lower time cutoff used for expectations and backward endpoints."""
        return 1e-3 * self.T

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "T": self.T, "dim": self.dim}
        for name in ("theta", "sigma", "sigma_min", "sigma_max", "beta_min", "beta_max"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        if self.kind in _THETA_KINDS and np.any(self.mu != 0):
            out["mu"] = list(map(float, self.mu))
        return out

    @staticmethod
    def from_dict(d: dict) -> "DiffusionSpec":
        d = dict(d)
        kind = SDEKind(str(d.pop("kind")).lower())
        mu = d.pop("mu", None)
        if mu is not None:
            mu = np.atleast_1d(np.asarray(mu, float))
        known = {"T", "dim", "theta", "sigma", "sigma_min", "sigma_max",
                 "beta_min", "beta_max"}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown sde keys: {sorted(extra)}")
        if "dim" in d:
            d["dim"] = int(d["dim"])
        return DiffusionSpec(kind=kind, mu=mu, **{k: v for k, v in d.items()})


@dataclass(frozen=True)
class PerturbationKernel:
    """Kernel of X_t | X_0: mean factor f(t) and conditional std s(t)."""

    mean_factor: float
    cond_std: float


@dataclass(frozen=True)
class PriorSpec:
    """Isotropic Gaussian reference distribution N(mean, variance * I)."""

    mean: np.ndarray
    variance: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class ContractionProfile:
    r_b: object  # callable t -> scalar drift monotonicity rate
    min_rate: float
    is_cdpm: bool
    alpha: float | None = None
    beta: float | None = None


def _check_time(spec: DiffusionSpec, t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= spec.T:
        raise DomainError(f"t={t} outside [0, T={spec.T}]")
    return t


def beta_schedule(spec: DiffusionSpec, t: float) -> float:
    return spec.beta_min + (t / spec.T) * (spec.beta_max - spec.beta_min)


def beta_integral(spec: DiffusionSpec, t: float) -> float:
    """int_0^t beta(s) ds, closed form for the linear schedule."""
    return spec.beta_min * t + (t * t) / (2.0 * spec.T) * (spec.beta_max - spec.beta_min)


def drift_factor(spec: DiffusionSpec, t: float) -> float:
    """Scalar b(t) in drift b(t) * (x - mu)."""
    t = _check_time(spec, t)
    kind = spec.kind
    if kind is SDEKind.OU:
        return -spec.theta
    if kind is SDEKind.COU:
        return spec.theta
    if kind is SDEKind.VE:
        return 0.0
    half = 0.5 * beta_schedule(spec, t)
    return half if kind in (SDEKind.CVP, SDEKind.CSUBVP) else -half


def diffusion_coeff(spec: DiffusionSpec, t: float) -> float:
    """sigma(t) >= 0."""
    t = _check_time(spec, t)
    kind = spec.kind
    if kind in _THETA_KINDS:
        return spec.sigma
    if kind is SDEKind.VE:
        log_ratio = math.log(spec.sigma_max / spec.sigma_min)
        return (spec.sigma_min * math.exp(t / spec.T * log_ratio)
                * math.sqrt(2.0 * log_ratio / spec.T))
    b = beta_schedule(spec, t)
    if kind in (SDEKind.VP, SDEKind.CVP):
        return math.sqrt(b)
    B = beta_integral(spec, t)
    if kind is SDEKind.SUBVP:
        return math.sqrt(b * -math.expm1(-2.0 * B))
    return math.sqrt(b * math.expm1(2.0 * B))  # csubvp


def kernel(spec: DiffusionSpec, t: float) -> PerturbationKernel:
    """Closed-form (f(t), s(t)) of the transition kernel."""
    t = _check_time(spec, t)
    kind = spec.kind
    if kind is SDEKind.OU:
        th = spec.theta
        var = spec.sigma ** 2 * -math.expm1(-2.0 * th * t) / (2.0 * th)
        return PerturbationKernel(math.exp(-th * t), math.sqrt(var))
    if kind is SDEKind.COU:
        th = spec.theta
        var = spec.sigma ** 2 * math.expm1(2.0 * th * t) / (2.0 * th)
        return PerturbationKernel(math.exp(th * t), math.sqrt(var))
    if kind is SDEKind.VE:
        log_ratio = math.log(spec.sigma_max / spec.sigma_min)
        var = spec.sigma_min ** 2 * math.expm1(2.0 * t / spec.T * log_ratio)
        return PerturbationKernel(1.0, math.sqrt(var))
    B = beta_integral(spec, t)
    if kind is SDEKind.VP:
        return PerturbationKernel(math.exp(-0.5 * B), math.sqrt(-math.expm1(-B)))
    if kind is SDEKind.SUBVP:
        return PerturbationKernel(math.exp(-0.5 * B), -math.expm1(-B))
    if kind is SDEKind.CVP:
        return PerturbationKernel(math.exp(0.5 * B), math.sqrt(math.expm1(B)))
    return PerturbationKernel(math.exp(0.5 * B), math.expm1(B))  # csubvp: s = f*g


def kernel_arrays(spec: DiffusionSpec, t: np.ndarray):
    """Vectorized (f(t), s(t)) over a time array."""
    t = np.asarray(t, float)
    if np.any(t < 0) or np.any(t > spec.T):
        raise DomainError("times outside [0, T]")
    kind = spec.kind
    if kind is SDEKind.OU:
        th = spec.theta
        f = np.exp(-th * t)
        s = np.sqrt(spec.sigma ** 2 * -np.expm1(-2.0 * th * t) / (2.0 * th))
        return f, s
    if kind is SDEKind.COU:
        th = spec.theta
        f = np.exp(th * t)
        s = np.sqrt(spec.sigma ** 2 * np.expm1(2.0 * th * t) / (2.0 * th))
        return f, s
    if kind is SDEKind.VE:
        log_ratio = math.log(spec.sigma_max / spec.sigma_min)
        s = spec.sigma_min * np.sqrt(np.expm1(2.0 * t / spec.T * log_ratio))
        return np.ones_like(t), s
    B = spec.beta_min * t + (t * t) / (2.0 * spec.T) * (spec.beta_max - spec.beta_min)
    if kind is SDEKind.VP:
        return np.exp(-0.5 * B), np.sqrt(-np.expm1(-B))
    if kind is SDEKind.SUBVP:
        return np.exp(-0.5 * B), -np.expm1(-B)
    if kind is SDEKind.CVP:
        return np.exp(0.5 * B), np.sqrt(np.expm1(B))
    return np.exp(0.5 * B), np.expm1(B)


def log_prior_variance(spec: DiffusionSpec) -> float:
    kind = spec.kind
    if kind is SDEKind.OU:
        return math.log(spec.sigma ** 2 / (2.0 * spec.theta))
    if kind is SDEKind.VE:
        return 2.0 * math.log(spec.sigma_max)
    if kind in (SDEKind.VP, SDEKind.SUBVP):
        return 0.0
    if kind is SDEKind.COU:
        th = spec.theta
        return (math.log(spec.sigma ** 2 / (2.0 * th))
                + 2.0 * th * spec.T + math.log1p(-math.exp(-2.0 * th * spec.T)))
    B = beta_integral(spec, spec.T)  # = T*(beta_min+beta_max)/2
    log_em1 = B + math.log1p(-math.exp(-B))
    return log_em1 if kind is SDEKind.CVP else 2.0 * log_em1


def prior(spec: DiffusionSpec) -> PriorSpec:
    """Family reference prior; rejects unrepresentably large variances."""
    log_var = log_prior_variance(spec)
    if log_var > math.log(MAX_PRIOR_VARIANCE):
        raise ConfigurationError(
            f"prior variance exp({log_var:.1f}) exceeds {MAX_PRIOR_VARIANCE:.0e}; "
            "reduce T or the beta/theta rates")
    mean = spec.mu if spec.kind is SDEKind.OU else np.zeros(spec.dim)
    return PriorSpec(mean=np.asarray(mean, float), variance=math.exp(log_var))


def contraction_profile(spec: DiffusionSpec) -> ContractionProfile:
    """Drift monotonicity rate r_b(t) = b(t) and its min over [0, T]."""
    def r_b(t: float) -> float:
        return drift_factor(spec, t)

    # b(t) is constant or monotone in t for every family.
    min_rate = min(r_b(0.0), r_b(spec.T))
    return ContractionProfile(r_b=r_b, min_rate=min_rate, is_cdpm=min_rate > 0.0)


def integral_drift_factor(spec: DiffusionSpec, a: float, b: float) -> float:
    """int_a^b b(s) ds in closed form."""
    a = _check_time(spec, a)
    b = _check_time(spec, b)
    kind = spec.kind
    if kind is SDEKind.OU:
        return -spec.theta * (b - a)
    if kind is SDEKind.COU:
        return spec.theta * (b - a)
    if kind is SDEKind.VE:
        return 0.0
    half = 0.5 * (beta_integral(spec, b) - beta_integral(spec, a))
    return half if kind in (SDEKind.CVP, SDEKind.CSUBVP) else -half


def integral_sigma2(spec: DiffusionSpec, a: float, b: float) -> float:
    """int_a^b sigma(s)^2 ds in closed form."""
    a = _check_time(spec, a)
    b = _check_time(spec, b)
    kind = spec.kind
    if kind in _THETA_KINDS:
        return spec.sigma ** 2 * (b - a)
    if kind is SDEKind.VE:
        return kernel(spec, b).cond_std ** 2 - kernel(spec, a).cond_std ** 2
    Ba, Bb = beta_integral(spec, a), beta_integral(spec, b)
    if kind in (SDEKind.VP, SDEKind.CVP):
        return Bb - Ba
    if kind is SDEKind.SUBVP:
        return (Bb - Ba) + 0.5 * (math.exp(-2.0 * Bb) - math.exp(-2.0 * Ba))
    return 0.5 * (math.exp(2.0 * Bb) - math.exp(2.0 * Ba)) - (Bb - Ba)  # csubvp
