"""Evaluators for the Wasserstein error bounds and the discretization fit.

u(t) integrates -2 r_b + (2L + 2h) sigma^2 over the backward window
[T - t, T]. Closed forms are used whenever the inputs come from a table
family; otherwise adaptive quadrature at 1e-10 absolute tolerance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError, DomainError
from .sde import (DiffusionSpec, SDEKind, beta_integral, diffusion_coeff,
                  drift_factor, integral_drift_factor, integral_sigma2)

QUAD_ABS_TOL = 1e-10
_EXP_OVERFLOW = 700.0  # exp argument beyond which float64 overflows


@dataclass
class BoundInputs:
    """Constants feeding the bound evaluators.

    Either `spec` is set (closed-form coefficient integrals) or `r_b` and
    `sigma` are callables integrated numerically. h=None lets
    sampling_error_bound pick the minimizing h on a log grid.
    """

    T: float
    L: float = 0.0
    epsilon: float = 0.0
    eta: float = 0.0
    h: float | None = None
    spec: DiffusionSpec | None = None
    r_b: object | None = None
    sigma: object | None = None
    L_s: float | None = None
    L_sigma: float | None = None
    R_sigma: float | None = None
    L_b: float | None = None
    R_s: float | None = None
    kappa: float | None = None
    second_moment: float | None = None

    def __post_init__(self):
        if self.spec is None and (self.r_b is None or self.sigma is None):
            raise ConfigurationError("need either spec or (r_b, sigma) callables")
        for name in ("L", "epsilon", "eta"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be nonnegative")
        if self.h is not None and self.h <= 0:
            raise ConfigurationError("h must be positive")

    @staticmethod
    def from_spec(spec: DiffusionSpec, **kw) -> "BoundInputs":
        return BoundInputs(T=spec.T, spec=spec, **kw)


def _int_rb(inp: BoundInputs, a: float, b: float) -> float:
    if inp.spec is not None:
        return integral_drift_factor(inp.spec, a, b)
    val, _ = quad(inp.r_b, a, b, epsabs=QUAD_ABS_TOL, limit=200)
    return val


def _int_sigma2(inp: BoundInputs, a: float, b: float) -> float:
    if inp.spec is not None:
        return integral_sigma2(inp.spec, a, b)
    val, _ = quad(lambda s: inp.sigma(s) ** 2, a, b, epsabs=QUAD_ABS_TOL, limit=200)
    return val


def _sigma2_at(inp: BoundInputs, t: float) -> float:
    if inp.spec is not None:
        return diffusion_coeff(inp.spec, t) ** 2
    return inp.sigma(t) ** 2


def u_of_t(inp: BoundInputs, t: float, h: float | None = None) -> float:
    """u(t) = int_{T-t}^{T} (-2 r_b(s) + (2L + 2h) sigma^2(s)) ds."""
    if not 0.0 <= t <= inp.T:
        raise DomainError(f"t={t} outside [0, T]")
    hh = inp.h if h is None else h
    if hh is None:
        raise ConfigurationError("u_of_t needs h")
    a = inp.T - t
    return -2.0 * _int_rb(inp, a, inp.T) + (2.0 * inp.L + 2.0 * hh) \
        * _int_sigma2(inp, a, inp.T)


def _bound_at_h(inp: BoundInputs, h: float) -> float:
    uT = u_of_t(inp, inp.T, h=h)
    if uT > _EXP_OVERFLOW:
        warnings.warn(f"u(T) = {uT:.3g} overflows exp(); bound reported as inf "
                      "(non-contractive configuration at large T)")
        return math.inf

    def integrand(t):
        # u(T) - u(T-t) = int_0^t (-2 r_b + (2L+2h) sigma^2) ds
        w = -2.0 * _int_rb(inp, 0.0, t) + (2.0 * inp.L + 2.0 * h) \
            * _int_sigma2(inp, 0.0, t)
        return _sigma2_at(inp, t) * math.exp(min(w, _EXP_OVERFLOW))

    integral, _ = quad(integrand, 0.0, inp.T, epsabs=QUAD_ABS_TOL, limit=500)
    return math.sqrt(inp.eta ** 2 * math.exp(uT)
                     + inp.epsilon ** 2 / (2.0 * h) * integral)


def sampling_error_bound(inp: BoundInputs, h: float | None = None) -> float:
    """Continuous-time Wasserstein bound sqrt(eta^2 e^{u(T)} + ...).

    With h unset, minimizes over a log grid (the free parameter h only
    tightens or loosens the bound).
    """
    hh = h if h is not None else inp.h
    if inp.epsilon == 0.0 and inp.eta == 0.0:
        return 0.0
    if hh is not None:
        return _bound_at_h(inp, hh)
    grid = np.logspace(-3, 2, 61)
    return float(min(_bound_at_h(inp, float(g)) for g in grid))


def cvp_bound(inp: BoundInputs) -> float:
    """Squared-Wasserstein bound for the contractive VP family.

    Uses the explicit exponent upper bound
    -int_0^T beta + 2 beta_max h T - (2 kappa / (kappa+1)) (1 - e^{-beta_min T})
    together with eta^2 <= e^{int beta} E|x|^2, so the first term becomes
    E|x|^2 exp(2 beta_max h T - (2 kappa/(kappa+1))(1 - e^{-beta_min T})).
    """
    spec = inp.spec
    if spec is None or spec.kind is not SDEKind.CVP:
        raise ConfigurationError("cvp_bound needs BoundInputs built from a CVP spec")
    if inp.kappa is None or inp.kappa <= 0:
        raise ConfigurationError("cvp_bound needs kappa > 0")
    if inp.second_moment is None:
        raise ConfigurationError("cvp_bound needs second_moment")
    kap = inp.kappa
    h_cap = min(0.5, kap / ((1.0 + kap) * spec.beta_max * spec.T))
    h = inp.h
    if h is None:
        h = 0.5 * h_cap  # half the admissible cap
    if not 0.0 < h < h_cap:
        raise DomainError(
            f"h={h} outside the admissible range (0, {h_cap:.6g}) = "
            f"(0, min(1/2, kappa/((1+kappa) beta_max T)))")
    expo = (2.0 * spec.beta_max * h * spec.T
            - 2.0 * kap / (kap + 1.0) * -math.expm1(-spec.beta_min * spec.T))
    return inp.second_moment * math.exp(expo) \
        + inp.epsilon ** 2 / (2.0 * h * (1.0 - 2.0 * h))


@dataclass
class OrderFit:
    slope: float
    intercept: float
    residual_std: float
    monotone: bool


def discretization_order(errors) -> OrderFit:
    """Least-squares slope of log error against log step size.

    `errors` is a list of (delta, w2) pairs, at least 3, with deltas
    halving. A non-monotone error sequence is flagged, not rejected.
    """
    pts = sorted((float(d), float(e)) for d, e in errors)
    if len(pts) < 3:
        raise ConfigurationError("need at least 3 (delta, error) points")
    deltas = np.array([p[0] for p in pts])
    errs = np.array([p[1] for p in pts])
    if np.any(errs <= 0):
        raise ConfigurationError("errors must be positive for a log-log fit")
    ratios = deltas[1:] / deltas[:-1]
    if not np.allclose(ratios, 2.0, rtol=0.26):
        raise ConfigurationError("deltas must form a halving sequence")
    slope, intercept = np.polyfit(np.log(deltas), np.log(errs), 1)
    resid = np.log(errs) - (slope * np.log(deltas) + intercept)
    monotone = bool(np.all(np.diff(errs) >= 0))
    if not monotone:
        warnings.warn("W2 errors are not monotone in delta; slope fit may be noisy")
    return OrderFit(slope=float(slope), intercept=float(intercept),
                    residual_std=float(resid.std()), monotone=monotone)
