"""Change of variables between the VE clock and the contractive subVP clock.

With f(t) the contractive mean factor and g(t) = f(t) - 1/f(t), the two
marginals satisfy p_c(t, x) = f(t)^{-d} p_ve(tau(t), x / f(t)) whenever
the VE variance range covers g(T)^2. Scores transport with a 1/f(t)
chain-rule factor; the factor can be dropped for ablation against the
approximate statement without it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .scores import ScoreField
from .sde import DiffusionSpec, SDEKind, kernel


@dataclass(frozen=True)
class PreconditionReport:
    ok: bool
    g2_at_T: float
    sigma_gap: float  # sigma_max^2 - sigma_min^2
    max_admissible_T: float


@dataclass(frozen=True)
class TransformMap:
    ve_spec: DiffusionSpec
    c_spec: DiffusionSpec

    def __post_init__(self):
        if self.ve_spec.kind is not SDEKind.VE:
            raise ConfigurationError("ve_spec must be a VE family spec")
        if self.c_spec.kind is not SDEKind.CSUBVP:
            raise ConfigurationError("c_spec must be a contractive subVP spec")
        if abs(self.ve_spec.T - self.c_spec.T) > 0:
            raise ConfigurationError("both specs must share the horizon T")
        if self.ve_spec.dim != self.c_spec.dim:
            raise ConfigurationError("both specs must share dim")

    def f(self, t: float) -> float:
        return kernel(self.c_spec, t).mean_factor

    def g(self, t: float) -> float:
        ft = self.f(t)
        return ft - 1.0 / ft

    def g2(self, t: float) -> float:
        return self.g(t) ** 2


def check_precondition(tmap: TransformMap) -> PreconditionReport:
    """Compare g(T)^2 against sigma_max^2 - sigma_min^2; report headroom.

    The largest admissible horizon solves g_T'(T') ^2 = gap with the same
    beta range (the schedule rescales with its own horizon, so f(T')^2 =
    exp(T' (beta_min + beta_max) / 2) regardless of the clock).
    """
    ve = tmap.ve_spec
    gap = ve.sigma_max ** 2 - ve.sigma_min ** 2
    g2_T = tmap.g2(tmap.c_spec.T)
    c = tmap.c_spec
    # (sqrt(F) - 1/sqrt(F))^2 = gap  =>  F^2 - (2 + gap) F + 1 = 0
    F = ((2.0 + gap) + math.sqrt((2.0 + gap) ** 2 - 4.0)) / 2.0
    t_max = 2.0 * math.log(F) / (c.beta_min + c.beta_max)
    return PreconditionReport(ok=g2_T < gap, g2_at_T=g2_T, sigma_gap=gap,
                              max_admissible_T=t_max)


def _require_precondition(tmap: TransformMap):
    rep = check_precondition(tmap)
    if not rep.ok:
        raise ConfigurationError(
            f"variance-range precondition violated: g(T)^2 = {rep.g2_at_T:.6g} "
            f">= sigma_max^2 - sigma_min^2 = {rep.sigma_gap:.6g}; "
            f"largest admissible T is {rep.max_admissible_T:.6g}")
    return rep


def tau(tmap: TransformMap, t: float) -> float:
    """Time map into the VE clock: s_ve(tau(t))^2 = g(t)^2."""
    t = float(t)
    if not 0.0 <= t <= tmap.c_spec.T:
        raise DomainError(f"t={t} outside [0, T]")
    _require_precondition(tmap)
    ve = tmap.ve_spec
    log_ratio = math.log(ve.sigma_max / ve.sigma_min)
    return ve.T / 2.0 * math.log1p(tmap.g2(t) / ve.sigma_min ** 2) / log_ratio


def transport_score(tmap: TransformMap, s_ve: ScoreField,
                    paper_literal: bool = False) -> ScoreField:
    """Score field on the contractive clock built from a VE score field.

    Default includes the 1/f(t) chain-rule factor forced by the density
    identity; paper_literal=True reproduces the approximate statement
    without it.
    """
    _require_precondition(tmap)

    def fn(t, x, counter=None):
        ft = tmap.f(float(t))
        val = s_ve(tau(tmap, float(t)), np.asarray(x, float) / ft, counter=counter)
        return val if paper_literal else val / ft

    logdensity = None
    if s_ve.logdensity is not None:
        d = tmap.c_spec.dim

        def logdensity(t, x):
            ft = tmap.f(float(t))
            return s_ve.logdensity(tau(tmap, float(t)), np.asarray(x, float) / ft) \
                - d * math.log(ft)

    return _TransportedField(fn, logdensity)


class _TransportedField(ScoreField):
    def __init__(self, fn, logdensity):
        super().__init__(fn, logdensity=logdensity)

    def __call__(self, t, x, counter=None):
        return self._fn(t, x, counter=counter)


def transport_logdensity(tmap: TransformMap, logdensity_ve, t: float, x):
    """log p_c(t, x) = -d log f(t) + log p_ve(tau(t), x / f(t))."""
    ft = tmap.f(float(t))
    d = tmap.c_spec.dim
    return logdensity_ve(tau(tmap, float(t)), np.asarray(x, float) / ft) \
        - d * math.log(ft)
