"""Score fields: exact mixture scores, noise-injected wrappers, affine families."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import targets as tg
from .errors import ConfigurationError
from .rng import ROLE_SCORE_NOISE, stream
from .sde import DiffusionSpec


class ScoreField:
    """An evaluable score (t, x) -> R^d.

    `logdensity` and `divergence` are optional capabilities. `counter`
    lets callers address a reproducible point in a noise stream; exact
    fields ignore it.
    """

    def __init__(self, fn, logdensity=None, divergence=None):
        self._fn = fn
        self.logdensity = logdensity
        self.divergence = divergence

    def __call__(self, t: float, x: np.ndarray, counter=None) -> np.ndarray:
        return self._fn(t, x)


def mixture_score_field(spec: DiffusionSpec, target: tg.MixtureTarget) -> ScoreField:
    """Exact score of the forward marginal, with log-density and divergence."""
    return ScoreField(
        fn=lambda t, x: tg.exact_score(spec, target, t, x),
        logdensity=lambda t, x: tg.marginal_logdensity(spec, target, t, x),
        divergence=lambda t, x: tg.exact_score_divergence(spec, target, t, x),
    )


class NoiseMode(str, Enum):
    PER_EVAL_GAUSSIAN = "per-eval"
    FROZEN_OFFSET = "frozen"


@dataclass(frozen=True)
class NoiseModel:
    mode: NoiseMode = NoiseMode.PER_EVAL_GAUSSIAN
    epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", NoiseMode(self.mode))
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be nonnegative")

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "epsilon": self.epsilon, "seed": self.seed}

    @staticmethod
    def from_dict(d: dict) -> "NoiseModel":
        return NoiseModel(mode=NoiseMode(d.get("mode", "per-eval")),
                          epsilon=float(d.get("epsilon", 0.0)),
                          seed=int(d.get("seed", 0)))


class NoisyScoreField(ScoreField):
    """base(t, x) + injected error of magnitude epsilon.

    Per-eval mode draws a fresh Gaussian per call from a stream keyed by
    (seed, counter); mean squared injected error is epsilon^2 * d. Frozen
    mode adds epsilon * u for a unit vector u drawn once at construction.
    Callers may pass an explicit counter (ints) so that concurrent workers
    draw independent, reproducible noise.
    """

    def __init__(self, base: ScoreField, model: NoiseModel, dim: int):
        super().__init__(base._fn, base.logdensity, base.divergence)
        self.base = base
        self.model = model
        self._auto_counter = 0
        if model.mode is NoiseMode.FROZEN_OFFSET:
            u = stream(model.seed, ROLE_SCORE_NOISE).standard_normal(dim)
            norm = np.linalg.norm(u)
            self.offset = model.epsilon * (u / norm if norm > 0 else u)
        else:
            self.offset = None

    def __call__(self, t: float, x: np.ndarray, counter=None) -> np.ndarray:
        out = self.base(t, x)
        eps = self.model.epsilon
        if eps == 0.0:
            return out
        if self.model.mode is NoiseMode.FROZEN_OFFSET:
            return out + self.offset
        if counter is None:
            counter = (self._auto_counter,)
            self._auto_counter += 1
        elif np.isscalar(counter):
            counter = (int(counter),)
        rng = stream(self.model.seed, ROLE_SCORE_NOISE, *counter)
        return out + eps * rng.standard_normal(out.shape)


def noisy_score(base: ScoreField, model: NoiseModel, dim: int) -> ScoreField:
    """Wrap a field with the configured score-error model (epsilon=0 is a no-op)."""
    if model.epsilon == 0.0:
        return base
    return NoisyScoreField(base, model, dim)


class AffineScoreFamily:
    """s(t, x) = A(t) x + c(t), A and c piecewise linear over a time grid.

    The divergence is exactly d * A(t), so the implicit objective needs no
    differentiation. Parameters flatten to [A_0..A_{K-1}, c_00..c_{K-1,d-1}]
    for finite-difference gradients.
    """

    def __init__(self, time_grid, A, c):
        self.time_grid = np.asarray(time_grid, float)
        self.A = np.asarray(A, float)
        c = np.asarray(c, float)
        if c.ndim == 1:
            c = c[:, None]
        self.c = c
        if not (len(self.time_grid) == len(self.A) == len(self.c)):
            raise ConfigurationError("time_grid, A, c must have equal length")
        if np.any(np.diff(self.time_grid) <= 0):
            raise ConfigurationError("time_grid must be strictly increasing")

    @property
    def dim(self) -> int:
        return self.c.shape[1]

    def A_at(self, t):
        return np.interp(t, self.time_grid, self.A)

    def c_at(self, t):
        t = np.asarray(t, float)
        out = np.empty(t.shape + (self.dim,)) if t.ndim else np.empty(self.dim)
        for j in range(self.dim):
            out[..., j] = np.interp(t, self.time_grid, self.c[:, j])
        return out

    def evaluate(self, t, x):
        x = np.asarray(x, float)
        t = np.asarray(t, float)
        A = self.A_at(t)
        c = self.c_at(t)
        if x.ndim == 1:
            return A * x + c
        A = A[:, None] if A.ndim else A
        return A * x + c

    def divergence(self, t, x):
        x = np.asarray(x, float)
        div = self.dim * self.A_at(t)
        if x.ndim > 1 and np.ndim(div) == 0:
            return np.full(x.shape[0], div)
        return div

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.A, self.c.ravel()])

    def with_params(self, vec) -> "AffineScoreFamily":
        vec = np.asarray(vec, float)
        k = len(self.A)
        return AffineScoreFamily(self.time_grid, vec[:k], vec[k:].reshape(self.c.shape))

    def as_score_field(self) -> ScoreField:
        field = ScoreField(fn=self.evaluate, divergence=self.divergence)
        field.affine = self  # lets evaluators exploit the exact affine structure
        return field
