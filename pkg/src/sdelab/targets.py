"""Analytically tractable targets: isotropic Gaussian mixtures.

A point mass is the variance-0 special case of a one-component mixture,
and an empirical dataset is a mixture with one variance-0 component per
data point. Pushing a mixture through the Gaussian transition kernel
keeps it a mixture, which gives closed-form marginals and scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, SingularDensityError
from .rng import ROLE_DATA, stream
from .sde import DiffusionSpec, kernel, kernel_arrays


@dataclass(frozen=True)
class MixtureTarget:
    """Isotropic Gaussian mixture sum_i w_i N(means_i, vars_i * I)."""

    weights: np.ndarray
    means: np.ndarray      # (k, d)
    variances: np.ndarray  # (k,), entries >= 0; 0 encodes a point mass

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, float))
        m = np.atleast_2d(np.asarray(self.means, float))
        v = np.atleast_1d(np.asarray(self.variances, float))
        if not (len(w) == len(m) == len(v) >= 1):
            raise ConfigurationError("weights, means, vars must have equal length >= 1")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ConfigurationError("weights must sum to 1 within 1e-12")
        if np.any(w < 0) or np.any(v < 0):
            raise ConfigurationError("weights and variances must be nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def second_moment(self) -> float:
        """E|X|^2."""
        return float(np.sum(self.weights * (np.sum(self.means ** 2, axis=1)
                                            + self.dim * self.variances)))

    def sample(self, n: int, seed: int) -> np.ndarray:
        rng = stream(seed, ROLE_DATA)
        idx = rng.choice(self.n_components, size=n, p=self.weights)
        x = self.means[idx].copy()
        std = np.sqrt(self.variances[idx])[:, None]
        x += std * rng.standard_normal((n, self.dim))
        return x

    def to_dict(self) -> dict:
        return {
            "weights": list(map(float, self.weights)),
            "means": [list(map(float, m)) for m in self.means],
            "vars": list(map(float, self.variances)),
        }

    @staticmethod
    def from_dict(d: dict) -> "MixtureTarget":
        return MixtureTarget(np.asarray(d["weights"], float),
                             np.asarray(d["means"], float),
                             np.asarray(d["vars"], float))


def point_mass(x0, dim: int | None = None) -> MixtureTarget:
    x0 = np.atleast_1d(np.asarray(x0, float))
    if dim is not None and x0.size == 1:
        x0 = np.full(dim, x0[0])
    return MixtureTarget(np.array([1.0]), x0[None, :], np.array([0.0]))


def gaussian(mean, variance: float) -> MixtureTarget:
    mean = np.atleast_1d(np.asarray(mean, float))
    return MixtureTarget(np.array([1.0]), mean[None, :], np.array([float(variance)]))


def marginal_params(spec: DiffusionSpec, target: MixtureTarget, t):
    """Component means/variances of the forward marginal at time(s) t.

    Scalar t gives means (k, d) and vars (k,); an array t of shape (n,)
    gives per-sample means (n, k, d) and vars (n, k).
    """
    if np.ndim(t) == 0:
        k = kernel(spec, float(t))
        f, s2 = k.mean_factor, k.cond_std ** 2
        means_t = spec.mu[None, :] + (target.means - spec.mu[None, :]) * f
        vars_t = f * f * target.variances + s2
        return target.weights, means_t, vars_t
    f, s = kernel_arrays(spec, np.asarray(t, float))
    centered = target.means - spec.mu[None, :]
    means_t = spec.mu[None, None, :] + f[:, None, None] * centered[None, :, :]
    vars_t = (f ** 2)[:, None] * target.variances[None, :] + (s ** 2)[:, None]
    return target.weights, means_t, vars_t


def _as_batch(x, dim):
    x = np.asarray(x, float)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.shape[-1] != dim:
        raise ConfigurationError(f"x has dim {x2.shape[-1]}, expected {dim}")
    return x2, single


def _mixture_pieces(spec, target, t, x):
    """Shared (n, k) quantities of the marginal mixture at x.

    Everything is built from matrix products, never an (n, k, d) array, so
    large empirical mixtures stay cheap. Returns (logp, vars, means-dot
    helpers) where logp are unnormalized component log densities.
    """
    w, m, v = marginal_params(spec, target, t)
    if np.any(v <= 0.0):
        raise SingularDensityError(
            "marginal is degenerate: point-mass component at t with s(t)=0")
    d = target.dim
    if m.ndim == 2:  # scalar t: means (k, d), vars (k,)
        xm = x @ m.T                                   # (n, k)
        sq = (np.sum(x * x, axis=1)[:, None]
              - 2.0 * xm + np.sum(m * m, axis=1)[None, :])
        vars_nk = np.broadcast_to(v[None, :], sq.shape)
        mv = m / v[:, None]                            # (k, d)

        def score_from_gamma(gamma):
            gv = gamma / vars_nk
            return gv @ m - x * np.sum(gv, axis=1)[:, None]
    else:  # per-sample t: means (n, k, d) = mu + f_n * centered_k, vars (n, k)
        f, _ = kernel_arrays(spec, np.asarray(t, float))
        centered = target.means - spec.mu[None, :]
        # m_nk = mu + f_n c_k, so x.m_nk and |m_nk|^2 reduce to matrix products
        c2 = np.sum(centered * centered, axis=1)
        cmu = centered @ spec.mu
        mu2 = float(spec.mu @ spec.mu)
        m2 = (f ** 2)[:, None] * c2[None, :] + 2.0 * f[:, None] * cmu[None, :] + mu2
        xm = (x @ centered.T) * f[:, None] + (x @ spec.mu)[:, None]
        sq = np.sum(x * x, axis=1)[:, None] - 2.0 * xm + m2
        vars_nk = v

        def score_from_gamma(gamma):
            gv = gamma / vars_nk
            mu_term = np.sum(gv, axis=1)[:, None] * spec.mu[None, :]
            return (gv @ centered) * f[:, None] + mu_term \
                - x * np.sum(gv, axis=1)[:, None]
    sq = np.maximum(sq, 0.0)
    logp = (np.log(w)[None, :] - 0.5 * sq / vars_nk
            - 0.5 * d * (np.log(2.0 * np.pi) + np.log(vars_nk)))
    return logp, vars_nk, sq, score_from_gamma


def marginal_logdensity(spec: DiffusionSpec, target: MixtureTarget, t, x):
    """log p(t, x) of the forward marginal, via log-sum-exp."""
    x2, single = _as_batch(x, target.dim)
    logp, _, _, _ = _mixture_pieces(spec, target, t, x2)
    out = logsumexp(logp, axis=1)
    return float(out[0]) if single else out


def _responsibilities(logp):
    logp = logp - logsumexp(logp, axis=1, keepdims=True)
    return np.exp(logp)


def exact_score(spec: DiffusionSpec, target: MixtureTarget, t, x):
    """grad_x log p(t, x): responsibility-weighted Gaussian scores."""
    x2, single = _as_batch(x, target.dim)
    logp, _, _, score_from_gamma = _mixture_pieces(spec, target, t, x2)
    out = score_from_gamma(_responsibilities(logp))
    return out[0] if single else out


def exact_score_divergence(spec: DiffusionSpec, target: MixtureTarget, t, x):
    """div_x of the exact score; needed by the implicit objective."""
    x2, single = _as_batch(x, target.dim)
    d = target.dim
    logp, vars_nk, sq, score_from_gamma = _mixture_pieces(spec, target, t, x2)
    gamma = _responsibilities(logp)
    s = score_from_gamma(gamma)
    # sum_i gamma_i (|u_i|^2 - d / v_i) - |s|^2 with |u_i|^2 = sq_i / v_i^2
    out = (np.sum(gamma * (sq / vars_nk ** 2 - d / vars_nk), axis=1)
           - np.sum(s * s, axis=1))
    return float(out[0]) if single else out


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float
    exact: bool


def score_lipschitz(spec: DiffusionSpec, target: MixtureTarget, t: float,
                    n_samples: int = 10_000, seed: int = 0) -> LipschitzEstimate:
    """Lipschitz constant of x -> score(t, x).

    Exact 1/(f^2 v + s^2) for a single component; for mixtures, a sampled
    supremum of the score-Jacobian spectral norm over kernel draws plus a
    3-sigma tail margin (an estimate, flagged as such).
    """
    w, m, v = marginal_params(spec, target, t)
    if target.n_components == 1:
        return LipschitzEstimate(1.0 / float(v[0]), exact=True)
    rng = stream(seed, ROLE_DATA, 1)
    idx = rng.choice(len(w), size=n_samples, p=w)
    x = m[idx] + np.sqrt(v[idx])[:, None] * rng.standard_normal((n_samples, target.dim))
    norms = _score_jacobian_specnorm(w, m, v, x)
    return LipschitzEstimate(float(norms.max() + 3.0 * norms.std()), exact=False)


def _score_jacobian_specnorm(w, m, v, x):
    d = m.shape[1]
    diff = m[None, :, :] - x[:, None, :]
    sq = np.sum(diff ** 2, axis=2)
    logp = (np.log(w)[None, :] - 0.5 * sq / v[None, :]
            - 0.5 * d * (np.log(2.0 * np.pi) + np.log(v))[None, :])
    gamma = _responsibilities(logp)
    u = diff / v[None, :, None]
    s = np.sum(gamma[:, :, None] * u, axis=1)
    # J = sum_i gamma_i (u_i u_i^T - I/v_i) - s s^T
    uu = np.einsum("nk,nki,nkj->nij", gamma, u, u)
    diag = np.sum(gamma / v[None, :], axis=1)
    J = uu - s[:, :, None] * s[:, None, :]
    J[:, np.arange(d), np.arange(d)] -= diag[:, None]
    return np.linalg.norm(J, ord=2, axis=(1, 2))
