"""Forward and reverse-time integration of the linear SDE families.

The reverse process runs on the backward clock t in [0, T - t_eps] with
physical time s = T - t; all coefficients and the score are evaluated at
the left endpoint of each step. Integration stops at physical time t_eps
rather than 0 so degenerate targets keep finite scores; final samples are
reported at t_eps.

Noise streams are keyed (seed, role, block) with fixed-size path blocks,
so results are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import sde as sdem
from .errors import ConfigurationError, IntegrationDivergedError
from .rng import (BLOCK_SIZE, ROLE_CORRECTOR, ROLE_INIT, ROLE_PREDICTOR,
                  block_slices, stream)
from .scores import ScoreField
from .sde import DiffusionSpec, PriorSpec, prior
from .targets import MixtureTarget


@dataclass
class SamplerConfig:
    n_steps: int
    n_paths: int
    seed: int
    method: str = "em"  # em | pc
    snr: float = 0.0
    corrector_steps: int = 0
    corrector_rule: str = "batch"
    t_eps: float | None = None
    save_every: int | None = None
    threads: int = 1

    def __post_init__(self):
        if self.n_steps < 1 or self.n_paths < 1:
            raise ConfigurationError("n_steps and n_paths must be positive")
        if self.method not in ("em", "pc"):
            raise ConfigurationError("method must be 'em' or 'pc'")
        if self.method == "pc" and self.corrector_steps < 1:
            raise ConfigurationError("pc needs corrector_steps >= 1")
        if self.snr < 0:
            raise ConfigurationError("snr must be nonnegative")


@dataclass
class ReverseProcess:
    spec: DiffusionSpec
    score: ScoreField
    init: PriorSpec | np.ndarray | None = None  # None -> family prior

    def init_prior(self) -> PriorSpec | None:
        if self.init is None:
            return prior(self.spec)
        if isinstance(self.init, PriorSpec):
            return self.init
        return None


@dataclass
class TrajectoryBatch:
    times: np.ndarray              # backward clock, strictly increasing
    states: np.ndarray             # (n_saves, n_paths, d)
    seed: int
    t_eps: float
    T: float

    @property
    def physical_times(self) -> np.ndarray:
        return self.T - self.times

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def export_csv(self, path) -> None:
        d = self.states.shape[2]
        header = "path,step,t," + ",".join(f"x{j}" for j in range(d))
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for k, t in enumerate(self.times):
                for p in range(self.states.shape[1]):
                    row = ",".join(f"{v:.17g}" for v in self.states[k, p])
                    fh.write(f"{p},{k},{t:.17g},{row}\n")


def reverse_drift(proc: ReverseProcess, t: float, x: np.ndarray,
                  counter=None) -> np.ndarray:
    """Drift of the reversed SDE at backward time t."""
    spec = proc.spec
    s_phys = spec.T - t
    b = sdem.drift_factor(spec, s_phys)
    sig2 = sdem.diffusion_coeff(spec, s_phys) ** 2
    return -b * (x - spec.mu[None, :]) + sig2 * proc.score(s_phys, x, counter=counter)


def corrector_update(g: np.ndarray, z: np.ndarray, snr: float,
                     rule: str = "batch") -> np.ndarray:
    """One Langevin corrector move with step eps = 2 (snr |z| / |g|)^2.

    rule='batch' (default) uses batch-mean norms, the convention behind
    the published snr values; it is the stable choice because per-path
    norms explode in density gaps where the score vanishes. rule='per-path'
    sizes each path by its own norms. Paths with zero score norm skip the
    move entirely under either rule.
    """
    g_norm = np.linalg.norm(g, axis=1)
    z_norm = np.linalg.norm(z, axis=1)
    ok = g_norm > 0.0
    step = np.zeros_like(g_norm)
    if rule == "batch":
        mean_g = float(g_norm.mean())
        if mean_g > 0.0:
            step[ok] = 2.0 * (snr * float(z_norm.mean()) / mean_g) ** 2
    elif rule == "per-path":
        step[ok] = 2.0 * (snr * z_norm[ok] / g_norm[ok]) ** 2
    else:
        raise ConfigurationError(f"unknown corrector rule {rule!r}")
    return step[:, None] * g + np.sqrt(2.0 * step)[:, None] * z


def langevin_chain(score: ScoreField, t_phys: float, x0: np.ndarray,
                   n_sweeps: int, snr: float, seed: int,
                   rule: str = "batch") -> np.ndarray:
    """Iterate the corrector at a frozen physical time; returns the batch."""
    x = np.array(x0, float, copy=True)
    rng = stream(seed, ROLE_CORRECTOR, 0)
    for j in range(n_sweeps):
        g = score(t_phys, x, counter=(0, j, 1))
        z = rng.standard_normal(x.shape)
        x += corrector_update(g, z, snr, rule=rule)
    return x


def _init_block(proc: ReverseProcess, lo: int, hi: int, seed: int,
                block: int, dim: int) -> np.ndarray:
    pr = proc.init_prior()
    if pr is not None:
        rng = stream(seed, ROLE_INIT, block)
        return pr.mean[None, :] + pr.std * rng.standard_normal((hi - lo, dim))
    samples = np.asarray(proc.init, float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] >= hi:
        return samples[lo:hi].astype(float, copy=True)
    rng = stream(seed, ROLE_INIT, block)
    idx = rng.integers(0, samples.shape[0], size=hi - lo)
    return samples[idx].astype(float, copy=True)


def _integrate_block(proc: ReverseProcess, cfg: SamplerConfig, lo: int, hi: int,
                     block: int, save_idx: set, x=None):
    """One path block; returns the requested snapshots keyed by step."""
    spec = proc.spec
    d = spec.dim
    t_eps = spec.t_eps if cfg.t_eps is None else cfg.t_eps
    delta = (spec.T - t_eps) / cfg.n_steps
    sq_delta = math.sqrt(delta)
    if x is None:
        x = _init_block(proc, lo, hi, cfg.seed, block, d)
    pred = stream(cfg.seed, ROLE_PREDICTOR, block)
    corr = stream(cfg.seed, ROLE_CORRECTOR, block) if cfg.method == "pc" else None
    saves = {}
    if 0 in save_idx:
        saves[0] = x.copy()
    mu = spec.mu[None, :]
    for k in range(1, cfg.n_steps + 1):
        s_left = spec.T - (k - 1) * delta
        b = sdem.drift_factor(spec, s_left)
        sig = sdem.diffusion_coeff(spec, s_left)
        g = proc.score(s_left, x, counter=(block, k, 0))
        x = x + (-b * (x - mu) + sig * sig * g) * delta \
            + sig * sq_delta * pred.standard_normal((hi - lo, d))
        if not np.all(np.isfinite(x)):
            raise IntegrationDivergedError(k)
        if corr is not None:
            s_now = spec.T - k * delta
            for j in range(cfg.corrector_steps):
                gc = proc.score(s_now, x, counter=(block, k, 1 + j))
                z = corr.standard_normal((hi - lo, d))
                x = x + corrector_update(gc, z, cfg.snr, rule=cfg.corrector_rule)
            if not np.all(np.isfinite(x)):
                raise IntegrationDivergedError(k)
        if k in save_idx:
            saves[k] = x.copy()
    return saves


def _save_indices(cfg: SamplerConfig) -> list[int]:
    if cfg.save_every is None:
        return [cfg.n_steps]
    idx = list(range(0, cfg.n_steps + 1, cfg.save_every))
    if idx[-1] != cfg.n_steps:
        idx.append(cfg.n_steps)
    return idx


def _run(proc: ReverseProcess, cfg: SamplerConfig) -> TrajectoryBatch:
    spec = proc.spec
    t_eps = spec.t_eps if cfg.t_eps is None else cfg.t_eps
    delta = (spec.T - t_eps) / cfg.n_steps
    save_idx = _save_indices(cfg)
    save_set = set(save_idx)
    blocks = block_slices(cfg.n_paths)

    def work(args):
        bi, (lo, hi) = args
        return lo, hi, _integrate_block(proc, cfg, lo, hi, bi, save_set)

    jobs = list(enumerate(blocks))
    if cfg.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            results = list(ex.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    states = np.empty((len(save_idx), cfg.n_paths, spec.dim))
    pos = {k: i for i, k in enumerate(save_idx)}
    for lo, hi, saves in results:
        for k, arr in saves.items():
            states[pos[k], lo:hi] = arr
    times = np.asarray(save_idx, float) * delta
    return TrajectoryBatch(times=times, states=states, seed=cfg.seed,
                           t_eps=t_eps, T=spec.T)


def sample_em(proc: ReverseProcess, cfg: SamplerConfig) -> TrajectoryBatch:
    """Euler-Maruyama integration of the reversed SDE."""
    if cfg.method != "em":
        raise ConfigurationError("sample_em needs cfg.method == 'em'")
    return _run(proc, cfg)


def sample_pc(proc: ReverseProcess, cfg: SamplerConfig) -> TrajectoryBatch:
    """Predictor-corrector: EM predictor plus Langevin corrector sweeps.

    Each corrector move uses step 2 * (snr * |z| / |score|)^2 per path;
    paths with zero score norm skip the move for that sweep.
    """
    if cfg.method != "pc":
        raise ConfigurationError("sample_pc needs cfg.method == 'pc'")
    return _run(proc, cfg)


def sample(proc: ReverseProcess, cfg: SamplerConfig) -> TrajectoryBatch:
    return sample_em(proc, cfg) if cfg.method == "em" else sample_pc(proc, cfg)


def sample_forward(spec: DiffusionSpec, target: MixtureTarget, t: float, n: int,
                   seed: int, mode: str = "exact", n_steps: int | None = None,
                   save_at: list | None = None):
    """Draw X_t under the forward SDE.

    mode='exact' draws from the closed-form transition kernel; mode='em'
    integrates the forward SDE (default step <= 1e-3). With save_at, the
    EM mode returns {time: states} snapshots from a single integration.
    """
    if mode == "exact":
        x0 = target.sample(n, seed)
        k = sdem.kernel(spec, t)
        mean_t = spec.mu[None, :] + (x0 - spec.mu[None, :]) * k.mean_factor
        rng = stream(seed, ROLE_PREDICTOR)
        return mean_t + k.cond_std * rng.standard_normal((n, target.dim))
    if mode != "em":
        raise ConfigurationError("mode must be 'exact' or 'em'")
    if t == 0.0:
        return target.sample(n, seed)
    if n_steps is None:
        n_steps = max(int(math.ceil(t / 1e-3)), 1)
    delta = t / n_steps
    sq_delta = math.sqrt(delta)
    snap_steps = {} if save_at is None else \
        {int(round(float(tt) / delta)): float(tt) for tt in save_at}
    x0 = target.sample(n, seed)
    d = x0.shape[1]
    mu = spec.mu[None, :]
    mu_zero = not np.any(spec.mu)
    # precompute left-endpoint coefficients once per step
    t_left = np.arange(n_steps) * delta
    growth = 1.0 + delta * np.array([sdem.drift_factor(spec, tl) for tl in t_left])
    noise_scale = sq_delta * np.array([sdem.diffusion_coeff(spec, tl)
                                       for tl in t_left])
    out = {}
    if 0 in snap_steps:
        out[snap_steps[0]] = x0.copy()
    final = np.empty_like(x0)
    snaps = {k: np.empty_like(x0) for k in snap_steps if k > 0}
    for bi, (lo, hi) in enumerate(block_slices(n)):
        rng = stream(seed, ROLE_PREDICTOR, bi)
        x = x0[lo:hi].copy()
        for k in range(1, n_steps + 1):
            if not mu_zero:
                x -= mu
            np.multiply(x, growth[k - 1], out=x)
            if not mu_zero:
                x += mu
            z = rng.standard_normal((hi - lo, d))
            z *= noise_scale[k - 1]
            x += z
            if k in snaps:
                snaps[k][lo:hi] = x
        if not np.all(np.isfinite(x)):
            raise IntegrationDivergedError(n_steps)
        final[lo:hi] = x
    for k, tt in snap_steps.items():
        if k > 0:
            out[tt] = snaps[k]
    if save_at is not None:
        return out
    return final


@dataclass
class DecayRecord:
    times: np.ndarray
    rms: np.ndarray
    rate: float
    intercept: float
    degenerate: bool = False


def coupled_contraction(proc: ReverseProcess, cfg: SamplerConfig, init_pair,
                        fit_window: tuple | None = None,
                        record_every: int = 1) -> DecayRecord:
    """Integrate two batches under identical noise; fit log-RMS decay.

    init_pair is (x_init, y_init) arrays of shape (n_paths, d). The drift
    difference of coupled paths is deterministic for affine scores, so the
    fitted exponential rate is essentially noise-free.
    """
    spec = proc.spec
    t_eps = spec.t_eps if cfg.t_eps is None else cfg.t_eps
    delta = (spec.T - t_eps) / cfg.n_steps
    x0, y0 = (np.asarray(a, float) for a in init_pair)
    if x0.ndim == 1:
        x0 = x0[:, None]
    if y0.ndim == 1:
        y0 = y0[:, None]
    if x0.shape != (cfg.n_paths, spec.dim) or y0.shape != x0.shape:
        raise ConfigurationError("init_pair must be two (n_paths, dim) arrays")

    save = set(range(0, cfg.n_steps + 1, record_every)) | {cfg.n_steps}
    times, rms = [], []
    x, y = x0.copy(), y0.copy()
    mu = spec.mu[None, :]
    pred = stream(cfg.seed, ROLE_PREDICTOR, 0)
    sq_delta = math.sqrt(delta)
    if 0 in save:
        times.append(0.0)
        rms.append(math.sqrt(float(np.mean(np.sum((x - y) ** 2, axis=1)))))
    for k in range(1, cfg.n_steps + 1):
        s_left = spec.T - (k - 1) * delta
        b = sdem.drift_factor(spec, s_left)
        sig = sdem.diffusion_coeff(spec, s_left)
        z = pred.standard_normal((cfg.n_paths, spec.dim))
        gx = proc.score(s_left, x, counter=(0, k, 0))
        gy = proc.score(s_left, y, counter=(0, k, 0))
        x = x + (-b * (x - mu) + sig * sig * gx) * delta + sig * sq_delta * z
        y = y + (-b * (y - mu) + sig * sig * gy) * delta + sig * sq_delta * z
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise IntegrationDivergedError(k)
        if k in save:
            times.append(k * delta)
            rms.append(math.sqrt(float(np.mean(np.sum((x - y) ** 2, axis=1)))))
    times = np.asarray(times)
    rms = np.asarray(rms)
    if fit_window is not None:
        m = (times >= fit_window[0]) & (times <= fit_window[1])
        ft, fr = times[m], rms[m]
    else:
        ft, fr = times, rms
    if np.all(fr < 1e-300):
        return DecayRecord(times, rms, rate=0.0, intercept=-np.inf, degenerate=True)
    coef = np.polyfit(ft, np.log(fr), 1)
    return DecayRecord(times, rms, rate=float(coef[0]), intercept=float(coef[1]))
