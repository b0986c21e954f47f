"""Experiment runners behind the CLI subcommands.

Each runner consumes an ExperimentConfig, writes CSV artifacts with a
provenance header plus matplotlib figures next to them, and returns an
ExperimentResult whose `ok` drives the process exit code. Sweep cells are
independent and may run in a thread pool; assembly order is fixed by the
cell key, so output bytes do not depend on the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import plots
from .bounds import BoundInputs, cvp_bound, sampling_error_bound, u_of_t
from .config import DEFAULTS_1D, ExperimentConfig, provenance_header
from .datasets import empirical_target, swiss_roll
from .errors import ConfigurationError, IntegrationDivergedError
from .sampler import ReverseProcess, SamplerConfig, sample, sample_forward
from .scores import NoiseModel, NoiseMode, mixture_score_field, noisy_score
from .sde import (CONTRACTIVE_KINDS, DiffusionSpec, SDEKind, diffusion_coeff,
                  drift_factor, kernel, prior)
from .rng import ROLE_INIT, stream
from .targets import MixtureTarget, gaussian, point_mass
from .transform import TransformMap, check_precondition, tau, transport_score
from .wasserstein import w2_assignment, w2_sorted_1d

ALL_FAMILIES = ["ou", "ve", "vp", "subvp", "cou", "cvp", "csubvp"]


@dataclass
class ExperimentResult:
    ok: bool
    files: list = field(default_factory=list)
    lines: list = field(default_factory=list)

    def say(self, line: str):
        self.lines.append(line)


def _family_spec(cfg: ExperimentConfig, family: str, context: str = "1d") -> DiffusionSpec:
    """Family spec from config with benchmark defaults filled in.

    Swiss-Roll runs default the beta families to the recommended
    (beta_min, beta_max, T) = (0.01, 8, 1) while the mean-reverting pair
    keeps the 1-D defaults.
    """
    sec = dict(cfg.sections.get("sde", {}))
    sec.pop("kind", None)
    sec.update(cfg.sections.get(family, {}))
    d = {"kind": family}
    for key in ("T", "dim", "theta", "sigma", "sigma_min", "sigma_max",
                "beta_min", "beta_max"):
        if key in sec:
            d[key] = float(sec[key]) if key != "dim" else int(sec[key])
    kind = SDEKind(family)
    if context == "swissroll":
        d.setdefault("dim", 2)
        if kind in (SDEKind.VP, SDEKind.SUBVP, SDEKind.CVP, SDEKind.CSUBVP):
            d.setdefault("beta_min", 0.01)
            d.setdefault("beta_max", 8.0)
            d.setdefault("T", 1.0)
        if kind is SDEKind.VE:
            d.setdefault("sigma_min", 0.05)
            d.setdefault("sigma_max", 2.0)
            d.setdefault("T", 1.0)
    needed = {"ou": ("theta", "sigma"), "cou": ("theta", "sigma"),
              "ve": ("sigma_min", "sigma_max")}.get(family, ("beta_min", "beta_max"))
    for key in needed + ("T", "dim"):
        d.setdefault(key, DEFAULTS_1D[key])
    return DiffusionSpec.from_dict(d)


def _write_csv(path, columns, rows, cfg: ExperimentConfig, seeds):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(provenance_header(cfg, seeds))
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _out_dir(cfg: ExperimentConfig) -> str:
    out = cfg.get("output", "dir", default="out")
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------- kernel check

def run_kernel_check(cfg: ExperimentConfig) -> ExperimentResult:
    """EM forward moments against the closed-form kernels, 3 MC SE gate."""
    res = ExperimentResult(ok=True)
    out = _out_dir(cfg)
    families = cfg.get_list("kernel_check", "families", default=ALL_FAMILIES, cast=str)
    n_paths = cfg.get("kernel_check", "n_paths", default=100_000, cast=int)
    dt = cfg.get("kernel_check", "dt", default=1e-3, cast=float)
    n_grid = cfg.get("kernel_check", "n_grid", default=3, cast=int)
    seed = cfg.get("kernel_check", "seed", default=20250809, cast=int)
    x0 = cfg.get("kernel_check", "x0", default=-1.0, cast=float)

    rows = []
    curves = {}
    for family in families:
        spec = _family_spec(cfg, family)
        T = spec.T
        ts = [T / 4, T / 2, T] if n_grid == 3 else list(np.linspace(T / n_grid, T, n_grid))
        target = point_mass(x0, dim=spec.dim)
        snaps = sample_forward(spec, target, T, n_paths, seed=seed, mode="em",
                               n_steps=max(int(round(T / dt)), 1), save_at=ts)
        fam_ok = True
        curve = []
        for t in ts:
            x = snaps[float(t)][:, 0]
            k = kernel(spec, float(t))
            mean_exact = float(spec.mu[0] + (x0 - spec.mu[0]) * k.mean_factor)
            var_exact = k.cond_std ** 2
            n = len(x)
            se_mean = x.std(ddof=1) / math.sqrt(n)
            var_hat = x.var(ddof=1)
            se_var = var_hat * math.sqrt(2.0 / (n - 1))
            z_mean = abs(x.mean() - mean_exact) / se_mean
            z_var = abs(var_hat - var_exact) / se_var
            for stat, sim, exact, se, z in (
                    ("mean", float(x.mean()), mean_exact, float(se_mean), float(z_mean)),
                    ("var", float(var_hat), float(var_exact), float(se_var), float(z_var))):
                ok = z <= 3.0
                fam_ok &= ok
                rows.append([family, float(t), stat, sim, exact, se, z,
                             "PASS" if ok else "FAIL"])
            curve.append((float(t), float(x.mean()), mean_exact,
                          math.sqrt(var_hat), k.cond_std))
        curves[family] = curve
        res.ok &= fam_ok
        res.say(f"kernel-check {family}: {'PASS' if fam_ok else 'FAIL'}")
    csv = _write_csv(os.path.join(out, "kernel_check.csv"),
                     ["family", "t", "stat", "simulated", "exact", "mc_se", "z", "status"],
                     rows, cfg, [seed])
    res.files.append(csv)
    res.files.append(plots.kernel_check_figure(curves, os.path.join(out, "kernel_check.png")))
    return res


# -------------------------------------------------------------------- compare

def _compare_cell(cfg, family, eps, delta, seed_idx, base_seed, noise_cfg,
                  target, n_metric):
    spec = _family_spec(cfg, family)
    t_eps = spec.t_eps
    n_steps = max(int(round((spec.T - t_eps) / delta)), 1)
    noise = NoiseModel(mode=noise_cfg.mode, epsilon=eps,
                       seed=noise_cfg.seed + seed_idx)
    score = noisy_score(mixture_score_field(spec, target), noise, spec.dim)
    proc = ReverseProcess(spec=spec, score=score)
    scfg = SamplerConfig(n_steps=n_steps, n_paths=n_metric,
                         seed=base_seed + 1000 * seed_idx, method="em")
    try:
        batch = sample(proc, scfg)
    except IntegrationDivergedError:
        return float("nan"), "diverged"
    ref = target.sample(n_metric, seed=base_seed + 7777 + seed_idx)
    return w2_sorted_1d(batch.final[:, 0], ref[:, 0]).value, "ok"


def run_compare(cfg: ExperimentConfig) -> ExperimentResult:
    """Noise-robustness sweep over (family, epsilon, delta, seed)."""
    res = ExperimentResult(ok=True)
    out = _out_dir(cfg)
    families = cfg.get_list("compare", "families", default=["ou", "cou"], cast=str)
    if len(families) < 2:
        raise ConfigurationError("compare needs two or more families")
    eps_list = cfg.get_list("sweep", "epsilon",
                            default=[0.02, 0.05, 0.1, 0.2, 0.5, 1.0])
    delta_list = cfg.get_list("sweep", "delta", default=[0.02, 0.05])
    n_seeds = cfg.get("sweep", "seeds", default=20, cast=int)
    base_seed = cfg.get("sampler", "seed", default=1, cast=int)
    n_metric = cfg.get("metric", "n", default=2000, cast=int)
    threads = cfg.get("run", "threads", default=1, cast=int)
    noise_cfg = cfg.noise()
    target = cfg.target() or point_mass(-1.0)
    if target.dim != 1:
        raise ConfigurationError("compare is a 1-D benchmark")

    cells = [(family, eps, delta, s)
             for family in families for eps in eps_list
             for delta in delta_list for s in range(n_seeds)]

    def work(cell):
        family, eps, delta, s = cell
        val, status = _compare_cell(cfg, family, eps, delta, s, base_seed,
                                    noise_cfg, target, n_metric)
        return cell, val, status

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, cells))
    else:
        results = [work(c) for c in cells]
    results.sort(key=lambda r: (r[0][0], r[0][1], r[0][2], r[0][3]))

    detail = [[f, e, d, s, v, status] for (f, e, d, s), v, status in results]
    seeds = list(range(n_seeds))
    res.files.append(_write_csv(os.path.join(out, "compare_cells.csv"),
                                ["family", "epsilon", "delta", "seed", "w2", "status"],
                                detail, cfg, seeds))
    summary = []
    table = {}
    for family in families:
        for eps in eps_list:
            for delta in delta_list:
                vals = np.array([v for (f, e, d, s), v, st in results
                                 if f == family and e == eps and d == delta
                                 and not math.isnan(v)])
                mean = float(vals.mean()) if len(vals) else float("nan")
                stderr = float(vals.std(ddof=1) / math.sqrt(len(vals))) \
                    if len(vals) > 1 else float("nan")
                summary.append([family, eps, delta, mean, stderr, len(vals)])
                table[(family, eps, delta)] = (mean, stderr)
    res.files.append(_write_csv(os.path.join(out, "compare_summary.csv"),
                                ["family", "epsilon", "delta", "mean_w2",
                                 "stderr", "n_seeds"],
                                summary, cfg, seeds))
    res.files.append(plots.compare_figure(table, families, eps_list, delta_list,
                                          os.path.join(out, "compare.png")))
    for delta in delta_list:
        line = ", ".join(
            f"{f}@eps={e}: {table[(f, e, delta)][0]:.3g}"
            for f in families for e in eps_list)
        res.say(f"compare dt={delta}: {line}")
    res.ok = all(not math.isnan(v) for _, v, st in results)
    return res


# ------------------------------------------------------------------ swissroll

def _swissroll_run(spec, train_target, noise, seed, n_steps, n_paths, snr,
                   corrector_steps, save_every=None):
    score = noisy_score(mixture_score_field(spec, train_target), noise, spec.dim)
    proc = ReverseProcess(spec=spec, score=score)
    scfg = SamplerConfig(n_steps=n_steps, n_paths=n_paths, seed=seed,
                         method="pc" if corrector_steps >= 1 else "em",
                         snr=snr, corrector_steps=corrector_steps,
                         save_every=save_every)
    return sample(proc, scfg)


def run_swissroll(cfg: ExperimentConfig) -> ExperimentResult:
    """Swiss-Roll generation with the exact empirical-mixture score."""
    res = ExperimentResult(ok=True)
    out = _out_dir(cfg)
    families = cfg.get_list("swissroll", "families",
                            default=["subvp", "csubvp", "ou", "cou"], cast=str)
    n_train = cfg.get("swissroll", "n_train", default=400, cast=int)
    n_test = cfg.get("swissroll", "n_test", default=500, cast=int)
    n_seeds = cfg.get("swissroll", "seeds", default=10, cast=int)
    n_steps = cfg.get("sampler", "n_steps", default=500, cast=int)
    snr = cfg.get("sampler", "snr", default=0.2, cast=float)
    corrector_steps = cfg.get("sampler", "corrector_steps", default=1, cast=int)
    base_seed = cfg.get("sampler", "seed", default=1, cast=int)
    data_seed = cfg.get("swissroll", "data_seed", default=11, cast=int)
    jitter = cfg.get("swissroll", "jitter", default=0.0, cast=float)
    save_every = cfg.get("run", "save_every", default=None, cast=int)
    threads = cfg.get("run", "threads", default=1, cast=int)
    noise_cfg = cfg.noise()

    train = swiss_roll(n_train, seed=data_seed, jitter=jitter)
    train_target = empirical_target(train)

    jobs = [(family, s) for family in families for s in range(n_seeds)]

    def work(job):
        family, s = job
        spec = _family_spec(cfg, family, context="swissroll")
        noise = NoiseModel(mode=noise_cfg.mode, epsilon=noise_cfg.epsilon,
                           seed=noise_cfg.seed + s)
        batch = _swissroll_run(spec, train_target, noise,
                               seed=base_seed + 1000 * s, n_steps=n_steps,
                               n_paths=n_test, snr=snr,
                               corrector_steps=corrector_steps,
                               save_every=save_every if s == 0 else None)
        held = swiss_roll(n_test, seed=data_seed + 1000 + s, jitter=jitter)
        w2 = w2_assignment(batch.final, held).value
        return job, w2, batch

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    results.sort(key=lambda r: (r[0][0], r[0][1]))

    rows = [[f, s, v] for (f, s), v, _ in results]
    seeds = list(range(n_seeds))
    res.files.append(_write_csv(os.path.join(out, "swissroll_w2.csv"),
                                ["family", "seed", "w2"], rows, cfg, seeds))
    means = []
    for family in families:
        vals = np.array([v for (f, s), v, _ in results if f == family])
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 \
            else 0.0
        means.append([family, float(vals.mean()), se])
        res.say(f"swissroll {family}: W2 = {vals.mean():.4f} +/- {se:.4f}")
    res.files.append(_write_csv(os.path.join(out, "swissroll_summary.csv"),
                                ["family", "mean_w2", "stderr"], means, cfg, seeds))

    first = {family: next(b for (f, s), v, b in results if f == family and s == 0)
             for family in families}
    if save_every is not None:
        for family, batch in first.items():
            snap_csv = os.path.join(out, f"swissroll_snapshots_{family}.csv")
            batch.export_csv(snap_csv)
            res.files.append(snap_csv)
    res.files.append(plots.swissroll_figure(
        train, {f: b.final for f, b in first.items()},
        os.path.join(out, "swissroll.png")))
    snap_family = families[0]
    res.files.append(plots.snapshot_figure(
        first[snap_family], train, os.path.join(out, "swissroll_evolution.png")))
    return res


# --------------------------------------------------------------------- bounds

def run_bounds(cfg: ExperimentConfig) -> ExperimentResult:
    """Tabulate u(t) and the scalar error bounds for the configured family."""
    res = ExperimentResult(ok=True)
    out = _out_dir(cfg)
    sec = cfg.sections.get("bounds", {})
    family = sec.get("family", cfg.sections.get("sde", {}).get("kind", "cou"))
    spec = _family_spec(cfg, family)
    L = float(sec.get("L", 1.0))
    eps = float(sec.get("epsilon", 0.1))
    eta = float(sec.get("eta", 0.0))
    h = float(sec["h"]) if "h" in sec else None
    kappa = float(sec["kappa"]) if "kappa" in sec else None
    second_moment = float(sec.get("second_moment", 1.0))
    n_grid = int(sec.get("n_grid", 101))

    inp = BoundInputs.from_spec(spec, L=L, epsilon=eps, eta=eta, h=h,
                                kappa=kappa, second_moment=second_moment)
    h_used = h if h is not None else 0.1
    ts = np.linspace(0.0, spec.T, n_grid)
    rows = [[float(t), u_of_t(inp, float(t), h=h_used)] for t in ts]
    res.files.append(_write_csv(os.path.join(out, "bounds_u.csv"),
                                ["t", "u"], rows, cfg, []))
    bound = sampling_error_bound(inp)
    scalars = [["sampling_error_bound", bound]]
    res.say(f"bounds {family}: sampling_error_bound = {bound:.6g} "
            f"(L={L}, eps={eps}, eta={eta})")
    if spec.kind is SDEKind.CVP and kappa is not None:
        cb = cvp_bound(inp)
        scalars.append(["cvp_bound_w2_squared", cb])
        res.say(f"bounds {family}: cvp_bound (W2^2) = {cb:.6g}")
    res.files.append(_write_csv(os.path.join(out, "bounds_scalars.csv"),
                                ["bound", "value"], scalars, cfg, []))
    res.files.append(plots.bounds_figure(
        np.array([r[0] for r in rows]), np.array([r[1] for r in rows]),
        inp, os.path.join(out, "bounds.png")))
    res.ok = math.isfinite(bound)
    return res


# ------------------------------------------------------------ transform check

def run_transform_check(cfg: ExperimentConfig) -> ExperimentResult:
    """Grid check of the time map identity and the precondition report."""
    res = ExperimentResult(ok=True)
    out = _out_dir(cfg)
    sec = cfg.sections.get("transform", {})
    T = float(sec.get("T", 1.0))
    ve = DiffusionSpec(kind="ve", T=T, dim=int(sec.get("dim", 1)),
                       sigma_min=float(sec.get("sigma_min", 0.05)),
                       sigma_max=float(sec.get("sigma_max", 10.0)))
    c = DiffusionSpec(kind="csubvp", T=T, dim=ve.dim,
                      beta_min=float(sec.get("beta_min", 0.01)),
                      beta_max=float(sec.get("beta_max", 8.0)))
    tmap = TransformMap(ve_spec=ve, c_spec=c)
    rep = check_precondition(tmap)
    res.say(f"transform-check precondition: g(T)^2 = {rep.g2_at_T:.6g} vs "
            f"sigma gap = {rep.sigma_gap:.6g} -> "
            f"{'PASS' if rep.ok else 'FAIL'} (max admissible T = "
            f"{rep.max_admissible_T:.6g})")
    rows = []
    max_resid = 0.0
    if rep.ok:
        n_grid = int(sec.get("n_grid", 1000))
        log_ratio = math.log(ve.sigma_max / ve.sigma_min)
        for t in np.linspace(0.0, T, n_grid):
            tt = float(t)
            tv = tau(tmap, tt)
            f = tmap.f(tt)
            g = tmap.g(tt)
            lhs = ve.sigma_min ** 2 * math.expm1(2.0 * tv / T * log_ratio)
            resid = abs(lhs - g * g) / max(g * g, 1e-300) if g > 0 else abs(lhs)
            max_resid = max(max_resid, resid)
            rows.append([tt, tv, f, g, resid])
        res.say(f"transform-check identity: max residual = {max_resid:.3g} "
                f"({'PASS' if max_resid <= 1e-10 else 'FAIL'})")
        res.ok = max_resid <= 1e-10
    else:
        res.ok = False
    res.files.append(_write_csv(os.path.join(out, "transform_check.csv"),
                                ["t", "tau", "f", "g", "residual"], rows, cfg, []))
    if rows:
        res.files.append(plots.transform_figure(
            np.asarray(rows, float), os.path.join(out, "transform_check.png")))
    return res


# ---------------------------------------------------------------- contraction

def run_contraction(cfg: ExperimentConfig) -> ExperimentResult:
    """Coupled-path decay rates per family with exact Gaussian-target scores."""
    from .sampler import coupled_contraction
    from .targets import score_lipschitz

    res = ExperimentResult(ok=True)
    out = _out_dir(cfg)
    sec = cfg.sections.get("contraction", {})
    families = cfg.get_list("contraction", "families",
                            default=["ou", "vp", "cou", "cvp", "csubvp"], cast=str)
    v0 = float(sec.get("target_var", 50.0))
    n_steps = int(sec.get("n_steps", 500))
    n_paths = int(sec.get("n_paths", 256))
    seed = int(sec.get("seed", 3))
    early_frac = float(sec.get("early_window", 0.2))

    rows, fits = [], []
    series = {}
    for family in families:
        spec = _family_spec(cfg, family)
        target = gaussian(np.zeros(spec.dim), v0)
        score = mixture_score_field(spec, target)
        proc = ReverseProcess(spec=spec, score=score)
        scfg = SamplerConfig(n_steps=n_steps, n_paths=n_paths, seed=seed)
        pr = prior(spec)
        rng = stream(seed, ROLE_INIT, 99)
        x0 = pr.mean[None, :] + pr.std * rng.standard_normal((n_paths, spec.dim))
        y0 = x0 + 1.0
        contractive = SDEKind(family) in CONTRACTIVE_KINDS
        span = spec.T - spec.t_eps
        window = None if contractive else (0.0, early_frac * span)
        rec = coupled_contraction(proc, scfg, (x0, y0), fit_window=window,
                                  record_every=max(n_steps // 100, 1))
        grid = np.linspace(0.0, spec.T, 201)
        # global Lipschitz constant of the exact Gaussian score over [0, T]
        L = max(score_lipschitz(spec, target, float(g)).value for g in grid)
        margin = min(drift_factor(spec, float(g))
                     - L * diffusion_coeff(spec, float(g)) ** 2 for g in grid)
        series[family] = rec
        fits.append([family, rec.rate, margin, "contractive" if contractive
                     else f"early[0,{early_frac:.2f}T]"])
        for t, r in zip(rec.times, rec.rms):
            rows.append([family, float(t), float(r)])
        res.say(f"contraction {family}: fitted rate = {rec.rate:+.4f} "
                f"(margin 0.5*min(r_b - L sigma^2) = {0.5*margin:+.4f})")
    res.files.append(_write_csv(os.path.join(out, "contraction_decay.csv"),
                                ["family", "t", "rms"], rows, cfg, [seed]))
    res.files.append(_write_csv(os.path.join(out, "contraction_rates.csv"),
                                ["family", "fitted_rate", "margin", "window"],
                                fits, cfg, [seed]))
    res.files.append(plots.contraction_figure(
        series, os.path.join(out, "contraction.png")))
    return res
