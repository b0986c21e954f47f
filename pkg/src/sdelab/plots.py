"""Figure rendering for the report runners. All figures go to files."""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def kernel_check_figure(curves: dict, path: str) -> str:
    """Exact kernel mean/std curves with simulated markers per family."""
    fig, (ax_m, ax_s) = plt.subplots(1, 2, figsize=(9, 3.6))
    for family, rows in curves.items():
        ts = [r[0] for r in rows]
        ax_m.plot(ts, [r[2] for r in rows], "-", lw=1, label=family)
        ax_m.plot(ts, [r[1] for r in rows], "o", ms=3, color=ax_m.lines[-1].get_color())
        ax_s.plot(ts, [r[4] for r in rows], "-", lw=1, label=family)
        ax_s.plot(ts, [r[3] for r in rows], "o", ms=3, color=ax_s.lines[-1].get_color())
    ax_m.set_xlabel("t")
    ax_m.set_ylabel("mean of X_t | X_0")
    ax_s.set_xlabel("t")
    ax_s.set_ylabel("cond. std s(t)")
    ax_s.set_yscale("log")
    ax_m.legend(fontsize=7, ncol=2)
    fig.suptitle("forward EM vs closed-form kernels (lines exact, dots simulated)",
                 fontsize=9)
    return _save(fig, path)


def compare_figure(table: dict, families, eps_list, delta_list, path: str) -> str:
    fig, axes = plt.subplots(1, len(delta_list), figsize=(4.6 * len(delta_list), 3.6),
                             squeeze=False)
    for ax, delta in zip(axes[0], delta_list):
        for family in families:
            means = [table[(family, e, delta)][0] for e in eps_list]
            errs = [table[(family, e, delta)][1] for e in eps_list]
            ax.errorbar(eps_list, means, yerr=errs, marker="o", ms=3,
                        lw=1, capsize=2, label=family)
        ax.set_xscale("log")
        ax.set_xlabel("score error epsilon")
        ax.set_ylabel("W2 to target")
        ax.set_title(f"dt = {delta}", fontsize=9)
        ax.legend(fontsize=8)
    return _save(fig, path)


def swissroll_figure(train: np.ndarray, finals: dict, path: str) -> str:
    n = len(finals)
    fig, axes = plt.subplots(1, n, figsize=(3.1 * n, 3.2), squeeze=False)
    for ax, (family, pts) in zip(axes[0], finals.items()):
        ax.scatter(train[:, 0], train[:, 1], s=4, c="lightgray", label="data")
        ax.scatter(pts[:, 0], pts[:, 1], s=4, c="tab:blue", label="generated")
        ax.set_title(family, fontsize=9)
        ax.set_aspect("equal")
        ax.legend(fontsize=7)
    return _save(fig, path)


def snapshot_figure(batch, train: np.ndarray, path: str) -> str:
    k = len(batch.times)
    take = list(range(k)) if k <= 6 else \
        sorted(set(np.linspace(0, k - 1, 6).astype(int)))
    fig, axes = plt.subplots(1, len(take), figsize=(2.6 * len(take), 2.8),
                             squeeze=False)
    for ax, i in zip(axes[0], take):
        pts = batch.states[i]
        ax.scatter(train[:, 0], train[:, 1], s=3, c="lightgray")
        ax.scatter(pts[:, 0], pts[:, 1], s=3, c="tab:red")
        ax.set_title(f"t_back = {batch.times[i]:.3g}", fontsize=8)
        ax.set_xticks([])
        ax.set_yticks([])
    return _save(fig, path)


def bounds_figure(ts: np.ndarray, us: np.ndarray, inputs, path: str) -> str:
    from .bounds import sampling_error_bound

    fig, (ax_u, ax_b) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax_u.plot(ts, us, lw=1.2)
    ax_u.axhline(0.0, color="gray", lw=0.6)
    ax_u.set_xlabel("t")
    ax_u.set_ylabel("u(t)")
    eps_grid = np.linspace(0.0, max(2.0 * inputs.epsilon, 1.0), 21)
    vals = []
    for e in eps_grid:
        inp = type(inputs)(**{**inputs.__dict__, "epsilon": float(e)})
        vals.append(sampling_error_bound(inp))
    ax_b.plot(eps_grid, vals, lw=1.2)
    ax_b.set_xlabel("epsilon")
    ax_b.set_ylabel("error bound")
    return _save(fig, path)


def transform_figure(rows: np.ndarray, path: str) -> str:
    fig, (ax_t, ax_r) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax_t.plot(rows[:, 0], rows[:, 1], lw=1.2)
    ax_t.set_xlabel("t")
    ax_t.set_ylabel("tau(t)")
    ax_r.semilogy(rows[:, 0], np.maximum(rows[:, 4], 1e-18), lw=1.0)
    ax_r.set_xlabel("t")
    ax_r.set_ylabel("identity residual (rel)")
    return _save(fig, path)


def contraction_figure(series: dict, path: str) -> str:
    fig, ax = plt.subplots(figsize=(5.4, 3.6))
    for family, rec in series.items():
        mask = rec.rms > 0
        ax.semilogy(rec.times[mask], rec.rms[mask], lw=1.2,
                    label=f"{family} (rate {rec.rate:+.3f})")
    ax.set_xlabel("backward time")
    ax.set_ylabel("coupled RMS distance")
    ax.legend(fontsize=8)
    return _save(fig, path)


def order_figure(deltas, errors, fit, path: str) -> str:
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.loglog(deltas, errors, "o", ms=4)
    dd = np.array(sorted(deltas))
    ax.loglog(dd, np.exp(fit.intercept) * dd ** fit.slope, "-", lw=1,
              label=f"slope {fit.slope:.3f}")
    ax.set_xlabel("step size delta")
    ax.set_ylabel("W2 discretization error")
    ax.legend(fontsize=8)
    return _save(fig, path)
